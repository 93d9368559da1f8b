"""Confusion-matrix ledger, CSV export and the Bayesian detection rate."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

CSV_FIELDS = ("circuit_id", "malicious_exit", "flagged", "padding_cells", "cover_ms", "cells_total")
SUMMARY_FIELDS = ("circuits", "tp", "fp", "tn", "fn", "tpr", "fpr", "accuracy",
                  "mean_padding_cells", "mean_cover_ms", "overhead_pct")


class DegenerateDenominator(ZeroDivisionError):
    pass


def bayes_detection_rate(F: float, tpr: float, fpr: float) -> float:
    """P(malicious exit | dropmark observed) for prior F."""
    for name, v in (("F", F), ("TPR", tpr), ("FPR", fpr)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    num = F * tpr
    den = num + (1.0 - F) * fpr
    if den == 0:
        raise DegenerateDenominator("F*TPR + (1-F)*FPR is zero")
    return num / den


@dataclass
class CircuitRecord:
    circuit_id: int
    malicious_exit: bool
    flagged: bool
    padding_cells: int
    cover_ms: float
    cells_total: int
    torn_down: bool = False
    leaked_clean_cells: int = 0
    suppressed_cells: int = 0
    activate_signals: int = 0
    silent_signals: int = 0


@dataclass
class MetricsLedger:
    records: list = field(default_factory=list)

    def add(self, rec: CircuitRecord):
        self.records.append(rec)

    def _count(self, malicious, flagged):
        return sum(1 for r in self.records if r.malicious_exit == malicious and r.flagged == flagged)

    @property
    def TP(self):
        return self._count(True, True)

    @property
    def FN(self):
        return self._count(True, False)

    @property
    def FP(self):
        return self._count(False, True)

    @property
    def TN(self):
        return self._count(False, False)

    @staticmethod
    def _ratio(a, b):
        return a / b if b else math.nan

    @property
    def tpr(self):
        return self._ratio(self.TP, self.TP + self.FN)

    @property
    def fpr(self):
        return self._ratio(self.FP, self.FP + self.TN)

    @property
    def accuracy(self):
        return self._ratio(self.TP + self.TN, len(self.records))

    def flag_rate(self, malicious: bool):
        group = [r for r in self.records if r.malicious_exit == malicious]
        return self._ratio(sum(r.flagged for r in group), len(group))

    @property
    def padding_counts(self):
        return [r.padding_cells for r in self.records]

    @property
    def cover_durations(self):
        return [r.cover_ms for r in self.records]

    def mean_padding(self):
        return self._ratio(sum(self.padding_counts), len(self.records))

    def mean_cover_ms(self):
        covered = [r.cover_ms for r in self.records if r.cover_ms > 0]
        return self._ratio(sum(covered), len(covered))

    def overhead_pct(self):
        return 100.0 * self._ratio(sum(self.padding_counts), sum(r.cells_total for r in self.records))

    def summary(self) -> dict:
        return {
            "circuits": len(self.records), "tp": self.TP, "fp": self.FP, "tn": self.TN, "fn": self.FN,
            "tpr": self.tpr, "fpr": self.fpr, "accuracy": self.accuracy,
            "mean_padding_cells": self.mean_padding(), "mean_cover_ms": self.mean_cover_ms(),
            "overhead_pct": self.overhead_pct(),
        }

    def __eq__(self, other):
        return isinstance(other, MetricsLedger) and self.records == other.records


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return v


def export_metrics(ledger: MetricsLedger, path) -> tuple:
    """Write per-circuit rows to ``path`` and the summary row to ``<stem>.summary.csv``."""
    path = Path(path)
    summary_path = path.with_name(path.stem + ".summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in ledger.records:
            w.writerow([_cell(getattr(r, f)) for f in CSV_FIELDS])
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        s = ledger.summary()
        w.writerow(SUMMARY_FIELDS)
        w.writerow([_cell(s[f]) for f in SUMMARY_FIELDS])
    return path, summary_path
