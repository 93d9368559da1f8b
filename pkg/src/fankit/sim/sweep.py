"""Bayesian detection rate across priors, from simulated and reference rates."""

from __future__ import annotations

import math

from .config import SimConfig
from .metrics import DegenerateDenominator, bayes_detection_rate
from .world import run

# detector rates measured at large scale, used for the analytic columns
REFERENCE_TPR = 0.999972
REFERENCE_FPR = 0.007713
REFERENCE_FPR_DEFENDED = 0.999975

DEFAULT_FRACTIONS = (0.01, 0.05, 0.1, 0.2, 0.5)
SWEEP_FIELDS = ("F", "tpr_off", "fpr_off", "tpr_on", "fpr_on", "bayes_sim_off", "bayes_sim_on",
                "bayes_reference", "bayes_reference_defended")


def _rate(F, tpr, fpr):
    if math.isnan(tpr) or math.isnan(fpr):
        return math.nan
    try:
        return bayes_detection_rate(F, tpr, fpr)
    except DegenerateDenominator:
        return math.nan


def sweep(config: SimConfig, fractions=DEFAULT_FRACTIONS) -> list:
    """One row per prior: simulated rates with the defense off and on, and the
    detection rate from those and from the reference rates."""
    rows = []
    for F in fractions:
        row = {"F": F}
        for tag, on in (("off", False), ("on", True)):
            ledger = run(config.replace(fraction_malicious=F, defense=on))
            row[f"tpr_{tag}"], row[f"fpr_{tag}"] = ledger.tpr, ledger.fpr
            row[f"bayes_sim_{tag}"] = _rate(F, ledger.tpr, ledger.fpr)
        row["bayes_reference"] = _rate(F, REFERENCE_TPR, REFERENCE_FPR)
        row["bayes_reference_defended"] = _rate(F, REFERENCE_TPR, REFERENCE_FPR_DEFENDED)
        rows.append(row)
    return rows
