"""Guard-side dropmark detector."""

from __future__ import annotations

from dataclasses import dataclass

from .cells import CellKind

RELAY_CLASS_TIMING = frozenset({CellKind.DATA, CellKind.UNKNOWN_RELAY, CellKind.PADDING})
RELAY_CLASS_KINDS = frozenset({CellKind.DATA, CellKind.UNKNOWN_RELAY})


@dataclass(frozen=True)
class Thresholds:
    min_cells: int = 2
    spacing_ms: float = 100.0
    tolerance_ms: float = 50.0
    mode: str = "timing"

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.detector_min_cells, cfg.dropmark_spacing_ms, cfg.detector_tolerance_ms,
                   cfg.detector_mode)


def silence_window(trace):
    """Inbound cells strictly between the first CREATED and the first CONNECTED."""
    out, started = [], False
    for t, kind in trace:
        if kind == CellKind.CREATED and not started:
            started = True
            continue
        if kind == CellKind.CONNECTED:
            break
        if started:
            out.append((t, kind))
    return out


def detect(trace, thresholds: Thresholds = Thresholds()) -> bool:
    """Flag a circuit whose silence window holds a chain of ``min_cells``
    relay-class cells, each within ``spacing ± tolerance`` of the previous one.

    ``trace`` is the guard's time-ordered inbound observation ``[(t_ms, kind)]``.
    """
    cls = RELAY_CLASS_TIMING if thresholds.mode == "timing" else RELAY_CLASS_KINDS
    times = [t for t, k in silence_window(trace) if k in cls]
    if len(times) < thresholds.min_cells:
        return False
    if thresholds.min_cells == 1:
        return True
    lo = thresholds.spacing_ms - thresholds.tolerance_ms
    hi = thresholds.spacing_ms + thresholds.tolerance_ms
    # chain[i]: longest conforming chain ending at cell i
    chain = [1] * len(times)
    start = 0
    for i, t in enumerate(times):
        while times[start] < t - hi:
            start += 1
        for j in range(start, i):
            if lo <= t - times[j] <= hi and chain[j] + 1 > chain[i]:
                chain[i] = chain[j] + 1
        if chain[i] >= thresholds.min_cells:
            return True
    return False
