"""Circuit-level simulation of the dropmark attack and the plugin-based defense."""

from .cells import INBOUND, OUTBOUND, Cell, CellKind
from .config import ConfigError, SimConfig
from .detect import RELAY_CLASS_KINDS, RELAY_CLASS_TIMING, Thresholds, detect, silence_window
from .metrics import (
    CSV_FIELDS,
    SUMMARY_FIELDS,
    CircuitRecord,
    DegenerateDenominator,
    MetricsLedger,
    bayes_detection_rate,
    export_metrics,
)
from .sweep import DEFAULT_FRACTIONS, SWEEP_FIELDS, sweep
from .world import Circuit, EventLoop, RelayHost, SimWorld, conservative_policy, defense_plugin_bundle, run

__all__ = [
    "INBOUND", "OUTBOUND", "Cell", "CellKind", "ConfigError", "SimConfig",
    "RELAY_CLASS_KINDS", "RELAY_CLASS_TIMING", "Thresholds", "detect", "silence_window",
    "CSV_FIELDS", "SUMMARY_FIELDS", "CircuitRecord", "DegenerateDenominator", "MetricsLedger",
    "bayes_detection_rate", "export_metrics",
    "DEFAULT_FRACTIONS", "SWEEP_FIELDS", "sweep",
    "Circuit", "EventLoop", "RelayHost", "SimWorld", "conservative_policy", "defense_plugin_bundle", "run",
]
