"""Load-time measurement for plugin bundles, cold versus cached."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hooks
from .manager import ALL_FIELDS, HookRegistry, PluginManager


def host_manager(**kwargs) -> PluginManager:
    """A manager with every core and simulator hook published."""
    mgr = PluginManager(HookRegistry(), **kwargs)
    mgr.publish_core_hooks()
    for name in hooks.SIM_HOOKS:
        mgr.registry.publish(name, fields=ALL_FIELDS)
    return mgr


@dataclass
class Timing:
    min_us: float
    median_us: float
    p99_us: float

    @classmethod
    def of(cls, samples):
        a = np.asarray(samples, dtype=float)
        return cls(float(a.min()), float(np.median(a)), float(np.percentile(a, 99)))


@dataclass
class LoadReport:
    name: str
    entry_points: int
    bytecode_bytes: int
    cold: Timing
    cached: Timing


def measure_load(desc, reps: int = 50, manager: PluginManager | None = None) -> LoadReport:
    """Cold loads clear the decode cache first; cached loads reuse it."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    mgr = manager or host_manager()

    def once(clear):
        if clear:
            mgr.clear_cache()
        ctx = mgr.load(desc)
        mgr.unload(ctx)
        return ctx.load_us

    once(True)  # warm the interpreter's own code paths
    cold = [once(True) for _ in range(reps)]
    once(False)
    cached = [once(False) for _ in range(reps)]
    return LoadReport(desc.name, len(desc.entry_points), desc.bytecode_size,
                      Timing.of(cold), Timing.of(cached))
