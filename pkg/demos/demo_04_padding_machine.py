"""
The dropmark defense padding machine
====================================

Bursts of 3 to 9 back-to-back padding cells separated by short gaps,
switched on by Activate and off by BeSilent.
"""

import random

import numpy as np

from fankit.padding import PaddingEvent, builtin_dropmark_def_machine, cells_in_window, instance

spec = builtin_dropmark_def_machine()
print(spec.to_text())

m = instance(spec, seed=1)
pending = m.step(PaddingEvent.Activate, 0.0)
sent = []
while pending and len(sent) < 40:
    pending.sort(key=lambda a: a.at_ms)
    a = pending.pop(0)
    if m.is_current(a):
        sent.append(a.at_ms)
        pending += m.step(PaddingEvent.PaddingSent, a.at_ms)
print("first cell times (ms):", np.round(sent[:20], 1))
m.step(PaddingEvent.BeSilent, sent[-1])
print("after BeSilent:", m.current_state)

rng = random.Random(2)
counts = np.array([cells_in_window(spec, 350.0, rng) for _ in range(2000)])
print(f"cells in a 350 ms cover window: mean {counts.mean():.1f}, "
      f"5-95% [{np.percentile(counts, 5):.0f}, {np.percentile(counts, 95):.0f}]")
