"""
Dropmark attack and defense
===========================

A malicious exit sends a few cells right after the circuit is built, when
a clean circuit should be silent, and a colluding guard watches for them.
The defense makes every circuit noisy in that window, so the guard's flag
stops telling it anything.
"""

import numpy as np

from fankit.sim import SimConfig, bayes_detection_rate, run, sweep

cfg = SimConfig(n_circuits=1000, seed=11)
for defense in (False, True):
    ledger = run(cfg.replace(defense=defense))
    print(f"defense {'on ' if defense else 'off'}: TPR {ledger.tpr:.3f}  FPR {ledger.fpr:.3f}  "
          f"padding/circuit {ledger.mean_padding():6.1f}  overhead {ledger.overhead_pct():5.2f}%")

covers = np.array([r.cover_ms for r in ledger.records])
print(f"cover duration: median {np.median(covers):.0f} ms, max {covers.max():.0f} ms")

# with large-scale detector rates a one-percent adversary is right about half the time
print("P(malicious | flag), F=0.01:", round(bayes_detection_rate(0.01, 0.999972, 0.007713), 3))

for row in sweep(SimConfig(n_circuits=300, seed=11), fractions=(0.01, 0.1, 0.5)):
    print(f"F={row['F']:.2f}  simulated off {row['bayes_sim_off']:.3f}  on {row['bayes_sim_on']:.3f}  "
          f"reference defended {row['bayes_reference_defended']:.4f}")
