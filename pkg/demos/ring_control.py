"""
Control experiment: one unlinked, untwisted ring carries no helicity and
relaxes freely; compare with the Hopf pair in hopf_gap.py.

    python demos/ring_control.py        # t_end = 5, under a minute
"""

import sys
from pathlib import Path

from toporelax.cli import relax_experiment
from toporelax.links import single_ring_config
from toporelax.relaxation import RunConfig

t_end = float(sys.argv[1]) if len(sys.argv) > 1 else 5.0
cfg = RunConfig(scheme="vallis", t_end=t_end, n=64)
cfg.link = single_ring_config()
result, violations, line = relax_experiment(cfg, Path("demo-out/ring"), plot=True)
E0, E1 = result.series[0].E_mag, result.series[-1].E_mag
print(f"E_mag {E0:.4f} -> {E1:.4f}: {100 * (1 - E1 / E0):.1f}% released in {result.steps} steps")
print(line)
