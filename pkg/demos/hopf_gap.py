"""
Relaxation of the field on two oppositely linked Hopf pairs.

The total helicity is zero, so the Woltjer minimum is the zero field, yet
each pair keeps its subhelicity of +-2 under frozen-in transport and the
energy stalls above lambda1 * (|H+| + |H-|) = 4.

    python demos/hopf_gap.py            # t_end = 5, about 6 minutes on one core
    python demos/hopf_gap.py 0.5        # quick look
"""

import sys
from pathlib import Path

from toporelax.cli import hopf_pair_experiment

t_end = float(sys.argv[1]) if len(sys.argv) > 1 else 5.0
out = Path("demo-out/hopf_gap")


def show(rec):
    print(f"  t={rec.t:7.4f}  E_mag={rec.E_mag:10.5f}  "
          f"H+={rec.H_group[0]:+.5f}  H-={rec.H_group[1]:+.5f}")


result, violations, line = hopf_pair_experiment(n=64, scheme="vallis", t_end=t_end, out=out, plot=True)
first, last = result.series[0], result.series[-1]
print(f"initial E_mag={first.E_mag:.4f}, H_total={first.H_total:+.2e}")
for rec in result.series[:: max(1, len(result.series) // 10)]:
    show(rec)
show(last)
print(f"{result.steps} steps, {result.rejected} rejected, {result.wall_time:.0f}s")
print(line)
print("invariants:", "all held" if not violations else [str(v) for v in violations])
print(f"series, snapshots and plot in {out}/")
