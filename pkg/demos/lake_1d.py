"""Sunlit lake column, one dimension.

A 10 m water column is lit from above.  Each outer iteration adds the
radiation absorbed from the previous temperature profile and then solves the
conduction balance.  The printout shows the iterates rising monotonically
toward the fixed point, with the increments shrinking by roughly the
contraction factor each step.

    python3 demos/lake_1d.py
"""

import numpy as np

from stratrt import equilibrium_temperature, grey_iterate, lake_1d_config

cfg = lake_1d_config(outer_iters=40, tol=1e-9)
profile, report = grey_iterate(cfg, n_intervals=200, keep_iterates=True)

print(f"contraction bound C1 = {report.flags['contraction_bound']:.4f}")
print(f"{'iter':>4} {'T max':>10} {'sup dT':>10} {'ratio':>8}")
for n, (T, dT) in enumerate(zip(report.iterates, report.sup_increment), start=1):
    ratio = report.sup_increment[n - 1] / report.sup_increment[n - 2] if n > 1 else float("nan")
    print(f"{n:>4} {np.max(T):>10.6f} {dT:>10.2e} {ratio:>8.3f}")
print(f"converged: {report.converged}, monotone: {report.monotone}")

z = profile.coords
T_e = equilibrium_temperature(cfg, z)
print(f"\n{'z':>6} {'T_e':>8} {'T':>8}")
for i in range(0, len(z), 25):
    print(f"{z[i]:>6.2f} {T_e[i]:>8.4f} {profile.T[i]:>8.4f}")
