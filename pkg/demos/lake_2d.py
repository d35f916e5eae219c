"""Cross-section of a bowl-shaped lake.

The bed follows a quarter ellipse, deepest at the centre line x = 0 and
shallowing toward the shore.  Radiation couples nodes only within a column,
while conduction also runs sideways along the terrain-following grid.
Shallow columns absorb less sunlight before reaching the bed, so the
printout shows the surface warming less toward the shore.

    python3 demos/lake_2d.py
"""

import numpy as np

from stratrt import Terrain2D, grey_solve_2d, lake_1d_config

terrain = Terrain2D.quarter_disc(width=30.0, depth=10.0, n_x=31, n_sigma=40)
cfg = lake_1d_config(bc_bottom="equilibrium", outer_iters=60, tol=1e-8)
T, report = grey_solve_2d(terrain, cfg)
print(f"{report.n_iter} outer iterations, converged: {report.converged}, monotone: {report.monotone}")

depth = terrain.column_depth
print(f"\n{'x':>6} {'depth':>7} {'T surface':>10} {'T bed':>8}")
for i in range(0, terrain.x.size, 5):
    print(f"{terrain.x[i]:>6.1f} {depth[i]:>7.2f} {T[i, 0]:>10.4f} {T[i, -1]:>8.4f}")

coarse = Terrain2D.quarter_disc(width=30.0, depth=10.0, n_x=16, n_sigma=20)
T_coarse, _ = grey_solve_2d(coarse, cfg)
print(f"\nmax change when halving the grid: {np.max(np.abs(T[::2, ::2] - T_coarse)):.2e}")
