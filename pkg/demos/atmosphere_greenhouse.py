"""Earth atmosphere column and a blocked infrared window.

The column's absorption comes from the bundled schematic transmittance
table.  The first run uses the default scenario.  The second raises the
absorption inside a band of scaled frequency 1.1 < x < 1.7 (roughly 8.5 to
13 micrometres, the open thermal window) and compares ground temperature
and outgoing radiation.

    python3 demos/atmosphere_greenhouse.py
"""

import numpy as np

from stratrt import SCALES, Scenario, build_spectrum, greenhouse_compare, load_bundled_transmittance

scenario = Scenario(max_iters=80)
spectrum = build_spectrum(load_bundled_transmittance(), scenario)
print(f"{spectrum.n_freq} frequencies, kappa from {spectrum.kappa.min():.3g} to {spectrum.kappa.max():.3g}")
print(f"ground blackbody temperature: "
      f"{float(SCALES.to_kelvin(scenario.ground_temperature())):.1f} K")

cmp = greenhouse_compare(scenario, spectrum, window=(1.1, 1.7), blocked_kappa=5.0)
base, blocked = cmp.base, cmp.blocked
print(f"iterations: base {base.report.n_iter}, blocked {blocked.report.n_iter}")

print(f"\n{'z km':>6} {'T base K':>9} {'T blocked K':>12} {'dT K':>7}")
for i in range(0, base.z_km.size, 6):
    print(f"{base.z_km[i]:>6.2f} {base.T_kelvin[i]:>9.2f} {blocked.T_kelvin[i]:>12.2f} "
          f"{float(SCALES.to_kelvin(cmp.delta_T[i])):>+7.2f}")

nodes = base.x[cmp.in_window]
J_base = base.J_at_Z[cmp.in_window]
J_blocked = blocked.J_at_Z[cmp.in_window]
print(f"\nwindow has {nodes.size} frequency nodes; outgoing radiance there drops by "
      f"{100 * (1 - J_blocked.sum() / J_base.sum()):.0f}%")
print(f"ground warming: {cmp.ground_warming}, window dimmed: {cmp.window_dimmed}")
print(f"upper column cools: {bool(np.all(cmp.delta_T[-10:] < 0))}")
