"""Regenerate the bundled schematic transmittance table.

The table is a smooth stand-in for a clear-sky column transmittance
spectrum from the visible to the far infrared: Gaussian absorption bands at
the usual water vapour, carbon dioxide and ozone positions, an open window
between about 8 and 13 micrometres, and the water-vapour rotation band
closing the spectrum beyond about 20 micrometres.  It is NOT a digitization
of any published measurement; band depths and widths are round numbers.

Run from the repository root:

    python3 demos/make_transmittance.py
"""

from pathlib import Path

import numpy as np

# (centre um, width um, peak optical depth)
BANDS = [
    (0.76, 0.01, 0.8),    # O2 A band
    (0.94, 0.04, 1.5),    # H2O
    (1.13, 0.04, 1.2),
    (1.38, 0.07, 3.0),
    (1.87, 0.10, 3.2),
    (2.7, 0.20, 3.5),     # H2O + CO2
    (4.3, 0.15, 3.8),     # CO2
    (6.3, 0.80, 3.6),     # H2O bending band
    (9.6, 0.30, 1.2),     # O3
    (15.0, 1.60, 4.0),    # CO2 bending band
]

OUT = Path(__file__).resolve().parents[1] / "src" / "stratrt" / "data" / "transmittance.csv"


def optical_depth(lam):
    tau = 0.05 + 0.12 * (0.5 / lam) ** 4      # Rayleigh-like continuum
    for centre, width, depth in BANDS:
        tau = tau + depth * np.exp(-0.5 * ((lam - centre) / width) ** 2)
    # water-vapour rotation band, opaque from ~20 um outward
    tau = tau + 4.0 / (1.0 + np.exp(-(lam - 22.0) / 2.5))
    return tau


def main():
    lam = np.unique(np.concatenate([
        np.geomspace(0.25, 300.0, 160),
        np.linspace(7.0, 14.0, 29),
    ]))
    t = np.exp(-optical_depth(lam))
    t = np.clip(t, 1e-4, 1.0)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w") as fh:
        fh.write("wavelength_um,transmittance\n")
        for a, b in zip(lam, t):
            fh.write(f"{a:.6g},{b:.6g}\n")
    print(f"wrote {lam.size} samples to {OUT}")


if __name__ == "__main__":
    main()
