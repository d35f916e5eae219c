"""Earth-atmosphere column: transmittance ingestion, scenario assembly and
the window-blocking (greenhouse) comparison.

Altitudes are in km, wavelengths in micrometres, temperatures and
frequencies in the scaled units of :mod:`stratrt.specfun`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .common import IterationReport
from .errors import ConfigError
from .kernels import BoundarySourceSpec, Grid1D
from .specfun import SCALES, planck
from .spectral import KernelCache, RadiationState, SolverControls, Spectrum, run_spectral

KAPPA_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class TransmittanceTable:
    """Column transmittance samples ``t`` at increasing wavelengths (um)."""

    wavelength_um: np.ndarray
    transmittance: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.wavelength_um, dtype=float)
        t = np.asarray(self.transmittance, dtype=float)
        if lam.ndim != 1 or lam.shape != t.shape:
            raise ValueError("wavelength and transmittance must be 1-D of equal length")
        if lam.size == 0:
            raise ValueError("empty transmittance table")
        if np.any(lam <= 0):
            raise ValueError("wavelengths must be positive")
        if np.any(np.diff(lam) == 0):
            raise ValueError("duplicate wavelengths")
        if np.any(np.diff(lam) < 0):
            raise ValueError("wavelengths must be strictly increasing")
        if np.any(t <= 0) or np.any(t > 1):
            raise ValueError("transmittance must lie in (0, 1]")
        object.__setattr__(self, "wavelength_um", lam)
        object.__setattr__(self, "transmittance", t)

    def __len__(self):
        return self.wavelength_um.size

    def absorption(self) -> np.ndarray:
        """kappa = -log t, floored so fully transparent samples stay positive."""
        return np.maximum(-np.log(self.transmittance), KAPPA_FLOOR)


def load_transmittance(path) -> TransmittanceTable:
    """Read a two-column ``wavelength_um,transmittance`` CSV (header optional)."""
    path = Path(path)
    lam, t = [], []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                if lineno == 1 and not lam:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            if not 0 < b <= 1:
                raise ValueError(f"{path}:{lineno}: transmittance {b} outside (0, 1]")
            lam.append(a)
            t.append(b)
    if not lam:
        raise ValueError(f"{path}: no data rows")
    return TransmittanceTable(np.array(lam), np.array(t))


def bundled_transmittance_path() -> Path:
    return Path(str(resources.files("stratrt") / "data" / "transmittance.csv"))


def load_bundled_transmittance() -> TransmittanceTable:
    """The schematic clear-sky table shipped with the package."""
    return load_transmittance(bundled_transmittance_path())


@dataclass(frozen=True)
class AltitudeMap:
    """tau(z) = 1 - exp(-z / H) for an exponential density with scale H (km)."""

    scale_height_km: float = 10.0
    top_km: float = 12.0

    def __post_init__(self):
        if not self.scale_height_km > 0 or not self.top_km > 0:
            raise ValueError("scale height and top altitude must be positive")

    @property
    def Z(self) -> float:
        return float(self.tau(self.top_km))

    def tau(self, z_km):
        return -np.expm1(-np.asarray(z_km, dtype=float) / self.scale_height_km)

    def z(self, tau):
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau >= 1):
            raise ValueError("tau must lie in [0, 1)")
        return -self.scale_height_km * np.log1p(-tau)


@dataclass(frozen=True)
class Scenario:
    """Parameters of the atmosphere column (defaults: the reference case)."""

    thickness_km: float = 12.0
    solar_power_scaled: float = 3.042e-5
    ground_direct_fraction: float = 0.99
    ground_albedo: float = 0.10
    high_altitude_source_fraction: float = 0.001
    cloud_albedo: float = 0.20
    cloud_bottom_km: float = 6.0
    cloud_top_km: float = 9.0
    rayleigh_albedo: float = 0.20
    rayleigh_base_km: float = 9.0
    kappa_mean: float = 1.225
    scale_height_km: float = 10.0
    sun_temperature: float = 5.8
    n_depth: int = 60
    n_freq: int = 300
    max_iters: int = 22
    tol: float = 1e-6

    def __post_init__(self):
        errors = validate_scenario_values(asdict(self))
        if errors:
            raise ConfigError(errors)

    @property
    def altitude_map(self) -> AltitudeMap:
        return AltitudeMap(self.scale_height_km, self.thickness_km)

    def grid(self) -> Grid1D:
        return Grid1D.uniform(self.altitude_map.Z, self.n_depth)

    def ground_temperature(self) -> float:
        """Blackbody temperature of the ground re-emitting the absorbed sunlight.

        The direct beam carries the flux of a |mu|-weighted source
        ``s B(T_S)``; re-emitted isotropically it has amplitude
        (2/3) d (1 - alpha) s B(T_S) in flux terms.
        """
        s = self.solar_power_scaled
        factor = (2.0 / 3.0) * self.ground_direct_fraction * (1.0 - self.ground_albedo) * s
        return float(factor ** 0.25 * self.sun_temperature)


_FRACTIONS = ("ground_direct_fraction", "ground_albedo", "high_altitude_source_fraction",
              "cloud_albedo", "rayleigh_albedo")
_POSITIVE = ("thickness_km", "kappa_mean", "scale_height_km", "tol")
_NONNEG = ("solar_power_scaled", "sun_temperature", "cloud_bottom_km", "cloud_top_km",
           "rayleigh_base_km")
_COUNTS = {"n_depth": 2, "n_freq": 2, "max_iters": 1}


def validate_scenario_values(values: dict) -> list:
    """Range checks on scenario fields; returns a list of messages."""
    errors = []
    for name in _FRACTIONS:
        v = values.get(name)
        if not (isinstance(v, (int, float)) and 0 <= v < 1):
            errors.append(f"{name}: must lie in [0, 1), got {v!r}")
    for name in _POSITIVE:
        v = values.get(name)
        if not (isinstance(v, (int, float)) and v > 0):
            errors.append(f"{name}: must be > 0, got {v!r}")
    for name in _NONNEG:
        v = values.get(name)
        if not (isinstance(v, (int, float)) and v >= 0):
            errors.append(f"{name}: must be >= 0, got {v!r}")
    for name, lo in _COUNTS.items():
        v = values.get(name)
        if not (isinstance(v, int) and not isinstance(v, bool) and v >= lo):
            errors.append(f"{name}: must be an integer >= {lo}, got {v!r}")
    if not errors:
        if values["cloud_albedo"] + values["rayleigh_albedo"] >= 1:
            errors.append("cloud_albedo + rayleigh_albedo must be < 1")
        if values["cloud_bottom_km"] > values["cloud_top_km"]:
            errors.append("cloud_bottom_km must not exceed cloud_top_km")
    return errors


def scenario_field_names():
    return [f.name for f in fields(Scenario)]


def wavelength_to_x(wavelength_um):
    """Scaled frequency x = h c / (lambda k 1000 K)."""
    return SCALES.x_from_wavelength(wavelength_um)


def _kappa_of_x(table: TransmittanceTable):
    """Piecewise-linear kappa(x) on increasing x."""
    x = wavelength_to_x(table.wavelength_um)[::-1]
    k = table.absorption()[::-1]
    return x, k


def place_frequency_nodes(x_samples, k_samples, n_freq):
    """Cell midpoints and widths for ``n_freq`` cells whose density in x is
    proportional to 1 + |dkappa/dx| (normalized by the mean slope)."""
    dk = np.abs(np.diff(k_samples) / np.diff(x_samples))
    span = x_samples[-1] - x_samples[0]
    slope_scale = float(np.sum(dk * np.diff(x_samples)) / span) or 1.0
    density = 1.0 + dk / slope_scale
    cdf = np.concatenate([[0.0], np.cumsum(density * np.diff(x_samples))])
    cdf /= cdf[-1]
    edges = np.interp(np.linspace(0.0, 1.0, n_freq + 1), cdf, x_samples)
    return 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)


def build_spectrum(table: TransmittanceTable, scenario: Scenario, grid: Grid1D = None,
                   stefan_tolerance: float = 5e-3) -> Spectrum:
    """Frequency grid, absorption and albedos for a scenario.

    The raw absorption -log t is interpolated linearly in x and rescaled so
    its Planck-weighted mean at the ground temperature equals
    ``scenario.kappa_mean``.
    """
    if len(table) < 2:
        raise ValueError("need at least two transmittance samples")
    grid = scenario.grid() if grid is None else grid
    xs, ks = _kappa_of_x(table)
    x, w = place_frequency_nodes(xs, ks, scenario.n_freq)
    kappa = np.maximum(np.interp(x, xs, ks), KAPPA_FLOOR)
    Tg = scenario.ground_temperature()
    Bg = planck(x, Tg) * w
    mean = float(Bg @ kappa / Bg.sum()) if Bg.sum() > 0 else float(kappa.mean())
    kappa = np.maximum(kappa * scenario.kappa_mean / mean, KAPPA_FLOOR)
    a_iso, a_ray = altitude_albedos(scenario, grid)
    F = x.size
    spec = Spectrum(x, w, kappa, np.broadcast_to(a_iso, (F, a_iso.size)),
                    np.broadcast_to(a_ray, (F, a_ray.size)), stefan_tolerance=stefan_tolerance)
    if Tg > 0:
        spec.check_stefan(Tg)
    return spec


def altitude_albedos(scenario: Scenario, grid: Grid1D):
    """Isotropic (cloud) and Rayleigh albedo at every depth node."""
    z = scenario.altitude_map.z(grid.nodes)
    eps = 1e-9
    cloud = (z >= scenario.cloud_bottom_km - eps) & (z <= scenario.cloud_top_km + eps)
    ray = z > scenario.rayleigh_base_km + eps
    return np.where(cloud, scenario.cloud_albedo, 0.0), np.where(ray, scenario.rayleigh_albedo, 0.0)


def grey_spectrum(spectrum: Spectrum, kappa_value: float) -> Spectrum:
    """Same grid and albedos with a constant absorption coefficient."""
    return spectrum.with_kappa(np.full(spectrum.n_freq, float(kappa_value)))


def scenario_sources(scenario: Scenario, spectrum: Spectrum):
    """Top: directional high-altitude fraction of the diluted solar spectrum.
    Bottom: the ground as a blackbody at :meth:`Scenario.ground_temperature`."""
    x = spectrum.freq_nodes
    sun = scenario.solar_power_scaled * planck(x, scenario.sun_temperature)
    top = BoundarySourceSpec("directional", scenario.high_altitude_source_fraction * sun, "top")
    bottom = BoundarySourceSpec("blackbody", scenario.ground_temperature(), "bottom")
    return (top, bottom)


@dataclass
class ScenarioResult:
    z_km: np.ndarray
    tau: np.ndarray
    T: np.ndarray
    J_at_Z: np.ndarray
    x: np.ndarray
    kappa: np.ndarray
    state: RadiationState
    report: IterationReport
    sensitivities: dict = field(default_factory=dict)

    @property
    def T_kelvin(self):
        return SCALES.to_kelvin(self.T)


def run_scenario(scenario: Scenario, spectrum: Spectrum, threads: int = 1,
                 sensitivities: bool = False, rel_step: float = 0.01) -> ScenarioResult:
    """Solve the column and map the result back to altitude.

    With ``sensitivities`` the report also carries one-sided differences of
    T(0) with respect to the high-altitude source fraction and the ground
    albedo (two extra runs).
    """
    grid = scenario.grid()
    controls = SolverControls(max_iters=scenario.max_iters, tol=scenario.tol, threads=threads)
    alpha = scenario.ground_albedo
    cache = KernelCache(spectrum, grid, alpha, threads)
    sources = scenario_sources(scenario, spectrum)
    state, profile, report = run_spectral(spectrum, grid, sources, alpha, controls, cache)
    z = scenario.altitude_map.z(grid.nodes)
    result = ScenarioResult(z, grid.nodes.copy(), profile.T, state.J[:, -1].copy(),
                            spectrum.freq_nodes.copy(), spectrum.kappa.copy(), state, report)
    if sensitivities:
        base = profile.T[0]
        for name in ("high_altitude_source_fraction", "ground_albedo"):
            v = getattr(scenario, name)
            h = rel_step * v if v > 0 else rel_step
            bumped = replace(scenario, **{name: v + h})
            other = run_scenario(bumped, spectrum, threads)
            result.sensitivities[f"dT0_d{name}"] = float((other.T[0] - base) / h)
        report.flags.update(result.sensitivities)
    return result


def block_window(spectrum: Spectrum, window, blocked_kappa: float) -> Spectrum:
    """Copy of ``spectrum`` with kappa set to ``blocked_kappa`` on x in [lo, hi]."""
    lo, hi = window
    if lo > hi:
        raise ValueError("window must satisfy lo <= hi")
    if not blocked_kappa > 0:
        raise ValueError("blocked_kappa must be positive")
    x = spectrum.freq_nodes
    if hi < x[0] or lo > x[-1]:
        raise ValueError("window lies outside the frequency grid")
    kappa = spectrum.kappa.copy()
    inside = (x >= lo) & (x <= hi)
    kappa[inside] = blocked_kappa
    return spectrum.with_kappa(kappa)


@dataclass
class GreenhouseComparison:
    base: ScenarioResult
    blocked: ScenarioResult
    window: tuple
    delta_T: np.ndarray
    in_window: np.ndarray
    ground_warming: bool
    window_dimmed: bool

    @property
    def delta_T0(self) -> float:
        return float(self.delta_T[0])


def greenhouse_compare(scenario: Scenario, spectrum_base: Spectrum, window, blocked_kappa: float,
                       threads: int = 1) -> GreenhouseComparison:
    """Run the column with and without the window blocked and compare.

    ``ground_warming`` records whether T(0) rose; ``window_dimmed`` whether
    the outgoing J(Z), summed over in-window nodes, fell.  A window holding no
    frequency node leaves both runs identical.
    """
    blocked_spec = block_window(spectrum_base, window, blocked_kappa)
    base = run_scenario(scenario, spectrum_base, threads)
    x = spectrum_base.freq_nodes
    inside = (x >= window[0]) & (x <= window[1])
    if inside.any():
        blocked = run_scenario(scenario, blocked_spec, threads)
    else:
        blocked = base
    dT = blocked.T - base.T
    w = spectrum_base.freq_weights
    dimmed = bool(inside.any() and (w[inside] @ blocked.J_at_Z[inside] < w[inside] @ base.J_at_Z[inside]))
    return GreenhouseComparison(base, blocked, tuple(window), dT, inside,
                                bool(dT[0] > 0), dimmed)
