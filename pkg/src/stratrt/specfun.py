"""Exponential integrals, the Planck function and related scalars.

All routines accept scalars or numpy arrays and are pure.  Units follow
the scaled convention used throughout the package: temperatures are in
units of 1000 K and frequencies are the dimensionless ``x = h nu / (k 1000 K)``
so that the Planck exponent is exactly ``x / T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061

#: int_0^inf x^3 / (e^x - 1) dx
STEFAN_INTEGRAL = math.pi**4 / 15.0

# exponent beyond which exp(-x) is treated as zero
EXP_CUTOFF = 700.0

_CF_MAX_ITER = 1000
_CF_EPS = 1e-16
_SERIES_TERMS = 30


@dataclass(frozen=True)
class PhysicalScales:
    """Physical constants and the scaling that maps SI quantities to the
    dimensionless units used by the solvers.

    ``hbar`` keeps the value printed in the constants table (6.6261e-34 J s),
    which is numerically Planck's ``h``; the Planck function below is the
    ordinary-frequency form that goes with it.
    """

    hbar: float = 6.6261e-34
    c: float = 2.998e8
    k: float = 1.381e-23
    B0: float = 1.806657078588538e-08
    temperature_scale: float = 1e-3

    def __post_init__(self):
        for name in ("hbar", "c", "k", "B0", "temperature_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if abs(self.B0 / self.stefan_constant() - 1.0) > 1e-4:
            raise ValueError("B0 inconsistent with 2 k^4 pi^4 / (15 hbar^3 c^2)")

    def stefan_constant(self) -> float:
        """2 k^4 pi^4 / (15 hbar^3 c^2), the radiance Stefan constant."""
        return 2 * self.k**4 * math.pi**4 / (15 * self.hbar**3 * self.c**2)

    @property
    def reference_temperature(self) -> float:
        """Kelvin value of one scaled temperature unit."""
        return 1.0 / self.temperature_scale

    @property
    def frequency_unit(self) -> float:
        """Hz per unit of scaled frequency x."""
        return self.k * self.reference_temperature / self.hbar

    @property
    def radiance_unit(self) -> float:
        """W m^-2 sr^-1 Hz^-1 per unit of scaled spectral radiance."""
        return 2 * self.hbar * self.frequency_unit**3 / self.c**2

    def x_from_wavelength(self, wavelength_um):
        """Scaled frequency of light with the given wavelength in micrometres."""
        lam = np.asarray(wavelength_um, dtype=float) * 1e-6
        return self.hbar * self.c / (lam * self.k * self.reference_temperature)

    def wavelength_from_x(self, x):
        x = np.asarray(x, dtype=float)
        return self.hbar * self.c / (x * self.k * self.reference_temperature) * 1e6

    def to_kelvin(self, T_scaled):
        return np.asarray(T_scaled, dtype=float) * self.reference_temperature


SCALES = PhysicalScales()


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _e1_small(x):
    # -gamma - ln x - sum_{k>=1} (-x)^k / (k k!),  0 < x <= 1
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * (-x) / k
        total += term / k
    return -EULER_GAMMA - np.log(x) - total


def _en_continued_fraction(n, x):
    # modified Lentz evaluation, valid for x > 1 (any n >= 1)
    b = x + n
    c = np.full_like(x, 1e300)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _CF_MAX_ITER):
        a = -i * (n - 1 + i)
        b = b + 2.0
        d_new = 1.0 / (a * d + b)
        c_new = b + a / c
        delta = c_new * d_new
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _CF_EPS
        if not active.any():
            break
    with np.errstate(under="ignore"):
        return h * np.exp(-x)


def expint_orders(nmax: int, x) -> np.ndarray:
    """E_1 ... E_nmax at ``x``; result has shape ``(nmax,) + x.shape``.

    ``E_1(0)`` is returned as ``inf``; callers that must reject it use
    :func:`expint`.
    """
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    x_in, _ = _as_array(x)
    if np.any(x_in < 0) or np.any(np.isnan(x_in)):
        raise ValueError("exponential integral requires x >= 0")
    x = x_in.ravel()
    out = np.zeros((nmax, x.size))

    zero = x == 0
    small = (x > 0) & (x <= 1.0)
    large = x > 1.0

    if zero.any():
        out[0][zero] = np.inf
        for n in range(2, nmax + 1):
            out[n - 1][zero] = 1.0 / (n - 1)

    if small.any():
        xs = x[small]
        en = _e1_small(xs)
        ex = np.exp(-xs)
        out[0][small] = en
        # upward recurrence is stable for x <= 1
        for n in range(1, nmax):
            en = (ex - xs * en) / n
            out[n][small] = en

    if large.any():
        xl = x[large]
        for n in range(1, nmax + 1):
            out[n - 1][large] = _en_continued_fraction(n, xl)
    return out.reshape((nmax,) + x_in.shape)


def expint(n: int, x):
    """Exponential integral E_n(x) = int_1^inf e^{-x t} t^{-n} dt.

    Series plus upward recurrence for x <= 1, continued fraction for x > 1.
    Values with x beyond the exponent cutoff underflow to 0.
    """
    if int(n) != n or n < 1:
        raise ValueError("order n must be an integer >= 1")
    n = int(n)
    arr, scalar = _as_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("exponential integral requires x >= 0")
    if n == 1 and np.any(arr == 0):
        raise ValueError("E_1 is singular at x = 0")
    val = expint_orders(n, arr)[n - 1]
    return float(val) if scalar else val


def expint_segment(n: int, a, b):
    """int_a^b E_n(s) ds = E_{n+1}(a) - E_{n+1}(b); ``b`` may be ``inf``."""
    a_arr, scalar_a = _as_array(a)
    b_arr, scalar_b = _as_array(b)
    if np.any(a_arr < 0):
        raise ValueError("segment start must be >= 0")
    if np.any(a_arr > b_arr):
        raise ValueError("segment requires a <= b")
    a_arr, b_arr = np.broadcast_arrays(a_arr, b_arr)
    upper = np.zeros(b_arr.shape)
    finite = np.isfinite(b_arr)
    if finite.any():
        upper[finite] = expint_orders(n + 1, b_arr[finite])[n]
    lower = expint_orders(n + 1, a_arr)[n]
    val = np.where(a_arr == b_arr, 0.0, lower - upper)
    return float(val) if (scalar_a and scalar_b) else val


def planck(x, T):
    """Scaled spectral radiance x^3 / (e^{x/T} - 1); zero at T = 0."""
    x_arr, sx = _as_array(x)
    T_arr, sT = _as_array(T)
    if np.any(T_arr < 0):
        raise ValueError("temperature must be >= 0")
    if np.any(x_arr <= 0):
        raise ValueError("frequency must be > 0")
    x_arr, T_arr = np.broadcast_arrays(x_arr, T_arr)
    out = np.zeros(x_arr.shape)
    ok = T_arr > 0
    u = np.full(x_arr.shape, np.inf)
    u[ok] = x_arr[ok] / T_arr[ok]
    live = u <= EXP_CUTOFF
    out[live] = x_arr[live] ** 3 / np.expm1(u[live])
    return float(out) if (sx and sT) else out


def planck_dT(x, T):
    """Temperature derivative of :func:`planck`, strictly positive for T > 0."""
    x_arr, sx = _as_array(x)
    T_arr, sT = _as_array(T)
    if np.any(T_arr <= 0):
        raise ValueError("planck_dT requires T > 0")
    if np.any(x_arr <= 0):
        raise ValueError("frequency must be > 0")
    x_arr, T_arr = np.broadcast_arrays(x_arr, T_arr)
    u = x_arr / T_arr
    out = np.zeros(x_arr.shape)
    live = u <= EXP_CUTOFF
    s = np.sinh(0.5 * u[live])
    # e^u / (e^u - 1)^2 = 1 / (4 sinh^2(u/2))
    out[live] = x_arr[live] ** 4 / T_arr[live] ** 2 / (4.0 * s * s)
    return float(out) if (sx and sT) else out


def stefan_sum(nodes, weights, T):
    """Quadrature of the Planck spectrum: sum_k w_k planck(x_k, T)."""
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    T_arr = np.atleast_1d(np.asarray(T, dtype=float))
    vals = planck(nodes[None, :], T_arr[:, None]) @ weights
    return float(vals[0]) if np.ndim(T) == 0 else vals


def log_gauss_nodes(n: int, x_min: float, x_max: float):
    """Gauss-Legendre nodes and weights for int_{x_min}^{x_max} f(x) dx,
    placed uniformly in log x.  Suited to Planck-like integrands."""
    if not (0 < x_min < x_max):
        raise ValueError("need 0 < x_min < x_max")
    s, w = np.polynomial.legendre.leggauss(n)
    lo, hi = math.log(x_min), math.log(x_max)
    logx = 0.5 * (hi - lo) * s + 0.5 * (hi + lo)
    x = np.exp(logx)
    return x, w * 0.5 * (hi - lo) * x


def contraction_bound(kappa: float, Z: float) -> float:
    """C_1 = 1 - E_2(kappa Z / 2): the largest row integral of the
    half-kernel (kappa/2) E_1(kappa |s - z|) over a slab of depth Z."""
    if kappa <= 0 or Z <= 0:
        raise ValueError("kappa and Z must be positive")
    return expint_segment(1, 0.0, 0.5 * kappa * Z)


def contraction_gap(kappa: float, Z: float) -> float:
    """1 - C_1 = E_2(kappa Z / 2), kept separately because C_1 rounds to 1.0
    in double precision once kappa Z exceeds about 70."""
    if kappa <= 0 or Z <= 0:
        raise ValueError("kappa and Z must be positive")
    return expint(2, 0.5 * kappa * Z)


def specfun_table(xs) -> list[tuple[float, float, float, float, float]]:
    """Rows ``(x, E1, E2, E3, E5)`` for x > 0."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("table abscissae must be > 0")
    e = expint_orders(5, xs)
    return [(float(x), float(e[0, i]), float(e[1, i]), float(e[2, i]), float(e[4, i]))
            for i, x in enumerate(xs)]
