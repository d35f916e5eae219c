"""Frequency-dependent source iteration on the mean intensity J and the
second moment K, with isotropic and Rayleigh scattering and a reflecting
ground, plus the temperature inversion and intensity recovery.

Shapes: frequency-resolved fields are ``(F, N+1)`` arrays (frequency node by
depth node).  Temperatures are ``(N+1,)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .common import IterationReport, TemperatureProfile
from .errors import ConvergenceError
from .kernels import BoundarySourceSpec, Grid1D, boundary_attenuation, kernel_matrices
from .specfun import STEFAN_INTEGRAL, contraction_bound, log_gauss_nodes, planck, planck_dT

RAYLEIGH_VARIANTS = ("normalized", "unnormalized")


def _broadcast_albedo(value, n_freq):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full((n_freq, 1), float(arr))
    if arr.ndim == 1:
        if arr.size != n_freq:
            raise ValueError("albedo per frequency has wrong length")
        return arr[:, None].copy()
    if arr.ndim == 2 and arr.shape[0] in (1, n_freq):
        return np.broadcast_to(arr, (n_freq, arr.shape[1])).copy()
    raise ValueError("albedo must be scalar, (F,) or (F, N+1)")


@dataclass(eq=False)
class Spectrum:
    """Optical description of the medium on a frequency quadrature.

    ``albedo_iso`` / ``albedo_ray`` are scalars, per-frequency ``(F,)`` or
    per-frequency-and-depth-node ``(F, N+1)`` arrays.  ``kappa_max`` defaults
    to ``max(kappa)``.
    """

    freq_nodes: np.ndarray
    freq_weights: np.ndarray
    kappa: np.ndarray
    albedo_iso: object = 0.0
    albedo_ray: object = 0.0
    kappa_max: float = None
    stefan_tolerance: float = 5e-3

    def __post_init__(self):
        x = np.asarray(self.freq_nodes, dtype=float)
        w = np.asarray(self.freq_weights, dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("need at least one frequency node")
        if w.shape != x.shape or k.shape != x.shape:
            raise ValueError("nodes, weights and kappa must have equal length")
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise ValueError("frequency nodes must be positive and increasing")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.any(~np.isfinite(k)) or np.any(k <= 0):
            raise ValueError("kappa must be positive and finite")
        kmax = float(k.max()) if self.kappa_max is None else float(self.kappa_max)
        if np.any(k > kmax * (1 + 1e-12)):
            raise ValueError("kappa exceeds kappa_max")
        ai = _broadcast_albedo(self.albedo_iso, x.size)
        ar = _broadcast_albedo(self.albedo_ray, x.size)
        if ai.shape[1] != ar.shape[1] and 1 not in (ai.shape[1], ar.shape[1]):
            raise ValueError("albedo depth resolutions differ")
        if np.any(ai < 0) or np.any(ar < 0):
            raise ValueError("albedos must be >= 0")
        if np.any(np.add(*np.broadcast_arrays(ai, ar)) >= 1):
            raise ValueError("albedo_iso + albedo_ray must be < 1")
        self.freq_nodes, self.freq_weights, self.kappa = x, w, k
        self.albedo_iso, self.albedo_ray, self.kappa_max = ai, ar, kmax

    @property
    def n_freq(self) -> int:
        return self.freq_nodes.size

    def albedos_on(self, grid: Grid1D):
        """(a_iso, a_ray) as ``(F, N+1)`` arrays on ``grid``."""
        out = []
        for a in (self.albedo_iso, self.albedo_ray):
            if a.shape[1] == 1:
                out.append(np.repeat(a, len(grid), axis=1))
            elif a.shape[1] == len(grid):
                out.append(a)
            else:
                raise ValueError("albedo depth samples do not match the grid")
        return out

    @property
    def has_rayleigh(self) -> bool:
        return bool(np.any(self.albedo_ray > 0))

    def stefan_error(self, T) -> float:
        """Relative error of the grid's Planck quadrature at temperature T."""
        vals = planck(self.freq_nodes, T) @ self.freq_weights
        return float(abs(vals / (STEFAN_INTEGRAL * T**4) - 1.0))

    def check_stefan(self, T):
        err = self.stefan_error(T)
        if err > self.stefan_tolerance:
            raise ValueError(f"frequency grid misses the Stefan integral by {err:.2e} at T={T}")
        return err

    def with_kappa(self, kappa, kappa_max=None) -> "Spectrum":
        return Spectrum(self.freq_nodes, self.freq_weights, kappa, self.albedo_iso,
                        self.albedo_ray, kappa_max, self.stefan_tolerance)

    @classmethod
    def planck_grid(cls, n_freq=50, kappa=1.0, T_range=(0.2, 6.0), albedo_iso=0.0,
                    albedo_ray=0.0, stefan_tolerance=1e-4):
        """Log-spaced Gauss grid wide enough for Planck spectra in ``T_range``."""
        T_lo, T_hi = T_range
        x, w = log_gauss_nodes(n_freq, 0.01 * T_lo, 40.0 * T_hi)
        k = np.broadcast_to(np.asarray(kappa, dtype=float), x.shape).copy()
        spec = cls(x, w, k, albedo_iso, albedo_ray, stefan_tolerance=stefan_tolerance)
        for T in (T_lo, T_hi):
            spec.check_stefan(T)
        return spec


@dataclass
class RadiationState:
    """Mean intensity J and second moment K, shape ``(F, N+1)``."""

    J: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        if self.J.shape != self.K.shape:
            raise ValueError("J and K shapes differ")

    @classmethod
    def zeros(cls, n_freq, n_nodes):
        return cls(np.zeros((n_freq, n_nodes)), np.zeros((n_freq, n_nodes)))

    def check(self, slack=1e-12):
        """Raise if J < 0, K < 0 or K > J beyond round-off."""
        scale = slack * max(1.0, float(np.max(np.abs(self.J))) if self.J.size else 1.0)
        if np.any(self.J < -scale) or np.any(self.K < -scale):
            raise ValueError("moments must be nonnegative")
        if np.any(self.K > self.J + scale):
            raise ValueError("second moment exceeds mean intensity")
        return True


@dataclass
class SolverControls:
    max_iters: int = 22
    tol: float = 1e-8
    rayleigh_variant: str = "normalized"
    threads: int = 1
    keep_iterates: bool = False
    temperature_rtol: float = 1e-10

    def __post_init__(self):
        if self.rayleigh_variant not in RAYLEIGH_VARIANTS:
            raise ValueError(f"rayleigh_variant must be one of {RAYLEIGH_VARIANTS}")
        if self.max_iters < 1 or not self.tol > 0:
            raise ValueError("max_iters >= 1 and tol > 0 required")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")


def rayleigh_phase(mu, mu_prime):
    """Azimuth-averaged Rayleigh phase function (3/8)(3 - m^2 - m'^2 + 3 m^2 m'^2),
    normalized so that half its integral over mu' is one."""
    mu = np.asarray(mu, dtype=float)
    mp = np.asarray(mu_prime, dtype=float)
    if np.any(np.abs(mu) > 1) or np.any(np.abs(mp) > 1):
        raise ValueError("direction cosines must lie in [-1, 1]")
    val = 0.375 * (3.0 - mu**2 - mp**2 + 3.0 * mu**2 * mp**2)
    return float(val) if val.ndim == 0 else val


def scattering_coefficients(variant="normalized"):
    """Coefficients (c0J, c0K, c2J, c2K) of the Rayleigh part of the source:
    half the phase integral of I equals (c0J J + c0K K) + mu^2 (c2J J + c2K K).

    ``"unnormalized"`` uses -9/8 for c0K, which breaks the unit phase
    normalization; it is kept only for comparison runs."""
    if variant == "normalized":
        return 9 / 8, -3 / 8, -3 / 8, 9 / 8
    if variant == "unnormalized":
        return 9 / 8, -9 / 8, -3 / 8, 9 / 8
    raise ValueError(f"unknown Rayleigh variant {variant!r}")


def source_moments(J, K, B, a_iso, a_ray, variant="normalized"):
    """Angular decomposition H = H0 + mu^2 H2 of the emission plus scattering
    source (per unit kappa)."""
    c0J, c0K, c2J, c2K = scattering_coefficients(variant)
    a = a_iso + a_ray
    H0 = (1 - a) * B + a_iso * J + a_ray * (c0J * J + c0K * K)
    H2 = a_ray * (c2J * J + c2K * K)
    return H0, H2


class KernelCache:
    """Order 1/3/5 matrices for every frequency of a spectrum on one grid."""

    def __init__(self, spectrum: Spectrum, grid: Grid1D, alpha: float = 0.0,
                 threads: int = 1, orders=(1, 3, 5)):
        self.grid = grid
        self.alpha = float(alpha)
        self.orders = tuple(orders)
        kappas = spectrum.kappa

        def build(k):
            return kernel_matrices(grid, float(k), self.orders, self.alpha)

        n_workers = _resolve_threads(threads)
        if n_workers > 1:
            with ThreadPoolExecutor(n_workers) as pool:
                mats = list(pool.map(build, kappas))
        else:
            mats = [build(k) for k in kappas]
        self.matrices = {n: np.stack([m[n] for m in mats]) for n in self.orders}
        for arr in self.matrices.values():
            arr.setflags(write=False)

    def apply(self, order, H):
        return np.einsum("fij,fj->fi", self.matrices[order], H)


def _resolve_threads(threads):
    if threads == 0:
        import os
        return os.cpu_count() or 1
    return int(threads)


def boundary_terms(spectrum: Spectrum, grid: Grid1D, sources, alpha=0.0):
    """Boundary contributions (J part, K part), each ``(F, N+1)``."""
    b0 = np.zeros((spectrum.n_freq, len(grid)))
    b2 = np.zeros_like(b0)
    for src in sources:
        b0 += boundary_attenuation(grid, spectrum.kappa, src, alpha, spectrum.freq_nodes, 0)
        b2 += boundary_attenuation(grid, spectrum.kappa, src, alpha, spectrum.freq_nodes, 2)
    return b0, b2


def moments_update(state: RadiationState, T, spectrum: Spectrum, grid: Grid1D, sources=(),
                   alpha: float = 0.0, cache: KernelCache = None, variant="normalized",
                   boundary=None) -> RadiationState:
    """One transport sweep: new (J, K) from the previous (J, K, T)."""
    F, N1 = spectrum.n_freq, len(grid)
    if state.J.shape != (F, N1):
        raise ValueError(f"state shape {state.J.shape} does not match ({F}, {N1})")
    T = grid.check(T, "T")
    if cache is None:
        cache = KernelCache(spectrum, grid, alpha)
    elif cache.grid is not grid or cache.alpha != alpha:
        raise ValueError("kernel cache built for another grid or albedo")
    if boundary is None:
        boundary = boundary_terms(spectrum, grid, sources, alpha)
    a_iso, a_ray = spectrum.albedos_on(grid)
    B = planck(spectrum.freq_nodes[:, None], T[None, :])
    H0, H2 = source_moments(state.J, state.K, B, a_iso, a_ray, variant)
    J = boundary[0] + cache.apply(1, H0)
    K = boundary[1] + cache.apply(3, H0)
    if np.any(H2 != 0):
        J += cache.apply(3, H2)
        K += cache.apply(5, H2)
    return RadiationState(J, K)


def emission_weights(spectrum: Spectrum, grid: Grid1D):
    """w_f kappa_f (1 - a_f(tau)), shape (F, N+1)."""
    a_iso, a_ray = spectrum.albedos_on(grid)
    return spectrum.freq_weights[:, None] * spectrum.kappa[:, None] * (1.0 - a_iso - a_ray)


def temperature_update(J, spectrum: Spectrum, grid: Grid1D, T_guess=None, rtol=1e-10,
                       max_steps=200):
    """Invert sum_f c_f B(x_f, T) = sum_f c_f J_f at each depth node,
    with c = w kappa (1 - a).  Bisection safeguards Newton steps."""
    J = np.asarray(J, dtype=float)
    if np.any(J < -1e-300):
        J = np.maximum(J, 0.0)
    c = emission_weights(spectrum, grid)
    x = spectrum.freq_nodes[:, None]
    G = np.einsum("fi,fi->i", c, J)
    T = np.zeros(G.size)
    live = G > 0
    if not live.any():
        return T
    Gl = G[live]
    cl = c[:, live]

    def g(Tv):
        return np.einsum("fi,fi->i", cl, planck(x, Tv[None, :]))

    start = 1.0 if T_guess is None else max(1.0, float(np.max(T_guess)))
    hi = np.full(Gl.size, start)
    for doubling in range(61):
        short = g(hi) < Gl
        if not short.any():
            break
        if doubling == 60:
            raise ConvergenceError("temperature bracket not found", nodes=np.flatnonzero(live)[short].tolist()[:5],
                                   T_hi=float(hi.max()))
        hi = np.where(short, 2.0 * hi, hi)
    lo = np.zeros_like(hi)
    Tc = 0.5 * hi if T_guess is None else np.clip(np.asarray(T_guess, float)[live], 0.0, hi)
    Tc = np.where(Tc > 0, Tc, 0.5 * hi)
    for _ in range(max_steps):
        gv = g(Tc)
        resid = gv - Gl
        if np.all(np.abs(resid) <= rtol * Gl):
            break
        lo = np.where(resid < 0, Tc, lo)
        hi = np.where(resid > 0, Tc, hi)
        dg = np.einsum("fi,fi->i", cl, planck_dT(x, Tc[None, :]))
        with np.errstate(divide="ignore", invalid="ignore"):
            Tn = Tc - resid / dg
        bad = ~np.isfinite(Tn) | (Tn <= lo) | (Tn >= hi)
        Tc = np.where(bad, 0.5 * (lo + hi), Tn)
    else:
        raise ConvergenceError("temperature inversion did not converge",
                               worst_residual=float(np.max(np.abs(resid) / Gl)))
    T[live] = Tc
    return T


def source_bound(spectrum: Spectrum, sources):
    """Bound Q on int int kappa J^1 dtau dnu: (1/2) sum_nu w int_0^1 mu Q(mu) dmu
    over all boundary sources."""
    total = 0.0
    for src in sources:
        Q = np.broadcast_to(src.intensity(spectrum.freq_nodes), spectrum.freq_nodes.shape)
        factor = 1.0 / 6.0 if src.kind == "directional" else 0.25
        total += factor * math.fsum(spectrum.freq_weights * Q)
    return total


def source_norm(J, spectrum: Spectrum, grid: Grid1D) -> float:
    """int int kappa J dtau dnu with a fixed-order compensated sum."""
    tw = grid.trapezoid_weights()
    terms = spectrum.freq_weights[:, None] * spectrum.kappa[:, None] * J * tw[None, :]
    return math.fsum(terms.ravel())


def run_spectral(spectrum: Spectrum, grid: Grid1D, sources=(), alpha: float = 0.0,
                   controls: SolverControls = None, cache: KernelCache = None):
    """Source iteration from T = 0, J = K = 0.

    Returns ``(state, profile, report)``.  Stops once the sup-norm change of T
    is at most ``controls.tol``; otherwise ``report.converged`` is False.
    """
    controls = controls or SolverControls()
    if not 0 <= alpha < 1:
        raise ValueError("ground albedo must lie in [0, 1)")
    sources = tuple(sources)
    if cache is None:
        cache = KernelCache(spectrum, grid, alpha, controls.threads)
    boundary = boundary_terms(spectrum, grid, sources, alpha)
    F, N1 = spectrum.n_freq, len(grid)
    state = RadiationState.zeros(F, N1)
    T = np.zeros(N1)
    report = IterationReport()
    Qb = source_bound(spectrum, sources)
    C1 = contraction_bound(spectrum.kappa_max, grid.Z)
    report.flags.update(source_bound=Qb, contraction_bound=C1,
                        norm_bound=Qb / (1.0 - C1))
    norm_ok = True
    for _ in range(controls.max_iters):
        new = moments_update(state, T, spectrum, grid, sources, alpha, cache,
                             controls.rayleigh_variant, boundary)
        T_new = temperature_update(new.J, spectrum, grid, T, controls.temperature_rtol)
        norm = source_norm(new.J, spectrum, grid)
        report.record(T_new, T, source_norm=norm)
        report.min_increment_J.append(float(np.min(new.J - state.J)))
        report.min_increment_K.append(float(np.min(new.K - state.K)))
        norm_ok &= norm <= report.flags["norm_bound"] * (1 + 1e-12) + controls.tol
        if controls.keep_iterates:
            report.iterates.append((T_new.copy(), new.J.copy(), new.K.copy()))
        state, T = new, T_new
        if report.sup_increment[-1] <= controls.tol:
            report.converged = True
            break
    report.flags["norm_bound_ok"] = bool(norm_ok)
    report.flags["alpha"] = alpha
    return state, TemperatureProfile(T, grid.nodes), report


# ---------------------------------------------------------------- diagnostics

def mu_quadrature(n=32):
    """Gauss-Legendre nodes/weights on (0, 1)."""
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (s + 1.0), 0.5 * w


def _incoming(src: BoundarySourceSpec, x, mu):
    Q = np.broadcast_to(np.asarray(src.intensity(x), dtype=float), x.shape)
    ang = np.abs(mu) if src.kind == "directional" else np.ones_like(mu)
    return Q[:, None] * ang[None, :]


def _segment_factors(s):
    """Weights of one characteristic segment of optical length s.

    Returns (e^{-s}, g - e^{-s}, 1 - g), g = (1 - e^{-s}) / s: the attenuation
    and the weights of the source at the segment's start and end nodes.
    """
    e = np.exp(-s)
    one_minus_e = -np.expm1(-s)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = one_minus_e / s
    small = s < 1e-4
    one_minus_g = np.where(small, s / 2 - s**2 / 6 + s**3 / 24, 1.0 - g)
    return e, one_minus_e - one_minus_g, one_minus_g


def recover_intensity(state: RadiationState, T, spectrum: Spectrum, grid: Grid1D, sources=(),
                      alpha: float = 0.0, mu_nodes=None, variant="normalized"):
    """Angular intensity along characteristics from the converged moments.

    ``mu_nodes`` are positive direction cosines (default 32 Gauss nodes on
    (0, 1)); the result has shape ``(F, N+1, 2, M)`` where index 0 of the third
    axis is upward (+mu) and 1 downward (-mu).  Segment integrals of the
    exponential against the piecewise-linear source are done in closed form,
    so small mu is harmless.
    """
    mu = mu_quadrature()[0] if mu_nodes is None else np.asarray(mu_nodes, dtype=float)
    if np.any(mu <= 0) or np.any(mu > 1):
        raise ValueError("mu nodes must lie in (0, 1]")
    T = grid.check(T, "T")
    x = spectrum.freq_nodes
    a_iso, a_ray = spectrum.albedos_on(grid)
    B = planck(x[:, None], T[None, :])
    H0, H2 = source_moments(state.J, state.K, B, a_iso, a_ray, variant)
    h = H0[:, :, None] + mu[None, None, :] ** 2 * H2[:, :, None]     # (F, N1, M)
    F, N1 = H0.shape
    dtau = np.diff(grid.nodes)
    s = spectrum.kappa[:, None, None] * dtau[None, :, None] / mu[None, None, :]
    e, c_start, c_end = _segment_factors(s)                           # (F, N, M)

    I = np.zeros((F, N1, 2, mu.size))
    down = np.zeros((F, mu.size))
    up = np.zeros((F, mu.size))
    for src in sources:
        if src.side == "top":
            down += _incoming(src, x, mu)
    I[:, -1, 1] = down
    for i in range(N1 - 2, -1, -1):
        down = e[:, i] * down + c_start[:, i] * h[:, i + 1] + c_end[:, i] * h[:, i]
        I[:, i, 1] = down
    for src in sources:
        if src.side == "bottom":
            up += _incoming(src, x, mu)
    up = up + alpha * I[:, 0, 1]
    I[:, 0, 0] = up
    for i in range(N1 - 1):
        up = e[:, i] * up + c_start[:, i] * h[:, i] + c_end[:, i] * h[:, i + 1]
        I[:, i + 1, 0] = up
    return I


def intensity_moments(I, mu_weights=None, mu_nodes=None):
    """(J, K) of an intensity table by half-range Gauss quadrature."""
    if mu_nodes is None or mu_weights is None:
        mu_nodes, mu_weights = mu_quadrature(I.shape[-1])
    both = I.sum(axis=2)
    J = 0.5 * both @ mu_weights
    K = 0.5 * both @ (mu_weights * mu_nodes**2)
    return J, K


def flux_profile(I, spectrum: Spectrum, mu_nodes=None, mu_weights=None):
    """Net upward flux F(tau) = sum_nu w int mu I dmu."""
    if mu_nodes is None or mu_weights is None:
        mu_nodes, mu_weights = mu_quadrature(I.shape[-1])
    net = (I[:, :, 0, :] - I[:, :, 1, :]) @ (mu_weights * mu_nodes)
    return spectrum.freq_weights @ net


def max_principle_check(state: RadiationState, T, spectrum: Spectrum, T_M, T_m=0.0, tol=1e-8):
    """Check T_m <= T <= T_M and B(T_m) <= J <= B(T_M) up to ``tol``.

    Returns a dict with ``ok`` and the indices of any violations.
    """
    T = np.asarray(T, dtype=float)
    x = spectrum.freq_nodes[:, None]
    BM = planck(x, T_M)
    Bm = planck(x, T_m) if T_m > 0 else np.zeros_like(BM)
    upper_T = np.flatnonzero(T > T_M + tol)
    lower_T = np.flatnonzero(T < T_m - tol)
    upper_J = np.argwhere(state.J > BM + tol)
    lower_J = np.argwhere(state.J < Bm - tol)
    ok = not (upper_T.size or lower_T.size or upper_J.size or lower_J.size)
    return {
        "ok": ok,
        "T_above": upper_T.tolist(),
        "T_below": lower_T.tolist(),
        "J_above": [tuple(v) for v in upper_J.tolist()],
        "J_below": [tuple(v) for v in lower_J.tolist()],
        "max_T": float(T.max()),
        "min_T": float(T.min()),
        "max_J_excess": float(np.max(state.J - BM)),
    }


@dataclass
class RateCheck:
    status: str
    ratio: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def convergence_rate_check(report: IterationReport, C1_bound: float, slack: float = 0.02,
                           floor: float = 1e-11) -> RateCheck:
    """Tail decay ratio of successive source-norm increments.

    The ratio is the geometric mean over the second half of the usable
    increments (those above ``floor`` relative to the first).  Fewer than five
    iterations is inconclusive; identically zero increments pass.
    """
    bound = C1_bound + slack
    norms = np.asarray(report.source_norm, dtype=float)
    if norms.size < 5:
        return RateCheck("inconclusive", float("nan"), bound)
    inc = np.abs(np.diff(norms))
    if not np.any(inc > 0):
        return RateCheck("pass", 0.0, bound)
    usable = inc[inc > floor * inc.max()]
    if usable.size < 3:
        return RateCheck("pass", 0.0, bound)
    tail = usable[usable.size // 2:] if usable.size >= 4 else usable
    if tail.size < 2:
        tail = usable[-2:]
    ratio = float((tail[-1] / tail[0]) ** (1.0 / (tail.size - 1)))
    return RateCheck("pass" if ratio <= bound else "fail", ratio, bound)
