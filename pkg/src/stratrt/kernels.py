"""Product integration of the exponential-integral kernels.

Every discrete operator here maps nodal values of a piecewise-linear
function ``H`` on a :class:`Grid1D` to the exact values of

    (kappa / 2) int_0^Z [E_n(kappa |tau_i - t|) + alpha E_n(kappa (tau_i + t))] H(t) dt

at the grid nodes.  On each segment the integral of ``E_n`` against the two
hat-function halves is available in closed form from ``d/du E_{n+1} = -E_n``,
so the logarithmic singularity of ``E_1`` at coincident points costs nothing.
Short segments, where the closed form suffers cancellation, switch to a
series expansion of ``E_n`` about zero or to Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError
from .specfun import EULER_GAMMA, expint_orders, planck

KERNEL_ORDERS = (1, 3, 5)

# segment-length thresholds in units of kappa * dtau
_SHORT = 0.05
_SERIES_REACH = 0.55
_TINY = 1e-4
_SERIES_TERMS = 32
_GAUSS_POINTS = 8


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Strictly increasing optical-depth nodes ``0 = tau_0 < ... < tau_N = Z``."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("grid needs at least 2 intervals (3 nodes)")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("grid nodes must be finite")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at tau = 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, Z: float, n_intervals: int) -> "Grid1D":
        if Z <= 0:
            raise ValueError("Z must be positive")
        if n_intervals < 2:
            raise ValueError("need at least 2 intervals")
        return cls(np.linspace(0.0, Z, n_intervals + 1))

    @property
    def Z(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_intervals(self) -> int:
        return self.nodes.size - 1

    def __len__(self):
        return self.nodes.size

    def trapezoid_weights(self) -> np.ndarray:
        """Weights w with sum(w * f) the trapezoid integral of nodal f."""
        h = np.diff(self.nodes)
        w = np.zeros(self.nodes.size)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    def check(self, values, name="values") -> np.ndarray:
        """Validate a grid function (nodal values) and return it as an array."""
        arr = np.asarray(values, dtype=float)
        if arr.shape[-1] != self.nodes.size:
            raise ValueError(
                f"{name} has {arr.shape[-1]} samples, grid has {self.nodes.size} nodes")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} must be finite")
        return arr


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Dense, read-only matrix of one kernel on one grid."""

    grid: Grid1D
    kappa: float
    order: int
    albedo: float
    matrix: np.ndarray = field(repr=False)

    def __call__(self, H):
        return apply_kernel(self, H)

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


@dataclass(frozen=True)
class BoundarySourceSpec:
    """Radiation entering through one face of the slab.

    kind : ``"directional"`` (intensity ``|mu| Q``), ``"isotropic"``
        (intensity ``Q``) or ``"blackbody"`` (isotropic ``B(x, T_b)``).
    magnitude : ``Q``, or ``T_b`` for a blackbody.
        May be a per-frequency array for the first two kinds.
    side : ``"top"`` (enters at ``tau = Z`` going down) or ``"bottom"``.
    """

    kind: str
    magnitude: object
    side: str = "top"

    def __post_init__(self):
        if self.kind not in ("directional", "isotropic", "blackbody"):
            raise ValueError(f"unknown boundary source kind {self.kind!r}")
        if self.side not in ("top", "bottom"):
            raise ValueError(f"side must be 'top' or 'bottom', got {self.side!r}")
        mag = np.asarray(self.magnitude, dtype=float)
        if np.any(~np.isfinite(mag)) or np.any(mag < 0):
            raise ValueError("boundary source magnitude must be finite and >= 0")

    def intensity(self, x=None):
        """Angle-independent amplitude Q (per frequency node if ``x`` given).

        For a blackbody without ``x`` this is the grey amplitude ``T_b^4``.
        """
        mag = np.asarray(self.magnitude, dtype=float)
        if self.kind == "blackbody":
            if x is None:
                return mag**4
            return planck(np.asarray(x, dtype=float), mag)
        return mag

    @property
    def angular_power(self) -> int:
        """Power of |mu| multiplying Q in the incoming intensity."""
        return 1 if self.kind == "directional" else 0


# ---------------------------------------------------------------- series pieces

def _series_coefficients(n: int):
    """E_n(u) = cL u^(n-1) ln u + sum_k a_k u^k near u = 0."""
    a = np.empty(_SERIES_TERMS)
    for k in range(_SERIES_TERMS):
        if k == n - 1:
            psi = -EULER_GAMMA + sum(1.0 / m for m in range(1, n))
            a[k] = (-1) ** (n - 1) * psi / math.factorial(n - 1)
        else:
            a[k] = -((-1) ** k) / ((k - n + 1) * math.factorial(k))
    c_log = -((-1) ** (n - 1)) / math.factorial(n - 1)
    return c_log, a


def _primitive(n: int, m: int, u):
    """int_0^u s^m E_n(s) ds from the series; valid for small u."""
    c_log, a = _series_coefficients(n)
    p = n - 1 + m
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    lu = np.log(up)
    val = c_log * up ** (p + 1) * (lu / (p + 1) - 1.0 / (p + 1) ** 2)
    power = up ** (m + 1)
    for k in range(_SERIES_TERMS):
        val = val + a[k] * power / (k + m + 1)
        power = power * up
    out[pos] = val
    return out


def _segment_moments_series(n, u0, u1):
    i0 = _primitive(n, 0, u1) - _primitive(n, 0, u0)
    i1 = _primitive(n, 1, u1) - _primitive(n, 1, u0) - u0 * i0
    return i0, i1


def _segment_moments_gauss(n, u0, u1):
    s, w = np.polynomial.legendre.leggauss(_GAUSS_POINTS)
    h = u1 - u0
    pts = u0[:, None] + 0.5 * h[:, None] * (s[None, :] + 1.0)
    en = expint_orders(n, pts)[n - 1]
    i0 = 0.5 * h * (en * w).sum(axis=1)
    i1 = 0.5 * h * (en * (pts - u0[:, None]) * w).sum(axis=1)
    return i0, i1


def _expint_table(values, nmax):
    """E_1..E_nmax evaluated once per distinct value."""
    flat = np.ravel(values)
    uniq, inverse = np.unique(flat, return_inverse=True)
    table = expint_orders(nmax, uniq)
    return table[:, inverse].reshape((nmax,) + np.shape(values))


def _segment_weights(orders, u0, u1, e0, e1):
    """Near/far hat weights of every segment, for each requested order.

    ``u0 < u1`` are the kernel arguments at the segment end nearest to and
    farthest from the collocation point; ``e0``/``e1`` map m to E_m there.
    Returns ``{n: (near, far)}`` where near + far = int_{u0}^{u1} E_n / 2.
    """
    du = u1 - u0
    series = (du < _SHORT) & (u1 <= _SERIES_REACH)
    gauss = (du < _TINY) & ~series
    exact = ~(series | gauss)
    out = {}
    for n in orders:
        i0 = np.zeros_like(u0)
        i1 = np.zeros_like(u0)
        if exact.any():
            d = du[exact]
            i0[exact] = e0[n + 1][exact] - e1[n + 1][exact]
            i1[exact] = e0[n + 2][exact] - e1[n + 2][exact] - d * e1[n + 1][exact]
        if series.any():
            i0[series], i1[series] = _segment_moments_series(n, u0[series], u1[series])
        if gauss.any():
            i0[gauss], i1[gauss] = _segment_moments_gauss(n, u0[gauss], u1[gauss])
        far = i1 / du
        near = i0 - far
        out[n] = (0.5 * near, 0.5 * far)
    return out


def kernel_matrices(grid: Grid1D, kappa: float, orders=KERNEL_ORDERS, albedo: float = 0.0):
    """Matrices of several kernel orders sharing one exponential-integral table.

    Returns ``{order: ndarray}``.  Rows index the collocation node, columns
    the nodal value of ``H``.
    """
    if not kappa > 0 or not math.isfinite(kappa):
        raise ValueError("kappa must be positive and finite")
    if not 0.0 <= albedo < 1.0:
        raise ValueError("albedo must lie in [0, 1)")
    orders = tuple(int(n) for n in orders)
    for n in orders:
        if n < 1:
            raise ValueError("kernel order must be >= 1")
    nmax = max(orders) + 2
    u = kappa * grid.nodes
    N1 = u.size
    N = N1 - 1
    dist = np.abs(u[:, None] - u[None, :])
    image = u[:, None] + u[None, :]
    e_dist = _expint_table(dist, nmax)
    e_img = _expint_table(image, nmax) if albedo > 0 else None

    rows = np.repeat(np.arange(N1), N)
    seg = np.tile(np.arange(N), N1)
    right = seg >= rows                         # segment lies above tau_i
    near_col = np.where(right, seg, seg + 1)
    far_col = np.where(right, seg + 1, seg)
    u0 = dist[rows, near_col]
    u1 = dist[rows, far_col]
    e0 = {m: e_dist[m - 1][rows, near_col] for m in range(2, nmax + 1)}
    e1 = {m: e_dist[m - 1][rows, far_col] for m in range(2, nmax + 1)}
    weights = _segment_weights(orders, u0, u1, e0, e1)

    if albedo > 0:
        v0 = image[rows, seg]
        v1 = image[rows, seg + 1]
        f0 = {m: e_img[m - 1][rows, seg] for m in range(2, nmax + 1)}
        f1 = {m: e_img[m - 1][rows, seg + 1] for m in range(2, nmax + 1)}
        img_weights = _segment_weights(orders, v0, v1, f0, f1)

    mats = {}
    for n in orders:
        M = np.zeros((N1, N1))
        near, far = weights[n]
        np.add.at(M, (rows, near_col), near)
        np.add.at(M, (rows, far_col), far)
        if albedo > 0:
            near, far = img_weights[n]
            np.add.at(M, (rows, seg), albedo * near)
            np.add.at(M, (rows, seg + 1), albedo * far)
        # exact weights are nonnegative; clip round-off only
        np.maximum(M, 0.0, out=M)
        M.setflags(write=False)
        mats[n] = M
    return mats


def build_kernel(grid: Grid1D, kappa: float, order: int = 1, albedo: float = 0.0) -> KernelOperator:
    """Exact product-integration operator for one kernel order."""
    if order not in KERNEL_ORDERS:
        raise ValueError(f"order must be one of {KERNEL_ORDERS}")
    if not isinstance(grid, Grid1D):
        raise TypeError("grid must be a Grid1D")
    M = kernel_matrices(grid, kappa, (order,), albedo)[order]
    return KernelOperator(grid, float(kappa), order, float(albedo), M)


def apply_kernel(op: KernelOperator, H):
    """Apply ``op`` to nodal values ``H`` (trailing axis = grid nodes)."""
    H = op.grid.check(H, "H")
    return H @ op.matrix.T


def boundary_attenuation(grid: Grid1D, kappa, spec: BoundarySourceSpec,
                         albedo: float = 0.0, x=None, moment: int = 0):
    """Contribution of one boundary source to J (``moment=0``) or K (``moment=2``).

    A directional source ``|mu| Q`` gives ``Q E_3(kappa d) / 2`` in J and
    ``Q E_5 / 2`` in K, an isotropic one ``Q E_2 / 2`` and ``Q E_4 / 2``; ``d``
    is the optical distance to the emitting face.  Light entering from the
    top is also reflected once by the ground with albedo ``alpha``.

    ``kappa`` and ``spec.magnitude`` may be per-frequency arrays; then the
    result has shape ``(F, N+1)``.
    """
    if moment not in (0, 2):
        raise ValueError("moment must be 0 or 2")
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise ValueError("kappa must be positive")
    Q = np.asarray(spec.intensity(x), dtype=float)
    order = 2 + spec.angular_power + moment
    tau = grid.nodes
    d = grid.Z - tau if spec.side == "top" else tau
    kd = kappa[..., None] * d
    E = expint_orders(order, kd)[order - 1]
    out = 0.5 * Q[..., None] * E
    if spec.side == "top" and albedo > 0:
        kr = kappa[..., None] * (grid.Z + tau)
        out = out + 0.5 * albedo * Q[..., None] * expint_orders(order, kr)[order - 1]
    return out


def brute_force_kernel(grid: Grid1D, kappa: float, order: int, albedo: float, H, tol: float = 1e-12):
    """Reference values of the kernel integral by adaptive quadrature.

    Uses ``scipy.special.expn`` and splits the range at every grid node so
    the endpoint singularity at ``t = tau_i`` is handled by the integrator.
    Raises :class:`ConvergenceError` naming the worst node if any node's
    error estimate exceeds ``tol`` times the scale of the result.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    H = grid.check(H, "H")
    tau = grid.nodes

    out = np.empty(tau.size)
    worst_node, worst_err = -1, 0.0
    scale = 1.0 + np.max(np.abs(H))
    slopes = np.diff(H) / np.diff(tau)
    for i, ti in enumerate(tau):
        def f(t, a, ha, slope):
            val = special.expn(order, kappa * abs(ti - t))
            if albedo > 0:
                val += albedo * special.expn(order, kappa * (ti + t))
            return val * (ha + slope * (t - a))

        total, err = 0.0, 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            for j, (a, b) in enumerate(zip(tau[:-1], tau[1:])):
                try:
                    v, e = integrate.quad(f, a, b, args=(a, H[j], slopes[j]), epsabs=0.1 * tol / kappa,
                                          epsrel=0.1 * tol, limit=200)
                except integrate.IntegrationWarning:
                    raise ConvergenceError("kernel quadrature failed", worst_node=i, tau=float(ti))
                total += v
                err += e
        out[i] = 0.5 * kappa * total
        err *= 0.5 * kappa
        if err > worst_err:
            worst_node, worst_err = i, err
    if worst_err > tol * scale:
        raise ConvergenceError("kernel quadrature above tolerance",
                               worst_node=worst_node, error=worst_err)
    return out
