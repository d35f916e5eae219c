"""Grey radiative heating of a lake: equilibrium temperature, monotone
source iteration and the nonlinear diffusion solves in one and two dimensions.

The unknown is the scaled temperature ``T`` (kelvin times 1e-3).  One outer
iteration evaluates the radiative source

    S(z) = T_e(z)^4 + (kappa/2) int E_1(kappa |s - z|) [(1-a) T(s)^4 + a J(s)] ds

and then solves ``-kbar_T T'' + T_+^4 = S``.  Started from ``T = 0`` the
iterates increase monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .common import IterationReport, TemperatureProfile
from .errors import ConfigError
from .kernels import BoundarySourceSpec, Grid1D, boundary_attenuation, kernel_matrices
from .specfun import contraction_bound, expint

REGULARIZATION = 1e-12


@dataclass(frozen=True)
class GreyConfig:
    """Parameters of the grey lake problem (scaled units).

    ``bc_bottom`` / ``bc_top`` accept a float (Dirichlet value),
    ``"neumann"`` (zero flux) or ``"equilibrium"`` (Dirichlet with the local
    equilibrium temperature).  ``boundary_sources`` adds radiation entering
    through the faces, e.g. a surrounding enclosure.
    """

    kappa: float = 0.1
    albedo_a: float = 0.0
    kbar_T: float = 66.0
    Q: float = 25.0
    T_sun: float = 1.0
    z_range: tuple = (0.0, 10.0)
    bc_bottom: object = 1.5811388300841898
    bc_top: object = "neumann"
    outer_iters: int = 20
    inner_iters: int = 3
    tol: float = 1e-6
    inner_tol: float = 1e-11
    max_inner_iters: int = 50
    inner_method: str = "newton"
    boundary_sources: tuple = ()

    def __post_init__(self):
        errors = []
        if not self.kappa > 0:
            errors.append("kappa must be > 0")
        if not 0 <= self.albedo_a < 1:
            errors.append("albedo_a must lie in [0, 1)")
        if not self.kbar_T >= 0:
            errors.append("kbar_T must be >= 0")
        if not self.Q >= 0:
            errors.append("Q must be >= 0")
        if not self.T_sun >= 0:
            errors.append("T_sun must be >= 0")
        if len(self.z_range) != 2 or not self.z_range[0] < self.z_range[1]:
            errors.append("z_range must be [z_m, z_M] with z_m < z_M")
        if not self.tol > 0 or not self.inner_tol > 0:
            errors.append("tolerances must be > 0")
        if self.outer_iters < 1 or self.inner_iters < 1:
            errors.append("iteration counts must be >= 1")
        if self.inner_method not in ("newton", "picard"):
            errors.append("inner_method must be 'newton' or 'picard'")
        for name in ("bc_bottom", "bc_top"):
            bc = getattr(self, name)
            if isinstance(bc, str):
                if bc not in ("neumann", "equilibrium"):
                    errors.append(f"{name} must be a number, 'neumann' or 'equilibrium'")
            elif not (isinstance(bc, (int, float)) and bc >= 0):
                errors.append(f"{name} must be a nonnegative number")
        for src in self.boundary_sources:
            if not isinstance(src, BoundarySourceSpec):
                errors.append("boundary_sources must hold BoundarySourceSpec items")
        if errors:
            raise ConfigError(errors)

    @property
    def depth(self) -> float:
        return float(self.z_range[1] - self.z_range[0])

    @property
    def forcing_scale(self) -> float:
        """(Q/2)^(1/4) T_sun, the temperature scale of the surface forcing."""
        return (0.5 * self.Q) ** 0.25 * self.T_sun


def lake_1d_config(**overrides) -> GreyConfig:
    """The one-dimensional lake: -66 T'' + T^4 = 12.5 E_3(0.1 |10 - z|) + ...,
    T(0) = (12.5 E_3(0))^(1/4), T'(10) = 0."""
    return replace(GreyConfig(), **overrides)


def equilibrium_temperature(config: GreyConfig, z):
    """T_e(z) = (Q/2 E_3(kappa (z_M - z)))^(1/4) T_sun."""
    z_arr = np.asarray(z, dtype=float)
    z_m, z_M = config.z_range
    eps = 1e-12 * max(1.0, abs(z_M) + abs(z_m))
    if np.any(z_arr < z_m - eps) or np.any(z_arr > z_M + eps):
        raise ValueError(f"z outside [{z_m}, {z_M}]")
    d = np.clip(z_M - z_arr, 0.0, None)
    val = (0.5 * config.Q * expint(3, config.kappa * d)) ** 0.25 * config.T_sun
    return float(val) if np.ndim(val) == 0 else val


def _depth_grid(config: GreyConfig, n_intervals: int) -> Grid1D:
    return Grid1D.uniform(config.depth, n_intervals)


def _boundary_term(config, grid):
    total = np.zeros(len(grid))
    for src in config.boundary_sources:
        total += boundary_attenuation(grid, config.kappa, src)
    return total


def halfstep_source(config: GreyConfig, grid: Grid1D, T, J=None, kernel=None):
    """Radiative source S = (T^{n+1/2})^4 of one outer iteration.

    ``grid`` measures height above the bottom ``z_m``.  ``J`` is the previous
    scattered mean intensity (only used when ``albedo_a > 0``).  ``kernel``
    may pass a precomputed order-1 matrix.
    """
    T = grid.check(T, "T")
    if np.any(T < 0):
        raise ValueError("T must be >= 0")
    z = config.z_range[0] + grid.nodes
    Te4 = equilibrium_temperature(config, z) ** 4
    if kernel is None:
        kernel = kernel_matrices(grid, config.kappa, (1,))[1]
    a = config.albedo_a
    H = (1 - a) * T**4
    if a > 0 and J is not None:
        H = H + a * np.asarray(J, dtype=float)
    return Te4 + _boundary_term(config, grid) + kernel @ H


def _second_difference(z):
    """Tridiagonal coefficients (lower, diag, upper) of -d^2/dz^2 on nodes z,
    with reflecting (zero-flux) ends."""
    h = np.diff(z)
    n = z.size
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    hl, hr = h[:-1], h[1:]
    lo[1:-1] = -2.0 / (hl * (hl + hr))
    up[1:-1] = -2.0 / (hr * (hl + hr))
    di[1:-1] = -(lo[1:-1] + up[1:-1])
    # ghost reflection T_{-1} = T_1
    up[0] = -2.0 / h[0] ** 2
    di[0] = 2.0 / h[0] ** 2
    lo[-1] = -2.0 / h[-1] ** 2
    di[-1] = 2.0 / h[-1] ** 2
    return lo, di, up


def _bc_value(bc, T_e_end):
    if isinstance(bc, str):
        if bc == "neumann":
            return None
        return float(T_e_end)
    return float(bc)


def nonlinear_residual(kbar_T, rhs, T, z, bc_bottom="neumann", bc_top="neumann"):
    """Pointwise residual of -kbar_T T'' + T_+^4 - rhs (zero at Dirichlet ends)."""
    lo, di, up = _second_difference(np.asarray(z, dtype=float))
    LT = di * T
    LT[1:] += lo[1:] * T[:-1]
    LT[:-1] += up[:-1] * T[1:]
    r = kbar_T * LT + np.maximum(T, 0) ** 4 - rhs
    if bc_bottom is not None and not (isinstance(bc_bottom, str) and bc_bottom == "neumann"):
        r[0] = 0.0
    if bc_top is not None and not (isinstance(bc_top, str) and bc_top == "neumann"):
        r[-1] = 0.0
    return r


def solve_reaction_diffusion_1d(kbar_T, rhs, z=None, bc_bottom="neumann", bc_top="neumann",
                                inner_iters=3, tol=1e-11, max_iters=50, method="newton",
                                T_init=None):
    """Solve -kbar_T T'' + T_+^4 = rhs on nodes ``z`` by linearized sweeps.

    Each sweep is one tridiagonal solve.  ``method="newton"`` linearizes
    T^4 about the current iterate, ``"picard"`` freezes T^3.  At least
    ``inner_iters`` sweeps are done, continuing until the max-norm residual
    is below ``tol`` times the size of the discrete operator applied to T
    (a normwise backward error) or ``max_iters`` is hit.
    Dirichlet values are given as floats, ``"neumann"`` means zero flux.

    Returns ``(T, info)`` with ``info`` keys ``iterations``, ``residual``,
    ``converged`` and ``regularized``.
    """
    rhs = np.asarray(rhs, dtype=float)
    if np.any(rhs < 0):
        raise ValueError("rhs must be >= 0")
    n = rhs.size
    z = np.linspace(0.0, 1.0, n) if z is None else np.asarray(z, dtype=float)
    if z.size != n:
        raise ValueError("rhs and z lengths differ")
    for bc in (bc_bottom, bc_top):
        if isinstance(bc, str) and bc != "neumann":
            raise ValueError("bc must be a float or 'neumann'")
    d_bot = None if isinstance(bc_bottom, str) else float(bc_bottom)
    d_top = None if isinstance(bc_top, str) else float(bc_top)

    info = {"iterations": 0, "residual": math.inf, "converged": False, "regularized": False}
    if kbar_T == 0:
        T = rhs ** 0.25
        if d_bot is not None:
            T[0] = d_bot
        if d_top is not None:
            T[-1] = d_top
        info.update(residual=0.0, converged=True)
        return T, info

    lo, di, up = _second_difference(z)
    lo, di, up = kbar_T * lo, kbar_T * di, kbar_T * up
    scale = max(1.0, float(rhs.max()))
    T = rhs ** 0.25 if T_init is None else np.array(T_init, dtype=float)
    if d_bot is not None:
        T[0] = d_bot
    if d_top is not None:
        T[-1] = d_top

    for it in range(1, max_iters + 1):
        Tp = np.maximum(T, 0.0)
        if method == "newton":
            react = 4.0 * Tp**3
            b = rhs + 3.0 * Tp**4
        else:
            react = Tp**3
            b = rhs.copy()
        diag = di + react
        ab = np.zeros((3, n))
        ab[0, 1:] = up[:-1]
        ab[1] = diag
        ab[2, :-1] = lo[1:]
        # Dirichlet ends are eliminated so the rows decouple exactly
        if d_bot is not None:
            b[1] -= ab[2, 0] * d_bot
            ab[1, 0], ab[0, 1], ab[2, 0] = 1.0, 0.0, 0.0
            b[0] = d_bot
        if d_top is not None:
            b[-2] -= ab[0, -1] * d_top
            ab[1, -1], ab[2, -2], ab[0, -1] = 1.0, 0.0, 0.0
            b[-1] = d_top
        if d_bot is None and d_top is None and np.all(react == 0):
            ab[1] += REGULARIZATION
            info["regularized"] = True
        T = solve_banded((1, 1), ab, b)
        res = np.max(np.abs(nonlinear_residual(kbar_T, rhs, T, z,
                                               "neumann" if d_bot is None else d_bot,
                                               "neumann" if d_top is None else d_top)))
        info["iterations"] = it
        info["residual"] = float(res)
        # normwise backward error: |r| <= tol (|A| |T| + |rhs|)
        bound = tol * (scale + float(np.max(np.abs(di)) * 2 + np.max(react)) * float(np.max(np.abs(T))))
        if it >= inner_iters and res <= bound:
            info["converged"] = True
            break
    return np.maximum(T, 0.0), info


def grey_iterate(config: GreyConfig, grid=None, n_intervals: int = 200, keep_iterates: bool = False):
    """Monotone source iteration for the grey lake, started from T = 0.

    ``grid`` (height above the bottom) defaults to ``n_intervals`` uniform
    cells.  Stops when the sup-norm increment is below ``config.tol``;
    otherwise returns after ``outer_iters`` with ``converged = False``.
    """
    if grid is None:
        grid = _depth_grid(config, n_intervals)
    if abs(grid.Z - config.depth) > 1e-9 * config.depth:
        raise ValueError("grid depth differs from z_range")
    z = config.z_range[0] + grid.nodes
    Te = equilibrium_temperature(config, z)
    bc_bot = _bc_value(config.bc_bottom, Te[0])
    bc_top = _bc_value(config.bc_top, Te[-1])
    kernel = kernel_matrices(grid, config.kappa, (1,))[1]
    C1 = contraction_bound(config.kappa, config.depth)

    report = IterationReport()
    report.flags["contraction_bound"] = C1
    T = np.zeros(len(grid))
    J = np.zeros(len(grid))
    weights = grid.trapezoid_weights()
    for _ in range(config.outer_iters):
        S = halfstep_source(config, grid, T, J, kernel=kernel)
        J = S
        T_new, info = solve_reaction_diffusion_1d(
            config.kbar_T, S, z, "neumann" if bc_bot is None else bc_bot,
            "neumann" if bc_top is None else bc_top, config.inner_iters,
            config.inner_tol, config.max_inner_iters, config.inner_method,
            T_init=np.maximum(T, S ** 0.25))
        report.record(T_new, T, source_norm=config.kappa * float(weights @ S))
        report.inner_iterations.append(info["iterations"])
        report.inner_residual.append(info["residual"])
        report.regularized |= info["regularized"]
        if keep_iterates:
            report.iterates.append(T_new.copy())
        T = T_new
        if report.sup_increment[-1] <= config.tol:
            report.converged = True
            break
    report.flags["dirichlet"] = bc_bot is not None or bc_top is not None
    return TemperatureProfile(T, z), report


# ------------------------------------------------------------------ two dimensions

@dataclass(frozen=True, eq=False)
class Terrain2D:
    """Lake cross-section between a symmetry axis ``x = 0`` and a shore.

    ``x`` are column positions and ``z_bottom`` the bed height z_m(x) at
    each column; the surface is ``z_top``.  Nodes follow the terrain:
    ``z = z_top + sigma (z_m(x) - z_top)`` with ``sigma`` uniform in [0, 1]
    (0 at the surface).  Slopes of the bed are taken from finite differences
    unless ``dz_bottom`` / ``d2z_bottom`` are supplied.
    """

    x: np.ndarray
    z_bottom: np.ndarray
    z_top: float = 10.0
    n_sigma: int = 40
    dz_bottom: np.ndarray = None
    d2z_bottom: np.ndarray = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        zb = np.asarray(self.z_bottom, dtype=float)
        if x.ndim != 1 or x.size < 3 or np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing with >= 3 columns")
        if zb.shape != x.shape:
            raise ValueError("z_bottom must match x")
        if np.any(zb >= self.z_top):
            raise ValueError("bed must lie strictly below the surface")
        if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0):
            raise ValueError("x columns must be uniformly spaced")
        if self.n_sigma < 2:
            raise ValueError("n_sigma must be >= 2")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z_bottom", zb)
        dzb = np.gradient(zb, x) if self.dz_bottom is None else np.asarray(self.dz_bottom, float)
        d2 = np.gradient(dzb, x) if self.d2z_bottom is None else np.asarray(self.d2z_bottom, float)
        object.__setattr__(self, "dz_bottom", dzb)
        object.__setattr__(self, "d2z_bottom", d2)

    @classmethod
    def flat(cls, width=30.0, z_bottom=0.0, z_top=10.0, n_x=31, n_sigma=40):
        x = np.linspace(0.0, width, n_x)
        zb = np.full(n_x, float(z_bottom))
        return cls(x, zb, z_top, n_sigma, np.zeros(n_x), np.zeros(n_x))

    @classmethod
    def quarter_disc(cls, width=30.0, depth=10.0, z_top=10.0, shore_fraction=0.9,
                     n_x=31, n_sigma=40):
        """Quarter of the unit disc stretched to ``width`` x ``depth``.

        The shore where the depth vanishes is cut at ``shore_fraction * width``
        so every column has positive depth.
        """
        if not 0 < shore_fraction < 1:
            raise ValueError("shore_fraction must lie in (0, 1)")
        x = np.linspace(0.0, shore_fraction * width, n_x)
        r = np.sqrt(1.0 - (x / width) ** 2)
        zb = z_top - depth * r
        dzb = depth * (x / width**2) / r
        d2 = depth / width**2 / r**3
        return cls(x, zb, z_top, n_sigma, dzb, d2)

    @property
    def sigma(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_sigma + 1)

    @property
    def column_depth(self) -> np.ndarray:
        return self.z_top - self.z_bottom

    def node_z(self) -> np.ndarray:
        """Node heights, shape (n_x, n_sigma + 1)."""
        return self.z_top + self.sigma[None, :] * (self.z_bottom - self.z_top)[:, None]


def _laplacian_2d(terrain: Terrain2D):
    """Sparse -Laplacian on the terrain-following grid (reflecting on every
    side; the bottom row is overwritten by Dirichlet rows later)."""
    x, s = terrain.x, terrain.sigma
    nx, ns = x.size, s.size
    hx, hs = x[1] - x[0], s[1] - s[0]
    D = terrain.column_depth
    Dp = -terrain.dz_bottom
    Dpp = -terrain.d2z_bottom
    sig = s[None, :] * np.ones((nx, 1))
    Dm = D[:, None]
    sx = -sig * Dp[:, None] / Dm
    sz = -1.0 / Dm
    sxx = sig * (2 * Dp[:, None] ** 2 - Dpp[:, None] * Dm) / Dm**2

    def idx(i, j):
        # reflect ghosts across every side
        i = np.where(i < 0, -i, np.where(i > nx - 1, 2 * (nx - 1) - i, i))
        j = np.where(j < 0, -j, np.where(j > ns - 1, 2 * (ns - 1) - j, j))
        return i * ns + j

    I, Jn = np.meshgrid(np.arange(nx), np.arange(ns), indexing="ij")
    rows, cols, vals = [], [], []

    def add(di, dj, coef):
        rows.append((I * ns + Jn).ravel())
        cols.append(idx(I + di, Jn + dj).ravel())
        vals.append(-np.broadcast_to(coef, I.shape).ravel())

    cxx = 1.0 / hx**2
    css = (sx**2 + sz**2) / hs**2
    cxs = 2.0 * sx / (4 * hx * hs)
    cs = sxx / (2 * hs)
    add(0, 0, -2 * cxx - 2 * css)
    add(1, 0, cxx)
    add(-1, 0, cxx)
    add(0, 1, css + cs)
    add(0, -1, css - cs)
    add(1, 1, cxs)
    add(-1, -1, cxs)
    add(1, -1, -cxs)
    add(-1, 1, -cxs)
    n = nx * ns
    L = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
    return L


def _column_grids(terrain: Terrain2D):
    """Per-column grids measured upward from the bed (sigma reversed)."""
    s = terrain.sigma
    return [Grid1D((1.0 - s[::-1]) * d) for d in terrain.column_depth]


def grey_solve_2d(terrain: Terrain2D, config: GreyConfig, keep_iterates: bool = False):
    """Source iteration for the lake cross-section.

    Radiation couples nodes only along each vertical column.  The bed
    carries a Dirichlet value (``config.bc_bottom``: float or
    ``"equilibrium"``, the local T_e at the bed); surface, symmetry axis and
    the cut shore are zero-flux.  Returns ``(T, report)`` with ``T`` of shape
    ``(n_x, n_sigma + 1)`` indexed by column then sigma (surface first).
    """
    if config.bc_bottom == "neumann":
        raise ValueError("the 2D lake needs a Dirichlet bed condition")
    zz = terrain.node_z()
    cfg_col = [replace(config, z_range=(float(zb), float(terrain.z_top)))
               for zb in terrain.z_bottom]
    Te = np.array([equilibrium_temperature(c, zc) for c, zc in zip(cfg_col, zz)])
    Te4 = Te**4
    if isinstance(config.bc_bottom, str):
        bed = Te[:, -1].copy()
    else:
        bed = np.full(terrain.x.size, float(config.bc_bottom))
    grids = _column_grids(terrain)
    kernels = [kernel_matrices(g, config.kappa, (1,))[1] for g in grids]
    boundary = np.array([_boundary_term(c, g)[::-1] for c, g in zip(cfg_col, grids)])

    nx, ns = zz.shape
    L = config.kbar_T * _laplacian_2d(terrain)
    dirichlet = np.zeros((nx, ns), dtype=bool)
    dirichlet[:, -1] = True
    dflat = dirichlet.ravel()
    keep = sparse.diags((~dflat).astype(float))
    L = (keep @ L).tocsr()

    report = IterationReport()
    T = np.zeros((nx, ns))
    J = np.zeros((nx, ns))
    a = config.albedo_a
    for _ in range(config.outer_iters):
        H = (1 - a) * T**4 + a * J
        # column kernels act on values ordered bed -> surface
        S = Te4 + boundary + np.array([(K @ h[::-1])[::-1] for K, h in zip(kernels, H)])
        J = S.copy()
        S[:, -1] = bed**4
        U = np.maximum(T, S ** 0.25)
        U[:, -1] = bed
        info_res = math.inf
        it = 0
        for it in range(1, config.max_inner_iters + 1):
            Up = np.maximum(U, 0.0).ravel()
            react = np.where(dflat, 1.0, 4.0 * Up**3)
            A = (L + sparse.diags(react)).tocsc()
            b = np.where(dflat, np.repeat(bed, ns), S.ravel() + 3.0 * Up**4)
            U = spsolve(A, b).reshape(nx, ns)
            r = L @ U.ravel() + np.maximum(U.ravel(), 0) ** 4 - S.ravel()
            info_res = float(np.max(np.abs(r[~dflat])))
            if it >= config.inner_iters and info_res <= config.inner_tol * max(1.0, S.max()):
                break
        U = np.maximum(U, 0.0)
        report.record(U, T)
        report.inner_iterations.append(it)
        report.inner_residual.append(info_res)
        if keep_iterates:
            report.iterates.append(U.copy())
        T = U
        if report.sup_increment[-1] <= config.tol:
            report.converged = True
            break
    return T, report
