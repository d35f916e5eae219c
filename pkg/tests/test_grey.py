import numpy as np
import pytest

from stratrt.errors import ConfigError
from stratrt.grey import (GreyConfig, Terrain2D, equilibrium_temperature, grey_iterate,
                          grey_solve_2d, halfstep_source, lake_1d_config, nonlinear_residual,
                          solve_reaction_diffusion_1d)
from stratrt.kernels import BoundarySourceSpec, Grid1D
from stratrt.specfun import expint


def test_config_validation_collects_errors():
    with pytest.raises(ConfigError) as info:
        GreyConfig(kappa=-1.0, albedo_a=1.2, z_range=(5.0, 1.0), bc_top="dirichlet")
    assert len(info.value.errors) == 4


def test_forcing_scale_for_solar_values():
    cfg = GreyConfig(Q=678.0, T_sun=5.8)
    assert cfg.forcing_scale == pytest.approx(24.887, abs=1e-3)
    assert round(cfg.forcing_scale, 1) == 24.9


def test_equilibrium_temperature():
    cfg = lake_1d_config()
    assert equilibrium_temperature(cfg, 10.0) == pytest.approx(6.25 ** 0.25, rel=1e-15)
    assert equilibrium_temperature(cfg, 0.0) == pytest.approx((12.5 * expint(3, 1.0)) ** 0.25, rel=1e-14)
    assert cfg.bc_bottom == pytest.approx(equilibrium_temperature(cfg, 10.0))
    with pytest.raises(ValueError):
        equilibrium_temperature(cfg, 11.0)


def test_halfstep_source_from_zero():
    cfg = lake_1d_config()
    grid = Grid1D.uniform(10.0, 50)
    S = halfstep_source(cfg, grid, np.zeros(51))
    np.testing.assert_allclose(S, equilibrium_temperature(cfg, grid.nodes) ** 4, rtol=1e-14)
    with pytest.raises(ValueError):
        halfstep_source(cfg, grid, -np.ones(51))


def _manufactured(n, kbar=0.3, L=2.0):
    z = np.linspace(0.0, L, n)
    k = np.pi / L
    T = 1.0 + 0.3 * np.cos(k * z)
    rhs = kbar * 0.3 * k**2 * np.cos(k * z) + T**4
    return z, T, rhs


def test_reaction_diffusion_second_order():
    errs = []
    for n in (41, 81, 161):
        z, T_exact, rhs = _manufactured(n)
        T, info = solve_reaction_diffusion_1d(0.3, rhs, z)
        assert info["converged"]
        errs.append(np.max(np.abs(T - T_exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_reaction_diffusion_dirichlet():
    z, T_exact, rhs = _manufactured(81)
    T, info = solve_reaction_diffusion_1d(0.3, rhs, z, bc_bottom=T_exact[0], bc_top=T_exact[-1])
    assert info["converged"]
    assert T[0] == T_exact[0] and T[-1] == T_exact[-1]
    r = nonlinear_residual(0.3, rhs, T, z, T_exact[0], T_exact[-1])
    assert np.max(np.abs(r)) < 1e-9
    assert np.max(np.abs(T - T_exact)) < 1e-4


def test_picard_agrees_with_newton_when_diffusion_dominates():
    z = np.linspace(0.0, 2.0, 81)
    T_exact = 1.0 + 0.01 * np.cos(np.pi * z / 2)
    rhs = 30.0 * 0.01 * (np.pi / 2) ** 2 * np.cos(np.pi * z / 2) + T_exact**4
    Tn, _ = solve_reaction_diffusion_1d(30.0, rhs, z, bc_bottom=T_exact[0], bc_top=T_exact[-1])
    Tp, info = solve_reaction_diffusion_1d(30.0, rhs, z, bc_bottom=T_exact[0], bc_top=T_exact[-1],
                                           method="picard", max_iters=500)
    assert info["converged"]
    assert np.max(np.abs(Tn - Tp)) < 1e-7


def test_picard_stalls_when_reaction_dominates():
    # frozen-T^3 sweeps amplify the low modes once 3 T^3 exceeds the diffusion eigenvalue
    z, T_exact, rhs = _manufactured(81)
    _, info = solve_reaction_diffusion_1d(0.3, rhs, z, bc_bottom=T_exact[0], bc_top=T_exact[-1],
                                          method="picard", max_iters=200)
    assert not info["converged"]


def test_reaction_diffusion_special_cases():
    rhs = np.linspace(0.0, 16.0, 11)
    T, info = solve_reaction_diffusion_1d(0.0, rhs)
    np.testing.assert_allclose(T, rhs ** 0.25)
    T, info = solve_reaction_diffusion_1d(1.0, np.zeros(11))
    assert info["regularized"] and np.all(T == 0)
    with pytest.raises(ValueError):
        solve_reaction_diffusion_1d(1.0, -np.ones(11))
    with pytest.raises(ValueError):
        solve_reaction_diffusion_1d(1.0, np.ones(11), bc_top="equilibrium")


def test_lake_iteration_monotone_and_bounded():
    cfg = lake_1d_config(outer_iters=60)
    profile, report = grey_iterate(cfg, n_intervals=100)
    assert report.converged
    assert report.monotone
    assert profile.T[0] == pytest.approx(cfg.bc_bottom, abs=1e-12)
    assert report.flags["contraction_bound"] == pytest.approx(1 - expint(2, 0.5))
    # iterates stay below the fixed point and the ratio settles near the contraction bound
    assert 0.4 < report.ratio[-3] < report.flags["contraction_bound"]
    assert 1.7 < profile.T_max < 1.8


def test_lake_solution_independent_of_resolution():
    cfg = lake_1d_config(outer_iters=60, tol=1e-10)
    coarse, _ = grey_iterate(cfg, n_intervals=100)
    fine, _ = grey_iterate(cfg, n_intervals=400)
    assert np.max(np.abs(fine.T[::4] - coarse.T)) < 1e-3


def test_no_sun_open_slab_stays_below_wall_value():
    c = 1.3
    cfg = GreyConfig(Q=0.0, bc_bottom=c, bc_top="neumann", outer_iters=200, tol=1e-12)
    profile, report = grey_iterate(cfg, n_intervals=100)
    assert report.monotone
    assert np.all(profile.T <= c + 1e-12)
    assert profile.T[0] == pytest.approx(c)


def test_no_sun_enclosure_is_isothermal():
    c = 1.3
    walls = (BoundarySourceSpec("blackbody", c, "top"), BoundarySourceSpec("blackbody", c, "bottom"))
    cfg = GreyConfig(Q=0.0, bc_bottom=c, bc_top="neumann", boundary_sources=walls,
                     outer_iters=400, tol=1e-13)
    profile, report = grey_iterate(cfg, n_intervals=100)
    assert report.converged and report.monotone
    assert np.max(np.abs(profile.T - c)) <= 1e-8


def test_albedo_slows_but_keeps_monotone():
    cfg = lake_1d_config(albedo_a=0.3, outer_iters=80)
    profile, report = grey_iterate(cfg, n_intervals=80)
    assert report.converged and report.monotone


def test_grid_depth_mismatch():
    with pytest.raises(ValueError):
        grey_iterate(lake_1d_config(), grid=Grid1D.uniform(5.0, 10))


def test_flat_2d_matches_1d():
    cfg = lake_1d_config(outer_iters=60, tol=1e-10)
    terrain = Terrain2D.flat(width=20.0, n_x=5, n_sigma=50)
    T2, rep2 = grey_solve_2d(terrain, cfg)
    prof, _ = grey_iterate(cfg, n_intervals=50)
    assert rep2.converged
    for col in T2:
        assert np.max(np.abs(col[::-1] - prof.T)) < 1e-9


def test_flat_2d_with_albedo_matches_1d():
    cfg = lake_1d_config(outer_iters=100, tol=1e-10, albedo_a=0.2)
    T2, _ = grey_solve_2d(Terrain2D.flat(n_x=4, n_sigma=30), cfg)
    prof, _ = grey_iterate(cfg, n_intervals=30)
    assert np.max(np.abs(T2[0][::-1] - prof.T)) < 1e-9


def test_quarter_disc_lake():
    cfg = lake_1d_config(outer_iters=60, bc_bottom="equilibrium")
    terrain = Terrain2D.quarter_disc(n_x=16, n_sigma=20)
    T, report = grey_solve_2d(terrain, cfg)
    assert report.converged and report.monotone
    assert T.shape == (16, 21)
    zz = terrain.node_z()
    col_cfg = lake_1d_config(z_range=(float(terrain.z_bottom[-1]), 10.0))
    assert T[-1, -1] == pytest.approx(equilibrium_temperature(col_cfg, zz[-1, -1]))
    assert np.all(np.isfinite(T)) and np.all(T > 0)


def test_2d_requires_dirichlet_bed():
    with pytest.raises(ValueError):
        grey_solve_2d(Terrain2D.flat(), lake_1d_config(bc_bottom="neumann"))


def test_terrain_validation():
    with pytest.raises(ValueError):
        Terrain2D(np.array([0.0, 1.0, 3.0]), np.zeros(3))
    with pytest.raises(ValueError):
        Terrain2D(np.linspace(0, 1, 4), np.full(4, 11.0))
    with pytest.raises(ValueError):
        Terrain2D.quarter_disc(shore_fraction=1.0)
    t = Terrain2D.quarter_disc(n_x=5)
    assert t.column_depth[0] == pytest.approx(10.0)
    assert np.all(np.diff(t.column_depth) < 0)
