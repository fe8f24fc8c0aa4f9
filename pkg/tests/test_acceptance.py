"""End-to-end accuracy runs at full resolution. Deselect with -m "not slow"."""

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from photoacoustic.calculations.forward import eval_solution3d, radial_oracle, synthesize_observation
from photoacoustic.calculations.harmonics import BoundaryObservation, analyze, grid_for, sphere_grid
from photoacoustic.calculations.recon2d import (
    apply_K,
    beta,
    beta_envelopes,
    beta_t,
    beta_tt,
    field_norm,
    iterate_2d,
    reconstruct_iterative_2d,
)
from photoacoustic.calculations.recon3d import (
    reconstruct_exterior,
    reconstruct_interior_volterra,
    solve_exterior,
    target_ball,
    time_reverse,
    time_reverse_points,
)
from photoacoustic.calculations.specfun import bessel_zeros, eval_legendre
from photoacoustic.calculations.volterra import (
    TimeGrid,
    apply_resolvent3d,
    build_resolvent3d,
    solve_smooth_volterra,
)
from photoacoustic.calculations.xcheck import FRBackprojector, reconstruct_halftime
from photoacoustic.cli.main import run
from photoacoustic.cli.metrics import relative_l2
from photoacoustic.cli.phantoms import phantom_evaluator, sample_phantom

from conftest import make_config

pytestmark = pytest.mark.slow


def phantom_run(cfg):
    """(observation, truth on the target ball, evaluator) for the configured phantom"""
    evaluator = phantom_evaluator(cfg)
    grid = grid_for(cfg.grid.dimension, cfg.recon.nmax, cfg.n_theta, cfg.n_phi)
    obs = synthesize_observation(
        None, grid, cfg.grid.T, cfg.grid.dt, h_t=cfg.h_t, mean_order=cfg.quad.mean,
        psi_order=cfg.quad.psi, workers=cfg.workers, evaluator=evaluator,
    )
    return obs, sample_phantom(cfg.phantom, target_ball(cfg)), evaluator


def rel_error(field, truth, component="a"):
    return relative_l2(field.component(component), truth.component(component), truth.ball.weights())


@pytest.fixture(scope="module")
def bump3d():
    cfg = make_config(run={"progress": "false"})
    assert cfg.recon.nmax == 12 and cfg.grid.dt == 2e-3 and cfg.grid.T == 2.2
    assert cfg.phantom.center == [0.3, 0.0, 0.0] and cfg.phantom.radius == 0.5 and cfg.phantom.power == 3
    obs, truth, evaluator = phantom_run(cfg)
    return cfg, obs, truth, evaluator


@pytest.fixture(scope="module")
def exterior3d(bump3d):
    cfg, obs, _, _ = bump3d
    return reconstruct_exterior(obs, cfg)


@pytest.fixture(scope="module")
def rate3d():
    cfg = make_config(
        grid={"dt": 5e-3},
        recon={"nmax": 6},
        phantom={"name": "harmonic", "component": "b", "band": 3, "seed": 11},
        run={"progress": "false"},
    )
    obs, truth, _ = phantom_run(cfg)
    return cfg, obs, truth


def test_exterior_round_trip(bump3d, exterior3d):
    _, _, truth, _ = bump3d
    assert rel_error(exterior3d, truth) <= 0.10


def test_interior_volterra_round_trip(bump3d, exterior3d):
    cfg, obs, truth, _ = bump3d
    interior = reconstruct_interior_volterra(obs, cfg)
    assert rel_error(interior, truth) <= 0.10
    assert rel_error(interior, exterior3d) <= 0.05


@pytest.fixture(scope="module")
def bump2d():
    cfg = make_config(grid={"dimension": 2}, run={"progress": "false"})
    assert cfg.grid.T == 6.0 and cfg.recon.n_iter == 3
    obs, truth, _ = phantom_run(cfg)
    return cfg, obs, truth


def test_time_reversal_reproduces_the_shell_data():
    cfg = make_config(recon={"nmax": 4}, run={"progress": "false"})
    T, dt = cfg.grid.T, cfg.grid.dt
    bump = lambda r: (1.0 - r * r) ** 3 if r < 1.0 else 0.0
    grid = grid_for(3, cfg.recon.nmax)
    times = dt * np.arange(int(round(T / dt)) + 1)
    F = np.array([radial_oracle(bump, lambda r: 0.0, 1.0, t)[0] for t in times])
    coeffs = analyze(BoundaryObservation(grid, dt, np.outer(np.ones(grid.n_nodes), F)), cfg.recon.nmax)
    ext = solve_exterior(coeffs, T, cfg)
    field = time_reverse(ext, T, target_ball(cfg), cfg)

    weights = field.ball.angular.weights / field.ball.angular.weights.sum()
    knots = np.r_[field.ball.radii, 1.0]
    a_fit = CubicSpline(knots, np.r_[weights @ field.a, 0.0])
    b_fit = CubicSpline(knots, np.r_[weights @ field.b, 0.0])
    a_rec = lambda r: float(a_fit(r)) if r < 1.0 else 0.0
    b_rec = lambda r: float(b_fit(r)) if r < 1.0 else 0.0
    forward = np.array([radial_oracle(a_rec, b_rec, r, T) for r in ext.shell_radii])

    row = coeffs.modes.index((0, 0))
    y00 = 1.0 / np.sqrt(4.0 * np.pi)
    for values, shell in ((forward[:, 0], ext.V[row]), (forward[:, 1], ext.V_t[row])):
        assert np.linalg.norm(values - y00 * shell) <= 0.05 * np.linalg.norm(y00 * shell)


def test_iterative_2d_round_trip(bump2d):
    cfg, obs, truth = bump2d
    diagnostics = {}
    field = reconstruct_iterative_2d(obs, 6.0, 3, cfg, diagnostics)
    norms = diagnostics["iteration_norms"]
    assert len(norms) == 3 and norms[0] > norms[1] > norms[2]
    assert rel_error(field, truth) <= 0.15


def test_iteration_leaves_the_remainder_power(bump2d):
    cfg, obs, truth = bump2d
    bound = beta_envelopes(6.0).operator_bound
    remainder = truth
    for n in (1, 2, 3):
        partial = iterate_2d(obs, 6.0, n, cfg).partial_sum
        remainder = apply_K(remainder, 6.0)
        # a - (a_1 + ... + a_n) = K^n a up to the discretization error
        gap = truth - partial - remainder
        assert field_norm(gap) <= 0.15 * field_norm(truth)
        assert field_norm(remainder) <= bound**n * field_norm(truth)


@pytest.mark.parametrize("n", range(1, 11))
def test_resolvent_matches_direct_solve(n):
    grid = TimeGrid(1e-3, 4001)
    t = grid.nodes
    g = t**4 * np.exp(-t)
    g /= np.abs(g).max()
    direct = solve_smooth_volterra(lambda lags: eval_legendre(n, 1.0 + lags, deriv=1), g, grid)
    resolved = apply_resolvent3d(build_resolvent3d(n), g, grid)
    assert np.abs(direct - resolved).max() <= 1e-5


def test_first_resolvent_is_exponential():
    t = np.linspace(0.0, 4.0, 401)
    assert np.abs(build_resolvent3d(1).evaluate(t) - np.exp(-t)).max() <= 1e-10


def test_trailing_edge_leaves_the_ball_quiet(bump3d):
    _, _, truth, evaluator = bump3d
    directions = sphere_grid(4, 8).points()
    points = np.concatenate([[np.zeros(3)], 0.5 * directions, directions])
    peak = np.abs(truth.a).max()
    for x in points:
        u, _ = eval_solution3d(evaluator, x, 2.05, h_t=1e-3)
        assert abs(u) <= 1e-3 * peak


def test_halftime_recovers_band_limited_rate(rate3d):
    cfg, obs, truth = rate3d
    field = reconstruct_halftime(obs.truncated(1.0), "a_zero", cfg, check=False)
    assert rel_error(field, truth, "b") <= 0.10


def test_backprojection_cross_check(rate3d):
    cfg, obs, truth = rate3d
    ball = truth.ball
    inner = ball.radii <= 0.5
    points = ball.points()[:, inner].reshape(-1, 3)
    fr = FRBackprojector(obs.truncated(1.5)).at_points(points)
    exact = truth.b[:, inner].ravel()
    weights = ball.weights()[:, inner].ravel()
    assert relative_l2(fr, exact, weights) <= 0.10
    exterior = reconstruct_exterior(obs, cfg)
    assert relative_l2(fr, exterior.b[:, inner].ravel(), weights) <= 0.10


def test_pointwise_reconstruction_is_local(bump3d):
    cfg, obs, _, _ = bump3d
    x = np.array([[0.3, 0.0, 0.0]])
    coeffs = analyze(obs, cfg.recon.nmax)
    full = solve_exterior(coeffs, 2.2, cfg)
    short = solve_exterior(analyze(obs.truncated(1.3), cfg.recon.nmax), 1.3, cfg, full_ball=False)
    a_full, _ = time_reverse_points(full, x, cfg)
    a_short, _ = time_reverse_points(short, x, cfg)
    assert abs(a_short[0] - a_full[0]) <= 0.02 * abs(a_full[0])


def test_special_function_suite():
    assert np.abs(bessel_zeros(0.5, 20) - np.pi * np.arange(1, 21)).max() <= 1e-10
    c = np.linspace(0.0, 2.0, 1000)
    for T in (2.1, 3.0, 6.0, 20.0):
        env = beta_envelopes(T)
        assert np.all(np.abs(beta(T, c)) <= env.beta * (1 + 1e-12))
        assert np.all(np.abs(beta_t(T, c)) <= env.beta_t * (1 + 1e-12))
        assert np.all(np.abs(beta_tt(T, c)) <= env.beta_tt * (1 + 1e-12))


def test_repeated_runs_are_byte_identical(tmp_path):
    settings = ["--set", "recon.nmax = 6", "--set", "grid.dt = 0.01", "--workers", "4", "--quiet"]
    for stem in ("first", "second"):
        out = str(tmp_path / stem)
        assert run(["synth", "--out", out, "--phantom", "multibump", "--seed", "7", *settings]) == 0
        assert run(["recon", out, "--method", "exterior3d", "--out", out + ".rec", *settings]) == 0
    for suffix in (".bin", ".truth.bin", ".rec.bin"):
        assert (tmp_path / f"first{suffix}").read_bytes() == (tmp_path / f"second{suffix}").read_bytes()
