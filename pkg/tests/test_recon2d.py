import numpy as np
import pytest

from photoacoustic.calculations.forward import CauchyField
from photoacoustic.calculations.harmonics import (
    BoundaryObservation,
    ModalCoefficients,
    ball_grid,
    basis_matrix,
    circle_grid,
    grid_for,
    mode_indices,
)
from photoacoustic.calculations.recon2d import (
    apply_K,
    beta,
    beta_envelopes,
    beta_t,
    beta_tt,
    boundary_residuals_2d,
    check_divergence,
    exterior_samples_2d,
    field_norm,
    iterate_2d,
    reconstruct_iterative_2d,
    solve_exterior_2d,
    solve_interior_2d,
)
from photoacoustic.errors import DivergenceError, DomainError


def zero_observation_2d(cfg, T=None):
    grid = grid_for(2, cfg.recon.nmax)
    T = cfg.grid.T if T is None else T
    return BoundaryObservation(grid, cfg.grid.dt, np.zeros((grid.n_nodes, int(round(T / cfg.grid.dt)) + 1)))


def test_beta_at_the_center():
    assert beta(3.0, 0.0) == pytest.approx(1 / 3)
    assert beta_t(3.0, 0.0) == pytest.approx(-1 / 9)
    assert beta_tt(3.0, 0.0) == pytest.approx(2 / 27)


@pytest.mark.parametrize("T", [2.5, 3.0, 6.0])
def test_envelopes_bound_the_kernels(T):
    """
    The envelopes are the sups at |x - y| = 2: (T^2-4)^(-1/2), T (T^2-4)^(-3/2) and
    (2T^2+4) (T^2-4)^(-5/2). A bound of 1/(T^2-4) on |beta| would already fail at T = 3, c = 0.
    """
    env = beta_envelopes(T)
    c = np.linspace(0.0, 2.0, 1000)
    assert np.abs(beta(T, c)).max() <= env.beta * (1 + 1e-12)
    assert np.abs(beta_t(T, c)).max() <= env.beta_t * (1 + 1e-12)
    assert np.abs(beta_tt(T, c)).max() <= env.beta_tt * (1 + 1e-12)
    # the sup is attained at |x - y| = 2
    assert beta_tt(T, 2.0) == pytest.approx(env.beta_tt)


def test_beta_is_not_bounded_by_the_inverse_gap():
    # 1/(T^2 - 4) underestimates |beta| at the center
    assert beta(3.0, 0.0) > 1.0 / 5.0
    assert beta_envelopes(3.0).beta >= beta(3.0, 0.0)


def test_operator_bound_shrinks_with_T():
    bounds = [beta_envelopes(T).operator_bound for T in (3.0, 4.0, 6.0, 10.0)]
    assert all(b1 > b2 for b1, b2 in zip(bounds, bounds[1:]))
    assert bounds[2] < 1.0


def test_envelopes_need_T_beyond_two():
    with pytest.raises(DomainError):
        beta_envelopes(2.0)


def test_remainder_operator_respects_its_bound(rng):
    ball = ball_grid(circle_grid(16), 8)
    a = CauchyField(ball, rng.normal(size=ball.shape), np.zeros(ball.shape))
    for T in (3.0, 6.0):
        Ka = apply_K(a, T)
        assert field_norm(Ka) <= beta_envelopes(T).operator_bound * field_norm(a)
        assert not np.any(Ka.b)
    with pytest.raises(DomainError):
        apply_K(a, 2.0)


def test_field_norm_of_constant():
    ball = ball_grid(circle_grid(16), 8)
    one = CauchyField(ball, np.ones(ball.shape), np.zeros(ball.shape))
    assert field_norm(one) == pytest.approx(np.sqrt(np.pi))
    assert field_norm(one, "b") == 0.0


@pytest.mark.parametrize("norms", [[3.0, 2.0, 1.0], [1.0, 2.0], [0.0, 0.0, 0.0], [1.0, 2.0, 3.0, 2.5]])
def test_divergence_check_accepts(norms):
    check_divergence(norms, 3)


def test_divergence_check_rejects_growing_norms():
    with pytest.raises(DivergenceError):
        check_divergence([1.0, 1.0, 1.2, 1.5], 3)


def test_exterior_densities_reproduce_the_boundary_data(small_cfg2):
    dt = 0.02
    t = dt * np.arange(301)
    modes = mode_indices(2, 2)
    F = np.outer(np.linspace(1.0, 2.0, len(modes)), t**3 * np.exp(-t))
    coeffs = ModalCoefficients(2, 2, dt, modes, F)
    ext = solve_exterior_2d(coeffs, 6.0, small_cfg2)
    assert ext.V.shape == (len(modes), small_cfg2.quad.shell)
    residuals = boundary_residuals_2d(ext, coeffs)
    assert max(residuals.values()) < 1e-2
    v, _ = exterior_samples_2d(ext, [1.0, 4.0], 2.0)
    assert np.allclose(v[:, 0], F[:, 100], rtol=2e-2)
    assert not np.any(v[:, 1])


def test_exterior_2d_has_no_trailing_edge(small_cfg2):
    dt = 0.02
    t = dt * np.arange(301)
    modes = mode_indices(2, 2)
    F = np.outer(np.linspace(1.0, 2.0, len(modes)), t**3 * np.exp(-t))
    ext = solve_exterior_2d(ModalCoefficients(2, 2, dt, modes, F), 6.0, small_cfg2)
    # r = 1.5, every sample time beyond r + 1
    late = np.stack([exterior_samples_2d(ext, [1.5], s)[0][:, 0] for s in np.linspace(2.6, 6.0, 18)], axis=1)
    assert np.all(np.abs(late).max(axis=1) > 1e-8)


def test_exterior_2d_needs_the_whole_window(small_cfg2):
    coeffs = ModalCoefficients.zeros(2, 2, 0.02, 101)
    with pytest.raises(DomainError):
        solve_exterior_2d(coeffs, 6.0, small_cfg2)


def test_interior_2d_of_zero_data(small_cfg2):
    coeffs = ModalCoefficients.zeros(2, small_cfg2.recon.nmax, 0.02, 101)
    field = solve_interior_2d(coeffs, small_cfg2)
    assert not np.any(field.a) and not np.any(field.b)
    with pytest.raises(DomainError):
        solve_interior_2d(ModalCoefficients.zeros(2, 2, 0.02, 51), small_cfg2)


def test_iteration_argument_checks(small_cfg2):
    obs = zero_observation_2d(small_cfg2)
    with pytest.raises(DomainError):
        iterate_2d(obs, 2.0, 1, small_cfg2)
    with pytest.raises(ValueError):
        iterate_2d(obs, 6.0, 0, small_cfg2)
    with pytest.raises(DomainError):
        iterate_2d(zero_observation_2d(small_cfg2, T=4.0), 6.0, 1, small_cfg2)


def test_iteration_on_zero_data_stays_zero(small_cfg2):
    diagnostics = {}
    field = reconstruct_iterative_2d(zero_observation_2d(small_cfg2), 6.0, 2, small_cfg2, diagnostics)
    assert diagnostics["iteration_norms"] == [0.0, 0.0]
    assert not np.any(field.a) and not np.any(field.b)


def manufactured_interior(n, dt, count=4000):
    """Boundary series and exact (u, u_t) profiles at t = 2 for eta(s) = s^4 on s > 0"""
    theta = (np.arange(count) + 0.5) * np.pi / count
    weights = max(n, 1) * (np.pi / count) * np.cos(n * theta)

    def eta(s, deriv=0):
        s = np.maximum(s, 0.0)
        return 4.0 * s**3 if deriv else s**4

    t = dt * np.arange(int(round(2.0 / dt)) + 1)
    F = np.array([eta(ti - 1.0 + np.cos(theta)) @ weights for ti in t])

    def exact(radii, deriv=0):
        return np.array([eta(1.0 + r * np.cos(theta), deriv) @ weights for r in radii])

    return F, exact


@pytest.mark.parametrize("n", [0, 2])
def test_interior_2d_recovers_a_manufactured_field(small_cfg2, n):
    dt = 0.01
    F, exact = manufactured_interior(n, dt)
    coeffs = ModalCoefficients(2, n, dt, [(n, 2)], F[None, :])
    field = solve_interior_2d(coeffs, small_cfg2)
    ball = field.ball
    Y = basis_matrix(ball.angular, [(n, 2)])[:, 0]
    for values, deriv in ((field.a, 0), (field.b, 1)):
        expected = np.outer(Y, exact(ball.radii, deriv))
        assert np.linalg.norm(values - expected) <= 0.02 * np.linalg.norm(expected)


def test_interior_2d_is_linear(small_cfg2):
    dt = 0.01
    F0, _ = manufactured_interior(0, dt)
    F2, _ = manufactured_interior(2, dt)
    modes = [(0, 2), (2, 2)]
    one = solve_interior_2d(ModalCoefficients(2, 2, dt, modes, np.vstack([F0, 0 * F2])), small_cfg2)
    two = solve_interior_2d(ModalCoefficients(2, 2, dt, modes, np.vstack([0 * F0, F2])), small_cfg2)
    both = solve_interior_2d(ModalCoefficients(2, 2, dt, modes, np.vstack([F0, -3.0 * F2])), small_cfg2)
    assert np.allclose(both.a, one.a - 3.0 * two.a, atol=1e-12 * np.abs(both.a).max())
    assert np.allclose(both.b, one.b - 3.0 * two.b, atol=1e-12 * np.abs(both.b).max())
