import numpy as np
import pytest

from photoacoustic.calculations.forward import radial_oracle
from photoacoustic.calculations.harmonics import BoundaryObservation, ModalCoefficients, grid_for, mode_indices
from photoacoustic.calculations.recon3d import (
    PoleData,
    ResidueSeriesParams,
    boundary_residuals,
    evaluate_residue_series,
    exterior_samples,
    min_observation_time,
    reconstruct_exterior,
    reconstruct_interior_residue,
    reconstruct_interior_volterra,
    shell_radii,
    solve_exterior,
    spline_profile,
    target_ball,
    time_reverse,
    time_reverse_points,
)
from photoacoustic.errors import DomainError, LocalityError, ValidityError


def radial_observation(cfg, a_radial, b_radial=lambda r: 0.0):
    """Boundary data of a radial field, the same at every node of the target sphere grid"""
    grid = grid_for(3, cfg.recon.nmax)
    times = cfg.grid.dt * np.arange(int(round(cfg.grid.T / cfg.grid.dt)) + 1)
    F = np.array([radial_oracle(a_radial, b_radial, 1.0, t)[0] for t in times])
    return BoundaryObservation(grid, cfg.grid.dt, np.outer(np.ones(grid.n_nodes), F))


def zero_observation(cfg):
    grid = grid_for(3, cfg.recon.nmax)
    n_times = int(round(cfg.grid.T / cfg.grid.dt)) + 1
    return BoundaryObservation(grid, cfg.grid.dt, np.zeros((grid.n_nodes, n_times)))


def exact_on_ball(ball, a_radial):
    r = np.broadcast_to(ball.radii, ball.shape)
    return np.vectorize(a_radial)(r)


def test_shell_radii_span_the_shell():
    radii = shell_radii(2.2, 16)
    assert radii[0] == 1.0 and radii[-1] == pytest.approx(3.2)
    assert np.all(np.diff(radii) > 0)


def test_spline_profile_is_zero_off_the_shell():
    radii = np.linspace(1.0, 2.0, 8)
    prof = spline_profile(radii, np.ones((2, 8)))
    values = prof(np.array([0.5, 1.5, 2.5]))
    assert values.shape == (2, 3)
    assert np.allclose(values[:, 1], 1.0) and not np.any(values[:, [0, 2]])


def test_min_observation_time():
    assert min_observation_time([0.3, 0.0, 0.0]) == pytest.approx(1.3)


def test_exterior_needs_two_units_of_time(small_cfg3):
    coeffs = ModalCoefficients.zeros(3, 2, 0.01, 181)
    with pytest.raises(DomainError):
        solve_exterior(coeffs, 1.8, small_cfg3)
    with pytest.raises(DomainError):
        solve_exterior(coeffs, 2.2, small_cfg3)


def test_exterior_densities_reproduce_the_boundary_data(small_cfg3):
    dt = 0.01
    t = dt * np.arange(221)
    modes = mode_indices(3, 2)
    F = np.outer(np.linspace(1.0, 2.0, len(modes)), t**4 * np.exp(-t))
    coeffs = ModalCoefficients(3, 2, dt, modes, F)
    ext = solve_exterior(coeffs, 2.2, small_cfg3)
    residuals = boundary_residuals(ext, coeffs)
    assert set(residuals) == {"0", "1", "2"}
    assert max(residuals.values()) < 1e-3
    # v(1, t) is the data; the wave has not reached r = 2.5 by t = 1
    v, v_t = exterior_samples(ext, [1.0, 2.5], 1.0)
    assert np.allclose(v[:, 0], F[:, 100], rtol=1e-3)
    assert not np.any(v[:, 1]) and not np.any(v_t[:, 1])


def test_zero_observation_gives_zero_field(small_cfg3):
    field = reconstruct_exterior(zero_observation(small_cfg3), small_cfg3)
    assert field.a.shape == target_ball(small_cfg3).shape
    assert not np.any(field.a) and not np.any(field.b)


def test_time_reversal_is_local(small_cfg3):
    coeffs = ModalCoefficients.zeros(3, 2, 0.01, 151)
    ext = solve_exterior(coeffs, 1.5, small_cfg3, full_ball=False)
    a, b = time_reverse_points(ext, np.array([[0.0, 0.0, 0.4]]), small_cfg3)
    assert a[0] == 0.0 and b[0] == 0.0
    with pytest.raises(LocalityError):
        time_reverse_points(ext, np.array([[0.0, 0.7, 0.0]]), small_cfg3)
    with pytest.raises(LocalityError):
        time_reverse(ext, 1.5, target_ball(small_cfg3), small_cfg3)


def test_exterior_recovers_a_centered_bump(small_cfg3, centered_bump):
    a_radial, _ = centered_bump
    diagnostics = {}
    field = reconstruct_exterior(radial_observation(small_cfg3, a_radial), small_cfg3, diagnostics)
    exact = exact_on_ball(field.ball, a_radial)
    weights = field.ball.weights()
    err = np.sqrt(np.sum(weights * (field.a - exact) ** 2) / np.sum(weights * exact**2))
    assert err < 0.1
    assert np.abs(field.b).max() < 0.1 * np.abs(exact).max()
    assert "mode_residuals" in diagnostics and "exterior_solve" in diagnostics["timings"]


def test_interior_volterra_recovers_a_centered_bump(small_cfg3, centered_bump):
    a_radial, _ = centered_bump
    field = reconstruct_interior_volterra(radial_observation(small_cfg3, a_radial), small_cfg3)
    exact = exact_on_ball(field.ball, a_radial)
    assert np.abs(field.a - exact).max() < 0.1 * np.abs(exact).max()
    assert np.abs(field.b).max() < 0.1 * np.abs(exact).max()


def test_interior_volterra_needs_two_units_of_time(small_cfg3):
    grid = grid_for(3, small_cfg3.recon.nmax)
    obs = BoundaryObservation(grid, 0.01, np.zeros((grid.n_nodes, 151)))
    with pytest.raises(DomainError):
        reconstruct_interior_volterra(obs, small_cfg3)


def test_pole_data_requires_conjugate_pairs():
    with pytest.raises(ValueError):
        PoleData(np.array([-1.0 + 2.0j]), np.array([1.0]))
    with pytest.raises(ValueError):
        PoleData(np.array([-1.0]), np.array([1.0 + 1.0j]))
    pair = PoleData(np.array([-1.0 + 2.0j, -1.0 - 2.0j]), np.array([0.5 - 1.0j, 0.5 + 1.0j]))
    t = np.linspace(0.0, 2.0, 5)
    assert np.allclose(pair.sample(t), np.exp(-t) * (np.cos(2 * t) + 2 * np.sin(2 * t)))


def test_pole_data_transform_of_exponentials():
    data = PoleData.exponentials([1.0, 2.0], [1.0, -1.0])
    s = np.array([0.5, 3.0 + 1.0j])
    assert np.allclose(data.transform(s), 1 / (s + 1) - 1 / (s + 2))


def test_residue_series_rejects_pole_on_a_bessel_zero():
    data = PoleData(np.array([np.pi * 1j, -np.pi * 1j]), np.array([1.0, 1.0]))
    with pytest.raises(ValidityError):
        evaluate_residue_series(0, data, ResidueSeriesParams(8), np.array([0.5]))


def test_residue_series_zeros_for_radial_order():
    data = PoleData.exponentials([1.0], [1.0])
    result = evaluate_residue_series(0, data, ResidueSeriesParams(6), np.array([0.25, 0.5]))
    assert np.allclose(result.zeros, np.pi * np.arange(1, 7), atol=1e-10)
    assert result.phi.shape == (2,) and result.tail >= 0.0


def test_residue_and_volterra_paths_agree(small_cfg3):
    data = PoleData.exponentials([1.0, 2.0, 3.0], [1.0, -2.0, 1.0])
    grid = grid_for(3, small_cfg3.recon.nmax)
    F = data.observation_series(small_cfg3.grid.dt)
    obs = BoundaryObservation(grid, small_cfg3.grid.dt, np.outer(np.ones(grid.n_nodes), F / np.sqrt(4 * np.pi)))
    by_volterra = reconstruct_interior_volterra(obs, small_cfg3)
    by_residue = reconstruct_interior_residue({(0, 0): data}, ResidueSeriesParams(64, 1.0), small_cfg3)
    scale = np.abs(by_residue.a).max()
    assert scale > 0
    assert np.abs(by_volterra.a - by_residue.a).max() < 2e-2 * scale
    assert np.abs(by_volterra.b - by_residue.b).max() < 2e-2 * np.abs(by_residue.b).max()


def test_residue_reconstruction_rejects_modes_beyond_nmax(small_cfg3):
    data = PoleData.exponentials([1.0], [1.0])
    with pytest.raises(ValueError):
        reconstruct_interior_residue({(9, 0): data}, ResidueSeriesParams(4), small_cfg3)
