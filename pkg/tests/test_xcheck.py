import warnings

import numpy as np
import pytest

from photoacoustic.calculations.forward import radial_oracle
from photoacoustic.calculations.harmonics import BoundaryObservation, grid_for, sphere_grid
from photoacoustic.calculations.xcheck import (
    FRBackprojector,
    fr_backprojection,
    reconstruct_halftime,
    reflect_and_shift,
)
from photoacoustic.errors import ConsistencyWarning, DataInsufficiencyError, GridAlignmentError


def bump(r):
    return (1.0 - r * r) ** 3 if r < 1.0 else 0.0


def zero(r):
    return 0.0


def radial_data(grid, dt, T, a_radial=zero, b_radial=zero):
    times = dt * np.arange(int(round(T / dt)) + 1)
    F = np.array([radial_oracle(a_radial, b_radial, 1.0, t)[0] for t in times])
    return BoundaryObservation(grid, dt, np.outer(np.ones(grid.n_nodes), F))


def exact_on_ball(ball, radial):
    return np.vectorize(radial)(np.broadcast_to(ball.radii, ball.shape))


@pytest.mark.parametrize("which, parity", [("a_zero", -1), ("b_zero", 1)])
def test_reflection_has_the_datum_parity(which, parity):
    grid = grid_for(2, 2)
    t = 0.05 * np.arange(31)
    obs = BoundaryObservation(grid, 0.05, np.outer(np.ones(grid.n_nodes), np.sin(t) ** 2 + t))
    reflected = reflect_and_shift(obs, which)
    assert reflected.parity == parity and reflected.steps == 20
    assert reflected.samples.shape == (grid.n_nodes, 41)
    assert reflected.symmetry_residual() == 0.0
    # V(t) = F(t - 1) on the upper half
    assert np.array_equal(reflected.samples[:, 20:], obs.samples[:, :21])


def test_reflection_of_odd_data_vanishes_at_the_shift():
    grid = grid_for(2, 1)
    obs = BoundaryObservation(grid, 0.1, np.ones((grid.n_nodes, 11)))
    assert not np.any(reflect_and_shift(obs, "a_zero").samples[:, 10])


def test_reflection_needs_a_step_dividing_one():
    grid = grid_for(2, 1)
    with pytest.raises(GridAlignmentError):
        reflect_and_shift(BoundaryObservation(grid, 0.3, np.zeros((grid.n_nodes, 5))))
    with pytest.raises(DataInsufficiencyError):
        reflect_and_shift(BoundaryObservation(grid, 0.1, np.zeros((grid.n_nodes, 6))))


def test_backprojection_recovers_a_radial_rate():
    obs = radial_data(sphere_grid(24, 48), 0.01, 1.5, b_radial=bump)
    back = FRBackprojector(obs)
    assert back([0.0, 0.0, 0.0]) == pytest.approx(1.0, rel=2e-2)
    for x in ([0.2, 0.0, 0.0], [0.0, -0.3, 0.3]):
        assert back(x) == pytest.approx(bump(np.linalg.norm(x)), rel=5e-2)


def test_backprojector_reads_each_node_at_its_own_delay(rng):
    obs = radial_data(sphere_grid(6, 12), 0.01, 1.5, b_radial=bump)
    back = FRBackprojector(obs)
    tau = rng.uniform(0.0, 1.5, obs.grid.n_nodes)
    tau[:2] = [0.0, 1.5]
    assert np.allclose(back.node_values(tau), np.diagonal(back.spline(tau)), rtol=1e-12, atol=1e-12)


def test_backprojection_needs_data_past_the_far_side():
    obs = radial_data(sphere_grid(8, 16), 0.01, 1.2, b_radial=bump)
    assert np.isfinite(fr_backprojection(obs, [0.1, 0.0, 0.0]))
    with pytest.raises(DataInsufficiencyError):
        fr_backprojection(obs, [0.5, 0.0, 0.0])


@pytest.mark.parametrize("which, component", [("a_zero", "b"), ("b_zero", "a")])
def test_halftime_recovers_the_nonzero_datum(small_cfg3, which, component):
    grid = grid_for(3, small_cfg3.recon.nmax)
    data = {"a_radial": bump} if which == "b_zero" else {"b_radial": bump}
    obs = radial_data(grid, small_cfg3.grid.dt, 1.0, **data)
    field = reconstruct_halftime(obs, which, small_cfg3, check=False)
    exact = exact_on_ball(field.ball, bump)
    values = field.component(component)
    assert np.abs(values - exact).max() < 0.1
    other = field.component("a" if component == "b" else "b")
    assert not np.any(other)


def test_halftime_flags_the_wrong_vanishing_datum(small_cfg3):
    grid = grid_for(3, small_cfg3.recon.nmax)
    obs = radial_data(grid, small_cfg3.grid.dt, 2.2, b_radial=bump)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reconstruct_halftime(obs, "a_zero", small_cfg3)
    assert not any(issubclass(w.category, ConsistencyWarning) for w in caught)
    with pytest.warns(ConsistencyWarning):
        reconstruct_halftime(obs, "b_zero", small_cfg3)


def test_halftime_rejects_unknown_choice(small_cfg3):
    grid = grid_for(3, small_cfg3.recon.nmax)
    with pytest.raises(ValueError):
        reconstruct_halftime(BoundaryObservation(grid, 0.01, np.zeros((grid.n_nodes, 101))), "both", small_cfg3)


def test_halftime_2d_of_zero_data(small_cfg2):
    grid = grid_for(2, small_cfg2.recon.nmax)
    obs = BoundaryObservation(grid, small_cfg2.grid.dt, np.zeros((grid.n_nodes, 51)))
    field = reconstruct_halftime(obs, "a_zero", small_cfg2)
    assert field.dimension == 2 and not np.any(field.b)
