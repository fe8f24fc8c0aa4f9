import numpy as np
import pytest

from photoacoustic.calculations.harmonics import ball_grid, grid_for
from photoacoustic.cli.config import load_config
from photoacoustic.cli.phantoms import polynomial_bump


def make_config(**sections):
    """make_config(recon={"nmax": 4}, grid={"dt": 0.01}) -> ReconConfig"""
    overrides = [f"{section}.{key} = {value}" for section, values in sections.items() for key, value in values.items()]
    return load_config(None, overrides)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg3():
    return make_config(
        grid={"dt": 0.01, "T": 2.2, "n_r": 12},
        recon={"nmax": 4},
        quad={"mean": 48, "shell": 48, "alpha": 32},
        run={"workers": 1, "progress": "false"},
    )


@pytest.fixture
def small_cfg2():
    return make_config(
        grid={"dimension": 2, "dt": 0.02, "T": 6.0, "n_r": 10},
        recon={"nmax": 4},
        quad={"disc": 24, "psi": 24, "mean": 48, "alpha": 32},
        run={"workers": 1, "progress": "false"},
    )


@pytest.fixture
def centered_bump():
    """Radial bump (1 - r^2)^3 and its pointwise version"""
    return (lambda r: (1.0 - r * r) ** 3 if r < 1.0 else 0.0), polynomial_bump([0.0, 0.0, 0.0], 1.0, 3)


@pytest.fixture
def ball3():
    return ball_grid(grid_for(3, 4), 8)
