#!/usr/bin/env python3
"""Built-in test phantoms: pointwise functions of x in the unit ball, sampled onto ball grids."""

import logging
from typing import Callable, Dict

import numpy as np

from photoacoustic.calculations.forward import CauchyField, FieldEvaluator
from photoacoustic.calculations.harmonics import BallGrid, ball_grid, grid_for, harmonics_at_points, mode_indices
from photoacoustic.errors import ConfigError
from photoacoustic.models import PhantomSettings, ReconConfig

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


def _check_inside(center: np.ndarray, radius: float, name: str):
    reach = np.linalg.norm(center) + radius
    if reach > 1.0 + 1e-12:
        raise ConfigError(f"phantom {name} reaches |x| = {reach:.4g}; the support must stay in the unit ball")


def polynomial_bump(center, radius: float, power: int) -> PointFunction:
    """(1 - (|x - c|/R)^2)^p inside |x - c| < R"""
    center = np.asarray(center, dtype=float)

    def bump(x: np.ndarray) -> np.ndarray:
        q = np.sum((x - center) ** 2, axis=-1) / radius**2
        return np.where(q < 1.0, np.clip(1.0 - q, 0.0, None) ** power, 0.0)

    return bump


def c2_bump(center, radius: float, width: float) -> PointFunction:
    """Gaussian of the given width cut off by (1 - (|x - c|/R)^2)^3, so C^2 across |x - c| = R"""
    center = np.asarray(center, dtype=float)
    cutoff = polynomial_bump(center, radius, 3)

    def bump(x: np.ndarray) -> np.ndarray:
        d2 = np.sum((x - center) ** 2, axis=-1)
        return np.exp(-0.5 * d2 / width**2) * cutoff(x)

    return bump


def _zero(settings: PhantomSettings, dimension: int) -> PointFunction:
    return lambda x: np.zeros(np.shape(x)[:-1])


def _bump(settings: PhantomSettings, dimension: int) -> PointFunction:
    _check_inside(np.asarray(settings.center), settings.radius, "bump")
    return polynomial_bump(settings.center, settings.radius, settings.power)


def _c2bump(settings: PhantomSettings, dimension: int) -> PointFunction:
    _check_inside(np.asarray(settings.center), settings.radius, "c2bump")
    return c2_bump(settings.center, settings.radius, settings.width)


def _multibump(settings: PhantomSettings, dimension: int) -> PointFunction:
    rng = np.random.default_rng(settings.seed)
    parts = []
    for _ in range(settings.n_bumps):
        radius = rng.uniform(0.15, 0.35)
        direction = rng.normal(size=dimension)
        direction /= np.linalg.norm(direction)
        center = direction * rng.uniform(0.0, 0.95 - radius)
        parts.append((rng.uniform(0.5, 1.0), polynomial_bump(center, radius, settings.power)))

    def bumps(x: np.ndarray) -> np.ndarray:
        return sum(weight * f(x) for weight, f in parts)

    return bumps


def _harmonic(settings: PhantomSettings, dimension: int) -> PointFunction:
    """sum over modes n <= band of c_nm r^n (1 - r^2)^3 Y_nm(x/|x|), seeded Gaussian c_nm"""
    rng = np.random.default_rng(settings.seed)
    modes = mode_indices(dimension, settings.band)
    weights = rng.normal(size=len(modes)) / np.sqrt(len(modes))
    orders = np.array([n for n, _ in modes])

    def field(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, dimension)
        r = np.linalg.norm(flat, axis=1)
        radial = np.where(r < 1.0, np.clip(1.0 - r * r, 0.0, None) ** 3, 0.0)
        angular = harmonics_at_points(dimension, modes, flat)
        values = (angular * r[:, None] ** orders[None, :]) @ weights * radial
        return values.reshape(x.shape[:-1])

    return field


PHANTOMS: Dict[str, Callable[[PhantomSettings, int], PointFunction]] = {
    "zero": _zero,
    "bump": _bump,
    "c2bump": _c2bump,
    "multibump": _multibump,
    "harmonic": _harmonic,
}


def phantom_function(settings: PhantomSettings, dimension: int) -> PointFunction:
    builder = PHANTOMS.get(settings.name)
    if builder is None:
        raise ConfigError(f"unknown phantom {settings.name!r}; choose one of {', '.join(sorted(PHANTOMS))}")
    if len(settings.center) != dimension:
        raise ConfigError(f"phantom.center needs {dimension} coordinates")
    return builder(settings, dimension)


def sample_phantom(settings: PhantomSettings, ball: BallGrid) -> CauchyField:
    """Phantom in the configured component, the other component zero"""
    values = phantom_function(settings, ball.dimension)(ball.points())
    zeros = np.zeros(ball.shape)
    logger.debug(f"phantom {settings.name} ({settings.component}) max {np.abs(values).max():.3e}")
    if settings.component == "a":
        return CauchyField(ball, values, zeros)
    return CauchyField(ball, zeros, values)


def phantom_evaluator(cfg: ReconConfig) -> FieldEvaluator:
    """Band-limited (nmax) evaluator of the configured phantom"""
    dim, nmax = cfg.grid.dimension, cfg.recon.nmax
    # analyzed on a finer grid than the band so the projection to nmax is clean
    order = cfg.sphere_order
    fine = ball_grid(grid_for(dim, nmax, order, 2 * order), cfg.quad.mean)
    return FieldEvaluator.from_field(sample_phantom(cfg.phantom, fine), nmax)
