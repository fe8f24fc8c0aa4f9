#!/usr/bin/env python3
"""Error metrics between a field and a reference on the reference's ball grid."""

from typing import Dict

import numpy as np

from photoacoustic.calculations.forward import CauchyField, FieldEvaluator
from photoacoustic.calculations.harmonics import BallGrid
from photoacoustic.errors import UsageError


def _same_grid(left: BallGrid, right: BallGrid) -> bool:
    return (
        left.shape == right.shape
        and left.angular.describe() == right.angular.describe()
        and np.array_equal(left.radii, right.radii)
    )


def _band_of(ball: BallGrid) -> int:
    """Largest order the grid resolves"""
    nmax = (ball.angular.n_phi - 2) // 2
    if ball.dimension == 3:
        nmax = min(nmax, ball.angular.n_theta - 1)
    return max(nmax, 0)


def on_grid(field: CauchyField, ball: BallGrid) -> CauchyField:
    """The field on `ball`, interpolated (harmonic in angle, linear in radius) when grids differ"""
    if field.dimension != ball.dimension:
        raise UsageError(f"cannot compare a {field.dimension}D field with a {ball.dimension}D field")
    if _same_grid(field.ball, ball):
        return field
    return FieldEvaluator.from_field(field, _band_of(field.ball)).sample_on(ball)


def relative_l2(values: np.ndarray, reference: np.ndarray, weights: np.ndarray) -> float:
    """Quadrature-weighted ||values - reference|| / ||reference||; absolute when the reference vanishes"""
    diff = np.sqrt(np.sum(weights * (values - reference) ** 2))
    scale = np.sqrt(np.sum(weights * reference**2))
    return float(diff / scale) if scale > 0 else float(diff)


def relative_linf(values: np.ndarray, reference: np.ndarray) -> float:
    diff = np.max(np.abs(values - reference))
    scale = np.max(np.abs(reference))
    return float(diff / scale) if scale > 0 else float(diff)


def compare(field: CauchyField, reference: CauchyField) -> Dict[str, float]:
    """Flat record a_rel_l2, a_rel_linf, b_rel_l2, b_rel_linf"""
    field = on_grid(field, reference.ball)
    weights = reference.ball.weights()
    metrics = {}
    for name in ("a", "b"):
        values, ref = field.component(name), reference.component(name)
        metrics[f"{name}_rel_l2"] = relative_l2(values, ref, weights)
        metrics[f"{name}_rel_linf"] = relative_linf(values, ref)
    return metrics
