#!/usr/bin/env python3
"""
Cross-checks: the Finch-Rakesh backprojection for b when a = 0, and reconstruction
from half-length (T = 1) observations when one of a, b vanishes.

With a = 0 the solution is odd in t, with b = 0 it is even; reflecting the data about
t = 0 and shifting by one gives boundary values on [0, 2] of V(x, t) = U(x, t - 1).
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.integrate import cumulative_trapezoid

from photoacoustic.calculations.forward import CauchyField, disc_kernel, synthesize_observation
from photoacoustic.calculations.harmonics import (
    BoundaryObservation,
    analyze,
    differentiate_series,
    group_by_order,
    mode_indices,
    synthesize_ball,
)
from photoacoustic.calculations.recon3d import target_ball
from photoacoustic.calculations.specfun import eval_legendre
from photoacoustic.calculations.volterra import TimeGrid, solve_symmetric_delay
from photoacoustic.errors import ConsistencyWarning, DataInsufficiencyError
from photoacoustic.models import ReconConfig

logger = logging.getLogger(__name__)

Which = Literal["a_zero", "b_zero"]


@dataclass
class ReflectedObservation:
    """Reflected and shifted boundary data on [0, 2]; parity -1 (a = 0) or +1 (b = 0)"""

    observation: BoundaryObservation
    parity: int
    steps: int

    @property
    def samples(self) -> np.ndarray:
        return self.observation.samples

    def symmetry_residual(self) -> float:
        """max |V(1 + s) - parity V(1 - s)| over mirrored samples"""
        N = self.steps
        upper = self.samples[:, N + 1:]
        lower = self.samples[:, :N][:, ::-1]
        return float(np.max(np.abs(upper - self.parity * lower))) if N else 0.0


def reflect_and_shift(obs: BoundaryObservation, which: Which = "a_zero") -> ReflectedObservation:
    """V(t) = F(t - 1) for t >= 1 and parity * F(1 - t) for t < 1; V(1) = 0 in the odd case"""
    N = TimeGrid(obs.dt, obs.n_times).steps_in(1.0)
    if obs.n_times < N + 1:
        raise DataInsufficiencyError(f"half-time data must cover [0, 1], observation ends at {obs.T}")
    parity = -1 if which == "a_zero" else 1
    F = obs.samples[:, : N + 1]
    lower = parity * F[:, 1:][:, ::-1]
    middle = np.zeros((F.shape[0], 1)) if parity < 0 else F[:, :1]
    samples = np.concatenate([lower, middle, F[:, 1:]], axis=1)
    shifted = BoundaryObservation(obs.grid, obs.dt, samples, provenance=f"reflected ({which})")
    return ReflectedObservation(shifted, parity, N)


class FRBackprojector:
    """b(x) = -(1/2pi) int_{S_1} d2/dt2 (t F(t, x0)) at t = |x - x0|, divided by |x - x0|"""

    def __init__(self, obs: BoundaryObservation):
        if obs.dimension != 3:
            raise ValueError("the backprojection formula is 3D")
        self.obs = obs
        self.nodes = obs.grid.points()
        self.weights = obs.grid.weights
        second = differentiate_series(obs.times * obs.samples, 2, obs.dt)
        self.spline = CubicSpline(obs.times, second.T, axis=0)

    def __call__(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        tau = np.linalg.norm(self.nodes - x[None, :], axis=1)
        if tau.max() > self.obs.T + 1e-12:
            raise DataInsufficiencyError(
                f"backprojection at |x| = {np.linalg.norm(x):.4g} needs data up to t = {tau.max():.4g}, "
                f"observation ends at {self.obs.T:.4g}"
            )
        values = self.node_values(tau)
        return float(-np.dot(self.weights, values / tau) / (2.0 * np.pi))

    def node_values(self, tau: np.ndarray) -> np.ndarray:
        """Spline of node i evaluated at tau[i] only, from the piecewise cubic coefficients"""
        knots, coef = self.spline.x, self.spline.c  # coef: (4, n_intervals, n_nodes)
        cell = np.clip(np.searchsorted(knots, tau, side="right") - 1, 0, len(knots) - 2)
        dx = tau - knots[cell]
        c = coef[:, cell, np.arange(len(tau))]
        return ((c[0] * dx + c[1]) * dx + c[2]) * dx + c[3]

    def at_points(self, points: np.ndarray) -> np.ndarray:
        return np.array([self(p) for p in np.atleast_2d(points)])


def fr_backprojection(obs: BoundaryObservation, x: Sequence[float]) -> float:
    return FRBackprojector(obs)(x)


def _halftime_3d(reflected: ReflectedObservation, which: Which, cfg: ReconConfig, radii: np.ndarray) -> np.ndarray:
    """
    U_n(r, t) = int_{-1}^{1} k(r alpha + t) P_n(alpha) dalpha with k(-s) = p k(s) on [-1, 1].
    Profiles of b (a = 0: (2 k(r) - int k(r alpha) P_n'(alpha) dalpha)/r) or of a (b = 0: U_n(r, 0)).
    """
    obs = reflected.observation
    N = reflected.steps
    coeffs = analyze(obs, cfg.recon.nmax)
    g = differentiate_series(coeffs.data, 1, obs.dt)[:, N:]  # F'(t) on [0, 1]
    grid = TimeGrid(obs.dt, N + 1)
    x, w = np.polynomial.legendre.leggauss(cfg.quad.alpha)
    s_half = grid.nodes
    s_full = np.concatenate([-s_half[:0:-1], s_half])
    profiles = np.zeros((len(coeffs.modes), len(radii)))
    for n, rows in group_by_order(coeffs.modes).items():
        parity = (-1) ** (n + 1) if which == "a_zero" else (-1) ** n
        kappa = np.atleast_2d(solve_symmetric_delay(n, g[rows], grid, parity))
        full = np.concatenate([parity * kappa[:, :0:-1], kappa], axis=1)
        spline = CubicSpline(s_full, full.T, axis=0)
        values = spline(radii[:, None] * x[None, :])  # (n_r, K, rows)
        if which == "a_zero":
            inner = np.einsum("rkm,k->mr", values, w * eval_legendre(n, x, deriv=1))
            profiles[rows] = (2.0 * spline(radii).T - inner) / radii[None, :]
        else:
            profiles[rows] = np.einsum("rkm,k->mr", values, w * eval_legendre(n, x))
    return profiles


def _halftime_2d(reflected: ReflectedObservation, which: Which, cfg: ReconConfig, radii: np.ndarray) -> np.ndarray:
    """
    Depth march: for t <= 1 the disc D(t, x0), |x0| = 1, meets the support only in
    1 - t < rho < 1, so F_n(t) = (1/2pi) int_{1-t}^{1} rho g_n(rho) I_n(rho; t) drho with g = b
    (a = 0) or g = a and F replaced by its time integral (b = 0). Midpoint product integration.
    """
    obs = reflected.observation
    N = reflected.steps
    dt = obs.dt
    coeffs = analyze(obs, cfg.recon.nmax)
    data = coeffs.data[:, N:]
    if which == "b_zero":
        data = cumulative_trapezoid(data, dx=dt, axis=1, initial=0.0)
    nmax = cfg.recon.nmax
    xg, wg = np.polynomial.legendre.leggauss(8)
    # W[n, i, k]: weight of cell k (rho in [1 - k dt, 1 - (k-1) dt]) at time t_i = i dt
    W = np.zeros((nmax + 1, N + 1, N + 1))
    for i in range(1, N + 1):
        k = np.arange(1, i + 1)
        lo = 1.0 - k * dt
        rho = lo[:, None] + 0.5 * dt * (xg[None, :] + 1.0)
        kern = disc_kernel(nmax, rho, 1.0, i * dt, cfg.quad.psi)  # (nmax+1, i, 8)
        W[:, i, 1: i + 1] = np.einsum("nkj,kj,j->nk", kern, rho, 0.5 * dt * wg) / (2.0 * np.pi)
    mids = 1.0 - (np.arange(1, N + 1) - 0.5) * dt
    profiles = np.zeros((len(coeffs.modes), len(radii)))
    for n, rows in group_by_order(coeffs.modes).items():
        A = W[n, 1:, 1:]
        cells = np.zeros((len(rows), N))
        for i in range(N):
            known = cells[:, :i] @ A[i, :i]
            cells[:, i] = (data[rows, i + 1] - known) / A[i, i]
        # mids decrease with k; np.interp wants increasing abscissae
        profiles[rows] = np.array([np.interp(radii, mids[::-1], c[::-1]) for c in cells])
    return profiles


def reconstruct_halftime(obs: BoundaryObservation, which: Which, cfg: ReconConfig, check: bool = True) -> CauchyField:
    """
    Recover the nonzero datum from data on [0, 1]: b for which='a_zero', a for which='b_zero'.
    The other component of the returned field is zero.
    """
    if which not in ("a_zero", "b_zero"):
        raise ValueError(f"which must be 'a_zero' or 'b_zero', got {which!r}")
    reflected = reflect_and_shift(obs, which)
    ball = target_ball(cfg)
    if obs.dimension == 3:
        profiles = _halftime_3d(reflected, which, cfg, ball.radii)
    else:
        profiles = _halftime_2d(reflected, which, cfg, ball.radii)
    modes = mode_indices(obs.dimension, cfg.recon.nmax)
    values = synthesize_ball(modes, profiles, ball)
    zeros = np.zeros(ball.shape)
    field = CauchyField(ball, zeros, values) if which == "a_zero" else CauchyField(ball, values, zeros)
    logger.info(f"half-time reconstruction ({which}, {obs.dimension}D) from {reflected.steps + 1} samples")
    if check:
        _check_consistency(field, obs, which, cfg)
    return field


def _check_consistency(field: CauchyField, obs: BoundaryObservation, which: Which, cfg: ReconConfig):
    """Re-synthesize the boundary data of the recovered field and compare with the observation"""
    resynth = synthesize_observation(
        field, obs.grid, obs.T, obs.dt, nmax=cfg.recon.nmax, h_t=cfg.h_t,
        mean_order=cfg.quad.mean, psi_order=cfg.quad.psi, workers=cfg.workers,
    )
    scale = np.linalg.norm(obs.samples)
    if scale == 0.0:
        return
    residual = float(np.linalg.norm(resynth.samples - obs.samples) / scale)
    logger.debug(f"half-time consistency residual {residual:.3e}")
    if residual > cfg.tol.consistency:
        warnings.warn(
            f"half-time reconstruction assuming {which} re-synthesizes the data with relative residual "
            f"{residual:.3e} > {cfg.tol.consistency:g}; the vanishing datum may not be {which[0]}",
            ConsistencyWarning,
        )
