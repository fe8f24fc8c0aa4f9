#!/usr/bin/env python3
"""
2D reconstruction: exterior and interior solvers on Chebyshev kernels and the
recursive scheme a = CF + Ka for the initial pressure when b = 0.

There is no trailing edge in 2D, so one exterior solve plus backward evaluation
leaves the remainder Ka from the part of the wave still inside B_1 at t = T.
The iteration subtracts re-synthesized data and repeats; the remainder after
n steps is K^n a.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from photoacoustic.calculations.forward import CauchyField, modal_disc_mean, synthesize_observation
from photoacoustic.calculations.harmonics import (
    BallGrid,
    BoundaryObservation,
    ModalCoefficients,
    analyze,
    differentiate_series,
    group_by_order,
    synthesize_ball,
)
from photoacoustic.calculations.parallel import map_ordered, progress_enabled
from photoacoustic.calculations.recon3d import ExteriorField, shell_radii, target_ball
from photoacoustic.calculations.specfun import eval_psi2d
from photoacoustic.calculations.volterra import (
    TimeGrid,
    apply_resolvent2d,
    build_resolvent2d,
    gregory_convolution,
    solve_abel_volterra,
)
from photoacoustic.errors import DivergenceError, DomainError
from photoacoustic.models import ReconConfig

logger = logging.getLogger(__name__)


def _exterior_values(n: int, omega: np.ndarray, dt: float, radii: np.ndarray, t: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    v = r int_0^{theta_max} w(t + 1 - r cosh th) Psi_n(cosh th) sinh th dth and
    v_t = int_0^{theta_max} w(t + 1 - r cosh th) nbar cosh(n th) dth, cosh theta_max = (t + 1)/r.
    """
    omega = np.atleast_2d(omega)
    tau = dt * np.arange(omega.shape[1])
    x, w = np.polynomial.legendre.leggauss(order)
    nbar = max(n, 1)
    v = np.zeros((omega.shape[0], len(radii)))
    v_t = np.zeros_like(v)
    for i, r in enumerate(radii):
        if t + 1.0 - r <= 0.0:
            continue
        top = np.arccosh((t + 1.0) / r)
        theta = 0.5 * top * (x + 1.0)
        weight = 0.5 * top * w
        arg = t + 1.0 - r * np.cosh(theta)
        values = np.array([np.interp(arg, tau, row) for row in omega])
        psi = theta if n == 0 else np.sinh(n * theta)
        v[:, i] = r * values @ (weight * psi * np.sinh(theta))
        v_t[:, i] = values @ (weight * nbar * np.cosh(n * theta))
    return v, v_t


def _density_2d(n: int, g: np.ndarray, grid: TimeGrid, cfg: ReconConfig, scale: float) -> np.ndarray:
    if cfg.recon.volterra_path == "resolvent":
        kernel = build_resolvent2d(
            n, grid, cfg.quad.bromwich_sigma, cfg.quad.bromwich_height, cfg.quad.bromwich_nodes
        )
        return np.atleast_2d(apply_resolvent2d(kernel, g, grid))
    return np.atleast_2d(solve_abel_volterra(n, g, grid, window="from_zero", scale=scale))


def solve_exterior_2d(coeffs: ModalCoefficients, T: float, cfg: ReconConfig) -> ExteriorField:
    """Densities from int_0^t w(tau) nbar T_n(t+1-tau)/sqrt((t+1-tau)^2-1) dtau = F', shell samples at T"""
    if coeffs.dimension != 2:
        raise ValueError("solve_exterior_2d needs 2D coefficients")
    grid = TimeGrid.spanning(T, coeffs.dt)
    if grid.count > coeffs.n_times:
        raise DomainError(f"method requires observations up to T = {T}, data ends at {(coeffs.n_times - 1) * coeffs.dt}")
    g = differentiate_series(coeffs.data[:, : grid.count], 1, coeffs.dt)
    scale = float(np.abs(g).max()) if g.size else 0.0
    groups = group_by_order(coeffs.modes)
    radii = shell_radii(T, cfg.quad.shell)
    order = 2 * cfg.quad.shell

    def work(n: int):
        omega = _density_2d(n, g[groups[n]], grid, cfg, scale)
        return groups[n], omega, _exterior_values(n, omega, grid.dt, radii, grid.end, order)

    densities = np.zeros((len(coeffs.modes), grid.count))
    V = np.zeros((len(coeffs.modes), len(radii)))
    V_t = np.zeros_like(V)
    for rows, omega, (v, vt) in map_ordered(work, sorted(groups), cfg.workers, progress_enabled(cfg), desc="2D exterior"):
        densities[rows] = omega
        V[rows] = v
        V_t[rows] = vt
    logger.info(f"2D exterior solve: {len(groups)} orders, {grid.count} time steps")
    return ExteriorField(2, list(coeffs.modes), grid.dt, grid.end, densities, radii, V, V_t)


def exterior_samples_2d(ext: ExteriorField, radii: Sequence[float], t: float, order: int = 192) -> Tuple[np.ndarray, np.ndarray]:
    """(v, v_t) per mode at radii >= 1 and time t <= T"""
    radii = np.asarray(radii, dtype=float)
    if t > ext.T + 1e-12:
        raise DomainError(f"exterior field is known up to t = {ext.T}, asked for {t}")
    v = np.zeros((len(ext.modes), len(radii)))
    v_t = np.zeros_like(v)
    for n, rows in group_by_order(ext.modes).items():
        v[rows], v_t[rows] = _exterior_values(n, ext.densities[rows], ext.dt, radii, t, order)
    return v, v_t


def boundary_residuals_2d(ext: ExteriorField, coeffs: ModalCoefficients) -> dict:
    """Relative L2 mismatch per order between int w Psi_n(t + 1 - tau) dtau and F"""
    count = ext.densities.shape[1]
    lags = ext.dt * np.arange(count)
    residuals = {}
    for n, rows in group_by_order(ext.modes).items():
        kernel = eval_psi2d(n, 1.0 + lags)
        rebuilt = np.array([gregory_convolution(kernel, row, ext.dt) for row in ext.densities[rows]])
        target = coeffs.data[rows, :count]
        scale = np.linalg.norm(target)
        residuals[str(n)] = float(np.linalg.norm(rebuilt - target) / scale) if scale > 0 else float(np.linalg.norm(rebuilt))
    return residuals


def solve_interior_2d(coeffs: ModalCoefficients, cfg: ReconConfig, target: Optional[BallGrid] = None) -> CauchyField:
    """
    Interior problem with zero Cauchy data at t = 0 and boundary data on [0, 2]; returns
    (u, u_t) at t = 2 on the ball grid.

    u_n(r, t) = nbar int eta(t - 1 + r alpha) T_n(alpha)/sqrt(1 - alpha^2) dalpha with eta' = w,
    w from the sliding-window Abel equation with right-hand side F'. Gauss-Chebyshev in alpha.
    u_t is the same integral over the derivative of a cubic spline through eta.
    """
    ball = target if target is not None else target_ball(cfg)
    steps = TimeGrid(coeffs.dt, coeffs.n_times).steps_in(2.0)
    grid = TimeGrid(coeffs.dt, steps + 1)
    if coeffs.n_times < grid.count:
        raise DomainError(f"method requires data on [0, 2], data ends at {(coeffs.n_times - 1) * coeffs.dt}")
    g = differentiate_series(coeffs.data[:, : grid.count], 1, coeffs.dt)
    scale = float(np.abs(g).max()) if g.size else 0.0
    K = cfg.quad.alpha
    alpha = np.cos((2.0 * np.arange(1, K + 1) - 1.0) * np.pi / (2.0 * K))
    tau = grid.nodes
    u = np.zeros((len(coeffs.modes), len(ball.radii)))
    u_t = np.zeros_like(u)
    for n, rows in group_by_order(coeffs.modes).items():
        omega = np.atleast_2d(solve_abel_volterra(n, g[rows], grid, window="sliding_width_2", scale=scale))
        eta = CubicSpline(tau, cumulative_trapezoid(omega, dx=grid.dt, axis=1, initial=0.0), axis=1)
        weights = max(n, 1) * (np.pi / K) * np.cos(n * np.arccos(alpha))
        arg = 1.0 + ball.radii[:, None] * alpha[None, :]
        # (rows, n_r, K) against the alpha weights
        u[rows] = eta(arg) @ weights
        u_t[rows] = eta(arg, 1) @ weights
    return CauchyField(ball, synthesize_ball(coeffs.modes, u, ball), synthesize_ball(coeffs.modes, u_t, ball))


def beta(t: float, c: np.ndarray) -> np.ndarray:
    return 1.0 / np.sqrt(t * t - np.asarray(c) ** 2)


def beta_t(t: float, c: np.ndarray) -> np.ndarray:
    return -t / (t * t - np.asarray(c) ** 2) ** 1.5


def beta_tt(t: float, c: np.ndarray) -> np.ndarray:
    c2 = np.asarray(c) ** 2
    return (2.0 * t * t + c2) / (t * t - c2) ** 2.5


@dataclass(frozen=True)
class BetaEnvelopes:
    """Sup bounds of |beta|, |beta_t|, |beta_tt| over c <= 2, and the resulting bound on ||K||"""

    beta: float
    beta_t: float
    beta_tt: float

    @property
    def operator_bound(self) -> float:
        # (1/4pi^2) |B_1|^2 (E_t^2 + E E_tt), |B_1| = pi
        return 0.25 * (self.beta_t**2 + self.beta * self.beta_tt)


def beta_envelopes(T: float) -> BetaEnvelopes:
    """
    Sups over c in [0, 2], all attained at c = 2:
    |beta| <= (T^2-4)^(-1/2), |beta_t| <= T (T^2-4)^(-3/2), |beta_tt| <= (2T^2+4) (T^2-4)^(-5/2).
    The shorter forms 1/(T^2-4) for beta and 4T/(T^2-4)^3 for beta_tt do not hold near T = 3
    (beta(3, 0) = 1/3 > 1/5).
    """
    if T <= 2.0:
        raise DomainError(f"kernel bounds require T > 2, got T = {T}")
    q = T * T - 4.0
    return BetaEnvelopes(beta=q**-0.5, beta_t=T * q**-1.5, beta_tt=(2.0 * T * T + 4.0) * q**-2.5)


def apply_K(a_trial: CauchyField, T: float, cfg: Optional[ReconConfig] = None) -> CauchyField:
    """
    Ka(x) = (1/2pi) int_{B_1} [u(T, y) beta_t(T, |x - y|) - u_t(T, y) beta(T, |x - y|)] dy
    with u(T, .), u_t(T, .) the interior values of the wave from (a, 0). Dense B_1 x B_1 quadrature.
    """
    if T <= 2.0:
        raise DomainError(f"operator K requires T > 2, got T = {T}")
    if a_trial.dimension != 2:
        raise ValueError("apply_K is the 2D remainder operator")
    ball = a_trial.ball
    pts = ball.points().reshape(-1, 2)
    wa = ball.weights().ravel() * a_trial.a.ravel()
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    bt = beta_t(T, dist)
    u = bt @ wa / (2.0 * np.pi)
    u_t = beta_tt(T, dist) @ wa / (2.0 * np.pi)
    w = ball.weights().ravel()
    Ka = (bt @ (w * u) - beta(T, dist) @ (w * u_t)) / (2.0 * np.pi)
    return CauchyField(ball, Ka.reshape(ball.shape), np.zeros(ball.shape))


def apply_C(ext: ExteriorField, T: float, target: BallGrid, cfg: ReconConfig) -> CauchyField:
    """
    a_1(x) = -D[V_t](x, T) + d/ds D[V](x, s)|_T, D the weighted disc integral over the part of
    D(s, x) outside B_1; evaluated modally with a centered difference in s.
    """
    if T <= 2.0:
        raise DomainError(f"method requires T > 2, got T = {T}")
    h = cfg.h_t
    support = (ext.shell_radii[0], ext.shell_radii[-1])
    prof_V, prof_Vt = ext.shell_profile("V"), ext.shell_profile("V_t")

    def one(r_x: float) -> np.ndarray:
        dV = modal_disc_mean(prof_V, ext.orders, r_x, np.array([T - h, T + h]), support, cfg.quad.disc, cfg.quad.psi)
        dVt = modal_disc_mean(prof_Vt, ext.orders, r_x, np.array([T]), support, cfg.quad.disc, cfg.quad.psi)
        return -dVt[:, 0] + (dV[:, 1] - dV[:, 0]) / (2.0 * h)

    profiles = np.stack(map_ordered(one, target.radii, cfg.workers, progress_enabled(cfg), desc="2D backward step"), axis=1)
    return CauchyField(target, synthesize_ball(ext.modes, profiles, target), np.zeros(target.shape))


def field_norm(data: CauchyField, component: str = "a") -> float:
    values = data.component(component)
    return float(np.sqrt(np.sum(data.ball.weights() * values**2)))


@dataclass
class IterationState:
    index: int
    partial_sum: CauchyField
    residual: BoundaryObservation
    norms: List[float] = field(default_factory=list)


def check_divergence(norms: Sequence[float], window: int):
    """A run of `window` correction norms that never decrease means ||K|| >= 1"""
    if len(norms) < window:
        return
    tail = np.asarray(norms[-window:])
    if np.all(np.diff(tail) >= 0.0) and tail[-1] > 0.0:
        raise DivergenceError(
            f"correction norms did not decrease over {window} iterations "
            f"({', '.join(f'{x:.3e}' for x in tail)}); T is too small for the remainder to contract"
        )


def iterate_2d(obs: BoundaryObservation, T: float, n_iter: int, cfg: ReconConfig) -> IterationState:
    """a_1 = CF, a_{i+1} = C(F - F_1 - ... - F_i) with F_j the re-synthesized data of a_j"""
    if obs.dimension != 2:
        raise ValueError("the iterative scheme is 2D")
    if T <= 2.0:
        raise DomainError(f"method requires T > 2, got T = {T}")
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if T > obs.T + 1e-9:
        raise DomainError(f"method asks for T = {T} but the observation ends at {obs.T}")
    data = obs.truncated(T)
    ball = target_ball(cfg)
    nmax = cfg.recon.nmax
    state = IterationState(0, CauchyField.zeros(ball), data)
    for i in range(1, n_iter + 1):
        coeffs = analyze(state.residual, nmax)
        ext = solve_exterior_2d(coeffs, T, cfg)
        correction = apply_C(ext, T, ball, cfg)
        state.index = i
        state.partial_sum = state.partial_sum + correction
        state.norms.append(field_norm(correction))
        logger.info(f"iteration {i}: ||a_{i}|| = {state.norms[-1]:.4e}")
        check_divergence(state.norms, cfg.tol.divergence_window)
        if i < n_iter:
            resynth = synthesize_observation(
                correction, data.grid, T, data.dt, nmax=nmax, h_t=cfg.h_t,
                mean_order=2 * cfg.quad.disc, psi_order=cfg.quad.psi, workers=cfg.workers,
            )
            state.residual = BoundaryObservation(data.grid, data.dt, state.residual.samples - resynth.samples, "residual")
    return state


def reconstruct_iterative_2d(obs: BoundaryObservation, T: float, n_iter: int, cfg: ReconConfig,
                             diagnostics: Optional[dict] = None) -> CauchyField:
    """Sum of the corrections a_1 + ... + a_n; b is taken to be zero"""
    state = iterate_2d(obs, T, n_iter, cfg)
    if diagnostics is not None:
        diagnostics["iteration_norms"] = list(state.norms)
    return state.partial_sum
