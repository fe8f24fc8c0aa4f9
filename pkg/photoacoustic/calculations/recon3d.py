#!/usr/bin/env python3
"""
3D reconstruction of the Cauchy data (a, b) from boundary pressure on the unit sphere.

Exterior procedure: solve the wave equation outside B_1 with the observed boundary
values (one second-kind Volterra equation per order n), sample v and v_t on the shell
B_{T+1} \\ B_1 at t = T, and run the wave backward to t = 0 with the Kirchhoff formula.

Interior procedure: reverse time on [0, 2] and solve the interior problem with zero
Cauchy data, either by a delay-Volterra equation per mode or, for analytic pole-form
data, by the Bessel-zero residue series.
"""

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import jv

from photoacoustic.calculations.forward import CauchyField, Profile, modal_sphere_mean
from photoacoustic.calculations.harmonics import (
    BallGrid,
    BoundaryObservation,
    Mode,
    ModalCoefficients,
    analyze,
    ball_grid,
    differentiate_series,
    grid_for,
    group_by_order,
    harmonics_at_points,
    mode_indices,
    synthesize_ball,
)
from photoacoustic.calculations.parallel import map_ordered, progress_enabled
from photoacoustic.calculations.specfun import (
    bessel_ratio,
    bessel_zeros,
    eval_legendre,
    eval_legendre_antideriv,
)
from photoacoustic.calculations.volterra import (
    TimeGrid,
    apply_resolvent3d,
    build_resolvent3d,
    gregory_convolution,
    solve_delay_volterra,
    solve_smooth_volterra,
)
from photoacoustic.errors import DomainError, LocalityError, TruncationWarning, ValidityError
from photoacoustic.models import ReconConfig

logger = logging.getLogger(__name__)


def target_ball(cfg: ReconConfig) -> BallGrid:
    """Ball grid every reconstruction is returned on"""
    angular = grid_for(cfg.grid.dimension, cfg.recon.nmax, cfg.n_theta, cfg.n_phi)
    return ball_grid(angular, cfg.grid.n_r)


def shell_radii(T: float, count: int) -> np.ndarray:
    """Chebyshev-spaced radii on [1, T + 1], both ends included"""
    k = np.arange(count)
    return 1.0 + 0.5 * T * (1.0 - np.cos(np.pi * k / (count - 1)))


@dataclass
class ExteriorField:
    """Modal densities of the exterior solution and its Cauchy data on the shell at t = T"""

    dimension: int
    modes: List[Mode]
    dt: float
    T: float
    densities: np.ndarray
    shell_radii: np.ndarray
    V: np.ndarray
    V_t: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        return np.array([n for n, _ in self.modes])

    def shell_profile(self, which: str) -> Profile:
        return spline_profile(self.shell_radii, self.V if which == "V" else self.V_t)


def spline_profile(radii: np.ndarray, values: np.ndarray) -> Profile:
    """Cubic-spline radial profiles, zero outside [radii[0], radii[-1]]"""
    spline = CubicSpline(radii, np.asarray(values).T, axis=0)
    lo, hi = radii[0], radii[-1]

    def profile(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        inside = (rho >= lo) & (rho <= hi)
        out = spline(np.clip(rho, lo, hi)) * inside[..., None]
        return np.moveaxis(out, -1, 0)

    return profile


def _shell_weights(n: int, radii: np.ndarray, t: float, dt: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Matrices (len(radii), count) mapping the density samples to v_n(r, t) and v_t.

    v = int_0^{t+1-r} w(tau) Q_{n+1}((t+1-tau)/r) dtau and v_t the same with P_n(.)/r;
    the last partial cell ends at U = t + 1 - r, where Q_{n+1}(1) = 0 and P_n(1)/r = 1/r.
    """
    tau = dt * np.arange(count)
    Wv = np.zeros((len(radii), count))
    Wt = np.zeros((len(radii), count))
    for i, r in enumerate(radii):
        U = t + 1.0 - r
        if U <= 0.0:
            continue
        j = min(int(np.floor(U / dt + 1e-9)), count - 1)
        arg = (t + 1.0 - tau[: j + 1]) / r
        q = eval_legendre_antideriv(n, arg)
        p = eval_legendre(n, arg) / r
        w = np.full(j + 1, dt)
        if j == 0:
            w[0] = 0.0
        else:
            w[0] = w[j] = 0.5 * dt
        Wv[i, : j + 1] += w * q
        Wt[i, : j + 1] += w * p
        delta = U - j * dt
        if delta > 1e-12 * dt and j + 1 < count:
            theta = delta / dt
            Wv[i, j] += 0.5 * delta * q[j]
            Wt[i, j] += 0.5 * delta * (p[j] + (1.0 - theta) / r)
            Wt[i, j + 1] += 0.5 * delta * theta / r
    return Wv, Wt


def _solve_order(n: int, g: np.ndarray, grid: TimeGrid, cfg: ReconConfig) -> np.ndarray:
    """Density rows for every m of order n from g = F''"""
    if n == 0:
        return g.copy()
    if cfg.recon.volterra_path == "resolvent":
        res = build_resolvent3d(n, cfg.tol.multiplicity)
        return apply_resolvent3d(res, g, grid)
    return solve_smooth_volterra(lambda lags: eval_legendre(n, 1.0 + lags, deriv=1), g, grid)


def solve_exterior(coeffs: ModalCoefficients, T: float, cfg: ReconConfig, full_ball: bool = True) -> ExteriorField:
    """Densities w_n^m from w + int P_n'(1 + t - tau) w dtau = F'' and the shell samples at t = T"""
    if coeffs.dimension != 3:
        raise ValueError("solve_exterior is the 3D procedure")
    if full_ball and T < 2.0:
        raise DomainError(f"method requires T >= 2 for a full-ball target, got T = {T}")
    grid = TimeGrid.spanning(T, coeffs.dt)
    if grid.count > coeffs.n_times:
        raise DomainError(f"method requires observations up to T = {T}, data ends at {(coeffs.n_times - 1) * coeffs.dt}")
    F = coeffs.data[:, : grid.count]
    g = differentiate_series(F, 2, coeffs.dt)

    groups = group_by_order(coeffs.modes)
    orders = sorted(groups)
    densities = np.zeros_like(F)
    radii = shell_radii(T, cfg.quad.shell)
    V = np.zeros((len(coeffs.modes), len(radii)))
    V_t = np.zeros_like(V)

    def work(n: int):
        rows = groups[n]
        omega = np.atleast_2d(_solve_order(n, g[rows], grid, cfg))
        Wv, Wt = _shell_weights(n, radii, T, grid.dt, grid.count)
        return rows, omega, omega @ Wv.T, omega @ Wt.T

    results = map_ordered(work, orders, cfg.workers, progress_enabled(cfg), desc="exterior modes")
    for rows, omega, v, vt in results:
        densities[rows] = omega
        V[rows] = v
        V_t[rows] = vt
    logger.info(f"exterior solve: {len(orders)} orders, {grid.count} time steps, {len(radii)} shell radii")
    return ExteriorField(3, list(coeffs.modes), grid.dt, grid.end, densities, radii, V, V_t)


def exterior_samples(ext: ExteriorField, radii: Sequence[float], t: float) -> Tuple[np.ndarray, np.ndarray]:
    """(v, v_t) per mode at the given radii (>= 1) and time t <= T"""
    radii = np.asarray(radii, dtype=float)
    if t > ext.T + 1e-12:
        raise DomainError(f"exterior field is known up to t = {ext.T}, asked for {t}")
    v = np.zeros((len(ext.modes), len(radii)))
    v_t = np.zeros_like(v)
    count = ext.densities.shape[1]
    for n, rows in group_by_order(ext.modes).items():
        Wv, Wt = _shell_weights(n, radii, t, ext.dt, count)
        v[rows] = ext.densities[rows] @ Wv.T
        v_t[rows] = ext.densities[rows] @ Wt.T
    return v, v_t


def boundary_residuals(ext: ExteriorField, coeffs: ModalCoefficients) -> Dict[str, float]:
    """Relative L2 mismatch, per order, between v(1, t) rebuilt from the densities and F"""
    count = ext.densities.shape[1]
    lags = ext.dt * np.arange(count)
    residuals = {}
    for n, rows in group_by_order(ext.modes).items():
        kernel = eval_legendre_antideriv(n, 1.0 + lags)
        rebuilt = np.array([gregory_convolution(kernel, row, ext.dt) for row in ext.densities[rows]])
        target = coeffs.data[rows, :count]
        scale = np.linalg.norm(target)
        residuals[str(n)] = float(np.linalg.norm(rebuilt - target) / scale) if scale > 0 else float(np.linalg.norm(rebuilt))
    return residuals


def min_observation_time(x: Sequence[float]) -> float:
    """Shortest observation that lets the backward cones from x avoid B_1"""
    return 1.0 + float(np.linalg.norm(x))


def _check_locality(T: float, radius: float, tol: float):
    needed = 1.0 + radius
    if T < needed - tol:
        raise LocalityError(
            f"point at |x| = {radius:.6g} needs T >= {needed:.6g} (1 + |x|) for time reversal, got T = {T:.6g}"
        )


def _reverse_at_radius(ext: ExteriorField, r_x: float, h: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Backward Kirchhoff evaluation at t = 0 for one target radius, all modes.

    With S(s) = s M_s[V] and S'(s) = s M_s[V_t] on spheres of radius s = T, T+h, ...:
    a = -T M_T[V_t] + dS/ds, b = dS'/ds - d2S/ds2 (forward stencils, so s >= T).
    """
    T = ext.T
    s = T + h * np.arange(4)
    support = (ext.shell_radii[0], ext.shell_radii[-1])
    mV = modal_sphere_mean(ext.shell_profile("V"), ext.orders, r_x, s, support, order)
    mVt = modal_sphere_mean(ext.shell_profile("V_t"), ext.orders, r_x, s, support, order)
    S = s * mV
    St = s * mVt
    a = -T * mVt[:, 0] + (-3.0 * S[:, 0] + 4.0 * S[:, 1] - S[:, 2]) / (2.0 * h)
    b = (-3.0 * St[:, 0] + 4.0 * St[:, 1] - St[:, 2]) / (2.0 * h) - (
        2.0 * S[:, 0] - 5.0 * S[:, 1] + 4.0 * S[:, 2] - S[:, 3]
    ) / (h * h)
    return a, b


def time_reverse(ext: ExteriorField, T: float, target: BallGrid, cfg: ReconConfig) -> CauchyField:
    """(a, b) = (w, w_t) at t = 0 for the backward problem with w(T) = V, w_t(T) = V_t"""
    if abs(T - ext.T) > 1e-9:
        raise ValueError(f"exterior field is sampled at T = {ext.T}, not {T}")
    _check_locality(T, float(target.radii.max()), cfg.tol.locality)
    h = cfg.h_t
    results = map_ordered(
        lambda r: _reverse_at_radius(ext, r, h, cfg.quad.mean),
        target.radii,
        cfg.workers,
        progress_enabled(cfg),
        desc="time reversal",
    )
    a_prof = np.stack([a for a, _ in results], axis=1)
    b_prof = np.stack([b for _, b in results], axis=1)
    logger.info(f"time reversal done on {len(target.radii)} radii")
    return CauchyField(target, synthesize_ball(ext.modes, a_prof, target), synthesize_ball(ext.modes, b_prof, target))


def time_reverse_points(ext: ExteriorField, points: np.ndarray, cfg: ReconConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(a, b) at arbitrary points; each point only needs T >= 1 + |x|"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    radii = np.linalg.norm(points, axis=1)
    _check_locality(ext.T, float(radii.max()), cfg.tol.locality)
    Y = harmonics_at_points(3, ext.modes, points)
    a = np.empty(len(points))
    b = np.empty(len(points))
    for i, r in enumerate(radii):
        ap, bp = _reverse_at_radius(ext, float(r), cfg.h_t, cfg.quad.mean)
        a[i] = Y[i] @ ap
        b[i] = Y[i] @ bp
    return a, b


def reconstruct_exterior(obs: BoundaryObservation, cfg: ReconConfig, diagnostics: Optional[dict] = None) -> CauchyField:
    """analyze -> solve_exterior -> time_reverse"""
    T = cfg.grid.T
    if T > obs.T + 1e-9:
        raise DomainError(f"config asks for T = {T} but the observation ends at {obs.T}")
    started = time.perf_counter()
    coeffs = analyze(obs.truncated(T), cfg.recon.nmax)
    ext = solve_exterior(coeffs, T, cfg)
    solved = time.perf_counter()
    field = time_reverse(ext, T, target_ball(cfg), cfg)
    if diagnostics is not None:
        diagnostics["mode_residuals"] = boundary_residuals(ext, coeffs)
        diagnostics["timings"] = {"exterior_solve": solved - started, "time_reversal": time.perf_counter() - solved}
    return field


def _interior_profiles(n: int, omega: np.ndarray, dt: float, radii: np.ndarray, alpha_order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read-out of phi(r, t) = int w(r alpha + t - 1) P_n(alpha) dalpha at t = 2:
    a = phi(r, 2), b = -phi_t(r, 2), the alpha-derivative integrated by parts.
    """
    omega = np.atleast_2d(omega)
    tau = dt * np.arange(omega.shape[1])
    spline = CubicSpline(tau, omega.T, axis=0)
    x, w = np.polynomial.legendre.leggauss(alpha_order)
    values = spline(1.0 + radii[:, None] * x[None, :])  # (n_r, K, rows)
    a = np.einsum("rkm,k->mr", values, w * eval_legendre(n, x))
    inner = np.einsum("rkm,k->mr", values, w * eval_legendre(n, x, deriv=1))
    ends = spline(1.0 + radii).T - (-1.0) ** n * spline(1.0 - radii).T
    b = -(ends - inner) / radii[None, :]
    return a, b


def solve_interior_modes(coeffs: ModalCoefficients, cfg: ReconConfig, radii: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Profiles (a, b) per mode at the given radii from data on [0, 2] by the delay-Volterra path"""
    steps = TimeGrid(coeffs.dt, coeffs.n_times).steps_in(2.0)
    grid = TimeGrid(coeffs.dt, steps + 1)
    if coeffs.n_times < grid.count:
        raise DomainError(f"method requires T >= 2, data ends at {(coeffs.n_times - 1) * coeffs.dt}")
    reversed_data = coeffs.data[:, : grid.count][:, ::-1]
    g = differentiate_series(reversed_data, 1, coeffs.dt)
    groups = group_by_order(coeffs.modes)
    a_prof = np.zeros((len(coeffs.modes), len(radii)))
    b_prof = np.zeros_like(a_prof)

    def work(n: int):
        omega = solve_delay_volterra(n, g[groups[n]], grid)
        return groups[n], _interior_profiles(n, omega, grid.dt, radii, cfg.quad.alpha)

    for rows, (a, b) in map_ordered(work, sorted(groups), cfg.workers, progress_enabled(cfg), desc="interior modes"):
        a_prof[rows] = a
        b_prof[rows] = b
    return a_prof, b_prof


def reconstruct_interior_volterra(obs: BoundaryObservation, cfg: ReconConfig) -> CauchyField:
    """Reverse time on [0, 2], one delay-Volterra solve per mode, read a = u(2), b = -u_t(2)"""
    if obs.T < 2.0 - 1e-9:
        raise DomainError(f"method requires T >= 2, observation ends at {obs.T}")
    coeffs = analyze(obs, cfg.recon.nmax)
    ball = target_ball(cfg)
    a_prof, b_prof = solve_interior_modes(coeffs, cfg, ball.radii)
    logger.info(f"interior (Volterra) solve: {len(coeffs.modes)} modes")
    return CauchyField(ball, synthesize_ball(coeffs.modes, a_prof, ball), synthesize_ball(coeffs.modes, b_prof, ball))


@dataclass(frozen=True)
class PoleData:
    """Reversed boundary data sum_j c_j exp(s_j t), poles closed under conjugation"""

    poles: np.ndarray
    residues: np.ndarray

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=complex)
        residues = np.asarray(self.residues, dtype=complex)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "residues", residues)
        if poles.shape != residues.shape or poles.ndim != 1:
            raise ValueError("poles and residues must be matching 1D lists")
        for p, c in zip(poles, residues):
            if abs(p.imag) > 0:
                match = np.abs(poles - np.conj(p)) + np.abs(residues - np.conj(c))
                if match.min() > 1e-12 * max(1.0, abs(p)):
                    raise ValueError(f"pole {p} has no conjugate partner with conjugate residue")
            elif abs(c.imag) > 1e-12 * max(1.0, abs(c)):
                raise ValueError(f"real pole {p} needs a real residue, got {c}")

    @classmethod
    def exponentials(cls, rates: Sequence[float], weights: Sequence[float]) -> "PoleData":
        """sum_j weights_j exp(-rates_j t)"""
        return cls(-np.asarray(rates, dtype=complex), np.asarray(weights, dtype=complex))

    def sample(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return np.real(np.exp(np.outer(times, self.poles)) @ self.residues)

    def transform(self, s: np.ndarray) -> np.ndarray:
        """Laplace transform sum_j c_j / (s - s_j)"""
        s = np.asarray(s, dtype=complex)
        return (self.residues[None, :] / (s.reshape(-1, 1) - self.poles[None, :])).sum(axis=1).reshape(s.shape)

    def observation_series(self, dt: float, T: float = 2.0) -> np.ndarray:
        """Forward-time boundary series F(t) = F~(2 - t) on [0, T], T <= 2"""
        times = dt * np.arange(int(round(T / dt)) + 1)
        return self.sample(2.0 - times)


@dataclass(frozen=True)
class ResidueSeriesParams:
    terms: int = 32
    tail_tolerance: float = 1e-4

    def __post_init__(self):
        if self.terms < 1:
            raise ValueError("the residue series needs at least one term")


@dataclass
class ResidueSeries:
    """phi and phi_t of one mode at t on the given radii, with tail estimates"""

    phi: np.ndarray
    phi_t: np.ndarray
    tail: float
    tail_t: float
    zeros: np.ndarray = field(default_factory=lambda: np.empty(0))


def evaluate_residue_series(n: int, data: PoleData, params: ResidueSeriesParams, radii: np.ndarray,
                            t: float = 2.0, coincidence: float = 1e-8) -> ResidueSeries:
    """
    phi_n(r, t) = sum over the data poles of c_j e^{s_j t} I_nu(r s_j)/(sqrt(r) I_nu(s_j))
                  - 2 sum_p Im[f(i k_p) e^{i k_p t}] J_nu(k_p r) / (sqrt(r) J_{nu-1}(k_p)),
    nu = n + 1/2, k_p the zeros of J_nu. The tail estimate is P times the last retained
    term, a bound for terms decaying at least like p^-2.
    """
    radii = np.asarray(radii, dtype=float)
    nu = n + 0.5
    k = bessel_zeros(nu, params.terms)
    for pole in data.poles:
        gaps = np.minimum(np.abs(pole - 1j * k), np.abs(pole + 1j * k)) / np.maximum(1.0, k)
        if gaps.min() < coincidence:
            p = int(np.argmin(gaps)) + 1
            raise ValidityError(f"data pole {pole} coincides with +-i k_{p} = +-{k[p - 1]:.12g}i for n = {n}")

    if len(data.poles):
        ratio = bessel_ratio(nu, radii[:, None], data.poles[None, :])
        growth = data.residues * np.exp(data.poles * t)
        psi = np.real(ratio @ growth)
        psi_t = np.real(ratio @ (growth * data.poles))
    else:
        psi = np.zeros(len(radii))
        psi_t = np.zeros(len(radii))

    f = data.transform(1j * k) * np.exp(1j * k * t)
    shape = jv(nu, np.outer(radii, k)) / (np.sqrt(radii)[:, None] * jv(nu - 1.0, k)[None, :])
    series = -2.0 * np.imag(f)[None, :] * shape
    series_t = -2.0 * np.real(k * f)[None, :] * shape
    P = params.terms
    return ResidueSeries(
        phi=psi + series.sum(axis=1),
        phi_t=psi_t + series_t.sum(axis=1),
        tail=float(P * np.abs(series[:, -1]).max()),
        tail_t=float(P * np.abs(series_t[:, -1]).max()),
        zeros=k,
    )


def reconstruct_interior_residue(pole_data: Dict[Mode, PoleData], params: ResidueSeriesParams, cfg: ReconConfig,
                                 diagnostics: Optional[dict] = None) -> CauchyField:
    """Interior reconstruction from analytic pole-form reversed data; absent modes are zero"""
    ball = target_ball(cfg)
    modes = mode_indices(3, cfg.recon.nmax)
    a_prof = np.zeros((len(modes), len(ball.radii)))
    b_prof = np.zeros_like(a_prof)
    tails = {}
    for mode, data in pole_data.items():
        if mode not in modes:
            raise ValueError(f"mode {mode} is outside nmax = {cfg.recon.nmax}")
        result = evaluate_residue_series(mode[0], data, params, ball.radii, coincidence=cfg.tol.coincidence)
        row = modes.index(mode)
        a_prof[row] = result.phi
        b_prof[row] = -result.phi_t
        tails[f"{mode[0]},{mode[1]}"] = max(result.tail, result.tail_t)
        scale = max(np.abs(result.phi).max(), np.abs(result.phi_t).max(), 1e-300)
        if max(result.tail, result.tail_t) > params.tail_tolerance * scale:
            warnings.warn(
                f"mode {mode}: residue series with {params.terms} terms has tail estimate "
                f"{max(result.tail, result.tail_t):.3e} (relative {max(result.tail, result.tail_t) / scale:.2e})",
                TruncationWarning,
            )
    if diagnostics is not None:
        diagnostics["mode_residuals"] = tails
    return CauchyField(ball, synthesize_ball(modes, a_prof, ball), synthesize_ball(modes, b_prof, ball))
