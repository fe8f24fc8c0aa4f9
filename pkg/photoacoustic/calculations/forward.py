#!/usr/bin/env python3
"""
Forward solver: free-space waves from Cauchy data (a, b) supported in the unit ball.

3D uses the Kirchhoff formula u = t M_t[b] + d/dt (t M_t[a]) with spherical means;
2D uses the Poisson formula with disc integrals weighted by 1/sqrt(t^2 - |y - x|^2).
Time derivatives are centered differences with step h_t, with s -> s M_|s| extended
oddly so the stencil is valid down to t = 0.

The pointwise evaluators are the reference; observation synthesis goes through
the modal (Funk-Hecke) reductions, which only need radial profiles.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from photoacoustic.calculations.harmonics import (
    AngularGrid,
    BallGrid,
    BoundaryObservation,
    Mode,
    ModalCoefficients,
    analyze_ball,
    harmonics_at_points,
    synthesize,
)
from photoacoustic.calculations.specfun import legendre_table

logger = logging.getLogger(__name__)

Profile = Callable[[np.ndarray], np.ndarray]


@dataclass
class CauchyField:
    """Initial pressure a and its rate b sampled on a ball grid, arrays (n_angular, n_r)"""

    ball: BallGrid
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        for name, values in (("a", self.a), ("b", self.b)):
            if values.shape != self.ball.shape:
                raise ValueError(f"{name} has shape {values.shape}, ball grid is {self.ball.shape}")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name} has non-finite samples")
        radii = self.ball.radii
        if np.any(np.diff(radii) <= 0) or radii[-1] > 1.0 or radii[0] <= 0.0:
            raise ValueError("ball radii must increase strictly inside (0, 1]")

    @property
    def dimension(self) -> int:
        return self.ball.dimension

    @classmethod
    def zeros(cls, ball: BallGrid) -> "CauchyField":
        return cls(ball, np.zeros(ball.shape), np.zeros(ball.shape))

    def component(self, name: str) -> np.ndarray:
        if name not in ("a", "b"):
            raise ValueError(f"component must be 'a' or 'b', got {name!r}")
        return self.a if name == "a" else self.b

    def __add__(self, other: "CauchyField") -> "CauchyField":
        return CauchyField(self.ball, self.a + other.a, self.b + other.b)

    def __sub__(self, other: "CauchyField") -> "CauchyField":
        return CauchyField(self.ball, self.a - other.a, self.b - other.b)

    def scaled(self, factor: float) -> "CauchyField":
        return CauchyField(self.ball, factor * self.a, factor * self.b)


def linear_profile(radii: np.ndarray, values: np.ndarray) -> Profile:
    """Piecewise-linear radial profiles: flat below the first radius, 0 at r = 1 and beyond"""
    knots = np.concatenate([[0.0], radii, [1.0]]) if radii[-1] < 1.0 else np.concatenate([[0.0], radii])
    values = np.atleast_2d(values)
    padded = [values[:, :1], values]
    if radii[-1] < 1.0:
        padded.append(np.zeros((values.shape[0], 1)))
    table = np.concatenate(padded, axis=1)

    def profile(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        flat = rho.ravel()
        out = np.array([np.interp(flat, knots, row, right=0.0) for row in table])
        return out.reshape((table.shape[0],) + rho.shape)

    return profile


class FieldEvaluator:
    """Evaluates (a, b) anywhere: linear in radius, harmonic synthesis in angle, 0 outside the ball"""

    def __init__(self, dimension: int, modes: Sequence[Mode], radii: np.ndarray, a_profiles: np.ndarray, b_profiles: np.ndarray):
        self.dimension = dimension
        self.modes = list(modes)
        self.orders = np.array([n for n, _ in self.modes])
        self.nmax = int(self.orders.max()) if len(self.orders) else 0
        self.radii = np.asarray(radii, dtype=float)
        self.a_profiles = np.asarray(a_profiles, dtype=float)
        self.b_profiles = np.asarray(b_profiles, dtype=float)
        self.profiles = {
            "a": linear_profile(self.radii, self.a_profiles),
            "b": linear_profile(self.radii, self.b_profiles),
        }

    @classmethod
    def from_field(cls, data: CauchyField, nmax: int) -> "FieldEvaluator":
        modes, a_prof = analyze_ball(data.a, data.ball, nmax)
        _, b_prof = analyze_ball(data.b, data.ball, nmax)
        return cls(data.dimension, modes, data.ball.radii, a_prof, b_prof)

    def is_zero(self, component: str) -> bool:
        return not np.any(self.a_profiles if component == "a" else self.b_profiles)

    def __call__(self, points: np.ndarray, component: str) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, self.dimension)
        rho = np.linalg.norm(flat, axis=1)
        radial = self.profiles[component](rho)  # (n_modes, n_points)
        angular = harmonics_at_points(self.dimension, self.modes, flat)  # (n_points, n_modes)
        values = np.einsum("mp,pm->p", radial, angular)
        return values.reshape(points.shape[:-1])

    def sample_on(self, ball: BallGrid) -> CauchyField:
        pts = ball.points()
        return CauchyField(ball, self(pts, "a"), self(pts, "b"))


def _sphere_directions(quad_order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(quad_order)
    n_phi = 2 * quad_order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    sin_t = np.sqrt(1.0 - x * x)
    dirs = np.stack(
        [np.outer(sin_t, np.cos(phi)), np.outer(sin_t, np.sin(phi)), np.outer(x, np.ones(n_phi))], axis=-1
    ).reshape(-1, 3)
    weights = np.repeat(w, n_phi) * (2.0 * np.pi / n_phi) / (4.0 * np.pi)
    return dirs, weights


def spherical_mean(field: Callable[[np.ndarray], np.ndarray], center: Sequence[float], radius: float, quad_order: int) -> float:
    """Average of `field` over the sphere |y - center| = radius"""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    dirs, weights = _sphere_directions(quad_order)
    values = field(np.asarray(center, dtype=float)[None, :] + radius * dirs)
    return float(np.dot(weights, values))


def _disc_weighted_integral(field: Callable[[np.ndarray], np.ndarray], center: np.ndarray, radius: float, n_psi: int, n_phi: int) -> float:
    """(1/2pi) int_{|y-x|<s} g(y)/sqrt(s^2-|y-x|^2) dy / s, with rho = s sin(psi)"""
    x, w = np.polynomial.legendre.leggauss(n_psi)
    psi = 0.25 * np.pi * (x + 1.0)
    wpsi = 0.25 * np.pi * w
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    rho = radius * np.sin(psi)
    pts = center[None, None, :] + rho[:, None, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)[None, :, :]
    values = field(pts.reshape(-1, 2)).reshape(n_psi, n_phi)
    return float(np.dot(wpsi * np.sin(psi), values.sum(axis=1)) / n_phi)


def eval_solution3d(field: FieldEvaluator, x: Sequence[float], t: float, h_t: float = 5e-4,
                    quad_order: Optional[int] = None) -> Tuple[float, float]:
    """(u, u_t) at point x and time t > 0 by the Kirchhoff formula; quad_order defaults to 2 nmax + 4"""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    if quad_order is None:
        quad_order = 2 * field.nmax + 4

    def S(component: str, s: float) -> float:
        if s == 0.0 or field.is_zero(component):
            return 0.0
        return s * spherical_mean(lambda p: field(p, component), x, abs(s), quad_order)

    h = h_t
    a_m, a_0, a_p = S("a", t - h), S("a", t), S("a", t + h)
    b_m, b_0, b_p = S("b", t - h), S("b", t), S("b", t + h)
    u = b_0 + (a_p - a_m) / (2 * h)
    u_t = (b_p - b_m) / (2 * h) + (a_p - 2 * a_0 + a_m) / (h * h)
    return u, u_t


def eval_solution2d(field: FieldEvaluator, x: Sequence[float], t: float, h_t: float = 5e-4, n_psi: int = 48, n_phi: int = 96) -> Tuple[float, float]:
    """(u, u_t) at point x and time t > 0 by the Poisson formula"""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)

    def W(component: str, s: float) -> float:
        if s == 0.0 or field.is_zero(component):
            return 0.0
        return s * _disc_weighted_integral(lambda p: field(p, component), x, abs(s), n_psi, n_phi)

    h = h_t
    a_m, a_0, a_p = W("a", t - h), W("a", t), W("a", t + h)
    b_m, b_0, b_p = W("b", t - h), W("b", t), W("b", t + h)
    u = b_0 + (a_p - a_m) / (2 * h)
    u_t = (b_p - b_m) / (2 * h) + (a_p - 2 * a_0 + a_m) / (h * h)
    return u, u_t


def modal_sphere_mean(profile: Profile, orders: np.ndarray, r_x: float, s: np.ndarray,
                      support: Tuple[float, float] = (0.0, 1.0), order: int = 96, chunk: int = 64) -> np.ndarray:
    """
    Spherical means of g_i(|y|) Y_i(y^) over S_s(x), divided by Y_i(x^):
    (1/(2 r_x s)) int g(rho) P_n((rho^2 + r_x^2 - s^2)/(2 rho r_x)) rho drho over the
    shell the sphere crosses. Returns (n_modes, len(s)).
    """
    orders = np.asarray(orders)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lo, hi = support
    n_modes = len(orders)
    out = np.zeros((n_modes, len(s)))
    if r_x < 1e-12:
        inside = (s >= lo) & (s <= hi) & (s > 0)
        values = profile(s)
        out[orders == 0] = np.where(inside, values[orders == 0], 0.0)
        return out
    x, w = np.polynomial.legendre.leggauss(order)
    nmax = int(orders.max()) if n_modes else 0
    for start in range(0, len(s), chunk):
        sc = s[start:start + chunk]
        a = np.maximum(np.abs(r_x - sc), lo)
        b = np.minimum(r_x + sc, hi)
        valid = (b > a) & (sc > 0)
        half = np.where(valid, 0.5 * (b - a), 0.0)
        mid = 0.5 * (a + b)
        rho = mid[:, None] + half[:, None] * x[None, :]
        rho = np.where(valid[:, None], rho, 1.0)
        cosang = np.clip((rho * rho + r_x * r_x - sc[:, None] ** 2) / (2.0 * rho * r_x), -1.0, 1.0)
        P = legendre_table(nmax, cosang)[orders]
        G = profile(rho)
        integral = np.einsum("msk,k->ms", G * P * rho[None], w) * half[None, :]
        denom = np.where(valid, 2.0 * r_x * np.where(sc > 0, sc, 1.0), 1.0)
        out[:, start:start + chunk] = np.where(valid[None, :], integral / denom[None, :], 0.0)
    return out


def disc_kernel(nmax: int, rho: np.ndarray, r_x: float, s: np.ndarray, psi_order: int = 48) -> np.ndarray:
    """
    I_n(rho) = int_{|theta| < theta*} cos(n theta) / sqrt(s^2 - rho^2 - r_x^2 + 2 rho r_x cos theta) dtheta
    for n = 0..nmax, theta* = pi where the whole circle |y| = rho lies inside D(s, x).
    rho and s broadcast together; the result has shape (nmax + 1,) + broadcast shape.
    """
    rho, s = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(s, dtype=float))
    xp, wp = np.polynomial.legendre.leggauss(psi_order)
    psi = 0.25 * np.pi * (xp + 1.0)
    wpsi = 0.25 * np.pi * wp
    cstar = (rho**2 + r_x**2 - s**2) / (2.0 * rho * r_x)
    theta_star = np.arccos(np.clip(cstar, -1.0, 1.0))
    theta = theta_star[..., None] * np.sin(psi)
    D = s[..., None] ** 2 - rho[..., None] ** 2 - r_x**2 + 2.0 * rho[..., None] * r_x * np.cos(theta)
    base = theta_star[..., None] * np.cos(psi) / np.sqrt(np.maximum(D, 1e-300))
    n = np.arange(nmax + 1).reshape((-1,) + (1,) * theta.ndim)
    # symmetric in theta: twice the half-range integral
    return 2.0 * np.sum(np.cos(n * theta[None]) * base[None] * wpsi, axis=-1)


def modal_disc_mean(profile: Profile, orders: np.ndarray, r_x: float, s: np.ndarray,
                    support: Tuple[float, float] = (0.0, 1.0), order: int = 48, psi_order: int = 48, chunk: int = 8) -> np.ndarray:
    """
    2D analog: (1/2pi) int_{|y-x|<s} g_i(|y|) Theta_i(y^)/sqrt(s^2-|y-x|^2) dy divided by
    Theta_i(x^). The angular integral runs over |theta| < theta*(rho) with theta = theta* sin(psi),
    and the radial one is split where the circle |y - x| = s becomes tangent to |y| = rho.
    """
    orders = np.asarray(orders)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lo, hi = support
    n_modes = len(orders)
    nmax = int(orders.max()) if n_modes else 0
    out = np.zeros((n_modes, len(s)))
    x, w = np.polynomial.legendre.leggauss(order)
    xp, wp = np.polynomial.legendre.leggauss(psi_order)
    psi = 0.25 * np.pi * (xp + 1.0)
    wpsi = 0.25 * np.pi * wp

    if r_x < 1e-12:
        for j, sj in enumerate(s):
            if sj <= 0:
                continue
            rho = sj * np.sin(psi)
            mask = (rho >= lo) & (rho <= hi)
            values = profile(rho)[orders == 0]
            out[orders == 0, j] = sj * np.dot(values * mask, wpsi * np.sin(psi))
        return out

    for start in range(0, len(s), chunk):
        sc = s[start:start + chunk]
        pieces = []
        edges_lo = [np.zeros_like(sc), np.abs(r_x - sc)]
        edges_hi = [np.maximum(sc - r_x, 0.0), r_x + sc]
        for e_lo, e_hi in zip(edges_lo, edges_hi):
            a = np.maximum(e_lo, lo)
            b = np.minimum(e_hi, hi)
            valid = (b > a) & (sc > 0)
            half = np.where(valid, 0.5 * (b - a), 0.0)
            rho = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
            pieces.append((np.where(valid[:, None], rho, 1.0), half[:, None] * w[None, :]))
        rho = np.concatenate([p[0] for p in pieces], axis=1)  # (n_s, 2K)
        weight = np.concatenate([p[1] for p in pieces], axis=1)
        inner = disc_kernel(nmax, rho, r_x, sc[:, None], psi_order)
        G = profile(rho)
        integral = np.einsum("msk,msk,sk->ms", G, inner[orders], rho * weight) / (2.0 * np.pi)
        out[:, start:start + chunk] = np.where((sc > 0)[None, :], integral, 0.0)
    return out


def _modal_history(evaluator: FieldEvaluator, times: np.ndarray, h: float, mean: Callable, workers: int) -> np.ndarray:
    """Boundary modal series F_i(t) from the modal mean operator `mean(profile, orders, 1, s)`"""
    s_all = np.concatenate([times + h, np.abs(times - h), times])
    sign_minus = np.sign(times - h)

    def run(component: str) -> np.ndarray:
        if evaluator.is_zero(component):
            return np.zeros((len(evaluator.modes), len(s_all)))
        chunks = np.array_split(s_all, max(1, workers))
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            parts = list(pool.map(lambda sc: mean(evaluator.profiles[component], evaluator.orders, 1.0, sc), chunks))
        return np.concatenate(parts, axis=1)

    nt = len(times)
    a_vals, b_vals = run("a"), run("b")
    # S(s) = s * mean(|s|), odd in s
    a_plus = (times + h) * a_vals[:, :nt]
    a_minus = (times - h) * a_vals[:, nt:2 * nt]
    a_minus = np.where(sign_minus == 0, 0.0, a_minus)
    b_now = times * b_vals[:, 2 * nt:]
    return (a_plus - a_minus) / (2.0 * h) + b_now


def synthesize_observation(data: CauchyField, grid: AngularGrid, T: float, dt: float, nmax: Optional[int] = None,
                           h_t: Optional[float] = None, mean_order: int = 96, psi_order: int = 48, workers: int = 1,
                           evaluator: Optional[FieldEvaluator] = None) -> BoundaryObservation:
    """Sample u on every surface node and time node in [0, T]"""
    if T <= 0 or dt <= 0:
        raise ValueError(f"T and dt must be positive, got T={T}, dt={dt}")
    if evaluator is None:
        if nmax is None:
            raise ValueError("give nmax or a prepared evaluator")
        evaluator = FieldEvaluator.from_field(data, nmax)
    h = h_t if h_t is not None else dt / 4.0
    times = dt * np.arange(int(round(T / dt)) + 1)
    logger.info(f"synthesizing {len(evaluator.modes)} modes x {len(times)} times ({grid.dimension}D)")
    if evaluator.dimension == 3:
        def mean(profile, orders, r_x, s):
            return modal_sphere_mean(profile, orders, r_x, s, order=mean_order)
        series = _modal_history(evaluator, times, h, mean, workers)
    else:
        def mean(profile, orders, r_x, s):
            return modal_disc_mean(profile, orders, r_x, s, order=mean_order // 2, psi_order=psi_order)
        # the disc integral already carries the factor s
        series = _modal_history(evaluator, times, h, lambda p, o, r, s: mean(p, o, r, s) / np.where(s > 0, s, 1.0), workers)
    coeffs = ModalCoefficients(evaluator.dimension, evaluator.nmax, dt, evaluator.modes, series)
    obs = synthesize(coeffs, grid)
    obs.provenance = "forward synthesis"
    return obs


def radial_oracle(a_radial: Callable[[float], float], b_radial: Callable[[float], float], r: float, t: float,
                  h: float = 1e-5) -> Tuple[float, float]:
    """
    Exact 3D radial solution: r u solves the 1D wave equation with odd data rho a(|rho|),
    rho b(|rho|). Returns (u, u_t) at radius r >= 0, time t.
    """

    def A(rho: float) -> float:
        return rho * a_radial(abs(rho))

    def B(rho: float) -> float:
        return rho * b_radial(abs(rho))

    def dA(rho: float) -> float:
        return (A(rho + h) - A(rho - h)) / (2 * h)

    if t == 0:
        return float(a_radial(r)), float(b_radial(r))
    if r < 1e-8:
        # limit r -> 0: u = d/dt (t a(t)) + t b(t)
        u = dA(t) + B(t)
        u_t = (dA(t + h) - dA(t - h)) / (2 * h) + (B(t + h) - B(t - h)) / (2 * h)
        return u, u_t
    lo, hi = r - t, r + t
    integral = quad(B, lo, hi, points=[p for p in (-1.0, 0.0, 1.0) if lo < p < hi], limit=200)[0]
    ru = 0.5 * (A(hi) + A(lo)) + 0.5 * integral
    ru_t = 0.5 * (dA(hi) - dA(lo)) + 0.5 * (B(hi) + B(lo))
    return ru / r, ru_t / r
