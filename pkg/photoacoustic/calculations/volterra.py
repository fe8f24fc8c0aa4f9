#!/usr/bin/env python3
"""
Integral-equation machinery for the modal densities.

Second-kind solvers march node by node with trapezoid weights carrying
Gregory end corrections; the Abel-type first-kind solver uses product
integration with moments of the cosh / cos substitutions. Right-hand sides
may be a single series or a stack of series (one per row) sharing the kernel.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import lu_factor, lu_solve
from scipy.special import kve

from photoacoustic.calculations.specfun import eval_legendre, legendre_taylor_at_one
from photoacoustic.errors import (
    CompatibilityWarning,
    GridAlignmentError,
    MultipleRootError,
    NumericalError,
    RootFindingError,
    SingularityError,
)

logger = logging.getLogger(__name__)

_GREGORY_ENDS = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    count: int

    def __post_init__(self):
        if self.dt <= 0 or self.count < 2:
            raise ValueError(f"time grid needs dt > 0 and count >= 2, got dt={self.dt}, count={self.count}")

    @property
    def nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.count)

    @property
    def end(self) -> float:
        return self.dt * (self.count - 1)

    @classmethod
    def spanning(cls, T: float, dt: float) -> "TimeGrid":
        return cls(dt=dt, count=int(round(T / dt)) + 1)

    def steps_in(self, span: float) -> int:
        """Number of steps covering `span`; the span must be a whole number of steps"""
        steps = int(round(span / self.dt))
        if steps < 1 or abs(steps * self.dt - span) > 1e-9 * max(span, 1.0):
            raise GridAlignmentError(f"time step {self.dt} does not divide {span}")
        return steps


def gregory_weights(count: int) -> np.ndarray:
    """Quadrature weights (in units of the step) for `count` equispaced nodes"""
    if count <= 1:
        return np.zeros(max(count, 0))
    w = np.ones(count)
    if count < 6:
        w[0] = w[-1] = 0.5
        return w
    w[:3] = _GREGORY_ENDS
    w[-3:] = _GREGORY_ENDS[::-1]
    return w


def _as_rows(rhs: np.ndarray) -> Tuple[np.ndarray, bool]:
    rhs = np.asarray(rhs, dtype=float)
    return (rhs[None, :], True) if rhs.ndim == 1 else (rhs, False)


def solve_smooth_volterra(kernel: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """w(t) + int_0^t K(t - s) w(s) ds = g(t), marched forward"""
    g, single = _as_rows(rhs)
    h = grid.dt
    K = np.asarray(kernel(grid.nodes), dtype=float)
    omega = np.zeros_like(g)
    omega[:, 0] = g[:, 0]
    for i in range(1, grid.count):
        w = gregory_weights(i + 1)
        history = omega[:, :i] @ (w[:i] * K[i:0:-1])
        omega[:, i] = (g[:, i] - h * history) / (1.0 + h * w[i] * K[0])
    return omega[0] if single else omega


def gregory_convolution(kernel_samples: np.ndarray, series: np.ndarray, h: float) -> np.ndarray:
    """int_0^{t_i} K(t_i - s) g(s) ds on every node, same weights as the marching solver"""
    K = np.asarray(kernel_samples, dtype=float)
    g = np.asarray(series, dtype=float)
    n = len(g)
    full = np.convolve(K, g)[:n]
    out = np.zeros(n)
    for i in range(1, min(n, 5)):
        out[i] = full[i] - 0.5 * (K[i] * g[0] + K[0] * g[i])
    if n > 5:
        i = np.arange(5, n)
        d = _GREGORY_ENDS - 1.0
        corr = np.zeros(len(i))
        for j in range(3):
            corr += d[j] * (K[i - j] * g[j] + K[j] * g[i - j])
        out[5:] = full[5:] + corr
    return h * out


@dataclass(frozen=True)
class ResolventKernel3D:
    """H_n(t) = sum_i w_i exp(k_i t), real part; every Re k_i lies below `abscissa`"""

    n: int
    roots: np.ndarray
    weights: np.ndarray
    abscissa: float

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        terms = self.weights[:, None] * np.exp(self.roots[:, None] * np.atleast_1d(t)[None, :])
        value = terms.sum(axis=0)
        return np.real(value).reshape(t.shape)

    def imaginary_part(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.imag((self.weights[:, None] * np.exp(self.roots[:, None] * t[None, :])).sum(axis=0))


def build_resolvent3d(n: int, multiplicity_tol: float = 1e-8) -> ResolventKernel3D:
    """
    Resolvent of w + P_n'(1 + .) * w = g by residues.

    The Laplace transform is 1 - p^n / D(p) with
    D(p) = p^n + P_n'(1) p^(n-1) + ... + P_n^(n)(1); each simple root k of D
    contributes -k^n exp(k t) / D'(k).
    """
    if not 1 <= n <= 64:
        raise ValueError(f"resolvent order must satisfy 1 <= n <= 64, got {n}")
    denominator = legendre_taylor_at_one(n).derivatives_at_one()
    roots = np.roots(denominator)
    if len(roots) != n or not np.all(np.isfinite(roots)):
        raise RootFindingError(f"companion eigenvalues failed for the order-{n} denominator")

    scale = np.maximum(1.0, np.abs(roots))
    gaps = np.abs(roots[:, None] - roots[None, :]) / scale[:, None]
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < multiplicity_tol:
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise MultipleRootError(
            f"order {n}: roots {roots[i]:.6g} and {roots[j]:.6g} coincide within {multiplicity_tol:g}"
        )
    slope = np.polyval(np.polyder(denominator), roots)
    weights = -(roots**n) / slope
    abscissa = max(0.0, float(np.max(roots.real))) + 1.0
    logger.debug(f"resolvent n={n}: max Re root {roots.real.max():.4f}")
    return ResolventKernel3D(n=n, roots=roots, weights=weights, abscissa=abscissa)


def apply_resolvent3d(res: ResolventKernel3D, rhs: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """w = g - int_0^t H_n(t - s) g(s) ds"""
    g, single = _as_rows(rhs)
    H = res.evaluate(grid.nodes)
    leak = np.abs(res.imaginary_part(grid.nodes)).max()
    if leak > 1e-8 * max(1.0, np.abs(H).max()):
        raise NumericalError(f"order-{res.n} resolvent is not real on the grid (imaginary part {leak:.3e})")
    omega = np.array([row - gregory_convolution(H, row, grid.dt) for row in g])
    return omega[0] if single else omega


def solve_delay_volterra(n: int, rhs: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """
    w(t) - (-1)^n w(t - 2) - int_{t-2}^t w(s) P_n'(s + 1 - t) ds = g(t), w = 0 for s < 0.

    Marched node by node; the delay and the memory of the window are known
    history at every step.
    """
    g, single = _as_rows(rhs)
    h = grid.dt
    M = grid.steps_in(2.0)
    lags = h * np.arange(M + 1)
    K = eval_legendre(n, 1.0 - lags, deriv=1)
    sign = (-1.0) ** n
    omega = np.zeros_like(g)
    for i in range(grid.count):
        lo = max(0, i - M)
        w = gregory_weights(i - lo + 1)
        diagonal = 1.0 - h * (w[-1] if i > 0 else 0.0) * K[0]
        if abs(diagonal) < 1e-12:
            raise SingularityError(f"delay solve: vanishing diagonal at step {i}")
        history = omega[:, lo:i] @ (w[:-1] * K[i - lo:0:-1]) if i > lo else 0.0
        delayed = omega[:, i - M] if i >= M else 0.0
        omega[:, i] = (g[:, i] + sign * delayed + h * history) / diagonal
    return omega[0] if single else omega


def solve_symmetric_delay(n: int, rhs: np.ndarray, grid: TimeGrid, parity: int) -> np.ndarray:
    """
    Translation density k on [0, 1] from reflected half-time data.

    k lives on [-1, 1] with k(-s) = parity * k(s) and k(+-1) = 0; the modal
    boundary trace differentiated in time gives, for t in [0, 1],
        -(-1)^n parity k(1 - t) - int_{t-1}^{1} k(s) P_n'(s - t) ds = g(t).
    The reflection closes the delay term, so the whole system is dense and is
    solved by one LU factorization. Returns k at s = 0, dt, ..., 1.
    """
    g, single = _as_rows(rhs)
    h = grid.dt
    N = grid.steps_in(1.0)
    if g.shape[1] < N + 1:
        raise ValueError(f"need {N + 1} samples on [0, 1], got {g.shape[1]}")
    coefficient = -((-1.0) ** n) * parity
    A = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        A[i, N - i] += coefficient
        nodes = np.arange(i - N, N + 1)  # s = k h over [t_i - 1, 1]
        w = gregory_weights(len(nodes)) * h
        kernel = eval_legendre(n, h * (nodes - i), deriv=1)
        for k, weight in zip(nodes, w * kernel):
            A[i, abs(k)] -= weight * (parity if k < 0 else 1.0)
    lu = lu_factor(A)
    kappa = lu_solve(lu, g[:, : N + 1].T).T
    return kappa[0] if single else kappa


def _sinh_moment(k: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """int_a^b cosh(k u) du without cancellation"""
    k = abs(k)
    if k == 0:
        return b - a
    return 2.0 * np.cosh(0.5 * k * (a + b)) * np.sinh(0.5 * k * (b - a)) / k


def _sin_moment(k: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """int_a^b cos(k u) du"""
    k = abs(k)
    if k == 0:
        return b - a
    return 2.0 * np.cos(0.5 * k * (a + b)) * np.sin(0.5 * k * (b - a)) / k


def abel_weights(n: int, dt: float, cells: int, window: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product-integration weights per lag cell for piecewise-linear densities.

    Cell c spans lags [(c-1) dt, c dt]; returns (near, far) where `near` multiplies
    the node at lag c-1 and `far` the node at lag c. window='from_zero' uses the
    exterior kernel n T_n(x)/sqrt(x^2-1), x = 1 + lag (x = cosh u); window=
    'sliding_width_2' uses n T_n(s)/sqrt(1-s^2), s = 1 - lag (s = cos u).
    """
    nbar = max(n, 1)
    c = np.arange(1, cells + 1)
    if window == "from_zero":
        x_near, x_far = 1.0 + (c - 1) * dt, 1.0 + c * dt
        a, b = np.arccosh(x_near), np.arccosh(x_far)
        m0 = _sinh_moment(n, a, b)
        m1 = 0.5 * (_sinh_moment(n + 1, a, b) + _sinh_moment(n - 1, a, b))
        far = nbar * (m1 - x_near * m0) / dt
        near = nbar * (x_far * m0 - m1) / dt
    elif window == "sliding_width_2":
        s_near, s_far = 1.0 - (c - 1) * dt, np.maximum(1.0 - c * dt, -1.0)
        a, b = np.arccos(np.clip(s_near, -1, 1)), np.arccos(np.clip(s_far, -1, 1))
        m0 = _sin_moment(n, a, b)
        m1 = 0.5 * (_sin_moment(n + 1, a, b) + _sin_moment(n - 1, a, b))
        near = nbar * (m1 - s_far * m0) / dt
        far = nbar * (s_near * m0 - m1) / dt
    else:
        raise ValueError(f"unknown window {window!r}")
    return near, far


def solve_abel_volterra(n: int, rhs: np.ndarray, grid: TimeGrid, window: str = "from_zero",
                        scale: Optional[float] = None) -> np.ndarray:
    """
    First-kind Abel-type equation int w(s) k(t, s) ds = g(t), marched forward.

    The density is piecewise linear with w(0) = w(dt) on the first cell; a right-hand
    side that does not vanish at t = 0 is flagged with CompatibilityWarning. `scale` is
    the magnitude g(0) is judged against (callers solving order by order pass the
    largest |g| over all orders); it defaults to the largest |g| of this call.
    """
    g, single = _as_rows(rhs)
    if window == "sliding_width_2":
        span = grid.steps_in(2.0)
    elif window == "from_zero":
        span = grid.count - 1
    else:
        raise ValueError(f"unknown window {window!r}")
    near, far = abel_weights(n, grid.dt, max(span, 1), window)
    if near[0] <= 1e-14:
        raise NumericalError(f"Abel solve n={n}: diagonal weight {near[0]:.3e} vanishes", code="ILL_CONDITIONED")

    if scale is None:
        scale = np.max(np.abs(g)) if g.size else 0.0
    if scale > 0 and np.max(np.abs(g[:, 0])) > 1e-6 * scale:
        warnings.warn(
            f"Abel solve n={n}: right-hand side does not vanish at t = 0 ({np.max(np.abs(g[:, 0])):.3e})",
            CompatibilityWarning,
        )

    omega = np.zeros_like(g)
    if grid.count > 1:
        omega[:, 1] = g[:, 1] / (near[0] + far[0])
        omega[:, 0] = omega[:, 1]
    for i in range(2, grid.count):
        L = min(i, span)
        rest = omega[:, i - L:i][:, ::-1] @ far[:L]
        if L > 1:
            rest += omega[:, i - L + 1:i][:, ::-1] @ near[1:L]
        omega[:, i] = (g[:, i] - rest) / near[0]
    return omega[0] if single else omega


def abel_forward(n: int, omega: np.ndarray, grid: TimeGrid, window: str = "from_zero") -> np.ndarray:
    """Apply the discretized first-kind operator to a density (inverse of the solver's march)"""
    w, single = _as_rows(omega)
    span = grid.steps_in(2.0) if window == "sliding_width_2" else grid.count - 1
    near, far = abel_weights(n, grid.dt, max(span, 1), window)
    out = np.zeros_like(w)
    for i in range(1, grid.count):
        L = min(i, span)
        out[:, i] = w[:, i - L:i][:, ::-1] @ far[:L] + w[:, i - L + 1:i + 1][:, ::-1] @ near[:L]
    return out[0] if single else out


@dataclass(frozen=True)
class ResolventKernel2D:
    """Twice-integrated 2D resolvent R(t) on a grid, with its truncation estimate"""

    n: int
    dt: float
    samples: np.ndarray
    truncation_estimate: np.ndarray


def exterior_kernel_transform(n: int, p: np.ndarray) -> np.ndarray:
    """
    Laplace transform of n T_n(1 + t)/sqrt((1 + t)^2 - 1).

    Assembled from the power coefficients of T_n with L[x^j / sqrt(x^2-1)] = (-d/dp)^j K_0(p)
    and (-d/dp)^j K_0 = 2^-j sum_i C(j, i) K_{2i-j}; the shift x = 1 + t gives the e^p factor.
    """
    p = np.asarray(p, dtype=complex)
    power = np.polynomial.chebyshev.cheb2poly([0] * n + [1])
    total = np.zeros_like(p)
    for j, a_j in enumerate(power):
        if a_j == 0.0:
            continue
        derivative = sum(math.comb(j, i) * kve(abs(2 * i - j), p) for i in range(j + 1)) / 2.0**j
        total += a_j * derivative
    return max(n, 1) * total


def build_resolvent2d(n: int, grid: TimeGrid, sigma: float = 1.0, height: float = 200.0, nodes: int = 20000) -> ResolventKernel2D:
    """
    R = L^-1[1 / (G_n(p) p^2)] by trapezoid quadrature on the Bromwich line Re p = sigma,
    truncated at |Im p| = height. The estimate is the tail of |R_hat| ~ p^(-3/2)
    beyond the truncation, scaled by exp(sigma t)/pi.
    """
    if sigma <= 0:
        raise ValueError("Bromwich abscissa must be positive")
    y = np.linspace(0.0, height, nodes)
    p = sigma + 1j * y
    r_hat = 1.0 / (exterior_kernel_transform(n, p) * p * p)
    t = grid.nodes
    integral = np.empty(len(t))
    for start in range(0, len(t), 64):
        chunk = t[start:start + 64]
        integrand = np.real(r_hat[None, :] * np.exp(1j * np.outer(chunk, y)))
        integral[start:start + 64] = trapezoid(integrand, y, axis=1)
    samples = np.exp(sigma * t) / np.pi * integral
    tail = np.exp(sigma * t) / np.pi * 2.0 * height * abs(r_hat[-1])
    logger.debug(f"2D resolvent n={n}: truncation estimate {tail.max():.3e}")
    return ResolventKernel2D(n=n, dt=grid.dt, samples=samples, truncation_estimate=tail)


def apply_resolvent2d(kernel: ResolventKernel2D, rhs: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """w = d^2/dt^2 int_0^t R(t - s) g(s) ds"""
    g, single = _as_rows(rhs)
    out = []
    for row in g:
        conv = gregory_convolution(kernel.samples[: grid.count], row, grid.dt)
        out.append(np.gradient(np.gradient(conv, grid.dt), grid.dt))
    omega = np.array(out)
    return omega[0] if single else omega
