#!/usr/bin/env python3
"""
Special functions used by the wave-equation kernels.

Legendre and Chebyshev families are evaluated by three-term recurrences so
they stay stable at arguments well above 1 (the exterior kernels see
(T+1)/r). Bessel functions and their zeros come from scipy.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq
from scipy.special import iv, jv

from photoacoustic.errors import DomainError, RootFindingError, SingularityError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MAX_TAYLOR_ORDER = 64


def legendre_table(nmax: int, x: ArrayLike, deriv: int = 0) -> np.ndarray:
    """P_0..P_nmax (or a derivative of them) at x, stacked along axis 0"""
    x = np.asarray(x, dtype=float)
    table = np.empty((nmax + 1,) + x.shape)
    p_prev, p = np.zeros_like(x), np.ones_like(x)
    d1_prev, d1 = np.zeros_like(x), np.zeros_like(x)
    d2_prev, d2 = np.zeros_like(x), np.zeros_like(x)
    for k in range(nmax + 1):
        table[k] = (p, d1, d2)[deriv]
        # P'_{k+1} = P'_{k-1} + (2k+1) P_k, and the same one level up for P''
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d1_next = d1_prev + (2 * k + 1) * p
        d2_next = d2_prev + (2 * k + 1) * d1
        p_prev, p = p, p_next
        d1_prev, d1 = d1, d1_next
        d2_prev, d2 = d2, d2_next
    return table


def eval_legendre(n: int, x: ArrayLike, deriv: int = 0) -> ArrayLike:
    """P_n(x), P_n'(x) or P_n''(x) for any real x"""
    if n < 0 or deriv not in (0, 1, 2):
        raise ValueError(f"need n >= 0 and deriv in (0, 1, 2), got n={n}, deriv={deriv}")
    value = legendre_table(n, x, deriv)[n]
    return value if np.ndim(x) else float(value)


def eval_legendre_antideriv(n: int, x: ArrayLike) -> ArrayLike:
    """Q_{n+1}(x) = integral of P_n from 1 to x, closed form"""
    if n == 0:
        return np.asarray(x, dtype=float) - 1.0 if np.ndim(x) else float(x) - 1.0
    table = legendre_table(n + 1, x)
    value = (table[n + 1] - table[n - 1]) / (2 * n + 1)
    return value if np.ndim(x) else float(value)


def chebyshev_table(kind: str, nmax: int, x: ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    table = np.empty((nmax + 1,) + x.shape)
    prev = np.ones_like(x)
    table[0] = prev
    if nmax == 0:
        return table
    cur = x.copy() if kind == "first" else 2.0 * x
    table[1] = cur
    for k in range(1, nmax):
        prev, cur = cur, 2.0 * x * cur - prev
        table[k + 1] = cur
    return table


def eval_chebyshev(kind: str, n: int, x: ArrayLike) -> ArrayLike:
    """T_n(x) (kind='first') or U_n(x) (kind='second')"""
    if kind not in ("first", "second"):
        raise ValueError(f"kind must be 'first' or 'second', got {kind!r}")
    value = chebyshev_table(kind, n, x)[n]
    return value if np.ndim(x) else float(value)


def eval_psi2d(n: int, x: ArrayLike, deriv: int = 0) -> ArrayLike:
    """
    Radial function of the 2D exterior ansatz.

    Psi_n(x) = sqrt(x^2-1) U_{n-1}(x) for n >= 1 and arccosh(x) for n = 0, so
    Psi_n(cosh t) = sinh(n t) (t for n = 0). deriv=1 gives n T_n(x)/sqrt(x^2-1),
    with the factor n replaced by 1 when n = 0.
    """
    xa = np.asarray(x, dtype=float)
    if deriv == 0:
        root = np.sqrt(np.maximum(xa * xa - 1.0, 0.0))
        if n == 0:
            value = np.arccosh(np.maximum(xa, 1.0))
        else:
            value = root * chebyshev_table("second", n - 1, xa)[n - 1]
    elif deriv == 1:
        if np.any(xa <= 1.0):
            raise SingularityError(f"Psi_{n}' is singular at x = 1 (got min x = {xa.min()})")
        value = max(n, 1) * chebyshev_table("first", n, xa)[n] / np.sqrt(xa * xa - 1.0)
    else:
        raise ValueError(f"deriv must be 0 or 1, got {deriv}")
    return value if np.ndim(x) else float(value)


def eval_psi2d_interior(n: int, s: ArrayLike, deriv: int = 0) -> ArrayLike:
    """
    Real branch on [-1, 1] used by the sliding-window ansatz:
    Psi_n(cos t) = sin(n t) (t for n = 0).
    """
    sa = np.asarray(s, dtype=float)
    theta = np.arccos(np.clip(sa, -1.0, 1.0))
    if deriv == 0:
        value = theta if n == 0 else np.sin(n * theta)
    elif deriv == 1:
        if np.any(np.abs(sa) >= 1.0):
            raise SingularityError(f"interior Psi_{n}' is singular at s = +-1")
        value = -max(n, 1) * np.cos(n * theta) / np.sqrt(1.0 - sa * sa)
    else:
        raise ValueError(f"deriv must be 0 or 1, got {deriv}")
    return value if np.ndim(s) else float(value)


def bessel_j(order: float, x: ArrayLike) -> ArrayLike:
    """J_order(x); half-integer and integer orders alike"""
    value = jv(order, x)
    return value if np.ndim(x) else float(value)


def bessel_ratio(order: float, r: ArrayLike, s: complex) -> np.ndarray:
    """
    Modal transfer function of the ball: I_nu(r s) / (sqrt(r) I_nu(s)).

    This is the Laplace-domain response at radius r to unit boundary data,
    i.e. J_nu(-i r s)/(sqrt(r) J_nu(-i s)) written with the modified function.
    """
    r = np.asarray(r, dtype=float)
    return iv(order, r * s) / (np.sqrt(r) * iv(order, s))


def bessel_zeros(order: float, count: int, step: float = 0.25, max_scan: int = 200000) -> np.ndarray:
    """First `count` positive zeros of J_order, bracketed on a scan and refined with brentq"""
    if count < 1:
        raise ValueError("count must be >= 1")

    def f(x):
        return jv(order, x)

    zeros = []
    a = max(order, step)
    fa = f(a)
    for _ in range(max_scan):
        b = a + step
        fb = f(b)
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0.0:
            try:
                root = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            except (RuntimeError, ValueError) as exc:
                raise RootFindingError(
                    f"bracketing failed for zero {len(zeros) + 1} of J_{order} in [{a}, {b}]: {exc}"
                )
            if abs(f(root)) > 1e-10:
                raise RootFindingError(
                    f"zero {len(zeros) + 1} of J_{order} has residual {abs(f(root)):.2e}"
                )
            zeros.append(root)
        if len(zeros) >= count:
            break
        a, fa = b, fb
    else:
        raise RootFindingError(f"scan exhausted after {len(zeros)} zeros of J_{order}; wanted {count}")
    return np.array(zeros[:count])


@dataclass(frozen=True)
class PolyTaylorAtOne:
    """Taylor coefficients c_k = P_n^(k)(1)/k! of P_n about x = 1"""

    n: int
    coefficients: np.ndarray

    def eval(self, t: Union[ArrayLike, complex]) -> Union[ArrayLike, complex]:
        """P_n(1 + t) by Horner; complex t allowed"""
        return P.polyval(t, self.coefficients)

    def derivatives_at_one(self) -> np.ndarray:
        """P_n^(k)(1) for k = 0..n"""
        factorials = np.array([math.factorial(k) for k in range(self.n + 1)], dtype=float)
        return self.coefficients * factorials


def legendre_taylor_at_one(n: int) -> PolyTaylorAtOne:
    """
    Exact Taylor coefficients of P_n at 1:
    P_n(1 + t) = sum_k C(n, k) C(n + k, k) (t/2)^k.
    Orders above 64 are refused.
    """
    if n < 0 or n > MAX_TAYLOR_ORDER:
        raise DomainError(f"Taylor expansion at 1 supports 0 <= n <= {MAX_TAYLOR_ORDER}, got {n}")
    coefficients = np.array(
        [math.comb(n, k) * math.comb(n + k, k) / 2.0**k for k in range(n + 1)], dtype=float
    )
    return PolyTaylorAtOne(n=n, coefficients=coefficients)
