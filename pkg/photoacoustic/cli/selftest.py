#!/usr/bin/env python3
"""
Fast in-process invariant checks of every module, printed as a pass/fail table.
Each check returns the observed error; it passes when the error is below its tolerance.
"""

from typing import Callable, List, Tuple

import numpy as np

from photoacoustic.calculations.forward import CauchyField, radial_oracle, synthesize_observation
from photoacoustic.calculations.harmonics import (
    BoundaryObservation,
    ModalCoefficients,
    analyze,
    ball_grid,
    basis_matrix,
    grid_for,
    mode_indices,
    synthesize,
)
from photoacoustic.calculations.recon2d import beta, beta_envelopes, beta_t, beta_tt
from photoacoustic.calculations.specfun import bessel_zeros, chebyshev_table, eval_legendre
from photoacoustic.calculations.volterra import (
    TimeGrid,
    apply_resolvent3d,
    build_resolvent3d,
    solve_smooth_volterra,
)
from photoacoustic.calculations.xcheck import reflect_and_shift
from photoacoustic.cli.config import parse_config, serialize_config
from photoacoustic.models import ReconConfig

Check = Tuple[str, Callable[[], float], float]


def _legendre_at_one() -> float:
    n = np.arange(21)
    values = np.array([eval_legendre(k, 1.0) for k in n])
    slopes = np.array([eval_legendre(k, 1.0, deriv=1) for k in n])
    return float(max(np.abs(values - 1.0).max(), np.abs(slopes - n * (n + 1) / 2).max()))


def _pell_identity() -> float:
    x = np.linspace(1.0, 3.0, 101)
    T = chebyshev_table("first", 12, x)
    U = chebyshev_table("second", 11, x)
    return float(np.abs(T[1:] ** 2 - (x * x - 1.0) * U**2 - 1.0).max() / np.abs(T[1:] ** 2).max())


def _bessel_half_zeros() -> float:
    zeros = bessel_zeros(0.5, 20)
    return float(np.abs(zeros - np.pi * np.arange(1, 21)).max())


def _harmonic_orthonormality() -> float:
    grid = grid_for(3, 6)
    Y = basis_matrix(grid, mode_indices(3, 6))
    gram = Y.T @ (grid.weights[:, None] * Y)
    return float(np.abs(gram - np.eye(len(gram))).max())


def _analysis_synthesis() -> float:
    rng = np.random.default_rng(7)
    modes = mode_indices(2, 5)
    coeffs = ModalCoefficients(2, 5, 0.1, modes, rng.normal(size=(len(modes), 4)))
    back = analyze(synthesize(coeffs, grid_for(2, 5)), 5)
    return float(np.abs(back.data - coeffs.data).max())


def _first_resolvent() -> float:
    t = np.linspace(0.0, 4.0, 41)
    return float(np.abs(build_resolvent3d(1).evaluate(t) - np.exp(-t)).max())


def _resolvent_vs_direct() -> float:
    grid = TimeGrid(0.01, 201)
    g = grid.nodes**4 * np.exp(-grid.nodes)
    direct = solve_smooth_volterra(lambda lags: eval_legendre(3, 1.0 + lags, deriv=1), g, grid)
    resolved = apply_resolvent3d(build_resolvent3d(3), g, grid)
    return float(np.abs(direct - resolved).max() / np.abs(direct).max())


def _oracle_initial_value() -> float:
    a = lambda r: (1.0 - r * r) ** 3 if r < 1.0 else 0.0
    u, u_t = radial_oracle(a, lambda r: 0.0, 0.4, 0.0)
    return abs(u - a(0.4)) + abs(u_t)


def _reflection_symmetry() -> float:
    grid = grid_for(2, 2)
    times = 0.05 * np.arange(21)
    samples = np.outer(np.ones(grid.n_nodes), np.sin(times) ** 3)
    reflected = reflect_and_shift(BoundaryObservation(grid, 0.05, samples), "a_zero")
    return reflected.symmetry_residual()


def _beta_envelopes() -> float:
    T = 3.0
    env = beta_envelopes(T)
    c = np.linspace(0.0, 2.0, 1000)
    excess = max(
        np.abs(beta(T, c)).max() - env.beta,
        np.abs(beta_t(T, c)).max() - env.beta_t,
        np.abs(beta_tt(T, c)).max() - env.beta_tt,
    )
    return max(float(excess), 0.0)


def _config_round_trip() -> float:
    cfg = ReconConfig.defaults(2)
    again = parse_config(serialize_config(cfg))
    return 0.0 if again == cfg and serialize_config(again) == serialize_config(cfg) else 1.0


def _zero_field() -> float:
    grid = grid_for(2, 2)
    field = CauchyField.zeros(ball_grid(grid, 4))
    obs = synthesize_observation(field, grid, 0.2, 0.05, nmax=2)
    return float(np.abs(obs.samples).max())


CHECKS: List[Check] = [
    ("specfun: P_n(1) = 1, P_n'(1) = n(n+1)/2", _legendre_at_one, 1e-10),
    ("specfun: Pell identity T^2 - (x^2-1)U^2 = 1", _pell_identity, 1e-12),
    ("specfun: zeros of J_1/2 are p*pi", _bessel_half_zeros, 1e-10),
    ("harmonics: orthonormal basis on the sphere grid", _harmonic_orthonormality, 1e-12),
    ("harmonics: analyze(synthesize(c)) = c", _analysis_synthesis, 1e-12),
    ("volterra: H_1(t) = exp(-t)", _first_resolvent, 1e-10),
    ("volterra: resolvent matches direct solve (n = 3)", _resolvent_vs_direct, 1e-5),
    ("forward: zero field gives zero data", _zero_field, 0.0),
    ("forward: radial oracle at t = 0", _oracle_initial_value, 1e-12),
    ("recon2d: kernel envelopes hold at T = 3", _beta_envelopes, 1e-12),
    ("xcheck: reflected data is odd about t = 1", _reflection_symmetry, 0.0),
    ("cli: config round trip", _config_round_trip, 0.0),
]


def run_checks() -> List[Tuple[str, float, float, bool]]:
    rows = []
    for name, check, tol in CHECKS:
        try:
            error = check()
            rows.append((name, error, tol, error <= tol))
        except Exception as e:  # noqa: BLE001
            rows.append((f"{name} ({type(e).__name__}: {e})", float("nan"), tol, False))
    return rows


def cmd_selftest() -> int:
    print("🔄 Running self-test")
    print("=" * 50)
    rows = run_checks()
    for name, error, tol, passed in rows:
        print(f"{'✅' if passed else '❌'} {name:<52} err={error:.2e} tol={tol:.0e}")
    failed = sum(not passed for *_, passed in rows)
    print("=" * 50)
    if failed:
        print(f"❌ {failed} of {len(rows)} checks failed")
        return 1
    print(f"✅ all {len(rows)} checks passed")
    return 0
