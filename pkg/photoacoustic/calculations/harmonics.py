#!/usr/bin/env python3
"""
Angular analysis and synthesis of boundary data.

3D uses real, orthonormal spherical harmonics on a Gauss-Legendre (in cos theta)
x uniform-azimuth grid; 2D uses sin/cos circular harmonics on a uniform grid.
Mode indices: 3D (n, m) with m = -n..n; 2D (n, 1) for sin(n phi), n >= 1, and
(n, 2) for cos(n phi). Every module reads its basis from here.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from scipy.special import sph_harm

from photoacoustic.errors import ResolutionError, SeriesLengthError

logger = logging.getLogger(__name__)

Mode = Tuple[int, int]


@dataclass(frozen=True)
class AngularGrid:
    dimension: int
    phi: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.empty(0))
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_theta(self) -> int:
        return len(self.theta) if self.dimension == 3 else 0

    @property
    def n_phi(self) -> int:
        return len(self.phi)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    def angles(self) -> Tuple[np.ndarray, np.ndarray]:
        """(polar, azimuth) per node; polar is empty in 2D. Azimuth runs fastest."""
        if self.dimension == 2:
            return np.empty(0), self.phi.copy()
        polar = np.repeat(self.theta, self.n_phi)
        azimuth = np.tile(self.phi, self.n_theta)
        return polar, azimuth

    def points(self) -> np.ndarray:
        """Unit vectors of the nodes, shape (n_nodes, dimension)"""
        polar, azimuth = self.angles()
        if self.dimension == 2:
            return np.stack([np.cos(azimuth), np.sin(azimuth)], axis=1)
        return np.stack(
            [np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)], axis=1
        )

    def describe(self) -> Dict[str, int]:
        return {"n_theta": self.n_theta, "n_phi": self.n_phi}


def sphere_grid(n_theta: int, n_phi: int) -> AngularGrid:
    """Gauss-Legendre nodes in cos(theta) times a uniform azimuth grid"""
    if n_theta < 1 or n_phi < 2 or n_phi % 2:
        raise ResolutionError(f"sphere grid needs n_theta >= 1 and even n_phi >= 2, got {n_theta}x{n_phi}")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x[::-1])
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    weights = np.repeat(w[::-1], n_phi) * (2.0 * np.pi / n_phi)
    return AngularGrid(dimension=3, phi=phi, theta=theta, weights=weights)


def circle_grid(n_phi: int) -> AngularGrid:
    if n_phi < 2 or n_phi % 2:
        raise ResolutionError(f"circle grid needs an even n_phi >= 2, got {n_phi}")
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return AngularGrid(dimension=2, phi=phi, weights=np.full(n_phi, 2.0 * np.pi / n_phi))


def grid_for(dimension: int, nmax: int, n_theta: int = 0, n_phi: int = 0) -> AngularGrid:
    """Smallest comfortable grid for band nmax unless sizes are given"""
    n_phi = n_phi or 2 * nmax + 4
    n_phi += n_phi % 2
    if dimension == 2:
        return circle_grid(n_phi)
    return sphere_grid(n_theta or nmax + 2, n_phi)


def check_resolution(grid: AngularGrid, nmax: int):
    if grid.n_phi < 2 * nmax + 2:
        raise ResolutionError(f"n_phi = {grid.n_phi} violates n_phi >= 2*N_max+2 = {2 * nmax + 2}")
    if grid.dimension == 3 and grid.n_theta < nmax + 1:
        raise ResolutionError(f"n_theta = {grid.n_theta} violates n_theta >= N_max+1 = {nmax + 1}")


def mode_indices(dimension: int, nmax: int) -> List[Mode]:
    if dimension == 3:
        return [(n, m) for n in range(nmax + 1) for m in range(-n, n + 1)]
    modes = []
    for n in range(nmax + 1):
        if n >= 1:
            modes.append((n, 1))
        modes.append((n, 2))
    return modes


def harmonic_values(dimension: int, modes: Sequence[Mode], polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    """Basis values at the given angles, shape (n_points, n_modes)"""
    azimuth = np.asarray(azimuth, dtype=float)
    out = np.empty((azimuth.size, len(modes)))
    if dimension == 2:
        for col, (n, m) in enumerate(modes):
            if n == 0:
                out[:, col] = 1.0 / np.sqrt(2.0 * np.pi)
            elif m == 1:
                out[:, col] = np.sin(n * azimuth) / np.sqrt(np.pi)
            else:
                out[:, col] = np.cos(n * azimuth) / np.sqrt(np.pi)
        return out
    polar = np.asarray(polar, dtype=float)
    rt2 = np.sqrt(2.0)
    # scipy carries the Condon-Shortley phase; (-1)^m removes it
    for col, (n, m) in enumerate(modes):
        if m == 0:
            out[:, col] = np.real(sph_harm(0, n, azimuth, polar))
        elif m > 0:
            out[:, col] = rt2 * (-1) ** m * np.real(sph_harm(m, n, azimuth, polar))
        else:
            out[:, col] = rt2 * (-1) ** m * np.imag(sph_harm(-m, n, azimuth, polar))
    return out


def harmonics_at_points(dimension: int, modes: Sequence[Mode], points: np.ndarray) -> np.ndarray:
    """Basis values at arbitrary (nonzero) points, using their directions"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    azimuth = np.arctan2(points[:, 1], points[:, 0])
    if dimension == 2:
        return harmonic_values(2, modes, np.empty(0), azimuth)
    norm = np.linalg.norm(points, axis=1)
    safe = np.where(norm > 0, norm, 1.0)
    polar = np.arccos(np.clip(points[:, 2] / safe, -1.0, 1.0))
    return harmonic_values(3, modes, polar, azimuth)


def basis_matrix(grid: AngularGrid, modes: Sequence[Mode]) -> np.ndarray:
    polar, azimuth = grid.angles()
    return harmonic_values(grid.dimension, modes, polar, azimuth)


def real_harmonic(n: int, m: int, grid: AngularGrid) -> np.ndarray:
    return basis_matrix(grid, [(n, m)])[:, 0]


@dataclass
class BoundaryObservation:
    """Pressure samples F[node, time] on the unit sphere/circle"""

    grid: AngularGrid
    dt: float
    samples: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.samples.ndim != 2 or self.samples.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"samples must be (n_nodes={self.grid.n_nodes}, n_times), got {self.samples.shape}"
            )
        if self.samples.shape[1] < 2:
            raise ValueError("an observation needs at least two time samples")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("observation samples must be finite")

    @property
    def dimension(self) -> int:
        return self.grid.dimension

    @property
    def n_times(self) -> int:
        return self.samples.shape[1]

    @property
    def T(self) -> float:
        return (self.n_times - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_times)

    def truncated(self, T: float) -> "BoundaryObservation":
        """Samples on [0, T] (T rounded to the grid)"""
        count = int(round(T / self.dt)) + 1
        if count > self.n_times:
            raise ValueError(f"cannot truncate to T={T}: observation ends at {self.T}")
        return BoundaryObservation(self.grid, self.dt, self.samples[:, :count].copy(), self.provenance)


@dataclass
class ModalCoefficients:
    """Time series F_n^m(t_k), one row per mode in `modes` order"""

    dimension: int
    nmax: int
    dt: float
    modes: List[Mode]
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape[0] != len(self.modes):
            raise ValueError(f"{len(self.modes)} modes but {self.data.shape[0]} series")

    def __getitem__(self, mode: Mode) -> np.ndarray:
        return self.data[self.modes.index(mode)]

    def __iter__(self) -> Iterator[Tuple[Mode, np.ndarray]]:
        return iter(zip(self.modes, self.data))

    @property
    def n_times(self) -> int:
        return self.data.shape[1]

    def orders(self) -> List[int]:
        return sorted({n for n, _ in self.modes})

    def rows_of_order(self, n: int) -> List[int]:
        return [i for i, (k, _) in enumerate(self.modes) if k == n]

    @classmethod
    def zeros(cls, dimension: int, nmax: int, dt: float, n_times: int) -> "ModalCoefficients":
        modes = mode_indices(dimension, nmax)
        return cls(dimension, nmax, dt, modes, np.zeros((len(modes), n_times)))


def analyze(obs: BoundaryObservation, nmax: int) -> ModalCoefficients:
    """Project F(., t_k) on the real harmonic basis up to order nmax"""
    check_resolution(obs.grid, nmax)
    modes = mode_indices(obs.dimension, nmax)
    weighted = basis_matrix(obs.grid, modes) * obs.grid.weights[:, None]
    data = weighted.T @ obs.samples
    logger.debug(f"analyzed {obs.n_times} time samples into {len(modes)} modes")
    return ModalCoefficients(obs.dimension, nmax, obs.dt, modes, data)


def synthesize(coeffs: ModalCoefficients, grid: AngularGrid) -> BoundaryObservation:
    """Pointwise sum of F_n^m(t) Y_n^m over the grid nodes"""
    if grid.dimension != coeffs.dimension:
        raise ValueError(f"grid is {grid.dimension}D but coefficients are {coeffs.dimension}D")
    samples = basis_matrix(grid, coeffs.modes) @ coeffs.data
    return BoundaryObservation(grid, coeffs.dt, samples)


_D1_START = np.array([[-25, 48, -36, 16, -3], [-3, -10, 18, -6, 1]]) / 12.0
_D2_START = np.array([[45, -154, 214, -156, 61, -10], [10, -15, -4, 14, -6, 1]]) / 12.0


def differentiate_series(series: np.ndarray, order: int, dt: float) -> np.ndarray:
    """
    Fourth-order finite-difference derivative along the last axis.

    Centered 5-point stencils inside, one-sided stencils of the same order at the
    first and last two samples. Needs at least 5 samples for order 1 and 6 for order 2.
    """
    f = np.asarray(series, dtype=float)
    n = f.shape[-1]
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    need = 5 if order == 1 else 6
    if n < need:
        raise SeriesLengthError(f"order-{order} derivative needs >= {need} samples, got {n}")

    out = np.empty_like(f)
    if order == 1:
        out[..., 2:-2] = (f[..., :-4] - 8 * f[..., 1:-3] + 8 * f[..., 3:-1] - f[..., 4:]) / (12.0 * dt)
        width = _D1_START.shape[1]
        for row in range(2):
            out[..., row] = f[..., :width] @ _D1_START[row] / dt
            out[..., n - 1 - row] = -(f[..., ::-1][..., :width] @ _D1_START[row]) / dt
    else:
        out[..., 2:-2] = (
            -f[..., :-4] + 16 * f[..., 1:-3] - 30 * f[..., 2:-2] + 16 * f[..., 3:-1] - f[..., 4:]
        ) / (12.0 * dt * dt)
        width = _D2_START.shape[1]
        for row in range(2):
            out[..., row] = f[..., :width] @ _D2_START[row] / (dt * dt)
            out[..., n - 1 - row] = f[..., ::-1][..., :width] @ _D2_START[row] / (dt * dt)
    return out


@dataclass(frozen=True)
class BallGrid:
    """Gauss-Legendre radii on (0, 1) times an angular grid"""

    radii: np.ndarray
    radial_weights: np.ndarray
    angular: AngularGrid

    @property
    def dimension(self) -> int:
        return self.angular.dimension

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.angular.n_nodes, len(self.radii))

    def weights(self) -> np.ndarray:
        """Volume quadrature weights, shape (n_angular, n_r)"""
        return self.angular.weights[:, None] * self.radial_weights[None, :]

    def points(self) -> np.ndarray:
        """Cartesian node coordinates, shape (n_angular, n_r, dimension)"""
        return self.angular.points()[:, None, :] * self.radii[None, :, None]


def ball_grid(angular: AngularGrid, n_r: int) -> BallGrid:
    x, w = np.polynomial.legendre.leggauss(n_r)
    radii = 0.5 * (x + 1.0)
    power = angular.dimension - 1
    radial_weights = 0.5 * w * radii**power
    return BallGrid(radii=radii, radial_weights=radial_weights, angular=angular)


def analyze_ball(values: np.ndarray, ball: BallGrid, nmax: int) -> Tuple[List[Mode], np.ndarray]:
    """Angular projection at every radius: profiles of shape (n_modes, n_r)"""
    check_resolution(ball.angular, nmax)
    modes = mode_indices(ball.dimension, nmax)
    weighted = basis_matrix(ball.angular, modes) * ball.angular.weights[:, None]
    return modes, weighted.T @ np.asarray(values, dtype=float)


def synthesize_ball(modes: Sequence[Mode], profiles: np.ndarray, ball: BallGrid) -> np.ndarray:
    """Field values (n_angular, n_r) from modal radial profiles"""
    return basis_matrix(ball.angular, modes) @ np.asarray(profiles, dtype=float)


def group_by_order(modes: Sequence[Mode]) -> Dict[int, List[int]]:
    groups: Dict[int, List[int]] = {}
    for i, (n, _) in enumerate(modes):
        groups.setdefault(n, []).append(i)
    return groups
