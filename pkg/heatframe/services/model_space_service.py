import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.special import betainc, beta as beta_function

from ..models.errors import ConfigurationError, SpectralIndexError
from ..models.spectral_data import DoublingReport, SpaceDescriptor, SpaceKind
from ..utils.numerics import gauss_jacobi, jacobi_mass, jacobi_orthonormal, lp_norm

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


class SpectralModel:
    """
    A model Dirichlet space (M, rho, mu, L) with an explicit truncated eigen-system.

    Torus: [0, 1) with L = -d^2/dx^2, eigenfunctions ordered 1, sqrt2 cos 2pi k x,
    sqrt2 sin 2pi k x. Jacobi: [-1, 1] with weight (1-x)^alpha (1+x)^beta, the arccos
    metric and orthonormal Jacobi polynomials, lambda_k = k(k + alpha + beta + 1).
    """

    def __init__(self, kind: SpaceKind, N: int, alpha: float = 0.0, beta: float = 0.0,
                 resolution: Optional[int] = None):
        if N < 1:
            raise ConfigurationError(f"truncation N must be positive, got {N}")
        if kind == SpaceKind.JACOBI and (alpha <= -1 or beta <= -1):
            raise ConfigurationError(f"Jacobi parameters must exceed -1, got ({alpha}, {beta})")

        self.kind = SpaceKind(kind)
        self.N = int(N)
        self.alpha = float(alpha) if self.kind == SpaceKind.JACOBI else 0.0
        self.beta = float(beta) if self.kind == SpaceKind.JACOBI else 0.0

        if self.kind == SpaceKind.TORUS:
            self.diam = 0.5
            self.measure = 1.0
            frequencies = (np.arange(self.N + 1) + 1) // 2
            self.eigenvalues = (2 * np.pi * frequencies) ** 2
        else:
            self.diam = np.pi
            self.measure = jacobi_mass(self.alpha, self.beta)
            k = np.arange(self.N + 1, dtype=float)
            self.eigenvalues = k * (k + self.alpha + self.beta + 1)
        self.sqrt_eigenvalues = np.sqrt(self.eigenvalues)

        if resolution is None:
            resolution = 1 << int(np.ceil(np.log2(2 * self.N + 2)))
        self.grid = self.quadrature(resolution)
        self.resolution = self.grid.size
        self.basis = self.eigenbasis(self.grid.nodes)
        self.coordinates = self.intrinsic_coordinate(self.grid.nodes)
        for array in (self.eigenvalues, self.sqrt_eigenvalues, self.basis, self.coordinates):
            array.setflags(write=False)
        self._dim_d: Optional[float] = None

        logger.info(f"Built {self.label} model: N={self.N}, resolution={self.resolution}")

    @property
    def label(self) -> str:
        if self.kind == SpaceKind.TORUS:
            return "torus"
        return f"jacobi({self.alpha:g},{self.beta:g})"

    @property
    def size(self) -> int:
        """Dimension of the truncated space (N + 1)."""
        return self.N + 1

    @property
    def descriptor(self) -> SpaceDescriptor:
        return SpaceDescriptor(kind=self.kind, alpha=self.alpha, beta=self.beta, N=self.N,
                               resolution=self.resolution)

    # ------------------------------------------------------------------ spectrum

    def eigenbasis(self, points: ArrayLike, count: Optional[int] = None) -> np.ndarray:
        """Matrix E[i, n] = e_n(points[i]) for n < count (default N + 1)."""
        count = self.size if count is None else count
        x = np.atleast_1d(np.asarray(points, dtype=float))
        if self.kind == SpaceKind.TORUS:
            table = np.empty((x.size, count))
            table[:, 0] = 1.0
            for n in range(1, count):
                k = (n + 1) // 2
                wave = np.cos if n % 2 == 1 else np.sin
                table[:, n] = np.sqrt(2.0) * wave(2 * np.pi * k * x)
            return table
        return jacobi_orthonormal(np.clip(x, -1.0, 1.0), count - 1, self.alpha, self.beta)

    def eigenpair(self, n: int) -> Tuple[float, Callable[[ArrayLike], np.ndarray]]:
        if n < 0 or n > self.N:
            raise SpectralIndexError(f"eigen-index {n} outside 0..{self.N}")

        def evaluate(points: ArrayLike) -> np.ndarray:
            return self.eigenbasis(points, count=n + 1)[:, n]

        return float(self.eigenvalues[n]), evaluate

    def band_mask(self, upper: float, lower: Optional[float] = None) -> np.ndarray:
        """Indices n with lower <= sqrt(lambda_n) <= upper."""
        scale = 1.0 + 1e-12
        mask = self.sqrt_eigenvalues <= upper * scale
        if lower is not None:
            mask &= self.sqrt_eigenvalues >= lower / scale
        return mask

    def product_band(self, lam: float) -> float:
        """Smallest band holding all products of two members of Sigma_lam."""
        inside = np.flatnonzero(self.band_mask(lam))
        top = int(inside.max()) if inside.size else 0
        if self.kind == SpaceKind.TORUS:
            return 2.0 * 2 * np.pi * ((top + 1) // 2)
        k = 2 * top
        return float(np.sqrt(k * (k + self.alpha + self.beta + 1)))

    @property
    def polynomial_constant(self) -> float:
        """The constant a with Sigma_lam * Sigma_lam inside Sigma_{a lam}."""
        if self.kind == SpaceKind.TORUS:
            return 2.0
        c = self.alpha + self.beta + 1
        k = np.arange(1, max(2, self.N // 2 + 1), dtype=float)
        ratios = np.sqrt(2 * k * (2 * k + c) / (k * (k + c)))
        return float(max(2.0, ratios.max()))

    # ------------------------------------------------------------------ geometry

    def intrinsic_coordinate(self, points: ArrayLike) -> np.ndarray:
        """Arc-length coordinate: x on the torus, arccos x on the Jacobi interval."""
        x = np.asarray(points, dtype=float)
        if self.kind == SpaceKind.TORUS:
            return np.mod(x, 1.0)
        return np.arccos(np.clip(x, -1.0, 1.0))

    def distance(self, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        if self.kind == SpaceKind.TORUS:
            gap = np.mod(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)), 1.0)
            return np.minimum(gap, 1.0 - gap)
        return np.abs(self.intrinsic_coordinate(x) - self.intrinsic_coordinate(y))

    def ball_measure(self, x: ArrayLike, r: ArrayLike) -> np.ndarray:
        """mu(B(x, r)) of the open ball."""
        r = np.asarray(r, dtype=float)
        if self.kind == SpaceKind.TORUS:
            return np.minimum(2 * r, 1.0) * np.ones_like(np.asarray(x, dtype=float))
        theta = self.intrinsic_coordinate(x)
        low = np.clip(theta - r, 0.0, np.pi)
        high = np.clip(theta + r, 0.0, np.pi)
        return self._jacobi_cdf(np.cos(low)) - self._jacobi_cdf(np.cos(high))

    def _jacobi_cdf(self, y: np.ndarray) -> np.ndarray:
        """Integral of the Jacobi weight over [-1, y]."""
        a, b = self.beta + 1, self.alpha + 1
        t = np.clip((1 + np.asarray(y, dtype=float)) / 2, 0.0, 1.0)
        return 2 ** (self.alpha + self.beta + 1) * beta_function(a, b) * betainc(a, b, t)

    def geometry(self, x: float, y: float, r: float) -> Tuple[float, float]:
        return float(self.distance(x, y)), float(self.ball_measure(x, r))

    def node_distances(self, index: int) -> np.ndarray:
        """Distances from grid node `index` to every grid node."""
        if self.kind == SpaceKind.TORUS:
            steps = np.abs(np.arange(self.resolution) - index)
            return np.minimum(steps, self.resolution - steps) / self.resolution
        return np.abs(self.coordinates - self.coordinates[index])

    def node_distance_matrix(self, rows: Optional[np.ndarray] = None) -> np.ndarray:
        rows = np.arange(self.resolution) if rows is None else np.asarray(rows)
        return np.stack([self.node_distances(int(i)) for i in rows])

    def nearest_node(self, point: float) -> int:
        return int(np.argmin(self.distance(self.grid.nodes, point)))

    # ------------------------------------------------------------------ quadrature

    def quadrature(self, resolution: int) -> Quadrature:
        if resolution < 2 * self.N + 2:
            raise ConfigurationError(
                f"quadrature resolution {resolution} below 2N+2 = {2 * self.N + 2}")
        if self.kind == SpaceKind.TORUS:
            nodes = np.arange(resolution) / resolution
            weights = np.full(resolution, 1.0 / resolution)
        else:
            nodes, weights = gauss_jacobi(resolution, self.alpha, self.beta)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        return Quadrature(nodes=nodes, weights=weights)

    def orthonormality_error(self) -> float:
        gram = self.basis.T @ (self.grid.weights[:, None] * self.basis)
        return float(np.abs(gram - np.eye(self.size)).max())

    # ------------------------------------------------------------------ functions

    def synthesize(self, coefficients: np.ndarray, points: Optional[ArrayLike] = None) -> np.ndarray:
        """Values of sum_n c_n e_n on the grid, or at the given points."""
        if points is None:
            return self.basis @ coefficients
        return self.eigenbasis(points) @ coefficients

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Eigen-coefficients of grid values by quadrature."""
        return self.basis.T @ (self.grid.weights * np.asarray(values))

    def grid_norm(self, values: np.ndarray, p: float) -> float:
        return lp_norm(values, self.grid.weights, p)

    def norm(self, coefficients: np.ndarray, p: float = 2.0) -> float:
        if p == 2:
            return float(np.linalg.norm(coefficients))
        return self.grid_norm(self.synthesize(coefficients), p)

    def random_band_limited(self, lam: float, rng: np.random.Generator) -> np.ndarray:
        """Random unit-L2 member of Sigma_lam, as eigen-coefficients."""
        coefficients = np.zeros(self.size)
        mask = self.band_mask(lam)
        coefficients[mask] = rng.standard_normal(int(mask.sum()))
        return coefficients / np.linalg.norm(coefficients)

    # ------------------------------------------------------------------ doubling

    def doubling_report(self, samples: int = 2000, seed: int = 0) -> DoublingReport:
        if samples < 1:
            raise ConfigurationError("doubling_report needs at least one sample")
        rng = np.random.default_rng(seed)
        x = self._sample_points(samples, rng)
        r = (self.diam / 3) * 10 ** (-3 * rng.random(samples))
        ratios = self.ball_measure(x, 2 * r) / self.ball_measure(x, r)
        c0_hat = float(ratios.max())
        d_hat = float(np.log2(c0_hat))

        y = self._sample_points(samples, rng)
        comparison = self.ball_measure(x, r) / (
            (1 + self.distance(x, y) / r) ** d_hat * self.ball_measure(y, r))

        report = DoublingReport(c0_hat=c0_hat, d_hat=d_hat, reverse_c_hat=float(ratios.min()),
                                samples=samples, comparison_max=float(comparison.max()))
        logger.info(f"Doubling report for {self.label}: c0={c0_hat:.4f}, d={d_hat:.4f}, "
                    f"reverse={report.reverse_c_hat:.4f}")
        return report

    def _sample_points(self, samples: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == SpaceKind.TORUS:
            return rng.random(samples)
        theta = np.pi * rng.random(samples)
        theta[: min(2, samples)] = [0.0, np.pi][: min(2, samples)]
        return np.cos(theta)

    @property
    def dim_d(self) -> float:
        """Homogeneous dimension measured by doubling_report."""
        if self._dim_d is None:
            self._dim_d = self.doubling_report().d_hat
        return self._dim_d


def build_model(descriptor: SpaceDescriptor) -> SpectralModel:
    return SpectralModel(descriptor.kind, descriptor.N, alpha=descriptor.alpha,
                         beta=descriptor.beta, resolution=descriptor.resolution)
