"""
Needlet-type frames on a SpectralModel.

Elements are stored as spectral coefficient vectors (rows of `primal` / `dual`), so
analysis and synthesis are dense matrix products and are exact on the truncated space.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .cutoff_service import Cutoff, GammaSystem, LPSystem, make_systems
from .model_space_service import SpectralModel
from .net_service import (NetLevel, cubature_weights, maximal_net, sampling_bounds,
                          select_gamma)
from .spectral_service import fit_envelope
from ..config import get_settings
from ..models.errors import ConfigurationError, ContractError, DualConstructionError
from ..models.spectral_data import (Envelope, EnvelopeForm, FrameBoundsReport, FrameVariant,
                                    Provenance, TransformDirection)
from ..utils.numerics import fit_line

logger = logging.getLogger(__name__)

GammaSpec = Union[float, str]


@dataclass(frozen=True, eq=False)
class FrameLevel:
    j: int
    net: NetLevel
    gamma: float
    offset: int
    band: float
    residual_norm: Optional[float] = None
    sampling_epsilon: Optional[float] = None
    active: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.net.size

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.net.size)

    @property
    def epsilon_effective(self) -> Optional[float]:
        return None if self.residual_norm is None else self.residual_norm / 2


class FrameSystem:
    """Indexed frame {psi_xi} (and duals) over levels j = 0..J."""

    def __init__(self, model: SpectralModel, variant: FrameVariant, phi: Cutoff, b: float, J: int,
                 levels: List[FrameLevel], primal: np.ndarray, dual: Optional[np.ndarray] = None,
                 element_weights: Optional[np.ndarray] = None):
        self.model = model
        self.variant = FrameVariant(variant)
        self.phi = phi
        self.b = float(b)
        self.J = int(J)
        self.lp = LPSystem(phi=phi, squared=self.variant == FrameVariant.TIGHT)
        self.gammas = GammaSystem(phi=phi)
        self.levels = levels
        self.primal = primal
        self.dual = dual
        for array in (primal, dual):
            if array is not None:
                array.setflags(write=False)

        self.element_level = np.concatenate([np.full(lv.size, lv.j) for lv in levels])
        self.element_node = np.concatenate([lv.net.center_nodes for lv in levels])
        self.element_cell = np.concatenate([lv.net.cell_measures for lv in levels])
        self.element_weights = self.element_cell if element_weights is None else element_weights
        self.element_center = model.grid.nodes[self.element_node]
        self.element_ball = model.ball_measure(self.element_center, self.b ** (-self.element_level.astype(float)))
        self._norm_cache: Dict[tuple, np.ndarray] = {}

    @property
    def size(self) -> int:
        return int(self.primal.shape[0])

    @property
    def band(self) -> float:
        """Frequencies reproduced exactly: Sigma_{b^J}."""
        return self.b ** self.J

    @property
    def gamma(self) -> List[float]:
        return [lv.gamma for lv in self.levels]

    @property
    def has_dual(self) -> bool:
        return self.dual is not None or self.variant == FrameVariant.TIGHT

    @property
    def analysis_matrix(self) -> np.ndarray:
        if self.variant == FrameVariant.TIGHT:
            return self.primal
        if self.dual is None:
            raise ContractError("frame has no dual system; run build_dual first")
        return self.dual

    @property
    def level_sizes(self) -> List[int]:
        return [lv.size for lv in self.levels]

    def level_multipliers(self, j: int) -> np.ndarray:
        return self.lp.level(j)(self.model.sqrt_eigenvalues)

    def random_function(self, rng: np.random.Generator) -> np.ndarray:
        return self.model.random_band_limited(self.band, rng)

    def evaluate(self, points, dual: bool = False) -> np.ndarray:
        """Element values at points, shape (#elements, #points)."""
        matrix = self.analysis_matrix if dual else self.primal
        return matrix @ self.model.eigenbasis(points).T

    def element_norms(self, p: float, dual: bool = False) -> np.ndarray:
        key = (float(p), dual)
        if key not in self._norm_cache:
            matrix = self.analysis_matrix if dual else self.primal
            values = matrix @ self.model.basis.T
            if np.isinf(p):
                norms = np.abs(values).max(axis=1)
            else:
                norms = (np.abs(values) ** p @ self.model.grid.weights) ** (1.0 / p)
            self._norm_cache[key] = norms
        return self._norm_cache[key]


@dataclass(frozen=True)
class CoefficientSet:
    values: np.ndarray
    provenance: Provenance
    level_sizes: Sequence[int]

    def check_against(self, frame: FrameSystem) -> None:
        if self.values.shape[0] != frame.size or list(self.level_sizes) != frame.level_sizes:
            raise ContractError(
                f"coefficient index set {list(self.level_sizes)} does not match frame {frame.level_sizes}")


def _level_gamma_value(gamma: GammaSpec, model: SpectralModel, lam: float, seed: float) -> float:
    if gamma == "auto":
        return select_gamma(model, lam, epsilon=get_settings().gamma_epsilon, seed=seed)
    return float(gamma)


def build_frame1(model: SpectralModel, phi: Cutoff, b: float, J: int, gamma: GammaSpec = 1.0,
                 seed: float = 0.0) -> FrameSystem:
    """psi_xi = |A_xi|^(1/2) Psi_j(sqrt L)(., xi) on nets at delta_j = gamma b^(-j-2)."""
    top = model.sqrt_eigenvalues[-1]
    if b ** (J + 1) > top * (1 + 1e-12):
        raise ConfigurationError(f"truncation N={model.N} (sqrt(lambda_N)={top:.4g}) "
                                 f"cannot hold band b^(J+1)={b ** (J + 1):.4g}")
    additive, _, _ = make_systems(phi, b, J)

    levels, blocks, offset = [], [], 0
    for j in range(J + 1):
        lam = b ** (j + 2)
        gamma_j = _level_gamma_value(gamma, model, lam, seed)
        net = maximal_net(model, gamma_j / lam, seed)
        multipliers = additive.level(j)(model.sqrt_eigenvalues)
        blocks.append(np.sqrt(net.cell_measures)[:, None] * net.center_basis() * multipliers)
        levels.append(FrameLevel(j=j, net=net, gamma=gamma_j, offset=offset, band=b ** (j + 1)))
        offset += net.size
        logger.info(f"Frame #1 level {j}: gamma={gamma_j:.4g}, {net.size} elements")
    return FrameSystem(model, FrameVariant.FRAME1, additive.phi, b, J, levels, np.vstack(blocks))


def build_dual(frame: FrameSystem) -> FrameSystem:
    """
    Per level: V = Gamma U Gamma with weights omega = |A|/(1+eps), R = Gamma^2 - V,
    T = (I - R)^(-1), psi~_xi = c_eps |A_xi|^(1/2) T[Gamma(., xi)].
    """
    if frame.variant == FrameVariant.TIGHT:
        raise ContractError("tight frames are self-dual")
    model = frame.model
    sqrt_eigs = model.sqrt_eigenvalues
    top = sqrt_eigs[-1]
    if frame.b ** (frame.J + 2) > top * (1 + 1e-12):
        raise ConfigurationError(f"dual construction needs sqrt(lambda_N) >= b^(J+2)={frame.b ** (frame.J + 2):.4g}")

    dual = np.zeros_like(frame.primal)
    levels = []
    for level in frame.levels:
        gamma_cutoff = frame.gammas.level_gamma(level.j)
        g = gamma_cutoff(sqrt_eigs)
        active = np.flatnonzero(g != 0)
        gm = g[active]
        net = level.net
        basis = net.center_basis()[:, active]

        low, high = sampling_bounds(net, gamma_cutoff.support[1])
        epsilon = max(1.0 - low, high - 1.0, 0.0)
        omega = net.cell_measures / (1.0 + epsilon)

        scaled = basis * gm
        v = scaled.T @ (omega[:, None] * scaled)
        residual = np.diag(gm ** 2) - v
        residual = 0.5 * (residual + residual.T)
        residual_norm = float(np.abs(linalg.eigvalsh(residual)).max())
        if residual_norm >= 0.5:
            raise DualConstructionError(
                f"level {level.j}: ||R|| = {residual_norm:.4f} >= 1/2; use a smaller gamma",
                level=level.j, residual_norm=residual_norm)

        columns = linalg.solve(np.eye(active.size) - residual, scaled.T, assume_a="sym")
        scale = np.sqrt(net.cell_measures) / (1.0 + epsilon)
        dual[level.slice][:, active] = (columns * scale).T

        levels.append(FrameLevel(j=level.j, net=net, gamma=level.gamma, offset=level.offset,
                                 band=level.band, residual_norm=residual_norm,
                                 sampling_epsilon=epsilon, active=active, residual=residual))
        logger.info(f"Dual level {level.j}: eps={epsilon:.3e}, ||R||={residual_norm:.3e}")

    return FrameSystem(model, FrameVariant.DUAL, frame.phi, frame.b, frame.J, levels,
                       np.array(frame.primal), dual)


def build_tight(model: SpectralModel, phi: Cutoff, b: float, J: int, gamma: GammaSpec = 1.0,
                seed: float = 0.0) -> FrameSystem:
    """psi_xi = sqrt(w_xi) Psi_j(sqrt L)(., xi) with the squared LP system and cubature on Sigma_{a b^(j+1)}."""
    a = model.polynomial_constant
    needed = model.product_band(b ** (J + 1))
    top = model.sqrt_eigenvalues[-1]
    if needed > top * (1 + 1e-12) or b ** (J + 1) > top:
        raise ConfigurationError(f"truncation N={model.N} cannot hold the product band {needed:.4g}")
    _, squared, _ = make_systems(phi, b, J)

    levels, blocks, weights, offset = [], [], [], 0
    for j in range(J + 1):
        scale = a * b ** (j + 1)
        gamma_j = _level_gamma_value(gamma, model, scale, seed)
        net = maximal_net(model, gamma_j / scale, seed)
        w, report = cubature_weights(net, model.product_band(b ** (j + 1)))
        net = net.with_weights(w, report)
        multipliers = squared.level(j)(model.sqrt_eigenvalues)
        blocks.append(np.sqrt(w)[:, None] * net.center_basis() * multipliers)
        weights.append(w)
        levels.append(FrameLevel(j=j, net=net, gamma=gamma_j, offset=offset, band=b ** (j + 1)))
        offset += net.size
        logger.info(f"Tight level {j}: gamma={gamma_j:.4g}, {net.size} elements, "
                    f"moment residual {report.moment_residual:.2e}")
    return FrameSystem(model, FrameVariant.TIGHT, squared.phi, b, J, levels, np.vstack(blocks),
                       element_weights=np.concatenate(weights))


def build_frame(model: SpectralModel, phi: Cutoff, b: float, J: int, variant: FrameVariant,
                gamma: GammaSpec = 1.0, seed: float = 0.0) -> FrameSystem:
    variant = FrameVariant(variant)
    if variant == FrameVariant.TIGHT:
        return build_tight(model, phi, b, J, gamma, seed)
    frame = build_frame1(model, phi, b, J, gamma, seed)
    return build_dual(frame) if variant == FrameVariant.DUAL else frame


def _as_coefficients(frame: FrameSystem, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.shape[0] == frame.model.size:
        return data
    if data.shape[0] == frame.model.resolution:
        return frame.model.analyze(data)
    raise ContractError(f"function of length {data.shape[0]} is neither spectral nor grid data")


def transform(frame: FrameSystem, data, direction: TransformDirection):
    direction = TransformDirection(direction)
    if direction == TransformDirection.SYNTHESIZE:
        if isinstance(data, CoefficientSet):
            data.check_against(frame)
            values = data.values
        else:
            values = np.asarray(data, dtype=float)
            if values.shape[0] != frame.size:
                raise ContractError(f"{values.shape[0]} coefficients for a frame of {frame.size}")
        return frame.primal.T @ values

    coefficients = _as_coefficients(frame, data)
    if direction == TransformDirection.ANALYZE_DUAL:
        values = frame.analysis_matrix @ coefficients
        provenance = Provenance.ANALYSIS_DUAL
    else:
        values = frame.primal @ coefficients
        provenance = Provenance.ANALYSIS_PRIMAL
    return CoefficientSet(values=values, provenance=provenance, level_sizes=tuple(frame.level_sizes))


def frame_bounds(frame: FrameSystem, trials: int = 100, seed: int = 0,
                 which: str = "primal") -> FrameBoundsReport:
    if trials < 1:
        raise ContractError("frame_bounds needs at least one trial")
    matrix = frame.primal if which == "primal" else frame.analysis_matrix
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(trials):
        f = frame.random_function(rng)
        coefficients = matrix @ f
        ratios.append(float(np.dot(coefficients, coefficients) / np.dot(f, f)))
    report = FrameBoundsReport(lower_hat=min(ratios), upper_hat=max(ratios), trials=trials, which=which)
    logger.info(f"Frame bounds ({frame.variant.value}, {which}): "
                f"[{report.lower_hat:.6f}, {report.upper_hat:.6f}]")
    return report


def reconstruction_error(frame: FrameSystem, f: np.ndarray) -> float:
    """||f - sum <f, psi~_xi> psi_xi||_2 / ||f||_2."""
    rebuilt = frame.primal.T @ (frame.analysis_matrix @ f)
    return float(np.linalg.norm(f - rebuilt) / np.linalg.norm(f))


def kernel_identity_residual(frame: FrameSystem, j: int, pairs: int = 100, seed: int = 0) -> float:
    """
    max |target(x, y) - sum_xi psi_xi(y) psi~_xi(x)| over random pairs, where the target is
    Psi_j(sqrt L) for the dual frame and Psi_j^2(sqrt L) for the tight frame.
    """
    level = frame.levels[j]
    primal = frame.primal[level.slice]
    analysis = frame.analysis_matrix[level.slice]
    multipliers = frame.level_multipliers(j)
    target = multipliers if frame.variant == FrameVariant.DUAL else multipliers ** 2

    rng = np.random.default_rng(seed)
    grid = frame.model.grid.nodes
    x = grid[rng.integers(0, grid.size, pairs)]
    y = grid[rng.integers(0, grid.size, pairs)]
    ex, ey = frame.model.eigenbasis(x), frame.model.eigenbasis(y)
    expected = np.sum(ex * target * ey, axis=1)
    assembled = np.sum((ey @ primal.T) * (ex @ analysis.T), axis=1)
    return float(np.abs(expected - assembled).max())


def neumann_inverse(residual: np.ndarray, tol: float = 1e-12, max_terms: int = 10_000) -> np.ndarray:
    """sum_k R^k, stopped once ||R||^k < tol."""
    norm = float(np.abs(linalg.eigvalsh(0.5 * (residual + residual.T))).max())
    total = np.eye(residual.shape[0])
    term = np.eye(residual.shape[0])
    power = 1.0
    for _ in range(max_terms):
        if power < tol:
            break
        term = term @ residual
        total += term
        power *= norm
    return total


def element_localization(frame: FrameSystem, j: int, dual: bool = False, beta: float = 0.5,
                         elements: int = 6) -> Envelope:
    """Fit |psi_xi(x)| |B(xi, b^-j)|^(1/2) against exp(-kappa (b^j rho(x, xi))^beta)."""
    level = frame.levels[j]
    matrix = frame.analysis_matrix if dual else frame.primal
    picks = np.unique(np.linspace(0, level.size - 1, elements).round().astype(int)) + level.offset
    values = matrix[picks] @ frame.model.basis.T
    ratios, magnitudes = [], []
    for row, element in zip(values, picks):
        node = int(frame.element_node[element])
        ratios.append(frame.b ** j * frame.model.node_distances(node))
        magnitudes.append(np.abs(row) * np.sqrt(frame.element_ball[element]))
    ratios, magnitudes = np.concatenate(ratios), np.concatenate(magnitudes)
    return fit_envelope(ratios, magnitudes, float(magnitudes.max()), EnvelopeForm.SUBEXPONENTIAL,
                        beta=beta, d=frame.model.dim_d)


def element_norm_band(frame: FrameSystem, p: float, dual: bool = False) -> Dict[str, float]:
    """Spread of ||psi_xi||_p / |B(xi, b^-j)|^(1/p - 1/2) over all elements."""
    ratios = frame.element_norms(p, dual) / frame.element_ball ** (1.0 / p - 0.5)
    return {"min": float(ratios.min()), "max": float(ratios.max())}


def count_growth_exponent(frame: FrameSystem) -> float:
    """Fitted g in #X_j ~ b^(j g); the coarsest level is left out when it is saturated by a single center."""
    counts = np.array(frame.level_sizes, dtype=float)
    levels = np.arange(frame.J + 1)
    if counts.size > 2 and counts[0] <= 1:
        counts, levels = counts[1:], levels[1:]
    if counts.size < 2:
        return float(frame.model.dim_d)
    slope, _, _ = fit_line(levels * np.log(frame.b), np.log(counts))
    return slope


def level_count_ratios(frame: FrameSystem, exponent: Optional[float] = None) -> np.ndarray:
    """
    #X_j / b^(j g) per level, g the fitted count growth unless given. Sane nets keep these
    within a factor 2 of each other. On Jacobi spaces the arccos metric makes g close to 1
    while d_hat is near 2 from the endpoint doubling.
    """
    g = count_growth_exponent(frame) if exponent is None else exponent
    counts = np.array(frame.level_sizes, dtype=float)
    return counts / frame.b ** (np.arange(frame.J + 1) * g)
