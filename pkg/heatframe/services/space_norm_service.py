"""
Besov, Triebel-Lizorkin and Sobolev norms of truncated functions.

Functions are passed either as eigen-coefficients (length N + 1) or as grid values
(length = quadrature resolution). Every L^p norm is a quadrature norm on the model grid.
"""
import logging
from math import ceil, log
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from .cutoff_service import LPSystem, make_cutoff
from .frame_service import FrameSystem, transform
from .model_space_service import SpectralModel
from .spectral_service import heat_multiplier
from ..config import get_settings
from ..models.errors import ContractError, DegenerateInputError, ParameterError
from ..models.spectral_data import (CutoffKind, EquivalencePair, EquivalenceReport, Flavor,
                                    NormMethod, NormReport, SpaceParams, SpaceType,
                                    TransformDirection)
from ..utils.numerics import lq_aggregate

logger = logging.getLogger(__name__)

HEAT_NODES_PER_INTERVAL = 8


class SpaceNormService:
    def __init__(self, model: SpectralModel, frame: Optional[FrameSystem] = None):
        self.model = model
        self.frame = frame
        if frame is not None and frame.model is not model:
            raise ContractError("frame was built on a different model")
        self._systems: Dict[Tuple[float, bool], LPSystem] = {}
        logger.info(f"Space norm service on {model.label}"
                    f"{'' if frame is None else f' with {frame.variant.value} frame'}")

    # ------------------------------------------------------------------ inputs

    def coefficients(self, f) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[0] == self.model.size:
            return f
        if f.shape[0] == self.model.resolution:
            return self.model.analyze(f)
        raise ContractError(f"function of length {f.shape[0]} is neither spectral nor grid data")

    def _check(self, params: SpaceParams, space: SpaceType) -> float:
        if not params.p > 0 or not params.q > 0:
            raise ParameterError(f"p and q must lie in (0, inf], got p={params.p}, q={params.q}")
        if space == SpaceType.TRIEBEL_LIZORKIN and np.isinf(params.p):
            raise ParameterError("Triebel-Lizorkin norms need p < inf")
        if params.p < 1:
            logger.debug(f"p={params.p} < 1: quasi-norm")
        return self.model.dim_d if params.d is None else params.d

    def lp_system(self, base: float, squared: bool = False) -> LPSystem:
        key = (float(base), squared)
        if key not in self._systems:
            phi = make_cutoff(CutoffKind.TYPE_A, b=base, epsilon=get_settings().cutoff_epsilon)
            self._systems[key] = LPSystem(phi=phi, squared=squared)
        return self._systems[key]

    def level_count(self, base: float) -> int:
        """Smallest J with base^J >= sqrt(lambda_N): levels 0..J cover the whole truncation."""
        top = float(self.model.sqrt_eigenvalues[-1])
        return max(0, int(ceil(log(max(top, 1.0)) / log(base) - 1e-12)))

    def lp_blocks(self, f, base: float = 2.0, squared: bool = False) -> np.ndarray:
        """Rows j of the eigen-coefficients of phi_j(sqrt L) f."""
        system = self.lp_system(base, squared)
        table = system.multiplier_table(self.model.sqrt_eigenvalues, self.level_count(base))
        return table * self.coefficients(f)

    # ------------------------------------------------------------------ aggregation

    def _ball_weights(self, radii: Sequence[float], s: float, d: float) -> np.ndarray:
        """Rows of |B(x, r)|^(-s/d) over the grid, one per radius."""
        grid = self.model.grid.nodes
        return np.stack([self.model.ball_measure(grid, r) ** (-s / d) for r in radii])

    def _aggregate(self, blocks: np.ndarray, weights: np.ndarray, p: float, q: float,
                   space: SpaceType, quad_weights: Optional[np.ndarray] = None) -> float:
        """
        blocks: (levels, grid) function values, weights broadcast against them.
        B: l^q over levels of L^p norms; F: L^p of the pointwise l^q (optionally with
        integration weights along the level axis).
        """
        terms = np.abs(blocks) * weights
        if quad_weights is not None and not np.isinf(q):
            terms = terms * quad_weights[:, None] ** (1.0 / q)
        grid_weights = self.model.grid.weights
        if space == SpaceType.BESOV:
            if np.isinf(p):
                per_level = terms.max(axis=1)
            else:
                per_level = (np.abs(terms) ** p @ grid_weights) ** (1.0 / p)
            return float(lq_aggregate(per_level, q))
        pointwise = lq_aggregate(terms, q, axis=0)
        return self.model.grid_norm(pointwise, p)

    # ------------------------------------------------------------------ routes

    def _lp_route(self, f, params: SpaceParams, space: SpaceType, base: float, d: float,
                  squared: bool) -> Tuple[float, Dict]:
        blocks = self.lp_blocks(f, base, squared)
        values = self.model.basis @ blocks.T
        levels = np.arange(blocks.shape[0])
        if params.flavor == Flavor.CLASSICAL:
            weights = (base ** (params.s * levels))[:, None]
        else:
            weights = self._ball_weights(base ** (-levels.astype(float)), params.s, d)
        value = self._aggregate(values.T, weights, params.p, params.q, space)
        return value, {"base": base, "levels": int(blocks.shape[0]), "squared": squared}

    def heat_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        """log-t Gauss-Legendre nodes on each [4^-(v+1), 4^-v], v = 0..V, with dt/t weights."""
        top = max(float(self.model.eigenvalues[-1]), 4.0)
        intervals = int(ceil(log(top) / log(4.0)))
        x, w = roots_legendre(HEAT_NODES_PER_INTERVAL)
        width = log(4.0)
        times, weights = [], []
        for v in range(intervals + 1):
            upper = -v * width
            times.append(np.exp(upper - width * (x + 1) / 2))
            weights.append(w * width / 2)
        return np.concatenate(times), np.concatenate(weights)

    def _heat_route(self, f, params: SpaceParams, space: SpaceType, d: float) -> Tuple[float, Dict]:
        coefficients = self.coefficients(f)
        sqrt_eigs = self.model.sqrt_eigenvalues
        grid = self.model.grid.nodes
        m = params.m

        times, quad = self.heat_grid()
        table = np.stack([heat_multiplier(t, m)(sqrt_eigs) for t in times])
        values = (table * coefficients) @ self.model.basis.T
        head = self.model.synthesize(heat_multiplier(1.0, 0)(sqrt_eigs) * coefficients)
        if params.flavor == Flavor.CLASSICAL:
            weights = (times ** (-params.s / 2))[:, None]
            head_weight = 1.0
        else:
            weights = self._ball_weights(np.sqrt(times), params.s, d)
            head_weight = self.model.ball_measure(grid, 1.0) ** (-params.s / d)

        body = self._aggregate(values, weights, params.p, params.q, space, quad_weights=quad)
        value = self.model.grid_norm(head * head_weight, params.p) + body
        return value, {"m": m, "t_nodes": int(times.size), "t_min": float(times.min())}

    def _analysis(self, f) -> np.ndarray:
        if self.frame is None:
            raise ContractError("sequence norms need a frame")
        return transform(self.frame, self.coefficients(f), TransformDirection.ANALYZE_DUAL).values

    def _sequence_route(self, f, params: SpaceParams, space: SpaceType, d: float) -> Tuple[float, Dict]:
        a = np.abs(self._analysis(f))
        frame = self.frame
        s, p, q = params.s, params.p, params.q
        nonclassical = params.flavor == Flavor.NONCLASSICAL

        if space == SpaceType.BESOV:
            scale = frame.element_ball ** (1.0 / p - 0.5)
            if nonclassical:
                scale = scale * frame.element_ball ** (-s / d)
            per_level = []
            for lv in frame.levels:
                terms = scale[lv.slice] * a[lv.slice]
                block = terms.max() if np.isinf(p) else np.sum(terms ** p) ** (1.0 / p)
                per_level.append(block if nonclassical else frame.b ** (s * lv.j) * block)
            return float(lq_aggregate(np.asarray(per_level), q)), {"elements": frame.size}

        rows = []
        for lv in frame.levels:
            cells = lv.net.cell_measures
            height = a[lv.slice] * cells ** (-0.5)
            height = height * (cells ** (-s / d) if nonclassical else frame.b ** (s * lv.j))
            rows.append(lv.net.spread(height, q))
        pointwise = lq_aggregate(np.stack(rows), q, axis=0)
        return self.model.grid_norm(pointwise, p), {"elements": frame.size, "levels": len(rows)}

    def _frame_coeff_route(self, f, params: SpaceParams, d: float) -> Tuple[float, Dict]:
        frame = self.frame
        a = np.abs(self._analysis(f))
        s, p = params.s, params.p
        terms = a * frame.element_norms(p)
        if params.flavor == Flavor.NONCLASSICAL:
            terms = terms * frame.element_ball ** (-s / d)
        per_level = []
        for lv in frame.levels:
            chunk = terms[lv.slice]
            block = chunk.max() if np.isinf(p) else np.sum(chunk ** p) ** (1.0 / p)
            per_level.append(block if params.flavor == Flavor.NONCLASSICAL else frame.b ** (s * lv.j) * block)
        return float(lq_aggregate(np.asarray(per_level), params.q)), {"elements": frame.size}

    def _norm(self, f, params: SpaceParams, method: NormMethod, space: SpaceType) -> NormReport:
        d = self._check(params, space)
        method = NormMethod(method)
        if method == NormMethod.LP_DECOMP:
            value, grid = self._lp_route(f, params, space, 2.0, d, params.squared)
        elif method == NormMethod.PHI_VARIANT:
            base = self.frame.b if self.frame is not None else params.b
            value, grid = self._lp_route(f, params, space, base, d, params.squared)
        elif method == NormMethod.HEAT:
            value, grid = self._heat_route(f, params, space, d)
        elif method == NormMethod.SEQUENCE:
            value, grid = self._sequence_route(f, params, space, d)
        else:
            if space != SpaceType.BESOV:
                raise ParameterError("the frame-coefficient route is defined for Besov norms only")
            if self.frame is None:
                raise ContractError("frame-coefficient norms need a frame")
            value, grid = self._frame_coeff_route(f, params, d)
        logger.debug(f"{space.value}-norm via {method.value} (s={params.s}, p={params.p}, "
                     f"q={params.q}, {params.flavor.value}) = {value:.6g}")
        return NormReport(value=value, method=method, space=space, s=params.s, p=params.p,
                          q=params.q, flavor=params.flavor, grid=grid)

    def besov_norm(self, f, params: SpaceParams, method: NormMethod = NormMethod.LP_DECOMP) -> NormReport:
        return self._norm(f, params, method, SpaceType.BESOV)

    def tl_norm(self, f, params: SpaceParams, method: NormMethod = NormMethod.LP_DECOMP) -> NormReport:
        return self._norm(f, params, method, SpaceType.TRIEBEL_LIZORKIN)

    def sobolev_norm(self, f, s: float, p: float) -> float:
        """||(Id + L)^(s/2) f||_p."""
        if not p > 0:
            raise ParameterError(f"p must be positive, got {p}")
        coefficients = (1.0 + self.model.eigenvalues) ** (s / 2.0) * self.coefficients(f)
        return self.model.norm(coefficients, p)

    # ------------------------------------------------------------------ comparisons

    def _pair_values(self, f, params: SpaceParams, pair: EquivalencePair,
                     space: SpaceType) -> Tuple[float, float]:
        norm = self.besov_norm if space == SpaceType.BESOV else self.tl_norm
        if pair == EquivalencePair.F_P2_VS_HSP:
            lp = self.tl_norm(f, params.model_copy(update={"q": 2.0}), NormMethod.LP_DECOMP).value
            return lp, self.sobolev_norm(f, params.s, params.p)
        other = {EquivalencePair.LP_VS_HEAT: NormMethod.HEAT,
                 EquivalencePair.LP_VS_SEQ: NormMethod.SEQUENCE,
                 EquivalencePair.LP_VS_PHI: NormMethod.PHI_VARIANT}[pair]
        return norm(f, params, NormMethod.LP_DECOMP).value, norm(f, params, other).value

    def equivalence_report(self, family: Sequence[np.ndarray], params: SpaceParams,
                           pair: EquivalencePair, space: SpaceType = SpaceType.BESOV) -> EquivalenceReport:
        if not len(family):
            raise DegenerateInputError("equivalence_report needs a nonempty family")
        pair = EquivalencePair(pair)
        ratios = []
        for index, f in enumerate(family):
            first, second = self._pair_values(f, params, pair, SpaceType(space))
            if first == 0 or second == 0:
                raise DegenerateInputError(f"family member {index} has zero norm under {pair.value}")
            ratios.append(first / second)
        report = EquivalenceReport(pair=pair.value, min_ratio=min(ratios), max_ratio=max(ratios),
                                   count=len(ratios), ratios=ratios)
        logger.info(f"Equivalence {pair.value} ({SpaceType(space).value}): ratios in [{report.min_ratio:.4f}, "
                    f"{report.max_ratio:.4f}], spread {report.spread:.3f}")
        return report

    def embedding_report(self, family: Sequence[np.ndarray], source: SpaceParams,
                         target: SpaceParams, method: NormMethod = NormMethod.LP_DECOMP) -> EquivalenceReport:
        """Ratios ||f||_{target} / ||f||_{source} for nonclassical Besov spaces on the same scaling line."""
        d = self.model.dim_d if source.d is None else source.d
        gap = (source.s / d - 1.0 / source.p) - (target.s / d - 1.0 / target.p)
        if abs(gap) > 1e-12 or source.p > target.p or target.s > source.s:
            raise ParameterError("embedding needs s/d - 1/p = s1/d - 1/p1 with p <= p1 and s1 <= s")
        source = source.model_copy(update={"flavor": Flavor.NONCLASSICAL, "d": d})
        target = target.model_copy(update={"flavor": Flavor.NONCLASSICAL, "d": d})
        ratios = []
        for index, f in enumerate(family):
            denominator = self.besov_norm(f, source, method).value
            if denominator == 0:
                raise DegenerateInputError(f"family member {index} has zero source norm")
            ratios.append(self.besov_norm(f, target, method).value / denominator)
        return EquivalenceReport(pair="embedding", min_ratio=min(ratios), max_ratio=max(ratios),
                                 count=len(ratios), ratios=ratios)

    def quasi_triangle_constant(self, family: Sequence[np.ndarray], params: SpaceParams,
                                method: NormMethod = NormMethod.LP_DECOMP,
                                space: SpaceType = SpaceType.BESOV) -> float:
        """max ||f + g|| / (||f|| + ||g||) over consecutive family pairs."""
        norm = self.besov_norm if SpaceType(space) == SpaceType.BESOV else self.tl_norm
        worst = 0.0
        for f, g in zip(family[:-1], family[1:]):
            f, g = self.coefficients(f), self.coefficients(g)
            total = norm(f, params, method).value + norm(g, params, method).value
            if total > 0:
                worst = max(worst, norm(f + g, params, method).value / total)
        return worst

    # ------------------------------------------------------------------ maximal inequalities

    def maximal_function(self, values: np.ndarray, r: float = 1.0,
                         radii: Optional[Sequence[float]] = None) -> np.ndarray:
        """
        M_r g(x) = sup over balls B containing x of (|B|^-1 int_B |g|^r)^(1/r), with balls
        centered at grid nodes and radii on a geometric ladder up to the diameter.
        """
        model = self.model
        if radii is None:
            spacing = model.diam / model.resolution
            radii = np.geomspace(spacing, 2 * model.diam, 24)
        distances = model.node_distance_matrix()
        weights = model.grid.weights
        mass = weights * np.abs(np.asarray(values)) ** r
        result = np.zeros(model.resolution)
        for radius in radii:
            inside = distances < radius
            averages = (inside @ mass) / (inside @ weights)
            candidate = np.where(inside, averages[:, None], 0.0).max(axis=0)
            result = np.maximum(result, candidate)
        return result ** (1.0 / r)

    def peetre_check(self, ts: Sequence[float] = (4, 8, 16, 32), gamma: float = 0.0, r: float = 1.0,
                     seed: int = 0, samples: int = 32) -> Dict[str, float]:
        """
        For random g in Sigma_t, the largest ratio of the Peetre maximal function
        sup_y |B(y,1/t)|^gamma |g(y)| / (1 + t rho(x,y))^(d/r) to M_r(|B(., 1/t)|^gamma g)(x).
        """
        model = self.model
        d = model.dim_d
        rng = np.random.default_rng(seed)
        grid = model.grid.nodes
        nodes = np.unique(np.linspace(0, model.resolution - 1, samples).round().astype(int))
        constants = {}
        for t in ts:
            g = model.synthesize(model.random_band_limited(t, rng))
            weighted = model.ball_measure(grid, 1.0 / t) ** gamma * g
            maximal = self.maximal_function(weighted, r)
            distances = model.node_distance_matrix(nodes)
            peetre = (np.abs(weighted)[None, :] / (1 + t * distances) ** (d / r)).max(axis=1)
            constants[f"{t:g}"] = float((peetre / maximal[nodes]).max())
        constants["c_hat"] = max(constants.values())
        logger.info(f"Peetre constants: {constants}")
        return constants

    def multiplier_check(self, family: Sequence[np.ndarray], gamma: float = 1.0,
                         ps: Sequence[float] = (1.5, 2.0, 3.0)) -> Dict[str, float]:
        """max ||m(sqrt L) f||_p / ||f||_p for the imaginary power m(u) = (1 + u^2)^(i gamma)."""
        symbol = (1.0 + self.model.eigenvalues) ** (1j * gamma)
        ratios: Dict[str, List[float]] = {f"{p:g}": [] for p in ps}
        for f in family:
            coefficients = self.coefficients(f)
            image = self.model.basis @ (symbol * coefficients)
            values = self.model.synthesize(coefficients)
            for p in ps:
                ratios[f"{p:g}"].append(self.model.grid_norm(image, p) / self.model.grid_norm(values, p))
        return {key: float(max(values)) for key, values in ratios.items()}
