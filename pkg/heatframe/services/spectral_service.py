import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model_space_service import SpectralModel
from ..config import get_settings
from ..models.errors import FitError, ParameterError, SpectralDomainError
from ..models.spectral_data import ComposeReport, Envelope, EnvelopeForm, SpaceKind
from ..utils.numerics import decades, fit_line, loglog_slope

logger = logging.getLogger(__name__)

Multiplier = Callable[[np.ndarray], np.ndarray]


class KernelOperator:
    """
    The operator f(delta sqrt L) on the truncated eigen-space, stored as its multiplier
    values m_n = f(delta sqrt(lambda_n)). Kernels are exact finite spectral sums.
    """

    def __init__(self, model: SpectralModel, multiplier: Multiplier, delta: float = 1.0,
                 label: str = ""):
        if delta <= 0:
            raise ParameterError(f"delta must be positive, got {delta}")
        with np.errstate(all="ignore"):
            values = np.broadcast_to(
                np.asarray(multiplier(delta * model.sqrt_eigenvalues), dtype=float),
                model.sqrt_eigenvalues.shape).copy()
            at_zero = float(np.asarray(multiplier(np.zeros(1)), dtype=float).ravel()[0])
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise SpectralDomainError(
                f"multiplier undefined at delta*sqrt(lambda_n) for n={bad[:5].tolist()}")
        self._setup(model, values, delta, at_zero, label)

    @classmethod
    def from_values(cls, model: SpectralModel, values: np.ndarray, delta: float = 1.0,
                    at_zero: Optional[float] = None, label: str = "") -> "KernelOperator":
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise SpectralDomainError("multiplier table contains non-finite values")
        op = cls.__new__(cls)
        op._setup(model, values.copy(), delta, values[0] if at_zero is None else at_zero, label)
        return op

    def _setup(self, model, values, delta, at_zero, label):
        self.model = model
        self.multipliers = values
        self.multipliers.setflags(write=False)
        self.delta = float(delta)
        self.at_zero = float(at_zero)
        self.label = label

    @property
    def band(self) -> float:
        """Largest sqrt(lambda_n) carrying a nonzero multiplier; inf if the last one is nonzero."""
        support = np.flatnonzero(self.multipliers != 0)
        if support.size == 0:
            return 0.0
        if support[-1] == self.model.N:
            return float("inf")
        return float(self.model.sqrt_eigenvalues[support[-1]])

    def kernel(self, x, y) -> np.ndarray:
        """K(x_i, y_k) = sum_n m_n e_n(x_i) e_n(y_k)."""
        ex = self.model.eigenbasis(x)
        ey = self.model.eigenbasis(y)
        return (ex * self.multipliers) @ ey.T

    def kernel_rows(self, node_indices: Sequence[int]) -> np.ndarray:
        """Kernel rows K(node_i, .) against every grid node."""
        rows = self.model.basis[np.asarray(node_indices)] * self.multipliers
        return rows @ self.model.basis.T

    def apply(self, coefficients: np.ndarray) -> np.ndarray:
        return self.multipliers * coefficients

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Apply to grid values: quadrature inner products then synthesis."""
        return self.model.synthesize(self.apply(self.model.analyze(values)))

    def compose(self, other: "KernelOperator") -> "KernelOperator":
        return KernelOperator.from_values(self.model, self.multipliers * other.multipliers,
                                          delta=self.delta, at_zero=self.at_zero * other.at_zero,
                                          label=f"{self.label}*{other.label}")


def kernel_operator(model: SpectralModel, multiplier: Multiplier, delta: float,
                    label: str = "") -> KernelOperator:
    return KernelOperator(model, multiplier, delta, label=label)


# ---------------------------------------------------------------------- multipliers

def identity_multiplier(t):
    return np.ones_like(np.asarray(t, dtype=float))


def power_multiplier(k: float) -> Multiplier:
    return lambda t: np.asarray(t, dtype=float) ** k


def gaussian_multiplier(t):
    return np.exp(-np.asarray(t, dtype=float) ** 2)


def heat_multiplier(time: float, order: int = 0) -> Multiplier:
    """s -> (t s^2)^(order/2) exp(-t s^2), i.e. (tL)^(order/2) e^(-tL) in the sqrt(L) variable."""
    def multiplier(s):
        x = time * np.asarray(s, dtype=float) ** 2
        return x ** (order / 2.0) * np.exp(-x)
    return multiplier


def band_limited_wave_multiplier(A: float, order: int = 4) -> Multiplier:
    """
    (sin(A s / 2m) / (A s / 2m))^(2m): even, with Fourier transform a B-spline supported
    in [-A, A], so f(delta sqrt L) has finite propagation speed.
    """
    def multiplier(s):
        return np.sinc(A * np.asarray(s, dtype=float) / (2 * order * np.pi)) ** (2 * order)
    return multiplier


def heat_operator(model: SpectralModel, time: float, order: int = 0) -> KernelOperator:
    return KernelOperator(model, heat_multiplier(time, order), 1.0, label=f"heat(t={time:g})")


# ---------------------------------------------------------------------- checks

def _sample_nodes(model: SpectralModel, samples: int) -> np.ndarray:
    return np.unique(np.linspace(0, model.resolution - 1, samples).round().astype(int))


def markov_residual(op: KernelOperator, samples: int = 16) -> float:
    """max over sampled x of |int K(x, y) dmu(y) - f(0)|."""
    if not np.isfinite(op.at_zero):
        raise SpectralDomainError("Markov residual needs a finite f(0)")
    rows = op.kernel_rows(_sample_nodes(op.model, samples))
    integrals = rows @ op.model.grid.weights
    residual = float(np.abs(integrals - op.at_zero).max())
    logger.debug(f"Markov residual for {op.label}: {residual:.3e}")
    return residual


def _normalized_tail(op: KernelOperator, samples: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """(rho/delta, |K| (|B(x,delta)||B(y,delta)|)^(1/2)) over sampled rows, plus the peak."""
    model = op.model
    nodes = _sample_nodes(model, samples)
    rows = op.kernel_rows(nodes)
    grid = model.grid.nodes
    ball_y = model.ball_measure(grid, op.delta)
    scaled, values = [], []
    peak = 0.0
    for i, node in enumerate(nodes):
        ball_x = model.ball_measure(grid[node], op.delta)
        magnitude = np.abs(rows[i]) * np.sqrt(ball_x * ball_y)
        peak = max(peak, float(magnitude.max()))
        scaled.append(model.node_distances(int(node)) / op.delta)
        values.append(magnitude)
    return np.concatenate(scaled), np.concatenate(values), peak


def fit_envelope(distance_ratio: np.ndarray, magnitude: np.ndarray, peak: float,
                 form: EnvelopeForm, beta: float = 0.5, d: float = 1.0,
                 bins: int = 40, min_points: int = 5) -> Envelope:
    """
    Fit log |K| against (rho/delta)^beta (sub-exponential form) or log(1 + rho/delta)
    (polynomial form) on binned maxima beyond rho = 2 delta and above the noise floor.
    """
    floor = get_settings().noise_floor * peak
    keep = (distance_ratio >= 2.0) & (magnitude > floor)
    if keep.sum() < min_points:
        raise FitError(f"only {int(keep.sum())} kernel samples above the noise floor")
    r, v = distance_ratio[keep], magnitude[keep]
    regressor = r ** beta if form == EnvelopeForm.SUBEXPONENTIAL else np.log1p(r)

    edges = np.linspace(regressor.min(), regressor.max(), bins + 1)
    which = np.clip(np.digitize(regressor, edges) - 1, 0, bins - 1)
    xs, ys = [], []
    for b in range(bins):
        members = which == b
        if members.any():
            top = np.argmax(v[members])
            xs.append(regressor[members][top])
            ys.append(v[members][top])
    if len(xs) < min_points:
        raise FitError(f"only {len(xs)} envelope bins above the noise floor")

    slope, intercept, r2 = fit_line(np.array(xs), np.log(ys))
    envelope = Envelope(form=form, c=float(np.exp(intercept)), r2=r2,
                        decades=decades(np.array(ys)), points=len(xs))
    if form == EnvelopeForm.SUBEXPONENTIAL:
        envelope.kappa = -slope
        envelope.beta = beta
        envelope.flagged = envelope.kappa <= 0 or r2 < 0.9
    else:
        envelope.sigma = -slope
        envelope.flagged = envelope.sigma < d + 1
    if envelope.flagged:
        logger.warning(f"Envelope fit flagged: {envelope.model_dump()}")
    return envelope


def localization_report(op: KernelOperator, form: EnvelopeForm = EnvelopeForm.SUBEXPONENTIAL,
                        beta: float = 0.5, samples: int = 8) -> Envelope:
    distance_ratio, magnitude, peak = _normalized_tail(op, samples)
    return fit_envelope(distance_ratio, magnitude, peak, EnvelopeForm(form), beta=beta,
                        d=op.model.dim_d)


def finite_speed_operator(model: SpectralModel, A: float, delta: float, order: int = 4) -> KernelOperator:
    return KernelOperator(model, band_limited_wave_multiplier(A, order), delta,
                          label=f"finite-speed(A={A:g})")


def estimate_wave_speed(model: SpectralModel, A: float = 1.0, delta: float = 0.2,
                        threshold: float = 1e-6, samples: int = 16) -> float:
    """Largest rho/(delta A) where the band-limited kernel still exceeds threshold * peak."""
    if model.kind == SpaceKind.TORUS:
        return 1.0
    op = finite_speed_operator(model, A, delta)
    nodes = _sample_nodes(model, samples)
    rows = np.abs(op.kernel_rows(nodes))
    peak = rows.max()
    reach = 0.0
    for i, node in enumerate(nodes):
        distances = model.node_distances(int(node))
        alive = rows[i] > threshold * peak
        reach = max(reach, float(distances[alive].max()))
    speed = reach / (delta * A)
    logger.info(f"Estimated wave speed for {model.label}: {speed:.4f}")
    return speed


def finite_speed_residual(model: SpectralModel, A: float, delta: float, margin: float = 0.25,
                          wave_speed: Optional[float] = None,
                          multiplier: Optional[Multiplier] = None,
                          samples: int = 16) -> float:
    """max |K(x, y)| over sampled pairs with rho(x, y) > c delta A (1 + margin)."""
    if wave_speed is None:
        wave_speed = estimate_wave_speed(model, A, delta)
    if multiplier is None:
        op = finite_speed_operator(model, A, delta)
    else:
        op = KernelOperator(model, multiplier, delta, label="custom")
    cone = wave_speed * delta * A * (1 + margin)
    nodes = _sample_nodes(model, samples)
    rows = np.abs(op.kernel_rows(nodes))
    residual = 0.0
    for i, node in enumerate(nodes):
        outside = model.node_distances(int(node)) > cone
        if outside.any():
            residual = max(residual, float(rows[i][outside].max()))
    return residual


def subadditivity_violations(model: SpectralModel, beta: float, triples: int = 10_000,
                             seed: int = 0) -> int:
    """Count sampled (x, y, u) with rho(x,u)^beta + rho(y,u)^beta < rho(x,y)^beta."""
    rng = np.random.default_rng(seed)
    nodes = model.grid.nodes
    x, y, u = (nodes[rng.integers(0, nodes.size, triples)] for _ in range(3))
    lhs = model.distance(x, u) ** beta + model.distance(y, u) ** beta
    rhs = model.distance(x, y) ** beta
    return int(np.sum(lhs < rhs - 1e-12))


def compose_check(op1: KernelOperator, op2: KernelOperator, beta: float = 0.5,
                  triples: int = 10_000, seed: int = 0) -> ComposeReport:
    if op1.model is not op2.model:
        raise ParameterError("compose_check needs operators on the same model")
    if op1.delta == op2.delta:
        product = op1.compose(op2)
    else:
        model = op1.model
        weights = model.grid.weights
        k1 = op1.kernel_rows(np.arange(model.resolution))
        k2 = op2.kernel_rows(np.arange(model.resolution))
        composed = k1 @ (weights[:, None] * k2)
        projected = model.basis.T @ (weights[:, None] * composed) @ (weights[:, None] * model.basis)
        product = KernelOperator.from_values(model, np.diag(projected), delta=op1.delta,
                                             at_zero=op1.at_zero * op2.at_zero,
                                             label=f"{op1.label}o{op2.label}")

    fits = [localization_report(op, EnvelopeForm.SUBEXPONENTIAL, beta) for op in (op1, op2, product)]
    c_natural = fits[2].c / (fits[0].c * fits[1].c)
    violations = subadditivity_violations(op1.model, beta, triples, seed)
    logger.info(f"Composition {product.label}: c_natural={c_natural:.4f}, "
                f"kappa={fits[2].kappa:.4f}, inequality violations={violations}")
    return ComposeReport(c_natural_hat=c_natural, envelope=fits[2],
                         inequality_violations=violations, triples=triples)


def nikolskii_exponent(model: SpectralModel, p: float, lambdas: Sequence[float], cutoff,
                       q: float = np.inf, point: Optional[float] = None) -> Tuple[float, List[float]]:
    """
    Fitted exponent of ||g||_q / ||g||_p over lambda, with g = theta(sqrt(L)/lambda)(., x0)
    a smooth spectral kernel in Sigma_{b lambda}.
    """
    x0 = model.grid.nodes[model.resolution // 3] if point is None else point
    e0 = model.eigenbasis(x0)[0]
    ratios = []
    for lam in lambdas:
        coefficients = cutoff(model.sqrt_eigenvalues / lam) * e0
        values = model.synthesize(coefficients)
        ratios.append(model.grid_norm(values, q) / model.grid_norm(values, p))
    slope, _, _ = loglog_slope(np.asarray(lambdas, dtype=float), np.asarray(ratios))
    return slope, ratios


def kernel_norm_band(model: SpectralModel, theta, p: float, deltas: Sequence[float],
                     samples: int = 8) -> Tuple[float, float]:
    """min / max of ||theta(delta sqrt L)(x, .)||_p / |B(x, delta)|^(1/p - 1) over x and delta."""
    nodes = _sample_nodes(model, samples)
    ratios = []
    for delta in deltas:
        op = KernelOperator(model, theta, delta)
        rows = op.kernel_rows(nodes)
        for i, node in enumerate(nodes):
            ball = float(model.ball_measure(model.grid.nodes[node], delta))
            ratios.append(model.grid_norm(rows[i], p) / ball ** (1.0 / p - 1.0))
    return float(min(ratios)), float(max(ratios))


def davies_gaffney_constant(model: SpectralModel, first: Tuple[float, float],
                            second: Tuple[float, float], times: Sequence[float]) -> Dict[str, float]:
    """
    For indicator functions of two balls, the largest c with
    |<e^(-tL) f1, f2>| <= exp(-c dist^2 / t) ||f1|| ||f2|| over the sampled times.
    """
    grid = model.grid.nodes
    f1 = (model.distance(grid, first[0]) < first[1]).astype(float)
    f2 = (model.distance(grid, second[0]) < second[1]).astype(float)
    gap = float(model.distance(first[0], second[0])) - first[1] - second[1]
    if gap <= 0:
        raise ParameterError("Davies-Gaffney check needs separated balls")
    c1, c2 = model.analyze(f1), model.analyze(f2)
    scale = model.grid_norm(f1, 2) * model.grid_norm(f2, 2)
    constants = {}
    for t in times:
        pairing = abs(float(np.sum(np.exp(-t * model.eigenvalues) * c1 * c2))) / scale
        constants[f"{t:g}"] = float(-t * np.log(max(pairing, 1e-300)) / gap ** 2)
    constants["c_hat"] = min(constants.values())
    return constants
