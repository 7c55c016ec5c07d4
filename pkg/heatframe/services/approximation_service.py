import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .frame_service import FrameSystem, transform
from .model_space_service import SpectralModel
from ..models.errors import ContractError, ParameterError
from ..models.spectral_data import ApproxCurve, JacksonReport, JacksonStatus, TransformDirection
from ..utils.numerics import decades, loglog_slope

logger = logging.getLogger(__name__)

NOISE_RATIO = 1e-10
JACKSON_TOLERANCE = 0.15


def smoothness_tau(s: float, p: float, d: float) -> float:
    """tau with 1/tau = s/d + 1/p."""
    return 1.0 / (s / d + 1.0 / p)


def _coefficients(frame: FrameSystem, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] == frame.model.resolution:
        return frame.model.analyze(f)
    if f.shape[0] != frame.model.size:
        raise ContractError(f"function of length {f.shape[0]} does not live on {frame.model.label}")
    return f


def _terms(frame: FrameSystem, coefficients: np.ndarray, p: float):
    analysis = transform(frame, coefficients, TransformDirection.ANALYZE_DUAL).values
    return analysis, np.abs(analysis) * frame.element_norms(p)


def btau_norm(f, frame: FrameSystem, s: float, p: float) -> float:
    """N(f) = (sum_xi ||<f, psi~_xi> psi_xi||_p^tau)^(1/tau)."""
    if not 1 <= p < np.inf:
        raise ParameterError(f"B~_tau norms need 1 <= p < inf, got {p}")
    tau = smoothness_tau(s, p, frame.model.dim_d)
    _, terms = _terms(frame, _coefficients(frame, f), p)
    return float(np.sum(terms ** tau) ** (1.0 / tau))


def _greedy_curve(model: SpectralModel, coefficients: np.ndarray, contributions: np.ndarray,
                  order: np.ndarray, p: float, n_max: int) -> np.ndarray:
    """||f - G_n||_p for the partial sums G_n along a fixed rearrangement."""
    partial = np.cumsum(contributions[order[:n_max]], axis=0)
    residuals = np.vstack([coefficients, coefficients - partial])
    values = residuals @ model.basis.T
    return np.array([model.grid_norm(row, p) for row in values])


def _curve(sigma: np.ndarray, s: float, p: float, d: float) -> ApproxCurve:
    # every G_k with k <= n is an n-term approximant, so the running minimum bounds sigma_n
    return ApproxCurve(n=list(range(sigma.size)), sigma=sigma.tolist(),
                       sigma_best=np.minimum.accumulate(sigma).tolist(), s=s, p=p,
                       tau=smoothness_tau(s, p, d))


def greedy_sigma_curve(f, frame: FrameSystem, p: float, n_max: int, s: float = 1.0) -> ApproxCurve:
    """
    Greedy n-term curve: terms sorted by ||a_xi psi_xi||_p (descending, ties by frame index),
    G_n the partial sums. `sigma` holds the raw residuals ||f - G_n||_p, `sigma_best` their
    running minimum.
    """
    if not frame.has_dual:
        raise ContractError("greedy approximation needs a dual (or tight) frame")
    if n_max > frame.size:
        logger.warning(f"n_max={n_max} exceeds the frame size {frame.size}; clipped")
        n_max = frame.size
    coefficients = _coefficients(frame, f)
    analysis, terms = _terms(frame, coefficients, p)
    order = np.argsort(-terms, kind="stable")
    contributions = analysis[:, None] * frame.primal
    sigma = _greedy_curve(frame.model, coefficients, contributions, order, p, n_max)
    return _curve(sigma, s, p, frame.model.dim_d)


def eigenbasis_curve(model: SpectralModel, coefficients: np.ndarray, p: float, n_max: int,
                     s: float = 1.0) -> ApproxCurve:
    """The same greedy rearrangement over the orthonormal eigenbasis."""
    n_max = min(n_max, model.size)
    norms = np.array([model.grid_norm(column, p) for column in model.basis.T])
    order = np.argsort(-np.abs(coefficients) * norms, kind="stable")
    contributions = np.diag(coefficients)
    sigma = _greedy_curve(model, coefficients, contributions, order, p, n_max)
    return _curve(sigma, s, p, model.dim_d)


def orthonormal_oracle_curve(theta: float, count: int, n_max: int) -> ApproxCurve:
    """
    Closed-form L^2 tail (sum_{m=n+1}^{count} m^(-2 theta))^(1/2) of the coefficient
    sequence a_m = m^(-theta) in any orthonormal system.
    """
    if theta <= 0.5:
        raise ParameterError("oracle curves need theta > 1/2")
    n = np.arange(min(n_max, count) + 1)
    tails = zeta(2 * theta, n + 1) - zeta(2 * theta, count + 1)
    sigma = np.sqrt(np.clip(tails, 0.0, None))
    return ApproxCurve(n=n.tolist(), sigma=sigma.tolist(), sigma_best=sigma.tolist(), s=theta - 0.5,
                       p=2.0, tau=1.0 / theta)


def jackson_slope(curve: ApproxCurve, s: float, d: float) -> JacksonReport:
    """
    Fit log sigma_n (the running best when the curve carries one) against log n above the
    noise floor; pass iff slope <= -s/d + 0.15.
    """
    n = np.asarray(curve.n, dtype=float)
    sigma = np.asarray(curve.sigma if curve.sigma_best is None else curve.sigma_best, dtype=float)
    target = -s / d + JACKSON_TOLERANCE
    start = sigma[0] if n[0] == 0 else sigma.max()
    if start == 0:
        return JacksonReport(slope_hat=float("-inf"), status=JacksonStatus.EXACT, passed=True)

    floor = NOISE_RATIO * start
    positive = n >= 1
    n, sigma = n[positive], sigma[positive]
    hit = np.flatnonzero(sigma <= floor)
    if hit.size:
        last = int(hit[0])
        fit_n, fit_sigma = n[: last + 1], np.maximum(sigma[: last + 1], floor)
        slope = loglog_slope(fit_n, fit_sigma)[0] if fit_n.size >= 2 else float("-inf")
        logger.info(f"Greedy curve reaches the noise floor at n={int(n[last])}: exact recovery")
        return JacksonReport(slope_hat=slope, status=JacksonStatus.EXACT, passed=True,
                             fit_range=[int(fit_n[0]), int(fit_n[-1])])

    if n.size < 5 or n[-1] / n[0] < 10 or decades(sigma) < 0.05:
        logger.warning(f"Jackson fit inconclusive: {n.size} points, flat or short curve")
        return JacksonReport(slope_hat=0.0, status=JacksonStatus.INCONCLUSIVE, passed=False,
                             fit_range=[int(n[0]), int(n[-1])] if n.size else [])

    picks = np.unique(np.geomspace(1, n.size, 40).round().astype(int) - 1)
    slope = loglog_slope(n[picks], sigma[picks])[0]
    passed = slope <= target
    status = JacksonStatus.PASS if passed else JacksonStatus.FAIL
    logger.info(f"Jackson slope {slope:.4f} against target {target:.4f}: {status.value}")
    return JacksonReport(slope_hat=slope, status=status, passed=passed,
                         fit_range=[int(n[0]), int(n[-1])])


def synthetic_besov_function(frame: FrameSystem, s: float, p: float = 2.0, seed: int = 0,
                             per_level: int = 2) -> np.ndarray:
    """
    Sparse multilevel frame expansion sum a_xi psi_xi over levels j < J with
    ||a_xi psi_xi||_p ~ b^(-j s); returned as eigen-coefficients.
    """
    rng = np.random.default_rng(seed)
    norms = frame.element_norms(p)
    a = np.zeros(frame.size)
    for level in frame.levels[: max(frame.J, 1)]:
        # levels whose band holds no eigenvalue have only zero elements
        candidates = np.flatnonzero(norms[level.slice] > 0) + level.offset
        if not candidates.size:
            continue
        picks = rng.choice(candidates, size=min(per_level, candidates.size), replace=False)
        signs = rng.choice([-1.0, 1.0], size=picks.size)
        a[picks] = signs * (1 + rng.random(picks.size)) * frame.b ** (-level.j * s) / norms[picks]
    return transform(frame, a, TransformDirection.SYNTHESIZE)


def prefactor_check(family: Sequence[np.ndarray], frame: FrameSystem, s: float, p: float,
                    n_max: int) -> Dict[str, float]:
    """max_n sigma_n n^(s/d) / N(f) per family member, and the worst of them."""
    d = frame.model.dim_d
    constants = []
    for f in family:
        curve = greedy_sigma_curve(f, frame, p, n_max, s)
        n = np.asarray(curve.n[1:], dtype=float)
        weighted = np.asarray(curve.sigma_best[1:]) * n ** (s / d)
        constants.append(float(weighted.max() / btau_norm(f, frame, s, p)))
    return {"c_hat": max(constants), "c_min": min(constants), "count": len(constants)}


def embedding_constant(family: Sequence[np.ndarray], frame: FrameSystem, s: float, p: float) -> float:
    """max ||f||_p / N(f) over the family."""
    ratios = []
    for f in family:
        coefficients = _coefficients(frame, f)
        ratios.append(frame.model.norm(coefficients, p) / btau_norm(coefficients, frame, s, p))
    return float(max(ratios))


def bernstein_ratio(frame: FrameSystem, s: float, p: float, ns: Sequence[int] = (1, 4, 16, 64),
                    seed: int = 0) -> List[Dict[str, float]]:
    """||g||_{B~_tau} / (n^(s/d) ||g||_p) for random n-term g; exploratory output only."""
    rng = np.random.default_rng(seed)
    d = frame.model.dim_d
    candidates = np.flatnonzero(frame.element_norms(p) > 0)
    rows = []
    for n in ns:
        n = min(int(n), candidates.size)
        a = np.zeros(frame.size)
        a[rng.choice(candidates, size=n, replace=False)] = rng.standard_normal(n)
        g = transform(frame, a, TransformDirection.SYNTHESIZE)
        ratio = btau_norm(g, frame, s, p) / (n ** (s / d) * frame.model.norm(g, p))
        rows.append({"n": n, "ratio": float(ratio)})
    return rows


def curve_slope(curve: ApproxCurve, low: int = 1, high: Optional[int] = None) -> float:
    """Plain log-log slope of sigma_n over [low, high]."""
    n = np.asarray(curve.n, dtype=float)
    sigma = np.asarray(curve.sigma, dtype=float)
    keep = (n >= low) & (sigma > 0) & (n <= (n.max() if high is None else high))
    return loglog_slope(n[keep], sigma[keep])[0]
