"""
Numerical helpers shared by the services: quadrature L^p norms, l^q aggregation,
orthonormal Jacobi evaluation and regression fits.
"""
import logging
from typing import Tuple

import numpy as np
from scipy.special import gammaln, roots_jacobi
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

logger = logging.getLogger(__name__)


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """L^p (quasi-)norm of grid values against quadrature weights; p = inf is the grid max."""
    magnitude = np.abs(np.asarray(values))
    if np.isinf(p):
        return float(magnitude.max()) if magnitude.size else 0.0
    return float(np.sum(weights * magnitude ** p) ** (1.0 / p))


def lq_aggregate(terms: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """l^q (quasi-)norm along an axis; q = inf is the sup."""
    magnitude = np.abs(terms)
    if np.isinf(q):
        return magnitude.max(axis=axis)
    return np.sum(magnitude ** q, axis=axis) ** (1.0 / q)


def jacobi_mass(alpha: float, beta: float) -> float:
    """Total mass of (1 - x)^alpha (1 + x)^beta on [-1, 1]."""
    log_mass = ((alpha + beta + 1) * np.log(2.0) + gammaln(alpha + 1) + gammaln(beta + 1)
                - gammaln(alpha + beta + 2))
    return float(np.exp(log_mass))


NEWTON_STEPS = 6


def _recurrence_coefficients(degree: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients of x p_i = s_{i+1} p_{i+1} + c_i p_i + s_i p_{i-1} for the orthonormal
    Jacobi family: centers c_0..c_{degree-1} and off-diagonals s_1..s_degree.
    """
    a, b = float(alpha), float(beta)
    centers = np.zeros(max(degree, 1))
    scales = np.zeros(max(degree, 1))
    centers[0] = (b - a) / (a + b + 2)
    scales[0] = 2 / (a + b + 2) * np.sqrt((a + 1) * (b + 1) / (a + b + 3))
    for i in range(1, degree):
        h = 2 * i + a + b
        centers[i] = (b * b - a * a) / h / (h + 2)
        scales[i] = 2 / (h + 2) * np.sqrt((i + 1) * (i + 1 + a + b) * (i + 1 + a) * (i + 1 + b)
                                          / (h + 1) / (h + 3))
    return centers[:degree], scales[:degree]


def jacobi_orthonormal(x: np.ndarray, degree: int, alpha: float, beta: float) -> np.ndarray:
    """
    Orthonormal Jacobi polynomials p_0..p_degree at x, as a (len(x), degree + 1) matrix,
    via the symmetric three-term recurrence.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    table = np.zeros((x.size, degree + 1))
    table[:, 0] = 1.0 / np.sqrt(jacobi_mass(alpha, beta))
    centers, scales = _recurrence_coefficients(degree, alpha, beta)
    for i in range(degree):
        previous = scales[i - 1] * table[:, i - 1] if i > 0 else 0.0
        table[:, i + 1] = ((x - centers[i]) * table[:, i] - previous) / scales[i]
    return table


def _newton_data(x: np.ndarray, degree: int, alpha: float, beta: float
                 ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """p_degree(x), p_degree'(x) and sum_{k < degree} p_k(x)^2, in one recurrence sweep."""
    centers, scales = _recurrence_coefficients(degree, alpha, beta)
    value = np.full(x.size, 1.0 / np.sqrt(jacobi_mass(alpha, beta)))
    slope = np.zeros(x.size)
    value_prev = np.zeros(x.size)
    slope_prev = np.zeros(x.size)
    squares = np.zeros(x.size)
    for i in range(degree):
        squares += value ** 2
        back = scales[i - 1] if i > 0 else 0.0
        value_next = ((x - centers[i]) * value - back * value_prev) / scales[i]
        slope_next = ((x - centers[i]) * slope + value - back * slope_prev) / scales[i]
        value_prev, value = value, value_next
        slope_prev, slope = slope, slope_next
    return value, slope, squares


def gauss_jacobi(resolution: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Jacobi nodes (ascending) and weights, exact for degree <= 2*resolution - 1.

    Starting from scipy's nodes, each node is Newton-polished on the orthonormal recurrence
    and the weights are the Christoffel numbers 1 / sum_{k < resolution} p_k(x_i)^2, so the
    rule is consistent with the basis it integrates to round-off.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    nodes, _ = roots_jacobi(resolution, alpha, beta)
    nodes = np.sort(nodes)
    for _ in range(NEWTON_STEPS):
        value, slope, _ = _newton_data(nodes, resolution, alpha, beta)
        step = value / slope
        nodes = np.clip(nodes - step, -1.0, 1.0)
        if np.abs(step).max() <= 4 * np.finfo(float).eps:
            break
    _, _, squares = _newton_data(nodes, resolution, alpha, beta)
    weights = 1.0 / squares
    logger.debug(f"Gauss-Jacobi({alpha:g},{beta:g}) with {resolution} nodes: last Newton step "
                 f"{np.abs(step).max():.1e}")
    return nodes, weights


def fit_line(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Least-squares line y ~ slope*x + intercept; returns (slope, intercept, r2)."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    regression = LinearRegression().fit(x, y)
    prediction = regression.predict(x)
    r2 = float(r2_score(y, prediction)) if y.size > 2 else 1.0
    return float(regression.coef_[0]), float(regression.intercept_), r2


def loglog_slope(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Slope of log y against log x (natural logs)."""
    return fit_line(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))


def decades(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    values = values[values > 0]
    if values.size < 2:
        return 0.0
    return float(np.log10(values.max() / values.min()))
