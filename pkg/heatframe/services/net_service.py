import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from .model_space_service import SpectralModel
from ..models.errors import (ConfigurationError, ConstructionError, CubatureError,
                             DegenerateInputError, ParameterError)
from ..models.spectral_data import CubatureReport, SpaceKind

logger = logging.getLogger(__name__)

SEPARATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class NetLevel:
    """
    A maximal delta-net on the quadrature grid with its nearest-center partition.

    A grid node equidistant from two centers belongs half to each: `assignment` holds the
    lower-index center, `partner` the other one (-1 when the node is not tied).
    """
    model: SpectralModel
    delta: float
    center_nodes: np.ndarray
    assignment: np.ndarray
    cell_measures: np.ndarray
    partner: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    cubature: Optional[CubatureReport] = field(default=None)

    @property
    def size(self) -> int:
        return int(self.center_nodes.size)

    @property
    def centers(self) -> np.ndarray:
        return self.model.grid.nodes[self.center_nodes]

    @property
    def tied(self) -> np.ndarray:
        if self.partner is None:
            return np.zeros(self.assignment.size, dtype=bool)
        return self.partner >= 0

    def center_basis(self) -> np.ndarray:
        """e_n(xi) for every center, shape (#centers, N + 1)."""
        return self.model.basis[self.center_nodes]

    def spread(self, per_center: np.ndarray, r: float) -> np.ndarray:
        """
        Per-node value of sum_xi h_xi 1_{A_xi} in the r-power mean: tied nodes get
        (h_1^r / 2 + h_2^r / 2)^(1/r), r = inf takes the larger one.
        """
        values = np.abs(per_center)[self.assignment]
        tied = self.tied
        if not tied.any():
            return values
        other = np.abs(per_center)[np.where(tied, self.partner, self.assignment)]
        if np.isinf(r):
            return np.maximum(values, other)
        return np.where(tied, (0.5 * values ** r + 0.5 * other ** r) ** (1.0 / r), values)

    def with_weights(self, weights: np.ndarray, report: CubatureReport) -> "NetLevel":
        return replace(self, weights=weights, cubature=report)


def _scan_order(model: SpectralModel, start: int) -> np.ndarray:
    period = 1.0 if model.kind == SpaceKind.TORUS else 2 * np.pi
    offset = np.mod(model.coordinates - model.coordinates[start], period)
    return np.argsort(offset, kind="stable")


def maximal_net(model: SpectralModel, delta: float, seed: float = 0.0) -> NetLevel:
    """
    Greedy maximal delta-net: scan grid nodes from the seed and keep every node at distance
    >= delta from all centers so far; cells are nearest-center, a node tied between two
    centers splits its weight evenly between them.
    """
    if delta <= 0:
        raise ParameterError(f"net spacing must be positive, got {delta}")
    start = model.nearest_node(seed)
    nearest = np.full(model.resolution, np.inf)
    centers = []
    for node in _scan_order(model, start):
        if nearest[node] >= delta - SEPARATION_TOL:
            centers.append(int(node))
            nearest = np.minimum(nearest, model.node_distances(int(node)))

    center_nodes = np.asarray(centers)
    distances = model.node_distance_matrix(center_nodes)
    assignment, partner = _nearest_centers(distances)
    cell_measures = _cell_measures(assignment, partner, model.grid.weights, center_nodes.size)
    for array in (center_nodes, assignment, partner, cell_measures):
        array.setflags(write=False)
    net = NetLevel(model=model, delta=float(delta), center_nodes=center_nodes,
                   assignment=assignment, cell_measures=cell_measures, partner=partner)

    failures = check_net(net, distances)
    if failures:
        raise ConstructionError(f"net at delta={delta:g} failed: {failures}")
    logger.debug(f"Maximal net on {model.label}: delta={delta:.5g}, {net.size} centers")
    return net


def _nearest_centers(distances: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest center per node (lower index on ties) and the tied runner-up or -1."""
    columns = np.arange(distances.shape[1])
    assignment = np.argmin(distances, axis=0)
    partner = np.full(columns.size, -1)
    if distances.shape[0] > 1:
        masked = distances.copy()
        masked[assignment, columns] = np.inf
        runner_up = np.argmin(masked, axis=0)
        tied = masked[runner_up, columns] - distances[assignment, columns] <= SEPARATION_TOL
        partner[tied] = runner_up[tied]
    return assignment, partner


def _cell_measures(assignment: np.ndarray, partner: np.ndarray, weights: np.ndarray,
                   count: int) -> np.ndarray:
    tied = partner >= 0
    share = np.where(tied, 0.5, 1.0) * weights
    return (np.bincount(assignment, weights=share, minlength=count)
            + np.bincount(partner[tied], weights=share[tied], minlength=count))


def check_net(net: NetLevel, distances: Optional[np.ndarray] = None) -> Dict[str, bool]:
    """Brute-force separation, covering, nesting and mass checks; returns the failed ones."""
    model = net.model
    if distances is None:
        distances = model.node_distance_matrix(net.center_nodes)
    between = distances[:, net.center_nodes]
    np.fill_diagonal(between, np.inf)
    own = distances[net.assignment, np.arange(model.resolution)]
    half_ball = distances < net.delta / 2 - SEPARATION_TOL
    checks = {
        "separation": bool(between.min() >= net.delta - SEPARATION_TOL) if net.size > 1 else True,
        "covering": bool(distances.min(axis=0).max() < net.delta),
        "cells_in_balls": bool(own.max() < net.delta),
        "half_balls_in_cells": bool(np.all(~half_ball | (net.assignment[None, :] == np.arange(net.size)[:, None]))),
        "mass": bool(abs(net.cell_measures.sum() - model.measure) <= 1e-12 * max(1.0, model.measure)),
    }
    return {name: ok for name, ok in checks.items() if not ok}


def _grid_values(net: NetLevel, coefficients: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values = net.model.synthesize(coefficients)
    return values, values[net.center_nodes]


def mz_ratio(net: NetLevel, coefficients: np.ndarray, p: float = 2.0) -> float:
    """(sum_xi int_{A_xi} |f - f(xi)|^p)^(1/p) / ||f||_p."""
    if p < 1:
        raise ParameterError(f"MZ ratio needs p >= 1, got {p}")
    values, at_centers = _grid_values(net, coefficients)
    norm = net.model.grid_norm(values, p)
    if norm == 0:
        raise DegenerateInputError("MZ ratio of the zero function")
    oscillation = np.abs(values - at_centers[net.assignment])
    tied = net.tied
    if tied.any():
        other = np.abs(values - at_centers[np.where(tied, net.partner, net.assignment)])
        if np.isinf(p):
            oscillation = np.maximum(oscillation, other)
        else:
            oscillation = np.where(tied, (0.5 * oscillation ** p + 0.5 * other ** p) ** (1.0 / p),
                                   oscillation)
    return net.model.grid_norm(oscillation, p) / norm


def sampling_ratio(net: NetLevel, coefficients: np.ndarray) -> float:
    """sum |A_xi| |f(xi)|^2 / ||f||_2^2."""
    energy = float(np.dot(coefficients, coefficients))
    if energy == 0:
        raise DegenerateInputError("sampling ratio of the zero function")
    _, at_centers = _grid_values(net, coefficients)
    return float(np.dot(net.cell_measures, at_centers ** 2) / energy)


def sampling_bounds(net: NetLevel, lam: float) -> Tuple[float, float]:
    """Extremal sampling ratios over all of Sigma_lam."""
    mask = net.model.band_mask(lam)
    basis = net.center_basis()[:, mask]
    gram = basis.T @ (net.cell_measures[:, None] * basis)
    eigenvalues = linalg.eigvalsh(gram)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def select_gamma(model: SpectralModel, lam: float, epsilon: float = 0.1, gamma_max: float = 1.0,
                 seed: float = 0.0, iterations: int = 10) -> float:
    """Largest gamma (by halving then bisection) whose net at gamma/lam samples Sigma_lam within 1 +- epsilon."""
    def accepted(gamma: float) -> bool:
        low, high = sampling_bounds(maximal_net(model, gamma / lam, seed), lam)
        return max(1 - low, high - 1) <= epsilon

    if accepted(gamma_max):
        return gamma_max
    failing, passing = gamma_max, gamma_max / 2
    while not accepted(passing):
        failing, passing = passing, passing / 2
        if passing / lam < 1e-9:
            raise ConfigurationError(f"no net spacing samples Sigma_{lam:g} within {epsilon}")
    for _ in range(iterations):
        middle = 0.5 * (failing + passing)
        if accepted(middle):
            passing = middle
        else:
            failing = middle
    logger.info(f"Selected gamma={passing:.5f} for band {lam:.4g} (epsilon={epsilon})")
    return passing


def cubature_weights(net: NetLevel, lam: float) -> Tuple[np.ndarray, CubatureReport]:
    """
    Weights exact on Sigma_lam: the minimal-norm correction of |A_xi| solving
    sum_xi w_xi e_n(xi) = int e_n dmu for all sqrt(lambda_n) <= lam.
    """
    model = net.model
    mask = model.band_mask(lam)
    system = net.center_basis()[:, mask].T
    moments = np.zeros(system.shape[0])
    moments[0] = np.sqrt(model.measure)

    seed_weights = np.asarray(net.cell_measures, dtype=float)
    correction, _, _, _ = linalg.lstsq(system, moments - system @ seed_weights)
    weights = seed_weights + correction
    residual = float(np.abs(system @ weights - moments).max())
    if residual > 1e-10:
        raise CubatureError(f"moment system for band {lam:.4g} not solvable (residual {residual:.2e})")

    lower = (2.0 / 3.0) * model.ball_measure(net.centers, net.delta / 2)
    upper = 2.0 * model.ball_measure(net.centers, net.delta)
    nonpositive = np.flatnonzero(weights <= 0)
    if nonpositive.size:
        raise CubatureError(f"{nonpositive.size} nonpositive cubature weights", nonpositive.tolist())
    outside = np.flatnonzero((weights < lower) | (weights > upper))
    if outside.size:
        raise CubatureError(f"{outside.size} cubature weights outside the ball bracket", outside.tolist())

    report = CubatureReport(lam=float(lam), moments=int(mask.sum()), moment_residual=residual,
                            min_weight=float(weights.min()), bracket_ok=True)
    logger.debug(f"Cubature on {net.size} centers, band {lam:.4g}: residual {residual:.2e}")
    return weights, report


def packing_constant(net: NetLevel, d: float, samples: int = 32) -> float:
    """max over sampled x of sum_xi (1 + rho(x, xi)/delta)^(-2d-1)."""
    model = net.model
    nodes = np.unique(np.linspace(0, model.resolution - 1, samples).round().astype(int))
    distances = model.node_distance_matrix(nodes)[:, net.center_nodes]
    sums = np.sum((1 + distances / net.delta) ** (-2 * d - 1), axis=1)
    return float(sums.max())
