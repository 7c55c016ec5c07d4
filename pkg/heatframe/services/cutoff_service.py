"""
Smooth cut-off functions and the Littlewood-Paley / auxiliary systems built from them.

Every cut-off here is a product of at most two monotone C-infinity ramps,

    D(t) = S((q t - 1) / (r - 1)) * S((r - p t) / (r - 1)),

which is 0 on [0, 1/q], rises on [1/q, r/q], equals 1 on [r/q, 1/p], falls on
[1/p, r/p] and vanishes beyond. With q = inf only the falling ramp is present
(a type (a) function). The ramp S(v) = h(v) / (h(v) + h(1 - v)) is assembled from the
bridge h(v) = exp(-v^(-1/eps)), so S(1 - v) = 1 - S(v) holds exactly and zeros and
ones outside the transitions are exact.
"""
import logging
from dataclasses import dataclass, replace
from math import comb, inf, isinf
from typing import List, Tuple

import mpmath
import numpy as np

from ..models.errors import ConstructionError
from ..models.spectral_data import CutoffKind, GrowthEntry, GrowthReport

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = 8


def _bridge_derivatives(u: np.ndarray, k_max: int, a: float) -> np.ndarray:
    """Rows k = 0..k_max of d^k/du^k exp(-u^(-a)), zero for u <= 0."""
    out = np.zeros((k_max + 1, u.size))
    positive = u > 0
    if not positive.any():
        return out
    up = u[positive]
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        g = np.empty((k_max + 1, up.size))
        coefficient = -1.0
        for i in range(k_max + 1):
            g[i] = coefficient * up ** (-a - i)
            coefficient *= -a - i
        h = np.empty((k_max + 1, up.size))
        h[0] = np.exp(g[0])
        for k in range(1, k_max + 1):
            h[k] = sum(comb(k - 1, i) * g[i + 1] * h[k - 1 - i] for i in range(k))
    out[:, positive] = np.nan_to_num(h, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def ramp_derivatives(v: np.ndarray, k_max: int, a: float) -> np.ndarray:
    """Rows k = 0..k_max of S^(k)(v) for the monotone ramp S: 0 below 0, 1 above 1."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.zeros((k_max + 1, v.size))
    out[0, v >= 1] = 1.0
    middle = (v > 0) & (v < 1)
    if not middle.any():
        return out
    vm = v[middle]
    upper = _bridge_derivatives(vm, k_max, a)
    signs = (-1.0) ** np.arange(k_max + 1)
    lower = _bridge_derivatives(1.0 - vm, k_max, a) * signs[:, None]
    denominator = upper + lower
    ramp = np.empty_like(upper)
    for k in range(k_max + 1):
        acc = upper[k].copy()
        for i in range(1, k + 1):
            acc -= comb(k, i) * denominator[i] * ramp[k - i]
        ramp[k] = acc / denominator[0]
    out[:, middle] = ramp
    return out


def _sqrt_derivatives(values: np.ndarray) -> np.ndarray:
    """Derivatives of sqrt(D) from those of D by the product recursion R*R = D."""
    k_max = values.shape[0] - 1
    root = np.zeros_like(values)
    positive = values[0] > 1e-300
    root[0] = np.sqrt(np.clip(values[0], 0.0, None))
    if k_max == 0 or not positive.any():
        return root
    r0 = root[0, positive]
    for k in range(1, k_max + 1):
        acc = values[k, positive].copy()
        for i in range(1, k):
            acc -= comb(k, i) * root[i, positive] * root[k - i, positive]
        root[k, positive] = acc / (2 * r0)
    return root


@dataclass(frozen=True)
class Cutoff:
    """
    A smooth cut-off D(t) = S((q t - 1)/(r - 1)) S((r - p t)/(r - 1)), optionally square-rooted.

    `ratio` is r (the transition ratio, the dilation base b in LP systems), `p` and `q`
    set the outer and inner edges, `epsilon` is the bridge smoothness knob.
    """
    kind: CutoffKind
    ratio: float
    epsilon: float = 1.0
    p: float = 1.0
    q: float = inf
    sqrt: bool = False
    k_max: int = DEFAULT_K_MAX

    @property
    def b(self) -> float:
        return self.ratio

    @property
    def support(self) -> Tuple[float, float]:
        low = 0.0 if isinf(self.q) else 1.0 / self.q
        return low, self.ratio / self.p

    @property
    def plateau(self) -> Tuple[float, float]:
        """Interval where the cut-off equals 1 exactly."""
        low = 0.0 if isinf(self.q) else self.ratio / self.q
        return low, 1.0 / self.p

    def scaled(self, factor: float) -> "Cutoff":
        """The cut-off t -> D(factor * t)."""
        return replace(self, p=self.p * factor, q=self.q * factor)

    def __call__(self, t) -> np.ndarray:
        return self.derivatives(t, 0)[0]

    def derivative(self, t, k: int) -> np.ndarray:
        return self.derivatives(t, k)[k]

    def derivatives(self, t, k_max: int) -> np.ndarray:
        """Rows k = 0..k_max of D^(k)(t)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a = 1.0 / self.epsilon
        width = self.ratio - 1.0
        falling = ramp_derivatives((self.ratio - self.p * t) / width, k_max, a)
        falling *= ((-self.p / width) ** np.arange(k_max + 1))[:, None]
        if isinf(self.q):
            product = falling
        else:
            rising = ramp_derivatives((self.q * t - 1.0) / width, k_max, a)
            rising *= ((self.q / width) ** np.arange(k_max + 1))[:, None]
            product = np.zeros_like(falling)
            for k in range(k_max + 1):
                product[k] = sum(comb(k, i) * rising[i] * falling[k - i] for i in range(k + 1))
        if self.sqrt:
            if product[0].min() < -1e-14:
                raise ConstructionError(f"negative radicand {product[0].min():.3e} in {self.kind}")
            return _sqrt_derivatives(product)
        return product

    def mp_value(self, t):
        """High-precision evaluation with mpmath, for derivative cross-checks."""
        a = mpmath.mpf(1) / self.epsilon
        width = mpmath.mpf(self.ratio) - 1

        def bridge(u):
            return mpmath.exp(-mpmath.power(u, -a)) if u > 0 else mpmath.mpf(0)

        def ramp(v):
            if v <= 0:
                return mpmath.mpf(0)
            if v >= 1:
                return mpmath.mpf(1)
            return bridge(v) / (bridge(v) + bridge(1 - v))

        value = ramp((self.ratio - self.p * t) / width)
        if not isinf(self.q):
            value *= ramp((self.q * t - 1) / width)
        return mpmath.sqrt(value) if self.sqrt else value


def make_cutoff(kind: CutoffKind, b: float = 2.0, epsilon: float = 1.0,
                k_max: int = DEFAULT_K_MAX) -> Cutoff:
    """
    Admissible cut-off of type A (1 on [0,1], supp [0,b]), B (Phi(t) - Phi(bt),
    supp [1/b, b]) or C (square root of type B, squared dyadic partition of unity).
    """
    if b <= 1:
        raise ConstructionError(f"dilation base must exceed 1, got {b}")
    if not 0 < epsilon <= 1:
        raise ConstructionError(f"smoothness parameter must lie in (0, 1], got {epsilon}")
    kind = CutoffKind(kind)
    if kind == CutoffKind.TYPE_A:
        return Cutoff(kind=kind, ratio=b, epsilon=epsilon, k_max=k_max)
    return Cutoff(kind=kind, ratio=b, epsilon=epsilon, p=1.0, q=b,
                  sqrt=kind == CutoffKind.TYPE_C, k_max=k_max)


@dataclass(frozen=True)
class LPSystem:
    """Psi_0 = Phi, Psi_j(u) = Psi(b^-j u) with Psi = Phi - Phi(b.) (or its square root)."""
    phi: Cutoff
    squared: bool = False

    @property
    def b(self) -> float:
        return self.phi.ratio

    def level(self, j: int) -> Cutoff:
        if j == 0:
            return replace(self.phi, sqrt=self.squared)
        return replace(self.phi, kind=CutoffKind.TYPE_C if self.squared else CutoffKind.TYPE_B,
                       p=self.b ** (-j), q=self.b ** (1 - j), sqrt=self.squared)

    def levels(self, J: int) -> List[Cutoff]:
        return [self.level(j) for j in range(J + 1)]

    def band(self, j: int) -> Tuple[float, float]:
        return self.level(j).support

    def partition_error(self, J: int, u: np.ndarray) -> float:
        """max |sum_j Psi_j(u) - 1| (or of Psi_j^2) over u in [0, b^J]."""
        u = np.asarray(u, dtype=float)
        u = u[u <= self.b ** J]
        power = 2 if self.squared else 1
        total = sum(self.level(j)(u) ** power for j in range(J + 1))
        return float(np.abs(total - 1.0).max())

    def multiplier_table(self, sqrt_eigenvalues: np.ndarray, J: int) -> np.ndarray:
        """Rows j = 0..J of Psi_j(sqrt(lambda_n))."""
        return np.stack([self.level(j)(sqrt_eigenvalues) for j in range(J + 1)])


@dataclass(frozen=True)
class GammaSystem:
    """Auxiliary cut-offs of the dual construction: Gamma_0, Gamma_1 and Theta."""
    phi: Cutoff

    @property
    def b(self) -> float:
        return self.phi.ratio

    @property
    def gamma0(self) -> Cutoff:
        return self.phi.scaled(1.0 / self.b)

    @property
    def gamma1(self) -> Cutoff:
        return replace(self.phi, kind=CutoffKind.TYPE_B, p=self.b ** -2, q=self.b)

    @property
    def theta(self) -> Cutoff:
        return self.phi.scaled(self.b ** -3)

    def level_gamma(self, j: int) -> Cutoff:
        """Gamma_{lambda_j}: Gamma_0 at level 0, Gamma_1(u / b^(j-1)) for j >= 1."""
        if j == 0:
            return self.gamma0
        return self.gamma1.scaled(self.b ** (1 - j))


def make_systems(phi: Cutoff, b: float, J: int) -> Tuple[LPSystem, LPSystem, GammaSystem]:
    """Additive and squared LP systems plus the Gamma system, with certified identities."""
    if phi.kind != CutoffKind.TYPE_A or not isinf(phi.q) or phi.p != 1.0:
        raise ConstructionError("make_systems needs a type A cut-off in normal position")
    if abs(phi.ratio - b) > 1e-12:
        phi = replace(phi, ratio=b)

    additive = LPSystem(phi=phi, squared=False)
    squared = LPSystem(phi=phi, squared=True)
    gammas = GammaSystem(phi=phi)

    u = np.linspace(0.0, b ** J, 20001)
    additive_error = additive.partition_error(J, u)
    squared_error = squared.partition_error(J, u)

    samples = np.geomspace(b ** -0.75, b ** 0.75, 2001)
    psi_floor = float(additive.level(1).scaled(b)(samples).min())
    if psi_floor <= 0:
        raise ConstructionError(f"Psi vanishes on [b^-3/4, b^3/4] (min {psi_floor:.3e})")

    logger.info(f"LP systems b={b}, J={J}: additive error {additive_error:.2e}, "
                f"squared error {squared_error:.2e}, Psi floor {psi_floor:.4f}")
    return additive, squared, gammas


def growth_bound(k: int, epsilon: float) -> float:
    """8 (16 eps^-1 k^(1+eps))^k, with the sup-norm bound 1 at k = 0."""
    if k == 0:
        return 1.0
    return 8.0 * (16.0 / epsilon * k ** (1 + epsilon)) ** k


def verify_growth(phi: Cutoff, k_max: int = DEFAULT_K_MAX, epsilon: float = 1.0,
                  samples: int = 40001) -> GrowthReport:
    if k_max < 1:
        raise ConstructionError("verify_growth needs k_max >= 1")
    low, high = phi.support
    t = np.linspace(low, high, samples)
    table = phi.derivatives(t, k_max)
    entries = []
    for k in range(k_max + 1):
        sup_norm = float(np.abs(table[k]).max())
        bound = growth_bound(k, epsilon)
        entries.append(GrowthEntry(k=k, sup_norm=sup_norm, bound=bound, violated=sup_norm > bound))
    report = GrowthReport(epsilon=epsilon, entries=entries)
    if report.violations:
        logger.warning(f"Derivative growth bound violated at {report.violations} orders")
    return report
