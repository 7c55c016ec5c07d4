"""
Verification suites for a built frame and its model space.
Each suite measures, compares against its acceptance band and returns a SuiteResult;
a suite that raises is recorded as failed with the error message.
"""
import logging
import time
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import linalg

from .config import get_settings
from .models.errors import CubatureError
from .models.spectral_data import (CutoffKind, EnvelopeForm, EquivalencePair, FrameVariant, SpaceKind,
                                   SuiteResult)
from .services.cutoff_service import make_cutoff
from .services.frame_service import (FrameSystem, count_growth_exponent, element_localization,
                                     frame_bounds, kernel_identity_residual, level_count_ratios,
                                     neumann_inverse, reconstruction_error)
from .services.net_service import (check_net, cubature_weights, packing_constant, sampling_ratio)
from .services.spectral_service import (KernelOperator, finite_speed_operator, finite_speed_residual,
                                        gaussian_multiplier, localization_report, markov_residual,
                                        power_multiplier)

logger = logging.getLogger(__name__)

TIGHT_TOLERANCE = 1e-8
FRAME1_BAND = (0.25 * 0.95, 2.0 * 1.05)
RECONSTRUCTION_TOLERANCE = 1e-8
KERNEL_TOLERANCE = 1e-9
MARKOV_TOLERANCE = 1e-10
FINITE_SPEED_RATIO = 1e-6
SAMPLING_BAND = (0.9, 1.1)
MOMENT_TOLERANCE = 1e-10
GROWTH_SLACK = 0.25
LOCALIZATION_EPSILONS = (0.3, 0.5)
EQUIVALENCE_BANDS = {EquivalencePair.LP_VS_PHI: 5.0, EquivalencePair.LP_VS_HEAT: 10.0,
                     EquivalencePair.LP_VS_SEQ: 10.0, EquivalencePair.F_P2_VS_HSP: 4.0}


def suite_frame_bounds(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    report = frame_bounds(frame, trials, seed, which="primal")
    details = {"primal": report.model_dump()}
    failures = []
    if frame.variant == FrameVariant.TIGHT:
        if max(abs(report.lower_hat - 1), abs(report.upper_hat - 1)) > TIGHT_TOLERANCE:
            failures.append(f"Parseval ratios [{report.lower_hat:.12f}, {report.upper_hat:.12f}] "
                            f"outside 1 +- {TIGHT_TOLERANCE:g}")
    else:
        low, high = FRAME1_BAND
        if report.lower_hat < low or report.upper_hat > high:
            failures.append(f"frame bounds [{report.lower_hat:.4f}, {report.upper_hat:.4f}] "
                            f"outside [{low:.4f}, {high:.4f}]")
    if frame.variant == FrameVariant.DUAL:
        dual = frame_bounds(frame, trials, seed, which="dual")
        details["dual"] = dual.model_dump()
        if not (0 < dual.lower_hat <= dual.upper_hat < np.inf):
            failures.append("dual frame bounds not finite and positive")
    return SuiteResult(name="frame-bounds", passed=not failures, details=details, failures=failures)


def suite_reconstruction(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    details: Dict = {}
    failures = []
    if frame.variant == FrameVariant.FRAME1:
        worst = 0.0
        table = frame.lp.multiplier_table(frame.model.sqrt_eigenvalues, frame.J)
        for _ in range(trials):
            f = frame.random_function(rng)
            worst = max(worst, float(np.linalg.norm(table.sum(axis=0) * f - f)))
        details["lp_completeness"] = worst
        if worst > 1e-10:
            failures.append(f"sum_j Psi_j f differs from f by {worst:.3e}")
        return SuiteResult(name="reconstruction", passed=not failures, details=details, failures=failures)

    errors = [reconstruction_error(frame, frame.random_function(rng)) for _ in range(trials)]
    details["max_relative_error"] = max(errors)
    if max(errors) > RECONSTRUCTION_TOLERANCE:
        failures.append(f"reconstruction error {max(errors):.3e} > {RECONSTRUCTION_TOLERANCE:g}")

    kernel = [kernel_identity_residual(frame, level.j, seed=seed) for level in frame.levels]
    details["kernel_identity"] = kernel
    if max(kernel) > KERNEL_TOLERANCE:
        failures.append(f"kernel identity residual {max(kernel):.3e} > {KERNEL_TOLERANCE:g}")

    if frame.variant == FrameVariant.DUAL:
        details["residual_norms"] = [level.residual_norm for level in frame.levels]
        neumann = []
        for level in frame.levels:
            direct = linalg.inv(np.eye(level.active.size) - level.residual)
            neumann.append(float(np.abs(neumann_inverse(level.residual) - direct).max()))
        details["neumann_vs_direct"] = neumann
        if max(neumann) > 1e-10:
            failures.append(f"truncated Neumann series off by {max(neumann):.3e}")
    return SuiteResult(name="reconstruction", passed=not failures, details=details, failures=failures)


def cutoff_operator(frame: FrameSystem, epsilon: float, delta: Optional[float] = None) -> KernelOperator:
    """
    Phi(delta sqrt(L)) for the type-A cut-off with bridge smoothness epsilon. The default delta
    is the finest scale whose band b / delta still fits inside the truncation.
    """
    model = frame.model
    if delta is None:
        delta = frame.b / float(model.sqrt_eigenvalues[-1])
    phi = make_cutoff(CutoffKind.TYPE_A, b=frame.b, epsilon=epsilon)
    return KernelOperator(model, phi, delta, label=f"Phi(eps={epsilon:g})")


def _operators(frame: FrameSystem) -> List[KernelOperator]:
    model = frame.model
    top = float(model.sqrt_eigenvalues[-1])
    delta = 4 * frame.b / top
    psi = frame.lp.level(1)
    return [cutoff_operator(frame, get_settings().cutoff_epsilon, delta),
            KernelOperator(model, psi, delta, label="Psi"),
            KernelOperator(model, power_multiplier(2), 1.0 / top, label="lambda^2")]


def suite_markov(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    residuals = {op.label: markov_residual(op) for op in _operators(frame)}
    failures = [f"Markov residual {value:.3e} for {label}"
                for label, value in residuals.items() if value > MARKOV_TOLERANCE]
    return SuiteResult(name="markov", passed=not failures, details=residuals, failures=failures)


def suite_finite_speed(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    model = frame.model
    A, delta = 1.0, 0.2
    speed = 1.0 if model.kind == SpaceKind.TORUS else None
    op = finite_speed_operator(model, A, delta)
    diagonal = float(np.abs(op.kernel_rows([0])[0, 0]))
    residual = finite_speed_residual(model, A, delta, wave_speed=speed)
    gaussian = finite_speed_residual(model, A, delta, wave_speed=speed, multiplier=gaussian_multiplier)
    gaussian_diagonal = float(np.abs(KernelOperator(model, gaussian_multiplier, delta).kernel_rows([0])[0, 0]))
    details = {"ratio": residual / diagonal, "gaussian_ratio": gaussian / gaussian_diagonal}
    failures = []
    if details["ratio"] > FINITE_SPEED_RATIO:
        failures.append(f"kernel outside the light cone at {details['ratio']:.3e} of the diagonal")
    if details["gaussian_ratio"] <= FINITE_SPEED_RATIO:
        failures.append("Gaussian counterexample does not leak outside the cone")
    return SuiteResult(name="finite-speed", passed=not failures, details=details, failures=failures)


def suite_localization(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    details, failures = {}, []
    for epsilon in LOCALIZATION_EPSILONS:
        beta = 1 - epsilon
        op = cutoff_operator(frame, epsilon)
        envelope = localization_report(op, EnvelopeForm.SUBEXPONENTIAL, beta=beta)
        details[f"kernel_beta_{beta:g}"] = {"epsilon": epsilon, "delta": op.delta, **envelope.model_dump()}
        if envelope.kappa <= 0 or envelope.r2 < 0.95 or envelope.decades < 4:
            failures.append(f"kernel envelope at beta={beta:g}: kappa={envelope.kappa:.3f}, "
                            f"r2={envelope.r2:.3f}, decades={envelope.decades:.1f}")
    j = max(frame.J - 1, 0)
    envelope = element_localization(frame, j, beta=0.5)
    details["element"] = envelope.model_dump()
    if envelope.kappa <= 0:
        failures.append(f"frame elements at level {j} not localized (kappa={envelope.kappa:.3f})")
    return SuiteResult(name="localization", passed=not failures, details=details, failures=failures)


def _sampling_band(frame: FrameSystem, level) -> float:
    if frame.variant == FrameVariant.TIGHT:
        return frame.model.polynomial_constant * level.band
    return frame.b * level.band


def suite_sampling(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    low, high = SAMPLING_BAND
    details, failures = {}, []
    for level in frame.levels:
        lam = _sampling_band(frame, level)
        ratios = [sampling_ratio(level.net, frame.model.random_band_limited(lam, rng)) for _ in range(trials)]
        details[f"level_{level.j}"] = [min(ratios), max(ratios)]
        if min(ratios) < low or max(ratios) > high:
            failures.append(f"level {level.j}: sampling ratios [{min(ratios):.4f}, {max(ratios):.4f}]")
    return SuiteResult(name="sampling", passed=not failures, details=details, failures=failures)


def suite_cubature(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    model = frame.model
    details, failures = {}, []
    for level in frame.levels:
        net = level.net
        lam = model.product_band(level.band)
        if net.weights is None:
            try:
                weights, _ = cubature_weights(net, lam)
            except CubatureError as e:
                failures.append(f"level {level.j}: {e}")
                continue
        else:
            weights = net.weights
        mask = model.band_mask(lam)
        moments = np.zeros(int(mask.sum()))
        moments[0] = np.sqrt(model.measure)
        residual = float(np.abs(net.center_basis()[:, mask].T @ weights - moments).max())
        lower = (2.0 / 3.0) * model.ball_measure(net.centers, net.delta / 2)
        upper = 2.0 * model.ball_measure(net.centers, net.delta)
        outside = int(np.sum((weights <= 0) | (weights < lower) | (weights > upper)))
        details[f"level_{level.j}"] = {"moment_residual": residual, "outside_bracket": outside,
                                       "min_weight": float(weights.min())}
        if residual > MOMENT_TOLERANCE:
            failures.append(f"level {level.j}: moment residual {residual:.3e}")
        if outside:
            failures.append(f"level {level.j}: {outside} weights outside the bracket")
    return SuiteResult(name="cubature", passed=not failures, details=details, failures=failures)


def suite_nets(frame: FrameSystem, trials: int, seed: int) -> SuiteResult:
    d = frame.model.dim_d
    details, failures = {}, []
    for level in frame.levels:
        failed = check_net(level.net)
        details[f"level_{level.j}"] = {"size": level.size, "failed_checks": sorted(failed),
                                       "packing": packing_constant(level.net, d)}
        if failed:
            failures.append(f"level {level.j}: net checks failed {sorted(failed)}")
    growth = count_growth_exponent(frame)
    ratios = level_count_ratios(frame, growth)[1:]
    details.update(count_ratios=ratios.tolist(), growth_exponent=growth, d_hat=d)
    if ratios.size and ratios.max() > 2 * ratios.min():
        failures.append(f"level counts leave the factor-2 band: {ratios.round(3).tolist()}")
    if growth > d + GROWTH_SLACK:
        failures.append(f"level counts grow like b^({growth:.3f} j), faster than d_hat={d:.3f}")
    return SuiteResult(name="nets", passed=not failures, details=details, failures=failures)


SUITES: Dict[str, Callable[[FrameSystem, int, int], SuiteResult]] = {
    "frame-bounds": suite_frame_bounds,
    "reconstruction": suite_reconstruction,
    "markov": suite_markov,
    "finite-speed": suite_finite_speed,
    "localization": suite_localization,
    "sampling": suite_sampling,
    "cubature": suite_cubature,
    "nets": suite_nets,
}


def run_suite(name: str, frame: FrameSystem, trials: int = 100, seed: int = 0) -> SuiteResult:
    logger.info(f"Running suite {name}...")
    start_time = time.time()
    try:
        result = SUITES[name](frame, trials, seed)
    except Exception as e:
        logger.error(f"Error running suite {name}: {e}")
        result = SuiteResult(name=name, passed=False, details={"error": str(e)},
                             failures=[f"{type(e).__name__}: {e}"])
    result.details["seconds"] = round(time.time() - start_time, 3)
    logger.info(f"Suite {name}: {'PASS' if result.passed else 'FAIL'}")
    return result


def run_suites(frame: FrameSystem, suite: str = "all", trials: int = 100, seed: int = 0) -> List[SuiteResult]:
    names = list(SUITES) if suite == "all" else [suite]
    return [run_suite(name, frame, trials, seed) for name in names]


def summarize(results: List[SuiteResult]) -> Dict:
    return {
        "passed": all(result.passed for result in results),
        "suites": {result.name: result.passed for result in results},
        "failures": [f"{result.name}: {failure}" for result in results for failure in result.failures],
    }
