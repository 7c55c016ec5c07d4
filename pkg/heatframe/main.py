"""
heatframe command line: build | verify | norms | approx | report.

Exit status: 0 when every asserted check passes, 1 with a JSON failure list otherwise,
2 for usage errors (bad flags, invalid configuration, unreadable config file).
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import get_settings
from .models.errors import ConfigurationError, HeatFrameError, SpectralIndexError
from .models.spectral_data import (CutoffKind, EquivalencePair, Flavor, NormMethod, RunConfig,
                                   SpaceParams, SpaceType, TaskKind)
from .services.approximation_service import (btau_norm, greedy_sigma_curve, jackson_slope,
                                             synthetic_besov_function)
from .services.cutoff_service import make_cutoff
from .services.frame_io_service import load_frame, save_frame
from .services.frame_service import FrameSystem, build_frame
from .services.model_space_service import build_model
from .services.space_norm_service import SpaceNormService
from .utils.report_writer import append_run_record, write_csv, write_json
from .verification import EQUIVALENCE_BANDS, run_suites, summarize

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

METHOD_ALIASES = {
    "lp": NormMethod.LP_DECOMP,
    "phi": NormMethod.PHI_VARIANT,
    "heat": NormMethod.HEAT,
    "seq": NormMethod.SEQUENCE,
    "coeff": NormMethod.FRAME_COEFF,
}


class UsageError(Exception):
    pass


def configure_logging(verbose: bool = False) -> None:
    settings = get_settings()
    os.makedirs(settings.log_dir, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else settings.logging_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(settings.log_dir, "heatframe.log")),
            logging.StreamHandler()
        ]
    )


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _methods(text: str) -> List[str]:
    methods = []
    for part in text.split(","):
        part = part.strip()
        if part in METHOD_ALIASES:
            methods.append(METHOD_ALIASES[part].value)
        else:
            methods.append(NormMethod(part).value)
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatframe", description="Heat-kernel frames and Besov/TL norms")
    parser.add_argument("--config", help="JSON run configuration; flags override its keys")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="build and save a frame")
    build.add_argument("--space", choices=["torus", "jacobi"])
    build.add_argument("--alpha", type=float)
    build.add_argument("--beta", type=float)
    build.add_argument("--N", type=int)
    build.add_argument("--resolution", type=int)
    build.add_argument("--b", type=float)
    build.add_argument("--gamma", help="net scale factor, or 'auto'")
    build.add_argument("--levels", type=int)
    build.add_argument("--variant", choices=["frame1", "dual", "tight"])
    build.add_argument("--epsilon", type=float, help="cut-off smoothness parameter in (0, 1]")
    build.add_argument("--out", required=True)

    for name, help_text in (("verify", "run verification suites"),
                            ("norms", "Besov / Triebel-Lizorkin norms of a function"),
                            ("approx", "greedy n-term approximation curve"),
                            ("report", "all suites plus norm and approximation summaries")):
        command = sub.add_parser(name, help=help_text)
        command.add_argument("frame", help="path of a saved .hkf frame")
        command.add_argument("--seed", type=int)
        command.add_argument("--out")
        if name in ("verify", "report"):
            command.add_argument("--trials", type=int)
        if name == "verify":
            command.add_argument("--suite")
        if name in ("norms", "approx", "report"):
            command.add_argument("--f", dest="function")
            command.add_argument("--s", type=_float_list)
            command.add_argument("--p", type=_float_list)
        if name in ("norms", "report"):
            command.add_argument("--q", type=_float_list)
            command.add_argument("--methods", type=_methods)
            command.add_argument("--space-type", choices=["B", "F"], default="B")
            command.add_argument("--flavor", choices=["classical", "nonclassical"], default="classical")
        if name in ("approx", "report"):
            command.add_argument("--nmax", type=int)
        if name == "report":
            command.add_argument("--report-dir")
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    data: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from e
    space = data.setdefault("space", {})
    frame = data.setdefault("frame", {})
    task = data.setdefault("task", {})
    flags = vars(args)

    def overlay(target: Dict, key: str, flag: Optional[str] = None) -> None:
        value = flags.get(flag or key)
        if value is not None:
            target[key] = value

    overlay(space, "kind", "space")
    for key in ("alpha", "beta", "N", "resolution"):
        overlay(space, key)
    for key in ("b", "gamma", "levels", "variant", "epsilon"):
        overlay(frame, key)
    if isinstance(frame.get("gamma"), str) and frame["gamma"] != "auto":
        try:
            frame["gamma"] = float(frame["gamma"])
        except ValueError as e:
            raise UsageError(f"gamma must be a number or 'auto', got {frame['gamma']}") from e
    task["task"] = args.command
    for key in ("suite", "trials", "seed", "function", "methods", "s", "p", "q", "nmax"):
        overlay(task, key)
    if flags.get("frame"):
        data["frame_path"] = flags["frame"]
    overlay(data, "output", "out")
    overlay(data, "report_dir")
    data.setdefault("report_dir", get_settings().report_dir)

    try:
        config = RunConfig(**data)
    except ValidationError as e:
        raise UsageError(f"invalid configuration: {e}") from e
    if config.frame_path and not Path(config.frame_path).exists():
        raise UsageError(f"frame file {config.frame_path} does not exist")
    if config.task.task in (TaskKind.NORMS, TaskKind.REPORT):
        bad = [p for p in config.task.p if np.isinf(p)]
        if bad and getattr(args, "space_type", "B") == "F":
            raise UsageError("Triebel-Lizorkin norms need p < inf")
    return config


def resolve_function(spec: str, frame: FrameSystem, s: float = 1.0, p: float = 2.0,
                     seed: int = 0) -> np.ndarray:
    """random:seed=K | eigen:n=K | element:index=K | sample:besov[:seed=K] | const."""
    model = frame.model
    parts = spec.split(":")
    options = dict(part.split("=", 1) for part in parts[1:] if "=" in part)
    kind = parts[0]
    try:
        if kind == "random":
            rng = np.random.default_rng(int(options.get("seed", seed)))
            return model.random_band_limited(frame.band, rng)
        if kind == "eigen":
            n = int(options["n"])
            if not 0 <= n <= model.N:
                raise SpectralIndexError(f"eigen-index {n} outside 0..{model.N}")
            f = np.zeros(model.size)
            f[n] = 1.0
            return f
        if kind == "element":
            index = int(options["index"])
            if not 0 <= index < frame.size:
                raise ConfigurationError(f"element index {index} outside 0..{frame.size - 1}")
            return np.array(frame.primal[index])
        if kind == "sample" and parts[1:2] == ["besov"]:
            return synthetic_besov_function(frame, s, p, seed=int(options.get("seed", seed)))
        if kind == "const":
            f = np.zeros(model.size)
            f[0] = np.sqrt(model.measure)
            return f
    except (KeyError, ValueError) as e:
        raise UsageError(f"malformed function specifier {spec!r}: {e}") from e
    raise UsageError(f"unknown function specifier {spec!r}")


def command_build(config: RunConfig) -> Dict[str, Any]:
    model = build_model(config.space)
    descriptor = config.frame
    phi = make_cutoff(CutoffKind.TYPE_A, b=descriptor.b, epsilon=descriptor.epsilon)
    frame = build_frame(model, phi, descriptor.b, descriptor.levels, descriptor.variant,
                        gamma=descriptor.gamma, seed=0.0)
    path = save_frame(frame, config.output)
    return {
        "passed": True,
        "frame": str(path),
        "variant": frame.variant.value,
        "elements": frame.size,
        "level_sizes": frame.level_sizes,
        "gamma": frame.gamma,
        "residual_norms": [level.residual_norm for level in frame.levels],
    }


def command_verify(config: RunConfig, frame: FrameSystem) -> Dict[str, Any]:
    task = config.task
    results = run_suites(frame, task.suite, task.trials, task.seed)
    summary = summarize(results)
    output = config.output or os.path.join(config.report_dir, f"verify_{task.suite}.json")
    write_json({"summary": summary, "results": [r.model_dump() for r in results]}, output)
    summary["report"] = output
    return summary


def norm_rows(config: RunConfig, frame: FrameSystem, space: SpaceType,
              flavor: Flavor) -> List[Dict[str, Any]]:
    task = config.task
    service = SpaceNormService(frame.model, frame)
    rows = []
    for s in task.s:
        for p in task.p:
            f = resolve_function(task.function, frame, s, p, task.seed)
            for q in task.q:
                params = SpaceParams(s=s, p=p, q=q, flavor=flavor, b=frame.b)
                norm = service.besov_norm if space == SpaceType.BESOV else service.tl_norm
                for method in task.methods:
                    report = norm(f, params, method)
                    rows.append({"function_id": task.function, "space": space.value, "s": s, "p": p,
                                 "q": q, "method": report.method.value, "value": report.value})
    return rows


def command_norms(config: RunConfig, frame: FrameSystem, space: SpaceType, flavor: Flavor) -> Dict[str, Any]:
    rows = norm_rows(config, frame, space, flavor)
    output = config.output or os.path.join(config.report_dir, "norms.csv")
    write_csv(rows, output, columns=["function_id", "space", "s", "p", "q", "method", "value"])
    values = [row["value"] for row in rows]
    finite = all(np.isfinite(values))
    spread = max(values) / min(values) if finite and min(values) > 0 else None
    logger.info(f"Norm values across methods: spread {spread}")
    failures = [] if finite else ["non-finite norm value"]
    return {"passed": finite, "rows": len(rows), "spread": spread, "csv": output, "failures": failures}


def command_approx(config: RunConfig, frame: FrameSystem) -> Dict[str, Any]:
    task = config.task
    s, p = task.s[0], task.p[0]
    f = resolve_function(task.function, frame, s, p, task.seed)
    curve = greedy_sigma_curve(f, frame, p, task.nmax, s)
    report = jackson_slope(curve, s, frame.model.dim_d)
    curve.slope_hat = report.slope_hat
    output = config.output or os.path.join(config.report_dir, "approx.csv")
    rows = ({"n": n, "sigma_hat": best, "sigma_raw": raw, "p": p, "s": s}
            for n, best, raw in zip(curve.n, curve.sigma_best, curve.sigma))
    write_csv(rows, output, columns=["n", "sigma_hat", "sigma_raw", "p", "s"])
    slope_path = str(Path(output).with_suffix(".json"))
    summary = {"passed": report.passed, "jackson": report.model_dump(mode="json", by_alias=True),
               "btau_norm": btau_norm(f, frame, s, p), "csv": output, "slope_report": slope_path,
               "failures": [] if report.passed else [f"Jackson status {report.status.value}, "
                                                     f"slope {report.slope_hat:.4f}"]}
    write_json(summary, slope_path)
    return summary


def command_report(config: RunConfig, frame: FrameSystem, space: SpaceType, flavor: Flavor) -> Dict[str, Any]:
    task = config.task
    report_dir = config.report_dir
    results = run_suites(frame, "all", task.trials, task.seed)
    summary = summarize(results)
    rows = norm_rows(config, frame, space, flavor)
    write_csv(rows, os.path.join(report_dir, "norms.csv"),
              columns=["function_id", "space", "s", "p", "q", "method", "value"])

    approx_config = config.model_copy(update={"output": os.path.join(report_dir, "approx.csv")})
    approx = command_approx(approx_config, frame)

    pairs, band_failures = {}, []
    service = SpaceNormService(frame.model, frame)
    rng = np.random.default_rng(task.seed)
    family = [frame.random_function(rng) for _ in range(min(task.trials, 20))]
    params = SpaceParams(s=task.s[0], p=task.p[0], q=task.q[0], flavor=flavor, b=frame.b)
    for pair in (EquivalencePair.LP_VS_HEAT, EquivalencePair.LP_VS_SEQ, EquivalencePair.LP_VS_PHI):
        try:
            report = service.equivalence_report(family, params, pair, space)
        except HeatFrameError as e:
            logger.error(f"Error computing {pair.value}: {e}")
            pairs[pair.value] = {"error": str(e)}
            continue
        band = EQUIVALENCE_BANDS[pair]
        within = bool(report.spread <= band)
        pairs[pair.value] = {**report.model_dump(), "spread": report.spread, "band": band,
                             "within_band": within}
        if not within:
            logger.warning(f"Equivalence {pair.value}: spread {report.spread:.3f} outside the band {band:g}")
            band_failures.append(f"{pair.value} spread {report.spread:.3f} exceeds {band:g}")

    failures = summary["failures"] + approx["failures"] + band_failures
    payload = {"summary": summary, "suites": [r.model_dump() for r in results],
               "equivalence": pairs, "approx": approx}
    write_json(payload, os.path.join(report_dir, "report.json"))
    return {"passed": not failures, "failures": failures, "report_dir": report_dir}


def run(config: RunConfig, space: SpaceType = SpaceType.BESOV,
        flavor: Flavor = Flavor.CLASSICAL) -> Dict[str, Any]:
    command = config.task.task
    if command == TaskKind.BUILD:
        if not config.output:
            raise UsageError("build needs --out")
        return command_build(config)
    frame = load_frame(config.frame_path)
    if command == TaskKind.VERIFY:
        return command_verify(config, frame)
    if command == TaskKind.NORMS:
        return command_norms(config, frame, space, flavor)
    if command == TaskKind.APPROX:
        return command_approx(config, frame)
    return command_report(config, frame, space, flavor)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    configure_logging(args.verbose)

    record: Dict[str, Any] = {"command": args.command, "argv": argv if argv is not None else sys.argv[1:]}
    try:
        config = load_run_config(args)
        record["config"] = config.model_dump(mode="json")
        space = SpaceType(getattr(args, "space_type", "B"))
        flavor = Flavor(getattr(args, "flavor", "classical"))
        result = run(config, space, flavor)
        status = EXIT_OK if result.get("passed", False) else EXIT_FAILED
    except (UsageError, ConfigurationError) as e:
        logger.error(f"Usage error: {e}")
        result = {"passed": False, "failures": [str(e)], "error": "usage"}
        status = EXIT_USAGE
    except HeatFrameError as e:
        logger.error(f"Run failed: {e}")
        result = {"passed": False, "failures": [e.to_dict()]}
        status = EXIT_FAILED

    record.update({"status": status, "result": result})
    append_run_record(record, get_settings().log_dir)
    print(json.dumps(result, indent=2, default=str))
    return status


if __name__ == "__main__":
    sys.exit(main())
