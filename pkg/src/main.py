from __future__ import annotations
import argparse
import logging
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from src.utils.log import init_logger
from src.core.audit import already_recorded, run_fingerprint, write_audit
from src.core.curve import DensityCurve, fallback_curve, grid, tabulate
from src.core.errors import (
    AnalyticFormUnavailable,
    DomainError,
    PointMassError,
    ShadowError,
)
from src.core.export import format_value, write_curve, write_histogram, write_report
from src.core.export import write_samples, write_svg
from src.core.linalg import ComplexMatrix
from src.core.loader import get_setting, load_matrix, load_yaml
from src.core.shadow import ShadowModel, build_model
from src.core.states import EnsembleSpec, collect_shadow, histogram, ks_distance, ks_pvalue

CONFIG_FILE = "shadowlab.yaml"
SEED_ENV = "SHADOWLAB_SEED"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_UNSUPPORTED = 3
EXIT_VALIDATION = 4


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    xmin: float
    xmax: float
    points: int

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"Grid must look like xmin:xmax:points, got '{text}'")
        try:
            spec = cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as e:
            raise UsageError(f"Invalid grid '{text}': {e}") from e
        if spec.points < 2:
            raise UsageError(f"Grid needs at least 2 points, got {spec.points}")
        if not spec.xmin < spec.xmax:
            raise UsageError(f"Empty grid range {spec.xmin}:{spec.xmax}")
        return spec


@dataclass(frozen=True)
class RunConfig:
    command: str
    matrix_source: str
    ensemble: str
    grid: GridSpec | None
    samples: int
    seed: int
    out: Path
    svg: Path | None
    histogram: Path | None
    bins: int
    quad_order: int
    quadrature: str
    near_knot: float
    workers: int
    stream_block: int
    threshold: float
    sigmas: float
    cdf_resolution: int
    model_ensemble: str | None
    grid_points: int
    ledger: bool

    def fingerprint(self) -> str:
        fields = asdict(self)
        fields.pop("ledger")
        return run_fingerprint(**fields)


def resolve_seed(cli_seed: int | None, cfg: dict) -> int:
    """
    --seed, then $SHADOWLAB_SEED, then sampling.seed from the config.
    """
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as e:
            raise UsageError(f"{SEED_ENV} must be an integer, got '{env}'") from e
    return int(get_setting(cfg, "sampling.seed", 0))


def _pick(cli_value, cfg: dict, key: str, default):
    """
    CLI value when given (0 included), else the config setting.
    """
    return cli_value if cli_value is not None else get_setting(cfg, key, default)


def build_config(args: argparse.Namespace, cfg: dict) -> RunConfig:
    samples = int(_pick(args.samples, cfg, "sampling.samples", 100_000))
    if samples < 1:
        raise UsageError("--samples must be at least 1")
    bins = int(_pick(args.bins, cfg, "sampling.bins", 100))
    if bins < 1:
        raise UsageError("--bins must be at least 1")
    quad_order = int(_pick(args.quad_order, cfg, "quadrature.order", 20))
    if quad_order < 1:
        raise UsageError("--quad-order must be at least 1")
    workers = int(_pick(args.workers, cfg, "sampling.workers", 1))
    if workers < 1:
        raise UsageError("--workers must be at least 1")
    out = args.out or Path("out") / f"{args.cmd}.csv"
    return RunConfig(
        command=args.cmd,
        matrix_source=args.matrix,
        ensemble=args.ensemble,
        grid=GridSpec.parse(args.grid) if getattr(args, "grid", None) is not None else None,
        samples=samples,
        seed=resolve_seed(args.seed, cfg),
        out=Path(out),
        svg=getattr(args, "svg", None),
        histogram=getattr(args, "histogram", None),
        bins=bins,
        quad_order=quad_order,
        quadrature=_pick(args.quadrature, cfg, "quadrature.method", "auto"),
        near_knot=float(get_setting(cfg, "quadrature.near_knot", 0.25)),
        workers=workers,
        stream_block=int(get_setting(cfg, "sampling.stream_block", 4096)),
        threshold=float(_pick(getattr(args, "threshold", None), cfg, "compare.ks_threshold", 0.01)),
        sigmas=float(get_setting(cfg, "compare.moment_sigmas", 4.0)),
        cdf_resolution=int(get_setting(cfg, "compare.cdf_resolution", 400)),
        model_ensemble=getattr(args, "model_ensemble", None),
        grid_points=int(get_setting(cfg, "grid.points", 501)),
        ledger=bool(get_setting(cfg, "ledger.enabled", True)) and not args.no_ledger,
    )


def _sample(matrix: ComplexMatrix, spec: EnsembleSpec, config: RunConfig, logger):
    logger.info(
        f"Sampling {config.samples:,} {spec.label} shadow values (seed={config.seed}, "
        f"workers={config.workers})"
    )
    return collect_shadow(
        matrix,
        spec,
        config.samples,
        config.seed,
        block=config.stream_block,
        workers=config.workers,
    )


def _grid_for(model_knots: tuple[float, ...], config: RunConfig) -> np.ndarray:
    if config.grid is not None:
        return grid(config.grid.xmin, config.grid.xmax, config.grid.points)
    return grid(model_knots[0], model_knots[-1], config.grid_points)


def _fallback(
    matrix, spec: EnsembleSpec, config: RunConfig, error: ShadowError, logger
) -> DensityCurve:
    logger.warning(f"No closed form ({error}); writing a Monte Carlo histogram instead")
    if isinstance(error, PointMassError):
        loc = error.location
        return DensityCurve(
            np.array([loc]), np.array([math.inf]), np.array([0]), (loc,), analytic=False
        )
    sample = _sample(matrix, spec, config, logger)
    values = sample.marginal("real") if sample.is_complex else sample
    return fallback_curve(values, config.bins)


def cmd_density(config: RunConfig, matrix: ComplexMatrix, logger) -> int:
    spec = EnsembleSpec.parse(config.ensemble, matrix.n)
    try:
        model = build_model(
            matrix, spec, config.quad_order,
            method=config.quadrature, near_knot=config.near_knot,
            cdf_resolution=config.cdf_resolution,
        )
    except (AnalyticFormUnavailable, PointMassError) as e:
        curve = _fallback(matrix, spec, config, e, logger)
        code = EXIT_UNSUPPORTED
    else:
        xs = _grid_for(model.knots, config)
        curve = tabulate(model.density, model.knots, xs, workers=config.workers)
        for loc, weight in model.atoms:
            logger.info(f"Point mass {weight:g} at {loc!r} (not part of the density column)")
        code = EXIT_OK

    path = write_curve(curve, config.out)
    logger.info(f"Density written: {path} ({len(curve.x)} points, analytic={curve.analytic})")
    if config.svg:
        svg = write_svg(curve, config.svg, title=f"{spec.label} shadow of {config.matrix_source}")
        logger.info(f"SVG written: {svg}")
    return code


def cmd_sample(config: RunConfig, matrix: ComplexMatrix, logger) -> int:
    spec = EnsembleSpec.parse(config.ensemble, matrix.n)
    sample = _sample(matrix, spec, config, logger)
    path = write_samples(sample, config.out)
    logger.info(f"Samples written: {path}")
    if config.histogram:
        values = sample.marginal("real") if sample.is_complex else sample
        hist = write_histogram(histogram(values, config.bins), config.histogram)
        logger.info(f"Histogram written: {hist}")
    if not sample.is_complex:
        logger.info(f"Sample mean {sample.mean():.6g}, variance {sample.variance():.6g}")
    return EXIT_OK


def validation_report(model: ShadowModel, sample, config: RunConfig) -> dict:
    """
    KS distance plus mean/variance checks against the model moments.
    """
    n = sample.count
    ks = ks_distance(sample, model.cdf)
    mean, var = model.mean_variance()
    s_mean, s_var = sample.mean(), sample.variance()
    m4 = sample.central_moment(4)
    tiny = 1e-12 * max(1.0, abs(mean))
    se_mean = math.sqrt(var / n)
    se_var = math.sqrt(max(m4 - s_var**2, 0.0) / n)
    mean_ok = abs(s_mean - mean) <= config.sigmas * se_mean + tiny
    var_ok = abs(s_var - var) <= config.sigmas * se_var + tiny
    ks_ok = ks < config.threshold
    return {
        "ensemble": sample.ensemble,
        "model": model.ensemble,
        "samples": n,
        "seed": sample.seed,
        "ks_distance": ks,
        "ks_pvalue": ks_pvalue(ks, n),
        "ks_threshold": config.threshold,
        "mean_model": mean,
        "mean_sample": s_mean,
        "mean_delta": s_mean - mean,
        "variance_model": var,
        "variance_sample": s_var,
        "variance_delta": s_var - var,
        "ks_pass": ks_ok,
        "mean_pass": mean_ok,
        "variance_pass": var_ok,
        "pass": ks_ok and mean_ok and var_ok,
    }


def cmd_compare(config: RunConfig, matrix: ComplexMatrix, logger) -> int:
    spec = EnsembleSpec.parse(config.ensemble, matrix.n)
    model_spec = EnsembleSpec.parse(config.model_ensemble or config.ensemble, matrix.n)
    try:
        model = build_model(
            matrix, model_spec, config.quad_order,
            method=config.quadrature, near_knot=config.near_knot,
            cdf_resolution=config.cdf_resolution,
        )
    except (AnalyticFormUnavailable, PointMassError) as e:
        logger.error(f"Nothing to compare against: {e}")
        return EXIT_UNSUPPORTED

    sample = _sample(matrix, spec, config, logger)
    report = validation_report(model, sample, config)
    for key, value in report.items():
        print(f"{key:>16}: {format_value(value)}")
    path = write_report(report, config.out)
    logger.info(f"Report written: {path}")

    if not report["pass"]:
        logger.error(f"Validation failed: KS={report['ks_distance']:.4g}")
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {"density": cmd_density, "sample": cmd_sample, "compare": cmd_compare}


def run(args: argparse.Namespace) -> int:
    """
    Load config and matrix, dispatch the sub-command, record the run in the ledger.
    """
    cfg = load_yaml(CONFIG_FILE)
    level = logging.DEBUG if args.verbose else get_setting(cfg, "logging.level", "INFO")
    logger = init_logger(level)

    try:
        config = build_config(args, cfg)
        matrix = load_matrix(config.matrix_source)
        EnsembleSpec.parse(config.ensemble, matrix.n)
        if config.model_ensemble:
            EnsembleSpec.parse(config.model_ensemble, matrix.n)
    except (UsageError, ShadowError) as e:
        logger.error(f"Invalid arguments: {e}")
        return EXIT_USAGE

    fingerprint = config.fingerprint()
    if config.ledger and already_recorded(config.command, fingerprint):
        logger.info("Identical run found in the ledger; output will be the same")

    try:
        code = COMMANDS[config.command](config, matrix, logger)
    except (AnalyticFormUnavailable, PointMassError, DomainError) as e:
        logger.error(f"Unsupported ensemble/matrix combination: {e}")
        code = EXIT_UNSUPPORTED
    except Exception as e:
        logger.exception("Run failed: %s", e)
        code = EXIT_FAILURE

    if config.ledger:
        write_audit(
            command=config.command,
            fingerprint=fingerprint,
            matrix=config.matrix_source,
            ensemble=config.ensemble,
            model_ensemble=config.model_ensemble,
            seed=config.seed,
            samples=config.samples,
            out=str(config.out),
            exit_code=code,
            status="ok" if code == EXIT_OK else "failed",
        )
    return code


def _add_common(p: argparse.ArgumentParser):
    p.add_argument(
        "--matrix", required=True,
        help="diag:v1,v2,... | rows:a,b;c,d | file:<csv> | fixture:<name>",
    )
    p.add_argument(
        "--ensemble", default="complex",
        help="complex | real | quaternion | mixed:K | real-mixed:K | entangled-complex"
        " | entangled-real",
    )
    p.add_argument("--samples", type=int, help="Monte Carlo sample count.")
    p.add_argument("--seed", type=int, help=f"Random seed (fallback: ${SEED_ENV}, then config).")
    p.add_argument("--bins", type=int, help="Histogram bins.")
    p.add_argument("--quad-order", type=int, help="Gauss-Chebyshev nodes per knot interval.")
    p.add_argument(
        "--quadrature", choices=["auto", "chebyshev", "adaptive"],
        help="Real-shadow quadrature rule.",
    )
    p.add_argument("--workers", type=int, help="Threads for sampling and grid evaluation.")
    p.add_argument("--out", type=Path, help="Output CSV path.")
    p.add_argument("--no-ledger", action="store_true", help="Do not append to the run ledger.")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="shadowlab",
        description="Numerical shadows: closed-form densities and Monte Carlo checks.",
    )
    sub = p.add_subparsers(dest="cmd")

    # density
    pd_ = sub.add_parser("density", help="Evaluate a shadow density on a grid.")
    _add_common(pd_)
    pd_.add_argument("--grid", type=str, help="xmin:xmax:points (default: the support).")
    pd_.add_argument("--svg", type=Path, help="Also write an SVG plot.")
    pd_.set_defaults(func=run)

    # sample
    ps = sub.add_parser("sample", help="Draw Monte Carlo shadow values.")
    _add_common(ps)
    ps.add_argument("--histogram", type=Path, help="Also write a binned histogram CSV.")
    ps.set_defaults(func=run)

    # compare
    pc = sub.add_parser("compare", help="Check a closed form against Monte Carlo.")
    _add_common(pc)
    pc.add_argument("--threshold", type=float, help="KS pass threshold.")
    pc.add_argument(
        "--model-ensemble", type=str,
        help="Closed form to test against (default: the sampled ensemble).",
    )
    pc.set_defaults(func=run)

    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
