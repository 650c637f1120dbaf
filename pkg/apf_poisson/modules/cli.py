"""Command line entry point wiring simulation, fitting, calibration and studies."""

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, NoReturn

from loguru import logger

from apf_poisson.data_classes.dataset import load_dataset
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    ShiftScaleParams,
    ThetaBox,
)
from apf_poisson.data_classes.results import FitOptions, load_threshold_table
from apf_poisson.modules.estimate import fit_mle
from apf_poisson.modules.family import load_tabulated_model, resolve_model
from apf_poisson.modules.limit import (
    calibrate_simple_threshold,
    calibrate_threshold,
    sample_limit_batch,
    sample_limit_simple_batch,
)
from apf_poisson.modules.math_utils import dump_json
from apf_poisson.modules.simulators import bimodal_alternative, sample_dataset
from apf_poisson.modules.statistic import (
    cvm_plugin_statistic,
    cvm_simple,
    cvm_statistic,
)
from apf_poisson.modules.testkit import (
    apf_check,
    power_study,
    run_simple_test,
    run_test,
    size_study,
)
from config.definitions import (
    DEFAULT_ALPHA_BOUNDS,
    DEFAULT_BETA_BOUNDS,
    DEFAULT_EPSILONS,
    DEFAULT_GRID_POINTS,
    DEFAULT_REPLICATES,
    LOG_LEVEL,
    MLE_GRID_SIZE,
    MLE_MAX_ITER,
    MLE_NUM_STARTS,
)


def _write_error(error: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": error, "message": message}) + "\n")


class JsonArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as a JSON object on stderr."""

    def error(self, message: str) -> NoReturn:
        _write_error("UsageError", f"{self.prog}: {message}")
        self.exit(2)


class Subcommand(Enum):
    """Workflows available on the command line."""

    SIMULATE = "simulate"
    FIT = "fit"
    STAT = "stat"
    CALIBRATE = "calibrate"
    TEST = "test"
    STUDY_SIZE = "study-size"
    STUDY_POWER = "study-power"
    APF_CHECK = "apf-check"
    LIMIT_SAMPLE = "limit-sample"


@dataclass(frozen=True)
class RunConfig:
    """Settings that determine a command's output, echoed into every result file.

    Worker count and file paths are left out since they never change the results.
    """

    command: str
    model_id: str | None = None
    theta: list[float] | None = None
    thetas: list[list[float]] | None = None
    alternative: str | None = None
    alt_theta: list[float] | None = None
    n: int | None = None
    replicates: int | None = None
    seed: int | None = None
    epsilons: list[float] | None = None
    M: int | None = None
    K: int | None = None
    simple: bool | None = None
    plugin: bool | None = None
    independent_seeds: bool | None = None
    theta_box: dict[str, list[float]] | None = None
    fit_options: dict[str, Any] | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace, model_id: str | None) -> "RunConfig":
        """Collect the result-relevant settings of parsed arguments."""
        theta = getattr(args, "theta", None)
        thetas = getattr(args, "thetas", None)
        alt_theta = getattr(args, "alt_theta", None)
        eps = getattr(args, "eps", None)
        has_fit = hasattr(args, "grid_size")
        return cls(
            command=args.command,
            model_id=model_id,
            theta=None if theta is None else theta.as_list(),
            thetas=None if thetas is None else [t.as_list() for t in thetas],
            alternative=getattr(args, "alt", None),
            alt_theta=None if alt_theta is None else alt_theta.as_list(),
            n=getattr(args, "n", None),
            replicates=getattr(args, "replicates", None),
            seed=getattr(args, "seed", None),
            epsilons=None if eps is None else list(eps),
            M=getattr(args, "M", None),
            K=getattr(args, "K", None),
            simple=getattr(args, "simple", None),
            plugin=getattr(args, "plugin", None),
            independent_seeds=getattr(args, "independent_seeds", None),
            theta_box=_theta_box(args).as_dict() if has_fit else None,
            fit_options=_fit_options(args).as_dict() if has_fit else None,
        )

    def as_dict(self) -> dict[str, Any]:
        """Represent the settings for JSON output, skipping unset entries."""
        return {
            item.name: getattr(self, item.name)
            for item in fields(self)
            if getattr(self, item.name) is not None
        }


def _read_thetas(args: argparse.Namespace) -> None:
    """Turn the raw ``alpha,beta`` arguments into validated parameters."""
    for name in ("theta", "alt_theta"):
        text = getattr(args, name, None)
        if isinstance(text, str):
            setattr(args, name, ShiftScaleParams.parse(text))
    if getattr(args, "thetas", None) is not None:
        args.thetas = [ShiftScaleParams.parse(text) for text in args.thetas]


def _parse_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as err:
        msg = f"Expected 'lo,hi', got '{text}'."
        raise argparse.ArgumentTypeError(msg) from err
    return lo, hi


def _parse_levels(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as err:
        msg = f"Expected comma separated levels, got '{text}'."
        raise argparse.ArgumentTypeError(msg) from err


def _theta_box(args: argparse.Namespace) -> ThetaBox:
    return ThetaBox(tuple(args.alpha_bounds), tuple(args.beta_bounds))


def _fit_options(args: argparse.Namespace) -> FitOptions:
    return FitOptions(
        grid_size=args.grid_size, num_starts=args.num_starts, max_iter=args.max_iter
    )


def _single_level(args: argparse.Namespace) -> float:
    if len(args.eps) != 1:
        args.error(f"Exactly one level is expected, got {args.eps}.")
    return args.eps[0]


def _load_model(args: argparse.Namespace) -> BaseIntensityModel | None:
    """Resolve ``--model`` or ``--model-file`` when the command takes a model."""
    if getattr(args, "model_file", None) is not None:
        return load_tabulated_model(args.model_file)
    if getattr(args, "model", None) is not None:
        return resolve_model(args.model)
    return None


def _require_model(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> BaseIntensityModel:
    if model is None:
        args.error("one of the arguments --model --model-file is required")
    return model


def _require_theta(args: argparse.Namespace) -> ShiftScaleParams:
    if args.theta is None:
        args.error("the argument --theta is required here")
    return args.theta


def cmd_simulate(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Simulate a dataset."""
    model = _require_model(args, model)
    dataset = sample_dataset(model, args.theta, args.n, args.seed, args.threads)
    return dataset.as_dict()


def cmd_fit(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Fit the shift and scale of a dataset."""
    model = _require_model(args, model)
    dataset = load_dataset(args.data)
    return fit_mle(model, dataset, _theta_box(args), _fit_options(args)).as_dict()


def cmd_stat(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Evaluate a statistic at a given or fitted parameter."""
    model = _require_model(args, model)
    dataset = load_dataset(args.data)
    if args.simple:
        return cvm_simple(dataset, model, _require_theta(args)).as_dict()
    theta = args.theta
    if theta is None:
        fit = fit_mle(model, dataset, _theta_box(args), _fit_options(args))
        theta = fit.theta_hat
    statistic = cvm_plugin_statistic if args.plugin else cvm_statistic
    return statistic(model, dataset, theta).as_dict()


def cmd_calibrate(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Calibrate test thresholds from limit draws."""
    if args.simple:
        table = calibrate_simple_threshold(
            args.eps, args.M, args.K, args.seed, args.threads
        )
    else:
        model = _require_model(args, model)
        table = calibrate_threshold(
            model, args.eps, args.M, args.K, args.seed, args.threads
        )
    return table.as_dict()


def cmd_test(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Run the test on one dataset."""
    model = _require_model(args, model)
    epsilon = _single_level(args)
    dataset = load_dataset(args.data)
    table = load_threshold_table(args.table)
    if args.simple:
        theta0 = _require_theta(args)
        return run_simple_test(model, dataset, theta0, epsilon, table).as_dict()
    return run_test(
        model, dataset, epsilon, table, _theta_box(args), _fit_options(args)
    ).as_dict()


def cmd_study_size(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Estimate the size of the test under the null hypothesis."""
    model = _require_model(args, model)
    result = size_study(
        model,
        args.theta,
        args.n,
        args.replicates,
        _single_level(args),
        args.seed,
        load_threshold_table(args.table),
        theta_box=_theta_box(args),
        options=_fit_options(args),
        threads=args.threads,
    )
    return result.as_dict()


def cmd_study_power(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Estimate the power of the test against a tabulated alternative."""
    model = _require_model(args, model)
    if args.alt == "bimodal":
        alternative = bimodal_alternative()
    else:
        alternative = load_tabulated_model(args.alt)
    result = power_study(
        model,
        alternative,
        args.n,
        args.replicates,
        _single_level(args),
        args.seed,
        load_threshold_table(args.table),
        alt_params=args.alt_theta,
        theta_box=_theta_box(args),
        options=_fit_options(args),
        threads=args.threads,
    )
    return result.as_dict()


def cmd_apf_check(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Compare the laws of the statistic across true parameters."""
    model = _require_model(args, model)
    result = apf_check(
        model,
        args.thetas,
        args.n,
        args.replicates,
        args.seed,
        M=args.M,
        K=args.K,
        theta_box=_theta_box(args),
        options=_fit_options(args),
        threads=args.threads,
        independent_seeds=args.independent_seeds,
    )
    return result.as_dict()


def cmd_limit_sample(
    args: argparse.Namespace, model: BaseIntensityModel | None
) -> dict[str, Any]:
    """Draw the limit variable."""
    if args.simple:
        draws = sample_limit_simple_batch(args.K, args.M, args.seed, args.threads)
    else:
        model = _require_model(args, model)
        draws = sample_limit_batch(model, args.K, args.M, args.seed, args.threads)
    return {"draws": draws.tolist()}


HANDLERS: dict[Subcommand, Callable[[argparse.Namespace, Any], dict[str, Any]]] = {
    Subcommand.SIMULATE: cmd_simulate,
    Subcommand.FIT: cmd_fit,
    Subcommand.STAT: cmd_stat,
    Subcommand.CALIBRATE: cmd_calibrate,
    Subcommand.TEST: cmd_test,
    Subcommand.STUDY_SIZE: cmd_study_size,
    Subcommand.STUDY_POWER: cmd_study_power,
    Subcommand.APF_CHECK: cmd_apf_check,
    Subcommand.LIMIT_SAMPLE: cmd_limit_sample,
}


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser with one subparser per workflow."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Root seed (non-negative)")
    common.add_argument("--threads", type=int, default=1, help="Worker count")
    common.add_argument("-o", "--output", type=Path, help="Output file, default stdout")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    verbosity.add_argument("--quiet", action="store_true", help="Log warnings only")

    model_flags = argparse.ArgumentParser(add_help=False)
    source = model_flags.add_mutually_exclusive_group()
    source.add_argument("--model", type=str, help="Bundled or registered model id")
    source.add_argument("--model-file", type=Path, help="Tabulated model JSON file")

    fit_flags = argparse.ArgumentParser(add_help=False)
    fit_flags.add_argument(
        "--alpha-bounds", type=_parse_pair, default=DEFAULT_ALPHA_BOUNDS, help="a1,a2"
    )
    fit_flags.add_argument(
        "--beta-bounds", type=_parse_pair, default=DEFAULT_BETA_BOUNDS, help="b1,b2"
    )
    fit_flags.add_argument("--grid-size", type=int, default=MLE_GRID_SIZE)
    fit_flags.add_argument("--num-starts", type=int, default=MLE_NUM_STARTS)
    fit_flags.add_argument("--max-iter", type=int, default=MLE_MAX_ITER)

    limit_flags = argparse.ArgumentParser(add_help=False)
    limit_flags.add_argument("--M", type=int, default=DEFAULT_REPLICATES, help="Draws")
    limit_flags.add_argument("--K", type=int, default=DEFAULT_GRID_POINTS, help="Cells")

    parser = JsonArgumentParser(
        prog="apf-poisson",
        description="Goodness of fit test for Poisson processes with shift and scale.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add(
        command: Subcommand, parents: list, help_text: str
    ) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(
            command.value, parents=[common, *parents], help=help_text
        )
        sub.set_defaults(handler=HANDLERS[command], error=sub.error)
        return sub

    sub = add(Subcommand.SIMULATE, [model_flags], "Simulate a dataset")
    sub.add_argument("--theta", required=True, help="alpha,beta")
    sub.add_argument("--n", type=int, required=True, help="Number of trajectories")

    sub = add(Subcommand.FIT, [model_flags, fit_flags], "Fit shift and scale")
    sub.add_argument("--data", type=Path, required=True)

    sub = add(Subcommand.STAT, [model_flags, fit_flags], "Evaluate a statistic")
    sub.add_argument("--data", type=Path, required=True)
    sub.add_argument("--theta", help="alpha,beta (default: fitted)")
    kind = sub.add_mutually_exclusive_group()
    kind.add_argument("--simple", action="store_true", help="Known parameter statistic")
    kind.add_argument("--plugin", action="store_true", help="Mass normalized statistic")

    sub = add(Subcommand.CALIBRATE, [model_flags, limit_flags], "Calibrate thresholds")
    sub.add_argument("--eps", type=_parse_levels, default=list(DEFAULT_EPSILONS))
    sub.add_argument("--simple", action="store_true", help="Known parameter test")

    sub = add(Subcommand.TEST, [model_flags, fit_flags], "Test one dataset")
    sub.add_argument("--data", type=Path, required=True)
    sub.add_argument("--table", type=Path, required=True)
    sub.add_argument("--eps", type=_parse_levels, required=True)
    sub.add_argument("--simple", action="store_true", help="Known parameter test")
    sub.add_argument("--theta", help="alpha,beta of the simple test")

    sub = add(Subcommand.STUDY_SIZE, [model_flags, fit_flags], "Size study")
    sub.add_argument("--theta", required=True)
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--replicates", type=int, required=True)
    sub.add_argument("--eps", type=_parse_levels, required=True)
    sub.add_argument("--table", type=Path, required=True)

    sub = add(Subcommand.STUDY_POWER, [model_flags, fit_flags], "Power study")
    sub.add_argument("--alt", type=str, default="bimodal", help="bimodal or JSON file")
    sub.add_argument("--alt-theta", default="0,1", help="alpha,beta of the alternative")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--replicates", type=int, required=True)
    sub.add_argument("--eps", type=_parse_levels, required=True)
    sub.add_argument("--table", type=Path, required=True)

    sub = add(Subcommand.APF_CHECK, [model_flags, fit_flags, limit_flags], "APF check")
    sub.add_argument("--theta", dest="thetas", action="append", required=True)
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--replicates", type=int, required=True)
    sub.add_argument(
        "--independent-seeds",
        action="store_true",
        help="Draw every parameter from its own substream",
    )

    sub = add(Subcommand.LIMIT_SAMPLE, [model_flags, limit_flags], "Draw the limit")
    sub.add_argument("--simple", action="store_true", help="Draw int_0^1 W(s)^2 ds")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Send log records to stderr at the requested level."""
    level = "DEBUG" if verbose else "WARNING" if quiet else LOG_LEVEL
    logger.remove()
    logger.add(sys.stderr, level=level)


def _emit(payload: dict[str, Any], output: Path | None) -> None:
    text = dump_json(payload)
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {output}.")


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command; handled failures exit with status 1 and a JSON error on stderr.

    :param argv: Arguments without the program name (default ``sys.argv[1:]``)
    :return: Exit status
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        _read_thetas(args)
        model = _load_model(args)
        payload = args.handler(args, model)
        config = RunConfig.from_args(args, None if model is None else model.model_id)
        payload["config"] = config.as_dict()
        _emit(payload, args.output)
    except (ValueError, OSError) as err:
        _write_error(type(err).__name__, str(err))
        return 1
    except Exception as err:
        logger.error(f"Command '{args.command}' failed unexpectedly: {err!r}")
        _write_error(type(err).__name__, str(err))
        return 1
    logger.info(f"Command '{args.command}' complete.")
    return 0
