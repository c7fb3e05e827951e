import argparse
import logging
import sys
from collections import OrderedDict
from collections.abc import Callable
from dataclasses import replace
from pathlib import Path
from typing import Any

from tqdm import tqdm
from tqdm.contrib.logging import logging_redirect_tqdm

from src.analytics import FrozenState, ModelAnalytics
from src.market_io import ModelFile, load_curves, load_model_file, write_results
from src.mc_engine import (
    McConfig,
    PathSet,
    simulate_terminal_measure,
    validate_against_analytic,
)
from src.modelspec import ConfigReport, ModelConfig, Regime, validate_config
from src.pricers import (
    CcsSpec,
    FxOptionSpec,
    QuantoCapSpec,
    ccs_price,
    fx_call,
    quanto_cap,
    quanto_cap_fx_lognormal,
)
from src.quadrature import QuadratureConfig
from src.results import PricingResult, ValidationReport
from src.termstructure import MarketData
from src.utils import (
    CurveError,
    InputFileError,
    ModelError,
    QuadratureError,
    RunContext,
    dict_combinations,
    elapsed_time,
    get_logger,
    set_logger,
)

# Initialize logger
logger: logging.Logger = get_logger()

# Instruments priced by the closed forms
INSTRUMENTS: tuple[str, ...] = ("quanto-cap", "quanto-cap-fx", "ccs", "fx-option")

# Instruments whose contract needs a strike
STRUCK_INSTRUMENTS: frozenset[str] = frozenset(
    ("quanto-cap", "quanto-cap-fx", "fx-option")
)

# Quadrature orders swept by the converge command
CONVERGE_ORDERS: tuple[int, ...] = (2, 4, 8, 16)

# Number of path counts swept by the converge command (geometric, ratio 4)
CONVERGE_PATH_LEVELS: int = 4

EXIT_OK: int = 0
EXIT_FAILURE: int = 1
EXIT_USAGE: int = 2

Instrument = QuantoCapSpec | CcsSpec | FxOptionSpec


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--curves",
        help="Path to the curves JSON file.",
        required=True,
        type=Path,
    )
    parser.add_argument(
        "--model",
        help="Path to the model JSON file.",
        required=True,
        type=Path,
    )
    parser.add_argument(
        "--out",
        help="Path of the results CSV file (default: results.csv).",
        required=False,
        type=Path,
        default=Path("results.csv"),
    )
    parser.add_argument(
        "--strike",
        help="Cap strike or FX option strike (required by caps and FX options).",
        required=False,
        type=float,
        default=None,
    )
    parser.add_argument(
        "--paths",
        help="Number of Monte Carlo paths (default: from the model file).",
        required=False,
        type=int,
        default=None,
    )
    parser.add_argument(
        "--seed",
        help="Monte Carlo seed (default: from the model file).",
        required=False,
        type=int,
        default=None,
    )
    parser.add_argument(
        "--steps",
        help="Time steps per accrual period (default: from the model file).",
        required=False,
        type=int,
        default=None,
    )
    parser.add_argument(
        "--quad-order",
        help="Quadrature nodes per panel (default: from the model file).",
        required=False,
        type=int,
        default=None,
    )
    parser.add_argument(
        "--regime",
        help="Regime expected by the run (default: the model file regime).",
        required=False,
        type=str,
        default=None,
        choices=[regime.value for regime in Regime],
    )
    parser.add_argument(
        "--expiry",
        help="FX option expiry, a tenor date (default: the last tenor date).",
        required=False,
        type=float,
        default=None,
    )
    parser.add_argument(
        "--notional",
        help="Contract notional (default: 1.0).",
        required=False,
        type=float,
        default=1.0,
    )
    parser.add_argument(
        "--log_file",
        help="Path to the log file.",
        required=False,
        type=Path,
        default=None,
    )
    parser.add_argument(
        "--log_level",
        help="Set the logging level (default: INFO).",
        required=False,
        type=str,
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    )


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser with the price, validate, inspect and converge
    commands.
    Returns
    -------
    argparse.ArgumentParser
        The parser.
    """
    parser: argparse.ArgumentParser = argparse.ArgumentParser(
        prog="xccy_pricer.py",
        description=(
            "Price cross-currency LIBOR derivatives with closed forms and validate "
            "them against a Monte Carlo simulation of the random field."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    price: argparse.ArgumentParser = commands.add_parser(
        "price", help="Closed-form price of an instrument."
    )
    price.add_argument("instrument", choices=INSTRUMENTS)
    validate: argparse.ArgumentParser = commands.add_parser(
        "validate", help="Closed form against the Monte Carlo oracle, with z-scores."
    )
    validate.add_argument("instrument", choices=INSTRUMENTS)
    inspect: argparse.ArgumentParser = commands.add_parser(
        "inspect", help="Table of the quanto adjustments and variances."
    )
    inspect.add_argument("instrument", choices=["adjustments"])
    converge: argparse.ArgumentParser = commands.add_parser(
        "converge", help="Quadrature order and path count sweep."
    )
    converge.add_argument(
        "instrument",
        nargs="?",
        default=None,
        choices=INSTRUMENTS,
        help="Instrument to sweep (default: the Quanto cap of the model regime).",
    )
    for subparser in (price, validate, inspect, converge):
        _add_common_arguments(subparser)
    return parser


def _configs(
    model_file: ModelFile, args: argparse.Namespace
) -> tuple[ModelConfig, QuadratureConfig, McConfig]:
    model: ModelConfig = model_file.model
    if args.regime is not None and args.regime != model.regime:
        model = replace(model, regime=Regime(args.regime))
    quadrature: QuadratureConfig = model_file.quadrature
    if args.quad_order is not None:
        quadrature = replace(quadrature, order=args.quad_order)
    mc: McConfig = model_file.monte_carlo
    overrides: dict[str, int] = {
        key: value
        for key, value in (
            ("paths", args.paths),
            ("seed", args.seed),
            ("steps_per_accrual", args.steps),
        )
        if value is not None
    }
    if overrides:
        mc = replace(mc, **overrides)
    return model, quadrature, mc


def _instrument(
    name: str, args: argparse.Namespace, market: MarketData, model: ModelConfig
) -> Instrument:
    if name == "ccs":
        return CcsSpec(args.notional)
    if name == "fx-option":
        expiry: float = (
            args.expiry if args.expiry is not None else market.tenor.dates[-1]
        )
        return FxOptionSpec(expiry, args.strike, args.notional)
    model.require_regime(Regime.CASE_I if name == "quanto-cap" else Regime.CASE_II)
    return QuantoCapSpec(args.strike, model.quanto_fixed_fx, args.notional)


def _price(
    name: str,
    instrument: Instrument,
    market: MarketData,
    model: ModelConfig,
    quadrature: QuadratureConfig,
) -> PricingResult:
    pricers: dict[str, Callable[..., PricingResult]] = {
        "quanto-cap": quanto_cap,
        "quanto-cap-fx": quanto_cap_fx_lognormal,
        "fx-option": fx_call,
    }
    if name == "ccs":
        return ccs_price(market, model, None, quadrature, instrument)
    return pricers[name](instrument, market, model, quadrature)


def _inspect(
    market: MarketData, model: ModelConfig, quadrature: QuadratureConfig
) -> list[PricingResult]:
    report = ModelAnalytics(model, market.tenor, quadrature).report(
        FrozenState.from_market(market)
    )
    variance_label, drift_label = report.labels
    results: list[PricingResult] = []
    for entry in report.entries:
        for label, value in (
            (variance_label, entry.variance),
            (drift_label, entry.drift),
        ):
            results.append(
                PricingResult(
                    f"{label}.{entry.index}",
                    value.value,
                    diagnostics=OrderedDict(quadrature_err=value.error),
                )
            )
    results.append(
        PricingResult(
            "gamma_fx",
            report.gamma_fx.value,
            diagnostics=OrderedDict(quadrature_err=report.gamma_fx.error),
        )
    )
    return results


def _path_counts(paths: int, antithetic: bool) -> list[int]:
    counts: list[int] = []
    count: int = paths
    while count >= 2 and len(counts) < CONVERGE_PATH_LEVELS:
        counts.insert(0, count)
        count //= 4
        if antithetic:
            count -= count % 2
    return counts


def _converge(
    name: str,
    instrument: Instrument,
    market: MarketData,
    model: ModelConfig,
    quadrature: QuadratureConfig,
    mc: McConfig,
    workers: int,
) -> list[PricingResult]:
    sweep: list[dict[str, Any]] = dict_combinations(
        {
            "order": list(CONVERGE_ORDERS),
            "paths": _path_counts(mc.paths, mc.antithetic),
        }
    )
    logger.info(f"Sweeping {len(sweep)} combinations for {name}")
    simulated: dict[int, PathSet] = {}
    results: list[PricingResult] = []
    with logging_redirect_tqdm([logger]):
        for combination in tqdm(sweep, desc="Convergence sweep"):
            logger.debug(
                " -- ".join(f"{key}: {value}" for key, value in combination.items())
            )
            cfg: QuadratureConfig = replace(quadrature, order=combination["order"])
            run_mc: McConfig = replace(mc, paths=combination["paths"])
            if run_mc.paths not in simulated:
                simulated[run_mc.paths] = simulate_terminal_measure(
                    market, model, run_mc, cfg=cfg, workers=workers
                )
            total: ValidationReport = validate_against_analytic(
                instrument,
                market,
                model,
                run_mc,
                cfg,
                paths=simulated[run_mc.paths],
            )[-1]
            result: PricingResult = total.to_result()
            result.instrument = (
                f"{name}.order.{combination['order']}.paths.{combination['paths']}"
            )
            result.diagnostics["quad_order"] = combination["order"]
            result.diagnostics["paths"] = combination["paths"]
            results.append(result)
    return results


def _execute(
    args: argparse.Namespace,
    parser: argparse.ArgumentParser,
    context: RunContext,
) -> tuple[list[PricingResult], int]:
    start_time: float = elapsed_time()
    market: MarketData = load_curves(args.curves)
    model_file: ModelFile = load_model_file(args.model, market.tenor)
    model, quadrature, mc = _configs(model_file, args)
    if model is not model_file.model:
        report: ConfigReport = validate_config(model, market.tenor)
        if not report.passed:
            raise ModelError(f"invalid model for regime {model.regime.value}: {report}")
    name: str = args.instrument
    if args.command == "converge" and name is None:
        name = "quanto-cap" if model.regime == Regime.CASE_I else "quanto-cap-fx"
    if name in STRUCK_INSTRUMENTS and args.strike is None:
        parser.error(f"{args.command} {name} requires --strike")
    context.instrument = name
    context.effective.update(
        regime=model.regime.value,
        quad_rule=quadrature.rule.value,
        quad_order=quadrature.order,
        quad_panels=quadrature.panels,
        paths=mc.paths,
        seed=mc.seed,
        steps_per_accrual=mc.steps_per_accrual,
        antithetic=int(mc.antithetic),
        maturity_resolution=mc.maturity_resolution,
        block_size=mc.block_size,
        strike=args.strike,
        expiry=args.expiry,
        notional=args.notional,
        quanto_fixed_fx=model.quanto_fixed_fx,
    )
    logger.debug(f"Run context: {context}")

    exit_code: int = EXIT_OK
    if args.command == "inspect":
        results: list[PricingResult] = _inspect(market, model, quadrature)
    else:
        instrument: Instrument = _instrument(name, args, market, model)
        if args.command == "price":
            results = [_price(name, instrument, market, model, quadrature)]
        elif args.command == "validate":
            reports: list[ValidationReport] = validate_against_analytic(
                instrument,
                market,
                model,
                mc,
                quadrature,
                workers=context.mc_workers,
            )
            results = [report.to_result() for report in reports]
            if not all(report.passed for report in reports):
                exit_code = EXIT_FAILURE
        else:
            results = _converge(
                name, instrument, market, model, quadrature, mc, context.mc_workers
            )
    logger.info(f"{args.command} {name} done in {elapsed_time(start_time):.2f} s")
    return results, exit_code


def run(argv: list[str] | None = None) -> int:
    """
    Run one command of the pricer.
    Parameters
    ----------
    argv : list[str] | None
        Command line arguments without the program name; None reads sys.argv.
    Returns
    -------
    int
        0 on success, 1 on a model or validation failure, 2 on a usage or input
        file error.
    """
    parser: argparse.ArgumentParser = build_parser()
    try:
        args: argparse.Namespace = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code is None else int(e.code)

    # Set logger with given log_level and log_file
    set_logger(log_level=args.log_level, log_file=args.log_file)

    context: RunContext = RunContext(
        command=args.command,
        instrument=args.instrument or "",
        curves_path=args.curves,
        model_path=args.model,
        out_path=args.out,
        overrides={
            key: value
            for key, value in (
                ("strike", args.strike),
                ("paths", args.paths),
                ("seed", args.seed),
                ("steps", args.steps),
                ("quad_order", args.quad_order),
                ("regime", args.regime),
                ("expiry", args.expiry),
            )
            if value is not None
        },
    )
    try:
        results, exit_code = _execute(args, parser, context)
    except SystemExit as e:
        return EXIT_USAGE if e.code is None else int(e.code)
    except InputFileError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (ModelError, CurveError, QuadratureError) as e:
        logger.error(str(e))
        return EXIT_FAILURE
    except (IndexError, ValueError) as e:
        logger.error(f"Invalid arguments: {e}")
        return EXIT_USAGE

    if results:
        results[-1].diagnostics.update(context.settings())
    try:
        write_results(results, args.out)
    except OSError:
        return EXIT_FAILURE
    for result in results:
        sys.stdout.write(f"{result}\n")
    return exit_code
