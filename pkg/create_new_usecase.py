#!/usr/bin/env python3

"""
Create a new directory with flat example curves and a constant-volatility model
that can be edited to price a new "use case" (a new combination of curves and
model).
"""

import argparse
from pathlib import Path

from src.market_io import ModelFile, create_usecase
from src.modelspec import CorrelationSpec, ModelConfig, Regime, VolSurfaceSpec
from src.termstructure import flat_market
from src.utils import set_logger

USECASES_DIR_PATH: Path = Path(__file__).parent / "usecases"


if __name__ == "__main__":
    parser: argparse.ArgumentParser = argparse.ArgumentParser(
        description="Script to add new use cases for pricing and validation."
    )
    parser.add_argument(
        "--name",
        help="The name of the new use case.",
        required=True,
        type=str,
    )
    parser.add_argument(
        "--regime",
        help="Model regime (default: case_i).",
        required=False,
        type=str,
        default=Regime.CASE_I.value,
        choices=[regime.value for regime in Regime],
    )
    parser.add_argument(
        "--domestic_rate",
        help="Flat domestic LIBOR (default: 0.02).",
        required=False,
        type=float,
        default=0.02,
    )
    parser.add_argument(
        "--foreign_rate",
        help="Flat foreign LIBOR (default: 0.03).",
        required=False,
        type=float,
        default=0.03,
    )
    parser.add_argument(
        "--spot_fx",
        help="Spot exchange rate, domestic per foreign (default: 1.0).",
        required=False,
        type=float,
        default=1.0,
    )
    parser.add_argument(
        "--periods",
        help="Number of semiannual accrual periods (default: 4).",
        required=False,
        type=int,
        default=4,
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

    # Parse arguments
    _args: argparse.Namespace = parser.parse_args()

    # Set logger with given log_level and log_file
    set_logger(log_level=_args.log_level, log_file=_args.log_file)

    new_usecase_name: str = _args.name.strip()
    if not new_usecase_name:
        raise ValueError("The use case name cannot be empty or whitespace.")

    regime: Regime = Regime(_args.regime)
    model: ModelConfig = ModelConfig(
        regime=regime,
        dom_libor_vol=VolSurfaceSpec.constant(0.2),
        # sigma_F stays small when the forward FX rates are lognormal
        for_libor_vol=VolSurfaceSpec.constant(
            0.2 if regime == Regime.CASE_I else 0.01
        ),
        terminal_fx_vol=VolSurfaceSpec.constant(0.1),
        correlation=CorrelationSpec(decay=0.5),
    )
    create_usecase(
        USECASES_DIR_PATH / new_usecase_name,
        flat_market(
            _args.domestic_rate,
            _args.foreign_rate,
            spot_fx=_args.spot_fx,
            periods=_args.periods,
        ),
        ModelFile(model),
    )
