import json
import logging
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

from src.mc_engine import McConfig
from src.modelspec import (
    ConfigReport,
    CorrelationForm,
    CorrelationSpec,
    ModelConfig,
    Regime,
    VolForm,
    VolSurfaceSpec,
    validate_config,
)
from src.quadrature import QuadratureConfig, QuadratureRule
from src.results import PricingResult, save_results_to_csv
from src.termstructure import CurveSet, MarketData, Tenor
from src.utils import (
    CurveError,
    InputFileError,
    get_logger,
    key_line,
    load_dict_from_json_file,
)

# Initialize logger
logger: logging.Logger = get_logger()

SCHEMA_VERSION: int = 1

# File names of a use case directory
CURVES_FILENAME: str = "curves.json"
MODEL_FILENAME: str = "model.json"

# Keys of a volatility surface block
VOL_KEYS: frozenset[str] = frozenset(("form", "level", "a", "b", "c", "d", "scales"))

# Model file key of each volatility role
VOL_ROLES: dict[str, str] = {
    "domestic_libor": "dom_libor_vol",
    "foreign_libor": "for_libor_vol",
    "terminal_fx": "terminal_fx_vol",
}

# Curve error message fragments and the curve file keys they point at
CURVE_ERROR_KEYS: tuple[tuple[str, str], ...] = (
    ("domestic", "domestic_discounts"),
    ("foreign", "foreign_discounts"),
    ("Tenor", "tenor_dates"),
    ("tenor", "tenor_dates"),
    ("Spot", "spot_fx"),
    ("Pillar", "pillar_times"),
)


@dataclass(frozen=True)
class ModelFile:
    """Contents of a model file: the model and the numerical defaults."""

    model: ModelConfig
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    monte_carlo: McConfig = field(default_factory=McConfig)


@dataclass(frozen=True)
class _Source:
    # A parsed input file, used to anchor error messages
    path: Path
    raw: str

    def error(self, key: str, message: str) -> InputFileError:
        line: int = key_line(self.raw, key)
        where: str = f"{self.path}:{line}" if line else f"{self.path}"
        return InputFileError(f"{where}: {message}")

    def require(self, data: dict[str, Any], key: str) -> Any:
        if key not in data:
            raise self.error(key, f"missing key '{key}'")
        return data[key]

    def number(
        self, data: dict[str, Any], key: str, default: float | None = None
    ) -> float:
        value: Any = (
            self.require(data, key) if default is None else data.get(key, default)
        )
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise self.error(key, f"'{key}' must be a number, got {value!r}")
        return float(value)

    def numbers(self, data: dict[str, Any], key: str) -> tuple[float, ...]:
        values: Any = self.require(data, key)
        if not isinstance(values, list) or not all(
            isinstance(v, int | float) and not isinstance(v, bool) for v in values
        ):
            raise self.error(key, f"'{key}' must be a list of numbers")
        return tuple(float(v) for v in values)

    def choice[E: StrEnum](self, enum: type[E], value: Any, key: str) -> E:
        try:
            return enum(value)
        except ValueError:
            allowed: str = ", ".join(member.value for member in enum)
            raise self.error(
                key, f"unknown {key} {value!r} (allowed: {allowed})"
            ) from None


def _check_schema(source: _Source, data: dict[str, Any]) -> None:
    version: Any = source.require(data, "schema_version")
    if version != SCHEMA_VERSION:
        raise source.error(
            "schema_version",
            f"schema_version {version!r} not supported, expected {SCHEMA_VERSION}",
        )


def load_curves(path: Path) -> MarketData:
    """
    Load a curve file.
    Parameters
    ----------
    path : Path
        The curves JSON file.
    Returns
    -------
    MarketData
        The validated curves and tenor.
    Raises
    ------
    InputFileError
        On a parse error, a schema mismatch or a curve invariant violation; the
        message is anchored to the line of the offending key.
    """
    data, raw = load_dict_from_json_file(path)
    source: _Source = _Source(path, raw)
    _check_schema(source, data)
    dates: tuple[float, ...] = source.numbers(data, "tenor_dates")
    pillars: tuple[float, ...] = (
        source.numbers(data, "pillar_times") if "pillar_times" in data else dates
    )
    domestic: tuple[float, ...] = source.numbers(data, "domestic_discounts")
    foreign: tuple[float, ...] = source.numbers(data, "foreign_discounts")
    spot: float = source.number(data, "spot_fx")
    for key, values in (
        ("domestic_discounts", domestic),
        ("foreign_discounts", foreign),
    ):
        if len(values) != len(pillars):
            raise source.error(
                key, f"'{key}' holds {len(values)} values, {len(pillars)} expected"
            )
    if "pillar_times" in data and not set(dates) <= set(pillars):
        raise source.error("pillar_times", "pillar_times must contain every tenor date")
    try:
        market: MarketData = MarketData(
            CurveSet(pillars, domestic, foreign, spot), Tenor(dates)
        )
    except CurveError as e:
        key: str = next(
            (k for fragment, k in CURVE_ERROR_KEYS if fragment in str(e)),
            "tenor_dates",
        )
        raise source.error(key, str(e)) from e
    logger.info(f"Loaded curves from {path}: N={market.tenor.n}, X(0)={spot}")
    return market


def write_curves(market: MarketData, path: Path) -> None:
    """Write a curve file that load_curves reads back unchanged."""
    curves: CurveSet = market.curves
    data: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "tenor_dates": list(market.tenor.dates),
    }
    if tuple(curves.pillar_times) != tuple(market.tenor.dates):
        data["pillar_times"] = list(curves.pillar_times)
    data["domestic_discounts"] = list(curves.domestic_discounts)
    data["foreign_discounts"] = list(curves.foreign_discounts)
    data["spot_fx"] = curves.spot_fx
    with path.open("w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def _parse_vol(source: _Source, block: Any, key: str) -> VolSurfaceSpec:
    if not isinstance(block, dict):
        raise source.error(key, f"'{key}' must be an object")
    if unknown := set(block) - VOL_KEYS:
        raise source.error(key, f"'{key}' has unknown keys {sorted(unknown)}")
    form: VolForm = source.choice(VolForm, block.get("form", "constant"), "form")
    params: dict[str, float] = {
        name: source.number(block, name, 0.0) for name in ("level", "a", "b", "c", "d")
    }
    scales: tuple[float, ...] = (
        source.numbers(block, "scales") if "scales" in block else ()
    )
    return VolSurfaceSpec(form=form, scales=scales, **params)


def _implied_tenor(model: ModelConfig) -> Tenor:
    # Unit-spaced tenor long enough for every scale factor list
    n: int = max(
        1,
        len(model.dom_libor_vol.scales),
        len(model.for_libor_vol.scales) if model.for_libor_vol else 0,
        len(model.terminal_fx_vol.scales) - 1,
    )
    return Tenor(tuple(float(k) for k in range(n + 1)))


def load_model_file(path: Path, tenor: Tenor | None = None) -> ModelFile:
    """
    Load a model file with its quadrature and Monte Carlo defaults.
    Parameters
    ----------
    path : Path
        The model JSON file.
    tenor : Tenor | None
        Tenor to validate against; None uses a unit-spaced tenor covering the
        scale factors of the file.
    Returns
    -------
    ModelFile
        The validated model and numerical settings.
    Raises
    ------
    InputFileError
        On a parse error, an unknown token or a failed validate_config.
    """
    data, raw = load_dict_from_json_file(path)
    source: _Source = _Source(path, raw)
    _check_schema(source, data)
    regime: Regime = source.choice(Regime, source.require(data, "regime"), "regime")
    surfaces: Any = source.require(data, "vol_surfaces")
    if not isinstance(surfaces, dict):
        raise source.error("vol_surfaces", "'vol_surfaces' must be an object")
    if unknown := set(surfaces) - set(VOL_ROLES):
        raise source.error(
            "vol_surfaces", f"unknown volatility roles {sorted(unknown)}"
        )
    vols: dict[str, VolSurfaceSpec | None] = {
        field_name: (
            _parse_vol(source, surfaces[role], role) if role in surfaces else None
        )
        for role, field_name in VOL_ROLES.items()
    }
    for role in ("domestic_libor", "terminal_fx"):
        if vols[VOL_ROLES[role]] is None:
            raise source.error("vol_surfaces", f"missing volatility surface '{role}'")
    block: Any = source.require(data, "correlation")
    if not isinstance(block, dict):
        raise source.error("correlation", "'correlation' must be an object")
    correlation: CorrelationSpec = CorrelationSpec(
        form=source.choice(CorrelationForm, block.get("form", "exponential"), "form"),
        decay=source.number(block, "decay", 0.0),
        floor=source.number(block, "floor", 0.0),
    )
    model: ModelConfig = ModelConfig(
        regime=regime,
        correlation=correlation,
        quanto_fixed_fx=source.number(data, "quanto_fixed_fx", 1.0),
        **vols,
    )
    report: ConfigReport = validate_config(model, tenor or _implied_tenor(model))
    if not report.passed:
        first: str = report.violations[0]
        anchor: str = (
            "correlation"
            if "correlation" in first
            else "vol_surfaces"
            if "volatility" in first
            else "quanto_fixed_fx"
        )
        raise source.error(anchor, f"invalid model: {report}")
    try:
        quadrature: QuadratureConfig = QuadratureConfig(
            **_settings(source, data, "quadrature", QuadratureRule)
        )
    except (TypeError, ValueError) as e:
        raise source.error("quadrature", str(e)) from e
    try:
        monte_carlo: McConfig = McConfig(**_settings(source, data, "monte_carlo"))
    except (TypeError, ValueError) as e:
        raise source.error("monte_carlo", str(e)) from e
    logger.info(f"Loaded model from {path}: regime {regime.value}")
    return ModelFile(model, quadrature, monte_carlo)


def _settings(
    source: _Source,
    data: dict[str, Any],
    key: str,
    rule_enum: type[QuadratureRule] | None = None,
) -> dict[str, Any]:
    block: Any = data.get(key, {})
    if not isinstance(block, dict):
        raise source.error(key, f"'{key}' must be an object")
    settings: dict[str, Any] = dict(block)
    if rule_enum is not None and "rule" in settings:
        settings["rule"] = source.choice(rule_enum, settings["rule"], "rule")
    return settings


def load_model(path: Path, tenor: Tenor | None = None) -> ModelConfig:
    """Load and validate the model of a model file."""
    return load_model_file(path, tenor).model


def _vol_block(spec: VolSurfaceSpec) -> dict[str, Any]:
    block: dict[str, Any] = {"form": spec.form.value}
    if spec.form == VolForm.CONSTANT:
        block["level"] = spec.level
    else:
        block.update(a=spec.a, b=spec.b, c=spec.c, d=spec.d)
    if spec.scales:
        block["scales"] = list(spec.scales)
    return block


def write_model(model_file: ModelFile, path: Path) -> None:
    """Write a model file that load_model_file reads back unchanged."""
    model: ModelConfig = model_file.model
    surfaces: dict[str, Any] = {
        role: _vol_block(getattr(model, field_name))
        for role, field_name in VOL_ROLES.items()
        if getattr(model, field_name) is not None
    }
    quadrature: QuadratureConfig = model_file.quadrature
    mc: McConfig = model_file.monte_carlo
    data: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "regime": model.regime.value,
        "vol_surfaces": surfaces,
        "correlation": {
            "form": model.correlation.form.value,
            "decay": model.correlation.decay,
            "floor": model.correlation.floor,
        },
        "quanto_fixed_fx": model.quanto_fixed_fx,
        "quadrature": {
            "rule": quadrature.rule.value,
            "order": quadrature.order,
            "panels": quadrature.panels,
            "split_diagonal": quadrature.split_diagonal,
        },
        "monte_carlo": {
            "paths": mc.paths,
            "steps_per_accrual": mc.steps_per_accrual,
            "seed": mc.seed,
            "antithetic": mc.antithetic,
            "maturity_resolution": mc.maturity_resolution,
            "block_size": mc.block_size,
        },
    }
    with path.open("w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def write_results(results: list[PricingResult], path: Path) -> None:
    """
    Write results to the CSV file
    `instrument,value,stderr,z_score,diag_key,diag_value`.
    """
    try:
        save_results_to_csv(results, path)
    except OSError:
        logger.exception(f"Cannot write results to {path}")
        raise
    logger.info(f"Wrote {len(results)} results to {path}")


def create_usecase(
    usecase_dir_path: Path, market: MarketData, model_file: ModelFile
) -> None:
    """
    Create a use case directory holding curves.json and model.json.
    Parameters
    ----------
    usecase_dir_path : Path
        The directory to create.
    market : MarketData
        Curves written to curves.json.
    model_file : ModelFile
        Model written to model.json.
    Raises
    ------
    FileExistsError
        If the directory already exists.
    """
    if usecase_dir_path.exists():
        raise FileExistsError(
            f"The use case directory '{usecase_dir_path}' already exists."
        )
    usecase_dir_path.mkdir(parents=True)
    try:
        write_curves(market, usecase_dir_path / CURVES_FILENAME)
        write_model(model_file, usecase_dir_path / MODEL_FILENAME)
    except Exception as e:
        # Clean up by removing the created use case directory
        for child in usecase_dir_path.iterdir():
            child.unlink()
        usecase_dir_path.rmdir()
        raise e
    logger.info(f"Created use case {usecase_dir_path}")
