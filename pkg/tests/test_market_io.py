import json
import re
from dataclasses import replace
from pathlib import Path

import pytest

from src.market_io import (
    CURVES_FILENAME,
    MODEL_FILENAME,
    ModelFile,
    create_usecase,
    load_curves,
    load_model,
    load_model_file,
    write_curves,
    write_model,
    write_results,
)
from src.mc_engine import McConfig
from src.modelspec import Regime, VolForm, VolSurfaceSpec
from src.quadrature import QuadratureConfig, QuadratureRule
from src.results import RESULT_FIELDS, PricingResult
from src.termstructure import Tenor
from src.utils import InputFileError, key_line

USECASES_DIR: Path = Path(__file__).parents[1] / "usecases"


def write_json(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def curves_data() -> dict:
    return {
        "schema_version": 1,
        "tenor_dates": [0.0, 0.5, 1.0],
        "domestic_discounts": [1.0, 0.99, 0.98],
        "foreign_discounts": [1.0, 0.985, 0.97],
        "spot_fx": 1.1,
    }


@pytest.fixture
def model_data() -> dict:
    return {
        "schema_version": 1,
        "regime": "case_i",
        "vol_surfaces": {
            "domestic_libor": {"form": "constant", "level": 0.2},
            "foreign_libor": {"form": "constant", "level": 0.2},
            "terminal_fx": {"form": "constant", "level": 0.1},
        },
        "correlation": {"form": "exponential", "decay": 0.5},
    }


def test_curves_round_trip(tmp_path, semiannual_market):
    path: Path = tmp_path / "curves.json"
    write_curves(semiannual_market, path)
    assert load_curves(path) == semiannual_market


def test_curves_with_pillars(tmp_path, curves_data):
    curves_data |= {
        "pillar_times": [0.0, 0.5, 1.0, 2.0],
        "domestic_discounts": [1.0, 0.99, 0.98, 0.95],
        "foreign_discounts": [1.0, 0.985, 0.97, 0.94],
    }
    market = load_curves(write_json(tmp_path / "curves.json", curves_data))
    assert market.tenor.dates == (0.0, 0.5, 1.0)
    assert market.curves.discount(1.5) == pytest.approx((0.98 * 0.95) ** 0.5)
    write_curves(market, tmp_path / "again.json")
    assert load_curves(tmp_path / "again.json") == market


def test_curves_not_decreasing(tmp_path, curves_data):
    curves_data["domestic_discounts"] = [1.0, 0.98, 0.99]
    path: Path = write_json(tmp_path / "curves.json", curves_data)
    with pytest.raises(InputFileError, match="not strictly decreasing at index 2"):
        load_curves(path)
    # The message points at the domestic discounts line
    line: int = key_line(path.read_text(encoding="utf-8"), "domestic_discounts")
    with pytest.raises(InputFileError, match=re.escape(f"{path}:{line}:")):
        load_curves(path)


@pytest.mark.parametrize(
    "change, message",
    [
        ({"schema_version": 2}, "schema_version 2 not supported"),
        ({"spot_fx": "1.1"}, "'spot_fx' must be a number"),
        ({"spot_fx": -1.0}, "Spot FX must be positive"),
        ({"foreign_discounts": [1.0, 0.97]}, "holds 2 values, 3 expected"),
        (
            {"tenor_dates": [0.0], "pillar_times": [0.0, 0.5, 1.0]},
            "at least two dates",
        ),
    ],
)
def test_curves_errors(tmp_path, curves_data, change, message):
    path: Path = write_json(tmp_path / "curves.json", curves_data | change)
    with pytest.raises(InputFileError, match=message):
        load_curves(path)


def test_curves_missing_key(tmp_path, curves_data):
    del curves_data["spot_fx"]
    with pytest.raises(InputFileError, match="missing key 'spot_fx'"):
        load_curves(write_json(tmp_path / "curves.json", curves_data))


def test_invalid_json_reports_line(tmp_path):
    path: Path = tmp_path / "curves.json"
    path.write_text('{\n  "schema_version": 1,\n  "spot_fx": ,\n}\n', encoding="utf-8")
    with pytest.raises(InputFileError, match=re.escape(f"{path}:3: invalid JSON")):
        load_curves(path)


def test_missing_file(tmp_path):
    with pytest.raises(InputFileError, match="cannot read file"):
        load_curves(tmp_path / "missing.json")


def test_model_round_trip(tmp_path, make_model):
    hump = VolSurfaceSpec(VolForm.REBONATO, a=0.05, b=0.1, c=1.0, d=0.1)
    model_file = ModelFile(
        replace(make_model(Regime.CASE_II, decay=0.3), for_libor_vol=hump),
        QuadratureConfig(QuadratureRule.COMPOSITE_TRAPEZOID, 5, 3, False),
        McConfig(paths=1000, seed=9, antithetic=False),
    )
    path: Path = tmp_path / "model.json"
    write_model(model_file, path)
    assert load_model_file(path) == model_file
    assert load_model(path) == model_file.model


def test_model_defaults(tmp_path, model_data):
    model_file = load_model_file(write_json(tmp_path / "model.json", model_data))
    assert model_file.model.quanto_fixed_fx == 1.0
    assert model_file.quadrature == QuadratureConfig()
    assert model_file.monte_carlo == McConfig()


def test_model_unknown_regime(tmp_path, model_data):
    model_data["regime"] = "case_iii"
    path: Path = write_json(tmp_path / "model.json", model_data)
    with pytest.raises(InputFileError, match=r"allowed: case_i, case_ii") as e:
        load_model_file(path)
    assert f"{path}:3:" in str(e.value)


def test_model_negative_decay(tmp_path, model_data):
    model_data["correlation"]["decay"] = -1.0
    with pytest.raises(InputFileError, match="invalid model: .*decay must be >= 0"):
        load_model_file(write_json(tmp_path / "model.json", model_data))


def test_model_case_ii_without_foreign_volatility(tmp_path, model_data):
    model_data["regime"] = "case_ii"
    del model_data["vol_surfaces"]["foreign_libor"]
    with pytest.raises(InputFileError, match="missing foreign volatility"):
        load_model_file(write_json(tmp_path / "model.json", model_data))


def test_model_missing_surface(tmp_path, model_data):
    del model_data["vol_surfaces"]["terminal_fx"]
    with pytest.raises(InputFileError, match="missing volatility surface"):
        load_model_file(write_json(tmp_path / "model.json", model_data))


def test_model_scales_checked_against_tenor(tmp_path, model_data):
    model_data["vol_surfaces"]["domestic_libor"]["scales"] = [1.0, 1.0, 1.0]
    path: Path = write_json(tmp_path / "model.json", model_data)
    assert load_model_file(path).model.dom_libor_vol.scales == (1.0, 1.0, 1.0)
    with pytest.raises(InputFileError, match="scale factors"):
        load_model_file(path, Tenor((0.0, 0.5, 1.0)))


@pytest.mark.parametrize(
    "key, block, message",
    [
        ("quadrature", {"order": 1}, "order"),
        ("quadrature", {"rule": "simpson"}, "unknown rule"),
        ("monte_carlo", {"paths": 1}, "at least 2 paths"),
        ("monte_carlo", {"walkers": 3}, "walkers"),
    ],
)
def test_model_numerical_settings(tmp_path, model_data, key, block, message):
    model_data[key] = block
    with pytest.raises(InputFileError, match=message):
        load_model_file(write_json(tmp_path / "model.json", model_data))


@pytest.mark.parametrize("name", ["flat_semiannual", "lognormal_fx"])
def test_bundled_usecases_load(name):
    market = load_curves(USECASES_DIR / name / CURVES_FILENAME)
    model_file = load_model_file(USECASES_DIR / name / MODEL_FILENAME, market.tenor)
    assert market.tenor.n >= 1
    assert model_file.monte_carlo.paths >= 2


def test_write_results(tmp_path):
    path: Path = tmp_path / "results.csv"
    write_results([], path)
    assert path.read_text(encoding="utf-8") == ",".join(RESULT_FIELDS) + "\n"
    write_results([PricingResult("fx-call", 0.25)], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[1:] == ["fx-call,0.25,,,,"]


def test_create_usecase(tmp_path, semiannual_market, make_model):
    model_file = ModelFile(make_model())
    usecase: Path = tmp_path / "usecases" / "new_case"
    create_usecase(usecase, semiannual_market, model_file)
    assert load_curves(usecase / CURVES_FILENAME) == semiannual_market
    assert load_model_file(usecase / MODEL_FILENAME) == model_file
    with pytest.raises(FileExistsError):
        create_usecase(usecase, semiannual_market, model_file)
