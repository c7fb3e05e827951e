import csv
from collections import OrderedDict

import pytest

from src.results import (
    RESULT_FIELDS,
    PricingResult,
    ValidationReport,
    format_number,
    results_to_rows,
    save_results_to_csv,
)


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, ""),
        (0.1, "0.10000000000000001"),
        (1.0, "1"),
        (-0.25, "-0.25"),
        (12, "12"),
        ("quanto-cap", "quanto-cap"),
    ],
)
def test_format_number(value, expected):
    assert format_number(value) == expected


def test_format_number_round_trips():
    value: float = 0.1 + 0.2
    assert float(format_number(value)) == value


def test_result_rows():
    result = PricingResult(
        "fx-call", 0.05, diagnostics=OrderedDict(d1=0.1, d2=-0.1, frozen=1)
    )
    rows = result.rows()
    assert [row["diag_key"] for row in rows] == ["d1", "d2", "frozen"]
    assert all(row["value"] == "0.050000000000000003" for row in rows)
    assert all(row["stderr"] == row["z_score"] == "" for row in rows)
    assert list(rows[0]) == list(RESULT_FIELDS)


def test_result_rows_without_diagnostics():
    rows = PricingResult("ccs", -0.01, 0.001).rows()
    assert len(rows) == 1
    assert rows[0]["diag_key"] == rows[0]["diag_value"] == ""
    assert rows[0]["stderr"] == "0.001"


def test_result_rejects_invalid_values():
    with pytest.raises(ValueError):
        PricingResult("fx-call", float("nan"))
    with pytest.raises(ValueError):
        PricingResult("fx-call", 0.1, -1.0)


def test_result_str():
    assert str(PricingResult("fx-call", 0.25)) == "fx-call: 0.25"
    text: str = str(PricingResult("fx-call", 0.25, 0.001, 1.5))
    assert text == "fx-call: 0.25 (stderr 0.001) z=1.500"


@pytest.mark.parametrize(
    "analytic, mc_value, stderr, z_score",
    [
        (1.0, 0.99, 0.005, 2.0),
        (1.0, 1.02, 0.005, -4.0),
        (0.5, 0.5, 0.0, 0.0),
        (0.5, 0.5 + 1e-16, 0.0, 0.0),
        (0.5, 0.4, 0.0, float("inf")),
    ],
)
def test_z_score(analytic, mc_value, stderr, z_score):
    assert ValidationReport("cap", analytic, mc_value, stderr).z_score == pytest.approx(
        z_score
    )


def test_report_commentary():
    passed = ValidationReport("cap", 1.0, 0.99, 0.005)
    failed = ValidationReport("cap", 1.0, 0.9, 0.005)
    assert passed.passed and not failed.passed
    assert passed.relative_bias == pytest.approx(0.01)
    assert passed.commentary == (
        f"relative bias +1.000%; {ValidationReport.AGREE_TEXT}"
    )
    assert failed.commentary == (
        f"relative bias +10.000%; {ValidationReport.DISAGREE_TEXT}"
    )
    assert "z 2.000" in str(passed)


def test_report_commentary_zero_analytic():
    report = ValidationReport("ccs", 0.0, 0.001, 0.01)
    assert report.relative_bias is None
    assert report.commentary.startswith("bias -0.001; within")


def test_report_fails_with_aborted_paths():
    report = ValidationReport("cap", 1.0, 0.999, 0.005, aborted=4)
    assert abs(report.z_score) <= 3
    assert not report.passed
    assert report.commentary == (
        f"relative bias +0.100%; 4 {ValidationReport.ABORTED_TEXT}"
    )


def test_report_to_result():
    result = ValidationReport("cap", 1.0, 0.99, 0.005).to_result()
    assert (result.value, result.stderr) == (0.99, 0.005)
    assert result.z_score == pytest.approx(2.0)
    assert list(result.diagnostics) == ["analytic", "bias", "aborted", "commentary"]
    assert result.diagnostics["bias"] == pytest.approx(0.01)
    assert result.diagnostics["aborted"] == 0


def test_save_results_to_csv(tmp_path):
    results = [
        PricingResult("quanto-cap", 0.002, diagnostics=OrderedDict(frozen=1)),
        ValidationReport("ccs", 0.01, 0.0101, 0.0001).to_result(),
    ]
    path = tmp_path / "results.csv"
    save_results_to_csv(results, path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        assert tuple(reader.fieldnames) == RESULT_FIELDS
        rows = list(reader)
    assert rows == [dict(row) for row in results_to_rows(results)]
    assert [row["diag_key"] for row in rows] == [
        "frozen",
        "analytic",
        "bias",
        "aborted",
        "commentary",
    ]
