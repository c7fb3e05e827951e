import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar

# Columns of the results CSV, in order
RESULT_FIELDS: tuple[str, ...] = (
    "instrument",
    "value",
    "stderr",
    "z_score",
    "diag_key",
    "diag_value",
)

# Above this |z| the analytic and Monte Carlo routes disagree
Z_SCORE_LIMIT: float = 3.0

# Gap, relative to max(1, |analytic|), below which both routes agree exactly
ZERO_STDERR_TOLERANCE: float = 1e-12

Diagnostic = float | int | str


def format_number(value: Diagnostic | None) -> str:
    """
    Format a value for the results CSV: floats at 17 significant digits,
    None as an empty field.
    """
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


@dataclass
class PricingResult:
    """
    The value of one instrument or component.
    Attributes
    ----------
    instrument : str
        Instrument label, e.g. quanto-cap or quanto-cap.caplet.2.
    value : float
        Price in domestic currency.
    stderr : float | None
        Monte Carlo standard error, None for closed forms.
    z_score : float | None
        Set on validation rows only.
    diagnostics : OrderedDict[str, Diagnostic]
        Named side values (d1, d2, adjustments, quadrature errors, settings).
    """

    instrument: str
    value: float
    stderr: float | None = None
    z_score: float | None = None
    diagnostics: OrderedDict[str, Diagnostic] = field(default_factory=OrderedDict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"{self.instrument}: value must be finite.")
        if self.stderr is not None and not self.stderr >= 0:
            raise ValueError(f"{self.instrument}: stderr must be >= 0.")

    def rows(self) -> list[OrderedDict[str, str]]:
        """
        Flatten to CSV rows: one per diagnostic, or a single row with empty
        diagnostic fields.
        """
        head: OrderedDict[str, str] = OrderedDict(
            instrument=self.instrument,
            value=format_number(float(self.value)),
            stderr=format_number(self.stderr),
            z_score=format_number(self.z_score),
        )
        if not self.diagnostics:
            return [OrderedDict(**head, diag_key="", diag_value="")]
        return [
            OrderedDict(**head, diag_key=key, diag_value=format_number(value))
            for key, value in self.diagnostics.items()
        ]

    def __str__(self) -> str:
        text: str = f"{self.instrument}: {self.value:.10g}"
        if self.stderr is not None:
            text += f" (stderr {self.stderr:.3g})"
        if self.z_score is not None:
            text += f" z={self.z_score:.3f}"
        return text


@dataclass
class ValidationReport:
    """
    Comparison of a closed form against the Monte Carlo oracle.
    Attributes
    ----------
    instrument : str
        Instrument or component label.
    analytic : float
        Closed-form value.
    mc_value : float
        Monte Carlo value.
    mc_stderr : float
        Monte Carlo standard error.
    aborted : int
        Simulated paths dropped on an exploded state; any makes the report fail.
    """

    # Verdicts when the routes agree or not
    AGREE_TEXT: ClassVar[str] = "within 3 standard errors: freezing bias not resolved"
    DISAGREE_TEXT: ClassVar[str] = (
        "beyond 3 standard errors: freezing bias (or scheme error) detected"
    )
    ABORTED_TEXT: ClassVar[str] = "paths aborted: Monte Carlo value not trusted"

    instrument: str
    analytic: float
    mc_value: float
    mc_stderr: float
    aborted: int = 0

    @property
    def bias(self) -> float:
        return self.analytic - self.mc_value

    @property
    def relative_bias(self) -> float | None:
        """Bias over |analytic|; None for a zero analytic value."""
        if self.analytic == 0:
            return None
        return self.bias / abs(self.analytic)

    @property
    def z_score(self) -> float:
        """
        (analytic - MC) / stderr; 0 for a rounding-level gap, inf for a real gap
        with a vanishing stderr.
        """
        if abs(self.bias) <= ZERO_STDERR_TOLERANCE * max(1.0, abs(self.analytic)):
            return 0.0
        if self.mc_stderr == 0:
            return float("inf")
        return self.bias / self.mc_stderr

    @property
    def passed(self) -> bool:
        return self.aborted == 0 and abs(self.z_score) <= Z_SCORE_LIMIT

    @property
    def commentary(self) -> str:
        """The measured bias, then the verdict."""
        measured: str = (
            f"bias {self.bias:.3g}"
            if self.relative_bias is None
            else f"relative bias {self.relative_bias:+.3%}"
        )
        if self.aborted:
            return f"{measured}; {self.aborted} {self.ABORTED_TEXT}"
        verdict: str = (
            self.AGREE_TEXT
            if abs(self.z_score) <= Z_SCORE_LIMIT
            else self.DISAGREE_TEXT
        )
        return f"{measured}; {verdict}"

    def to_result(self) -> PricingResult:
        """The report as a results row group."""
        return PricingResult(
            self.instrument,
            self.mc_value,
            self.mc_stderr,
            self.z_score,
            OrderedDict(
                analytic=self.analytic,
                bias=self.bias,
                aborted=self.aborted,
                commentary=self.commentary,
            ),
        )

    def __str__(self) -> str:
        return (
            f"{self.instrument}: analytic {self.analytic:.10g} -- "
            f"MC {self.mc_value:.10g} +/- {self.mc_stderr:.3g} -- "
            f"z {self.z_score:.3f} -- {self.commentary}"
        )


def results_to_rows(results: list[PricingResult]) -> list[OrderedDict[str, Any]]:
    """All rows of a result sequence, in order."""
    return [row for result in results for row in result.rows()]


def save_results_to_csv(results: list[PricingResult], csv_file_path: Path) -> None:
    """
    Write results to a CSV file with the fixed header; an empty sequence gives a
    header-only file.
    """
    with csv_file_path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(RESULT_FIELDS), lineterminator="\n")
        writer.writeheader()
        writer.writerows(results_to_rows(results))
