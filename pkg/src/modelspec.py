import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum, unique

import numpy as np

from src.termstructure import Tenor
from src.utils import ModelError, get_logger

# Initialize logger
logger: logging.Logger = get_logger()

# Tolerance below which an eigenvalue of a correlation matrix counts as negative
PSD_TOLERANCE: float = 1e-10

# Tolerance used when checking that evaluation times are ordered
TIME_ORDER_TOLERANCE: float = 1e-12

# Number of sample points used to check the sign of a volatility function
VOL_SAMPLE_POINTS: int = 201


@unique
class Regime(StrEnum):
    """
    The two model regimes that can be made consistent with each other.
    """

    # Domestic and foreign LIBORs lognormal, forward FX rates below T_N stochastic vol
    CASE_I = "case_i"
    # Domestic LIBORs and forward FX lognormal, foreign LIBORs not lognormal
    CASE_II = "case_ii"


@unique
class CorrelationForm(StrEnum):
    EXPONENTIAL = "exponential"
    EXPONENTIAL_WITH_FLOOR = "exponential_with_floor"


@unique
class VolForm(StrEnum):
    CONSTANT = "constant"
    REBONATO = "rebonato"


@dataclass(frozen=True)
class CorrelationSpec:
    """
    Correlation function c(u, v) of the random field.
    Attributes
    ----------
    form : CorrelationForm
        exponential: exp(-beta |u - v|);
        exponential_with_floor: rho + (1 - rho) exp(-beta |u - v|).
    decay : float
        beta >= 0, in 1/years.
    floor : float
        rho in [0, 1), only read by the floored form.
    """

    form: CorrelationForm = CorrelationForm.EXPONENTIAL
    decay: float = 0.0
    floor: float = 0.0


@dataclass(frozen=True)
class VolSurfaceSpec:
    """
    Parametric deterministic volatility phi_i g(u - t).
    Attributes
    ----------
    form : VolForm
        constant: g = level; rebonato: g(tau) = (a + b tau) exp(-c tau) + d.
    level : float
        The constant level g_0.
    a, b, c, d : float
        The hump parameters.
    scales : tuple[float, ...]
        Per-index scale factors phi_i; indexes past the end use 1.
    """

    form: VolForm = VolForm.CONSTANT
    level: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    scales: tuple[float, ...] = field(default_factory=tuple)

    def scale(self, i: int) -> float:
        """Scale factor phi_i."""
        return self.scales[i] if 0 <= i < len(self.scales) else 1.0

    def g(self, tau: float | np.ndarray) -> float | np.ndarray:
        """The unscaled volatility at time to maturity tau."""
        if self.form == VolForm.CONSTANT:
            return self.level + 0.0 * np.asarray(tau, dtype=float)
        return (self.a + self.b * tau) * np.exp(-self.c * tau) + self.d

    @property
    def is_zero(self) -> bool:
        """True when the surface is identically zero."""
        if self.form == VolForm.CONSTANT:
            return self.level == 0
        return self.a == 0 and self.b == 0 and self.d == 0

    @classmethod
    def constant(cls, level: float, scales: tuple[float, ...] = ()) -> "VolSurfaceSpec":
        """Shortcut for a constant surface."""
        return cls(form=VolForm.CONSTANT, level=level, scales=tuple(scales))


@dataclass(frozen=True)
class ModelConfig:
    """
    Deterministic inputs of the cross-currency model.
    Attributes
    ----------
    regime : Regime
        Which family of rates is lognormal.
    dom_libor_vol : VolSurfaceSpec
        lambda_i(t, u) of the domestic LIBORs.
    for_libor_vol : VolSurfaceSpec | None
        lambda_i^F(t, u) in case (i), sigma_F(t, u) in case (ii).
    terminal_fx_vol : VolSurfaceSpec
        sigma_{X_N}(t, u) of the terminal forward exchange rate.
    correlation : CorrelationSpec
        The single correlation function shared by both economies.
    quanto_fixed_fx : float
        The predetermined conversion rate of quanto payoffs.
    """

    regime: Regime
    dom_libor_vol: VolSurfaceSpec
    for_libor_vol: VolSurfaceSpec | None
    terminal_fx_vol: VolSurfaceSpec
    correlation: CorrelationSpec
    quanto_fixed_fx: float = 1.0

    def require_regime(self, regime: Regime) -> None:
        """
        Raise a ModelError when the model is not in the given regime.
        """
        if self.regime != regime:
            raise ModelError(
                f"Operation requires regime {regime.value}, model is in "
                f"{self.regime.value}."
            )

    @property
    def foreign_vol(self) -> VolSurfaceSpec:
        """The foreign surface, which validate_config guarantees to exist."""
        if self.for_libor_vol is None:
            raise ModelError("missing foreign volatility")
        return self.for_libor_vol


@dataclass(frozen=True)
class ConfigReport:
    """Outcome of validate_config: an empty violation list means pass."""

    violations: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "pass" if self.passed else "; ".join(self.violations)


def eval_corr(
    spec: CorrelationSpec, u: float | np.ndarray, v: float | np.ndarray
) -> float | np.ndarray:
    """
    Evaluate the correlation function c(u, v); broadcasts over arrays.
    Parameters
    ----------
    spec : CorrelationSpec
        The correlation specification.
    u, v : float | np.ndarray
        Maturities, u, v >= 0.
    Returns
    -------
    float | np.ndarray
        exp(-beta |u - v|) or rho + (1 - rho) exp(-beta |u - v|).
    """
    kernel = np.exp(-spec.decay * np.abs(np.subtract(u, v)))
    if spec.form == CorrelationForm.EXPONENTIAL_WITH_FLOOR:
        return spec.floor + (1.0 - spec.floor) * kernel
    return kernel


def eval_vol(
    spec: VolSurfaceSpec,
    i: int,
    t: float | np.ndarray,
    u: float | np.ndarray,
    strip: tuple[float, float] | None = None,
) -> float | np.ndarray:
    """
    Evaluate phi_i g(u - t); broadcasts over arrays.
    Parameters
    ----------
    spec : VolSurfaceSpec
        The surface.
    i : int
        Index of the scale factor.
    t, u : float | np.ndarray
        Time and maturity, t <= u.
    strip : tuple[float, float] | None
        [T_i, T_{i+1}] for a LIBOR surface, which is defined on its accrual strip
        only; None for the terminal FX surface.
    Raises
    ------
    ValueError
        If t > u somewhere.
    ModelError
        If u lies outside the strip.
    """
    if strip is not None and (
        np.any(np.less(u, strip[0] - TIME_ORDER_TOLERANCE))
        or np.any(np.greater(u, strip[1] + TIME_ORDER_TOLERANCE))
    ):
        raise ModelError(
            f"Volatility {i} evaluated outside its strip [{strip[0]}, {strip[1]}]."
        )
    tau = np.subtract(u, t)
    if np.any(tau < -TIME_ORDER_TOLERANCE):
        raise ValueError("Volatility evaluated with t > u.")
    return spec.scale(i) * spec.g(np.maximum(tau, 0.0))


def correlation_matrix(spec: CorrelationSpec, grid: np.ndarray) -> np.ndarray:
    """The matrix C_jk = c(u_j, u_k) induced on a maturity grid."""
    grid = np.asarray(grid, dtype=float)
    return np.asarray(eval_corr(spec, grid[:, None], grid[None, :]))


def check_correlation_matrix(
    matrix: np.ndarray, tolerance: float = PSD_TOLERANCE
) -> list[str]:
    """
    Check symmetry, unit diagonal, range and positive semidefiniteness.
    Returns
    -------
    list[str]
        The violations found, empty when the matrix is a valid correlation.
    """
    violations: list[str] = []
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-14):
        violations.append("correlation matrix not symmetric")
    if not np.allclose(np.diag(matrix), 1.0, rtol=0, atol=1e-14):
        violations.append("correlation matrix diagonal differs from 1")
    if np.any(np.abs(matrix) > 1 + 1e-14):
        violations.append("correlation entries outside [-1, 1]")
    min_eigenvalue: float = float(np.linalg.eigvalsh((matrix + matrix.T) / 2)[0])
    if min_eigenvalue < -tolerance:
        violations.append(
            f"correlation matrix not positive semidefinite "
            f"(min eigenvalue {min_eigenvalue:.3e})"
        )
    return violations


def _check_vol(
    spec: VolSurfaceSpec | None, name: str, horizon: float, count: int
) -> list[str]:
    if spec is None:
        return []
    violations: list[str] = []
    params: tuple[float, ...] = (spec.level, spec.a, spec.b, spec.c, spec.d)
    if not all(math.isfinite(p) for p in params + tuple(spec.scales)):
        violations.append(f"{name} volatility has non-finite parameters")
        return violations
    if any(s < 0 for s in spec.scales):
        violations.append(f"{name} volatility has negative scale factors")
    if len(spec.scales) > count:
        violations.append(
            f"{name} volatility has {len(spec.scales)} scale factors, "
            f"at most {count} expected"
        )
    tau: np.ndarray = np.linspace(0.0, horizon, VOL_SAMPLE_POINTS)
    if np.any(np.asarray(spec.g(tau)) < 0):
        violations.append(f"negative {name} volatility on [0, {horizon}]")
    return violations


def validate_config(cfg: ModelConfig, tenor: Tenor) -> ConfigReport:
    """
    Check a model configuration against a tenor.
    Parameters
    ----------
    cfg : ModelConfig
        The model configuration.
    tenor : Tenor
        The tenor the model will be used on.
    Returns
    -------
    ConfigReport
        Pass, or the list of violations found.
    """
    horizon: float = tenor.dates[-1]
    violations: list[str] = []
    if cfg.for_libor_vol is None:
        violations.append("missing foreign volatility")
    if not (math.isfinite(cfg.quanto_fixed_fx) and cfg.quanto_fixed_fx > 0):
        violations.append("quanto fixed FX must be positive")
    violations += _check_vol(cfg.dom_libor_vol, "domestic LIBOR", horizon, tenor.n)
    violations += _check_vol(cfg.for_libor_vol, "foreign", horizon, tenor.n)
    violations += _check_vol(cfg.terminal_fx_vol, "terminal FX", horizon, tenor.n + 1)

    corr: CorrelationSpec = cfg.correlation
    if not (math.isfinite(corr.decay) and corr.decay >= 0):
        violations.append(f"correlation decay must be >= 0, got {corr.decay}")
    elif corr.form == CorrelationForm.EXPONENTIAL_WITH_FLOOR and not (
        0 <= corr.floor < 1
    ):
        violations.append(f"correlation floor must lie in [0, 1), got {corr.floor}")
    else:
        # Grid of the Monte Carlo maturities at a typical resolution
        grid: np.ndarray = np.unique(
            np.concatenate(
                [np.linspace(0.0, horizon, 4 * tenor.n + 1), tenor.times]
            )
        )
        violations += check_correlation_matrix(correlation_matrix(corr, grid))

    report: ConfigReport = ConfigReport(tuple(violations))
    logger.debug(f"Model validation: {report}")
    return report
