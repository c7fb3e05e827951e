"""
Named scalar quantities of the cross-currency model: covariance blocks, the
integrated forward-FX volatility, and the adjustment terms used by the pricers.
"""

import logging
from collections import OrderedDict
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum, unique
from functools import cached_property

import numpy as np

from src.modelspec import ModelConfig, Regime, eval_corr, eval_vol
from src.quadrature import (
    MOVING,
    QuadratureConfig,
    QuadratureResult,
    integrate_box2,
    integrate_box3,
    integrate_line,
    integrate_prism3,
)
from src.termstructure import MarketData, Tenor, accrual_ratio
from src.utils import ModelError, QuadratureError, get_logger

# Initialize logger
logger: logging.Logger = get_logger()

# Variance-type outputs below this value are reported as a quadrature failure
NEGATIVE_VARIANCE_TOLERANCE: float = 1e-12

VolFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@unique
class CovarianceRole(StrEnum):
    DOM_DOM = "dom-dom"
    FOR_FOR = "for-for"
    FOR_DOM = "for-dom"


@dataclass(frozen=True, eq=False)
class FrozenState:
    """
    Rates observed at time t, used to freeze the accrual ratios A and A_F.
    Attributes
    ----------
    time : float
        The freezing time t.
    tenor : Tenor
        The tenor the rates are indexed on.
    dom_libors : np.ndarray
        L(t, T_j), j = 0..N-1; NaN for rates not needed (already fixed).
    for_libors : np.ndarray
        L_F(t, T_j), j = 0..N-1; NaN for rates not needed.
    """

    time: float
    tenor: Tenor
    dom_libors: np.ndarray
    for_libors: np.ndarray

    def __post_init__(self) -> None:
        for name in ("dom_libors", "for_libors"):
            rates: np.ndarray = np.asarray(getattr(self, name), dtype=float)
            if rates.shape != (self.tenor.n,):
                raise ModelError(
                    f"{name} holds {rates.size} rates, {self.tenor.n} expected."
                )
            object.__setattr__(self, name, rates)
        # Raises on 1 + delta L <= 0
        _ = self.dom_ratios, self.for_ratios

    @classmethod
    def from_market(cls, market: MarketData) -> "FrozenState":
        """The time-0 state implied by the curves."""
        return cls(0.0, market.tenor, market.libors(), market.libors(foreign=True))

    @cached_property
    def dom_ratios(self) -> np.ndarray:
        """A(t, T_j) for every j."""
        return np.asarray(accrual_ratio(self.dom_libors, self.tenor.accruals))

    @cached_property
    def for_ratios(self) -> np.ndarray:
        """A_F(t, T_j) for every j."""
        return np.asarray(accrual_ratio(self.for_libors, self.tenor.accruals))

    def ratio(self, j: int, foreign: bool = False) -> float:
        """
        A(t, T_j) or A_F(t, T_j).
        Raises
        ------
        ModelError
            If the state does not hold the rate.
        """
        value: float = float((self.for_ratios if foreign else self.dom_ratios)[j])
        if not np.isfinite(value):
            side: str = "foreign" if foreign else "domestic"
            raise ModelError(f"state missing a required rate: {side} index {j}")
        return value

    def __repr__(self) -> str:
        return " -- ".join(
            (
                f"Time: {self.time}",
                f"Domestic LIBORs: {np.array2string(self.dom_libors, precision=6)}",
                f"Foreign LIBORs: {np.array2string(self.for_libors, precision=6)}",
            )
        )


@dataclass(frozen=True)
class AdjustmentEntry:
    """Adjustment values of one reset index with their error estimates."""

    index: int
    variance: QuadratureResult
    drift: QuadratureResult


@dataclass(frozen=True)
class AdjustmentReport:
    """
    Per-index adjustments at one valuation time.
    Attributes
    ----------
    time : float
        The valuation time t.
    regime : Regime
        case_i reports Omega~_i and alpha~_i, case_ii reports gamma_i and beta_i.
    entries : tuple[AdjustmentEntry, ...]
        One entry per reset date T_i >= t.
    gamma_fx : QuadratureResult
        gamma(t, T_N) of the terminal forward FX rate.
    """

    time: float
    regime: Regime
    entries: tuple[AdjustmentEntry, ...]
    gamma_fx: QuadratureResult

    @property
    def labels(self) -> tuple[str, str]:
        """Names of the variance and drift columns."""
        if self.regime == Regime.CASE_I:
            return "omega_tilde", "alpha_tilde"
        return "gamma_i", "beta"

    def diagnostics(self) -> OrderedDict[str, float]:
        """Flat diagnostics keyed by quantity and index."""
        variance_label, drift_label = self.labels
        diagnostics: OrderedDict[str, float] = OrderedDict()
        for entry in self.entries:
            diagnostics[f"{variance_label}.{entry.index}"] = entry.variance.value
            diagnostics[f"{variance_label}_err.{entry.index}"] = entry.variance.error
            diagnostics[f"{drift_label}.{entry.index}"] = entry.drift.value
            diagnostics[f"{drift_label}_err.{entry.index}"] = entry.drift.error
        diagnostics["gamma_fx"] = self.gamma_fx.value
        diagnostics["gamma_fx_err"] = self.gamma_fx.error
        return diagnostics


def _nonnegative(result: QuadratureResult, name: str) -> QuadratureResult:
    # Quadratic forms of a PSD kernel; tiny negatives are rounding noise
    if result.value < -NEGATIVE_VARIANCE_TOLERANCE:
        raise QuadratureError(f"{name} evaluated to {result.value:.3e} < 0")
    return QuadratureResult(max(result.value, 0.0), result.error)


@dataclass(frozen=True)
class ModelAnalytics:
    """
    Deterministic integrals of a model on a tenor.
    Attributes
    ----------
    model : ModelConfig
        The model inputs.
    tenor : Tenor
        The tenor structure.
    quadrature : QuadratureConfig
        The rule used by every integral.
    """

    model: ModelConfig
    tenor: Tenor
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    # Volatility functions of (time, maturity), broadcasting over arrays
    def dom_vol(self, i: int) -> VolFunction:
        strip: tuple[float, float] = self.strip(i)
        return lambda s, u: eval_vol(self.model.dom_libor_vol, i, s, u, strip)

    def for_vol(self, i: int) -> VolFunction:
        strip: tuple[float, float] = self.strip(i)
        return lambda s, u: eval_vol(self.model.foreign_vol, i, s, u, strip)

    def fx_vol(self) -> VolFunction:
        return lambda s, u: eval_vol(self.model.terminal_fx_vol, self.tenor.n, s, u)

    def corr(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return eval_corr(self.model.correlation, u, v)

    def strip(self, i: int) -> tuple[float, float]:
        """The accrual interval [T_i, T_{i+1}]."""
        return self.tenor.dates[i], self.tenor.dates[i + 1]

    def _check_index(self, i: int, upper: int | None = None) -> None:
        upper = self.tenor.n - 1 if upper is None else upper
        if not 0 <= i <= upper:
            raise IndexError(f"Index {i} out of range [0, {upper}].")

    def _check_time(self, t: float, i: int) -> None:
        if t > self.tenor.dates[i]:
            raise ValueError(f"Time {t} past the reset date T_{i}.")

    def _cross3(
        self,
        a: VolFunction,
        b: VolFunction,
        s_range: tuple[float, float],
        i: int,
        j: int,
    ) -> QuadratureResult:
        # s in s_range, u on strip i, v on strip j
        return integrate_box3(
            lambda s, u, v: a(s, u) * b(s, v) * self.corr(u, v),
            (s_range, self.strip(i), self.strip(j)),
            self.quadrature,
        )

    def _terminal3(
        self, a: VolFunction, s_range: tuple[float, float], i: int
    ) -> QuadratureResult:
        # s in s_range, u on strip i, v in [s, T_N] against the terminal FX vol
        fx: VolFunction = self.fx_vol()
        return integrate_prism3(
            lambda s, u, v: a(s, u) * fx(s, v) * self.corr(u, v),
            s_range,
            self.strip(i),
            (MOVING, self.tenor.dates[-1]),
            self.quadrature,
        )

    def lambda_cov(
        self, i: int, j: int, t: float, which: CovarianceRole
    ) -> QuadratureResult:
        """
        Instantaneous covariance block
        int_{T_i}^{T_{i+1}} int_{T_j}^{T_{j+1}} a_i(t, u) b_j(t, v) c(u, v) dv du.
        Parameters
        ----------
        i, j : int
            Indexes of the two strips, 0 <= i, j <= N-1.
        t : float
            Evaluation time, t <= min(T_i, T_j).
        which : CovarianceRole
            dom-dom uses (lambda_i, lambda_j), for-for (foreign_i, foreign_j) and
            for-dom (foreign_i, lambda_j). The foreign surface is lambda^F in case
            (i) and sigma_F in case (ii).
        Returns
        -------
        QuadratureResult
            The block and its error estimate.
        """
        self._check_index(i)
        self._check_index(j)
        self._check_time(t, min(i, j))
        a: VolFunction = (
            self.dom_vol(i) if which == CovarianceRole.DOM_DOM else self.for_vol(i)
        )
        b: VolFunction = (
            self.for_vol(j) if which == CovarianceRole.FOR_FOR else self.dom_vol(j)
        )
        return integrate_box2(
            lambda u, v: a(t, u) * b(t, v) * self.corr(u, v),
            (self.strip(i), self.strip(j)),
            self.quadrature,
        )

    def _foreign_weight(self, j: int, state: FrozenState) -> float:
        # sigma_F = A_F lambda^F in case (ii), so the foreign strip carries no ratio
        if self.model.regime == Regime.CASE_II:
            return 1.0
        return state.ratio(j, foreign=True)

    def _fx_c_integral_scalar(
        self, i: int, t: float, u: float, state: FrozenState
    ) -> float:
        total: float = integrate_line(
            lambda v: self.fx_vol()(t, v) * self.corr(u, v),
            (t, self.tenor.dates[-1]),
            self.quadrature,
            split_at=u,
        ).value
        for j in range(i, self.tenor.n):
            foreign: float = integrate_line(
                lambda v: self.for_vol(j)(t, v) * self.corr(u, v),
                self.strip(j),
                self.quadrature,
                split_at=u,
            ).value
            domestic: float = integrate_line(
                lambda v: self.dom_vol(j)(t, v) * self.corr(u, v),
                self.strip(j),
                self.quadrature,
                split_at=u,
            ).value
            total += self._foreign_weight(j, state) * foreign
            total -= state.ratio(j) * domestic
        return total

    def fx_c_integral(
        self, i: int, u: float | np.ndarray, state: FrozenState
    ) -> float | np.ndarray:
        """
        The c-integral of the forward-FX volatility sigma_{X_i}, evaluated from
        the telescoped sum
        K_i(t, u) = sum_{j >= i} [A_F(t, T_j) int lambda^F_j c
                                 - A(t, T_j) int lambda_j c]
                    + int_t^{T_N} sigma_{X_N}(t, v) c(u, v) dv.
        In case (ii) the foreign term reads int sigma_F,j c.
        Parameters
        ----------
        i : int
            FX index, 0 <= i <= N; i = N keeps only the terminal term.
        u : float | np.ndarray
            Maturity argument(s) of the kernel.
        state : FrozenState
            The frozen rates at time t <= T_i.
        Returns
        -------
        float | np.ndarray
            K_i(t, u), with the shape of u.
        """
        self._check_index(i, self.tenor.n)
        self._check_time(state.time, i)
        if np.ndim(u) == 0:
            return self._fx_c_integral_scalar(i, state.time, float(u), state)
        return np.vectorize(
            lambda x: self._fx_c_integral_scalar(i, state.time, x, state)
        )(u)

    def omega_tilde(self, i: int, t: float) -> QuadratureResult:
        """
        Variance Omega~_i(t) of ln L_F(T_i, T_i), the triple integral of
        lambda^F_i lambda^F_i c over s in [t, T_i] and u, v on strip i.
        """
        self._check_index(i)
        self._check_time(t, i)
        vol: VolFunction = self.for_vol(i)
        return _nonnegative(
            self._cross3(vol, vol, (t, self.tenor.dates[i]), i, i), "omega_tilde"
        )

    def alpha_tilde(self, i: int, state: FrozenState) -> QuadratureResult:
        """
        Frozen quanto drift adjustment of the case (i) caplet on L_F(., T_i).
        Parameters
        ----------
        i : int
            Reset index, 0 <= i <= N-1.
        state : FrozenState
            The rates frozen at t <= T_i.
        Returns
        -------
        QuadratureResult
            sum_{j>i} A_F,j <lambda^F_i, lambda^F_j> - sum_{j>i} A_j <lambda^F_i,
            lambda_j> + <lambda^F_i, sigma_{X_N}>, each integrated over s in
            [t, T_i]; the sign can be either.
        Raises
        ------
        ModelError
            If the model is not in case (i).
        """
        self.model.require_regime(Regime.CASE_I)
        self._check_index(i)
        self._check_time(state.time, i)
        s_range: tuple[float, float] = (state.time, self.tenor.dates[i])
        vol: VolFunction = self.for_vol(i)
        result: QuadratureResult = self._terminal3(vol, s_range, i)
        for j in range(i + 1, self.tenor.n):
            result += self._cross3(vol, self.for_vol(j), s_range, i, j).scaled(
                state.ratio(j, foreign=True)
            )
            result -= self._cross3(vol, self.dom_vol(j), s_range, i, j).scaled(
                state.ratio(j)
            )
        return result

    def _for_ratio(self, i: int, state: FrozenState) -> float:
        ratio: float = state.ratio(i, foreign=True)
        if ratio == 0:
            raise ModelError(f"A_F(t, T_{i}) = 0: foreign LIBOR {i} is zero")
        return ratio

    def beta_coeff(self, i: int, state: FrozenState) -> QuadratureResult:
        """
        Frozen quanto drift adjustment beta_i(t) of case (ii): the cross
        integral of sigma_F,i against sigma_{X_{i+1}} over s in [t, T_i],
        divided once by A_F(t, T_i).
        """
        self.model.require_regime(Regime.CASE_II)
        self._check_index(i)
        self._check_time(state.time, i)
        ratio: float = self._for_ratio(i, state)
        s_range: tuple[float, float] = (state.time, self.tenor.dates[i])
        vol: VolFunction = self.for_vol(i)
        result: QuadratureResult = self._terminal3(vol, s_range, i)
        for j in range(i + 1, self.tenor.n):
            result += self._cross3(vol, self.for_vol(j), s_range, i, j)
            result -= self._cross3(vol, self.dom_vol(j), s_range, i, j).scaled(
                state.ratio(j)
            )
        return result.scaled(1.0 / ratio)

    def gamma_i(self, i: int, state: FrozenState) -> QuadratureResult:
        """
        Variance gamma_i(t) of ln L_F(T_i, T_i) in case (ii): the sigma_F,i
        quadratic form over s in [t, T_i] divided by A_F(t, T_i)^2.
        """
        self.model.require_regime(Regime.CASE_II)
        self._check_index(i)
        self._check_time(state.time, i)
        ratio: float = self._for_ratio(i, state)
        vol: VolFunction = self.for_vol(i)
        result: QuadratureResult = self._cross3(
            vol, vol, (state.time, self.tenor.dates[i]), i, i
        )
        return _nonnegative(result.scaled(1.0 / ratio**2), "gamma_i")

    def terminal_fx_variance(self, t0: float, t1: float) -> QuadratureResult:
        """
        Variance of ln X(., T_N) accumulated over [t0, t1]:
        int_{t0}^{t1} int_s^{T_N} int_s^{T_N} sigma_{X_N} sigma_{X_N} c.
        """
        fx: VolFunction = self.fx_vol()
        horizon: float = self.tenor.dates[-1]
        if t1 > horizon:
            raise ValueError(f"Time {t1} past the last tenor date {horizon}.")
        return _nonnegative(
            integrate_prism3(
                lambda s, u, v: fx(s, u) * fx(s, v) * self.corr(u, v),
                (t0, t1),
                (MOVING, horizon),
                (MOVING, horizon),
                self.quadrature,
            ),
            "terminal_fx_variance",
        )

    def gamma_fx(
        self, t: float, expiry: float, state: FrozenState | None = None
    ) -> QuadratureResult:
        """
        Variance gamma(t, T) of ln X(T, T) for an FX option expiring at T.
        Parameters
        ----------
        t : float
            Valuation time, t <= T.
        expiry : float
            T_N, or in case (ii) an earlier tenor date T_k.
        state : FrozenState | None
            Rates frozen at t; needed when T < T_N.
        Returns
        -------
        QuadratureResult
            At T_N the exact prism integral of sigma_{X_N}. At T_k < T_N the
            integral of the forward-FX volatility functional
            sigma_{X_N} 1_[s, T_N] + sum_{j >= k} (sigma_F,j - A(t, T_j) lambda_j)
            1_[T_j, T_{j+1}] with A frozen at t.
        Raises
        ------
        ModelError
            If T < T_N in case (i), where the forward FX volatility is stochastic.
        """
        if t > expiry:
            raise ValueError(f"Valuation time {t} after expiry {expiry}.")
        k: int = self.tenor.index_of(expiry)
        if k == self.tenor.n:
            return self.terminal_fx_variance(t, expiry)
        if self.model.regime != Regime.CASE_II:
            raise ModelError(
                f"FX option expiring at T_{k} < T_N needs a deterministic forward FX "
                f"volatility (regime {Regime.CASE_II.value})."
            )
        if state is None:
            raise ModelError("gamma_fx before T_N needs a frozen state.")
        s_range: tuple[float, float] = (t, expiry)

        def bond_leg(j: int) -> VolFunction:
            ratio: float = state.ratio(j)
            return lambda s, u: self.for_vol(j)(s, u) - ratio * self.dom_vol(j)(s, u)

        result: QuadratureResult = self.terminal_fx_variance(t, expiry)
        for j in range(k, self.tenor.n):
            result += self._terminal3(bond_leg(j), s_range, j).scaled(2.0)
            for m in range(k, self.tenor.n):
                result += self._cross3(bond_leg(j), bond_leg(m), s_range, j, m)
        return _nonnegative(result, "gamma_fx")

    def _foreign_loading(self, i: int, state: FrozenState) -> float:
        # lambda^F = sigma_F / A_F in case (ii)
        if self.model.regime == Regime.CASE_II:
            return 1.0 / self._for_ratio(i, state)
        return 1.0

    def quanto_drift(self, i: int, state: FrozenState) -> float:
        """
        Instantaneous drift of ln L_F(t, T_i) under the domestic terminal measure,
        expanded through the forward-FX c-integral K_{i+1}.
        """
        self._check_index(i)
        t: float = state.time
        self._check_time(t, i)
        loading: float = self._foreign_loading(i, state)
        variance: float = self.lambda_cov(i, i, t, CovarianceRole.FOR_FOR).value
        fx_cross: float = integrate_line(
            lambda u: self.for_vol(i)(t, u) * self.fx_c_integral(i + 1, u, state),
            self.strip(i),
            self.quadrature,
        ).value
        measure_shift: float = sum(
            state.ratio(j) * self.lambda_cov(i, j, t, CovarianceRole.FOR_DOM).value
            for j in range(i + 1, self.tenor.n)
        )
        return -0.5 * loading**2 * variance - loading * (fx_cross + measure_shift)

    def quanto_drift_telescoped(self, i: int, state: FrozenState) -> float:
        """
        The same drift with the domestic terms cancelled:
        -1/2 Lambda^FF_ii - sum_{j>i} A_F,j Lambda^FF_ij - S_i.
        """
        self._check_index(i)
        t: float = state.time
        self._check_time(t, i)
        loading: float = self._foreign_loading(i, state)
        variance: float = self.lambda_cov(i, i, t, CovarianceRole.FOR_FOR).value
        foreign: float = sum(
            self._foreign_weight(j, state)
            * self.lambda_cov(i, j, t, CovarianceRole.FOR_FOR).value
            for j in range(i + 1, self.tenor.n)
        )
        fx: VolFunction = self.fx_vol()
        terminal: float = integrate_box2(
            lambda u, v: self.for_vol(i)(t, u) * fx(t, v) * self.corr(u, v),
            (self.strip(i), (t, self.tenor.dates[-1])),
            self.quadrature,
        ).value
        return -0.5 * loading**2 * variance - loading * (foreign + terminal)

    def report(self, state: FrozenState) -> AdjustmentReport:
        """
        The adjustments of every reset date T_i >= t.
        Parameters
        ----------
        state : FrozenState
            The rates frozen at the valuation time.
        Returns
        -------
        AdjustmentReport
            Omega~_i and alpha~_i in case (i), gamma_i and beta_i in case (ii).
        """
        logger.debug(f"Adjustment report for state: {state}")
        entries: list[AdjustmentEntry] = []
        for i in range(self.tenor.n):
            if self.tenor.dates[i] < state.time:
                continue
            if self.model.regime == Regime.CASE_I:
                entry: AdjustmentEntry = AdjustmentEntry(
                    i, self.omega_tilde(i, state.time), self.alpha_tilde(i, state)
                )
            else:
                entry = AdjustmentEntry(
                    i, self.gamma_i(i, state), self.beta_coeff(i, state)
                )
            logger.debug(
                f"Index {i}: variance {entry.variance.value:.6e} "
                f"(err {entry.variance.error:.1e}), drift {entry.drift.value:.6e} "
                f"(err {entry.drift.error:.1e})"
            )
            entries.append(entry)
        return AdjustmentReport(
            state.time,
            self.model.regime,
            tuple(entries),
            self.terminal_fx_variance(state.time, self.tenor.dates[-1]),
        )
