import logging
import math
from collections import OrderedDict
from collections.abc import Callable
from dataclasses import dataclass

from scipy.stats import norm

from src.analytics import FrozenState, ModelAnalytics
from src.modelspec import ModelConfig, Regime
from src.quadrature import QuadratureConfig, QuadratureResult
from src.results import Diagnostic, PricingResult
from src.termstructure import MarketData, Tenor, forward_fx
from src.utils import get_logger

# Initialize logger
logger: logging.Logger = get_logger()


@dataclass(frozen=True)
class QuantoCapSpec:
    """
    A cap on the foreign LIBOR paid in domestic currency at a fixed rate.
    Attributes
    ----------
    strike : float
        kappa >= 0.
    fixed_fx : float
        X-bar > 0, domestic units per foreign unit.
    notional : float
        Domestic notional.
    indices : tuple[int, ...] | None
        Reset indexes covered; None covers 0..N-1.
    """

    strike: float
    fixed_fx: float
    notional: float = 1.0
    indices: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.strike >= 0:
            raise ValueError(f"Cap strike must be >= 0, got {self.strike}.")
        if not self.fixed_fx > 0:
            raise ValueError(f"Fixed FX must be > 0, got {self.fixed_fx}.")

    def covered(self, n: int) -> tuple[int, ...]:
        return tuple(range(n)) if self.indices is None else self.indices


@dataclass(frozen=True)
class FxOptionSpec:
    """A European option on the spot exchange rate X(T)."""

    expiry: float
    strike: float
    notional: float = 1.0

    def __post_init__(self) -> None:
        if not self.strike > 0:
            raise ValueError(f"FX option strike must be > 0, got {self.strike}.")
        if not self.expiry > 0:
            raise ValueError(f"FX option expiry must be > 0, got {self.expiry}.")


@dataclass(frozen=True)
class CcsSpec:
    """A float-to-float cross-currency swap, both legs paid in domestic currency."""

    notional: float = 1.0


@dataclass(frozen=True)
class CoreTerms:
    """d1 and d2 of a lognormal expectation, None when the law is degenerate."""

    d1: float | None = None
    d2: float | None = None

    def items(self) -> list[tuple[str, Diagnostic]]:
        if self.d1 is None or self.d2 is None:
            return []
        return [("d1", self.d1), ("d2", self.d2)]


def _core_terms(
    forward: float, strike: float, drift_adj: float, variance: float
) -> CoreTerms:
    if variance < 0:
        raise ValueError(f"Variance must be >= 0, got {variance}.")
    if not forward > 0:
        raise ValueError(f"Forward must be > 0, got {forward}.")
    if strike <= 0 or variance == 0:
        return CoreTerms()
    stdev: float = math.sqrt(variance)
    d1: float = (math.log(forward / strike) - drift_adj + 0.5 * variance) / stdev
    return CoreTerms(d1, d1 - stdev)


def lognormal_call_core(
    forward: float, strike: float, drift_adj: float, variance: float
) -> float:
    """
    Undiscounted E[(F e^{-a} e^{G - v/2} - k)^+] with G ~ N(0, v).
    Parameters
    ----------
    forward : float
        F > 0.
    strike : float
        k; k <= 0 returns F e^{-a} - k.
    drift_adj : float
        The adjustment a, entering as e^{-a}.
    variance : float
        v >= 0; v = 0 returns the intrinsic value.
    Returns
    -------
    float
        F e^{-a} N(d1) - k N(d2).
    Raises
    ------
    ValueError
        If the variance is negative or the forward not positive.
    """
    terms: CoreTerms = _core_terms(forward, strike, drift_adj, variance)
    adjusted: float = forward * math.exp(-drift_adj)
    if strike <= 0:
        return adjusted - strike
    if terms.d1 is None or terms.d2 is None:
        return max(adjusted - strike, 0.0)
    return float(adjusted * norm.cdf(terms.d1) - strike * norm.cdf(terms.d2))


def lognormal_put_core(
    forward: float, strike: float, drift_adj: float, variance: float
) -> float:
    """The put counterpart k N(-d2) - F e^{-a} N(-d1) of lognormal_call_core."""
    terms: CoreTerms = _core_terms(forward, strike, drift_adj, variance)
    adjusted: float = forward * math.exp(-drift_adj)
    if strike <= 0:
        return 0.0
    if terms.d1 is None or terms.d2 is None:
        return max(strike - adjusted, 0.0)
    return float(strike * norm.cdf(-terms.d2) - adjusted * norm.cdf(-terms.d1))


def _caplet_result(
    label: str,
    notional: float,
    accrual: float,
    fixed_fx: float,
    discount: float,
    forward: float,
    strike: float,
    drift: QuadratureResult,
    variance: QuadratureResult,
    names: tuple[str, str],
) -> PricingResult:
    core: float = lognormal_call_core(forward, strike, drift.value, variance.value)
    value: float = notional * accrual * fixed_fx * discount * core
    variance_name, drift_name = names
    diagnostics: OrderedDict[str, Diagnostic] = OrderedDict(
        forward=forward,
        discount=discount,
        **{
            drift_name: drift.value,
            f"{drift_name}_err": drift.error,
            variance_name: variance.value,
            f"{variance_name}_err": variance.error,
        },
    )
    terms: CoreTerms = _core_terms(forward, strike, drift.value, variance.value)
    diagnostics.update(terms.items())
    logger.debug(f"{label}: {value:.10g} (core {core:.10g})")
    return PricingResult(label, value, diagnostics=diagnostics)


def quanto_caplet_components(
    spec: QuantoCapSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> list[PricingResult]:
    """The case (i) caplets of a Quanto cap, one result per covered index."""
    model.require_regime(Regime.CASE_I)
    analytics: ModelAnalytics = ModelAnalytics(model, market.tenor, cfg)
    state: FrozenState = FrozenState.from_market(market)
    components: list[PricingResult] = []
    for i in spec.covered(market.tenor.n):
        if not 0 <= i < market.tenor.n:
            raise IndexError(
                f"Caplet index {i} out of range [0, {market.tenor.n - 1}]."
            )
        components.append(
            _caplet_result(
                f"quanto-cap.caplet.{i}",
                spec.notional,
                market.tenor.accrual(i),
                spec.fixed_fx,
                market.discount_at(i + 1),
                float(state.for_libors[i]),
                spec.strike,
                analytics.alpha_tilde(i, state),
                analytics.omega_tilde(i, state.time),
                ("omega_tilde", "alpha_tilde"),
            )
        )
    return components


def quanto_caplet(
    i: int,
    spec: QuantoCapSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> PricingResult:
    """
    Price of the case (i) Quanto caplet on L_F(., T_i) paid at T_{i+1}:
    delta X-bar B(0, T_{i+1}) [L_F e^{-alpha~} N(d1) - kappa N(d2)].
    Raises
    ------
    ModelError
        If the model is not in case (i).
    IndexError
        If i is not a reset index.
    """
    single: QuantoCapSpec = QuantoCapSpec(
        spec.strike, spec.fixed_fx, spec.notional, (i,)
    )
    return quanto_caplet_components(single, market, model, cfg)[0]


def _sum_components(label: str, components: list[PricingResult]) -> PricingResult:
    diagnostics: OrderedDict[str, Diagnostic] = OrderedDict()
    for component in components:
        prefix: str = component.instrument.removeprefix(f"{label}.")
        diagnostics[f"{prefix}.value"] = component.value
        diagnostics.update(
            (f"{prefix}.{key}", value) for key, value in component.diagnostics.items()
        )
    return PricingResult(
        label, math.fsum(c.value for c in components), diagnostics=diagnostics
    )


def quanto_cap(
    spec: QuantoCapSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> PricingResult:
    """
    Sum of the case (i) Quanto caplets, with the per-caplet breakdown in the
    diagnostics.
    """
    return _sum_components(
        "quanto-cap", quanto_caplet_components(spec, market, model, cfg)
    )


def quanto_cap_fx_lognormal_components(
    spec: QuantoCapSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
    include_fixed_fx: bool = True,
) -> list[PricingResult]:
    """The case (ii) caplets, one result per covered index."""
    model.require_regime(Regime.CASE_II)
    analytics: ModelAnalytics = ModelAnalytics(model, market.tenor, cfg)
    state: FrozenState = FrozenState.from_market(market)
    fixed_fx: float = spec.fixed_fx if include_fixed_fx else 1.0
    components: list[PricingResult] = []
    for i in spec.covered(market.tenor.n):
        if not 0 <= i < market.tenor.n:
            raise IndexError(
                f"Caplet index {i} out of range [0, {market.tenor.n - 1}]."
            )
        components.append(
            _caplet_result(
                f"quanto-cap-fx.caplet.{i}",
                spec.notional,
                market.tenor.accrual(i),
                fixed_fx,
                market.discount_at(i + 1),
                float(state.for_libors[i]),
                spec.strike,
                analytics.beta_coeff(i, state),
                analytics.gamma_i(i, state),
                ("gamma_i", "beta"),
            )
        )
    return components


def quanto_cap_fx_lognormal(
    spec: QuantoCapSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
    include_fixed_fx: bool = True,
) -> PricingResult:
    """
    Quanto cap when the forward FX rates are lognormal (case (ii)):
    sum_i delta X-bar B(0, T_{i+1}) [L_F e^{-beta_i} N(d1) - kappa N(d2)] with
    variance gamma_i. include_fixed_fx=False drops the X-bar factor.
    """
    result: PricingResult = _sum_components(
        "quanto-cap-fx",
        quanto_cap_fx_lognormal_components(spec, market, model, cfg, include_fixed_fx),
    )
    result.diagnostics["include_fixed_fx"] = int(include_fixed_fx)
    return result


def ccs_components(
    market: MarketData,
    model: ModelConfig,
    regime: Regime | None = None,
    cfg: QuadratureConfig | None = None,
    spec: CcsSpec | None = None,
) -> list[PricingResult]:
    """The swap's per-period net payments, valued at time 0."""
    if regime is not None:
        model.require_regime(regime)
    spec = spec or CcsSpec()
    analytics: ModelAnalytics = ModelAnalytics(
        model, market.tenor, cfg or QuadratureConfig()
    )
    state: FrozenState = FrozenState.from_market(market)
    components: list[PricingResult] = []
    for i in range(market.tenor.n):
        adjustment: QuadratureResult = (
            analytics.alpha_tilde(i, state)
            if model.regime == Regime.CASE_I
            else analytics.beta_coeff(i, state)
        )
        name: str = "alpha_tilde" if model.regime == Regime.CASE_I else "beta"
        dom: float = float(state.dom_libors[i])
        fgn: float = float(state.for_libors[i])
        weight: float = (
            spec.notional * market.tenor.accrual(i) * market.discount_at(i + 1)
        )
        foreign_leg: float = weight * fgn * math.exp(-adjustment.value)
        domestic_leg: float = weight * dom
        components.append(
            PricingResult(
                f"ccs.period.{i}",
                foreign_leg - domestic_leg,
                diagnostics=OrderedDict(
                    foreign_leg=foreign_leg,
                    domestic_leg=domestic_leg,
                    **{name: adjustment.value, f"{name}_err": adjustment.error},
                ),
            )
        )
    return components


def ccs_price(
    market: MarketData,
    model: ModelConfig,
    regime: Regime | None = None,
    cfg: QuadratureConfig | None = None,
    spec: CcsSpec | None = None,
) -> PricingResult:
    """
    Value of receiving the foreign LIBOR and paying the domestic LIBOR, both in
    domestic currency: sum_i delta B(0, T_{i+1}) (L_F e^{-adj_i} - L), with
    adj = alpha~ in case (i) and beta in case (ii).
    Parameters
    ----------
    market : MarketData
        The curves and tenor.
    model : ModelConfig
        The model.
    regime : Regime | None
        Expected regime; None accepts the model's.
    cfg : QuadratureConfig | None
        The quadrature rule.
    spec : CcsSpec | None
        The contract terms.
    Returns
    -------
    PricingResult
        The swap value with per-period diagnostics.
    """
    return _sum_components("ccs", ccs_components(market, model, regime, cfg, spec))


def _fx_option(
    label: str,
    core: Callable[[float, float, float, float], float],
    spec: FxOptionSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> PricingResult:
    tenor: Tenor = market.tenor
    k: int = tenor.index_of(spec.expiry)
    if k == 0 and tenor.dates[0] == 0:
        raise ValueError("FX option expiry must be > 0.")
    analytics: ModelAnalytics = ModelAnalytics(model, tenor, cfg)
    state: FrozenState = FrozenState.from_market(market)
    gamma: QuadratureResult = analytics.gamma_fx(0.0, spec.expiry, state)
    forward: float = forward_fx(market.curves, tenor, k)
    discount: float = market.discount_at(k)
    value: float = (
        spec.notional * discount * core(forward, spec.strike, 0.0, gamma.value)
    )
    diagnostics: OrderedDict[str, Diagnostic] = OrderedDict(
        forward_fx=forward,
        discount=discount,
        gamma_fx=gamma.value,
        gamma_fx_err=gamma.error,
        frozen=int(k < tenor.n),
    )
    diagnostics.update(_core_terms(forward, spec.strike, 0.0, gamma.value).items())
    logger.debug(f"{label}: {value:.10g}")
    return PricingResult(label, value, diagnostics=diagnostics)


def fx_call(
    spec: FxOptionSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> PricingResult:
    """
    Call on the spot exchange rate: B(0, T) [X(0, T) N(d1) - k N(d2)] with
    variance gamma(0, T). Exact at T_N; at an earlier tenor date (case (ii)
    only) the accrual ratios are frozen, flagged frozen=1.
    Raises
    ------
    ValueError
        If the expiry is not a tenor date.
    ModelError
        If the expiry precedes T_N in case (i).
    """
    return _fx_option("fx-call", lognormal_call_core, spec, market, model, cfg)


def fx_put(
    spec: FxOptionSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> PricingResult:
    """Put on the spot exchange rate, mirrored from fx_call."""
    return _fx_option("fx-put", lognormal_put_core, spec, market, model, cfg)
