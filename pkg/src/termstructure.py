import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from src.utils import CurveError, get_logger

# Initialize logger
logger: logging.Logger = get_logger()

# Relative tolerance used to match a time against the tenor dates
TIME_MATCH_TOLERANCE: float = 1e-12


@dataclass(frozen=True)
class Tenor:
    """
    The discrete tenor T_0 < T_1 < ... < T_N, in year fractions.
    Attributes
    ----------
    dates : tuple[float, ...]
        The tenor dates, T_0 >= 0 is the first reset date.
    """

    dates: tuple[float, ...]

    def __post_init__(self) -> None:
        """Validate the tenor dates."""
        if len(self.dates) < 2:
            raise CurveError("A tenor needs at least two dates (N >= 1).")
        if self.dates[0] < 0:
            raise CurveError(f"First tenor date must be >= 0, got {self.dates[0]}.")
        for i in range(1, len(self.dates)):
            if not self.dates[i] > self.dates[i - 1]:
                raise CurveError(f"Tenor dates not strictly increasing at index {i}.")

    @property
    def n(self) -> int:
        """Number of accrual periods N."""
        return len(self.dates) - 1

    @cached_property
    def times(self) -> np.ndarray:
        """The tenor dates as an array."""
        return np.asarray(self.dates, dtype=float)

    @cached_property
    def accruals(self) -> np.ndarray:
        """The accrual factors, element i holds delta_{i+1} = T_{i+1} - T_i."""
        return np.diff(self.times)

    def accrual(self, i: int) -> float:
        """
        Accrual factor of the period starting at T_i.
        Parameters
        ----------
        i : int
            Index of the reset date, 0 <= i <= N-1.
        Returns
        -------
        float
            delta_{i+1} = T_{i+1} - T_i.
        """
        if not 0 <= i < self.n:
            raise IndexError(f"Accrual index {i} out of range [0, {self.n - 1}].")
        return float(self.accruals[i])

    def index_of(self, time: float) -> int:
        """
        Return the index k such that T_k equals the given time.
        Raises
        ------
        ValueError
            If the time is not a tenor date.
        """
        for k, date in enumerate(self.dates):
            if abs(date - time) <= TIME_MATCH_TOLERANCE * max(1.0, abs(date)):
                return k
        raise ValueError(f"Time {time} is not a tenor date of {self.dates}.")


@dataclass(frozen=True)
class CurveSet:
    """
    Time-0 domestic and foreign discount curves and the spot exchange rate.
    Attributes
    ----------
    pillar_times : tuple[float, ...]
        Times at which the discount factors are given.
    domestic_discounts : tuple[float, ...]
        B(0, T) at the pillar times.
    foreign_discounts : tuple[float, ...]
        B_F(0, T) at the pillar times.
    spot_fx : float
        X(0), domestic units per foreign unit.
    """

    pillar_times: tuple[float, ...]
    domestic_discounts: tuple[float, ...]
    foreign_discounts: tuple[float, ...]
    spot_fx: float

    def __post_init__(self) -> None:
        """Validate the curve invariants."""
        n: int = len(self.pillar_times)
        if n == 0:
            raise CurveError("A curve needs at least one pillar.")
        if len(self.domestic_discounts) != n or len(self.foreign_discounts) != n:
            raise CurveError("Pillar times and discount arrays differ in length.")
        if not self.spot_fx > 0:
            raise CurveError(f"Spot FX must be positive, got {self.spot_fx}.")
        for i in range(n):
            if self.pillar_times[i] < 0:
                raise CurveError(f"Pillar time negative at index {i}.")
            if i > 0 and not self.pillar_times[i] > self.pillar_times[i - 1]:
                raise CurveError(f"Pillar times not strictly increasing at index {i}.")
        for name, discounts in (
            ("domestic", self.domestic_discounts),
            ("foreign", self.foreign_discounts),
        ):
            check_discounts(self.pillar_times, discounts, name)

    @cached_property
    def _log_nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # Anchor the interpolation at B(0, 0) = 1
        times: list[float] = list(self.pillar_times)
        dom: list[float] = list(self.domestic_discounts)
        fgn: list[float] = list(self.foreign_discounts)
        if times[0] > 0:
            times, dom, fgn = [0.0, *times], [1.0, *dom], [1.0, *fgn]
        return np.asarray(times), np.log(dom), np.log(fgn)

    def discount(self, time: float, foreign: bool = False) -> float:
        """
        Discount factor by log-linear interpolation between pillars.
        Parameters
        ----------
        time : float
            Maturity in year fractions, 0 <= time <= last pillar.
        foreign : bool
            Whether to read the foreign curve.
        Returns
        -------
        float
            B(0, time) or B_F(0, time).
        """
        times, log_dom, log_fgn = self._log_nodes
        if time < 0 or time > times[-1] * (1 + TIME_MATCH_TOLERANCE):
            raise CurveError(f"Time {time} outside the curve range [0, {times[-1]}].")
        return float(np.exp(np.interp(time, times, log_fgn if foreign else log_dom)))


def check_discounts(
    times: tuple[float, ...] | list[float],
    discounts: tuple[float, ...] | list[float],
    name: str = "",
) -> None:
    """
    Check that discount factors lie in (0, 1], equal 1 at time 0 and strictly
    decrease.
    Raises
    ------
    CurveError
        On the first violated invariant, naming the offending index.
    """
    label: str = f"{name} discounts" if name else "discounts"
    for i, (t, b) in enumerate(zip(times, discounts)):
        if not 0 < b <= 1:
            raise CurveError(f"{label} outside (0, 1] at index {i}")
        if t == 0 and b != 1:
            raise CurveError(f"{label} must equal 1 at time 0 (index {i})")
        if i > 0 and not b < discounts[i - 1]:
            raise CurveError(f"{label} not strictly decreasing at index {i}")


@dataclass(frozen=True)
class MarketData:
    """The model's initial condition: curves and the tenor they are sampled on."""

    curves: CurveSet
    tenor: Tenor

    def __post_init__(self) -> None:
        """Check that the curves cover the tenor."""
        if self.tenor.dates[-1] > self.curves.pillar_times[-1] * (
            1 + TIME_MATCH_TOLERANCE
        ):
            raise CurveError("Curves do not cover the last tenor date.")
        for name, foreign in (("domestic", False), ("foreign", True)):
            check_discounts(
                self.tenor.dates,
                [self.curves.discount(t, foreign) for t in self.tenor.dates],
                name,
            )

    def discount_at(self, k: int, foreign: bool = False) -> float:
        """Discount factor at tenor date T_k."""
        return self.curves.discount(self.tenor.dates[k], foreign)

    def libors(self, foreign: bool = False) -> np.ndarray:
        """All initial LIBORs L(0, T_i), i = 0..N-1."""
        return np.array(
            [
                libor_from_discounts(self.curves, self.tenor, i, foreign)
                for i in range(self.tenor.n)
            ]
        )


def libor_from_discounts(
    curves: CurveSet, tenor: Tenor, i: int, foreign: bool = False
) -> float:
    """
    Forward LIBOR over [T_i, T_{i+1}] implied by the time-0 discount curve,
    1 + delta_{i+1} L(0, T_i) = B(0, T_i) / B(0, T_{i+1}).
    Parameters
    ----------
    curves : CurveSet
        The time-0 curves.
    tenor : Tenor
        The tenor structure.
    i : int
        Index of the reset date, 0 <= i <= N-1.
    foreign : bool
        Whether to use the foreign curve.
    Returns
    -------
    float
        The simple forward rate per annum.
    Raises
    ------
    IndexError
        If the index is out of range.
    CurveError
        If the discount pair is flat or increasing.
    """
    if not 0 <= i < tenor.n:
        raise IndexError(f"LIBOR index {i} out of range [0, {tenor.n - 1}].")
    b_start: float = curves.discount(tenor.dates[i], foreign)
    b_end: float = curves.discount(tenor.dates[i + 1], foreign)
    if b_start == b_end:
        raise CurveError(f"flat discount pair at index {i}")
    if b_start < b_end:
        raise CurveError(f"increasing discount pair at index {i}")
    return (b_start / b_end - 1.0) / tenor.accrual(i)


def forward_fx(curves: CurveSet, tenor: Tenor, i: int) -> float:
    """
    Forward exchange rate X(0, T_i) = B_F(0, T_i) X(0) / B(0, T_i).
    Raises
    ------
    IndexError
        If the index is out of range [0, N].
    """
    if not 0 <= i <= tenor.n:
        raise IndexError(f"Forward FX index {i} out of range [0, {tenor.n}].")
    t: float = tenor.dates[i]
    return curves.discount(t, foreign=True) * curves.spot_fx / curves.discount(t)


def accrual_ratio(rate: float | np.ndarray, delta: float) -> float | np.ndarray:
    """
    A = delta L / (1 + delta L), the weight linking a LIBOR volatility to the
    bond volatility of its accrual period.
    Raises
    ------
    ValueError
        If 1 + delta L <= 0 somewhere.
    """
    gross: float | np.ndarray = 1.0 + delta * rate
    if np.any(np.asarray(gross) <= 0):
        raise ValueError("1 + delta L <= 0: rate exploded below -1/delta.")
    return delta * rate / gross


def flat_market(
    domestic_rate: float,
    foreign_rate: float,
    spot_fx: float = 1.0,
    accrual: float = 0.5,
    periods: int = 4,
    first_reset: float | None = None,
) -> MarketData:
    """
    Build curves with flat simple forward rates on a regular tenor.
    Parameters
    ----------
    domestic_rate : float
        Domestic LIBOR of every period.
    foreign_rate : float
        Foreign LIBOR of every period.
    spot_fx : float
        X(0).
    accrual : float
        The accrual factor delta of every period.
    periods : int
        N.
    first_reset : float | None
        T_0; None uses one accrual period.
    Returns
    -------
    MarketData
        Curves with B(0, T_k) = (1 + delta L)^-(k+1) when T_0 = delta.
    """
    start: float = accrual if first_reset is None else first_reset
    dates: tuple[float, ...] = tuple(start + k * accrual for k in range(periods + 1))
    # Discount to T_0 at the same simple rate over [0, T_0]
    domestic: tuple[float, ...] = tuple(
        (1 + domestic_rate * start) ** -1 * (1 + accrual * domestic_rate) ** -k
        for k in range(periods + 1)
    )
    foreign: tuple[float, ...] = tuple(
        (1 + foreign_rate * start) ** -1 * (1 + accrual * foreign_rate) ** -k
        for k in range(periods + 1)
    )
    return MarketData(CurveSet(dates, domestic, foreign, spot_fx), Tenor(dates))
