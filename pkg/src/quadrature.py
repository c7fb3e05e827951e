"""
Deterministic nested integration on boxes and on prisms whose inner limits move
with the outer time variable.

Every integrand is called once per rule with broadcastable numpy arrays, so it
must be written with numpy operations. The returned error estimate is the
absolute change of the value when the number of panels per axis is doubled.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum, unique
from functools import cache
from typing import Literal

import numpy as np

from src.utils import QuadratureError, get_logger

# Initialize logger
logger: logging.Logger = get_logger()

# Marker for an inner lower limit equal to the outer variable s
MOVING: Literal["s"] = "s"

Bound = tuple[float | Literal["s"], float]


@unique
class QuadratureRule(StrEnum):
    GAUSS_LEGENDRE = "gauss_legendre"
    COMPOSITE_TRAPEZOID = "composite_trapezoid"


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Tensor-product rule settings.
    Attributes
    ----------
    rule : QuadratureRule
        Gauss-Legendre or composite trapezoid.
    order : int
        Nodes per panel, n >= 2.
    panels : int
        Panels per axis, p >= 1.
    split_diagonal : bool
        Split the v axis at u so that the |u - v| kink of the correlation kernel
        falls on a panel boundary.
    """

    rule: QuadratureRule = QuadratureRule.GAUSS_LEGENDRE
    order: int = 8
    panels: int = 1
    split_diagonal: bool = True

    def __post_init__(self) -> None:
        if self.order < 2:
            raise ValueError(f"Quadrature order must be >= 2, got {self.order}.")
        if self.panels < 1:
            raise ValueError(f"Quadrature panels must be >= 1, got {self.panels}.")

    def refined(self) -> "QuadratureConfig":
        """The same rule with twice as many panels."""
        return QuadratureConfig(
            self.rule, self.order, 2 * self.panels, self.split_diagonal
        )


@dataclass(frozen=True)
class QuadratureResult:
    """An integral value with its advisory error estimate."""

    value: float
    error: float = 0.0

    def __add__(self, other: "QuadratureResult") -> "QuadratureResult":
        return QuadratureResult(self.value + other.value, self.error + other.error)

    def __sub__(self, other: "QuadratureResult") -> "QuadratureResult":
        return QuadratureResult(self.value - other.value, self.error + other.error)

    def scaled(self, factor: float) -> "QuadratureResult":
        return QuadratureResult(factor * self.value, abs(factor) * self.error)


@cache
def reference_rule(
    rule: QuadratureRule, order: int, panels: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Composite nodes and weights on [0, 1].
    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Nodes and weights, order * panels of each; weights sum to 1.
    """
    if rule == QuadratureRule.GAUSS_LEGENDRE:
        x, w = np.polynomial.legendre.leggauss(order)
        x, w = (x + 1.0) / 2.0, w / 2.0
    else:
        x = np.linspace(0.0, 1.0, order)
        w = np.full(order, 1.0 / (order - 1))
        w[0] = w[-1] = 0.5 / (order - 1)
    offsets: np.ndarray = np.arange(panels)[:, None] / panels
    nodes: np.ndarray = (offsets + x[None, :] / panels).ravel()
    weights: np.ndarray = np.tile(w / panels, panels)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _map(
    lower: np.ndarray | float, upper: np.ndarray | float, cfg: QuadratureConfig
) -> tuple[np.ndarray, np.ndarray]:
    # Maps the reference rule onto [lower, upper] along a new trailing axis
    x, w = reference_rule(cfg.rule, cfg.order, cfg.panels)
    lower = np.asarray(lower, dtype=float)[..., None]
    length: np.ndarray = np.asarray(upper, dtype=float)[..., None] - lower
    return lower + length * x, length * w


def _split(
    lower: np.ndarray, upper: np.ndarray, at: np.ndarray, cfg: QuadratureConfig
) -> tuple[np.ndarray, np.ndarray]:
    # Nodes of [lower, upper] with a panel boundary forced at `at` when inside
    if not cfg.split_diagonal:
        return _map(lower, upper, cfg)
    cut: np.ndarray = np.clip(at, lower, upper)
    left_nodes, left_weights = _map(lower, cut, cfg)
    right_nodes, right_weights = _map(cut, upper, cfg)
    return (
        np.concatenate([left_nodes, right_nodes], axis=-1),
        np.concatenate([left_weights, right_weights], axis=-1),
    )


def _checked_sum(samples: np.ndarray, weights: np.ndarray) -> float:
    if not np.all(np.isfinite(samples)):
        raise QuadratureError("non-finite integrand sample")
    return float(np.sum(weights * samples))


def _line(
    f: Callable,
    bounds: tuple[float, float],
    cfg: QuadratureConfig,
    split_at: float | None = None,
) -> float:
    if split_at is None:
        u, wu = _map(bounds[0], bounds[1], cfg)
    else:
        u, wu = _split(
            np.float64(bounds[0]), np.float64(bounds[1]), np.float64(split_at), cfg
        )
    return _checked_sum(np.asarray(f(u)) + 0.0 * u, wu)


def _box2(
    f: Callable,
    bounds: tuple[tuple[float, float], tuple[float, float]],
    cfg: QuadratureConfig,
) -> float:
    (a1, b1), (a2, b2) = bounds
    u, wu = _map(a1, b1, cfg)
    v, wv = _split(np.full_like(u, a2), np.full_like(u, b2), u, cfg)
    uu: np.ndarray = u[:, None]
    samples: np.ndarray = np.asarray(f(uu, v)) + 0.0 * v
    return _checked_sum(samples, wu[:, None] * wv)


def _nested3(
    f: Callable,
    s_range: tuple[float, float],
    u_range: Bound,
    v_range: Bound,
    cfg: QuadratureConfig,
) -> float:
    s, ws = _map(s_range[0], s_range[1], cfg)
    u_lower: np.ndarray = s if u_range[0] == MOVING else np.full_like(s, u_range[0])
    u, wu = _map(u_lower, u_range[1], cfg)
    ss: np.ndarray = s[:, None]
    v_lower: np.ndarray = (
        np.broadcast_to(ss, u.shape)
        if v_range[0] == MOVING
        else np.full_like(u, v_range[0])
    )
    v, wv = _split(v_lower, np.full_like(u, v_range[1]), u, cfg)
    samples: np.ndarray = np.asarray(f(ss[:, :, None], u[:, :, None], v)) + 0.0 * v
    return _checked_sum(samples, ws[:, None, None] * wu[:, :, None] * wv)


def _with_error(evaluate: Callable[[QuadratureConfig], float], cfg: QuadratureConfig):
    value: float = evaluate(cfg)
    refined: float = evaluate(cfg.refined())
    return QuadratureResult(value, abs(refined - value))


def integrate_line(
    f: Callable,
    bounds: tuple[float, float],
    cfg: QuadratureConfig,
    split_at: float | None = None,
) -> QuadratureResult:
    """
    One-dimensional rule for f(u) on [a, b], optionally with a forced panel
    boundary at split_at (a kink of the integrand).
    """
    if bounds[0] > bounds[1]:
        raise ValueError(f"Empty interval {bounds}.")
    return _with_error(lambda c: _line(f, bounds, c, split_at), cfg)


def integrate_box2(
    f: Callable,
    bounds: tuple[tuple[float, float], tuple[float, float]],
    cfg: QuadratureConfig,
) -> QuadratureResult:
    """
    Tensor rule for f(u, v) on [a1, b1] x [a2, b2].
    Parameters
    ----------
    f : Callable
        Vectorized integrand f(u, v).
    bounds : tuple
        ((a1, b1), (a2, b2)) with a <= b per axis.
    cfg : QuadratureConfig
        The rule settings.
    Returns
    -------
    QuadratureResult
        The value at the configured rule and the panel-doubling error estimate.
    Raises
    ------
    QuadratureError
        If an integrand sample is not finite.
    """
    for a, b in bounds:
        if a > b:
            raise ValueError(f"Empty interval ({a}, {b}).")
    return _with_error(lambda c: _box2(f, bounds, c), cfg)


def integrate_box3(
    f: Callable,
    bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]],
    cfg: QuadratureConfig,
) -> QuadratureResult:
    """
    Tensor rule for f(s, u, v) on a box; see integrate_box2.
    """
    for a, b in bounds:
        if a > b:
            raise ValueError(f"Empty interval ({a}, {b}).")
    s_range, u_range, v_range = bounds
    return _with_error(lambda c: _nested3(f, s_range, u_range, v_range, c), cfg)


def integrate_prism3(
    f: Callable,
    s_range: tuple[float, float],
    u_range: Bound,
    v_range: Bound,
    cfg: QuadratureConfig,
) -> QuadratureResult:
    """
    Integrate f(s, u, v) over s in [t, T] and inner axes whose lower limit is
    either fixed or the outer variable s (marker "s").

    The inner axes are re-noded at every outer node. With both lower limits
    fixed the result coincides with integrate_box3.
    Raises
    ------
    ValueError
        If t > T or an inner upper limit lies below T.
    """
    t, T = s_range
    if t > T:
        raise ValueError(f"Empty outer interval ({t}, {T}).")
    for lower, upper in (u_range, v_range):
        if lower == MOVING and upper < T:
            raise ValueError(f"Inner upper limit {upper} below outer limit {T}.")
        if lower != MOVING and lower > upper:
            raise ValueError(f"Empty inner interval ({lower}, {upper}).")
    return _with_error(lambda c: _nested3(f, s_range, u_range, v_range, c), cfg)
