"""
Monte Carlo oracle of the cross-currency model.

All domestic and foreign LIBORs and the terminal forward exchange rate X(., T_N)
are driven by one discretized random field and simulated jointly under the
domestic terminal measure. Prices are obtained by deflating with B(., T_N).
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from tqdm import tqdm
from tqdm.contrib.logging import logging_redirect_tqdm

from src.analytics import ModelAnalytics
from src.modelspec import (
    CorrelationSpec,
    ModelConfig,
    Regime,
    correlation_matrix,
    eval_vol,
)
from src.pricers import (
    CcsSpec,
    FxOptionSpec,
    QuantoCapSpec,
    ccs_components,
    fx_call,
    quanto_cap_fx_lognormal_components,
    quanto_caplet_components,
)
from src.quadrature import QuadratureConfig, QuadratureRule, reference_rule
from src.results import PricingResult, ValidationReport
from src.termstructure import MarketData, Tenor
from src.utils import ModelError, get_logger

# Initialize logger
logger: logging.Logger = get_logger()

# Eigenvalues below this are clipped to zero in the field factor
EIGENVALUE_TOLERANCE: float = 1e-10

# A minimum eigenvalue below this means the kernel is not a correlation
INVALID_KERNEL_EIGENVALUE: float = -1e-8


@dataclass(frozen=True)
class McConfig:
    """
    Monte Carlo settings.
    Attributes
    ----------
    paths : int
        Number of paths P >= 2 (even with antithetics).
    steps_per_accrual : int
        Time steps per accrual period.
    seed : int
        Root seed of the per-block streams.
    antithetic : bool
        Whether paths come in (z, -z) pairs.
    maturity_resolution : int
        Gauss-Legendre maturity nodes per time step interval.
    block_size : int
        Paths per random stream block; fixes the stream layout.
    """

    paths: int = 20000
    steps_per_accrual: int = 4
    seed: int = 1234
    antithetic: bool = True
    maturity_resolution: int = 4
    block_size: int = 4096

    def __post_init__(self) -> None:
        if self.paths < 2:
            raise ValueError(f"Monte Carlo needs at least 2 paths, got {self.paths}.")
        if self.steps_per_accrual < 1:
            raise ValueError(
                f"steps_per_accrual must be >= 1, got {self.steps_per_accrual}."
            )
        if self.maturity_resolution < 1:
            raise ValueError(
                f"maturity_resolution must be >= 1, got {self.maturity_resolution}."
            )
        if self.block_size < 2:
            raise ValueError(f"block_size must be >= 2, got {self.block_size}.")
        if self.antithetic and (self.paths % 2 or self.block_size % 2):
            raise ValueError("Antithetic sampling needs even paths and block_size.")


@dataclass(frozen=True, eq=False)
class FieldDiscretization:
    """
    The random field on a maturity grid.
    Attributes
    ----------
    grid : np.ndarray
        Maturities u_1 < ... < u_M.
    weights : np.ndarray
        Quadrature weights w_j of int . du on the grid.
    correlation : np.ndarray
        C_jk = c(u_j, u_k).
    factor : np.ndarray
        F with F F^T equal to C after eigenvalue clipping.
    reconstruction_error : float
        max |F F^T - C|.
    clipped : int
        Number of eigenvalues set to zero.
    """

    grid: np.ndarray
    weights: np.ndarray
    correlation: np.ndarray
    factor: np.ndarray
    reconstruction_error: float
    clipped: int

    @property
    def size(self) -> int:
        return len(self.grid)

    def sample_increments(
        self, rng: np.random.Generator, h: float, count: int
    ) -> np.ndarray:
        """Field increments dZ(u_j) over a step of length h, shape (count, M)."""
        return math.sqrt(h) * rng.standard_normal((count, self.size)) @ self.factor.T


def build_field_factor(
    corr: CorrelationSpec,
    grid: np.ndarray,
    tol: float = EIGENVALUE_TOLERANCE,
    weights: np.ndarray | None = None,
) -> FieldDiscretization:
    """
    Factor the correlation matrix of the field on a maturity grid.
    Parameters
    ----------
    corr : CorrelationSpec
        The correlation function.
    grid : np.ndarray
        Strictly increasing maturities.
    tol : float
        Eigenvalues below tol are clipped to zero.
    weights : np.ndarray | None
        Integration weights of the grid; None uses cell widths.
    Returns
    -------
    FieldDiscretization
        The factor F = V sqrt(lambda) of the repaired matrix.
    Raises
    ------
    ValueError
        If the grid is not strictly increasing.
    ModelError
        If the minimum eigenvalue is below -1e-8.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("Maturity grid must be non-empty and strictly increasing.")
    if weights is None:
        edges: np.ndarray = np.concatenate(
            [[grid[0]], (grid[1:] + grid[:-1]) / 2, [grid[-1]]]
        )
        weights = np.diff(edges) if grid.size > 1 else np.ones(1)
    matrix: np.ndarray = correlation_matrix(corr, grid)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    if eigenvalues[0] < INVALID_KERNEL_EIGENVALUE:
        raise ModelError(
            f"Correlation kernel not positive semidefinite on the grid "
            f"(min eigenvalue {eigenvalues[0]:.3e})."
        )
    clipped: int = int(np.sum(eigenvalues < tol))
    kept: np.ndarray = np.where(eigenvalues < tol, 0.0, eigenvalues)
    factor: np.ndarray = eigenvectors * np.sqrt(kept)
    error: float = float(np.max(np.abs(factor @ factor.T - matrix)))
    if clipped:
        logger.debug(f"Clipped {clipped} of {grid.size} eigenvalues, error {error:.2e}")
    return FieldDiscretization(
        grid, np.asarray(weights, dtype=float), matrix, factor, error, clipped
    )


def time_grid(tenor: Tenor, steps_per_accrual: int) -> np.ndarray:
    """
    Simulation times: 0, then steps_per_accrual equal steps on [0, T_0] (when
    T_0 > 0) and on every accrual period.
    """
    knots: list[float] = ([0.0] if tenor.dates[0] > 0 else []) + list(tenor.dates)
    pieces: list[np.ndarray] = [np.array([knots[0]])]
    for start, end in zip(knots[:-1], knots[1:]):
        pieces.append(np.linspace(start, end, steps_per_accrual + 1)[1:])
    return np.concatenate(pieces)


def maturity_grid(times: np.ndarray, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre maturity nodes, `resolution` per time step interval, so that
    every accrual strip and every [s, T_N] with s a simulation time is a union of
    whole cells.
    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Nodes and weights.
    """
    x, w = reference_rule(QuadratureRule.GAUSS_LEGENDRE, resolution, 1)
    lengths: np.ndarray = np.diff(times)[:, None]
    nodes: np.ndarray = (times[:-1, None] + lengths * x[None, :]).ravel()
    weights: np.ndarray = (lengths * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class StepPlan:
    """Deterministic coefficients of one time step."""

    h: float
    alive: np.ndarray
    # (M, 2N+1): field exposures of the domestic, foreign and FX log-increments
    exposure: np.ndarray
    # (2N+1, 2N+1): instantaneous covariance of the same columns
    covariance: np.ndarray
    fx_scale: float
    fx_drift: float


@dataclass(frozen=True, eq=False)
class PathSet:
    """
    Simulated state at the tenor dates under the domestic terminal measure.
    Attributes
    ----------
    tenor : Tenor
        The tenor structure.
    dom : np.ndarray
        L(T_k, T_j), shape (P, N+1, N); rates fixed before T_k hold their fixing.
    foreign : np.ndarray
        L_F(T_k, T_j), shape (P, N+1, N).
    fx_terminal : np.ndarray
        X(T_k, T_N), shape (P, N+1).
    aborted : np.ndarray
        Paths that produced a non-finite state or a rate with 1 + delta L <= 0.
    antithetic : bool
        Whether rows 2m and 2m+1 form an antithetic pair.
    """

    tenor: Tenor
    dom: np.ndarray
    foreign: np.ndarray
    fx_terminal: np.ndarray
    aborted: np.ndarray
    antithetic: bool

    @property
    def count(self) -> int:
        return self.dom.shape[0]

    @property
    def aborted_count(self) -> int:
        return int(self.aborted.sum())

    @cached_property
    def deflators(self) -> np.ndarray:
        """1 / B(T_k, T_N) = prod_{j >= k} (1 + delta L(T_k, T_j)), shape (P, N+1)."""
        gross: np.ndarray = 1.0 + self.tenor.accruals[None, None, :] * self.dom
        alive: np.ndarray = (
            np.arange(self.tenor.n)[None, :] >= np.arange(self.tenor.n + 1)[:, None]
        )
        return np.prod(np.where(alive[None], gross, 1.0), axis=2)


@dataclass(frozen=True)
class Cashflow:
    """
    A payment at T_{pay_index}, an amount per path read from the path set.
    Attributes
    ----------
    name : str
        Label of the cash flow.
    pay_index : int
        Payment date index, 0 <= k <= N.
    amount : Callable[[PathSet], np.ndarray]
        Payment per path in domestic currency.
    fixing_index : int
        Latest snapshot the amount reads, <= pay_index.
    """

    name: str
    pay_index: int
    amount: Callable[[PathSet], np.ndarray]
    fixing_index: int = 0


def zero_bond_cashflow(pay_index: int, notional: float = 1.0) -> Cashflow:
    return Cashflow(
        f"zero-bond.{pay_index}",
        pay_index,
        lambda paths: np.full(paths.count, notional),
    )


def libor_cashflow(i: int, foreign: bool = False, notional: float = 1.0) -> Cashflow:
    """L(T_i, T_i) (or the foreign rate) paid at T_{i+1}."""
    return Cashflow(
        f"{'foreign' if foreign else 'domestic'}-libor.{i}",
        i + 1,
        lambda paths: notional * (paths.foreign if foreign else paths.dom)[:, i, i],
        i,
    )


def quanto_caplet_cashflow(
    i: int, strike: float, fixed_fx: float, notional: float = 1.0, label: str = ""
) -> Cashflow:
    """delta X-bar (L_F(T_i, T_i) - kappa)^+ paid at T_{i+1}."""

    def amount(paths: PathSet) -> np.ndarray:
        delta: float = paths.tenor.accrual(i)
        payoff: np.ndarray = np.maximum(paths.foreign[:, i, i] - strike, 0)
        return notional * delta * fixed_fx * payoff

    return Cashflow(label or f"quanto-cap.caplet.{i}", i + 1, amount, i)


def ccs_cashflow(i: int, notional: float = 1.0) -> Cashflow:
    """delta (L_F(T_i, T_i) - L(T_i, T_i)) paid at T_{i+1}."""

    def amount(paths: PathSet) -> np.ndarray:
        delta: float = paths.tenor.accrual(i)
        return notional * delta * (paths.foreign[:, i, i] - paths.dom[:, i, i])

    return Cashflow(f"ccs.period.{i}", i + 1, amount, i)


def fx_call_cashflow(
    k: int, strike: float, notional: float = 1.0, put: bool = False
) -> Cashflow:
    """(X(T_k) - K)^+ (or the put) paid at T_k."""

    def amount(paths: PathSet) -> np.ndarray:
        spot: np.ndarray = reconstruct_spot_fx(paths, k)
        intrinsic: np.ndarray = strike - spot if put else spot - strike
        return notional * np.maximum(intrinsic, 0)

    return Cashflow("fx-put" if put else "fx-call", k, amount, k)


def reconstruct_spot_fx(paths: PathSet, i: int) -> np.ndarray:
    """
    X(T_i) = X(T_i, T_N) prod_{j >= i} (1 + delta L_F(T_i, T_j)) /
    (1 + delta L(T_i, T_j)) per path.
    Raises
    ------
    IndexError
        If i is out of range [0, N].
    """
    n: int = paths.tenor.n
    if not 0 <= i <= n:
        raise IndexError(f"FX index {i} out of range [0, {n}].")
    delta: np.ndarray = paths.tenor.accruals[i:]
    ratio: np.ndarray = np.prod(
        (1.0 + delta * paths.foreign[:, i, i:]) / (1.0 + delta * paths.dom[:, i, i:]),
        axis=1,
    )
    return paths.fx_terminal[:, i] * ratio


@dataclass(eq=False)
class TerminalMeasureSimulator:
    """
    Log-Euler simulation of the joint system with step-start drifts.
    Attributes
    ----------
    market : MarketData
        Initial curves and tenor.
    model : ModelConfig
        The model.
    mc : McConfig
        Monte Carlo settings.
    quadrature : QuadratureConfig
        Rule of the exact per-step FX variance.
    disc : FieldDiscretization | None
        Factor on the maturity grid; built when None.
    """

    market: MarketData
    model: ModelConfig
    mc: McConfig
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    disc: FieldDiscretization | None = None
    times: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    plans: list[StepPlan] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        tenor: Tenor = self.market.tenor
        self.times = time_grid(tenor, self.mc.steps_per_accrual)
        grid, self.weights = maturity_grid(self.times, self.mc.maturity_resolution)
        if self.disc is None:
            self.disc = build_field_factor(
                self.model.correlation, grid, weights=self.weights
            )
        elif self.disc.grid.shape != grid.shape or not np.allclose(
            self.disc.grid, grid
        ):
            raise ModelError("Field factor grid does not match the maturity grid.")
        self.plans = [self._plan(k) for k in range(len(self.times) - 1)]

    @property
    def n(self) -> int:
        return self.market.tenor.n

    def _plan(self, k: int) -> StepPlan:
        tenor: Tenor = self.market.tenor
        t: float = float(self.times[k])
        h: float = float(self.times[k + 1] - t)
        grid: np.ndarray = self.disc.grid
        strip: np.ndarray = np.searchsorted(tenor.times, grid, side="right") - 1
        alive: np.ndarray = tenor.times[:-1] > t
        n: int = self.n
        loadings: np.ndarray = np.zeros((grid.size, 2 * n + 1))
        for i in np.flatnonzero(alive):
            mask: np.ndarray = strip == i
            u: np.ndarray = grid[mask]
            w: np.ndarray = self.weights[mask]
            bounds: tuple[float, float] = (tenor.dates[i], tenor.dates[i + 1])
            loadings[mask, i] = eval_vol(self.model.dom_libor_vol, i, t, u, bounds) * w
            loadings[mask, n + i] = (
                eval_vol(self.model.foreign_vol, i, t, u, bounds) * w
            )
        ahead: np.ndarray = grid > t
        loadings[ahead, 2 * n] = (
            eval_vol(self.model.terminal_fx_vol, n, t, grid[ahead])
            * self.weights[ahead]
        )
        covariance: np.ndarray = loadings.T @ self.disc.correlation @ loadings
        # Rescale the FX column so that each step carries the exact variance
        exact: float = (
            ModelAnalytics(self.model, tenor, self.quadrature)
            .terminal_fx_variance(t, t + h)
            .value
        )
        grid_variance: float = covariance[2 * n, 2 * n] * h
        fx_scale: float = math.sqrt(exact / grid_variance) if grid_variance > 0 else 1.0
        logger.debug(
            f"Step {k} at t={t:.4f}: alive {alive.sum()}, FX variance {exact:.3e} "
            f"(grid {grid_variance:.3e})"
        )
        return StepPlan(
            h,
            alive,
            self.disc.factor.T @ loadings,
            covariance,
            fx_scale,
            -0.5 * exact / h,
        )

    def _draws(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if not self.mc.antithetic:
            return rng.standard_normal((size, self.disc.size))
        half: np.ndarray = rng.standard_normal((size // 2, self.disc.size))
        draws: np.ndarray = np.empty((size, self.disc.size))
        draws[0::2], draws[1::2] = half, -half
        return draws

    def _foreign_state(self, rates: np.ndarray) -> np.ndarray:
        # ln L_F in case (i), ln(1 + delta L_F) in case (ii)
        if self.model.regime == Regime.CASE_I:
            return np.log(rates)
        return np.log1p(self.market.tenor.accruals * rates)

    def _foreign_rates(self, state: np.ndarray) -> np.ndarray:
        if self.model.regime == Regime.CASE_I:
            return np.exp(state)
        return np.expm1(state) / self.market.tenor.accruals

    def _foreign_drift(self, plan: StepPlan, rates: np.ndarray) -> np.ndarray:
        """
        Drift of the foreign state under the domestic terminal measure.
        In case (ii) d ln(1 + delta L_F) = drift dt + sigma_F dW with a drift free
        of the path, so the state stays defined when L_F <= 0.
        """
        n: int = self.n
        cov_ff: np.ndarray = plan.covariance[n : 2 * n, n : 2 * n]
        upper: np.ndarray = np.triu(cov_ff, k=1)
        cov_fx: np.ndarray = plan.covariance[n : 2 * n, 2 * n]
        if self.model.regime == Regime.CASE_I:
            delta: np.ndarray = self.market.tenor.accruals
            ratio: np.ndarray = delta * rates / (1.0 + delta * rates)
            return -0.5 * np.diag(cov_ff) - ratio @ upper.T - cov_fx
        return -0.5 * np.diag(cov_ff) - upper.sum(axis=1) - cov_fx

    def _valid(
        self, log_dom: np.ndarray, state_for: np.ndarray, log_fx: np.ndarray
    ) -> np.ndarray:
        # Finite state and 1 + delta L > 0; domestic rates are positive already
        delta: np.ndarray = self.market.tenor.accruals
        with np.errstate(over="ignore", invalid="ignore"):
            gross: np.ndarray = 1.0 + delta * self._foreign_rates(state_for)
        return (
            np.all(np.isfinite(log_dom), axis=1)
            & np.all(np.isfinite(state_for), axis=1)
            & np.isfinite(log_fx)
            & np.all(gross > 0, axis=1)
        )

    def simulate_block(self, block: int) -> tuple[np.ndarray, ...]:
        """
        Simulate one block of paths from its own counter-based stream.
        Returns
        -------
        tuple[np.ndarray, ...]
            Domestic and foreign snapshots, terminal FX snapshots, aborted mask.
        """
        n: int = self.n
        start: int = block * self.mc.block_size
        size: int = min(self.mc.block_size, self.mc.paths - start)
        rng: np.random.Generator = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.mc.seed, spawn_key=(block,)))
        )
        tenor: Tenor = self.market.tenor
        delta: np.ndarray = tenor.accruals
        log_dom: np.ndarray = np.tile(np.log(self.market.libors()), (size, 1))
        state_for: np.ndarray = np.tile(
            self._foreign_state(self.market.libors(foreign=True)), (size, 1)
        )
        log_fx: np.ndarray = np.full(
            size,
            math.log(
                self.market.discount_at(n, foreign=True)
                * self.market.curves.spot_fx
                / self.market.discount_at(n)
            ),
        )
        dom: np.ndarray = np.empty((size, n + 1, n))
        fgn: np.ndarray = np.empty((size, n + 1, n))
        fx: np.ndarray = np.empty((size, n + 1))
        aborted: np.ndarray = np.zeros(size, dtype=bool)
        snapshots: dict[int, int] = {
            int(np.argmin(np.abs(self.times - date))): k
            for k, date in enumerate(tenor.dates)
        }

        def snap(position: int) -> None:
            if (k := snapshots.get(position)) is not None:
                dom[:, k], fgn[:, k], fx[:, k] = (
                    np.exp(log_dom),
                    self._foreign_rates(state_for),
                    np.exp(log_fx),
                )

        snap(0)
        for step, plan in enumerate(self.plans):
            draws: np.ndarray = self._draws(rng, size)
            shocks: np.ndarray = math.sqrt(plan.h) * draws @ plan.exposure
            rates: np.ndarray = np.exp(log_dom)
            ratio: np.ndarray = delta * rates / (1.0 + delta * rates)
            cov_dd: np.ndarray = plan.covariance[:n, :n]
            drift_dom: np.ndarray = (
                -0.5 * np.diag(cov_dd) - ratio @ np.triu(cov_dd, 1).T
            )
            drift_for: np.ndarray = self._foreign_drift(
                plan, self._foreign_rates(state_for)
            )
            with np.errstate(over="ignore", invalid="ignore"):
                log_dom = log_dom + np.where(
                    plan.alive, drift_dom * plan.h + shocks[:, :n], 0.0
                )
                state_for = state_for + np.where(
                    plan.alive, drift_for * plan.h + shocks[:, n : 2 * n], 0.0
                )
                log_fx = (
                    log_fx
                    + plan.fx_drift * plan.h
                    + plan.fx_scale * shocks[:, 2 * n]
                )
            aborted |= ~self._valid(log_dom, state_for, log_fx)
            snap(step + 1)
        return dom, fgn, fx, aborted

    def simulate(self, workers: int = 1) -> PathSet:
        """
        Simulate all blocks; the merge is in block order, so results do not depend
        on the number of workers.
        """
        blocks: int = -(-self.mc.paths // self.mc.block_size)
        logger.info(
            f"Simulating {self.mc.paths} paths in {blocks} blocks, "
            f"{len(self.plans)} steps, {self.disc.size} field nodes, {workers} workers"
        )
        with logging_redirect_tqdm([logger]):
            with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
                parts: list[tuple[np.ndarray, ...]] = list(
                    tqdm(
                        executor.map(self.simulate_block, range(blocks)),
                        total=blocks,
                        desc="Simulating path blocks",
                        unit="block",
                        disable=blocks < 2,
                    )
                )
        dom, fgn, fx, aborted = (np.concatenate(arrays) for arrays in zip(*parts))
        if aborted.any():
            logger.warning(
                f"{int(aborted.sum())} paths aborted on a non-finite state "
                f"or 1 + delta L <= 0"
            )
        return PathSet(self.market.tenor, dom, fgn, fx, aborted, self.mc.antithetic)


def simulate_terminal_measure(
    market: MarketData,
    model: ModelConfig,
    mc: McConfig,
    disc: FieldDiscretization | None = None,
    cfg: QuadratureConfig | None = None,
    workers: int = 1,
) -> PathSet:
    """
    Simulate domestic and foreign LIBORs and X(., T_N) under Q_{T_N}.
    Parameters
    ----------
    market : MarketData
        Initial curves and tenor.
    model : ModelConfig
        The model; in case (ii) the simulated state is ln(1 + delta L_F), whose
        volatility is sigma_F.
    mc : McConfig
        Monte Carlo settings.
    disc : FieldDiscretization | None
        Pre-built factor, which must sit on the maturity grid of mc.
    cfg : QuadratureConfig | None
        Rule of the exact per-step FX variance.
    workers : int
        Worker threads.
    Returns
    -------
    PathSet
        The tenor-date snapshots.
    """
    return TerminalMeasureSimulator(
        market, model, mc, cfg or QuadratureConfig(), disc
    ).simulate(workers)


def mc_price(
    paths: PathSet, payoff: Cashflow | list[Cashflow], market: MarketData
) -> PricingResult:
    """
    B(0, T_N) times the mean deflated payoff.
    Parameters
    ----------
    paths : PathSet
        Simulated paths.
    payoff : Cashflow | list[Cashflow]
        Cash flows summed per path.
    market : MarketData
        Supplies B(0, T_N).
    Returns
    -------
    PricingResult
        Value and standard error; antithetic pairs are averaged first and pairs
        with an aborted path are dropped. The diagnostics count the samples used
        and the aborted paths.
    Raises
    ------
    ValueError
        If a cash flow reads state after its payment date.
    """
    cashflows: list[Cashflow] = payoff if isinstance(payoff, list) else [payoff]
    deflated: np.ndarray = np.zeros(paths.count)
    for cashflow in cashflows:
        if not 0 <= cashflow.pay_index <= paths.tenor.n:
            raise IndexError(f"{cashflow.name}: payment index out of range.")
        if cashflow.fixing_index > cashflow.pay_index:
            raise ValueError(f"{cashflow.name}: payoff references unsimulated state.")
        deflated += cashflow.amount(paths) * paths.deflators[:, cashflow.pay_index]
    keep: np.ndarray = ~paths.aborted
    if paths.antithetic:
        deflated = deflated.reshape(-1, 2).mean(axis=1)
        keep = keep.reshape(-1, 2).all(axis=1)
    samples: np.ndarray = deflated[keep]
    numeraire: float = market.discount_at(paths.tenor.n)
    stderr: float = 0.0
    if samples.size > 1:
        stderr = float(samples.std(ddof=1) / math.sqrt(samples.size))
    name: str = cashflows[0].name if len(cashflows) == 1 else "portfolio"
    return PricingResult(
        name,
        numeraire * float(samples.mean()),
        numeraire * stderr,
        diagnostics={"samples": int(samples.size), "aborted": paths.aborted_count},
    )


def _instrument_legs(
    instrument: QuantoCapSpec | CcsSpec | FxOptionSpec,
    market: MarketData,
    model: ModelConfig,
    cfg: QuadratureConfig,
) -> tuple[str, list[PricingResult], list[Cashflow]]:
    tenor: Tenor = market.tenor
    if isinstance(instrument, QuantoCapSpec):
        if model.regime == Regime.CASE_I:
            label: str = "quanto-cap"
            analytic = quanto_caplet_components(instrument, market, model, cfg)
        else:
            label = "quanto-cap-fx"
            analytic = quanto_cap_fx_lognormal_components(
                instrument, market, model, cfg
            )
        cashflows: list[Cashflow] = [
            quanto_caplet_cashflow(
                i,
                instrument.strike,
                instrument.fixed_fx,
                instrument.notional,
                f"{label}.caplet.{i}",
            )
            for i in instrument.covered(tenor.n)
        ]
        return label, analytic, cashflows
    if isinstance(instrument, CcsSpec):
        analytic = ccs_components(market, model, None, cfg, instrument)
        return (
            "ccs",
            analytic,
            [ccs_cashflow(i, instrument.notional) for i in range(tenor.n)],
        )
    analytic = [fx_call(instrument, market, model, cfg)]
    return (
        "fx-call",
        analytic,
        [
            fx_call_cashflow(
                tenor.index_of(instrument.expiry),
                instrument.strike,
                instrument.notional,
            )
        ],
    )


def validate_against_analytic(
    instrument: QuantoCapSpec | CcsSpec | FxOptionSpec,
    market: MarketData,
    model: ModelConfig,
    mc: McConfig,
    cfg: QuadratureConfig,
    paths: PathSet | None = None,
    workers: int = 1,
) -> list[ValidationReport]:
    """
    Compare the closed form of an instrument with the Monte Carlo oracle.
    Parameters
    ----------
    instrument : QuantoCapSpec | CcsSpec | FxOptionSpec
        The contract; a Quanto cap uses the case (i) or case (ii) pricer
        according to the model regime.
    market, model, mc, cfg
        Inputs of both routes.
    paths : PathSet | None
        Paths to reuse; simulated when None.
    workers : int
        Worker threads of the simulation.
    Returns
    -------
    list[ValidationReport]
        One report per component, then the total when there are several. Every
        report fails when paths were aborted.
    """
    label, analytic, cashflows = _instrument_legs(instrument, market, model, cfg)
    if paths is None:
        paths = simulate_terminal_measure(market, model, mc, cfg=cfg, workers=workers)
    reports: list[ValidationReport] = []
    for component, cashflow in zip(analytic, cashflows):
        estimate: PricingResult = mc_price(paths, cashflow, market)
        reports.append(
            ValidationReport(
                component.instrument,
                component.value,
                estimate.value,
                estimate.stderr,
                paths.aborted_count,
            )
        )
    if len(cashflows) > 1:
        estimate = mc_price(paths, cashflows, market)
        reports.append(
            ValidationReport(
                label,
                math.fsum(c.value for c in analytic),
                estimate.value,
                estimate.stderr,
                paths.aborted_count,
            )
        )
    for report in reports:
        if report.passed:
            logger.info(str(report))
        else:
            logger.warning(str(report))
    return reports
