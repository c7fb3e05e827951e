from collections.abc import Callable
from pathlib import Path

import pytest

from src.market_io import ModelFile, write_curves, write_model
from src.mc_engine import McConfig
from src.modelspec import CorrelationSpec, ModelConfig, Regime, VolSurfaceSpec
from src.quadrature import QuadratureConfig
from src.termstructure import MarketData, flat_market

ModelFactory = Callable[..., ModelConfig]


@pytest.fixture
def two_period_market() -> MarketData:
    """Tenor [0, 0.5, 1], L = 2%, L_F = 3%, X(0) = 1."""
    return flat_market(0.02, 0.03, accrual=0.5, periods=2, first_reset=0.0)


@pytest.fixture
def semiannual_market() -> MarketData:
    """Tenor [0.5, 1, 1.5, 2, 2.5], L = 2%, L_F = 3%, X(0) = 1."""
    return flat_market(0.02, 0.03, accrual=0.5, periods=4)


@pytest.fixture
def make_model() -> ModelFactory:
    """Factory of constant-volatility models."""

    def factory(
        regime: Regime = Regime.CASE_I,
        dom: float = 0.2,
        foreign: float = 0.2,
        fx: float = 0.1,
        decay: float = 0.0,
        fixed_fx: float = 1.0,
    ) -> ModelConfig:
        return ModelConfig(
            regime=regime,
            dom_libor_vol=VolSurfaceSpec.constant(dom),
            for_libor_vol=VolSurfaceSpec.constant(foreign),
            terminal_fx_vol=VolSurfaceSpec.constant(fx),
            correlation=CorrelationSpec(decay=decay),
            quanto_fixed_fx=fixed_fx,
        )

    return factory


@pytest.fixture
def quad() -> QuadratureConfig:
    return QuadratureConfig(order=8)


@pytest.fixture
def small_mc() -> McConfig:
    """A Monte Carlo configuration small enough for unit tests."""
    return McConfig(
        paths=20000,
        steps_per_accrual=2,
        seed=7,
        antithetic=True,
        maturity_resolution=2,
        block_size=4096,
    )


@pytest.fixture
def usecase_files(
    tmp_path: Path, semiannual_market: MarketData, make_model: ModelFactory
) -> tuple[Path, Path]:
    """Curves and case (i) model files of the semiannual market."""
    curves_path: Path = tmp_path / "curves.json"
    model_path: Path = tmp_path / "model.json"
    write_curves(semiannual_market, curves_path)
    write_model(
        ModelFile(
            make_model(decay=0.5),
            QuadratureConfig(order=4),
            McConfig(
                paths=4000, steps_per_accrual=1, maturity_resolution=2, block_size=512
            ),
        ),
        model_path,
    )
    return curves_path, model_path
