# ABOUTME: Pytest fixtures and configuration for mvpreg tests.
# ABOUTME: Provides small regression datasets, hyperparameter sets, price series and CSV writers.

import numpy as np
import pandas as pd
import pytest


@pytest.fixture
def rng():
    """Provides a seeded numpy Generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def two_output_data():
    """Provides a smooth two-output regression problem on 15 one-dimensional inputs.

    Returns:
        tuple: (X [15 x 1], Y [15 x 2]) with correlated outputs.
    """
    x = np.linspace(-3.0, 3.0, 15)
    noise = np.random.default_rng(7).normal(scale=0.05, size=(15, 2))
    Y = np.column_stack([np.sin(x), np.sin(x) + 0.3 * np.cos(x)]) + noise
    return x[:, None], Y


@pytest.fixture
def mv_params():
    """Provides non-trivial MV-GP hyperparameters for two outputs and two inputs."""
    from mvpreg.models.kernels import KernelSpec
    from mvpreg.models.params import HyperParams, RowCovParams

    kernel = KernelSpec(
        family="seard",
        log_lengthscales=[0.2, -0.3],
        log_signal_variance=0.4,
        log_noise_variance=-1.5,
    )
    rowcov = RowCovParams(phi_lower=[0.35], varphi_diag=[0.1, -0.2])
    return HyperParams(kernel=kernel, rowcov=rowcov)


@pytest.fixture
def mv_data():
    """Provides 9 rows of two-input, two-output data matching ``mv_params``."""
    gen = np.random.default_rng(99)
    X = gen.uniform(-2.0, 2.0, size=(9, 2))
    Y = np.column_stack([np.cos(X[:, 0]) + X[:, 1], 0.5 * X[:, 0] - np.sin(X[:, 1])])
    return X, Y + gen.normal(scale=0.1, size=Y.shape)


@pytest.fixture
def make_series():
    """Provides a factory for PriceSeries with given open/close/adjusted-close arrays."""
    from mvpreg.experiments.backtest import PriceSeries

    def _make(name, open_, close, adj_close=None):
        close = np.asarray(close, dtype=float)
        adj = close if adj_close is None else adj_close
        dates = pd.date_range("2020-01-01", periods=close.size, freq="D").strftime("%Y-%m-%d").tolist()
        return PriceSeries(name=name, dates=dates, open=open_, close=close, adj_close=adj)

    return _make


@pytest.fixture
def write_prices(tmp_path):
    """Provides a writer that stores a price CSV under tmp_path and returns its path."""

    def _write(name, open_, close, adj_close=None, start="2020-01-01"):
        close = np.asarray(close, dtype=float)
        frame = pd.DataFrame(
            {
                "date": pd.date_range(start, periods=close.size, freq="D").strftime("%Y-%m-%d"),
                "open": open_,
                "close": close,
                "adj_close": close if adj_close is None else adj_close,
            }
        )
        path = tmp_path / f"{name}.csv"
        frame.to_csv(path, index=False)
        return path

    return _write
