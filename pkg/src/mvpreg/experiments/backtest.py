# ABOUTME: Trading backtest driven by predicted log returns.
# ABOUTME: Buy/Sell signal, cash-or-shares ledger with fees, sliding-window forecasting and baselines.

import logging
from collections.abc import Callable
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mvpreg.errors import DataError, FitError
from mvpreg.experiments.evaluation import denormalize, normalize
from mvpreg.models.families import ModelFamily, fit_family, predict_family
from mvpreg.models.kernels import KernelSpec
from mvpreg.models.optimizer import FitOptions

logger = logging.getLogger(__name__)

Action = Literal["Buy", "Sell", "Keep"]
Position = Literal["cash", "shares"]

# (X_train, Y_train, X_test, window) -> predicted Y_test
Predictor = Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray]


class PriceSeries(BaseModel):
    """Daily prices of one stock or index.

    Attributes:
        name: Ticker or label.
        dates: ISO day identifiers, strictly increasing.
        open: Opening prices OP.
        close: Closing prices CP.
        adj_close: Adjusted closing prices ACP.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    dates: list[str]
    open: np.ndarray
    close: np.ndarray
    adj_close: np.ndarray

    @field_validator("open", "close", "adj_close", mode="before")
    @classmethod
    def _to_vector(cls, v):
        arr = np.array(v, dtype=float).ravel()
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check(self) -> "PriceSeries":
        n = len(self.dates)
        for field in ("open", "close", "adj_close"):
            values = getattr(self, field)
            if values.size != n:
                raise ValueError(f"{self.name}: {field} has {values.size} values for {n} dates")
            if not np.all(values > 0):
                raise ValueError(f"{self.name}: {field} prices must be positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:], strict=False)):
            raise ValueError(f"{self.name}: dates must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.dates)

    def adjusted_open(self) -> np.ndarray:
        """AOP = OP * ACP / CP."""
        return self.open * self.adj_close / self.close

    def slice(self, start: int, stop: int) -> "PriceSeries":
        return PriceSeries(
            name=self.name,
            dates=self.dates[start:stop],
            open=self.open[start:stop],
            close=self.close[start:stop],
            adj_close=self.adj_close[start:stop],
        )


class LedgerRecord(BaseModel):
    """One trading day of a strategy ledger."""

    model_config = ConfigDict(frozen=True)

    day: str
    action: Action
    position: Position
    value_dollars: float
    fee_paid: float = 0.0


class StrategyLedger(BaseModel):
    """Day-by-day record of a Buy&Sell strategy, valued in dollars."""

    model_config = ConfigDict(frozen=True)

    name: str
    initial: float
    records: list[LedgerRecord]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value_dollars for r in self.records])

    @property
    def actions(self) -> list[str]:
        return [r.action for r in self.records]

    @property
    def final_value(self) -> float:
        return self.records[-1].value_dollars if self.records else self.initial

    @property
    def total_fees(self) -> float:
        return float(sum(r.fee_paid for r in self.records))


class WindowPlan(BaseModel):
    """Sliding-window layout: fit on ``train_len`` days, predict ``horizon``, advance."""

    model_config = ConfigDict(frozen=True)

    train_len: int = Field(default=303, ge=2)
    horizon: int = Field(default=10, ge=1)
    n_windows: int = Field(default=20, ge=1)

    @property
    def prediction_days(self) -> int:
        return self.horizon * self.n_windows

    @property
    def required_returns(self) -> int:
        return self.train_len + self.prediction_days


def _check_prices(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.asarray(a) > 0):
            raise DataError("Prices must be positive")


def log_returns(s: PriceSeries) -> np.ndarray:
    """LR_i = ln(ACP_i / ACP_{i-1}); entry i-1 belongs to day i.

    Raises:
        DataError: If the series has fewer than two days.
    """
    if len(s) < 2:
        raise DataError(f"{s.name}: log returns need at least two days")
    _check_prices(s.adj_close)
    return np.diff(np.log(s.adj_close))


def interday_log_returns(s: PriceSeries) -> np.ndarray:
    """ILR_i = ln(CP_i / OP_i)."""
    _check_prices(s.open, s.close)
    return np.log(s.close / s.open)


def bs_signal(lr_hat: np.ndarray, lr: np.ndarray, ilr: np.ndarray) -> np.ndarray:
    """Buy/Sell signal BS = LR_hat - LR + ILR, equal to ln(predicted ACP / AOP).

    Raises:
        ValueError: If the lengths differ.
    """
    lr_hat, lr, ilr = (np.asarray(a, dtype=float) for a in (lr_hat, lr, ilr))
    if not (lr_hat.shape == lr.shape == ilr.shape):
        raise ValueError(f"Signal inputs differ in shape: {lr_hat.shape}, {lr.shape}, {ilr.shape}")
    return lr_hat - lr + ilr


def run_strategy(
    lr_hat: np.ndarray,
    bs: np.ndarray,
    s: PriceSeries,
    fee_rate: float = 0.00025,
    initial: float = 100.0,
) -> StrategyLedger:
    """Replay the Buy&Sell rules over the prediction days of ``s``.

    Buy when LR_hat > 0 and BS > 0 while in cash; Sell when both are negative
    while holding; otherwise Keep. Trades execute at the adjusted open with
    ``fee_rate`` taken from the traded value. While holding, the value marks to
    the adjusted close.

    Args:
        lr_hat: Predicted log returns, one per day of ``s``.
        bs: Buy/Sell signal, one per day of ``s``.
        s: Prices aligned to the prediction days.
        fee_rate: Proportional fee per conversion.
        initial: Starting cash.

    Returns:
        StrategyLedger with one record per day.

    Raises:
        ValueError: If the inputs are misaligned or ``initial`` is not positive.
    """
    lr_hat = np.asarray(lr_hat, dtype=float).ravel()
    bs = np.asarray(bs, dtype=float).ravel()
    if not (lr_hat.size == bs.size == len(s)):
        raise ValueError(f"{s.name}: {lr_hat.size} predictions, {bs.size} signals, {len(s)} price days")
    if initial <= 0:
        raise ValueError("Initial investment must be positive")
    if not 0 <= fee_rate < 1:
        raise ValueError("Fee rate must be in [0, 1)")

    aop = s.adjusted_open()
    acp = s.adj_close
    value = float(initial)
    position: Position = "cash"
    records: list[LedgerRecord] = []
    for i in range(len(s)):
        fee = 0.0
        if position == "cash" and lr_hat[i] > 0 and bs[i] > 0:
            action: Action = "Buy"
            fee = value * fee_rate
            value = (value - fee) * acp[i] / aop[i]
            position = "shares"
        elif position == "shares" and lr_hat[i] < 0 and bs[i] < 0:
            action = "Sell"
            gross = value * aop[i] / acp[i - 1]
            fee = gross * fee_rate
            value = gross - fee
            position = "cash"
        else:
            action = "Keep"
            if position == "shares":
                value *= acp[i] / acp[i - 1]
        records.append(LedgerRecord(day=s.dates[i], action=action, position=position, value_dollars=value, fee_paid=fee))
    return StrategyLedger(name=s.name, initial=float(initial), records=records)


def buy_and_hold(s: PriceSeries, initial: float = 100.0) -> np.ndarray:
    """Value of ``initial`` dollars bought at the first adjusted open and held, marked to adjusted close."""
    return initial * s.adj_close / s.adjusted_open()[0]


def equal_weight_portfolio(trajectories: list[np.ndarray]) -> np.ndarray:
    """Value of splitting the investment equally across the given trajectories."""
    if not trajectories:
        raise ValueError("Portfolio needs at least one trajectory")
    return np.mean(np.vstack(trajectories), axis=0)


def rank_strategies(final_values: dict[str, float]) -> pd.DataFrame:
    """Rank strategies by final value, best first; ties share the lower rank number."""
    frame = pd.DataFrame({"strategy": list(final_values), "final_value": list(final_values.values())})
    frame["rank"] = frame["final_value"].rank(ascending=False, method="min").astype(int)
    return frame.sort_values(["rank", "strategy"], kind="stable").reset_index(drop=True)


class BacktestResult(BaseModel):
    """Output of a sliding-window backtest for one model family."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    family: str
    plan: WindowPlan
    dates: list[str]
    predictions: np.ndarray
    ledgers: dict[str, StrategyLedger]
    buy_and_hold: dict[str, np.ndarray]

    def portfolio(self) -> np.ndarray:
        """Equal-weight portfolio of the strategy ledgers."""
        return equal_weight_portfolio([ledger.values for ledger in self.ledgers.values()])


def _check_alignment(series: list[PriceSeries]) -> None:
    reference = series[0]
    for s in series[1:]:
        if s.dates != reference.dates:
            raise DataError(f"Series '{s.name}' does not share the date axis of '{reference.name}'")


def model_predictor(
    family: ModelFamily,
    kernel_family: str,
    opts: FitOptions,
    standardize: bool = True,
) -> Predictor:
    """Predictor that fits ``family`` on each window and returns predictive means.

    Window w fits with seeds starting at ``opts.seed + 1000 * w``.
    """

    def predict(X_train: np.ndarray, Y_train: np.ndarray, X_test: np.ndarray, window: int) -> np.ndarray:
        if standardize:
            X_train, x_state = normalize(X_train, allow_constant=True)
            X_test = (X_test - x_state.mu) / x_state.sigma
            Y_train, y_state = normalize(Y_train, allow_constant=True)
        spec = KernelSpec.default(kernel_family, X_train.shape[1])
        window_opts = opts.model_copy(update={"seed": opts.seed + 1000 * window})
        mean = predict_family(fit_family(family, X_train, Y_train, spec, window_opts), X_test).mean
        return denormalize(mean, y_state) if standardize else mean

    return predict


def sliding_window_backtest(
    stocks: list[PriceSeries],
    indices: list[PriceSeries],
    plan: WindowPlan,
    family: str,
    predictor: Predictor,
    fee: float = 0.00025,
    initial: float = 100.0,
) -> BacktestResult:
    """Forecast stock log returns window by window and trade on the forecasts.

    Inputs are the same-day index log returns; targets are the stock log
    returns, modeled jointly or per stock depending on ``predictor``. The last
    ``plan.required_returns`` days of returns are used.

    Args:
        stocks: Stocks to trade.
        indices: Index series used as inputs.
        plan: Window layout.
        family: Label stored on the result.
        predictor: Maps a window's training data and test inputs to predicted returns.
        fee: Proportional fee per trade.
        initial: Starting dollars per stock.

    Returns:
        BacktestResult with one ledger per stock and Buy&Hold trajectories for every series.

    Raises:
        DataError: If the series are misaligned or too short.
        FitError: If a window fit fails; ``window`` names the failing window.
    """
    if not stocks or not indices:
        raise DataError("Backtest needs at least one stock and one index")
    _check_alignment([*stocks, *indices])
    n_returns = len(stocks[0]) - 1
    if n_returns < plan.required_returns:
        raise DataError(
            f"Series have {n_returns} returns; the window plan needs {plan.required_returns} "
            f"({plan.train_len} training + {plan.prediction_days} prediction days)"
        )

    X = np.column_stack([log_returns(s) for s in indices])
    Y = np.column_stack([log_returns(s) for s in stocks])
    start = n_returns - plan.required_returns

    blocks = []
    for w in range(plan.n_windows):
        lo = start + w * plan.horizon
        mid = lo + plan.train_len
        hi = mid + plan.horizon
        try:
            block = predictor(X[lo:mid], Y[lo:mid], X[mid:hi], w)
        except FitError as e:
            raise FitError(f"{family} fit failed", diagnostics=e.diagnostics, window=w) from e
        blocks.append(np.asarray(block, dtype=float).reshape(plan.horizon, Y.shape[1]))
        logger.info("%s window %d/%d done", family, w + 1, plan.n_windows)
    lr_hat = np.vstack(blocks)

    # return index t belongs to price day t + 1
    first_day = start + plan.train_len + 1
    days = slice(first_day, first_day + plan.prediction_days)
    ledgers = {}
    for j, s in enumerate(stocks):
        traded = s.slice(days.start, days.stop)
        bs = bs_signal(lr_hat[:, j], Y[days.start - 1 : days.stop - 1, j], interday_log_returns(traded))
        ledgers[s.name] = run_strategy(lr_hat[:, j], bs, traded, fee, initial)

    holds = {s.name: buy_and_hold(s.slice(days.start, days.stop), initial) for s in [*stocks, *indices]}
    return BacktestResult(
        family=family,
        plan=plan,
        dates=stocks[0].dates[days],
        predictions=lr_hat,
        ledgers=ledgers,
        buy_and_hold=holds,
    )


def period_report(
    stock: str,
    results: list[BacktestResult],
    index_names: list[str],
    initial: float = 100.0,
) -> pd.DataFrame:
    """Values at the end of each prediction period for one stock.

    Rows are ``Beginning`` plus one row per window; columns are the strategy
    value per model family followed by Buy&Hold of the stock and each index.
    """
    plan = results[0].plan
    ends = [plan.horizon * (w + 1) - 1 for w in range(plan.n_windows)]
    columns: dict[str, list[float]] = {}
    for result in results:
        values = result.ledgers[stock].values
        columns[result.family] = [initial, *values[ends]]
    holds = results[0].buy_and_hold
    for name in [stock, *index_names]:
        columns[f"Buy&Hold {name}"] = [initial, *holds[name][ends]]
    frame = pd.DataFrame(columns)
    frame.insert(0, "period", ["Beginning", *[str(w + 1) for w in range(plan.n_windows)]])
    return frame


def ledger_table(stock: str, results: list[BacktestResult], index_names: list[str]) -> pd.DataFrame:
    """Per-day actions and dollar values of every family for one stock, plus Buy&Hold columns."""
    frame = pd.DataFrame({"day": results[0].dates})
    for result in results:
        ledger = result.ledgers[stock]
        frame[f"{result.family} Act"] = ledger.actions
        frame[f"{result.family} Dollar"] = ledger.values
    holds = results[0].buy_and_hold
    for name in [stock, *index_names]:
        frame[f"Buy&Hold {name}"] = holds[name]
    return frame
