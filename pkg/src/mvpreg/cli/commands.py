# ABOUTME: Implementations of the simulate, fit, predict, crossval and backtest subcommands.
# ABOUTME: Each command takes a validated ExperimentConfig and returns the report paths it wrote.

import logging
from pathlib import Path

import pandas as pd

from mvpreg.cli import reports
from mvpreg.config import ExperimentConfig
from mvpreg.data.csv_io import read_dataset, read_inputs, read_price_series
from mvpreg.data.manifests import ColumnManifest, adhoc_manifest, get_manifest
from mvpreg.data.model_store import StoredModel, load_model, save_model
from mvpreg.errors import ConfigError
from mvpreg.experiments.backtest import (
    WindowPlan,
    equal_weight_portfolio,
    ledger_table,
    model_predictor,
    period_report,
    rank_strategies,
    sliding_window_backtest,
)
from mvpreg.experiments.evaluation import (
    denormalize,
    normalize,
    run_crossval,
    run_simulation_repetition,
    run_simulation_study,
)
from mvpreg.models.families import DISPLAY_NAMES, PointwiseForecast, fit_family, predict_family
from mvpreg.models.kernels import KernelSpec
from mvpreg.models.optimizer import FitOptions

logger = logging.getLogger(__name__)

SIM_OUTPUTS = ["y1", "y2"]


def fit_options(config: ExperimentConfig, workers: int | None = None) -> FitOptions:
    return FitOptions(
        restarts=config.restarts,
        max_iters=config.max_iters,
        grad_tol=config.grad_tol,
        seed=config.seed,
        workers=config.workers if workers is None else workers,
    )


def _require(config: ExperimentConfig, *names: str) -> None:
    missing = [name for name in names if not getattr(config, name)]
    if missing:
        flags = ", ".join("--" + name.replace("_", "-") for name in missing)
        raise ConfigError(f"Missing required setting(s): {flags}")


def _manifest(config: ExperimentConfig) -> ColumnManifest:
    if config.manifest:
        return get_manifest(config.manifest)
    return adhoc_manifest(config.input_columns, config.output_columns, config.folds)


def cmd_simulate(config: ExperimentConfig) -> list[Path]:
    """Run the simulated two-output study for each noise family and write ARMSE tables."""
    out = Path(config.out)
    noises = ["mgp", "mtp"] if config.noise == "both" else [config.noise]
    families = config.family_list
    # Repetitions take the worker threads; restarts inside each run serially.
    opts = fit_options(config, workers=1)

    results = []
    for noise in noises:
        logger.info("Simulation study: %s noise, %d repetitions", noise, config.repetitions)
        results.append(
            run_simulation_study(
                noise, config.repetitions, config.kernel, opts, families, config.retry_budget, config.workers
            )
        )

    paths = [
        reports.write_report(out / "simulation_armse.csv", reports.simulation_table(results, SIM_OUTPUTS), config),
        reports.write_report(out / "simulation_rmse_raw.csv", reports.simulation_raw(results, SIM_OUTPUTS), config),
    ]
    if config.bands:
        for noise in noises:
            _, record = run_simulation_repetition(
                noise, 0, config.kernel, opts, families, config.retry_budget, with_bands=True
            )
            frame = reports.bands_table(record, SIM_OUTPUTS)
            paths.append(reports.write_report(out / f"simulation_bands_{noise}.csv", frame, config))
    return paths


def cmd_fit(config: ExperimentConfig) -> list[Path]:
    """Fit ``config.model`` on the training CSV and save it to ``config.model_file``."""
    _require(config, "train")
    manifest = _manifest(config)
    data = read_dataset(config.train, manifest, config.drop_incomplete)
    X, x_state = normalize(data.X, data.input_names, allow_constant=True)
    Y, y_state = normalize(data.Y, data.output_names)
    spec = KernelSpec.default(config.kernel, X.shape[1])
    logger.info("Fitting %s on %d rows, %d inputs, %d outputs", config.model, data.n, X.shape[1], Y.shape[1])
    fitted = fit_family(config.model, X, Y, spec, fit_options(config))
    stored = StoredModel(
        fitted=fitted, inputs=data.input_names, outputs=data.output_names, x_state=x_state, y_state=y_state
    )
    path = Path(config.model_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(path, stored)
    logger.info("Saved model to %s", path)
    return [path]


def predict_stored(stored: StoredModel, inputs: pd.DataFrame) -> PointwiseForecast:
    """Predict on raw-scale inputs and map the forecast back to raw output scale."""
    X = inputs[stored.inputs].to_numpy(dtype=float)
    if stored.x_state is not None:
        X = (X - stored.x_state.mu) / stored.x_state.sigma
    forecast = predict_family(stored.fitted, X)
    if stored.y_state is None:
        return forecast
    return PointwiseForecast(
        mean=denormalize(forecast.mean, stored.y_state),
        variance=forecast.variance * stored.y_state.sigma**2,
        df=forecast.df,
    )


def cmd_predict(config: ExperimentConfig) -> list[Path]:
    """Predict the test CSV with a saved model; writes means, stds and (for t models) df."""
    _require(config, "test")
    stored = load_model(config.model_file)
    inputs = read_inputs(config.test, stored.inputs, config.drop_incomplete)
    forecast = predict_stored(stored, inputs)
    frame = reports.prediction_table(inputs, forecast, stored.outputs)
    return [reports.write_report(Path(config.out) / "predictions.csv", frame, config)]


def cmd_crossval(config: ExperimentConfig) -> list[Path]:
    """Contiguous-block k-fold comparison of the model families on one dataset."""
    _require(config, "data")
    manifest = _manifest(config)
    folds = config.folds if "folds" in config.model_fields_set else manifest.folds
    data = read_dataset(config.data, manifest, config.drop_incomplete)
    logger.info("Cross-validating %s with %d folds over %d rows", ",".join(config.family_list), folds, data.n)
    result = run_crossval(data, folds, config.kernel, fit_options(config), config.family_list)

    out = Path(config.out)
    return [
        reports.write_report(out / "crossval_mse.csv", reports.crossval_table(result, "mse"), config),
        reports.write_report(out / "crossval_mae.csv", reports.crossval_table(result, "mae"), config),
        reports.write_report(out / "crossval_folds.csv", reports.crossval_folds(result), config),
    ]


def cmd_backtest(config: ExperimentConfig) -> list[Path]:
    """Sliding-window trading backtest of each model family on the given stocks."""
    _require(config, "stocks", "indices")
    stocks = [read_price_series(p) for p in config.stock_paths]
    indices = [read_price_series(p) for p in config.index_paths]
    plan = WindowPlan(train_len=config.train_len, horizon=config.horizon, n_windows=config.windows)
    opts = fit_options(config)

    results = []
    for family in config.family_list:
        logger.info("Backtesting %s over %d windows", family, plan.n_windows)
        predictor = model_predictor(family, config.kernel, opts, config.standardize)
        result = sliding_window_backtest(
            stocks, indices, plan, DISPLAY_NAMES[family], predictor, config.fee, config.initial
        )
        results.append(result)

    out = Path(config.out)
    index_names = [s.name for s in indices]
    paths = []
    rankings = []
    for s in stocks:
        paths.append(reports.write_report(out / f"ledger_{s.name}.csv", ledger_table(s.name, results, index_names), config))
        paths.append(
            reports.write_report(
                out / f"periods_{s.name}.csv", period_report(s.name, results, index_names, config.initial), config
            )
        )
        finals = {r.family: r.ledgers[s.name].final_value for r in results}
        finals["Buy&Hold"] = float(results[0].buy_and_hold[s.name][-1])
        rankings.append(rank_strategies(finals).assign(stock=s.name))

    portfolio = pd.DataFrame({"day": results[0].dates})
    for r in results:
        portfolio[r.family] = r.portfolio()
    portfolio["Buy&Hold"] = equal_weight_portfolio([results[0].buy_and_hold[s.name] for s in stocks])
    for name in index_names:
        portfolio[f"Buy&Hold {name}"] = results[0].buy_and_hold[name]
    paths.append(reports.write_report(out / "portfolio.csv", portfolio, config))

    finals = {col: float(portfolio[col].iloc[-1]) for col in portfolio.columns if col != "day"}
    rankings.append(rank_strategies(finals).assign(stock="portfolio"))
    ranking = pd.concat(rankings, ignore_index=True)[["stock", "strategy", "final_value", "rank"]]
    paths.append(reports.write_report(out / "ranking.csv", ranking, config))
    return paths


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "crossval": cmd_crossval,
    "backtest": cmd_backtest,
}


def run_command(name: str, config: ExperimentConfig) -> list[Path]:
    """Dispatch to a subcommand. Randomness flows only from the seeds in ``config``."""
    return COMMANDS[name](config)
