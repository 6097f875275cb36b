# ABOUTME: Shapes experiment results into pandas tables and writes them as CSV reports.
# ABOUTME: Every report starts with a provenance line carrying version, seed and config hash.

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from mvpreg import __version__
from mvpreg.config import ExperimentConfig
from mvpreg.experiments.evaluation import BandRecord, CrossvalResult, SimulationResult
from mvpreg.models.families import DISPLAY_NAMES, PointwiseForecast

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def report_header(config: ExperimentConfig) -> str:
    return f"# mvpreg {__version__} seed={config.seed} config={config.config_hash()}"


def write_report(path: str | Path, frame: pd.DataFrame, config: ExperimentConfig) -> Path:
    """Write ``frame`` as CSV below a provenance header line.

    Returns:
        The path written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_header(config) + "\n")
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s", path)
    return path


def simulation_table(results: list[SimulationResult], output_names: list[str]) -> pd.DataFrame:
    """ARMSE per noise family and output (rows) for each model (columns)."""
    rows = []
    for result in results:
        table = result.armse_table()
        for j, output in enumerate(output_names):
            row = {"noise": result.noise_family, "output": output}
            row.update({DISPLAY_NAMES[fam]: float(table[fam][j]) for fam in result.families})
            rows.append(row)
    return pd.DataFrame(rows)


def simulation_raw(results: list[SimulationResult], output_names: list[str]) -> pd.DataFrame:
    """Per-repetition RMSEs in long form."""
    rows = []
    for result in results:
        for fam in result.families:
            for r, rmses in enumerate(result.rmse[fam]):
                for output, value in zip(output_names, rmses, strict=True):
                    rows.append(
                        {"noise": result.noise_family, "repetition": r, "model": DISPLAY_NAMES[fam],
                         "output": output, "rmse": float(value)}
                    )
    return pd.DataFrame(rows)


def bands_table(record: BandRecord, output_names: list[str]) -> pd.DataFrame:
    """Plot-ready predictive means and mean -/+ 1.96 std bands for one repetition."""
    frame = pd.DataFrame({"x": record.x, "train": record.train_mask.astype(int)})
    for j, output in enumerate(output_names):
        frame[f"truth_{output}"] = record.truth[:, j]
        frame[f"observed_{output}"] = record.observed[:, j]
        for fam in record.mean:
            name = DISPLAY_NAMES[fam]
            frame[f"{name}_mean_{output}"] = record.mean[fam][:, j]
            frame[f"{name}_lower95_{output}"] = record.lower[fam][:, j]
            frame[f"{name}_upper95_{output}"] = record.upper[fam][:, j]
    return frame


def crossval_table(result: CrossvalResult, metric: str) -> pd.DataFrame:
    """Median-across-folds error per output plus an MMO row, one column per model."""
    medians = result.medians(metric)
    mmo = result.mmo(metric)
    frame = pd.DataFrame({"output": [*result.output_names, "MMO"]})
    for fam in result.families:
        frame[DISPLAY_NAMES[fam]] = [*medians[fam], mmo[fam]]
    return frame


def crossval_folds(result: CrossvalResult) -> pd.DataFrame:
    """Per-fold, per-output MSE and MAE for every model."""
    rows = []
    for fam in result.families:
        for fold in range(result.mse[fam].shape[0]):
            for j, output in enumerate(result.output_names):
                rows.append(
                    {"model": DISPLAY_NAMES[fam], "fold": fold + 1, "output": output,
                     "mse": float(result.mse[fam][fold, j]), "mae": float(result.mae[fam][fold, j])}
                )
    return pd.DataFrame(rows)


def prediction_table(
    inputs: pd.DataFrame, forecast: PointwiseForecast, outputs: list[str]
) -> pd.DataFrame:
    """Inputs followed by mean, std (and df for Student-t models) per output."""
    frame = inputs.reset_index(drop=True).copy()
    for j, output in enumerate(outputs):
        frame[f"{output}_mean"] = forecast.mean[:, j]
        frame[f"{output}_std"] = forecast.std[:, j]
        if forecast.df is not None:
            frame[f"{output}_df"] = np.full(forecast.mean.shape[0], forecast.df[j])
    return frame
