# ABOUTME: Normalization, temporal k-fold splits, error metrics and the simulated-data study.
# ABOUTME: Drives repeated fits of all model families and summarizes ARMSE, MSE, MAE and MMO.

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from mvpreg.errors import DataError, FactorizationError, FitError
from mvpreg.models.families import MODEL_FAMILIES, ModelFamily, fit_family, predict_family
from mvpreg.models.kernels import KernelSpec, gram
from mvpreg.models.matvar_dist import MatrixNormalParams, MatrixTParams, mn_sample, mt_sample
from mvpreg.models.optimizer import FitOptions

logger = logging.getLogger(__name__)

NoiseFamily = Literal["mgp", "mtp"]

SIM_POINTS = 100
SIM_RANGE = (-10.0, 10.0)
SIM_LOG_LENGTHSCALE = float(np.log(np.log(1.001)))
SIM_LOG_SIGNAL_VARIANCE = float(np.log(np.log(5.0)))
SIM_OMEGA = np.array([[1.0, 0.25], [0.25, 1.0]])
SIM_NU = 3.0


class Dataset(BaseModel):
    """Inputs and outputs with column names."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: np.ndarray
    Y: np.ndarray
    input_names: list[str]
    output_names: list[str]

    @model_validator(mode="after")
    def _check(self) -> "Dataset":
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise ValueError("X and Y must be 2-d")
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")
        if len(self.input_names) != self.X.shape[1]:
            raise ValueError("input_names length does not match X columns")
        if len(self.output_names) != self.Y.shape[1]:
            raise ValueError("output_names length does not match Y columns")
        return self

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def rows(self, idx: np.ndarray) -> "Dataset":
        return Dataset(X=self.X[idx], Y=self.Y[idx], input_names=self.input_names, output_names=self.output_names)


class NormalizationState(BaseModel):
    """Per-column sample mean and standard deviation."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: np.ndarray
    sigma: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "NormalizationState":
        if self.mu.shape != self.sigma.shape:
            raise ValueError("mu and sigma must have the same length")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be positive in every column")
        return self


def normalize(
    Y: np.ndarray, names: list[str] | None = None, allow_constant: bool = False
) -> tuple[np.ndarray, NormalizationState]:
    """Standardize each column to zero mean and unit sample standard deviation.

    Args:
        Y: [n x d] matrix.
        names: Optional column names used in error messages.
        allow_constant: Center constant columns and leave their scale at 1 instead of failing.

    Returns:
        The standardized matrix and the state needed to undo it.

    Raises:
        DataError: If a column is constant.
    """
    Y = np.asarray(Y, dtype=float)
    mu = Y.mean(axis=0)
    sigma = Y.std(axis=0, ddof=1) if Y.shape[0] > 1 else np.zeros(Y.shape[1])
    if allow_constant:
        sigma = np.where(sigma > 0, sigma, 1.0)
    for j in np.flatnonzero(~(sigma > 0)):
        label = names[j] if names else f"column {j}"
        raise DataError(f"Cannot normalize constant column '{label}'")
    return (Y - mu) / sigma, NormalizationState(mu=mu, sigma=sigma)


def denormalize(Y: np.ndarray, state: NormalizationState) -> np.ndarray:
    return np.asarray(Y, dtype=float) * state.sigma + state.mu


def kfold_blocks(n: int, k: int) -> list[range]:
    """Split ``0..n-1`` into k equal contiguous blocks in temporal order.

    Raises:
        DataError: If k does not divide n.
    """
    if k < 2 or n % k != 0:
        raise DataError(f"{k} folds do not divide {n} rows into equal blocks")
    size = n // k
    return [range(i * size, (i + 1) * size) for i in range(k)]


def metrics(pred: np.ndarray, truth: np.ndarray) -> dict[str, np.ndarray]:
    """Per-column MSE, MAE and RMSE.

    Raises:
        ValueError: If the inputs are empty or differ in shape.
    """
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if pred.shape != truth.shape:
        raise ValueError(f"Shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("Cannot compute metrics of empty arrays")
    err = pred - truth
    mse = np.mean(err**2, axis=0)
    return {"mse": mse, "mae": np.mean(np.abs(err), axis=0), "rmse": np.sqrt(mse)}


def armse(rmses: np.ndarray) -> float:
    """Average of per-repetition RMSEs (RMSE first, then the mean)."""
    return float(np.mean(np.asarray(rmses, dtype=float)))


def lower_median(values: np.ndarray) -> float:
    """Median that picks the lower middle element for even counts."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError("Cannot take the median of an empty sequence")
    return float(ordered[(ordered.size - 1) // 2])


def mmo(per_output_medians: np.ndarray) -> float:
    """Maximum of the per-output medians."""
    medians = np.asarray(per_output_medians, dtype=float)
    if medians.size == 0:
        raise ValueError("mmo needs at least one output")
    return float(np.max(medians))


# Simulation study


def true_outputs(x: np.ndarray) -> np.ndarray:
    """Noise-free outputs f1 = 2x cos(x), f2 = 1.5x cos(x + pi/5) as an [n x 2] matrix."""
    x = np.asarray(x, dtype=float).ravel()
    return np.column_stack([2 * x * np.cos(x), 1.5 * x * np.cos(x + np.pi / 5)])


def simulation_train_indices() -> np.ndarray:
    """Zero-based training rows: {3r+1 : r=1..12} and {3r+2 : r=22..32} in one-based terms."""
    one_based = [3 * r + 1 for r in range(1, 13)] + [3 * r + 2 for r in range(22, 33)]
    return np.array(one_based) - 1


def simulate_dataset(noise_family: NoiseFamily, seed: int) -> tuple[Dataset, np.ndarray]:
    """Generate the two-output simulated dataset with correlated noise.

    Args:
        noise_family: ``mgp`` for matrix-variate Gaussian noise, ``mtp`` for
            matrix-variate t noise with nu = 3.
        seed: Seed for the noise draw.

    Returns:
        The 100-point dataset and the 23 training row indices.
    """
    x = np.linspace(*SIM_RANGE, SIM_POINTS)
    spec = KernelSpec(
        family="se",
        log_lengthscales=[SIM_LOG_LENGTHSCALE],
        log_signal_variance=SIM_LOG_SIGNAL_VARIANCE,
    )
    K = gram(spec, x[:, None], x[:, None])
    base = MatrixNormalParams(M=np.zeros((SIM_POINTS, 2)), Sigma=0.5 * (K + K.T), Omega=SIM_OMEGA)
    if noise_family == "mgp":
        noise = mn_sample(base, seed)
    elif noise_family == "mtp":
        noise = mt_sample(MatrixTParams(base=base, nu=SIM_NU), seed)
    else:
        raise ValueError(f"Unknown noise family '{noise_family}'")
    data = Dataset(X=x[:, None], Y=true_outputs(x) + noise, input_names=["x"], output_names=["y1", "y2"])
    return data, simulation_train_indices()


class SimulationResult(BaseModel):
    """Per-repetition RMSEs of every family and output, plus the ARMSE table."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    noise_family: NoiseFamily
    families: list[ModelFamily]
    rmse: dict[str, np.ndarray]

    def armse_table(self) -> dict[str, np.ndarray]:
        """ARMSE per output for each family."""
        return {fam: np.mean(self.rmse[fam], axis=0) for fam in self.families}


class BandRecord(BaseModel):
    """Plot-ready predictive bands from one repetition."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray
    truth: np.ndarray
    observed: np.ndarray
    train_mask: np.ndarray
    mean: dict[str, np.ndarray]
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]


def _fit_with_retries(
    family: ModelFamily, X: np.ndarray, Y: np.ndarray, spec: KernelSpec, opts: FitOptions, retry_budget: int
):
    last_error: Exception | None = None
    for attempt in range(retry_budget + 1):
        attempt_opts = opts.model_copy(update={"seed": opts.seed + attempt * opts.restarts})
        try:
            return fit_family(family, X, Y, spec, attempt_opts)
        except (FitError, FactorizationError) as e:
            last_error = e
            logger.warning("Fit of %s failed (attempt %d of %d): %s", family, attempt + 1, retry_budget + 1, e)
    raise FitError(f"{family} fit failed after {retry_budget + 1} attempts", diagnostics=[str(last_error)])


def run_simulation_repetition(
    noise_family: NoiseFamily,
    repetition: int,
    kernel_family: str,
    opts: FitOptions,
    families: list[ModelFamily] | None = None,
    retry_budget: int = 0,
    with_bands: bool = False,
) -> tuple[dict[str, np.ndarray], BandRecord | None]:
    """Fit every family on one simulated dataset and score it against the noise-free outputs.

    Data seed is ``opts.seed + repetition``; fits use a disjoint seed range per repetition.

    Returns:
        RMSE per output for each family, and the bands when requested.
    """
    families = list(families or MODEL_FAMILIES)
    data, train_idx = simulate_dataset(noise_family, opts.seed + repetition)
    truth = true_outputs(data.X[:, 0])
    spec = KernelSpec.default(kernel_family, data.X.shape[1])
    fit_opts = opts.model_copy(update={"seed": opts.seed + 10_000 * (repetition + 1)})

    rmse: dict[str, np.ndarray] = {}
    bands = {"mean": {}, "lower": {}, "upper": {}}
    for family in families:
        fitted = _fit_with_retries(family, data.X[train_idx], data.Y[train_idx], spec, fit_opts, retry_budget)
        forecast = predict_family(fitted, data.X)
        rmse[family] = metrics(forecast.mean, truth)["rmse"]
        if with_bands:
            lower, upper = forecast.interval()
            bands["mean"][family], bands["lower"][family], bands["upper"][family] = forecast.mean, lower, upper

    record = None
    if with_bands:
        mask = np.zeros(data.n, dtype=bool)
        mask[train_idx] = True
        record = BandRecord(x=data.X[:, 0], truth=truth, observed=data.Y, train_mask=mask, **bands)
    return rmse, record


def run_simulation_study(
    noise_family: NoiseFamily,
    repetitions: int,
    kernel_family: str,
    opts: FitOptions,
    families: list[ModelFamily] | None = None,
    retry_budget: int = 0,
    workers: int = 1,
) -> SimulationResult:
    """Repeat the simulated experiment and collect per-repetition RMSEs.

    Repetitions run on ``workers`` threads and are reduced in repetition order.
    """
    families = list(families or MODEL_FAMILIES)

    def one(r: int) -> dict[str, np.ndarray]:
        result, _ = run_simulation_repetition(noise_family, r, kernel_family, opts, families, retry_budget)
        if (r + 1) % 10 == 0:
            logger.info("%s noise: %d/%d repetitions done", noise_family, r + 1, repetitions)
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(one, range(repetitions)))
    else:
        per_rep = [one(r) for r in range(repetitions)]
    rmse = {fam: np.vstack([rep[fam] for rep in per_rep]) for fam in families}
    return SimulationResult(noise_family=noise_family, families=families, rmse=rmse)


# Cross-validation


class CrossvalResult(BaseModel):
    """Fold errors for each family, as arrays of shape [folds x outputs]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    families: list[ModelFamily]
    output_names: list[str]
    mse: dict[str, np.ndarray]
    mae: dict[str, np.ndarray]

    def medians(self, metric: Literal["mse", "mae"] = "mse") -> dict[str, np.ndarray]:
        """Lower median across folds, per output and family."""
        table = getattr(self, metric)
        return {
            fam: np.array([lower_median(table[fam][:, j]) for j in range(len(self.output_names))])
            for fam in self.families
        }

    def mmo(self, metric: Literal["mse", "mae"] = "mse") -> dict[str, float]:
        return {fam: mmo(med) for fam, med in self.medians(metric).items()}


def run_crossval(
    data: Dataset,
    folds: int,
    kernel_family: str,
    opts: FitOptions,
    families: list[ModelFamily] | None = None,
) -> CrossvalResult:
    """Contiguous-block k-fold evaluation on the normalized dataset.

    Inputs and outputs are normalized with statistics of the whole dataset
    before splitting; errors are reported on the normalized scale.

    Raises:
        DataError: If ``folds`` does not divide the row count or a column is constant.
    """
    families = list(families or MODEL_FAMILIES)
    blocks = kfold_blocks(data.n, folds)
    X, _ = normalize(data.X, data.input_names, allow_constant=True)
    Y, _ = normalize(data.Y, data.output_names)
    spec = KernelSpec.default(kernel_family, X.shape[1])

    mse = {fam: np.zeros((folds, Y.shape[1])) for fam in families}
    mae = {fam: np.zeros((folds, Y.shape[1])) for fam in families}
    for i, block in enumerate(blocks):
        test = np.zeros(data.n, dtype=bool)
        test[block.start : block.stop] = True
        fold_opts = opts.model_copy(update={"seed": opts.seed + 1000 * i})
        for family in families:
            fitted = fit_family(family, X[~test], Y[~test], spec, fold_opts)
            scores = metrics(predict_family(fitted, X[test]).mean, Y[test])
            mse[family][i], mae[family][i] = scores["mse"], scores["mae"]
        logger.info("Fold %d/%d done", i + 1, folds)
    return CrossvalResult(families=families, output_names=data.output_names, mse=mse, mae=mae)
