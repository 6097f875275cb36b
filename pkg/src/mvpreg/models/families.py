# ABOUTME: Uniform fit/predict entry points for the four model families.
# ABOUTME: mvgp/mvtp fit all outputs jointly; gp/tp fit one d=1 model per output.

import logging
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from mvpreg.models.kernels import KernelSpec
from mvpreg.models.mvgp import Prediction, TrainedModel, mvgp_fit, mvgp_predict
from mvpreg.models.mvtp import mvtp_fit, mvtp_predict
from mvpreg.models.optimizer import FitOptions

logger = logging.getLogger(__name__)

ModelFamily = Literal["mvgp", "mvtp", "gp", "tp"]
MODEL_FAMILIES: tuple[ModelFamily, ...] = ("mvgp", "mvtp", "gp", "tp")
DISPLAY_NAMES = {"mvgp": "MV-GP", "gp": "GP", "mvtp": "MV-TP", "tp": "TP"}


class FittedFamily(BaseModel):
    """One joint model (mv families) or one model per output (independent families)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    family: ModelFamily
    models: list[TrainedModel]

    @property
    def n_outputs(self) -> int:
        return sum(m.Y.shape[1] for m in self.models)


class PointwiseForecast(BaseModel):
    """Per-entry predictive summary, independent of how the outputs were modeled.

    Attributes:
        mean: [m x d] predictive means.
        variance: [m x d] pointwise predictive variances.
        df: Degrees of freedom per output for Student-t families, else None.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray
    variance: np.ndarray
    df: np.ndarray | None = None

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def interval(self, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        return self.mean - z * self.std, self.mean + z * self.std


def _single(family: str):
    if family in ("mvgp", "gp"):
        return mvgp_fit, mvgp_predict
    return mvtp_fit, mvtp_predict


def fit_independent(
    X: np.ndarray, Y: np.ndarray, spec: KernelSpec, opts: FitOptions, student_t: bool
) -> list[TrainedModel]:
    """Fit one d=1 model per output column."""
    fit, _ = _single("tp" if student_t else "gp")
    Y = np.asarray(Y, dtype=float)
    return [fit(X, Y[:, [j]], spec, opts) for j in range(Y.shape[1])]


def predict_independent(models: list[TrainedModel], Xstar: np.ndarray) -> list[Prediction]:
    """Predict every per-output model at ``Xstar``."""
    return [(mvgp_predict if m.family == "gp" else mvtp_predict)(m, Xstar) for m in models]


def fit_family(
    family: ModelFamily, X: np.ndarray, Y: np.ndarray, spec: KernelSpec, opts: FitOptions
) -> FittedFamily:
    """Fit ``family`` to the data.

    Args:
        family: One of ``mvgp``, ``mvtp``, ``gp``, ``tp``.
        X: [n x p] inputs.
        Y: [n x d] outputs.
        spec: Kernel layout.
        opts: Restart and convergence settings.

    Returns:
        FittedFamily holding one or d trained models.
    """
    if family not in MODEL_FAMILIES:
        raise ValueError(f"Unknown model family '{family}'")
    if family.startswith("mv"):
        fit, _ = _single(family)
        models = [fit(X, Y, spec, opts)]
    else:
        models = fit_independent(X, Y, spec, opts, student_t=family == "tp")
    logger.debug("Fitted %s: NLML %s", family, ", ".join(f"{m.nlml_at_fit:.4f}" for m in models))
    return FittedFamily(family=family, models=models)


def predict_family(fitted: FittedFamily, Xstar: np.ndarray) -> PointwiseForecast:
    """Pointwise means and variances from a fitted family, outputs in column order."""
    preds = predict_independent(fitted.models, Xstar)
    mean = np.hstack([p.mean for p in preds])
    variance = np.hstack([p.pointwise_variance() for p in preds])
    df = None
    if fitted.family in ("mvtp", "tp"):
        df = np.concatenate([np.full(p.mean.shape[1], p.df) for p in preds])
    return PointwiseForecast(mean=mean, variance=variance, df=df)
