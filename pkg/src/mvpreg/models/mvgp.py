# ABOUTME: Multivariate Gaussian process regression with a matrix-variate Gaussian likelihood.
# ABOUTME: NLML with analytic gradients, multi-restart fitting and closed-form prediction.

import logging
from collections.abc import Callable
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator

from mvpreg.errors import DataError
from mvpreg.models.kernels import KernelSpec, gram, gram_grads, gram_noisy
from mvpreg.models.linalg import chol_inverse, chol_solve, jitchol, logdet, quad_trace, whiten
from mvpreg.models.matvar_dist import LN_2PI, as_frozen_array
from mvpreg.models.optimizer import FitOptions, RestartOutcome, minimize, multi_restart
from mvpreg.models.params import HyperParams, RowCovParams

logger = logging.getLogger(__name__)

ValueAndGrad = Callable[[HyperParams, np.ndarray, np.ndarray], tuple[float, np.ndarray]]


class TrainedModel(BaseModel):
    """A fitted MV-GPR or MV-TPR model, ready for prediction.

    The Cholesky factor of K'(X, X) is computed once at construction.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: np.ndarray
    Y: np.ndarray
    params: HyperParams
    family: Literal["gp", "tp"]
    nlml_at_fit: float
    converged: bool = True

    _chol: np.ndarray = PrivateAttr()

    @field_validator("X", "Y", mode="before")
    @classmethod
    def _to_matrix(cls, v):
        return as_frozen_array(v, 2)

    @model_validator(mode="after")
    def _check(self) -> "TrainedModel":
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")
        if self.Y.shape[1] != self.params.rowcov.d:
            raise ValueError(f"Y has {self.Y.shape[1]} columns but Omega is {self.params.rowcov.d}x{self.params.rowcov.d}")
        if (self.family == "tp") != (self.params.lognu_minus2 is not None):
            raise ValueError("lognu_minus2 must be set exactly when family is 'tp'")
        return self

    def model_post_init(self, __context) -> None:
        self._chol = jitchol(gram_noisy(self.params.kernel, self.X))

    @property
    def kernel(self) -> KernelSpec:
        return self.params.kernel

    @property
    def rowcov(self) -> RowCovParams:
        return self.params.rowcov

    @property
    def lognu_minus2(self) -> float | None:
        return self.params.lognu_minus2

    @property
    def cached_chol(self) -> np.ndarray:
        return self._chol


class Prediction(BaseModel):
    """Predictive law of f* at m test inputs: MN(mean, col_cov, row_cov), or MT with ``df``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray
    col_cov: np.ndarray
    row_cov: np.ndarray
    df: float | None = None

    def pointwise_variance(self) -> np.ndarray:
        """Variance of each predicted entry, ``col_cov[i, i] * row_cov[j, j]`` (scaled by 1/(df - 2) for t)."""
        scale = 1.0 if self.df is None else 1.0 / (self.df - 2.0)
        var = scale * np.outer(np.diag(self.col_cov), np.diag(self.row_cov))
        return np.maximum(var, 0.0)

    def pointwise_std(self) -> np.ndarray:
        return np.sqrt(self.pointwise_variance())

    def interval(self, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise band ``mean -/+ z * std``."""
        half = z * self.pointwise_std()
        return self.mean - half, self.mean + half


def check_training_data(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coerce training data to float matrices and validate it.

    Raises:
        DataError: On shape mismatch, fewer than two rows, or non-finite values.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if X.shape[0] < 2:
        raise DataError("At least two training rows are required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise DataError("Training data contains non-finite values")
    return X, Y


def mvgp_nlml(params: HyperParams, X: np.ndarray, Y: np.ndarray) -> float:
    """Negative log marginal likelihood of Y ~ MN(0, K', Omega).

    Raises:
        FactorizationError: If K' cannot be factorized.
    """
    n, d = Y.shape
    L_K = jitchol(gram_noisy(params.kernel, X))
    Phi = params.rowcov.phi()
    return 0.5 * n * d * LN_2PI + 0.5 * d * logdet(L_K) + 0.5 * n * logdet(Phi) + 0.5 * quad_trace(L_K, Phi, Y)


def mvgp_nlml_and_grad(params: HyperParams, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """NLML and its gradient in the vector order of ``params``."""
    n, d = Y.shape
    L_K = jitchol(gram_noisy(params.kernel, X))
    Phi = params.rowcov.phi()

    alpha_K = chol_solve(L_K, Y)  # K'^{-1} Y
    omega_inv = chol_inverse(Phi)
    alpha_O = omega_inv @ Y.T  # Omega^{-1} Y^T
    B = alpha_K @ omega_inv  # K'^{-1} Y Omega^{-1}

    value = 0.5 * n * d * LN_2PI + 0.5 * d * logdet(L_K) + 0.5 * n * logdet(Phi) + 0.5 * float(np.sum(alpha_K * alpha_O.T))

    W = d * chol_inverse(L_K) - B @ alpha_K.T
    g_kernel = [0.5 * float(np.sum(W * dK)) for dK in gram_grads(params.kernel, X)]
    G = 0.5 * (n * omega_inv - alpha_O @ B)
    G = 0.5 * (G + G.T)
    return value, np.concatenate([g_kernel, params.rowcov.grad_from_omega(G)])


def mvgp_nlml_grad(params: HyperParams, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gradient of ``mvgp_nlml`` with respect to every coordinate of ``params``."""
    return mvgp_nlml_and_grad(params, X, Y)[1]


class _CachedObjective:
    """Evaluates value and gradient together and reuses them for the same point."""

    def __init__(self, fn: Callable[[np.ndarray], tuple[float, np.ndarray]]):
        self._fn = fn
        self._key: bytes | None = None
        self._result: tuple[float, np.ndarray] | None = None

    def _eval(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        key = v.tobytes()
        if key != self._key:
            self._result = self._fn(v)
            self._key = key
        return self._result

    def value(self, v: np.ndarray) -> float:
        return self._eval(v)[0]

    def grad(self, v: np.ndarray) -> np.ndarray:
        return self._eval(v)[1]


def fit_hyperparameters(
    value_and_grad: ValueAndGrad,
    template: HyperParams,
    X: np.ndarray,
    Y: np.ndarray,
    opts: FitOptions,
    family: Literal["gp", "tp"],
) -> TrainedModel:
    """Minimize an NLML over the free coordinates of ``template`` with random restarts.

    Args:
        value_and_grad: Returns the NLML and its full gradient.
        template: Layout of the parameter vector (kernel family, d, with or without nu).
        X: [n x p] training inputs.
        Y: [n x d] training outputs.
        opts: Restart and convergence settings.
        family: Tag stored on the returned model.

    Returns:
        TrainedModel at the selected restart.

    Raises:
        FitError: If every restart fails.
    """
    mask = template.free_mask()

    def fit_one(seed: int) -> RestartOutcome:
        start = template.random_initial(np.random.default_rng(seed))
        base = start.to_vector()

        def expand(z: np.ndarray) -> np.ndarray:
            v = base.copy()
            v[mask] = z
            return v

        evaluator = _CachedObjective(lambda v: value_and_grad(start.with_vector(v), X, Y))
        result = minimize(
            lambda z: evaluator.value(expand(z)),
            lambda z: evaluator.grad(expand(z))[mask],
            base[mask],
            opts,
        )
        return RestartOutcome(
            seed=seed, params=start.with_vector(expand(result.x)), nlml=result.fun, converged=result.converged
        )

    logger.info("Fitting %s model: n=%d d=%d restarts=%d", family, Y.shape[0], Y.shape[1], opts.restarts)
    best = multi_restart(fit_one, opts)
    if best.params.nu is None:
        logger.info("Selected restart seed=%d nlml=%.6f", best.seed, best.nlml)
    else:
        logger.info("Selected restart seed=%d nlml=%.6f nu=%.4g", best.seed, best.nlml, best.params.nu)
    return TrainedModel(X=X, Y=Y, params=best.params, family=family, nlml_at_fit=best.nlml, converged=best.converged)


def mvgp_fit(X: np.ndarray, Y: np.ndarray, spec: KernelSpec, opts: FitOptions) -> TrainedModel:
    """Fit MV-GPR hyperparameters by minimizing the NLML.

    Args:
        X: [n x p] training inputs.
        Y: [n x d] training outputs, assumed zero-mean.
        spec: Kernel family and layout; its parameter values are not used as a start.
        opts: Restart and convergence settings.

    Returns:
        TrainedModel with family ``gp``.

    Raises:
        DataError: If the data is malformed.
        FitError: If every restart fails.
    """
    X, Y = check_training_data(X, Y)
    template = HyperParams.template(spec, Y.shape[1], student_t=False)
    return fit_hyperparameters(mvgp_nlml_and_grad, template, X, Y, opts, family="gp")


def predictive_moments(model: TrainedModel, Xstar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shared mean K*^T K'^{-1} Y and column covariance K'(X*, X*) - K*^T K'^{-1} K*.

    Raises:
        ValueError: If ``Xstar`` has the wrong number of columns.
    """
    Xstar = np.asarray(Xstar, dtype=float)
    if Xstar.ndim == 1:
        Xstar = Xstar[:, None]
    if Xstar.shape[1] != model.X.shape[1]:
        raise ValueError(f"Test inputs have {Xstar.shape[1]} columns, model expects {model.X.shape[1]}")
    L = model.cached_chol
    K_star = gram(model.kernel, model.X, Xstar)
    mean = K_star.T @ chol_solve(L, model.Y)
    V = whiten(L, K_star)
    col_cov = gram_noisy(model.kernel, Xstar) - V.T @ V
    return mean, 0.5 * (col_cov + col_cov.T)


def mvgp_predict(model: TrainedModel, Xstar: np.ndarray) -> Prediction:
    """Predictive matrix-variate Gaussian at ``Xstar``; the row covariance is Omega.

    Raises:
        ValueError: If the model is not a Gaussian process or dimensions mismatch.
    """
    if model.family != "gp":
        raise ValueError(f"mvgp_predict needs a 'gp' model, got '{model.family}'")
    mean, col_cov = predictive_moments(model, Xstar)
    return Prediction(mean=mean, col_cov=col_cov, row_cov=model.rowcov.omega())
