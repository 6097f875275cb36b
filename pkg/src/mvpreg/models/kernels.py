# ABOUTME: Squared-exponential covariance functions with shared or per-input length scales.
# ABOUTME: Gram matrices with noise incorporation and derivatives in log-parameter space.

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.spatial.distance import cdist

KernelFamily = Literal["se", "seard"]


class KernelSpec(BaseModel):
    """Kernel family plus its hyperparameters, all stored in log space.

    Parameter order in vector form: log length scales, log signal variance,
    log noise variance.

    Attributes:
        family: ``se`` (one shared length scale) or ``seard`` (one per input).
        log_lengthscales: Log of the length scale(s) ell.
        log_signal_variance: Log of the output amplitude s_f^2.
        log_noise_variance: Log of the noise variance sigma_n^2 added on the diagonal.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    family: KernelFamily
    log_lengthscales: np.ndarray
    log_signal_variance: float = 0.0
    log_noise_variance: float = 0.0

    @field_validator("log_lengthscales", mode="before")
    @classmethod
    def _to_vector(cls, v):
        arr = np.atleast_1d(np.array(v, dtype=float))
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("log_lengthscales must be a non-empty vector")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_family(self) -> "KernelSpec":
        if self.family == "se" and self.log_lengthscales.size != 1:
            raise ValueError("SE kernel takes exactly one length scale")
        return self

    @classmethod
    def default(cls, family: KernelFamily, input_dim: int) -> "KernelSpec":
        """Unit length scales, unit signal and noise variance for ``input_dim`` inputs."""
        size = 1 if family == "se" else input_dim
        return cls(family=family, log_lengthscales=np.zeros(size))

    @property
    def n_params(self) -> int:
        return self.log_lengthscales.size + 2

    @property
    def signal_variance(self) -> float:
        return float(np.exp(self.log_signal_variance))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.log_noise_variance))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.log_lengthscales, [self.log_signal_variance, self.log_noise_variance]])

    def with_vector(self, v: np.ndarray) -> "KernelSpec":
        """Copy of this spec with parameters read from a log-space vector."""
        v = np.asarray(v, dtype=float)
        if v.size != self.n_params:
            raise ValueError(f"Expected {self.n_params} kernel parameters, got {v.size}")
        return KernelSpec(
            family=self.family,
            log_lengthscales=v[:-2],
            log_signal_variance=float(v[-2]),
            log_noise_variance=float(v[-1]),
        )


def _scaled(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.family == "seard" and X.shape[1] != spec.log_lengthscales.size:
        raise ValueError(
            f"SEard kernel has {spec.log_lengthscales.size} length scales, inputs have {X.shape[1]} columns"
        )
    return X / np.exp(spec.log_lengthscales)


def kernel_eval(spec: KernelSpec, x: np.ndarray, x_prime: np.ndarray) -> float:
    """Evaluate k(x, x') without the noise term.

    Example:
        >>> spec = KernelSpec(family="se", log_lengthscales=[0.0])
        >>> round(kernel_eval(spec, np.array([0.0]), np.array([1.0])), 7)
        0.6065307
    """
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape:
        raise ValueError(f"Input dimensions differ: {x.size} vs {x_prime.size}")
    return float(gram(spec, x[None, :], x_prime[None, :])[0, 0])


def gram(spec: KernelSpec, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix with entries k(X1[i], X2[j]).

    Args:
        spec: Kernel specification.
        X1: [a x p] inputs.
        X2: [b x p] inputs.

    Returns:
        [a x b] matrix.
    """
    A, B = _scaled(spec, X1), _scaled(spec, X2)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"Input dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    return spec.signal_variance * np.exp(-0.5 * cdist(A, B, "sqeuclidean"))


def gram_noisy(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Noise-incorporated covariance K' = K + sigma_n^2 I."""
    K = gram(spec, X, X)
    K[np.diag_indices_from(K)] += spec.noise_variance
    return K


def gram_grads(spec: KernelSpec, X: np.ndarray) -> list[np.ndarray]:
    """All derivatives of K' with respect to the log parameters, in vector order."""
    A = _scaled(spec, X)
    K = gram(spec, X, X)
    if spec.family == "se":
        ls_grads = [K * cdist(A, A, "sqeuclidean")]
    else:
        ls_grads = [K * (A[:, [i]] - A[:, i]) ** 2 for i in range(A.shape[1])]
    return [*ls_grads, K, spec.noise_variance * np.eye(K.shape[0])]


def gram_grad(spec: KernelSpec, X: np.ndarray, which: int) -> np.ndarray:
    """Derivative of K' with respect to one log parameter.

    Args:
        spec: Kernel specification.
        X: [n x p] inputs.
        which: Index into the parameter vector (see ``KernelSpec``).

    Returns:
        Symmetric [n x n] matrix.

    Raises:
        IndexError: If ``which`` is outside ``range(spec.n_params)``.
    """
    if not 0 <= which < spec.n_params:
        raise IndexError(f"Kernel parameter index {which} out of range 0..{spec.n_params - 1}")
    return gram_grads(spec, X)[which]
