# ABOUTME: Hyperparameter containers shared by the Gaussian and Student-t process models.
# ABOUTME: Row-covariance Cholesky parameterisation and flat vector packing for the optimizer.

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from mvpreg.models.kernels import KernelSpec


class RowCovParams(BaseModel):
    """Row covariance Omega = Phi Phi^T with Phi lower triangular.

    Attributes:
        phi_lower: Strictly-lower entries of Phi in row-major order, d(d-1)/2 values.
        varphi_diag: Log of the diagonal of Phi, d values.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    phi_lower: np.ndarray
    varphi_diag: np.ndarray

    @field_validator("phi_lower", "varphi_diag", mode="before")
    @classmethod
    def _to_vector(cls, v):
        arr = np.atleast_1d(np.array(v, dtype=float)).ravel()
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_sizes(self) -> "RowCovParams":
        d = self.varphi_diag.size
        if d < 1:
            raise ValueError("Row covariance needs at least one output")
        if self.phi_lower.size != d * (d - 1) // 2:
            raise ValueError(f"phi_lower needs {d * (d - 1) // 2} entries for d={d}, got {self.phi_lower.size}")
        return self

    @classmethod
    def identity(cls, d: int) -> "RowCovParams":
        return cls(phi_lower=np.zeros(d * (d - 1) // 2), varphi_diag=np.zeros(d))

    @classmethod
    def from_omega(cls, Omega: np.ndarray) -> "RowCovParams":
        """Parameters whose Phi is the Cholesky factor of ``Omega``."""
        Phi = np.linalg.cholesky(np.asarray(Omega, dtype=float))
        d = Phi.shape[0]
        return cls(phi_lower=Phi[np.tril_indices(d, -1)], varphi_diag=np.log(np.diag(Phi)))

    @property
    def d(self) -> int:
        return self.varphi_diag.size

    @property
    def n_params(self) -> int:
        return self.phi_lower.size + self.varphi_diag.size

    def phi(self) -> np.ndarray:
        """Lower-triangular Phi; also the exact Cholesky factor of Omega."""
        d = self.d
        Phi = np.diag(np.exp(self.varphi_diag))
        Phi[np.tril_indices(d, -1)] = self.phi_lower
        return Phi

    def omega(self) -> np.ndarray:
        Phi = self.phi()
        return Phi @ Phi.T

    def grad_from_omega(self, G: np.ndarray) -> np.ndarray:
        """Chain a symmetric dL/dOmega through Omega = Phi Phi^T.

        Args:
            G: Symmetric [d x d] gradient of the objective with respect to Omega.

        Returns:
            Gradient for ``phi_lower`` followed by ``varphi_diag``.
        """
        Phi = self.phi()
        GP = 2.0 * G @ Phi
        d = self.d
        return np.concatenate([GP[np.tril_indices(d, -1)], np.diag(GP) * np.diag(Phi)])


class HyperParams(BaseModel):
    """Complete hyperparameter set of a fitted or candidate model.

    Vector order: kernel log parameters, ``phi_lower``, ``varphi_diag`` and,
    for Student-t models, ``lognu_minus2`` with nu = 2 + exp(lognu_minus2).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kernel: KernelSpec
    rowcov: RowCovParams
    lognu_minus2: float | None = None

    @property
    def nu(self) -> float | None:
        if self.lognu_minus2 is None:
            return None
        return 2.0 + float(np.exp(self.lognu_minus2))

    @property
    def size(self) -> int:
        return self.kernel.n_params + self.rowcov.n_params + (self.lognu_minus2 is not None)

    @property
    def varphi_index(self) -> int:
        """Vector index of varphi_11, the coordinate held at zero during fitting."""
        return self.kernel.n_params + self.rowcov.phi_lower.size

    def to_vector(self) -> np.ndarray:
        parts = [self.kernel.to_vector(), self.rowcov.phi_lower, self.rowcov.varphi_diag]
        if self.lognu_minus2 is not None:
            parts.append([self.lognu_minus2])
        return np.concatenate(parts)

    def with_vector(self, v: np.ndarray) -> "HyperParams":
        """Copy with the same layout and values read from ``v``."""
        v = np.asarray(v, dtype=float)
        if v.size != self.size:
            raise ValueError(f"Expected {self.size} parameters, got {v.size}")
        k = self.kernel.n_params
        m = self.rowcov.phi_lower.size
        d = self.rowcov.d
        return HyperParams(
            kernel=self.kernel.with_vector(v[:k]),
            rowcov=RowCovParams(phi_lower=v[k : k + m], varphi_diag=v[k + m : k + m + d]),
            lognu_minus2=float(v[-1]) if self.lognu_minus2 is not None else None,
        )

    def free_mask(self) -> np.ndarray:
        """Coordinates the optimizer may move; varphi_11 is pinned to fix the scale."""
        mask = np.ones(self.size, dtype=bool)
        mask[self.varphi_index] = False
        return mask

    @classmethod
    def template(cls, kernel: KernelSpec, d: int, student_t: bool) -> "HyperParams":
        return cls(kernel=kernel, rowcov=RowCovParams.identity(d), lognu_minus2=0.0 if student_t else None)

    def random_initial(self, rng: np.random.Generator) -> "HyperParams":
        """Draw every free coordinate from uniform(0, 1); varphi_11 stays at zero."""
        v = rng.uniform(0.0, 1.0, size=self.size)
        v[~self.free_mask()] = 0.0
        return self.with_vector(v)
