# ABOUTME: Matrix-variate Gaussian and Student-t distributions.
# ABOUTME: Log-densities, samplers, row/column conditionals and multivariate gamma functions.

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import special, stats

from mvpreg.errors import DomainError
from mvpreg.models.linalg import chol_solve, jitchol, logdet, quad_trace, whiten

LN_2PI = float(np.log(2 * np.pi))
LN_PI = float(np.log(np.pi))


def as_frozen_array(value, ndim: int) -> np.ndarray:
    """Copy ``value`` into a read-only float array with exactly ``ndim`` dimensions.

    Args:
        value: Array-like input.
        ndim: Required number of dimensions.

    Returns:
        Read-only float64 array.

    Raises:
        ValueError: If the dimensionality does not match.
    """
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"Expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class MatrixNormalParams(BaseModel):
    """Parameters of MN(M, Sigma, Omega) over n x d matrices.

    Attributes:
        M: [n x d] mean matrix.
        Sigma: [n x n] column covariance (across rows of X).
        Omega: [d x d] row covariance (across columns of X).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    M: np.ndarray
    Sigma: np.ndarray
    Omega: np.ndarray

    @field_validator("M", "Sigma", "Omega", mode="before")
    @classmethod
    def _to_matrix(cls, v):
        return as_frozen_array(v, 2)

    @model_validator(mode="after")
    def _check_shapes(self) -> "MatrixNormalParams":
        n, d = self.M.shape
        if self.Sigma.shape != (n, n):
            raise ValueError(f"Sigma must be {n}x{n} to match M, got {self.Sigma.shape}")
        if self.Omega.shape != (d, d):
            raise ValueError(f"Omega must be {d}x{d} to match M, got {self.Omega.shape}")
        for name, S in (("Sigma", self.Sigma), ("Omega", self.Omega)):
            if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        return self

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def d(self) -> int:
        return self.M.shape[1]

    def transposed(self) -> "MatrixNormalParams":
        """Parameters of X^T: MN(M^T, Omega, Sigma)."""
        return MatrixNormalParams(M=self.M.T, Sigma=self.Omega, Omega=self.Sigma)


class MatrixTParams(BaseModel):
    """Parameters of MT(nu, M, Sigma, Omega), with cov(vec(X^T)) = Sigma (x) Omega / (nu - 2)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    base: MatrixNormalParams
    nu: float = Field(gt=2)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def d(self) -> int:
        return self.base.d

    def transposed(self) -> "MatrixTParams":
        """Parameters of X^T: MT(nu, M^T, Omega, Sigma)."""
        return MatrixTParams(base=self.base.transposed(), nu=self.nu)


class RowPartition(BaseModel):
    """Split of n rows into n1 leading and n2 trailing rows."""

    model_config = ConfigDict(frozen=True)

    n1: int = Field(ge=1)
    n2: int = Field(ge=1)

    @property
    def n(self) -> int:
        return self.n1 + self.n2


def _check_x(X: np.ndarray, p: MatrixNormalParams) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != p.M.shape:
        raise ValueError(f"X has shape {X.shape}, parameters expect {p.M.shape}")
    return X


def _gamma_args(n: int, lam: float) -> np.ndarray:
    if int(n) != n or n < 1:
        raise DomainError(f"Dimension must be a positive integer, got {n}")
    args = lam + (1.0 - np.arange(1, int(n) + 1)) / 2.0
    if np.any(args <= 0):
        raise DomainError(f"ln_gamma_n({n}, {lam}) needs lambda > {(n - 1) / 2}")
    return args


def ln_gamma_n(n: int, lam: float) -> float:
    """Log of the multivariate gamma function Gamma_n(lambda).

    Args:
        n: Dimension (positive integer).
        lam: Argument, must exceed (n - 1) / 2.

    Returns:
        ``n(n-1)/4 ln(pi) + sum_i ln Gamma(lambda + (1 - i)/2)``.

    Raises:
        DomainError: At or beyond a pole of the gamma function.
    """
    args = _gamma_args(n, lam)
    return n * (n - 1) / 4.0 * LN_PI + float(np.sum(special.gammaln(args)))


def ln_gamma_n_diff(n: int, a: float, b: float) -> float:
    """Return ``ln Gamma_n(a) - ln Gamma_n(b)`` as a sum of scalar differences.

    The pi terms cancel exactly; pairing the scalar terms keeps precision when
    a and b are both large.
    """
    return float(np.sum(special.gammaln(_gamma_args(n, a)) - special.gammaln(_gamma_args(n, b))))


def psi_n(n: int, x: float) -> float:
    """Derivative of ``ln_gamma_n(n, x)`` with respect to x.

    Raises:
        DomainError: At or beyond a pole of the gamma function.
    """
    return float(np.sum(special.digamma(_gamma_args(n, x))))


def mn_logpdf(X: np.ndarray, p: MatrixNormalParams) -> float:
    """Log-density of the matrix-variate Gaussian at X.

    Raises:
        FactorizationError: If Sigma or Omega is not positive definite after jitter.
    """
    X = _check_x(X, p)
    n, d = p.n, p.d
    L_s = jitchol(p.Sigma)
    L_o = jitchol(p.Omega)
    return (
        -0.5 * d * n * LN_2PI
        - 0.5 * d * logdet(L_s)
        - 0.5 * n * logdet(L_o)
        - 0.5 * quad_trace(L_s, L_o, X - p.M)
    )


def ln_det_identity_plus(L_s: np.ndarray, L_o: np.ndarray, A: np.ndarray) -> float:
    """``ln det(I_n + Sigma^{-1} A Omega^{-1} A^T)`` via the smaller of the two Gram forms."""
    W = whiten(L_o, whiten(L_s, A).T)  # d x n, equals L_o^{-1} A^T L_s^{-T}
    n, d = A.shape
    G = W @ W.T if d <= n else W.T @ W
    return logdet(jitchol(np.eye(G.shape[0]) + G))


def mt_logpdf(X: np.ndarray, p: MatrixTParams) -> float:
    """Log-density of the matrix-variate Student-t at X.

    Raises:
        FactorizationError: If Sigma or Omega is not positive definite after jitter.
    """
    X = _check_x(X, p.base)
    n, d, nu = p.n, p.d, p.nu
    L_s = jitchol(p.base.Sigma)
    L_o = jitchol(p.base.Omega)
    c = nu + d + n - 1
    return (
        ln_gamma_n_diff(n, 0.5 * c, 0.5 * (nu + n - 1))
        - 0.5 * d * n * LN_PI
        - 0.5 * d * logdet(L_s)
        - 0.5 * n * logdet(L_o)
        - 0.5 * c * ln_det_identity_plus(L_s, L_o, X - p.base.M)
    )


def mt_moment_matched(base: MatrixNormalParams, nu: float) -> MatrixTParams:
    """Student-t parameters with the same mean and covariance as ``base``.

    Scales Sigma by (nu - 2) so that cov(vec(X^T)) equals Sigma (x) Omega; as
    nu grows this law converges to ``base``.
    """
    scaled = MatrixNormalParams(M=base.M, Sigma=base.Sigma * (nu - 2), Omega=base.Omega)
    return MatrixTParams(base=scaled, nu=nu)


def mn_sample(p: MatrixNormalParams, seed: int, size: int | None = None) -> np.ndarray:
    """Draw from MN(M, Sigma, Omega) as ``M + L_Sigma Z L_Omega^T``.

    Args:
        p: Distribution parameters.
        seed: Seed for a generator owned by this call.
        size: Number of draws; ``None`` returns a single [n x d] matrix.

    Returns:
        [n x d] matrix, or [size x n x d] array when ``size`` is given.
    """
    rng = np.random.default_rng(seed)
    L_s = jitchol(p.Sigma)
    L_o = jitchol(p.Omega)
    count = 1 if size is None else size
    Z = rng.standard_normal((count, p.n, p.d))
    draws = p.M + L_s @ Z @ L_o.T
    return draws[0] if size is None else draws


def mt_sample(p: MatrixTParams, seed: int, size: int | None = None) -> np.ndarray:
    """Draw from MT(nu, M, Sigma, Omega) as a Gaussian scale mixture.

    With ``S0 = A A^T ~ Wishart(nu + n - 1, I)``, the matrix
    ``S = L_Sigma^{-T} S0 L_Sigma^{-1}`` is Wishart with scale Sigma^{-1} and
    ``X = M + L_Sigma A^{-T} Z L_Omega^T`` is MN(M, S^{-1}, Omega) given S.
    Sigma is never inverted.

    Args:
        p: Distribution parameters.
        seed: Seed for a generator owned by this call.
        size: Number of draws; ``None`` returns a single [n x d] matrix.

    Returns:
        [n x d] matrix, or [size x n x d] array when ``size`` is given.
    """
    rng = np.random.default_rng(seed)
    n, d = p.n, p.d
    L_s = jitchol(p.base.Sigma)
    L_o = jitchol(p.base.Omega)
    count = 1 if size is None else size

    S0 = stats.wishart(df=p.nu + n - 1, scale=np.eye(n)).rvs(size=count, random_state=rng)
    A = np.linalg.cholesky(np.reshape(S0, (count, n, n)))
    Z = rng.standard_normal((count, n, d))
    draws = p.base.M + L_s @ np.linalg.solve(np.swapaxes(A, -1, -2), Z) @ L_o.T
    return draws[0] if size is None else draws


def _split_rows(p: MatrixNormalParams, part: RowPartition):
    if part.n != p.n:
        raise ValueError(f"Partition {part.n1}+{part.n2} does not cover {p.n} rows")
    k = part.n1
    S = p.Sigma
    return p.M[:k], p.M[k:], S[:k, :k], S[k:, :k], S[k:, k:]


def _schur(p: MatrixNormalParams, part: RowPartition, X1: np.ndarray):
    M1, M2, S11, S21, S22 = _split_rows(p, part)
    X1 = np.asarray(X1, dtype=float)
    if X1.shape != M1.shape:
        raise ValueError(f"X1 has shape {X1.shape}, expected {M1.shape}")
    L11 = jitchol(S11)
    R1 = X1 - M1
    mean = M2 + S21 @ chol_solve(L11, R1)
    cov = S22 - S21 @ chol_solve(L11, S21.T)
    cov = 0.5 * (cov + cov.T)
    return mean, cov, L11, R1


def mn_row_marginal(p: MatrixNormalParams, part: RowPartition) -> MatrixNormalParams:
    """Law of the leading n1 rows: MN(M1, Sigma11, Omega)."""
    M1, _, S11, _, _ = _split_rows(p, part)
    return MatrixNormalParams(M=M1, Sigma=S11, Omega=p.Omega)


def mn_row_conditional(p: MatrixNormalParams, part: RowPartition, X1: np.ndarray) -> MatrixNormalParams:
    """Law of the trailing n2 rows given the leading n1 rows.

    Returns:
        MN(M2 + Sigma21 Sigma11^{-1} (X1 - M1), Sigma22.1, Omega).

    Raises:
        FactorizationError: If Sigma11 is singular after jitter.
    """
    mean, cov, _, _ = _schur(p, part, X1)
    return MatrixNormalParams(M=mean, Sigma=cov, Omega=p.Omega)


def mt_row_marginal(p: MatrixTParams, part: RowPartition) -> MatrixTParams:
    """Law of the leading n1 rows: MT(nu, M1, Sigma11, Omega)."""
    return MatrixTParams(base=mn_row_marginal(p.base, part), nu=p.nu)


def mt_row_conditional(p: MatrixTParams, part: RowPartition, X1: np.ndarray) -> MatrixTParams:
    """Law of the trailing n2 rows given the leading n1 rows.

    Returns:
        MT(nu + n1, M2 + Sigma21 Sigma11^{-1} (X1 - M1), Sigma22.1,
        Omega + (X1 - M1)^T Sigma11^{-1} (X1 - M1)).

    Raises:
        FactorizationError: If Sigma11 is singular after jitter.
    """
    mean, cov, L11, R1 = _schur(p.base, part, X1)
    omega = p.base.Omega + R1.T @ chol_solve(L11, R1)
    omega = 0.5 * (omega + omega.T)
    base = MatrixNormalParams(M=mean, Sigma=cov, Omega=omega)
    return MatrixTParams(base=base, nu=p.nu + part.n1)


def mn_col_conditional(p: MatrixNormalParams, part: RowPartition, X1c: np.ndarray) -> MatrixNormalParams:
    """Law of the trailing columns given the leading ``part.n1`` columns (transpose trick)."""
    cond = mn_row_conditional(p.transposed(), part, np.asarray(X1c, dtype=float).T)
    return cond.transposed()


def mt_col_conditional(p: MatrixTParams, part: RowPartition, X1c: np.ndarray) -> MatrixTParams:
    """Law of the trailing columns given the leading ``part.n1`` columns (transpose trick)."""
    cond = mt_row_conditional(p.transposed(), part, np.asarray(X1c, dtype=float).T)
    return cond.transposed()
