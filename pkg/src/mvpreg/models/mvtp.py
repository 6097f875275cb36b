# ABOUTME: Multivariate Student-t process regression with a matrix-variate t likelihood.
# ABOUTME: NLML and gradients including the degrees of freedom, fitting and prediction.

import numpy as np

from mvpreg.models.kernels import KernelSpec, gram_grads, gram_noisy
from mvpreg.models.linalg import chol_inverse, chol_solve, jitchol, logdet
from mvpreg.models.matvar_dist import LN_PI, ln_det_identity_plus, ln_gamma_n_diff, psi_n
from mvpreg.models.mvgp import (
    Prediction,
    TrainedModel,
    check_training_data,
    fit_hyperparameters,
    predictive_moments,
)
from mvpreg.models.optimizer import FitOptions
from mvpreg.models.params import HyperParams


def _require_nu(params: HyperParams) -> float:
    if params.nu is None:
        raise ValueError("Student-t NLML needs lognu_minus2")
    return params.nu


def mvtp_nlml(params: HyperParams, X: np.ndarray, Y: np.ndarray) -> float:
    """Negative log marginal likelihood of Y ~ MT(nu, 0, K', Omega).

    Computed as ``(tau + d)/2 ln det(I + K'^{-1} Y Omega^{-1} Y^T) + d/2 ln det K'``
    plus the gamma and Omega terms, with tau = nu + n - 1.

    Raises:
        FactorizationError: If K' cannot be factorized.
    """
    nu = _require_nu(params)
    n, d = Y.shape
    tau = nu + n - 1
    L_K = jitchol(gram_noisy(params.kernel, X))
    Phi = params.rowcov.phi()
    return (
        0.5 * (tau + d) * ln_det_identity_plus(L_K, Phi, Y)
        + 0.5 * d * logdet(L_K)
        + ln_gamma_n_diff(n, 0.5 * tau, 0.5 * (tau + d))
        + 0.5 * n * logdet(Phi)
        + 0.5 * d * n * LN_PI
    )


def mvtp_nlml_and_grad(params: HyperParams, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """NLML and its gradient in the vector order of ``params`` (nu coordinate last)."""
    nu = _require_nu(params)
    n, d = Y.shape
    tau = nu + n - 1
    L_K = jitchol(gram_noisy(params.kernel, X))
    Phi = params.rowcov.phi()
    ld_ratio = ln_det_identity_plus(L_K, Phi, Y)
    ld_K = logdet(L_K)
    value = (
        0.5 * (tau + d) * ld_ratio
        + 0.5 * d * ld_K
        + ln_gamma_n_diff(n, 0.5 * tau, 0.5 * (tau + d))
        + 0.5 * n * logdet(Phi)
        + 0.5 * d * n * LN_PI
    )

    omega_inv = chol_inverse(Phi)
    alpha_O = omega_inv @ Y.T  # Omega^{-1} Y^T
    U = gram_noisy(params.kernel, X) + Y @ alpha_O
    L_U = jitchol(0.5 * (U + U.T))

    W = 0.5 * (tau + d) * chol_inverse(L_U) - 0.5 * tau * chol_inverse(L_K)
    g_kernel = [float(np.sum(W * dK)) for dK in gram_grads(params.kernel, X)]

    G = 0.5 * (n * omega_inv - (tau + d) * alpha_O @ chol_solve(L_U, alpha_O.T))
    G = 0.5 * (G + G.T)
    g_row = params.rowcov.grad_from_omega(G)

    dL_dnu = 0.5 * ld_ratio + 0.5 * psi_n(n, 0.5 * tau) - 0.5 * psi_n(n, 0.5 * (tau + d))
    return value, np.concatenate([g_kernel, g_row, [dL_dnu * (nu - 2.0)]])


def mvtp_nlml_grad(params: HyperParams, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gradient of ``mvtp_nlml``; the last entry is with respect to lognu_minus2."""
    return mvtp_nlml_and_grad(params, X, Y)[1]


def mvtp_fit(X: np.ndarray, Y: np.ndarray, spec: KernelSpec, opts: FitOptions) -> TrainedModel:
    """Fit MV-TPR hyperparameters, nu included, by minimizing the NLML.

    Raises:
        DataError: If the data is malformed.
        FitError: If every restart fails.
    """
    X, Y = check_training_data(X, Y)
    template = HyperParams.template(spec, Y.shape[1], student_t=True)
    return fit_hyperparameters(mvtp_nlml_and_grad, template, X, Y, opts, family="tp")


def mvtp_predict(model: TrainedModel, Xstar: np.ndarray) -> Prediction:
    """Predictive matrix-variate t at ``Xstar``.

    Degrees of freedom become nu + n and the row covariance is inflated to
    Omega + Y^T K'^{-1} Y; the mean matches the Gaussian model.

    Raises:
        ValueError: If the model is not a Student-t process or dimensions mismatch.
    """
    if model.family != "tp":
        raise ValueError(f"mvtp_predict needs a 'tp' model, got '{model.family}'")
    mean, col_cov = predictive_moments(model, Xstar)
    Y = model.Y
    row_cov = model.rowcov.omega() + Y.T @ chol_solve(model.cached_chol, Y)
    row_cov = 0.5 * (row_cov + row_cov.T)
    return Prediction(mean=mean, col_cov=col_cov, row_cov=row_cov, df=model.params.nu + Y.shape[0])
