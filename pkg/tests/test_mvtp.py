# ABOUTME: Tests for multivariate Student-t process regression.
# ABOUTME: Checks the NLML against the matrix-t density, gradients, the Gaussian limit and prediction.

import numpy as np
import pytest
from scipy import special


def _with_nu(params, lognu_minus2):
    from mvpreg.models.params import HyperParams

    return HyperParams(kernel=params.kernel, rowcov=params.rowcov, lognu_minus2=lognu_minus2)


class TestMvtpNlml:
    """Tests for the MV-TP negative log marginal likelihood."""

    def test_matches_matrix_t_density(self, mv_params, mv_data):
        """Should equal minus the MT(nu, 0, K', Omega) log-density of Y."""
        from mvpreg.models.kernels import gram_noisy
        from mvpreg.models.matvar_dist import MatrixNormalParams, MatrixTParams, mt_logpdf
        from mvpreg.models.mvtp import mvtp_nlml

        # Arrange
        X, Y = mv_data
        params = _with_nu(mv_params, np.log(1.5))
        base = MatrixNormalParams(M=np.zeros_like(Y), Sigma=gram_noisy(params.kernel, X), Omega=params.rowcov.omega())

        # Act / Assert
        assert mvtp_nlml(params, X, Y) == pytest.approx(-mt_logpdf(Y, MatrixTParams(base=base, nu=3.5)), rel=1e-10)

    def test_gradient_matches_finite_differences(self, mv_params, mv_data):
        """Should match central differences in every coordinate, nu included."""
        from mvpreg.models.mvtp import mvtp_nlml, mvtp_nlml_grad

        # Arrange
        X, Y = mv_data
        params = _with_nu(mv_params, 0.7)
        v0 = params.to_vector()
        h = 1e-6
        numeric = np.array(
            [
                (mvtp_nlml(params.with_vector(v0 + h * e), X, Y) - mvtp_nlml(params.with_vector(v0 - h * e), X, Y))
                / (2 * h)
                for e in np.eye(v0.size)
            ]
        )

        # Act
        analytic = mvtp_nlml_grad(params, X, Y)

        # Assert
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-6)

    def test_approaches_gaussian_nlml_for_large_nu(self, mv_params, mv_data):
        """Should converge to the MV-GP NLML when K' is scaled by nu - 2 and nu grows."""
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.mvgp import mvgp_nlml
        from mvpreg.models.mvtp import mvtp_nlml
        from mvpreg.models.params import HyperParams

        # Arrange
        X, Y = mv_data
        log_scale = np.log(1e8)
        k = mv_params.kernel
        scaled = KernelSpec(
            family=k.family,
            log_lengthscales=k.log_lengthscales,
            log_signal_variance=k.log_signal_variance + log_scale,
            log_noise_variance=k.log_noise_variance + log_scale,
        )
        params = HyperParams(kernel=scaled, rowcov=mv_params.rowcov, lognu_minus2=log_scale)

        # Act / Assert
        assert mvtp_nlml(params, X, Y) == pytest.approx(mvgp_nlml(mv_params, X, Y), abs=1e-3)

    def test_nu_gradient_at_zero_outputs(self):
        """Should reduce dL/dnu to psi_n(tau / 2) / 2 - psi_n((tau + d) / 2) / 2 when Y = 0 and K' = I."""
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.mvtp import mvtp_nlml_grad
        from mvpreg.models.params import HyperParams, RowCovParams

        # Arrange: far-apart inputs and a vanishing signal leave K' = I
        n, d, nu = 4, 2, 5.5
        X = np.array([[0.0], [100.0], [200.0], [300.0]])
        kernel = KernelSpec(family="se", log_lengthscales=[0.0], log_signal_variance=-50.0, log_noise_variance=0.0)
        params = HyperParams(kernel=kernel, rowcov=RowCovParams.identity(d), lognu_minus2=np.log(nu - 2))
        tau = nu + n - 1

        # Act
        grad = mvtp_nlml_grad(params, X, np.zeros((n, d)))

        # Assert
        shifts = (1.0 - np.arange(1, n + 1)) / 2.0
        expected = 0.5 * np.sum(special.digamma(tau / 2 + shifts)) - 0.5 * np.sum(special.digamma((tau + d) / 2 + shifts))
        assert grad[-1] == pytest.approx(expected * (nu - 2), rel=1e-10)

    def test_requires_degrees_of_freedom(self, mv_params, mv_data):
        """Should reject parameters without lognu_minus2."""
        from mvpreg.models.mvtp import mvtp_nlml

        X, Y = mv_data

        with pytest.raises(ValueError, match="lognu_minus2"):
            mvtp_nlml(mv_params, X, Y)


class TestMvtpFitAndPredict:
    """Tests for fitting and the predictive matrix-t."""

    def test_fit_returns_student_t_model(self, two_output_data):
        """Should fit nu > 2 with varphi_11 held at zero."""
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.mvtp import mvtp_fit, mvtp_nlml
        from mvpreg.models.optimizer import FitOptions

        # Arrange
        X, Y = two_output_data

        # Act
        model = mvtp_fit(X, Y, KernelSpec.default("se", 1), FitOptions(restarts=2, max_iters=100))

        # Assert
        assert model.family == "tp"
        assert model.params.nu > 2
        assert model.rowcov.varphi_diag[0] == 0.0
        assert model.nlml_at_fit == pytest.approx(mvtp_nlml(model.params, X, Y), rel=1e-8)

    def test_predictive_law(self, mv_params, mv_data):
        """Should share the Gaussian mean and column covariance and inflate Omega by Y^T K'^-1 Y."""
        from mvpreg.models.kernels import gram_noisy
        from mvpreg.models.mvgp import TrainedModel, mvgp_predict
        from mvpreg.models.mvtp import mvtp_predict

        # Arrange
        X, Y = mv_data
        tp = TrainedModel(X=X, Y=Y, params=_with_nu(mv_params, 0.0), family="tp", nlml_at_fit=0.0)
        gp = TrainedModel(X=X, Y=Y, params=mv_params, family="gp", nlml_at_fit=0.0)
        Xs = X[:4] + 0.05

        # Act
        t_pred = mvtp_predict(tp, Xs)
        g_pred = mvgp_predict(gp, Xs)

        # Assert
        np.testing.assert_allclose(t_pred.mean, g_pred.mean, atol=1e-12)
        np.testing.assert_allclose(t_pred.col_cov, g_pred.col_cov, atol=1e-12)
        K = gram_noisy(mv_params.kernel, X)
        np.testing.assert_allclose(t_pred.row_cov, mv_params.rowcov.omega() + Y.T @ np.linalg.solve(K, Y), atol=1e-8)
        assert t_pred.df == pytest.approx(3.0 + len(X))

    def test_pointwise_variance_divides_by_df_minus_two(self, mv_params, mv_data):
        """Should scale the variance of the t prediction by 1 / (df - 2)."""
        from mvpreg.models.mvgp import TrainedModel
        from mvpreg.models.mvtp import mvtp_predict

        X, Y = mv_data
        tp = TrainedModel(X=X, Y=Y, params=_with_nu(mv_params, 0.0), family="tp", nlml_at_fit=0.0)

        pred = mvtp_predict(tp, X[:2])

        expected = np.outer(np.diag(pred.col_cov), np.diag(pred.row_cov)) / (pred.df - 2)
        np.testing.assert_allclose(pred.pointwise_variance(), expected, atol=1e-12)

    def test_predict_rejects_gaussian_model(self, mv_params, mv_data):
        """Should refuse to predict a 'gp' model."""
        from mvpreg.models.mvgp import TrainedModel
        from mvpreg.models.mvtp import mvtp_predict

        X, Y = mv_data
        gp = TrainedModel(X=X, Y=Y, params=mv_params, family="gp", nlml_at_fit=0.0)

        with pytest.raises(ValueError, match="'tp'"):
            mvtp_predict(gp, X)


class TestSingleOutputProfile:
    """Tests for the d = 1 Student-t likelihood profiled over the overall scale of K'."""

    def _scaled(self, kernel, log_c, lognu_minus2=None):
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.params import HyperParams, RowCovParams

        shifted = KernelSpec(
            family=kernel.family,
            log_lengthscales=kernel.log_lengthscales,
            log_signal_variance=kernel.log_signal_variance + log_c,
            log_noise_variance=kernel.log_noise_variance + log_c,
        )
        return HyperParams(kernel=shifted, rowcov=RowCovParams.identity(1), lognu_minus2=lognu_minus2)

    def test_profiled_t_and_gaussian_objectives_differ_by_a_shape_free_constant(self, mv_data):
        """Should rank kernel shapes exactly as the Gaussian model does once the scale is optimal."""
        from mvpreg.models.kernels import KernelSpec, gram_noisy
        from mvpreg.models.mvgp import mvgp_nlml
        from mvpreg.models.mvtp import mvtp_nlml, mvtp_nlml_grad

        # Arrange
        X, Y = mv_data
        y = Y[:, :1]
        n, nu = y.shape[0], 6.0
        shapes = [
            KernelSpec(family="seard", log_lengthscales=[0.2, -0.3], log_noise_variance=-1.5),
            KernelSpec(family="seard", log_lengthscales=[0.8, 0.1], log_signal_variance=0.5, log_noise_variance=-0.5),
        ]

        # Act
        gaps = []
        for kernel in shapes:
            q = float(y[:, 0] @ np.linalg.solve(gram_noisy(kernel, X), y[:, 0]))
            t_params = self._scaled(kernel, np.log(nu * q / n), np.log(nu - 2))
            gaps.append(mvtp_nlml(t_params, X, y) - mvgp_nlml(self._scaled(kernel, np.log(q / n)), X, y))
            grad = mvtp_nlml_grad(t_params, X, y)

            # Assert: the scale direction is stationary at c = nu q / n
            assert grad[2] + grad[3] == pytest.approx(0.0, abs=1e-9)

        assert gaps[0] == pytest.approx(gaps[1], abs=1e-9)
