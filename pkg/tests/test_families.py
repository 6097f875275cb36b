# ABOUTME: Tests for the uniform fit/predict entry points of the four model families.
# ABOUTME: Checks joint versus per-output fits, forecast shapes and degrees of freedom.

import numpy as np
import pytest


class TestFitFamily:
    """Tests for fit_family and predict_family."""

    def test_joint_family_fits_one_model(self, two_output_data):
        """Should fit a single model over all outputs for mvgp."""
        from mvpreg.models.families import fit_family
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.optimizer import FitOptions

        X, Y = two_output_data

        fitted = fit_family("mvgp", X, Y, KernelSpec.default("se", 1), FitOptions(restarts=1, max_iters=30))

        assert len(fitted.models) == 1
        assert fitted.n_outputs == 2

    def test_independent_family_fits_one_model_per_output(self, two_output_data):
        """Should fit d single-output models for tp."""
        from mvpreg.models.families import fit_family
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.optimizer import FitOptions

        X, Y = two_output_data

        fitted = fit_family("tp", X, Y, KernelSpec.default("se", 1), FitOptions(restarts=1, max_iters=30))

        assert len(fitted.models) == 2
        assert all(m.Y.shape[1] == 1 and m.family == "tp" for m in fitted.models)
        np.testing.assert_array_equal(fitted.models[1].Y[:, 0], Y[:, 1])

    def test_single_output_rowcov_is_pinned_to_one(self, two_output_data):
        """Should keep Omega = 1 for d = 1 models since varphi_11 is held at zero."""
        from mvpreg.models.families import fit_family
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.optimizer import FitOptions

        X, Y = two_output_data

        fitted = fit_family("gp", X, Y, KernelSpec.default("se", 1), FitOptions(restarts=1, max_iters=30))

        for model in fitted.models:
            np.testing.assert_array_equal(model.rowcov.omega(), [[1.0]])

    def test_unknown_family_raises(self, two_output_data):
        """Should reject an unknown family name."""
        from mvpreg.models.families import fit_family
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.optimizer import FitOptions

        X, Y = two_output_data

        with pytest.raises(ValueError, match="Unknown model family"):
            fit_family("svm", X, Y, KernelSpec.default("se", 1), FitOptions())

    @pytest.mark.parametrize("family", ["mvgp", "gp", "mvtp", "tp"])
    def test_forecast_shapes(self, family, two_output_data):
        """Should return [m x d] means and variances, with df only for Student-t families."""
        from mvpreg.models.families import fit_family, predict_family
        from mvpreg.models.kernels import KernelSpec
        from mvpreg.models.optimizer import FitOptions

        # Arrange
        X, Y = two_output_data
        fitted = fit_family(family, X, Y, KernelSpec.default("seard", 1), FitOptions(restarts=1, max_iters=30))

        # Act
        forecast = predict_family(fitted, np.array([[0.0], [0.5], [4.0]]))

        # Assert
        assert forecast.mean.shape == (3, 2)
        assert forecast.variance.shape == (3, 2)
        assert np.all(forecast.variance > 0)
        if family.endswith("tp"):
            assert forecast.df.shape == (2,)
            assert np.all(forecast.df > len(X) + 2)
        else:
            assert forecast.df is None

    def test_interval_is_centered_on_mean(self):
        """Should return mean -/+ z * std."""
        from mvpreg.models.families import PointwiseForecast

        forecast = PointwiseForecast(mean=np.array([[1.0, 2.0]]), variance=np.array([[4.0, 9.0]]))

        lower, upper = forecast.interval(z=2.0)

        np.testing.assert_allclose(lower, [[-3.0, -4.0]])
        np.testing.assert_allclose(upper, [[5.0, 8.0]])
