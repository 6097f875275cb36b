# ABOUTME: Tests for the matrix-variate Gaussian and Student-t distributions.
# ABOUTME: Checks densities against scipy oracles, sampler moments, conditionals and gamma helpers.

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate, special, stats


@pytest.fixture
def base():
    """Provides MN parameters over 3 x 2 matrices with correlated rows and columns."""
    from mvpreg.models.matvar_dist import MatrixNormalParams

    Sigma = np.array([[2.0, 0.6, 0.2], [0.6, 1.5, 0.4], [0.2, 0.4, 1.0]])
    Omega = np.array([[1.0, 0.3], [0.3, 0.8]])
    M = np.array([[0.5, -1.0], [0.0, 0.2], [1.0, 0.3]])
    return MatrixNormalParams(M=M, Sigma=Sigma, Omega=Omega)


@pytest.fixture
def X_point():
    return np.array([[0.9, -0.4], [-0.5, 0.7], [1.6, -0.2]])


class TestParamTypes:
    """Tests for parameter validation."""

    def test_rejects_mismatched_shapes(self):
        """Should reject a Sigma whose size does not match the rows of M."""
        from mvpreg.models.matvar_dist import MatrixNormalParams

        with pytest.raises(ValidationError, match="Sigma"):
            MatrixNormalParams(M=np.zeros((3, 2)), Sigma=np.eye(2), Omega=np.eye(2))

    def test_rejects_asymmetric_covariance(self):
        """Should reject a non-symmetric Omega."""
        from mvpreg.models.matvar_dist import MatrixNormalParams

        with pytest.raises(ValidationError, match="symmetric"):
            MatrixNormalParams(M=np.zeros((2, 2)), Sigma=np.eye(2), Omega=np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_rejects_degrees_of_freedom_at_two(self, base):
        """Should require nu > 2."""
        from mvpreg.models.matvar_dist import MatrixTParams

        with pytest.raises(ValidationError):
            MatrixTParams(base=base, nu=2.0)

    def test_arrays_are_read_only(self, base):
        """Should freeze the stored arrays."""
        with pytest.raises(ValueError):
            base.M[0, 0] = 1.0


class TestGammaHelpers:
    """Tests for the multivariate gamma family."""

    def test_univariate_case_is_log_gamma(self):
        """Should reduce to ln Gamma for n = 1."""
        from mvpreg.models.matvar_dist import ln_gamma_n

        assert ln_gamma_n(1, 3.7) == pytest.approx(special.gammaln(3.7), rel=1e-12)

    def test_matches_scipy_multigammaln(self):
        """Should agree with scipy.special.multigammaln."""
        from mvpreg.models.matvar_dist import ln_gamma_n

        assert ln_gamma_n(4, 5.25) == pytest.approx(special.multigammaln(5.25, 4), rel=1e-12)

    def test_difference_matches_two_evaluations(self):
        """Should equal the difference of two ln_gamma_n values."""
        from mvpreg.models.matvar_dist import ln_gamma_n, ln_gamma_n_diff

        expected = ln_gamma_n(3, 6.5) - ln_gamma_n(3, 4.0)
        assert ln_gamma_n_diff(3, 6.5, 4.0) == pytest.approx(expected, rel=1e-12)

    def test_psi_n_is_derivative(self):
        """Should match a central finite difference of ln_gamma_n."""
        from mvpreg.models.matvar_dist import ln_gamma_n, psi_n

        h = 1e-5
        numeric = (ln_gamma_n(3, 4.2 + h) - ln_gamma_n(3, 4.2 - h)) / (2 * h)
        assert psi_n(3, 4.2) == pytest.approx(numeric, rel=1e-7)

    def test_pole_raises_domain_error(self):
        """Should raise DomainError when an argument reaches a pole."""
        from mvpreg.errors import DomainError
        from mvpreg.models.matvar_dist import ln_gamma_n, psi_n

        with pytest.raises(DomainError):
            ln_gamma_n(3, 1.0)
        with pytest.raises(DomainError):
            psi_n(2, 0.5)


class TestDensities:
    """Tests for the log-densities."""

    def test_mn_logpdf_matches_kronecker_normal(self, base, X_point):
        """Should equal the multivariate normal density of vec(X^T) with covariance Sigma (x) Omega."""
        from mvpreg.models.matvar_dist import mn_logpdf

        # Arrange
        oracle = stats.multivariate_normal(mean=base.M.ravel(), cov=np.kron(base.Sigma, base.Omega))

        # Act / Assert
        assert mn_logpdf(X_point, base) == pytest.approx(oracle.logpdf(X_point.ravel()), rel=1e-10)

    def test_mt_logpdf_single_row_matches_multivariate_t(self, X_point):
        """Should reduce to a multivariate t with shape s * Omega / nu when n = 1."""
        from mvpreg.models.matvar_dist import MatrixNormalParams, MatrixTParams, mt_logpdf

        # Arrange
        s, nu = 1.7, 4.5
        Omega = np.array([[1.0, 0.3], [0.3, 0.8]])
        p = MatrixTParams(base=MatrixNormalParams(M=np.zeros((1, 2)), Sigma=[[s]], Omega=Omega), nu=nu)
        x = X_point[:1]

        # Act
        value = mt_logpdf(x, p)

        # Assert
        oracle = stats.multivariate_t(loc=np.zeros(2), shape=s * Omega / nu, df=nu)
        assert value == pytest.approx(oracle.logpdf(x.ravel()), rel=1e-10)

    def test_mt_logpdf_is_transpose_invariant(self, base, X_point):
        """Should give the same density for X under p and X^T under p transposed."""
        from mvpreg.models.matvar_dist import MatrixTParams, mt_logpdf

        p = MatrixTParams(base=base, nu=5.0)

        assert mt_logpdf(X_point, p) == pytest.approx(mt_logpdf(X_point.T, p.transposed()), rel=1e-9)

    def test_moment_matched_t_approaches_normal(self, base, X_point):
        """Should converge to the matrix normal density as nu grows."""
        from mvpreg.models.matvar_dist import mn_logpdf, mt_logpdf, mt_moment_matched

        # Act
        near = mt_logpdf(X_point, mt_moment_matched(base, 1e8))
        far = mt_logpdf(X_point, mt_moment_matched(base, 10.0))
        target = mn_logpdf(X_point, base)

        # Assert
        assert near == pytest.approx(target, abs=1e-3)
        assert abs(near - target) < abs(far - target)

    def test_mn_density_is_invariant_to_trading_scale_between_factors(self, base, X_point):
        """Should give the same density for (c Sigma, Omega / c)."""
        from mvpreg.models.matvar_dist import MatrixNormalParams, mn_logpdf

        rescaled = MatrixNormalParams(M=base.M, Sigma=3.7 * base.Sigma, Omega=base.Omega / 3.7)

        assert mn_logpdf(X_point, rescaled) == pytest.approx(mn_logpdf(X_point, base), rel=1e-12)

    def test_moment_matched_gap_shrinks_monotonically(self, base, X_point):
        """Should move strictly closer to the matrix normal density as nu goes 1e2, 1e4, 1e6."""
        from mvpreg.models.matvar_dist import mn_logpdf, mt_logpdf, mt_moment_matched

        target = mn_logpdf(X_point, base)

        gaps = [abs(mt_logpdf(X_point, mt_moment_matched(base, nu)) - target) for nu in (1e2, 1e4, 1e6)]

        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-4

    def test_wrong_shape_raises(self, base):
        """Should reject X with the wrong shape."""
        from mvpreg.models.matvar_dist import mn_logpdf

        with pytest.raises(ValueError, match="shape"):
            mn_logpdf(np.zeros((2, 2)), base)


class TestSamplers:
    """Tests for the samplers."""

    def test_mn_sample_is_deterministic_per_seed(self, base):
        """Should reproduce the same draw for the same seed."""
        from mvpreg.models.matvar_dist import mn_sample

        np.testing.assert_array_equal(mn_sample(base, 5), mn_sample(base, 5))
        assert not np.array_equal(mn_sample(base, 5), mn_sample(base, 6))

    def test_mn_sample_moments(self, base):
        """Should have mean M and covariance Sigma (x) Omega over many draws."""
        from mvpreg.models.matvar_dist import mn_sample

        # Act
        draws = mn_sample(base, 11, size=40_000).reshape(40_000, -1)

        # Assert
        np.testing.assert_allclose(draws.mean(axis=0), base.M.ravel(), atol=0.05)
        np.testing.assert_allclose(np.cov(draws.T), np.kron(base.Sigma, base.Omega), atol=0.08)

    def test_mt_sample_moments(self, base):
        """Should have covariance Sigma (x) Omega / (nu - 2)."""
        from mvpreg.models.matvar_dist import mt_moment_matched, mt_sample

        # Arrange
        p = mt_moment_matched(base, 10.0)

        # Act
        draws = mt_sample(p, 3, size=40_000).reshape(40_000, -1)

        # Assert
        np.testing.assert_allclose(draws.mean(axis=0), base.M.ravel(), atol=0.05)
        np.testing.assert_allclose(np.cov(draws.T), np.kron(base.Sigma, base.Omega), atol=0.15)

    def test_mt_sample_is_deterministic_per_seed(self, base):
        """Should reproduce the same Student-t draws for the same seed."""
        from mvpreg.models.matvar_dist import MatrixTParams, mt_sample

        p = MatrixTParams(base=base, nu=4.0)

        np.testing.assert_array_equal(mt_sample(p, 8, size=5), mt_sample(p, 8, size=5))
        assert not np.array_equal(mt_sample(p, 8, size=5), mt_sample(p, 9, size=5))

    def test_mt_sample_with_huge_nu_matches_normal_sampler(self, base):
        """Should match the matrix normal sampler's moments when nu is 1e6."""
        from mvpreg.models.matvar_dist import mn_sample, mt_moment_matched, mt_sample

        # Act
        t_draws = mt_sample(mt_moment_matched(base, 1e6), 4, size=40_000).reshape(40_000, -1)
        n_draws = mn_sample(base, 5, size=40_000).reshape(40_000, -1)

        # Assert
        np.testing.assert_allclose(t_draws.mean(axis=0), n_draws.mean(axis=0), atol=0.06)
        np.testing.assert_allclose(np.cov(t_draws.T), np.cov(n_draws.T), atol=0.12)

    def test_mt_sample_histogram_matches_density(self):
        """Should put mass in each bin as the 1 x 1 matrix-t density predicts."""
        from mvpreg.models.matvar_dist import MatrixNormalParams, MatrixTParams, mt_logpdf, mt_sample

        # Arrange
        base = MatrixNormalParams(M=np.zeros((1, 1)), Sigma=np.array([[2.0]]), Omega=np.array([[1.0]]))
        p = MatrixTParams(base=base, nu=5.0)
        edges = np.linspace(-3.0, 3.0, 13)

        # Act
        draws = mt_sample(p, 17, size=40_000).ravel()
        observed = np.histogram(draws, bins=edges)[0] / draws.size

        # Assert
        expected = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            grid = np.linspace(lo, hi, 41)
            dens = np.exp([mt_logpdf(np.array([[v]]), p) for v in grid])
            expected.append(integrate.trapezoid(dens, grid))
        np.testing.assert_allclose(observed, expected, atol=0.01)

    def test_single_draw_shape(self, base):
        """Should return one n x d matrix when size is omitted."""
        from mvpreg.models.matvar_dist import MatrixTParams, mt_sample

        assert mt_sample(MatrixTParams(base=base, nu=3.0), 0).shape == (3, 2)


class TestConditionals:
    """Tests for row and column marginals and conditionals."""

    def test_mn_row_conditional_matches_gaussian_conditioning(self, base, X_point):
        """Should match conditioning the Kronecker Gaussian on the leading row."""
        from mvpreg.models.matvar_dist import RowPartition, mn_row_conditional

        # Arrange
        part = RowPartition(n1=1, n2=2)
        C = np.kron(base.Sigma, base.Omega)
        m = base.M.ravel()
        a, b = slice(0, 2), slice(2, 6)
        gain = C[b, a] @ np.linalg.inv(C[a, a])
        mean = m[b] + gain @ (X_point[0] - m[a])
        cov = C[b, b] - gain @ C[a, b]

        # Act
        cond = mn_row_conditional(base, part, X_point[:1])

        # Assert
        np.testing.assert_allclose(cond.M.ravel(), mean, atol=1e-10)
        np.testing.assert_allclose(np.kron(cond.Sigma, cond.Omega), cov, atol=1e-10)

    def test_mn_chain_rule(self, base, X_point):
        """Should factor the joint density as marginal times conditional."""
        from mvpreg.models.matvar_dist import RowPartition, mn_logpdf, mn_row_conditional, mn_row_marginal

        part = RowPartition(n1=2, n2=1)
        joint = mn_logpdf(X_point, base)
        split = mn_logpdf(X_point[:2], mn_row_marginal(base, part)) + mn_logpdf(
            X_point[2:], mn_row_conditional(base, part, X_point[:2])
        )

        assert joint == pytest.approx(split, rel=1e-10)

    def test_mt_chain_rule_over_rows(self, base, X_point):
        """Should factor the matrix-t density over a row split."""
        from mvpreg.models.matvar_dist import MatrixTParams, RowPartition, mt_logpdf, mt_row_conditional, mt_row_marginal

        # Arrange
        p = MatrixTParams(base=base, nu=4.0)
        part = RowPartition(n1=1, n2=2)

        # Act
        cond = mt_row_conditional(p, part, X_point[:1])
        split = mt_logpdf(X_point[:1], mt_row_marginal(p, part)) + mt_logpdf(X_point[1:], cond)

        # Assert
        assert cond.nu == pytest.approx(5.0)
        assert mt_logpdf(X_point, p) == pytest.approx(split, rel=1e-9)

    def test_mt_row_conditional_inflates_row_covariance(self, base, X_point):
        """Should add (X1 - M1)^T Sigma11^-1 (X1 - M1) to Omega."""
        from mvpreg.models.matvar_dist import MatrixTParams, RowPartition, mt_row_conditional

        p = MatrixTParams(base=base, nu=4.0)
        R = X_point[:1] - base.M[:1]

        cond = mt_row_conditional(p, RowPartition(n1=1, n2=2), X_point[:1])

        np.testing.assert_allclose(cond.base.Omega, base.Omega + R.T @ R / base.Sigma[0, 0], atol=1e-12)

    def test_mt_column_conditional_chain_rule(self, base, X_point):
        """Should factor the matrix-t density over a column split."""
        from mvpreg.models.matvar_dist import MatrixTParams, RowPartition, mt_col_conditional, mt_logpdf, mt_row_marginal

        # Arrange
        p = MatrixTParams(base=base, nu=6.0)
        part = RowPartition(n1=1, n2=1)

        # Act
        marginal = mt_row_marginal(p.transposed(), part).transposed()
        cond = mt_col_conditional(p, part, X_point[:, :1])
        split = mt_logpdf(X_point[:, :1], marginal) + mt_logpdf(X_point[:, 1:], cond)

        # Assert
        assert cond.n == 3 and cond.d == 1
        assert mt_logpdf(X_point, p) == pytest.approx(split, rel=1e-9)

    def test_partition_must_cover_rows(self, base):
        """Should reject a partition that does not match n."""
        from mvpreg.models.matvar_dist import RowPartition, mn_row_marginal

        with pytest.raises(ValueError, match="does not cover"):
            mn_row_marginal(base, RowPartition(n1=1, n2=1))
