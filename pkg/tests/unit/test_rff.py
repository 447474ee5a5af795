"""Unit tests for the random Fourier feature factorization."""

import numpy as np
import pytest

from skillbasis.exceptions import ConfigurationError, ShapeMismatchError
from skillbasis.rff import quadratic_potential_factors, rff_expand


class TestRffExpand:
    """Unit tests for rff_expand."""

    def test_estimates_exponential_kernel(self, rng):
        """Test that many frequencies approximate exp(psi^T nu)."""
        psi = 0.3 * rng.standard_normal((3, 2))
        nu = 0.3 * rng.standard_normal((4, 2))
        expansion = rff_expand(psi, nu, M=50_000, seed=0)
        np.testing.assert_allclose(expansion.kernel_estimate, np.exp(psi @ nu.T), rtol=0.05)

    def test_unit_norm_pairs(self, rng):
        """Test 100 unit-norm pairs with psi^T nu = c in [0, 0.9] at M = 20,000 within 5%."""
        g, n = 8, 100
        psi = rng.standard_normal((n, g))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        other = rng.standard_normal((n, g))
        other -= np.sum(other * psi, axis=1, keepdims=True) * psi
        other /= np.linalg.norm(other, axis=1, keepdims=True)
        c = rng.uniform(0.0, 0.9, size=(n, 1))
        nu = c * psi + np.sqrt(1.0 - c**2) * other
        expansion = rff_expand(psi, nu, M=20_000, seed=2)
        estimate = np.diag(expansion.kernel_estimate)
        np.testing.assert_allclose(estimate, np.exp(c[:, 0]), rtol=0.05)

    def test_zero_distance(self, rng):
        """Test that psi = nu estimates exp(|psi|^2) exactly, whatever M."""
        psi = 0.5 * rng.standard_normal((4, 3))
        expansion = rff_expand(psi, psi, M=3, seed=8)
        np.testing.assert_allclose(
            np.diag(expansion.kernel_estimate), np.exp(np.sum(psi * psi, axis=1))
        )

    def test_variance_shrinks_with_frequencies(self):
        """Test that quadrupling M cuts the estimator variance to at most 0.3 of its value."""
        psi = np.array([[1.0, 0.0, 0.0]])
        nu = np.array([[0.3, np.sqrt(1.0 - 0.09), 0.0]])
        repeats = 2000
        small = [rff_expand(psi, nu, 1000, seed).kernel_estimate[0, 0] for seed in range(repeats)]
        large = [
            rff_expand(psi, nu, 4000, seed).kernel_estimate[0, 0]
            for seed in range(repeats, 2 * repeats)
        ]
        assert np.var(large, ddof=1) <= 0.3 * np.var(small, ddof=1)

    def test_single_frequency_is_unbiased(self):
        """Test that single-frequency estimates average to the many-frequency estimate."""
        psi = np.array([[0.6, 0.0]])
        nu = np.array([[0.2, 0.5]])
        singles = np.array(
            [rff_expand(psi, nu, 1, seed).kernel_estimate[0, 0] for seed in range(10_000)]
        )
        pooled = rff_expand(psi, nu, 10_000, seed=10_000).kernel_estimate[0, 0]
        standard_error = singles.std(ddof=1) / np.sqrt(singles.size)
        assert abs(singles.mean() - pooled) <= 3.0 * np.sqrt(2.0) * standard_error

    def test_feature_shapes(self, rng):
        """Test that each side gets a cosine and a sine block."""
        expansion = rff_expand(rng.standard_normal((3, 2)), rng.standard_normal((5, 2)), 7, 1)
        assert expansion.phi_omega.shape == (3, 14)
        assert expansion.mu_omega.shape == (5, 14)
        assert expansion.kernel_estimate.shape == (3, 5)

    def test_seeded(self, rng):
        """Test that the frequency draw depends only on the seed."""
        psi, nu = rng.standard_normal((2, 3)), rng.standard_normal((2, 3))
        a = rff_expand(psi, nu, 16, seed=4).kernel_estimate
        b = rff_expand(psi, nu, 16, seed=4).kernel_estimate
        c = rff_expand(psi, nu, 16, seed=5).kernel_estimate
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_invalid_inputs(self, rng):
        """Test column and frequency checks."""
        with pytest.raises(ShapeMismatchError):
            rff_expand(np.ones((2, 3)), np.ones((2, 2)), 4, 0)
        with pytest.raises(ConfigurationError, match="M must"):
            rff_expand(np.ones((2, 3)), np.ones((2, 3)), 0, 0)


class TestQuadraticPotential:
    """Unit tests for the three-factor identity."""

    def test_factors_multiply_to_kernel(self, rng):
        """Test that the factors multiply to exp(psi^T nu)."""
        psi, nu = rng.standard_normal(3), rng.standard_normal(3)
        left, middle, right = quadratic_potential_factors(psi, nu)
        assert left * middle * right == pytest.approx(np.exp(psi @ nu))
        assert 0.0 < middle <= 1.0
