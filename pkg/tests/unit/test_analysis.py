"""Unit tests for post-hoc interpretation."""

import numpy as np
import pytest

from skillbasis.analysis import (
    compare_effective_dimension,
    effective_dimension,
    generic_basis,
    motion_field,
    motion_field_from_activations,
    pca_skills,
    regime_shift,
    sign_test,
)
from skillbasis.datasets import derive_dataset
from skillbasis.exceptions import ConfigurationError, DataError
from skillbasis.models import EffectiveDimension
from tests.fixtures.builders import small_energy_model, walking_recording


class TestPca:
    """Unit tests for pca_skills."""

    def test_components_and_ratios(self, rng):
        """Test orthonormal components and descending ratios."""
        phi = rng.standard_normal((12, 6))
        result = pca_skills(phi, n_pcs=3)
        np.testing.assert_allclose(result.components @ result.components.T, np.eye(3), atol=1e-12)
        ratios = result.explained_variance_ratio
        assert np.all(np.diff(ratios) <= 0)
        assert 0.0 < ratios.sum() <= 1.0
        assert result.projected_skills.shape == (6, 3)
        assert not result.degenerate

    def test_all_components_explain_everything(self, rng):
        """Test that the full set of components explains all variance."""
        phi = rng.standard_normal((5, 4))
        result = pca_skills(phi, n_pcs=4, axis="pairs")
        assert result.explained_variance_ratio.sum() == pytest.approx(1.0)
        reconstructed = result.projected_skills @ result.components + result.mean
        np.testing.assert_allclose(reconstructed, phi, atol=1e-12)

    def test_sign_convention(self, rng):
        """Test that the largest entry of each component is positive."""
        result = pca_skills(rng.standard_normal((8, 5)), n_pcs=4)
        for row in result.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_zero_variance(self):
        """Test that identical skills give a degenerate result."""
        phi = np.tile(np.arange(4.0)[:, None], (1, 3))
        result = pca_skills(phi, n_pcs=2)
        assert result.degenerate
        assert np.all(result.explained_variance_ratio == 0.0)

    def test_degenerate_variance_gets_canonical_components(self):
        """Test that equal variances give coordinate components, whatever the rotation."""
        plane = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        c, s = np.cos(0.4), np.sin(0.4)
        for mixing in (np.eye(2), np.array([[c, -s], [s, c]])):
            observations = np.hstack([plane @ mixing, np.zeros((4, 2))])
            result = pca_skills(observations.T, n_pcs=2)
            np.testing.assert_allclose(result.components, np.eye(4)[:2], atol=1e-10)
            np.testing.assert_allclose(result.explained_variance_ratio, [0.5, 0.5])

    @pytest.mark.parametrize("axis", ["skills", "pairs"])
    def test_observation_order_does_not_matter(self, rng, axis):
        """Test that permuting observations leaves components and ratios unchanged."""
        phi = rng.standard_normal((9, 7))
        order = rng.permutation(9 if axis == "pairs" else 7)
        shuffled = phi[order] if axis == "pairs" else phi[:, order]
        a = pca_skills(phi, n_pcs=4, axis=axis)
        b = pca_skills(shuffled, n_pcs=4, axis=axis)
        np.testing.assert_allclose(a.components, b.components, atol=1e-10)
        np.testing.assert_allclose(a.explained_variance_ratio, b.explained_variance_ratio)

    def test_invalid_arguments(self, rng):
        """Test axis and component count checks."""
        phi = rng.standard_normal((6, 3))
        with pytest.raises(ConfigurationError, match="axis"):
            pca_skills(phi, 2, axis="rows")
        with pytest.raises(ConfigurationError, match="n_pcs"):
            pca_skills(phi, 4)


class TestEffectiveDimension:
    """Unit tests for effective dimension and its comparison."""

    def test_pooled_threshold(self):
        """Test a hand-computed pooled count."""
        result = effective_dimension(np.array([[0.0, 0.0], [0.0, -4.0]]))
        assert result.counts.tolist() == [0, 1]
        np.testing.assert_allclose(result.threshold, 1.0 + np.sqrt(3.0))
        assert result.mean == 0.5
        assert result.median == 0.5

    def test_per_column_threshold(self):
        """Test that each column can use its own threshold."""
        skills = np.array([[10.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
        pooled = effective_dimension(skills)
        separate = effective_dimension(skills, pooled=False)
        assert pooled.counts.tolist() == [1, 0]
        assert separate.counts.tolist() == [1, 1]

    def test_scale_invariance(self, rng):
        """Test that rescaling all skills leaves the counts unchanged."""
        skills = rng.standard_normal((20, 5))
        base = effective_dimension(skills)
        for factor in (8.0, 0.25, -2.0):
            scaled = effective_dimension(factor * skills)
            np.testing.assert_array_equal(scaled.counts, base.counts)
            assert scaled.threshold == pytest.approx(abs(factor) * base.threshold)

    def test_generic_basis_keeps_the_span(self, rng):
        """Test that mixing is an orthogonal change of basis drawn from the generator."""
        skills = rng.standard_normal((10, 4))
        mixed = generic_basis(skills, np.random.default_rng(3))
        np.testing.assert_allclose(mixed @ mixed.T, skills @ skills.T, atol=1e-10)
        np.testing.assert_array_equal(mixed, generic_basis(skills, np.random.default_rng(3)))
        assert not np.allclose(mixed, skills)
        single = rng.standard_normal((10, 1))
        np.testing.assert_array_equal(generic_basis(single, np.random.default_rng(3)), single)

    def test_indicator_skills_get_sparser_after_pca(self, rng):
        """Test that PCA of mixed indicator skills lowers the mean effective dimension."""
        indicators = np.kron(np.eye(31), np.ones((3, 1)))
        mixed = generic_basis(indicators, rng)
        pre = effective_dimension(mixed)
        post = effective_dimension(pca_skills(mixed, 31).components.T)
        result = compare_effective_dimension(pre, post)
        assert result["decreased"]
        assert post.mean < 0.5 * pre.mean
        assert result["p_value"] < 0.01

    def test_empty_matrix(self):
        """Test that an empty matrix is a data error."""
        with pytest.raises(DataError):
            effective_dimension(np.zeros((0, 2)))

    def test_paired_comparison(self):
        """Test a decrease with a paired t statistic."""
        pre = EffectiveDimension(np.array([3, 4, 5]), np.zeros(3), 4.0, 4.0)
        post = EffectiveDimension(np.array([1, 2, 2]), np.zeros(3), 5 / 3, 2.0)
        result = compare_effective_dimension(pre, post)
        assert result["decreased"]
        assert result["mean_difference"] == pytest.approx(5 / 3 - 4.0)
        assert result["t_statistic"] < 0
        assert 0.0 < result["p_value"] < 1.0

    def test_unpaired_comparison(self):
        """Test that differently sized sides skip the test."""
        pre = EffectiveDimension(np.array([3, 4, 5]), np.zeros(3), 4.0, 4.0)
        post = EffectiveDimension(np.array([1, 2]), np.zeros(2), 1.5, 1.5)
        result = compare_effective_dimension(pre, post)
        assert result["t_statistic"] is None
        assert result["p_value"] is None

    def test_identical_counts(self):
        """Test that equal counts give no test statistic."""
        same = EffectiveDimension(np.array([2, 2]), np.zeros(2), 2.0, 2.0)
        result = compare_effective_dimension(same, same)
        assert not result["decreased"]
        assert result["t_statistic"] is None


class TestMotionField:
    """Unit tests for motion fields."""

    def test_top_rows_are_averaged(self):
        """Test averaging over the most activating rows."""
        data = derive_dataset(walking_recording(n_frames=6, n_parts=2))
        activations = np.array([[0.0], [5.0], [1.0], [4.0], [2.0]])
        field = motion_field_from_activations(activations, data, 0, top_k=2)
        np.testing.assert_allclose(field.mean_state, (data.states[1] + data.states[3]) / 2)
        np.testing.assert_allclose(field.mean_action, [1.0, 0.0, 1.0, 0.0])
        assert field.support_size == 2

    def test_range_checks(self):
        """Test the skill index and top_k checks."""
        data = derive_dataset(walking_recording())
        activations = np.zeros((len(data), 2))
        with pytest.raises(ConfigurationError, match="Skill index"):
            motion_field_from_activations(activations, data, 2, 1)
        with pytest.raises(ConfigurationError, match="top_k"):
            motion_field_from_activations(activations, data, 0, len(data) + 1)

    def test_from_model(self, rng):
        """Test that the model's skill activations rank the rows."""
        data = derive_dataset(walking_recording(n_frames=8))
        model = small_energy_model(rng, dim=4)
        field = motion_field(model, data, skill_index=1, top_k=3)
        order = np.argsort(-model.skill_features(data.states, data.actions)[:, 1], kind="stable")
        np.testing.assert_allclose(field.mean_state, data.states[order[:3]].mean(axis=0))


class TestTests:
    """Unit tests for the sign test and the regime shift."""

    def test_sign_test(self):
        """Test the binomial p-value and dropped zeros."""
        assert sign_test([1.0, 2.0, 0.0, 3.0, 4.0, 5.0]) == pytest.approx(0.5**5)
        assert sign_test([0.0, 0.0]) == 1.0
        assert sign_test([-1.0, -2.0]) == pytest.approx(1.0)

    def test_regime_shift(self):
        """Test a perfectly separated timeline."""
        u = np.array([[0.0, 0.0], [0.0, 0.0], [3.0, 4.0], [3.0, 4.0]])
        result = regime_shift(u, boundary=2)
        assert result["shift"] == pytest.approx(5.0)
        assert result["within_std"] == 0.0
        assert result["ratio"] == float("inf")

    def test_regime_shift_boundary(self):
        """Test that both sides must be non-empty."""
        with pytest.raises(ConfigurationError):
            regime_shift(np.zeros((3, 1)), boundary=3)
