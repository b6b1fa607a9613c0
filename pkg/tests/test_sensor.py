from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditnav import (
    FovSpec,
    PromptEnsemble,
    RelevanceObservation,
    ScoreSample,
    SemanticField,
    VisibleCell,
    build_observation,
    cosine_similarity,
    ensemble_stats,
    observe_synthetic,
    per_ray_variance,
    qq_correlation,
    viewpoint_confidence,
)

FOV = math.radians(79.0)


class TestPromptEnsemble:
    def test_default_ensemble_has_seven_distinct_prompts(self):
        ensemble = PromptEnsemble()
        rendered = ensemble.for_target("cup")
        assert ensemble.size == 7
        assert len(set(rendered)) == 7
        assert all("cup" in p for p in rendered if "{target}" not in p)

    def test_rejects_tiny_ensembles_and_collisions(self):
        with pytest.raises(ValueError):
            PromptEnsemble(prompts=("only one {target}",))
        clashing = PromptEnsemble(prompts=("{target} here", "cup here"))
        with pytest.raises(ValueError):
            clashing.for_target("cup")


class TestScoreSample:
    def test_range_validation(self):
        with pytest.raises(ValueError):
            ScoreSample(scores=(0.2, 1.5))
        with pytest.raises(ValueError):
            ScoreSample(scores=())


class TestCosineSimilarity:
    def test_identity_case(self):
        assert cosine_similarity((1.0, 0.0), (1.0, 0.0)) == 1.0

    def test_orthogonality(self):
        assert cosine_similarity((1.0, 0.0), (0.0, 1.0)) == 0.0

    def test_closed_form_sqrt_half(self):
        assert cosine_similarity((1.0, 1.0), (1.0, 0.0)) == pytest.approx(
            math.sqrt(2.0) / 2.0, abs=1e-9
        )

    def test_zero_vector_and_dimension_mismatch_are_errors(self):
        with pytest.raises(ValueError):
            cosine_similarity((0.0, 0.0), (1.0, 0.0))
        with pytest.raises(ValueError):
            cosine_similarity((1.0, 0.0), (1.0, 0.0, 0.0))


class TestEnsembleStats:
    def test_constant_ensemble(self):
        mean, var = ensemble_stats(ScoreSample(scores=(0.4, 0.4, 0.4)))
        assert mean == pytest.approx(0.4)
        assert var == pytest.approx(0.0, abs=1e-15)

    def test_two_point_arithmetic(self):
        mean, var = ensemble_stats(ScoreSample(scores=(0.2, 0.6)))
        assert mean == pytest.approx(0.4)
        assert var == pytest.approx(0.04)

    def test_fixed_seed_draw_statistics(self):
        # Frozen from a reference draw: default_rng(1234).normal(0.5, 0.01, 100)
        rng = np.random.default_rng(1234)
        scores = tuple(float(s) for s in rng.normal(0.5, 0.01, 100))
        mean, var = ensemble_stats(ScoreSample(scores=scores))
        assert abs(mean - 0.5) < 0.005
        assert 0.5e-4 < var < 1.5e-4

    def test_single_score_is_an_error(self):
        with pytest.raises(ValueError):
            ensemble_stats(ScoreSample(scores=(0.5,)))

    @given(
        st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=2, max_size=40)
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_two_pass_reference(self, values):
        mean, var = ensemble_stats(ScoreSample(scores=tuple(values)))
        ref_mean = sum(values) / len(values)
        ref_var = sum((v - ref_mean) ** 2 for v in values) / len(values)
        assert mean == pytest.approx(ref_mean, abs=1e-12)
        assert var == pytest.approx(ref_var, abs=1e-12)


class TestViewpointConfidence:
    def test_optical_axis_is_full_confidence(self):
        for convention in ("vlfm", "literal"):
            assert viewpoint_confidence(0.0, FOV, convention) == pytest.approx(1.0)

    def test_fov_edge_under_default_convention(self):
        assert viewpoint_confidence(FOV / 2, FOV, "vlfm") == pytest.approx(0.0, abs=1e-12)

    def test_quarter_fov_split_between_conventions(self):
        assert viewpoint_confidence(FOV / 4, FOV, "literal") == pytest.approx(0.0, abs=1e-12)
        assert viewpoint_confidence(FOV / 4, FOV, "vlfm") == pytest.approx(0.5, abs=1e-12)

    def test_out_of_fov_and_unknown_convention_errors(self):
        with pytest.raises(ValueError):
            viewpoint_confidence(FOV, FOV)
        with pytest.raises(ValueError):
            viewpoint_confidence(0.0, FOV, "bogus")

    def test_even_and_continuous(self):
        bearings = np.linspace(-FOV / 2, FOV / 2, 401)
        for convention in ("vlfm", "literal"):
            values = [viewpoint_confidence(float(b), FOV, convention) for b in bearings]
            mirrored = [viewpoint_confidence(float(-b), FOV, convention) for b in bearings]
            assert values == pytest.approx(mirrored, abs=1e-12)
            steps = np.abs(np.diff(values))
            assert steps.max() < 0.05  # no jumps at this sampling density


class TestPerRayVariance:
    def test_axis_keeps_ensemble_variance(self):
        assert per_ray_variance(0.04, 0.0, FOV) == pytest.approx(0.04)

    def test_fov_edge_adds_full_penalty(self):
        assert per_ray_variance(0.04, FOV / 2, FOV, "vlfm") == pytest.approx(1.04)

    def test_quarter_fov_penalty(self):
        assert per_ray_variance(0.0, FOV / 4, FOV, "vlfm") == pytest.approx(0.5)

    def test_never_below_ensemble_variance(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            var = float(rng.uniform(0.0, 0.5))
            bearing = float(rng.uniform(-FOV / 2, FOV / 2))
            for convention in ("vlfm", "literal"):
                assert per_ray_variance(var, bearing, FOV, convention) >= var


def _visible(cells_bearings):
    return [
        VisibleCell(cell=cell, bearing=bearing, range_m=1.0, terminal=False)
        for cell, bearing in cells_bearings
    ]


class TestObserveSynthetic:
    FOV_SPEC = FovSpec(horizontal_fov=FOV, max_range=5.0, ray_count=7)

    def test_noiseless_sensor(self):
        field = SemanticField(values=np.full((4, 4), 0.25))
        visible = _visible([((1, 1), 0.0), ((2, 1), 0.1)])
        sample, obs = observe_synthetic(field, visible, 5, 0.0, 42, self.FOV_SPEC)
        assert all(s == 0.25 for s in sample.scores)
        assert ensemble_stats(sample)[1] == pytest.approx(0.0, abs=1e-15)
        assert obs.mean == pytest.approx(0.25)

    def test_constant_field_gives_field_value(self):
        field = SemanticField(values=np.full((4, 4), 0.5))
        visible = _visible([((0, 0), -0.3), ((1, 0), 0.0), ((2, 0), 0.2)])
        sample, _ = observe_synthetic(field, visible, 4, 0.0, 0, self.FOV_SPEC)
        assert all(s == pytest.approx(0.5) for s in sample.scores)

    def test_hot_cell_weighted_mean(self):
        # One bright cell on the axis, dim flanks at quarter-FOV: weights
        # {0.5, 1.0, 0.5} make the view relevance 1 / 2.
        field_values = np.zeros((4, 4))
        field_values[1, 1] = 1.0
        field = SemanticField(values=field_values)
        visible = _visible([((0, 1), -FOV / 4), ((1, 1), 0.0), ((2, 1), FOV / 4)])
        sample, obs = observe_synthetic(field, visible, 3, 0.0, 0, self.FOV_SPEC)
        assert all(s == pytest.approx(0.5) for s in sample.scores)
        assert obs.mean == pytest.approx(0.5)

    def test_empty_visible_set_is_an_error(self):
        field = SemanticField(values=np.zeros((4, 4)))
        with pytest.raises(ValueError):
            observe_synthetic(field, [], 3, 0.0, 0, self.FOV_SPEC)

    def test_bit_reproducible_for_fixed_seed(self):
        field = SemanticField(values=np.full((4, 4), 0.3))
        visible = _visible([((1, 1), 0.0), ((2, 1), 0.15)])
        first = observe_synthetic(field, visible, 9, 0.1, 77, self.FOV_SPEC)
        second = observe_synthetic(field, visible, 9, 0.1, 77, self.FOV_SPEC)
        assert first[0] == second[0]
        assert first[1].mean == second[1].mean
        assert first[1].per_ray_variance == second[1].per_ray_variance

    def test_scores_are_clamped(self):
        field = SemanticField(values=np.full((4, 4), 1.0))
        visible = _visible([((1, 1), 0.0)])
        sample, _ = observe_synthetic(
            field, visible, 50, 0.5, 5, self.FOV_SPEC, prompt_biases=[0.8] * 50
        )
        assert max(sample.scores) <= 1.0
        assert min(sample.scores) >= -1.0


class TestBuildObservation:
    def test_variance_floor_injected(self):
        sample = ScoreSample(scores=(0.4, 0.4, 0.4))
        fov = FovSpec(horizontal_fov=FOV, max_range=5.0, ray_count=3)
        obs = build_observation(sample, [0.0, 0.2], fov)
        assert obs.ensemble_variance == pytest.approx(1e-6)
        assert obs.per_ray_variance[0.0] == pytest.approx(obs.ensemble_variance)

    def test_single_score_point_estimate(self):
        sample = ScoreSample(scores=(0.7,))
        fov = FovSpec(horizontal_fov=FOV, max_range=5.0, ray_count=3)
        obs = build_observation(sample, [0.0], fov)
        assert obs.mean == 0.7
        assert obs.ensemble_variance == pytest.approx(1e-6)

    def test_per_ray_dominates_ensemble_variance(self):
        sample = ScoreSample(scores=(0.2, 0.6, 0.1))
        fov = FovSpec(horizontal_fov=FOV, max_range=5.0, ray_count=3)
        obs = build_observation(sample, np.linspace(-FOV / 2, FOV / 2, 9), fov)
        for var in obs.per_ray_variance.values():
            assert var >= obs.ensemble_variance

    def test_invariant_enforced_at_construction(self):
        with pytest.raises(ValueError):
            RelevanceObservation(mean=0.5, ensemble_variance=0.2, per_ray_variance={0.0: 0.1})


class TestNormality:
    def test_large_sample_qq_correlation(self):
        rng = np.random.default_rng(2024)
        draws = rng.normal(0.5, 0.05, 10_000)
        assert qq_correlation(draws) >= 0.999

    def test_synthetic_scores_pass_normality_diagnostic(self):
        field = SemanticField(values=np.full((4, 4), 0.5))
        visible = _visible([((1, 1), 0.0)])
        fov = FovSpec(horizontal_fov=FOV, max_range=5.0, ray_count=3)
        sample, _ = observe_synthetic(field, visible, 10_000, 0.02, 31, fov)
        assert qq_correlation(sample.scores) >= 0.999

    def test_constant_input_is_degenerate(self):
        assert qq_correlation([0.5] * 100) == 0.0

    def test_too_few_values_is_an_error(self):
        with pytest.raises(ValueError):
            qq_correlation([0.1, 0.2])
