"""Tests for the synthetic crowd-annotation generator."""

import math

import numpy as np
import pytest

from sle.metrics import jsd
from sle.opinions import ConstraintError
from sle.synth import (
    SyntheticConfig,
    generate,
    permute_label,
    recalibrate,
    sample_profile,
    simplex_grid,
)


class TestSimplexGrid:
    def test_k2_resolution4(self):
        got = simplex_grid(2, 4)
        expect = [[0.0, 1.0], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1.0, 0.0]]
        np.testing.assert_allclose(sorted(map(tuple, got)), expect)

    def test_k3_resolution1_vertices(self):
        got = simplex_grid(3, 1)
        assert got.shape == (3, 3)
        np.testing.assert_allclose(got.sum(axis=1), 1.0)
        assert sorted(got.max(axis=1)) == [1.0, 1.0, 1.0]

    def test_count_matches_combinatorial_oracle(self):
        for k, res in [(5, 6), (3, 4), (4, 2), (2, 9)]:
            assert len(simplex_grid(k, res)) == math.comb(res + k - 1, k - 1)

    def test_rows_sum_to_one(self):
        grid = simplex_grid(5, 6)
        np.testing.assert_allclose(grid.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(grid >= 0)

    def test_no_duplicates(self):
        grid = simplex_grid(4, 5)
        assert len({tuple(row) for row in grid}) == len(grid)

    def test_invalid_resolution(self):
        with pytest.raises(ConstraintError):
            simplex_grid(3, 0)


class TestSampleProfile:
    def test_degenerate_none_set(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            c, r = sample_profile((10.0, 0.0), (10.0, 0.0), rng)
            assert (c, r) == (1.0, 1.0)

    def test_zero_alpha_is_point_mass_at_zero(self):
        rng = np.random.default_rng(0)
        assert sample_profile((0.0, 5.0), (0.0, 5.0), rng) == (0.0, 0.0)

    def test_beta_mean_oracle(self):
        rng = np.random.default_rng(1)
        draws = [sample_profile((10.0, 10.0), (1.0, 10.0), rng) for _ in range(20000)]
        c = np.array([d[0] for d in draws])
        r = np.array([d[1] for d in draws])
        assert c.mean() == pytest.approx(0.5, abs=0.005)   # Beta(10,10) mean
        assert r.mean() == pytest.approx(1 / 11, abs=0.005)  # Beta(1,10) mean

    def test_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            c, r = sample_profile((1.0, 1.0), (2.0, 3.0), rng)
            assert 0.0 <= c <= 1.0 and 0.0 <= r <= 1.0


class TestPermuteLabel:
    def test_full_reliability_is_identity(self):
        rng = np.random.default_rng(3)
        y = np.array([0.5, 0.3, 0.2])
        for _ in range(50):
            np.testing.assert_array_equal(permute_label(y, 1.0, rng), y)

    def test_zero_reliability_always_permutes(self):
        rng = np.random.default_rng(4)
        y = np.array([1.0, 0.0, 0.0])
        # with r = 0 the mass lands on each coordinate with frequency 1/3
        n = 100_000
        hits = np.zeros(3)
        for _ in range(n):
            hits[np.argmax(permute_label(y, 0.0, rng))] += 1
        np.testing.assert_allclose(hits / n, [1 / 3] * 3, atol=0.01)

    def test_permutation_preserves_multiset(self):
        rng = np.random.default_rng(5)
        y = np.array([0.5, 0.3, 0.2])
        for _ in range(100):
            out = permute_label(y, 0.2, rng)
            assert sorted(out) == sorted(y)

    def test_uniform_label_invariant(self):
        rng = np.random.default_rng(6)
        y = np.full(4, 0.25)
        np.testing.assert_array_equal(permute_label(y, 0.0, rng), y)

    def test_literal_flag_inverts_probability(self):
        y = np.array([1.0, 0.0])
        rng = np.random.default_rng(7)
        # literal=True with r = 0 never permutes
        for _ in range(50):
            np.testing.assert_array_equal(permute_label(y, 0.0, rng, literal=True), y)

    def test_intermediate_rate_frequency(self):
        rng = np.random.default_rng(8)
        y = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        n = 50_000
        changed = sum(permute_label(y, 0.7, rng)[0] != 1.0 for _ in range(n))
        # permutes w.p. 0.3; a permutation of a one-hot K=5 label moves the
        # mass off coordinate 0 w.p. 4/5
        assert changed / n == pytest.approx(0.3 * 0.8, abs=0.01)


class TestRecalibrate:
    def test_identity_at_full_confidence(self):
        y = np.array([0.7, 0.3])
        np.testing.assert_array_equal(recalibrate(y, 1.0), y)

    def test_uniform_at_zero_confidence(self):
        np.testing.assert_array_equal(recalibrate(np.array([0.7, 0.3]), 0.0),
                                      [0.5, 0.5])

    def test_hand_computed_example(self):
        out = recalibrate(np.array([0.9, 0.1]), 0.5)
        expect = np.array([0.9, 0.1]) ** 0.5
        np.testing.assert_allclose(out, expect / expect.sum())
        assert out[0] == pytest.approx(0.75, abs=0.01)

    def test_argmax_preserved(self):
        y = np.array([0.1, 0.6, 0.3])
        for c in (0.01, 0.3, 0.7, 0.99):
            assert np.argmax(recalibrate(y, c)) == 1

    def test_monotone_flattening(self):
        y = np.array([0.8, 0.15, 0.05])
        last = 1.0
        for c in (0.9, 0.6, 0.3, 0.1):
            top = recalibrate(y, c)[0]
            assert top < last
            last = top

    def test_zero_components_clamped(self):
        out = recalibrate(np.array([1.0, 0.0]), 0.5)
        assert np.all(np.isfinite(out))
        assert out.sum() == pytest.approx(1.0)


class TestGenerate:
    def test_none_set_reproduces_truth_exactly(self):
        config = SyntheticConfig(k=3, m=4, grid_resolution=2,
                                 confidence_beta=(10.0, 0.0),
                                 reliability_beta=(10.0, 0.0), seed=11)
        ds = generate(config)
        assert len(ds.annotations) == 4 * len(ds.true_labels)
        for rec in ds.annotations:
            np.testing.assert_array_equal(rec.label, ds.true_labels[rec.item_id])
            assert rec.confidence == 1.0 and rec.reliability == 1.0

    def test_deterministic_given_seed(self):
        config = SyntheticConfig(k=4, m=3, grid_resolution=3,
                                 confidence_beta=(10.0, 10.0),
                                 reliability_beta=(1.0, 10.0), seed=99)
        a, b = generate(config), generate(config)
        assert a.annotator_profiles == b.annotator_profiles
        for ra, rb in zip(a.annotations, b.annotations):
            assert (ra.item_id, ra.annotator_id) == (rb.item_id, rb.annotator_id)
            np.testing.assert_array_equal(ra.label, rb.label)

    def test_seed_changes_output(self):
        base = dict(k=4, m=3, grid_resolution=3,
                    confidence_beta=(10.0, 10.0), reliability_beta=(10.0, 10.0))
        a = generate(SyntheticConfig(seed=1, **base))
        b = generate(SyntheticConfig(seed=2, **base))
        assert a.annotator_profiles != b.annotator_profiles

    def test_labels_are_valid_distributions(self):
        config = SyntheticConfig(k=5, m=2, grid_resolution=4,
                                 confidence_beta=(1.0, 10.0),
                                 reliability_beta=(10.0, 10.0), seed=5)
        for rec in generate(config).annotations:
            label = np.asarray(rec.label)
            assert label.shape == (5,)
            assert np.all(label >= 0)
            assert label.sum() == pytest.approx(1.0, abs=1e-9)

    def test_profile_fixed_within_run(self):
        config = SyntheticConfig(k=3, m=5, grid_resolution=3,
                                 confidence_beta=(10.0, 10.0),
                                 reliability_beta=(10.0, 10.0), seed=13)
        ds = generate(config)
        for rec in ds.annotations:
            c, r = ds.annotator_profiles[rec.annotator_id]
            assert rec.confidence == c and rec.reliability == r

    def test_corruption_monotone_across_sets(self):
        # mean JSD(annotation, truth) must increase none -> low -> medium -> high
        sets = [(10.0, 0.0), (10.0, 1.0), (10.0, 10.0), (1.0, 10.0)]
        means = []
        for params in sets:
            config = SyntheticConfig(k=5, m=10, grid_resolution=4,
                                     confidence_beta=params,
                                     reliability_beta=params, seed=21)
            ds = generate(config)
            means.append(np.mean([jsd(rec.label, ds.true_labels[rec.item_id])
                                  for rec in ds.annotations]))
        assert means[0] == pytest.approx(0.0, abs=1e-12)
        assert means[0] < means[1] < means[2] < means[3]

    def test_invalid_configs_rejected(self):
        with pytest.raises(ConstraintError):
            SyntheticConfig(k=1)
        with pytest.raises(ConstraintError):
            SyntheticConfig(m=0)
        with pytest.raises(ConstraintError):
            SyntheticConfig(confidence_beta=(0.0, 0.0))
        with pytest.raises(ConstraintError):
            SyntheticConfig(reliability_beta=(-1.0, 2.0))
