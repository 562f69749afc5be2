"""Tests for the opinion algebra: exact examples, oracles, and properties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sle.opinions import (
    ConstraintError,
    DegenerateFusionError,
    DirichletParams,
    DogmaticOpinionError,
    Opinion,
    ReliabilityScore,
    cumulative_fuse,
    digamma,
    dirichlet_kl,
    dirichlet_mode,
    from_dirichlet,
    fuse_many,
    lgamma,
    opinion_new,
    project_probability,
    smooth,
    to_dirichlet,
    trigamma,
    trust_discount,
    uniform_base_rate,
    vacuous_opinion,
)

EULER_GAMMA = 0.57721566490153286061


def random_opinion(rng, k=None, min_u=1e-6):
    """A random valid opinion with uniform base rate and u >= min_u."""
    k = k or rng.integers(2, 6)
    u = rng.uniform(min_u, 1.0)
    raw = rng.dirichlet(np.ones(k))
    b = (1.0 - u) * raw
    return opinion_new(b, 1.0 - b.sum(), uniform_base_rate(k))


class TestOpinionConstruction:
    def test_valid(self):
        op = opinion_new([0.8, 0.1], 0.1, [0.5, 0.5])
        assert op.k == 2
        assert op.uncertainty == pytest.approx(0.1)

    def test_additivity_violation(self):
        with pytest.raises(ConstraintError, match="additivity"):
            opinion_new([0.8, 0.3], 0.1, [0.5, 0.5])

    def test_vacuous(self):
        op = opinion_new([0.0, 0.0], 1.0, [0.5, 0.5])
        assert op.is_vacuous
        assert vacuous_opinion(2).uncertainty == 1.0

    def test_rejects_k1(self):
        with pytest.raises(ConstraintError):
            opinion_new([0.5], 0.5, [1.0])

    def test_rejects_bad_base_rate(self):
        with pytest.raises(ConstraintError):
            opinion_new([0.5, 0.3], 0.2, [0.9, 0.9])

    def test_immutable(self):
        op = opinion_new([0.5, 0.3], 0.2, [0.5, 0.5])
        with pytest.raises(ValueError):
            op.belief[0] = 0.0


class TestDirichletMapping:
    def test_exact_example(self):
        op = opinion_new([0.5, 0.25], 0.25, [0.5, 0.5])
        np.testing.assert_allclose(to_dirichlet(op).alpha, [5.0, 3.0])

    def test_vacuous_is_flat(self):
        np.testing.assert_allclose(to_dirichlet(vacuous_opinion(2)).alpha, [1.0, 1.0])

    def test_sharp_example(self):
        op = opinion_new([0.9, 0.05], 0.05, [0.5, 0.5])
        np.testing.assert_allclose(to_dirichlet(op).alpha, [37.0, 3.0])

    def test_dogmatic_rejected(self):
        op = opinion_new([1.0, 0.0], 0.0, [0.5, 0.5])
        with pytest.raises(DogmaticOpinionError, match="smooth"):
            to_dirichlet(op)

    def test_inverse_example(self):
        op = from_dirichlet(DirichletParams([5.0, 3.0]))
        np.testing.assert_allclose(op.belief, [0.5, 0.25], atol=1e-12)
        assert op.uncertainty == pytest.approx(0.25, abs=1e-12)

    def test_inverse_flat_is_vacuous(self):
        op = from_dirichlet(DirichletParams([1.0, 1.0]))
        assert op.uncertainty == pytest.approx(1.0, abs=1e-12)

    def test_inverse_domain_error(self):
        with pytest.raises(ConstraintError, match="negative"):
            from_dirichlet(DirichletParams([0.5, 1.0]))

    def test_alpha_positive_required(self):
        with pytest.raises(ConstraintError):
            DirichletParams([1.0, 0.0])


class TestProjection:
    def test_example(self):
        op = opinion_new([0.5, 0.25], 0.25, [0.5, 0.5])
        np.testing.assert_allclose(project_probability(op), [0.625, 0.375])

    def test_dogmatic_projects_to_itself(self):
        op = opinion_new([1.0, 0.0], 0.0, [0.5, 0.5])
        np.testing.assert_allclose(project_probability(op), [1.0, 0.0])

    def test_vacuous_projects_to_base_rate(self):
        np.testing.assert_allclose(project_probability(vacuous_opinion(2)), [0.5, 0.5])


class TestFusion:
    def test_exact_rational_example(self):
        m = opinion_new([0.6, 0.2], 0.2, [0.5, 0.5])
        q = opinion_new([0.2, 0.6], 0.2, [0.5, 0.5])
        fused = cumulative_fuse(m, q)
        np.testing.assert_allclose(fused.belief, [4 / 9, 4 / 9], atol=1e-12)
        assert fused.uncertainty == pytest.approx(1 / 9, abs=1e-12)

    def test_vacuous_neutral_exact(self):
        op = opinion_new([0.6, 0.2], 0.2, [0.5, 0.5])
        fused = cumulative_fuse(op, vacuous_opinion(2))
        assert np.array_equal(fused.belief, op.belief)
        assert fused.uncertainty == op.uncertainty

    def test_two_dogmatic_error(self):
        d = opinion_new([1.0, 0.0], 0.0, [0.5, 0.5])
        with pytest.raises(DegenerateFusionError):
            cumulative_fuse(d, d)

    def test_frame_mismatch(self):
        with pytest.raises(ConstraintError, match="frame"):
            cumulative_fuse(vacuous_opinion(2), vacuous_opinion(3))

    def test_fuse_many_single(self):
        op = opinion_new([0.6, 0.2], 0.2, [0.5, 0.5])
        assert fuse_many([op]) is op

    def test_fuse_many_vacuous_absorbed(self):
        op = opinion_new([0.6, 0.2], 0.2, [0.5, 0.5])
        fused = fuse_many([op, vacuous_opinion(2), vacuous_opinion(2)])
        assert np.array_equal(fused.belief, op.belief)

    def test_fuse_many_empty(self):
        with pytest.raises(ConstraintError, match="empty"):
            fuse_many([])

    def test_uncertainty_strictly_decreasing_over_copies(self):
        op = opinion_new([0.45, 0.45], 0.1, [0.5, 0.5])
        fused = op
        last_u = op.uncertainty
        for _ in range(9):
            fused = cumulative_fuse(fused, op)
            assert fused.uncertainty < last_u
            last_u = fused.uncertainty
        assert last_u < 0.1


class TestTrustDiscount:
    def test_example(self):
        op = opinion_new([0.8, 0.1], 0.1, [0.5, 0.5])
        out = trust_discount(op, 0.5)
        np.testing.assert_allclose(out.belief, [0.4, 0.05])
        assert out.uncertainty == pytest.approx(0.55)

    def test_full_trust_identity(self):
        op = opinion_new([0.8, 0.1], 0.1, [0.5, 0.5])
        out = trust_discount(op, 1.0)
        np.testing.assert_allclose(out.belief, op.belief)
        assert out.uncertainty == pytest.approx(op.uncertainty)

    def test_zero_trust_vacuous(self):
        op = opinion_new([0.8, 0.1], 0.1, [0.5, 0.5])
        out = trust_discount(op, ReliabilityScore(0.0))
        assert out.is_vacuous

    def test_invalid_trust(self):
        with pytest.raises(ConstraintError):
            trust_discount(vacuous_opinion(2), 1.5)


class TestSmooth:
    def test_dogmatic_example(self):
        op = opinion_new([1.0, 0.0], 0.0, [0.5, 0.5])
        out = smooth(op, 0.01)
        np.testing.assert_allclose(out.belief, [0.99, 0.0])
        assert out.uncertainty == pytest.approx(0.01)

    def test_zero_epsilon_rejected(self):
        op = opinion_new([1.0, 0.0], 0.0, [0.5, 0.5])
        with pytest.raises(ConstraintError, match="epsilon"):
            smooth(op, 0.0)

    def test_smoothed_accepted_by_to_dirichlet(self):
        op = smooth(opinion_new([1.0, 0.0], 0.0, [0.5, 0.5]), 1e-3)
        to_dirichlet(op)  # must not raise

    def test_proportional_rule(self):
        op = opinion_new([0.6, 0.3], 0.1, [0.5, 0.5])
        out = smooth(op, 0.09)
        np.testing.assert_allclose(out.belief, [0.6 * 0.9, 0.3 * 0.9])
        assert out.uncertainty == pytest.approx(0.19)


class TestDirichletKL:
    def test_self_divergence_zero(self):
        p = DirichletParams([2.0, 3.0, 4.0])
        assert dirichlet_kl(p, p) == pytest.approx(0.0, abs=1e-12)

    def test_monte_carlo_oracle(self):
        # independent oracle: sample from Dir(p), average log-density ratio
        p = np.array([2.0, 2.0])
        q = np.array([1.0, 1.0])
        rng = np.random.default_rng(42)
        n = 10**6
        x = rng.dirichlet(p, size=n)
        from scipy.special import gammaln
        def logpdf(alpha):
            return ((alpha - 1) * np.log(x)).sum(axis=1) + gammaln(alpha.sum()) - gammaln(alpha).sum()
        ratio = logpdf(p) - logpdf(q)
        est, se = ratio.mean(), ratio.std(ddof=1) / np.sqrt(n)
        closed = dirichlet_kl(DirichletParams(p), DirichletParams(q))
        assert abs(closed - est) < 3 * se

    def test_index_swap_symmetry(self):
        a = dirichlet_kl(DirichletParams([5.0, 3.0]), DirichletParams([3.0, 5.0]))
        b = dirichlet_kl(DirichletParams([3.0, 5.0]), DirichletParams([5.0, 3.0]))
        assert a == pytest.approx(b, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ConstraintError):
            dirichlet_kl(DirichletParams([1.0, 1.0]), DirichletParams([1.0, 1.0, 1.0]))


class TestDirichletMode:
    def test_interior_mode(self):
        np.testing.assert_allclose(dirichlet_mode(DirichletParams([5.0, 3.0])),
                                   [2 / 3, 1 / 3])

    def test_flat_falls_back_to_mean(self):
        np.testing.assert_allclose(dirichlet_mode(DirichletParams([1.0, 1.0])),
                                   [0.5, 0.5])

    def test_symmetric(self):
        np.testing.assert_allclose(dirichlet_mode(DirichletParams([10.0, 10.0])),
                                   [0.5, 0.5])


class TestSpecialFunctions:
    def test_lgamma_at_one(self):
        assert lgamma(1.0) == pytest.approx(0.0, abs=1e-14)

    def test_lgamma_half(self):
        assert lgamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-12)

    def test_digamma_one_is_minus_euler(self):
        assert digamma(1.0) == pytest.approx(-EULER_GAMMA, rel=1e-12)

    def test_digamma_series_oracle(self):
        # psi(1) = -gamma via the series  psi(x+1) = -gamma + sum x/(n(n+x))
        n = np.arange(1, 2_000_001, dtype=np.float64)
        x = 1.5
        series = -EULER_GAMMA + (x / (n * (n + x))).sum()
        assert digamma(1.0 + x) == pytest.approx(series, abs=1e-6)

    def test_domain_errors(self):
        for fn in (lgamma, digamma, trigamma):
            with pytest.raises(ConstraintError):
                fn(0.0)
            with pytest.raises(ConstraintError):
                fn(-1.0)

    @pytest.mark.parametrize("fn,name", [(lgamma, "loggamma"),
                                         (digamma, "digamma"),
                                         (trigamma, "trigamma")])
    def test_accuracy_against_mpmath(self, fn, name):
        import mpmath
        mp_fn = {"loggamma": mpmath.loggamma, "digamma": mpmath.digamma,
                 "trigamma": lambda x: mpmath.polygamma(1, x)}[name]
        for x in np.logspace(-3, 3, 61):
            ref = float(mp_fn(mpmath.mpf(float(x))))
            got = fn(float(x))
            assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref)), (name, x)


# --------------------------------------------------------------------------
# Randomized invariants.
# --------------------------------------------------------------------------

op_strategy = st.builds(
    lambda k, u, raw: opinion_new(
        (1.0 - u) * np.array(raw[:k]) / max(sum(raw[:k]), 1e-12),
        1.0 - (1.0 - u) * sum(np.array(raw[:k]) / max(sum(raw[:k]), 1e-12)),
        uniform_base_rate(k),
    ),
    k=st.integers(2, 5),
    u=st.floats(1e-4, 1.0 - 1e-9),
    raw=st.lists(st.floats(1e-3, 1.0), min_size=5, max_size=5),
)


class TestInvariants:
    @given(op_strategy)
    def test_additivity(self, op):
        assert abs(op.uncertainty + op.belief.sum() - 1.0) <= 1e-9

    @given(op_strategy, op_strategy)
    @settings(max_examples=200)
    def test_fusion_commutative(self, x, y):
        if x.k != y.k:
            return
        f1 = cumulative_fuse(x, y)
        f2 = cumulative_fuse(y, x)
        np.testing.assert_allclose(f1.belief, f2.belief, atol=1e-9)
        assert abs(f1.uncertainty - f2.uncertainty) <= 1e-9

    @given(op_strategy, op_strategy)
    @settings(max_examples=200)
    def test_fused_uncertainty_bounded(self, x, y):
        if x.k != y.k:
            return
        fused = cumulative_fuse(x, y)
        assert fused.uncertainty <= min(x.uncertainty, y.uncertainty) + 1e-12
        if x.uncertainty < 1.0 and y.uncertainty < 1.0:
            assert fused.uncertainty < min(x.uncertainty, y.uncertainty) + 1e-12

    @given(op_strategy)
    def test_round_trip(self, op):
        back = from_dirichlet(to_dirichlet(op), op.base_rate)
        np.testing.assert_allclose(back.belief, op.belief, atol=1e-9)
        assert abs(back.uncertainty - op.uncertainty) <= 1e-9

    @given(op_strategy, st.floats(0.0, 1.0))
    def test_discount_raises_uncertainty(self, op, trust):
        out = trust_discount(op, trust)
        assert out.uncertainty >= op.uncertainty - 1e-12
        if trust == 1.0:
            assert out.uncertainty == pytest.approx(op.uncertainty, abs=1e-12)

    @given(op_strategy)
    def test_dirichlet_mean_identity(self, op):
        # mean_k = (2 b_k + K u a_k) / (2 (1 - u) + K u); for K = 2 this
        # coincides with the projected probability b + u a.
        alpha = to_dirichlet(op).alpha
        u = op.uncertainty
        expect = (2 * op.belief + op.k * u * op.base_rate) / (2 * (1 - u) + op.k * u)
        np.testing.assert_allclose(alpha / alpha.sum(), expect, atol=1e-9)
        if op.k == 2:
            np.testing.assert_allclose(alpha / alpha.sum(),
                                       project_probability(op), atol=1e-9)

    def test_kl_nonnegative_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            k = rng.integers(2, 6)
            p = DirichletParams(rng.uniform(0.2, 10.0, size=k))
            q = DirichletParams(rng.uniform(0.2, 10.0, size=k))
            kl = dirichlet_kl(p, q)
            assert kl >= 0.0
            assert dirichlet_kl(p, p) <= 1e-9
