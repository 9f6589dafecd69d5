"""Closed-form engine: worked values, identities and invariants."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from photon_gauntlet.analytic import (
    QVector,
    absorb_probability,
    all_k_detect,
    binomial_pmf,
    binomial_tail,
    bunched_count_distribution,
    bunched_detect_at_least,
    bunched_survivor_distribution,
    detect_probability_product,
    detect_probability_recurrent,
    inequality_report,
    m_of_k_distribution,
    reach_probability,
)

WORKED = QVector((0.5, 0.25), 0.1)

probs = st.floats(0.0, 1.0)
open_probs = st.floats(0.01, 0.99)
qvectors = st.builds(QVector, st.lists(probs, max_size=20).map(tuple), probs)


def flagging_survivors(qs, k):
    """Survivor law by flagging every photon at every shell individually.

    Exact rationals; a shell captures one photon iff at least one is
    flagged. Exponential in k, fine for tiny cases.
    """
    dist = {k: Fraction(1)}
    for q in map(Fraction, qs):
        nxt = {}
        for s, p in dist.items():
            for flags in itertools.product((0, 1), repeat=s):
                w = p
                for f in flags:
                    w *= q if f else 1 - q
                t = s - 1 if any(flags) else s
                nxt[t] = nxt.get(t, 0) + w
        dist = nxt
    return [dist.get(s, Fraction(0)) for s in range(k + 1)]


class TestSinglePhoton:
    def test_reach_base_case(self):
        assert reach_probability(WORKED, 1) == 1.0

    def test_reach_detector_surface(self):
        assert reach_probability(WORKED, 3) == 0.375

    def test_reach_empty(self):
        assert reach_probability(QVector((), 0.2), 1) == 1.0

    @pytest.mark.parametrize("index", [0, 4])
    def test_reach_out_of_range(self, index):
        with pytest.raises(IndexError):
            reach_probability(WORKED, index)

    def test_absorb(self):
        assert absorb_probability(WORKED, 1) == 0.5
        assert absorb_probability(WORKED, 2) == 0.125
        assert absorb_probability(QVector((0.0, 0.25), 0.1), 1) == 0.0
        with pytest.raises(IndexError):
            absorb_probability(WORKED, 3)

    def test_single_absorber_reduces_to_two_shell_form(self):
        qv = QVector((0.3,), 0.2)
        assert reach_probability(qv, 2) == pytest.approx(1 - absorb_probability(qv, 1), abs=1e-15)
        assert detect_probability_recurrent(qv) == pytest.approx((1 - 0.3) * 0.2, abs=1e-15)

    @pytest.mark.parametrize(
        "qv,expected",
        [
            (QVector((), 0.1), 0.1),
            (WORKED, 0.0375),
            (QVector((1.0,), 0.9), 0.0),
            (QVector((0.3,), 1.0), 0.7),
        ],
    )
    def test_detect_worked(self, qv, expected):
        assert detect_probability_recurrent(qv) == pytest.approx(expected, abs=1e-15)
        assert detect_probability_product(qv) == pytest.approx(expected, abs=1e-15)

    def test_recurrence_matches_product_on_random_vectors(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            qv = QVector(tuple(rng.random(rng.integers(0, 21))), rng.random())
            assert abs(detect_probability_recurrent(qv) - detect_probability_product(qv)) <= 1e-12

    @given(qvectors)
    def test_conservation(self, qv):
        a = qv.n_absorbers
        total = math.fsum(absorb_probability(qv, n) for n in range(1, a + 1)) + reach_probability(qv, a + 1)
        assert abs(total - 1.0) <= 1e-12

    @given(qvectors)
    def test_visibility_degradation(self, qv):
        p = detect_probability_recurrent(qv)
        if all(q == 0 for q in qv.absorber_qs):
            assert p == qv.detector_q
        else:
            assert p <= qv.detector_q

    @given(st.lists(open_probs, min_size=1, max_size=10), open_probs)
    def test_visibility_strict(self, qs, qd):
        assert detect_probability_recurrent(QVector(tuple(qs), qd)) < qd - 1e-12

    @given(st.lists(probs, min_size=1, max_size=10), probs, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, qs, qd, rnd):
        shuffled = list(qs)
        rnd.shuffle(shuffled)
        a = detect_probability_product(QVector(tuple(qs), qd))
        b = detect_probability_product(QVector(tuple(shuffled), qd))
        assert a == pytest.approx(b, abs=1e-15)

    @given(st.lists(probs, min_size=1, max_size=8), probs, st.data())
    def test_monotone_in_each_q(self, qs, qd, data):
        j = data.draw(st.integers(0, len(qs) - 1))
        bumped = list(qs)
        bumped[j] = data.draw(st.floats(qs[j], 1.0))
        assert detect_probability_product(QVector(tuple(bumped), qd)) <= detect_probability_product(
            QVector(tuple(qs), qd)
        ) + 1e-15

    def test_rejects_out_of_range_q(self):
        with pytest.raises(ValueError):
            QVector((1.2,), 0.5)
        with pytest.raises(ValueError):
            QVector((), -0.1)


class TestStreams:
    def test_all_k(self):
        assert all_k_detect(0.0375, 1) == 0.0375
        assert all_k_detect(0.0375, 2) == pytest.approx(0.00140625, abs=1e-17)
        assert all_k_detect(1.0, 7) == 1.0

    @pytest.mark.parametrize(
        "p,k,expected",
        [
            (0.0375, 2, (0.92640625, 0.0721875, 0.00140625)),
            (0.5, 2, (0.25, 0.5, 0.25)),
            (0.0, 5, (1, 0, 0, 0, 0, 0)),
        ],
    )
    def test_m_of_k_worked(self, p, k, expected):
        np.testing.assert_allclose(m_of_k_distribution(p, k).probabilities, expected, atol=1e-15)

    @given(probs, st.integers(1, 60))
    def test_m_of_k_sums_to_one(self, p, k):
        assert abs(math.fsum(m_of_k_distribution(p, k).probabilities) - 1) <= 1e-12

    @given(probs, st.integers(1, 40))
    def test_m_of_k_matches_exact_binomial(self, p, k):
        fp = Fraction(p)
        exact = [math.comb(k, m) * fp**m * (1 - fp) ** (k - m) for m in range(k + 1)]
        np.testing.assert_allclose(m_of_k_distribution(p, k).probabilities, [float(x) for x in exact], atol=1e-12)

    @pytest.mark.parametrize("k,p", [(10**6, 0.3), (10**6, 0.0375), (5000, 0.999), (1001, 0.5)])
    def test_large_k_stays_finite(self, k, p):
        pmf = binomial_pmf(k, p)
        assert np.all(np.isfinite(pmf))
        assert abs(pmf.sum() - 1) <= 1e-12
        ref = sps.binom.pmf(np.arange(k + 1), k, p)
        assert np.max(np.abs(pmf - ref)) <= 1e-12

    def test_tail_edges(self):
        assert binomial_tail(3, 0.2, 0) == 1.0
        assert binomial_tail(3, 0.2, 4) == 0.0
        assert binomial_tail(3, 0.1, 1) == pytest.approx(0.271, abs=1e-15)


class TestBunches:
    def test_two_photon_dp(self):
        np.testing.assert_allclose(
            bunched_survivor_distribution(WORKED, 2).probabilities, (0.1875, 0.671875, 0.140625), atol=1e-15
        )

    def test_three_photon_dp(self):
        dist = bunched_survivor_distribution(WORKED, 3)
        assert dist.probabilities == (0.0, 0.3828125, 0.564453125, 0.052734375)
        assert dist.floor == 1

    def test_vacuum_point_mass(self):
        assert bunched_survivor_distribution(QVector((), 0.3), 4).probabilities == (0, 0, 0, 0, 1)

    def test_perfect_absorbers(self):
        assert bunched_survivor_distribution(QVector((1.0, 1.0), 0.3), 2).probabilities == (1, 0, 0)

    @given(st.lists(probs, max_size=4), st.integers(1, 4))
    @settings(max_examples=60)
    def test_dp_matches_photon_flagging(self, qs, k):
        expected = [float(x) for x in flagging_survivors(qs, k)]
        got = bunched_survivor_distribution(QVector(tuple(qs), 0.5), k).probabilities
        np.testing.assert_allclose(got, expected, atol=1e-12)

    @given(st.lists(probs, max_size=12), st.integers(1, 15))
    def test_survivor_normalized_with_floor(self, qs, k):
        dist = bunched_survivor_distribution(QVector(tuple(qs), 0.5), k)
        assert abs(math.fsum(dist.probabilities) - 1) <= 1e-12
        assert all(p == 0.0 for p in dist.probabilities[: max(0, k - len(qs))])

    def test_single_photon_bunch_is_single_photon(self):
        qv = QVector((0.2, 0.7, 0.4), 0.6)
        assert bunched_detect_at_least(qv, 1, 1) == pytest.approx(detect_probability_product(qv), abs=1e-15)

    def test_detect_at_least_worked(self):
        assert bunched_detect_at_least(WORKED, 3, 1) == pytest.approx(0.15981835938, abs=1e-9)
        assert bunched_detect_at_least(QVector((), 0.1), 1, 1) == pytest.approx(0.1, abs=1e-15)
        assert bunched_detect_at_least(WORKED, 3, 1) > 0.1

    def test_detect_at_least_m_too_large(self):
        with pytest.raises(ValueError):
            bunched_detect_at_least(WORKED, 3, 4)

    def test_count_distribution_consistent(self):
        dist = bunched_count_distribution(WORKED, 3)
        assert math.fsum(dist.probabilities) == pytest.approx(1.0, abs=1e-15)
        assert dist.at_least(1) == pytest.approx(bunched_detect_at_least(WORKED, 3, 1), abs=1e-15)

    @given(st.lists(open_probs, min_size=1, max_size=6), open_probs, st.integers(1, 4))
    def test_guaranteed_survivors_beat_vacuum_power(self, qs, qd, extra):
        k = len(qs) + extra
        m = k - len(qs)
        assert bunched_detect_at_least(QVector(tuple(qs), qd), k, m) > qd**m + 1e-12


class TestInequality:
    def test_worked(self):
        v = inequality_report(WORKED, 3)
        assert v.event_m == 1
        assert v.p_separate == pytest.approx(0.108333984375, abs=1e-12)
        assert v.p_bunched == pytest.approx(0.15981835938, abs=1e-9)
        assert v.p_vacuum == pytest.approx(0.271, abs=1e-12)
        assert v.vacuum_power_bound == pytest.approx(0.1, abs=1e-15)
        assert v.ordering_holds and not v.degenerate_vacuum
        assert v.line() == (
            "p_separate=0.108334 p_bunched=0.159818 p_vacuum=0.271000 bound=0.100000 ordering_holds=true"
        )

    @pytest.mark.parametrize("qd", [0.05, 0.3, 0.9])
    def test_vacuum_degenerate(self, qd):
        v = inequality_report(QVector((), qd), 2)
        assert v.p_separate == pytest.approx(v.p_bunched, abs=1e-15)
        assert v.p_bunched == pytest.approx(v.p_vacuum, abs=1e-15)
        assert v.degenerate_vacuum
        assert not v.ordering_holds

    @pytest.mark.parametrize("qd", [0.05, 0.5])
    def test_grid(self, qd):
        grid = [round(0.1 * i, 1) for i in range(1, 10)]
        for q1, q2 in itertools.product(grid, grid):
            assert inequality_report(QVector((q1, q2), qd), 3).ordering_holds, (q1, q2, qd)

    def test_event_count_uses_absorber_count(self):
        qv = QVector((0.5, 0.5), 0.5)
        assert [inequality_report(qv, k).event_m for k in range(1, 6)] == [1, 1, 1, 2, 3]

    def test_perfect_absorbers_annihilate_separate_stream(self):
        v = inequality_report(QVector((1.0, 1.0, 1.0), 0.4), 4)
        assert v.p_separate == 0.0
        assert v.p_bunched == pytest.approx(0.4, abs=1e-15)
