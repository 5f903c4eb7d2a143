import math

import numpy as np
import pytest
from scipy.special import ndtr

from conftest import random_feasible_bounds
from topk_smoothing.bounds import ProbabilityBounds
from topk_smoothing.radius import certify_bounds
from topk_smoothing.special import std_normal_cdf as cdf, std_normal_quantile as ppf
from topk_smoothing.tightness import (
    QuantileIntervalSet,
    check_feasible,
    construct_worst_case,
    is_consistent,
    region_residuals,
    measure_clean,
    measure_shifted,
    verify_violation,
)


def random_set(rng, pieces):
    edges = np.sort(rng.uniform(0, 1, 2 * pieces))
    return QuantileIntervalSet(tuple(zip(edges[::2], edges[1::2])))


def exact_radius(bounds, k, sigma=1.0):
    return certify_bounds(bounds, k, sigma, mu=1e-9).radius


class TestIntervalSet:
    def test_validation(self):
        with pytest.raises(ValueError):
            QuantileIntervalSet(((0.2, 0.5), (0.4, 0.6)))
        with pytest.raises(ValueError):
            QuantileIntervalSet(((-0.1, 0.5),))
        s = QuantileIntervalSet(((0.5, 0.6), (0.1, 0.3), (0.3, 0.4), (0.7, 0.7)))
        assert s.intervals == ((0.1, 0.4), (0.5, 0.6))

    def test_clean_measure(self):
        assert measure_clean(QuantileIntervalSet.full()) == 1.0
        assert measure_clean(QuantileIntervalSet(((0.1, 0.3), (0.5, 0.6)))) == pytest.approx(0.3, abs=1e-15)

    def test_additivity(self, rng):
        for _ in range(100):
            edges = np.sort(rng.uniform(0, 1, 8))
            s = QuantileIntervalSet(((edges[0], edges[1]), (edges[4], edges[5])))
            t = QuantileIntervalSet(((edges[2], edges[3]), (edges[6], edges[7])))
            assert abs(measure_clean(s.union(t)) - (measure_clean(s) + measure_clean(t))) <= 2e-16

    def test_shifted_measure(self, rng):
        expected = 0.5 * math.erfc(-(ppf(0.7) - 1.0) / math.sqrt(2))
        assert measure_shifted(QuantileIntervalSet(((0.0, 0.7),)), 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.31718, abs=1e-5)
        for lam in (0.0, 0.3, 2.5, 9.0):
            assert measure_shifted(QuantileIntervalSet.full(), lam) == pytest.approx(1.0, abs=1e-15)
        s = random_set(rng, 3)
        assert measure_shifted(s, 0.0) == measure_clean(s)
        with pytest.raises(ValueError):
            measure_shifted(s, -1.0)

    @pytest.mark.parametrize("lam", [0.0, 0.7, 1.5, 3.0])
    def test_shifted_matches_monte_carlo(self, lam):
        rng = np.random.default_rng(int(lam * 10))
        n = 1_000_000
        v = ndtr(rng.standard_normal(n) + lam)
        for _ in range(5):
            s = random_set(rng, int(rng.integers(1, 4)))
            hits = np.zeros(n, dtype=bool)
            for a, b in s.intervals:
                hits |= (v > a) & (v <= b)
            p = measure_shifted(s, lam)
            assert abs(hits.mean() - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-12


class TestFeasibility:
    def test_too_much_top_k_mass(self):
        with pytest.raises(ValueError, match="exceeds 1"):
            check_feasible(ProbabilityBounds(0, 0.9, [0, 0.2, 0.2]), 2)

    def test_too_little_total_mass(self):
        with pytest.raises(ValueError, match="below 1"):
            check_feasible(ProbabilityBounds(0, 0.5, [0, 0.1, 0.1, 0.1]), 2)


class TestConstruction:
    def test_two_labels(self):
        b = ProbabilityBounds(0, 0.6, [0, 0.4])
        wc = construct_worst_case(b, 1, 0.5)
        assert wc.assignment[0].intervals == ((0.0, 0.6),)
        ((a, b),) = wc.assignment[1].intervals
        assert a == pytest.approx(0.6, abs=1e-15) and b == 1.0
        assert wc.clean_measures()[1] == pytest.approx(0.4, abs=1e-15)

    def test_k1_closed_form_violation(self):
        b = ProbabilityBounds(0, 0.7, [0, 0.3])
        lam = (ppf(0.7) - ppf(0.3)) / 2
        hi = construct_worst_case(b, 1, lam + 0.01)
        assert verify_violation(hi, b, 1, lam + 0.01)
        shifted = hi.shifted_measures(lam + 0.01)
        assert shifted[0] == pytest.approx(cdf(ppf(0.7) - lam - 0.01), abs=1e-12)
        assert shifted[1] == pytest.approx(1 - cdf(ppf(0.7) - lam - 0.01), abs=1e-12)
        lo = construct_worst_case(b, 1, lam - 0.01)
        assert not verify_violation(lo, b, 1, lam - 0.01)

    def test_k2_example(self):
        b = ProbabilityBounds(0, 0.5, [0, 0.25, 0.25])
        lam = exact_radius(b, 2) + 1e-4
        wc = construct_worst_case(b, 2, lam)
        for label in (1, 2):
            assert wc.clean_measures()[label] == pytest.approx(0.25, abs=1e-9)
            assert wc.shifted_measures(lam)[label] >= wc.threshold - 1e-9
        assert verify_violation(wc, b, 2, lam)

    def test_no_shift_keeps_top_label(self):
        b = ProbabilityBounds(0, 0.5, [0, 0.25, 0.15, 0.1])
        assert not verify_violation(construct_worst_case(b, 1, 0.0), b, 1, 0.0)

    def test_partition_and_classify(self, rng):
        for _ in range(30):
            b, k = random_feasible_bounds(rng)
            wc = construct_worst_case(b, k, rng.uniform(0, 2))
            assert wc.is_partition() and is_consistent(wc, b)
            v = rng.uniform(1e-9, 1, 2000)
            labels = wc.classify(v)
            assert np.all(labels >= 0)
            for label, s in wc.assignment.items():
                assert abs(np.mean(labels == label) - s.measure_clean()) <= 0.05

    def test_random_bracket(self, rng):
        done = 0
        while done < 40:
            b, k = random_feasible_bounds(rng)
            r = exact_radius(b, k)
            if r <= 0.03:
                continue
            done += 1
            wc = construct_worst_case(b, k, r + 0.02)
            clean_err, shortfall = region_residuals(wc, b)
            assert clean_err <= 1e-9 and shortfall <= 1e-9
            assert verify_violation(wc, b, k, r + 0.02)
            assert not verify_violation(construct_worst_case(b, k, r - 0.02), b, k, r - 0.02)

    def test_rejects_negative_shift(self):
        with pytest.raises(ValueError):
            construct_worst_case(ProbabilityBounds(0, 0.6, [0, 0.4]), 1, -0.1)

    def test_inconsistent_classifier_is_not_a_violation(self):
        b = ProbabilityBounds(0, 0.6, [0, 0.4])
        wc = construct_worst_case(b, 1, 3.0)
        tighter = ProbabilityBounds(0, 0.6, [0, 0.3])
        assert not is_consistent(wc, tighter)
        assert not verify_violation(wc, tighter, 1, 3.0)
