import math

import numpy as np
import pytest
from scipy import integrate

from ordkit.errors import DataError
from ordkit.metrics import (BinaryConfusion, auc, classification_metrics,
                            confusion, paired_t_test, threshold_sweep)


def brute_force_metrics(y_true, y_pred):
    """Definition-level recomputation."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    pos = y_true == 1
    neg = y_true == 0
    minority = np.mean(y_pred[pos] == 1) if pos.any() else None
    majority = np.mean(y_pred[neg] == 0) if neg.any() else None
    macro = (minority + majority) / 2 if pos.any() and neg.any() else None
    tp = int(np.sum(pos & (y_pred == 1)))
    fp = int(np.sum(neg & (y_pred == 1)))
    fn = int(np.sum(pos & (y_pred == 0)))
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return minority, majority, macro, f1


def brute_force_auc(y_true, scores):
    """All-pairs concordance count."""
    y_true = np.asarray(y_true)
    scores = np.asarray(scores)
    pos = scores[y_true == 1]
    neg = scores[y_true == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def t_sf_by_quadrature(t, df):
    """P(T >= t) for the t distribution, by adaptive quadrature."""
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    pdf = lambda x: c * (1 + x * x / df) ** (-(df + 1) / 2)
    val, err = integrate.quad(pdf, t, np.inf)
    assert err < 1e-8
    return val


class TestClassificationMetrics:
    def test_perfect(self):
        m = classification_metrics(BinaryConfusion(tp=5, fp=0, fn=0, tn=5))
        assert (m.minority_acc, m.majority_acc, m.macro_acc, m.f1) == (1, 1, 1, 1)

    def test_hand_values(self):
        m = classification_metrics(BinaryConfusion(tp=3, fp=1, fn=2, tn=4))
        assert m.minority_acc == pytest.approx(0.6)
        assert m.majority_acc == pytest.approx(0.8)
        assert m.macro_acc == pytest.approx(0.7)
        assert m.f1 == pytest.approx(6.0 / 9.0)

    def test_degenerate_f1_convention(self):
        m = classification_metrics(BinaryConfusion(tp=0, fp=0, fn=3, tn=0))
        assert m.f1 == 0.0
        assert m.majority_acc is None

    def test_negative_counts_rejected(self):
        with pytest.raises(DataError):
            BinaryConfusion(tp=-1, fp=0, fn=0, tn=0)

    def test_macro_is_exact_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = BinaryConfusion(*(int(v) for v in rng.integers(1, 30, 4)))
            m = classification_metrics(c)
            assert m.macro_acc == (m.minority_acc + m.majority_acc) / 2


class TestAuc:
    def test_perfectly_ordered(self):
        assert auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0

    def test_all_ties(self):
        assert auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5

    def test_four_pair_enumeration(self):
        assert auc([1, 1, 0, 0], [0.9, 0.4, 0.8, 0.1]) == pytest.approx(0.75)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            auc([1, 1], [0.1, 0.2])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 60)
        y[0], y[1] = 0, 1
        s = rng.random(60)
        assert auc(y, s) == pytest.approx(auc(y, np.exp(3 * s) + 1), abs=1e-12)


class TestThresholdSweep:
    def test_single_point_grid(self):
        y = [0, 1, 1, 0]
        s = [0.2, 0.7, 0.4, 0.6]
        t, m, curve = threshold_sweep(y, s, [0.5])
        pred = (np.asarray(s) >= 0.5).astype(int)
        ref = classification_metrics(confusion(y, pred)).macro_acc
        assert t == 0.5 and m == ref and curve == [(0.5, ref)]

    def test_lowering_threshold_flips_false_negative(self):
        y = [1, 1, 0, 0]
        s = [0.46, 0.9, 0.3, 0.2]
        t, m, _ = threshold_sweep(y, s, [0.5, 0.45])
        assert t == 0.45 and m == 1.0

    def test_tie_prefers_half_then_larger(self):
        y = [0, 1]
        s = [0.1, 0.9]
        t, m, _ = threshold_sweep(y, s, [0.3, 0.7, 0.5])
        assert m == 1.0 and t == 0.5
        t, _, _ = threshold_sweep(y, s, [0.4, 0.6])
        assert t == 0.6

    def test_empty_grid(self):
        with pytest.raises(DataError):
            threshold_sweep([0, 1], [0.1, 0.9], [])


class TestOracleBattery:
    def test_200_random_fixtures(self):
        rng = np.random.default_rng(42)
        for trial in range(200):
            n = int(rng.integers(4, 40))
            y = rng.integers(0, 2, n)
            y[0], y[1] = 0, 1
            # quantized scores force plenty of ties
            s = np.round(rng.random(n), 1)
            pred = (s >= 0.5).astype(int)
            mi, ma, mac, f1 = brute_force_metrics(y, pred)
            m = classification_metrics(confusion(y, pred))
            assert abs(m.minority_acc - mi) <= 1e-12
            assert abs(m.majority_acc - ma) <= 1e-12
            assert abs(m.macro_acc - mac) <= 1e-12
            assert abs(m.f1 - f1) <= 1e-12
            assert abs(auc(y, s) - brute_force_auc(y, s)) <= 1e-12
            grid = np.round(rng.random(5), 2).tolist()
            t, best, curve = threshold_sweep(y, s, grid)
            for tt, mm in curve:
                ref = brute_force_metrics(y, (s >= tt).astype(int))[2]
                assert abs(mm - ref) <= 1e-12
            assert best == max(mm for _, mm in curve)


class TestPairedTTest:
    def test_hand_case_against_quadrature(self):
        r = paired_t_test([1, 2, 3], [0, 0, 0])
        assert r.t == pytest.approx(2.0 / (1.0 / math.sqrt(3.0)))
        assert r.df == 2
        ref = 2 * t_sf_by_quadrature(abs(r.t), 2)
        assert r.p_value == pytest.approx(ref, abs=1e-6)
        assert r.p_value == pytest.approx(0.07417990022744853, abs=1e-9)

    def test_identical_samples_flagged(self):
        r = paired_t_test([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])
        assert r.p_value == 1.0 and r.degenerate

    def test_constant_nonzero_difference_flagged(self):
        r = paired_t_test([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert r.p_value == 0.0 and r.degenerate

    def test_antisymmetry(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal(12)
        b = rng.standard_normal(12)
        r1 = paired_t_test(a, b)
        r2 = paired_t_test(b, a)
        assert r1.t == pytest.approx(-r2.t)
        assert r1.p_value == pytest.approx(r2.p_value, abs=1e-15)

    def test_quadrature_oracle_battery(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            n = int(rng.integers(2, 25))
            a = rng.standard_normal(n)
            b = rng.standard_normal(n) + rng.normal() * 0.5
            r = paired_t_test(a, b)
            if r.degenerate:
                continue
            ref = 2 * t_sf_by_quadrature(abs(r.t), r.df)
            assert r.p_value == pytest.approx(ref, abs=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            paired_t_test([1.0], [2.0])
