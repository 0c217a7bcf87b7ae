import math

import numpy as np
import pytest

from mixlr.calibrate import LRValue
from mixlr.metrics import (
    MetricReport,
    cap_lr,
    cllr,
    roc_auc,
    tippett,
    verbal_scale,
)


def lrs(*values):
    return [LRValue.from_lr(v) for v in values]


class TestCllr:
    def test_uninformative_system_is_exactly_one(self):
        assert cllr(lrs(1.0, 1.0, 1.0), lrs(1.0, 1.0)) == 1.0

    def test_single_pair_hand_value(self):
        assert cllr(lrs(10.0), lrs(0.1)) == pytest.approx(math.log2(1.1))

    def test_tends_to_zero_for_strong_systems(self):
        prev = 1.0
        for strength in (1, 2, 4, 8):
            value = cllr(lrs(10.0 ** strength), lrs(10.0 ** -strength))
            assert value < prev
            prev = value
        assert prev < 1e-2

    def test_monotone_in_each_argument(self):
        base = cllr(lrs(5.0, 2.0), lrs(0.3))
        assert cllr(lrs(50.0, 2.0), lrs(0.3)) < base
        assert cllr(lrs(5.0, 2.0), lrs(0.03)) < base
        assert cllr(lrs(5.0, 2.0), lrs(3.0)) > base

    def test_non_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = lrs(*10.0 ** rng.uniform(-3, 3, 5))
            b = lrs(*10.0 ** rng.uniform(-3, 3, 5))
            assert cllr(a, b) >= 0.0

    def test_empty_list_errors(self):
        with pytest.raises(ValueError):
            cllr([], lrs(1.0))

    def test_accepts_plain_floats(self):
        assert cllr([10.0], [0.1]) == pytest.approx(math.log2(1.1))

    def test_extreme_log_values_stay_finite(self):
        h1 = [LRValue.from_log10(500.0)]
        h2 = [LRValue.from_log10(-500.0)]
        assert cllr(h1, h2) == pytest.approx(0.0, abs=1e-12)


class TestRocAuc:
    def test_perfect_separation(self):
        out = roc_auc([0.1, 0.2, 5.0, 9.0], [False, False, True, True])
        assert out.auc == 1.0
        assert out.fp_rate == 0.0
        assert out.fn_rate == 0.0

    def test_all_ties_give_half(self):
        out = roc_auc([2.0, 2.0, 2.0, 2.0], [True, False, True, False])
        assert out.auc == 0.5

    def test_hand_ranked_cases(self):
        assert roc_auc([1, 2, 3, 4], [False, False, True, True]).auc == 1.0
        assert roc_auc([1, 2, 3, 4], [False, True, False, True]).auc == 0.75

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        scores = 10.0 ** rng.uniform(-3, 3, 200)
        flags = rng.random(200) < 0.4
        a = roc_auc(scores, flags).auc
        b = roc_auc(np.log10(scores) * 3.7 + 1.0, flags).auc
        assert a == pytest.approx(b, abs=1e-12)

    def test_operating_point_at_unit_lr(self):
        out = roc_auc([0.5, 2.0, 0.5, 2.0], [True, True, False, False])
        assert out.fn_rate == 0.5   # the H1 sample at 0.5 is missed
        assert out.fp_rate == 0.5   # the H2 sample at 2.0 is a false positive

    def test_single_class_errors(self):
        with pytest.raises(ValueError):
            roc_auc([1.0, 2.0], [True, True])


class TestTippett:
    def test_endpoints(self):
        curve = tippett(lrs(10.0, 100.0), lrs(0.1, 1.0))
        assert curve.fraction_h1[0] == 1.0 and curve.fraction_h2[0] == 1.0
        assert curve.fraction_h1[-1] == 0.0 and curve.fraction_h2[-1] == 0.0

    def test_query_outside_grid(self):
        curve = tippett(lrs(10.0), lrs(0.1))
        assert curve.fraction_exceeding(-99.0) == (1.0, 1.0)
        assert curve.fraction_exceeding(99.0) == (0.0, 0.0)

    def test_three_point_steps(self):
        curve = tippett(lrs(0.1, 1.0, 10.0), lrs(0.1, 1.0, 10.0))
        # Exceedance just above each point drops by thirds.
        assert curve.fraction_exceeding(-1.0)[0] == pytest.approx(2 / 3)
        assert curve.fraction_exceeding(0.0)[0] == pytest.approx(1 / 3)
        assert curve.fraction_exceeding(1.0)[0] == 0.0

    def test_non_increasing(self):
        rng = np.random.default_rng(2)
        curve = tippett(lrs(*10.0 ** rng.uniform(-4, 4, 50)),
                        lrs(*10.0 ** rng.uniform(-4, 4, 60)))
        assert np.all(np.diff(curve.fraction_h1) <= 0)
        assert np.all(np.diff(curve.fraction_h2) <= 0)


class TestCapLr:
    def test_clamps_both_sides(self):
        assert cap_lr(LRValue.from_lr(5000.0)).lr == 1000.0
        assert cap_lr(LRValue.from_lr(1 / 5000.0)).lr == pytest.approx(1 / 1000.0)
        assert cap_lr(LRValue.from_lr(50.0)).lr == 50.0

    def test_idempotent(self):
        once = cap_lr(LRValue.from_lr(123456.0))
        assert cap_lr(once).lr == once.lr

    def test_infinite_lr_caps(self):
        assert cap_lr(LRValue.from_log10(400.0)).lr == 1000.0

    def test_rejects_cap_at_or_below_one(self):
        with pytest.raises(ValueError):
            cap_lr(LRValue.from_lr(2.0), cap=1.0)


class TestVerbalScale:
    def test_examples(self):
        assert verbal_scale(LRValue.from_lr(3.0)) == "weak support for H1"
        assert verbal_scale(LRValue.from_lr(1.0)) == \
            "do not support one hypothesis over the other"
        assert verbal_scale(LRValue.from_lr(1 / 50.0)) == "moderate support for H2"

    def test_boundaries(self):
        assert verbal_scale(0.5) == "do not support one hypothesis over the other"
        assert verbal_scale(2.0) == "do not support one hypothesis over the other"
        assert verbal_scale(10.0) == "weak support for H1"
        assert verbal_scale(10.001) == "moderate support for H1"
        assert verbal_scale(100.0) == "moderate support for H1"
        assert verbal_scale(1000.0) == "moderately strong support for H1"

    def test_capped_lrs_never_exceed_moderately_strong(self):
        rng = np.random.default_rng(3)
        strong = {"strong support", "very strong support",
                  "extremely strong support"}
        for log_lr in rng.uniform(-12, 12, 200):
            label = verbal_scale(cap_lr(LRValue.from_log10(log_lr)))
            assert not any(label.startswith(s) for s in strong)


def test_metric_report_validation():
    with pytest.raises(ValueError):
        MetricReport(cllr=-0.1, auc=0.5, fp_rate=0.0, fn_rate=0.0, n_h1=1, n_h2=1)
    with pytest.raises(ValueError):
        MetricReport(cllr=0.5, auc=1.5, fp_rate=0.0, fn_rate=0.0, n_h1=1, n_h2=1)
    with pytest.raises(ValueError):
        MetricReport(cllr=0.5, auc=0.5, fp_rate=0.0, fn_rate=0.0, n_h1=0, n_h2=1)
