import math

import numpy as np
import pytest
from scipy.optimize import minimize

from mixlr.calibrate import (
    CalibrationError,
    Calibrator,
    LRValue,
    apply_calibrator,
    apply_calibrator_many,
    clip_score,
    decade_bin_diagnostic,
    fit_calibrator,
    fuse_coefficients,
)
from mixlr.classify import LN10, BinaryLogReg, score_binary


def binormal_log10_lrs(rng, n_per_class, decades=1.0):
    """log10 LRs from the binormal model in which scores are honest LRs.

    With means +-m and variance 2m/ln(10) in log10 space, the density ratio
    at l is exactly 10^l.
    """
    var = 2.0 * decades / LN10
    l1 = rng.normal(decades, math.sqrt(var), n_per_class)
    l2 = rng.normal(-decades, math.sqrt(var), n_per_class)
    return l1, l2


class TestLRValue:
    def test_round_trip(self):
        v = LRValue.from_lr(32.0)
        assert v.log10_lr == pytest.approx(math.log10(32.0))
        w = LRValue.from_log10(1.5)
        assert w.lr == pytest.approx(10 ** 1.5)

    def test_rejects_inconsistent_pair(self):
        with pytest.raises(ValueError):
            LRValue(lr=10.0, log10_lr=2.0)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            LRValue.from_lr(0.0)

    def test_extreme_log10_saturates(self):
        v = LRValue.from_log10(400.0)
        assert v.lr == math.inf and v.log10_lr == 400.0
        w = LRValue.from_log10(-400.0)
        assert w.lr == 0.0 and w.log10_lr == -400.0


class TestFitCalibrator:
    def test_honest_scores_fit_unit_slope(self):
        rng = np.random.default_rng(0)
        l1, l2 = binormal_log10_lrs(rng, 5000)
        cal = fit_calibrator(np.concatenate([l1, l2]),
                             np.concatenate([np.ones(5000), np.zeros(5000)]))
        assert cal.a1 == pytest.approx(1.0, abs=0.1)
        assert cal.a0 == pytest.approx(0.0, abs=0.1)
        assert cal.prior_log_odds == 0.0

    def test_decade_shifted_scores_map_back(self):
        # Scores sit one decade above honest LRs; calibration pulls them
        # down, so a score of 1 maps to an LR near 0.1.
        rng = np.random.default_rng(1)
        l1, l2 = binormal_log10_lrs(rng, 10_000)
        shifted = np.concatenate([l1, l2]) + 1.0
        cal = fit_calibrator(shifted,
                             np.concatenate([np.ones(10_000), np.zeros(10_000)]))
        at_one = apply_calibrator(cal, 1.0)
        assert at_one.log10_lr == pytest.approx(-1.0, abs=0.1)

    def test_symmetric_normals_center_intercept(self):
        rng = np.random.default_rng(2)
        x = np.concatenate([rng.normal(1.0, 1.0, 4000),
                            rng.normal(-1.0, 1.0, 4000)])
        y = np.concatenate([np.ones(4000), np.zeros(4000)])
        cal = fit_calibrator(x, y)
        assert cal.a0 == pytest.approx(0.0, abs=0.1)

    def test_matches_independent_optimizer(self):
        # Same two-parameter fit done by a generic optimizer (ridge included).
        rng = np.random.default_rng(3)
        x = np.concatenate([rng.normal(0.8, 1.0, 400), rng.normal(-0.6, 1.2, 300)])
        y = np.concatenate([np.ones(400), np.zeros(300)])

        def nll(w):
            t = w[0] + w[1] * x
            return float(np.sum(np.logaddexp(0.0, t) - y * t)) + 0.5 * w[1] ** 2

        oracle = minimize(nll, np.zeros(2), method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-12,
                                   "maxiter": 10_000}).x
        cal = fit_calibrator(x, y, correct_prior=False)
        grid = np.linspace(-3, 3, 13)
        ours = cal.a0 + cal.a1 * grid
        theirs = (oracle[0] + oracle[1] * grid) / LN10
        np.testing.assert_allclose(ours, theirs, atol=1e-6)

    def test_prior_log_odds_recorded(self):
        rng = np.random.default_rng(4)
        x = np.concatenate([rng.normal(1, 1, 300), rng.normal(-1, 1, 100)])
        y = np.concatenate([np.ones(300), np.zeros(100)])
        cal = fit_calibrator(x, y)
        assert cal.prior_log_odds == pytest.approx(math.log10(3.0))
        off = fit_calibrator(x, y, correct_prior=False)
        assert off.prior_log_odds == 0.0

    def test_anti_discriminative_scores_error(self):
        rng = np.random.default_rng(5)
        x = np.concatenate([rng.normal(-1, 1, 500), rng.normal(1, 1, 500)])
        y = np.concatenate([np.ones(500), np.zeros(500)])
        with pytest.raises(CalibrationError, match="anti-discriminative"):
            fit_calibrator(x, y)

    def test_single_class_errors(self):
        with pytest.raises(CalibrationError):
            fit_calibrator(np.zeros(5), np.ones(5))

    def test_separated_scores_stay_finite(self):
        x = np.concatenate([np.linspace(1, 2, 50), np.linspace(-2, -1, 50)])
        y = np.concatenate([np.ones(50), np.zeros(50)])
        cal = fit_calibrator(x, y)
        assert math.isfinite(cal.a1) and cal.a1 > 0

    def test_shrinkage_direction_on_calibration_set(self):
        rng = np.random.default_rng(6)
        l1, l2 = binormal_log10_lrs(rng, 2000)
        x = np.concatenate([l1, l2])
        y = np.concatenate([np.ones(2000), np.zeros(2000)])
        cal = fit_calibrator(x, y)
        lrs = apply_calibrator_many(cal, 10.0 ** x)
        assert lrs[:2000].mean() >= 0.0
        assert lrs[2000:].mean() <= 0.0


class TestApplyCalibrator:
    def test_identity(self):
        cal = Calibrator.identity()
        out = apply_calibrator(cal, 42.0)
        assert out.lr == pytest.approx(42.0)

    def test_affine_arithmetic(self):
        cal = Calibrator(a0=-1.0, a1=1.0)
        assert apply_calibrator(cal, 10.0).lr == pytest.approx(1.0)

    def test_prior_subtraction(self):
        cal = Calibrator(a0=0.0, a1=1.0, prior_log_odds=0.5)
        assert apply_calibrator(cal, 1.0).log10_lr == pytest.approx(-0.5)

    def test_clipping_bounds(self):
        cal = Calibrator.identity()
        assert apply_calibrator(cal, 1e20).log10_lr == pytest.approx(10.0)
        assert apply_calibrator(cal, 1e-20).log10_lr == pytest.approx(-10.0)

    def test_rejects_non_positive_scores(self):
        with pytest.raises(ValueError):
            apply_calibrator(Calibrator.identity(), 0.0)

    def test_strict_monotonicity(self):
        rng = np.random.default_rng(7)
        cal = Calibrator(a0=rng.normal(), a1=0.7, prior_log_odds=0.2)
        scores = np.sort(10.0 ** rng.uniform(-6, 6, 50))
        lrs = [apply_calibrator(cal, s).lr for s in scores]
        assert all(b > a for a, b in zip(lrs, lrs[1:]))


class TestFuseCoefficients:
    def test_identity_calibrator_keeps_model(self):
        model = BinaryLogReg(intercept=-1.34, coefficients=np.array([0.79, -0.57]))
        fused = fuse_coefficients(Calibrator.identity(), model)
        assert fused.intercept == model.intercept
        np.testing.assert_array_equal(fused.coefficients, model.coefficients)

    def test_fusion_equals_composition(self):
        rng = np.random.default_rng(8)
        model = BinaryLogReg(intercept=rng.normal(),
                             coefficients=rng.normal(size=15))
        cal = Calibrator(a0=rng.normal(), a1=abs(rng.normal()) + 0.1,
                         prior_log_odds=rng.normal())
        fused = fuse_coefficients(cal, model)
        for r in rng.random((100, 15)):
            composed = apply_calibrator(cal, score_binary(model, r)).log10_lr
            direct = math.log10(score_binary(fused, r))
            assert direct == pytest.approx(composed, abs=1e-12)


class TestDecadeBins:
    def test_honest_lrs_pass_the_band(self):
        rng = np.random.default_rng(9)
        l1, l2 = binormal_log10_lrs(rng, 20_000)
        bins = decade_bin_diagnostic(l1, l2)
        populated = [b for b in bins if b.deviation is not None]
        assert populated, "expected at least one populated bin"
        assert all(b.deviation <= 0.5 for b in populated)

    def test_sparse_bins_have_no_deviation(self):
        bins = decade_bin_diagnostic([0.1] * 40, [10.0] * 40)
        assert all(b.deviation is None for b in bins)

    def test_shifted_lrs_fail_the_band(self):
        rng = np.random.default_rng(10)
        l1, l2 = binormal_log10_lrs(rng, 20_000)
        bins = decade_bin_diagnostic(l1 + 2.0, l2 + 2.0)
        populated = [b for b in bins if b.deviation is not None]
        assert any(b.deviation > 0.5 for b in populated)


def test_clip_score_bounds():
    np.testing.assert_array_equal(clip_score(np.array([1e-20, 1.0, 1e20])),
                                  [1e-10, 1.0, 1e10])
