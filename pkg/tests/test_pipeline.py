import numpy as np
import pytest

from mixlr.augmentation import BackgroundLevels, HypothesisPair
from mixlr.casework import NOverTwoVerdict
from mixlr.pipeline import (
    ConfigError,
    ExperimentConfig,
    SynthSpec,
    compare_with_n_over_2,
    derive_rng,
    run_experiment,
    sensitivity_analysis,
    train_variant,
)
from mixlr.profiles import BodyFluid

from conftest import CASE_3, VM_INTEREST, observation

# A small grid: three free fluids keep the power set at 8 combinations.
SMALL_BACKGROUNDS = BackgroundLevels.uniform(0.0).with_levels({
    BodyFluid.BLOOD: 0.5,
    BodyFluid.NASAL_MUCOSA: 0.5,
    BodyFluid.MENSTRUAL_SECRETION: 0.5,
    BodyFluid.VAGINAL_MUCOSA: 0.5,
})


def small_config(**overrides):
    base = dict(
        runs=2, seed=11,
        synthesize=SynthSpec(n_per_fluid=12),
        counts=(8, 8, 4),
        backgrounds=SMALL_BACKGROUNDS,
        interest_sets=(VM_INTEREST,),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            small_config(runs=0)
        with pytest.raises(ConfigError):
            small_config(strategies=("nearest_neighbour",))
        with pytest.raises(ConfigError):
            small_config(interest_sets=(frozenset(),))
        with pytest.raises(ConfigError):
            small_config(interest_sets=(frozenset({BodyFluid.SKIN_PENILE}),))
        with pytest.raises(ConfigError):
            small_config(data_csv="x.csv")  # both sources set

    def test_hash_is_stable_and_sensitive(self):
        a = small_config()
        b = small_config()
        c = small_config(seed=12)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_from_toml(self, tmp_path):
        text = """
runs = 2
seed = 7
strategies = ["one_vs_rest"]
dichotomize = [true]
interest_sets = [["vaginal_mucosa", "menstrual_secretion"]]
cap = 1000.0

[split]
train = 0.4
calibration = 0.4
test = 0.2

[counts]
train = 5
calibration = 5
test = 3

[backgrounds]
skin_penile = 0.0
blood = 0.9

[synthesize]
n_per_fluid = 10
reps_per_sample = 4

[training]
l2_per_sample = 1e-4
"""
        path = tmp_path / "exp.toml"
        path.write_text(text)
        cfg = ExperimentConfig.from_toml(path)
        assert cfg.runs == 2
        assert cfg.counts == (5, 5, 3)
        assert cfg.backgrounds.level(BodyFluid.BLOOD) == 0.9
        assert cfg.interest_sets == (VM_INTEREST,)

    def test_from_toml_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("runs = [not toml")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(path)


class TestSeedDerivation:
    def test_purpose_streams_are_independent(self):
        a = derive_rng(1, "split", 0).integers(2 ** 63)
        b = derive_rng(1, "augment_train", 0).integers(2 ** 63)
        c = derive_rng(1, "split", 1).integers(2 ** 63)
        assert len({int(a), int(b), int(c)}) == 3

    def test_reproducible(self):
        assert derive_rng(9, "split", 3).integers(2 ** 63) == \
            derive_rng(9, "split", 3).integers(2 ** 63)


class TestRunExperiment:
    def test_grid_shape_and_determinism(self):
        cfg = small_config()
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        assert len(a.cells) == cfg.runs
        assert a.metrics_csv() == b.metrics_csv()
        assert a.tippett_csv() == b.tippett_csv()

    def test_runs_differ_between_each_other(self):
        report = run_experiment(small_config())
        by_run = {c.run: c.metrics.cllr for c in report.cells}
        assert by_run[0] != by_run[1]

    def test_config_hash_on_every_row(self):
        report = run_experiment(small_config(runs=1))
        for line in report.metrics_csv().splitlines()[1:]:
            assert line.startswith(report.config_hash)

    def test_report_files_written(self, tmp_path):
        report = run_experiment(small_config(runs=1))
        report.write(tmp_path)
        for name in ("metrics.csv", "tippett.csv", "report.json"):
            assert (tmp_path / name).exists()

    def test_cllr_aggregates(self):
        report = run_experiment(small_config())
        dists = report.cllr_distributions()
        key = ("one_vs_rest", True, "menstrual_secretion+vaginal_mucosa")
        assert [round(v, 12) for v in dists[key]] == \
            [round(c.metrics.cllr, 12) for c in report.cells]
        bundle = report.to_json_bundle()
        assert bundle["aggregates"][0]["cllr_min"] <= \
            bundle["aggregates"][0]["cllr_median"] <= \
            bundle["aggregates"][0]["cllr_max"]

    def test_power_set_strategy_runs(self):
        cfg = small_config(runs=1, strategies=("one_vs_rest", "power_set"))
        report = run_experiment(cfg)
        strategies = {c.strategy for c in report.cells}
        assert strategies == {"one_vs_rest", "power_set"}
        for c in report.cells:
            assert 0.0 < c.metrics.cllr < 1.0


class TestSensitivity:
    def test_no_shift_is_a_noop(self):
        # Common random numbers: the unshifted "shifted" system is the
        # baseline system, so the spec's training-noise bound holds exactly.
        cfg = small_config(runs=1)
        result = sensitivity_analysis(cfg, BodyFluid.BLOOD, level=0.5)
        for median in result.median_abs_delta.values():
            assert median < 0.2
        for row in result.rows:
            assert row.log10_lr_uniform == row.log10_lr_shifted

    def test_paired_rows_cover_test_set(self):
        cfg = small_config(runs=1)
        result = sensitivity_analysis(cfg, BodyFluid.BLOOD, level=0.9)
        # 2^4 free-fluid combinations x 4 per combination.
        assert len(result.rows) == 64
        for row in result.rows:
            assert np.isfinite(row.log10_lr_uniform)
            assert np.isfinite(row.log10_lr_shifted)

    def test_interest_fluid_rejected(self):
        cfg = small_config()
        with pytest.raises(ConfigError, match="interest"):
            sensitivity_analysis(cfg, BodyFluid.VAGINAL_MUCOSA, level=0.9)

    def test_level_range_checked(self):
        with pytest.raises(ConfigError):
            sensitivity_analysis(small_config(), BodyFluid.BLOOD, level=1.5)


class TestTrainVariant:
    def test_variant_evaluates_cases(self, singles_small, panel, case3):
        variant, metrics = train_variant(singles_small, VM_INTEREST, seed=1)
        from mixlr.casework import evaluate_case

        report = evaluate_case(variant, case3)
        assert np.isfinite(report.log10_lr)
        assert 0.0 < metrics.cllr < 1.0
        assert variant.interest == VM_INTEREST

    def test_deterministic(self, singles_small):
        a, _ = train_variant(singles_small, VM_INTEREST, seed=5)
        b, _ = train_variant(singles_small, VM_INTEREST, seed=5)
        assert a.to_json() == b.to_json()

    def test_interest_needs_positive_background(self, singles_small):
        with pytest.raises(ConfigError):
            train_variant(singles_small, frozenset({BodyFluid.SKIN_PENILE}))


class TestCompareWithNOverTwo:
    def test_engineered_zero_cases(self, worked_variant, panel):
        cases = [observation(panel, {"HBB": k}) for k in range(3)]
        hp = HypothesisPair(interest=VM_INTEREST)
        table = compare_with_n_over_2(worked_variant, cases, hp)
        rows = dict(table.counts)
        assert sum(rows[NOverTwoVerdict.NO_INDICATION]) == 3
        assert table.total() == 3

    def test_worked_case_lands_in_moderate_support(self, worked_variant, panel):
        hp = HypothesisPair(interest=VM_INTEREST)
        table = compare_with_n_over_2(
            worked_variant, [observation(panel, CASE_3)], hp)
        rows = dict(table.counts)
        column = table.columns.index("moderate support for H1")
        assert rows[NOverTwoVerdict.NO_RELIABLE_STATEMENT][column] == 1

    def test_row_sums_partition_cases(self, worked_variant, panel):
        rng = np.random.default_rng(0)
        cases = [observation(panel, {m: int(rng.integers(0, 5))
                                     for m in panel.markers})
                 for _ in range(20)]
        hp = HypothesisPair(interest=VM_INTEREST)
        table = compare_with_n_over_2(worked_variant, cases, hp)
        assert table.total() == 20

    def test_empty_cases_rejected(self, worked_variant):
        hp = HypothesisPair(interest=VM_INTEREST)
        with pytest.raises(ValueError):
            compare_with_n_over_2(worked_variant, [], hp)
