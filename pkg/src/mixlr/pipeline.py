"""End-to-end experiment orchestration.

One run = split the single-fluid samples, augment three mixture datasets,
train on the training set, calibrate on the calibration set, evaluate the
calibrated LRs on the test set. The runner repeats this over seeded runs and
a grid of {strategy x dichotomization x interest set}, emitting CSV tables
and a JSON bundle that are byte-identical for identical configs.

Randomness is derived from the master seed through numpy SeedSequence spawn
keys: (run, purpose) for run-scoped streams, purpose alone for run-free ones.
Grid cells consume no randomness of their own, so adding cells never changes
the streams of the others.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _jsonutil
from .augmentation import (
    AugmentationError,
    AugmentedDataset,
    BackgroundLevels,
    HypothesisPair,
    SplitSpec,
    build_augmented_dataset,
    split_dataset,
)
from .calibrate import (
    Calibrator,
    LRValue,
    apply_calibrator_many,
    clip_score,
    fit_calibrator,
    fuse_coefficients,
)
from .casework import (
    CaseObservation,
    MarkerFluidMap,
    DEFAULT_MARKER_FLUID_MAP,
    ModelVariant,
    NOverTwoVerdict,
    n_over_2,
)
from .classify import (
    BinaryLogReg,
    PowersetLogReg,
    TrainingConfig,
    score_binary_many,
    score_powerset_many,
    train_binary_logreg,
    train_powerset_logreg,
)
from .metrics import (
    DEFAULT_LR_CAP,
    MetricReport,
    TippettCurve,
    cllr,
    roc_auc,
    tippett,
)
from .profiles import (
    BodyFluid,
    Dataset,
    DetectionRates,
    MarkerPanel,
    format_labels,
    reference_detection_rates,
    sorted_fluids,
    synthesize_dataset,
)

logger = logging.getLogger(__name__)

STRATEGY_ONE_VS_REST = "one_vs_rest"
STRATEGY_POWER_SET = "power_set"
STRATEGIES = (STRATEGY_ONE_VS_REST, STRATEGY_POWER_SET)

# Purpose codes for seed derivation; run-scoped streams use (run, purpose).
_PURPOSE = {
    "synthesize": 0,
    "split": 1,
    "augment_train": 2,
    "augment_calibration": 3,
    "augment_test": 4,
}

AUC_MONOTONE_TOLERANCE = 1e-12


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def derive_rng(master_seed: int, purpose: str, run: int | None = None,
               ) -> np.random.Generator:
    """Independent generator for (master_seed, purpose[, run])."""
    code = _PURPOSE[purpose]
    key = (code,) if run is None else (run, code)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


@dataclass(frozen=True)
class SynthSpec:
    """How to synthesize singles when no CSV is given."""

    rates_csv: str | None = None  # None -> built-in reference rates
    n_per_fluid: int = 30
    reps_per_sample: int = 4

    def load_rates(self, panel: MarkerPanel) -> DetectionRates:
        if self.rates_csv is None:
            return reference_detection_rates(panel)
        return DetectionRates.from_csv(Path(self.rates_csv).read_text(), panel)


@dataclass(frozen=True)
class ExperimentConfig:
    runs: int = 10
    seed: int = 0
    data_csv: str | None = None
    synthesize: SynthSpec | None = field(default_factory=SynthSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    counts: tuple[int, int, int] = (10, 10, 5)
    backgrounds: BackgroundLevels = field(default_factory=BackgroundLevels.default)
    strategies: tuple[str, ...] = (STRATEGY_ONE_VS_REST,)
    dichotomize: tuple[bool, ...] = (True,)
    interest_sets: tuple[frozenset[BodyFluid], ...] = (
        frozenset({BodyFluid.VAGINAL_MUCOSA, BodyFluid.MENSTRUAL_SECRETION}),
    )
    cap: float = DEFAULT_LR_CAP
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.strategies:
            raise ConfigError("at least one strategy required")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
        if not self.dichotomize:
            raise ConfigError("at least one dichotomization mode required")
        if not self.interest_sets:
            raise ConfigError("at least one interest set required")
        if any(c < 1 for c in self.counts):
            raise ConfigError("augmentation counts must be >= 1")
        if (self.data_csv is None) == (self.synthesize is None):
            raise ConfigError("exactly one of data_csv / synthesize is required")
        eligible = set(self.backgrounds.eligible())
        for interest in self.interest_sets:
            if not interest:
                raise ConfigError("interest sets must be non-empty")
            if not interest & eligible:
                raise ConfigError(
                    f"interest set {format_labels(interest)!r} has no fluid "
                    f"with a positive background level; H1 cannot occur")

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "seed": self.seed,
            "data_csv": self.data_csv,
            "synthesize": None if self.synthesize is None else {
                "rates_csv": self.synthesize.rates_csv,
                "n_per_fluid": self.synthesize.n_per_fluid,
                "reps_per_sample": self.synthesize.reps_per_sample,
            },
            "split": {"train": self.split.train,
                      "calibration": self.split.calibration,
                      "test": self.split.test,
                      "seed": self.split.seed},
            "counts": list(self.counts),
            "backgrounds": {f.value: p for f, p in self.backgrounds.levels},
            "strategies": list(self.strategies),
            "dichotomize": list(self.dichotomize),
            "interest_sets": [[f.value for f in sorted_fluids(s)]
                              for s in self.interest_sets],
            "cap": self.cap,
            "training": {"l2_per_sample": self.training.l2_per_sample,
                         "tolerance": self.training.tolerance,
                         "max_iter": self.training.max_iter,
                         "seed": self.training.seed},
        }

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        try:
            doc = tomllib.loads(Path(path).read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        kwargs: dict = {}
        for key in ("runs", "seed", "data_csv", "cap"):
            if key in doc:
                kwargs[key] = doc[key]
        if "split" in doc:
            kwargs["split"] = SplitSpec(**doc["split"])
        if "counts" in doc:
            counts = doc["counts"]
            if isinstance(counts, Mapping):
                counts = (counts["train"], counts["calibration"], counts["test"])
            kwargs["counts"] = tuple(int(c) for c in counts)
        if "backgrounds" in doc:
            overrides = {BodyFluid.from_name(k): float(v)
                         for k, v in doc["backgrounds"].items()}
            kwargs["backgrounds"] = BackgroundLevels.default().with_levels(overrides)
        if "strategies" in doc:
            kwargs["strategies"] = tuple(doc["strategies"])
        if "dichotomize" in doc:
            kwargs["dichotomize"] = tuple(bool(v) for v in doc["dichotomize"])
        if "interest_sets" in doc:
            kwargs["interest_sets"] = tuple(
                frozenset(BodyFluid.from_name(n) for n in names)
                for names in doc["interest_sets"])
        if "training" in doc:
            kwargs["training"] = TrainingConfig(**doc["training"])
        if "synthesize" in doc:
            kwargs["synthesize"] = SynthSpec(**doc["synthesize"])
        elif kwargs.get("data_csv"):
            kwargs["synthesize"] = None
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class CellResult:
    run: int
    strategy: str
    dichotomized: bool
    interest: tuple[BodyFluid, ...]
    metrics: MetricReport
    tippett: TippettCurve

    @property
    def interest_key(self) -> str:
        return format_labels(self.interest)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    config_hash: str
    cells: tuple[CellResult, ...]

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["config_hash", "run", "strategy", "dichotomized",
                         "interest", "cllr", "auc", "fp_rate", "fn_rate",
                         "n_h1", "n_h2"])
        for c in self.cells:
            m = c.metrics
            writer.writerow([self.config_hash, c.run, c.strategy,
                             int(c.dichotomized), c.interest_key,
                             repr(m.cllr), repr(m.auc), repr(m.fp_rate),
                             repr(m.fn_rate), m.n_h1, m.n_h2])
        return buf.getvalue()

    def tippett_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["config_hash", "run", "strategy", "dichotomized",
                         "interest", "threshold", "fraction_h1", "fraction_h2"])
        for c in self.cells:
            for t, f1, f2 in c.tippett.rows():
                writer.writerow([self.config_hash, c.run, c.strategy,
                                 int(c.dichotomized), c.interest_key,
                                 repr(t), repr(f1), repr(f2)])
        return buf.getvalue()

    def cllr_distributions(self) -> dict[tuple[str, bool, str], list[float]]:
        """Per (strategy, mode, interest): the Cllr values over the runs."""
        out: dict[tuple[str, bool, str], list[float]] = {}
        for c in self.cells:
            out.setdefault((c.strategy, c.dichotomized, c.interest_key),
                           []).append(c.metrics.cllr)
        return out

    def to_json_bundle(self) -> dict:
        aggregates = [
            {
                "strategy": strategy,
                "dichotomized": dichotomized,
                "interest": interest_key,
                "cllr": values,
                "cllr_min": min(values),
                "cllr_median": float(np.median(values)),
                "cllr_max": max(values),
            }
            for (strategy, dichotomized, interest_key), values
            in sorted(self.cllr_distributions().items())
        ]
        return {
            "config_hash": self.config_hash,
            "config": self.config.to_dict(),
            "aggregates": aggregates,
            "cells": [
                {
                    "run": c.run,
                    "strategy": c.strategy,
                    "dichotomized": c.dichotomized,
                    "interest": [f.value for f in c.interest],
                    "metrics": {
                        "cllr": c.metrics.cllr,
                        "auc": c.metrics.auc,
                        "fp_rate": c.metrics.fp_rate,
                        "fn_rate": c.metrics.fn_rate,
                        "n_h1": c.metrics.n_h1,
                        "n_h2": c.metrics.n_h2,
                    },
                    "tippett": [list(row) for row in c.tippett.rows()],
                }
                for c in self.cells
            ],
        }

    def write(self, outdir: str | Path) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "metrics.csv").write_text(self.metrics_csv())
        (outdir / "tippett.csv").write_text(self.tippett_csv())
        (outdir / "report.json").write_text(
            _jsonutil.dumps(self.to_json_bundle(), indent=2) + "\n")


def load_singles(cfg: ExperimentConfig, panel: MarkerPanel | None = None) -> Dataset:
    panel = panel or MarkerPanel()
    if cfg.data_csv is not None:
        from .profiles import parse_profile_table
        return parse_profile_table(Path(cfg.data_csv).read_text(), panel)
    rates = cfg.synthesize.load_rates(panel)
    seed = int(derive_rng(cfg.seed, "synthesize").integers(2 ** 63))
    return synthesize_dataset(rates, cfg.synthesize.n_per_fluid,
                              cfg.synthesize.reps_per_sample, rng_seed=seed)


def _augment_split(singles: Dataset, bg: BackgroundLevels, count: int,
                   dichotomized: bool, rng: np.random.Generator) -> AugmentedDataset:
    """Uniform enumeration when every free level is 0.5, sampling otherwise."""
    free = bg.free()
    if all(bg.level(f) == 0.5 for f in free):
        return build_augmented_dataset(singles, bg, count_per_combination=count,
                                       dichotomized=dichotomized, rng=rng)
    total = count * 2 ** len(free)
    return build_augmented_dataset(singles, bg, total_count=total,
                                   dichotomized=dichotomized, rng=rng)


@dataclass(frozen=True)
class TrainedSystem:
    """A scoring function and its calibrator for one grid cell."""

    strategy: str
    dichotomized: bool
    interest: frozenset[BodyFluid]
    binary: BinaryLogReg | None
    powerset: PowersetLogReg | None
    calibrator: Calibrator

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        if self.strategy == STRATEGY_ONE_VS_REST:
            return score_binary_many(self.binary, X)
        return score_powerset_many(self.powerset, X, self.interest)

    def log10_lrs(self, X: np.ndarray) -> np.ndarray:
        return apply_calibrator_many(self.calibrator, self.raw_scores(X))


def _train_system(strategy: str, train: AugmentedDataset, calib: AugmentedDataset,
                  interest: frozenset[BodyFluid], cfg: ExperimentConfig,
                  powerset_cache: dict | None = None) -> TrainedSystem:
    standardize = not train.dichotomized
    X_train = train.feature_matrix()
    X_calib = calib.feature_matrix()
    binary = powerset = None
    if strategy == STRATEGY_ONE_VS_REST:
        y = train.h1_flags(interest)
        binary = train_binary_logreg(X_train, y, cfg.training, standardize=standardize)
        scores = score_binary_many(binary, X_calib)
    else:
        # One multinomial model serves every interest set of a (run, mode) cell.
        if powerset_cache is not None and "powerset" in powerset_cache:
            powerset = powerset_cache["powerset"]
        else:
            powerset = train_powerset_logreg(
                X_train, train.label_sets(), cfg.training,
                fluids=cfg.backgrounds.eligible(), standardize=standardize)
            if powerset_cache is not None:
                powerset_cache["powerset"] = powerset
        scores = score_powerset_many(powerset, X_calib, interest)
    calibrator = fit_calibrator(np.log10(clip_score(scores)),
                                calib.h1_flags(interest))
    return TrainedSystem(strategy=strategy, dichotomized=train.dichotomized,
                         interest=interest, binary=binary, powerset=powerset,
                         calibrator=calibrator)


def _evaluate_cell(system: TrainedSystem, test: AugmentedDataset,
                   interest: frozenset[BodyFluid]) -> tuple[MetricReport, TippettCurve]:
    X = test.feature_matrix()
    flags = test.h1_flags(interest)
    if flags.all() or not flags.any():
        raise AugmentationError(
            f"test set contains a single class for {format_labels(interest)!r}")
    raw = system.raw_scores(X)
    log_lrs = system.log10_lrs(X)
    # Clamp to the float10 exponent range; the bound only binds in regimes
    # far beyond the reporting cap, where ranks and the LR=1 operating point
    # are unaffected.
    lrs = 10.0 ** np.clip(log_lrs, -300.0, 300.0)
    roc = roc_auc(lrs, flags)
    # Calibration is strictly monotone, so it must leave AUC untouched.
    raw_auc = roc_auc(raw, flags).auc
    if abs(raw_auc - roc.auc) > AUC_MONOTONE_TOLERANCE:
        raise RuntimeError(
            f"calibration changed AUC: {raw_auc!r} -> {roc.auc!r}")
    h1 = [LRValue.from_log10(v) for v in log_lrs[flags]]
    h2 = [LRValue.from_log10(v) for v in log_lrs[~flags]]
    report = MetricReport(cllr=cllr(h1, h2), auc=roc.auc, fp_rate=roc.fp_rate,
                          fn_rate=roc.fn_rate, n_h1=len(h1), n_h2=len(h2))
    return report, tippett(h1, h2)


def run_experiment(cfg: ExperimentConfig, singles: Dataset | None = None,
                   ) -> ExperimentReport:
    """Execute the full seeded grid and collect per-cell metrics."""
    singles = singles if singles is not None else load_singles(cfg)
    cells: list[CellResult] = []
    for run in range(cfg.runs):
        logger.info("run %d/%d", run + 1, cfg.runs)
        split_seed = int(derive_rng(cfg.seed, "split", run).integers(2 ** 63))
        parts = split_dataset(singles, replace(cfg.split, seed=split_seed))
        for dichotomized in cfg.dichotomize:
            augmented = [
                _augment_split(part, cfg.backgrounds, count, dichotomized,
                               derive_rng(cfg.seed, purpose, run))
                for part, count, purpose in zip(
                    parts, cfg.counts,
                    ("augment_train", "augment_calibration", "augment_test"))
            ]
            train, calib, test = augmented
            powerset_cache: dict = {}
            for strategy in cfg.strategies:
                for interest in cfg.interest_sets:
                    system = _train_system(strategy, train, calib, interest,
                                           cfg, powerset_cache)
                    metrics_report, curve = _evaluate_cell(system, test, interest)
                    cells.append(CellResult(
                        run=run, strategy=strategy, dichotomized=dichotomized,
                        interest=sorted_fluids(interest),
                        metrics=metrics_report, tippett=curve))
    return ExperimentReport(config=cfg, config_hash=cfg.config_hash(),
                            cells=tuple(cells))


# --------------------------------------------------------------------------
# sensitivity analysis

@dataclass(frozen=True)
class SensitivityRow:
    run: int
    strategy: str
    dichotomized: bool
    interest: tuple[BodyFluid, ...]
    log10_lr_uniform: float
    log10_lr_shifted: float
    is_h1: bool


@dataclass(frozen=True)
class SensitivityResult:
    fluid: BodyFluid
    level: float
    rows: tuple[SensitivityRow, ...]
    median_abs_delta: dict[tuple[int, str, bool, str], float]

    def rows_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["run", "strategy", "dichotomized", "interest",
                         "log10_lr_uniform", "log10_lr_shifted", "is_h1"])
        for r in self.rows:
            writer.writerow([r.run, r.strategy, int(r.dichotomized),
                             format_labels(r.interest),
                             repr(r.log10_lr_uniform), repr(r.log10_lr_shifted),
                             int(r.is_h1)])
        return buf.getvalue()

    def summary_dict(self) -> dict:
        return {
            "fluid": self.fluid.value,
            "level": self.level,
            "median_abs_delta_log10_lr": {
                f"run={k[0]} strategy={k[1]} dichotomized={k[2]} interest={k[3]}": v
                for k, v in sorted(self.median_abs_delta.items())
            },
        }


def sensitivity_analysis(cfg: ExperimentConfig, fluid: BodyFluid,
                         level: float = 0.9,
                         singles: Dataset | None = None) -> SensitivityResult:
    """Compare LRs from a system trained under a shifted background level.

    A second system is trained (and calibrated) on data generated with the
    given fluid present at `level` instead of its configured background; both
    systems are evaluated on the same baseline-background test set, pairing
    the LRs row by row. The shifted augmentation reuses the baseline random
    streams (common random numbers), so setting the level to the configured
    background reproduces the baseline system exactly and the paired
    differences isolate the background assumption.
    """
    for interest in cfg.interest_sets:
        if fluid in interest:
            raise ConfigError(
                f"sensitivity fluid {fluid.value!r} is in the interest set "
                f"{format_labels(interest)!r}")
    if not 0.0 <= level <= 1.0:
        raise ConfigError("sensitivity level must be in [0, 1]")
    singles = singles if singles is not None else load_singles(cfg)
    shifted_bg = cfg.backgrounds.with_levels({fluid: level})
    rows: list[SensitivityRow] = []
    medians: dict[tuple[int, str, bool, str], float] = {}
    for run in range(cfg.runs):
        split_seed = int(derive_rng(cfg.seed, "split", run).integers(2 ** 63))
        parts = split_dataset(singles, replace(cfg.split, seed=split_seed))
        for dichotomized in cfg.dichotomize:
            base_sets = [
                _augment_split(part, cfg.backgrounds, count, dichotomized,
                               derive_rng(cfg.seed, purpose, run))
                for part, count, purpose in zip(
                    parts, cfg.counts,
                    ("augment_train", "augment_calibration", "augment_test"))
            ]
            train_u, calib_u, test = base_sets
            train_s = _augment_split(parts[0], shifted_bg, cfg.counts[0],
                                     dichotomized,
                                     derive_rng(cfg.seed, "augment_train", run))
            calib_s = _augment_split(parts[1], shifted_bg, cfg.counts[1],
                                     dichotomized,
                                     derive_rng(cfg.seed, "augment_calibration", run))
            X_test = test.feature_matrix()
            for strategy in cfg.strategies:
                for interest in cfg.interest_sets:
                    sys_u = _train_system(strategy, train_u, calib_u, interest, cfg)
                    sys_s = _train_system(strategy, train_s, calib_s, interest, cfg)
                    l_u = sys_u.log10_lrs(X_test)
                    l_s = sys_s.log10_lrs(X_test)
                    flags = test.h1_flags(interest)
                    for lu, ls, h1 in zip(l_u, l_s, flags):
                        rows.append(SensitivityRow(
                            run=run, strategy=strategy, dichotomized=dichotomized,
                            interest=sorted_fluids(interest),
                            log10_lr_uniform=float(lu),
                            log10_lr_shifted=float(ls), is_h1=bool(h1)))
                    key = (run, strategy, dichotomized, format_labels(interest))
                    medians[key] = float(np.median(np.abs(l_u - l_s)))
    return SensitivityResult(fluid=fluid, level=level, rows=tuple(rows),
                             median_abs_delta=medians)


# --------------------------------------------------------------------------
# deployable variants and the n/2 comparison

def train_variant(singles: Dataset, interest: frozenset[BodyFluid],
                  backgrounds: BackgroundLevels | None = None,
                  dichotomized: bool = True,
                  split: SplitSpec | None = None,
                  counts: tuple[int, int, int] = (10, 10, 5),
                  training: TrainingConfig | None = None,
                  seed: int = 0) -> tuple[ModelVariant, MetricReport]:
    """Train, calibrate and fuse a deployable one-vs-rest variant.

    Runs the standard split/augment/train/calibrate protocol once and folds
    the calibrator into the coefficients; returns the variant together with
    its held-out test metrics.
    """
    backgrounds = backgrounds or BackgroundLevels.default()
    training = training or TrainingConfig()
    if not frozenset(interest) & set(backgrounds.eligible()):
        raise ConfigError(
            f"interest set {format_labels(interest)!r} has no fluid with a "
            f"positive background level; H1 cannot occur")
    cfg = ExperimentConfig(
        runs=1, seed=seed, data_csv=None, synthesize=SynthSpec(),
        split=split or SplitSpec(), counts=counts, backgrounds=backgrounds,
        strategies=(STRATEGY_ONE_VS_REST,), dichotomize=(dichotomized,),
        interest_sets=(frozenset(interest),), training=training)
    split_seed = int(derive_rng(seed, "split", 0).integers(2 ** 63))
    parts = split_dataset(singles, replace(cfg.split, seed=split_seed))
    augmented = [
        _augment_split(part, backgrounds, count, dichotomized,
                       derive_rng(seed, purpose, 0))
        for part, count, purpose in zip(
            parts, counts, ("augment_train", "augment_calibration", "augment_test"))
    ]
    train, calib, test = augmented
    system = _train_system(STRATEGY_ONE_VS_REST, train, calib,
                           frozenset(interest), cfg)
    metrics_report, _ = _evaluate_cell(system, test, frozenset(interest))
    fused = fuse_coefficients(system.calibrator, system.binary)
    variant = ModelVariant(
        interest=frozenset(interest), backgrounds=backgrounds,
        dichotomized=dichotomized, model=fused, panel=singles.panel,
        calibrator=system.calibrator, strategy=STRATEGY_ONE_VS_REST,
        l2_per_sample=training.l2_per_sample, training_seed=seed)
    return variant, metrics_report


def make_trainer(singles: Dataset, split: SplitSpec | None = None,
                 counts: tuple[int, int, int] = (10, 10, 5),
                 training: TrainingConfig | None = None, seed: int = 0):
    """Trainer closure for ModelStore on-demand training."""

    def trainer(interest: frozenset[BodyFluid], backgrounds: BackgroundLevels,
                dichotomized: bool) -> ModelVariant:
        variant, _ = train_variant(singles, interest, backgrounds, dichotomized,
                                   split=split, counts=counts,
                                   training=training, seed=seed)
        return variant

    return trainer


@dataclass(frozen=True)
class CrossTab:
    """Contingency table: n/2 verdict rows vs verbal-scale columns."""

    columns: tuple[str, ...]
    counts: tuple[tuple[NOverTwoVerdict, tuple[int, ...]], ...]

    def total(self) -> int:
        return sum(sum(row) for _, row in self.counts)

    def to_json_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "rows": {v.value: list(row) for v, row in self.counts},
        }


def compare_with_n_over_2(variant: ModelVariant, cases: Sequence[CaseObservation],
                          hp: HypothesisPair,
                          marker_map: MarkerFluidMap = DEFAULT_MARKER_FLUID_MAP,
                          cap: float = DEFAULT_LR_CAP) -> CrossTab:
    """Cross-tabulate the legacy n/2 verdict against the model's verbal band."""
    if not cases:
        raise ValueError("cases must be non-empty")
    from .casework import evaluate_case

    verdicts = []
    buckets = []
    for obs in cases:
        verdicts.append(n_over_2(obs, hp.interest, marker_map))
        report = evaluate_case(variant, obs, hp=hp, marker_map=marker_map, cap=cap)
        buckets.append(report.verbal)
    columns = tuple(sorted(set(buckets)))
    col_index = {c: i for i, c in enumerate(columns)}
    rows = []
    for verdict in NOverTwoVerdict:
        row = [0] * len(columns)
        for v, b in zip(verdicts, buckets):
            if v == verdict:
                row[col_index[b]] += 1
        rows.append((verdict, tuple(row)))
    return CrossTab(columns=columns, counts=tuple(rows))
