"""Stratified splitting and in-silico mixture augmentation.

Mixture profiles are built from real single-fluid samples: one donor per
fluid, replicates shuffled per donor, combined replicate-by-replicate with a
per-marker maximum, then averaged into a feature vector. Label sets are drawn
from configurable per-fluid background levels, optionally conditioned on one
branch of a hypothesis pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .profiles import (
    BodyFluid,
    Dataset,
    MarkerPanel,
    Sample,
    format_labels,
    sorted_fluids,
)

DEFAULT_BACKGROUND = 0.5
MAX_CONDITION_DRAWS = 100_000


class AugmentationError(ValueError):
    """Invalid augmentation request (missing donors, bad levels, ...)."""


@dataclass(frozen=True)
class BackgroundLevels:
    """Assumed marginal presence probability per body fluid.

    Fluids at 0 never appear in generated label sets, fluids at 1 always do;
    everything in between is drawn independently.
    """

    levels: tuple[tuple[BodyFluid, float], ...]

    def __post_init__(self) -> None:
        by_fluid = dict(self.levels)
        if set(by_fluid) != set(BodyFluid):
            raise AugmentationError("background levels must cover every body fluid")
        for fluid, p in by_fluid.items():
            if not 0.0 <= p <= 1.0:
                raise AugmentationError(
                    f"background level for {fluid.value} outside [0, 1]: {p}")
        ordered = tuple((f, float(by_fluid[f])) for f in BodyFluid)
        object.__setattr__(self, "levels", ordered)

    @classmethod
    def default(cls) -> "BackgroundLevels":
        """0.5 for every fluid except penile skin, which defaults to absent."""
        return cls.uniform(DEFAULT_BACKGROUND).with_levels({BodyFluid.SKIN_PENILE: 0.0})

    @classmethod
    def uniform(cls, p: float) -> "BackgroundLevels":
        return cls(tuple((f, p) for f in BodyFluid))

    def with_levels(self, overrides: Mapping[BodyFluid, float]) -> "BackgroundLevels":
        by_fluid = dict(self.levels)
        by_fluid.update(overrides)
        return BackgroundLevels(tuple(by_fluid.items()))

    def level(self, fluid: BodyFluid) -> float:
        return dict(self.levels)[fluid]

    def as_dict(self) -> dict[BodyFluid, float]:
        return dict(self.levels)

    def eligible(self) -> tuple[BodyFluid, ...]:
        """Fluids that can occur at all (level > 0)."""
        return tuple(f for f, p in self.levels if p > 0)

    def free(self) -> tuple[BodyFluid, ...]:
        """Fluids whose presence is uncertain (0 < level < 1)."""
        return tuple(f for f, p in self.levels if 0 < p < 1)

    def forced(self) -> tuple[BodyFluid, ...]:
        """Fluids assumed present in every sample (level == 1)."""
        return tuple(f for f, p in self.levels if p == 1)


@dataclass(frozen=True)
class HypothesisPair:
    """H1: at least one fluid of interest is present; H2: none of them is.

    Fluids whose presence the parties agree on (or the examiner is willing to
    assume) are pinned via fixed_present / fixed_absent.
    """

    interest: frozenset[BodyFluid]
    fixed_present: frozenset[BodyFluid] = frozenset()
    fixed_absent: frozenset[BodyFluid] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "interest", frozenset(self.interest))
        object.__setattr__(self, "fixed_present", frozenset(self.fixed_present))
        object.__setattr__(self, "fixed_absent", frozenset(self.fixed_absent))
        if not self.interest:
            raise AugmentationError("interest set must be non-empty")
        if self.interest & self.fixed_absent:
            raise AugmentationError("interest and fixed_absent overlap")
        if self.fixed_present & self.fixed_absent:
            raise AugmentationError("fixed_present and fixed_absent overlap")

    def implied_backgrounds(self, base: BackgroundLevels) -> BackgroundLevels:
        """Background levels with the pinned fluids realized as 1 / 0."""
        overrides: dict[BodyFluid, float] = {}
        overrides.update({f: 1.0 for f in self.fixed_present})
        overrides.update({f: 0.0 for f in self.fixed_absent})
        return base.with_levels(overrides)


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for the train / calibration / test partition."""

    train: float = 0.40
    calibration: float = 0.40
    test: float = 0.20
    seed: int = 0

    def __post_init__(self) -> None:
        fractions = (self.train, self.calibration, self.test)
        if any(f <= 0 for f in fractions):
            raise AugmentationError("split fractions must be positive")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise AugmentationError("split fractions must sum to 1")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train, self.calibration, self.test)


def _apportion(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment; remainder ties go to earlier parts."""
    ideal = [n * f for f in fractions]
    base = [math.floor(v) for v in ideal]
    leftover = n - sum(base)
    by_remainder = sorted(range(len(fractions)),
                          key=lambda i: (-(ideal[i] - base[i]), i))
    for i in by_remainder[:leftover]:
        base[i] += 1
    return base


def split_dataset(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified random partition into train / calibration / test.

    Stratification is by label set; per stratum the counts follow the split
    fractions as closely as integer rounding allows. Deterministic for a
    fixed seed; the three parts are disjoint and exhaustive.
    """
    groups = ds.by_labels()
    for labels, samples in groups.items():
        if len(samples) < 3:
            raise AugmentationError(
                f"fluid {format_labels(labels) or '(blank)'!r} has only "
                f"{len(samples)} samples, need at least 3 to split")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    index_of = {s.id: i for i, s in enumerate(ds.samples)}
    buckets: tuple[list[int], list[int], list[int]] = ([], [], [])
    for labels in sorted(groups, key=lambda ls: [s.value for s in sorted_fluids(ls)]):
        samples = groups[labels]
        perm = rng.permutation(len(samples))
        counts = _apportion(len(samples), spec.fractions)
        start = 0
        for part, count in enumerate(counts):
            for k in perm[start:start + count]:
                buckets[part].append(index_of[samples[k].id])
            start += count
    out = []
    for part in buckets:
        chosen = tuple(ds.samples[i] for i in sorted(part))
        out.append(Dataset(panel=ds.panel, samples=chosen))
    return out[0], out[1], out[2]


def mix_labels(bg: BackgroundLevels, rng: np.random.Generator,
               hp: HypothesisPair | None = None,
               branch: str | None = None) -> frozenset[BodyFluid]:
    """Draw a label set: each fluid present independently at its background level.

    With a hypothesis pair and branch ("h1" or "h2"), fixed_present fluids are
    forced in, fixed_absent fluids forced out, and draws are rejected until
    the label set satisfies the branch (H1: intersects the interest set,
    H2: disjoint from it).
    """
    if (hp is None) != (branch is None):
        raise AugmentationError("hp and branch must be given together")
    probs = bg.as_dict()
    if hp is not None:
        if branch not in ("h1", "h2"):
            raise AugmentationError(f"branch must be 'h1' or 'h2', got {branch!r}")
        probs.update({f: 1.0 for f in hp.fixed_present})
        probs.update({f: 0.0 for f in hp.fixed_absent})
        interest_probs = [probs[f] for f in hp.interest]
        if branch == "h1" and all(p == 0 for p in interest_probs):
            raise AugmentationError(
                "H1 branch unsatisfiable: every fluid of interest has background 0")
        if branch == "h2" and any(p == 1 for p in interest_probs):
            raise AugmentationError(
                "H2 branch unsatisfiable: a fluid of interest has background 1")
    fluids = tuple(BodyFluid)
    p = np.array([probs[f] for f in fluids])
    for _ in range(MAX_CONDITION_DRAWS):
        draw = rng.random(len(fluids)) < p
        labels = frozenset(f for f, hit in zip(fluids, draw) if hit)
        if hp is None:
            return labels
        hit_interest = bool(labels & hp.interest)
        if (branch == "h1") == hit_interest:
            return labels
    raise AugmentationError("conditioned label draw did not satisfy the branch")


@dataclass(frozen=True, eq=False)
class AugmentedSample:
    """An in-silico mixture: feature vector, label set, donor provenance."""

    labels: frozenset[BodyFluid]
    features: np.ndarray
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        arr = np.array(self.features, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "features", arr)
        object.__setattr__(self, "labels", frozenset(self.labels))
        object.__setattr__(self, "provenance", tuple(self.provenance))


@dataclass(frozen=True)
class AugmentedDataset:
    panel: MarkerPanel
    samples: tuple[AugmentedSample, ...]
    background: BackgroundLevels
    dichotomized: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise AugmentationError("augmented dataset is empty")

    def __len__(self) -> int:
        return len(self.samples)

    def feature_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    def label_sets(self) -> list[frozenset[BodyFluid]]:
        return [s.labels for s in self.samples]

    def h1_flags(self, interest: frozenset[BodyFluid]) -> np.ndarray:
        return np.array([bool(s.labels & interest) for s in self.samples])


def single_fluid_index(singles: Dataset) -> dict[BodyFluid, list[Sample]]:
    """Donor pool: single-fluid samples grouped by their fluid."""
    pools: dict[BodyFluid, list[Sample]] = {}
    for s in singles.samples:
        if len(s.labels) == 1:
            pools.setdefault(next(iter(s.labels)), []).append(s)
    return pools


def combine_replicates(donor_replicates: Sequence[np.ndarray]) -> np.ndarray:
    """Combine already-shuffled donor replicate stacks into mixture replicates.

    Each input is an (n_i, p) rfu matrix; replicate j of the mixture is the
    per-marker maximum over every donor's replicate j. The mixture keeps
    min(n_i) replicates so no donor replicate is invented.
    """
    if not donor_replicates:
        raise AugmentationError("no donors to combine")
    m = min(mat.shape[0] for mat in donor_replicates)
    stacked = np.stack([mat[:m] for mat in donor_replicates])
    return stacked.max(axis=0)


def _features_from_replicates(reps: np.ndarray, threshold: float,
                              dichotomized: bool,
                              binarize_after_mean: bool) -> np.ndarray:
    if not dichotomized:
        return reps.mean(axis=0)
    if binarize_after_mean:
        return (reps.mean(axis=0) >= threshold).astype(float)
    return (reps >= threshold).astype(float).mean(axis=0)


def augment_mixture(singles: Dataset, labels: frozenset[BodyFluid],
                    dichotomized: bool, rng: np.random.Generator,
                    binarize_after_mean: bool = False,
                    _pools: dict[BodyFluid, list[Sample]] | None = None,
                    ) -> AugmentedSample:
    """Build one augmented sample for the given label set.

    One donor per fluid, drawn uniformly with replacement; each donor's
    replicates are shuffled independently before the per-marker-maximum
    combination. In dichotomized mode each mixture replicate is binarized at
    the panel threshold and the feature is the per-marker detection fraction;
    otherwise it is the mean rfu. With binarize_after_mean the mean rfu is
    thresholded instead (the alternative ordering of the two steps).
    """
    pools = _pools if _pools is not None else single_fluid_index(singles)
    p = singles.panel.n_markers
    if not labels:
        return AugmentedSample(labels=labels, features=np.zeros(p), provenance=())
    donors: list[Sample] = []
    for fluid in sorted_fluids(labels):
        pool = pools.get(fluid)
        if not pool:
            raise AugmentationError(
                f"no single-fluid donor samples for {fluid.value!r}")
        donors.append(pool[int(rng.integers(len(pool)))])
    shuffled = []
    for donor in donors:
        mat = np.stack([rep.rfu for rep in donor.replicates])
        shuffled.append(mat[rng.permutation(mat.shape[0])])
    mixture_reps = combine_replicates(shuffled)
    features = _features_from_replicates(
        mixture_reps, singles.panel.threshold_rfu, dichotomized, binarize_after_mean)
    return AugmentedSample(labels=labels, features=features,
                           provenance=tuple(d.id for d in donors))


def build_augmented_dataset(singles: Dataset, bg: BackgroundLevels,
                            count_per_combination: int | None = None,
                            total_count: int | None = None,
                            dichotomized: bool = True,
                            rng: np.random.Generator | None = None,
                            binarize_after_mean: bool = False,
                            ) -> AugmentedDataset:
    """Generate an augmented dataset in uniform or background-sampling mode.

    Uniform mode (count_per_combination) enumerates every combination of the
    free fluids (0 < level < 1), always adding the level-1 fluids, and emits
    the fixed count per combination; it realizes equal 0.5 backgrounds.
    Background mode (total_count) draws label sets from the background levels
    instead, keeping the dataset size fixed under non-uniform assumptions.
    """
    if (count_per_combination is None) == (total_count is None):
        raise AugmentationError(
            "exactly one of count_per_combination / total_count is required")
    if rng is None:
        rng = np.random.default_rng(0)
    pools = single_fluid_index(singles)
    for fluid in bg.eligible():
        if fluid not in pools:
            raise AugmentationError(
                f"no single-fluid donor samples for {fluid.value!r}")
    samples: list[AugmentedSample] = []
    if count_per_combination is not None:
        free = sorted_fluids(bg.free())
        forced = frozenset(bg.forced())
        for mask in range(2 ** len(free)):
            labels = forced | frozenset(
                f for i, f in enumerate(free) if mask >> i & 1)
            for _ in range(count_per_combination):
                samples.append(augment_mixture(
                    singles, labels, dichotomized, rng,
                    binarize_after_mean=binarize_after_mean, _pools=pools))
    else:
        for _ in range(total_count):
            labels = mix_labels(bg, rng)
            samples.append(augment_mixture(
                singles, labels, dichotomized, rng,
                binarize_after_mean=binarize_after_mean, _pools=pools))
    return AugmentedDataset(panel=singles.panel, samples=tuple(samples),
                            background=bg, dichotomized=dichotomized)


def augmented_to_csv(ads: AugmentedDataset) -> str:
    """Serialize augmented samples in the profile CSV column layout.

    One row per augmented sample (replicate_id 0); marker columns carry the
    feature values, which are detection fractions in dichotomized mode and
    mean rfu otherwise. Housekeeping columns are 1 by construction.
    """
    import csv as _csv
    import io as _io

    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "fluid_labels", "replicate_id",
                     *ads.panel.markers, *ads.panel.housekeeping])
    for i, s in enumerate(ads.samples):
        writer.writerow([f"aug-{i:06d}", format_labels(s.labels), 0,
                         *(repr(float(v)) for v in s.features),
                         *([1] * len(ads.panel.housekeeping))])
    return buf.getvalue()


def augmented_metadata(ads: AugmentedDataset, seed_info: Mapping[str, int] | None = None) -> dict:
    """Sidecar metadata describing how an augmented CSV was generated."""
    meta = {
        "dichotomized": ads.dichotomized,
        "background_levels": {f.value: p for f, p in ads.background.levels},
        "n_samples": len(ads.samples),
    }
    if seed_info:
        meta["seeds"] = dict(seed_info)
    return meta
