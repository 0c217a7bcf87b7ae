"""Data model for mRNA body-fluid profiles.

A profile is a set of replicate peak-height measurements (rfu) over a fixed
marker panel. This module covers ingestion from CSV, the housekeeping quality
filter, dichotomization at the detection threshold, per-fluid detection-rate
summaries, and a synthetic dataset generator driven by such rate tables.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_MARKERS = (
    "HBB", "ALAS2", "CD93", "HTN3", "STATH", "BPIFA1", "MUC4", "MYOZ1",
    "CYP2B7P1", "MMP10", "MMP7", "MMP11", "SEMG1", "KLK3", "PRM1",
)
DEFAULT_HOUSEKEEPING = ("HK1", "HK2")
DEFAULT_THRESHOLD_RFU = 150.0

MIN_REPLICATES = 2
MAX_REPLICATES = 4


class ProfileError(ValueError):
    """Malformed profile table or inconsistent sample data."""


class BodyFluid(Enum):
    """The nine body fluids distinguished by the panel.

    Skin and penile skin are distinct fluids, as are fertile and sterile
    (vasectomized) semen. Member order is the canonical ordinal order used
    everywhere labels are sorted or serialized.
    """

    BLOOD = "blood"
    MENSTRUAL_SECRETION = "menstrual_secretion"
    NASAL_MUCOSA = "nasal_mucosa"
    SALIVA = "saliva"
    SEMEN_FERTILE = "semen_fertile"
    SEMEN_STERILE = "semen_sterile"
    SKIN = "skin"
    SKIN_PENILE = "skin_penile"
    VAGINAL_MUCOSA = "vaginal_mucosa"

    @classmethod
    def from_name(cls, name: str) -> "BodyFluid":
        try:
            return cls(name.strip())
        except ValueError:
            raise ProfileError(f"unknown body fluid name: {name!r}") from None


_FLUID_ORDER = {fluid: i for i, fluid in enumerate(BodyFluid)}

# A label set is the set of fluids present in (or assigned to) a sample.
LabelSet = frozenset


def sorted_fluids(fluids: Iterable[BodyFluid]) -> tuple[BodyFluid, ...]:
    """Fluids in canonical ordinal order (stable across processes)."""
    return tuple(sorted(fluids, key=_FLUID_ORDER.__getitem__))


def format_labels(labels: Iterable[BodyFluid]) -> str:
    """Render a label set as '+'-joined fluid names; empty set -> ''."""
    return "+".join(f.value for f in sorted_fluids(labels))


def parse_labels(text: str) -> frozenset[BodyFluid]:
    """Parse a '+'-separated fluid list; blank means no fluid (blank sample)."""
    text = text.strip()
    if not text:
        return frozenset()
    return frozenset(BodyFluid.from_name(part) for part in text.split("+"))


@dataclass(frozen=True)
class MarkerPanel:
    """The fixed target-marker panel plus housekeeping controls."""

    markers: tuple[str, ...] = DEFAULT_MARKERS
    housekeeping: tuple[str, ...] = DEFAULT_HOUSEKEEPING
    threshold_rfu: float = DEFAULT_THRESHOLD_RFU

    def __post_init__(self) -> None:
        names = self.markers + self.housekeeping
        if len(set(names)) != len(names):
            raise ProfileError("marker names must be unique")
        if not self.markers:
            raise ProfileError("panel needs at least one marker")
        if not self.threshold_rfu > 0:
            raise ProfileError("threshold_rfu must be positive")

    @property
    def n_markers(self) -> int:
        return len(self.markers)

    def index(self, marker: str) -> int:
        try:
            return self.markers.index(marker)
        except ValueError:
            raise ProfileError(f"unknown marker: {marker!r}") from None


def _frozen_array(values, length: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or (length is not None and arr.shape[0] != length):
        raise ProfileError(f"expected a length-{length} vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Replicate:
    """One replicate measurement: rfu per marker plus housekeeping flags."""

    rfu: np.ndarray
    housekeeping_detected: tuple[bool, ...] = (True, True)

    def __post_init__(self) -> None:
        arr = _frozen_array(self.rfu)
        if np.any(arr < 0):
            raise ProfileError("rfu values must be non-negative")
        object.__setattr__(self, "rfu", arr)
        object.__setattr__(self, "housekeeping_detected",
                           tuple(bool(v) for v in self.housekeeping_detected))


@dataclass(frozen=True)
class Sample:
    """A profiled sample: 2-4 replicates and the set of fluids it contains.

    Reference samples are single-fluid; lab mixture fixtures may carry more
    than one label.
    """

    id: str
    labels: frozenset[BodyFluid]
    replicates: tuple[Replicate, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", frozenset(self.labels))
        object.__setattr__(self, "replicates", tuple(self.replicates))
        n = len(self.replicates)
        if not MIN_REPLICATES <= n <= MAX_REPLICATES:
            raise ProfileError(
                f"sample {self.id!r} has {n} replicates, expected "
                f"{MIN_REPLICATES}-{MAX_REPLICATES}")

    @property
    def fluid(self) -> BodyFluid:
        """The fluid of a single-fluid sample."""
        if len(self.labels) != 1:
            raise ProfileError(f"sample {self.id!r} is not single-fluid")
        return next(iter(self.labels))

    def housekeeping_ok(self) -> bool:
        """At least one housekeeping marker amplified in any replicate."""
        if not self.replicates:
            return False
        per_marker = [any(rep.housekeeping_detected[i] for rep in self.replicates)
                      for i in range(len(self.replicates[0].housekeeping_detected))]
        return sum(per_marker) >= 1


@dataclass(frozen=True)
class LoadReport:
    """Ingestion summary: how many samples survived the housekeeping filter."""

    n_rows: int
    n_samples: int
    n_excluded: int
    excluded_ids: tuple[str, ...]


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of samples sharing one panel."""

    panel: MarkerPanel
    samples: tuple[Sample, ...]
    load_report: LoadReport | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ProfileError("sample ids must be unique")
        p = self.panel.n_markers
        hk = len(self.panel.housekeeping)
        for s in self.samples:
            for rep in s.replicates:
                if rep.rfu.shape[0] != p:
                    raise ProfileError(
                        f"sample {s.id!r}: replicate has {rep.rfu.shape[0]} rfu "
                        f"values, panel has {p} markers")
                if len(rep.housekeeping_detected) != hk:
                    raise ProfileError(
                        f"sample {s.id!r}: housekeeping flag count mismatch")
            if not s.housekeeping_ok():
                raise ProfileError(
                    f"sample {s.id!r} fails the housekeeping filter")

    def __len__(self) -> int:
        return len(self.samples)

    def by_labels(self) -> dict[frozenset[BodyFluid], list[Sample]]:
        groups: dict[frozenset[BodyFluid], list[Sample]] = {}
        for s in self.samples:
            groups.setdefault(s.labels, []).append(s)
        return groups


def dichotomize(rep: Replicate, threshold: float) -> np.ndarray:
    """Binary detection vector: 1.0 where rfu >= threshold (inclusive)."""
    if not threshold > 0:
        raise ProfileError("threshold must be positive")
    return (rep.rfu >= threshold).astype(float)


def replicate_fractions(reps: Sequence[Replicate], threshold: float) -> np.ndarray:
    """Per-marker fraction of replicates in which the marker was detected."""
    if not reps:
        raise ProfileError("at least one replicate required")
    return np.mean([dichotomize(r, threshold) for r in reps], axis=0)


@dataclass(frozen=True, eq=False)
class DetectionRates:
    """Per label-set, per-marker detection rates over all replicates."""

    panel: MarkerPanel
    rates: Mapping[frozenset[BodyFluid], np.ndarray]
    replicate_counts: Mapping[frozenset[BodyFluid], int]

    def rate(self, fluid: BodyFluid, marker: str) -> float:
        return float(self.rates[frozenset({fluid})][self.panel.index(marker)])

    def single_fluids(self) -> tuple[BodyFluid, ...]:
        return sorted_fluids(next(iter(k)) for k in self.rates if len(k) == 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["fluid_labels", "n_replicates", *self.panel.markers])
        for labels in sorted(self.rates, key=lambda ls: [_FLUID_ORDER[f] for f in sorted_fluids(ls)]):
            row = self.rates[labels]
            writer.writerow([format_labels(labels), self.replicate_counts[labels],
                             *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, panel: MarkerPanel | None = None) -> "DetectionRates":
        panel = panel or MarkerPanel()
        reader = csv.DictReader(io.StringIO(text))
        header = reader.fieldnames or []
        for marker in panel.markers:
            if marker not in header:
                raise ProfileError(f"rates table missing marker column {marker!r}")
        rates: dict[frozenset[BodyFluid], np.ndarray] = {}
        counts: dict[frozenset[BodyFluid], int] = {}
        for row in reader:
            labels = parse_labels(row["fluid_labels"])
            vec = np.array([float(row[m]) for m in panel.markers])
            if np.any(vec < 0) or np.any(vec > 1):
                raise ProfileError(
                    f"detection rate outside [0, 1] for {format_labels(labels)!r}")
            vec.setflags(write=False)
            rates[labels] = vec
            counts[labels] = int(row.get("n_replicates") or 0)
        return cls(panel=panel, rates=rates, replicate_counts=counts)


def detection_rates(ds: Dataset) -> DetectionRates:
    """Detection rate per label set: detected replicates / total replicates."""
    if not ds.samples:
        raise ProfileError("dataset is empty")
    threshold = ds.panel.threshold_rfu
    rates: dict[frozenset[BodyFluid], np.ndarray] = {}
    counts: dict[frozenset[BodyFluid], int] = {}
    for labels, samples in ds.by_labels().items():
        detected = np.zeros(ds.panel.n_markers)
        total = 0
        for s in samples:
            for rep in s.replicates:
                detected += dichotomize(rep, threshold)
                total += 1
        vec = detected / total
        vec.setflags(write=False)
        rates[labels] = vec
        counts[labels] = total
    return DetectionRates(panel=ds.panel, rates=rates, replicate_counts=counts)


# Reference per-replicate detection rates for single body fluids, measured on
# the validation panel (proportion of replicates in which each marker was
# seen, ordered as DEFAULT_MARKERS). Used to synthesize stand-in datasets.
REFERENCE_SINGLE_FLUID_RATES: dict[BodyFluid, tuple[float, ...]] = {
    BodyFluid.BLOOD: (1.000, 0.960, 0.579, 0.000, 0.000, 0.000, 0.000, 0.000,
                      0.000, 0.000, 0.000, 0.032, 0.000, 0.000, 0.000),
    BodyFluid.MENSTRUAL_SECRETION: (1.000, 0.496, 0.451, 0.000, 0.009, 0.000,
                                    0.566, 0.531, 0.310, 0.319, 0.381, 0.558,
                                    0.000, 0.000, 0.000),
    BodyFluid.NASAL_MUCOSA: (0.008, 0.000, 0.440, 0.008, 0.976, 0.504, 0.616,
                             0.016, 0.016, 0.000, 0.008, 0.024, 0.024, 0.000,
                             0.000),
    BodyFluid.SALIVA: (0.165, 0.010, 0.029, 0.913, 0.903, 0.019, 0.010, 0.019,
                       0.010, 0.000, 0.010, 0.000, 0.000, 0.000, 0.000),
    BodyFluid.SEMEN_FERTILE: (0.011, 0.011, 0.000, 0.000, 0.000, 0.011, 0.011,
                              0.000, 0.000, 0.000, 0.000, 0.000, 0.832, 0.789,
                              0.958),
    BodyFluid.SEMEN_STERILE: (0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000,
                              0.000, 0.000, 0.000, 0.000, 0.036, 0.929, 0.750,
                              0.000),
    BodyFluid.SKIN: (0.264, 0.014, 0.111, 0.000, 0.083, 0.028, 0.194, 0.056,
                     0.000, 0.000, 0.028, 0.000, 0.000, 0.000, 0.000),
    BodyFluid.SKIN_PENILE: (0.146, 0.000, 0.042, 0.000, 0.000, 0.000, 0.333,
                            0.021, 0.000, 0.021, 0.021, 0.042, 0.000, 0.000,
                            0.104),
    BodyFluid.VAGINAL_MUCOSA: (0.009, 0.000, 0.157, 0.000, 0.000, 0.000, 0.922,
                               0.722, 0.557, 0.000, 0.043, 0.009, 0.000, 0.000,
                               0.000),
}


def reference_detection_rates(panel: MarkerPanel | None = None) -> DetectionRates:
    """The built-in single-fluid rate table as a DetectionRates object."""
    panel = panel or MarkerPanel()
    if panel.markers != DEFAULT_MARKERS:
        raise ProfileError("reference rates are defined for the default panel only")
    rates = {}
    for fluid, row in REFERENCE_SINGLE_FLUID_RATES.items():
        vec = np.array(row, dtype=float)
        vec.setflags(write=False)
        rates[frozenset({fluid})] = vec
    counts = {k: 0 for k in rates}
    return DetectionRates(panel=panel, rates=rates, replicate_counts=counts)


def synthesize_dataset(rates: DetectionRates, n_per_fluid: int,
                       reps_per_sample: int, rng_seed: int,
                       max_rfu: float = 5000.0) -> Dataset:
    """Generate single-fluid samples whose markers fire at the given rates.

    Each marker is detected independently with its rate. Detected markers get
    an rfu drawn log-uniformly from [threshold, max_rfu]; undetected markers
    draw uniformly from [0, threshold). Housekeeping markers always amplify.
    The dichotomized view of the output depends only on the rates, not on the
    rfu magnitude model.
    """
    panel = rates.panel
    for labels, row in rates.rates.items():
        if np.any(np.asarray(row) < 0) or np.any(np.asarray(row) > 1):
            raise ProfileError(
                f"detection rate outside [0, 1] for {format_labels(labels)!r}")
    if reps_per_sample < MIN_REPLICATES or reps_per_sample > MAX_REPLICATES:
        raise ProfileError(
            f"reps_per_sample must be in [{MIN_REPLICATES}, {MAX_REPLICATES}]")
    rng = np.random.default_rng(rng_seed)
    threshold = panel.threshold_rfu
    log_lo, log_hi = math.log(threshold), math.log(max_rfu)
    n_hk = len(panel.housekeeping)
    samples = []
    for fluid in rates.single_fluids():
        rate_row = rates.rates[frozenset({fluid})]
        for i in range(n_per_fluid):
            reps = []
            for _ in range(reps_per_sample):
                detected = rng.random(panel.n_markers) < rate_row
                hot = np.exp(rng.uniform(log_lo, log_hi, panel.n_markers))
                cold = rng.uniform(0.0, threshold, panel.n_markers)
                reps.append(Replicate(rfu=np.where(detected, hot, cold),
                                      housekeeping_detected=(True,) * n_hk))
            samples.append(Sample(id=f"{fluid.value}-{i:03d}",
                                  labels=frozenset({fluid}),
                                  replicates=tuple(reps)))
    return Dataset(panel=panel, samples=tuple(samples))


CSV_FIXED_COLUMNS = ("sample_id", "fluid_labels", "replicate_id")


def parse_profile_table(text: str, panel: MarkerPanel | None = None) -> Dataset:
    """Parse the replicate-per-row CSV schema into a Dataset.

    Columns: sample_id, fluid_labels, replicate_id, one column per panel
    marker (rfu), one per housekeeping marker (0/1). Samples in which fewer
    than half the housekeeping markers amplified (over all replicates) are
    excluded and counted in the attached load report.
    """
    panel = panel or MarkerPanel()
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames
    if header is None:
        raise ProfileError("empty profile table")
    expected = list(CSV_FIXED_COLUMNS) + list(panel.markers) + list(panel.housekeeping)
    for col in expected:
        if col not in header:
            raise ProfileError(f"profile table missing column {col!r}")
    for col in header:
        if col not in expected:
            raise ProfileError(f"unknown marker column {col!r}")

    order: list[str] = []
    rows_by_sample: dict[str, list[tuple[int, dict]]] = {}
    labels_by_sample: dict[str, frozenset[BodyFluid]] = {}
    n_rows = 0
    for row in reader:
        n_rows += 1
        line = reader.line_num
        sid = (row["sample_id"] or "").strip()
        if not sid:
            raise ProfileError(f"row {line}: empty sample_id")
        try:
            labels = parse_labels(row["fluid_labels"] or "")
        except ProfileError as exc:
            raise ProfileError(f"row {line}, column 'fluid_labels': {exc}") from None
        if sid not in rows_by_sample:
            order.append(sid)
            rows_by_sample[sid] = []
            labels_by_sample[sid] = labels
        elif labels_by_sample[sid] != labels:
            raise ProfileError(
                f"row {line}: sample {sid!r} has inconsistent fluid_labels")
        rows_by_sample[sid].append((line, row))

    samples: list[Sample] = []
    excluded: list[str] = []
    for sid in order:
        reps = []
        for line, row in rows_by_sample[sid]:
            rfu = []
            for marker in panel.markers:
                raw = (row[marker] or "").strip()
                try:
                    rfu.append(float(raw))
                except ValueError:
                    raise ProfileError(
                        f"row {line}, column {marker!r}: non-numeric rfu {raw!r}"
                    ) from None
            hk = []
            for marker in panel.housekeeping:
                raw = (row[marker] or "").strip()
                if raw not in ("0", "1"):
                    raise ProfileError(
                        f"row {line}, column {marker!r}: expected 0/1, got {raw!r}")
                hk.append(raw == "1")
            try:
                reps.append(Replicate(rfu=rfu, housekeeping_detected=tuple(hk)))
            except ProfileError as exc:
                raise ProfileError(f"row {line}: {exc}") from None
        if not MIN_REPLICATES <= len(reps) <= MAX_REPLICATES:
            line = rows_by_sample[sid][-1][0]
            raise ProfileError(
                f"row {line}, sample {sid!r}: {len(reps)} replicates, expected "
                f"{MIN_REPLICATES}-{MAX_REPLICATES}")
        sample = Sample(id=sid, labels=labels_by_sample[sid], replicates=tuple(reps))
        if sample.housekeeping_ok():
            samples.append(sample)
        else:
            excluded.append(sid)

    report = LoadReport(n_rows=n_rows, n_samples=len(samples),
                        n_excluded=len(excluded), excluded_ids=tuple(excluded))
    return Dataset(panel=panel, samples=tuple(samples), load_report=report)


def dataset_to_csv(ds: Dataset) -> str:
    """Serialize a Dataset back to the replicate-per-row CSV schema."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*CSV_FIXED_COLUMNS, *ds.panel.markers, *ds.panel.housekeeping])
    for sample in ds.samples:
        labels = format_labels(sample.labels)
        for j, rep in enumerate(sample.replicates, start=1):
            writer.writerow([
                sample.id, labels, j,
                *(repr(float(v)) for v in rep.rfu),
                *(int(v) for v in rep.housekeeping_detected),
            ])
    return buf.getvalue()
