"""Per-case evaluation: calibrated LR, marker contributions, n/2 baseline.

A case arrives as per-marker replicate detection counts. Evaluation plugs the
detection fractions into a fused (calibration folded in) one-vs-rest model,
so the reported log10 LR decomposes exactly into an intercept plus one
contribution per marker. The model store holds trained variants keyed by
interest set, background levels and dichotomization, and can retrain on
demand when a trainer is attached.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _jsonutil
from .augmentation import AugmentationError, BackgroundLevels, HypothesisPair
from .calibrate import Calibrator, LRValue
from .classify import BinaryLogReg
from .metrics import DEFAULT_LR_CAP, cap_lr, verbal_scale
from .profiles import (
    BodyFluid,
    MarkerPanel,
    Replicate,
    format_labels,
    sorted_fluids,
)

CONTRIBUTION_TOLERANCE = 1e-9


class CaseError(ValueError):
    """Invalid case observation or evaluation request."""


@dataclass(frozen=True)
class CaseObservation:
    """Replicate detection counts per marker, one replicate total per case."""

    detected: tuple[tuple[str, int], ...]
    total: int

    def __post_init__(self) -> None:
        if self.total not in (2, 3, 4):
            raise CaseError(f"replicate total must be 2-4, got {self.total}")
        pairs = tuple((str(m), int(d)) for m, d in self.detected)
        seen = set()
        for marker, d in pairs:
            if marker in seen:
                raise CaseError(f"duplicate marker {marker!r} in observation")
            seen.add(marker)
            if not 0 <= d <= self.total:
                raise CaseError(
                    f"marker {marker!r}: detected {d} outside 0-{self.total}")
        object.__setattr__(self, "detected", pairs)

    def count(self, marker: str) -> int:
        for m, d in self.detected:
            if m == marker:
                return d
        raise CaseError(f"marker {marker!r} missing from observation")

    def fractions(self, panel: MarkerPanel) -> np.ndarray:
        """Detection fraction per panel marker, in panel order."""
        known = {m for m, _ in self.detected}
        unknown = known - set(panel.markers)
        if unknown:
            raise CaseError(f"unknown marker in observation: {sorted(unknown)}")
        return np.array([self.count(m) / self.total for m in panel.markers])

    @classmethod
    def from_counts(cls, counts: Mapping[str, int], total: int) -> "CaseObservation":
        return cls(detected=tuple(counts.items()), total=total)

    @classmethod
    def from_replicates(cls, reps: Sequence[Replicate],
                        panel: MarkerPanel) -> "CaseObservation":
        if not reps:
            raise CaseError("at least one replicate required")
        detected = np.zeros(panel.n_markers, dtype=int)
        for rep in reps:
            detected += (rep.rfu >= panel.threshold_rfu).astype(int)
        pairs = tuple(zip(panel.markers, (int(v) for v in detected)))
        return cls(detected=pairs, total=len(reps))

    @classmethod
    def from_json(cls, doc: Mapping | str, panel: MarkerPanel) -> "CaseObservation":
        """Parse the {"markers": {name: {"detected": d, "total": t}}} format."""
        if isinstance(doc, str):
            doc = json.loads(doc)
        markers = doc.get("markers")
        if not isinstance(markers, Mapping) or not markers:
            raise CaseError("case document needs a non-empty 'markers' object")
        totals = set()
        counts = {}
        for name, entry in markers.items():
            if name not in panel.markers:
                raise CaseError(f"unknown marker in observation: {name!r}")
            try:
                counts[name] = int(entry["detected"])
                totals.add(int(entry["total"]))
            except (KeyError, TypeError, ValueError):
                raise CaseError(
                    f"marker {name!r}: expected {{'detected': int, 'total': int}}"
                ) from None
        if len(totals) != 1:
            raise CaseError(f"all markers must share one replicate total, got {sorted(totals)}")
        missing = set(panel.markers) - set(counts)
        if missing:
            raise CaseError(f"marker missing from observation: {sorted(missing)}")
        return cls.from_counts(counts, totals.pop())

    def to_json_dict(self) -> dict:
        return {"markers": {m: {"detected": d, "total": self.total}
                            for m, d in self.detected}}


class NOverTwoVerdict(Enum):
    INDICATION = "indication"
    NO_INDICATION = "no_indication"
    NO_RELIABLE_STATEMENT = "no_reliable_statement"


@dataclass(frozen=True)
class MarkerFluidMap:
    """Which markers count as indicative of each fluid for the n/2 rule.

    This assignment is configuration, not biology baked into code; the
    default mirrors the panel's design groupings. Skin variants have no
    indicative markers, so the n/2 rule is undefined for them.
    """

    indicative: tuple[tuple[BodyFluid, frozenset[str]], ...]

    def markers_for(self, fluid: BodyFluid) -> frozenset[str]:
        for f, markers in self.indicative:
            if f == fluid:
                return markers
        raise CaseError(f"no marker mapping for fluid {fluid.value!r}")

    @classmethod
    def default(cls) -> "MarkerFluidMap":
        semen = frozenset({"SEMG1", "KLK3", "PRM1"})
        return cls(indicative=(
            (BodyFluid.BLOOD, frozenset({"HBB", "ALAS2", "CD93"})),
            (BodyFluid.MENSTRUAL_SECRETION, frozenset({"MMP10", "MMP7", "MMP11"})),
            (BodyFluid.NASAL_MUCOSA, frozenset({"BPIFA1"})),
            (BodyFluid.SALIVA, frozenset({"HTN3", "STATH"})),
            (BodyFluid.SEMEN_FERTILE, semen),
            (BodyFluid.SEMEN_STERILE, semen),
            (BodyFluid.SKIN, frozenset()),
            (BodyFluid.SKIN_PENILE, frozenset()),
            (BodyFluid.VAGINAL_MUCOSA, frozenset({"MUC4", "MYOZ1", "CYP2B7P1"})),
        ))


DEFAULT_MARKER_FLUID_MAP = MarkerFluidMap.default()


def n_over_2(obs: CaseObservation, fluids: frozenset[BodyFluid],
             marker_map: MarkerFluidMap = DEFAULT_MARKER_FLUID_MAP,
             ) -> NOverTwoVerdict:
    """The legacy categorical rule over the fluids' indicative markers.

    x = observed detections over the pooled indicative markers, n = marker
    count times the replicate total. Indication when x >= n/2, no indication
    when x = 0, otherwise no reliable statement.
    """
    if not fluids:
        raise CaseError("n/2 needs at least one fluid")
    markers: set[str] = set()
    for fluid in sorted_fluids(fluids):
        indicative = marker_map.markers_for(fluid)
        if not indicative:
            raise CaseError(f"n/2 undefined for {fluid.value!r}: no indicative markers")
        markers |= indicative
    x = sum(obs.count(m) for m in sorted(markers))
    n = len(markers) * obs.total
    if x >= n / 2:
        return NOverTwoVerdict.INDICATION
    if x == 0:
        return NOverTwoVerdict.NO_INDICATION
    return NOverTwoVerdict.NO_RELIABLE_STATEMENT


@dataclass(frozen=True)
class ModelVariant:
    """A fused (calibration folded in) one-vs-rest model plus its context."""

    interest: frozenset[BodyFluid]
    backgrounds: BackgroundLevels
    dichotomized: bool
    model: BinaryLogReg
    panel: MarkerPanel = field(default_factory=MarkerPanel)
    calibrator: Calibrator = field(default_factory=Calibrator.identity)
    strategy: str = "one_vs_rest"
    l2_per_sample: float = 0.0
    training_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "interest", frozenset(self.interest))
        if not self.interest:
            raise CaseError("variant interest set must be non-empty")
        if self.model.coefficients.shape[0] != self.panel.n_markers:
            raise CaseError("model coefficient count does not match the panel")

    @property
    def variant_id(self) -> str:
        return variant_key_id(self.interest, self.backgrounds, self.dichotomized)

    def to_json_dict(self) -> dict:
        return {
            "format": "mixlr-model",
            "version": 1,
            "variant_id": self.variant_id,
            "strategy": self.strategy,
            "dichotomized": self.dichotomized,
            "interest": [f.value for f in sorted_fluids(self.interest)],
            "panel": {
                "markers": list(self.panel.markers),
                "housekeeping": list(self.panel.housekeeping),
                "threshold_rfu": float(self.panel.threshold_rfu),
            },
            "fluid_order": [f.value for f in BodyFluid],
            "backgrounds": {f.value: float(p) for f, p in self.backgrounds.levels},
            "coefficients": {
                "intercept": float(self.model.intercept),
                "per_marker": {m: float(b) for m, b in
                               zip(self.panel.markers, self.model.coefficients)},
            },
            "calibration": {
                "a0": float(self.calibrator.a0),
                "a1": float(self.calibrator.a1),
                "prior_log_odds": float(self.calibrator.prior_log_odds),
            },
            "scaling": None if self.model.feature_mean is None else {
                "mean": [float(v) for v in self.model.feature_mean],
                "scale": [float(v) for v in self.model.feature_scale],
            },
            "l2_per_sample": float(self.l2_per_sample),
            "training_seed": int(self.training_seed),
        }

    def to_json(self) -> str:
        return _jsonutil.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelVariant":
        doc = json.loads(text)
        if doc.get("format") != "mixlr-model":
            raise CaseError("not a mixlr model document")
        panel = MarkerPanel(markers=tuple(doc["panel"]["markers"]),
                            housekeeping=tuple(doc["panel"]["housekeeping"]),
                            threshold_rfu=float(doc["panel"]["threshold_rfu"]))
        per_marker = doc["coefficients"]["per_marker"]
        scaling = doc.get("scaling")
        model = BinaryLogReg(
            intercept=float(doc["coefficients"]["intercept"]),
            coefficients=np.array([per_marker[m] for m in panel.markers]),
            feature_mean=None if scaling is None else np.array(scaling["mean"]),
            feature_scale=None if scaling is None else np.array(scaling["scale"]),
        )
        cal = doc["calibration"]
        return cls(
            interest=frozenset(BodyFluid.from_name(n) for n in doc["interest"]),
            backgrounds=BackgroundLevels(tuple(
                (BodyFluid.from_name(n), float(p))
                for n, p in doc["backgrounds"].items())),
            dichotomized=bool(doc["dichotomized"]),
            model=model,
            panel=panel,
            calibrator=Calibrator(a0=float(cal["a0"]), a1=float(cal["a1"]),
                                  prior_log_odds=float(cal["prior_log_odds"])),
            strategy=str(doc.get("strategy", "one_vs_rest")),
            l2_per_sample=float(doc.get("l2_per_sample", 0.0)),
            training_seed=int(doc.get("training_seed", 0)),
        )


def variant_key_id(interest: frozenset[BodyFluid], backgrounds: BackgroundLevels,
                   dichotomized: bool) -> str:
    """Deterministic short id for a (interest, backgrounds, mode) key."""
    doc = {
        "interest": [f.value for f in sorted_fluids(interest)],
        "backgrounds": [(f.value, _jsonutil.format_float(p))
                        for f, p in backgrounds.levels],
        "dichotomized": dichotomized,
    }
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    return digest[:12]


@dataclass(frozen=True)
class MarkerContribution:
    marker: str
    fraction: float
    coefficient: float
    contribution: float


@dataclass(frozen=True)
class CaseReport:
    """Everything reported for one case under one hypothesis pair."""

    interest: tuple[BodyFluid, ...]
    log10_lr: float
    lr: float
    capped_lr: float
    cap: float
    verbal: str
    intercept: float
    contributions: tuple[MarkerContribution, ...]
    n_over_2_by_fluid: tuple[tuple[BodyFluid, NOverTwoVerdict], ...]
    n_over_2_combined: NOverTwoVerdict | None
    background_levels: BackgroundLevels
    model_id: str

    def __post_init__(self) -> None:
        total = self.intercept + sum(c.contribution for c in self.contributions)
        if abs(total - self.log10_lr) > CONTRIBUTION_TOLERANCE:
            raise CaseError("contributions do not sum to the reported log10 LR")

    def to_json_dict(self) -> dict:
        return {
            "interest": [f.value for f in self.interest],
            "log10_lr": self.log10_lr,
            "lr": self.lr,
            "capped_lr": self.capped_lr,
            "cap": self.cap,
            "verbal": self.verbal,
            "intercept": self.intercept,
            "contributions": [
                {"marker": c.marker, "fraction": c.fraction,
                 "coefficient": c.coefficient, "contribution": c.contribution}
                for c in self.contributions
            ],
            "n_over_2": {
                "per_fluid": {f.value: v.value for f, v in self.n_over_2_by_fluid},
                "combined": None if self.n_over_2_combined is None
                else self.n_over_2_combined.value,
            },
            "background_levels": {f.value: p for f, p in self.background_levels.levels},
            "model_id": self.model_id,
        }

    def to_json(self) -> str:
        return _jsonutil.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        """Worked-equation layout: intercept plus the active marker terms."""
        terms = [f"{self.intercept:+.2f}"]
        for c in self.contributions:
            if c.coefficient != 0.0 and c.fraction != 0.0:
                terms.append(f"{c.coefficient:+.2f}*{c.marker}({c.fraction:g})")
        lines = [
            f"fluids of interest: {format_labels(self.interest)}",
            "log10 LR = " + " ".join(terms) + f" = {self.log10_lr:.2f}",
            f"LR = {self.lr:.4g} (capped at {self.cap:g}: {self.capped_lr:.4g})",
            f"conclusion: {self.verbal}",
        ]
        if self.n_over_2_combined is not None:
            lines.append(f"n/2 rule (combined): {self.n_over_2_combined.value}")
        for fluid, verdict in self.n_over_2_by_fluid:
            lines.append(f"n/2 rule ({fluid.value}): {verdict.value}")
        return "\n".join(lines) + "\n"


def evaluate_case(variant: ModelVariant, obs: CaseObservation,
                  hp: HypothesisPair | None = None,
                  marker_map: MarkerFluidMap = DEFAULT_MARKER_FLUID_MAP,
                  cap: float = DEFAULT_LR_CAP) -> CaseReport:
    """Evaluate one case against a fused model variant.

    The hypothesis pair, when given, must match the variant: same interest
    set, and pinned fluids realized in the variant's background levels.
    """
    if hp is not None:
        if frozenset(hp.interest) != variant.interest:
            raise CaseError(
                f"hypothesis interest {format_labels(hp.interest)!r} does not "
                f"match model variant {format_labels(variant.interest)!r}")
        for fluid in hp.fixed_present:
            if variant.backgrounds.level(fluid) != 1.0:
                raise CaseError(
                    f"{fluid.value} fixed present but variant background is "
                    f"{variant.backgrounds.level(fluid)}")
        for fluid in hp.fixed_absent:
            if variant.backgrounds.level(fluid) != 0.0:
                raise CaseError(
                    f"{fluid.value} fixed absent but variant background is "
                    f"{variant.backgrounds.level(fluid)}")
    fractions = obs.fractions(variant.panel)
    terms = variant.model.coefficients * fractions
    log10_lr = float(variant.model.intercept + terms.sum())
    contributions = tuple(
        MarkerContribution(marker=m, fraction=float(r), coefficient=float(b),
                           contribution=float(t))
        for m, r, b, t in zip(variant.panel.markers, fractions,
                              variant.model.coefficients, terms))
    lr_value = LRValue.from_log10(log10_lr)
    capped = cap_lr(lr_value, cap)
    per_fluid = []
    pooled_markers = set()
    for fluid in sorted_fluids(variant.interest):
        indicative = marker_map.markers_for(fluid)
        if indicative:
            per_fluid.append((fluid, n_over_2(obs, frozenset({fluid}), marker_map)))
            pooled_markers |= indicative
    combined = (n_over_2(obs, variant.interest, marker_map)
                if pooled_markers else None)
    return CaseReport(
        interest=sorted_fluids(variant.interest),
        log10_lr=log10_lr,
        lr=lr_value.lr,
        capped_lr=capped.lr,
        cap=cap,
        verbal=verbal_scale(capped),
        intercept=float(variant.model.intercept),
        contributions=contributions,
        n_over_2_by_fluid=tuple(per_fluid),
        n_over_2_combined=combined,
        background_levels=variant.backgrounds,
        model_id=variant.variant_id,
    )


TrainerFn = Callable[[frozenset, BackgroundLevels, bool], ModelVariant]


class ModelStore:
    """Trained variants keyed by (interest, backgrounds, dichotomized).

    Reads are lock-free on an immutable snapshot; inserting a newly trained
    variant is serialized so concurrent identical requests train once.
    """

    def __init__(self, variants: Sequence[ModelVariant] = (),
                 trainer: TrainerFn | None = None):
        self._variants: dict[str, ModelVariant] = {}
        self._trainer = trainer
        self._lock = threading.Lock()
        for v in variants:
            self._variants[v.variant_id] = v

    def __len__(self) -> int:
        return len(self._variants)

    @property
    def can_train(self) -> bool:
        return self._trainer is not None

    def add(self, variant: ModelVariant) -> None:
        with self._lock:
            self._variants[variant.variant_id] = variant

    def get(self, variant_id: str) -> ModelVariant | None:
        return self._variants.get(variant_id)

    def list(self) -> list[ModelVariant]:
        return [self._variants[k] for k in sorted(self._variants)]

    def find(self, interest: frozenset[BodyFluid], backgrounds: BackgroundLevels,
             dichotomized: bool) -> ModelVariant | None:
        return self.get(variant_key_id(frozenset(interest), backgrounds, dichotomized))

    def get_or_train(self, interest: frozenset[BodyFluid],
                     backgrounds: BackgroundLevels,
                     dichotomized: bool) -> ModelVariant:
        found = self.find(interest, backgrounds, dichotomized)
        if found is not None:
            return found
        if self._trainer is None:
            available = ", ".join(v.variant_id for v in self.list()) or "(none)"
            raise CaseError(
                f"no model variant for interest={format_labels(interest)!r} "
                f"under the requested backgrounds and training is disabled; "
                f"available variants: {available}")
        with self._lock:
            found = self.find(interest, backgrounds, dichotomized)
            if found is not None:
                return found
            variant = self._trainer(frozenset(interest), backgrounds, dichotomized)
            self._variants[variant.variant_id] = variant
            return variant

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for variant in self.list():
            (directory / f"{variant.variant_id}.json").write_text(variant.to_json())

    @classmethod
    def load_dir(cls, directory: str | Path,
                 trainer: TrainerFn | None = None) -> "ModelStore":
        directory = Path(directory)
        variants = []
        for path in sorted(directory.glob("*.json")):
            variants.append(ModelVariant.from_json(path.read_text()))
        return cls(variants=variants, trainer=trainer)


def what_if(store: ModelStore, obs: CaseObservation, hp: HypothesisPair,
            bg_override: Mapping[BodyFluid, float] | BackgroundLevels | None = None,
            dichotomized: bool = True,
            marker_map: MarkerFluidMap = DEFAULT_MARKER_FLUID_MAP,
            cap: float = DEFAULT_LR_CAP) -> CaseReport:
    """Re-evaluate a case under alternative background assumptions.

    The override is applied on top of the defaults and the hypothesis pair's
    pinned fluids. Uses a matching stored variant, or trains one when the
    store allows it.
    """
    if isinstance(bg_override, BackgroundLevels):
        backgrounds = bg_override
    else:
        backgrounds = hp.implied_backgrounds(BackgroundLevels.default())
        if bg_override:
            backgrounds = backgrounds.with_levels(dict(bg_override))
    interest_levels = [backgrounds.level(f) for f in hp.interest]
    if all(p == 0 for p in interest_levels):
        raise AugmentationError(
            "every fluid of interest has background 0; H1 cannot occur")
    variant = store.get_or_train(frozenset(hp.interest), backgrounds, dichotomized)
    return evaluate_case(variant, obs, hp=hp, marker_map=marker_map, cap=cap)
