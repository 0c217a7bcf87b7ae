"""Shared fixtures: worked-case coefficient models, example cases, datasets."""
from __future__ import annotations

import numpy as np
import pytest

from mixlr.augmentation import BackgroundLevels
from mixlr.casework import CaseObservation, ModelVariant
from mixlr.classify import BinaryLogReg
from mixlr.profiles import (
    BodyFluid,
    MarkerPanel,
    reference_detection_rates,
    synthesize_dataset,
)

# Published coefficient sets for the vaginal/menstrual interest model, used
# as golden fixtures; markers never shown in the worked equations are zero.
WORKED_COEFFICIENTS = {
    "HBB": 0.79, "ALAS2": -0.57, "CD93": -0.10, "MUC4": 1.45, "MYOZ1": 1.33,
    "CYP2B7P1": 2.75, "MMP10": 0.56, "MMP7": 1.35, "MMP11": 2.32,
}
WORKED_INTERCEPT = -1.34
WORKED_PENILE_COEFFICIENTS = {
    "HBB": 0.51, "ALAS2": -0.43, "CD93": 0.0, "MUC4": 0.81, "MMP10": 0.82,
    "MMP7": 1.1, "MMP11": 2.4,
}
WORKED_PENILE_INTERCEPT = -1.65

# Replicate detection counts (out of 4) for the three example cases.
CASE_1 = {"HBB": 3, "ALAS2": 4, "CD93": 4}
CASE_2 = {"HBB": 4, "ALAS2": 4, "CD93": 4, "MUC4": 4, "MYOZ1": 4,
          "CYP2B7P1": 4, "MMP10": 4, "MMP7": 4, "MMP11": 4}
CASE_3 = {"HBB": 4, "ALAS2": 4, "CD93": 4, "MUC4": 2, "MMP10": 1,
          "MMP7": 2, "MMP11": 2}

VM_INTEREST = frozenset({BodyFluid.VAGINAL_MUCOSA, BodyFluid.MENSTRUAL_SECRETION})


def coefficient_vector(panel: MarkerPanel, values: dict[str, float]) -> np.ndarray:
    return np.array([values.get(m, 0.0) for m in panel.markers])


def observation(panel: MarkerPanel, counts: dict[str, int],
                total: int = 4) -> CaseObservation:
    return CaseObservation.from_counts(
        {m: counts.get(m, 0) for m in panel.markers}, total)


@pytest.fixture(scope="session")
def panel() -> MarkerPanel:
    return MarkerPanel()


@pytest.fixture(scope="session")
def worked_variant(panel) -> ModelVariant:
    model = BinaryLogReg(intercept=WORKED_INTERCEPT,
                         coefficients=coefficient_vector(panel, WORKED_COEFFICIENTS))
    return ModelVariant(interest=VM_INTEREST,
                        backgrounds=BackgroundLevels.default(),
                        dichotomized=True, model=model, panel=panel)


@pytest.fixture(scope="session")
def worked_penile_variant(panel) -> ModelVariant:
    model = BinaryLogReg(
        intercept=WORKED_PENILE_INTERCEPT,
        coefficients=coefficient_vector(panel, WORKED_PENILE_COEFFICIENTS))
    backgrounds = BackgroundLevels.default().with_levels(
        {BodyFluid.SKIN_PENILE: 1.0})
    return ModelVariant(interest=VM_INTEREST, backgrounds=backgrounds,
                        dichotomized=True, model=model, panel=panel)


@pytest.fixture(scope="session")
def case1(panel) -> CaseObservation:
    return observation(panel, CASE_1)


@pytest.fixture(scope="session")
def case2(panel) -> CaseObservation:
    return observation(panel, CASE_2)


@pytest.fixture(scope="session")
def case3(panel) -> CaseObservation:
    return observation(panel, CASE_3)


@pytest.fixture(scope="session")
def singles_small(panel):
    """Synthetic singles large enough to train on, small enough to stay fast."""
    return synthesize_dataset(reference_detection_rates(panel), n_per_fluid=30,
                              reps_per_sample=4, rng_seed=2024)
