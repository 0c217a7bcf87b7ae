"""mixlr: calibrated likelihood ratios for body-fluid mixtures in mRNA stains."""

__version__ = "0.1.0"

from .profiles import (  # noqa: F401
    BodyFluid,
    Dataset,
    MarkerPanel,
    Replicate,
    Sample,
    detection_rates,
    dichotomize,
    parse_profile_table,
    reference_detection_rates,
    replicate_fractions,
    synthesize_dataset,
)
from .augmentation import (  # noqa: F401
    AugmentedDataset,
    AugmentedSample,
    BackgroundLevels,
    HypothesisPair,
    SplitSpec,
    augment_mixture,
    build_augmented_dataset,
    mix_labels,
    split_dataset,
)
from .classify import (  # noqa: F401
    BinaryLogReg,
    PowersetLogReg,
    TrainingConfig,
    score_binary,
    score_powerset,
    train_binary_logreg,
    train_powerset_logreg,
)
from .calibrate import (  # noqa: F401
    Calibrator,
    LRValue,
    apply_calibrator,
    fit_calibrator,
    fuse_coefficients,
)
from .metrics import (  # noqa: F401
    MetricReport,
    TippettCurve,
    cap_lr,
    cllr,
    roc_auc,
    tippett,
    verbal_scale,
)
from .casework import (  # noqa: F401
    CaseObservation,
    CaseReport,
    MarkerFluidMap,
    ModelStore,
    ModelVariant,
    NOverTwoVerdict,
    evaluate_case,
    n_over_2,
    what_if,
)
from .pipeline import (  # noqa: F401
    ExperimentConfig,
    ExperimentReport,
    compare_with_n_over_2,
    run_experiment,
    sensitivity_analysis,
    train_variant,
)
