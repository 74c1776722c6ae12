"""Coupled social/behavioral network features and hybrid classifier sweeps."""

from .blend import HybridClassifier, hybrid_label, hybrid_score, train_hybrid
from .features import (
    FEATURE_COLUMNS,
    FeatureMatrix,
    NormalizationParams,
    apply_normalization,
    compute_matrix,
    fit_normalization,
)
from .graph import (
    BehavioralGraph,
    CoupledNetwork,
    CouplingError,
    GraphParseError,
    SocialGraph,
    align_behavioral,
    build_behavioral,
    build_social,
    couple,
    largest_connected_component,
)
from .learn import (
    BoostedEnsemble,
    BoostParams,
    DecisionTree,
    predict_label,
    predict_score,
    predict_tree,
    train_boosted,
    train_tree,
)
from .experiment import (
    LabelingConfig,
    SplitConfig,
    SweepResult,
    SweepRow,
    label_users,
    precision,
    run_sweep,
    select_target_movies,
    split,
)
from .synth import SyntheticConfig, synthesize

__version__ = "0.1.0"
