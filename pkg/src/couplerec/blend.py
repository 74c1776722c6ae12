"""Hybrid classifier mixing a social-only and a behavioral-only ensemble.

The mixing weight is the social side's share: weight 1 scores with the
social-features model alone, weight 0 with the behavioral-features model
alone, and intermediate values interpolate the two vote scores affinely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import BEHAVIORAL_SLICE, FEATURE_COLUMNS, SOCIAL_SLICE, FeatureMatrix
from .learn import (
    MODEL_FORMAT_VERSION,
    BoostParams,
    BoostedEnsemble,
    ensemble_from_dict,
    ensemble_to_dict,
    predict_score,
    train_boosted,
)

_LAYER_ARITY = SOCIAL_SLICE.stop - SOCIAL_SLICE.start


@dataclass
class HybridClassifier:
    social_model: BoostedEnsemble
    behavioral_model: BoostedEnsemble
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        for name, model in (
            ("social", self.social_model),
            ("behavioral", self.behavioral_model),
        ):
            if model.n_features != _LAYER_ARITY:
                raise ValueError(
                    f"{name} sub-model expects {model.n_features} features, "
                    f"need {_LAYER_ARITY}"
                )


def _matrix_values(features) -> np.ndarray:
    values = features.values if isinstance(features, FeatureMatrix) else features
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(FEATURE_COLUMNS):
        raise ValueError(f"expected a (*, {len(FEATURE_COLUMNS)}) feature matrix")
    return values


def train_hybrid(
    features,
    labels,
    train_rows,
    alpha: float,
    params: BoostParams = BoostParams(),
) -> HybridClassifier:
    """Train one ensemble per feature half on identical rows and labels."""
    values = _matrix_values(features)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.asarray(train_rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("train_rows must be nonempty")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    social_model = train_boosted(
        values[rows][:, SOCIAL_SLICE], labels[rows], params.rounds, params.max_depth
    )
    behavioral_model = train_boosted(
        values[rows][:, BEHAVIORAL_SLICE], labels[rows], params.rounds, params.max_depth
    )
    return HybridClassifier(social_model, behavioral_model, float(alpha))


def hybrid_score(h: HybridClassifier, x):
    """Affine mix of the two sub-model vote scores, social side weighted by alpha."""
    arr = np.asarray(x, dtype=np.float64)
    social = predict_score(h.social_model, arr[..., SOCIAL_SLICE])
    behavioral = predict_score(h.behavioral_model, arr[..., BEHAVIORAL_SLICE])
    return h.alpha * social + (1.0 - h.alpha) * behavioral


def hybrid_label(h: HybridClassifier, x):
    """1 iff the mixed score is strictly positive."""
    score = hybrid_score(h, x)
    if np.isscalar(score) or np.ndim(score) == 0:
        return int(score > 0)
    return (score > 0).astype(np.int64)


def save_hybrid(h: HybridClassifier, path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "hybrid_classifier",
        "alpha": float(h.alpha),
        "social_model": ensemble_to_dict(h.social_model),
        "behavioral_model": ensemble_to_dict(h.behavioral_model),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_hybrid(path) -> HybridClassifier:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("kind") != "hybrid_classifier":
        raise ValueError("not a hybrid-classifier payload")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {payload.get('format_version')}")
    return HybridClassifier(
        social_model=ensemble_from_dict(payload["social_model"]),
        behavioral_model=ensemble_from_dict(payload["behavioral_model"]),
        alpha=float(payload["alpha"]),
    )
