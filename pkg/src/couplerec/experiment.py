"""End-to-end protocol: target selection, labeling, splitting, precision,
and the mixing-weight sweep over train ratios.

A sweep fixes one labeling, then per train ratio draws one stratified
split, fits normalization on the training rows only, trains the two
5-feature ensembles once, and evaluates the affine blend on the held-out
rows for every grid value of the mixing weight. Everything downstream of
the seeds is deterministic.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blend import HybridClassifier, hybrid_label, train_hybrid
from .features import (
    FeatureMatrix,
    apply_normalization,
    compute_matrix,
    fit_normalization,
    save_normalization,
)
from .graph import BehavioralGraph, CoupledNetwork
from .learn import BoostParams, save_ensemble

SWEEP_CSV_HEADER = ("alpha", "r", "precision", "tp", "fp", "pos_pred", "test_size", "undefined")
DEFAULT_ALPHA_GRID = tuple(i / 10 for i in range(11))


@dataclass
class LabelingConfig:
    target_count: int = 10
    popularity_pool_fraction: float = 0.01
    rating_threshold: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if not 0.0 < self.popularity_pool_fraction <= 1.0:
            raise ValueError("popularity_pool_fraction must be in (0, 1]")


@dataclass
class SplitConfig:
    train_ratio: float
    seed: int = 0
    stratified: bool = True

    def validate(self) -> None:
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must be in (0, 1)")


@dataclass
class SweepRow:
    alpha: float
    train_ratio: float
    precision: float
    true_positives: int
    false_positives: int
    positive_predictions: int
    test_size: int
    undefined_precision: bool


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def best_alpha(self, train_ratio: float) -> float:
        """Precision-maximizing grid value for one ratio (first max on ties)."""
        rows = [r for r in self.rows if r.train_ratio == train_ratio]
        if not rows:
            raise ValueError(f"no rows for train_ratio {train_ratio}")
        best = max(rows, key=lambda r: (r.precision, -r.alpha))
        return best.alpha


def select_target_movies(b: BehavioralGraph, cfg: LabelingConfig) -> np.ndarray:
    """Sample target items uniformly from the top slice of the popularity
    ranking (ties broken toward the lower item index); sorted, deterministic."""
    cfg.validate()
    pool_size = math.ceil(cfg.popularity_pool_fraction * b.item_count)
    ranked = np.lexsort((np.arange(b.item_count), -b.popularity))
    pool = ranked[:pool_size]
    if cfg.target_count > pool.size:
        raise ValueError(
            f"target_count {cfg.target_count} exceeds popularity pool size {pool.size}"
        )
    rng = np.random.default_rng(int(cfg.seed) % 2**63)
    chosen = rng.choice(pool, size=cfg.target_count, replace=False)
    return np.sort(chosen.astype(np.int64))


def label_users(net: CoupledNetwork, targets, rating_threshold: float) -> np.ndarray:
    """1 for users who rated a target above the threshold AND have at least
    one friend who did too; 0 otherwise. The threshold is strict."""
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise ValueError("targets must be nonempty")
    b = net.behavioral
    is_target = np.zeros(b.item_count, dtype=bool)
    is_target[targets] = True

    qualifies = np.zeros(net.social.user_count, dtype=bool)
    for u in range(net.social.user_count):
        items, ratings = b.user_items[u], b.user_ratings[u]
        if items.size:
            qualifies[u] = bool(np.any(is_target[items] & (ratings > rating_threshold)))

    labels = np.zeros(net.social.user_count, dtype=np.int64)
    for u in range(net.social.user_count):
        if qualifies[u] and qualifies[net.social.adjacency[u]].any():
            labels[u] = 1
    return labels


def split(n: int, cfg: SplitConfig, labels) -> tuple[np.ndarray, np.ndarray]:
    """Stratified shuffle split; ceil(r * class_size) of each class trains.

    Returns sorted (train, test) index arrays, disjoint and exhaustive.
    """
    cfg.validate()
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError("labels must have length n")
    rng = np.random.default_rng(int(cfg.seed) % 2**63)
    train_parts = []
    if cfg.stratified:
        for cls in (0, 1):
            members = np.flatnonzero(labels == cls)
            if members.size == 0:
                raise ValueError(
                    f"class {cls} is empty; stratified splitting is impossible "
                    "(set stratified=False to split without class balance)"
                )
            perm = rng.permutation(members)
            train_parts.append(perm[: math.ceil(cfg.train_ratio * members.size)])
    else:
        perm = rng.permutation(n)
        train_parts.append(perm[: math.ceil(cfg.train_ratio * n)])
    train = np.sort(np.concatenate(train_parts))
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


def precision(predicted, actual) -> tuple[float, bool]:
    """TP / (TP + FP); (0.0, True) when there are no positive predictions."""
    predicted = np.asarray(predicted, dtype=np.int64)
    actual = np.asarray(actual, dtype=np.int64)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual lengths differ")
    tp = int(np.count_nonzero((predicted == 1) & (actual == 1)))
    fp = int(np.count_nonzero((predicted == 1) & (actual == 0)))
    if tp + fp == 0:
        return 0.0, True
    return tp / (tp + fp), False


def _derived_seed(seed: int, salt: int) -> int:
    ss = np.random.SeedSequence([int(seed) % 2**63, int(salt)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_sweep(
    net: CoupledNetwork,
    labeling: LabelingConfig,
    r_list,
    alpha_grid,
    params: BoostParams = BoostParams(),
    seed: int = 0,
    features: FeatureMatrix | None = None,
    artifacts_dir=None,
) -> SweepResult:
    """Precision of the hybrid classifier over every (train ratio, alpha) cell.

    The two sub-ensembles do not depend on alpha, so they are trained once
    per ratio and shared across the alpha grid; results are identical to
    retraining per cell because training is deterministic. When
    ``artifacts_dir`` is set, the labels, per-ratio splits, normalization
    parameters and trained models are persisted alongside the results.
    """
    r_list = sorted(float(r) for r in r_list)
    alpha_grid = sorted(float(a) for a in alpha_grid)
    if not r_list or not alpha_grid:
        raise ValueError("r_list and alpha_grid must be nonempty")

    if features is None:
        features = compute_matrix(net, seed=seed)
    n = net.social.user_count

    targets = select_target_movies(net.behavioral, labeling)
    labels = label_users(net, targets, labeling.rating_threshold)

    out_dir = None
    if artifacts_dir is not None:
        out_dir = Path(artifacts_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_labels_csv(labels, out_dir / "labels.csv")

    rows: list[SweepRow] = []
    for ridx, r in enumerate(r_list):
        split_cfg = SplitConfig(train_ratio=r, seed=_derived_seed(seed, ridx))
        train_rows, test_rows = split(n, split_cfg, labels)
        norm = fit_normalization(features, train_rows)
        normed = apply_normalization(features, norm)

        hybrid = train_hybrid(normed, labels, train_rows, alpha_grid[0], params)

        if out_dir is not None:
            tag = f"{r:g}"
            write_split_csv(train_rows, test_rows, out_dir / f"split_r{tag}.csv")
            save_normalization(norm, out_dir / f"norm_r{tag}.json")
            save_ensemble(hybrid.social_model, out_dir / f"model_r{tag}_social.json")
            save_ensemble(
                hybrid.behavioral_model, out_dir / f"model_r{tag}_behavioral.json"
            )

        test_values = normed.values[test_rows]
        test_labels = labels[test_rows]
        for alpha in alpha_grid:
            blended = dataclasses.replace(hybrid, alpha=alpha)
            predicted = hybrid_label(blended, test_values)
            prec, undefined = precision(predicted, test_labels)
            tp = int(np.count_nonzero((predicted == 1) & (test_labels == 1)))
            fp = int(np.count_nonzero((predicted == 1) & (test_labels == 0)))
            rows.append(
                SweepRow(
                    alpha=alpha,
                    train_ratio=r,
                    precision=prec,
                    true_positives=tp,
                    false_positives=fp,
                    positive_predictions=tp + fp,
                    test_size=int(test_rows.size),
                    undefined_precision=undefined,
                )
            )
    result = SweepResult(rows=rows)
    if out_dir is not None:
        write_sweep_csv(result, out_dir / "sweep.csv")
    return result


# ---------------------------------------------------------------------------
# artifacts


def write_sweep_csv(result: SweepResult, path) -> None:
    rows = sorted(result.rows, key=lambda row: (row.train_ratio, row.alpha))
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    repr(row.alpha),
                    repr(row.train_ratio),
                    repr(row.precision),
                    row.true_positives,
                    row.false_positives,
                    row.positive_predictions,
                    row.test_size,
                    int(row.undefined_precision),
                ]
            )


def read_sweep_csv(path) -> SweepResult:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != list(SWEEP_CSV_HEADER):
            raise ValueError(f"unexpected sweep CSV header in {path}")
        rows = [
            SweepRow(
                alpha=float(row[0]),
                train_ratio=float(row[1]),
                precision=float(row[2]),
                true_positives=int(row[3]),
                false_positives=int(row[4]),
                positive_predictions=int(row[5]),
                test_size=int(row[6]),
                undefined_precision=bool(int(row[7])),
            )
            for row in reader
        ]
    return SweepResult(rows=rows)


def write_labels_csv(labels, path) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_index", "label"])
        for u, label in enumerate(labels):
            writer.writerow([u, int(label)])


def write_split_csv(train_rows, test_rows, path) -> None:
    train_rows = np.asarray(train_rows, dtype=np.int64)
    test_rows = np.asarray(test_rows, dtype=np.int64)
    partition = {}
    partition.update((int(u), "train") for u in train_rows)
    partition.update((int(u), "test") for u in test_rows)
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_index", "partition"])
        for u in sorted(partition):
            writer.writerow([u, partition[u]])


def read_split_csv(path) -> tuple[np.ndarray, np.ndarray]:
    train, test = [], []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["user_index", "partition"]:
            raise ValueError(f"unexpected split CSV header in {path}")
        for row in reader:
            (train if row[1] == "train" else test).append(int(row[0]))
    return np.array(train, dtype=np.int64), np.array(test, dtype=np.int64)


def read_labels_csv(path) -> np.ndarray:
    labels = []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["user_index", "label"]:
            raise ValueError(f"unexpected labels CSV header in {path}")
        for row in reader:
            labels.append(int(row[1]))
    return np.array(labels, dtype=np.int64)
