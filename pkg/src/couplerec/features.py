"""Per-user structural features on both layers of a coupled network.

Five measures are computed per layer, ten columns per user:

==========  =================================================================
sA,  bA     activity: friend count (social) / rated-item count (behavioral)
sAN, bAN    average activity of neighbors; an item's activity is its
            watcher count
sC,  bC     local clustering: fraction of connected neighbor pairs (social),
            mean pairwise Jaccard similarity of the rated items' watcher
            sets (behavioral)
sAC, bAC    local assortativity of the user's incident links, in [-1, 1]
sD,  bD     discrimination: Gini-Simpson diversity of neighbor activities
==========  =================================================================

Conventions: every measure is 0 for a user with no neighbors in the layer;
clustering and assortativity are additionally 0 when there is only one
neighbor (their pair denominators vanish).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .graph import BehavioralGraph, CoupledNetwork, SocialGraph

FEATURE_COLUMNS = ("sA", "sAN", "sC", "sAC", "sD", "bA", "bAN", "bC", "bAC", "bD")
SOCIAL_SLICE = slice(0, 5)
BEHAVIORAL_SLICE = slice(5, 10)

DEFAULT_PAIR_CAP = 200
_DEGENERATE_VARIANCE = 1e-12

LAYERS = ("social", "behavioral")


@dataclass
class NormalizationParams:
    """Per-column (min, max) observed on the fitting rows."""

    minimum: np.ndarray
    maximum: np.ndarray


@dataclass
class FeatureMatrix:
    """Ten feature columns per user, optionally min-max normalized."""

    values: np.ndarray
    normalized: bool = False
    norm_params: NormalizationParams | None = None

    @property
    def user_count(self) -> int:
        return self.values.shape[0]


def _check_layer(layer: str) -> None:
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}, expected one of {LAYERS}")


def _check_user(net: CoupledNetwork, user: int) -> None:
    if not 0 <= user < net.social.user_count:
        raise IndexError(f"user index {user} out of range")


def _neighbor_activities(net: CoupledNetwork, user: int, layer: str) -> np.ndarray:
    """Same-layer activities of the user's neighbors (items count as neighbors
    in the behavioral layer, with watcher count as their activity)."""
    if layer == "social":
        degrees = net.social.degrees
        return degrees[net.social.adjacency[user]]
    popularity = net.behavioral.popularity
    return popularity[net.behavioral.user_items[user]]


def activity(net: CoupledNetwork, user: int, layer: str) -> float:
    """Friend count (social) or rated-item count (behavioral)."""
    _check_layer(layer)
    _check_user(net, user)
    if layer == "social":
        return float(net.social.adjacency[user].size)
    return float(net.behavioral.user_items[user].size)


def _mean_neighbor_activity(neighbor_acts: np.ndarray) -> float:
    # sum(A_j) / A_i with exactly A_i neighbors == plain mean
    if neighbor_acts.size == 0:
        return 0.0
    return float(int(neighbor_acts.sum()) / neighbor_acts.size)


def avg_neighbor_activity(net: CoupledNetwork, user: int, layer: str) -> float:
    _check_layer(layer)
    _check_user(net, user)
    return _mean_neighbor_activity(_neighbor_activities(net, user, layer))


def _assortativity_value(self_act: int, neighbor_acts: np.ndarray) -> float:
    """Correlation-style statistic over the user's incident links.

    Each link contributes the endpoint pair (self activity, neighbor
    activity); the value is the ratio of their covariance-like numerator to
    the matching variance term, clamped to [-1, 1]. Degenerate variance
    (all endpoint activities equal) yields 0.
    """
    if neighbor_acts.size <= 1:
        return 0.0
    a = float(self_act)
    v = neighbor_acts.astype(np.float64)
    mean_product = a * v.mean()
    mean_avg = 0.5 * (a + v.mean())
    mean_sq_avg = 0.5 * (a * a + (v * v).mean())
    denominator = mean_sq_avg - mean_avg * mean_avg
    if denominator <= _DEGENERATE_VARIANCE:
        return 0.0
    value = (mean_product - mean_avg * mean_avg) / denominator
    return float(min(1.0, max(-1.0, value)))


def assortativity(net: CoupledNetwork, user: int, layer: str) -> float:
    _check_layer(layer)
    _check_user(net, user)
    acts = _neighbor_activities(net, user, layer)
    self_act = int(activity(net, user, layer))
    return _assortativity_value(self_act, acts)


def _discrimination_value(neighbor_acts: np.ndarray) -> float:
    """Gini-Simpson diversity of the neighbor-activity multiset."""
    if neighbor_acts.size == 0:
        return 0.0
    _, counts = np.unique(neighbor_acts, return_counts=True)
    p = counts / neighbor_acts.size
    return float(1.0 - np.dot(p, p))


def discrimination(net: CoupledNetwork, user: int, layer: str) -> float:
    _check_layer(layer)
    _check_user(net, user)
    return _discrimination_value(_neighbor_activities(net, user, layer))


def _social_clustering_value(adjacency: list[np.ndarray], user: int) -> float:
    nbrs = adjacency[user]
    a = nbrs.size
    if a <= 1:
        return 0.0
    closed = 0
    for j in nbrs:
        closed += np.intersect1d(nbrs, adjacency[int(j)], assume_unique=True).size
    return closed / (a * (a - 1))


def _sorted_intersection_size(a: np.ndarray, b: np.ndarray) -> int:
    if a.size > b.size:
        a, b = b, a
    if a.size == 0:
        return 0
    pos = np.searchsorted(b, a)
    valid = pos < b.size
    return int(np.count_nonzero(b[pos[valid]] == a[valid]))


def _pair_rng(seed: int, user: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, int(user)]))


def _sample_pair_codes(rng: np.random.Generator, space: int, need: int) -> np.ndarray:
    """``need`` distinct ordered-pair codes drawn uniformly from range(space)."""
    if space <= 4 * need:
        return rng.permutation(space)[:need]
    chosen: set[int] = set()
    out: list[int] = []
    while len(out) < need:
        for code in rng.integers(0, space, size=need):
            code = int(code)
            if code not in chosen:
                chosen.add(code)
                out.append(code)
                if len(out) == need:
                    break
    return np.array(out, dtype=np.int64)


def _behavioral_clustering_value(
    b: BehavioralGraph,
    user: int,
    popularity: np.ndarray,
    seed: int,
    pair_cap: int,
) -> float:
    items = b.user_items[user]
    a = items.size
    if a <= 1:
        return 0.0

    if a <= pair_cap:
        # all pairwise watcher-set intersections at once via co-occurrence
        watcher_lists = [b.item_users[int(j)] for j in items]
        lengths = np.array([w.size for w in watcher_lists], dtype=np.int64)
        indptr = np.concatenate(([0], np.cumsum(lengths)))
        indices = np.concatenate(watcher_lists)
        data = np.ones(indices.size, dtype=np.int64)
        members = sparse.csr_matrix(
            (data, indices, indptr), shape=(a, b.user_count)
        )
        inter = (members @ members.T).toarray()
        pop = popularity[items].astype(np.float64)
        union = pop[:, None] + pop[None, :] - inter
        similarity = inter / union
        # diagonal terms are exactly 1 (an item's set vs itself); drop them
        return float((similarity.sum() - a) / (a * (a - 1)))

    # heavy user: estimate from a fixed-size uniform sample of ordered pairs
    rng = _pair_rng(seed, user)
    need = pair_cap * (pair_cap - 1)
    codes = _sample_pair_codes(rng, a * (a - 1), need)
    total = 0.0
    for code in codes:
        j = int(code) // (a - 1)
        k = int(code) % (a - 1)
        if k >= j:
            k += 1
        wj, wk = b.item_users[int(items[j])], b.item_users[int(items[k])]
        inter = _sorted_intersection_size(wj, wk)
        union = wj.size + wk.size - inter
        total += inter / union
    return total / need


def clustering(
    net: CoupledNetwork,
    user: int,
    layer: str,
    *,
    seed: int = 0,
    pair_cap: int = DEFAULT_PAIR_CAP,
) -> float:
    """Local clustering coefficient of one user on one layer.

    Behavioral clustering for users with more than ``pair_cap`` rated items
    is estimated from ``pair_cap * (pair_cap - 1)`` sampled ordered item
    pairs; the sample is a deterministic function of (seed, user).
    """
    _check_layer(layer)
    _check_user(net, user)
    if layer == "social":
        return _social_clustering_value(net.social.adjacency, user)
    return _behavioral_clustering_value(
        net.behavioral, user, net.behavioral.popularity, seed, pair_cap
    )


def _user_row(
    net: CoupledNetwork,
    user: int,
    degrees: np.ndarray,
    popularity: np.ndarray,
    seed: int,
    pair_cap: int,
) -> tuple[float, ...]:
    social_acts = degrees[net.social.adjacency[user]]
    behavioral_acts = popularity[net.behavioral.user_items[user]]
    return (
        float(degrees[user]),
        _mean_neighbor_activity(social_acts),
        _social_clustering_value(net.social.adjacency, user),
        _assortativity_value(int(degrees[user]), social_acts),
        _discrimination_value(social_acts),
        float(net.behavioral.user_items[user].size),
        _mean_neighbor_activity(behavioral_acts),
        _behavioral_clustering_value(net.behavioral, user, popularity, seed, pair_cap),
        _assortativity_value(net.behavioral.user_items[user].size, behavioral_acts),
        _discrimination_value(behavioral_acts),
    )


def compute_matrix(
    net: CoupledNetwork,
    seed: int = 0,
    pair_cap: int = DEFAULT_PAIR_CAP,
    workers: int = 1,
) -> FeatureMatrix:
    """All ten feature components for every user.

    Deterministic for a given seed: each user's row is a pure function of
    the network, (seed, user index) and ``pair_cap``, so the result is
    independent of ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n = net.social.user_count
    degrees = net.social.degrees
    popularity = net.behavioral.popularity
    values = np.zeros((n, len(FEATURE_COLUMNS)), dtype=np.float64)

    def fill(lo: int, hi: int) -> None:
        for u in range(lo, hi):
            values[u, :] = _user_row(net, u, degrees, popularity, seed, pair_cap)

    if workers == 1 or n < 2 * workers:
        fill(0, n)
    else:
        chunk = (n + workers - 1) // workers
        bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(fill, lo, hi) for lo, hi in bounds]:
                future.result()
    return FeatureMatrix(values=values)


def fit_normalization(m: FeatureMatrix, fit_rows) -> NormalizationParams:
    """Per-column min/max over the given rows (training users only)."""
    rows = np.asarray(fit_rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("fit_rows must be nonempty")
    fitted = m.values[rows]
    return NormalizationParams(
        minimum=fitted.min(axis=0), maximum=fitted.max(axis=0)
    )


def apply_normalization(m: FeatureMatrix, p: NormalizationParams) -> FeatureMatrix:
    """Min-max scale every column to [0, 1].

    Values outside the fitted range clamp to 0 or 1; a column that was
    constant on the fitting rows maps to 0 everywhere.
    """
    span = p.maximum - p.minimum
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = (m.values - p.minimum) / span
    scaled = np.where(span > 0, scaled, 0.0)
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return FeatureMatrix(values=scaled, normalized=True, norm_params=p)


# ---------------------------------------------------------------------------
# persistence


def write_feature_csv(m: FeatureMatrix, path) -> None:
    """Feature cache CSV, full-precision floats, rows sorted by user index."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_index", *FEATURE_COLUMNS])
        for u in range(m.user_count):
            writer.writerow([u, *(repr(float(v)) for v in m.values[u])])


def read_feature_csv(path) -> FeatureMatrix:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["user_index", *FEATURE_COLUMNS]:
            raise ValueError(f"unexpected feature CSV header in {path}")
        rows = []
        for row in reader:
            if int(row[0]) != len(rows):
                raise ValueError(f"feature CSV rows out of order in {path}")
            rows.append([float(v) for v in row[1:]])
    values = (
        np.array(rows, dtype=np.float64)
        if rows
        else np.zeros((0, len(FEATURE_COLUMNS)))
    )
    return FeatureMatrix(values=values)


def save_normalization(p: NormalizationParams, path) -> None:
    payload = {
        "format_version": 1,
        "minimum": [float(v) for v in p.minimum],
        "maximum": [float(v) for v in p.maximum],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_normalization(path) -> NormalizationParams:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return NormalizationParams(
        minimum=np.array(payload["minimum"], dtype=np.float64),
        maximum=np.array(payload["maximum"], dtype=np.float64),
    )
