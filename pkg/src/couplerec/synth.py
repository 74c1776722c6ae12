"""Synthetic coupled-network generator for desk-scale experiments.

The social layer grows by preferential attachment; the behavioral layer is
drawn per user, mixing friend-copying (homophily) with popularity-biased
catalog sampling. Ratings are uniform half-star values except for a planted
signal: users in the top activity quartile of the chosen signal layer rate
popular-pool items above 3 with probability 0.9 (0.3 for everyone else),
which is what makes the labeling downstream learnable from that layer's
features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import (
    BehavioralGraph,
    CoupledNetwork,
    SocialGraph,
    build_behavioral,
    couple,
)

_HALF_STARS = np.arange(1, 11) * 0.5          # 0.5 .. 5.0
_HIGH_STARS = np.arange(7, 11) * 0.5          # 3.5 .. 5.0, the "> 3" band
_LOW_STARS = np.arange(1, 7) * 0.5            # 0.5 .. 3.0
TOP_RATE_PROB = 0.9
BASE_RATE_PROB = 0.3


@dataclass
class SyntheticConfig:
    user_count: int = 5000
    item_count: int = 2000
    mean_social_degree: int = 16
    mean_items_per_user: int = 20
    homophily: float = 0.3
    signal_layer: str = "behavioral"
    seed: int = 0
    popular_pool_fraction: float = 0.01

    def validate(self) -> None:
        for name in ("user_count", "item_count", "mean_social_degree",
                     "mean_items_per_user"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.homophily <= 1.0:
            raise ValueError("homophily must be in [0, 1]")
        if self.signal_layer not in ("social", "behavioral"):
            raise ValueError("signal_layer must be 'social' or 'behavioral'")
        if not 0.0 < self.popular_pool_fraction <= 1.0:
            raise ValueError("popular_pool_fraction must be in (0, 1]")


def _grow_social(n: int, mean_degree: int, rng: np.random.Generator) -> list[list[int]]:
    """Preferential-attachment growth; each arrival adds ~mean_degree/2 edges."""
    half = mean_degree / 2.0
    base = int(half)
    extra_prob = half - base
    neighbors: list[set[int]] = [set() for _ in range(n)]
    attachment_pool: list[int] = []  # one entry per edge endpoint
    for node in range(1, n):
        m = base + (1 if extra_prob > 0 and rng.random() < extra_prob else 0)
        m = max(1, min(m, node))
        targets: set[int] = set()
        while len(targets) < m:
            if attachment_pool:
                candidate = attachment_pool[int(rng.integers(len(attachment_pool)))]
            else:
                candidate = int(rng.integers(node))
            targets.add(candidate)
        for t in targets:
            neighbors[node].add(t)
            neighbors[t].add(node)
            attachment_pool.append(node)
            attachment_pool.append(t)
    return [sorted(nbrs) for nbrs in neighbors]


def _draw_items(
    cfg: SyntheticConfig,
    friends: list[list[int]],
    rng: np.random.Generator,
) -> list[list[int]]:
    """Per-user distinct item lists in first-draw order.

    Each draw either copies a random already-rated item of a random friend
    (probability = homophily) or samples the catalog with probability
    proportional to 1 + current watcher count, which is uniform at cold
    start. Duplicate draws for a user collapse, so realized per-user counts
    can fall below ``mean_items_per_user``.
    """
    catalog = cfg.item_count
    user_items: list[list[int]] = [[] for _ in range(cfg.user_count)]
    user_seen: list[set[int]] = [set() for _ in range(cfg.user_count)]
    watched_pool: list[int] = []  # one entry per accepted (user, item) pair

    for u in range(cfg.user_count):
        for _ in range(cfg.mean_items_per_user):
            item = None
            if cfg.homophily > 0 and friends[u] and rng.random() < cfg.homophily:
                f = friends[u][int(rng.integers(len(friends[u])))]
                if user_items[f]:
                    item = user_items[f][int(rng.integers(len(user_items[f])))]
            if item is None:
                k = int(rng.integers(catalog + len(watched_pool)))
                item = k if k < catalog else watched_pool[k - catalog]
            if item not in user_seen[u]:
                user_seen[u].add(item)
                user_items[u].append(item)
                watched_pool.append(item)
    return user_items


def _top_quartile_mask(values: np.ndarray) -> np.ndarray:
    return values >= np.quantile(values, 0.75)


def synthesize(cfg: SyntheticConfig) -> CoupledNetwork:
    """Generate a coupled network, deterministic under ``cfg.seed``."""
    cfg.validate()
    ss = np.random.SeedSequence(int(cfg.seed) % 2**63)
    rng_social, rng_items, rng_ratings = (
        np.random.default_rng(child) for child in ss.spawn(3)
    )

    friends = (
        _grow_social(cfg.user_count, cfg.mean_social_degree, rng_social)
        if cfg.user_count > 1
        else [[]]
    )
    user_items = _draw_items(cfg, friends, rng_items)

    watch_counts = np.zeros(cfg.item_count, dtype=np.int64)
    for items in user_items:
        watch_counts[items] += 1
    pool_size = math.ceil(cfg.popular_pool_fraction * cfg.item_count)
    ranked = np.lexsort((np.arange(cfg.item_count), -watch_counts))
    popular = np.zeros(cfg.item_count, dtype=bool)
    popular[ranked[:pool_size]] = True

    if cfg.signal_layer == "behavioral":
        key_activity = np.array([len(items) for items in user_items], dtype=np.int64)
    else:
        key_activity = np.array([len(f) for f in friends], dtype=np.int64)
    boosted_user = _top_quartile_mask(key_activity)

    records = []
    for u in range(cfg.user_count):
        for item in user_items[u]:
            if popular[item]:
                p = TOP_RATE_PROB if boosted_user[u] else BASE_RATE_PROB
                band = _HIGH_STARS if rng_ratings.random() < p else _LOW_STARS
                rating = band[int(rng_ratings.integers(band.size))]
            else:
                rating = _HALF_STARS[int(rng_ratings.integers(_HALF_STARS.size))]
            records.append((u, item, float(rating)))

    social = SocialGraph(
        user_count=cfg.user_count,
        adjacency=[np.array(nbrs, dtype=np.int64) for nbrs in friends],
        original_id_map=list(range(cfg.user_count)),
    )
    behavioral = build_behavioral(
        records, {u: u for u in range(cfg.user_count)}, cfg.user_count
    )
    return couple(social, behavioral)
