"""Build, clean, and couple the two network layers.

The social layer is an undirected simple friendship graph over users; the
behavioral layer is a bipartite user-item graph with rating-annotated edges.
Both layers use dense integer indices internally; external identifiers are
kept in index -> id maps so every artifact stays auditable.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RATING_MIN = 0.5
RATING_MAX = 5.0

_EMPTY_INDEX = np.array([], dtype=np.int64)
_EMPTY_RATING = np.array([], dtype=np.float64)


class GraphParseError(ValueError):
    """Malformed input record, reported with its source and line number."""

    def __init__(self, message: str, source: str = "<records>", line: int | None = None):
        self.source = source
        self.line = line
        where = source if line is None else f"{source}, line {line}"
        super().__init__(f"{where}: {message}")


class CouplingError(ValueError):
    """The two layers do not share a consistent user index space."""


@dataclass
class SocialGraph:
    """Undirected simple friendship graph over dense user indices.

    ``adjacency[i]`` is the sorted array of i's neighbors; symmetry, absence
    of self-loops and duplicates are established at build time and assumed
    everywhere downstream. Instances are treated as immutable.
    """

    user_count: int
    adjacency: list[np.ndarray]
    original_id_map: list

    @property
    def degrees(self) -> np.ndarray:
        return np.array([nbrs.size for nbrs in self.adjacency], dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return int(self.degrees.sum()) // 2


@dataclass
class BehavioralGraph:
    """Bipartite user-item graph with one rating per (user, item) pair.

    ``user_items[u]`` and ``user_ratings[u]`` are aligned arrays sorted by
    item index; ``item_users[j]`` is the sorted inverted index of watchers.
    """

    user_count: int
    item_count: int
    user_items: list[np.ndarray]
    user_ratings: list[np.ndarray]
    item_users: list[np.ndarray]
    item_id_map: list

    @property
    def popularity(self) -> np.ndarray:
        """Number of distinct watchers per item."""
        return np.array([w.size for w in self.item_users], dtype=np.int64)

    @property
    def record_count(self) -> int:
        return int(sum(items.size for items in self.user_items))


@dataclass
class CoupledNetwork:
    """A social graph and a behavioral graph sharing one user index space."""

    social: SocialGraph
    behavioral: BehavioralGraph


def read_edge_records(path) -> list[tuple[str, str]]:
    """Parse a tab-separated friendship edge file into (user_id, user_id) pairs.

    Lines starting with ``#`` and blank lines are skipped. Raises
    GraphParseError with the offending line number on malformed input.
    """
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise GraphParseError(
                    f"expected 2 tab-separated fields, got {len(fields)}",
                    source=str(path), line=lineno,
                )
            u, v = fields[0].strip(), fields[1].strip()
            if not u or not v:
                raise GraphParseError("empty user id", source=str(path), line=lineno)
            records.append((u, v))
    return records


def read_rating_records(path) -> list[tuple[str, str, float]]:
    """Parse a tab-separated ratings file into (user_id, item_id, rating) triples.

    Ratings must be decimals in [0.5, 5.0]; anything else is a parse error
    carrying the line number.
    """
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise GraphParseError(
                    f"expected 3 tab-separated fields, got {len(fields)}",
                    source=str(path), line=lineno,
                )
            u, item, rating_text = (f.strip() for f in fields)
            if not u or not item:
                raise GraphParseError("empty id", source=str(path), line=lineno)
            try:
                rating = float(rating_text)
            except ValueError:
                raise GraphParseError(
                    f"unparsable rating {rating_text!r}", source=str(path), line=lineno
                ) from None
            if not (RATING_MIN <= rating <= RATING_MAX):
                raise GraphParseError(
                    f"rating {rating} outside [{RATING_MIN}, {RATING_MAX}]",
                    source=str(path), line=lineno,
                )
            records.append((u, item, rating))
    return records


def build_social(edge_records) -> SocialGraph:
    """Build an undirected simple graph from (user_id, user_id) records.

    Duplicate edges and self-loops are dropped; dense indices are assigned
    in order of first appearance.
    """
    index_of: dict = {}
    ids: list = []

    def intern(external):
        idx = index_of.get(external)
        if idx is None:
            idx = len(ids)
            index_of[external] = idx
            ids.append(external)
        return idx

    pairs: set[tuple[int, int]] = set()
    for recno, record in enumerate(edge_records, 1):
        if len(record) != 2:
            raise GraphParseError(
                f"expected 2 fields, got {len(record)}", line=recno
            )
        iu, iv = intern(record[0]), intern(record[1])
        if iu == iv:
            continue
        pairs.add((iu, iv) if iu < iv else (iv, iu))

    neighbor_lists: list[list[int]] = [[] for _ in range(len(ids))]
    for a, b in pairs:
        neighbor_lists[a].append(b)
        neighbor_lists[b].append(a)
    adjacency = [
        np.array(sorted(nbrs), dtype=np.int64) if nbrs else _EMPTY_INDEX
        for nbrs in neighbor_lists
    ]
    return SocialGraph(user_count=len(ids), adjacency=adjacency, original_id_map=ids)


def load_social(path) -> SocialGraph:
    return build_social(read_edge_records(path))


def user_index_map(g: SocialGraph) -> dict:
    """External user id -> dense index lookup."""
    return {ext: idx for idx, ext in enumerate(g.original_id_map)}


def largest_connected_component(g: SocialGraph) -> tuple[SocialGraph, np.ndarray]:
    """Induced subgraph on the largest component, plus the old->new index remap.

    Dropped users map to -1. Ties on component size keep the component
    containing the smallest dense index, which is the first one discovered
    when seeding breadth-first searches in ascending index order.
    """
    n = g.user_count
    remap = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return SocialGraph(0, [], []), remap

    component = np.full(n, -1, dtype=np.int64)
    sizes: list[int] = []
    for seed in range(n):
        if component[seed] >= 0:
            continue
        comp_id = len(sizes)
        queue = deque([seed])
        component[seed] = comp_id
        size = 1
        while queue:
            node = queue.popleft()
            for nbr in g.adjacency[node]:
                if component[nbr] < 0:
                    component[nbr] = comp_id
                    size += 1
                    queue.append(int(nbr))
        sizes.append(size)

    best = int(np.argmax(sizes))  # first max: smallest-index tie-break
    keep = np.flatnonzero(component == best)
    remap[keep] = np.arange(keep.size, dtype=np.int64)

    adjacency = [remap[g.adjacency[old]] for old in keep]
    ids = [g.original_id_map[old] for old in keep]
    return SocialGraph(keep.size, adjacency, ids), remap


def build_behavioral(rating_records, user_index_of: dict, user_count: int) -> BehavioralGraph:
    """Build the bipartite layer from (user_id, item_id, rating) records.

    Records of users absent from ``user_index_of`` are dropped. A duplicate
    (user, item) pair keeps the last rating in record order. Items receive
    dense indices in order of first appearance among retained records.
    """
    item_index: dict = {}
    item_ids: list = []
    per_user: list[dict[int, float]] = [dict() for _ in range(user_count)]

    for user_ext, item_ext, rating in rating_records:
        u = user_index_of.get(user_ext)
        if u is None:
            continue
        j = item_index.get(item_ext)
        if j is None:
            j = len(item_ids)
            item_index[item_ext] = j
            item_ids.append(item_ext)
        per_user[u][j] = float(rating)

    user_items = []
    user_ratings = []
    watcher_lists: list[list[int]] = [[] for _ in range(len(item_ids))]
    for u in range(user_count):
        if per_user[u]:
            items = np.array(sorted(per_user[u]), dtype=np.int64)
            ratings = np.array([per_user[u][int(j)] for j in items], dtype=np.float64)
        else:
            items, ratings = _EMPTY_INDEX, _EMPTY_RATING
        user_items.append(items)
        user_ratings.append(ratings)
        for j in items:
            watcher_lists[int(j)].append(u)
    # users are visited in ascending order, so watcher lists are born sorted
    item_users = [
        np.array(watchers, dtype=np.int64) if watchers else _EMPTY_INDEX
        for watchers in watcher_lists
    ]
    return BehavioralGraph(
        user_count=user_count,
        item_count=len(item_ids),
        user_items=user_items,
        user_ratings=user_ratings,
        item_users=item_users,
        item_id_map=item_ids,
    )


def align_behavioral(b: BehavioralGraph, remap: np.ndarray) -> BehavioralGraph:
    """Restrict the bipartite layer to the users surviving ``remap``.

    Records of dropped users are removed, items left with zero watchers are
    removed, and item indices are re-densified in ascending old-index order.
    Applying the identity remap is a no-op, so the operation is idempotent.
    """
    remap = np.asarray(remap, dtype=np.int64)
    if remap.size != b.user_count:
        raise CouplingError(
            f"remap covers {remap.size} users, behavioral graph has {b.user_count}"
        )
    survivors = np.flatnonzero(remap >= 0)
    new_user_count = survivors.size

    watch_counts = np.zeros(b.item_count, dtype=np.int64)
    for old_u in survivors:
        watch_counts[b.user_items[old_u]] += 1
    kept_items = np.flatnonzero(watch_counts > 0)
    item_remap = np.full(b.item_count, -1, dtype=np.int64)
    item_remap[kept_items] = np.arange(kept_items.size, dtype=np.int64)

    user_items: list[np.ndarray] = [_EMPTY_INDEX] * new_user_count
    user_ratings: list[np.ndarray] = [_EMPTY_RATING] * new_user_count
    for old_u in survivors:
        new_u = int(remap[old_u])
        user_items[new_u] = item_remap[b.user_items[old_u]]  # monotone: stays sorted
        user_ratings[new_u] = b.user_ratings[old_u].copy()

    item_users = []
    for old_j in kept_items:
        watchers = remap[b.item_users[old_j]]
        item_users.append(watchers[watchers >= 0])  # monotone: stays sorted
    item_ids = [b.item_id_map[int(j)] for j in kept_items]

    return BehavioralGraph(
        user_count=new_user_count,
        item_count=kept_items.size,
        user_items=user_items,
        user_ratings=user_ratings,
        item_users=item_users,
        item_id_map=item_ids,
    )


def validate_social(g: SocialGraph) -> None:
    if len(g.adjacency) != g.user_count or len(g.original_id_map) != g.user_count:
        raise ValueError("social graph field lengths disagree with user_count")
    for i, nbrs in enumerate(g.adjacency):
        if nbrs.size == 0:
            continue
        if nbrs[0] < 0 or nbrs[-1] >= g.user_count:
            raise ValueError(f"user {i}: neighbor index out of range")
        if np.any(np.diff(nbrs) <= 0):
            raise ValueError(f"user {i}: neighbor list not strictly sorted")
        if np.searchsorted(nbrs, i) < nbrs.size and nbrs[np.searchsorted(nbrs, i)] == i:
            raise ValueError(f"user {i}: self-loop")
        for j in nbrs:
            back = g.adjacency[int(j)]
            pos = np.searchsorted(back, i)
            if pos >= back.size or back[pos] != i:
                raise ValueError(f"edge ({i}, {int(j)}) is not symmetric")


def validate_behavioral(b: BehavioralGraph) -> None:
    if len(b.user_items) != b.user_count or len(b.user_ratings) != b.user_count:
        raise ValueError("behavioral graph user fields disagree with user_count")
    if len(b.item_users) != b.item_count or len(b.item_id_map) != b.item_count:
        raise ValueError("behavioral graph item fields disagree with item_count")
    forward = set()
    for u in range(b.user_count):
        items, ratings = b.user_items[u], b.user_ratings[u]
        if items.size != ratings.size:
            raise ValueError(f"user {u}: items and ratings misaligned")
        if items.size and (items[0] < 0 or items[-1] >= b.item_count):
            raise ValueError(f"user {u}: item index out of range")
        if items.size and np.any(np.diff(items) <= 0):
            raise ValueError(f"user {u}: duplicate or unsorted items")
        if ratings.size and (ratings.min() < RATING_MIN or ratings.max() > RATING_MAX):
            raise ValueError(f"user {u}: rating outside [{RATING_MIN}, {RATING_MAX}]")
        forward.update((u, int(j)) for j in items)
    backward = set()
    for j in range(b.item_count):
        watchers = b.item_users[j]
        if watchers.size == 0:
            raise ValueError(f"item {j}: zero watchers")
        if np.any(np.diff(watchers) <= 0):
            raise ValueError(f"item {j}: duplicate or unsorted watchers")
        backward.update((int(u), j) for u in watchers)
    if forward != backward:
        raise ValueError("user_items and item_users are not transposes")


def couple(s: SocialGraph, b: BehavioralGraph) -> CoupledNetwork:
    """Wrap the two layers after checking they share one user index space."""
    if s.user_count != b.user_count:
        raise CouplingError(
            f"social layer has {s.user_count} users, behavioral layer has {b.user_count}"
        )
    validate_social(s)
    validate_behavioral(b)
    return CoupledNetwork(social=s, behavioral=b)


# ---------------------------------------------------------------------------
# persistence


def write_id_map_csv(id_map, path) -> None:
    """Two-column audit CSV mapping original external ids to dense indices."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["original_id", "dense_index"])
        for dense, ext in enumerate(id_map):
            writer.writerow([ext, dense])


def read_id_map_csv(path) -> list[str]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["original_id", "dense_index"]:
            raise GraphParseError("bad id-map header", source=str(path), line=1)
        ids: list[str] = []
        for row in reader:
            if int(row[1]) != len(ids):
                raise GraphParseError(
                    "dense indices not contiguous", source=str(path)
                )
            ids.append(row[0])
    return ids


def write_edge_file(g: SocialGraph, path, external_ids: bool = False) -> None:
    """Emit edges in the ingestion format, one ``u<TAB>v`` line per edge."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for i in range(g.user_count):
            for j in g.adjacency[i]:
                if i < j:
                    if external_ids:
                        handle.write(
                            f"{g.original_id_map[i]}\t{g.original_id_map[int(j)]}\n"
                        )
                    else:
                        handle.write(f"{i}\t{int(j)}\n")


def write_ratings_file(
    b: BehavioralGraph, path, external_ids: bool = False, user_id_map=None
) -> None:
    """Emit ratings in the ingestion format, ``user<TAB>item<TAB>rating`` lines."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for u in range(b.user_count):
            items, ratings = b.user_items[u], b.user_ratings[u]
            user = user_id_map[u] if (external_ids and user_id_map is not None) else u
            for j, r in zip(items, ratings):
                item = b.item_id_map[int(j)] if external_ids else int(j)
                handle.write(f"{user}\t{item}\t{repr(float(r))}\n")


def save_network(net: CoupledNetwork, out_dir) -> dict[str, Path]:
    """Persist a coupled network as dense edge/ratings files plus id maps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "social_edges": out_dir / "network_social_edges.tsv",
        "ratings": out_dir / "network_ratings.tsv",
        "user_map": out_dir / "user_map.csv",
        "item_map": out_dir / "item_map.csv",
    }
    write_edge_file(net.social, paths["social_edges"], external_ids=False)
    write_ratings_file(net.behavioral, paths["ratings"], external_ids=False)
    write_id_map_csv(net.social.original_id_map, paths["user_map"])
    write_id_map_csv(net.behavioral.item_id_map, paths["item_map"])
    return paths


def load_network(out_dir) -> CoupledNetwork:
    """Rebuild a coupled network persisted by :func:`save_network`."""
    out_dir = Path(out_dir)
    user_ids = read_id_map_csv(out_dir / "user_map.csv")
    item_ids = read_id_map_csv(out_dir / "item_map.csv")
    n, m = len(user_ids), len(item_ids)

    neighbor_lists: list[list[int]] = [[] for _ in range(n)]
    for u_text, v_text in read_edge_records(out_dir / "network_social_edges.tsv"):
        u, v = int(u_text), int(v_text)
        neighbor_lists[u].append(v)
        neighbor_lists[v].append(u)
    adjacency = [
        np.array(sorted(nbrs), dtype=np.int64) if nbrs else _EMPTY_INDEX
        for nbrs in neighbor_lists
    ]
    social = SocialGraph(n, adjacency, user_ids)

    per_user: list[dict[int, float]] = [dict() for _ in range(n)]
    for u_text, j_text, rating in read_rating_records(out_dir / "network_ratings.tsv"):
        per_user[int(u_text)][int(j_text)] = rating
    user_items, user_ratings = [], []
    watcher_lists: list[list[int]] = [[] for _ in range(m)]
    for u in range(n):
        if per_user[u]:
            items = np.array(sorted(per_user[u]), dtype=np.int64)
            ratings = np.array([per_user[u][int(j)] for j in items], dtype=np.float64)
        else:
            items, ratings = _EMPTY_INDEX, _EMPTY_RATING
        user_items.append(items)
        user_ratings.append(ratings)
        for j in items:
            watcher_lists[int(j)].append(u)
    item_users = [
        np.array(w, dtype=np.int64) if w else _EMPTY_INDEX for w in watcher_lists
    ]
    behavioral = BehavioralGraph(n, m, user_items, user_ratings, item_users, item_ids)
    return couple(social, behavioral)
