"""KCenterGreedy coreset selection with a brute-force verification oracle.

The greedy loop keeps, for every point, its minimum distance to the selected
set and updates it incrementally after each pick (one distance row per pick,
O(n·d) instead of all pairs). Distances are computed in float64 regardless of
the stored vector precision, so runs are bitwise reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .apportion import largest_remainder
from .errors import ConsistencyError, GuardLimitError
from .ioutil import atomic_write_json, read_json

METRICS = ("euclidean", "cosine_distance")

# combinatorial guard for the exact oracle
BRUTEFORCE_MAX_N = 12
BRUTEFORCE_MAX_K = 4


@dataclass
class CoresetSelection:
    """Result of one greedy run: picks in selection order plus the radius
    (max over points of min distance to the selected set) after each pick."""

    selected_indices: list[int]
    radius_trace: list[float]
    k: int
    metric: str = "euclidean"
    seed: int = 0

    def __post_init__(self) -> None:
        if len(set(self.selected_indices)) != len(self.selected_indices):
            raise ValueError("selected_indices contains duplicates")
        if len(self.radius_trace) != len(self.selected_indices):
            raise ValueError("radius_trace must have one entry per pick")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        for prev, cur in zip(self.radius_trace, self.radius_trace[1:]):
            if cur > prev:
                raise ValueError("radius_trace must be non-increasing")


def _as_matrix(vectors) -> np.ndarray:
    """Coerce EmbeddingVector sequences or arrays to a float64 (n, d) matrix."""
    if isinstance(vectors, np.ndarray):
        mat = np.asarray(vectors, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] == 0:
            raise ValueError("vectors must form a non-empty 2-D matrix")
        return mat
    if not len(vectors):
        raise ValueError("vectors must be non-empty")
    rows = []
    dim = None
    for v in vectors:
        arr = np.asarray(getattr(v, "values", v), dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("each vector must be 1-D")
        if dim is None:
            dim = arr.size
        elif arr.size != dim:
            raise ConsistencyError(
                f"mixed vector dimensions: {dim} vs {arr.size}")
        rows.append(arr)
    return np.stack(rows)


def _prepare(mat: np.ndarray, metric: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-metric precomputation: (working matrix, squared row norms or None)."""
    if metric == "euclidean":
        return mat, np.einsum("ij,ij->i", mat, mat)
    if metric == "cosine_distance":
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms == 0):
            raise ValueError("cosine_distance is undefined for zero vectors")
        return mat / norms[:, None], None
    raise ValueError(f"metric must be one of {METRICS}")


def _distances_to(mat: np.ndarray, norms2: np.ndarray | None,
                  center: int, metric: str) -> np.ndarray:
    """Distance from every row to ``mat[center]`` (float64, clipped at 0)."""
    if metric == "euclidean":
        c = mat[center]
        d2 = norms2 + float(norms2[center]) - 2.0 * (mat @ c)
        return np.sqrt(np.clip(d2, 0.0, None))
    sims = mat @ mat[center]
    return np.clip(1.0 - sims, 0.0, None)


def kcenter_greedy(vectors, k: int, seed: int = 0, metric: str = "euclidean",
                   initial: Sequence[int] | None = None) -> CoresetSelection:
    """Select min(k, n) diverse points by greedy max-min distance.

    Without ``initial``, the first center is drawn uniformly from ``seed``.
    Each later pick is the unselected point farthest from the selected set,
    ties broken by lowest index.
    """
    mat = _as_matrix(vectors)
    n = mat.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    work, norms2 = _prepare(mat, metric)
    m = min(k, n)
    initial = list(initial or [])
    if len(set(initial)) != len(initial):
        raise ValueError("initial indices must be unique")
    for idx in initial:
        if not (0 <= idx < n):
            raise ValueError(f"initial index {idx} out of range [0, {n})")
    if len(initial) > m:
        raise ValueError(f"more initial indices ({len(initial)}) than picks ({m})")

    selected: list[int] = []
    trace: list[float] = []
    min_dist = np.full(n, np.inf)
    selected_mask = np.zeros(n, dtype=bool)

    def pick(idx: int) -> None:
        selected.append(idx)
        selected_mask[idx] = True
        np.minimum(min_dist, _distances_to(work, norms2, idx, metric), out=min_dist)
        min_dist[idx] = 0.0
        trace.append(float(min_dist.max()))

    for idx in initial:
        pick(idx)
    if not selected:
        first = int(np.random.default_rng(seed).integers(n))
        pick(first)
    while len(selected) < m:
        # selected points are masked below any real distance, so argmax lands
        # on the lowest-index unselected point among ties
        candidates = np.where(selected_mask, -1.0, min_dist)
        pick(int(np.argmax(candidates)))
    return CoresetSelection(selected_indices=selected, radius_trace=trace,
                            k=k, metric=metric, seed=seed)


def kcenter_radius(vectors, centers: Sequence[int], metric: str = "euclidean") -> float:
    """Max over all points of min distance to any center."""
    mat = _as_matrix(vectors)
    n = mat.shape[0]
    if not len(centers):
        raise ValueError("centers must be non-empty")
    for idx in centers:
        if not (0 <= idx < n):
            raise ValueError(f"center index {idx} out of range [0, {n})")
    work, norms2 = _prepare(mat, metric)
    min_dist = np.full(n, np.inf)
    for idx in centers:
        np.minimum(min_dist, _distances_to(work, norms2, idx, metric), out=min_dist)
        min_dist[idx] = 0.0
    return float(min_dist.max())


def kcenter_optimal_bruteforce(vectors, k: int, metric: str = "euclidean"
                               ) -> tuple[list[int], float]:
    """Exact k-center optimum by enumerating all size-k index subsets.

    Guarded to n <= 12 and k <= 4; ties go to the lexicographically smallest
    index set (the enumeration order of itertools.combinations).
    """
    mat = _as_matrix(vectors)
    n = mat.shape[0]
    if n > BRUTEFORCE_MAX_N or k > BRUTEFORCE_MAX_K:
        raise GuardLimitError(
            f"bruteforce limited to n <= {BRUTEFORCE_MAX_N}, k <= "
            f"{BRUTEFORCE_MAX_K}; got n={n}, k={k}")
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    best_centers: tuple[int, ...] | None = None
    best_radius = np.inf
    for combo in itertools.combinations(range(n), k):
        radius = kcenter_radius(mat, combo, metric)
        if radius < best_radius:
            best_radius = radius
            best_centers = combo
    assert best_centers is not None
    return list(best_centers), float(best_radius)


def stratified_kcenter_greedy(vectors, labels: Sequence[str], k: int,
                              seed: int = 0, metric: str = "euclidean"
                              ) -> CoresetSelection:
    """Greedy selection run per label group, quotas proportional to group size.

    Group quotas come from largest-remainder apportionment of k (capped at
    each group's size, shortfall redistributed to groups with headroom). The
    returned radius_trace is recomputed globally over the concatenated pick
    sequence, so the CoresetSelection invariants still hold.
    """
    mat = _as_matrix(vectors)
    n = mat.shape[0]
    if len(labels) != n:
        raise ValueError("labels must align with vectors")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n)
    groups: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(str(label), []).append(i)
    names = sorted(groups)
    sizes = [len(groups[name]) for name in names]
    quotas = largest_remainder(k, sizes)
    # cap quotas at group sizes, then redistribute shortfall by group size
    short = 0
    for gi, name in enumerate(names):
        if quotas[gi] > sizes[gi]:
            short += quotas[gi] - sizes[gi]
            quotas[gi] = sizes[gi]
    while short > 0:
        order = sorted(range(len(names)),
                       key=lambda gi: (-(sizes[gi] - quotas[gi]), gi))
        progressed = False
        for gi in order:
            if short == 0:
                break
            if quotas[gi] < sizes[gi]:
                quotas[gi] += 1
                short -= 1
                progressed = True
        if not progressed:  # every group saturated; k > n cannot happen here
            break

    all_picks: list[int] = []
    for gi, name in enumerate(names):
        if quotas[gi] == 0:
            continue
        idxs = groups[name]
        sub = kcenter_greedy(mat[idxs], quotas[gi], seed=seed + gi, metric=metric)
        all_picks.extend(idxs[j] for j in sub.selected_indices)

    # replay the union sequence to get a coherent global radius trace
    work, norms2 = _prepare(mat, metric)
    min_dist = np.full(n, np.inf)
    trace: list[float] = []
    for idx in all_picks:
        np.minimum(min_dist, _distances_to(work, norms2, idx, metric), out=min_dist)
        min_dist[idx] = 0.0
        trace.append(float(min_dist.max()))
    return CoresetSelection(selected_indices=all_picks, radius_trace=trace,
                            k=k, metric=metric, seed=seed)


def write_selection(path: str | Path, selection: CoresetSelection,
                    record_ids: Sequence[str]) -> None:
    """Persist a selection as {"k", "seed", "metric", "selected_ids",
    "radius_trace"}, mapping indices to corpus record ids."""
    ids = [record_ids[i] for i in selection.selected_indices]
    atomic_write_json(path, {
        "k": selection.k,
        "seed": selection.seed,
        "metric": selection.metric,
        "selected_ids": ids,
        "radius_trace": [float(r) for r in selection.radius_trace],
    })


@dataclass
class SelectionFile:
    k: int
    seed: int
    metric: str
    selected_ids: list[str]
    radius_trace: list[float] = field(default_factory=list)


def read_selection(path: str | Path) -> SelectionFile:
    obj = read_json(path)
    try:
        return SelectionFile(
            k=int(obj["k"]), seed=int(obj["seed"]), metric=str(obj["metric"]),
            selected_ids=[str(s) for s in obj["selected_ids"]],
            radius_trace=[float(r) for r in obj.get("radius_trace", [])])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConsistencyError(f"bad selection file {path}: {exc}") from exc
