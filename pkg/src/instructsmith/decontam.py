"""Train/benchmark leakage audit and removal via embedding nearest neighbors.

The audit embeds benchmark canonical solutions and training texts, computes
exact cosine similarity for every pair (full scan, no approximation), and
reports each benchmark item's top-k training neighbors. Cleaning removes the
union of each item's top-n neighbors from the training set.
"""

from __future__ import annotations

import bisect
import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedding import EmbeddingBackendConfig, embed_batch, stack_vectors
from .errors import ConfigError
from .ioutil import (
    atomic_write_json,
    atomic_write_jsonl,
    atomic_write_text,
    iter_jsonl,
    read_json,
)

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 3
DEFAULT_BIN_WIDTH = 0.05
DEFAULT_REMOVE_PER_ITEM = 3


@dataclass(frozen=True)
class BenchmarkItem:
    """One held-out evaluation problem with its reference solution."""

    bench_id: str
    canonical_solution: str
    benchmark_name: str = ""

    def __post_init__(self) -> None:
        if not self.bench_id:
            raise ValueError("bench_id must be non-empty")
        if not self.canonical_solution.strip():
            raise ValueError("canonical_solution must be non-empty")

    def to_dict(self) -> dict:
        return {
            "bench_id": self.bench_id,
            "canonical_solution": self.canonical_solution,
            "benchmark": self.benchmark_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkItem":
        return cls(
            bench_id=str(d["bench_id"]),
            canonical_solution=str(d["canonical_solution"]),
            benchmark_name=str(d.get("benchmark", "")),
        )


@dataclass(frozen=True)
class Neighbor:
    train_id: str
    similarity: float


@dataclass
class ItemNeighbors:
    """Top neighbors for one benchmark item, most similar first."""

    bench_id: str
    neighbors: list[Neighbor]

    def __post_init__(self) -> None:
        sims = [n.similarity for n in self.neighbors]
        if any(b > a for a, b in zip(sims, sims[1:])):
            raise ValueError(f"{self.bench_id}: neighbors not sorted descending")

    @property
    def top1(self) -> Neighbor:
        return self.neighbors[0]


@dataclass
class LeakageReport:
    per_item: list[ItemNeighbors]
    average_top1: float
    histogram: list[tuple[float, int]]

    def to_dict(self) -> dict:
        return {
            "average_top1": self.average_top1,
            "per_item": [
                {"bench_id": item.bench_id,
                 "neighbors": [{"train_id": n.train_id,
                                "similarity": n.similarity}
                               for n in item.neighbors]}
                for item in self.per_item
            ],
            "histogram": [[low, count] for low, count in self.histogram],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LeakageReport":
        per_item = [
            ItemNeighbors(
                bench_id=str(item["bench_id"]),
                neighbors=[Neighbor(str(n["train_id"]), float(n["similarity"]))
                           for n in item["neighbors"]])
            for item in d["per_item"]
        ]
        histogram = [(float(low), int(count)) for low, count in d["histogram"]]
        return cls(per_item=per_item, average_top1=float(d["average_top1"]),
                   histogram=histogram)


@dataclass
class DecontamPlan:
    """Which training ids to drop, and which benchmark items demanded each."""

    remove_train_ids: set[str]
    per_item_contributions: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        union = set()
        for ids in self.per_item_contributions.values():
            union.update(ids)
        if self.remove_train_ids != union:
            raise ValueError(
                "remove_train_ids must equal the union of per-item contributions")

    def to_dict(self) -> dict:
        return {
            "remove_train_ids": sorted(self.remove_train_ids),
            "per_item_contributions": {
                k: list(v) for k, v in self.per_item_contributions.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecontamPlan":
        return cls(
            remove_train_ids=set(d["remove_train_ids"]),
            per_item_contributions={
                str(k): [str(t) for t in v]
                for k, v in d["per_item_contributions"].items()},
        )


def similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact cosine similarity between every row of ``a`` and of ``b``.

    Zero-norm rows get similarity 0 rather than NaN. Math in float64.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a_norm = np.linalg.norm(a, axis=1, keepdims=True)
    b_norm = np.linalg.norm(b, axis=1, keepdims=True)
    a_norm[a_norm == 0.0] = 1.0
    b_norm[b_norm == 0.0] = 1.0
    sims = (a / a_norm) @ (b / b_norm).T
    return np.clip(sims, -1.0, 1.0)


def top1_histogram(top1_sims: Sequence[float],
                   bin_width: float = DEFAULT_BIN_WIDTH) -> list[tuple[float, int]]:
    """Fixed bins over [-1, 1]; each entry is (bin lower bound, count).

    Bin membership is decided against the decimal-rounded lower bounds, so a
    similarity sitting exactly on an edge counts toward the bin whose printed
    bound it equals (no binary-float drift).
    """
    if not 0.0 < bin_width <= 2.0:
        raise ConfigError("bin_width must be in (0, 2]")
    n_bins = int(np.ceil(2.0 / bin_width))
    lows = [round(-1.0 + i * bin_width, 10) for i in range(n_bins)]
    counts = [0] * n_bins
    for s in top1_sims:
        idx = min(max(bisect.bisect_right(lows, s) - 1, 0), n_bins - 1)
        counts[idx] += 1
    return list(zip(lows, counts))


def audit(train: Sequence[tuple[str, str]], bench: Sequence[BenchmarkItem],
          backend: EmbeddingBackendConfig, top_k: int = DEFAULT_TOP_K, *,
          bin_width: float = DEFAULT_BIN_WIDTH) -> LeakageReport:
    """Full-scan nearest-neighbor audit of bench items against train texts.

    Neighbors are ranked by similarity descending; ties break toward the
    earlier training row, so results are deterministic.
    """
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    if not train:
        raise ConfigError("train must be non-empty")
    if not bench:
        raise ConfigError("bench must be non-empty")
    train_ids = [tid for tid, _ in train]
    if len(set(train_ids)) != len(train_ids):
        raise ConfigError("train ids must be unique")

    train_vecs = embed_batch([text for _, text in train], backend)
    bench_vecs = embed_batch([b.canonical_solution for b in bench], backend)
    sims = similarity_matrix(stack_vectors(bench_vecs), stack_vectors(train_vecs))

    k = min(top_k, len(train_ids))
    per_item: list[ItemNeighbors] = []
    top1_sims: list[float] = []
    for bi, item in enumerate(bench):
        order = np.argsort(-sims[bi], kind="stable")[:k]
        neighbors = [Neighbor(train_ids[ti], float(sims[bi, ti])) for ti in order]
        per_item.append(ItemNeighbors(bench_id=item.bench_id, neighbors=neighbors))
        top1_sims.append(neighbors[0].similarity)

    return LeakageReport(
        per_item=per_item,
        average_top1=float(np.mean(top1_sims)),
        histogram=top1_histogram(top1_sims, bin_width),
    )


def plan_removal(report: LeakageReport,
                 n_per_item: int = DEFAULT_REMOVE_PER_ITEM) -> DecontamPlan:
    """Union of each item's top n_per_item neighbors; shared ids count once."""
    if n_per_item < 1:
        raise ConfigError("n_per_item must be >= 1")
    contributions: dict[str, list[str]] = {}
    remove: set[str] = set()
    for item in report.per_item:
        picked = [n.train_id for n in item.neighbors[:n_per_item]]
        contributions[item.bench_id] = picked
        remove.update(picked)
    return DecontamPlan(remove_train_ids=remove,
                        per_item_contributions=contributions)


def apply_plan(plan: DecontamPlan, train: Sequence[tuple[str, object]]) -> list:
    """Drop planned ids from train, preserving order of what remains."""
    present = {tid for tid, _ in train}
    missing = sorted(plan.remove_train_ids - present)
    if missing:
        log.warning("%d planned ids absent from train: %s",
                    len(missing), ", ".join(missing[:5]))
    kept = [pair for pair in train if pair[0] not in plan.remove_train_ids]
    log.info("decontamination removed %d of %d training items",
             len(train) - len(kept), len(train))
    return kept


def read_benchmark_file(path: str | Path) -> list[BenchmarkItem]:
    items = [BenchmarkItem.from_dict(obj) for _, obj in iter_jsonl(path)]
    if not items:
        raise ConfigError(f"{path}: benchmark file is empty")
    return items


def write_benchmark_file(path: str | Path, items: Sequence[BenchmarkItem]) -> int:
    return atomic_write_jsonl(path, [item.to_dict() for item in items])


def write_leakage_report(path: str | Path, report: LeakageReport) -> None:
    atomic_write_json(path, report.to_dict())


def read_leakage_report(path: str | Path) -> LeakageReport:
    return LeakageReport.from_dict(read_json(path))


def write_histogram_csv(path: str | Path, report: LeakageReport) -> None:
    """Emit the top-1 histogram as two-column CSV for plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_low", "count"])
    for low, count in report.histogram:
        writer.writerow([low, count])
    atomic_write_text(path, buf.getvalue())
