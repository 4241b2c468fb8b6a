"""Integer apportionment of a total across weighted buckets."""

from __future__ import annotations

import math
from typing import Sequence


def largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    """Split ``total`` into integer quotas proportional to ``weights``.

    Uses the largest-remainder method: floor each exact quota, then hand the
    leftover units to the buckets with the largest fractional parts, ties
    broken by lowest index. The result always sums to ``total`` exactly.
    """
    if total < 0:
        raise ValueError("total must be >= 0")
    if not weights:
        raise ValueError("weights must be non-empty")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    weight_sum = float(sum(weights))
    if weight_sum <= 0:
        raise ValueError("weights must not all be zero")
    exact = [total * w / weight_sum for w in weights]
    quotas = [math.floor(q) for q in exact]
    leftover = total - sum(quotas)
    by_remainder = sorted(range(len(weights)),
                          key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in by_remainder[:leftover]:
        quotas[i] += 1
    return quotas
