"""0/1 knapsack over task sizes against the UAV's local capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

BUCKET_BITS = 1000.0
VALUE_TOL = 1e-9


class Item(Protocol):
    data_size: float
    priority: float


@dataclass(frozen=True)
class KnapsackResult:
    selected: tuple[bool, ...]
    total_value: float
    total_weight: float


def bucket_weights(sizes: Sequence[float]) -> list[int]:
    # rounding up keeps every discretized selection feasible in continuous terms
    return [int(math.ceil(s / BUCKET_BITS - 1e-12)) for s in sizes]


def bucket_capacity(capacity: float) -> int:
    return int(math.floor(capacity / BUCKET_BITS + 1e-12))


def summarize(items: Sequence[Item], selected: Sequence[bool]) -> KnapsackResult:
    chosen = [it for it, s in zip(items, selected) if s]
    return KnapsackResult(tuple(bool(s) for s in selected),
                          math.fsum(it.priority for it in chosen),
                          math.fsum(it.data_size for it in chosen))


def select_local_candidates(items: Sequence[Item], capacity: float) -> KnapsackResult:
    """Maximize total priority subject to total data size <= capacity.

    Dynamic program over 1 kb weight buckets. Among value-optimal selections
    the lighter one wins, then the lexicographically smallest flag tuple.
    """
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    n = len(items)
    cap = bucket_capacity(capacity)
    weights = bucket_weights([it.data_size for it in items])
    values = [float(it.priority) for it in items]
    if sum(weights) <= cap and all(v > VALUE_TOL for v in values):
        # everything fits and every item adds value: the full set is the unique optimum
        return summarize(items, [True] * n)

    # budgets beyond the total weight behave like the total weight
    cap = min(cap, sum(weights))
    # val/wt hold, for every budget w, the optimum using items i..n-1
    val = np.zeros(cap + 1)
    wt = np.zeros(cap + 1, dtype=np.int64)
    take_flags = [None] * n
    for i in range(n - 1, -1, -1):
        take = np.zeros(cap + 1, dtype=bool)
        wi = weights[i]
        if wi <= cap:
            tv = val[: cap + 1 - wi] + values[i]
            tw = wt[: cap + 1 - wi] + wi
            sv, sw = val[wi:], wt[wi:]
            diff = tv - sv
            better = (diff > VALUE_TOL) | ((np.abs(diff) <= VALUE_TOL) & (tw < sw))
            take[wi:] = better
            # tv/tw are copies, so updating the tail in place is safe
            np.copyto(sv, tv, where=better)
            np.copyto(sw, tw, where=better)
        take_flags[i] = take

    selected = []
    w = cap
    for i in range(n):
        if take_flags[i][w]:
            selected.append(True)
            w -= weights[i]
        else:
            selected.append(False)
    result = summarize(items, selected)
    assert sum(wt for wt, s in zip(weights, selected) if s) <= cap
    return result
