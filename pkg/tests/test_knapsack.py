from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secure_offload.knapsack import bucket_capacity, bucket_weights, select_local_candidates
from secure_offload.oracle import knapsack_exhaustive

MB = 8e6


@dataclass(frozen=True)
class Item:
    data_size: float
    priority: float


def test_four_item_example():
    items = [Item(1.0 * MB, 0.9), Item(1.1 * MB, 0.6), Item(1.2 * MB, 0.3), Item(0.9 * MB, 0.9)]
    res = select_local_candidates(items, 3 * MB)
    assert res.selected == (True, True, False, True)
    assert res.total_value == pytest.approx(2.4)
    assert res.total_weight == pytest.approx(3 * MB)
    assert knapsack_exhaustive(items, 3 * MB).total_value == pytest.approx(2.4)


def test_trivial_cases():
    items = [Item(MB, 0.3), Item(2 * MB, 0.9)]
    assert select_local_candidates(items, 0).selected == (False, False)
    assert select_local_candidates([Item(MB, 0.6)], 2 * MB).selected == (True,)
    assert select_local_candidates([], 5 * MB).selected == ()
    assert knapsack_exhaustive([], 5 * MB).total_value == 0
    assert all(knapsack_exhaustive(items, 10 * MB).selected)
    with pytest.raises(ValueError):
        select_local_candidates(items, -1)


def test_rounding_is_conservative():
    assert bucket_weights([1000.0, 1000.5, 999.9]) == [1, 2, 1]
    assert bucket_capacity(2999.9) == 2


def test_tie_prefers_lighter_then_lexicographic():
    # equal values: the lighter subset wins
    items = [Item(2 * MB, 0.6), Item(1 * MB, 0.3), Item(0.5 * MB, 0.3)]
    assert select_local_candidates(items, 2 * MB).selected == (False, True, True)
    # equal value and weight: lexicographically smallest flag tuple
    twins = [Item(MB, 0.6), Item(MB, 0.6)]
    assert select_local_candidates(twins, 1.5 * MB).selected == (False, True)
    assert knapsack_exhaustive(twins, 1.5 * MB).selected == (False, True)


items_strategy = st.lists(st.tuples(st.floats(1e4, 3e7), st.sampled_from([0.3, 0.6, 0.9])), min_size=0,
                          max_size=12)


@settings(max_examples=150, deadline=None)
@given(items_strategy, st.floats(0, 6e7))
def test_dp_matches_enumeration(raw, capacity):
    items = [Item(s, p) for s, p in raw]
    dp = select_local_candidates(items, capacity)
    ex = knapsack_exhaustive(items, capacity)
    assert dp.total_value == ex.total_value
    assert dp.selected == ex.selected
    assert dp.total_weight <= capacity


@settings(max_examples=60, deadline=None)
@given(items_strategy, st.floats(0, 4e7), st.floats(0, 2e7))
def test_capacity_monotone(raw, capacity, extra):
    items = [Item(s, p) for s, p in raw]
    assert (select_local_candidates(items, capacity + extra).total_value
            >= select_local_candidates(items, capacity).total_value)
