import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lwpd.assignment import (assign_data, dumps_assignment, layer_offsets, local_records, partition_bounds,
                             partition_gradient, scatter_plan)
from lwpd.codebook import Codebook, CodeParams, build_code, build_X

CB842 = build_code(CodeParams(8, 4, 2))


# --- data partitions --------------------------------------------------------

def test_partition_bounds_remainder_to_last():
    assert partition_bounds(10, 4) == [(0, 2), (2, 4), (4, 6), (6, 10)]
    assert partition_bounds(8, 4) == [(0, 2), (2, 4), (4, 6), (6, 8)]


def test_partition_bounds_too_few_records():
    with pytest.raises(ValueError):
        partition_bounds(3, 4)


@given(st.integers(1, 50).flatmap(lambda p: st.tuples(st.integers(p, 5000), st.just(p))))
def test_partition_bounds_cover(args):
    n, p = args
    b = partition_bounds(n, p)
    assert b[0][0] == 0 and b[-1][1] == n
    assert all(b[i][1] == b[i + 1][0] for i in range(p - 1))
    sizes = [z - a for a, z in b]
    assert len(set(sizes[:-1])) <= 1 and sizes[-1] >= sizes[0]


def test_assign_data_examples():
    a = assign_data(CB842, 1000)
    assert a[0] == [0, 1]
    assert a[4] == [1, 2]
    assert a[6] == [0, 3]
    assert a[7] == [0, 3]
    assert a[5] == [1, 2]


def test_assign_data_single_group():
    # k = t: one X^(2) block, every row touches both partitions
    cb = Codebook(CodeParams(2, 2, 2), build_X(2))
    layout = partition_gradient((5, 4), cb.params, "2d")
    assert {layout.data_partition(j) for j in range(2)} == {0}
    assert assign_data(cb, 100) == {0: [0, 1], 1: [0, 1]}


def test_assign_data_too_few_records():
    with pytest.raises(ValueError):
        assign_data(CB842, 3)


def test_local_records():
    idx = local_records(CB842, 1000, 6)
    np.testing.assert_array_equal(idx, np.r_[0:250, 750:1000])


def test_dumps_assignment_deterministic():
    text = dumps_assignment(assign_data(CB842, 100))
    assert text.splitlines()[0] == "0: 0 1"
    assert text.splitlines()[6] == "6: 0 3"
    assert text == dumps_assignment(assign_data(CB842, 100))


# --- gradient layout --------------------------------------------------------

def test_layout_softmax_2d():
    u = 7
    layout = partition_gradient((u, 4), CodeParams(8, 4, 2), "2d")
    assert len(layout.blocks) == 4
    assert [(layout.output_group(j), layout.data_partition(j)) for j in range(4)] == [
        (0, 0), (1, 0), (0, 1), (1, 1)]
    row = u + 1
    assert layout.blocks[0].weight_range == ((0, 2 * row),)
    assert layout.blocks[1].weight_range == ((2 * row, 4 * row),)
    assert all(b.unpadded_len == 2 * (u + 1) for b in layout.blocks)
    assert layout.block_dim == 2 * (u + 1)


def test_layout_mlp_2d():
    layout = partition_gradient((10, 8, 4), CodeParams(8, 4, 2), "2d")
    assert all(b.unpadded_len == 4 * 11 + 2 * 9 for b in layout.blocks)
    assert layout.layer_splits == ((0, 4, 8), (0, 2, 4))


def test_layout_data_mode():
    layout = partition_gradient((10, 8, 4), CodeParams(8, 4, 2), "data")
    n_params = layer_offsets((10, 8, 4))[-1]
    assert layout.block_dim == n_params == 8 * 11 + 4 * 9
    assert [layout.data_partition(j) for j in range(4)] == [0, 1, 2, 3]
    for j in range(4):
        np.testing.assert_array_equal(layout.indices(j), np.arange(n_params))


def test_layout_errors():
    with pytest.raises(ValueError):
        CodeParams(8, 4, 1)
    with pytest.raises(ValueError):
        partition_gradient((10, 1), CodeParams(8, 4, 2), "2d")     # output layer < t
    with pytest.raises(ValueError):
        partition_gradient((10, 3, 4), CodeParams(16, 8, 4), "2d")  # hidden layer < t
    with pytest.raises(ValueError):
        partition_gradient((10, 4), CodeParams(8, 4, 2), "bogus")


def test_layout_dumps():
    text = partition_gradient((3, 4), CodeParams(8, 4, 2), "2d").dumps()
    assert text.splitlines() == ["0 0:8 0 8", "1 8:16 0 8", "2 0:8 1 8", "3 8:16 1 8"]


layouts = st.tuples(
    st.integers(1, 3),                                   # log2 t
    st.lists(st.integers(1, 12), min_size=1, max_size=3),
    st.integers(1, 12),
).map(lambda a: (2 ** a[0], a[1], a[2]))


@settings(max_examples=60)
@given(layouts)
def test_layout_partition_of_unity(args):
    t, extra_hidden, fan_in = args
    sizes = (fan_in, *[t + h for h in extra_hidden[:-1]], t + extra_hidden[-1])
    layout = partition_gradient(sizes, CodeParams(4 * t, 2 * t, t), "2d")
    offs = layer_offsets(sizes)
    counts = np.zeros(offs[-1], dtype=int)
    for g in range(t):
        counts[layout.indices(g)] += 1
    assert np.all(counts == 1)
    # blocks sharing an output group share their coordinates
    for j in range(layout.k):
        np.testing.assert_array_equal(layout.indices(j), layout.indices(j % t))
        assert layout.blocks[j].unpadded_len <= layout.block_dim
    assert layout.block_dim == max(b.unpadded_len for b in layout.blocks)
    # ranges of different groups never overlap within a layer
    for layer in range(len(sizes) - 1):
        spans = sorted(layout.blocks[g].weight_range[layer] for g in range(t))
        assert all(spans[i][1] <= spans[i + 1][0] for i in range(t - 1))


@settings(max_examples=40)
@given(layouts, st.integers(0, 2 ** 32 - 1))
def test_padding_round_trip(args, seed):
    t, extra_hidden, fan_in = args
    sizes = (fan_in, *[t + h for h in extra_hidden])
    layout = partition_gradient(sizes, CodeParams(4 * t, 2 * t, t), "2d")
    flat = np.random.default_rng(seed).normal(size=layout.n_params)
    for j in range(layout.k):
        padded = layout.gather(j, flat)
        assert len(padded) == layout.block_dim
        assert np.all(padded[layout.blocks[j].unpadded_len:] == 0)
        np.testing.assert_array_equal(layout.unpad(j, padded), flat[layout.indices(j)])


# --- scatter plans ----------------------------------------------------------

def test_scatter_plan_examples():
    layout = partition_gradient((5, 4), CB842.params)
    assert scatter_plan(CB842, layout, 6, 0).entries == ((0, 1), (3, 1))
    assert scatter_plan(CB842, layout, 7, 0).entries == ((0, -1), (3, 1))


def test_scatter_plan_scheduled():
    cb = build_code(CodeParams(6, 3, 2))
    plan = scatter_plan(cb, None, 0, 1)
    # row (0 + 5*1) mod 8 = 5 has signs [0, +, -, 0]; rotation 1 maps
    # virtual columns 1, 2 to tasks ((c - 1) mod 4) mod 3 = 0, 1
    assert plan.row == 5
    assert plan.entries == ((0, 1), (1, -1))


def test_scatter_plan_errors():
    with pytest.raises(IndexError):
        scatter_plan(CB842, None, 8)
    with pytest.raises(ValueError):
        scatter_plan(CB842, partition_gradient((5, 8), CodeParams(16, 8, 2)), 0)


code_params = st.sampled_from([(8, 4, 2), (16, 8, 2), (16, 8, 4), (32, 16, 4), (6, 3, 2), (10, 5, 2), (12, 7, 2)])


@settings(max_examples=30)
@given(code_params, st.integers(0, 40))
def test_plan_size_and_signs(nkt, rnd):
    cb = build_code(CodeParams(*nkt))
    for i in range(cb.params.n):
        plan = scatter_plan(cb, None, i, rnd)
        assert len(plan.entries) == cb.t
        row, rot = cb.row_for(i, rnd)
        cols = np.flatnonzero(cb.signs[row])
        expect = sorted((cb.task_of_column(int(c), rot), int(cb.signs[row, c])) for c in cols)
        assert list(plan.entries) == expect
        if not cb.has_schedule:
            assert [j for j, _ in plan.entries] == cols.tolist()


@settings(max_examples=30)
@given(code_params, st.integers(0, 40))
def test_plan_data_consistency(nkt, rnd):
    cb = build_code(CodeParams(*nkt))
    held = assign_data(cb, 10 * cb.params.k, rnd)
    for i in range(cb.params.n):
        needed = {j for j, _ in scatter_plan(cb, None, i, rnd).entries}
        assert needed <= set(held[i])
