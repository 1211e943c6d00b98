"""
Data and gradient partitioning for LWPD codes.

The k columns of a codebook are bound to concrete gradient blocks here.
In ``"data"`` mode block j is the full-parameter gradient on data partition
j. In ``"2d"`` mode block j is the gradient of output-neuron group
``j % t`` on data partition ``j // t``; the t-way neuron split is applied
to every layer so each group owns a contiguous slice of every weight matrix.

Flat parameter order: for each layer a row-major (fan_out, fan_in + 1)
matrix whose last column is the bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, CodeParams

MODES = ("data", "2d")


def layer_offsets(layer_sizes) -> list[int]:
    """Start offset of every layer in the flat parameter vector (plus the end)."""
    offsets = [0]
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        offsets.append(offsets[-1] + fan_out * (fan_in + 1))
    return offsets


def partition_bounds(num_records: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous equal partitions; the remainder goes to the last one."""
    if parts < 1:
        raise ValueError(f"need at least one partition, got {parts}")
    if num_records < parts:
        raise ValueError(f"{num_records} records cannot fill {parts} partitions")
    size = num_records // parts
    bounds = [(i * size, (i + 1) * size) for i in range(parts)]
    bounds[-1] = (bounds[-1][0], num_records)
    return bounds


@dataclass(frozen=True)
class BlockDesc:
    block_id: int
    weight_range: tuple[tuple[int, int], ...]
    data_partition: int
    unpadded_len: int


@dataclass(frozen=True)
class GradientBlockLayout:
    mode: str
    layer_sizes: tuple[int, ...]
    k: int
    t: int
    blocks: tuple[BlockDesc, ...]
    block_dim: int
    layer_splits: tuple[tuple[int, ...], ...]
    n_params: int
    _index: tuple[np.ndarray, ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        idx = []
        for b in self.blocks:
            parts = [np.arange(a, z) for a, z in b.weight_range]
            arr = np.concatenate(parts) if parts else np.empty(0, dtype=int)
            arr.setflags(write=False)
            idx.append(arr)
        object.__setattr__(self, "_index", tuple(idx))

    @property
    def num_data_partitions(self) -> int:
        return self.k if self.mode == "data" else self.k // self.t

    def output_group(self, j: int) -> int:
        return 0 if self.mode == "data" else j % self.t

    def data_partition(self, j: int) -> int:
        return self.blocks[j].data_partition

    def indices(self, j: int) -> np.ndarray:
        """Flat parameter coordinates owned by block j, in block order."""
        return self._index[j]

    def gather(self, j: int, flat) -> np.ndarray:
        """Block j's coordinates of ``flat``, zero padded to ``block_dim``."""
        out = np.zeros(self.block_dim)
        idx = self._index[j]
        out[: len(idx)] = np.asarray(flat)[idx]
        return out

    def unpad(self, j: int, vec) -> np.ndarray:
        return np.asarray(vec)[: self.blocks[j].unpadded_len]

    def dumps(self) -> str:
        lines = []
        for b in self.blocks:
            ranges = ",".join(f"{a}:{z}" for a, z in b.weight_range)
            lines.append(f"{b.block_id} {ranges} {b.data_partition} {b.unpadded_len}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScatterPlan:
    worker: int
    row: int
    entries: tuple[tuple[int, int], ...]


def _split(size: int, groups: int) -> tuple[int, ...]:
    return tuple(int(x[0]) for x in np.array_split(np.arange(size), groups)) + (size,)


def partition_gradient(model_shape, params: CodeParams, mode: str = "2d") -> GradientBlockLayout:
    """Bind the k code blocks to parameter coordinates and data partitions.

    In ``"2d"`` mode every layer's neurons are split into t contiguous groups
    and group g's incoming weights (bias included) across all layers form the
    weight block of output group g.
    """
    sizes = tuple(int(x) for x in model_shape)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"bad layer sizes {model_shape!r}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    k, t = params.k, params.t
    offsets = layer_offsets(sizes)
    n_params = offsets[-1]

    if mode == "data":
        full = tuple((offsets[i], offsets[i + 1]) for i in range(len(sizes) - 1))
        blocks = tuple(BlockDesc(j, full, j, n_params) for j in range(k))
        return GradientBlockLayout(mode, sizes, k, t, blocks, n_params, (), n_params)

    if k % t:
        raise ValueError(f"2d layout needs t | k, got k={k}, t={t}")
    for fan_out in sizes[1:]:
        if fan_out < t:
            raise ValueError(f"layer of size {fan_out} cannot be split into t={t} groups")

    splits = tuple(_split(fan_out, t) for fan_out in sizes[1:])
    group_ranges = []
    for g in range(t):
        ranges = []
        for layer, bounds in enumerate(splits):
            row = sizes[layer] + 1
            ranges.append((offsets[layer] + bounds[g] * row, offsets[layer] + bounds[g + 1] * row))
        group_ranges.append(tuple(ranges))

    blocks = []
    for j in range(k):
        ranges = group_ranges[j % t]
        blocks.append(BlockDesc(j, ranges, j // t, sum(z - a for a, z in ranges)))
    block_dim = max(b.unpadded_len for b in blocks)
    return GradientBlockLayout(mode, sizes, k, t, tuple(blocks), block_dim, splits, n_params)


def _row_tasks(cb: Codebook, worker: int, round: int) -> tuple[int, list[tuple[int, int]]]:
    row, rot = cb.row_for(worker, round)
    cols = np.flatnonzero(cb.signs[row])
    entries = sorted((cb.task_of_column(int(c), rot), int(cb.signs[row, c])) for c in cols)
    return row, entries


def scatter_plan(cb: Codebook, layout: GradientBlockLayout | None, worker: int, round: int = 0) -> ScatterPlan:
    """(block, sign) pairs the master applies for ``worker``'s result in ``round``."""
    if layout is not None and layout.k != cb.params.k:
        raise ValueError(f"layout has k={layout.k}, codebook has k={cb.params.k}")
    row, entries = _row_tasks(cb, worker, round)
    return ScatterPlan(worker, row, tuple(entries))


def assign_data(cb: Codebook, num_records: int, round: int = 0) -> dict[int, list[int]]:
    """Data partitions held by each worker.

    The data is cut into k contiguous partitions and each worker receives
    the partitions named by the non-zero columns of its (scheduled) row.
    """
    k = cb.params.k
    if num_records < k:
        raise ValueError(f"{num_records} records cannot fill {k} partitions")
    out = {}
    for i in range(cb.params.n):
        _, entries = _row_tasks(cb, i, round)
        out[i] = sorted({j for j, _ in entries})
    return out


def local_records(cb: Codebook, num_records: int, worker: int, round: int = 0) -> np.ndarray:
    """Record indices (into the training split) held by ``worker`` in ``round``."""
    bounds = partition_bounds(num_records, cb.params.k)
    _, entries = _row_tasks(cb, worker, round)
    parts = sorted({j for j, _ in entries})
    return np.concatenate([np.arange(*bounds[p]) for p in parts])


def dumps_assignment(assignment: dict[int, list[int]]) -> str:
    return "".join(f"{w}: {' '.join(map(str, ps))}\n" for w, ps in sorted(assignment.items()))
