"""
Deterministic discrete-event simulation of a master and n workers.

Four schemes share the machinery here: asynchronous LWPD updates, the
K-asynchronous (K-AC) and gradient coding (GC) baselines, and a single-node
centralized trainer used as an oracle. All schemes read compute delays from
one shared :class:`DelayTape` so that, under a fixed seed, they see the same
stragglers.

Events are ordered by ``(time, kind, round, worker, seq)``; the simulation
is single threaded and every master update happens inside the loop.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import GradientBlockLayout, local_records, partition_bounds, partition_gradient, scatter_plan
from .codebook import Codebook, CodeParams, build_code
from .config import ConfigError, ExperimentConfig
from .learner import (HEADER_FLOATS, Dataset, Model, coded_task, eval_accuracy, eval_loss,
                      full_gradient, gen_mixture, init_model, load_csv)
from .metrics import MetricsRecord

# event kinds, in tie-break order
TASK_COMPLETE = 0
WORKER_FREE = 1
BROADCAST = 2
CHECKPOINT = 3


@dataclass(frozen=True)
class DelayModel:
    base: float = 1.0
    rate: float = 2.0
    straggler_prob: float = 0.0
    straggler_factor: float = 1.0
    downlink: float = 0.0
    uplink: float = 0.0

    def __post_init__(self):
        for name in ("base", "rate", "straggler_factor", "downlink", "uplink"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 <= self.straggler_prob <= 1:
            raise ValueError("straggler_prob must lie in [0, 1]")

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "DelayModel":
        return cls(cfg.base, cfg.rate, cfg.straggler_prob, cfg.straggler_factor,
                   cfg.downlink, cfg.uplink)

    def compose(self, work_units: float, expo: float, uniform: float) -> float:
        """Delay from one standard-exponential and one uniform draw."""
        slow = self.straggler_factor if uniform < self.straggler_prob else 1.0
        jitter = 0.0 if math.isinf(self.rate) else expo / self.rate
        return self.base * work_units * slow + jitter

    def mean(self, work_units: float) -> float:
        jitter = 0.0 if math.isinf(self.rate) else 1.0 / self.rate
        slow = 1.0 + self.straggler_prob * (self.straggler_factor - 1.0)
        return self.base * work_units * slow + jitter


def sample_delay(dm: DelayModel, work_units: float, rng: np.random.Generator) -> float:
    """base*work_units (times the straggler factor with prob. straggler_prob) + Exp(rate)."""
    return dm.compose(work_units, rng.standard_exponential(), rng.random())


class DelayTape:
    """Pre-drawn per-(worker, task index) randomness shared by all schemes.

    Each worker owns an independent stream, extended in fixed-size chunks, so
    entry (i, r) never depends on how far other workers have progressed.
    """

    CHUNK = 1024

    def __init__(self, seed: int, n_workers: int):
        self.seed = seed
        self.n_workers = n_workers
        self._rngs = [np.random.default_rng([seed, i]) for i in range(n_workers)]
        self._expo = [np.empty(0) for _ in range(n_workers)]
        self._unif = [np.empty(0) for _ in range(n_workers)]
        self._fixed = False

    def draw(self, worker: int, index: int) -> tuple[float, float]:
        while index >= len(self._expo[worker]):
            if self._fixed:
                raise IndexError(f"delay tape exhausted for worker {worker} at {index}")
            rng = self._rngs[worker]
            self._expo[worker] = np.concatenate([self._expo[worker], rng.standard_exponential(self.CHUNK)])
            self._unif[worker] = np.concatenate([self._unif[worker], rng.random(self.CHUNK)])
        return float(self._expo[worker][index]), float(self._unif[worker][index])

    def delay(self, dm: DelayModel, worker: int, index: int, work_units: float) -> float:
        return dm.compose(work_units, *self.draw(worker, index))

    def dumps(self, draws_per_worker: int) -> str:
        lines = [f"{self.n_workers} {draws_per_worker}"]
        for i in range(self.n_workers):
            for r in range(draws_per_worker):
                e, u = self.draw(i, r)
                lines.append(f"{i} {r} {e!r} {u!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DelayTape":
        lines = text.splitlines()
        n_workers, per = (int(x) for x in lines[0].split())
        tape = cls(0, n_workers)
        expo = np.zeros((n_workers, per))
        unif = np.zeros((n_workers, per))
        for ln in lines[1:]:
            if not ln.strip():
                continue
            i, r, e, u = ln.split()
            expo[int(i), int(r)] = float(e)
            unif[int(i), int(r)] = float(u)
        tape._expo = list(expo)
        tape._unif = list(unif)
        tape._fixed = True
        return tape


@dataclass
class MasterState:
    w: np.ndarray
    updates: int = 0
    decode_mults: int = 0
    decode_adds: int = 0
    lr_scalings: int = 0
    comm_floats: int = 0
    arrivals: int = 0
    discarded: int = 0
    extra: dict = field(default_factory=dict)


class EventQueue:
    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def push(self, time, kind, round, worker, payload=None):
        heapq.heappush(self._heap, (time, kind, round, worker, next(self._seq), payload))

    def pop(self):
        time, kind, round, worker, _, payload = heapq.heappop(self._heap)
        return time, kind, round, worker, payload

    def __bool__(self):
        return bool(self._heap)


# ---------------------------------------------------------------------------
# shared setup


@dataclass
class Setup:
    cfg: ExperimentConfig
    data: Dataset
    model: Model
    dm: DelayModel
    tape: DelayTape
    Xtr: np.ndarray
    ytr: np.ndarray
    Xte: np.ndarray
    yte: np.ndarray


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_csv:
        return load_csv(cfg.data_csv)
    seed = cfg.seed if cfg.data_seed is None else cfg.data_seed
    return gen_mixture(cfg.num_classes, cfg.num_components, cfg.dim, cfg.n_records, seed,
                       spread=cfg.spread)


def prepare(cfg: ExperimentConfig, data: Dataset | None = None, tape: DelayTape | None = None) -> Setup:
    data = build_dataset(cfg) if data is None else data
    family = "logistic" if cfg.family == "logistic" else "mlp"
    sizes = (data.dim, *cfg.hidden, max(data.num_classes, cfg.num_classes))
    model = init_model(family, sizes, seed=cfg.seed)
    Xtr, ytr = data.train
    Xte, yte = data.test
    if len(Xte) == 0:
        raise ConfigError("dataset has an empty test split")
    tape = DelayTape(cfg.seed, cfg.n) if tape is None else tape
    return Setup(cfg, data, model, DelayModel.from_config(cfg), tape, Xtr, ytr, Xte, yte)


class Recorder:
    """Emits MetricsRecords at time checkpoints and optional update counts."""

    def __init__(self, setup: Setup, scheme: str):
        self.s = setup
        self.scheme = scheme
        self.records: list[MetricsRecord] = []

    def record(self, time: float, state: MasterState) -> None:
        m = self.s.model.copy(state.w)
        self.records.append(MetricsRecord(
            scheme=self.scheme,
            seed=self.s.cfg.seed,
            sim_time=float(time),
            updates=state.updates,
            test_loss=eval_loss(m, self.s.Xte, self.s.yte),
            test_accuracy=eval_accuracy(m, self.s.Xte, self.s.yte),
            train_loss=eval_loss(m, self.s.Xtr, self.s.ytr),
            comm_floats=state.comm_floats,
            decode_mults=state.decode_mults,
        ))

    def after_update(self, time: float, state: MasterState) -> None:
        every = self.s.cfg.eval_every_updates
        if every and state.updates % every == 0:
            self.record(time, state)


def _schedule_checkpoints(q: EventQueue, cfg: ExperimentConfig) -> None:
    m = 1
    while m * cfg.eval_interval <= cfg.time_budget + 1e-12:
        q.push(m * cfg.eval_interval, CHECKPOINT, 0, -1)
        m += 1


class RunResult(list):
    """MetricsRecords of one run; ``state`` keeps the final master counters."""

    def __init__(self, records, state: MasterState):
        super().__init__(records)
        self.state = state


def _run_loop(q: EventQueue, setup: Setup, state: MasterState, rec: Recorder, handle) -> RunResult:
    """Drive the event queue until the time budget or update cap is hit."""
    cfg = setup.cfg
    rec.record(0.0, state)
    now = 0.0
    capped = False
    while q:
        time, kind, round, worker, payload = q.pop()
        if time > cfg.time_budget:
            break
        now = time
        if kind == CHECKPOINT:
            rec.record(time, state)
            continue
        handle(time, kind, round, worker, payload)
        if cfg.max_updates and state.updates >= cfg.max_updates:
            capped = True
            break
    end = now if capped else cfg.time_budget
    last = rec.records[-1]
    if last.sim_time != end or last.updates != state.updates:
        rec.record(end, state)
    return RunResult(rec.records, state)


def _work_units(n_local: int, n_train: int, k: int) -> float:
    """Records processed, in units of one of k equal data partitions."""
    return n_local * k / n_train


# ---------------------------------------------------------------------------
# LWPD


def lwpd_pieces(cfg: ExperimentConfig, setup: Setup) -> tuple[Codebook, GradientBlockLayout]:
    cb = build_code(CodeParams(cfg.n, cfg.k, cfg.t))
    layout = partition_gradient(setup.model.layer_sizes, cb.params, cfg.mode)
    return cb, layout


def run_lwpd(cfg: ExperimentConfig, setup: Setup | None = None) -> RunResult:
    """Asynchronous LWPD training.

    Every arrival is applied at once: the result is scaled by lr/sqrt(t)
    (one scalar-vector product) and then added to or subtracted from each
    of the t blocks in the worker's plan. Workers fetch the latest
    parameters after every task.
    """
    setup = prepare(cfg) if setup is None else setup
    cb, layout = lwpd_pieces(cfg, setup)
    n_train = len(setup.Xtr)
    state = MasterState(setup.model.w.copy())
    state.extra["lr_mults"] = 0
    eta_eff = cfg.lr / math.sqrt(cfg.t)
    q = EventQueue()
    rec = Recorder(setup, "lwpd")
    dead = set(cfg.dead_workers)
    task_idx = [0] * cfg.n
    data_cache: dict[tuple[int, int], tuple[dict, int]] = {}

    def local(worker, round):
        row, rot = cb.row_for(worker, round)
        key = (row, rot % cb.n_cols if cb.has_schedule else 0)
        if key not in data_cache:
            entries = scatter_plan(cb, layout, worker, round).entries
            bounds = partition_bounds(n_train, cfg.k)
            parts = sorted({j for j, _ in entries})
            held = {p: (setup.Xtr[slice(*bounds[p])], setup.ytr[slice(*bounds[p])]) for p in parts}
            data_cache[key] = (held, sum(bounds[p][1] - bounds[p][0] for p in parts))
        return data_cache[key]

    def dispatch(worker, now):
        r = task_idx[worker]
        task_idx[worker] += 1
        held, n_local = local(worker, r)
        model = setup.model.copy(state.w.copy())
        res = coded_task(model, cb, layout, worker, r, held)
        units = _work_units(n_local, n_train, cfg.k)
        done = now + cfg.downlink + setup.tape.delay(setup.dm, worker, r, units) + cfg.uplink
        q.push(done, TASK_COMPLETE, r, worker, (res, state.updates))

    def handle(time, kind, round, worker, payload):
        res, version = payload
        state.arrivals += 1
        state.comm_floats += res.floats_communicated
        stale = cfg.max_staleness is not None and state.updates - version > cfg.max_staleness
        if stale:
            state.discarded += 1
        else:
            plan = scatter_plan(cb, layout, worker, round)
            scaled = eta_eff * res.v
            state.lr_scalings += 1
            state.extra["lr_mults"] += len(scaled)
            for j, sign in plan.entries:
                idx = layout.indices(j)
                if sign > 0:
                    state.w[idx] -= scaled[: len(idx)]
                else:
                    state.w[idx] += scaled[: len(idx)]
                state.decode_adds += 1
            state.updates += 1
            rec.after_update(time, state)
        dispatch(worker, time)

    for i in range(cfg.n):
        if i not in dead:
            dispatch(i, 0.0)
    _schedule_checkpoints(q, cfg)
    return _run_loop(q, setup, state, rec, handle)


# ---------------------------------------------------------------------------
# round-based baselines


def _round_based(cfg, setup, scheme, wait_for, worker_message, combine):
    """Shared loop for K-AC and GC.

    Each round the master broadcasts parameters, collects the first
    ``wait_for`` results of that round, calls ``combine`` to form the
    gradient, updates and broadcasts again. Workers finish whatever they
    are computing before picking up the newest broadcast; results from old
    rounds are discarded on arrival.
    """
    state = MasterState(setup.model.w.copy())
    q = EventQueue()
    rec = Recorder(setup, scheme)
    dead = set(cfg.dead_workers)
    alive = [i for i in range(cfg.n) if i not in dead]
    task_idx = [0] * cfg.n
    busy = [False] * cfg.n
    latest: dict[int, tuple[int, np.ndarray]] = {}
    started = [-1] * cfg.n
    current = {"round": 0, "got": []}

    def start(worker, round, w, now):
        busy[worker] = True
        started[worker] = round
        idx = task_idx[worker]
        task_idx[worker] += 1
        msg, units, floats = worker_message(worker, w)
        done = now + setup.tape.delay(setup.dm, worker, idx, units)
        q.push(done, WORKER_FREE, round, worker)
        q.push(done + cfg.uplink, TASK_COMPLETE, round, worker, (msg, floats))

    def broadcast(round, now):
        w = state.w.copy()
        for i in alive:
            q.push(now + cfg.downlink, BROADCAST, round, i, w)

    def handle(time, kind, round, worker, payload):
        if kind == BROADCAST:
            latest[worker] = (round, payload)
            if not busy[worker]:
                start(worker, round, payload, time)
        elif kind == WORKER_FREE:
            busy[worker] = False
            if worker in latest and latest[worker][0] > started[worker]:
                start(worker, *latest[worker], time)
        else:
            msg, floats = payload
            state.arrivals += 1
            state.comm_floats += floats
            if round != current["round"]:
                state.discarded += 1
                return
            current["got"].append((worker, msg))
            if len(current["got"]) == wait_for:
                g = combine(current["got"], state)
                state.w -= cfg.lr * g
                state.updates += 1
                rec.after_update(time, state)
                current["round"] += 1
                current["got"] = []
                broadcast(current["round"], time)

    broadcast(0, 0.0)
    _schedule_checkpoints(q, cfg)
    return _run_loop(q, setup, state, rec, handle)


def run_kac(cfg: ExperimentConfig, setup: Setup | None = None) -> RunResult:
    """K-asynchronous GD on the same data partitions LWPD workers hold.

    Each worker sends the uncoded gradient of its local data; the master
    averages the first K results of a round, weighting by record counts.
    """
    setup = prepare(cfg) if setup is None else setup
    cb = build_code(CodeParams(cfg.n, cfg.k, cfg.t))
    n_train = len(setup.Xtr)
    P = len(setup.model.w)
    local = {}
    for i in range(cfg.n):
        idx = local_records(cb, n_train, i, 0)
        local[i] = (setup.Xtr[idx], setup.ytr[idx])

    def worker_message(worker, w):
        X, y = local[worker]
        g = full_gradient(setup.model, X, y, w=w)
        return (g, len(X)), _work_units(len(X), n_train, cfg.k), P + HEADER_FLOATS

    def combine(got, state):
        total = sum(m[1] for _, m in got)
        acc = np.zeros(P)
        for _, (g, cnt) in got:
            acc += g * cnt
        return acc / total

    return _round_based(cfg, setup, "kac", cfg.K, worker_message, combine)


# ---------------------------------------------------------------------------
# gradient coding


def gc_encoding_matrix(n: int, s: int, seed: int = 0, variant: str = "cyclic") -> np.ndarray:
    """n x n encoding matrix B; any n - s rows span the all-ones vector.

    ``cyclic``: row i is supported on partitions i..i+s (mod n) and lies in
    the null space of a random s x n matrix H with H @ 1 = 0.
    ``fractional``: groups of s + 1 workers share s + 1 partitions.
    """
    if s == 0:
        return np.eye(n)
    if variant == "fractional":
        if n % (s + 1):
            raise ValueError("fractional repetition needs (s + 1) | n")
        B = np.zeros((n, n))
        for i in range(n):
            g = i // (s + 1)
            B[i, g * (s + 1):(g + 1) * (s + 1)] = 1.0
        return B
    rng = np.random.default_rng([seed, 7919])
    H = rng.normal(size=(s, n))
    H[:, -1] = -H[:, :-1].sum(axis=1)
    B = np.zeros((n, n))
    for i in range(n):
        supp = np.arange(i, i + s + 1) % n
        coef = np.linalg.lstsq(H[:, supp[1:]], -H[:, supp[0]], rcond=None)[0]
        B[i, supp] = np.concatenate([[1.0], coef])
    return B


def gc_decode_coefficients(B: np.ndarray, workers) -> np.ndarray:
    """a with a @ B[workers] = 1, by least squares over the realised workers."""
    sub = B[list(workers)]
    a, *_ = np.linalg.lstsq(sub.T, np.ones(B.shape[1]), rcond=None)
    if np.max(np.abs(a @ sub - 1.0)) > 1e-8:
        raise RuntimeError(f"workers {sorted(workers)} cannot decode the full gradient")
    return a


def gc_decode_mults(n: int, m: int, dim: int, s: int) -> int:
    """Multiplications spent decoding from m of n messages of length ``dim``.

    Normal-equation solve (Gram m*m*n, right-hand side m*n, Cholesky m^3/6,
    two triangular solves m*m) plus the m*dim combination. Nothing is
    spent when s = 0: the coefficients are all ones.
    """
    if s == 0:
        return 0
    return m * m * n + m * n + m ** 3 // 6 + m * m + m * dim


def run_gc(cfg: ExperimentConfig, setup: Setup | None = None) -> RunResult:
    """Synchronous gradient coding waiting for the fastest n - s_gc workers."""
    setup = prepare(cfg) if setup is None else setup
    n, s = cfg.n, cfg.s_gc
    n_train = len(setup.Xtr)
    P = len(setup.model.w)
    B = gc_encoding_matrix(n, s, cfg.seed, cfg.gc_variant)
    bounds = partition_bounds(n_train, n)
    parts = [(setup.Xtr[slice(*b)], setup.ytr[slice(*b)]) for b in bounds]
    supports = [np.flatnonzero(B[i]) for i in range(n)]

    def worker_message(worker, w):
        msg = np.zeros(P)
        n_local = 0
        for j in supports[worker]:
            X, y = parts[j]
            msg += B[worker, j] * full_gradient(setup.model, X, y, w=w)
            n_local += len(X)
        return msg, _work_units(n_local, n_train, cfg.k), P + HEADER_FLOATS

    def combine(got, state):
        workers = [wk for wk, _ in got]
        if s == 0:
            total = np.sum([m for _, m in got], axis=0)
        else:
            a = gc_decode_coefficients(B, workers)
            total = np.zeros(P)
            for coef, (_, m) in zip(a, got):
                total += coef * m
        state.decode_mults += gc_decode_mults(n, len(got), P, s)
        return total / n

    return _round_based(cfg, setup, "gc", n - s, worker_message, combine)


# ---------------------------------------------------------------------------
# centralized oracle


def run_centralized(cfg: ExperimentConfig, setup: Setup | None = None) -> RunResult:
    """Full-batch GD on one node; each step costs base * k time units."""
    setup = prepare(cfg) if setup is None else setup
    state = MasterState(setup.model.w.copy())
    q = EventQueue()
    rec = Recorder(setup, "centralized")
    step = cfg.base * cfg.k

    def handle(time, kind, round, worker, payload):
        state.w -= cfg.lr * full_gradient(setup.model, setup.Xtr, setup.ytr, w=state.w)
        state.updates += 1
        rec.after_update(time, state)
        q.push(time + step, TASK_COMPLETE, round + 1, 0)

    q.push(step, TASK_COMPLETE, 0, 0)
    _schedule_checkpoints(q, cfg)
    return _run_loop(q, setup, state, rec, handle)


RUNNERS = {
    "lwpd": run_lwpd,
    "kac": run_kac,
    "gc": run_gc,
    "centralized": run_centralized,
}


def run(cfg: ExperimentConfig, setup: Setup | None = None) -> RunResult:
    return RUNNERS[cfg.scheme](cfg, setup)
