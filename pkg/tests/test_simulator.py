import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lwpd.assignment import partition_bounds, partition_gradient
from lwpd.codebook import CodeParams
from lwpd.config import ConfigError, ExperimentConfig
from lwpd.learner import full_gradient
from lwpd.simulator import (BROADCAST, CHECKPOINT, TASK_COMPLETE, DelayModel, DelayTape, EventQueue,
                            gc_decode_coefficients, gc_decode_mults, gc_encoding_matrix, prepare, run,
                            run_centralized, run_gc, run_kac, run_lwpd, sample_delay)

SMALL = dict(n_records=2000, dim=5, time_budget=30, eval_interval=5)
ZERO = dict(base=0.0, rate=math.inf)


def cfg_for(scheme, **kw):
    extra = {"kac": {"K": 6}, "gc": {"s_gc": 1}}.get(scheme, {})
    return ExperimentConfig(scheme=scheme, **{**SMALL, **extra, **kw})


# --- delays -----------------------------------------------------------------

def test_sample_delay_deterministic_cases():
    rng = np.random.default_rng(0)
    dm = DelayModel(base=1.5, rate=math.inf, straggler_prob=0.0, straggler_factor=4.0)
    assert all(sample_delay(dm, 3.0, rng) == 4.5 for _ in range(50))
    dm = DelayModel(base=1.5, rate=math.inf, straggler_prob=1.0, straggler_factor=4.0)
    assert all(sample_delay(dm, 3.0, rng) == 18.0 for _ in range(50))


def test_sample_delay_always_straggling_with_jitter():
    rng = np.random.default_rng(1)
    dm = DelayModel(base=1.0, rate=2.0, straggler_prob=1.0, straggler_factor=5.0)
    draws = np.array([sample_delay(dm, 2.0, rng) for _ in range(2000)])
    assert np.all(draws >= 10.0)


@pytest.mark.parametrize("p,f,rate,units", [(0.2, 5.0, 2.0, 1.0), (0.0, 1.0, 0.5, 2.0), (0.7, 3.0, 10.0, 0.5)])
def test_sample_delay_mean(p, f, rate, units):
    dm = DelayModel(base=1.2, rate=rate, straggler_prob=p, straggler_factor=f)
    rng = np.random.default_rng(42)
    draws = np.array([sample_delay(dm, units, rng) for _ in range(100_000)])
    analytic = 1.2 * units * ((1 - p) + p * f) + 1 / rate
    assert abs(draws.mean() - analytic) <= 0.02 * analytic
    assert dm.mean(units) == pytest.approx(analytic, rel=1e-12)


def test_delay_model_validation():
    with pytest.raises(ValueError):
        DelayModel(base=-1)
    with pytest.raises(ValueError):
        DelayModel(straggler_prob=1.5)


def test_delay_tape_streams_independent():
    a = DelayTape(3, 4)
    b = DelayTape(3, 4)
    first = [a.draw(i, r) for i in range(4) for r in range(5)]
    # read b in a different order, far past one chunk for worker 2
    b.draw(2, 5000)
    second = [b.draw(i, r) for i in range(4) for r in range(5)]
    assert first == second
    assert a.draw(0, 0) != a.draw(1, 0)


def test_delay_tape_round_trip():
    tape = DelayTape(9, 3)
    text = tape.dumps(40)
    assert text.splitlines()[0] == "3 40"
    back = DelayTape.loads(text)
    for i in range(3):
        for r in range(40):
            assert back.draw(i, r) == tape.draw(i, r)
    assert back.dumps(40) == text
    with pytest.raises(IndexError):
        back.draw(0, 40)


def test_replayed_tape_gives_same_run():
    cfg = cfg_for("lwpd", straggler_prob=0.3, straggler_factor=4.0, time_budget=10)
    live = run_lwpd(cfg)
    used = max(live.state.arrivals, 1)
    tape = DelayTape.loads(DelayTape(cfg.seed, cfg.n).dumps(used + cfg.n))
    replay = run_lwpd(cfg, prepare(cfg, tape=tape))
    assert list(replay) == list(live)


# --- event queue ------------------------------------------------------------

def test_event_queue_order():
    q = EventQueue()
    q.push(1.0, CHECKPOINT, 0, -1)
    q.push(1.0, TASK_COMPLETE, 2, 3)
    q.push(1.0, TASK_COMPLETE, 1, 5)
    q.push(0.5, BROADCAST, 0, 0)
    q.push(1.0, TASK_COMPLETE, 1, 2)
    q.push(1.0, TASK_COMPLETE, 1, 2, "second")
    got = []
    while q:
        got.append(q.pop())
    assert [(g[0], g[1], g[2], g[3]) for g in got] == [
        (0.5, BROADCAST, 0, 0), (1.0, TASK_COMPLETE, 1, 2), (1.0, TASK_COMPLETE, 1, 2),
        (1.0, TASK_COMPLETE, 1, 5), (1.0, TASK_COMPLETE, 2, 3), (1.0, CHECKPOINT, 0, -1)]
    assert got[2][4] == "second"


# --- LWPD -------------------------------------------------------------------

def test_lwpd_counters():
    cfg = cfg_for("lwpd", straggler_prob=0.2, straggler_factor=5.0)
    res = run_lwpd(cfg)
    st_ = res.state
    assert st_.updates > 0
    assert st_.decode_mults == 0
    assert st_.decode_adds == cfg.t * st_.updates
    assert st_.lr_scalings == st_.updates
    layout = partition_gradient(prepare(cfg).model.layer_sizes, CodeParams(8, 4, 2), "2d")
    assert st_.comm_floats == st_.arrivals * (layout.block_dim + 2)
    assert all(r.decode_mults == 0 for r in res)


@pytest.mark.parametrize("scheme", ["lwpd", "kac", "gc", "centralized"])
def test_records_monotone(scheme):
    res = run(cfg_for(scheme, straggler_prob=0.2, straggler_factor=5.0))
    times = [r.sim_time for r in res]
    assert times[0] == 0.0 and times[-1] == 30
    for a, b in zip(res, res[1:]):
        assert a.sim_time <= b.sim_time
        assert a.updates <= b.updates
        assert a.comm_floats <= b.comm_floats
        assert a.decode_mults <= b.decode_mults
    assert {r.scheme for r in res} == {scheme}


@pytest.mark.parametrize("scheme", ["lwpd", "kac", "gc", "centralized"])
def test_determinism(scheme):
    cfg = cfg_for(scheme, straggler_prob=0.3, straggler_factor=3.0, seed=5)
    assert list(run(cfg)) == list(run(cfg))


@pytest.mark.parametrize("mode,factor", [("2d", lambda t, k: math.sqrt(t) * k / t),
                                         ("data", lambda t, k: math.sqrt(t) * k)])
@pytest.mark.parametrize("nkt", [(8, 4, 2), (16, 8, 4)])
def test_systematic_pass_is_one_centralized_step(mode, factor, nkt):
    n, k, t = nkt
    lr = 0.05
    common = dict(n=n, k=k, t=t, mode=mode, n_records=4000, dim=6, num_classes=4, **ZERO)
    lw = run_lwpd(ExperimentConfig(scheme="lwpd", lr=lr, dead_workers=list(range(k, n)), max_updates=k,
                                   **common))
    ce = run_centralized(ExperimentConfig(scheme="centralized", lr=lr * factor(t, k), max_updates=1, **common))
    assert lw.state.updates == k and ce.state.updates == 1
    assert np.max(np.abs(lw.state.w - ce.state.w)) <= 1e-10


def test_lwpd_dead_worker_keeps_updating():
    cfg = cfg_for("lwpd", dead_workers=[3])
    res = run_lwpd(cfg)
    assert res.state.updates > 20
    assert res[-1].test_loss < res[0].test_loss


def test_lwpd_staleness_cutoff():
    cfg = cfg_for("lwpd", straggler_prob=0.3, straggler_factor=6.0)
    free = run_lwpd(cfg).state
    strict = run_lwpd(cfg.replace(max_staleness=0)).state
    assert free.discarded == 0
    assert strict.discarded > 0
    assert strict.updates + strict.discarded == strict.arrivals


def test_lwpd_scheduled_code_runs():
    cfg = cfg_for("lwpd", n=6, k=3, t=2, mode="data")
    res = run_lwpd(cfg)
    assert res.state.updates > 0 and res.state.decode_mults == 0
    assert res[-1].test_loss < res[0].test_loss


# --- K-AC -------------------------------------------------------------------

def test_kac_full_barrier_matches_centralized():
    common = dict(n_records=4000, dim=6, lr=0.3, max_updates=25, eval_every_updates=1, **ZERO)
    kac = run_kac(ExperimentConfig(scheme="kac", K=8, **common))
    cen = run_centralized(ExperimentConfig(scheme="centralized", **common))
    assert [r.updates for r in kac] == [r.updates for r in cen] == list(range(26))
    for a, b in zip(kac, cen):
        assert abs(a.test_loss - b.test_loss) <= 1e-10
        assert abs(a.train_loss - b.train_loss) <= 1e-10
    assert np.max(np.abs(kac.state.w - cen.state.w)) <= 1e-10


def test_kac_single_arrival():
    res = run_kac(cfg_for("kac", K=1, straggler_prob=0.2, straggler_factor=5.0))
    s = res.state
    assert s.updates > 0
    assert s.updates + s.discarded <= s.arrivals
    assert s.discarded > 0


def test_kac_rejects_bad_K():
    with pytest.raises(ConfigError):
        cfg_for("kac", K=None)
    with pytest.raises(ConfigError):
        cfg_for("kac", K=9)
    with pytest.raises(ConfigError):
        cfg_for("kac", K=8, dead_workers=[0])


# --- GC ---------------------------------------------------------------------

def partition_grads(n, seed=0):
    cfg = cfg_for("gc", n=n, k=n, seed=seed, n_records=1000 * n // 4)
    s = prepare(cfg)
    bounds = partition_bounds(len(s.Xtr), n)
    grads = np.array([full_gradient(s.model, s.Xtr[slice(*b)], s.ytr[slice(*b)]) for b in bounds])
    return grads, full_gradient(s.model, s.Xtr, s.ytr)


@pytest.mark.parametrize("variant", ["cyclic", "fractional"])
def test_gc_single_straggler_decode(variant):
    n = 8
    B = gc_encoding_matrix(n, 1, seed=3, variant=variant)
    grads, full = partition_grads(n)
    msgs = B @ grads
    for straggler in range(n):
        live = [i for i in range(n) if i != straggler]
        a = gc_decode_coefficients(B, live)
        decoded = a @ msgs[live] / n
        assert np.max(np.abs(decoded - full)) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))),
       st.integers(0, 1000), st.randoms(use_true_random=False))
def test_gc_any_n_minus_s_decode(ns, seed, rnd):
    n, s = ns
    B = gc_encoding_matrix(n, s, seed=seed)
    assert np.all(np.count_nonzero(B, axis=1) == s + 1)
    live = sorted(rnd.sample(range(n), n - s))
    a = gc_decode_coefficients(B, live)
    np.testing.assert_allclose(a @ B[live], 1.0, atol=1e-8)


def test_gc_without_stragglers_is_uncoded():
    B = gc_encoding_matrix(6, 0)
    np.testing.assert_array_equal(B, np.eye(6))
    res = run_gc(cfg_for("gc", s_gc=0, straggler_prob=0.2, straggler_factor=5.0))
    assert res.state.updates > 0 and res.state.decode_mults == 0


def test_gc_zero_delay_matches_centralized():
    common = dict(n_records=4000, dim=6, lr=0.3, max_updates=10, eval_every_updates=1, **ZERO)
    gc = run_gc(ExperimentConfig(scheme="gc", s_gc=2, **common))
    cen = run_centralized(ExperimentConfig(scheme="centralized", **common))
    assert np.max(np.abs(gc.state.w - cen.state.w)) <= 1e-8


def test_gc_decode_mults_superlinear():
    per_update = []
    for k in (4, 8, 16):
        cfg = cfg_for("gc", n=k, k=k, s_gc=1, max_updates=3, n_records=400 * k)
        res = run_gc(cfg)
        per_update.append(res.state.decode_mults / res.state.updates)
    assert per_update[1] > 2 * per_update[0]
    assert per_update[2] > 2 * per_update[1]
    assert gc_decode_mults(8, 7, 100, 0) == 0


def test_gc_rejects_bad_config():
    with pytest.raises(ConfigError):
        cfg_for("gc", s_gc=None)
    with pytest.raises(ConfigError):
        cfg_for("gc", s_gc=1, dead_workers=[0, 1])
    with pytest.raises(ConfigError):
        cfg_for("gc", s_gc=2, gc_variant="fractional")


# --- centralized ------------------------------------------------------------

def test_centralized_zero_lr_constant():
    res = run_centralized(cfg_for("centralized", lr=0.0))
    assert len({r.test_loss for r in res}) == 1
    assert res.state.updates > 0


def test_centralized_monotone_train_loss():
    cfg = ExperimentConfig(scheme="centralized", num_classes=2, num_components=2, spread=4.0, n_records=2000,
                           dim=5, lr=0.1, time_budget=40, eval_interval=4, eval_every_updates=1)
    losses = [r.train_loss for r in run_centralized(cfg)]
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_zero_delay_needs_update_cap():
    with pytest.raises(ConfigError):
        ExperimentConfig(scheme="centralized", **ZERO)


# --- fairness ---------------------------------------------------------------

def test_schemes_share_the_delay_tape():
    cfg = cfg_for("lwpd", seed=13)
    tapes = [prepare(cfg.replace(scheme=s, K=4, s_gc=1)).tape for s in ("lwpd", "kac", "gc")]
    for i, r in itertools.product(range(8), range(30)):
        assert tapes[0].draw(i, r) == tapes[1].draw(i, r) == tapes[2].draw(i, r)
