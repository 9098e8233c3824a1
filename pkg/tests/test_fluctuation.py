"""Fluctuation fields, exact time integrals and the martingale identities."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepfluct import fluctuation as fl
from sepfluct import grid as gr
from sepfluct import manifold as mf
from sepfluct import sep

CIRCLE = mf.circle()


@pytest.fixture(scope="module")
def small():
    g = gr.build_grid(CIRCLE, 60, eps=1.0, seed=3)
    obs = [fl.FieldObservable.build(g, mf.eigenfunction(CIRCLE, k), 0.4) for k in (1, -2, 0)]
    return g, obs


def _vector_grid(n=4):
    return gr.build_grid(CIRCLE, n, eps=10.0, seed=0)


# ---------------------------------------------------------------- pointwise evaluation


def test_field_eval_hand_example():
    g = _vector_grid()
    obs = fl.FieldObservable.build(g, np.ones(4), 0.5)
    assert fl.field_eval(sep.Configuration([1, 1, 0, 0]), obs) == 0.0
    obs2 = fl.FieldObservable.build(g, np.array([1.0, 2.0, 3.0, 4.0]), 0.5)
    # (1/2)(1*0.5 + 2*0.5 - 3*0.5 - 4*0.5) = -1
    assert fl.field_eval(sep.Configuration([1, 1, 0, 0]), obs2) == pytest.approx(-1.0, abs=1e-15)


def test_field_eval_zero_function_and_length_mismatch():
    g = _vector_grid()
    obs = fl.FieldObservable.build(g, np.zeros(4), 0.3)
    assert fl.field_eval(sep.Configuration([1, 0, 1, 1]), obs) == 0.0
    with pytest.raises(ValueError):
        fl.field_eval(sep.Configuration([1, 0, 1]), obs)


def test_observable_rejects_bad_density():
    with pytest.raises(ValueError):
        fl.FieldObservable.build(_vector_grid(), np.ones(4), 1.0)


def test_observable_invariants(small):
    g, obs = small
    for o in obs:
        for v in (o.f, o.Lf, o.lap, o.grad_sq):
            assert v.shape == (g.n,)
        ref = mf.integrate(CIRCLE, lambda p, o=o: mf.eigenfunction(CIRCLE, _index_of(o.name))(p) ** 2)
        assert o.norm_sq == pytest.approx(ref, abs=1e-10)


def _index_of(name):
    return int(name.split("=")[1].rstrip("]"))


def test_drift_increment_examples(small):
    g, obs = small
    rng = np.random.default_rng(0)
    cfg = sep.init_bernoulli(g.n, 0.4, rng)
    const = obs[2]
    assert abs(fl.drift_increment(cfg, const, 0.7)) < 1e-12
    assert fl.drift_increment(cfg, obs[0], 0.0) == 0.0
    lf_obs = fl.FieldObservable.build(g, obs[0].Lf, 0.4)
    assert fl.drift_increment(cfg, obs[0], 0.3) == pytest.approx(0.3 * fl.field_eval(cfg, lf_obs), abs=1e-12)


def test_gamma_eval_examples(small):
    g, obs = small
    for fill in (0, 1):
        assert fl.gamma_eval(sep.Configuration(np.full(g.n, fill)), obs[0], g) == 0.0
    cfg = sep.init_bernoulli(g.n, 0.4, np.random.default_rng(1))
    assert fl.gamma_eval(cfg, obs[2], g) == 0.0


@given(seed=st.integers(0, 2**32 - 1), rho=st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_gamma_eval_matches_ordered_pair_sum(small, seed, rho):
    g, obs = small
    cfg = sep.init_bernoulli(g.n, rho, np.random.default_rng(seed))
    C = g.adjacency.toarray()
    eta = cfg.occupancy.astype(float)
    f = obs[0].f
    dense = np.sum(C * (eta[None, :] - eta[:, None]) ** 2 * (f[None, :] - f[:, None]) ** 2) / (2 * g.n)
    val = fl.gamma_eval(cfg, obs[0], g)
    assert val >= 0
    assert val == pytest.approx(dense, rel=1e-12, abs=1e-15)
    # the per-edge weights give the same value
    disc = cfg.occupancy[g.edge_i] != cfg.occupancy[g.edge_j]
    assert obs[0].gamma_weights[disc].sum() == pytest.approx(val, rel=1e-12, abs=1e-15)


def test_gamma_mean_under_product_measure(small):
    g, obs = small
    o = obs[0]
    draws = np.array([fl.gamma_eval(sep.init_bernoulli(g.n, 0.4, np.random.default_rng(s)), o, g)
                      for s in range(4000)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - o.gamma_mean_finite()) < 4 * se


def test_field_mean_and_variance_under_product_measure(small):
    g, obs = small
    o = obs[0]
    ys = np.array([fl.field_eval(sep.init_bernoulli(g.n, 0.4, np.random.default_rng(s)), o) for s in range(4000)])
    assert abs(ys.mean()) < 4 * ys.std(ddof=1) / math.sqrt(ys.size)
    sq = (ys - ys.mean()) ** 2
    assert abs(sq.mean() - o.variance_finite()) < 4 * sq.std(ddof=1) / math.sqrt(sq.size)


# ---------------------------------------------------------------- trajectories


def _both_paths(g, obs, seed, horizon=2.0, k=20):
    times = fl.uniform_times(horizon, k)
    kern = fl.FieldKernel(g, obs)
    rng_a, rng_b = sep.replica_rng(seed, 0), sep.replica_rng(seed, 0)
    cfg_a, smp_a = fl.make_replica(kern, rng_a, 128)
    cfg_b, smp_b = fl.make_replica(kern, rng_b, 128)
    initial = cfg_a.copy()
    res = fl.simulate_fields(kern, times, smp_a, cfg_a)
    rec = fl.FieldRecorder(g, obs)
    log = []

    class Log(sep.Observer):
        def on_event(self, event, cfg):
            log.append((event.time, event.edge, event.swapped))

    sep.run(cfg_b, smp_b, horizon, [rec, Log()], times)
    events = np.array(log, dtype=sep.EVENT_DTYPE)
    return times, initial, res, rec.trajectories(), cfg_b, events


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_compiled_and_reference_paths_agree(small, seed):
    g, obs = small
    _, _, res, ref, final_ref, events = _both_paths(g, obs, seed)
    assert np.array_equal(res.final.occupancy, final_ref.occupancy)
    assert res.n_events == len(events)
    assert res.n_swaps == int(events["swapped"].sum())
    for a, b in zip(res.trajectories, ref):
        for field in ("Y", "I", "D", "G"):
            np.testing.assert_allclose(getattr(a, field), getattr(b, field), rtol=0, atol=1e-10)


def test_integrals_replay_from_event_log(small, tmp_path):
    g, obs = small
    times, initial, res, _, _, events = _both_paths(g, obs, 7)
    path = tmp_path / "ev.bin"
    with sep.EventLogWriter(path) as w:
        for e in events:
            w.on_event(sep.Event(float(e["time"]), 0.0, int(e["edge"]), 0, 0, bool(e["swapped"])), None)
    logged = sep.read_event_log(path)
    for o, tr in zip(obs, res.trajectories):
        I, G = fl.replay_integrals(g, o, initial, logged, times)
        np.testing.assert_allclose(I, tr.I, atol=1e-10)
        np.testing.assert_allclose(G, tr.G, atol=1e-10)


def test_martingale_identities_on_a_path(small):
    g, obs = small
    _, _, res, _, _, _ = _both_paths(g, obs, 4)
    for tr in res.trajectories:
        M, N = fl.finalize_martingales(tr)
        np.testing.assert_allclose(M, tr.Y - tr.Y[0] - tr.I, atol=1e-10)
        np.testing.assert_allclose(N, M**2 - tr.G, atol=1e-10)
        assert M[0] == 0.0 and N[0] == 0.0
        assert np.all(np.diff(tr.G) >= 0)
    const = res.trajectories[2]
    assert np.max(np.abs(const.M)) < 1e-12
    assert np.max(np.abs(const.G)) == 0.0


def test_replacement_is_difference_of_integrals(small):
    g, obs = small
    _, _, res, _, _, _ = _both_paths(g, obs, 5)
    tr = res.trajectories[0]
    np.testing.assert_allclose(tr.replacement, tr.I - tr.D)
    vec = fl.FieldObservable.build(g, obs[0].f, 0.4)
    assert fl.FieldTrajectory("v", tr.times, tr.Y, tr.I, tr.G).replacement is None
    assert vec.variance_limit() is None and vec.gamma_mean_limit() is None


def test_kernel_without_gamma_tracking(small):
    g, obs = small
    kern = fl.FieldKernel(g, obs, track_gamma=False)
    cfg, smp = fl.make_replica(kern, sep.replica_rng(0, 0), 128)
    res = fl.simulate_fields(kern, fl.uniform_times(1.0, 5), smp, cfg)
    assert np.all(np.isnan(res.trajectories[0].G))
    full = fl.FieldKernel(g, obs)
    cfg2, smp2 = fl.make_replica(full, sep.replica_rng(0, 0), 128)
    res2 = fl.simulate_fields(full, fl.uniform_times(1.0, 5), smp2, cfg2)
    np.testing.assert_array_equal(res.trajectories[0].Y, res2.trajectories[0].Y)


def test_simulate_fields_validation(small):
    g, obs = small
    kern = fl.FieldKernel(g, obs)
    cfg, smp = fl.make_replica(kern, sep.replica_rng(0, 0), 128)
    with pytest.raises(ValueError):
        fl.simulate_fields(kern, [0.5, 1.0], smp, cfg)
    with pytest.raises(ValueError):
        fl.simulate_fields(kern, [0.0, 1.0, 0.5], smp, cfg)
    with pytest.raises(ValueError):
        fl.FieldKernel(g, [])
    with pytest.raises(ValueError):
        fl.FieldKernel(g, [obs[0], fl.FieldObservable.build(g, obs[0].f, 0.2)])


def test_make_replica_with_given_start(small):
    g, obs = small
    kern = fl.FieldKernel(g, obs)
    start = np.zeros(g.n, dtype=np.uint8)
    start[: g.n // 2] = 1
    cfg, _ = fl.make_replica(kern, np.random.default_rng(0), 16, initial=start)
    assert np.array_equal(cfg.occupancy, start)


@given(seed=st.integers(0, 10_000), horizon=st.floats(0.0, 3.0))
@settings(max_examples=25, deadline=None)
def test_path_properties(small, seed, horizon):
    g, obs = small
    kern = fl.FieldKernel(g, obs)
    cfg, smp = fl.make_replica(kern, sep.replica_rng(seed, 1), 64)
    count = cfg.count
    res = fl.simulate_fields(kern, fl.uniform_times(horizon, 7), smp, cfg)
    assert res.final.count == count
    for tr, o in zip(res.trajectories, obs):
        assert np.all(np.diff(tr.G) >= -1e-15)
        assert tr.Y[-1] == pytest.approx(fl.field_eval(res.final, o), abs=1e-10)
        M = tr.M
        assert M[0] == 0.0


def test_trajectory_csv(small, tmp_path):
    g, obs = small
    _, _, res, _, _, _ = _both_paths(g, obs, 6, k=4)
    path = tmp_path / "traj.csv"
    fl.write_trajectory_csv(path, [(0, res.trajectories), (1, res.trajectories[:1])])
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["replica", "f_name", "t", "Y", "M", "N", "I", "G"]
    assert len(rows) == 5 * 3 + 5
    tr = res.trajectories[0]
    first = [r for r in rows if r["replica"] == "0" and r["f_name"] == tr.name]
    np.testing.assert_array_equal([float(r["M"]) for r in first], tr.M)
    np.testing.assert_array_equal([float(r["t"]) for r in first], tr.times)
