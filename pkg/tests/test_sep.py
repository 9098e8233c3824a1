"""Stirring simulation: alias sampling, event clock, observers and event logs."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sepfluct import grid as gr
from sepfluct import manifold as mf
from sepfluct import sep

CIRCLE = mf.circle()


@pytest.fixture(scope="module")
def tiny():
    g = gr.build_grid(CIRCLE, 6, eps=2.0, seed=0)
    return g, sep.AliasTable(g)


@pytest.fixture(scope="module")
def ten_edges():
    # smallest seed-0 circle grid with exactly ten edges at this bandwidth
    for n in range(5, 12):
        g = gr.build_grid(CIRCLE, n, eps=2.0, seed=0)
        if g.n_edges == 10:
            return g
    pytest.skip("no ten-edge grid found")


# ---------------------------------------------------------------- configurations


def test_configuration_validation_and_count():
    c = sep.Configuration([0, 1, 1, 0])
    assert c.count == 2 and c.n == 4
    assert c.index() == 0b0110
    with pytest.raises(ValueError):
        sep.Configuration([0, 2])
    with pytest.raises(ValueError):
        sep.Configuration(np.zeros((2, 2)))
    d = c.copy()
    d.occupancy[0] = 1
    assert c.occupancy[0] == 0


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.1, 1.2])
def test_init_bernoulli_rejects_degenerate_density(rho):
    with pytest.raises(ValueError):
        sep.init_bernoulli(10, rho, np.random.default_rng(0))


def test_init_bernoulli_count_is_binomial():
    n, rho = 10_000, 0.3
    c = sep.init_bernoulli(n, rho, np.random.default_rng(7))
    assert abs(c.count - n * rho) < 4 * math.sqrt(n * rho * (1 - rho))
    counts = np.array([sep.init_bernoulli(50, 0.5, np.random.default_rng(s)).count for s in range(2000)])
    # pool the tails so every cell expects at least a few counts
    edges = np.concatenate([[-1], np.arange(17, 33), [50]])
    observed = np.histogram(counts, bins=edges + 0.5)[0]
    expected = 2000 * np.diff(stats.binom.cdf(edges, 50, 0.5))
    assert stats.chisquare(observed, expected * observed.sum() / expected.sum()).pvalue > 0.001


def test_replica_rng_streams_are_reproducible_and_distinct():
    a = sep.replica_rng(5, 3).random(4)
    assert np.array_equal(a, sep.replica_rng(5, 3).random(4))
    assert not np.array_equal(a, sep.replica_rng(5, 4).random(4))
    assert not np.array_equal(a, sep.replica_rng(6, 3).random(4))


# ---------------------------------------------------------------- alias table


def test_alias_marginal_equals_normalized_rates(tiny):
    g, table = tiny
    np.testing.assert_allclose(table.marginal(), g.weights / g.weights.sum(), atol=1e-14)
    assert table.total_rate == pytest.approx(g.weights.sum())


@given(w=st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_alias_marginal_property(w):
    class FakeGrid:
        n_edges = len(w)
        edge_i = np.zeros(len(w), dtype=np.int64)
        edge_j = np.ones(len(w), dtype=np.int64)
        weights = np.array(w)

    t = sep.AliasTable(FakeGrid)
    np.testing.assert_allclose(t.marginal(), FakeGrid.weights / FakeGrid.weights.sum(), atol=1e-12)
    assert np.all((t.prob >= 0) & (t.prob <= 1 + 1e-12))


def test_alias_chi_square(ten_edges):
    table = sep.AliasTable(ten_edges)
    draws = sep.EventSampler(table, np.random.default_rng(3)).sample_edges(1_000_000)
    observed = np.bincount(draws, minlength=10)
    expected = 1_000_000 * ten_edges.weights / ten_edges.weights.sum()
    assert stats.chisquare(observed, expected).pvalue > 0.001


def test_alias_table_is_read_only(tiny):
    _, table = tiny
    with pytest.raises(ValueError):
        table.rates[0] = 1.0


def test_grid_without_edges_rejected():
    with pytest.warns(RuntimeWarning):
        g = gr.build_grid(CIRCLE, 3, eps=1e-6, seed=0)
    with pytest.raises(ValueError):
        sep.AliasTable(g)


# ---------------------------------------------------------------- events


def test_holding_times_are_exponential(tiny):
    _, table = tiny
    s = sep.EventSampler(table, np.random.default_rng(1), block_size=1000)
    dts = np.array([s.next_event()[0] for _ in range(20_000)])
    assert stats.kstest(dts, "expon", args=(0, 1 / table.total_rate)).pvalue > 0.001


def test_single_and_block_consumption_agree(tiny):
    _, table = tiny
    a = sep.EventSampler(table, np.random.default_rng(2), block_size=64)
    b = sep.EventSampler(table, np.random.default_rng(2), block_size=64)
    singles = [a.next_event() for _ in range(64 * 3)]
    blocks = [b.take_block() for _ in range(3)]
    dts = np.concatenate([x[0] for x in blocks])
    edges = np.concatenate([x[1] for x in blocks])
    assert np.array_equal(dts, [x[0] for x in singles])
    assert np.array_equal(edges, [x[1] for x in singles])


def test_step_swaps_or_leaves_configuration(tiny):
    g, table = tiny
    s = sep.EventSampler(table, np.random.default_rng(4))
    clock = sep.SimClock()
    cfg = sep.Configuration([1, 0, 1, 0, 1, 0])
    for _ in range(200):
        before = cfg.occupancy.copy()
        ev = sep.step(cfg, s, clock)
        assert (ev.i, ev.j) == (g.edge_i[ev.edge], g.edge_j[ev.edge])
        if before[ev.i] == before[ev.j]:
            assert not ev.swapped and np.array_equal(before, cfg.occupancy)
        else:
            assert ev.swapped
            after = before.copy()
            after[[ev.i, ev.j]] = before[[ev.j, ev.i]]
            assert np.array_equal(after, cfg.occupancy)
    assert clock.n_events == 200


def test_particle_number_conserved_over_a_million_steps(tiny):
    _, table = tiny
    s = sep.EventSampler(table, np.random.default_rng(5))
    clock = sep.SimClock()
    cfg = sep.Configuration([1, 1, 0, 0, 1, 0])
    for _ in range(1_000_000):
        sep.step(cfg, s, clock)
    assert int(cfg.occupancy.sum()) == 3


# ---------------------------------------------------------------- run


class Recorder(sep.Observer):
    def __init__(self):
        self.events, self.samples, self.holds = [], [], []

    def on_event(self, event, cfg):
        self.events.append(event)

    def on_sample(self, t, cfg):
        self.samples.append((t, cfg.occupancy.copy()))

    def on_hold(self, t0, t1, cfg):
        self.holds.append((t0, t1))


def test_zero_horizon_has_no_events(tiny):
    _, table = tiny
    rec = Recorder()
    cfg = sep.Configuration([1, 0, 1, 0, 1, 0])
    sep.run(cfg, sep.EventSampler(table, np.random.default_rng(0)), 0.0, [rec])
    assert rec.events == []
    assert np.array_equal(cfg.occupancy, [1, 0, 1, 0, 1, 0])
    assert len(rec.samples) == 1


def test_run_timestamps_holds_and_samples(tiny):
    _, table = tiny
    rec = Recorder()
    clock = sep.SimClock()
    times = [0.0, 0.5, 1.0, 3.0]
    sep.run(sep.Configuration([1, 0, 1, 0, 1, 0]), sep.EventSampler(table, np.random.default_rng(6)), 3.0,
            [rec], times, clock)
    ts = [e.time for e in rec.events]
    assert np.all(np.diff(ts) >= 0) and ts[-1] <= 3.0
    assert clock.t == 3.0 and clock.n_events == len(ts)
    assert [s[0] for s in rec.samples] == times
    # holding intervals tile [0, T]
    assert rec.holds[0][0] == 0.0 and rec.holds[-1][1] == 3.0
    assert all(a[1] == b[0] for a, b in zip(rec.holds, rec.holds[1:]))


def test_run_rejects_bad_arguments(tiny):
    _, table = tiny
    cfg = sep.Configuration([1, 0, 1, 0, 1, 0])
    with pytest.raises(ValueError):
        sep.run(cfg, sep.EventSampler(table, np.random.default_rng(0)), -1.0)
    with pytest.raises(ValueError):
        sep.run(cfg, sep.EventSampler(table, np.random.default_rng(0)), 1.0, sample_times=[2.0])


def test_observer_failure_reports_time_and_index(tiny):
    _, table = tiny

    class Boom(sep.Observer):
        def on_event(self, event, cfg):
            if event.time > 0.2:
                raise KeyError("boom")

    with pytest.raises(sep.SimulationError, match=r"t=.*event index"):
        sep.run(sep.Configuration([1, 0, 1, 0, 1, 0]), sep.EventSampler(table, np.random.default_rng(0)), 5.0,
                [Boom()])


def test_event_count_is_poisson(tiny):
    _, table = tiny
    T = 2.0
    counts = []
    for r in range(400):
        rec = Recorder()
        sep.run(sep.Configuration([1, 0, 1, 0, 1, 0]), sep.EventSampler(table, sep.replica_rng(9, r)), T, [rec])
        counts.append(len(rec.events))
    mean = table.total_rate * T
    assert abs(np.mean(counts) - mean) < 4 * math.sqrt(mean / 400)
    assert abs(np.var(counts, ddof=1) / mean - 1) < 4 * math.sqrt(2 / 399)


def test_bernoulli_measure_is_stationary(tiny):
    g, table = tiny
    rho, R = 0.4, 6000
    final = np.empty((R, 6))
    for r in range(R):
        rng = sep.replica_rng(11, r)
        cfg = sep.init_bernoulli(6, rho, rng)
        final[r] = sep.run(cfg, sep.EventSampler(table, rng, 64), 1.0).occupancy
    se = math.sqrt(rho * (1 - rho) / R)
    assert np.all(np.abs(final.mean(axis=0) - rho) < 4 * se)
    # product measure: adjacent-site covariance vanishes
    for i, j in zip(g.edge_i[:4], g.edge_j[:4]):
        c = np.cov(final[:, i], final[:, j])[0, 1]
        assert abs(c) < 4 * rho * (1 - rho) / math.sqrt(R)


def test_run_is_deterministic(tiny):
    _, table = tiny

    def once():
        rec = Recorder()
        out = sep.run(sep.Configuration([1, 0, 1, 0, 1, 0]), sep.EventSampler(table, sep.replica_rng(1, 2)), 4.0,
                      [rec])
        return out.occupancy.tobytes(), [(e.time, e.edge) for e in rec.events]

    assert once() == once()


# ---------------------------------------------------------------- event log


def test_event_log_round_trip(tiny, tmp_path):
    _, table = tiny
    rec = Recorder()
    path = tmp_path / "events.bin"
    with sep.EventLogWriter(path) as w:
        sep.run(sep.Configuration([1, 0, 1, 0, 1, 0]), sep.EventSampler(table, np.random.default_rng(8)), 3.0,
                [rec, w])
    log = sep.read_event_log(path)
    assert len(log) == len(rec.events)
    assert np.array_equal(log["time"], [e.time for e in rec.events])
    assert np.array_equal(log["edge"], [e.edge for e in rec.events])
    assert np.array_equal(log["swapped"].astype(bool), [e.swapped for e in rec.events])


def test_event_log_in_memory_and_bad_magic():
    buf = io.BytesIO()
    w = sep.EventLogWriter(buf)
    w.on_event(sep.Event(0.5, 0.5, 3, 1, 2, True), None)
    w.close()
    log = sep.read_event_log(buf.getvalue())
    assert log["time"][0] == 0.5 and log["edge"][0] == 3 and log["swapped"][0] == 1
    with pytest.raises(ValueError):
        sep.read_event_log(b"NOTALOG!" + bytes(4))
