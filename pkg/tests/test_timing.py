import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfqroute.techlib import WidgetKind, default_technology, ps_to_fs
from sfqroute.timing import (Edge, InfeasibleWindowError, TimingGraph, analyze, edge_clock_need,
                             frequency_ghz, hold_slack, io_regime, max_clock, path_wire_delay,
                             setup_slack, slack_report, wire_delay_window)

from conftest import make_design, route, straight_net
from oracles import scan_max_clock

P = ps_to_fs
BOUND = P(13.2)


def edge(t1=0.0, t2=0.0, d=0.0, w=0.0, hold=0.0, setup=0.0):
    return Edge(P(t1), P(t2), P(d), P(w), P(hold), P(setup))


def graph(*edges, bound=BOUND):
    return TimingGraph(list(edges), [], {}, {}, bound)


@pytest.mark.parametrize("e, want", [
    (edge(0, 3, 6, 5, hold=1), 7),
    (edge(0, 10, 6, 0, hold=1), -5),
    (edge(), 0),
])
def test_hold_examples(e, want):
    assert hold_slack(e) == P(want)


def test_setup_examples():
    e = edge(0, 3, 6, 5, setup=2)
    assert setup_slack(e, None, P(20)) == P(10)
    assert setup_slack(e, None, P(8)) == P(-2)
    sym = edge(4, 4, 6, 0, setup=2)
    assert setup_slack(sym, None, P(30)) == P(30 - 2 - 6)


def test_max_clock_at_library_bound():
    g = graph(edge(0, 0, 5, 4, hold=1, setup=2), edge(3, 3, 6, 0, setup=2))
    t, ghz, crit = max_clock(g)
    assert t == BOUND and crit is None
    assert ghz == pytest.approx(75.757575, rel=1e-6)


def test_max_clock_single_edge():
    e = edge(5, 5, 6, 10, setup=2)
    t, _, crit = max_clock(graph(e))
    assert t == max(P(18), BOUND) == P(18) and crit == e
    t, _, _ = max_clock(graph(e, bound=P(20)))
    assert t == P(20)


def test_frequency_conversion():
    assert frequency_ghz(P(10)) == pytest.approx(100.0)
    assert frequency_ghz(0) == float("inf")


times = st.integers(0, 60_000)
edges = st.builds(Edge, times, times, st.integers(1000, 15_000), st.integers(0, 60_000),
                  st.integers(0, 6000), st.integers(0, 6000))


@settings(max_examples=300, deadline=None)
@given(st.lists(edges, min_size=1, max_size=8))
def test_max_clock_matches_scan(es):
    # the scan steps in 0.01 ps, so snap every term onto that grid
    es = [Edge(*(v - v % 10 for v in (e.t1, e.t2, e.t_delay, e.t_wire, e.t_hold, e.t_setup)))
          for e in es]
    g = graph(*es)
    t, _, _ = max_clock(g)
    assert t == scan_max_clock(es, BOUND)
    # binding-edge witness
    assert all(setup_slack(e, g, t) >= 0 for e in es)
    if t > BOUND:
        assert any(setup_slack(e, g, t - 10) < 0 for e in es)


@settings(max_examples=200, deadline=None)
@given(st.lists(edges, min_size=1, max_size=6), st.integers(0, 5), st.integers(1, 5000))
def test_max_clock_monotone_in_wire(es, i, bump):
    i %= len(es)
    before, _, _ = max_clock(graph(*es))
    e = es[i]
    es[i] = Edge(e.t1, e.t2, e.t_delay, e.t_wire + bump, e.t_hold, e.t_setup)
    after, _, _ = max_clock(graph(*es))
    assert after >= before


@settings(max_examples=200, deadline=None)
@given(edges, st.integers(1, 5000), st.integers(0, 80_000))
def test_slacks_affine_in_wire(e, dw, t_clk):
    e2 = Edge(e.t1, e.t2, e.t_delay, e.t_wire + dw, e.t_hold, e.t_setup)
    assert hold_slack(e2) - hold_slack(e) == dw
    assert setup_slack(e2, None, t_clk) - setup_slack(e, None, t_clk) == -dw


def test_window_example():
    e = edge(0, 3, 6, 0, hold=1, setup=2)
    assert wire_delay_window(e, None, P(20)) == (0, P(15))


def test_window_symmetric_edge():
    e = edge(2, 2, 6, 0, hold=7, setup=2)
    assert wire_delay_window(e, None, BOUND) == (P(1), BOUND - P(8))


def test_window_infeasible():
    e = edge(0, 10, 6, 0, hold=3, setup=5)
    with pytest.raises(InfeasibleWindowError):
        wire_delay_window(e, None, P(5))


@settings(max_examples=300, deadline=None)
@given(edges, st.integers(0, 90_000))
def test_window_endpoints_are_slack_roots(e, t_clk):
    try:
        lo, hi = wire_delay_window(e, None, t_clk)
    except InfeasibleWindowError as err:
        lo, hi = err.lo, err.hi
        assert lo > hi
        return

    def at(w):
        return Edge(e.t1, e.t2, e.t_delay, w, e.t_hold, e.t_setup)

    assert hold_slack(at(lo)) >= 0
    if lo > 0:
        assert hold_slack(at(lo)) == 0 and hold_slack(at(lo - 1)) < 0
    assert setup_slack(at(hi), None, t_clk) == 0
    assert setup_slack(at(hi + 1), None, t_clk) < 0


@pytest.mark.parametrize("t_in, t_clock, gap, regime", [
    (2, 5, 3, "input-first"),
    (5, 5, 0, "boundary"),
    (7, 5, -2, "violated"),
])
def test_io_regimes(t_in, t_clock, gap, regime):
    r = io_regime(P(t_in), P(t_clock))
    assert r.gap == P(gap) and r.regime == regime
    assert r.difference == P(abs(gap))
    assert r.flagged == (regime != "input-first")


def test_path_wire_delay_examples():
    tech = default_technology()
    assert path_wire_delay([WidgetKind.JTL2] * 4, tech) == P(16.0)
    ptl = [WidgetKind.DRIVER] + [WidgetKind.MSL] * 5 + [WidgetKind.RECEIVER]
    assert path_wire_delay(ptl, tech) == P(19.0)
    assert path_wire_delay([], tech) == 0
    with pytest.raises(ValueError):
        path_wire_delay([WidgetKind.JTL2, None], tech)


def test_path_wire_delay_on_routed_tree():
    from conftest import commit, single_layer_map
    tech = default_technology()
    r = straight_net(1, 6)
    commit(r, single_layer_map(10, 6), tech)
    # interior nodes only; end nodes sit on the gate ports
    assert path_wire_delay(r, tech, sink=0) == sum(r.node_delay(c, tech.delays) for c in r.sink_path(0))
    assert path_wire_delay(r, tech) == {0: path_wire_delay(r, tech, sink=0)}


def _chain2():
    return make_design([("a", "DFF", 2, 2), ("b", "DFF", 9, 2), ("tap", "CTAP", 5, 6)],
                       [{"name": "d", "source": "a.q", "sinks": ["b.d"]},
                        {"name": "clk0", "kind": "clock_tree", "level": 0, "source": "tap.q",
                         "sinks": ["a.clk", "b.clk"]}], (14, 10))


def test_analyze_routed_design():
    d = _chain2()
    rmap, res = route(d)
    assert res.failed == []
    g, rep = analyze(d, res.routed)
    assert len(g.edges) == 1
    e = g.edges[0]
    assert (e.driver, e.receiver, e.net) == ("a", "b", "d")
    assert set(g.clock_arrival) >= {"a", "b"}
    assert rep.t_clk == max(BOUND, edge_clock_need(e))
    assert rep.hold == [hold_slack(e)]
    doc = rep.to_dict()
    assert doc["hold_violations"] == rep.hold_violations
    assert doc["t_clk_ps"] == rep.t_clk / 1000


def test_slack_report_at_explicit_clock():
    e = edge(0, 3, 6, 5, hold=1, setup=2)
    rep = slack_report(graph(e), P(20))
    assert rep.setup == [P(10)] and rep.t_clk == max(BOUND, edge_clock_need(e))
    assert rep.worst_hold == P(7) and rep.hold_violations == 0
