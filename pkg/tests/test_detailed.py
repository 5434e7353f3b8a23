import dataclasses

import pytest

from sfqroute.benches import BENCH_NAMES, bench_texts
from sfqroute.design import load_design
from sfqroute.detailed import (DetailedState, OptimizerConfig, ResidueTable, _bridges,
                               balance_subtree, clock_delay_budget, fix_hold, format_log,
                               optimize_io, retime_clock, run_detailed, segment_order,
                               shorten_segment)
from sfqroute.grid import GridCoord, RouteMap
from sfqroute.techlib import UPGRADE, WidgetKind, default_technology, ps_to_fs
from sfqroute.timing import hold_slack, io_slack
from sfqroute.tree import UNCHANGEABLE

from conftest import (commit, delays_ps, make_design, route, routed_state, single_layer_map,
                      straight_net, tree_from_paths)

G = GridCoord
P = ps_to_fs
NB03 = default_technology("nb03")
NB04 = default_technology("nb04")


def bare_state(rnet, tech=NB03, rmap=None):
    rmap = rmap or single_layer_map(16, 10)
    commit(rnet, rmap, tech)
    return DetailedState(None, rmap, {rnet.net.name: rnet}, tech)


# -- segment order ---------------------------------------------------------

def _line(a, b):
    (x0, y0), (x1, y1) = a, b
    if x0 == x1:
        step = 1 if y1 > y0 else -1
        return [G(x0, y) for y in range(y0, y1 + step, step)]
    step = 1 if x1 > x0 else -1
    return [G(x, y0) for x in range(x0, x1 + step, step)]


def _poly(*pts):
    out = [G(*pts[0])]
    for a, b in zip(pts, pts[1:]):
        out += _line(a, b)[1:]
    return out


def fig13_tree():
    """Trunk, then {0,1,2} | {3}; {0,1,2} -> {0} | {1,2}; {1,2} -> {1} | {2}."""
    return tree_from_paths([
        _poly((0, 5), (5, 5), (5, 8)),
        _poly((0, 5), (7, 5), (7, 7)),
        _poly((0, 5), (9, 5)),
        _poly((0, 5), (3, 5), (3, 2)),
    ])


def test_fig13_segment_sequence():
    got = [s.label for s in segment_order(fig13_tree())]
    assert got == [(0,), (1,), (2,), (3,), (1, 2), (0, 1, 2), (0, 1, 2, 3)]


def test_single_fanout_one_segment():
    r = straight_net(1, 6)
    segs = segment_order(r)
    assert len(segs) == 1 and segs[0].label == (0,)
    assert segs[0].nodes == r.sink_path(0)


def test_balanced_four_leaf_tree():
    r = tree_from_paths([
        _poly((0, 4), (2, 4), (2, 6), (4, 6), (4, 7)),
        _poly((0, 4), (2, 4), (2, 6), (4, 6), (4, 5)),
        _poly((0, 4), (2, 4), (2, 2), (4, 2), (4, 3)),
        _poly((0, 4), (2, 4), (2, 2), (4, 2), (4, 1)),
    ])
    labels = [s.label for s in segment_order(r)]
    # oracle: sort by (cardinality, smallest sink)
    want = sorted({(0,), (1,), (2,), (3,), (0, 1), (2, 3), (0, 1, 2, 3)}, key=lambda l: (len(l), l[0]))
    assert labels == want
    assert labels[:4] == [(0,), (1,), (2,), (3,)] and labels[-1] == (0, 1, 2, 3)


def test_segments_partition_tree_and_stay_local():
    r = fig13_tree()
    st = bare_state(r, rmap=single_layer_map(12, 10))
    segs = segment_order(r)
    seen = [c for s in segs for c in s.nodes]
    assert sorted(seen) == sorted(r.nodes())
    for s in segs:
        before = dict(r.delays)
        c = next(c for c in s.nodes if r.changeable(c))
        st.set_kind(r, c, WidgetKind.JTL3, "test")
        changed = {i for i in r.delays if r.delays[i] != before[i]}
        assert changed == set(s.label)


# -- fix_hold ----------------------------------------------------------------

def test_fix_hold_one_upgrade_for_one_and_a_half_ps():
    r = straight_net(1, 9)
    st = bare_state(r)
    res = ResidueTable(r, {0: r.delays[0] + P(1.5)})
    assert fix_hold(st, r, res) == {}
    assert len(st.log) == 1
    assert (st.log[0].old, st.log[0].new, st.log[0].delta) == (WidgetKind.JTL2.value, WidgetKind.JTL3.value, P(1.5))


def test_fix_hold_noop_without_violation():
    r = straight_net(1, 9)
    st = bare_state(r)
    assert fix_hold(st, r, ResidueTable(r, {0: r.delays[0]})) == {}
    assert st.log == []


def test_fix_hold_capacity_shortfall():
    r = straight_net(1, 5)
    st = bare_state(r)
    d = NB03.delays
    upgradable = sum(1 for c in r.nodes() if r.changeable(c) and r.kind[c] in UPGRADE)
    capacity = upgradable * (d.t_jtl4 - d.t_jtl2)
    needed = capacity + P(2.0)
    short = fix_hold(st, r, ResidueTable(r, {0: r.delays[0] + needed}))
    assert short == {0: needed - capacity}
    assert all(r.kind[c] is WidgetKind.JTL4 for c in r.nodes())


def test_fix_hold_skips_unchangeable():
    r = straight_net(1, 9)
    st = bare_state(r)
    for c in r.sink_path(0)[2:5]:
        r.kind[c] = WidgetKind.CROSS
    res = ResidueTable(r, {0: r.delays[0] + P(100)})
    fix_hold(st, r, res)
    touched = {s.coord for s in st.log}
    assert not touched & set(r.sink_path(0)[2:5])


# -- shorten -------------------------------------------------------------------

def test_shorten_seven_node_run_to_ptl():
    r = straight_net(1, 9)
    st = bare_state(r)
    run = r.sink_path(0)[1:-1]
    assert len(run) == 7 and sum(r.node_delay(c, NB03.delays) for c in run) == P(28.0)
    res = ResidueTable(r, {0: 0})
    got = shorten_segment(st, r, segment_order(r)[0], res)
    assert got == P(28.0) - P(19.0)
    assert [r.kind[c] for c in run] == [WidgetKind.DRIVER] + [WidgetKind.MSL] * 5 + [WidgetKind.RECEIVER]
    assert sum(r.node_delay(c, NB03.delays) for c in run) == P(19.0)
    assert r.delays == r.recompute_delays(NB03.delays)


def test_shorten_short_run_uses_long_jtl_only():
    r = straight_net(1, 6)
    st = bare_state(r)
    run = r.sink_path(0)[1:-1]
    assert len(run) == 4
    got = shorten_segment(st, r, segment_order(r)[0], ResidueTable(r, {0: 0}))
    new = {s.new for s in st.log}
    assert new == {WidgetKind.LONGJTL.value}
    assert got == 4 * (NB03.delays.t_jtl2 - NB03.delays.t_longjtl)


def test_shorten_zero_headroom_is_noop():
    r = straight_net(1, 9)
    st = bare_state(r)
    assert shorten_segment(st, r, segment_order(r)[0], ResidueTable(r, {0: r.delays[0]})) == 0
    assert st.log == []


def test_shorten_respects_min_wire():
    r = straight_net(1, 12)
    st = bare_state(r)
    lo = r.delays[0] - P(7.0)
    shorten_segment(st, r, segment_order(r)[0], ResidueTable(r, {0: lo}))
    assert r.delays[0] >= lo
    assert r.delays[0] < lo + P(7.0)


def test_shorten_reroutes_onto_ptl_layer():
    r = straight_net(1, 9, y=3)
    rmap = RouteMap(16, 10, NB04.layers)
    st = bare_state(r, NB04, rmap)
    got = shorten_segment(st, r, segment_order(r)[0], ResidueTable(r, {0: 0}))
    assert got > 0
    path = r.sink_path(0)
    ks = [r.kind[c] for c in path]
    assert ks.count(WidgetKind.DRIVER) == 1 and ks.count(WidgetKind.RECEIVER) == 1
    assert WidgetKind.MSL in ks and WidgetKind.VIA in ks
    msl_layers = {c.layer for c in path if r.kind[c] is WidgetKind.MSL}
    assert msl_layers <= set(NB04.ptl_only_layers)
    assert r.delays == r.recompute_delays(NB04.delays)
    assert [c for c in path if c.layer == 0][0] == G(1, 3)


# -- clock tree ---------------------------------------------------------------

CLK = delays_ps(t_jtl2=3.0, t_jtl3=4.5, t_jtl4=6.0, t_split=1.0)


def _two_branch(short_len, long_len):
    """Splitter at the source; branch nodes of JTL2 only."""
    return tree_from_paths([
        _poly((0, 4), (0, 4 + short_len)),
        _poly((0, 4), (long_len, 4)),
    ])


def _clk_state(r, spare_on_short):
    tech = dataclasses.replace(NB03, delays=CLK)
    st = bare_state(r, tech)
    short_nodes = r.sink_path(0)[1:]
    for c in short_nodes[spare_on_short:]:
        r.kind[c] = WidgetKind.CROSS          # same delay, not changeable
    r.refresh_delays(CLK)
    return st


def test_balance_ten_and_thirteen():
    r = _two_branch(3, 4)
    st = _clk_state(r, 1)
    assert (r.delays[0], r.delays[1]) == (P(10), P(13))
    assert balance_subtree(st, r) == 0
    assert r.delays[0] == r.delays[1] == P(13)


def test_balance_capacity_limited():
    r = _two_branch(3, 5)
    st = _clk_state(r, 1)
    assert (r.delays[0], r.delays[1]) == (P(10), P(16))
    assert balance_subtree(st, r) == P(6) - P(3)


def test_balance_already_balanced():
    r = _two_branch(4, 4)
    st = _clk_state(r, 4)
    assert balance_subtree(st, r) == 0 and st.log == []


# -- retime ---------------------------------------------------------------------

def test_clock_delay_budget():
    assert clock_delay_budget([P(8)], [P(2)]) == P(3)
    assert clock_delay_budget([P(4)], [P(4)]) == 0
    assert clock_delay_budget([P(1)], [P(5)]) == 0
    assert clock_delay_budget([], [P(1)]) == 0


def _crossing(g, level):
    return [e for e in g.edges if g.level.get(e.driver, 0) < level <= g.level.get(e.receiver, 0)]


@pytest.mark.parametrize("name", BENCH_NAMES)
def test_bridge_shortened_or_reported(name):
    tech = default_technology()
    st = routed_state(load_design(*bench_texts(name), tech))
    g = st.graph()
    short = {br.net.name: br.net.level for br in _bridges(st)
             if min((hold_slack(e) for e in _crossing(g, br.net.level)), default=0) < 0}
    assert short
    v0 = st.score()[0]
    out = retime_clock(st)
    # post-STA: every bridge not reported must have cleared its level
    g = st.graph()
    for net, level in short.items():
        worst = min(hold_slack(e) for e in _crossing(g, level))
        assert worst >= 0 or net in out.infeasible
    assert st.score()[0] <= v0


# -- io -------------------------------------------------------------------------------

IO = delays_ps(t_jtl2=4.0, t_jtl3=5.0, t_jtl4=6.0)


def _io_design(arrival_ps, tech):
    return make_design(
        [("pad", "IN", 2, 3), ("ff", "DFF", 5, 3), ("tap", "CTAP", 5, 7)],
        [{"name": "in", "source": "pad.q", "sinks": ["ff.d"], "arrival": arrival_ps},
         {"name": "clk0", "kind": "clock_tree", "level": 0, "source": "tap.q", "sinks": ["ff.clk"]}],
        (10, 10), tech)


def _io_state(gap_ps):
    tech = dataclasses.replace(NB03, delays=IO)
    probe = _io_design(0.0, tech)
    _, res = route(probe)
    arc = DetailedState(probe, None, res.routed, tech).graph().inputs[0]
    arrival = (arc.t_clock - arc.t_wire) / 1000 - gap_ps
    d = _io_design(arrival, tech)
    rmap, res = route(d)
    return DetailedState(d, rmap, res.routed, tech)


def test_io_gap_six_reduced_to_two():
    st = _io_state(6.0)
    assert len(st.routed["in"].sink_path(0)) == 2
    assert [r.gap for r in io_slack(st.graph())] == [P(6)]
    optimize_io(st)
    assert [r.gap for r in io_slack(st.graph())] == [P(2)]


def test_io_gap_zero_noop():
    st = _io_state(0.0)
    assert optimize_io(st) == 0 and st.log == []


def test_io_never_flips_regime():
    st = _io_state(0.5)
    optimize_io(st)
    rep = io_slack(st.graph())[0]
    assert rep.gap == P(0.5)


# -- whole flow ---------------------------------------------------------------------

def _bench_state(name, **cfg):
    tech = default_technology()
    d = load_design(*bench_texts(name), tech)
    rmap, res = route(d)
    return DetailedState(d, rmap, res.routed, tech, OptimizerConfig(**cfg))


@pytest.mark.parametrize("name", BENCH_NAMES)
def test_run_detailed_clears_violations(name):
    st = _bench_state(name)
    out = run_detailed(st)
    assert out.pre_violations > 0 and out.post_violations == 0
    assert out.post_t_clk <= out.pre_t_clk
    for r in st.routed.values():
        assert r.delays == r.recompute_delays(st.delays)


def test_chain2_reaches_library_bound():
    out = run_detailed(_bench_state("chain2"))
    assert out.post_violations == 0 and out.post_t_clk == P(13.2)


def test_c17_five_to_zero():
    out = run_detailed(_bench_state("c17"))
    assert (out.pre_violations, out.post_violations) == (5, 0)


def test_fixed_point_is_noop():
    st = _bench_state("chain")
    run_detailed(st)
    n = len(st.log)
    again = run_detailed(st)
    assert len(st.log) == n
    assert (again.pre_violations, again.pre_t_clk) == (again.post_violations, again.post_t_clk)


def test_log_is_deterministic():
    a, b = _bench_state("adder", rng_seed=7), _bench_state("adder", rng_seed=7)
    run_detailed(a)
    run_detailed(b)
    assert format_log(a.log) == format_log(b.log)
    assert format_log(a.log).splitlines()[0].split("\t")[0] == "seq"


def test_substitutions_never_touch_fixed_widgets():
    st = _bench_state("srarray")
    fixed = {(n, c) for n, r in st.routed.items() for c, k in r.kind.items() if k in UNCHANGEABLE}
    run_detailed(st)
    for s in st.log:
        assert (s.net, s.coord) not in fixed
