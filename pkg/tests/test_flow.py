import json

import pytest

from sfqroute.benches import BENCH_NAMES
from sfqroute.cli import main
from sfqroute.flow import (EXIT_CONFIG, EXIT_OK, OUTPUT_FILES, FlowConfig, FlowError, emit_report,
                           run_flow)
from sfqroute.techlib import default_technology_dict, emit_technology, default_technology
from sfqroute.timing import frequency_ghz, max_clock
from sfqroute.validate import recount_timing, validate_map


def _cfg(paths, out=None, **kw):
    return FlowConfig(placement=str(paths["placement"]), netlist=str(paths["netlist"]),
                      out=None if out is None else str(out), **kw)


def test_chain2_report(bench_flows):
    rep = bench_flows["chain2"].report
    assert rep.post_hold_violations == 0
    assert rep.post_t_clk_ps == 13.2
    assert rep.post_frequency_ghz == frequency_ghz(13200)


def test_c17_five_over_zero(bench_flows):
    rep = bench_flows["c17"].report
    assert (rep.pre_hold_violations, rep.post_hold_violations) == (5, 0)
    assert "5/0" in emit_report(rep, "text")


@pytest.mark.parametrize("name", BENCH_NAMES)
def test_outputs_written(bench_flows, name):
    res = bench_flows[name]
    assert res.exit_code == EXIT_OK
    assert sorted(res.files) == sorted(OUTPUT_FILES)
    for path in res.files.values():
        with open(path) as fh:
            assert fh.read()


@pytest.mark.parametrize("name", BENCH_NAMES)
def test_junctions_match_manifest(bench_flows, name):
    res = bench_flows[name]
    with open(res.files["widgets_manifest.json"]) as fh:
        man = json.load(fh)
    gates = sum(i.model.junctions for i in res.design.instances.values())
    assert res.report.pre_junctions == gates
    assert res.report.post_junctions == gates + man["junction_total"]


@pytest.mark.parametrize("name", BENCH_NAMES)
def test_frequency_is_max_clock(bench_flows, name):
    res = bench_flows[name]
    t, ghz, _ = max_clock(res.state.graph())
    assert res.report.post_t_clk_ps == t / 1000
    assert res.report.post_frequency_ghz == ghz
    with open(res.files["slack_report.json"]) as fh:
        slack = json.load(fh)
    assert slack["frequency_ghz"] == ghz and slack["hold_violations"] == 0


@pytest.mark.parametrize("name", BENCH_NAMES)
def test_recount_and_map_check(bench_flows, name):
    res = bench_flows[name]
    assert validate_map(res.rmap, res.state.routed).ok
    _, rep = recount_timing(res.script, res.design, res.state.tech)
    assert rep.hold_violations == res.report.post_hold_violations


def test_unreadable_placement(tmp_path, bench_dir):
    out = tmp_path / "out"
    cfg = FlowConfig(placement=str(tmp_path / "missing.json"), netlist=str(bench_dir["chain"]["netlist"]),
                     out=str(out))
    with pytest.raises(FlowError) as e:
        run_flow(cfg)
    assert e.value.stage == "load" and e.value.exit_code == EXIT_CONFIG
    assert not out.exists()


def test_empty_design_reports_zeros(tmp_path):
    (tmp_path / "p.json").write_text('{"design": "empty", "grid": [6, 6], "instances": []}')
    (tmp_path / "n.json").write_text('{"nets": []}')
    res = run_flow(FlowConfig(placement=str(tmp_path / "p.json"), netlist=str(tmp_path / "n.json")))
    d = res.report.to_dict(runtime=False)
    d.pop("design")
    assert all(v == 0 for v in d.values())


def test_mode_and_tech_file(tmp_path, bench_dir):
    tech = tmp_path / "tech.json"
    tech.write_text(emit_technology(default_technology("nb03")))
    a = run_flow(_cfg(bench_dir["adder"], tech=str(tech)))
    b = run_flow(_cfg(bench_dir["adder"], mode="nb03"))
    assert a.script == b.script
    c = run_flow(_cfg(bench_dir["adder"], tech=str(tech), mode="nb04"))
    assert len(c.state.tech.layers) == 4 and c.exit_code == EXIT_OK


def test_bad_tech_is_config_error(tmp_path, bench_dir):
    doc = default_technology_dict()
    doc["layers"] = []
    tech = tmp_path / "tech.json"
    tech.write_text(json.dumps(doc))
    with pytest.raises(FlowError) as e:
        run_flow(_cfg(bench_dir["chain"], tech=str(tech)))
    assert e.value.exit_code == EXIT_CONFIG


# -- command line --------------------------------------------------------------

def test_cli_bench_run(tmp_path, capsys):
    code = main(["--bench", "chain2", "--out", str(tmp_path), "--report", "machine"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["post_t_clk_ps"] == 13.2
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(OUTPUT_FILES)


def test_cli_files(bench_dir, capsys):
    p = bench_dir["c17"]
    code = main(["--placement", str(p["placement"]), "--netlist", str(p["netlist"]), "--seed", "3",
                 "--threads", "2", "--max-ripup", "4", "--mode", "nb03"])
    assert code == EXIT_OK
    assert "Hold violations pre/post" in capsys.readouterr().out


def test_cli_config_errors(tmp_path, capsys):
    assert main(["--placement", str(tmp_path / "nope.json"), "--netlist", str(tmp_path / "n.json")]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err
    assert main([]) == EXIT_CONFIG
    assert main(["--bench", "chain", "--threads", "0"]) == EXIT_CONFIG
