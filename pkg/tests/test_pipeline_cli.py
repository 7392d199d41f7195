import json

import pandas as pd
import pytest

from src.cli.main import build_parser, main, sha256_file
from src.core.demand import LinearDemand
from src.core.graph import Edge
from src.core.instance import Instance, save_instance
from src.ingestion.synth import SynthConfig, SynthEdge
from src.pipeline.workflow import compile_pipeline, run_pipeline
from src.solver.programs import SolverConfig
from src.utils.errors import ValidationError

EXACT = ["--grid-size", "1001", "--max-segments", "2000"]


def test_pipeline_compiles():
    graph = compile_pipeline()
    assert {"estimate", "load", "solve", "certify", "simulate", "report"} <= set(graph.get_graph().nodes)


def test_pipeline_from_instance_file(tmp_path, instance_file):
    out = tmp_path / "run"
    final = run_pipeline(str(out), instance_path=str(instance_file), steps=12,
                         config=SolverConfig(grid_size=1001, max_segments=2000))
    assert final["certified"] and final["kkt_passed"]
    assert final["errors"] == []
    assert [s["policy"] for s in final["summaries"]] == ["DYNAM", "SURGE", "FIXED"]
    dynam = final["summaries"][0]
    assert dynam["time_average_revenue"] == pytest.approx(2.0, abs=1e-6)
    for name in ("plan.json", "certificate.json", "kkt.json", "comparison.csv", "revenue_curves.csv", "summary.json"):
        assert (out / name).is_file()
    assert (out / "dynam" / "trace.csv").is_file()


def test_pipeline_needs_exactly_one_source(tmp_path, instance_file):
    with pytest.raises(ValidationError):
        run_pipeline(str(tmp_path), orders_path=None, instance_path=None)
    with pytest.raises(ValidationError):
        run_pipeline(str(tmp_path), orders_path="orders.csv", instance_path=str(instance_file))


def test_parser_requires_a_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_solve_static_writes_results_and_manifest(tmp_path, instance_file, capsys):
    out = tmp_path / "static"
    assert main(["solve-static", str(instance_file), "--out", str(out), *EXACT]) == 0
    for name in ("plan.json", "certificate.json", "solve.json", "marginals.txt"):
        assert (out / name).is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "solve-static"
    assert manifest["inputs"] == {str(instance_file): sha256_file(instance_file)}
    assert "pydantic" in manifest["versions"]
    assert "certified True" in capsys.readouterr().out


def test_kkt_check_accepts_and_rejects(tmp_path, instance_file):
    out = tmp_path / "static"
    assert main(["solve-static", str(instance_file), "--out", str(out), *EXACT]) == 0
    plan, cert = out / "plan.json", out / "certificate.json"
    assert main(["kkt-check", str(instance_file), str(plan), str(cert), "--out", str(tmp_path / "ok")]) == 0
    assert json.loads((tmp_path / "ok" / "kkt.json").read_text())["passed"]

    payload = json.loads(cert.read_text())
    payload["lam"] = [3 * x + 1.0 for x in payload["lam"]]
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(payload))
    assert main(["kkt-check", str(instance_file), str(plan), str(tampered), "--out", str(tmp_path / "bad")]) == 4
    assert (tmp_path / "bad" / "manifest.json").is_file()


def test_invalid_instance_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": ["A"], "edges": []}')
    assert main(["solve-static", str(bad), "--out", str(tmp_path / "out")]) == 2
    assert main(["solve-static", str(tmp_path / "missing.json"), "--out", str(tmp_path / "out")]) == 2


def test_solve_dynamic_with_inline_start(tmp_path, instance_file):
    out = tmp_path / "dynamic"
    args = ["solve-dynamic", str(instance_file), "--horizon", "4", "--w1", '{"A": 0.7, "B": 0.3}',
            "--grid-size", "1001", "--dynamic-max-segments", "40", "--out", str(out)]
    assert main(args) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert plan["mode"] == "dynamic" and plan["horizon"] == 4
    bad = ["solve-dynamic", str(instance_file), "--w1", "[1, 2]", "--out", str(out)]
    assert main(bad) == 2
    pieces = ["solve-dynamic", str(instance_file), "--supply", "soft", "--marginal-cost", "0.5:oops", "--out", str(out)]
    assert main(pieces) == 2


def test_simulate_and_report(tmp_path, instance_file):
    out = tmp_path / "sim"
    assert main(["simulate", str(instance_file), "--policy", "fixed:alpha=0.5", "--out", str(out)]) == 0
    frame = pd.read_csv(out / "trace.csv")
    assert (frame["metric"] == "revenue").sum() == 96

    solved = tmp_path / "static"
    assert main(["solve-static", str(instance_file), "--out", str(solved), *EXACT]) == 0
    both = tmp_path / "both"
    args = ["simulate", str(instance_file), "--policy", f"dynam:plan={solved / 'plan.json'}",
            "--policy", "surge:alpha=3.5", "--certificate", str(solved / "certificate.json"),
            "--steps", "12", "--out", str(both)]
    assert main(args) == 0
    table = pd.read_csv(both / "comparison.csv", index_col="policy")
    assert table.loc["DYNAM", "time_average_revenue"] == pytest.approx(2.0, abs=1e-6)
    manifest = json.loads((both / "manifest.json").read_text())
    assert str(solved / "plan.json") in manifest["inputs"]

    report = tmp_path / "report"
    traces = [str(both / "dynam" / "trace.csv"), str(both / "surge" / "trace.csv")]
    assert main(["report", *traces, "--out", str(report)]) == 0
    assert set(pd.read_csv(report / "comparison.csv")["policy"]) == {"dynam", "surge"}


def test_inspect_writes_envelopes(tmp_path, instance_file):
    out = tmp_path / "inspect"
    assert main(["inspect", str(instance_file), "--grid-size", "101", "--out", str(out)]) == 0
    payload = json.loads((out / "envelopes.json").read_text())
    assert set(payload) == {"AB", "BA"}
    assert payload["AB"][0]["breakpoints"][0] == 0.0


def test_synth_then_estimate(tmp_path):
    synth = tmp_path / "synth"
    assert main(["synth", "--requests", "200", "--seed", "3", "--out", str(synth)]) == 0
    assert main(["estimate", str(synth / "orders.csv"), "--out", str(tmp_path / "est")]) == 0
    instance = json.loads((tmp_path / "est" / "instance.json").read_text())
    assert len(instance["nodes"]) == 5
    assert len(instance["edges"]) == 25
    assert (tmp_path / "est" / "frequency.csv").is_file()
    manifest = json.loads((tmp_path / "est" / "manifest.json").read_text())
    assert str(synth / "orders.csv") in manifest["inputs"]


@pytest.mark.slow
def test_run_from_orders(tmp_path):
    regions = ["R1", "R2", "R3"]
    edges = [
        SynthEdge(origin=o, destination=d, mu_log=2.2 + 0.3 * (0 if o == d else 1), sigma_log=0.45, requests=300)
        for o in regions for d in regions
    ]
    config_path = tmp_path / "synth.json"
    config_path.write_text(SynthConfig(regions=regions, edges=edges).model_dump_json())
    synth = tmp_path / "synth"
    assert main(["synth", "--config", str(config_path), "--out", str(synth)]) == 0
    out = tmp_path / "run"
    args = ["run", "--orders", str(synth / "orders.csv"), "--steps", "12",
            "--grid-size", "200", "--max-segments", "20", "--out", str(out)]
    assert main(args) == 0
    assert (out / "comparison.csv").is_file()
    assert (out / "instance.json").is_file()
    assert json.loads((out / "kkt.json").read_text())["passed"]


def test_simulate_takes_the_period_from_the_certificate(tmp_path):
    curves = [LinearDemand(intercept=1.0, slope=1.0), LinearDemand(intercept=3.0, slope=1.0, volume=1.0)]
    path = tmp_path / "instance.json"
    save_instance(Instance(nodes=["A"], edges=[Edge(id="AA", origin="A", destination="A")], demand={"AA": curves}), path)
    solved = tmp_path / "static"
    assert main(["solve-static", str(path), "--period", "1", "--out", str(solved), *EXACT]) == 0
    out = tmp_path / "sim"
    args = ["simulate", str(path), "--policy", f"dynam:plan={solved / 'plan.json'}",
            "--certificate", str(solved / "certificate.json"), "--steps", "8", "--out", str(out)]
    assert main(args) == 0
    frame = pd.read_csv(out / "trace.csv")
    revenue = frame[frame["metric"] == "revenue"]["value"]
    assert revenue.to_numpy() == pytest.approx([2.0] * 8, abs=1e-6)


def test_synth_imbalance_flag(tmp_path):
    out = tmp_path / "synth"
    assert main(["synth", "--requests", "20", "--imbalance", "0.5", "--out", str(out)]) == 0
    config = SynthConfig.model_validate_json((out / "synth_config.json").read_text())
    requests = {(e.origin, e.destination): e.requests for e in config.edges}
    assert requests[("R2", "R1")] == 30
    assert requests[("R1", "R2")] == 10
    assert main(["synth", "--imbalance", "1.5", "--out", str(out)]) == 2
