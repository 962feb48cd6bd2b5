"""
Tests for rfso.runner.sweep_runner and rfso.runner.result_collector
"""

import json
import logging
import math
import os
import sys
import tempfile

import pytest

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, PROJECT_ROOT)

from rfso.core.errors import ConfigInvalid
from rfso.runner.events import RunEvent
from rfso.runner.metrics.base_metrics import BaseMetric
from rfso.runner.metrics.standard_metrics import TotalTimeMetric
from rfso.runner.result_collector import ResultCollector
from rfso.runner.sweep_runner import (
    SAMPLE_COLUMNS,
    CurvePoint,
    SweepRunner,
    metadata_path,
    read_curve_csv,
    run_sample,
    run_sweep,
    sample_channels,
    sweep_columns,
    write_curve_csv,
)
from rfso.utils.scenario import SweepSpec, load_scenario, validated

SCENARIO_DIR = os.path.join(PROJECT_ROOT, "scenarios")
DEFAULT_SCENARIO = os.path.join(SCENARIO_DIR, "default.json")
THRESHOLD_SCENARIO = os.path.join(SCENARIO_DIR, "fig3_threshold_ceiling.json")

SMALL_SWEEP = {
    "grid": "0:20:10",
    "outputs": ["op_closed", "op_quad", "op_mc", "ec_mc", "ceilings"],
    "trials": 20_000,
}


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_metadata_path():
    assert metadata_path("results/fig1.csv") == "results/fig1.meta.json"
    assert metadata_path("out") == "out.meta.json"


def test_sweep_columns():
    spec = validated(SweepSpec, {"grid": [0.0], "outputs": ["op_mc", "ceilings", "ec_bound"], "trials": 10_000})
    assert sweep_columns(spec) == [
        "variant", "abscissa_db", "op_mc", "op_mc_hw", "op_mc_reliable", "sndr_ceiling", "capacity_ceiling", "ec_bound",
    ]


def test_curve_csv_round_trip():
    """Empty cells read back as None; floats keep all their digits"""
    points = [
        CurvePoint("a", 0.0, {"op_quad": 0.1 + 0.2, "sndr_ceiling": math.inf}),
        CurvePoint("a", 2.5, {"op_quad": None, "sndr_ceiling": 12.254901960784315}),
    ]
    columns = ["variant", "abscissa_db", "op_quad", "sndr_ceiling"]
    with tempfile.TemporaryDirectory() as tmpdir:
        path = write_curve_csv(points, columns, os.path.join(tmpdir, "nested", "curve.csv"))
        read_columns, read_points = read_curve_csv(path)
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().strip()
    assert header == "variant,abscissa_db,op_quad,sndr_ceiling"
    assert read_columns == columns
    assert read_points[0].values["op_quad"] == 0.1 + 0.2
    assert read_points[0].values["sndr_ceiling"] == math.inf
    assert read_points[1].values["op_quad"] is None
    assert read_points[1].abscissa_db == 2.5


def test_rare_outage_points_are_flagged():
    """An OP estimate resting on a handful of events is marked unreliable in the table"""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "rare.csv")
        run_sweep(DEFAULT_SCENARIO, out, grid=[-10.0, 40.0], outputs=["op_mc"], trials=10_000, gamma_th_db=-20.0)
        columns, points = read_curve_csv(out)
        with open(out, "r", encoding="utf-8") as f:
            rows = f.read().splitlines()
    assert columns == ["variant", "abscissa_db", "op_mc", "op_mc_hw", "op_mc_reliable"]
    common, rare = points
    assert common.values["op_mc"] * 10_000 >= 10 and common.values["op_mc_reliable"] is True
    assert rare.values["op_mc"] * 10_000 < 10, f"expected a rare event at 40 dB, got {rare.values['op_mc']}"
    assert rare.values["op_mc_reliable"] is False
    assert rows[1].endswith(",1") and rows[2].endswith(",0"), rows


def test_flag_cells_round_trip():
    """Flags are written as 1/0 and read back as booleans; empty stays None"""
    points = [
        CurvePoint("a", 0.0, {"op_mc": 0.5, "op_mc_reliable": True}),
        CurvePoint("a", 1.0, {"op_mc": 1e-4, "op_mc_reliable": False}),
        CurvePoint("a", 2.0, {"op_mc": None, "op_mc_reliable": None}),
    ]
    columns = ["variant", "abscissa_db", "op_mc", "op_mc_reliable"]
    with tempfile.TemporaryDirectory() as tmpdir:
        _, read_points = read_curve_csv(write_curve_csv(points, columns, os.path.join(tmpdir, "flags.csv")))
    assert [p.values["op_mc_reliable"] for p in read_points] == [True, False, None]


def test_run_sweep_outputs():
    """A small sweep writes one row per grid value and a populated sidecar"""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "default.csv")
        result = run_sweep(DEFAULT_SCENARIO, out, **SMALL_SWEEP)
        assert result.csv_path == out and os.path.exists(out)
        assert result.meta_path == metadata_path(out) and os.path.exists(result.meta_path)
        assert result.failed_cells == 0

        columns, points = read_curve_csv(out)
        assert columns == [
            "variant", "abscissa_db", "op_closed", "op_quad", "op_mc", "op_mc_hw", "op_mc_reliable",
            "ec_mc", "ec_mc_hw", "sndr_ceiling", "capacity_ceiling",
        ]
        assert [p.abscissa_db for p in points] == [0.0, 10.0, 20.0]
        assert {p.variant for p in points} == {"default"}
        for point in points:
            assert abs(point.values["op_closed"] - point.values["op_quad"]) <= 1e-5
            assert abs(point.values["op_mc"] - point.values["op_quad"]) <= 3.0 * point.values["op_mc_hw"] + 1e-4
            assert point.values["sndr_ceiling"] == pytest.approx(1.0 / 0.0201)
            assert point.values["op_mc_reliable"] is (point.values["op_mc"] * 20_000 >= 10)
        ops = [p.values["op_quad"] for p in points]
        assert ops[0] > ops[1] > ops[2]

        with open(result.meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    metadata = meta["metadata"]
    assert metadata["tool"] == "rfso-relay"
    assert metadata["command"] == "sweep"
    assert metadata["seed"] == 1 and metadata["trials"] == 20_000
    assert metadata["sweep"]["grid"] == [0.0, 10.0, 20.0]
    assert "default" in metadata["resolved_links"]
    assert metadata["failed_cells"] == 0
    counts = meta["computed_metrics"]["point_counts"]
    assert counts["op_mc"]["evaluated"] == 3 and counts["op_mc"]["failed"] == 0
    assert meta["computed_metrics"]["error_summary"]["total_error_count"] == 0
    assert meta["computed_metrics"]["wall_time_seconds"] is not None
    assert [e["event_type"] for e in meta["raw_events"]][0] == "RUN_START"
    print("✓ sweep output test passed")


def test_sweep_is_deterministic():
    """Same scenario and seed give byte-identical tables for any worker count"""
    with tempfile.TemporaryDirectory() as tmpdir:
        paths = []
        for index, workers in enumerate((1, 1, 3)):
            out = os.path.join(tmpdir, f"run{index}.csv")
            run_sweep(DEFAULT_SCENARIO, out, workers=workers, **SMALL_SWEEP)
            paths.append(out)
        first = _read_bytes(paths[0])
        assert first == _read_bytes(paths[1])
        assert first == _read_bytes(paths[2])

        reseeded = os.path.join(tmpdir, "reseeded.csv")
        run_sweep(DEFAULT_SCENARIO, reseeded, seed=2, **SMALL_SWEEP)
        assert _read_bytes(reseeded) != first


def test_failed_evaluator_leaves_empty_cells():
    """An unsupported closed form empties its cells while the other outputs still run"""
    overrides = {"optical": {"beta1": 1.2, "beta2": 1.8, "k": None, "l": None}}
    with tempfile.TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "partial.csv")
        result = run_sweep(
            DEFAULT_SCENARIO, out, overrides=overrides,
            grid=[10.0, 20.0], outputs=["op_closed", "op_quad", "ec_bound", "ceilings"],
        )
        assert result.failed_cells == 4
        _, points = read_curve_csv(out)
        for point in points:
            assert point.values["op_closed"] is None and point.values["ec_bound"] is None
            assert 0.0 < point.values["op_quad"] < 1.0
        with open(result.meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    errors = meta["computed_metrics"]["error_summary"]
    assert errors["total_error_count"] == 4
    assert errors["errors_by_output"]["op_closed"]["count"] == 2
    assert errors["errors_by_output"]["op_closed"]["errors"][0]["details"]["error_type"] == "UnsupportedParameters"
    counts = meta["computed_metrics"]["point_counts"]
    assert counts["op_quad"]["evaluated"] == 2 and counts["op_quad"]["failed"] == 0
    assert counts["op_closed"]["evaluated"] == 0 and counts["op_closed"]["failed"] == 2


def test_ideal_hardware_ceilings_are_infinite():
    with tempfile.TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "ideal.csv")
        run_sweep(DEFAULT_SCENARIO, out, overrides={"impairments": {"kappa1": 0.0, "kappa2": 0.0}},
                  grid=[20.0], outputs=["ceilings"])
        _, points = read_curve_csv(out)
    assert points[0].values == {"sndr_ceiling": math.inf, "capacity_ceiling": math.inf}


def test_threshold_sweep_hits_ceiling():
    """On the threshold axis OP reaches 1 within one grid step above 10·log₁₀(1/δ)"""
    grid = [4.5, 4.55, 4.6, 4.65, 4.7, 7.15, 7.2, 7.25, 7.3, 10.8, 10.85, 10.9, 10.95]
    anchors = {"kappa0.2": 10.88, "kappa0.3": 7.26, "kappa0.4": 4.61}
    with tempfile.TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "threshold.csv")
        run_sweep(THRESHOLD_SCENARIO, out, grid=grid, outputs=["op_quad", "ceilings"])
        _, points = read_curve_csv(out)
    for variant, anchor in anchors.items():
        curve = [p for p in points if p.variant == variant]
        assert len(curve) == len(grid)
        ceiling_db = 10.0 * math.log10(curve[0].values["sndr_ceiling"])
        assert ceiling_db == pytest.approx(anchor, abs=0.01)
        first_saturated = next(p.abscissa_db for p in curve if p.values["op_quad"] == 1.0)
        assert 0.0 < first_saturated - anchor <= 0.05, f"{variant}: OP reaches 1 at {first_saturated} dB"
        assert all(p.values["op_quad"] < 1.0 for p in curve if p.abscissa_db < ceiling_db)
        ops = [p.values["op_quad"] for p in curve]
        assert all(b >= a for a, b in zip(ops, ops[1:])), f"{variant}: OP must not decrease with γ_th"
    print("✓ threshold ceiling test passed")


def test_sweep_configuration_errors():
    """Bad sweep requests fail before any evaluation"""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "never.csv")
        with pytest.raises(ConfigInvalid):
            run_sweep(DEFAULT_SCENARIO, out, outputs=[])
        with pytest.raises(ConfigInvalid):
            run_sweep(DEFAULT_SCENARIO, out, grid="10:0:1")
        with pytest.raises(ConfigInvalid):
            run_sweep(DEFAULT_SCENARIO, out, outputs=["op_mc"], trials=100)
        with pytest.raises(ConfigInvalid) as info:
            run_sweep(DEFAULT_SCENARIO, out, overrides={"sweep": None})
        assert "sweep" in info.value.messages[0]
        assert not os.path.exists(out)


def test_sweep_runner_records_events():
    """The runner reports one event per (point, output) to the collector"""
    scenario = load_scenario(DEFAULT_SCENARIO)
    spec = validated(SweepSpec, {"grid": [10.0, 20.0], "outputs": ["op_quad", "ceilings"]})
    collector = ResultCollector(logger=logging.getLogger("test"))
    collector.start_session("unit", {"command": "test"})
    runner = SweepRunner(collector=collector, run_id="unit", workers=2)
    points = runner.run(scenario.variant_configs(), spec)
    assert [p.abscissa_db for p in points] == [10.0, 20.0]
    collector.end_session("unit")
    results = collector.get_results("unit")
    evaluated = [e for e in results["raw_events"] if e["event_type"] == RunEvent.POINT_EVALUATED.name]
    assert len(evaluated) == 4
    assert results["computed_metrics"]["point_counts"]["ceilings"]["evaluated"] == 2


def test_collector_session_lifecycle():
    """Metrics are reset per session and the record saves as JSON"""
    collector = ResultCollector()
    collector.start_session("r", {"seed": 3})
    collector.record_event("r", RunEvent.RUN_START, {"command": "validate", "timestamp": 100.0})
    collector.record_event("r", RunEvent.CHECK_COMPLETED, {"quantity": "q1", "status": "PASS", "delta": 0.0, "tolerance": 1.0})
    collector.record_event("r", RunEvent.CHECK_COMPLETED, {"quantity": "q2", "status": "FAIL", "delta": 2.0, "tolerance": 1.0})
    collector.record_event("r", RunEvent.RUN_END, {"status": "failure", "reason": "agreement", "timestamp": 101.5})
    collector.end_session("r", {"passed": False})
    results = collector.get_results("r")
    metrics = results["computed_metrics"]
    assert metrics["wall_time_seconds"] == 1.5
    assert metrics["agreement"]["checks"] == 2
    assert metrics["agreement"]["by_status"] == {"PASS": 1, "FAIL": 1}
    assert metrics["agreement"]["failures"][0]["quantity"] == "q2"
    assert metrics["error_summary"]["errors_by_output"]["run"]["count"] == 1
    assert results["metadata"]["seed"] == 3 and results["metadata"]["passed"] is False

    with tempfile.TemporaryDirectory() as tmpdir:
        path = collector.save_results("r", os.path.join(tmpdir, "record.json"))
        with open(path, "r", encoding="utf-8") as f:
            assert json.load(f)["metadata"]["seed"] == 3
        assert collector.save_results("unknown", os.path.join(tmpdir, "x.json")) == ""

    collector.start_session("r", {"seed": 4})
    assert collector.get_results("r")["raw_events"] == []
    collector.end_session("r")
    assert collector.get_results("r")["computed_metrics"]["agreement"]["checks"] == 0


def test_metrics_define_their_own_event_handling():
    """A metric must handle events itself; reset clears the wall-time window"""

    class NameOnly(BaseMetric):
        def get_name(self):
            return "name_only"

        def get_value(self):
            return None

    with pytest.raises(TypeError):
        NameOnly()

    metric = TotalTimeMetric()
    metric.process_event(RunEvent.RUN_START, {"timestamp": 10.0})
    metric.process_event(RunEvent.RUN_END, {"timestamp": 12.5})
    assert metric.get_value() == 2.5
    metric.reset()
    assert metric.get_value() is None
    assert not hasattr(metric, "_first_timestamp")


def test_sample_channels():
    """Samples are reproducible and consistent with the SNDR formula"""
    cfg = load_scenario(DEFAULT_SCENARIO).link_config()
    first = sample_channels(cfg, 1000, seed=5)
    again = sample_channels(cfg, 1000, seed=5)
    assert first.gamma1.shape == (1000,)
    assert (first.sndr == again.sndr).all()
    assert (first.sndr < 1.0 / cfg.impairments.delta).all()
    with pytest.raises(ConfigInvalid):
        sample_channels(cfg, 0, seed=5)

    with tempfile.TemporaryDirectory() as tmpdir:
        out = run_sample(DEFAULT_SCENARIO, os.path.join(tmpdir, "samples.csv"), 250, seed=5)
        with open(out, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == ",".join(SAMPLE_COLUMNS)
        assert len(lines) == 251
        assert float(lines[1].split(",")[3]) == sample_channels(cfg, 250, seed=5).sndr[0]
        assert os.path.exists(metadata_path(out))


if __name__ == "__main__":
    test_metadata_path()
    test_sweep_columns()
    test_curve_csv_round_trip()
    test_rare_outage_points_are_flagged()
    test_flag_cells_round_trip()
    test_run_sweep_outputs()
    test_sweep_is_deterministic()
    test_failed_evaluator_leaves_empty_cells()
    test_ideal_hardware_ceilings_are_infinite()
    test_threshold_sweep_hits_ceiling()
    test_sweep_configuration_errors()
    test_sweep_runner_records_events()
    test_collector_session_lifecycle()
    test_metrics_define_their_own_event_handling()
    test_sample_channels()
    print("All sweep runner tests passed")
