import csv
import json

import pytest

from fogvm.experiment import (
    CSV_FIELDS, ExperimentRow, ExperimentSpec, emit_reports, format_table, rows_to_csv, run_experiment, summarize,
)

from conftest import small_topology

RELAXED = small_topology(3, 2, 4, onu_rate_mbps=40_000, onu_power_w=10.0)


def test_row_count_and_order():
    rows, summary = run_experiment(ExperimentSpec(vm_counts=(4,), seeds=tuple(range(1, 21))))
    assert len(rows) == 40
    assert [(r.seed, r.mode) for r in rows[:4]] == [(1, "exact"), (1, "baseline"), (2, "exact"), (2, "baseline")]
    assert summary["groups"][0]["seeds"] == 20


def test_exact_dominates_baseline():
    rows, summary = run_experiment(ExperimentSpec(vm_counts=(6,), seeds=tuple(range(1, 9)), topology=RELAXED))
    by = {(r.seed, r.mode): r for r in rows}
    compared = 0
    for seed in range(1, 9):
        e, b = by[seed, "exact"], by[seed, "baseline"]
        if e.succeeded and b.succeeded:
            assert e.total_w <= b.total_w + 1e-9
            compared += 1
    assert compared == summary["groups"][0]["compared"] > 0


def test_summary_definitions():
    rows = [
        ExperimentRow(10, 1, "exact", 1000.0, 990.0, 10.0, 2, "Optimal", 5),
        ExperimentRow(10, 1, "baseline", 2000.0, 1980.0, 20.0, 4, "Feasible", 0),
        ExperimentRow(10, 2, "exact", 1500.0, 1500.0, 0.0, 3, "Optimal", 5),
        ExperimentRow(10, 2, "baseline", 2000.0, 2000.0, 0.0, 5, "Feasible", 0),
        ExperimentRow(10, 3, "exact", None, None, None, None, "Infeasible", 1),
        ExperimentRow(10, 3, "baseline", None, None, None, None, "Infeasible", 0),
    ]
    (g,) = summarize(rows, [10])["groups"]
    assert (g["compared"], g["excluded"]) == (2, 1)
    assert g["savings"] == pytest.approx(1 - 1250 / 2000)
    assert g["savings_mean_of_ratios"] == pytest.approx((0.5 + 0.25) / 2)
    assert g["mean_active_exact"] == 2.5 and g["mean_active_baseline"] == 4.5
    assert g["exact_status"] == {"Optimal": 2, "Infeasible": 1, "NodeLimit": 0}
    assert "-" in format_table({"groups": [dict(g, savings=None, mean_exact_w=None)]})


def test_header_only_csv(tmp_path):
    path = tmp_path / "results.csv"
    emit_reports([], {"groups": []}, csv_path=path)
    assert path.read_bytes() == (",".join(CSV_FIELDS) + "\r\n").encode()


def test_reports_are_byte_identical(tmp_path):
    spec = ExperimentSpec(vm_counts=(5, 6), seeds=(1, 2, 3), topology=RELAXED)
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        rows, summary = run_experiment(spec)
        emit_reports(rows, summary, d / "results.csv", d / "summary.json", d / "table.txt")
        outputs.append([(d / f).read_bytes() for f in ("results.csv", "summary.json", "table.txt")])
    assert outputs[0] == outputs[1]

    with open(tmp_path / "a" / "results.csv", newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert len(parsed) == 2 * 3 * 2
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert [g["vm_count"] for g in summary["groups"]] == [5, 6]


def test_parallel_matches_serial():
    spec = ExperimentSpec(vm_counts=(5,), seeds=(1, 2, 3, 4), topology=RELAXED)
    serial = rows_to_csv(run_experiment(spec)[0])
    parallel = rows_to_csv(run_experiment(ExperimentSpec(**{**spec.__dict__, "jobs": 2}))[0])
    assert serial == parallel


def test_timings_column_is_opt_in():
    rows = [ExperimentRow(3, 1, "exact", 1.0, 1.0, 0.0, 1, "Optimal", 1, wall_ms=12.5)]
    assert "wall_ms" not in rows_to_csv(rows)
    assert rows_to_csv(rows, timings=True).splitlines()[1].endswith(",12.5")


def test_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="nope"):
        emit_reports([], {"groups": []}, csv_path=tmp_path / "nope" / "results.csv")


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(vm_counts=())
    with pytest.raises(ValueError):
        ExperimentSpec(modes=("greedy",))
