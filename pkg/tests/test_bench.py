import csv
import json

import pytest

from smtbench.bench import (
    AGGREGATE_COLUMNS,
    RUN_COLUMNS,
    BenchConfig,
    BenchConfigError,
    UndefinedMetricError,
    aggregate_path,
    gen_fixture,
    percent_decrease,
    run_macro,
    run_micro,
    stats_path,
)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- the headline metric -------------------------------------------------------


def test_percent_decrease_arithmetic():
    assert percent_decrease(100.0, 90.0) == pytest.approx(10.0)
    assert percent_decrease(250.0, 250.0) == 0.0


def test_percent_decrease_sign_convention():
    # A slower new engine reports a negative decrease.
    assert percent_decrease(100.0, 103.81) == pytest.approx(-3.81)


def test_percent_decrease_rejects_zero_baseline():
    with pytest.raises(UndefinedMetricError):
        percent_decrease(0.0, 5.0)


# -- config validation -----------------------------------------------------------


def test_config_rejects_bad_values():
    with pytest.raises(BenchConfigError):
        BenchConfig(runs=0).validate()
    with pytest.raises(BenchConfigError):
        BenchConfig(engine="warp").validate()
    with pytest.raises(BenchConfigError):
        BenchConfig(k_sweep=(-1,)).validate()
    with pytest.raises(BenchConfigError):
        BenchConfig(filter_mode="swap-only").validate()
    with pytest.raises(BenchConfigError):
        BenchConfig(micro_workload="hot-loop").validate()
    with pytest.raises(BenchConfigError):
        run_micro(BenchConfig())  # no workload chosen
    with pytest.raises(BenchConfigError):
        run_macro(BenchConfig())  # no trace path


# -- micro runner ------------------------------------------------------------------


@pytest.fixture(scope="module")
def micro_report():
    config = BenchConfig(
        micro_workload="seq-update", k_sweep=(4, 16), depth=8, threads=1, runs=3, seed=5
    )
    return run_micro(config)


def test_micro_report_shape(micro_report):
    # 2 ks x 2 engines x 3 timed runs (warm-up excluded)
    assert len(micro_report.rows) == 12
    assert len(micro_report.aggregates) == 4
    assert all(row.run in (1, 2, 3) for row in micro_report.rows)


def test_micro_sanity_roots_match(micro_report):
    for k in (4, 16):
        roots = {row.root_hex for row in micro_report.rows if row.k == k}
        assert len(roots) == 1


def test_micro_counters_stable_across_runs(micro_report):
    for k in (4, 16):
        for engine in ("obu", "two-phase"):
            rows = [r for r in micro_report.rows if r.k == k and r.engine == engine]
            assert len({(r.node_visits, r.hash_invocations) for r in rows}) == 1


def test_micro_percent_on_obu_aggregate_only(micro_report):
    for record in micro_report.aggregates:
        if record.engine == "obu":
            assert record.percent_decrease is not None
        else:
            assert record.percent_decrease is None
    assert set(micro_report.stats["percent_decrease_by_k"]) == {4, 16}


def test_micro_csv_schema(micro_report, tmp_path):
    out = tmp_path / "report.csv"
    micro_report.write_runs_csv(out)
    micro_report.write_aggregates_csv(aggregate_path(out))
    runs = read_csv(out)
    assert tuple(runs[0]) == RUN_COLUMNS
    assert len(runs) == 1 + len(micro_report.rows)
    agg = read_csv(aggregate_path(out))
    assert tuple(agg[0]) == AGGREGATE_COLUMNS
    assert aggregate_path(out).name == "report_agg.csv"
    assert stats_path(out).name == "report_stats.json"


def test_micro_single_engine_has_no_percent():
    config = BenchConfig(
        engine="obu", micro_workload="seq-insert", k_sweep=(8,), depth=8, threads=1, runs=2
    )
    report = run_micro(config)
    assert len(report.rows) == 2
    assert report.aggregates[0].percent_decrease is None
    assert report.stats["percent_decrease_by_k"] == {}


def test_micro_rand_update_and_insert_workloads_run():
    for workload in ("rand-update", "seq-insert"):
        config = BenchConfig(
            micro_workload=workload, k_sweep=(6,), depth=8, threads=1, runs=2, seed=3
        )
        report = run_micro(config)
        roots = {row.root_hex for row in report.rows}
        assert len(roots) == 1


# -- macro runner ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_trace(tmp_path_factory):
    path = tmp_path_factory.mktemp("traces") / "hot.json"
    gen_fixture("hot", path, k=6, blocks=4)
    return path


def test_macro_report_shape(small_trace):
    config = BenchConfig(trace_path=small_trace, depth=10, threads=1, runs=2)
    report = run_macro(config)
    assert report.stats["blocks"] == 4
    # per block: 2 engines x 2 runs
    assert len(report.rows) == 4 * 2 * 2
    assert len(report.aggregates) == 4 * 2
    for name in ("mean", "median", "stddev", "variance", "min", "max", "range"):
        assert name in report.stats["percent_decrease"]
        assert name in report.stats["nanos_reduction"]
    ks = {row.k for row in report.rows}
    assert ks == {1, 2, 3, 4}  # block numbers surface in the k column


def test_macro_roots_agree_per_block(small_trace):
    config = BenchConfig(trace_path=small_trace, depth=10, threads=1, runs=2)
    report = run_macro(config)
    for block in (1, 2, 3, 4):
        roots = {row.root_hex for row in report.rows if row.k == block}
        assert len(roots) == 1
    # state advances between blocks
    assert len({row.root_hex for row in report.rows}) == 4


def test_macro_filter_mode(small_trace, tmp_path):
    config = BenchConfig(
        trace_path=small_trace, depth=10, threads=1, runs=1, filter_mode="transfer-swap"
    )
    report = run_macro(config)
    assert report.workload == "macro-transfer-swap"
    out = tmp_path / "macro.csv"
    report.write_stats_json(stats_path(out))
    doc = json.loads(stats_path(out).read_text())
    assert doc["kind"] == "macro"
    assert doc["stats"]["blocks"] == 4
    assert "environment" in doc


def test_macro_rejects_trace_without_transfers(tmp_path):
    from smtbench.workload import BlockTrace, TxRecord, TxType, write_block_traces

    path = tmp_path / "cpk.json"
    write_block_traces([BlockTrace(1, (TxRecord(TxType.CHANGE_PUBKEY, 1, None, 0, 0),))], path)
    with pytest.raises(BenchConfigError):
        run_macro(BenchConfig(trace_path=path, filter_mode="transfer-swap", runs=1))


# -- fixture generation -----------------------------------------------------------------


def test_gen_fixture_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    gen_fixture("synthetic100", a, seed=77)
    gen_fixture("synthetic100", b, seed=77)
    assert a.read_bytes() == b.read_bytes()
    gen_fixture("hot", a, k=5, blocks=2)
    gen_fixture("hot", b, k=5, blocks=2)
    assert a.read_bytes() == b.read_bytes()


def test_gen_fixture_rejects_unknown_kind(tmp_path):
    with pytest.raises(BenchConfigError):
        gen_fixture("flood", tmp_path / "x.json")
