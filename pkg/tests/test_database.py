import pytest

from database import LedgerClient
from models import RunManifest


@pytest.fixture
def ledger():
    client = LedgerClient(":memory:")
    yield client
    client.close()


def _manifest(command: str, outcome: str = "ok", code: int = 0) -> RunManifest:
    return RunManifest(
        command=command,
        seed=7,
        outcome=outcome,
        exit_code=code,
        wall_time=1.23456,
        config={"n_invs": 100},
        inputs={"protocols/ring_counter.gap": "ab" * 32},
        summary={"states": 3},
        artifacts=["out/RingCounter.graph.json"],
    )


# ============================================================
# CORRIDAS
# ============================================================

def test_insert_run_returns_the_row(ledger):
    manifest = _manifest("reach")
    row = ledger.insert_run(manifest, "RingCounter")
    assert row["id"] == manifest.id
    assert row["protocol"] == "RingCounter"
    assert row["seed"] == 7
    assert row["config"] == {"n_invs": 100}
    assert row["summary"] == {"states": 3}
    assert row["artifacts"] == ["out/RingCounter.graph.json"]


def test_filter_runs_by_command(ledger):
    ledger.insert_run(_manifest("reach"))
    ledger.insert_run(_manifest("infer", "partial", 3))
    ledger.insert_run(_manifest("infer"))
    assert len(ledger.get_runs()) == 3
    infer = ledger.get_runs("infer")
    assert {r["outcome"] for r in infer} == {"ok", "partial"}
    assert len(ledger.get_runs(limit=1)) == 1


def test_missing_run(ledger):
    assert ledger.get_run("00000000-0000-0000-0000-000000000000") is None


# ============================================================
# ESTADÍSTICAS POR NODO
# ============================================================

def test_node_stats(ledger):
    manifest = _manifest("infer")
    ledger.insert_run(manifest)
    rows = [
        {"lemma": "OnlyA", "action": "MoveCA", "status": "proven", "slice_size": 3, "ctis_generated": 1},
        {"lemma": "OnlyA", "action": "MoveAB", "status": "proven", "provenance": "exhaustive"},
    ]
    assert ledger.insert_node_stats(manifest.id, rows) == 2
    assert ledger.insert_node_stats(manifest.id, []) == 0
    stats = ledger.get_node_stats(manifest.id)
    assert [s["action"] for s in stats] == ["MoveAB", "MoveCA"]
    assert stats[1]["ctis_generated"] == 1
    assert stats[0]["run_id"] == manifest.id


def test_history_frame(ledger):
    assert ledger.history_frame().empty
    manifest = _manifest("check", "valid")
    ledger.insert_run(manifest, "SimpleConsensus")
    frame = ledger.history_frame()
    assert list(frame.columns) == ["id", "started_at", "command", "protocol", "outcome", "exit_code", "wall_time", "seed"]
    assert frame.iloc[0]["id"] == manifest.id[:8]
    assert frame.iloc[0]["wall_time"] == 1.23


def test_ledger_file_is_created(tmp_path):
    path = tmp_path / "cache" / "ledger.duckdb"
    client = LedgerClient(str(path))
    client.insert_run(_manifest("pretty"))
    client.close()
    again = LedgerClient(str(path))
    assert len(again.get_runs()) == 1
    again.close()
