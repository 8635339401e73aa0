import logging

import pytest
from pydantic import ValidationError

from errors import GraphError
from export import (
    dump_graph, from_document, grammar_hash, load_graph, read_document, to_document, to_dot, to_report, write_text,
)
from models import EdgeRecord, InferenceConfig
from parser import load_grammar
from proof_graph import check_graph_validity, do_ind_proof_slice
from reachability import explore

GOLDEN = "golden/simple_consensus_n2.graph.json"


@pytest.fixture
def ring_graph(ring, ring_inst, protocols, fast_config):
    grammar = load_grammar(protocols / "ring_counter.grm", ring)
    graph, _ = do_ind_proof_slice(ring, ring_inst, ring.lemma("OnlyA"), grammar, fast_config, explore(ring, ring_inst))
    return graph, grammar


# ============================================================
# ARCHIVO DE GRAFO
# ============================================================

def test_graph_file_restores_the_graph(ring, ring_inst, ring_graph, fast_config):
    graph, grammar = ring_graph
    text = dump_graph(graph, fast_config, grammar)
    doc = read_document(text)
    assert doc.spec_hash == ring.digest
    assert doc.grammar_hash == grammar_hash(grammar)
    assert doc.config == fast_config
    again = from_document(doc, ring, ring_inst)
    assert list(again.lemmas) == list(graph.lemmas)
    assert again.edges == graph.edges
    assert again.is_valid
    assert to_document(again, fast_config, grammar) == doc


def test_graph_for_another_spec_is_rejected(ring, ring_inst, ring_graph):
    graph, _ = ring_graph
    doc = to_document(graph)
    doc.spec_hash = "ab" * 32
    with pytest.raises(GraphError, match="different spec"):
        from_document(doc, ring, ring_inst)
    assert from_document(doc, ring, ring_inst, allow_mismatch=True).is_valid


def test_unpinned_hashes_are_accepted_with_a_warning(consensus, n2, protocols, caplog):
    with caplog.at_level(logging.WARNING, logger="export"):
        graph = load_graph(protocols / GOLDEN, consensus, n2)
    assert graph.root == "NoConflictingValues"
    assert "does not pin" in caplog.text


def test_unsupported_format():
    with pytest.raises(GraphError, match="unsupported graph format"):
        read_document('{"format": "other/9", "protocol": "P", "root": "L"}')


def test_malformed_file():
    with pytest.raises(GraphError, match="malformed graph file"):
        read_document('{"protocol": 3}')


def test_unknown_node_status_is_rejected(protocols):
    text = (protocols / GOLDEN).read_text(encoding="utf-8")
    with pytest.raises(GraphError, match="malformed graph file"):
        read_document(text.replace('"status": "proven"', '"status": "done"', 1))


def test_config_rejects_unknown_fields():
    with pytest.raises(ValidationError, match="extra"):
        InferenceConfig(n_invz=10)
    assert InferenceConfig.model_config["extra"] == "forbid"


def test_graph_file_has_no_timing_fields(ring_graph, fast_config):
    graph, grammar = ring_graph
    assert "wall_time" not in dump_graph(graph, fast_config, grammar)


def test_root_must_come_first(consensus, n2, protocols):
    doc = read_document((protocols / GOLDEN).read_text(encoding="utf-8"))
    doc.lemmas = doc.lemmas[1:] + doc.lemmas[:1]
    with pytest.raises(GraphError, match="root lemma first"):
        from_document(doc, consensus, n2)


def test_edge_to_missing_node(consensus, n2, protocols):
    doc = read_document((protocols / GOLDEN).read_text(encoding="utf-8"))
    doc.edges.append(EdgeRecord(source="Ghost", lemma="NoConflictingValues", action="Decide"))
    with pytest.raises(GraphError, match="missing node"):
        from_document(doc, consensus, n2)


def test_self_edge_in_file(consensus, n2, protocols):
    doc = read_document((protocols / GOLDEN).read_text(encoding="utf-8"))
    doc.edges.append(EdgeRecord(source="UniqueLeaders", lemma="UniqueLeaders", action="Decide"))
    with pytest.raises(GraphError, match="invalid edge"):
        from_document(doc, consensus, n2)


# ============================================================
# DOT Y REPORTE
# ============================================================

def test_dot_output(consensus, n2, protocols):
    graph = load_graph(protocols / GOLDEN, consensus, n2)
    dot = to_dot(graph)
    assert "digraph SimpleConsensus {" in dot
    assert "L_NoConflictingValues" in dot
    assert "A_NoConflictingValues__Decide" in dot
    assert "A_NoConflictingValues__SendVote" not in dot
    assert "L_LeadersDecide -> A_NoConflictingValues__Decide" in dot


def test_report_of_valid_graph(consensus, n2, protocols):
    graph = load_graph(protocols / GOLDEN, consensus, n2)
    report = to_report(graph, check_graph_validity(graph, consensus, n2))
    assert "root: NoConflictingValues" in report
    assert "outcome: valid" in report
    assert "validity: valid (exhaustive)" in report
    assert "(NoConflictingValues, Decide) proven support: LeadersDecide, UniqueLeaders" in report


def test_report_lists_failures(consensus, n2, reach_n2, full_grammar):
    graph, _ = do_ind_proof_slice(
        consensus, n2, consensus.lemma("NoConflictingValues"), full_grammar,
        InferenceConfig(global_timeout=0), reach_n2,
    )
    report = to_report(graph)
    assert "outcome: partial (global timeout)" in report
    assert "failures:" in report
    assert "(NoConflictingValues, Decide): timeout" in report


def test_write_text_creates_directories(tmp_path):
    path = write_text(tmp_path / "out" / "graph.dot", "digraph {}\n")
    assert path.read_text(encoding="utf-8") == "digraph {}\n"
