import pytest

from errors import SpecError
from lexer import tokenize
from parser import load_grammar, parse_grammar, parse_instance, parse_lemma_text, parse_spec
from printer import format_lemma, format_system

SMALL = """
protocol Toggle
sort Node
var on : fn Node -> bool
var count : set of Node

init {
    on = [n \\in Node |-> FALSE];
    count = {};
}

action Flip(n : Node) {
    require ~on[n];
    on' = on with [n] := TRUE;
    unchanged count;
}
"""


# ============================================================
# ARCHIVOS .gap
# ============================================================

def test_simple_consensus_shape(consensus):
    assert consensus.name == "SimpleConsensus"
    assert len(consensus.variables) == 6
    assert [a.name for a in consensus.actions] == ["SendRequestVote", "SendVote", "RecvVote", "BecomeLeader", "Decide"]
    assert consensus.lemmas[0].name == "NoConflictingValues"
    assert len(consensus.lemmas) == 8


def test_empty_file_needs_protocol_header():
    with pytest.raises(SpecError, match="expected 'protocol' header"):
        parse_spec("")


def test_missing_update_is_reported():
    text = SMALL.replace("    on' = on with [n] := TRUE;\n", "")
    with pytest.raises(SpecError) as err:
        parse_spec(text)
    assert "action Flip has no update for variable on" in str(err.value)


def test_unlisted_variables_default_to_identity():
    sys = parse_spec(SMALL.replace("    unchanged count;\n", ""))
    assert sys.action("Flip").is_identity("count")


def test_duplicate_action_name():
    text = SMALL + "\naction Flip(n : Node) { require on[n]; }\n"
    with pytest.raises(SpecError, match="duplicate action name Flip"):
        parse_spec(text)


def test_diagnostics_carry_spans_inside_the_text():
    text = SMALL.replace("require ~on[n];", "require ~on[m];")
    with pytest.raises(SpecError) as err:
        parse_spec(text, "toggle.gap")
    lines = text.split("\n")
    for d in err.value.diagnostics:
        assert d.span is not None and d.span.file == "toggle.gap"
        assert 1 <= d.span.line <= len(lines)
        assert 1 <= d.span.column <= len(lines[d.span.line - 1]) + 1


def test_ascii_and_unicode_operators_agree(consensus):
    ascii_form = parse_lemma_text("\\A n \\in Node : leader[n] => decided[n] /= {}", consensus, "X")
    unicode_form = parse_lemma_text("∀ n ∈ Node : leader[n] ⇒ decided[n] ≠ {}", consensus, "X")
    assert ascii_form == unicode_form


def test_comments_are_skipped():
    kinds = [t.kind for t in tokenize("a \\* comment\n(* block *) // line\nb")]
    assert kinds == ["IDENT", "IDENT", "EOF"]


@pytest.mark.parametrize("name", ["consensus", "two_phase", "ring"])
def test_pretty_print_round_trip(name, request):
    sys = request.getfixturevalue(name)
    again = parse_spec(format_system(sys))
    assert again == sys
    assert again.digest == sys.digest


def test_lemma_text_round_trip(consensus):
    for lemma in consensus.lemmas:
        assert parse_lemma_text(format_lemma(lemma), consensus, lemma.name) == lemma


def test_enum_sort_elements_are_literals(two_phase, rm3):
    assert two_phase.sorts[1].elements == ("working", "prepared", "committed", "aborted")
    assert [a.name for a in rm3.sort_elements("RMState")] == ["working", "prepared", "committed", "aborted"]


# ============================================================
# GRAMÁTICAS
# ============================================================

def test_full_grammar(full_grammar):
    assert len(full_grammar.templates) == 1
    assert full_grammar.templates[0].params == ("i", "j", "k", "Q", "v")
    assert len(full_grammar.predicates) == 22
    assert full_grammar.max_literals == 3


def test_grammar_without_quorum_predicates(no_quorum_grammar):
    texts = [p.text for p in no_quorum_grammar.predicates]
    assert len(texts) == 20
    assert not any("Q" in t for t in texts)


def test_param_only_predicates_have_empty_footprint(full_grammar):
    footprints = {p.text: p.variables for p in full_grammar.predicates}
    assert footprints["i = j"] == frozenset()
    assert footprints["v \\in decided[i]"] == frozenset({"decided"})


def test_grammar_with_zero_predicates(consensus):
    g = parse_grammar("template \\A i \\in Node;", consensus)
    assert g.predicates == ()


def test_unbound_predicate_parameter(consensus):
    with pytest.raises(SpecError, match=r"\bq\b"):
        parse_grammar("template \\A i \\in Node; pred leader[q];", consensus)


def test_quantifier_free_template(ring, protocols):
    g = load_grammar(protocols / "ring_counter.grm", ring)
    assert g.templates[0].bindings == ()
    assert [p.text for p in g.predicates] == ["a", "b", "c"]


# ============================================================
# INSTANCIAS
# ============================================================

def test_instance_n3(n3):
    assert [a.name for a in n3.sort_elements("Node")] == ["n1", "n2", "n3"]
    assert len(n3.consts["Quorum"]) == 4


def test_quorum_member_outside_node(consensus):
    with pytest.raises(SpecError):
        parse_instance("sort Node = {n1, n2}; sort Value = {v1}; const Quorum = {{n1, x}};", consensus)


def test_missing_sort_binding(consensus):
    with pytest.raises(SpecError, match="instance does not bind sort Value"):
        parse_instance("sort Node = {n1}; const Quorum = {{n1}};", consensus)


def test_singleton_instance(consensus):
    inst = parse_instance("sort Node = {n1}; sort Value = {v1}; const Quorum = {{n1}};", consensus)
    assert len(inst.sort_elements("Node")) == 1
