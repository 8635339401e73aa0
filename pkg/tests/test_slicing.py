import numpy as np
import pytest

from evaluator import evaluator_for
from parser import parse_expr
from reachability import explore
from slicing import coi, grammar_slice, lemma_vars, slice_table, var_slice, vars_of


@pytest.mark.parametrize("lemma, action, expected", [
    ("NoConflictingValues", "Decide", ["leader", "decided"]),
    ("UniqueLeaders", "BecomeLeader", ["votes", "leader"]),
    ("NodesVoteOnce", "RecvVote", ["voteMsg", "votes"]),
    ("VoteMsgsUnique", "SendVote", ["voteRequestMsg", "voted", "voteMsg"]),
])
def test_consensus_slices(consensus, lemma, action, expected):
    vs = var_slice(consensus.lemma(lemma), consensus.action(action))
    assert vs.ordered(consensus) == expected
    assert vs.size == len(expected)


def test_slice_parts(consensus):
    vs = var_slice(consensus.lemma("NoConflictingValues"), consensus.action("Decide"))
    assert vs.vars_pre == {"leader", "decided"}
    assert vs.vars_lemma == {"decided"}
    assert vs.coi_primed == {"decided"}
    assert vs.label(consensus) == "{leader,decided}"


def test_cone_of_influence(consensus):
    assert coi(consensus.action("Decide"), "decided") == {"decided"}
    assert coi(consensus.action("SendVote"), "voteMsg") == {"voteMsg"}
    assert coi(consensus.action("Decide"), "votes") == {"votes"}


def test_parameter_equality_reads_no_state(consensus):
    node = consensus.var_types["votes"].domain
    assert vars_of(parse_expr("i = j", consensus, {"i": node, "j": node})) == frozenset()


def test_lemma_vars(consensus):
    assert lemma_vars(consensus.lemma("VoteRecordedImpliesVoteMsg")) == {"votes", "voteMsg"}


def test_slice_never_exceeds_schema(consensus):
    names = set(consensus.var_names)
    for lemma in consensus.lemmas:
        for action in consensus.actions:
            vs = var_slice(lemma, action)
            assert vs.variables <= names
            assert lemma_vars(lemma) <= vs.variables


def test_grammar_slice(full_grammar):
    leader_decided = grammar_slice(full_grammar, {"leader", "decided"})
    assert [p.text for p in leader_decided.predicates] == [
        "i = j", "i = k", "j = k", "leader[i]", "leader[j]", "leader[k]", "v \\in decided[i]", "v \\in decided[j]",
    ]
    assert len(grammar_slice(full_grammar, {"leader", "votes"}).predicates) == 14
    assert leader_decided.templates == full_grammar.templates
    assert leader_decided.max_literals == full_grammar.max_literals


def test_slice_table(consensus, full_grammar):
    table = slice_table(consensus, grammar=full_grammar)
    assert len(table) == len(consensus.lemmas) * len(consensus.actions)
    row = table[(table.lemma == "NoConflictingValues") & (table.action == "Decide")].iloc[0]
    assert row["slice"] == "{leader,decided}"
    assert row["size"] == "2/6"
    assert row["preds"] == "8/22"
    assert list(slice_table(consensus).columns) == ["lemma", "action", "slice", "size"]


# ============================================================
# SOLIDEZ DEL CONO DE INFLUENCIA
# ============================================================

@pytest.fixture
def benchmark_runs(consensus, n2, reach_n2, two_phase, rm3):
    return {
        "consensus": (consensus, n2, reach_n2),
        "two_phase": (two_phase, rm3, explore(two_phase, rm3)),
    }


@pytest.mark.parametrize("benchmark", ["consensus", "two_phase"])
def test_update_ignores_variables_outside_its_cone(benchmark_runs, benchmark):
    sys, inst, states = benchmark_runs[benchmark]
    ev = evaluator_for(sys, inst)
    rng = np.random.default_rng(17)
    names = sys.var_names
    trials = attempts = 0
    while trials < 1000:
        attempts += 1
        assert attempts < 100_000
        pre = states.states[int(rng.integers(states.count))]
        action = sys.actions[int(rng.integers(len(sys.actions)))]
        compiled = ev.action(action)
        enabled = [b for b in compiled.bindings(pre) if compiled.apply(pre, b) is not None]
        if not enabled:
            continue
        binding = enabled[int(rng.integers(len(enabled)))]
        var = names[int(rng.integers(len(names)))]
        outside = [w for w in names if w not in coi(action, var)]
        if not outside:
            continue
        other = outside[int(rng.integers(len(outside)))]
        perturbed = list(pre)
        perturbed[sys.var_index[other]] = ev.domains.sample(sys.var_types[other], rng)
        trials += 1
        post = compiled.apply(tuple(perturbed), binding)
        if post is not None:
            i = sys.var_index[var]
            assert post[i] == compiled.apply(pre, binding)[i], (action.name, var, other)
