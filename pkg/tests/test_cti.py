import pytest

from cti import (
    CTISearch, Obligation, check_initiation, check_inductive, eliminates, generate_ctis, search, type_state_space_size,
)
from evaluator import evaluator_for
from parser import parse_lemma_text


# ============================================================
# TAMAÑOS DE ESPACIO DE ESTADOS
# ============================================================

def test_type_state_space_size(consensus, n2, n3):
    assert type_state_space_size(consensus, n2) == 2 ** 20
    assert type_state_space_size(consensus, n2, ["leader", "decided"]) == 64
    assert type_state_space_size(consensus, n3, ["voteMsg"]) == 512


def test_plan_covers_the_footprint(consensus, n2):
    engine = CTISearch(consensus, n2)
    support = [consensus.lemma("LeadersDecide"), consensus.lemma("UniqueLeaders")]
    plan = engine.plan([consensus.lemma("NoConflictingValues")], support, consensus.action("Decide"))
    assert sorted(plan.order) == ["decided", "leader"]


# ============================================================
# CTIs DE UNA OBLIGACIÓN LOCAL
# ============================================================

def test_unsupported_safety_has_ctis(consensus, n2):
    ob = Obligation(consensus.lemma("NoConflictingValues"), consensus.action("Decide"))
    batch = generate_ctis(consensus, n2, ob, max_ctis=100)
    assert batch.mode == "exhaustive"
    assert batch.provenance == "exhaustive"
    assert len(batch) > 0
    ev = evaluator_for(consensus, n2)
    root = ob.lemma.formula
    for cti in batch:
        assert cti.action == "Decide"
        assert cti.lemma == "NoConflictingValues"
        assert ev.eval(root, cti.prestate) is True
        assert ev.eval(root, cti.poststate) is False
        assert ev.apply_action(cti.prestate, ob.action, cti.params) == cti.poststate


def test_leadership_lemmas_eliminate_every_cti(consensus, n2):
    ob = Obligation(consensus.lemma("NoConflictingValues"), consensus.action("Decide"))
    batch = generate_ctis(consensus, n2, ob, max_ctis=1000)
    unique = consensus.lemma("UniqueLeaders")
    decide = consensus.lemma("LeadersDecide")
    assert all(eliminates(unique, c, consensus, n2) or eliminates(decide, c, consensus, n2) for c in batch)
    assert any(eliminates(unique, c, consensus, n2) for c in batch)
    assert any(eliminates(decide, c, consensus, n2) for c in batch)


def test_two_leader_cti_is_reported(consensus, n2):
    ob = Obligation(consensus.lemma("NoConflictingValues"), consensus.action("Decide"))
    batch = generate_ctis(consensus, n2, ob, max_ctis=1000)
    ev = evaluator_for(consensus, n2)
    both_lead = [c for c in batch if ev.describe(c.prestate)["leader"] == "[n1 |-> TRUE, n2 |-> TRUE]"]
    assert both_lead
    info = both_lead[0].describe(ev)
    assert info["action"] == "Decide"
    assert set(info["binding"]) == {"n", "v"}


@pytest.mark.parametrize("mode", ["exhaustive", "randomized"])
@pytest.mark.parametrize("lemma, action, support", [
    ("NoConflictingValues", "Decide", ()),
    ("NoConflictingValues", "Decide", ("LeadersDecide",)),
    ("UniqueLeaders", "BecomeLeader", ("LeaderHasQuorum",)),
    ("VoteMsgsUnique", "SendVote", ()),
    ("NodesVoteOnce", "RecvVote", ()),
])
def test_every_reported_cti_is_a_real_counterexample(consensus, n2, lemma, action, support, mode):
    target, act = consensus.lemma(lemma), consensus.action(action)
    supp = [consensus.lemma(name) for name in support]
    batch = search(consensus, n2, [target], supp, act, 200, mode=mode, seed=3, samples=4096, block_size=1024)
    assert batch.mode == mode
    if mode == "exhaustive":
        assert len(batch) > 0
    ev = evaluator_for(consensus, n2)
    for cti in batch:
        assert (cti.lemma, cti.action) == (lemma, action)
        assert ev.eval(target.formula, cti.prestate) is True
        assert all(ev.eval(s.formula, cti.prestate) is True for s in supp)
        assert ev.eval(act.pre, cti.prestate, params=cti.params) is True
        assert ev.apply_action(cti.prestate, act, cti.params) == cti.poststate
        assert ev.eval(target.formula, cti.poststate) is False


def test_support_discharges_the_obligation(consensus, n2):
    support = (consensus.lemma("LeadersDecide"), consensus.lemma("UniqueLeaders"))
    ob = Obligation(consensus.lemma("NoConflictingValues"), consensus.action("Decide"), support)
    batch = generate_ctis(consensus, n2, ob, max_ctis=10)
    assert batch.mode == "exhaustive"
    assert len(batch) == 0


def test_max_ctis_is_respected(consensus, n2):
    ob = Obligation(consensus.lemma("NoConflictingValues"), consensus.action("Decide"))
    assert len(generate_ctis(consensus, n2, ob, max_ctis=3)) == 3


def test_randomized_search_is_seeded(consensus, n2):
    kwargs = dict(max_ctis=50, mode="randomized", samples=2048, block_size=512)
    lemma, action = consensus.lemma("NoConflictingValues"), consensus.action("Decide")
    first = search(consensus, n2, [lemma], [], action, seed=5, **kwargs)
    second = search(consensus, n2, [lemma], [], action, seed=5, **kwargs)
    assert first.mode == "randomized"
    assert first.provenance == "randomized(2048)"
    assert len(first) > 0
    assert [c.key for c in first] == [c.key for c in second]
    assert [c.key for c in first] == sorted(c.key for c in first)


def test_auto_mode_switches_to_sampling(consensus, n2):
    lemma, action = consensus.lemma("NoConflictingValues"), consensus.action("Decide")
    batch = search(consensus, n2, [lemma], [], action, 10, exhaustive_bound=32, samples=1024)
    assert batch.mode == "randomized"
    assert batch.nominal_size == 64


def test_parameterless_action_search(ring, ring_inst):
    batch = search(ring, ring_inst, [ring.lemma("OnlyB")], [], ring.action("MoveAB"), 10)
    assert batch.mode == "exhaustive"
    assert len(batch) > 0
    assert all(c.binding == () for c in batch)
    supported = search(ring, ring_inst, [ring.lemma("OnlyB")], [ring.lemma("OnlyA")], ring.action("MoveAB"), 10)
    assert len(supported) == 0


# ============================================================
# ORÁCULO INDUCTIVO
# ============================================================

def test_initiation_failure(consensus, n2):
    bogus = parse_lemma_text("\\A n \\in Node : leader[n]", consensus, "EveryoneLeads")
    failures = check_initiation(consensus, n2, [bogus])
    assert [name for name, _ in failures] == ["EveryoneLeads"]


def test_ring_exclusion_is_inductive(ring, ring_inst):
    report = check_inductive(ring, ring_inst, ring.lemmas)
    assert report.valid
    assert report.mode == "exhaustive"


def test_single_ring_lemma_is_not_inductive(ring, ring_inst):
    report = check_inductive(ring, ring_inst, [ring.lemma("OnlyB")])
    assert not report.valid
    assert len(report.consecution["MoveAB"]) > 0
    assert report.initiation_failures == []


@pytest.mark.slow
def test_consensus_lemmas_are_inductive(consensus, n2):
    report = check_inductive(consensus, n2, consensus.lemmas)
    assert report.valid, {a: len(b) for a, b in report.consecution.items()}


def test_safety_alone_is_not_inductive(consensus, n2):
    report = check_inductive(consensus, n2, [consensus.lemma("NoConflictingValues")])
    assert not report.valid
    assert len(report.consecution["Decide"]) > 0
    assert len(report.consecution["SendVote"]) == 0
