import pytest

from errors import EvalError
from evaluator import Evaluator, evaluator_for
from parser import parse_expr
from values import FnVal


def test_single_initial_state(consensus, n2):
    ev = evaluator_for(consensus, n2)
    states = ev.initial_states()
    assert len(states) == 1
    described = ev.describe(states[0])
    assert described["voteMsg"] == "{}"
    assert described["voted"] == "[n1 |-> FALSE, n2 |-> FALSE]"


def test_only_vote_requests_are_enabled_initially(consensus, n2):
    ev = evaluator_for(consensus, n2)
    init = ev.initial_states()[0]
    succ = ev.successors(init)
    assert [name for name, _, _ in succ] == ["SendRequestVote"] * 4
    n1, n2_ = n2.sort_elements("Node")
    assert succ[0][1] == {"src": n1, "dst": n1}
    assert succ[1][1] == {"src": n1, "dst": n2_}
    assert succ[1][2][0] == frozenset({(n1, n2_)})


def test_disabled_guard_gives_no_successor(consensus, n2):
    ev = evaluator_for(consensus, n2)
    init = ev.initial_states()[0]
    n1, _ = n2.sort_elements("Node")
    v1, _ = n2.sort_elements("Value")
    assert ev.apply_action(init, consensus.action("Decide"), {"n": n1, "v": v1}) is None


def test_vote_removes_the_src_dst_pair_only(consensus, n2):
    ev = evaluator_for(consensus, n2)
    n1, n2_ = n2.sort_elements("Node")
    s = ev.apply_action(ev.initial_states()[0], consensus.action("SendRequestVote"), {"src": n2_, "dst": n1})
    s = ev.apply_action(s, consensus.action("SendVote"), {"src": n1, "dst": n2_})
    values = dict(zip(consensus.var_names, s))
    assert values["voteRequestMsg"] == frozenset({(n2_, n1)})
    assert values["voteMsg"] == frozenset({(n1, n2_)})
    assert values["voted"] == FnVal([(n1, True), (n2_, False)])


def test_vote_removes_a_pending_src_dst_pair(consensus, n2):
    ev = evaluator_for(consensus, n2)
    n1, n2_ = n2.sort_elements("Node")
    s = ev.initial_states()[0]
    for src, dst in ((n2_, n1), (n1, n2_)):
        s = ev.apply_action(s, consensus.action("SendRequestVote"), {"src": src, "dst": dst})
    s = ev.apply_action(s, consensus.action("SendVote"), {"src": n1, "dst": n2_})
    values = dict(zip(consensus.var_names, s))
    assert values["voteRequestMsg"] == frozenset({(n2_, n1)})


def test_every_lemma_holds_initially(consensus, n2):
    ev = evaluator_for(consensus, n2)
    init = ev.initial_states()[0]
    for lemma in consensus.lemmas:
        assert ev.eval(lemma.formula, init) is True


def test_quantifier_over_constant(consensus, n2):
    ev = evaluator_for(consensus, n2)
    init = ev.initial_states()[0]
    expr = parse_expr("\\E Q \\in Quorum : Q \\subseteq votes[n]", consensus, {"n": consensus.var_types["votes"].domain})
    n1, _ = n2.sort_elements("Node")
    assert ev.eval(expr, init, params={"n": n1}) is False


def test_projected_layout(consensus, n2):
    ev = Evaluator(consensus, n2, ("leader", "decided"))
    n1, n2_ = n2.sort_elements("Node")
    v1, v2 = n2.sort_elements("Value")
    root = consensus.lemma("NoConflictingValues").formula
    leader = FnVal([(n1, True), (n2_, True)])
    good = (leader, FnVal([(n1, frozenset({v1})), (n2_, frozenset({v1}))]))
    bad = (leader, FnVal([(n1, frozenset({v1})), (n2_, frozenset({v2}))]))
    assert ev.eval(root, good) is True
    assert ev.eval(root, bad) is False


def test_variable_outside_layout(consensus, n2):
    ev = Evaluator(consensus, n2, ("leader",))
    with pytest.raises(EvalError, match="not part of this state layout"):
        ev.compile(consensus.lemma("LeadersDecide").formula)


def test_state_from_requires_every_variable(ring, ring_inst):
    ev = evaluator_for(ring, ring_inst)
    assert ev.state_from({"a": True, "b": False, "c": False}) == (True, False, False)
    with pytest.raises(EvalError, match="does not bind c"):
        ev.state_from({"a": True, "b": False})


def test_ring_steps(ring, ring_inst):
    ev = evaluator_for(ring, ring_inst)
    init = ev.initial_states()
    assert init == [(True, False, False)]
    assert ev.successors(init[0]) == [("MoveAB", {}, (False, True, False))]


def test_enum_sorts_in_two_phase(two_phase, rm3):
    ev = evaluator_for(two_phase, rm3)
    init = ev.initial_states()
    assert len(init) == 1
    assert ev.describe(init[0])["rmState"] == "[rm1 |-> working, rm2 |-> working, rm3 |-> working]"
    names = {name for name, _, _ in ev.successors(init[0])}
    assert names == {"TMAbort", "RMPrepare", "RMChooseToAbort"}


def test_check_types_rejects_foreign_values(ring, ring_inst):
    ev = evaluator_for(ring, ring_inst)
    with pytest.raises(EvalError, match="does not conform"):
        ev.check_types((True, 3, False), "test state")
