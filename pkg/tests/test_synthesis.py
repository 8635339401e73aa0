import numpy as np

from cti import Obligation, generate_ctis
from evaluator import evaluator_for
from parser import load_grammar
from reachability import ProjectionCache, explore, project
from slicing import grammar_slice, lemma_vars, var_slice
from synthesis import (
    CandidateSpace, TableSet, evaluation_sample, filter_invariants, generate_candidates, local_inv_inference,
    node_seed,
)


def _ring_grammar(ring, protocols):
    return load_grammar(protocols / "ring_counter.grm", ring)


# ============================================================
# ESPACIO DE CANDIDATOS
# ============================================================

def test_candidate_space_sizes(consensus, n2, full_grammar):
    assert CandidateSpace(consensus, n2, full_grammar).total == 13288
    sliced = grammar_slice(full_grammar, {"leader", "decided"})
    assert CandidateSpace(consensus, n2, sliced).total == 576
    assert CandidateSpace(consensus, n2, sliced, max_literals=1).total == 16


def test_unrank_matches_enumeration(ring, ring_inst, protocols):
    space = CandidateSpace(ring, ring_inst, _ring_grammar(ring, protocols))
    listed = list(space.enumerate_all())
    assert len(listed) == space.total == 18
    assert [space.unrank(i) for i in range(space.total)] == listed


def test_unused_template_params_are_dropped(consensus, n2, full_grammar):
    space = CandidateSpace(consensus, n2, full_grammar)
    leader_i = [p.text for p in full_grammar.predicates].index("leader[i]")
    cand = space.realize(0, ((leader_i, False),))
    assert [b.name for b in cand.lemma.prefix] == ["i"]
    assert cand.n_literals == 1


def test_exhaustive_generation_when_space_is_small(ring, ring_inst, protocols):
    space = CandidateSpace(ring, ring_inst, _ring_grammar(ring, protocols))
    assert len(generate_candidates(space, 1000, seed=0)) == 18


def test_sampled_generation_is_seeded(consensus, n2, full_grammar):
    space = CandidateSpace(consensus, n2, full_grammar)
    first = generate_candidates(space, 200, seed=[1, 1])
    second = generate_candidates(space, 200, seed=[1, 1])
    assert len(first) == 200
    assert [c.text for c in first] == [c.text for c in second]
    assert len({c.text for c in first}) == 200


def test_fingerprints_remove_equivalent_candidates(consensus, n2, reach_n2, full_grammar):
    sliced = grammar_slice(full_grammar, {"leader", "decided"})
    space = CandidateSpace(consensus, n2, sliced)
    ev = evaluator_for(consensus, n2, ("leader", "decided"))
    projected = project(reach_n2, ["leader", "decided"])
    sample = TableSet(ev, space, evaluation_sample(ev, projected, 64, np.random.default_rng(0)))
    unique = generate_candidates(space, 10_000, seed=0, sample=sample)
    assert 0 < len(unique) < space.total
    assert len({c.fingerprint for c in unique}) == len(unique)
    assert [c.rank_key() for c in unique] == sorted(c.rank_key() for c in unique)


# ============================================================
# FILTRO DE INVARIANTES
# ============================================================

def test_ring_invariants(ring, ring_inst, protocols):
    space = CandidateSpace(ring, ring_inst, _ring_grammar(ring, protocols))
    states = explore(ring, ring_inst)
    kept = filter_invariants(generate_candidates(space, 1000, seed=0), states, space)
    assert len(kept) == 3
    ev = evaluator_for(ring, ring_inst)
    for cand in kept:
        assert cand.n_literals == 2
        assert all(ev.eval(cand.lemma.formula, s) for s in states)


def test_filtered_candidates_hold_on_reachable_states(consensus, n2, reach_n2, full_grammar):
    sliced = grammar_slice(full_grammar, {"leader", "votes"})
    space = CandidateSpace(consensus, n2, sliced)
    projected = project(reach_n2, ["leader", "votes"])
    kept = filter_invariants(generate_candidates(space, 500, seed=3), projected, space)
    assert kept
    ev = evaluator_for(consensus, n2)
    for cand in kept[:50]:
        assert all(ev.eval(cand.lemma.formula, s) for s in reach_n2)


def test_sliced_candidates_agree_on_projected_and_full_states(consensus, n2, reach_n2, full_grammar):
    variables = ("voted", "votes", "leader")
    space = CandidateSpace(consensus, n2, grammar_slice(full_grammar, variables))
    projected = project(reach_n2, variables)
    full_ev = evaluator_for(consensus, n2)
    proj_ev = evaluator_for(consensus, n2, projected.schema)
    idx = [consensus.var_index[v] for v in projected.schema]
    rng = np.random.default_rng(23)
    picks = rng.choice(space.total, size=min(200, space.total), replace=False)
    for index in picks:
        cand = space.realize(*space.unrank(int(index)))
        on_full = {(tuple(s[i] for i in idx), full_ev.eval(cand.lemma.formula, s)) for s in reach_n2}
        on_projected = {(p, proj_ev.eval(cand.lemma.formula, p)) for p in projected}
        assert on_full == on_projected, cand.text


# ============================================================
# INFERENCIA LOCAL
# ============================================================

def test_ring_local_inference(ring, ring_inst, protocols, fast_config):
    states = explore(ring, ring_inst)
    result = local_inv_inference(
        ring, ring_inst, _ring_grammar(ring, protocols), ring.lemma("OnlyB"), ring.action("MoveAB"),
        fast_config, ProjectionCache(states),
    )
    assert result.success
    assert result.provenance == "exhaustive"
    assert len(result.support) == 1
    ev = evaluator_for(ring, ring_inst)
    assert ev.eval(result.support[0].formula, (True, False, True)) is False
    assert all(ev.eval(result.support[0].formula, s) for s in states)
    assert result.ctis_eliminated == 1


def test_self_inductive_node_needs_no_support(consensus, n2, reach_n2, full_grammar, fast_config):
    result = local_inv_inference(
        consensus, n2, full_grammar, consensus.lemma("NoConflictingValues"), consensus.action("SendVote"),
        fast_config, ProjectionCache(reach_n2),
    )
    assert result.success
    assert result.support == []
    assert result.ctis_generated == 0


def test_consensus_decide_node(consensus, n2, reach_n2, full_grammar, fast_config):
    result = local_inv_inference(
        consensus, n2, full_grammar, consensus.lemma("NoConflictingValues"), consensus.action("Decide"),
        fast_config, ProjectionCache(reach_n2),
    )
    assert result.success, result.reason
    assert result.slice.variables == {"leader", "decided"}
    assert result.grammar_size == 8
    assert result.support
    ev = evaluator_for(consensus, n2)
    for lemma in result.support:
        assert all(ev.eval(lemma.formula, s) for s in reach_n2)


def test_sliced_grammar_gives_the_same_sufficient_support(consensus, n2, reach_n2, full_grammar, fast_config):
    lemma, action = consensus.lemma("NoConflictingValues"), consensus.action("Decide")
    vs = var_slice(lemma, action)
    projections = ProjectionCache(reach_n2)
    from_full = local_inv_inference(consensus, n2, full_grammar, lemma, action, fast_config, projections)
    from_slice = local_inv_inference(
        consensus, n2, grammar_slice(full_grammar, vs.variables), lemma, action, fast_config, projections,
    )
    assert from_full.success and from_slice.success
    assert [l.formula for l in from_full.support] == [l.formula for l in from_slice.support]
    for support in from_full.support:
        assert lemma_vars(support) <= vs.variables
    ob = Obligation(lemma, action, tuple(from_full.support), mode="exhaustive")
    assert len(generate_ctis(consensus, n2, ob, max_ctis=10)) == 0


def test_node_seed_is_stable():
    assert node_seed(0, "L", "A") == node_seed(0, "L", "A")
    assert node_seed(0, "L", "A") != node_seed(1, "L", "A")
