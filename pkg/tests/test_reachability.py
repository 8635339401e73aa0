import pytest

from errors import CacheChecksumError, CacheSchemaError, CacheVersionError, GapError
from evaluator import evaluator_for
from parser import load_instance
from reachability import (
    ProjectionCache, Provenance, explore, explore_sampled, load, load_or_explore, project, reach_path, save,
)


# ============================================================
# EXPLORACIÓN EXHAUSTIVA
# ============================================================

def test_ring_counter_has_three_states(ring, ring_inst):
    states = explore(ring, ring_inst)
    assert states.count == 3
    assert states.states[0] == (True, False, False)
    assert states.provenance == Provenance("exhaustive")


@pytest.mark.parametrize("inst_file, expected", [("rm2.inst", 56), ("rm3.inst", 288)])
def test_two_phase_state_counts(two_phase, protocols, inst_file, expected):
    inst = load_instance(protocols / inst_file, two_phase)
    assert explore(two_phase, inst).count == expected


def test_reachable_set_is_closed(consensus, n2, reach_n2):
    ev = evaluator_for(consensus, n2)
    for state in reach_n2.states[:2000]:
        for _, _, nxt in ev.successors(state):
            assert nxt in reach_n2


def test_safety_holds_on_every_reachable_state(consensus, n2, reach_n2):
    ev = evaluator_for(consensus, n2)
    root = consensus.lemma("NoConflictingValues").formula
    assert all(ev.eval(root, s) for s in reach_n2)


def test_exploration_is_deterministic_across_workers(two_phase, rm3):
    single = explore(two_phase, rm3, workers=1)
    several = explore(two_phase, rm3, workers=2)
    assert set(single.states) == set(several.states)


def test_state_limit_marks_result_partial(consensus, n2):
    states = explore(consensus, n2, max_states=50)
    assert states.count == 50
    assert not states.provenance.complete
    assert states.provenance.label() == "exhaustive(truncated)"


@pytest.mark.slow
def test_consensus_three_nodes(reach_n3):
    assert reach_n3.count == 110464


@pytest.mark.slow
@pytest.mark.parametrize("variables, expected", [
    (("leader", "decided"), 10),
    (("leader", "votes"), 94),
    (("voteMsg", "votes"), 343),
    (("voteMsg", "voteRequestMsg", "voted"), 16128),
])
def test_consensus_projection_sizes(reach_n3, variables, expected):
    assert project(reach_n3, variables).count == expected


# ============================================================
# MUESTREO
# ============================================================

def test_sampled_states_are_reachable(consensus, n2, reach_n2):
    sampled = explore(consensus, n2, mode="sampled", budget=500, seed=3)
    assert 0 < sampled.count <= 500
    assert all(s in reach_n2 for s in sampled)
    assert sampled.provenance.label() == "sampled(seed=3, budget=500)"


def test_sampling_is_reproducible(two_phase, rm3):
    first = explore_sampled(two_phase, rm3, 40, seed=11)
    second = explore_sampled(two_phase, rm3, 40, seed=11, workers=2)
    assert first.states == second.states


def test_sampling_needs_a_budget(ring, ring_inst):
    with pytest.raises(GapError, match="positive budget"):
        explore(ring, ring_inst, mode="sampled")


# ============================================================
# PROYECCIONES
# ============================================================

def test_projection_is_monotone_and_idempotent(consensus, reach_n2):
    small = project(reach_n2, ["leader"])
    large = project(reach_n2, ["leader", "decided"])
    assert small.count <= large.count <= reach_n2.count
    assert project(large, ["leader", "decided"]) is large
    assert project(project(large, ["leader"]), ["leader"]).states == small.states
    assert project(reach_n2, consensus.var_names) is reach_n2


def test_projection_keeps_declaration_order(reach_n2):
    assert project(reach_n2, ["decided", "leader"]).schema == ("leader", "decided")


def test_projection_of_unknown_variable(reach_n2):
    with pytest.raises(GapError, match="unknown variable"):
        project(reach_n2, ["nope"])


def test_projection_cache_persists(tmp_path, n2, reach_n2):
    cache = ProjectionCache(reach_n2, tmp_path, n2)
    first = cache.get(["votes", "voteMsg"])
    assert first.schema == ("voteMsg", "votes")
    assert (tmp_path / "proj-voteMsg+votes.gapr").exists()
    again = ProjectionCache(reach_n2, tmp_path, n2).get(["voteMsg", "votes"])
    assert again == first


# ============================================================
# ARCHIVOS GAPR1
# ============================================================

def test_save_and_load(tmp_path, consensus, n2, reach_n2):
    path = save(reach_n2, tmp_path / "reach.gapr")
    loaded = load(path, n2, expect_schema=consensus.var_names, spec_digest=consensus.digest, inst_digest=n2.digest)
    assert loaded == reach_n2


def test_truncated_file(tmp_path, ring_inst, ring):
    path = save(explore(ring, ring_inst), tmp_path / "ring.gapr")
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(CacheChecksumError):
        load(path, ring_inst)


def test_foreign_file(tmp_path, ring_inst):
    path = tmp_path / "junk.gapr"
    path.write_bytes(b"not a cache")
    with pytest.raises(CacheVersionError):
        load(path, ring_inst)


def test_schema_mismatch(tmp_path, n2, reach_n2):
    path = save(project(reach_n2, ["leader"]), tmp_path / "leader.gapr")
    with pytest.raises(CacheSchemaError, match="does not match"):
        load(path, n2, expect_schema=("decided",))


def test_cache_written_for_another_spec(tmp_path, ring, ring_inst):
    path = save(explore(ring, ring_inst), tmp_path / "ring.gapr")
    with pytest.raises(CacheSchemaError, match="different specification"):
        load(path, ring_inst, spec_digest="00" * 32)


def test_load_or_explore_reuses_cache(tmp_path, two_phase, rm3):
    first = load_or_explore(two_phase, rm3, tmp_path)
    assert reach_path(tmp_path, two_phase, rm3, "exhaustive").exists()
    second = load_or_explore(two_phase, rm3, tmp_path)
    assert second == first


def test_corrupt_cache_is_recomputed(tmp_path, two_phase, rm3):
    load_or_explore(two_phase, rm3, tmp_path)
    path = reach_path(tmp_path, two_phase, rm3, "exhaustive")
    path.write_bytes(path.read_bytes()[:-1])
    assert load_or_explore(two_phase, rm3, tmp_path).count == 288


def test_truncated_cache_is_not_reused_with_a_larger_limit(tmp_path, two_phase, rm3):
    partial = load_or_explore(two_phase, rm3, tmp_path, max_states=50)
    assert partial.count == 50
    assert not partial.provenance.complete
    assert load_or_explore(two_phase, rm3, tmp_path, max_states=50) == partial
    full = load_or_explore(two_phase, rm3, tmp_path)
    assert full.count == 288
    assert full.provenance.complete
    assert load(reach_path(tmp_path, two_phase, rm3, "exhaustive"), rm3).count == 288
