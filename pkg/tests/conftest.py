from pathlib import Path

import pytest

from models import InferenceConfig
from parser import load_grammar, load_instance, load_spec
from reachability import explore

PROTOCOLS = Path(__file__).resolve().parent.parent / "protocols"


# ============================================================
# PROTOCOLOS
# ============================================================

@pytest.fixture(scope="session")
def protocols() -> Path:
    return PROTOCOLS


@pytest.fixture(scope="session")
def consensus():
    return load_spec(PROTOCOLS / "simple_consensus.gap")


@pytest.fixture(scope="session")
def n2(consensus):
    return load_instance(PROTOCOLS / "n2v2.inst", consensus)


@pytest.fixture(scope="session")
def n3(consensus):
    return load_instance(PROTOCOLS / "n3v2.inst", consensus)


@pytest.fixture(scope="session")
def full_grammar(consensus):
    return load_grammar(PROTOCOLS / "simple_consensus.grm", consensus)


@pytest.fixture(scope="session")
def no_quorum_grammar(consensus):
    return load_grammar(PROTOCOLS / "simple_consensus_no_quorum.grm", consensus)


@pytest.fixture(scope="session")
def two_phase():
    return load_spec(PROTOCOLS / "two_phase.gap")


@pytest.fixture(scope="session")
def rm3(two_phase):
    return load_instance(PROTOCOLS / "rm3.inst", two_phase)


@pytest.fixture(scope="session")
def ring():
    return load_spec(PROTOCOLS / "ring_counter.gap")


@pytest.fixture(scope="session")
def ring_inst(ring):
    return load_instance(PROTOCOLS / "ring.inst", ring)


# ============================================================
# ESTADOS ALCANZABLES
# ============================================================

@pytest.fixture(scope="session")
def reach_n2(consensus, n2):
    return explore(consensus, n2)


@pytest.fixture(scope="session")
def reach_n3(consensus, n3):
    """110,464 estados: solo para tests marcados `slow`"""
    return explore(consensus, n3)


@pytest.fixture
def fast_config():
    """Configuración reducida para inferencias de prueba"""
    return InferenceConfig(n_invs=20000, n_ctis=2000, node_timeout=300, global_timeout=1800, eval_sample_size=256)
