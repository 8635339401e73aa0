import logging
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np

from cti import Obligation, check_initiation, generate_ctis, type_state_space_size
from errors import GraphError, SearchTimeout
from evaluator import State, evaluator_for
from expressions import conjoin
from models import InferenceConfig, InitiationVerdict, NodeVerdict, ValidityReport
from printer import format_lemma
from reachability import ProjectionCache, StateSet
from slicing import VarSlice, lemma_vars
from synthesis import LocalResult, _cti_options, local_inv_inference, node_seed
from system import Grammar, Instance, Lemma, TransitionSystem

logger = logging.getLogger(__name__)

UNPROVEN = "unproven"
PROVEN = "proven"
FAILED = "failed"

NodeId = Tuple[str, str]


# ============================================================
# NODOS
# ============================================================

@dataclass
class LemmaNode:
    lemma: Lemma
    order: int
    depth: int
    origin: str = "synthesized"
    text: str = ""
    fingerprint: bytes = b""

    @property
    def name(self) -> str:
        return self.lemma.name


@dataclass
class ActionNode:
    """Obligación (L ∧ Supp ∧ A) ⇒ L' con su estado, procedencia del chequeo y estadísticas"""
    lemma: str
    action: str
    status: str = UNPROVEN
    provenance: str = ""
    self_inductive: bool = False
    slice: Optional[VarSlice] = None
    projected: int = 0
    grammar_size: int = 0
    rounds: int = 0
    ctis_generated: int = 0
    ctis_eliminated: int = 0
    candidates: int = 0
    wall_time: float = 0.0
    reason: str = ""
    surviving: List[Dict[str, object]] = field(default_factory=list)

    @property
    def id(self) -> NodeId:
        return (self.lemma, self.action)


# ============================================================
# GRAFO
# ============================================================

class ProofGraph:
    """Grafo de prueba inductivo: nodos lema, un nodo de acción por lema y acción, aristas de soporte"""

    def __init__(self, sys: TransitionSystem, inst: Instance, root: Lemma):
        self.sys = sys
        self.inst = inst
        self.root = root.name
        self.lemmas: Dict[str, LemmaNode] = {}
        self.actions: Dict[NodeId, ActionNode] = {}
        self.edges: List[Tuple[str, NodeId]] = []
        self.reach_count = 0
        self.reach_provenance = ""
        self.timed_out = False
        self._counter = 0
        self.add_lemma(root, depth=0, origin="root")

    # ------------------------------------------------------------
    # Mutación
    # ------------------------------------------------------------

    def add_lemma(self, lemma: Lemma, depth: int, origin: str = "synthesized") -> LemmaNode:
        if lemma.name in self.lemmas:
            raise GraphError(f"duplicate lemma node {lemma.name}")
        node = LemmaNode(lemma, len(self.lemmas), depth, origin, format_lemma(lemma))
        self.lemmas[lemma.name] = node
        for action in self.sys.actions:
            self.actions[(lemma.name, action.name)] = ActionNode(lemma.name, action.name)
        return node

    def add_edge(self, source: str, target: NodeId) -> bool:
        if source == target[0]:
            return False
        edge = (source, target)
        if edge in self.edges:
            return False
        self.edges.append(edge)
        child = self.lemmas[source]
        child.depth = min(child.depth, self.lemmas[target[0]].depth + 1)
        return True

    def fresh_name(self) -> str:
        taken = set(self.lemmas) | {lem.name for lem in self.sys.lemmas}
        while True:
            self._counter += 1
            name = f"Inv{self._counter}"
            if name not in taken:
                return name

    # ------------------------------------------------------------
    # Consultas
    # ------------------------------------------------------------

    def support(self, node: NodeId) -> List[str]:
        return [src for src, tgt in self.edges if tgt == node]

    def support_lemmas(self, node: NodeId) -> List[Lemma]:
        return [self.lemmas[name].lemma for name in self.support(node)]

    def action_nodes(self, lemma: Optional[str] = None) -> List[ActionNode]:
        return [n for n in self.actions.values() if lemma is None or n.lemma == lemma]

    def lemma_status(self, name: str) -> str:
        statuses = {n.status for n in self.action_nodes(name)}
        if FAILED in statuses:
            return FAILED
        return PROVEN if statuses <= {PROVEN} else "pending"

    @property
    def failed(self) -> List[NodeId]:
        return [n.id for n in self.actions.values() if n.status == FAILED]

    @property
    def pending(self) -> List[NodeId]:
        return [n.id for n in self.actions.values() if n.status == UNPROVEN]

    @property
    def is_valid(self) -> bool:
        return all(n.status == PROVEN for n in self.actions.values())

    def ordered_lemmas(self) -> List[LemmaNode]:
        return sorted(self.lemmas.values(), key=lambda n: n.order)

    def check_well_formed(self) -> None:
        """Un nodo de acción por (lema, acción), aristas hacia nodos existentes y sin auto-aristas"""
        if self.root not in self.lemmas:
            raise GraphError(f"root lemma {self.root} is not a node")
        action_names = [a.name for a in self.sys.actions]
        for name in self.lemmas:
            for a in action_names:
                if (name, a) not in self.actions:
                    raise GraphError(f"lemma {name} has no action node for {a}")
        for lemma, action in self.actions:
            if lemma not in self.lemmas or action not in action_names:
                raise GraphError(f"action node ({lemma}, {action}) has no lemma or action")
        for src, tgt in self.edges:
            if src not in self.lemmas:
                raise GraphError(f"edge source {src} is not a lemma node")
            if tgt not in self.actions:
                raise GraphError(f"edge target ({tgt[0]}, {tgt[1]}) is not an action node")
            if src == tgt[0]:
                raise GraphError(f"self edge on {src}")


# ============================================================
# EQUIVALENCIA DE LEMAS
# ============================================================

class LemmaMatcher:
    """Reutiliza nodos: igualdad sintáctica, o huella sobre muestra bien tipada + equivalencia exhaustiva"""

    def __init__(self, sys: TransitionSystem, inst: Instance, cfg: InferenceConfig):
        self.sys = sys
        self.inst = inst
        self.bound = cfg.equivalence_bound
        self.ev = evaluator_for(sys, inst)
        rng = np.random.default_rng([cfg.seed, 1])
        types = [sys.var_types[v] for v in sys.var_names]
        self.sample: List[State] = [
            tuple(self.ev.domains.sample(t, rng) for t in types) for _ in range(cfg.eval_sample_size)
        ]
        self.base = self.ev.initial_states()[0]

    def fingerprint(self, lemma: Lemma) -> bytes:
        fn = self.ev.compile(lemma.formula)
        return np.packbits([bool(fn(s, None, {})) for s in self.sample]).tobytes()

    def equivalent(self, a: Lemma, b: Lemma) -> bool:
        footprint = sorted(lemma_vars(a) | lemma_vars(b), key=self.sys.var_index.get)
        if type_state_space_size(self.sys, self.inst, footprint) > self.bound:
            return False
        fa = self.ev.compile(a.formula)
        fb = self.ev.compile(b.formula)
        idx = [self.sys.var_index[v] for v in footprint]
        domains = [self.ev.domains.values(self.sys.var_types[v]) for v in footprint]
        state = list(self.base)
        for combo in product(*domains):
            for i, value in zip(idx, combo):
                state[i] = value
            s = tuple(state)
            if bool(fa(s, None, {})) != bool(fb(s, None, {})):
                return False
        return True

    def find(self, graph: ProofGraph, lemma: Lemma) -> Tuple[Optional[str], bytes]:
        text = format_lemma(lemma)
        fp = self.fingerprint(lemma)
        for node in graph.ordered_lemmas():
            if node.text == text:
                return node.name, fp
        for node in graph.ordered_lemmas():
            if node.fingerprint == fp and self.equivalent(node.lemma, lemma):
                return node.name, fp
        return None, fp


# ============================================================
# ALGORITMO GLOBAL
# ============================================================

def pick_node(graph: ProofGraph) -> ActionNode:
    """Menor profundidad desde la raíz, luego orden de declaración de la acción, luego orden de creación del lema"""
    order = {a.name: i for i, a in enumerate(graph.sys.actions)}
    pending = [n for n in graph.actions.values() if n.status == UNPROVEN]
    if not pending:
        raise GraphError("nothing to pick")
    return min(pending, key=lambda n: (graph.lemmas[n.lemma].depth, order[n.action], graph.lemmas[n.lemma].order))


def _discharge(graph: ProofGraph, name: str, cfg: InferenceConfig, deadline: float) -> None:
    """Marca como probados los nodos de acción auto-inductivos de un lema recién agregado"""
    lemma = graph.lemmas[name].lemma
    for action in graph.sys.actions:
        node = graph.actions[(name, action.name)]
        if node.status != UNPROVEN:
            continue
        try:
            batch = generate_ctis(
                graph.sys, graph.inst, Obligation(lemma, action), 1,
                seed=node_seed(cfg.seed, name, action.name), deadline=deadline, **_cti_options(cfg),
            )
        except SearchTimeout:
            return
        if not batch.ctis:
            node.status = PROVEN
            node.self_inductive = True
            node.provenance = batch.provenance


def _record(node: ActionNode, result: LocalResult, ev) -> None:
    node.slice = result.slice
    node.projected = result.projected
    node.grammar_size = result.grammar_size
    node.rounds = result.rounds
    node.ctis_generated = result.ctis_generated
    node.ctis_eliminated = result.ctis_eliminated
    node.candidates = result.candidates
    node.wall_time = result.wall_time
    node.provenance = result.provenance
    node.reason = result.reason
    node.surviving = [c.describe(ev) for c in result.surviving]
    node.status = PROVEN if result.success else FAILED


def do_ind_proof_slice(
    sys: TransitionSystem,
    inst: Instance,
    safety: Lemma,
    grammar: Grammar,
    cfg: InferenceConfig,
    states: StateSet,
    cache_dir=None,
) -> Tuple[ProofGraph, List[NodeId]]:
    """Construye el grafo de prueba a partir de la propiedad de seguridad; válido si no hay fallas"""
    start = time.monotonic()
    deadline = start + cfg.global_timeout
    projections = ProjectionCache(states, cache_dir, inst)
    matcher = LemmaMatcher(sys, inst, cfg)
    graph = ProofGraph(sys, inst, safety)
    graph.reach_count = states.count
    graph.reach_provenance = states.provenance.label()
    graph.lemmas[safety.name].fingerprint = matcher.fingerprint(safety)
    if time.monotonic() < deadline:
        _discharge(graph, safety.name, cfg, deadline)

    iteration = 0
    while graph.pending:
        if time.monotonic() >= deadline:
            for node_id in graph.pending:
                graph.actions[node_id].status = FAILED
                graph.actions[node_id].reason = "timeout"
            graph.timed_out = True
            logger.warning("global timeout after %d iterations", iteration)
            break
        node = pick_node(graph)
        iteration += 1
        lemma = graph.lemmas[node.lemma].lemma
        action = sys.action(node.action)
        result = local_inv_inference(sys, inst, grammar, lemma, action, cfg, projections, deadline=deadline)
        _record(node, result, evaluator_for(sys, inst))
        for sup in result.support:
            reused, fp = matcher.find(graph, sup)
            if reused is None:
                name = graph.fresh_name()
                graph.add_lemma(sup.renamed(name), graph.lemmas[node.lemma].depth + 1)
                graph.lemmas[name].fingerprint = fp
                _discharge(graph, name, cfg, deadline)
                reused = name
            graph.add_edge(reused, node.id)
        logger.info(
            "iteration=%d lemma=%s action=%s slice=%d/%d projected=%d ctis=%d candidates=%d outcome=%s",
            iteration, node.lemma, node.action, result.slice.size if result.slice else 0, len(sys.variables),
            result.projected, result.ctis_generated - result.ctis_eliminated, result.candidates, node.status,
        )
        if logger.isEnabledFor(logging.DEBUG):
            graph.check_well_formed()
    return graph, graph.failed


# ============================================================
# VALIDEZ Y EXTRACCIÓN
# ============================================================

def check_graph_validity(
    graph: ProofGraph,
    sys: TransitionSystem,
    inst: Instance,
    mode: str = "auto",
    cfg: Optional[InferenceConfig] = None,
) -> ValidityReport:
    """Re-verifica cada obligación local con su soporte y la iniciación de cada lema"""
    cfg = cfg or InferenceConfig()
    graph.check_well_formed()
    ev = evaluator_for(sys, inst)
    ordered = [n.lemma for n in graph.ordered_lemmas()]
    failures = {name for name, _ in check_initiation(sys, inst, ordered)}
    initiation = [InitiationVerdict(lemma=lem.name, valid=lem.name not in failures) for lem in ordered]
    nodes: List[NodeVerdict] = []
    modes = set()
    for lem in ordered:
        for action in sys.actions:
            node_id = (lem.name, action.name)
            batch = generate_ctis(
                sys, inst, Obligation(lem, action, tuple(graph.support_lemmas(node_id)), mode=mode), 5,
                seed=node_seed(cfg.seed, lem.name, action.name), **_cti_options(cfg),
            )
            modes.add(batch.mode)
            nodes.append(NodeVerdict(
                lemma=lem.name,
                action=action.name,
                valid=not batch.ctis,
                mode=batch.provenance,
                ctis=len(batch.ctis),
                support=graph.support(node_id),
                sample=[c.describe(ev) for c in batch.ctis],
            ))
    valid = not failures and all(n.valid for n in nodes)
    return ValidityReport(
        valid=valid,
        mode="exhaustive" if modes <= {"exhaustive"} else "randomized",
        initiation=initiation,
        nodes=nodes,
    )


def extract_invariant(graph: ProofGraph, name: str = "Ind") -> Lemma:
    """Conjunción de todos los lemas del grafo; solo para grafos válidos"""
    if not graph.is_valid:
        bad = ", ".join(f"({l}, {a})" for l, a in graph.failed + graph.pending)
        raise GraphError(f"cannot extract an invariant from an invalid graph: {bad}")
    return Lemma(name, (), conjoin([n.lemma.formula for n in graph.ordered_lemmas()]))
