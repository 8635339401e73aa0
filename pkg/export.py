import hashlib
import logging
from pathlib import Path
from typing import List, Optional

from graphviz import Digraph
from pydantic import ValidationError

from errors import GapError, GraphError
from models import (
    GRAPH_FORMAT, ActionNodeRecord, EdgeRecord, GraphDocument, InferenceConfig, LemmaNodeRecord, SliceRecord,
    ValidityReport,
)
from parser import parse_lemma_text
from proof_graph import FAILED, PROVEN, UNPROVEN, ActionNode, ProofGraph
from printer import format_grammar
from slicing import VarSlice
from system import Grammar, Instance, TransitionSystem

logger = logging.getLogger(__name__)

FAILED_FILL = "#f4cccc"
PROVEN_FILL = "#d9ead3"


def _lemma_id(name: str) -> str:
    return f"L_{name}"


def _action_id(node: ActionNode) -> str:
    return f"A_{node.lemma}__{node.action}"


def _visible(graph: ProofGraph, node: ActionNode) -> bool:
    """Los nodos de acción auto-inductivos sin soporte se omiten del dibujo"""
    return not (node.self_inductive and node.status == PROVEN and not graph.support(node.id))


def _factor(graph: ProofGraph, node: ActionNode) -> str:
    if not node.projected or not graph.reach_count:
        return ""
    return f" ({graph.reach_count / node.projected:.1f}x)"


# ============================================================
# DOT
# ============================================================

def to_dot(graph: ProofGraph) -> str:
    """Lemas como elipses, nodos de acción como cajas con slice, |R proyectado| y factor de reducción"""
    dot = Digraph(name=graph.sys.name, comment=f"proof graph for {graph.root}")
    dot.attr(rankdir="TB")
    for lem in graph.ordered_lemmas():
        status = graph.lemma_status(lem.name)
        attrs = {"shape": "ellipse"}
        if lem.name == graph.root:
            attrs["penwidth"] = "2"
        if status == FAILED:
            attrs.update(style="filled", fillcolor=FAILED_FILL)
        dot.node(_lemma_id(lem.name), label=lem.name, **attrs)
    for node in graph.actions.values():
        if not _visible(graph, node):
            continue
        lines = [node.action]
        if node.slice is not None:
            lines.append(node.slice.label(graph.sys))
            lines.append(f"|R|={node.projected}{_factor(graph, node)}")
        attrs = {"shape": "box"}
        if node.status == FAILED:
            attrs.update(style="filled", fillcolor=FAILED_FILL, color="red")
        elif node.status == UNPROVEN:
            attrs["style"] = "dashed"
        dot.node(_action_id(node), label="\\n".join(lines), **attrs)
        dot.edge(_action_id(node), _lemma_id(node.lemma))
    for src, (lemma, action) in graph.edges:
        dot.edge(_lemma_id(src), _action_id(graph.actions[(lemma, action)]))
    return dot.source


# ============================================================
# REPORTE
# ============================================================

def to_report(graph: ProofGraph, validity: Optional[ValidityReport] = None) -> str:
    """Resumen legible; cada falla con su slice, tamaño de gramática rebanada y hasta 5 CTIs sobrevivientes"""
    lines: List[str] = [
        f"protocol: {graph.sys.name}",
        f"root: {graph.root}",
        f"reachable states: {graph.reach_count} [{graph.reach_provenance}]",
        f"lemmas: {len(graph.lemmas)}",
        f"outcome: {'valid' if graph.is_valid else 'partial'}" + (" (global timeout)" if graph.timed_out else ""),
        "",
        "lemmas:",
    ]
    for lem in graph.ordered_lemmas():
        lines.append(f"  {lem.name} [{graph.lemma_status(lem.name)}] {lem.text}")
    lines += ["", "obligations:"]
    for node in graph.actions.values():
        support = ", ".join(graph.support(node.id)) or "-"
        tag = "self-inductive" if node.self_inductive else f"support: {support}"
        check = f" checked: {node.provenance}" if node.provenance else ""
        lines.append(f"  ({node.lemma}, {node.action}) {node.status} {tag}{check}")
    if graph.failed:
        lines += ["", "failures:"]
    for lemma, action in graph.failed:
        node = graph.actions[(lemma, action)]
        lines.append(f"  ({lemma}, {action}): {node.reason or 'failed'}")
        if node.slice is not None:
            lines.append(f"    slice: {node.slice.label(graph.sys)} ({node.slice.size}/{len(graph.sys.variables)} vars)")
        lines.append(f"    sliced grammar: {node.grammar_size} predicates")
        lines.append(f"    ctis: {node.ctis_generated} generated, {node.ctis_eliminated} eliminated")
        partial = graph.support(node.id)
        if partial:
            lines.append(f"    partial support: {', '.join(partial)}")
        for i, cti in enumerate(node.surviving[:5], 1):
            binding = ", ".join(f"{k}={v}" for k, v in cti["binding"].items())
            lines.append(f"    cti {i}: {cti['action']}({binding})")
            for var, value in cti["prestate"].items():
                lines.append(f"      {var} = {value}")
    if validity is not None:
        lines += ["", f"validity: {'valid' if validity.valid else 'INVALID'} ({validity.mode})"]
        for verdict in validity.initiation:
            if not verdict.valid:
                lines.append(f"  initiation fails for {verdict.lemma}")
        for verdict in validity.invalid_nodes:
            lines.append(f"  ({verdict.lemma}, {verdict.action}): {verdict.ctis} CTIs [{verdict.mode}]")
    return "\n".join(lines) + "\n"


# ============================================================
# ARCHIVO DE GRAFO
# ============================================================

def grammar_hash(grammar: Optional[Grammar]) -> str:
    if grammar is None:
        return ""
    return hashlib.sha256(format_grammar(grammar).encode("utf-8")).hexdigest()


def _slice_record(sys: TransitionSystem, vs: Optional[VarSlice]) -> Optional[SliceRecord]:
    if vs is None:
        return None

    def ordered(names):
        return [v for v in sys.var_names if v in names]

    return SliceRecord(
        variables=ordered(vs.variables),
        vars_pre=ordered(vs.vars_pre),
        vars_lemma=ordered(vs.vars_lemma),
        coi_primed=ordered(vs.coi_primed),
    )


def to_document(graph: ProofGraph, cfg: Optional[InferenceConfig] = None,
                grammar: Optional[Grammar] = None) -> GraphDocument:
    sys = graph.sys
    return GraphDocument(
        protocol=sys.name,
        root=graph.root,
        spec_hash=sys.digest,
        inst_hash=graph.inst.digest,
        grammar_hash=grammar_hash(grammar),
        reach_count=graph.reach_count,
        reach_provenance=graph.reach_provenance,
        timed_out=graph.timed_out,
        config=cfg or InferenceConfig(),
        lemmas=[
            LemmaNodeRecord(name=n.name, formula=n.text, depth=n.depth, origin=n.origin)
            for n in graph.ordered_lemmas()
        ],
        actions=[
            ActionNodeRecord(
                lemma=n.lemma,
                action=n.action,
                status=n.status,
                provenance=n.provenance,
                self_inductive=n.self_inductive,
                slice=_slice_record(sys, n.slice),
                projected=n.projected,
                grammar_size=n.grammar_size,
                rounds=n.rounds,
                ctis_generated=n.ctis_generated,
                ctis_eliminated=n.ctis_eliminated,
                candidates=n.candidates,
                reason=n.reason,
                surviving=n.surviving,
            )
            for n in graph.actions.values()
        ],
        edges=[EdgeRecord(source=src, lemma=lem, action=act) for src, (lem, act) in graph.edges],
        failed=[[lem, act] for lem, act in graph.failed],
    )


def dump_graph(graph: ProofGraph, cfg: Optional[InferenceConfig] = None, grammar: Optional[Grammar] = None) -> str:
    return to_document(graph, cfg, grammar).model_dump_json(indent=2) + "\n"


def read_document(text: str) -> GraphDocument:
    try:
        doc = GraphDocument.model_validate_json(text)
    except ValidationError as err:
        raise GraphError(f"malformed graph file: {err.error_count()} validation errors") from err
    if doc.format != GRAPH_FORMAT:
        raise GraphError(f"unsupported graph format {doc.format!r}, expected {GRAPH_FORMAT!r}")
    return doc


def from_document(doc: GraphDocument, sys: TransitionSystem, inst: Instance, allow_mismatch: bool = False) -> ProofGraph:
    """
    Reconstruye el grafo; los hashes de spec e instancia deben coincidir salvo `allow_mismatch`.
    Un hash vacío (grafo escrito a mano) no se verifica.
    """
    if not (doc.spec_hash and doc.inst_hash):
        logger.warning("graph file for %s does not pin spec/instance hashes", doc.protocol)
    if not allow_mismatch:
        if doc.spec_hash and doc.spec_hash != sys.digest:
            raise GraphError(f"graph was built for a different spec (hash {doc.spec_hash[:16]}, expected {sys.digest[:16]})")
        if doc.inst_hash and doc.inst_hash != inst.digest:
            raise GraphError(f"graph was built for a different instance (hash {doc.inst_hash[:16]}, expected {inst.digest[:16]})")
    if not doc.lemmas or doc.lemmas[0].name != doc.root:
        raise GraphError("graph file must list the root lemma first")
    try:
        lemmas = [parse_lemma_text(rec.formula, sys, rec.name) for rec in doc.lemmas]
    except GapError as err:
        raise GraphError(f"cannot parse lemma in graph file: {err}") from err
    graph = ProofGraph(sys, inst, lemmas[0])
    graph.lemmas[doc.root].depth = doc.lemmas[0].depth
    for rec, lemma in zip(doc.lemmas[1:], lemmas[1:]):
        graph.add_lemma(lemma, rec.depth, rec.origin)
    graph.reach_count = doc.reach_count
    graph.reach_provenance = doc.reach_provenance
    graph.timed_out = doc.timed_out
    for rec in doc.actions:
        node = graph.actions.get((rec.lemma, rec.action))
        if node is None:
            raise GraphError(f"action node ({rec.lemma}, {rec.action}) does not match the spec")
        node.status = rec.status
        node.provenance = rec.provenance
        node.self_inductive = rec.self_inductive
        if rec.slice is not None:
            node.slice = VarSlice(
                rec.lemma, rec.action, frozenset(rec.slice.variables), frozenset(rec.slice.vars_pre),
                frozenset(rec.slice.vars_lemma), frozenset(rec.slice.coi_primed),
            )
        node.projected = rec.projected
        node.grammar_size = rec.grammar_size
        node.rounds = rec.rounds
        node.ctis_generated = rec.ctis_generated
        node.ctis_eliminated = rec.ctis_eliminated
        node.candidates = rec.candidates
        node.reason = rec.reason
        node.surviving = [c.model_dump() for c in rec.surviving]
    for edge in doc.edges:
        if edge.source not in graph.lemmas or (edge.lemma, edge.action) not in graph.actions:
            raise GraphError(f"edge {edge.source} -> ({edge.lemma}, {edge.action}) refers to a missing node")
        if not graph.add_edge(edge.source, (edge.lemma, edge.action)):
            raise GraphError(f"invalid edge {edge.source} -> ({edge.lemma}, {edge.action})")
    graph.check_well_formed()
    return graph


def load_graph(path, sys: TransitionSystem, inst: Instance, allow_mismatch: bool = False) -> ProofGraph:
    text = Path(path).read_text(encoding="utf-8")
    return from_document(read_document(text), sys, inst, allow_mismatch)


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as err:
        raise GapError(f"cannot write {path}: {err}") from err
    logger.debug("wrote %s", path)
    return path
