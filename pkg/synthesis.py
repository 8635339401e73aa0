import logging
import time
import zlib
from dataclasses import dataclass, field, replace
from functools import reduce
from itertools import combinations, product
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cti import CTI, Obligation, generate_ctis
from errors import GapError, SearchTimeout, SpecError
from evaluator import Evaluator, State, evaluator_for
from expressions import Not, disjoin, free_params, state_vars
from printer import format_lemma
from reachability import ProjectionCache, StateSet
from slicing import VarSlice, grammar_slice, var_slice
from system import Action, Grammar, Instance, Lemma, TransitionSystem
from typecheck import TypeChecker, binding_env
from values import canonical_key, sorted_values

logger = logging.getLogger(__name__)

# Prefiltro sobre las primeras filas de R antes de evaluar el conjunto completo
HEAD_ROWS = 256
CANDIDATE_NAME = "Candidate"


# ============================================================
# CANDIDATOS
# ============================================================

@dataclass(frozen=True)
class Candidate:
    """Cláusula de hasta k literales (predicado, polaridad) bajo una plantilla"""
    template: int
    literals: Tuple[Tuple[int, bool], ...]
    lemma: Lemma = field(compare=False, repr=False)
    text: str = field(compare=False)
    fingerprint: bytes = field(default=b"", compare=False, repr=False)

    @property
    def n_literals(self) -> int:
        return len(self.literals)

    def rank_key(self) -> Tuple[int, str]:
        return (self.n_literals, self.text)


class CandidateSpace:
    """Espacio de cláusulas de una gramática (rebanada): conteo, enumeración, unranking y realización"""

    def __init__(self, sys: TransitionSystem, inst: Instance, grammar: Grammar, max_literals: Optional[int] = None):
        self.sys = sys
        self.inst = inst
        self.grammar = grammar
        self.k = max_literals or grammar.max_literals
        self.usable: List[List[int]] = [self._usable(t) for t in range(len(grammar.templates))]
        self.blocks: List[Tuple[int, int, int]] = []
        for m in range(1, self.k + 1):
            for t, preds in enumerate(self.usable):
                count = comb(len(preds), m) * 2 ** m
                if count:
                    self.blocks.append((t, m, count))
        self.total = sum(count for _, _, count in self.blocks)

    def _usable(self, t: int) -> List[int]:
        template = self.grammar.templates[t]
        for b in template.bindings:
            if state_vars(b.domain) or free_params(b.domain):
                raise GapError(f"template domain of {b.name} must be a sort or a constant")
        env = binding_env(self.sys, template.bindings)
        result = []
        for i, p in enumerate(self.grammar.predicates):
            if not p.params <= set(template.params):
                continue
            try:
                TypeChecker(self.sys).expect_bool(p.expr, env)
            except SpecError:
                continue
            result.append(i)
        return result

    def unrank(self, index: int) -> Tuple[int, Tuple[Tuple[int, bool], ...]]:
        for t, m, count in self.blocks:
            if index < count:
                combo_rank, bits = divmod(index, 2 ** m)
                positions = _unrank_combination(len(self.usable[t]), m, combo_rank)
                literals = tuple(
                    (self.usable[t][pos], not (bits >> (m - 1 - j)) & 1) for j, pos in enumerate(positions)
                )
                return t, literals
            index -= count
        raise IndexError("candidate index out of range")

    def enumerate_all(self):
        for t, m, _ in self.blocks:
            for combo in combinations(self.usable[t], m):
                for bits in range(2 ** m):
                    yield t, tuple((p, not (bits >> (m - 1 - j)) & 1) for j, p in enumerate(combo))

    def realize(self, t: int, literals: Tuple[Tuple[int, bool], ...]) -> Candidate:
        template = self.grammar.templates[t]
        parts = []
        used = set()
        for p, positive in literals:
            pred = self.grammar.predicates[p]
            used |= pred.params
            parts.append(pred.expr if positive else Not(pred.expr))
        prefix = tuple(b for b in template.bindings if b.name in used)
        lemma = Lemma(CANDIDATE_NAME, prefix, disjoin(parts))
        return Candidate(t, literals, lemma, format_lemma(lemma))


def _unrank_combination(n: int, m: int, rank: int) -> Tuple[int, ...]:
    """Combinación lexicográfica número `rank` de m elementos de range(n)"""
    result = []
    start = 0
    for slot in range(m):
        for x in range(start, n):
            block = comb(n - x - 1, m - slot - 1)
            if rank < block:
                result.append(x)
                start = x + 1
                break
            rank -= block
    return tuple(result)


# ============================================================
# TABLAS DE VERDAD DE PREDICADOS
# ============================================================

class PredicateTable:
    """Arrays booleanos (estados, d_1..d_m) por predicado; ejes de tamaño 1 para parámetros no usados"""

    def __init__(self, ev: Evaluator, space: CandidateSpace, template: int, states: Sequence[State]):
        self.ev = ev
        self.space = space
        self.states = list(states)
        self.n = len(self.states)
        tmpl = space.grammar.templates[template]
        self.kinds = [b.kind for b in tmpl.bindings]
        self.names = [b.name for b in tmpl.bindings]
        self.domains = [tuple(sorted_values(ev.eval(b.domain, ()))) for b in tmpl.bindings]
        self._pos: Dict[int, np.ndarray] = {}
        self._neg: Dict[int, np.ndarray] = {}

    def table(self, p: int) -> np.ndarray:
        arr = self._pos.get(p)
        if arr is None:
            arr = self._build(p)
            self._pos[p] = arr
        return arr

    def negated(self, p: int) -> np.ndarray:
        arr = self._neg.get(p)
        if arr is None:
            arr = ~self.table(p)
            self._neg[p] = arr
        return arr

    def _build(self, p: int) -> np.ndarray:
        pred = self.space.grammar.predicates[p]
        used = [j for j, name in enumerate(self.names) if name in pred.params]
        shape = [len(self.domains[j]) if j in used else 1 for j in range(len(self.names))]
        rows = self.states if pred.variables else self.states[:1]
        names = [self.names[j] for j in used]
        combos = list(product(*(self.domains[j] for j in used)))
        fn = self.ev.compile(pred.expr)
        b: Dict[str, object] = {}
        flat = []
        for s in rows:
            for combo in combos:
                for name, value in zip(names, combo):
                    b[name] = value
                flat.append(bool(fn(s, None, b)))
        return np.array(flat, dtype=bool).reshape([len(rows)] + shape)

    def truth(self, cand: Candidate) -> np.ndarray:
        """Valor de verdad del candidato en cada estado"""
        if self.n == 0:
            return np.ones(0, dtype=bool)
        arrays = [self.table(p) if positive else self.negated(p) for p, positive in cand.literals]
        acc = reduce(np.logical_or, arrays)
        for axis in range(len(self.kinds), 0, -1):
            acc = acc.all(axis=axis) if self.kinds[axis - 1] == "forall" else acc.any(axis=axis)
        if acc.shape[0] != self.n:
            acc = np.broadcast_to(acc, (self.n,))
        return acc


class TableSet:
    """Una PredicateTable por plantilla sobre el mismo conjunto de estados"""

    def __init__(self, ev: Evaluator, space: CandidateSpace, states: Sequence[State]):
        self.states = list(states)
        self.tables = [PredicateTable(ev, space, t, self.states) for t in range(len(space.grammar.templates))]

    def truth(self, cand: Candidate) -> np.ndarray:
        return self.tables[cand.template].truth(cand)

    def __len__(self) -> int:
        return len(self.states)


def evaluation_sample(ev: Evaluator, states: StateSet, size: int, rng: np.random.Generator) -> List[State]:
    """Primeros `size` estados de R proyectado en orden canónico, completados con estados bien tipados al azar"""
    ordered = sorted(states.states, key=lambda s: tuple(canonical_key(v) for v in s))[:size]
    types = [ev.sys.var_types[v] for v in ev.layout]
    while len(ordered) < size:
        ordered.append(tuple(ev.domains.sample(t, rng) for t in types))
    return ordered


# ============================================================
# OPERACIONES
# ============================================================

def generate_candidates(
    space: CandidateSpace,
    n_invs: int,
    seed,
    sample: Optional[TableSet] = None,
) -> List[Candidate]:
    """Enumeración exhaustiva si el espacio cabe en n_invs, si no muestreo sin reemplazo; dedup por huella"""
    if space.total == 0:
        return []
    if space.total <= n_invs:
        raw = [space.realize(t, lits) for t, lits in space.enumerate_all()]
    else:
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(space.total, size=n_invs, replace=False))
        raw = [space.realize(*space.unrank(int(i))) for i in picks]
    if sample is None:
        return raw
    raw.sort(key=Candidate.rank_key)
    seen = set()
    unique: List[Candidate] = []
    for cand in raw:
        fp = np.packbits(sample.truth(cand)).tobytes()
        if fp in seen:
            continue
        seen.add(fp)
        unique.append(replace(cand, fingerprint=fp))
    return unique


def filter_invariants(
    cands: Sequence[Candidate],
    states: StateSet,
    space: CandidateSpace,
    tables: Optional[Tuple[TableSet, TableSet]] = None,
) -> List[Candidate]:
    """Candidatos verdaderos en todos los estados (proyectados), en el mismo orden"""
    if states.count == 0:
        return list(cands)
    if tables is None:
        tables = reachable_tables(space, states)
    head, full = tables
    kept = []
    for cand in cands:
        if not head.truth(cand).all():
            continue
        if full is not head and not full.truth(cand).all():
            continue
        kept.append(cand)
    return kept


def reachable_tables(space: CandidateSpace, states: StateSet) -> Tuple[TableSet, TableSet]:
    ev = evaluator_for(space.sys, space.inst, states.schema)
    full = TableSet(ev, space, states.states)
    if states.count <= HEAD_ROWS:
        return full, full
    return TableSet(ev, space, states.states[:HEAD_ROWS]), full


# ============================================================
# ALGORITMO LOCAL (SÍNTESIS CON CTIs)
# ============================================================

@dataclass
class LocalResult:
    lemma: str
    action: str
    support: List[Lemma] = field(default_factory=list)
    success: bool = False
    rounds: int = 0
    ctis_generated: int = 0
    ctis_eliminated: int = 0
    candidates: int = 0
    wall_time: float = 0.0
    slice: Optional[VarSlice] = None
    projected: int = 0
    grammar_size: int = 0
    provenance: str = "exhaustive"
    reason: str = ""
    surviving: List[CTI] = field(default_factory=list)


def node_seed(seed: int, lemma: str, action: str) -> int:
    return zlib.crc32(f"{seed}:{lemma}:{action}".encode("utf-8"))


def _cti_options(cfg) -> dict:
    return {
        "exhaustive_bound": cfg.cti_exhaustive_bound,
        "samples": cfg.cti_samples,
        "block_size": cfg.cti_block_size,
        "workers": cfg.workers,
    }


def local_inv_inference(
    sys: TransitionSystem,
    inst: Instance,
    grammar: Grammar,
    lemma: Lemma,
    action: Action,
    cfg,
    projections: ProjectionCache,
    deadline: Optional[float] = None,
    cti_mode: str = "auto",
) -> LocalResult:
    """Busca Supp tal que (L ∧ Supp ∧ A) ⇒ L', con lemas que valen en R proyectado"""
    start = time.monotonic()
    node_deadline = start + cfg.node_timeout
    if deadline is not None:
        node_deadline = min(node_deadline, deadline)
    vs = var_slice(lemma, action)
    sliced = grammar_slice(grammar, vs.variables)
    result = LocalResult(lemma.name, action.name, slice=vs, grammar_size=len(sliced.predicates))
    seed = node_seed(cfg.seed, lemma.name, action.name)
    options = _cti_options(cfg)

    def ctis_for(support: List[Lemma]):
        ob = Obligation(lemma, action, tuple(support), mode=cti_mode)
        batch = generate_ctis(sys, inst, ob, cfg.n_ctis, seed=seed, deadline=node_deadline, **options)
        result.ctis_generated += len(batch)
        result.provenance = batch.provenance
        return batch.ctis

    remaining: List[CTI] = []
    try:
        remaining = ctis_for([])
        if not remaining:
            result.success = True
            return result
        states = projections.get(vs.variables)
        result.projected = states.count
        space = CandidateSpace(sys, inst, sliced, cfg.max_literals)
        ev = evaluator_for(sys, inst, states.schema)
        rng = np.random.default_rng([seed, 0])
        sample = TableSet(ev, space, evaluation_sample(ev, states, cfg.eval_sample_size, rng))
        r_tables = reachable_tables(space, states)
        exhaustive_space = space.total <= cfg.n_invs
        chosen = set()

        for round_no in range(1, cfg.max_rounds + 1):
            result.rounds = round_no
            cands = generate_candidates(space, cfg.n_invs, [seed, round_no], sample)
            result.candidates += len(cands)
            invariants = [c for c in filter_invariants(cands, states, space, r_tables) if c.text not in chosen]
            logger.debug("node=(%s,%s) round=%d candidates=%d invariants=%d",
                         lemma.name, action.name, round_no, len(cands), len(invariants))
            while remaining and invariants:
                remaining = _eliminate(ev, space, invariants, remaining, result, chosen, node_deadline)
                if remaining:
                    break
                remaining = ctis_for(result.support)
                if not remaining:
                    result.success = True
                    return result
            if exhaustive_space:
                break
        result.reason = "no candidate eliminates the remaining CTIs"
    except SearchTimeout:
        result.reason = "timeout"
    finally:
        result.wall_time = time.monotonic() - start
    result.surviving = list(remaining[:5]) if not result.success else []
    return result


def _eliminate(
    ev: Evaluator,
    space: CandidateSpace,
    invariants: List[Candidate],
    ctis: List[CTI],
    result: LocalResult,
    chosen: set,
    deadline: float,
) -> List[CTI]:
    """Elección voraz: el invariante que elimina más CTIs, luego menos literales, luego texto"""
    idx = [ev.sys.var_index[v] for v in ev.layout]
    rows: Dict[State, int] = {}
    row_of = np.empty(len(ctis), dtype=np.int64)
    for i, c in enumerate(ctis):
        row_of[i] = rows.setdefault(tuple(c.prestate[j] for j in idx), len(rows))
    tables = TableSet(ev, space, list(rows))
    truth = np.vstack([tables.truth(c) for c in invariants]) if invariants else np.ones((0, len(rows)), dtype=bool)
    alive = np.ones(len(ctis), dtype=bool)
    order = sorted(range(len(invariants)), key=lambda i: invariants[i].rank_key())
    while alive.any():
        if time.monotonic() > deadline:
            raise SearchTimeout("local obligation timed out")
        weights = np.bincount(row_of[alive], minlength=len(rows))
        scores = (~truth).astype(np.int64) @ weights
        best, best_score = None, 0
        for i in order:
            if scores[i] > best_score:
                best, best_score = i, int(scores[i])
        if best is None:
            break
        cand = invariants[best]
        chosen.add(cand.text)
        result.support.append(cand.lemma)
        result.ctis_eliminated += best_score
        alive &= truth[best][row_of]
        truth[best] = True
        logger.debug("picked %s eliminating %d CTIs, %d left", cand.text, best_score, int(alive.sum()))
    return [c for c, keep in zip(ctis, alive) if keep]
