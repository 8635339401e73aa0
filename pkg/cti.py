import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from errors import SearchTimeout
from evaluator import Evaluator, State, evaluator_for
from expressions import And
from slicing import lemma_vars, var_slice
from system import Action, Instance, Lemma, TransitionSystem
from values import SATURATION, Value, _sat_mul, encode_state, encode_value, format_value

logger = logging.getLogger(__name__)

# Cada cuántas hojas se consulta el reloj
_CLOCK_EVERY = 2048


# ============================================================
# CONTRAEJEMPLOS A LA INDUCCIÓN
# ============================================================

@dataclass(frozen=True)
class CTI:
    """(pre, acción, binding, post): pre cumple L y su soporte, post viola L"""
    prestate: State
    action: str
    binding: Tuple[Tuple[str, Value], ...]
    poststate: State
    lemma: str
    key: bytes = field(default=b"", compare=False, repr=False)

    @property
    def params(self) -> Dict[str, Value]:
        return dict(self.binding)

    def describe(self, ev: Evaluator) -> Dict[str, object]:
        return {
            "lemma": self.lemma,
            "action": self.action,
            "binding": {k: format_value(v) for k, v in self.binding},
            "prestate": ev.describe(self.prestate),
            "poststate": ev.describe(self.poststate),
        }


@dataclass(frozen=True)
class Obligation:
    """(L ∧ Supp ∧ A) ⇒ L' para una acción; `mode` es auto, exhaustive o randomized"""
    lemma: Lemma
    action: Action
    support: Tuple[Lemma, ...] = ()
    mode: str = "auto"

    @property
    def id(self) -> Tuple[str, str]:
        return (self.lemma.name, self.action.name)


@dataclass
class CTIBatch:
    """Resultado de una búsqueda: CTIs en orden canónico y el modo realmente usado"""
    ctis: List[CTI]
    mode: str
    footprint: Tuple[str, ...]
    nominal_size: int
    examined: int
    budget: int = 0

    def __len__(self) -> int:
        return len(self.ctis)

    def __iter__(self):
        return iter(self.ctis)

    @property
    def provenance(self) -> str:
        return "exhaustive" if self.mode == "exhaustive" else f"randomized({self.budget})"


@dataclass(frozen=True)
class SearchPlan:
    targets: Tuple[Lemma, ...]
    support: Tuple[Lemma, ...]
    action: str
    order: Tuple[str, ...]


def type_state_space_size(sys: TransitionSystem, inst: Instance, variables: Optional[Iterable[str]] = None) -> int:
    """Producto saturado de los cardinales de dominio de cada variable"""
    domains = evaluator_for(sys, inst).domains
    names = sys.var_names if variables is None else [v for v in sys.var_names if v in set(variables)]
    total = 1
    for name in names:
        total = _sat_mul(total, domains.count(sys.var_types[name]))
    return total


def eliminates(candidate: Lemma, cti: CTI, sys: TransitionSystem, inst: Instance) -> bool:
    """True si el pre-estado del CTI viola el candidato"""
    return not evaluator_for(sys, inst).eval(candidate.formula, cti.prestate)


# ============================================================
# MOTOR DE BÚSQUEDA
# ============================================================

class CTISearch:
    """Enumera o muestrea asignaciones del footprint de una obligación; el resto queda fijo al primer Init"""

    def __init__(self, sys: TransitionSystem, inst: Instance):
        self.sys = sys
        self.inst = inst
        self.ev = evaluator_for(sys, inst)
        self.base: State = self.ev.initial_states()[0]
        self.encoding_order = sorted(range(len(sys.var_names)), key=lambda i: sys.var_names[i])

    def footprint(self, targets: Sequence[Lemma], support: Sequence[Lemma], action: Action) -> List[str]:
        names = set()
        for lemma in targets:
            names |= var_slice(lemma, action).variables
        for lemma in support:
            names |= lemma_vars(lemma)
        return [v for v in self.sys.var_names if v in names]

    def plan(self, targets: Sequence[Lemma], support: Sequence[Lemma], action: Action) -> SearchPlan:
        """Orden de variables voraz: primero la que completa más restricciones, luego la de dominio menor"""
        order = self.variable_order(self.footprint(targets, support, action), (*support, *targets))
        return SearchPlan(tuple(targets), tuple(support), action.name, order)

    def variable_order(self, names: Sequence[str], lemmas: Sequence[Lemma]) -> Tuple[str, ...]:
        remaining = list(names)
        constraints = [lemma_vars(l) for l in lemmas]
        assigned: set = set()
        order: List[str] = []
        while remaining:
            def score(v):
                done = sum(1 for c in constraints if v in c and c <= assigned | {v})
                return (-done, self.ev.domains.count(self.sys.var_types[v]), self.sys.var_index[v])
            best = min(remaining, key=score)
            order.append(best)
            assigned.add(best)
            remaining.remove(best)
        return tuple(order)

    def levels(self, order: Sequence[str], lemmas: Sequence[Lemma]) -> List[List[Callable]]:
        """Cada lema se evalúa en el nivel donde queda asignada su última variable"""
        position = {v: i for i, v in enumerate(order)}
        levels: List[List[Callable]] = [[] for _ in order]
        for lemma in lemmas:
            level = max((position[v] for v in lemma_vars(lemma)), default=0)
            if levels:
                levels[level].append(self.ev.compile(lemma.formula))
        return levels

    def nominal_size(self, plan: SearchPlan) -> int:
        return type_state_space_size(self.sys, self.inst, plan.order)

    def key(self, pre: State, action: str, binding: Tuple[Tuple[str, Value], ...]) -> bytes:
        out = bytearray(encode_state(pre, self.encoding_order))
        out += action.encode("utf-8") + b"\x00"
        for _, v in binding:
            encode_value(v, out)
        return bytes(out)

    def _checker(self, plan: SearchPlan):
        """Devuelve (restricciones por nivel, función que produce los CTIs de un pre-estado completo)"""
        ev = self.ev
        action = ev.action(self.sys.action(plan.action))
        levels = self.levels(plan.order, (*plan.support, *plan.targets))
        targets = [(l.name, ev.compile(l.formula)) for l in plan.targets]
        needs_check_at_root = not plan.order
        root_checks = [ev.compile(l.formula) for l in (*plan.support, *plan.targets)] if needs_check_at_root else []

        def ctis_of(state: State) -> List[CTI]:
            found: List[CTI] = []
            for b in action.bindings(state):
                post = action.apply(state, b)
                if post is None:
                    continue
                for name, fn in targets:
                    if not fn(post, None, {}):
                        binding = tuple(b.items())
                        found.append(CTI(state, plan.action, binding, post, name, self.key(state, plan.action, binding)))
                        break
            return found

        return levels, root_checks, ctis_of

    # ------------------------------------------------------------
    # Modo exhaustivo
    # ------------------------------------------------------------

    def run_exhaustive(
        self,
        plan: SearchPlan,
        limit: int,
        first: Optional[Tuple[int, int]] = None,
        deadline: Optional[float] = None,
    ) -> Tuple[List[CTI], int]:
        """DFS por el footprint evaluando cada restricción en cuanto sus variables están asignadas"""
        levels, root_checks, ctis_of = self._checker(plan)
        if not plan.order:
            s = tuple(self.base)
            found = ctis_of(s) if all(fn(s, None, {}) for fn in root_checks) else []
            return found[:limit], 1
        return self.walk(plan.order, levels, ctis_of, limit, first, deadline)

    def walk(
        self,
        order: Sequence[str],
        levels: List[List[Callable]],
        leaf: Callable[[State], list],
        limit: int,
        first: Optional[Tuple[int, int]] = None,
        deadline: Optional[float] = None,
    ) -> Tuple[list, int]:
        """DFS sobre `order` con poda por nivel; `leaf` produce los hallazgos de cada asignación completa"""
        idx = [self.sys.var_index[v] for v in order]
        domains = [self.ev.domains.values(self.sys.var_types[v]) for v in order]
        state = list(self.base)
        found: list = []
        leaves = 0
        depth = len(order)

        def rec(k: int) -> bool:
            nonlocal leaves
            values = domains[k]
            if k == 0 and first is not None:
                values = values[first[0]:first[1]]
            checks = levels[k]
            i = idx[k]
            for value in values:
                state[i] = value
                if checks:
                    ok = True
                    for fn in checks:
                        if not fn(state, None, {}):
                            ok = False
                            break
                    if not ok:
                        continue
                if k + 1 < depth:
                    if rec(k + 1):
                        return True
                else:
                    leaves += 1
                    if deadline is not None and leaves % _CLOCK_EVERY == 0 and time.monotonic() > deadline:
                        raise SearchTimeout("local obligation timed out")
                    found.extend(leaf(tuple(state)))
                    if len(found) >= limit:
                        return True
            state[i] = self.base[i]
            return False

        rec(0)
        return found[:limit], leaves

    # ------------------------------------------------------------
    # Modo aleatorio
    # ------------------------------------------------------------

    def run_block(self, plan: SearchPlan, seed: int, block: int, draws: int) -> Tuple[List[CTI], int]:
        """Muestreo por rechazo de `draws` estados bien tipados; semilla función pura de (seed, block)"""
        levels, root_checks, ctis_of = self._checker(plan)
        rng = np.random.default_rng([seed, block])
        idx = [self.sys.var_index[v] for v in plan.order]
        types = [self.sys.var_types[v] for v in plan.order]
        checks = [fn for level in levels for fn in level] + root_checks
        found: List[CTI] = []
        accepted = 0
        for _ in range(draws):
            state = list(self.base)
            for i, t in zip(idx, types):
                state[i] = self.ev.domains.sample(t, rng)
            s = tuple(state)
            if all(fn(s, None, {}) for fn in checks):
                accepted += 1
                found.extend(ctis_of(s))
        return found, accepted


def _exhaustive_part(sys, inst, plan, limit, first, deadline):
    return CTISearch(sys, inst).run_exhaustive(plan, limit, first, deadline)


def _random_block(sys, inst, plan, seed, block, draws):
    return CTISearch(sys, inst).run_block(plan, seed, block, draws)


def search(
    sys: TransitionSystem,
    inst: Instance,
    targets: Sequence[Lemma],
    support: Sequence[Lemma],
    action: Action,
    max_ctis: int,
    mode: str = "auto",
    seed: int = 0,
    exhaustive_bound: int = 2 ** 20,
    samples: int = 20000,
    block_size: int = 1024,
    workers: int = 1,
    deadline: Optional[float] = None,
) -> CTIBatch:
    engine = CTISearch(sys, inst)
    plan = engine.plan(targets, support, action)
    nominal = engine.nominal_size(plan)
    if mode == "auto":
        mode = "exhaustive" if nominal < SATURATION and nominal <= exhaustive_bound else "randomized"
    elif mode == "exhaustive" and nominal >= SATURATION:
        logger.warning("state space of %s saturates; falling back to randomized search", action.name)
        mode = "randomized"
    parallel = Parallel(n_jobs=workers) if workers > 1 else None

    if mode == "exhaustive":
        if parallel is not None and plan.order:
            n_first = engine.ev.domains.count(sys.var_types[plan.order[0]])
            step = max(1, -(-n_first // (workers * 2)))
            ranges = [(lo, min(lo + step, n_first)) for lo in range(0, n_first, step)]
            parts = parallel(delayed(_exhaustive_part)(sys, inst, plan, max_ctis, r, deadline) for r in ranges)
            ctis = [c for part, _ in parts for c in part][:max_ctis]
            examined = sum(n for _, n in parts)
        else:
            ctis, examined = engine.run_exhaustive(plan, max_ctis, deadline=deadline)
        return CTIBatch(ctis, "exhaustive", plan.order, nominal, examined)

    n_blocks = max(1, -(-samples // block_size))
    seen: Dict[bytes, CTI] = {}
    accepted = 0
    batch = max(1, workers)
    done = False
    for start in range(0, n_blocks, batch):
        if deadline is not None and time.monotonic() > deadline:
            raise SearchTimeout("local obligation timed out")
        ids = range(start, min(start + batch, n_blocks))
        draws = [min(block_size, samples - b * block_size) for b in ids]
        if parallel is not None:
            parts = parallel(delayed(_random_block)(sys, inst, plan, seed, b, d) for b, d in zip(ids, draws))
        else:
            parts = [engine.run_block(plan, seed, b, d) for b, d in zip(ids, draws)]
        # el corte se decide bloque a bloque para no depender del tamaño del lote
        for part, n in parts:
            accepted += n
            for c in part:
                seen.setdefault(c.key, c)
            if len(seen) >= max_ctis:
                done = True
                break
        if done:
            break
    ctis = sorted(seen.values(), key=lambda c: c.key)[:max_ctis]
    return CTIBatch(ctis, "randomized", plan.order, nominal, accepted, budget=samples)


def generate_ctis(
    sys: TransitionSystem,
    inst: Instance,
    ob: Obligation,
    max_ctis: int,
    seed: int = 0,
    **options,
) -> CTIBatch:
    """CTIs de (L ∧ Supp ∧ A) ⇒ L'; vacío en modo exhaustivo prueba la validez local"""
    return search(sys, inst, [ob.lemma], list(ob.support), ob.action, max_ctis, mode=ob.mode, seed=seed, **options)


# ============================================================
# ORÁCULO DE INVARIANTE INDUCTIVO
# ============================================================

@dataclass
class InductiveReport:
    valid: bool
    initiation_failures: List[Tuple[str, State]]
    consecution: Dict[str, CTIBatch]

    @property
    def mode(self) -> str:
        modes = {b.mode for b in self.consecution.values()}
        return "exhaustive" if modes <= {"exhaustive"} else "randomized"


def split_conjuncts(lemmas: Sequence[Lemma]) -> List[Lemma]:
    """Separa las conjunciones cerradas de nivel superior en lemas propios para podar antes"""
    parts: List[Lemma] = []
    for lemma in lemmas:
        if lemma.prefix or not isinstance(lemma.body, And):
            parts.append(lemma)
            continue
        parts.extend(Lemma(f"{lemma.name}.{i}", (), arg) for i, arg in enumerate(lemma.body.args, 1))
    return parts


def check_initiation(sys: TransitionSystem, inst: Instance, lemmas: Sequence[Lemma]) -> List[Tuple[str, State]]:
    ev = evaluator_for(sys, inst)
    failures = []
    for s in ev.initial_states():
        for lemma in lemmas:
            if not ev.eval(lemma.formula, s):
                failures.append((lemma.name, s))
    return failures


def check_inductive(
    sys: TransitionSystem,
    inst: Instance,
    lemmas: Sequence[Lemma],
    max_ctis: int = 5,
    seed: int = 0,
    exhaustive_bound: int = 10 ** 7,
    **options,
) -> InductiveReport:
    """Iniciación en cada estado inicial y consecución de la conjunción para cada acción"""
    lemmas = split_conjuncts(lemmas)
    init_failures = check_initiation(sys, inst, lemmas)
    consecution: Dict[str, CTIBatch] = {}
    for action in sys.actions:
        consecution[action.name] = search(
            sys, inst, lemmas, [], action, max_ctis, seed=seed, exhaustive_bound=exhaustive_bound, **options,
        )
    valid = not init_failures and all(len(b) == 0 for b in consecution.values())
    return InductiveReport(valid, init_failures, consecution)


@dataclass
class ComparisonReport:
    """Estados bien tipados donde las dos conjunciones difieren (hasta `limit` por lado)"""
    left_only: List[State]
    right_only: List[State]
    examined: int

    @property
    def equivalent(self) -> bool:
        return not self.left_only and not self.right_only


def counter_models(
    sys: TransitionSystem,
    inst: Instance,
    premises: Sequence[Lemma],
    conclusions: Sequence[Lemma],
    limit: int = 5,
    deadline: Optional[float] = None,
) -> Tuple[List[State], int]:
    """Estados que cumplen todas las premisas y violan alguna conclusión, por DFS exhaustivo"""
    engine = CTISearch(sys, inst)
    names = set()
    for lemma in (*premises, *conclusions):
        names |= lemma_vars(lemma)
    order = engine.variable_order([v for v in sys.var_names if v in names], premises)
    goals = [engine.ev.compile(l.formula) for l in conclusions]

    def violations(state: State) -> List[State]:
        return [state] if not all(fn(state, None, {}) for fn in goals) else []

    if not order:
        s = tuple(engine.base)
        holds = all(engine.ev.eval(l.formula, s) for l in premises)
        return (violations(s) if holds else [])[:limit], 1
    return engine.walk(order, engine.levels(order, premises), violations, limit, deadline=deadline)


def compare_invariants(
    sys: TransitionSystem,
    inst: Instance,
    left: Sequence[Lemma],
    right: Sequence[Lemma],
    limit: int = 5,
) -> ComparisonReport:
    """Equivalencia semántica de dos conjuntos de lemas sobre todos los estados bien tipados"""
    left, right = split_conjuncts(left), split_conjuncts(right)
    left_only, n_left = counter_models(sys, inst, left, right, limit)
    right_only, n_right = counter_models(sys, inst, right, left, limit)
    return ComparisonReport(left_only, right_only, n_left + n_right)
