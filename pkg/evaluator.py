import logging
from functools import lru_cache
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from errors import EvalError
from expressions import (
    And, Apply, Arith, AtomLit, BoolLit, Compare, ConstRef, EmptySet, Expr, FnLit, FnUpdate, Implies,
    IntLit, Member, Not, Or, Param, Primed, Quant, SetComp, SetEnum, SetOp, SortRef, Subset, TupleExpr, Var,
    free_params, state_vars,
)
from system import Action, Instance, TransitionSystem
from values import FnVal, TypeDomains, Value, contains_int, format_value, sorted_values

logger = logging.getLogger(__name__)

State = Tuple[Value, ...]
Binding = Dict[str, Value]
Compiled = Callable[[Sequence[Value], Optional[Sequence[Value]], Dict[str, Value]], Value]

_MISSING = object()


# ============================================================
# COMPILACIÓN DE EXPRESIONES A CLAUSURAS
# ============================================================

class Evaluator:
    """Evalúa expresiones sobre estados representados como tuplas en el orden de `layout`

    `layout` por defecto es el orden de declaración de las variables; con un subconjunto se
    evalúan fórmulas sobre estados proyectados.
    """

    def __init__(self, sys: TransitionSystem, inst: Instance, layout: Optional[Sequence[str]] = None):
        self.sys = sys
        self.inst = inst
        self.domains = TypeDomains(inst)
        self.layout: Tuple[str, ...] = tuple(layout) if layout is not None else sys.var_names
        self.position = {name: i for i, name in enumerate(self.layout)}
        self._compiled: Dict[Expr, Compiled] = {}
        self._actions: Dict[str, "CompiledAction"] = {}

    def compile(self, expr: Expr) -> Compiled:
        fn = self._compiled.get(expr)
        if fn is None:
            fn = self._compile(expr)
            self._compiled[expr] = fn
        return fn

    def eval(
        self,
        expr: Expr,
        state: Sequence[Value],
        primed: Optional[Sequence[Value]] = None,
        params: Optional[Mapping[str, Value]] = None,
    ) -> Value:
        return self.compile(expr)(state, primed, dict(params or {}))

    def _compile(self, e: Expr) -> Compiled:
        c = self.compile
        if isinstance(e, Var):
            if e.name not in self.position:
                raise EvalError(f"variable {e.name} is not part of this state layout", e.span)
            i = self.position[e.name]
            return lambda s, p, b: s[i]
        if isinstance(e, Primed):
            if e.name not in self.position:
                raise EvalError(f"variable {e.name} is not part of this state layout", e.span)
            i = self.position[e.name]

            def primed(s, p, b):
                if p is None:
                    raise EvalError(f"{e.name}' needs a primed state", e.span)
                return p[i]
            return primed
        if isinstance(e, Param):
            name = e.name

            def param(s, p, b):
                try:
                    return b[name]
                except KeyError:
                    raise EvalError(f"unbound parameter {name}", e.span)
            return param
        if isinstance(e, ConstRef):
            value = self.inst.consts[e.name]
            return lambda s, p, b: value
        if isinstance(e, SortRef):
            value = frozenset(self.inst.sort_elements(e.name))
            return lambda s, p, b: value
        if isinstance(e, (BoolLit, IntLit)):
            value = e.value
            return lambda s, p, b: value
        if isinstance(e, AtomLit):
            matches = [a for a in self.inst.sort_elements(e.sort) if a.name == e.name]
            if not matches:
                raise EvalError(f"{e.name} is not an element of {e.sort}", e.span)
            value = matches[0]
            return lambda s, p, b: value
        if isinstance(e, EmptySet):
            value = frozenset()
            return lambda s, p, b: value
        if isinstance(e, SetEnum):
            items = [c(x) for x in e.items]
            return lambda s, p, b: frozenset([f(s, p, b) for f in items])
        if isinstance(e, TupleExpr):
            items = [c(x) for x in e.items]
            if len(items) == 2:
                f0, f1 = items
                return lambda s, p, b: (f0(s, p, b), f1(s, p, b))
            return lambda s, p, b: tuple([f(s, p, b) for f in items])
        if isinstance(e, Apply):
            fn, arg = c(e.fn), c(e.arg)

            def apply(s, p, b):
                f = fn(s, p, b)
                x = arg(s, p, b)
                try:
                    return f[x]
                except (KeyError, TypeError):
                    raise EvalError(f"{format_value(x)} is outside the function domain", e.span)
            return apply
        if isinstance(e, FnUpdate):
            fn, index, value = c(e.fn), c(e.index), c(e.value)

            def update(s, p, b):
                f = fn(s, p, b)
                x = index(s, p, b)
                try:
                    return f.updated(x, value(s, p, b))
                except KeyError:
                    raise EvalError(f"{format_value(x)} is outside the function domain", e.span)
            return update
        if isinstance(e, FnLit):
            domain, body, var = c(e.domain), c(e.body), e.var

            def fn_literal(s, p, b):
                old = b.get(var, _MISSING)
                try:
                    pairs = []
                    for x in domain(s, p, b):
                        b[var] = x
                        pairs.append((x, body(s, p, b)))
                    return FnVal(pairs)
                finally:
                    _restore(b, var, old)
            return fn_literal
        if isinstance(e, SetComp):
            domain, cond, var = c(e.domain), c(e.cond), e.var

            def comprehension(s, p, b):
                old = b.get(var, _MISSING)
                try:
                    out = []
                    for x in domain(s, p, b):
                        b[var] = x
                        if cond(s, p, b):
                            out.append(x)
                    return frozenset(out)
                finally:
                    _restore(b, var, old)
            return comprehension
        if isinstance(e, Not):
            arg = c(e.arg)
            return lambda s, p, b: not arg(s, p, b)
        if isinstance(e, And):
            args = [c(a) for a in e.args]
            if len(args) == 2:
                a0, a1 = args
                return lambda s, p, b: a0(s, p, b) and a1(s, p, b)

            def conj(s, p, b):
                for f in args:
                    if not f(s, p, b):
                        return False
                return True
            return conj
        if isinstance(e, Or):
            args = [c(a) for a in e.args]
            if len(args) == 2:
                a0, a1 = args
                return lambda s, p, b: a0(s, p, b) or a1(s, p, b)

            def disj(s, p, b):
                for f in args:
                    if f(s, p, b):
                        return True
                return False
            return disj
        if isinstance(e, Implies):
            left, right = c(e.left), c(e.right)
            return lambda s, p, b: (not left(s, p, b)) or right(s, p, b)
        if isinstance(e, Compare):
            left, right = c(e.left), c(e.right)
            op = e.op
            if op == "=":
                return lambda s, p, b: left(s, p, b) == right(s, p, b)
            if op == "/=":
                return lambda s, p, b: left(s, p, b) != right(s, p, b)
            if op == "<":
                return lambda s, p, b: left(s, p, b) < right(s, p, b)
            if op == "<=":
                return lambda s, p, b: left(s, p, b) <= right(s, p, b)
            if op == ">":
                return lambda s, p, b: left(s, p, b) > right(s, p, b)
            return lambda s, p, b: left(s, p, b) >= right(s, p, b)
        if isinstance(e, Member):
            elem, coll = c(e.elem), c(e.collection)
            if e.negated:
                return lambda s, p, b: elem(s, p, b) not in coll(s, p, b)
            return lambda s, p, b: elem(s, p, b) in coll(s, p, b)
        if isinstance(e, Subset):
            left, right = c(e.left), c(e.right)
            return lambda s, p, b: left(s, p, b) <= right(s, p, b)
        if isinstance(e, SetOp):
            left, right = c(e.left), c(e.right)
            if e.op == "cup":
                return lambda s, p, b: left(s, p, b) | right(s, p, b)
            if e.op == "cap":
                return lambda s, p, b: left(s, p, b) & right(s, p, b)
            return lambda s, p, b: left(s, p, b) - right(s, p, b)
        if isinstance(e, Arith):
            left, right = c(e.left), c(e.right)
            if e.op == "+":
                return lambda s, p, b: left(s, p, b) + right(s, p, b)
            return lambda s, p, b: left(s, p, b) - right(s, p, b)
        if isinstance(e, Quant):
            domain, body, var = c(e.domain), c(e.body), e.var
            universal = e.kind == "forall"

            def quant(s, p, b):
                old = b.get(var, _MISSING)
                try:
                    for x in domain(s, p, b):
                        b[var] = x
                        if bool(body(s, p, b)) != universal:
                            return not universal
                    return universal
                finally:
                    _restore(b, var, old)
            return quant
        raise EvalError(f"cannot evaluate {type(e).__name__}", e.span)

    # ------------------------------------------------------------
    # Acciones
    # ------------------------------------------------------------

    def action(self, action: Action) -> "CompiledAction":
        compiled = self._actions.get(action.name)
        if compiled is None:
            compiled = CompiledAction(self, action)
            self._actions[action.name] = compiled
        return compiled

    def apply_action(self, state: State, action: Action, params: Mapping[str, Value]) -> Optional[State]:
        return self.action(action).apply(state, dict(params))

    def successors(self, state: State) -> List[Tuple[str, Binding, State]]:
        """Transiciones habilitadas en orden acción × binding lexicográfico"""
        out: List[Tuple[str, Binding, State]] = []
        for action in self.sys.actions:
            compiled = self.action(action)
            for binding in compiled.bindings(state):
                nxt = compiled.apply(state, binding)
                if nxt is not None:
                    out.append((action.name, binding, nxt))
        return out

    def initial_states(self) -> List[State]:
        """Producto cartesiano de los inicializadores, en orden de las cláusulas de Init"""
        partial: List[List[Any]] = [[None] * len(self.layout)]
        for clause in self.sys.init:
            if clause.var not in self.position:
                continue
            i = self.position[clause.var]
            fn = self.compile(clause.expr)
            extended = []
            for s in partial:
                value = fn(s, None, {})
                choices = [value] if clause.kind == "eq" else sorted_values(value)
                for choice in choices:
                    nxt = list(s)
                    nxt[i] = choice
                    extended.append(nxt)
            partial = extended
        seen = set()
        states: List[State] = []
        for s in partial:
            state = tuple(s)
            if state not in seen:
                self.check_types(state, "initial state")
                seen.add(state)
                states.append(state)
        return states

    def check_types(self, state: Sequence[Value], where: str) -> None:
        for name, value in zip(self.layout, state):
            if not self.domains.conforms(value, self.sys.var_types[name]):
                raise EvalError(f"{where}: value {format_value(value)} of {name} does not conform to {self.sys.var_types[name]}")

    def state_from(self, assignment: Mapping[str, Value]) -> State:
        missing = [n for n in self.layout if n not in assignment]
        if missing:
            raise EvalError(f"state does not bind {', '.join(missing)}")
        return tuple(assignment[n] for n in self.layout)

    def describe(self, state: Sequence[Value]) -> Dict[str, str]:
        return {name: format_value(v) for name, v in zip(self.layout, state)}


def _restore(b: Dict[str, Value], var: str, old: Any) -> None:
    if old is _MISSING:
        b.pop(var, None)
    else:
        b[var] = old


class CompiledAction:
    """Guarda y actualizaciones compiladas; las actualizaciones identidad reutilizan el valor previo"""

    def __init__(self, ev: Evaluator, action: Action):
        self.ev = ev
        self.action = action
        self.name = action.name
        self.params = action.param_names
        self.pre = ev.compile(action.pre)
        self.updates: List[Optional[Compiled]] = []
        self.int_checks: List[Tuple[int, Any]] = []
        for i, name in enumerate(ev.layout):
            if action.is_identity(name):
                self.updates.append(None)
                continue
            self.updates.append(ev.compile(action.update_of(name)))
            if contains_int(ev.sys.var_types[name]):
                self.int_checks.append((i, ev.sys.var_types[name]))
        self.domains = [ev.compile(p.domain) for p in action.params]
        static = all(not state_vars(p.domain) and not (free_params(p.domain) & set(self.params)) for p in action.params)
        self._static: Optional[List[Binding]] = self._enumerate(()) if static else None

    def _enumerate(self, state) -> List[Binding]:
        result: List[Binding] = []

        def rec(k: int, b: Dict[str, Value]):
            if k == len(self.params):
                result.append(dict(b))
                return
            for x in sorted_values(self.domains[k](state, None, b)):
                b[self.params[k]] = x
                rec(k + 1, b)
            b.pop(self.params[k], None)

        rec(0, {})
        return result

    def bindings(self, state: Sequence[Value]) -> List[Binding]:
        if self._static is not None:
            return self._static
        return self._enumerate(state)

    def apply(self, state: Sequence[Value], binding: Dict[str, Value]) -> Optional[State]:
        if not self.pre(state, None, binding):
            return None
        nxt = tuple([state[i] if f is None else f(state, None, binding) for i, f in enumerate(self.updates)])
        for i, t in self.int_checks:
            if not self.ev.domains.conforms(nxt[i], t):
                raise EvalError(f"action {self.name} sets {self.ev.layout[i]} to {format_value(nxt[i])}, outside {t}")
        return nxt


# ============================================================
# API FUNCIONAL
# ============================================================

@lru_cache(maxsize=64)
def evaluator_for(sys: TransitionSystem, inst: Instance, layout: Optional[Tuple[str, ...]] = None) -> Evaluator:
    return Evaluator(sys, inst, layout)


def eval_expr(expr: Expr, state: State, sys: TransitionSystem, inst: Instance,
              primed: Optional[State] = None, params: Optional[Mapping[str, Value]] = None) -> Value:
    return evaluator_for(sys, inst).eval(expr, state, primed, params)


def apply_action(state: State, action: Action, params: Mapping[str, Value],
                 sys: TransitionSystem, inst: Instance) -> Optional[State]:
    return evaluator_for(sys, inst).apply_action(state, action, params)


def successors(state: State, sys: TransitionSystem, inst: Instance) -> List[Tuple[str, Binding, State]]:
    return evaluator_for(sys, inst).successors(state)
