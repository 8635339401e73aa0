from typing import Dict, List, Optional

from errors import Diagnostic, SpecError
from expressions import (
    And, Apply, Arith, AtomLit, BoolLit, Compare, ConstRef, EmptySet, Expr, FnLit, FnUpdate, Implies,
    IntLit, Member, Not, Or, Param, Primed, Quant, SetComp, SetEnum, SetOp, SortRef, Subset, TupleExpr, Var,
)
from values import ANY_INT, BoolType, FnType, IntType, SetType, SortType, TupleType, Type

BOOL = BoolType()


def compatible(a: Optional[Type], b: Optional[Type]) -> bool:
    """Igualdad estructural, con enteros intercambiables y `None` como elemento del conjunto vacío"""
    if a is None or b is None:
        return True
    if isinstance(a, IntType) and isinstance(b, IntType):
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, SetType):
        return compatible(a.elem, b.elem)
    if isinstance(a, TupleType):
        return len(a.elems) == len(b.elems) and all(compatible(x, y) for x, y in zip(a.elems, b.elems))
    if isinstance(a, FnType):
        return compatible(a.domain, b.domain) and compatible(a.codomain, b.codomain)
    return a == b


def merge(a: Optional[Type], b: Optional[Type]) -> Optional[Type]:
    """El más informativo de dos tipos compatibles"""
    if a is None:
        return b
    if b is None:
        return a
    if isinstance(a, SetType):
        return SetType(merge(a.elem, b.elem))
    if isinstance(a, IntType) and a == ANY_INT:
        return b
    return a


class TypeChecker:
    """Inferencia de tipos sobre el AST; levanta SpecError con el span del nodo culpable"""

    def __init__(self, sys, allow_primed: bool = False):
        self.sys = sys
        self.allow_primed = allow_primed

    def fail(self, e: Expr, message: str):
        raise SpecError.single(e.span, message)

    def expect_bool(self, e: Expr, env: Dict[str, Type]) -> None:
        t = self.infer(e, env)
        if not isinstance(t, BoolType):
            self.fail(e, f"expected a boolean expression, found {t}")

    def set_elem(self, e: Expr, env: Dict[str, Type]) -> Optional[Type]:
        t = self.infer(e, env)
        if not isinstance(t, SetType):
            self.fail(e, f"expected a set, found {t}")
        return t.elem

    def infer(self, e: Expr, env: Dict[str, Type]) -> Optional[Type]:
        if isinstance(e, Var):
            if e.name not in self.sys.var_types:
                self.fail(e, f"unknown variable {e.name}")
            return self.sys.var_types[e.name]
        if isinstance(e, Primed):
            if not self.allow_primed:
                self.fail(e, f"primed reference {e.name}' is not allowed here")
            if e.name not in self.sys.var_types:
                self.fail(e, f"unknown variable {e.name}")
            return self.sys.var_types[e.name]
        if isinstance(e, Param):
            if e.name not in env:
                self.fail(e, f"unbound parameter {e.name}")
            return env[e.name]
        if isinstance(e, ConstRef):
            if e.name not in self.sys.const_types:
                self.fail(e, f"unknown constant {e.name}")
            return self.sys.const_types[e.name]
        if isinstance(e, SortRef):
            if e.name not in self.sys.sort_names:
                self.fail(e, f"unknown sort {e.name}")
            return SetType(SortType(e.name))
        if isinstance(e, BoolLit):
            return BOOL
        if isinstance(e, IntLit):
            return ANY_INT
        if isinstance(e, AtomLit):
            return SortType(e.sort)
        if isinstance(e, EmptySet):
            return SetType(None)
        if isinstance(e, SetEnum):
            elem: Optional[Type] = None
            for item in e.items:
                t = self.infer(item, env)
                if not compatible(elem, t):
                    self.fail(item, f"set elements mix {elem} and {t}")
                elem = merge(elem, t)
            return SetType(elem)
        if isinstance(e, SetComp):
            elem = self.set_elem(e.domain, env)
            self.expect_bool(e.cond, {**env, e.var: elem})
            return SetType(elem)
        if isinstance(e, TupleExpr):
            return TupleType(tuple(self.infer(x, env) for x in e.items))
        if isinstance(e, Apply):
            fn = self.infer(e.fn, env)
            if not isinstance(fn, FnType):
                self.fail(e.fn, f"cannot apply a value of type {fn}")
            arg = self.infer(e.arg, env)
            if not compatible(fn.domain, arg):
                self.fail(e.arg, f"function expects {fn.domain}, got {arg}")
            return fn.codomain
        if isinstance(e, FnLit):
            elem = self.set_elem(e.domain, env)
            body = self.infer(e.body, {**env, e.var: elem})
            return FnType(elem, body)
        if isinstance(e, FnUpdate):
            fn = self.infer(e.fn, env)
            if not isinstance(fn, FnType):
                self.fail(e.fn, f"cannot update a value of type {fn}")
            index = self.infer(e.index, env)
            if not compatible(fn.domain, index):
                self.fail(e.index, f"function expects {fn.domain}, got {index}")
            value = self.infer(e.value, env)
            if not compatible(fn.codomain, value):
                self.fail(e.value, f"function returns {fn.codomain}, got {value}")
            return fn
        if isinstance(e, Not):
            self.expect_bool(e.arg, env)
            return BOOL
        if isinstance(e, (And, Or)):
            for arg in e.args:
                self.expect_bool(arg, env)
            return BOOL
        if isinstance(e, Implies):
            self.expect_bool(e.left, env)
            self.expect_bool(e.right, env)
            return BOOL
        if isinstance(e, Compare):
            left = self.infer(e.left, env)
            right = self.infer(e.right, env)
            if e.op in ("=", "/="):
                if not compatible(left, right):
                    self.fail(e, f"cannot compare {left} with {right}")
            elif not (isinstance(left, IntType) and isinstance(right, IntType)):
                self.fail(e, f"operator {e.op} needs integers")
            return BOOL
        if isinstance(e, Member):
            elem = self.set_elem(e.collection, env)
            t = self.infer(e.elem, env)
            if not compatible(elem, t):
                self.fail(e.elem, f"{t} cannot be a member of a set of {elem}")
            return BOOL
        if isinstance(e, Subset):
            left = self.set_elem(e.left, env)
            right = self.set_elem(e.right, env)
            if not compatible(left, right):
                self.fail(e, f"cannot compare sets of {left} and {right}")
            return BOOL
        if isinstance(e, SetOp):
            left = self.set_elem(e.left, env)
            right = self.set_elem(e.right, env)
            if not compatible(left, right):
                self.fail(e, f"set operation mixes {left} and {right}")
            return SetType(merge(left, right))
        if isinstance(e, Arith):
            left = self.infer(e.left, env)
            right = self.infer(e.right, env)
            if not (isinstance(left, IntType) and isinstance(right, IntType)):
                self.fail(e, f"operator {e.op} needs integers")
            return merge(left, right)
        if isinstance(e, Quant):
            elem = self.set_elem(e.domain, env)
            self.expect_bool(e.body, {**env, e.var: elem})
            return BOOL
        self.fail(e, f"unsupported expression {type(e).__name__}")


def binding_env(sys, bindings, env: Optional[Dict[str, Type]] = None) -> Dict[str, Type]:
    """Tipos de las variables ligadas por un prefijo (cada dominio puede usar las anteriores)"""
    checker = TypeChecker(sys)
    env = dict(env or {})
    for b in bindings:
        env[b.name] = checker.set_elem(b.domain, env)
    return env


# ============================================================
# VALIDACIÓN DEL SISTEMA COMPLETO
# ============================================================

def check_system(sys) -> None:
    """Valida nombres únicos, Init, acciones y lemmas; reúne todos los diagnósticos"""
    diagnostics: List[Diagnostic] = []

    def guard(fn, *args):
        try:
            fn(*args)
        except SpecError as err:
            diagnostics.extend(err.diagnostics)

    def unique(items, what):
        seen = set()
        for item in items:
            if item.name in seen:
                diagnostics.append(Diagnostic(getattr(item, "span", None), f"duplicate {what} name {item.name}"))
            seen.add(item.name)

    unique(sys.sorts, "sort")
    unique(sys.consts, "constant")
    unique(sys.variables, "variable")
    unique(sys.actions, "action")
    unique(sys.lemmas, "lemma")

    plain = TypeChecker(sys)
    assigned = set()
    for clause in sys.init:
        if clause.var in assigned:
            diagnostics.append(Diagnostic(clause.span, f"variable {clause.var} is initialized twice"))
        assigned.add(clause.var)
        guard(_check_init_clause, plain, sys, clause)
    for v in sys.variables:
        if v.name not in assigned:
            diagnostics.append(Diagnostic(v.span, f"init does not assign variable {v.name}"))

    for action in sys.actions:
        guard(_check_action, sys, action)
    for lemma in sys.lemmas:
        guard(check_lemma, sys, lemma)

    if diagnostics:
        raise SpecError(diagnostics)


def _check_init_clause(checker: TypeChecker, sys, clause) -> None:
    declared = sys.var_types.get(clause.var)
    if declared is None:
        raise SpecError.single(clause.span, f"unknown variable {clause.var}")
    t = checker.infer(clause.expr, {})
    if clause.kind == "in":
        if not isinstance(t, SetType) or not compatible(t.elem, declared):
            raise SpecError.single(clause.expr.span, f"initializer of {clause.var} must be a set of {declared}")
    elif not compatible(t, declared):
        raise SpecError.single(clause.expr.span, f"{clause.var} is {declared}, initializer is {t}")


def _check_action(sys, action) -> None:
    env = binding_env(sys, action.params)
    TypeChecker(sys).expect_bool(action.pre, env)
    names = [name for name, _ in action.updates]
    if names != list(sys.var_names):
        raise SpecError.single(action.span, f"action {action.name} must update every variable exactly once")
    checker = TypeChecker(sys)
    for name, expr in action.updates:
        t = checker.infer(expr, env)
        if not compatible(t, sys.var_types[name]):
            raise SpecError.single(expr.span, f"{name}' is {sys.var_types[name]}, update is {t}")


def check_lemma(sys, lemma) -> None:
    env = binding_env(sys, lemma.prefix)
    TypeChecker(sys).expect_bool(lemma.body, env)
