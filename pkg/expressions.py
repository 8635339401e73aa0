from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Set, Tuple

from errors import SourceSpan


# ============================================================
# AST DE EXPRESIONES
# ============================================================

@dataclass(frozen=True)
class Expr:
    """Nodo base; el span no participa en la igualdad estructural"""
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Primed(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class ConstRef(Expr):
    name: str


@dataclass(frozen=True)
class SortRef(Expr):
    name: str


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class AtomLit(Expr):
    sort: str
    name: str


@dataclass(frozen=True)
class EmptySet(Expr):
    pass


@dataclass(frozen=True)
class SetEnum(Expr):
    items: Tuple[Expr, ...]


@dataclass(frozen=True)
class SetComp(Expr):
    var: str
    domain: Expr
    cond: Expr


@dataclass(frozen=True)
class TupleExpr(Expr):
    items: Tuple[Expr, ...]


@dataclass(frozen=True)
class Apply(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class FnLit(Expr):
    var: str
    domain: Expr
    body: Expr


@dataclass(frozen=True)
class FnUpdate(Expr):
    fn: Expr
    index: Expr
    value: Expr


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class And(Expr):
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class Or(Expr):
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class Implies(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Compare(Expr):
    op: str  # "=", "/=", "<", "<=", ">", ">="
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Member(Expr):
    elem: Expr
    collection: Expr
    negated: bool = False


@dataclass(frozen=True)
class Subset(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class SetOp(Expr):
    op: str  # "cup", "cap", "minus"
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Arith(Expr):
    op: str  # "+", "-"
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Quant(Expr):
    kind: str  # "forall", "exists"
    var: str
    domain: Expr
    body: Expr


TRUE = BoolLit(True)
FALSE = BoolLit(False)


# ============================================================
# RECORRIDOS
# ============================================================

def children(e: Expr) -> Iterator[Expr]:
    for f in fields(e):
        if f.name == "span":
            continue
        value = getattr(e, f.name)
        if isinstance(value, Expr):
            yield value
        elif isinstance(value, tuple):
            for item in value:
                if isinstance(item, Expr):
                    yield item


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(children(node))


def primed_vars(e: Expr) -> Set[str]:
    return {n.name for n in walk(e) if isinstance(n, Primed)}


def free_params(e: Expr) -> Set[str]:
    """Parámetros libres (no ligados por cuantificadores, comprensiones ni literales de función)"""
    if isinstance(e, Param):
        return {e.name}
    if isinstance(e, (Quant, SetComp, FnLit)):
        inner = e.body if isinstance(e, (Quant, FnLit)) else e.cond
        return free_params(e.domain) | (free_params(inner) - {e.var})
    result: Set[str] = set()
    for child in children(e):
        result |= free_params(child)
    return result


def conjoin(args) -> Expr:
    args = tuple(args)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(args)


def disjoin(args) -> Expr:
    args = tuple(args)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(args)


def state_vars(e: Expr) -> Set[str]:
    """Variables de estado sin prima referenciadas sintácticamente"""
    return {n.name for n in walk(e) if isinstance(n, Var)}
