import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

from errors import GapError, SourceSpan
from expressions import Expr, Quant, Var
from values import Atom, Type, Value


# ============================================================
# DECLARACIONES DEL PROTOCOLO
# ============================================================

@dataclass(frozen=True)
class SortDecl:
    """Sort simbólico; `elements` solo para sorts enumerados en la propia spec"""
    name: str
    elements: Optional[Tuple[str, ...]] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: Type
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: Type
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class InitClause:
    """x = e (determinista) o x in S (elección no determinista)"""
    var: str
    kind: str
    expr: Expr
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class QuantBinding:
    """Variable ligada de un prefijo de cuantificadores (lemmas, plantillas, parámetros de acción)"""
    kind: str  # "forall" | "exists"
    name: str
    domain: Expr
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Action:
    """Acción con guarda: Pre ∧ x_i' = f_i(...) para cada variable (identidad incluida)"""
    name: str
    params: Tuple[QuantBinding, ...]
    pre: Expr
    updates: Tuple[Tuple[str, Expr], ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def update_of(self, var: str) -> Expr:
        for name, expr in self.updates:
            if name == var:
                return expr
        raise GapError(f"action {self.name} has no update for {var}")

    def is_identity(self, var: str) -> bool:
        upd = self.update_of(var)
        return isinstance(upd, Var) and upd.name == var

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.params)


@dataclass(frozen=True)
class Lemma:
    name: str
    prefix: Tuple[QuantBinding, ...]
    body: Expr

    @cached_property
    def formula(self) -> Expr:
        """Fórmula cerrada: el cuerpo bajo su prefijo de cuantificadores"""
        expr = self.body
        for b in reversed(self.prefix):
            expr = Quant(b.kind, b.name, b.domain, expr)
        return expr

    def renamed(self, name: str) -> "Lemma":
        return Lemma(name, self.prefix, self.body)


@dataclass(frozen=True, eq=False)
class TransitionSystem:
    """M = (I, T): sorts, constantes, variables tipadas, Init y acciones ordenadas"""
    name: str
    sorts: Tuple[SortDecl, ...]
    consts: Tuple[ConstDecl, ...]
    variables: Tuple[VarDecl, ...]
    init: Tuple[InitClause, ...]
    actions: Tuple[Action, ...]
    lemmas: Tuple[Lemma, ...] = ()

    @cached_property
    def var_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @cached_property
    def var_index(self) -> Dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    @cached_property
    def var_types(self) -> Dict[str, Type]:
        return {v.name: v.type for v in self.variables}

    @cached_property
    def const_types(self) -> Dict[str, Type]:
        return {c.name: c.type for c in self.consts}

    @cached_property
    def sort_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.sorts)

    def action(self, name: str) -> Action:
        for a in self.actions:
            if a.name == name:
                return a
        raise GapError(f"unknown action {name}")

    def lemma(self, name: str) -> Lemma:
        for lem in self.lemmas:
            if lem.name == name:
                return lem
        raise GapError(f"unknown lemma {name}")

    @cached_property
    def digest(self) -> str:
        """Hash del texto canónico (pretty-print); estable entre procesos"""
        from printer import format_system

        return hashlib.sha256(format_system(self).encode("utf-8")).hexdigest()

    def __hash__(self) -> int:
        return hash(self.digest)

    def __eq__(self, other) -> bool:
        return isinstance(other, TransitionSystem) and self.structure() == other.structure()

    def structure(self) -> tuple:
        return (self.name, self.sorts, self.consts, self.variables, self.init, self.actions, self.lemmas)


# ============================================================
# INSTANCIAS FINITAS
# ============================================================

@dataclass(eq=False)
class Instance:
    """Elementos de cada sort, valores de constantes y rangos enteros"""
    sorts: Dict[str, Tuple[Atom, ...]]
    consts: Dict[str, Value]
    int_ranges: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def sort_elements(self, name: str) -> Tuple[Atom, ...]:
        try:
            return self.sorts[name]
        except KeyError:
            raise GapError(f"instance does not bind sort {name}")

    @cached_property
    def atoms_by_key(self) -> Dict[Tuple[int, int], Atom]:
        return {(a.rank, a.index): a for atoms in self.sorts.values() for a in atoms}

    @cached_property
    def digest(self) -> str:
        from printer import format_instance

        return hashlib.sha256(format_instance(self).encode("utf-8")).hexdigest()

    def __hash__(self) -> int:
        return hash(self.digest)

    def __eq__(self, other) -> bool:
        return isinstance(other, Instance) and self.digest == other.digest


# ============================================================
# GRAMÁTICAS DE PREDICADOS
# ============================================================

@dataclass(frozen=True)
class Template:
    """Prefijo de cuantificadores, p.ej. ∀i,j,k ∈ Node ∃Q ∈ Quorum ∀v ∈ Value"""
    bindings: Tuple[QuantBinding, ...]

    @property
    def params(self) -> Tuple[str, ...]:
        return tuple(b.name for b in self.bindings)


@dataclass(frozen=True)
class Predicate:
    expr: Expr
    text: str
    variables: FrozenSet[str]
    params: FrozenSet[str]


@dataclass(frozen=True)
class Grammar:
    templates: Tuple[Template, ...]
    predicates: Tuple[Predicate, ...]
    max_literals: int = 3

    def with_predicates(self, predicates) -> "Grammar":
        return Grammar(self.templates, tuple(predicates), self.max_literals)

    def without(self, texts: List[str]) -> "Grammar":
        drop = set(texts)
        return self.with_predicates(p for p in self.predicates if p.text not in drop)
