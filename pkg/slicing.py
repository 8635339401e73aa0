from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional

import pandas as pd

from errors import GapError
from expressions import Expr, state_vars
from system import Action, Grammar, Lemma, TransitionSystem


def vars_of(expr: Expr) -> FrozenSet[str]:
    """Variables de estado sin prima que aparecen en la expresión (parámetros ligados excluidos)"""
    return frozenset(state_vars(expr))


def lemma_vars(lemma: Lemma) -> FrozenSet[str]:
    return vars_of(lemma.formula)


def coi(action: Action, var: str) -> FrozenSet[str]:
    """Cono de influencia de x': variables que lee su expresión de actualización (identidad -> {x})"""
    for name, expr in action.updates:
        if name == var:
            return vars_of(expr)
    raise GapError(f"unknown variable {var} in action {action.name}")


@dataclass(frozen=True)
class VarSlice:
    lemma: str
    action: str
    variables: FrozenSet[str]
    vars_pre: FrozenSet[str]
    vars_lemma: FrozenSet[str]
    coi_primed: FrozenSet[str]

    def ordered(self, sys: TransitionSystem) -> List[str]:
        return [v for v in sys.var_names if v in self.variables]

    def label(self, sys: TransitionSystem) -> str:
        return "{" + ",".join(self.ordered(sys)) + "}"

    @property
    def size(self) -> int:
        return len(self.variables)


def var_slice(lemma: Lemma, action: Action) -> VarSlice:
    """Vars(Pre) ∪ Vars(L) ∪ COI(Vars(L'))"""
    pre = vars_of(action.pre)
    for p in action.params:
        pre |= vars_of(p.domain)
    in_lemma = lemma_vars(lemma)
    cone: FrozenSet[str] = frozenset()
    for v in in_lemma:
        cone |= coi(action, v)
    return VarSlice(lemma.name, action.name, pre | in_lemma | cone, pre, in_lemma, cone)


def grammar_slice(grammar: Grammar, variables: Iterable[str]) -> Grammar:
    """Predicados cuyo footprint cabe en `variables`; los de solo parámetros siempre quedan"""
    allowed = frozenset(variables)
    return grammar.with_predicates(p for p in grammar.predicates if p.variables <= allowed)


def slice_table(sys: TransitionSystem, lemmas: Optional[Iterable[Lemma]] = None,
                grammar: Optional[Grammar] = None) -> pd.DataFrame:
    """Tabla (lemma, acción, slice, |slice|/|esquema|) para el subcomando `slice`"""
    rows = []
    total = len(sys.variables)
    for lemma in (lemmas if lemmas is not None else sys.lemmas):
        for action in sys.actions:
            vs = var_slice(lemma, action)
            row = {
                "lemma": lemma.name,
                "action": action.name,
                "slice": vs.label(sys),
                "size": f"{vs.size}/{total}",
            }
            if grammar is not None:
                row["preds"] = f"{len(grammar_slice(grammar, vs.variables).predicates)}/{len(grammar.predicates)}"
            rows.append(row)
    return pd.DataFrame(rows, columns=["lemma", "action", "slice", "size"] + (["preds"] if grammar is not None else []))
