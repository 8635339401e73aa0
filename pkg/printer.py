from typing import List, Sequence

from expressions import (
    TRUE, And, Apply, Arith, AtomLit, BoolLit, Compare, ConstRef, EmptySet, Expr, FnLit, FnUpdate, Implies,
    IntLit, Member, Not, Or, Param, Primed, Quant, SetComp, SetEnum, SetOp, SortRef, Subset, TupleExpr, Var,
)
from values import format_value

# Niveles de precedencia, de menor a mayor
QUANT, IMPLIES, OR, AND, NOT, CMP, WITH, SETOP, POSTFIX, ATOM = range(10)

SET_OP_TEXT = {"cup": "\\cup", "cap": "\\cap", "minus": "\\"}


def format_expr(e: Expr) -> str:
    """Texto ASCII canónico; el parser lo relee a un AST estructuralmente igual"""
    return _fmt(e, QUANT)


def _wrap(text: str, level: int, context: int) -> str:
    return f"({text})" if level < context else text


def _fmt(e: Expr, ctx: int) -> str:
    if isinstance(e, (Var, Param, ConstRef, SortRef)):
        return e.name
    if isinstance(e, Primed):
        return f"{e.name}'"
    if isinstance(e, AtomLit):
        return e.name
    if isinstance(e, BoolLit):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, EmptySet):
        return "{}"
    if isinstance(e, SetEnum):
        return "{" + ", ".join(_fmt(x, QUANT) for x in e.items) + "}"
    if isinstance(e, TupleExpr):
        return "<<" + ", ".join(_fmt(x, QUANT) for x in e.items) + ">>"
    if isinstance(e, SetComp):
        return "{" + f"{e.var} \\in {_fmt(e.domain, SETOP)} : {_fmt(e.cond, QUANT)}" + "}"
    if isinstance(e, FnLit):
        return f"[{e.var} \\in {_fmt(e.domain, SETOP)} |-> {_fmt(e.body, QUANT)}]"
    if isinstance(e, Apply):
        return _wrap(f"{_fmt(e.fn, POSTFIX)}[{_fmt(e.arg, QUANT)}]", POSTFIX, ctx)
    if isinstance(e, FnUpdate):
        text = f"{_fmt(e.fn, WITH)} with [{_fmt(e.index, QUANT)}] := {_fmt(e.value, SETOP)}"
        return _wrap(text, WITH, ctx)
    if isinstance(e, SetOp):
        text = f"{_fmt(e.left, SETOP)} {SET_OP_TEXT[e.op]} {_fmt(e.right, POSTFIX)}"
        return _wrap(text, SETOP, ctx)
    if isinstance(e, Arith):
        return _wrap(f"{_fmt(e.left, SETOP)} {e.op} {_fmt(e.right, POSTFIX)}", SETOP, ctx)
    if isinstance(e, Compare):
        return _wrap(f"{_fmt(e.left, WITH)} {e.op} {_fmt(e.right, WITH)}", CMP, ctx)
    if isinstance(e, Member):
        op = "\\notin" if e.negated else "\\in"
        return _wrap(f"{_fmt(e.elem, WITH)} {op} {_fmt(e.collection, WITH)}", CMP, ctx)
    if isinstance(e, Subset):
        return _wrap(f"{_fmt(e.left, WITH)} \\subseteq {_fmt(e.right, WITH)}", CMP, ctx)
    if isinstance(e, Not):
        return _wrap(f"~{_fmt(e.arg, NOT)}", NOT, ctx)
    if isinstance(e, And):
        return _wrap(" /\\ ".join(_fmt(a, NOT) for a in e.args), AND, ctx)
    if isinstance(e, Or):
        return _wrap(" \\/ ".join(_fmt(a, AND) for a in e.args), OR, ctx)
    if isinstance(e, Implies):
        return _wrap(f"{_fmt(e.left, OR)} => {_fmt(e.right, IMPLIES)}", IMPLIES, ctx)
    if isinstance(e, Quant):
        return _wrap(_fmt_quant(e), QUANT, ctx)
    raise TypeError(f"cannot format {type(e).__name__}")


def _fmt_quant(e: Quant) -> str:
    # \A a, b \in D : cuerpo -- agrupa cuantificadores consecutivos del mismo tipo y dominio
    names = [e.var]
    body = e.body
    while isinstance(body, Quant) and body.kind == e.kind and body.domain == e.domain and body.var not in names:
        names.append(body.var)
        body = body.body
    head = "\\A" if e.kind == "forall" else "\\E"
    return f"{head} {', '.join(names)} \\in {_fmt(e.domain, SETOP)} : {_fmt(body, QUANT)}"


def format_prefix(bindings: Sequence, separator: str = " : ") -> str:
    """Prefijo de cuantificadores agrupado: \\A i, j \\in Node : \\E Q \\in Quorum"""
    groups: List[tuple] = []
    for b in bindings:
        if groups and groups[-1][0] == b.kind and groups[-1][2] == b.domain:
            groups[-1][1].append(b.name)
        else:
            groups.append((b.kind, [b.name], b.domain))
    parts = []
    for kind, names, domain in groups:
        head = "\\A" if kind == "forall" else "\\E"
        parts.append(f"{head} {', '.join(names)} \\in {_fmt(domain, SETOP)}")
    return separator.join(parts)


def format_lemma(lemma) -> str:
    if not lemma.prefix:
        return format_expr(lemma.body)
    body = _fmt(lemma.body, IMPLIES)
    return f"{format_prefix(lemma.prefix)} : {body}"


# ============================================================
# ARCHIVOS COMPLETOS
# ============================================================

def format_system(sys) -> str:
    lines = [f"protocol {sys.name}", ""]
    for s in sys.sorts:
        if s.elements is None:
            lines.append(f"sort {s.name}")
        else:
            lines.append(f"sort {s.name} = {{{', '.join(s.elements)}}}")
    for c in sys.consts:
        lines.append(f"const {c.name} : {c.type}")
    for v in sys.variables:
        lines.append(f"var {v.name} : {v.type}")
    lines += ["", "init {"]
    for clause in sys.init:
        op = "=" if clause.kind == "eq" else "\\in"
        lines.append(f"    {clause.var} {op} {format_expr(clause.expr)};")
    lines.append("}")
    for action in sys.actions:
        params = ", ".join(f"{p.name} : {_fmt(p.domain, SETOP)}" for p in action.params)
        lines += ["", f"action {action.name}({params}) {{"]
        if action.pre != TRUE:
            lines.append(f"    require {format_expr(action.pre)};")
        for name, expr in action.updates:
            if not action.is_identity(name):
                lines.append(f"    {name}' = {format_expr(expr)};")
        lines.append("}")
    if sys.lemmas:
        lines.append("")
    for lemma in sys.lemmas:
        lines.append(f"lemma {lemma.name} = {format_lemma(lemma)}")
    return "\n".join(lines) + "\n"


def format_instance(instance) -> str:
    lines = []
    for name, atoms in sorted(instance.sorts.items(), key=lambda kv: kv[1][0].rank if kv[1] else 0):
        lines.append(f"sort {name} = {{{', '.join(a.name for a in atoms)}}}")
    for name in sorted(instance.consts):
        lines.append(f"const {name} = {format_value(instance.consts[name])}")
    for name in sorted(instance.int_ranges):
        lo, hi = instance.int_ranges[name]
        lines.append(f"intrange {name} {lo} {hi}")
    return "\n".join(lines) + "\n"


def format_grammar(grammar) -> str:
    lines = [f"template {format_prefix(t.bindings, ' ')};" for t in grammar.templates]
    lines += [f"pred {p.text};" for p in grammar.predicates]
    lines.append(f"maxliterals {grammar.max_literals};")
    return "\n".join(lines) + "\n"
