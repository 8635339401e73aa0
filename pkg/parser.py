from pathlib import Path
from typing import Dict, List, Optional, Tuple

from errors import Diagnostic, GapError, SourceSpan, SpecError
from expressions import (
    And, Apply, Arith, AtomLit, BoolLit, Compare, ConstRef, EmptySet, Expr, FnLit, FnUpdate, Implies,
    IntLit, Member, Not, Or, Param, Primed, Quant, SetComp, SetEnum, SetOp, SortRef, Subset, TupleExpr, Var,
    conjoin, free_params, state_vars,
)
from lexer import Token, tokenize
from printer import format_expr
from system import (
    Action, ConstDecl, Grammar, InitClause, Instance, Lemma, Predicate, QuantBinding, SortDecl, Template,
    TransitionSystem, VarDecl,
)
from typecheck import TypeChecker, binding_env, check_lemma, check_system
from values import Atom, BoolType, FnType, FnVal, IntType, SetType, SortType, TupleType, Type, TypeDomains, Value

COMPARE_OPS = {"EQ": "=", "NEQ": "/=", "LT": "<", "LE": "<=", "GT": ">", "GE": ">="}
SET_OPS = {"CUP": "cup", "CAP": "cap", "SETMINUS": "minus"}
ARITH_OPS = {"PLUS": "+", "SUB": "-"}

DEFAULT_MAX_LITERALS = 3


class Parser:
    """Descenso recursivo sobre los tokens de un archivo .gap, .grm o .inst"""

    def __init__(self, text: str, filename: str = "<input>"):
        self.filename = filename
        self.tokens: List[Token] = tokenize(text, filename)
        self.pos = 0
        self.scope: List[str] = []
        self.sorts: Dict[str, SortDecl] = {}
        self.consts: Dict[str, ConstDecl] = {}
        self.variables: Dict[str, VarDecl] = {}
        self.atoms: Dict[str, str] = {}

    @classmethod
    def for_system(cls, text: str, sys: TransitionSystem, filename: str = "<input>") -> "Parser":
        parser = cls(text, filename)
        parser.sorts = {s.name: s for s in sys.sorts}
        parser.consts = {c.name: c for c in sys.consts}
        parser.variables = {v.name: v for v in sys.variables}
        for s in sys.sorts:
            for element in s.elements or ():
                parser.atoms[element] = s.name
        return parser

    # ------------------------------------------------------------
    # Tokens
    # ------------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def accept(self, kind: str) -> Optional[Token]:
        if self.at(kind):
            return self.advance()
        return None

    def expect(self, kind: str, what: str) -> Token:
        if not self.at(kind):
            self.error(f"expected {what}, found {describe(self.peek())}")
        return self.advance()

    def error(self, message: str, span: Optional[SourceSpan] = None):
        raise SpecError.single(span or self.peek().span, message)

    def ident(self, what: str = "an identifier") -> Token:
        return self.expect("IDENT", what)

    def end_statement(self) -> None:
        """`;` opcional al final de una sentencia"""
        self.accept("SEMI")

    # ------------------------------------------------------------
    # Ámbitos
    # ------------------------------------------------------------

    def bind(self, names: List[str]) -> None:
        self.scope.extend(names)

    def unbind(self, count: int) -> None:
        if count:
            del self.scope[-count:]

    def declared(self, name: str) -> bool:
        return name in self.sorts or name in self.consts or name in self.variables or name in self.atoms

    def resolve(self, tok: Token) -> Expr:
        name = tok.text
        if name in self.scope:
            return Param(name, span=tok.span)
        if name in self.variables:
            return Var(name, span=tok.span)
        if name in self.consts:
            return ConstRef(name, span=tok.span)
        if name in self.sorts:
            return SortRef(name, span=tok.span)
        if name in self.atoms:
            return AtomLit(self.atoms[name], name, span=tok.span)
        self.error(f"unknown identifier {name}", tok.span)

    # ------------------------------------------------------------
    # Tipos
    # ------------------------------------------------------------

    def parse_type(self) -> Type:
        tok = self.peek()
        if self.accept("BOOL"):
            return BoolType()
        if self.accept("INTTYPE"):
            if self.at("IDENT"):
                return IntType(range_name=self.advance().text)
            lo = self.signed_int()
            self.expect("DOTDOT", "'..' in integer range")
            hi = self.signed_int()
            if hi < lo:
                self.error(f"empty integer range {lo}..{hi}", tok.span)
            return IntType(lo=lo, hi=hi)
        if self.accept("SET"):
            self.expect("OF", "'of'")
            return SetType(self.parse_type())
        if self.accept("TUPLE"):
            self.expect("LPAREN", "'('")
            elems = [self.parse_type()]
            while self.accept("COMMA"):
                elems.append(self.parse_type())
            self.expect("RPAREN", "')'")
            return TupleType(tuple(elems))
        if self.accept("FN"):
            domain = self.parse_type()
            self.expect("ARROW", "'->'")
            return FnType(domain, self.parse_type())
        name = self.ident("a type")
        if name.text not in self.sorts:
            self.error(f"unknown sort {name.text}", name.span)
        return SortType(name.text)

    def signed_int(self) -> int:
        negative = self.accept("SUB") is not None
        value = int(self.expect("INT", "an integer").text)
        return -value if negative else value

    # ------------------------------------------------------------
    # Expresiones (de menor a mayor precedencia)
    # ------------------------------------------------------------

    def expr(self) -> Expr:
        return self.implies()

    def implies(self) -> Expr:
        start = self.peek().span
        left = self.disjunction()
        if self.accept("IMPLIES"):
            return Implies(left, self.implies(), span=start)
        return left

    def disjunction(self) -> Expr:
        start = self.peek().span
        args = [self.conjunction()]
        while self.accept("OR"):
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args), span=start)

    def conjunction(self) -> Expr:
        start = self.peek().span
        args = [self.negation()]
        while self.accept("AND"):
            args.append(self.negation())
        return args[0] if len(args) == 1 else And(tuple(args), span=start)

    def negation(self) -> Expr:
        tok = self.accept("NOT")
        if tok:
            return Not(self.negation(), span=tok.span)
        return self.comparison()

    def comparison(self) -> Expr:
        start = self.peek().span
        left = self.update()
        kind = self.peek().kind
        if kind in COMPARE_OPS:
            self.advance()
            return Compare(COMPARE_OPS[kind], left, self.update(), span=start)
        if kind in ("IN", "NOTIN"):
            self.advance()
            return Member(left, self.update(), negated=kind == "NOTIN", span=start)
        if kind == "SUBSETEQ":
            self.advance()
            return Subset(left, self.update(), span=start)
        return left

    def update(self) -> Expr:
        start = self.peek().span
        e = self.set_expr()
        while self.accept("WITH"):
            self.expect("LBRACK", "'[' after 'with'")
            index = self.expr()
            self.expect("RBRACK", "']'")
            self.expect("ASSIGN", "':='")
            e = FnUpdate(e, index, self.set_expr(), span=start)
        return e

    def set_expr(self) -> Expr:
        start = self.peek().span
        left = self.postfix()
        while True:
            kind = self.peek().kind
            if kind in SET_OPS:
                self.advance()
                left = SetOp(SET_OPS[kind], left, self.postfix(), span=start)
            elif kind in ARITH_OPS:
                self.advance()
                left = Arith(ARITH_OPS[kind], left, self.postfix(), span=start)
            else:
                return left

    def postfix(self) -> Expr:
        start = self.peek().span
        e = self.primary()
        while self.accept("LBRACK"):
            arg = self.expr()
            self.expect("RBRACK", "']'")
            e = Apply(e, arg, span=start)
        return e

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.advance()
            if self.at("PRIME") and tok.text in self.variables and tok.text not in self.scope:
                self.advance()
                return Primed(tok.text, span=tok.span)
            return self.resolve(tok)
        if tok.kind == "INT":
            self.advance()
            return IntLit(int(tok.text), span=tok.span)
        if tok.kind in ("TRUE", "FALSE"):
            self.advance()
            return BoolLit(tok.kind == "TRUE", span=tok.span)
        if tok.kind == "LPAREN":
            self.advance()
            e = self.expr()
            self.expect("RPAREN", "')'")
            return e
        if tok.kind == "LANGLE":
            self.advance()
            items = [] if self.at("RANGLE") else self.expr_list()
            self.expect("RANGLE", "'>>'")
            return TupleExpr(tuple(items), span=tok.span)
        if tok.kind == "LBRACE":
            return self.set_literal()
        if tok.kind == "LBRACK":
            return self.fn_literal()
        if tok.kind in ("FORALL", "EXISTS"):
            return self.quantifier()
        self.error(f"expected an expression, found {describe(tok)}")

    def expr_list(self) -> List[Expr]:
        items = [self.expr()]
        while self.accept("COMMA"):
            items.append(self.expr())
        return items

    def set_literal(self) -> Expr:
        tok = self.expect("LBRACE", "'{'")
        if self.accept("RBRACE"):
            return EmptySet(span=tok.span)
        if self.at("IDENT") and self.peek(1).kind == "IN":
            mark = self.pos
            var = self.advance().text
            self.advance()
            domain = self.set_expr()
            if self.accept("COLON"):
                self.bind([var])
                cond = self.expr()
                self.unbind(1)
                self.expect("RBRACE", "'}'")
                return SetComp(var, domain, cond, span=tok.span)
            self.pos = mark
        items = self.expr_list()
        self.expect("RBRACE", "'}'")
        return SetEnum(tuple(items), span=tok.span)

    def fn_literal(self) -> Expr:
        tok = self.expect("LBRACK", "'['")
        var = self.ident("a bound variable").text
        self.expect("IN", "'\\in'")
        domain = self.set_expr()
        self.expect("MAPSTO", "'|->'")
        self.bind([var])
        body = self.expr()
        self.unbind(1)
        self.expect("RBRACK", "']'")
        return FnLit(var, domain, body, span=tok.span)

    def bindings(self, kind: str) -> List[QuantBinding]:
        """x, y \\in D, z \\in E -- los nombres quedan ligados en el ámbito al volver"""
        result: List[QuantBinding] = []
        while True:
            names = [self.ident("a bound variable")]
            while self.accept("COMMA"):
                names.append(self.ident("a bound variable"))
            self.expect("IN", "'\\in'")
            domain = self.set_expr()
            for name in names:
                result.append(QuantBinding(kind, name.text, domain, span=name.span))
            self.bind([n.text for n in names])
            if not self.accept("COMMA"):
                return result

    def quantifier(self) -> Expr:
        tok = self.advance()
        kind = "forall" if tok.kind == "FORALL" else "exists"
        bound = self.bindings(kind)
        self.expect("COLON", "':' after quantifier bindings")
        body = self.expr()
        self.unbind(len(bound))
        for b in reversed(bound):
            body = Quant(kind, b.name, b.domain, body, span=b.span)
        return body

    def prefix(self, colons: bool) -> List[QuantBinding]:
        """Prefijo de cuantificadores de un lemma (con ':') o de una plantilla"""
        result: List[QuantBinding] = []
        while self.at("FORALL", "EXISTS"):
            kind = "forall" if self.advance().kind == "FORALL" else "exists"
            result.extend(self.bindings(kind))
            if colons:
                self.expect("COLON", "':' after quantifier bindings")
            else:
                self.accept("COLON")
        return result

    # ------------------------------------------------------------
    # Archivos .gap
    # ------------------------------------------------------------

    def parse_spec(self) -> TransitionSystem:
        self.expect("PROTOCOL", "'protocol' header")
        name = self.ident("a protocol name").text
        sorts: List[SortDecl] = []
        consts: List[ConstDecl] = []
        variables: List[VarDecl] = []
        init: Optional[Tuple[InitClause, ...]] = None
        actions: List[Action] = []
        lemmas: List[Lemma] = []
        while not self.at("EOF"):
            tok = self.peek()
            if tok.kind in ("SORT", "CONST", "VAR"):
                if init is not None or actions:
                    self.error("declarations must precede init and actions")
                if tok.kind == "SORT":
                    sorts.append(self.sort_decl())
                elif tok.kind == "CONST":
                    consts.append(self.const_decl())
                else:
                    variables.append(self.var_decl())
            elif tok.kind == "INIT":
                if init is not None:
                    self.error("duplicate init block")
                init = self.init_block()
            elif tok.kind == "ACTION":
                actions.append(self.action())
            elif tok.kind == "LEMMA":
                lemmas.append(self.lemma())
            else:
                self.error(f"expected a declaration, init, action or lemma, found {describe(tok)}")
        if init is None:
            self.error("missing init block")
        if not actions:
            self.error("expected at least one action")
        sys = TransitionSystem(
            name, tuple(sorts), tuple(consts), tuple(variables), init, tuple(actions), tuple(lemmas),
        )
        check_system(sys)
        return sys

    def check_fresh(self, tok: Token) -> None:
        if self.declared(tok.text):
            self.error(f"{tok.text} is already declared", tok.span)

    def sort_decl(self) -> SortDecl:
        self.advance()
        name = self.ident("a sort name")
        self.check_fresh(name)
        elements = None
        if self.accept("EQ"):
            elements = tuple(t.text for t in self.ident_set())
            for element in elements:
                if self.declared(element):
                    self.error(f"{element} is already declared", name.span)
                self.atoms[element] = name.text
        self.end_statement()
        decl = SortDecl(name.text, elements, span=name.span)
        self.sorts[name.text] = decl
        return decl

    def ident_set(self) -> List[Token]:
        self.expect("LBRACE", "'{'")
        items: List[Token] = []
        if not self.at("RBRACE"):
            items.append(self.ident("an element name"))
            while self.accept("COMMA"):
                items.append(self.ident("an element name"))
        self.expect("RBRACE", "'}'")
        seen = set()
        for t in items:
            if t.text in seen:
                self.error(f"duplicate element {t.text}", t.span)
            seen.add(t.text)
        if not items:
            self.error("a sort must have at least one element")
        return items

    def const_decl(self) -> ConstDecl:
        self.advance()
        name = self.ident("a constant name")
        self.check_fresh(name)
        self.expect("COLON", "':'")
        decl = ConstDecl(name.text, self.parse_type(), span=name.span)
        self.end_statement()
        self.consts[name.text] = decl
        return decl

    def var_decl(self) -> VarDecl:
        self.advance()
        name = self.ident("a variable name")
        self.check_fresh(name)
        self.expect("COLON", "':'")
        decl = VarDecl(name.text, self.parse_type(), span=name.span)
        self.end_statement()
        self.variables[name.text] = decl
        return decl

    def init_block(self) -> Tuple[InitClause, ...]:
        self.advance()
        self.expect("LBRACE", "'{'")
        clauses: List[InitClause] = []
        while not self.accept("RBRACE"):
            name = self.ident("a variable name")
            if name.text not in self.variables:
                self.error(f"unknown variable {name.text}", name.span)
            if self.accept("EQ"):
                kind = "eq"
            else:
                self.expect("IN", "'=' or '\\in'")
                kind = "in"
            clauses.append(InitClause(name.text, kind, self.expr(), span=name.span))
            self.end_statement()
        return tuple(clauses)

    def action(self) -> Action:
        self.advance()
        name = self.ident("an action name")
        params: List[QuantBinding] = []
        if self.accept("LPAREN"):
            if not self.at("RPAREN"):
                params.append(self.action_param())
                while self.accept("COMMA"):
                    params.append(self.action_param())
            self.expect("RPAREN", "')'")
        self.expect("LBRACE", "'{'")
        requires: List[Expr] = []
        updates: Dict[str, Expr] = {}
        unchanged: Dict[str, Token] = {}
        listed_unchanged = False
        while not self.accept("RBRACE"):
            tok = self.peek()
            if self.accept("REQUIRE"):
                requires.append(self.expr())
            elif self.accept("UNCHANGED"):
                listed_unchanged = True
                names = [self.ident("a variable name")] if self.at("IDENT") else self.ident_tuple()
                for n in names:
                    if n.text not in self.variables:
                        self.error(f"unknown variable {n.text}", n.span)
                    unchanged[n.text] = n
            elif tok.kind == "IDENT":
                self.advance()
                if tok.text not in self.variables:
                    self.error(f"unknown variable {tok.text}", tok.span)
                self.expect("PRIME", f"\"'\" after {tok.text}")
                self.expect("EQ", "'='")
                if tok.text in updates:
                    self.error(f"variable {tok.text} updated twice in action {name.text}", tok.span)
                updates[tok.text] = self.expr()
            else:
                self.error(f"expected 'require', an update or 'unchanged', found {describe(tok)}")
            self.end_statement()
        self.unbind(len(params))

        diagnostics: List[Diagnostic] = []
        for var, tok in unchanged.items():
            if var in updates:
                diagnostics.append(Diagnostic(tok.span, f"variable {var} is both updated and unchanged in action {name.text}"))
        ordered: List[Tuple[str, Expr]] = []
        for var in self.variables:
            if var in updates:
                ordered.append((var, updates[var]))
            elif var in unchanged or not listed_unchanged:
                ordered.append((var, Var(var)))
            else:
                diagnostics.append(Diagnostic(name.span, f"action {name.text} has no update for variable {var}"))
        if diagnostics:
            raise SpecError(diagnostics)
        return Action(name.text, tuple(params), conjoin(requires), tuple(ordered), span=name.span)

    def action_param(self) -> QuantBinding:
        name = self.ident("a parameter name")
        if not self.accept("COLON"):
            self.expect("IN", "':' or '\\in'")
        domain = self.set_expr()
        self.bind([name.text])
        return QuantBinding("forall", name.text, domain, span=name.span)

    def ident_tuple(self) -> List[Token]:
        self.expect("LANGLE", "'<<' or a variable name")
        names = [self.ident("a variable name")]
        while self.accept("COMMA"):
            names.append(self.ident("a variable name"))
        self.expect("RANGLE", "'>>'")
        return names

    def lemma(self) -> Lemma:
        self.advance()
        name = self.ident("a lemma name")
        self.expect("EQ", "'='")
        lemma = self.lemma_body(name.text)
        self.end_statement()
        return lemma

    def lemma_body(self, name: str) -> Lemma:
        prefix = self.prefix(colons=True)
        body = self.expr()
        self.unbind(len(prefix))
        return Lemma(name, tuple(prefix), body)

    # ------------------------------------------------------------
    # Archivos .grm
    # ------------------------------------------------------------

    def parse_grammar(self, sys: TransitionSystem) -> Grammar:
        templates: List[Template] = []
        raw: List[Expr] = []
        max_literals = DEFAULT_MAX_LITERALS
        while not self.at("EOF"):
            if self.accept("TEMPLATE"):
                # plantilla vacía: cláusulas sin cuantificadores sobre variables de estado
                bindings = self.prefix(colons=False)
                # los parámetros de plantilla quedan visibles para los predicados
                templates.append(Template(tuple(bindings)))
            elif self.accept("PRED"):
                raw.append(self.expr())
            elif self.accept("MAXLITERALS"):
                tok = self.expect("INT", "an integer")
                max_literals = int(tok.text)
                if max_literals < 1:
                    self.error("maxliterals must be at least 1", tok.span)
            else:
                self.error(f"expected 'template', 'pred' or 'maxliterals', found {describe(self.peek())}")
            self.end_statement()
        envs = [binding_env(sys, t.bindings) for t in templates]
        predicates: List[Predicate] = []
        seen = set()
        for expr in raw:
            params = free_params(expr)
            fits = [env for t, env in zip(templates, envs) if params <= set(t.params)]
            if not fits:
                missing = sorted(params - set().union(*(set(t.params) for t in templates))) or sorted(params)
                raise SpecError.single(expr.span, f"parameter {', '.join(missing)} is not bound by any template")
            last_error: Optional[SpecError] = None
            for env in fits:
                try:
                    TypeChecker(sys).expect_bool(expr, env)
                    last_error = None
                    break
                except SpecError as err:
                    last_error = err
            if last_error is not None:
                raise last_error
            text = format_expr(expr)
            if text in seen:
                raise SpecError.single(expr.span, f"duplicate predicate {text}")
            seen.add(text)
            predicates.append(Predicate(expr, text, frozenset(state_vars(expr)), frozenset(params)))
        return Grammar(tuple(templates), tuple(predicates), max_literals)

    # ------------------------------------------------------------
    # Archivos .inst
    # ------------------------------------------------------------

    def parse_instance(self, sys: TransitionSystem) -> Instance:
        elements: Dict[str, List[Token]] = {}
        raw_consts: Dict[str, int] = {}
        int_ranges: Dict[str, Tuple[int, int]] = {}
        const_spans: Dict[str, SourceSpan] = {}
        const_values: Dict[str, Value] = {}
        sort_rank = {s.name: i for i, s in enumerate(sys.sorts)}
        while not self.at("EOF"):
            if self.accept("SORT"):
                name = self.ident("a sort name")
                if name.text not in sort_rank:
                    self.error(f"unknown sort {name.text}", name.span)
                if name.text in elements:
                    self.error(f"sort {name.text} bound twice", name.span)
                self.expect("EQ", "'='")
                elements[name.text] = self.ident_set()
                declared = self.sorts[name.text].elements
                if declared is not None and tuple(t.text for t in elements[name.text]) != declared:
                    self.error(f"sort {name.text} must list exactly {', '.join(declared)}", name.span)
            elif self.accept("CONST"):
                name = self.ident("a constant name")
                if name.text not in self.consts:
                    self.error(f"unknown constant {name.text}", name.span)
                self.expect("EQ", "'='")
                raw_consts[name.text] = self.pos
                const_spans[name.text] = name.span
                self.skip_value()
            elif self.accept("INTRANGE"):
                name = self.ident("a range name")
                self.accept("EQ")
                lo = self.signed_int()
                if not self.accept("DOTDOT"):
                    self.accept("COMMA")
                hi = self.signed_int()
                if hi < lo:
                    self.error(f"empty integer range {lo}..{hi}", name.span)
                int_ranges[name.text] = (lo, hi)
            else:
                self.error(f"expected 'sort', 'const' or 'intrange', found {describe(self.peek())}")
            self.end_statement()
        end = self.peek().span

        diagnostics: List[Diagnostic] = []
        sorts: Dict[str, Tuple[Atom, ...]] = {}
        for decl in sys.sorts:
            if decl.name in elements:
                names = [t.text for t in elements[decl.name]]
            elif decl.elements is not None:
                names = list(decl.elements)
            else:
                diagnostics.append(Diagnostic(end, f"instance does not bind sort {decl.name}"))
                continue
            rank = sort_rank[decl.name]
            sorts[decl.name] = tuple(Atom(rank, i, decl.name, n) for i, n in enumerate(names))
        for decl in sys.consts:
            if decl.name not in raw_consts:
                diagnostics.append(Diagnostic(end, f"instance does not bind constant {decl.name}"))
        if diagnostics:
            raise SpecError(diagnostics)

        by_sort = {name: {a.name: a for a in atoms} for name, atoms in sorts.items()}
        for name, start in raw_consts.items():
            self.pos = start
            const_values[name] = self.value(self.consts[name].type, by_sort)
            if not self.at("SEMI", "SORT", "CONST", "INTRANGE", "EOF"):
                self.error(f"unexpected {describe(self.peek())} after value of {name}")
        instance = Instance(sorts, const_values, int_ranges)
        domains = TypeDomains(instance)
        for decl in sys.consts:
            try:
                ok = domains.conforms(const_values[decl.name], decl.type)
            except GapError as err:
                raise SpecError.single(const_spans[decl.name], str(err))
            if not ok:
                raise SpecError.single(const_spans[decl.name], f"constant {decl.name} does not conform to {decl.type}")
        for ref in _range_names(sys):
            if ref not in int_ranges:
                raise SpecError.single(end, f"instance does not define intrange {ref}")
        return instance

    def skip_value(self) -> None:
        """Salta un literal de valor balanceando llaves, corchetes y << >>"""
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                if depth:
                    self.error("unterminated value literal")
                return
            if depth == 0 and tok.kind in ("SEMI", "SORT", "CONST", "INTRANGE"):
                return
            if tok.kind in ("LBRACE", "LBRACK", "LANGLE"):
                depth += 1
            elif tok.kind in ("RBRACE", "RBRACK", "RANGLE"):
                depth -= 1
            self.advance()

    def value(self, t: Type, by_sort: Dict[str, Dict[str, Atom]]) -> Value:
        """Literal de valor guiado por el tipo declarado de la constante"""
        tok = self.peek()
        if isinstance(t, BoolType):
            if self.accept("TRUE"):
                return True
            self.expect("FALSE", "TRUE or FALSE")
            return False
        if isinstance(t, IntType):
            return self.signed_int()
        if isinstance(t, SortType):
            name = self.ident(f"an element of sort {t.name}")
            atom = by_sort[t.name].get(name.text)
            if atom is None:
                self.error(f"{name.text} is not an element of sort {t.name}", name.span)
            return atom
        if isinstance(t, SetType):
            if tok.kind == "IDENT" and tok.text in by_sort and t.elem == SortType(tok.text):
                self.advance()
                return frozenset(by_sort[tok.text].values())
            self.expect("LBRACE", f"a set of {t.elem}")
            items = []
            if not self.at("RBRACE"):
                items.append(self.value(t.elem, by_sort))
                while self.accept("COMMA"):
                    items.append(self.value(t.elem, by_sort))
            self.expect("RBRACE", "'}'")
            return frozenset(items)
        if isinstance(t, TupleType):
            self.expect("LANGLE", "'<<'")
            items = [self.value(t.elems[0], by_sort)]
            for elem in t.elems[1:]:
                self.expect("COMMA", "','")
                items.append(self.value(elem, by_sort))
            self.expect("RANGLE", "'>>'")
            return tuple(items)
        if isinstance(t, FnType):
            self.expect("LBRACK", "'['")
            pairs = []
            while True:
                key = self.value(t.domain, by_sort)
                self.expect("MAPSTO", "'|->'")
                pairs.append((key, self.value(t.codomain, by_sort)))
                if not self.accept("COMMA"):
                    break
            self.expect("RBRACK", "']'")
            return FnVal(pairs)
        self.error(f"cannot write a literal of type {t}", tok.span)


def describe(tok: Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    return repr(tok.text)


def _range_names(sys: TransitionSystem) -> List[str]:
    names: List[str] = []

    def visit(t):
        if isinstance(t, IntType) and t.range_name is not None:
            names.append(t.range_name)
        elif isinstance(t, SetType):
            visit(t.elem)
        elif isinstance(t, TupleType):
            for e in t.elems:
                visit(e)
        elif isinstance(t, FnType):
            visit(t.domain)
            visit(t.codomain)

    for decl in (*sys.consts, *sys.variables):
        visit(decl.type)
    return sorted(set(names))


# ============================================================
# PUNTOS DE ENTRADA
# ============================================================

def parse_spec(text: str, filename: str = "<spec>") -> TransitionSystem:
    return Parser(text, filename).parse_spec()


def parse_grammar(text: str, sys: TransitionSystem, filename: str = "<grammar>") -> Grammar:
    return Parser.for_system(text, sys, filename).parse_grammar(sys)


def parse_instance(text: str, sys: TransitionSystem, filename: str = "<instance>") -> Instance:
    return Parser.for_system(text, sys, filename).parse_instance(sys)


def parse_lemma_text(text: str, sys: TransitionSystem, name: str, filename: str = "<lemma>") -> Lemma:
    """Lemma a partir de su texto impreso (usado al importar archivos de grafo)"""
    parser = Parser.for_system(text, sys, filename)
    lemma = parser.lemma_body(name)
    parser.expect("EOF", "end of lemma")
    check_lemma(sys, lemma)
    return lemma


def parse_expr(text: str, sys: TransitionSystem, env: Optional[Dict[str, Type]] = None) -> Expr:
    parser = Parser.for_system(text, sys, "<expr>")
    parser.bind(list(env or {}))
    expr = parser.expr()
    parser.expect("EOF", "end of expression")
    TypeChecker(sys).infer(expr, dict(env or {}))
    return expr


def load_spec(path) -> TransitionSystem:
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), str(path))


def load_grammar(path, sys: TransitionSystem) -> Grammar:
    path = Path(path)
    return parse_grammar(path.read_text(encoding="utf-8"), sys, str(path))


def load_instance(path, sys: TransitionSystem) -> Instance:
    path = Path(path)
    return parse_instance(path.read_text(encoding="utf-8"), sys, str(path))
