from dataclasses import dataclass
from typing import List

from errors import SourceSpan, SpecError


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


# Palabras clave y alias ASCII -> tipo de token canónico
KEYWORDS = {
    "protocol": "PROTOCOL",
    "sort": "SORT",
    "const": "CONST",
    "var": "VAR",
    "init": "INIT",
    "action": "ACTION",
    "require": "REQUIRE",
    "lemma": "LEMMA",
    "template": "TEMPLATE",
    "pred": "PRED",
    "maxliterals": "MAXLITERALS",
    "intrange": "INTRANGE",
    "set": "SET",
    "of": "OF",
    "tuple": "TUPLE",
    "fn": "FN",
    "bool": "BOOL",
    "int": "INTTYPE",
    "with": "WITH",
    "unchanged": "UNCHANGED",
    "UNCHANGED": "UNCHANGED",
    "in": "IN",
    "notin": "NOTIN",
    "forall": "FORALL",
    "exists": "EXISTS",
    "and": "AND",
    "or": "OR",
    "not": "NOT",
    "implies": "IMPLIES",
    "subseteq": "SUBSETEQ",
    "cup": "CUP",
    "cap": "CAP",
    "setminus": "SETMINUS",
    "true": "TRUE",
    "TRUE": "TRUE",
    "false": "FALSE",
    "FALSE": "FALSE",
}

BACKSLASH_WORDS = {
    "A": "FORALL",
    "E": "EXISTS",
    "in": "IN",
    "notin": "NOTIN",
    "subseteq": "SUBSETEQ",
    "cup": "CUP",
    "union": "CUP",
    "cap": "CAP",
    "intersect": "CAP",
    "land": "AND",
    "lor": "OR",
    "lnot": "NOT",
}

UNICODE = {
    "∧": "AND",
    "∨": "OR",
    "¬": "NOT",
    "⇒": "IMPLIES",
    "∈": "IN",
    "∉": "NOTIN",
    "⊆": "SUBSETEQ",
    "∪": "CUP",
    "∩": "CAP",
    "∖": "SETMINUS",
    "∀": "FORALL",
    "∃": "EXISTS",
    "⟨": "LANGLE",
    "⟩": "RANGLE",
    "↦": "MAPSTO",
    "≠": "NEQ",
    "≤": "LE",
    "≥": "GE",
    "→": "ARROW",
    "′": "PRIME",
}

# Operadores ASCII, del más largo al más corto
OPERATORS = [
    ("|->", "MAPSTO"),
    ("/\\", "AND"),
    ("\\/", "OR"),
    ("=>", "IMPLIES"),
    ("<<", "LANGLE"),
    (">>", "RANGLE"),
    ("<=", "LE"),
    (">=", "GE"),
    ("/=", "NEQ"),
    ("!=", "NEQ"),
    ("->", "ARROW"),
    (":=", "ASSIGN"),
    ("..", "DOTDOT"),
    ("=", "EQ"),
    ("#", "NEQ"),
    ("<", "LT"),
    (">", "GT"),
    ("~", "NOT"),
    ("+", "PLUS"),
    ("-", "SUB"),
    (":", "COLON"),
    (";", "SEMI"),
    (",", "COMMA"),
    ("(", "LPAREN"),
    (")", "RPAREN"),
    ("[", "LBRACK"),
    ("]", "RBRACK"),
    ("{", "LBRACE"),
    ("}", "RBRACE"),
    ("'", "PRIME"),
]


def tokenize(text: str, filename: str = "<input>") -> List[Token]:
    """Convierte el texto en tokens con spans 1-based; comentarios // , \\* y (* *)"""
    tokens: List[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def span(length: int) -> SourceSpan:
        return SourceSpan(filename, line, col, max(length, 1))

    def advance(count: int) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n﻿":
            advance(1)
            continue
        if text.startswith("//", i) or text.startswith("\\*", i):
            while i < n and text[i] != "\n":
                advance(1)
            continue
        if text.startswith("(*", i):
            start = span(2)
            end = text.find("*)", i + 2)
            if end < 0:
                raise SpecError.single(start, "unterminated comment")
            advance(end + 2 - i)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            # "0..3" no debe comerse los puntos
            tokens.append(Token("INT", text[i:j], span(j - i)))
            advance(j - i)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(Token(KEYWORDS.get(word, "IDENT"), word, span(j - i)))
            advance(j - i)
            continue
        if ch == "\\":
            if text.startswith("\\/", i):
                tokens.append(Token("OR", "\\/", span(2)))
                advance(2)
                continue
            j = i + 1
            while j < n and text[j].isalpha():
                j += 1
            word = text[i + 1:j]
            if word in BACKSLASH_WORDS:
                tokens.append(Token(BACKSLASH_WORDS[word], text[i:j], span(j - i)))
                advance(j - i)
            else:
                tokens.append(Token("SETMINUS", "\\", span(1)))
                advance(1)
            continue
        if ch in UNICODE:
            tokens.append(Token(UNICODE[ch], ch, span(1)))
            advance(1)
            continue
        for op, kind in OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token(kind, op, span(len(op))))
                advance(len(op))
                break
        else:
            raise SpecError.single(span(1), f"unexpected character {ch!r}")
    tokens.append(Token("EOF", "", SourceSpan(filename, line, col, 1)))
    return tokens
