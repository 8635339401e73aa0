import struct
from dataclasses import dataclass
from itertools import combinations, product
from typing import Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from errors import EvalError

# Conteos de dominio por encima de este valor se reportan saturados
SATURATION = 2 ** 62


# ============================================================
# VALORES
# ============================================================

class Atom(NamedTuple):
    """Elemento de un sort: orden del sort en la declaración, índice del elemento, nombres"""
    rank: int
    index: int
    sort: str
    name: str

    def __repr__(self) -> str:
        return self.name


class FnVal:
    """Función total inmutable sobre un dominio finito, claves en orden canónico"""

    __slots__ = ("_keys", "_vals", "_pos", "_hash")

    def __init__(self, items: Iterable[Tuple[Any, Any]]):
        pairs = sorted(dict(items).items(), key=lambda kv: canonical_key(kv[0]))
        self._keys = tuple(k for k, _ in pairs)
        self._vals = tuple(v for _, v in pairs)
        self._pos = {k: i for i, k in enumerate(self._keys)}
        self._hash = hash((self._keys, self._vals))

    @classmethod
    def _from_parts(cls, keys: tuple, vals: tuple, pos: Optional[dict] = None) -> "FnVal":
        fn = cls.__new__(cls)
        fn._keys = keys
        fn._vals = vals
        fn._pos = pos if pos is not None else {k: i for i, k in enumerate(keys)}
        fn._hash = hash((keys, vals))
        return fn

    def __getitem__(self, key):
        return self._vals[self._pos[key]]

    def __contains__(self, key) -> bool:
        return key in self._pos

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self) -> Iterator:
        return iter(self._keys)

    def __eq__(self, other) -> bool:
        return type(other) is FnVal and self._hash == other._hash and self._vals == other._vals and self._keys == other._keys

    def __hash__(self) -> int:
        return self._hash

    def __reduce__(self):
        return (FnVal._from_parts, (self._keys, self._vals))

    def __repr__(self) -> str:
        inner = ", ".join(f"{format_value(k)} |-> {format_value(v)}" for k, v in self.items())
        return f"[{inner}]"

    def keys(self) -> tuple:
        return self._keys

    def values(self) -> tuple:
        return self._vals

    def items(self) -> Iterator[Tuple[Any, Any]]:
        return zip(self._keys, self._vals)

    def updated(self, key, value) -> "FnVal":
        """f with [key] := value; la clave debe pertenecer al dominio"""
        pos = self._pos[key]
        vals = self._vals[:pos] + (value,) + self._vals[pos + 1:]
        return FnVal._from_parts(self._keys, vals, self._pos)


Value = Union[bool, int, Atom, tuple, frozenset, FnVal]


def canonical_key(v: Value) -> tuple:
    """Orden canónico: booleanos < enteros < átomos < tuplas < conjuntos < funciones"""
    t = type(v)
    if t is bool:
        return (0, int(v))
    if t is int:
        return (1, v)
    if t is Atom:
        return (2, v.rank, v.index)
    if t is tuple:
        return (3, tuple(canonical_key(x) for x in v))
    if t is frozenset:
        return (4, tuple(sorted(canonical_key(x) for x in v)))
    if t is FnVal:
        return (5, tuple((canonical_key(k), canonical_key(x)) for k, x in v.items()))
    raise EvalError(f"not a protocol value: {v!r}")


def sorted_values(values: Iterable[Value]) -> List[Value]:
    return sorted(values, key=canonical_key)


def format_value(v: Value) -> str:
    t = type(v)
    if t is bool:
        return "TRUE" if v else "FALSE"
    if t is int or t is Atom:
        return repr(v)
    if t is tuple:
        return "<<" + ", ".join(format_value(x) for x in v) + ">>"
    if t is frozenset:
        return "{" + ", ".join(format_value(x) for x in sorted_values(v)) + "}"
    return repr(v)


# ============================================================
# CODIFICACIÓN CANÓNICA
# ============================================================

_TAG_BOOL, _TAG_INT, _TAG_ATOM, _TAG_TUPLE, _TAG_SET, _TAG_FN = range(6)


def encode_value(v: Value, out: bytearray) -> None:
    t = type(v)
    if t is bool:
        out.append(_TAG_BOOL)
        out.append(1 if v else 0)
    elif t is int:
        out.append(_TAG_INT)
        out += struct.pack(">q", v)
    elif t is Atom:
        out.append(_TAG_ATOM)
        out += struct.pack(">HI", v.rank, v.index)
    elif t is tuple:
        out.append(_TAG_TUPLE)
        out += struct.pack(">I", len(v))
        for x in v:
            encode_value(x, out)
    elif t is frozenset:
        out.append(_TAG_SET)
        out += struct.pack(">I", len(v))
        for x in sorted_values(v):
            encode_value(x, out)
    elif t is FnVal:
        out.append(_TAG_FN)
        out += struct.pack(">I", len(v))
        for k, x in v.items():
            encode_value(k, out)
            encode_value(x, out)
    else:
        raise EvalError(f"cannot encode {v!r}")


def decode_value(buf: bytes, pos: int, atoms: Dict[Tuple[int, int], Atom]) -> Tuple[Value, int]:
    tag = buf[pos]
    pos += 1
    if tag == _TAG_BOOL:
        return buf[pos] == 1, pos + 1
    if tag == _TAG_INT:
        return struct.unpack_from(">q", buf, pos)[0], pos + 8
    if tag == _TAG_ATOM:
        rank, index = struct.unpack_from(">HI", buf, pos)
        return atoms[(rank, index)], pos + 6
    (n,) = struct.unpack_from(">I", buf, pos)
    pos += 4
    if tag == _TAG_TUPLE or tag == _TAG_SET:
        items = []
        for _ in range(n):
            x, pos = decode_value(buf, pos, atoms)
            items.append(x)
        return (tuple(items) if tag == _TAG_TUPLE else frozenset(items)), pos
    if tag == _TAG_FN:
        keys, vals = [], []
        for _ in range(n):
            k, pos = decode_value(buf, pos, atoms)
            x, pos = decode_value(buf, pos, atoms)
            keys.append(k)
            vals.append(x)
        return FnVal._from_parts(tuple(keys), tuple(vals)), pos
    raise EvalError(f"unknown value tag {tag}")


def encode_state(values: Sequence[Value], order: Sequence[int]) -> bytes:
    """Codifica un estado en el orden de variables `order` (nombres ordenados)"""
    out = bytearray()
    for i in order:
        encode_value(values[i], out)
    return bytes(out)


def decode_state(buf: bytes, order: Sequence[int], atoms: Dict[Tuple[int, int], Atom]) -> tuple:
    values: List[Any] = [None] * len(order)
    pos = 0
    for i in order:
        values[i], pos = decode_value(buf, pos, atoms)
    if pos != len(buf):
        raise EvalError("trailing bytes in state encoding")
    return tuple(values)


# ============================================================
# TIPOS
# ============================================================

@dataclass(frozen=True)
class BoolType:
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class SortType:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class IntType:
    """Entero acotado: rango nombrado (intrange de la instancia) o literal lo..hi"""
    range_name: Optional[str] = None
    lo: Optional[int] = None
    hi: Optional[int] = None

    def __str__(self) -> str:
        if self.range_name is not None:
            return f"int {self.range_name}"
        return f"int {self.lo}..{self.hi}"


@dataclass(frozen=True)
class SetType:
    elem: Any

    def __str__(self) -> str:
        return f"set of {self.elem}"


@dataclass(frozen=True)
class TupleType:
    elems: Tuple[Any, ...]

    def __str__(self) -> str:
        return "tuple(" + ", ".join(str(e) for e in self.elems) + ")"


@dataclass(frozen=True)
class FnType:
    domain: Any
    codomain: Any

    def __str__(self) -> str:
        return f"fn {self.domain} -> {self.codomain}"


# Tipo de los enteros literales antes de unificarse con un rango
ANY_INT = IntType()

Type = Union[BoolType, SortType, IntType, SetType, TupleType, FnType]


def _sat_mul(a: int, b: int) -> int:
    return min(a * b, SATURATION)


def _sat_pow(base: int, exp: int) -> int:
    if base <= 1:
        return base
    if exp * max(base.bit_length() - 1, 1) >= 62:
        return SATURATION
    return min(base ** exp, SATURATION)


class TypeDomains:
    """Dominios finitos de los tipos bajo una instancia: conteo, enumeración, muestreo y conformidad"""

    def __init__(self, instance):
        self.instance = instance
        self._values: Dict[Any, Tuple[Value, ...]] = {}

    def int_range(self, t: IntType) -> Tuple[int, int]:
        if t.range_name is not None:
            try:
                return self.instance.int_ranges[t.range_name]
            except KeyError:
                raise EvalError(f"instance does not define intrange {t.range_name}")
        if t.lo is None or t.hi is None:
            raise EvalError("unbounded integer type has no finite domain")
        return t.lo, t.hi

    def count(self, t: Type) -> int:
        if isinstance(t, BoolType):
            return 2
        if isinstance(t, SortType):
            return len(self.instance.sort_elements(t.name))
        if isinstance(t, IntType):
            lo, hi = self.int_range(t)
            return max(hi - lo + 1, 0)
        if isinstance(t, SetType):
            return _sat_pow(2, self.count(t.elem))
        if isinstance(t, TupleType):
            total = 1
            for e in t.elems:
                total = _sat_mul(total, self.count(e))
            return total
        if isinstance(t, FnType):
            return _sat_pow(self.count(t.codomain), self.count(t.domain))
        raise EvalError(f"no domain for type {t}")

    def values(self, t: Type) -> Tuple[Value, ...]:
        """Todos los valores del tipo en orden canónico (solo para dominios enumerables)"""
        cached = self._values.get(t)
        if cached is not None:
            return cached
        if self.count(t) >= SATURATION:
            raise EvalError(f"domain of {t} is too large to enumerate")
        if isinstance(t, BoolType):
            vals: Tuple[Value, ...] = (False, True)
        elif isinstance(t, SortType):
            vals = tuple(self.instance.sort_elements(t.name))
        elif isinstance(t, IntType):
            lo, hi = self.int_range(t)
            vals = tuple(range(lo, hi + 1))
        elif isinstance(t, SetType):
            elems = self.values(t.elem)
            vals = tuple(
                frozenset(c)
                for size in range(len(elems) + 1)
                for c in combinations(elems, size)
            )
        elif isinstance(t, TupleType):
            vals = tuple(product(*(self.values(e) for e in t.elems)))
        elif isinstance(t, FnType):
            dom = self.values(t.domain)
            cod = self.values(t.codomain)
            vals = tuple(FnVal(zip(dom, choice)) for choice in product(cod, repeat=len(dom)))
        else:
            raise EvalError(f"no domain for type {t}")
        vals = tuple(sorted_values(vals))
        self._values[t] = vals
        return vals

    def sample(self, t: Type, rng: np.random.Generator) -> Value:
        """Valor aleatorio bien tipado; los conjuntos toman cada elemento con p=0.5"""
        if isinstance(t, BoolType):
            return bool(rng.random() < 0.5)
        if isinstance(t, SortType):
            elems = self.instance.sort_elements(t.name)
            return elems[int(rng.integers(len(elems)))]
        if isinstance(t, IntType):
            lo, hi = self.int_range(t)
            return int(rng.integers(lo, hi + 1))
        if isinstance(t, SetType):
            elems = self.values(t.elem)
            keep = rng.random(len(elems)) < 0.5
            return frozenset(e for e, k in zip(elems, keep) if k)
        if isinstance(t, TupleType):
            return tuple(self.sample(e, rng) for e in t.elems)
        if isinstance(t, FnType):
            return FnVal((k, self.sample(t.codomain, rng)) for k in self.values(t.domain))
        raise EvalError(f"no domain for type {t}")

    def conforms(self, v: Value, t: Type) -> bool:
        if isinstance(t, BoolType):
            return type(v) is bool
        if isinstance(t, SortType):
            return type(v) is Atom and v.sort == t.name
        if isinstance(t, IntType):
            if type(v) is not int:
                return False
            lo, hi = self.int_range(t)
            return lo <= v <= hi
        if isinstance(t, SetType):
            return type(v) is frozenset and all(self.conforms(x, t.elem) for x in v)
        if isinstance(t, TupleType):
            return (
                type(v) is tuple
                and len(v) == len(t.elems)
                and all(self.conforms(x, e) for x, e in zip(v, t.elems))
            )
        if isinstance(t, FnType):
            if type(v) is not FnVal:
                return False
            dom = self.values(t.domain)
            return len(v) == len(dom) and all(k in v for k in dom) and all(
                self.conforms(x, t.codomain) for x in v.values()
            )
        return False


def contains_int(t: Type) -> bool:
    if isinstance(t, IntType):
        return True
    if isinstance(t, SetType):
        return contains_int(t.elem)
    if isinstance(t, TupleType):
        return any(contains_int(e) for e in t.elems)
    if isinstance(t, FnType):
        return contains_int(t.domain) or contains_int(t.codomain)
    return False
