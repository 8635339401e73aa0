import hashlib
import logging
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from errors import CacheChecksumError, CacheError, CacheSchemaError, CacheVersionError, GapError
from evaluator import State, evaluator_for
from system import Instance, TransitionSystem
from values import decode_state, encode_state

logger = logging.getLogger(__name__)

MAGIC = b"GAPR"
VERSION = b"1"
# Por debajo de este tamaño de frontera no compensa repartir entre procesos
PARALLEL_MIN_FRONTIER = 2048
WALK_DEPTH = 100
WALKS_PER_BLOCK = 32


# ============================================================
# CONJUNTOS DE ESTADOS
# ============================================================

@dataclass(frozen=True)
class Provenance:
    """Cómo se obtuvo R: exhaustivo o muestreado (semilla, presupuesto); `complete=False` si se cortó"""
    mode: str = "exhaustive"
    seed: int = 0
    budget: int = 0
    complete: bool = True

    def label(self) -> str:
        if self.mode == "exhaustive":
            return "exhaustive" if self.complete else "exhaustive(truncated)"
        return f"sampled(seed={self.seed}, budget={self.budget})"


class StateSet:
    """Estados distintos en orden de descubrimiento, con esquema de variables y procedencia"""

    def __init__(
        self,
        schema: Sequence[str],
        states: Sequence[State],
        provenance: Provenance,
        spec_digest: str = "",
        inst_digest: str = "",
    ):
        self.schema: Tuple[str, ...] = tuple(schema)
        self.states: Tuple[State, ...] = tuple(states)
        self.provenance = provenance
        self.spec_digest = spec_digest
        self.inst_digest = inst_digest
        self._members: Optional[frozenset] = None

    @property
    def count(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[State]:
        return iter(self.states)

    def __contains__(self, state) -> bool:
        if self._members is None:
            self._members = frozenset(self.states)
        return state in self._members

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StateSet)
            and self.schema == other.schema
            and self.provenance == other.provenance
            and self.spec_digest == other.spec_digest
            and self.inst_digest == other.inst_digest
            and self.states == other.states
        )

    def __repr__(self) -> str:
        return f"StateSet(schema={list(self.schema)}, count={self.count}, {self.provenance.label()})"

    @property
    def encoding_order(self) -> List[int]:
        """Posiciones del esquema en orden alfabético de nombres (orden de la codificación canónica)"""
        return sorted(range(len(self.schema)), key=lambda i: self.schema[i])

    def encodings(self) -> Iterator[bytes]:
        order = self.encoding_order
        for s in self.states:
            yield encode_state(s, order)


# ============================================================
# EXPLORACIÓN
# ============================================================

def _expand(sys: TransitionSystem, inst: Instance, chunk: Sequence[State]) -> List[State]:
    ev = evaluator_for(sys, inst)
    actions = [ev.action(a) for a in sys.actions]
    out: List[State] = []
    for s in chunk:
        for ca in actions:
            for b in ca.bindings(s):
                t = ca.apply(s, b)
                if t is not None:
                    out.append(t)
    return out


def _chunks(items: Sequence, n: int) -> List[Sequence]:
    size = max(1, -(-len(items) // n))
    return [items[i:i + size] for i in range(0, len(items), size)]


def explore_exhaustive(
    sys: TransitionSystem,
    inst: Instance,
    max_states: int = 5_000_000,
    workers: int = 1,
) -> StateSet:
    """Clausura BFS de los estados iniciales; el resultado no depende del número de workers"""
    ev = evaluator_for(sys, inst)
    init = ev.initial_states()
    seen: Dict[State, None] = dict.fromkeys(init)
    frontier: List[State] = list(init)
    complete = True
    depth = 0
    parallel = Parallel(n_jobs=workers) if workers > 1 else None
    while frontier:
        if parallel is not None and len(frontier) >= PARALLEL_MIN_FRONTIER:
            parts = parallel(delayed(_expand)(sys, inst, c) for c in _chunks(frontier, workers * 4))
            successors: Iterable[State] = (t for part in parts for t in part)
        else:
            successors = _expand(sys, inst, frontier)
        nxt: List[State] = []
        for t in successors:
            if t not in seen:
                seen[t] = None
                nxt.append(t)
        depth += 1
        logger.debug("depth=%d frontier=%d total=%d", depth, len(nxt), len(seen))
        if len(seen) > max_states:
            logger.warning("state limit %d exceeded at depth %d; returning a partial set", max_states, depth)
            complete = False
            break
        frontier = nxt
    states = list(seen)[:max_states] if not complete else list(seen)
    return StateSet(sys.var_names, states, Provenance("exhaustive", complete=complete), sys.digest, inst.digest)


def _walk_block(sys: TransitionSystem, inst: Instance, seed: int, block: int) -> List[State]:
    """Caminatas aleatorias uniformes; la semilla del bloque es función pura de (seed, block)"""
    ev = evaluator_for(sys, inst)
    init = ev.initial_states()
    rng = np.random.default_rng([seed, block])
    visited: List[State] = []
    for _ in range(WALKS_PER_BLOCK):
        s = init[int(rng.integers(len(init)))]
        visited.append(s)
        for _ in range(WALK_DEPTH):
            succ = ev.successors(s)
            if not succ:
                s = init[int(rng.integers(len(init)))]
            else:
                s = succ[int(rng.integers(len(succ)))][2]
            visited.append(s)
    return visited


def explore_sampled(
    sys: TransitionSystem,
    inst: Instance,
    budget: int,
    seed: int = 0,
    workers: int = 1,
    max_blocks: Optional[int] = None,
) -> StateSet:
    """Recoge hasta `budget` estados distintos por caminatas; para si un lote entero no aporta nada nuevo"""
    seen: Dict[State, None] = {}
    block = 0
    max_blocks = max_blocks or max(64, budget // 8)
    batch = max(1, workers)
    parallel = Parallel(n_jobs=workers) if workers > 1 else None
    while len(seen) < budget and block < max_blocks:
        ids = range(block, min(block + batch, max_blocks))
        if parallel is not None:
            parts = parallel(delayed(_walk_block)(sys, inst, seed, b) for b in ids)
        else:
            parts = [_walk_block(sys, inst, seed, b) for b in ids]
        before = len(seen)
        for part in parts:
            for s in part:
                if len(seen) >= budget:
                    break
                seen.setdefault(s, None)
        block += len(ids)
        if len(seen) == before:
            logger.info("random walks stopped finding new states after %d blocks", block)
            break
    provenance = Provenance("sampled", seed=seed, budget=budget, complete=True)
    return StateSet(sys.var_names, list(seen), provenance, sys.digest, inst.digest)


def explore(
    sys: TransitionSystem,
    inst: Instance,
    mode: str = "exhaustive",
    budget: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
    max_states: int = 5_000_000,
) -> StateSet:
    if mode == "exhaustive":
        return explore_exhaustive(sys, inst, max_states=max_states, workers=workers)
    if mode == "sampled":
        if not budget or budget <= 0:
            raise GapError("sampled exploration needs a positive budget")
        return explore_sampled(sys, inst, budget, seed=seed, workers=workers)
    raise GapError(f"unknown exploration mode {mode}")


# ============================================================
# PROYECCIONES
# ============================================================

def project(states: StateSet, variables: Iterable[str]) -> StateSet:
    """Restricción de cada estado a `variables`, deduplicada y en orden de primera aparición"""
    wanted = set(variables)
    unknown = wanted - set(states.schema)
    if unknown:
        raise GapError(f"unknown variable(s) {', '.join(sorted(unknown))} for projection")
    schema = tuple(v for v in states.schema if v in wanted)
    if schema == states.schema:
        return states
    idx = [states.schema.index(v) for v in schema]
    seen: Dict[State, None] = {}
    for s in states.states:
        seen.setdefault(tuple([s[i] for i in idx]), None)
    return StateSet(schema, list(seen), states.provenance, states.spec_digest, states.inst_digest)


class ProjectionCache:
    """Proyecciones de R por subconjunto de variables, opcionalmente persistidas junto al caché de R"""

    def __init__(self, base: StateSet, directory: Optional[Path] = None, inst: Optional[Instance] = None):
        self.base = base
        self.directory = Path(directory) if directory is not None else None
        self.inst = inst
        self._entries: Dict[Tuple[str, ...], StateSet] = {}
        self._locks: Dict[Tuple[str, ...], threading.Lock] = {}
        self._guard = threading.Lock()

    def key(self, variables: Iterable[str]) -> Tuple[str, ...]:
        wanted = set(variables)
        return tuple(v for v in self.base.schema if v in wanted)

    def get(self, variables: Iterable[str]) -> StateSet:
        key = self.key(variables)
        cached = self._entries.get(key)
        if cached is not None:
            return cached
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            cached = self._entries.get(key)
            if cached is None:
                cached = self._load_or_project(key)
                self._entries[key] = cached
        return cached

    def _load_or_project(self, key: Tuple[str, ...]) -> StateSet:
        path = self.path_for(key)
        if path is not None and path.exists() and self.inst is not None:
            try:
                loaded = load(path, self.inst, expect_schema=key,
                              spec_digest=self.base.spec_digest, inst_digest=self.base.inst_digest)
                if loaded.provenance == self.base.provenance:
                    return loaded
            except CacheError as err:
                logger.warning("ignoring projection cache %s: %s", path, err)
        projected = project(self.base, key)
        if path is not None:
            save(projected, path)
        return projected

    def path_for(self, key: Tuple[str, ...]) -> Optional[Path]:
        if self.directory is None or key == self.base.schema:
            return None
        return self.directory / f"proj-{'+'.join(sorted(key))}.gapr"

    def __len__(self) -> int:
        return len(self._entries)


# ============================================================
# ARCHIVOS GAPR1
# ============================================================

_MODES = {"exhaustive": 0, "sampled": 1}


def save(states: StateSet, path) -> Path:
    """GAPR1: magic, hashes, esquema, procedencia, estados con prefijo de longitud y sha256 final"""
    path = Path(path)
    out = bytearray(MAGIC + VERSION)
    out += bytes.fromhex(states.spec_digest or "00" * 32)
    out += bytes.fromhex(states.inst_digest or "00" * 32)
    out += struct.pack(">H", len(states.schema))
    for name in states.schema:
        raw = name.encode("utf-8")
        out += struct.pack(">H", len(raw)) + raw
    p = states.provenance
    out += struct.pack(">BBqq", _MODES[p.mode], int(p.complete), p.seed, p.budget)
    out += struct.pack(">Q", states.count)
    for enc in states.encodings():
        out += struct.pack(">I", len(enc)) + enc
    out += hashlib.sha256(out).digest()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(bytes(out))
    tmp.replace(path)
    return path


def load(
    path,
    inst: Instance,
    expect_schema: Optional[Sequence[str]] = None,
    spec_digest: Optional[str] = None,
    inst_digest: Optional[str] = None,
) -> StateSet:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 1 or data[:len(MAGIC)] != MAGIC:
        raise CacheVersionError(f"{path}: not a GAPR cache file")
    if data[len(MAGIC):len(MAGIC) + 1] != VERSION:
        raise CacheVersionError(f"{path}: unsupported cache version {data[len(MAGIC):len(MAGIC) + 1]!r}")
    if len(data) < 32 or hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise CacheChecksumError(f"{path}: checksum mismatch (truncated or corrupted file)")
    body = data[:-32]
    try:
        pos = len(MAGIC) + 1
        spec_hex = body[pos:pos + 32].hex()
        inst_hex = body[pos + 32:pos + 64].hex()
        pos += 64
        (n_vars,) = struct.unpack_from(">H", body, pos)
        pos += 2
        schema = []
        for _ in range(n_vars):
            (length,) = struct.unpack_from(">H", body, pos)
            pos += 2
            schema.append(body[pos:pos + length].decode("utf-8"))
            pos += length
        mode, complete, seed, budget = struct.unpack_from(">BBqq", body, pos)
        pos += struct.calcsize(">BBqq")
        (count,) = struct.unpack_from(">Q", body, pos)
        pos += 8
    except (struct.error, UnicodeDecodeError) as err:
        raise CacheSchemaError(f"{path}: malformed header: {err}")

    if expect_schema is not None and tuple(expect_schema) != tuple(schema):
        raise CacheSchemaError(f"{path}: schema {schema} does not match {list(expect_schema)}")
    if spec_digest is not None and spec_hex != spec_digest:
        raise CacheSchemaError(f"{path}: written for a different specification")
    if inst_digest is not None and inst_hex != inst_digest:
        raise CacheSchemaError(f"{path}: written for a different instance")

    order = sorted(range(len(schema)), key=lambda i: schema[i])
    atoms = inst.atoms_by_key
    states: List[State] = []
    try:
        for _ in range(count):
            (length,) = struct.unpack_from(">I", body, pos)
            pos += 4
            states.append(decode_state(body[pos:pos + length], order, atoms))
            pos += length
    except (struct.error, KeyError, GapError) as err:
        raise CacheSchemaError(f"{path}: state encoding does not match the instance: {err}")
    mode_name = {v: k for k, v in _MODES.items()}[mode]
    provenance = Provenance(mode_name, seed=seed, budget=budget, complete=bool(complete))
    return StateSet(schema, states, provenance, spec_hex, inst_hex)


# ============================================================
# DIRECTORIO DE CACHÉ
# ============================================================

def cache_directory(root, sys: TransitionSystem, inst: Instance) -> Path:
    return Path(root) / f"{sys.digest[:16]}-{inst.digest[:16]}"


def reach_path(root, sys: TransitionSystem, inst: Instance, mode: str) -> Path:
    return cache_directory(root, sys, inst) / f"reach-{mode}.gapr"


def load_or_explore(
    sys: TransitionSystem,
    inst: Instance,
    cache_root=None,
    mode: str = "exhaustive",
    budget: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
    max_states: int = 5_000_000,
) -> StateSet:
    """R desde el caché si existe y coincide con la spec/instancia, o explorado y guardado"""
    path = reach_path(cache_root, sys, inst, mode) if cache_root is not None else None
    if path is not None and path.exists():
        try:
            cached = load(path, inst, expect_schema=sys.var_names, spec_digest=sys.digest, inst_digest=inst.digest)
            if mode == "sampled":
                usable = cached.provenance == Provenance(mode, seed=seed, budget=budget or 0)
            else:
                # un R truncado solo sirve para el mismo límite
                usable = cached.provenance.complete or cached.count == max_states
            if usable:
                logger.info("loaded %d states from %s", cached.count, path)
                return cached
        except CacheError as err:
            logger.warning("recomputing reachable states: %s", err)
    states = explore(sys, inst, mode=mode, budget=budget, seed=seed, workers=workers, max_states=max_states)
    if path is not None:
        save(states, path)
        logger.info("saved %d states to %s", states.count, path)
    return states
