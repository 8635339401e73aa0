from pydantic import BaseModel, ConfigDict, Field
from typing import Dict, List, Literal, Optional
from uuid import uuid4
from datetime import datetime

GRAPH_FORMAT = "gap-proof-graph/1"

# ============================================================
# CONFIGURACIÓN
# ============================================================

class InferenceConfig(BaseModel):
    """Parámetros de inferencia; los valores por defecto reproducen la configuración de referencia"""
    n_invs: int = Field(default=80000, gt=0)
    n_ctis: int = Field(default=10000, gt=0)
    max_literals: int = Field(default=3, gt=0)
    max_rounds: int = Field(default=3, gt=0)
    node_timeout: float = Field(default=600.0, gt=0)
    global_timeout: float = Field(default=14400.0, ge=0)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, gt=0)
    cti_exhaustive_bound: int = Field(default=2 ** 20, gt=0)
    cti_samples: int = Field(default=20000, gt=0)
    cti_block_size: int = Field(default=1024, gt=0)
    eval_sample_size: int = Field(default=1024, gt=0)
    reach_max_states: int = Field(default=5_000_000, gt=0)
    equivalence_bound: int = Field(default=2 ** 16, gt=0)

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "n_invs": 80000,
                "n_ctis": 10000,
                "max_literals": 3,
                "max_rounds": 3,
                "seed": 0,
                "workers": 4,
            }
        },
    )

# ============================================================
# DOCUMENTO DEL GRAFO DE PRUEBA
# ============================================================

class CTIRecord(BaseModel):
    """CTI legible: valores impresos con la sintaxis de la spec"""
    lemma: str
    action: str
    binding: Dict[str, str] = Field(default_factory=dict)
    prestate: Dict[str, str] = Field(default_factory=dict)
    poststate: Dict[str, str] = Field(default_factory=dict)

class SliceRecord(BaseModel):
    variables: List[str]
    vars_pre: List[str] = Field(default_factory=list)
    vars_lemma: List[str] = Field(default_factory=list)
    coi_primed: List[str] = Field(default_factory=list)

class LemmaNodeRecord(BaseModel):
    name: str
    formula: str
    depth: int = 0
    origin: str = "root"

class ActionNodeRecord(BaseModel):
    lemma: str
    action: str
    status: Literal["unproven", "proven", "failed"]
    provenance: str = ""
    self_inductive: bool = False
    slice: Optional[SliceRecord] = None
    projected: int = 0
    grammar_size: int = 0
    rounds: int = 0
    ctis_generated: int = 0
    ctis_eliminated: int = 0
    candidates: int = 0
    reason: str = ""
    surviving: List[CTIRecord] = Field(default_factory=list)

class EdgeRecord(BaseModel):
    """Lema de soporte `source` -> nodo de acción (lemma, action)"""
    source: str
    lemma: str
    action: str

class GraphDocument(BaseModel):
    """Archivo de grafo versionado: nodos, aristas, fallas, configuración y hashes de entrada"""
    format: str = GRAPH_FORMAT
    protocol: str
    root: str
    spec_hash: str = ""
    inst_hash: str = ""
    grammar_hash: str = ""
    reach_count: int = 0
    reach_provenance: str = ""
    timed_out: bool = False
    config: InferenceConfig = Field(default_factory=InferenceConfig)
    lemmas: List[LemmaNodeRecord] = Field(default_factory=list)
    actions: List[ActionNodeRecord] = Field(default_factory=list)
    edges: List[EdgeRecord] = Field(default_factory=list)
    failed: List[List[str]] = Field(default_factory=list)

# ============================================================
# VEREDICTOS DE VALIDEZ
# ============================================================

class InitiationVerdict(BaseModel):
    lemma: str
    valid: bool

class NodeVerdict(BaseModel):
    lemma: str
    action: str
    valid: bool
    mode: str
    ctis: int = 0
    support: List[str] = Field(default_factory=list)
    sample: List[CTIRecord] = Field(default_factory=list)

class ValidityReport(BaseModel):
    valid: bool
    mode: str
    initiation: List[InitiationVerdict] = Field(default_factory=list)
    nodes: List[NodeVerdict] = Field(default_factory=list)

    @property
    def invalid_nodes(self) -> List[NodeVerdict]:
        return [n for n in self.nodes if not n.valid]

# ============================================================
# MANIFIESTO DE CORRIDA
# ============================================================

class RunManifest(BaseModel):
    """Todo lo necesario para reproducir una corrida del CLI"""
    id: str = Field(default_factory=lambda: str(uuid4()))
    command: str
    config: Dict[str, object] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    seed: int = 0
    started_at: datetime = Field(default_factory=datetime.now)
    wall_time: float = 0.0
    outcome: str = ""
    exit_code: int = 0
    summary: Dict[str, object] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
