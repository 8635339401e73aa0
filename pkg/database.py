from uuid import UUID
import duckdb
import json
import logging
from typing import List, Optional, Dict, Any
from pathlib import Path

import pandas as pd

from models import RunManifest

logger = logging.getLogger(__name__)

LEDGER_FILE = "ledger.duckdb"


class LedgerClient:
    """Registro DuckDB de corridas (manifiestos) y estadísticas por nodo de acción"""

    def __init__(self, db_path: str = LEDGER_FILE):
        self.db_path = str(db_path)
        if self.db_path != ":memory:":
            Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self.conn = duckdb.connect(self.db_path)
        self._initialize_database()

    def _initialize_database(self):
        """Crea tablas si no existen"""

        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id UUID PRIMARY KEY,
                command VARCHAR NOT NULL,
                protocol VARCHAR,
                seed BIGINT,
                outcome VARCHAR,
                exit_code INTEGER,
                wall_time DOUBLE,
                config JSON,
                inputs JSON,
                summary JSON,
                artifacts JSON,
                started_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)

        self.conn.execute("""
            CREATE INDEX IF NOT EXISTS idx_runs_started_at
            ON runs(started_at)
        """)

        self.conn.execute("""
            CREATE INDEX IF NOT EXISTS idx_runs_command
            ON runs(command)
        """)

        # Una fila por nodo de acción de una corrida `infer`
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS node_stats (
                run_id UUID,
                lemma VARCHAR NOT NULL,
                action VARCHAR NOT NULL,
                status VARCHAR NOT NULL,
                provenance VARCHAR,
                slice_size INTEGER,
                projected BIGINT,
                ctis_generated BIGINT,
                ctis_eliminated BIGINT,
                wall_time DOUBLE,
                PRIMARY KEY (run_id, lemma, action)
            )
        """)

        self.conn.execute("""
            CREATE INDEX IF NOT EXISTS idx_node_stats_run
            ON node_stats(run_id)
        """)

        logger.debug("ledger ready at %s", self.db_path)

    # ============================================================
    # MÉTODOS DE INSERCIÓN
    # ============================================================

    def insert_run(self, manifest: RunManifest, protocol: Optional[str] = None) -> Dict[str, Any]:
        """Inserta un manifiesto de corrida y devuelve la fila guardada"""
        try:
            self.conn.execute("""
                INSERT INTO runs (
                    id, command, protocol, seed, outcome, exit_code, wall_time,
                    config, inputs, summary, artifacts, started_at
                )
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, [
                manifest.id,
                manifest.command,
                protocol,
                manifest.seed,
                manifest.outcome,
                manifest.exit_code,
                manifest.wall_time,
                json.dumps(manifest.config, default=str),
                json.dumps(manifest.inputs),
                json.dumps(manifest.summary, default=str),
                json.dumps(manifest.artifacts),
                manifest.started_at,
            ])
            return self.get_run(manifest.id)
        except duckdb.Error as e:
            logger.error("error inserting run %s: %s", manifest.id, e)
            raise

    def insert_node_stats(self, run_id: str, rows: List[Dict[str, Any]]) -> int:
        """Inserta estadísticas por nodo de acción; devuelve cuántas filas se guardaron"""
        if not rows:
            return 0
        try:
            self.conn.executemany("""
                INSERT INTO node_stats (
                    run_id, lemma, action, status, provenance, slice_size,
                    projected, ctis_generated, ctis_eliminated, wall_time
                )
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, [
                [
                    run_id,
                    r["lemma"],
                    r["action"],
                    r["status"],
                    r.get("provenance", ""),
                    r.get("slice_size", 0),
                    r.get("projected", 0),
                    r.get("ctis_generated", 0),
                    r.get("ctis_eliminated", 0),
                    r.get("wall_time", 0.0),
                ]
                for r in rows
            ])
            return len(rows)
        except duckdb.Error as e:
            logger.error("error inserting node stats for %s: %s", run_id, e)
            raise

    # ============================================================
    # CONSULTAS
    # ============================================================

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        rows = self.execute("SELECT * FROM runs WHERE id = ?", [run_id])
        return rows[0] if rows else None

    def get_runs(self, command: Optional[str] = None, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        """
        Corridas más recientes primero

        Args:
            command: Filtrar por subcomando (reach, infer, check...)
            limit: Límite de resultados
        """
        query = "SELECT * FROM runs"
        params: List[Any] = []
        if command:
            query += " WHERE command = ?"
            params.append(command)
        query += " ORDER BY started_at DESC, id"
        if limit:
            query += f" LIMIT {int(limit)}"
        return self.execute(query, params)

    def get_node_stats(self, run_id: str) -> List[Dict[str, Any]]:
        return self.execute(
            "SELECT * FROM node_stats WHERE run_id = ? ORDER BY lemma, action",
            [run_id],
        )

    def history_frame(self, command: Optional[str] = None, limit: Optional[int] = None) -> pd.DataFrame:
        """Tabla de corridas para el subcomando `history`"""
        columns = ["started_at", "command", "protocol", "outcome", "exit_code", "wall_time", "seed"]
        runs = self.get_runs(command, limit)
        frame = pd.DataFrame(runs, columns=["id"] + columns)
        if not frame.empty:
            frame["id"] = frame["id"].str.slice(0, 8)
            frame["wall_time"] = frame["wall_time"].round(2)
        return frame

    # ============================================================
    # MÉTODOS AUXILIARES
    # ============================================================

    def execute(self, query: str, params: List[Any] = None) -> List[Dict[str, Any]]:
        """Ejecuta query SQL genérico"""
        if params:
            cursor = self.conn.execute(query, params)
        else:
            cursor = self.conn.execute(query)
        columns = [desc[0] for desc in cursor.description]
        return [self._row_to_dict(columns, row) for row in cursor.fetchall()]

    def _row_to_dict(self, columns: List[str], row) -> Dict[str, Any]:
        """Convierte una fila de DuckDB a dict"""
        result = dict(zip(columns, row))

        for key in ("id", "run_id"):
            if key in result and isinstance(result[key], UUID):
                result[key] = str(result[key])

        for field in ("config", "inputs", "summary", "artifacts"):
            if field in result and isinstance(result[field], str):
                try:
                    result[field] = json.loads(result[field])
                except json.JSONDecodeError:
                    pass

        return result

    def close(self):
        """Cierra conexión a DB"""
        self.conn.close()
