from dataclasses import dataclass
from typing import List, Optional


# ============================================================
# UBICACIONES EN EL CÓDIGO FUENTE
# ============================================================

@dataclass(frozen=True)
class SourceSpan:
    """Ubicación de un token: archivo, línea y columna (1-based), longitud >= 1"""
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    """Mensaje de error con su ubicación"""
    span: Optional[SourceSpan]
    message: str

    def __str__(self) -> str:
        if self.span is None:
            return self.message
        return f"{self.span}: {self.message}"


# ============================================================
# JERARQUÍA DE EXCEPCIONES
# ============================================================

class GapError(Exception):
    """Base de todos los errores de gap-infer"""


class SpecError(GapError):
    """Errores de lexer, parser o tipos en archivos .gap/.grm/.inst"""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @classmethod
    def single(cls, span: Optional[SourceSpan], message: str) -> "SpecError":
        return cls([Diagnostic(span, message)])


class EvalError(GapError):
    """Error en tiempo de evaluación (bug en la spec): tipo, parámetro sin ligar, entero fuera de rango"""

    def __init__(self, message: str, span: Optional[SourceSpan] = None):
        self.span = span
        super().__init__(f"{span}: {message}" if span else message)


class CacheError(GapError):
    """Archivo de caché ilegible"""


class CacheVersionError(CacheError):
    pass


class CacheChecksumError(CacheError):
    pass


class CacheSchemaError(CacheError):
    pass


class ResourceLimitError(GapError):
    """Límite de estados, memoria o tiempo excedido"""


class GraphError(GapError):
    """Grafo mal formado, hashes que no coinciden o extracción sobre un grafo inválido"""


class SearchTimeout(ResourceLimitError):
    """Se agotó el tiempo de una obligación local o de la corrida completa"""
