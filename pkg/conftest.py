import sys
from pathlib import Path

# Los módulos viven en la raíz del repositorio
sys.path.insert(0, str(Path(__file__).parent))
