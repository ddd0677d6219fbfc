"""
Podpakiet diffpose_animal.tasks: jedna komenda CLI = jeden moduł z `run(args) -> int`.
Typowa kolejność: gen_data → embed → train → infer → evaluate → plot.
"""
from __future__ import annotations

from pathlib import Path

from ..errors import ConfigError

__all__ = ["require_input"]


def require_input(path: Path | str | None, what: str) -> Path:
    """Brakujące wejście to błąd użycia (kod 2), nie I/O: ścieżkę podał użytkownik."""
    if path is None:
        raise ConfigError(f"brak wymaganej ścieżki: {what}")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what}: nie istnieje: {p}")
    return p
