# src/diffpose_animal/errors.py
"""
Hierarchia wyjątków pakietu + mapowanie na kody wyjścia CLI.

Kontrakt kodów (stały, pod skrypty):
  0: sukces
  1: błąd I/O (OSError)
  2: użycie / konfiguracja / walidacja / format
  3: awaria numeryczna (np. nieskończona strata)
"""

from __future__ import annotations

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class DiffPoseError(Exception):
    """Wspólna baza błędów domenowych."""

    exit_code: int = EXIT_CONFIG


class ConfigError(DiffPoseError, ValueError):
    """Niespójna konfiguracja (zakresy, kształty wynikające z configu, flagi)."""


class ShapeError(DiffPoseError, ValueError):
    """Niezgodne kształty tensorów."""


class ValidationError(DiffPoseError, ValueError):
    """Dane wejściowe łamią kontrakt (np. liczba keypointów, duplikaty nazw)."""


class ContractError(DiffPoseError, ValueError):
    """Naruszenie warunku wstępnego operacji (np. strata nie-skalarna w backward)."""


class FormatError(DiffPoseError, ValueError):
    """Uszkodzony / nieznany format pliku; `offset` wskazuje bajt, gdzie parser się zatrzymał."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (offset={offset})"
        super().__init__(message)
        self.offset = offset


class NumericInputError(DiffPoseError, ValueError):
    """Wejście zawiera NaN/Inf tam, gdzie operacja wymaga wartości skończonych."""


class SingularityError(DiffPoseError, ValueError):
    """Dzielenie przez zero w arytmetyce dyfuzji (ᾱ_t == 1)."""


class GenerationError(DiffPoseError, ValueError):
    """Generator danych syntetycznych nie może spełnić ograniczeń (np. za małe płótno)."""


class CheckpointMismatchError(ValidationError):
    """Checkpoint niezgodny z bieżącą konfiguracją (wersja / N / kształty)."""


class UndefinedMetricError(ValidationError):
    """Metryka niezdefiniowana dla instancji (np. OKS przy braku oznaczonych keypointów)."""


class NonFiniteLossError(DiffPoseError, ArithmeticError):
    """Strata NaN/Inf w kroku treningu; `diagnostics` trafia do zrzutu diagnostycznego."""

    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, DiffPoseError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_IO
