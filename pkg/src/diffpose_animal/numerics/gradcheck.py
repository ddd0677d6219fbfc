"""
numerics.gradcheck: weryfikacja gradientów taśmy różnicami centralnymi.

    rel = |analityczny − numeryczny| / max(|analityczny|, |numeryczny|, 1e-6)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, Tuple

import numpy as np

from .rng import Rng
from .tensor import Tape, Tensor, backward

log = logging.getLogger("diffpose-animal.numerics")

REL_FLOOR = 1e-6


@dataclass
class CheckPoint:
    param: str
    index: Tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        return abs(self.analytic - self.numeric) / max(abs(self.analytic), abs(self.numeric), REL_FLOOR)


@dataclass
class GradcheckReport:
    h: float
    points: List[CheckPoint] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((p.rel_error for p in self.points), default=0.0)

    def ok(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def gradcheck(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    *,
    points: int = 20,
    h: float = 1e-5,
    rng: Rng | None = None,
) -> GradcheckReport:
    """
    `fn()` buduje forward od zera i zwraca skalarną stratę. Parametry są losowane
    proporcjonalnie do rozmiaru (indeksy bez powtórzeń), wartości przywracane po pomiarze.
    """
    rng = rng or Rng(0, "gradcheck")
    names = [n for n, p in params.items() if p.requires_grad]

    for n in names:
        params[n].zero_grad()
    with Tape() as tape:
        loss = fn()
    backward(loss, tape)

    sizes = np.array([params[n].size for n in names])
    total = int(sizes.sum())
    picks = rng.permutation(total)[: min(points, total)]
    offsets = np.cumsum(np.concatenate([[0], sizes]))

    report = GradcheckReport(h=h)
    for flat in sorted(int(f) for f in picks):
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[pi]
        p = params[name]
        idx = np.unravel_index(flat - int(offsets[pi]), p.shape)
        base = p.data.copy()

        bumped = base.copy()
        bumped[idx] = base[idx] + h
        p.assign_(bumped)
        f_plus = fn().item()
        bumped[idx] = base[idx] - h
        p.assign_(bumped)
        f_minus = fn().item()
        p.assign_(base)

        grad = p.grad if p.grad is not None else np.zeros(p.shape)
        report.points.append(
            CheckPoint(name, tuple(int(i) for i in idx), float(grad[idx]), (f_plus - f_minus) / (2.0 * h))
        )

    log.debug("gradcheck: %d próbek, max rel=%.3e", len(report.points), report.max_rel_error)
    return report
