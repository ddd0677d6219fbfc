# diffusion.py: HARMONOGRAM β + ARYTMETYKA DYFUZJI
# =====================================================================
#   α_t  = 1 − β_t
#   ᾱ_t  = Π_{s≤t} α_s                (ᾱ_0 := 1)
#   y_t  = √ᾱ_t · y_0 + √(1−ᾱ_t) · ε   (próbkowanie w przód, forma zamknięta)
#   ε̂    = (y_t − √ᾱ_t · ŷ_0) / √(1−ᾱ_t)
#   ŷ_{t−1} = √ᾱ_{t−1} · ŷ_0 + √(1−ᾱ_{t−1}) · ε̂   (krok deterministyczny)
#
# Indeksy t są 1-bazowe (1..T); tablice trzymamy 0-bazowo (t−1).
# =====================================================================

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, ShapeError, SingularityError
from .heatmap_codec import HeatmapStack
from .numerics import Tensor

log = logging.getLogger("diffpose-animal.diffusion")

ArrayLike = Union[HeatmapStack, Tensor, np.ndarray]


@dataclass(frozen=True)
class DiffusionSchedule:
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    kind: str = "linear"

    def check_t(self, t: int, *, allow_zero: bool = False) -> None:
        lo = 0 if allow_zero else 1
        if not (lo <= int(t) <= self.T):
            raise ConfigError(f"t={t} poza zakresem [{lo}, {self.T}]")

    def abar(self, t: int) -> float:
        """ᾱ_t z konwencją ᾱ_0 = 1."""
        self.check_t(t, allow_zero=True)
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def snr(self, t: int) -> float:
        a = self.abar(t)
        return a / (1.0 - a)


def make_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02,
                  kind: Literal["linear"] = "linear") -> DiffusionSchedule:
    if kind != "linear":
        raise ConfigError(f"nieznany rodzaj harmonogramu: {kind!r}")
    if int(T) < 1:
        raise ConfigError(f"T={T} musi być >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(f"wymagane 0 < beta_start <= beta_end < 1 ({beta_start}, {beta_end})")
    beta = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    for arr in (beta, alpha, alpha_bar):
        arr.flags.writeable = False
    return DiffusionSchedule(int(T), beta, alpha, alpha_bar, kind)


# ─────────────────────────────────────────────────────────────────────────────
# helpers
# ─────────────────────────────────────────────────────────────────────────────
def _values(x: ArrayLike) -> np.ndarray:
    if isinstance(x, HeatmapStack):
        return x.values
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _wrap(like: ArrayLike, values: np.ndarray):
    if isinstance(like, HeatmapStack):
        return like.replace(values)
    return values


def _pair(name: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: niezgodne kształty {a.shape} vs {b.shape}")


# ─────────────────────────────────────────────────────────────────────────────
# operacje
# ─────────────────────────────────────────────────────────────────────────────
def forward_sample(y0: ArrayLike, t: int, eps: ArrayLike, sched: DiffusionSchedule):
    sched.check_t(t)
    y, e = _values(y0), _values(eps)
    _pair("forward_sample", y, e)
    a = sched.abar(t)
    return _wrap(y0, np.sqrt(a) * y + np.sqrt(1.0 - a) * e)


def _eps(y_t: np.ndarray, y0_hat: np.ndarray, a: float) -> np.ndarray:
    if a >= 1.0:
        raise SingularityError(f"eps_from_x0: ᾱ={a!r} == 1 (dzielenie przez zero)")
    return (y_t - np.sqrt(a) * y0_hat) / np.sqrt(1.0 - a)


def eps_from_x0(y_t: ArrayLike, y0_hat: ArrayLike, t: int, sched: DiffusionSchedule) -> Tensor:
    sched.check_t(t)
    yt, y0 = _values(y_t), _values(y0_hat)
    _pair("eps_from_x0", yt, y0)
    return Tensor(_eps(yt, y0, sched.abar(t)))


def x0_from_eps(y_t: ArrayLike, eps_hat: ArrayLike, t: int, sched: DiffusionSchedule):
    """Odwrotność eps_from_x0: dla głowicy przewidującej szum."""
    sched.check_t(t)
    yt, e = _values(y_t), _values(eps_hat)
    _pair("x0_from_eps", yt, e)
    a = sched.abar(t)
    return _wrap(y_t, (yt - np.sqrt(1.0 - a) * e) / np.sqrt(a))


def ddim_step(y_t: ArrayLike, y0_hat: ArrayLike, t: int, sched: DiffusionSchedule):
    sched.check_t(t)
    yt, y0 = _values(y_t), _values(y0_hat)
    _pair("ddim_step", yt, y0)
    a_prev = sched.abar(t - 1)
    if t == 1:
        return _wrap(y_t, y0.copy())
    e = _eps(yt, y0, sched.abar(t))
    return _wrap(y_t, np.sqrt(a_prev) * y0 + np.sqrt(1.0 - a_prev) * e)


def schedule_frame(sched: DiffusionSchedule) -> pd.DataFrame:
    return pd.DataFrame({
        "t": np.arange(1, sched.T + 1),
        "beta": sched.beta,
        "alpha": sched.alpha,
        "alpha_bar": sched.alpha_bar,
    })


def dump_schedule_csv(sched: DiffusionSchedule, path: Path | str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    schedule_frame(sched).to_csv(p, index=False, float_format="%.17g", lineterminator="\n")
    log.info("harmonogram T=%d zapisany → %s", sched.T, p)
    return p
