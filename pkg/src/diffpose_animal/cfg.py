from __future__ import annotations

from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple, Type, TypeVar

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


class Settings(BaseSettings):
    # ── LOG
    LOG_LEVEL: str = "INFO"

    # ── Ścieżki domyślne (CLI może nadpisać)
    DATA_DIR: str = "data"
    OUT_DIR: str = "runs"

    # ── Równoległość: generacja próbek, składanie batchy, inferencja splitu
    WORKERS: int = Field(default=4, ge=1)

    # ── Debug: zrzut heatmap (P2) z inferencji; puste = wyłączone
    HEATMAP_DUMP_DIR: Optional[str] = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )


settings = Settings()


# ─────────────────────────────────────────────────────────────────────────────
# Konfiguracje eksperymentu (pydantic): inwarianty pilnowane walidatorami
# ─────────────────────────────────────────────────────────────────────────────
class _FlatModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelConfig(_FlatModel):
    """Wymiary denoisera. N i d przychodzą z danych/priorów, reszta z TrainConfig."""

    C: int = Field(default=32, gt=0)
    d: int = Field(default=64, gt=0)
    heads: int = Field(default=4, gt=0)
    t_dim: int = Field(default=16, gt=0)
    N: int = Field(default=17, gt=0)
    T: int = Field(default=100, ge=1)
    image_h: int = Field(default=64, gt=0)
    image_w: int = Field(default=64, gt=0)
    stride: int = 4

    @model_validator(mode="after")
    def _check(self) -> "ModelConfig":
        if self.C % self.heads != 0:
            raise ValueError(f"C={self.C} musi być podzielne przez heads={self.heads}")
        if self.stride not in (1, 2, 4, 8):
            raise ValueError(f"stride={self.stride} spoza {{1,2,4,8}}")
        if self.image_h % 8 or self.image_w % 8:
            raise ValueError(f"obraz {self.image_h}x{self.image_w} musi być podzielny przez 8")
        if self.t_dim % 2:
            raise ValueError(f"t_dim={self.t_dim} musi być parzyste (sin/cos)")
        return self

    @property
    def resolution(self) -> Tuple[int, int]:
        return (self.image_h // self.stride, self.image_w // self.stride)


class TrainConfig(_FlatModel):
    """Hiperparametry treningu: domyślne to skala „desk” z zachowanymi proporcjami harmonogramu."""

    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=16, ge=1)
    lr: float = Field(default=5e-4, gt=0)
    weight_decay: float = Field(default=1e-4, ge=0)
    lr_decay_epochs: List[int] = Field(default_factory=lambda: [24, 29])
    lr_decay_factor: float = Field(default=0.1, gt=0)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)

    # dyfuzja
    T: int = Field(default=100, ge=1)
    beta_start: float = 1e-4
    beta_end: float = 0.02
    loss_target: Literal["x0", "eps"] = "x0"
    mask_unlabeled: bool = True

    # heatmapy
    sigma: float = Field(default=2.0, gt=0)
    stride: int = 4
    vis_threshold: float = Field(default=0.3, ge=0, le=1)

    # model
    C: int = Field(default=32, gt=0)
    heads: int = Field(default=4, gt=0)
    t_dim: int = Field(default=16, gt=0)

    # inferencja / ablacje
    infer_mode: Literal["literal", "ddim"] = "literal"
    prior_mode: Literal["distinct", "collapsed"] = "distinct"

    seed: int = 0
    checkpoint_every: int = Field(default=1, ge=1)

    @field_validator("lr_decay_epochs")
    @classmethod
    def _decay_sorted(cls, v: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"lr_decay_epochs musi rosnąć ściśle: {v}")
        return v

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.lr_decay_epochs and self.lr_decay_epochs[-1] >= self.epochs:
            raise ValueError(
                f"lr_decay_epochs={self.lr_decay_epochs} musi być < epochs={self.epochs}"
            )
        if not (0 < self.beta_start <= self.beta_end < 1):
            raise ValueError(f"wymagane 0 < beta_start <= beta_end < 1 ({self.beta_start}, {self.beta_end})")
        return self

    def model_config_for(self, *, N: int, d: int, image_h: int, image_w: int) -> ModelConfig:
        return ModelConfig(
            C=self.C, d=d, heads=self.heads, t_dim=self.t_dim, N=N, T=self.T,
            image_h=image_h, image_w=image_w, stride=self.stride,
        )


class SynthConfig(_FlatModel):
    """Parametry generatora danych syntetycznych."""

    canvas: int = Field(default=64, gt=8)
    p_occ: float = Field(default=0.3, ge=0, le=1)
    scale_min: float = Field(default=0.5, gt=0)
    scale_max: float = Field(default=0.9, gt=0)
    margin: float = Field(default=2.0, ge=0)
    bbox_pad: float = Field(default=0.10, ge=0)
    bone_width: float = Field(default=1.5, gt=0)
    background_amplitude: float = Field(default=0.15, ge=0, le=1)

    @model_validator(mode="after")
    def _check(self) -> "SynthConfig":
        if self.scale_min > self.scale_max or self.scale_max > 1:
            raise ValueError(f"wymagane scale_min <= scale_max <= 1 ({self.scale_min}, {self.scale_max})")
        return self


class EvalConfig(_FlatModel):
    """Protokół ewaluacji: OKS/AP/AR, PCK@α, AUC."""

    kappa: Optional[List[float]] = None
    default_kappa: float = Field(default=0.08, gt=0)
    oks_thresholds: List[float] = Field(
        default_factory=lambda: [round(0.50 + 0.05 * i, 2) for i in range(10)]
    )
    pck_alpha: float = Field(default=0.05, gt=0)
    pck_norm_rule: Literal["bbox_max_side"] = "bbox_max_side"
    auc_max: float = Field(default=0.5, gt=0)
    auc_step: float = Field(default=0.01, gt=0)
    area_medium: Tuple[float, float] = (32.0 ** 2, 96.0 ** 2)
    area_large: Tuple[float, float] = (96.0 ** 2, 1e10)
    max_dets: int = Field(default=20, ge=1)

    @field_validator("oks_thresholds")
    @classmethod
    def _thr_sorted(cls, v: List[float]) -> List[float]:
        if not v or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"oks_thresholds musi rosnąć ściśle: {v}")
        return v

    @field_validator("kappa")
    @classmethod
    def _kappa_pos(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(k <= 0 for k in v):
            raise ValueError("kappa_i musi być > 0")
        return v

    def kappas(self, n: int) -> List[float]:
        if self.kappa is None:
            return [self.default_kappa] * n
        if len(self.kappa) != n:
            raise ConfigError(f"kappa ma {len(self.kappa)} wartości, oczekiwano N={n}")
        return list(self.kappa)

    def auc_alphas(self) -> List[float]:
        steps = int(round(self.auc_max / self.auc_step))
        return [round(i * self.auc_step, 10) for i in range(steps + 1)]


# ─────────────────────────────────────────────────────────────────────────────
# Płaski format key=value (pliki configów + resolved_config.txt)
# ─────────────────────────────────────────────────────────────────────────────
M = TypeVar("M", bound=BaseModel)


def parse_flat_text(text: str, *, source: str = "<text>") -> dict[str, Any]:
    """
    Parsuje `klucz = wartość` linia po linii. Wartości typujemy przez yaml.safe_load
    (listy `[24, 29]`, bool, float, null); `#` i puste linie pomijamy.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: brak '=' w linii: {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: pusty klucz")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: zdublowany klucz {key!r}")
        try:
            out[key] = yaml.safe_load(value.strip()) if value.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(f"{source}:{lineno}: nieczytelna wartość dla {key!r}: {e}") from e
    return out


def build_config(model_cls: Type[M], values: dict[str, Any], *, source: str = "<config>") -> M:
    try:
        return model_cls(**values)
    except ValidationError as e:
        raise ConfigError(f"{source}: niepoprawna konfiguracja {model_cls.__name__}: {e}") from e


def load_flat_config(path: Path | str, model_cls: Type[M]) -> M:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    return build_config(model_cls, parse_flat_text(text, source=str(p)), source=str(p))


def _render(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    return value if isinstance(value, str) else repr(value)


def dump_flat_config(cfg: BaseModel) -> str:
    """Zapis w tym samym formacie (klucze posortowane): round-trip przez load_flat_config."""
    lines = [f"{key} = {_render(value)}" for key, value in sorted(cfg.model_dump().items())]
    return "\n".join(lines) + "\n"
