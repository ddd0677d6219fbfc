# priors.py: PROMPTY + EMBEDDINGI TEKSTOWE (F_g, F_l)
# =====================================================================
# - build_prompts:   stałe, wersjonowane szablony (globalny + per-keypoint)
# - pseudo_embed:    offline'owy zamiennik enkodera tekstu (hash tekstu → Philox → N(0,1) → L2)
# - save/load:       plik embeddingów = linia nagłówka JSON + 2 rekordy DPAT (F_g [d], F_l [N,d])
# - collapse_prior:  ablacja: jeden wspólny wektor dla F_g i wszystkich wierszy F_l
#
# Repo nigdy nie woła sieci: prawdziwe embeddingi przychodzą wyłącznie plikiem.
# =====================================================================

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import orjson

from .errors import ConfigError, FormatError, ValidationError
from .numerics import Rng, read_records, stable_hash64, write_records
from .utils.fs import atomic_write_bytes

log = logging.getLogger("diffpose-animal.priors")

PROMPT_TEMPLATE_VERSION = 1
EMBEDDING_HEADER_VERSION = 1
MIN_D = 8
UNIT_TOL = 1e-9
RENORM_TOL = 1e-12
ZERO_NORM = 1e-12

GLOBAL_TEMPLATE = (
    "Describe the body structure, locomotion style, and biomechanical characteristics "
    "of a {species} relevant to pose estimation. Keypoints: {names}."
)
KEYPOINT_TEMPLATE = "For a {species}, describe the anatomical role of the keypoint '{k}'."

Source = Literal["file", "pseudo", "collapsed"]


@dataclass(frozen=True)
class PromptBundle:
    species: str
    global_prompt: str
    keypoint_prompts: Dict[str, str]

    @property
    def keypoint_names(self) -> List[str]:
        return list(self.keypoint_prompts)


@dataclass(frozen=True)
class SemanticPrior:
    F_g: np.ndarray
    F_l: np.ndarray
    source: Source
    species: str = ""
    keypoint_names: tuple = ()
    encoder_name: str = "pseudo-embed-v1"

    def __post_init__(self) -> None:
        fg = np.array(self.F_g, dtype=np.float64)
        fl = np.array(self.F_l, dtype=np.float64)
        if fg.ndim != 1 or fl.ndim != 2 or fl.shape[1] != fg.shape[0]:
            raise FormatError(f"SemanticPrior: F_g {fg.shape} i F_l {fl.shape} mają niezgodne d")
        norms = np.linalg.norm(np.vstack([fg[None, :], fl]), axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValidationError(f"SemanticPrior: wiersze muszą mieć normę 1 ± {UNIT_TOL} (max odchyłka "
                                  f"{float(np.max(np.abs(norms - 1.0))):.3e})")
        if self.keypoint_names and len(self.keypoint_names) != fl.shape[0]:
            raise FormatError(f"SemanticPrior: {len(self.keypoint_names)} nazw vs {fl.shape[0]} wierszy F_l")
        for arr in (fg, fl):
            arr.flags.writeable = False
        object.__setattr__(self, "F_g", fg)
        object.__setattr__(self, "F_l", fl)
        object.__setattr__(self, "keypoint_names", tuple(self.keypoint_names))

    @property
    def d(self) -> int:
        return int(self.F_g.shape[0])

    @property
    def n(self) -> int:
        return int(self.F_l.shape[0])


# ─────────────────────────────────────────────────────────────────────────────
# Prompty
# ─────────────────────────────────────────────────────────────────────────────
def build_prompts(species: str, keypoints: Sequence[str]) -> PromptBundle:
    species = (species or "").strip()
    if not species:
        raise ValidationError("build_prompts: pusty gatunek")
    names = [str(k) for k in keypoints]
    if not names:
        raise ValidationError("build_prompts: pusta lista keypointów")
    seen = set()
    dup = [k for k in names if k in seen or seen.add(k)]
    if dup:
        raise ValidationError(f"build_prompts: zdublowane nazwy keypointów: {sorted(set(dup))}")
    return PromptBundle(
        species=species,
        global_prompt=GLOBAL_TEMPLATE.format(species=species, names=", ".join(names)),
        keypoint_prompts={k: KEYPOINT_TEMPLATE.format(species=species, k=k) for k in names},
    )


def write_prompts(bundle: PromptBundle, path: Path | str) -> Path:
    """Plik audytowy: dokładnie te teksty, które poszły do enkodera."""
    lines = [
        f"# prompt templates v{PROMPT_TEMPLATE_VERSION}",
        f"species\t{bundle.species}",
        f"global\t{bundle.global_prompt}",
    ]
    lines += [f"keypoint:{k}\t{text}" for k, text in bundle.keypoint_prompts.items()]
    return atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


# ─────────────────────────────────────────────────────────────────────────────
# Pseudo-embedder
# ─────────────────────────────────────────────────────────────────────────────
def _embed_text(text: str, d: int, seed: int) -> np.ndarray:
    rng = Rng(stable_hash64(text), f"pseudo-embed/seed={int(seed)}")
    v = rng.normal(d)
    return v / np.linalg.norm(v)


def pseudo_embed(bundle: PromptBundle, d: int, seed: int = 0) -> SemanticPrior:
    if int(d) < MIN_D:
        raise ConfigError(f"pseudo_embed: d={d} < minimum {MIN_D}")
    fg = _embed_text(bundle.global_prompt, d, seed)
    fl = np.stack([_embed_text(t, d, seed) for t in bundle.keypoint_prompts.values()])
    log.info("pseudo-embed: gatunek=%s N=%d d=%d seed=%d", bundle.species, fl.shape[0], d, seed)
    return SemanticPrior(fg, fl, "pseudo", bundle.species, tuple(bundle.keypoint_names), "pseudo-embed-v1")


def collapse_prior(prior: SemanticPrior, seed: int = 0) -> SemanticPrior:
    v = Rng(seed, "prior/collapsed").normal(prior.d)
    v = v / np.linalg.norm(v)
    return SemanticPrior(v, np.tile(v, (prior.n, 1)), "collapsed", prior.species,
                         prior.keypoint_names, prior.encoder_name)


# ─────────────────────────────────────────────────────────────────────────────
# Plik embeddingów
# ─────────────────────────────────────────────────────────────────────────────
def embedding_bytes(prior: SemanticPrior) -> bytes:
    header = {
        "version": EMBEDDING_HEADER_VERSION,
        "species": prior.species,
        "keypoint_names": list(prior.keypoint_names),
        "d": prior.d,
        "encoder_name": prior.encoder_name,
    }
    buf = io.BytesIO()
    buf.write(orjson.dumps(header, option=orjson.OPT_SORT_KEYS) + b"\n")
    write_records(buf, [prior.F_g, prior.F_l])
    return buf.getvalue()


def save_embeddings(prior: SemanticPrior, path: Path | str) -> Path:
    p = atomic_write_bytes(path, embedding_bytes(prior))
    log.info("embeddingi zapisane → %s (N=%d, d=%d)", p, prior.n, prior.d)
    return p


def _renormalize(rows: np.ndarray, what: str) -> np.ndarray:
    out = rows.copy()
    norms = np.linalg.norm(out, axis=-1)
    if np.any(norms < ZERO_NORM):
        bad = np.flatnonzero(np.atleast_1d(norms) < ZERO_NORM).tolist()
        raise ValidationError(f"load_embeddings: {what}, zerowa norma w wierszach {bad}, nie da się znormalizować")
    fix = np.abs(norms - 1.0) > RENORM_TOL
    if out.ndim == 1:
        return out / norms if fix else out
    out[fix] = out[fix] / norms[fix, None]
    return out


def parse_embeddings(buf: bytes, *, source: str = "<bytes>") -> SemanticPrior:
    nl = buf.find(b"\n")
    if nl < 0:
        raise FormatError(f"{source}: brak linii nagłówka JSON", offset=0)
    try:
        header = orjson.loads(buf[:nl])
    except orjson.JSONDecodeError as e:
        raise FormatError(f"{source}: nieczytelny nagłówek JSON: {e}", offset=0) from e
    if not isinstance(header, dict):
        raise FormatError(f"{source}: nagłówek musi być obiektem JSON", offset=0)
    missing = [k for k in ("species", "keypoint_names", "d", "encoder_name") if k not in header]
    if missing:
        raise FormatError(f"{source}: brak pól nagłówka: {', '.join(missing)}", offset=0)
    if header.get("version", EMBEDDING_HEADER_VERSION) != EMBEDDING_HEADER_VERSION:
        raise FormatError(f"{source}: nieznana wersja nagłówka {header.get('version')!r}", offset=0)

    (fg, fl), end = read_records(buf, nl + 1, count=2)
    if end != len(buf):
        raise FormatError(f"{source}: nadmiarowe bajty po rekordach F_g/F_l", offset=end)
    if fg.ndim != 1 or fl.ndim != 2:
        raise FormatError(f"{source}: oczekiwano F_g rank 1 i F_l rank 2, otrzymano {fg.shape} / {fl.shape}",
                          offset=nl + 1)
    if fl.shape[1] != fg.shape[0] or fg.shape[0] != int(header["d"]):
        raise FormatError(f"{source}: niezgodne d (nagłówek {header['d']}, F_g {fg.shape[0]}, F_l {fl.shape[1]})",
                          offset=nl + 1)
    names = list(header["keypoint_names"])
    if len(names) != fl.shape[0]:
        raise FormatError(f"{source}: nagłówek ma {len(names)} nazw, F_l ma {fl.shape[0]} wierszy", offset=0)

    return SemanticPrior(
        _renormalize(fg, "F_g"), _renormalize(fl, "F_l"), "file",
        str(header["species"]), tuple(names), str(header["encoder_name"]),
    )


def load_embeddings(path: Path | str, expected_n: Optional[int] = None) -> SemanticPrior:
    p = Path(path)
    prior = parse_embeddings(p.read_bytes(), source=str(p))
    if expected_n is not None and prior.n != int(expected_n):
        raise ValidationError(f"{p}: embeddingi mają N={prior.n} keypointów, zbiór danych N={expected_n}")
    log.info("embeddingi wczytane ← %s (N=%d, d=%d, enc=%s)", p, prior.n, prior.d, prior.encoder_name)
    return prior
