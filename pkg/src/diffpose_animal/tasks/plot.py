# src/diffpose_animal/tasks/plot.py
# Krzywe z CSV (loss.csv / train_log.csv / pck_curve.csv) → samodzielny SVG (matplotlib, backend svg).
from __future__ import annotations

import argparse
import io
from pathlib import Path
from typing import Optional, Sequence, Tuple

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from ..errors import ValidationError
from ..log import log
from ..utils.fs import atomic_write_bytes
from . import require_input

DEFAULT_AXES = (("step", "loss"), ("alpha", "pck"))
FIGSIZE = (6.4, 4.0)

# stałe id w SVG i brak daty w metadanych → ten sam CSV daje te same bajty
SVG_RC = {"svg.hashsalt": "diffpose-animal", "svg.fonttype": "none"}


def pick_axes(df: pd.DataFrame, x: Optional[str], y: Optional[str], source: str) -> Tuple[str, str]:
    if not (x and y):
        for dx, dy in DEFAULT_AXES:
            if dx in df.columns and dy in df.columns:
                x, y = x or dx, y or dy
                break
    if not (x and y):
        raise ValidationError(f"{source}: nie rozpoznano osi, podaj --x/--y (kolumny: {list(df.columns)})")
    for c in (x, y):
        if c not in df.columns:
            raise ValidationError(f"{source}: brak kolumny {c!r} (są: {list(df.columns)})")
    return x, y


def render_svg(series: Sequence[Tuple[str, np.ndarray, np.ndarray]], x_label: str, y_label: str,
               title: str = "") -> bytes:
    """Każda seria to osobna linia z markerami; grupa SVG serii k ma id `series-k`."""
    if not any((np.isfinite(x) & np.isfinite(y)).any() for _, x, y in series):
        raise ValidationError("plot: brak skończonych punktów do narysowania")
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=FIGSIZE)
        ax = fig.subplots()
        for k, (name, x, y) in enumerate(series):
            ok = np.isfinite(x) & np.isfinite(y)
            (line,) = ax.plot(x[ok], y[ok], marker="o", markersize=3, linewidth=1.5, label=name)
            line.set_gid(f"series-{k}")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        if len(series) > 1:
            ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    series = []
    x_label = y_label = ""
    for c in args.csv:
        p = require_input(c, "--csv")
        df = pd.read_csv(p)
        x_label, y_label = pick_axes(df, args.x, args.y, str(p))
        series.append((p.stem, df[x_label].to_numpy(dtype=np.float64), df[y_label].to_numpy(dtype=np.float64)))
    atomic_write_bytes(out, render_svg(series, x_label, y_label, args.title or ""))
    log.info("plot: %d serii → %s", len(series), out)
    return 0
