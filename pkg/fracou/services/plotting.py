"""Static SVG rendering of result tables.

The SVG output is byte-stable: a fixed hash salt replaces random element ids
and the creation date is left out of the metadata.
"""
from __future__ import annotations

import io
import logging
import math
from pathlib import Path
from typing import Literal, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from ..errors import UsageError  # noqa: E402
from .storage import atomic_write_text, read_table  # noqa: E402

logger = logging.getLogger(__name__)

PlotStyle = Literal["line", "markers"]


def _column(header: list[str], rows: list[list[str]], name: str, path: Path) -> list[float]:
    if name not in header:
        raise UsageError(f"table {path} has no column {name!r}; columns: {', '.join(header)}")
    index = header.index(name)
    try:
        return [float(row[index]) for row in rows]
    except ValueError as exc:
        raise UsageError(f"column {name!r} of {path} is not numeric") from exc


def render_svg(
    table: Path,
    out: Path,
    *,
    x: str,
    y: Sequence[str],
    logx: bool = False,
    logy: bool = False,
    style: PlotStyle = "line",
    title: Optional[str] = None,
) -> Path:
    header, rows = read_table(table)
    xs = _column(header, rows, x, table)
    series = {name: _column(header, rows, name, table) for name in y}
    with plt.rc_context({"svg.hashsalt": "fracou", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for name, ys in series.items():
            points = [
                (a, b)
                for a, b in zip(xs, ys)
                if math.isfinite(a) and math.isfinite(b) and (not logx or a > 0) and (not logy or b > 0)
            ]
            if not points:
                continue
            px, py = zip(*points)
            if style == "markers":
                ax.plot(px, py, linestyle="none", marker="o", markersize=3, label=name)
            else:
                ax.plot(px, py, linewidth=1.0, label=name)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.set_ylabel(", ".join(y))
        if title:
            ax.set_title(title)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best", fontsize="small")
        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("Rendered plot", extra={"table": str(table), "rows": len(rows), "series": list(series)})
    return atomic_write_text(out, buffer.getvalue())
