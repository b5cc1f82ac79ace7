from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
# Fixed salt keeps SVG element ids stable between runs.
matplotlib.rcParams["svg.hashsalt"] = "ldpchain"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ldpchain import __version__  # noqa: E402
from ldpchain.models import RateSurface  # noqa: E402

logger = logging.getLogger("ldpchain.artifacts")


def plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, doc: dict[str, Any]) -> Path:
    text = json.dumps(plain(doc), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    _write_atomic(path, text.encode("utf-8"))
    return path


def write_csv(path: Path, rows: Sequence[dict[str, Any]], columns: Iterable[str] | None = None) -> Path:
    """One row per record; columns default to first-seen key order."""
    if columns is None:
        seen: dict[str, None] = {}
        for row in rows:
            seen.update(dict.fromkeys(row))
        columns = list(seen)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    _write_atomic(path, buf.getvalue().encode("utf-8"))
    return path


def _cell(value: Any) -> Any:
    value = plain(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return value


def summary(config: dict[str, Any], workers: int, result: dict[str, Any]) -> dict[str, Any]:
    """Summary document: resolved config, seed and worker count, no timestamps."""
    return {
        "version": f"v{__version__}",
        "config": config,
        "seed": config.get("seed"),
        "workers": workers,
        "result": result,
    }


def _save_svg(path: Path, fig) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write_atomic(path, buf.getvalue())
    return path


def plot_rate_surface(path: Path, surface: RateSurface) -> Path:
    """(1/n) log p_hat against n, one line per delta; censored entries omitted."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for delta in sorted({e.delta for e in surface.entries}):
        pts = [(e.n, e.estimate) for e in surface.entries if e.delta == delta and e.estimate is not None]
        if pts:
            ax.plot(*zip(*pts), marker="o", label=f"delta={delta:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("(1/n) log P")
    ax.set_title(surface.target[:60])
    if ax.lines:
        ax.legend(fontsize="small")
    return _save_svg(path, fig)


def plot_series(path: Path, series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in series.items():
        if pts:
            ax.plot(*zip(*pts), marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if ax.lines:
        ax.legend(fontsize="small")
    return _save_svg(path, fig)
