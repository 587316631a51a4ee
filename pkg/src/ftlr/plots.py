"""SVG success and precision plots from a curves CSV."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .tracker import VARIANTS  # noqa: E402


def read_curves(path) -> dict[str, dict[str, list[tuple[float, float]]]]:
    """kind -> variant -> [(threshold, mean value over sequences)]."""
    acc = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            acc[row["kind"]][row.get("variant", "tracker")][float(row["threshold"])].append(
                float(row["value"]))
    out: dict = {}
    for kind, by_variant in acc.items():
        out[kind] = {}
        for variant, points in by_variant.items():
            out[kind][variant] = [(t, sum(v) / len(v)) for t, v in sorted(points.items())]
    return out


def _order(v):
    return (VARIANTS.index(v) if v in VARIANTS else len(VARIANTS), v)


def plot_curves(curves_path, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = read_curves(curves_path)
    labels = {
        "success": ("overlap threshold", "success rate", "AUC"),
        "precision": ("location error threshold (px)", "precision", "@20px"),
    }
    written = []
    with plt.rc_context({"svg.hashsalt": "ftlr", "svg.fonttype": "none"}):
        for kind in ("success", "precision"):
            if kind not in data:
                continue
            xlabel, ylabel, tag = labels[kind]
            fig, ax = plt.subplots(figsize=(5, 4))
            for variant in sorted(data[kind], key=_order):
                pts = data[kind][variant]
                xs, ys = [p[0] for p in pts], [p[1] for p in pts]
                score = sum(ys) / len(ys) if kind == "success" else dict(pts).get(20.0, float("nan"))
                ax.plot(xs, ys, label=f"{variant} [{tag} {score:.3f}]")
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.set_ylim(0, 1.02)
            ax.grid(alpha=0.3)
            ax.legend(loc="lower left" if kind == "success" else "lower right", fontsize=8)
            path = out_dir / f"{kind}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
