"""Running-average query model.

Two update rules are provided. The simple rule blends each accepted feature
map in with a fixed factor ``alpha``; the smooth rule uses ``0.5/m + alpha``
for the m-th map, which averages the opening frames roughly uniformly before
settling to ``alpha``. Both start from ``Q_1 = F_1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .features import FeatureMap, read_feature_file, write_feature_file


@dataclass(frozen=True, eq=False)
class QueryModel:
    map: np.ndarray  # H x W x C
    n: int
    alpha: float

    def feature_map(self) -> FeatureMap:
        return FeatureMap(self.map)


def _check_alpha(alpha) -> None:
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")


def _values(f) -> np.ndarray:
    v = np.asarray(getattr(f, "values", f), dtype=np.float64)
    return v[..., None] if v.ndim == 2 else v


def init_model(first, alpha: float = 0.005) -> QueryModel:
    _check_alpha(alpha)
    v = _values(first)
    if not np.all(np.isfinite(v)):
        raise ValueError("initial feature map contains non-finite values")
    v = v.copy()
    v.setflags(write=False)
    return QueryModel(v, 1, alpha)


def simple_coefficient(m, alpha):
    """Weight given to the incoming map by the simple rule (independent of m)."""
    return alpha


def smooth_coefficient(m, alpha):
    """Weight given to the m-th map by the smooth rule; exact for Fractions."""
    if isinstance(alpha, Fraction):
        return Fraction(1, 2 * m) + alpha
    return 0.5 / m + alpha


def _blend(model: QueryModel, f, coef: float) -> QueryModel:
    v = _values(f)
    if v.shape != model.map.shape:
        raise ValueError(f"feature shape {v.shape} does not match model shape {model.map.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("feature map contains non-finite values")
    # q + c*(f - q): equal inputs give back q exactly
    new = model.map + coef * (v - model.map)
    new.setflags(write=False)
    return replace(model, map=new, n=model.n + 1)


def update_simple(model: QueryModel, f) -> QueryModel:
    return _blend(model, f, model.alpha)


def update_smooth(model: QueryModel, f) -> QueryModel:
    m = model.n + 1
    coef = smooth_coefficient(m, model.alpha)
    assert 1.0 - coef >= 0.0, "smooth-rule retention weight went negative"
    return _blend(model, f, coef)


UPDATE_RULES = {"simple": update_simple, "smooth": update_smooth}


def first_frame_weight(updates: int, alpha, rule: str = "simple"):
    """Weight that F_1 still carries after ``updates`` accepted updates.

    Unrolls the recurrence; pass Fractions for an exact value.
    """
    w = Fraction(1) if isinstance(alpha, Fraction) else 1.0
    for m in range(2, updates + 2):
        coef = simple_coefficient(m, alpha) if rule == "simple" else smooth_coefficient(m, alpha)
        w = w * (1 - coef)
    return w


def dump_model(model: QueryModel, path) -> None:
    """Write the map in the binary feature format plus a ``.meta`` sidecar."""
    path = Path(path)
    write_feature_file(model.feature_map(), path)
    path.with_name(path.name + ".meta").write_text(f"n={model.n}\nalpha={model.alpha!r}\n")


def load_model(path) -> QueryModel:
    path = Path(path)
    fmap = read_feature_file(path)
    meta = dict(line.split("=", 1) for line in
                path.with_name(path.name + ".meta").read_text().split())
    alpha = float(meta["alpha"])
    _check_alpha(alpha)
    v = fmap.values
    v.setflags(write=False)
    return QueryModel(v, int(meta["n"]), alpha)
