"""Two-mode correlation tracker.

Each frame the query model is correlated against a search window around the
current box. When the best peak clearly dominates the runner-up (ratio above
``nndr_threshold``) the box follows the peak, the model is updated and the
search area returns to its default. Otherwise the frame is treated as a
failure: the model is left untouched, the next search area is enlarged, and
the box is moved by a variant-specific fallback.

Variants:

``baseline``  ignore the gate; always follow the peak and update the model.
``ftlr_0``    hold the box still on failure.
``ftlr_1``    extrapolate the centre from the last two centres.
``ftlr``      census backup matcher, simple running average.
``ftlr_sa``   census backup matcher, smooth running average.
``ftlr_gt``   jump to the supplied ground-truth box (upper bound).
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .census import census_backup_match, census_transform, rotate_expand
from .core import BoundingBox, Frame, crop_patch
from .correlation import ResponseMap, apply_motion_window, cross_correlate
from .features import get_extractor
from .peaks import ConfidenceDecision, PeakPair, nndr_decision, top_two_peaks
from .template import UPDATE_RULES, QueryModel, init_model

VARIANTS = ("baseline", "ftlr_0", "ftlr_1", "ftlr", "ftlr_sa", "ftlr_gt")
NORMAL, FAILURE = "normal", "failure"


class TrackerError(RuntimeError):
    """Tracking could not proceed on a frame; carries the frame index."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message if frame_index is None else f"frame {frame_index}: {message}")
        self.frame_index = frame_index


@dataclass(frozen=True)
class TrackerConfig:
    nndr_threshold: float = 1.2
    alpha: float = 0.005
    default_area_factor: float = 1.0
    failure_area_multiplier: float = 2.0
    variant: str = "ftlr_sa"
    update_rule: str = "simple"
    extractor: str = "grayscale"
    min_separation: float = 3.0
    motion_window_strength: float = 0.0
    template_side: int = 64
    search_side: int = 128
    context_scale: float = 2.0
    template_context: float = 1.0
    # "enlarged": backup searches the failure-sized area in the failing frame;
    # "current": backup reuses the main search window of that frame
    backup_area: str = "enlarged"
    workers: int = 1

    def __post_init__(self):
        variant = str(self.variant).lower()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        object.__setattr__(self, "variant", variant)
        if variant == "ftlr_sa":
            object.__setattr__(self, "update_rule", "smooth")
        elif variant == "ftlr":
            object.__setattr__(self, "update_rule", "simple")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"unknown update rule {self.update_rule!r}")
        if not self.nndr_threshold > 1:
            raise ValueError("nndr_threshold must exceed 1")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if self.default_area_factor < 1:
            raise ValueError("default_area_factor must be >= 1")
        if self.failure_area_multiplier < 1:
            raise ValueError("failure_area_multiplier must be >= 1")
        if not 0 <= self.motion_window_strength <= 1:
            raise ValueError("motion_window_strength must lie in [0, 1]")
        if self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")
        if self.template_side < 8 or self.search_side <= self.template_side:
            raise ValueError("need 8 <= template_side < search_side")
        if self.backup_area not in ("enlarged", "current"):
            raise ValueError("backup_area must be 'enlarged' or 'current'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        get_extractor(self.extractor)

    @property
    def failure_area_factor(self) -> float:
        return self.default_area_factor * self.failure_area_multiplier

    def search_out_side(self, area_factor: float) -> int:
        """Resampled search side for an area factor, same parity as the template."""
        target = self.search_side * math.sqrt(area_factor)
        out = int(round(target))
        if (out - self.template_side) % 2:
            out = out + 1 if out + 1 - target <= target - (out - 1) else out - 1
        return out

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_mapping(cls, values: dict, base: TrackerConfig | None = None) -> TrackerConfig:
        base = base or cls()
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for name, raw in values.items():
            kind = type(getattr(base, name))
            try:
                kwargs[name] = kind(raw) if not isinstance(raw, kind) else raw
            except ValueError:
                raise ValueError(f"config key {name}: cannot parse {raw!r} as {kind.__name__}") from None
        return dataclasses.replace(base, **kwargs)


def parse_key_values(text: str) -> dict[str, str]:
    """Flat ``key=value`` text; blank lines and ``#`` comments ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True, eq=False)
class TrackerState:
    current_box: BoundingBox
    previous_box: BoundingBox
    area_factor: float
    mode: str
    model: QueryModel
    frame_index: int
    last_frame: Frame = field(repr=False)


@dataclass(frozen=True, eq=False)
class StepOutcome:
    frame_index: int
    box: BoundingBox
    decision: ConfidenceDecision
    used_backup: bool
    peak_pair: PeakPair
    area_factor: float  # area factor the frame was searched with
    response: ResponseMap | None = None


class TrackResult(NamedTuple):
    trajectory: list
    trace: list
    fps: float


def _template_patch(frame: Frame, box: BoundingBox, config: TrackerConfig):
    return crop_patch(frame, box, 1.0, config.template_side, config.template_context)


def _search_patch(frame: Frame, box: BoundingBox, area: float, config: TrackerConfig):
    return crop_patch(frame, box, area, config.search_out_side(area), config.context_scale)


def track_init(frame: Frame, b0: BoundingBox, config: TrackerConfig) -> TrackerState:
    extractor = get_extractor(config.extractor)
    model = init_model(extractor(_template_patch(frame, b0, config)), config.alpha)
    return TrackerState(b0, b0, config.default_area_factor, NORMAL, model, frame.index, frame)


def _backup_box(state: TrackerState, frame: Frame, config: TrackerConfig, search):
    if config.backup_area == "enlarged":
        area = max(state.area_factor, config.failure_area_factor)
        if area != state.area_factor:
            search = _search_patch(frame, state.current_box, area, config)
    tmpl = _template_patch(state.last_frame, state.current_box, config)
    (dx, dy), _ = census_backup_match(rotate_expand(census_transform(tmpl)),
                                      rotate_expand(census_transform(search)))
    return state.current_box.translated(dx * search.spacing, dy * search.spacing)


def track_step(state: TrackerState, frame: Frame, config: TrackerConfig,
               gt: BoundingBox | None = None, keep_response: bool = False
               ) -> tuple[TrackerState, StepOutcome]:
    if config.variant == "ftlr_gt" and gt is None:
        raise TrackerError("variant ftlr_gt needs a ground-truth box on every frame", frame.index)
    extractor = get_extractor(config.extractor)
    box = state.current_box
    search = _search_patch(frame, box, state.area_factor, config)
    feats = extractor(search)
    if feats.shape[2] != state.model.map.shape[2]:
        raise TrackerError(f"feature channels changed from {state.model.map.shape[2]} "
                           f"to {feats.shape[2]}", frame.index)
    response = cross_correlate(state.model.map, feats, workers=config.workers)
    response = apply_motion_window(response, config.motion_window_strength)
    pair = top_two_peaks(response, config.min_separation)
    decision = nndr_decision(pair, config.nndr_threshold)

    used_backup = False
    if decision.confident or config.variant == "baseline":
        dx, dy = response.displacement(*pair.p1_pos)
        new_box = box.translated(dx * search.spacing, dy * search.spacing)
        update = UPDATE_RULES[config.update_rule]
        model = update(state.model, extractor(_template_patch(frame, new_box, config)))
        area, mode = config.default_area_factor, NORMAL
    else:
        model = state.model
        area, mode = config.failure_area_factor, FAILURE
        if config.variant == "ftlr_0":
            new_box = box
        elif config.variant == "ftlr_1":
            (cx, cy), (px, py) = box.center, state.previous_box.center
            new_box = BoundingBox.from_center(2 * cx - px, 2 * cy - py, box.w, box.h)
        elif config.variant == "ftlr_gt":
            new_box = gt
        else:
            new_box = _backup_box(state, frame, config, search)
            used_backup = True

    new_state = TrackerState(new_box, box, area, mode, model, frame.index, frame)
    outcome = StepOutcome(frame.index, new_box, decision, used_backup, pair,
                          state.area_factor, response if keep_response else None)
    return new_state, outcome


def run_sequence(frames: Iterable[Frame], b0: BoundingBox, config: TrackerConfig,
                 gt_track: Sequence[BoundingBox] | None = None,
                 keep_responses: bool = False) -> TrackResult:
    """Track through ``frames``; fps counts tracker compute time only.

    ``frames`` may be a lazy iterable: time spent producing each frame
    (decoding, disk reads) is excluded from the fps figure.
    """
    if gt_track is not None and hasattr(frames, "__len__") and len(gt_track) != len(frames):
        raise ValueError(f"ground truth has {len(gt_track)} boxes for {len(frames)} frames")
    it = iter(frames)
    try:
        first = next(it)
    except StopIteration:
        raise ValueError("empty sequence") from None

    elapsed = 0.0
    t0 = time.perf_counter()
    state = track_init(first, b0, config)
    elapsed += time.perf_counter() - t0
    trajectory = [b0]
    trace = []
    for k, frame in enumerate(it, start=1):
        gt = None
        if gt_track is not None:
            if k >= len(gt_track):
                raise ValueError(f"ground truth ends before frame {frame.index}")
            gt = gt_track[k]
        t0 = time.perf_counter()
        state, outcome = track_step(state, frame, config, gt, keep_responses)
        elapsed += time.perf_counter() - t0
        trajectory.append(outcome.box)
        trace.append(outcome)
    if not trace:
        raise ValueError("need at least two frames to track")
    if gt_track is not None and len(gt_track) != len(trajectory):
        raise ValueError(f"ground truth has {len(gt_track)} boxes for {len(trajectory)} frames")
    fps = len(trajectory) / elapsed if elapsed > 0 else float("inf")
    return TrackResult(trajectory, trace, fps)


def trajectory_rows(result: TrackResult) -> list[str]:
    """``frame_index,x,y,w,h,confident,ratio,used_backup`` lines (with header)."""
    rows = ["frame_index,x,y,w,h,confident,ratio,used_backup"]
    first = result.trajectory[0]
    start = result.trace[0].frame_index - 1 if result.trace else 1
    rows.append(f"{start},{_fmt(first.x)},{_fmt(first.y)},{_fmt(first.w)},{_fmt(first.h)},1,inf,0")
    for o in result.trace:
        b = o.box
        rows.append(f"{o.frame_index},{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)},"
                    f"{int(o.decision.confident)},{_fmt(o.decision.ratio)},{int(o.used_backup)}")
    return rows


def trace_rows(result: TrackResult) -> list[str]:
    rows = ["frame_index,area_factor,p1_row,p1_col,p1_val,p2_row,p2_col,p2_val,"
            "ratio,confident,degenerate,used_backup"]
    for o in result.trace:
        p = o.peak_pair
        p2r, p2c = p.p2_pos if p.p2_pos is not None else ("", "")
        p2v = _fmt(p.p2_val) if p.p2_val is not None else ""
        rows.append(f"{o.frame_index},{_fmt(o.area_factor)},{p.p1_pos[0]},{p.p1_pos[1]},"
                    f"{_fmt(p.p1_val)},{p2r},{p2c},{p2v},{_fmt(o.decision.ratio)},"
                    f"{int(o.decision.confident)},{int(o.decision.degenerate)},{int(o.used_backup)}")
    return rows


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(float(np.float64(v)))
