"""One-pass and temporal-robustness evaluation, curves and summaries.

Success at threshold t is the fraction of scored frames with IoU strictly
above t (t = 0, 0.05, ..., 1); its mean is the success AUC. Precision at d
is the fraction with centre error at most d pixels (d = 0..50); the headline
figure is d = 20. The initialisation frame of every run is not scored.
"""

from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .core import BoundingBox, center_error, iou
from .synth import SequenceDataset
from .tracker import VARIANTS, TrackerConfig, TrackerError, run_sequence

log = logging.getLogger(__name__)

SUCCESS_THRESHOLDS = np.arange(21) / 20.0
PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
PROTOCOLS = ("ope", "tre")

# runner(frames, b0, config, gt_boxes) -> (trajectory, fps)
Runner = Callable[..., tuple]


@dataclass(frozen=True, eq=False)
class EvalResult:
    sequence: str
    variant: str
    protocol: str
    success_curve: np.ndarray
    precision_curve: np.ndarray
    fps: float
    frames: int
    skipped_segments: tuple = ()

    @property
    def success_auc(self) -> float:
        return float(np.mean(self.success_curve))

    @property
    def precision_at_20(self) -> float:
        return float(self.precision_curve[20])


@dataclass(frozen=True)
class Summary:
    variant: str
    protocol: str
    success_auc: float
    precision_at_20: float
    fps: float
    sequences: int


def tracker_runner(frames, b0: BoundingBox, config: TrackerConfig, gt_boxes):
    gt = list(gt_boxes) if config.variant == "ftlr_gt" else None
    result = run_sequence(frames, b0, config, gt)
    return result.trajectory, result.fps


def playback_runner(frames, b0, config, gt_boxes):
    """Replays the ground truth; used to check the harness itself."""
    n = sum(1 for _ in frames)
    return list(gt_boxes)[:n], math.inf


def score_frames(predicted: Sequence[BoundingBox], truth: Sequence[BoundingBox]):
    if len(predicted) != len(truth):
        raise ValueError(f"{len(predicted)} predictions for {len(truth)} ground-truth boxes")
    ious = np.array([iou(p, t) for p, t in zip(predicted, truth)])
    errors = np.array([center_error(p, t) for p, t in zip(predicted, truth)])
    return ious, errors


def curves(ious: np.ndarray, errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(ious) == 0:
        return np.zeros(SUCCESS_THRESHOLDS.size), np.zeros(PRECISION_THRESHOLDS.size)
    success = (ious[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    precision = (errors[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    return success, precision


def _run(dataset, config, start, runner):
    gt = dataset.gt_boxes[start:]
    try:
        trajectory, fps = runner(dataset.frames(start), gt[0], config, gt)
    except TrackerError as exc:
        raise TrackerError(f"{dataset.name}: {exc}", exc.frame_index) from exc
    ious, errors = score_frames(trajectory[1:], gt[1:])
    return ious, errors, len(trajectory), fps


def run_ope(dataset: SequenceDataset, config: TrackerConfig, runner: Runner | None = None) -> EvalResult:
    ious, errors, n, fps = _run(dataset, config, 0, runner or tracker_runner)
    success, precision = curves(ious, errors)
    return EvalResult(dataset.name, config.variant, "ope", success, precision, fps, len(ious))


def tre_starts(length: int, segments: int) -> tuple[list[int], list[int]]:
    """0-based start positions of TRE runs, split into (feasible, skipped)."""
    if segments < 1:
        raise ValueError("segments must be >= 1")
    starts = [(i * length) // segments for i in range(segments)]
    ok = [s for s in starts if length - s >= 2]
    return ok, [s for s in starts if length - s < 2]


def run_tre(dataset: SequenceDataset, config: TrackerConfig, segments: int = 20,
            runner: Runner | None = None) -> EvalResult:
    """Restart from evenly spaced frames and pool every run's scored frames."""
    starts, skipped = tre_starts(len(dataset), segments)
    if skipped:
        log.warning("%s: skipping %d TRE segment(s) too short to track", dataset.name, len(skipped))
    all_ious, all_errors = [], []
    frames = 0
    seconds = 0.0
    for s in starts:
        ious, errors, n, fps = _run(dataset, config, s, runner or tracker_runner)
        all_ious.append(ious)
        all_errors.append(errors)
        frames += n
        seconds += n / fps if fps > 0 else 0.0
    ious = np.concatenate(all_ious)
    errors = np.concatenate(all_errors)
    success, precision = curves(ious, errors)
    fps = frames / seconds if seconds > 0 else math.inf
    return EvalResult(dataset.name, config.variant, "tre", success, precision, fps, len(ious),
                      tuple(s + 1 for s in skipped))


def evaluate(dataset: SequenceDataset, config: TrackerConfig, protocol: str = "ope",
             segments: int = 20, runner: Runner | None = None) -> EvalResult:
    if protocol == "ope":
        return run_ope(dataset, config, runner)
    if protocol == "tre":
        return run_tre(dataset, config, segments, runner)
    raise ValueError(f"unknown protocol {protocol!r}")


def _evaluate_task(args):
    return evaluate(*args)


def evaluate_many(datasets: Sequence[SequenceDataset], configs: Sequence[TrackerConfig],
                  protocol: str = "ope", segments: int = 20, workers: int = 1) -> list[EvalResult]:
    """Every (sequence, config) pair, returned in sequence-name then config order."""
    order = sorted(range(len(datasets)), key=lambda i: datasets[i].name)
    tasks = [(datasets[i], c, protocol, segments) for i in order for c in configs]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_task, tasks))
    return [_evaluate_task(t) for t in tasks]


def aggregate_results(results: Sequence[EvalResult]) -> list[Summary]:
    """Per-variant means over sequences, folded in sequence-name order."""
    if not results:
        raise ValueError("no results to aggregate")
    protocols = {r.protocol for r in results}
    if len(protocols) > 1:
        raise ValueError(f"cannot aggregate mixed protocols: {sorted(protocols)}")
    by_variant: dict[str, list[EvalResult]] = {}
    for r in sorted(results, key=lambda r: r.sequence):
        by_variant.setdefault(r.variant, []).append(r)
    out = []
    for variant in sorted(by_variant, key=_variant_key):
        rs = by_variant[variant]
        out.append(Summary(
            variant, rs[0].protocol,
            float(np.mean([r.success_auc for r in rs])),
            float(np.mean([r.precision_at_20 for r in rs])),
            float(np.mean([r.fps for r in rs])),
            len(rs),
        ))
    return out


def _variant_key(v):
    return (VARIANTS.index(v) if v in VARIANTS else len(VARIANTS), v)


def _num(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def summary_csv(results: Sequence[EvalResult], include_means: bool = True) -> str:
    """``sequence,variant,protocol,success_auc,precision_at_20,fps`` rows.

    Mean rows (sequence ``mean``) follow the per-sequence rows.
    """
    buf = io.StringIO()
    buf.write("sequence,variant,protocol,success_auc,precision_at_20,fps\n")
    rows = sorted(results, key=lambda r: (r.sequence, _variant_key(r.variant)))
    for r in rows:
        buf.write(f"{r.sequence},{r.variant},{r.protocol},{_num(r.success_auc)},"
                  f"{_num(r.precision_at_20)},{r.fps:.3f}\n")
    if include_means and rows:
        for s in aggregate_results(rows):
            buf.write(f"mean,{s.variant},{s.protocol},{_num(s.success_auc)},"
                      f"{_num(s.precision_at_20)},{s.fps:.3f}\n")
    return buf.getvalue()


def curves_csv(results: Sequence[EvalResult]) -> str:
    """Long format: ``sequence,variant,kind,threshold,value``."""
    buf = io.StringIO()
    buf.write("sequence,variant,kind,threshold,value\n")
    for r in sorted(results, key=lambda r: (r.sequence, _variant_key(r.variant))):
        for t, v in zip(SUCCESS_THRESHOLDS, r.success_curve):
            buf.write(f"{r.sequence},{r.variant},success,{t:g},{_num(v)}\n")
        for t, v in zip(PRECISION_THRESHOLDS, r.precision_curve):
            buf.write(f"{r.sequence},{r.variant},precision,{t:g},{_num(v)}\n")
    return buf.getvalue()


RECOVERY_SETTLE_FRAMES = 5
RECOVERY_IOU = 0.5


@dataclass(frozen=True)
class CalibrationRow:
    threshold: float
    failure_entry_rate: float  # ambiguous decisions / tracked frames
    recovery_rate: float  # jump sequences whose post-jump mean IoU >= RECOVERY_IOU
    pre_jump_entry_rate: float  # ambiguous decisions before any jump (false alarms)


def _calibration_task(args):
    dataset, config = args
    gt = list(dataset.gt_boxes)
    result = run_sequence(dataset.frames(), gt[0], config,
                          gt if config.variant == "ftlr_gt" else None)
    ambiguous = np.array([not o.decision.confident for o in result.trace])
    jumps = dataset.attributes.get("jumps") or []
    first_jump = min(jumps) if jumps else len(dataset)
    # trace[i] is frame i + 2; a jump at frame k shows from frame k + 1
    pre = ambiguous[:max(first_jump - 1, 0)]
    recovered = None
    if jumps:
        ious, _ = score_frames(result.trajectory, gt)
        tail = ious[first_jump + RECOVERY_SETTLE_FRAMES:]
        recovered = bool(tail.size and tail.mean() >= RECOVERY_IOU)
    return ambiguous, pre, recovered


def calibrate_nndr(datasets: Sequence[SequenceDataset], thresholds: Sequence[float],
                   base: TrackerConfig, workers: int = 1) -> list[CalibrationRow]:
    """Sweep the ratio-test threshold over a (synthetic) suite."""
    rows = []
    for thr in thresholds:
        config = replace(base, nndr_threshold=float(thr))
        tasks = [(d, config) for d in sorted(datasets, key=lambda d: d.name)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outs = list(pool.map(_calibration_task, tasks))
        else:
            outs = [_calibration_task(t) for t in tasks]
        amb = np.concatenate([o[0] for o in outs])
        pre = np.concatenate([o[1] for o in outs])
        rec = [o[2] for o in outs if o[2] is not None]
        rows.append(CalibrationRow(
            float(thr),
            float(amb.mean()) if amb.size else math.nan,
            float(np.mean(rec)) if rec else math.nan,
            float(pre.mean()) if pre.size else math.nan,
        ))
    return rows


def calibration_csv(rows: Sequence[CalibrationRow]) -> str:
    buf = io.StringIO()
    buf.write("threshold,failure_entry_rate,recovery_rate,pre_jump_entry_rate\n")
    for r in rows:
        buf.write(f"{r.threshold!r},{_num(r.failure_entry_rate)},{_num(r.recovery_rate)},"
                  f"{_num(r.pre_jump_entry_rate)}\n")
    return buf.getvalue()
