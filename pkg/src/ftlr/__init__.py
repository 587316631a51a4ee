"""Correlation tracker with a ratio-test failure mode and a Census backup matcher."""

from .core import BoundingBox, Frame, crop_patch, center_error, iou
from .evaluation import EvalResult, aggregate_results, run_ope, run_tre
from .synth import SequenceDataset, SynthSpec, generate_synthetic, jump_suite, load_otb_sequence
from .tracker import VARIANTS, TrackerConfig, TrackerError, run_sequence, track_init, track_step

__all__ = [
    "BoundingBox", "Frame", "crop_patch", "center_error", "iou",
    "EvalResult", "aggregate_results", "run_ope", "run_tre",
    "SequenceDataset", "SynthSpec", "generate_synthetic", "jump_suite", "load_otb_sequence",
    "VARIANTS", "TrackerConfig", "TrackerError", "run_sequence", "track_init", "track_step",
]
