"""Command-line entry point.

Subcommands: run, eval, synth, calibrate-nndr, plot, replay. Every
subcommand writes ``resolved_config.txt`` to its output directory; feeding
that file to ``ftlr replay`` repeats the invocation exactly.

Exit codes:
    0  success
    2  usage or configuration error
    3  input could not be ingested (missing files, malformed ground truth)
    4  tracker failure while processing a frame
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

from .core import BoundingBox, Frame
from .correlation import write_response_csv
from .evaluation import (PROTOCOLS, calibrate_nndr, calibration_csv, curves_csv,
                         evaluate_many, summary_csv)
from .synth import (SequenceFormatError, SynthSpec, generate_synthetic, jump_suite,
                    list_frames, load_otb_sequence, read_image)
from .tracker import (VARIANTS, TrackerConfig, TrackerError, parse_key_values,
                      run_sequence, trace_rows, trajectory_rows)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INGEST = 3
EXIT_TRACKER = 4

CONFIG_ENV = "FTLR_CONFIG"
RESOLVED_NAME = "resolved_config.txt"
DEFAULT_THRESHOLDS = "1.05,1.1,1.2,1.3,1.4,1.6,1.8,2.0,2.5,3.0"
CONFIG_KEYS = tuple(f.name for f in fields(TrackerConfig))
SPEC_PREFIX = "spec."

log = logging.getLogger("ftlr")


class UsageError(Exception):
    pass


# -- configuration -----------------------------------------------------------

def _read_config_file(path) -> dict[str, str]:
    try:
        return parse_key_values(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None


def resolve_config(args) -> TrackerConfig:
    """Defaults, then $FTLR_CONFIG, then --config, then individual flags."""
    config = TrackerConfig()
    try:
        env = os.environ.get(CONFIG_ENV)
        if env:
            config = TrackerConfig.from_mapping(_read_config_file(env), config)
        if getattr(args, "config", None):
            config = TrackerConfig.from_mapping(_read_config_file(args.config), config)
        flags = {
            "variant": getattr(args, "variant", None),
            "nndr_threshold": args.nndr,
            "alpha": args.alpha,
            "update_rule": args.update_rule,
            "failure_area_multiplier": args.area_multiplier,
            "extractor": args.extractor,
        }
        return TrackerConfig.from_mapping({k: v for k, v in flags.items() if v is not None}, config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config_items(config: TrackerConfig) -> dict[str, str]:
    return parse_key_values(config.to_text())


def _config_from_resolved(resolved: dict[str, str]) -> TrackerConfig:
    try:
        return TrackerConfig.from_mapping({k: resolved[k] for k in CONFIG_KEYS if k in resolved})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_resolved(out: Path, resolved: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    text = "# replay with: ftlr replay <this file> --out DIR\n"
    text += "".join(f"{k}={v}\n" for k, v in resolved.items())
    (out / RESOLVED_NAME).write_text(text)


def _parse_box(text: str) -> BoundingBox:
    try:
        x, y, w, h = (float(p) for p in text.replace(" ", "").split(","))
        return BoundingBox(x, y, w, h)
    except ValueError:
        raise UsageError(f"--init expects x,y,w,h with positive w,h; got {text!r}") from None


# -- resolution: argparse namespace -> flat key=value invocation ---------------

def resolve_invocation(args) -> dict[str, str]:
    cmd = args.command
    if cmd == "run":
        config = resolve_config(args)
        if args.workers is not None:
            config = replace(config, workers=args.workers)
        return {"command": cmd, "input": str(Path(args.sequence).resolve()),
                "init": args.init or "", "dump_response": str(int(args.dump_response)),
                **_config_items(config)}
    if cmd == "eval":
        config = resolve_config(args)
        variants = args.variants or config.variant
        for v in variants.split(","):
            if v not in VARIANTS:
                raise UsageError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
        if args.segments < 1:
            raise UsageError("--segments must be >= 1")
        return {"command": cmd, "input": str(Path(args.dataset).resolve()),
                "protocol": args.protocol, "segments": str(args.segments),
                "variants": variants, "processes": str(args.workers or 1),
                **_config_items(config)}
    if cmd == "synth":
        if (args.spec is None) == (args.suite is None):
            raise UsageError("synth needs exactly one of --spec FILE or --suite jump")
        if args.suite:
            return {"command": cmd, "suite": args.suite, "count": str(args.count),
                    "seed": str(args.seed if args.seed is not None else 0)}
        spec_path = _bundled_spec(args.spec)
        try:
            values = parse_key_values(spec_path.read_text())
        except OSError as exc:
            raise UsageError(f"cannot read spec {args.spec}: {exc.strerror}") from None
        if args.seed is not None:
            values["seed"] = str(args.seed)
        spec = _spec_from_mapping(values)
        return {"command": cmd, "suite": "",
                **{SPEC_PREFIX + k: v for k, v in parse_key_values(spec.to_text()).items()}}
    if cmd == "calibrate-nndr":
        config = resolve_config(args)
        thresholds = _parse_thresholds(args.thresholds)
        return {"command": cmd, "thresholds": ",".join(repr(t) for t in thresholds),
                "count": str(args.count), "seed": str(args.seed if args.seed is not None else 0),
                "processes": str(args.workers or 1), **_config_items(config)}
    if cmd == "plot":
        return {"command": cmd, "input": str(Path(args.curves).resolve())}
    raise UsageError(f"unknown command {cmd!r}")


def _bundled_spec(name: str) -> Path:
    path = Path(name)
    if path.exists() or path.suffix != ".spec" or path.parent != Path("."):
        return path
    bundled = resources.files("ftlr") / "data" / name
    return Path(str(bundled)) if bundled.is_file() else path


def _spec_from_mapping(values) -> SynthSpec:
    try:
        return SynthSpec.from_mapping(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_thresholds(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse thresholds {text!r}") from None
    if not values or any(not v > 1 for v in values):
        raise UsageError("thresholds must be a non-empty list of values > 1")
    return values


# -- execution: flat invocation -> outputs ----------------------------------

def execute(resolved: dict[str, str], out: Path) -> None:
    cmd = resolved.get("command")
    handlers = {"run": _exec_run, "eval": _exec_eval, "synth": _exec_synth,
                "calibrate-nndr": _exec_calibrate, "plot": _exec_plot}
    if cmd not in handlers:
        raise UsageError(f"resolved config names no known command (got {cmd!r})")
    out.mkdir(parents=True, exist_ok=True)
    handlers[cmd](resolved, out)
    _write_resolved(out, resolved)


def _load_run_input(seq_dir: Path, init: str):
    """(frames, b0, gt boxes or None). Ground truth is optional when init is given."""
    gt_path = seq_dir / "groundtruth_rect.txt"
    if gt_path.is_file():
        dataset = load_otb_sequence(seq_dir)
        b0 = _parse_box(init) if init else dataset.gt_boxes[0]
        return list(dataset.frames()), b0, list(dataset.gt_boxes)
    if not init:
        raise SequenceFormatError(f"{seq_dir}: missing groundtruth_rect.txt (or pass --init)")
    img_dir = seq_dir / "img"
    if not img_dir.is_dir():
        raise SequenceFormatError(f"{seq_dir}: missing img/ folder")
    paths = list_frames(img_dir)
    if len(paths) < 2:
        raise SequenceFormatError(f"{seq_dir}: need at least 2 frames, found {len(paths)}")
    frames = [Frame.from_uint8(read_image(p), i) for i, p in enumerate(paths, 1)]
    return frames, _parse_box(init), None


def _exec_run(resolved, out):
    config = _config_from_resolved(resolved)
    frames, b0, gt = _load_run_input(Path(resolved["input"]), resolved.get("init", ""))
    if config.variant == "ftlr_gt" and gt is None:
        raise UsageError("variant ftlr_gt needs ground truth (groundtruth_rect.txt)")
    dump = resolved.get("dump_response", "0") == "1"
    result = run_sequence(frames, b0, config, gt if config.variant == "ftlr_gt" else None,
                          keep_responses=dump)
    (out / "trajectory.csv").write_text("\n".join(trajectory_rows(result)) + "\n")
    (out / "trace.csv").write_text("\n".join(trace_rows(result)) + "\n")
    if dump:
        rdir = out / "responses"
        rdir.mkdir(exist_ok=True)
        for o in result.trace:
            write_response_csv(o.response, rdir / f"response_{o.frame_index:04d}.csv")
    print(f"{len(result.trajectory)} frames, {result.fps:.1f} fps")


def _exec_eval(resolved, out):
    root = Path(resolved["input"])
    if not root.is_dir():
        raise SequenceFormatError(f"{root}: not a directory")
    seq_dirs = sorted(p for p in root.iterdir() if (p / "img").is_dir())
    if not seq_dirs:
        raise SequenceFormatError(f"{root}: no sequences found")
    datasets = [load_otb_sequence(d) for d in seq_dirs]
    base = _config_from_resolved(resolved)
    configs = [replace(base, variant=v) for v in resolved["variants"].split(",")]
    protocol = resolved["protocol"]
    if protocol not in PROTOCOLS:
        raise UsageError(f"unknown protocol {protocol!r}")
    results = evaluate_many(datasets, configs, protocol, int(resolved["segments"]),
                            int(resolved["processes"]))
    (out / "summary.csv").write_text(summary_csv(results))
    (out / "curves.csv").write_text(curves_csv(results))
    print(summary_csv(results), end="")


def _exec_synth(resolved, out):
    if resolved.get("suite"):
        if resolved["suite"] != "jump":
            raise UsageError(f"unknown suite {resolved['suite']!r}")
        specs = jump_suite(int(resolved["count"]), int(resolved["seed"]))
    else:
        values = {k[len(SPEC_PREFIX):]: v for k, v in resolved.items() if k.startswith(SPEC_PREFIX)}
        specs = [_spec_from_mapping(values)]
    for spec in specs:
        try:
            generate_synthetic(spec, out / spec.name)
        except ValueError as exc:
            raise UsageError(f"{spec.name}: {exc}") from None
    print(f"wrote {len(specs)} sequence(s) to {out}")


def _exec_calibrate(resolved, out):
    base = _config_from_resolved(resolved)
    specs = jump_suite(int(resolved["count"]), int(resolved["seed"]))
    datasets = [generate_synthetic(s) for s in specs]
    rows = calibrate_nndr(datasets, _parse_thresholds(resolved["thresholds"]), base,
                          int(resolved["processes"]))
    text = calibration_csv(rows)
    (out / "calibration.csv").write_text(text)
    print(text, end="")


def _exec_plot(resolved, out):
    from .plots import plot_curves

    src = Path(resolved["input"])
    if not src.is_file():
        raise SequenceFormatError(f"{src}: curves file not found")
    for path in plot_curves(src, out):
        print(path)


# -- argparse ---------------------------------------------------------------

def _add_tracker_flags(p: argparse.ArgumentParser, variant: bool = True) -> None:
    p.add_argument("--config", help="key=value tracker config file (overrides $FTLR_CONFIG)")
    if variant:
        p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--nndr", type=float, help="ratio-test threshold (> 1)")
    p.add_argument("--alpha", type=float, help="running-average update factor")
    p.add_argument("--update-rule", choices=("simple", "smooth"))
    p.add_argument("--area-multiplier", type=float, help="search-area factor used after a failure")
    p.add_argument("--extractor", choices=("grayscale", "census"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftlr", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="track one OTB-layout sequence")
    p.add_argument("sequence", help="directory with img/ and groundtruth_rect.txt")
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="initial box x,y,w,h (0-based); defaults to the first gt line")
    p.add_argument("--workers", type=int, help="threads for per-channel correlation")
    p.add_argument("--dump-response", action="store_true",
                   help="write every frame's response map as CSV")
    _add_tracker_flags(p)

    p = sub.add_parser("eval", help="OPE or TRE over every sequence under a root directory")
    p.add_argument("dataset", help="directory whose subdirectories are sequences")
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", choices=PROTOCOLS, default="ope")
    p.add_argument("--segments", type=int, default=20, help="TRE restart points")
    p.add_argument("--variants", help="comma-separated variants (default: the config's variant)")
    p.add_argument("--workers", type=int, help="parallel sequence evaluations")
    _add_tracker_flags(p)

    p = sub.add_parser("synth", help="generate synthetic OTB-layout sequences")
    p.add_argument("--spec", help="key=value spec file, or the name of a bundled one (jump.spec)")
    p.add_argument("--suite", choices=("jump",), help="generate the seeded jump suite")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("calibrate-nndr", help="sweep the ratio-test threshold on the jump suite")
    p.add_argument("--out", required=True)
    p.add_argument("--thresholds", default=DEFAULT_THRESHOLDS)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, help="suite seed (default 0)")
    p.add_argument("--workers", type=int)
    _add_tracker_flags(p)

    p = sub.add_parser("plot", help="SVG success/precision plots from curves.csv")
    p.add_argument("curves")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="repeat an invocation from its resolved_config.txt")
    p.add_argument("resolved")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            resolved = _read_config_file(args.resolved)
        else:
            resolved = resolve_invocation(args)
        execute(resolved, Path(args.out))
    except UsageError as exc:
        print(f"ftlr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SequenceFormatError, OSError) as exc:
        print(f"ftlr: cannot ingest input: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except TrackerError as exc:
        print(f"ftlr: tracker failed: {exc}", file=sys.stderr)
        return EXIT_TRACKER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
