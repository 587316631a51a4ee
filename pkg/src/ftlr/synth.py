"""Seeded synthetic sequences and OTB-layout reading/writing.

A textured square target moves over a textured background. Scripted events
add abrupt jumps, partial occlusions and global gamma changes. Sequences
are written in the OTB layout (``img/0001.png`` ... plus
``groundtruth_rect.txt`` with 1-based ``x,y,w,h`` lines) so the same loader
serves real benchmark data and generated data.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .core import BoundingBox, Frame

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".pgm", ".tif", ".tiff")


class SequenceFormatError(ValueError):
    """A sequence directory or ground-truth file could not be ingested."""


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    name: str
    frame_paths: tuple
    gt_boxes: tuple
    attributes: dict = field(default_factory=dict)
    images: tuple | None = None  # in-memory uint8 frames, when not on disk

    def __post_init__(self):
        n = len(self.images) if self.images is not None else len(self.frame_paths)
        if n != len(self.gt_boxes):
            raise SequenceFormatError(
                f"{self.name}: {n} frames but {len(self.gt_boxes)} ground-truth boxes")
        if n < 2:
            raise SequenceFormatError(f"{self.name}: need at least 2 frames, found {n}")

    def __len__(self) -> int:
        return len(self.gt_boxes)

    def frames(self, start: int = 0) -> Iterator[Frame]:
        """Frames from 0-based position ``start`` on, decoded lazily."""
        for i in range(start, len(self)):
            if self.images is not None:
                yield Frame.from_uint8(self.images[i], i + 1)
            else:
                yield Frame.from_uint8(read_image(self.frame_paths[i]), i + 1)


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"))


def _numeric_key(path: Path):
    digits = re.findall(r"\d+", path.stem)
    return (int(digits[-1]) if digits else math.inf, path.name)


def parse_groundtruth(text: str, source: str = "groundtruth_rect.txt") -> list[BoundingBox]:
    """``x,y,w,h`` per line (comma, tab or whitespace separated), 1-based."""
    boxes = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = [p for p in re.split(r"[,\s]+", line) if p]
        try:
            if len(parts) != 4:
                raise ValueError
            x, y, w, h = (float(p) for p in parts)
            boxes.append(BoundingBox(x - 1, y - 1, w, h))
        except ValueError:
            raise SequenceFormatError(f"{source}:{lineno}: cannot parse box from {line!r}") from None
    return boxes


def list_frames(img_dir) -> list[Path]:
    """Image files in ``img_dir`` ordered by their last run of digits."""
    return sorted((p for p in Path(img_dir).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
                  key=_numeric_key)


def load_otb_sequence(directory) -> SequenceDataset:
    directory = Path(directory)
    img_dir = directory / "img"
    gt_path = directory / "groundtruth_rect.txt"
    if not img_dir.is_dir():
        raise SequenceFormatError(f"{directory}: missing img/ folder")
    if not gt_path.is_file():
        raise SequenceFormatError(f"{directory}: missing groundtruth_rect.txt")
    frames = list_frames(img_dir)
    boxes = parse_groundtruth(gt_path.read_text(), str(gt_path))
    if len(frames) != len(boxes):
        raise SequenceFormatError(
            f"{directory.name}: {len(frames)} frames in img/ but {len(boxes)} ground-truth lines")
    return SequenceDataset(directory.name, tuple(frames), tuple(boxes))


def _fmt_coord(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_otb_sequence(dataset: SequenceDataset, directory) -> SequenceDataset:
    """Write an in-memory sequence in OTB layout; returns the on-disk view."""
    directory = Path(directory)
    img_dir = directory / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(dataset.frames(), 1):
        path = img_dir / f"{i:04d}.png"
        data = np.rint(frame.pixels * 255.0).astype(np.uint8)
        Image.fromarray(data, mode="L").save(path, optimize=False)
        paths.append(path)
    lines = [",".join(_fmt_coord(v) for v in (b.x + 1, b.y + 1, b.w, b.h)) for b in dataset.gt_boxes]
    (directory / "groundtruth_rect.txt").write_text("\n".join(lines) + "\n")
    return SequenceDataset(dataset.name, tuple(paths), dataset.gt_boxes, dict(dataset.attributes))


@dataclass(frozen=True)
class SynthSpec:
    name: str = "synthetic"
    frame_count: int = 60
    frame_width: int = 320
    frame_height: int = 240
    target_width: int = 32
    target_height: int = 32
    target_seed: int = 1
    background_seed: int = 2
    # top-left of the target in frame 1; negative means centred
    start_x: float = -1.0
    start_y: float = -1.0
    velocity: tuple = (0.0, 0.0)
    jump_events: tuple = ()  # ((frame_index, (dx, dy)), ...): visible from frame_index + 1
    occlusion_events: tuple = ()  # ((start, duration, coverage), ...)
    gamma_events: tuple = ()  # ((frame_index, gamma), ...): in force from frame_index on
    noise_sigma: float = 0.01
    seed: int = 0
    texture_block: int = 4  # side of the target's random blocks, pixels
    background_blur: float = 8.0  # gaussian sigma of the coarse background layer
    background_detail: float = 0.6  # weight of the fine background layer

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("frame_count must be >= 2")
        if not (0 < self.target_width < self.frame_width and 0 < self.target_height < self.frame_height):
            raise ValueError("target must fit inside the frame")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.texture_block < 1 or self.background_blur <= 0 or self.background_detail < 0:
            raise ValueError("texture parameters out of range")
        for k, _ in self.jump_events:
            if not 1 <= k < self.frame_count:
                raise ValueError(f"jump at frame {k} is outside 1..{self.frame_count - 1}")
        for start, duration, coverage in self.occlusion_events:
            if not (1 <= start <= self.frame_count and duration >= 1 and 0 <= coverage <= 1):
                raise ValueError(f"invalid occlusion event ({start}, {duration}, {coverage})")
        for k, g in self.gamma_events:
            if not (1 <= k <= self.frame_count and g > 0):
                raise ValueError(f"invalid gamma event ({k}, {g})")

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "velocity":
                v = f"{v[0]!r},{v[1]!r}"
            elif f.name == "jump_events":
                v = ";".join(f"{k}:{d[0]!r},{d[1]!r}" for k, d in v)
            elif f.name == "occlusion_events":
                v = ";".join(f"{s}:{d}:{c!r}" for s, d, c in v)
            elif f.name == "gamma_events":
                v = ";".join(f"{k}:{g!r}" for k, g in v)
            out.append(f"{f.name}={v}\n")
        return "".join(out)

    @classmethod
    def from_mapping(cls, values: dict) -> SynthSpec:
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        errors = []
        for key, raw in values.items():
            if key not in known:
                errors.append(f"{key}: unknown field")
                continue
            try:
                kwargs[key] = _parse_spec_field(key, str(raw), getattr(cls(), key))
            except (ValueError, IndexError):
                errors.append(f"{key}: cannot parse {raw!r}")
        if errors:
            raise ValueError("invalid synth spec: " + "; ".join(errors))
        return cls(**kwargs)


def _parse_spec_field(key, raw, default):
    raw = raw.strip()
    if key == "velocity":
        a, b = raw.split(",")
        return (float(a), float(b))
    if key == "jump_events":
        out = []
        for item in filter(None, raw.split(";")):
            k, d = item.split(":")
            dx, dy = d.split(",")
            out.append((int(k), (float(dx), float(dy))))
        return tuple(out)
    if key == "occlusion_events":
        out = []
        for item in filter(None, raw.split(";")):
            s, d, c = item.split(":")
            out.append((int(s), int(d), float(c)))
        return tuple(out)
    if key == "gamma_events":
        out = []
        for item in filter(None, raw.split(";")):
            k, g = item.split(":")
            out.append((int(k), float(g)))
        return tuple(out)
    return type(default)(raw)


def target_positions(spec: SynthSpec) -> list[tuple[float, float]]:
    """Top-left target positions per frame.

    Velocity reflects off the frame edges; a jump that would leave the
    frame is an error.
    """
    max_x = spec.frame_width - spec.target_width
    max_y = spec.frame_height - spec.target_height
    x = spec.start_x if spec.start_x >= 0 else max_x / 2.0
    y = spec.start_y if spec.start_y >= 0 else max_y / 2.0
    if not (0 <= x <= max_x and 0 <= y <= max_y):
        raise ValueError("start position puts the target outside the frame")
    vx, vy = spec.velocity
    jumps = {}
    for k, d in spec.jump_events:
        jx, jy = jumps.get(k, (0.0, 0.0))
        jumps[k] = (jx + d[0], jy + d[1])
    out = [(x, y)]
    for k in range(1, spec.frame_count):
        x, vx = _reflect(x + vx, vx, max_x)
        y, vy = _reflect(y + vy, vy, max_y)
        if k in jumps:
            x += jumps[k][0]
            y += jumps[k][1]
            if not (0 <= x <= max_x and 0 <= y <= max_y):
                raise ValueError(f"jump at frame {k} moves the target outside the frame")
        out.append((x, y))
    return out


def _reflect(pos, vel, hi):
    if pos < 0:
        return -pos, -vel
    if pos > hi:
        return 2 * hi - pos, -vel
    return pos, vel


def _background(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.background_seed)
    shape = (spec.frame_height, spec.frame_width)
    coarse = gaussian_filter(rng.standard_normal(shape), spec.background_blur, mode="wrap")
    fine = gaussian_filter(rng.standard_normal(shape), 1.5, mode="wrap")
    tex = coarse / coarse.std() + spec.background_detail * fine / fine.std()
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return 0.2 + 0.6 * tex


def _target_texture(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.target_seed)
    block = spec.texture_block
    h, w = spec.target_height, spec.target_width
    cells = rng.uniform(0.0, 1.0, size=(-(-h // block), -(-w // block)))
    return np.kron(cells, np.ones((block, block)))[:h, :w]


def generate_synthetic(spec: SynthSpec, directory=None) -> SequenceDataset:
    """Render ``spec``; written in OTB layout when ``directory`` is given."""
    positions = target_positions(spec)
    background = _background(spec)
    target = _target_texture(spec)
    noise_rng = np.random.default_rng(spec.seed)
    th, tw = target.shape
    gammas = sorted(spec.gamma_events)
    images, boxes = [], []
    for k, (x, y) in enumerate(positions, 1):
        xi, yi = int(round(x)), int(round(y))
        img = background.copy()
        img[yi:yi + th, xi:xi + tw] = target
        for start, duration, coverage in spec.occlusion_events:
            if start <= k < start + duration:
                cw = int(round(coverage * tw))
                img[yi:yi + th, xi:xi + cw] = 0.5
        gamma = 1.0
        for gk, g in gammas:
            if gk <= k:
                gamma = g
        if gamma != 1.0:
            img = img ** gamma
        if spec.noise_sigma > 0:
            img = img + noise_rng.normal(0.0, spec.noise_sigma, img.shape)
        images.append(np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8))
        boxes.append(BoundingBox(float(xi), float(yi), float(tw), float(th)))
    attributes = {"jumps": [k for k, _ in spec.jump_events]}
    dataset = SequenceDataset(spec.name, (), tuple(boxes), attributes, tuple(images))
    if directory is not None:
        return write_otb_sequence(dataset, directory)
    return dataset


def default_search_radius(box: BoundingBox, area_factor: float = 1.0,
                          context_scale: float = 2.0, template_context: float = 1.0) -> float:
    """Largest per-axis displacement (frame pixels) a valid-mode search can report."""
    return (context_scale * math.sqrt(area_factor) - template_context) * math.sqrt(box.w * box.h) / 2.0


def jump_suite(count: int = 50, seed: int = 0, frame_count: int = 50, jump_frame: int = 15,
               radius_multiple: float = 1.5, speed: float = 3.0, frame_height: int = 320,
               **overrides) -> list[SynthSpec]:
    """Sequences with one abrupt jump each.

    The jump's larger component is ``radius_multiple`` default search radii
    (the search window is square, so per-axis reach is what matters). The
    target drifts at ``speed`` px/frame along that same axis and direction,
    and starts far enough back that it never reaches a frame edge.
    """
    rng = np.random.default_rng(seed)
    base = SynthSpec(frame_count=frame_count, frame_height=frame_height, **overrides)
    box = BoundingBox(0, 0, base.target_width, base.target_height)
    magnitude = radius_multiple * default_search_radius(box)
    extents = (base.frame_width - base.target_width, base.frame_height - base.target_height)
    travel = speed * (frame_count - 1) + magnitude
    specs = []
    for i in range(count):
        axis = int(rng.integers(2))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        minor = float(rng.uniform(-1.0, 1.0)) * magnitude
        ext, ext_minor = extents[axis], extents[1 - axis]
        if travel > ext or abs(minor) > ext_minor:
            raise ValueError("frame too small for the requested jump and drift")
        major_start = rng.uniform(0.0, ext - travel) if sign > 0 else rng.uniform(travel, ext)
        minor_start = rng.uniform(max(0.0, -minor), ext_minor - max(0.0, minor))
        start = [0.0, 0.0]
        start[axis], start[1 - axis] = major_start, minor_start
        jump = [0.0, 0.0]
        jump[axis], jump[1 - axis] = sign * magnitude, minor
        velocity = [0.0, 0.0]
        velocity[axis] = sign * speed
        spec = replace(
            base,
            name=f"jump_{i:03d}",
            target_seed=int(rng.integers(1 << 30)),
            background_seed=int(rng.integers(1 << 30)),
            seed=int(rng.integers(1 << 30)),
            start_x=round(float(start[0]), 3),
            start_y=round(float(start[1]), 3),
            velocity=(velocity[0], velocity[1]),
            jump_events=((jump_frame, (round(jump[0], 6), round(jump[1], 6))),),
        )
        target_positions(spec)
        specs.append(spec)
    return specs
