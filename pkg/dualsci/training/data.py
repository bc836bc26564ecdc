from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from ..errors import ValidationError
from ..sci.cube import VideoCube
from ..utils import canonical_json, sha256_text


IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class TrainPair:
    x1: VideoCube
    x2: VideoCube
    source: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.x1.shape != self.x2.shape:
            raise ValidationError(f"Pair views differ in shape: {self.x1.shape} vs {self.x2.shape}")


@dataclass(frozen=True)
class SynthScene:
    frames: np.ndarray
    # one (frames, rows, cols) boolean stack per moving object
    objects: list[np.ndarray]
    velocities: list[tuple[int, int]]


def _background(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    rr, cc = np.mgrid[0:rows, 0:cols].astype(np.float64)
    img = np.full((rows, cols), rng.uniform(0.25, 0.45))
    for _ in range(3):
        fr, fc = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0.0, 2 * np.pi)
        img += 0.06 * np.sin(2 * np.pi * (fr * rr / rows + fc * cc / cols) + phase)
    return img


def _shape_mask(kind: str, size: int) -> np.ndarray:
    if kind == "disk":
        rr, cc = np.mgrid[0:size, 0:size]
        c = (size - 1) / 2.0
        return (rr - c) ** 2 + (cc - c) ** 2 <= (size / 2.0) ** 2
    return np.ones((size, size), dtype=bool)


def synth_scene(
    rows: int,
    cols: int,
    frames: int,
    rng: np.random.Generator,
    *,
    max_velocity: float = 3.0,
    objects: int = 2,
) -> SynthScene:
    """Rectangles and disks translating at integer velocity over a textured background.

    Starting positions keep every object fully inside the frame for all frames.
    """
    vmax = int(np.floor(max_velocity))
    bg = _background(rows, cols, rng)
    video = np.repeat(bg[None], frames, axis=0)
    stacks: list[np.ndarray] = []
    velocities: list[tuple[int, int]] = []
    for _ in range(objects):
        size = int(rng.integers(max(3, min(rows, cols) // 8), max(4, min(rows, cols) // 3) + 1))
        size = min(size, rows, cols)
        vr, vc = (int(v) for v in rng.integers(-vmax, vmax + 1, size=2))
        travel_r, travel_c = abs(vr) * (frames - 1), abs(vc) * (frames - 1)
        if size + travel_r > rows or size + travel_c > cols:
            vr, vc = 0, 0
        r_lo = max(0, -vr * (frames - 1))
        c_lo = max(0, -vc * (frames - 1))
        r0 = int(rng.integers(r_lo, rows - size - max(0, vr * (frames - 1)) + 1))
        c0 = int(rng.integers(c_lo, cols - size - max(0, vc * (frames - 1)) + 1))
        shape = _shape_mask(str(rng.choice(["rect", "disk"])), size)
        level = rng.uniform(0.55, 0.95)
        stripes = 0.05 * np.sin(np.arange(size) * rng.uniform(0.5, 1.5))[None, :]
        patch = np.clip(level + stripes, 0.0, 1.0)

        occupancy = np.zeros((frames, rows, cols), dtype=bool)
        for t in range(frames):
            r, c = r0 + vr * t, c0 + vc * t
            window = video[t, r : r + size, c : c + size]
            window[shape] = np.broadcast_to(patch, (size, size))[shape]
            occupancy[t, r : r + size, c : c + size] = shape
        stacks.append(occupancy)
        velocities.append((vr, vc))
    return SynthScene(frames=np.clip(video, 0.0, 1.0), objects=stacks, velocities=velocities)


def synth_corpus(
    rows: int,
    cols: int,
    frames: int,
    count: int,
    seed: int = 0,
    *,
    max_velocity: float = 3.0,
) -> list[TrainPair]:
    if count < 0:
        raise ValidationError(f"Pair count must be >= 0, got {count}")
    children = np.random.SeedSequence(seed).spawn(2 * count)
    pairs: list[TrainPair] = []
    for i in range(count):
        s1 = synth_scene(rows, cols, frames, np.random.default_rng(children[2 * i]), max_velocity=max_velocity)
        s2 = synth_scene(rows, cols, frames, np.random.default_rng(children[2 * i + 1]), max_velocity=max_velocity)
        pairs.append(
            TrainPair(
                VideoCube(s1.frames, 1),
                VideoCube(s2.frames, 2),
                {"kind": "synthetic", "index": i, "velocities": [s1.velocities, s2.velocities]},
            )
        )
    return pairs


def _sequences(root: Path) -> list[tuple[str, list[Path]]]:
    if not root.exists() or not root.is_dir():
        raise ValidationError(f"Corpus root does not exist: {root}")
    out = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if files:
            out.append((d.name, files))
    return out


def load_luma(path: Path) -> np.ndarray:
    """8-bit grayscale via Pillow's ITU-R 601 luma transform, scaled to [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def _crop_shape(crop: int | tuple[int, int]) -> tuple[int, int]:
    return (crop, crop) if isinstance(crop, int) else (int(crop[0]), int(crop[1]))


def build_corpus(
    root: Path,
    crop: int | tuple[int, int],
    frames: int,
    count: int,
    seed: int = 0,
    *,
    workers: int = 1,
) -> list[TrainPair]:
    """Random pairs of distinct sequences, random B-frame windows, random aligned crops."""
    if count < 0:
        raise ValidationError(f"Pair count must be >= 0, got {count}")
    if count == 0:
        return []
    crop_r, crop_c = _crop_shape(crop)
    seqs = [s for s in _sequences(Path(root)) if len(s[1]) >= frames]
    if len(seqs) < 2:
        raise ValidationError(f"Corpus {root} needs at least 2 sequences of >= {frames} frames, found {len(seqs)}")
    sizes = {}
    for name, files in seqs:
        with Image.open(files[0]) as im:
            w, h = im.size
        if h < crop_r or w < crop_c:
            raise ValidationError(f"Sequence {name} frames are {h}x{w}, smaller than the {crop_r}x{crop_c} crop")
        sizes[name] = (h, w)

    children = np.random.SeedSequence(seed).spawn(count)

    def one(i: int) -> TrainPair:
        rng = np.random.default_rng(children[i])
        picks = rng.choice(len(seqs), size=2, replace=False)
        views: list[VideoCube] = []
        source: dict[str, Any] = {"kind": "corpus", "index": i, "views": []}
        for k, j in enumerate(picks):
            name, files = seqs[int(j)]
            h, w = sizes[name]
            start = int(rng.integers(0, len(files) - frames + 1))
            top = int(rng.integers(0, h - crop_r + 1))
            left = int(rng.integers(0, w - crop_c + 1))
            cube = np.stack([load_luma(f)[top : top + crop_r, left : left + crop_c] for f in files[start : start + frames]])
            views.append(VideoCube(cube, k + 1))  # type: ignore[arg-type]
            source["views"].append({"sequence": name, "start": start, "top": top, "left": left})
        return TrainPair(views[0], views[1], source)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(count)))
    return [one(i) for i in range(count)]


def corpus_manifest(pairs: list[TrainPair]) -> dict[str, Any]:
    rows = [p.source for p in pairs]
    return {"count": len(pairs), "pairs": rows, "sha256": sha256_text(canonical_json(rows))}
