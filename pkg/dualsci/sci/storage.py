from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..container import load_container, save_container
from ..errors import ValidationError
from .cube import Measurement, MeasurementMeta, VideoCube
from .masks import MaskSet


def save_masks(out_dir: Path, masks: MaskSet, *, config_hash: str = "") -> Path:
    meta = {
        "shift": list(masks.shift) if masks.shift is not None else None,
        "density": masks.density,
        "mask_id": masks.mask_id(),
    }
    return save_container(
        out_dir,
        {"C1": masks.c1, "C2": masks.c2},
        kind="masks",
        meta=meta,
        config_hash=config_hash,
        seed=masks.seed,
    )


def load_masks(src: Path) -> MaskSet:
    box = load_container(src, kind="masks")
    shift = box.meta.get("shift")
    return MaskSet(
        c1=box.tensors["C1"],
        c2=box.tensors["C2"],
        shift=(int(shift[0]), int(shift[1])) if shift else None,
        density=box.meta.get("density"),
        seed=box.seed,
    )


def save_scene(out_dir: Path, views: list[VideoCube], *, config_hash: str = "", seed: int | None = None) -> Path:
    tensors = {f"X{i + 1}": v.data.astype(np.float32) for i, v in enumerate(views)}
    return save_container(out_dir, tensors, kind="scene", meta={"views": len(views)}, config_hash=config_hash, seed=seed)


def load_scene(src: Path) -> list[VideoCube]:
    box = load_container(src, kind="scene")
    names = sorted(k for k in box.tensors if k.startswith("X"))
    if not names:
        raise ValidationError(f"No X1/X2 tensors in {src}")
    if len(names) == 1:
        return [VideoCube(box.tensors[names[0]], "single")]
    return [VideoCube(box.tensors[n], i + 1) for i, n in enumerate(names)]  # type: ignore[arg-type]


def save_measurement(
    out_dir: Path,
    meas: Measurement,
    *,
    config_hash: str = "",
    extra_meta: dict | None = None,
) -> Path:
    meta = asdict(meas.meta)
    meta.update(extra_meta or {})
    return save_container(out_dir, {"Y": meas.y}, kind="measurement", meta=meta, config_hash=config_hash, seed=meas.meta.seed)


def load_measurement(src: Path) -> tuple[Measurement, dict]:
    box = load_container(src, kind="measurement")
    m = box.meta
    meta = MeasurementMeta(
        frames=int(m["frames"]),
        views=int(m["views"]),
        mask_id=str(m["mask_id"]),
        noise_sigma=float(m.get("noise_sigma", 0.0)),
        normalized=bool(m.get("normalized", False)),
        scale=float(m.get("scale", 1.0)),
        seed=m.get("seed"),
    )
    return Measurement(box.tensors["Y"], meta), m
