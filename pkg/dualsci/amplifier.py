"""Diversity amplification of a dual-view snapshot.

The normalized measurement Ȳ divides Y by the mean mask over all 2B frames; D1 and
D2 divide by each view's own mean mask, which leaves the *other* view's energy
un-normalized, and D3/D4 isolate that residue by subtracting a Gaussian blur.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .container import load_container, save_container
from .errors import ValidationError
from .sci.cube import Measurement
from .sci.masks import MaskSet
from .specs import SmoothingConfig


@dataclass(frozen=True)
class DiversityBundle:
    ybar: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray
    smoothing: SmoothingConfig
    degenerate_pixels: int = 0

    def diversity_stack(self) -> np.ndarray:
        """D1:4 as a (4, rows, cols) stack."""
        return np.stack([self.d1, self.d2, self.d3, self.d4], axis=0)

    def as_tensors(self) -> dict[str, np.ndarray]:
        return {"Ybar": self.ybar, "D1": self.d1, "D2": self.d2, "D3": self.d3, "D4": self.d4}


def _as_image(y: Measurement | np.ndarray) -> np.ndarray:
    if isinstance(y, Measurement):
        return y.y.astype(np.float64)
    return np.asarray(y, dtype=np.float64)


def _divide(y: np.ndarray, denom: np.ndarray, eps: float) -> tuple[np.ndarray, int]:
    if y.shape != denom.shape:
        raise ValidationError(f"Measurement shape {y.shape} does not match mask shape {denom.shape}")
    dead = denom < eps
    out = y / np.maximum(denom, eps)
    out[dead] = 0.0
    return out, int(dead.sum())


def normalize_measurement(
    y: Measurement | np.ndarray,
    masks: MaskSet,
    cfg: SmoothingConfig | None = None,
    views: int = 2,
) -> np.ndarray:
    """Ȳ = Y ⊘ max(ΣC/(views·B), ε); pixels with no mask coverage are zeroed."""
    cfg = cfg or SmoothingConfig()
    cube = masks.stacked(views)
    denom = cube.sum(axis=0)
    if not cfg.normalize_by_sum:
        denom = denom / cube.shape[0]
    out, _ = _divide(_as_image(y), denom, cfg.eps)
    return out


def compute_view_normalizations(
    y: Measurement | np.ndarray,
    masks: MaskSet,
    cfg: SmoothingConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    cfg = cfg or SmoothingConfig()
    img = _as_image(y)
    b = masks.frames
    d1, _ = _divide(img, masks.c1.sum(axis=0, dtype=np.float64) / b, cfg.eps)
    d2, _ = _divide(img, masks.c2.sum(axis=0, dtype=np.float64) / b, cfg.eps)
    return d1, d2


def gaussian_kernel(cfg: SmoothingConfig) -> np.ndarray:
    """The separable 2-D kernel used by `gaussian_smooth`, normalized to sum 1."""
    x = np.arange(-cfg.radius, cfg.radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (x / cfg.sigma_g) ** 2)
    k1 /= k1.sum()
    return np.outer(k1, k1)


def gaussian_smooth(img: np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    return ndimage.gaussian_filter(
        np.asarray(img, dtype=np.float64),
        sigma=cfg.sigma_g,
        mode=cfg.boundary,
        truncate=cfg.radius / cfg.sigma_g,
    )


def compute_contrast_images(
    d1: np.ndarray,
    d2: np.ndarray,
    cfg: SmoothingConfig,
) -> tuple[np.ndarray, np.ndarray]:
    if d1.shape != d2.shape:
        raise ValidationError(f"D1 {d1.shape} and D2 {d2.shape} differ in shape")
    return d1 - gaussian_smooth(d1, cfg), d2 - gaussian_smooth(d2, cfg)


def build_bundle(
    y: Measurement | np.ndarray,
    masks: MaskSet,
    cfg: SmoothingConfig | None = None,
    views: int = 2,
) -> DiversityBundle:
    """Ȳ and D1–D4 for one measurement.

    With `views=1` only Ȳ is meaningful; D1–D4 are returned as zeros so the
    downstream tensors keep their shapes.
    """
    cfg = cfg or SmoothingConfig()
    img = _as_image(y)
    ybar = normalize_measurement(img, masks, cfg, views=views)
    dead = int((masks.stacked(views).sum(axis=0) == 0).sum())
    if views == 1:
        zeros = np.zeros_like(ybar)
        return DiversityBundle(ybar, zeros, zeros, zeros, zeros, cfg, dead)
    d1, d2 = compute_view_normalizations(img, masks, cfg)
    d3, d4 = compute_contrast_images(d1, d2, cfg)
    return DiversityBundle(ybar, d1, d2, d3, d4, cfg, dead)


def save_bundle(out_dir: Path, bundle: DiversityBundle, *, config_hash: str = "") -> Path:
    meta = {
        "smoothing": bundle.smoothing.model_dump(),
        "degenerate_pixels": bundle.degenerate_pixels,
    }
    tensors = {k: v.astype(np.float32) for k, v in bundle.as_tensors().items()}
    return save_container(out_dir, tensors, kind="bundle", meta=meta, config_hash=config_hash)


def load_bundle(src: Path) -> DiversityBundle:
    box = load_container(src, kind="bundle")
    t = {k: v.astype(np.float64) for k, v in box.tensors.items()}
    return DiversityBundle(
        ybar=t["Ybar"],
        d1=t["D1"],
        d2=t["D2"],
        d3=t["D3"],
        d4=t["D4"],
        smoothing=SmoothingConfig(**box.meta.get("smoothing", {})),
        degenerate_pixels=int(box.meta.get("degenerate_pixels", 0)),
    )
