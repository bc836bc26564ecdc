from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..errors import ValidationError


ViewId = Literal[1, 2, "single"]


@dataclass(frozen=True)
class VideoCube:
    """One view's frame stack, stored frame-first as (frames, rows, cols)."""

    data: np.ndarray
    view_id: ViewId = 1

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValidationError(f"VideoCube needs a (frames, rows, cols) array, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("VideoCube holds non-finite values")

    @property
    def frames(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(s) for s in self.data.shape)  # type: ignore[return-value]

    def check_range(self) -> None:
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"VideoCube values must lie in [0, 1], got [{lo:.4g}, {hi:.4g}]")

    def clipped(self) -> "VideoCube":
        return VideoCube(np.clip(self.data, 0.0, 1.0), self.view_id)


@dataclass(frozen=True)
class MeasurementMeta:
    frames: int
    views: int
    mask_id: str
    noise_sigma: float = 0.0
    normalized: bool = False
    scale: float = 1.0
    seed: int | None = None


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    meta: MeasurementMeta = field(compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(int(s) for s in self.y.shape)  # type: ignore[return-value]

    def denormalized(self) -> "Measurement":
        """Undo the max scaling of a normalized measurement (noise stays in)."""
        if not self.meta.normalized:
            return self
        y = (self.y.astype(np.float64) * self.meta.scale).astype(np.float32)
        meta = MeasurementMeta(
            frames=self.meta.frames,
            views=self.meta.views,
            mask_id=self.meta.mask_id,
            noise_sigma=self.meta.noise_sigma,
            normalized=False,
            scale=1.0,
            seed=self.meta.seed,
        )
        return Measurement(y, meta)
