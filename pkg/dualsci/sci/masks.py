from __future__ import annotations

from dataclasses import dataclass
import hashlib

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class MaskSet:
    """Paired binary coding patterns, frame-first (frames, rows, cols).

    C2 is normally C1 circularly shifted by `shift`; hand-built sets (disjoint
    or identical masks in tests and baselines) carry `shift=None`.
    """

    c1: np.ndarray
    c2: np.ndarray
    shift: tuple[int, int] | None = None
    density: float | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.c1.ndim != 3:
            raise ValidationError(f"Mask stacks must be (frames, rows, cols), got {self.c1.shape}")
        if self.c1.shape != self.c2.shape:
            raise ValidationError(f"C1 {self.c1.shape} and C2 {self.c2.shape} differ in shape")
        for name, arr in (("C1", self.c1), ("C2", self.c2)):
            if arr.dtype != np.uint8:
                raise ValidationError(f"{name} must be uint8, got {arr.dtype}")
            if arr.size and int(arr.max()) > 1:
                raise ValidationError(f"{name} entries must be 0 or 1")

    @classmethod
    def from_arrays(cls, c1: np.ndarray, c2: np.ndarray) -> "MaskSet":
        return cls(np.asarray(c1).astype(np.uint8), np.asarray(c2).astype(np.uint8))

    @property
    def frames(self) -> int:
        return int(self.c1.shape[0])

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return int(self.c1.shape[1]), int(self.c1.shape[2])

    def stacked(self, views: int = 2) -> np.ndarray:
        """Mask cube C as float64: [C1; C2] for two views, C1 alone for one."""
        if views == 1:
            return self.c1.astype(np.float64)
        return np.concatenate([self.c1, self.c2], axis=0).astype(np.float64)

    def swapped(self) -> "MaskSet":
        return MaskSet(self.c2, self.c1, None, self.density, self.seed)

    def mask_id(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.c1).tobytes())
        h.update(np.ascontiguousarray(self.c2).tobytes())
        h.update(repr(self.c1.shape).encode("utf-8"))
        return h.hexdigest()[:16]

    def shift_relation_holds(self) -> bool:
        if self.shift is None:
            return False
        return bool(np.array_equal(np.roll(self.c1, self.shift, axis=(1, 2)), self.c2))


def check_shift(shift: tuple[int, int]) -> tuple[int, int]:
    dr, dc = int(shift[0]), int(shift[1])
    if max(abs(dr), abs(dc)) < 2:
        raise ValidationError(
            f"Mask shift {shift} must exceed the 1-pixel feature size (max |component| >= 2); "
            "smaller shifts leave the two views correlated"
        )
    return dr, dc


def generate_masks(
    rows: int,
    cols: int,
    frames: int,
    density: float = 0.5,
    shift: tuple[int, int] = (0, 10),
    seed: int = 0,
) -> MaskSet:
    """Draw C1 as i.i.d. Bernoulli(density) and derive C2 by a circular shift."""
    if rows < 1 or cols < 1 or frames < 1:
        raise ValidationError(f"Mask geometry must be positive, got {(rows, cols, frames)}")
    if not 0.0 < density <= 1.0:
        raise ValidationError(f"Mask density must lie in (0, 1], got {density}")
    dr, dc = check_shift(shift)

    rng = np.random.default_rng(seed)
    c1 = (rng.random((frames, rows, cols)) < density).astype(np.uint8)
    c2 = np.roll(c1, (dr, dc), axis=(1, 2))
    return MaskSet(c1=c1, c2=c2, shift=(dr, dc), density=float(density), seed=int(seed))
