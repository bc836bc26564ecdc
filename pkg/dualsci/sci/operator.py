from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .masks import MaskSet


@dataclass(frozen=True)
class SensingOperator:
    """Matrix-free Φ for the (dual-view) SCI model.

    Φ maps a cube of `views * B` frames to one snapshot; Φ Φᵀ is diagonal, so only
    the mask cube is ever stored.
    """

    masks: MaskSet
    views: int = 2

    def __post_init__(self) -> None:
        if self.views not in (1, 2):
            raise ValidationError(f"Only one or two views are supported, got {self.views}")

    @property
    def mask_cube(self) -> np.ndarray:
        return self.masks.stacked(self.views)

    @property
    def frames(self) -> int:
        return self.views * self.masks.frames

    @property
    def sampling_ratio(self) -> float:
        return 1.0 / self.frames

    @property
    def cube_shape(self) -> tuple[int, int, int]:
        rows, cols = self.masks.spatial_shape
        return self.frames, rows, cols


def _check_cube(op: SensingOperator, x: np.ndarray) -> None:
    if tuple(x.shape) != op.cube_shape:
        raise ValidationError(f"Cube shape {tuple(x.shape)} does not match operator shape {op.cube_shape}")


def forward_apply(op: SensingOperator, x: np.ndarray) -> np.ndarray:
    """Φx: sum over frames of the masked frames (ascending frame order)."""
    _check_cube(op, x)
    return np.sum(np.asarray(x, dtype=np.float64) * op.mask_cube, axis=0)


def adjoint_apply(op: SensingOperator, r: np.ndarray) -> np.ndarray:
    """Φᵀr: the residual image modulated by every frame's mask."""
    if tuple(r.shape) != op.masks.spatial_shape:
        raise ValidationError(f"Image shape {tuple(r.shape)} does not match mask shape {op.masks.spatial_shape}")
    return np.asarray(r, dtype=np.float64)[None, :, :] * op.mask_cube


def phi_phit_diagonal(op: SensingOperator) -> np.ndarray:
    cube = op.mask_cube
    return np.sum(cube * cube, axis=0)
