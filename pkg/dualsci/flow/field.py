from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..errors import ValidationError


Direction = Literal["forward", "backward"]


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement in pixels per inter-frame interval.

    `u` is horizontal (along columns), `v` vertical (along rows). A forward field
    with `pair_index=t` maps frame t to t+1; a backward one maps t+1 to t.
    """

    u: np.ndarray
    v: np.ndarray
    direction: Direction = "forward"
    pair_index: int = 0

    def __post_init__(self) -> None:
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValidationError(f"Flow components must be matching 2-D arrays, got {self.u.shape} and {self.v.shape}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValidationError("Flow field holds non-finite values")

    @classmethod
    def zeros(cls, shape: tuple[int, int], direction: Direction = "forward", pair_index: int = 0) -> "FlowField":
        z = np.zeros(shape, dtype=np.float32)
        return cls(z, z.copy(), direction, pair_index)

    @classmethod
    def from_array(cls, uv: np.ndarray, direction: Direction = "forward", pair_index: int = 0) -> "FlowField":
        return cls(uv[0].astype(np.float32), uv[1].astype(np.float32), direction, pair_index)

    def as_array(self) -> np.ndarray:
        return np.stack([self.u, self.v], axis=0)

    def max_magnitude(self) -> float:
        return float(max(np.abs(self.u).max(initial=0.0), np.abs(self.v).max(initial=0.0)))
