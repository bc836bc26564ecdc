from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .cube import Measurement, MeasurementMeta, VideoCube
from .masks import MaskSet


def _masked_sum(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # frames are accumulated in ascending order in float64, stored as float32
    acc = np.zeros(x.shape[1:], dtype=np.float64)
    for b in range(x.shape[0]):
        acc += x[b].astype(np.float64) * c[b]
    return acc


def _add_noise(y: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    if sigma < 0:
        raise ValidationError(f"Noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return y
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, sigma, size=y.shape)


def encode(
    x1: VideoCube,
    x2: VideoCube | None,
    masks: MaskSet,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Measurement:
    """Y = Σ_b (X1^b ⊙ C1^b + X2^b ⊙ C2^b) + G. Pass `x2=None` for single-view capture."""
    if noise_sigma < 0:
        raise ValidationError(f"Noise sigma must be >= 0, got {noise_sigma}")
    cube_shape = (masks.frames, *masks.spatial_shape)
    for cube in (x1, x2):
        if cube is None:
            continue
        if cube.shape != cube_shape:
            raise ValidationError(f"Scene shape {cube.shape} does not match mask shape {cube_shape}")
        cube.check_range()

    if x2 is None:
        y = _masked_sum(x1.data, masks.c1)
        views = 1
    else:
        y = np.zeros(masks.spatial_shape, dtype=np.float64)
        for b in range(masks.frames):
            y += x1.data[b].astype(np.float64) * masks.c1[b] + x2.data[b].astype(np.float64) * masks.c2[b]
        views = 2

    y = _add_noise(y, noise_sigma, seed)
    meta = MeasurementMeta(
        frames=masks.frames,
        views=views,
        mask_id=masks.mask_id(),
        noise_sigma=float(noise_sigma),
        seed=int(seed),
    )
    return Measurement(y.astype(np.float32), meta)


def encode_stacked(x: np.ndarray, c: np.ndarray, mask_id: str = "") -> Measurement:
    """Encode a concatenated 2B-frame cube with a concatenated 2B-mask cube."""
    if x.ndim != 3 or x.shape != c.shape:
        raise ValidationError(f"Stacked cube {x.shape} and mask cube {c.shape} must agree")
    if x.shape[0] % 2:
        raise ValidationError(f"Stacked cubes need an even number of frames, got {x.shape[0]}")
    frames = x.shape[0] // 2
    # same per-b pairing and order as `encode`
    y = np.zeros(x.shape[1:], dtype=np.float64)
    for b in range(frames):
        y += x[b].astype(np.float64) * c[b] + x[frames + b].astype(np.float64) * c[frames + b]
    meta = MeasurementMeta(frames=frames, views=2, mask_id=mask_id)
    return Measurement(y.astype(np.float32), meta)


def normalize_and_add_noise(meas: Measurement, sigma: float, seed: int = 0) -> Measurement:
    """Scale Y to [0, 1] by its own max, then add zero-mean Gaussian noise of std `sigma`."""
    if sigma < 0:
        raise ValidationError(f"Noise sigma must be >= 0, got {sigma}")
    y = meas.y.astype(np.float64)
    peak = float(np.max(y)) if y.size else 0.0
    if peak <= 0.0:
        raise ValidationError("Cannot normalize an all-zero measurement")
    y = _add_noise(y / peak, sigma, seed)
    meta = MeasurementMeta(
        frames=meas.meta.frames,
        views=meas.meta.views,
        mask_id=meas.meta.mask_id,
        noise_sigma=float(sigma),
        normalized=True,
        scale=peak,
        seed=int(seed),
    )
    return Measurement(y.astype(np.float32), meta)
