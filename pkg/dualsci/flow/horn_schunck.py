from __future__ import annotations

import numpy as np
from scipy import ndimage


# Horn–Schunck neighbourhood average (centre excluded)
_HS_AVERAGE = np.array(
    [[1 / 12, 1 / 6, 1 / 12],
     [1 / 6, 0.0, 1 / 6],
     [1 / 12, 1 / 6, 1 / 12]],
    dtype=np.float64,
)


def warp(frame: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample `frame` at x + (u, v) with bilinear interpolation."""
    rows, cols = frame.shape
    rr, cc = np.mgrid[0:rows, 0:cols].astype(np.float64)
    return ndimage.map_coordinates(frame, [rr + v, cc + u], order=1, mode="nearest")


def _pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    out = [img]
    for _ in range(levels - 1):
        prev = out[-1]
        if min(prev.shape) < 8:
            break
        blurred = ndimage.gaussian_filter(prev, sigma=1.0, mode="reflect")
        out.append(ndimage.zoom(blurred, 0.5, order=1, mode="nearest", grid_mode=True))
    return out[::-1]


def _resize_flow(u: np.ndarray, v: np.ndarray, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    fy = shape[0] / u.shape[0]
    fx = shape[1] / u.shape[1]
    u2 = ndimage.zoom(u, (fy, fx), order=1, mode="nearest", grid_mode=True) * fx
    v2 = ndimage.zoom(v, (fy, fx), order=1, mode="nearest", grid_mode=True) * fy
    return u2[: shape[0], : shape[1]], v2[: shape[0], : shape[1]]


def _refine_level(
    a: np.ndarray,
    b: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    alpha: float,
    iterations: int,
) -> tuple[np.ndarray, np.ndarray]:
    bw = warp(b, u, v)
    iy, ix = np.gradient(0.5 * (a + bw))
    it = bw - a
    denom = alpha * alpha + ix * ix + iy * iy
    u0, v0 = u.copy(), v.copy()
    for _ in range(iterations):
        u_avg = ndimage.correlate(u, _HS_AVERAGE, mode="nearest")
        v_avg = ndimage.correlate(v, _HS_AVERAGE, mode="nearest")
        p = (ix * (u_avg - u0) + iy * (v_avg - v0) + it) / denom
        u = u_avg - ix * p
        v = v_avg - iy * p
    return u, v


def horn_schunck_pyramid(
    frame_a: np.ndarray,
    frame_b: np.ndarray,
    *,
    levels: int = 3,
    alpha: float = 0.1,
    iterations: int = 50,
    max_displacement: float = 32.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Coarse-to-fine Horn–Schunck with one warp per level.

    Returns (u, v) such that frame_a(x) ≈ frame_b(x + (u, v)).
    """
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    pa = _pyramid(a, levels)
    pb = _pyramid(b, levels)

    u = np.zeros_like(pa[0])
    v = np.zeros_like(pa[0])
    for level, (la, lb) in enumerate(zip(pa, pb)):
        if level > 0:
            u, v = _resize_flow(u, v, la.shape)
        u, v = _refine_level(la, lb, u, v, alpha, iterations)
        np.clip(u, -max_displacement, max_displacement, out=u)
        np.clip(v, -max_displacement, max_displacement, out=v)
    return u, v
