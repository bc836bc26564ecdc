from __future__ import annotations

import math

import numpy as np
from skimage.metrics import mean_squared_error, structural_similarity

from ..errors import ValidationError


def _pair(ref: np.ndarray, est: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(est, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"Metric operands differ in shape: {a.shape} vs {b.shape}")
    return a, b


def psnr(ref: np.ndarray, est: np.ndarray, peak: float = 1.0) -> float:
    """10·log10(peak² / MSE) in dB; identical inputs give +inf."""
    a, b = _pair(ref, est)
    mse = float(mean_squared_error(a, b))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _window_sigma(side: int) -> float:
    """Gaussian sigma whose truncated window (radius int(3.5σ + 0.5)) fits `side` pixels."""
    radius = (min(side, 11) - 1) // 2
    return 1.5 if radius >= 5 else radius / 3.5


def _global_ssim(a: np.ndarray, b: np.ndarray, data_range: float, k1: float, k2: float) -> float:
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = ((a - ma) * (b - mb)).mean()
    return float((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))


def ssim(ref: np.ndarray, est: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM, 11x11 Gaussian window (σ 1.5), K1 0.01, K2 0.03.

    Frames narrower than 11 pixels get the largest odd window that fits;
    below 3 pixels the whole frame is one window.
    """
    a, b = _pair(ref, est)
    if a.ndim != 2:
        raise ValidationError(f"SSIM compares single frames, got shape {a.shape}")
    side = min(a.shape)
    if side < 3:
        return _global_ssim(a, b, data_range, 0.01, 0.03)
    return float(
        structural_similarity(
            a,
            b,
            data_range=data_range,
            gaussian_weights=True,
            sigma=_window_sigma(side),
            use_sample_covariance=False,
            K1=0.01,
            K2=0.03,
        )
    )
