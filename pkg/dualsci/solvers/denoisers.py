from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from ..errors import ValidationError
from ..specs import GapTvConfig
from .tv import tv_denoise


class Denoiser(Protocol):
    name: str

    def __call__(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class TvDenoiser:
    tv_lambda: float = 0.07
    iterations: int = 5
    name: str = "tv"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return tv_denoise(x, self.tv_lambda, self.iterations)


@dataclass(frozen=True)
class IdentityDenoiser:
    name: str = "identity"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=np.float64, copy=True)


@dataclass(frozen=True)
class GaussianDenoiser:
    sigma: float = 1.0
    name: str = "gaussian"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        # no smoothing across frames
        sigmas = (0.0,) * (x.ndim - 2) + (self.sigma, self.sigma)
        return ndimage.gaussian_filter(x, sigma=sigmas, mode="reflect")


DENOISERS = ("tv", "identity", "gaussian")


def make_denoiser(name: str, cfg: GapTvConfig | None = None, sigma: float = 1.0) -> Denoiser:
    cfg = cfg or GapTvConfig()
    if name == "tv":
        return TvDenoiser(cfg.tv_lambda, cfg.tv_iterations)
    if name == "identity":
        return IdentityDenoiser()
    if name == "gaussian":
        return GaussianDenoiser(sigma)
    raise ValidationError(f"Unknown denoiser '{name}' (choose from {', '.join(DENOISERS)})")
