"""Published full-scale averages (256x256 dual-view simulation, six scene pairs).

Printed beside desk-scale sweep results for orientation only; nothing here is an
acceptance target. Values are (PSNR dB, SSIM, seconds per snapshot).
"""
from __future__ import annotations

from typing import Optional


REFERENCE_FRAMES = 10

# B = 10, noiseless
METHOD_AVERAGES: dict[str, tuple[float, float, float]] = {
    "gaptv": (22.49, 0.60, 16.9),
    "pnp-tv-ffdnet": (22.54, 0.57, 52.3),
    "desci": (24.51, 0.64, 21600.4),
    "unet": (22.97, 0.55, 0.0216),
    "admm-net": (24.14, 0.60, 0.0629),
    "birnat": (23.93, 0.61, 0.5132),
    "net": (25.12, 0.67, 0.4893),
}

ABLATION_AVERAGES: dict[str, tuple[float, float, float]] = {
    "no_diversity": (24.55, 0.63, 0.4829),
    "shared_branch": (24.83, 0.65, 0.4862),
    "no_refine": (24.01, 0.60, 0.0057),
    "no_flow": (24.42, 0.63, 0.0861),
    "no_backward": (24.75, 0.65, 0.3013),
    "no_joint_training": (24.87, 0.65, 0.4898),
    "full": (25.12, 0.67, 0.4893),
}

# frames per view -> method -> (PSNR, SSIM, seconds)
RATE_AVERAGES: dict[int, dict[str, tuple[float, float, float]]] = {
    6: {"gaptv": (23.93, 0.65, 11.8), "no_refine": (25.55, 0.68, 0.0052), "net": (26.50, 0.73, 0.3766)},
    10: {"gaptv": (22.49, 0.60, 16.9), "no_refine": (24.01, 0.60, 0.0057), "net": (25.12, 0.67, 0.4893)},
    14: {"gaptv": (21.39, 0.54, 28.7), "no_refine": (23.16, 0.56, 0.0058), "net": (24.25, 0.63, 0.9481)},
}

# noise sigma on the [0, 1]-normalized snapshot -> method -> (PSNR, SSIM)
NOISE_AVERAGES: dict[float, dict[str, tuple[float, float]]] = {
    0.0: {"gaptv": (22.49, 0.60), "net": (25.12, 0.67)},
    0.01: {"gaptv": (21.69, 0.53), "net": (24.83, 0.65)},
    0.05: {"gaptv": (16.73, 0.26), "net": (20.69, 0.47)},
    0.1: {"gaptv": (13.12, 0.12), "net": (17.09, 0.34)},
    0.2: {"gaptv": (9.16, 0.05), "net": (14.83, 0.26)},
}


def noise_reference(algo: str, sigma: float) -> Optional[tuple[float, float]]:
    return NOISE_AVERAGES.get(round(float(sigma), 4), {}).get(_family(algo))


def rate_reference(algo: str, frames: int) -> Optional[tuple[float, float, float]]:
    return RATE_AVERAGES.get(int(frames), {}).get(_family(algo))


def _family(algo: str) -> str:
    return "gaptv" if algo in ("gaptv", "pnp-tv") else algo
