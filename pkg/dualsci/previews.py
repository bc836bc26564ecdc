from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image, ImageDraw  # noqa: E402

from .errors import ValidationError  # noqa: E402
from .evaluation.report import EvalReport  # noqa: E402
from .flow.field import FlowField  # noqa: E402


BACKGROUND = (14, 18, 27)
BANNER = (35, 53, 84)
TEXT = (228, 238, 255)
MUTED = (175, 197, 230)
SERIES = [(240, 128, 60), (90, 170, 250), (120, 210, 120), (230, 200, 80)]


def to_uint8(frame: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize to 8 bits."""
    return np.round(np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_frame_png(frame: np.ndarray, out_path: Path) -> Path:
    if np.asarray(frame).ndim != 2:
        raise ValidationError(f"A preview frame must be 2-D, got shape {np.asarray(frame).shape}")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(frame)).save(out_path, format="PNG")
    return out_path


def save_cube_pngs(cube: np.ndarray, out_dir: Path, prefix: str = "frame") -> list[Path]:
    return [save_frame_png(cube[t], out_dir / f"{prefix}_{t + 1:02d}.png") for t in range(cube.shape[0])]


def save_strip_png(cube: np.ndarray, out_path: Path, gap: int = 2) -> Path:
    """All frames side by side, separated by a dark gap."""
    frames, rows, cols = cube.shape
    strip = np.zeros((rows, frames * cols + (frames - 1) * gap), dtype=np.uint8)
    for t in range(frames):
        left = t * (cols + gap)
        strip[:, left : left + cols] = to_uint8(cube[t])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(strip).save(out_path, format="PNG")
    return out_path


def flow_to_rgb(field: FlowField, max_magnitude: float | None = None) -> np.ndarray:
    """Colour-wheel rendering: hue encodes direction, value encodes magnitude."""
    mag = np.hypot(field.u, field.v)
    top = float(max_magnitude) if max_magnitude else float(mag.max())
    angle = np.arctan2(field.v, field.u)
    hue = np.round((angle + np.pi) / (2 * np.pi) * 255.0).astype(np.uint8)
    sat = np.full(hue.shape, 255, dtype=np.uint8)
    val = to_uint8(mag / top) if top > 0 else np.zeros(hue.shape, dtype=np.uint8)
    hsv = Image.merge("HSV", [Image.fromarray(c) for c in (hue, sat, val)])
    return np.asarray(hsv.convert("RGB"))


def save_flow_png(field: FlowField, out_path: Path, max_magnitude: float | None = None) -> Path:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(flow_to_rgb(field, max_magnitude)).save(out_path, format="PNG")
    return out_path

def _psnr_colour(value: float, ceiling: float = 40.0) -> tuple[int, int, int]:
    """Red at 0 dB through amber to green at `ceiling` dB and above."""
    if not math.isfinite(value):
        return SERIES[2]
    t = min(max(value / ceiling, 0.0), 1.0)
    return (int(230 - 130 * t), int(80 + 130 * t), 70)


def build_report_card(*, out_path: Path, report: EvalReport, title: str = "dualsci report") -> Path:
    """One summary tile per view above a frame-by-view PSNR/SSIM grid."""
    views = report.views
    frames = max(f.frame for f in report.frames)
    cell_w, cell_h, pad = 150, 34, 16
    label_w = 70
    tile_h = 64
    width = max(640, label_w + pad * 2 + cell_w * len(views))
    grid_top = 60 + pad + tile_h + pad + 20
    height = grid_top + cell_h * frames + pad + 24

    img = Image.new("RGB", (width, height), color=BACKGROUND)
    draw = ImageDraw.Draw(img)
    draw.rectangle((0, 0, width, 60), fill=BANNER)
    draw.text((pad, 14), title, fill=(255, 255, 255))
    draw.text((pad, 34), f"algo: {report.algo or '-'}   config: {report.config_hash or '-'}", fill=MUTED)

    tile_w = (width - pad * (len(views) + 2)) // (len(views) + 1)
    summaries = [(v, *report.view_average(v)) for v in views] + [("average", *report.average())]
    for i, (name, p, s) in enumerate(summaries):
        x0 = pad + i * (tile_w + pad)
        draw.rectangle((x0, 60 + pad, x0 + tile_w, 60 + pad + tile_h), outline=_psnr_colour(p), width=2)
        draw.text((x0 + 8, 60 + pad + 8), name, fill=MUTED)
        draw.text((x0 + 8, 60 + pad + 28), f"{_db(p)}  /  {s:.4f}", fill=TEXT)

    draw.text((pad, grid_top - 18), "frame", fill=MUTED)
    for j, v in enumerate(views):
        draw.text((label_w + pad + j * cell_w + 6, grid_top - 18), v, fill=MUTED)
    for f in report.frames:
        j = views.index(f.view)
        x0 = label_w + pad + j * cell_w
        y0 = grid_top + (f.frame - 1) * cell_h
        draw.rectangle((x0, y0, x0 + cell_w - 4, y0 + cell_h - 4), fill=_psnr_colour(f.psnr))
        draw.text((x0 + 6, y0 + 10), f"{_db(f.psnr)} {f.ssim:.3f}", fill=BACKGROUND)
    for t in range(frames):
        draw.text((pad, grid_top + t * cell_h + 10), str(t + 1), fill=TEXT)

    if report.seconds is not None:
        draw.text((pad, height - 22), f"time per snapshot: {report.seconds:.4f} s", fill=MUTED)

    out_path.parent.mkdir(parents=True, exist_ok=True)
    img.save(out_path, format="PNG")
    return out_path


def _db(value: float) -> str:
    return "inf dB" if math.isinf(value) else f"{value:.2f} dB"


def build_line_chart(
    *,
    out_path: Path,
    title: str,
    series: Mapping[str, Sequence[float]],
    x: Optional[Sequence[float]] = None,
    xlabel: str = "frame",
    log_scale: bool = False,
    size: tuple[float, float] = (7.2, 3.6),
    dpi: int = 100,
) -> Path:
    """One line per series over a shared x axis; non-finite points are left as gaps."""
    if not any(np.isfinite(np.asarray(v, dtype=np.float64)).any() for v in series.values() if len(v)):
        raise ValidationError("Nothing finite to plot")

    fig, ax = plt.subplots(figsize=size, dpi=dpi)
    try:
        for name, vals in series.items():
            y = np.asarray(vals, dtype=np.float64)
            y = np.where(np.isfinite(y), y, np.nan)
            if log_scale:
                y = np.where(y > 0, y, np.nan)
            xs = np.asarray(x[: len(y)], dtype=np.float64) if x is not None else np.arange(1, len(y) + 1)
            ax.plot(xs, y, marker="o" if len(y) < 20 else None, label=name)
        if log_scale:
            ax.set_yscale("log")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_path, format="png")
    finally:
        plt.close(fig)
    return out_path
