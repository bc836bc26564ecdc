from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
import io
import math
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..sci.cube import VideoCube
from .metrics import psnr, ssim


@dataclass(frozen=True)
class FrameMetrics:
    view: str
    frame: int
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    frames: list[FrameMetrics]
    algo: str = ""
    seconds: Optional[float] = None
    config_hash: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def views(self) -> list[str]:
        seen: list[str] = []
        for f in self.frames:
            if f.view not in seen:
                seen.append(f.view)
        return seen

    def view_average(self, view: str) -> tuple[float, float]:
        rows = [f for f in self.frames if f.view == view]
        if not rows:
            raise ValidationError(f"No frames for view '{view}'")
        return float(np.mean([f.psnr for f in rows])), float(np.mean([f.ssim for f in rows]))

    def average(self) -> tuple[float, float]:
        """Mean of the per-view averages."""
        per_view = [self.view_average(v) for v in self.views]
        return float(np.mean([p for p, _ in per_view])), float(np.mean([s for _, s in per_view]))

    def curves(self) -> dict[str, dict[str, list[float]]]:
        out: dict[str, dict[str, list[float]]] = {}
        for f in self.frames:
            c = out.setdefault(f.view, {"psnr": [], "ssim": []})
            c["psnr"].append(f.psnr)
            c["ssim"].append(f.ssim)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["view", "frame", "psnr", "ssim"])
        for f in self.frames:
            w.writerow([f.view, f.frame, _fmt(f.psnr), f"{f.ssim:.6f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"algo: {self.algo or '-'}   config: {self.config_hash or '-'}"]
        lines.append(f"{'view':<8}{'frame':>6}{'PSNR':>10}{'SSIM':>9}")
        for f in self.frames:
            lines.append(f"{f.view:<8}{f.frame:>6}{_fmt(f.psnr):>10}{f.ssim:>9.4f}")
        for v in self.views:
            p, s = self.view_average(v)
            lines.append(f"{v:<8}{'avg':>6}{_fmt(p):>10}{s:>9.4f}")
        p, s = self.average()
        lines.append(f"{'average':<8}{'':>6}{_fmt(p):>10}{s:>9.4f}")
        if self.seconds is not None:
            lines.append(f"time per snapshot: {self.seconds:.4f} s")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict[str, Any]:
        p, s = self.average()
        return {
            "algo": self.algo,
            "config_hash": self.config_hash,
            "seconds": self.seconds,
            "average": {"psnr": _json_float(p), "ssim": s},
            "frames": [{**asdict(f), "psnr": _json_float(f.psnr)} for f in self.frames],
            **self.extra,
        }

    def write(self, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "framewise.csv"
        txt_path = out_dir / "report.txt"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        txt_path.write_text(self.to_text(), encoding="utf-8")
        return [csv_path, txt_path]


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.4f}"


def _json_float(v: float) -> float | str:
    return "inf" if math.isinf(v) else v


def _frames(x: VideoCube | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, VideoCube) else np.asarray(x)


def framewise_report(
    refs: Sequence[VideoCube | np.ndarray],
    ests: Sequence[VideoCube | np.ndarray],
    *,
    peak: float = 1.0,
    algo: str = "",
    seconds: Optional[float] = None,
    config_hash: str = "",
) -> EvalReport:
    """Per-view, per-frame PSNR and SSIM; estimates are clamped to [0, 1] first."""
    if len(refs) != len(ests):
        raise ValidationError(f"Got {len(refs)} reference views but {len(ests)} estimates")
    names = ["single"] if len(refs) == 1 else [f"view{k + 1}" for k in range(len(refs))]
    rows: list[FrameMetrics] = []
    for name, r, e in zip(names, refs, ests):
        rf, ef = _frames(r), np.clip(_frames(e), 0.0, 1.0)
        if rf.shape != ef.shape:
            raise ValidationError(f"{name}: reference {rf.shape} and estimate {ef.shape} differ")
        for t in range(rf.shape[0]):
            rows.append(FrameMetrics(name, t + 1, psnr(rf[t], ef[t], peak), ssim(rf[t], ef[t])))
    return EvalReport(rows, algo=algo, seconds=seconds, config_hash=config_hash)
