"""Noise and compression-rate sweeps plus snapshot timing.

A reconstructor is any callable `(measurement, masks) -> list of per-view cubes`;
`dualsci.pipeline` builds them for the solvers and the trained network.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import io
import math
import statistics
import time
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..sci.cube import Measurement
from ..sci.encoder import encode, normalize_and_add_noise
from ..sci.masks import MaskSet
from ..training.data import TrainPair
from .report import EvalReport, framewise_report


Reconstructor = Callable[[Measurement, MaskSet], Sequence[np.ndarray]]


@dataclass
class SweepTable:
    key: str
    rows: list[dict[str, Any]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        cols: list[str] = []
        for r in self.rows:
            cols.extend(k for k in r if k not in cols)
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _cell(v) for k, v in r.items()})
        return buf.getvalue()

    def to_text(self) -> str:
        cols = self.columns
        width = {c: max(len(c), *(len(_cell(r.get(c, ""))) for r in self.rows)) + 2 for c in cols}
        lines = ["".join(c.rjust(width[c]) for c in cols)]
        for r in self.rows:
            lines.append("".join(_cell(r.get(c, "")).rjust(width[c]) for c in cols))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.4f}"
    return "" if v is None else str(v)


@dataclass(frozen=True)
class Timing:
    seconds: float
    samples: list[float]


def time_reconstruction(algo: Reconstructor, measurement: Measurement, masks: MaskSet, repetitions: int = 3) -> Timing:
    """Median wall time of `algo` on one snapshot; any model loading happens before the call."""
    if repetitions < 1:
        raise ValidationError(f"repetitions must be >= 1, got {repetitions}")
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        algo(measurement, masks)
        samples.append(max(time.perf_counter() - t0, 1e-9))
    return Timing(seconds=float(statistics.median(samples)), samples=samples)


def _truth(pair: TrainPair, views: int) -> list[np.ndarray]:
    return [pair.x1.data] if views == 1 else [pair.x1.data, pair.x2.data]


def evaluate_dataset(
    algo: Reconstructor,
    dataset: Sequence[TrainPair],
    masks: MaskSet,
    *,
    views: int = 2,
    noise_sigma: float = 0.0,
    seed: int = 0,
    peak: float = 1.0,
) -> tuple[list[EvalReport], float]:
    """Per-scene reports plus the median reconstruction time.

    With σ > 0 the snapshot is normalized to [0, 1], noise is added on that scale,
    and the result is scaled back before reconstruction.
    """
    if not dataset:
        raise ValidationError("Evaluation dataset is empty")
    reports: list[EvalReport] = []
    times: list[float] = []
    for i, pair in enumerate(dataset):
        meas = encode(pair.x1, pair.x2 if views == 2 else None, masks)
        if noise_sigma > 0:
            meas = normalize_and_add_noise(meas, noise_sigma, seed=seed + i).denormalized()
        t0 = time.perf_counter()
        est = algo(meas, masks)
        times.append(time.perf_counter() - t0)
        reports.append(framewise_report(_truth(pair, views), list(est), peak=peak))
    return reports, float(statistics.median(times))


def _summary(reports: Sequence[EvalReport]) -> dict[str, float]:
    avgs = [r.average() for r in reports]
    out = {"psnr": float(np.mean([p for p, _ in avgs])), "ssim": float(np.mean([s for _, s in avgs]))}
    for v in reports[0].views:
        per = [r.view_average(v) for r in reports]
        out[f"psnr_{v}"] = float(np.mean([p for p, _ in per]))
        out[f"ssim_{v}"] = float(np.mean([s for _, s in per]))
    return out


def noise_sweep(
    algo: Reconstructor,
    dataset: Sequence[TrainPair],
    masks: MaskSet,
    sigmas: Sequence[float] = (0.0, 0.01, 0.05, 0.1, 0.2),
    *,
    views: int = 2,
    seed: int = 0,
    peak: float = 1.0,
    reference: Optional[Callable[[float], Optional[tuple[float, float]]]] = None,
) -> SweepTable:
    if not sigmas:
        raise ValidationError("Noise sweep needs at least one sigma")
    table = SweepTable(key="sigma")
    for sigma in sigmas:
        reports, seconds = evaluate_dataset(algo, dataset, masks, views=views, noise_sigma=sigma, seed=seed, peak=peak)
        row: dict[str, Any] = {"sigma": float(sigma), **_summary(reports), "seconds": seconds}
        if reference is not None:
            ref = reference(sigma)
            row["ref_psnr"], row["ref_ssim"] = ref if ref else (None, None)
        table.rows.append(row)

    # diagnostic only: noisier rows should not score higher
    for i, r in enumerate(table.rows):
        cleaner = [q for q in table.rows[:i] if q["sigma"] < r["sigma"]]
        if any(r["psnr"] > q["psnr"] for q in cleaner):
            r["non_monotone"] = True
            table.notes.append(f"sigma={r['sigma']:g} scores above a smaller sigma")
    return table


def rate_sweep(
    algos: Mapping[int, tuple[Reconstructor, MaskSet]],
    datasets: Mapping[int, Sequence[TrainPair]],
    rates: Sequence[int] = (6, 10, 14),
    *,
    views: int = 2,
    peak: float = 1.0,
    reference: Optional[Callable[[int], Optional[tuple[float, float, float]]]] = None,
) -> SweepTable:
    if not rates:
        raise ValidationError("Rate sweep needs at least one frame count")
    table = SweepTable(key="frames")
    for b in rates:
        if b not in algos:
            raise ValidationError(f"No reconstructor for B={b}")
        data = datasets.get(b, [])
        if not data:
            raise ValidationError(f"Empty dataset for B={b}")
        algo, masks = algos[b]
        if masks.frames != b:
            raise ValidationError(f"Masks for B={b} have {masks.frames} frames")
        reports, seconds = evaluate_dataset(algo, data, masks, views=views, peak=peak)
        row: dict[str, Any] = {"frames": int(b), **_summary(reports), "seconds": seconds}
        if reference is not None:
            ref = reference(b)
            row["ref_psnr"], row["ref_ssim"], row["ref_seconds"] = ref if ref else (None, None, None)
        table.rows.append(row)
    return table
