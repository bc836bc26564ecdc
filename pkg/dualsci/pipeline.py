"""Glue between configuration files and the reconstruction algorithms.

`make_reconstructor` turns an algorithm name into the `(measurement, masks) ->
cubes` callable that the CLI and the sweeps share.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import pydantic

from .amplifier import build_bundle
from .errors import ValidationError
from .evaluation.sweeps import Reconstructor, SweepTable, evaluate_dataset
from .nets.ablation import label, single_flag_variants
from .nets.assembly import DualViewModel, load_model, reconstruct
from .sci.cube import Measurement
from .sci.masks import MaskSet, generate_masks
from .solvers.denoisers import make_denoiser
from .solvers.gap import SolverState, pnp_solve
from .specs import AblationFlags, PipelineConfig
from .training.data import TrainPair, synth_corpus
from .training.loop import train
from .utils import load_json, load_toml, write_text


ALGOS = ("gaptv", "pnp-tv", "net")
CONFIG_SNAPSHOT = "pipeline_config.json"


def _merge(base: dict[str, Any], extra: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def read_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ValidationError(f"Missing config file: {path}")
    suffix = path.suffix.lower()
    if suffix == ".toml":
        return load_toml(path)
    if suffix == ".json":
        return load_json(path)
    raise ValidationError("Config must be .toml or .json")


def build_config(data: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    merged = _merge(dict(data), overrides or {})
    try:
        return PipelineConfig.model_validate(merged)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "config"
        raise ValidationError(f"Malformed config at {where}: {first['msg']}") from exc


def with_changes(cfg: PipelineConfig, changes: Mapping[str, Any]) -> PipelineConfig:
    """Re-validated copy of `cfg` with `changes` deep-merged in."""
    return build_config(cfg.model_dump(), changes)


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    data = read_config_file(path) if path is not None else {}
    return build_config(data, overrides)


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(str(v))


def config_to_toml(cfg: PipelineConfig) -> str:
    """Flat scalars first, then one table per module; unset optionals are left out."""
    data = cfg.model_dump(mode="json")
    head = [f"{k} = {_toml_value(v)}" for k, v in data.items() if not isinstance(v, dict) and v is not None]
    lines = ["# dualsci pipeline config", *head]
    for section, body in data.items():
        if not isinstance(body, dict):
            continue
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in body.items() if v is not None)
    return "\n".join(lines) + "\n"


def write_config_snapshot(out_dir: Path, cfg: PipelineConfig) -> Path:
    path = out_dir / CONFIG_SNAPSHOT
    write_text(path, json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return path


def config_for_weights(weights: Path, fallback: PipelineConfig) -> PipelineConfig:
    """The config a checkpoint was trained under, when its run directory kept one."""
    for cand in (weights / CONFIG_SNAPSHOT, weights.parent / CONFIG_SNAPSHOT):
        if cand.exists():
            return build_config(load_json(cand))
    return fallback


def masks_for(cfg: PipelineConfig, seed: Optional[int] = None) -> MaskSet:
    g, m = cfg.geometry, cfg.masks
    return generate_masks(g.rows, g.cols, g.frames, density=m.density, shift=m.shift, seed=m.seed if seed is None else seed)


def synthetic_dataset(cfg: PipelineConfig, count: int, seed: int) -> list[TrainPair]:
    g = cfg.geometry
    return synth_corpus(g.rows, g.cols, g.frames, count, seed=seed, max_velocity=cfg.train.max_velocity)


@dataclass
class SolverTrace:
    """Collects the per-call solver states of a solver reconstructor."""

    states: list[SolverState] = field(default_factory=list)

    @property
    def last(self) -> Optional[SolverState]:
        return self.states[-1] if self.states else None


def _check_views(meas: Measurement, views: int) -> None:
    if meas.meta.views != views:
        raise ValidationError(f"Measurement was taken with {meas.meta.views} view(s), config expects {views}")


def make_reconstructor(
    algo: str,
    cfg: PipelineConfig,
    *,
    model: Optional[DualViewModel] = None,
    weights: Optional[Path] = None,
    denoiser: str = "tv",
    sigma: float = 1.0,
    trace: Optional[SolverTrace] = None,
) -> Reconstructor:
    views = cfg.views
    if algo in ("gaptv", "pnp-tv"):
        den = make_denoiser("tv" if algo == "gaptv" else denoiser, cfg.solver, sigma)

        def solve(meas: Measurement, masks: MaskSet) -> list[np.ndarray]:
            _check_views(meas, views)
            x1, x2, state = pnp_solve(meas, masks, den, cfg.solver, views=views)
            if trace is not None:
                trace.states.append(state)
            return [x1.data] if x2 is None else [x1.data, x2.data]

        return solve

    if algo == "net":
        if model is None:
            if weights is None:
                raise ValidationError("--algo net needs trained weights")
            model = load_model(weights, cfg)
        net = model

        def infer(meas: Measurement, masks: MaskSet) -> list[np.ndarray]:
            _check_views(meas, views)
            bundle = build_bundle(meas, masks, cfg.smoothing, views=views)
            return [c.data for c in reconstruct(net, bundle, masks).refined]

        return infer

    raise ValidationError(f"Unknown algorithm '{algo}' (choose from {', '.join(ALGOS)})")


def run_ablation(
    cfg: PipelineConfig,
    flags: str | Sequence[str],
    corpus: Sequence[TrainPair],
    dataset: Sequence[TrainPair],
    masks: MaskSet,
    out_dir: Path,
    *,
    include_full: bool = False,
) -> SweepTable:
    """Train and score one variant per flag (plus the full model when asked)."""
    variants = single_flag_variants(flags)
    if include_full:
        variants.insert(0, ("", AblationFlags()))
    if not variants:
        raise ValidationError("No ablation flags given")

    table = SweepTable(key="variant")
    for name, variant in variants:
        vcfg = with_changes(cfg, {"ablation": variant.model_dump()})
        run_dir = out_dir / (name or "full")
        write_config_snapshot(run_dir, vcfg)
        result = train(vcfg, corpus, masks, run_dir)
        algo = make_reconstructor("net", vcfg, model=result.model)
        reports, seconds = evaluate_dataset(algo, dataset, masks, views=vcfg.views, peak=cfg.eval.peak)
        psnr_avg = float(np.mean([r.average()[0] for r in reports]))
        ssim_avg = float(np.mean([r.average()[1] for r in reports]))
        table.rows.append(
            {
                "variant": label(name),
                "flag": name or "-",
                "psnr": psnr_avg,
                "ssim": ssim_avg,
                "seconds": seconds,
                "params": sum(p.numel() for p in result.model.trainable_parameters()),
                "config_hash": vcfg.config_hash(),
            }
        )
    return table
