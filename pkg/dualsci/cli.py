from __future__ import annotations

from contextlib import contextmanager
import json
import math
from pathlib import Path
import time
from typing import Any, Iterator, Optional

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress

from .amplifier import build_bundle, save_bundle
from .audit import AuditLog
from .container import load_container, read_manifest, save_container, verify_container
from .errors import NumericalError, ValidationError
from .evaluation.reference import noise_reference, rate_reference
from .evaluation.report import EvalReport, framewise_report
from .evaluation.sweeps import noise_sweep, rate_sweep
from .flow.field import FlowField
from .nets.assembly import load_model, reconstruct as net_reconstruct
from .pipeline import (
    ALGOS,
    SolverTrace,
    config_for_weights,
    config_to_toml,
    load_config,
    make_reconstructor,
    masks_for,
    read_config_file,
    run_ablation,
    synthetic_dataset,
    with_changes,
    write_config_snapshot,
)
from .previews import build_line_chart, build_report_card, save_flow_png, save_frame_png, save_strip_png
from .sci.cube import Measurement, VideoCube
from .sci.encoder import encode, normalize_and_add_noise
from .sci.masks import MaskSet
from .sci.storage import load_masks, load_measurement, load_scene, save_masks, save_measurement, save_scene
from .specs import PipelineConfig
from .training.data import build_corpus, corpus_manifest, synth_corpus
from .training.loop import train as train_model
from .utils import env, write_text

app = typer.Typer(add_completion=False, help="dualsci: dual-view snapshot compressive imaging toolkit")
console = Console()

DATA_ROOT_ENV = "DUALSCI_DATA_ROOT"


def _config_root() -> Path:
    return Path(".dualsci")


def _audit() -> AuditLog:
    return AuditLog(_config_root())


def _local_config_path() -> Optional[Path]:
    path = _config_root() / "config.toml"
    return path if path.exists() else None


def _load_local_settings() -> dict[str, str]:
    path = _local_config_path()
    if path is None:
        return {}
    data = read_config_file(path)
    return {k: str(v) for k, v in data.items() if not isinstance(v, dict)}


def _resolve_setting(flag: Optional[str], env_name: str, config_key: str, default: str) -> str:
    if flag is not None:
        return flag
    ev = env(env_name, "")
    if ev:
        return ev
    return _load_local_settings().get(config_key, default)


def _load_cfg(config: Optional[Path], overrides: Optional[dict[str, Any]] = None) -> PipelineConfig:
    return load_config(config or _local_config_path(), overrides)


def _overrides(**sections: dict[str, Any]) -> dict[str, Any]:
    """Drop unset flags so the config file keeps its values."""
    out: dict[str, Any] = {}
    for name, values in sections.items():
        if name == "top":
            out.update({k: v for k, v in values.items() if v is not None})
            continue
        kept = {k: v for k, v in values.items() if v is not None}
        if kept:
            out[name] = kept
    return out


@contextmanager
def _guard(command: str) -> Iterator[None]:
    """Validation failures exit 2, numeric failures exit 3; both are audited."""
    try:
        yield
    except NumericalError as exc:
        _audit().write(command, {"ok": False, "error": str(exc)})
        console.print(Panel.fit(f"❌ {exc}", title=f"dualsci {command}"))
        raise typer.Exit(code=3) from exc
    except ValidationError as exc:
        _audit().write(command, {"ok": False, "error": str(exc)})
        raise typer.BadParameter(str(exc)) from exc


def _require_dir(path: Path, what: str) -> None:
    if not path.exists() or not path.is_dir():
        raise ValidationError(f"Missing {what} directory: {path}")


def _load_views(path: Path) -> list[np.ndarray]:
    _require_dir(path, "cube")
    box = load_container(path)
    if box.kind not in ("scene", "reconstruction"):
        raise ValidationError(f"{path} holds a '{box.kind}' container, not video cubes")
    names = sorted(k for k in box.tensors if k.startswith("X"))
    if not names:
        raise ValidationError(f"No X1/X2 tensors in {path}")
    return [box.tensors[n].astype(np.float64) for n in names]


def _raw_measurement(meas: Measurement) -> Measurement:
    return meas.denormalized() if meas.meta.normalized else meas


def _check_mask_id(meas: Measurement, masks: MaskSet) -> None:
    if meas.meta.mask_id and meas.meta.mask_id != masks.mask_id():
        raise ValidationError(
            f"Measurement was taken with mask set {meas.meta.mask_id}, got {masks.mask_id()}"
        )


def _write_report(report: EvalReport, out_dir: Path, title: str) -> list[Path]:
    paths = report.write(out_dir)
    write_text(out_dir / "report.json", json.dumps(report.to_dict(), indent=2) + "\n")
    paths.append(out_dir / "report.json")
    paths.append(build_report_card(out_path=out_dir / "report.png", report=report, title=title))
    series = {f"{v} PSNR": c["psnr"] for v, c in report.curves().items()}
    if any(math.isfinite(x) for s in series.values() for x in s):
        paths.append(build_line_chart(out_path=out_dir / "curves.png", title=f"{title}: PSNR per frame", series=series))
    return paths


@app.command()
def init() -> None:
    """Write .dualsci/config.toml with every default spelled out."""
    with _guard("init"):
        cfg = PipelineConfig()
        root = _config_root()
        root.mkdir(parents=True, exist_ok=True)
        body = config_to_toml(cfg)
        note = f'# data_root = "/path/to/sequences"   # or set {DATA_ROOT_ENV}\n'
        lines = body.splitlines(keepends=True)
        write_text(root / "config.toml", lines[0] + note + "".join(lines[1:]))
        _audit().write("init", {"path": str(root / "config.toml"), "config_hash": cfg.config_hash()})
        console.print(Panel.fit(
            f"✅ Initialized {root / 'config.toml'}\nconfig: {cfg.config_hash()}",
            title="dualsci init",
        ))


@app.command()
def synth(
    out: Path = typer.Option(Path("build/scene"), "--out", help="Scene container directory"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Scene seed (defaults to the config seed)"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
    previews: bool = typer.Option(False, "--previews", help="Also write PNG frame strips"),
) -> None:
    """Write a synthetic moving-object scene pair (one per view)."""
    with _guard("synth"):
        cfg = _load_cfg(config, _overrides(top={"seed": seed}))
        g = cfg.geometry
        pair = synth_corpus(g.rows, g.cols, g.frames, 1, seed=cfg.seed, max_velocity=cfg.train.max_velocity)[0]
        views = [VideoCube(pair.x1.data, "single")] if cfg.views == 1 else [pair.x1, pair.x2]
        save_scene(out, views, config_hash=cfg.config_hash(), seed=cfg.seed)
        if previews:
            for k, v in enumerate(views):
                save_strip_png(v.data, out / "previews" / f"view{k + 1}.png")
        _audit().write("synth", {"out": str(out), "seed": cfg.seed, "config_hash": cfg.config_hash()})
        console.print(Panel.fit(
            f"✅ Scene: {out}\nviews: {len(views)}  shape: {views[0].shape}\nconfig: {cfg.config_hash()}",
            title="dualsci synth",
        ))


@app.command("mask-gen")
def mask_gen(
    out: Path = typer.Option(Path("build/masks"), "--out", help="Mask container directory"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Mask seed (defaults to masks.seed)"),
    density: Optional[float] = typer.Option(None, "--density", help="Bernoulli density of C1"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Draw the calibration masks C1 and the shifted C2."""
    with _guard("mask_gen"):
        cfg = _load_cfg(config, _overrides(masks={"seed": seed, "density": density}))
        masks = masks_for(cfg)
        save_masks(out, masks, config_hash=cfg.config_hash())
        _audit().write("mask_gen", {"out": str(out), "mask_id": masks.mask_id(), "config_hash": cfg.config_hash()})
        console.print(Panel.fit(
            f"✅ Masks: {out}\nmask id: {masks.mask_id()}  shift: {masks.shift}\nconfig: {cfg.config_hash()}",
            title="dualsci mask-gen",
        ))


@app.command()
def simulate(
    scene: Path = typer.Option(..., "--scene", help="Scene container (X1, X2)"),
    masks_dir: Path = typer.Option(..., "--masks", help="Mask container"),
    out: Path = typer.Option(Path("build/measurement"), "--out", help="Measurement container directory"),
    noise: float = typer.Option(0.0, "--noise", help="Noise std on the [0, 1]-normalized snapshot"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Noise seed"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Encode a scene pair into one snapshot."""
    with _guard("simulate"):
        cfg = _load_cfg(config, _overrides(top={"seed": seed}))
        _require_dir(scene, "scene")
        _require_dir(masks_dir, "mask")
        views = load_scene(scene)
        masks = load_masks(masks_dir)
        meas = encode(views[0], views[1] if len(views) > 1 else None, masks)
        if noise > 0:
            meas = normalize_and_add_noise(meas, noise, seed=cfg.seed)
        elif noise < 0:
            raise ValidationError(f"Noise sigma must be >= 0, got {noise}")
        save_measurement(out, meas, config_hash=cfg.config_hash())
        save_frame_png(meas.y / max(float(meas.y.max()), 1e-12), out / "snapshot.png")
        _audit().write(
            "simulate",
            {"scene": str(scene), "masks": str(masks_dir), "out": str(out), "noise": noise, "config_hash": cfg.config_hash()},
        )
        console.print(Panel.fit(
            f"✅ Measurement: {out}\nviews: {meas.meta.views}  frames: {meas.meta.frames}  noise: {noise:g}\n"
            f"config: {cfg.config_hash()}",
            title="dualsci simulate",
        ))


@app.command()
def amplify(
    measurement: Path = typer.Option(..., "--measurement", help="Measurement container"),
    masks_dir: Path = typer.Option(..., "--masks", help="Mask container"),
    out: Path = typer.Option(Path("build/bundle"), "--out", help="Bundle container directory"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
    previews: bool = typer.Option(False, "--previews", help="Also write PNGs of Ybar and D1-D4"),
) -> None:
    """Compute the normalized snapshot and the four diversity images."""
    with _guard("amplify"):
        cfg = _load_cfg(config)
        _require_dir(measurement, "measurement")
        _require_dir(masks_dir, "mask")
        meas, _ = load_measurement(measurement)
        masks = load_masks(masks_dir)
        _check_mask_id(meas, masks)
        bundle = build_bundle(_raw_measurement(meas), masks, cfg.smoothing, views=meas.meta.views)
        save_bundle(out, bundle, config_hash=cfg.config_hash())
        if previews:
            for name, img in bundle.as_tensors().items():
                lo, hi = float(img.min()), float(img.max())
                save_frame_png((img - lo) / (hi - lo) if hi > lo else np.zeros_like(img), out / "previews" / f"{name}.png")
        _audit().write(
            "amplify",
            {"measurement": str(measurement), "out": str(out), "degenerate_pixels": bundle.degenerate_pixels,
             "config_hash": cfg.config_hash()},
        )
        console.print(Panel.fit(
            f"✅ Bundle: {out}\ndegenerate pixels: {bundle.degenerate_pixels}\nconfig: {cfg.config_hash()}",
            title="dualsci amplify",
        ))


@app.command()
def train(
    out: Path = typer.Option(Path("build/train"), "--out", help="Run directory (log, checkpoints)"),
    corpus: Optional[str] = typer.Option(None, "--corpus", help=f"Sequence root (else ${DATA_ROOT_ENV}, else config data_root)"),
    synthetic: bool = typer.Option(False, "--synthetic", help="Train on synthetic pairs even if a corpus is configured"),
    masks_dir: Optional[Path] = typer.Option(None, "--masks", help="Mask container (generated from config if absent)"),
    pairs: Optional[int] = typer.Option(None, "--pairs", help="Number of training pairs"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Training epochs"),
    max_steps: Optional[int] = typer.Option(None, "--max-steps", help="Stop after this many steps"),
    lr: Optional[float] = typer.Option(None, "--lr", help="Initial learning rate"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Training seed"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Train the separator and refine networks jointly."""
    with _guard("train"):
        cfg = _load_cfg(
            config,
            _overrides(train={"pairs": pairs, "epochs": epochs, "max_steps": max_steps, "learning_rate": lr, "seed": seed}),
        )
        tc, g = cfg.train, cfg.geometry
        masks = load_masks(masks_dir) if masks_dir is not None else masks_for(cfg)
        if masks.frames != g.frames or masks.spatial_shape != (g.rows, g.cols):
            raise ValidationError(
                f"Masks are {(masks.frames, *masks.spatial_shape)}, config geometry is {(g.frames, g.rows, g.cols)}"
            )

        root = "" if synthetic else _resolve_setting(corpus, DATA_ROOT_ENV, "data_root", "")
        if root:
            data = build_corpus(Path(root), (g.rows, g.cols), g.frames, tc.pairs, seed=tc.seed, workers=tc.workers)
        else:
            data = synth_corpus(g.rows, g.cols, g.frames, tc.pairs, seed=tc.seed, max_velocity=tc.max_velocity)
        if not data:
            raise ValidationError("Training corpus is empty (pairs = 0)")

        out.mkdir(parents=True, exist_ok=True)
        write_config_snapshot(out, cfg)
        write_text(out / "corpus.json", json.dumps(corpus_manifest(data), indent=2, default=str) + "\n")
        save_masks(out / "masks", masks, config_hash=cfg.config_hash())

        per_epoch = math.ceil(len(data) / tc.batch_size)
        total = per_epoch * tc.epochs if tc.max_steps is None else min(per_epoch * tc.epochs, tc.max_steps)
        with Progress(console=console, transient=True) as progress:
            task = progress.add_task("training", total=total)

            def tick(step: int, value: float) -> None:
                progress.update(task, completed=step, description=f"loss {value:.4e}")

            result = train_model(cfg, data, masks, out, on_step=tick)

        _audit().write(
            "train",
            {"out": str(out), "steps": result.steps, "final_loss": result.losses[-1] if result.losses else None,
             "checkpoints": [str(p) for p in result.checkpoints], "corpus": root or "synthetic",
             "config_hash": cfg.config_hash()},
        )
        console.print(Panel.fit(
            f"✅ Trained {result.steps} steps on {len(data)} pairs ({root or 'synthetic'})\n"
            f"loss: {result.losses[0]:.4e} → {result.losses[-1]:.4e}\n"
            f"checkpoint: {result.checkpoints[-1] if result.checkpoints else '-'}\nconfig: {cfg.config_hash()}",
            title="dualsci train",
        ))


@app.command()
def reconstruct(
    measurement: Path = typer.Option(..., "--measurement", help="Measurement container"),
    masks_dir: Path = typer.Option(..., "--masks", help="Mask container"),
    algo: str = typer.Option("gaptv", "--algo", help="gaptv, pnp-tv or net"),
    out: Path = typer.Option(Path("build/recon"), "--out", help="Reconstruction container directory"),
    iters: Optional[int] = typer.Option(None, "--iters", help="Solver iterations"),
    tv_lambda: Optional[float] = typer.Option(None, "--tv-lambda", help="TV weight"),
    denoiser: str = typer.Option("tv", "--denoiser", help="pnp-tv plug-in: tv, identity or gaussian"),
    weights: Optional[Path] = typer.Option(None, "--weights", help="Checkpoint directory (algo net)"),
    truth: Optional[Path] = typer.Option(None, "--truth", help="Scene container to score against"),
    previews: bool = typer.Option(False, "--previews", help="Also write PNG frame strips and flow images"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Recover the per-view frames from one snapshot."""
    with _guard("reconstruct"):
        if algo not in ALGOS:
            raise ValidationError(f"Unknown algorithm '{algo}' (choose from {', '.join(ALGOS)})")
        cfg = _load_cfg(config, _overrides(solver={"iterations": iters, "tv_lambda": tv_lambda}))
        _require_dir(measurement, "measurement")
        _require_dir(masks_dir, "mask")
        meas, _ = load_measurement(measurement)
        masks = load_masks(masks_dir)
        _check_mask_id(meas, masks)
        if meas.meta.views != cfg.views:
            cfg = with_changes(cfg, {"mode": "single" if meas.meta.views == 1 else "dual"})
        raw = _raw_measurement(meas)

        meta: dict[str, Any] = {"algo": algo}
        flow_fields: list[tuple[list[FlowField], list[FlowField]]] = []
        if algo == "net":
            if weights is None:
                raise ValidationError("--algo net needs --weights")
            cfg = config_for_weights(weights, cfg)
            if masks.frames != cfg.geometry.frames:
                raise ValidationError(f"Masks have {masks.frames} frames, the network expects {cfg.geometry.frames}")
            model = load_model(weights, cfg)
            t0 = time.perf_counter()
            result = net_reconstruct(model, build_bundle(raw, masks, cfg.smoothing, views=cfg.views), masks)
            seconds = time.perf_counter() - t0
            est = [c.data for c in result.refined]
            coarse = {f"coarse_X{k + 1}": c.data.astype(np.float32) for k, c in enumerate(result.coarse)}
            flow_fields = result.flows
            meta["weights"] = str(weights)
        else:
            trace = SolverTrace()
            solve = make_reconstructor(algo, cfg, denoiser=denoiser, trace=trace)
            t0 = time.perf_counter()
            est = list(solve(raw, masks))
            seconds = time.perf_counter() - t0
            coarse = {}
            state = trace.last
            assert state is not None
            meta.update({"iterations": state.iteration, "denoiser": state.denoiser,
                         "final_residual": state.residuals[-1] if state.residuals else None})
            write_text(out / "residuals.tsv", state.residual_table())
            build_line_chart(
                out_path=out / "residuals.png",
                title=f"{algo}: residual history",
                series={"residual": state.residuals, "projection": state.projection_residuals},
                xlabel="iteration",
                log_scale=True,
            )

        meta["seconds"] = seconds
        tensors = {f"X{k + 1}": e.astype(np.float32) for k, e in enumerate(est)}
        tensors.update(coarse)
        save_container(out, tensors, kind="reconstruction", meta=meta, config_hash=cfg.config_hash(), seed=cfg.seed)
        if previews:
            for k, e in enumerate(est):
                save_strip_png(e, out / "previews" / f"view{k + 1}.png")
            for k, (fwd, _) in enumerate(flow_fields):
                for f in fwd:
                    save_flow_png(f, out / "previews" / f"flow_view{k + 1}_{f.pair_index + 1:02d}.png")

        lines = [f"✅ Reconstruction: {out}", f"algo: {algo}  time: {seconds:.3f} s"]
        payload: dict[str, Any] = {"measurement": str(measurement), "out": str(out), "algo": algo, "seconds": seconds}
        if truth is not None:
            refs = _load_views(truth)
            report = framewise_report(refs, est, peak=cfg.eval.peak, algo=algo, seconds=seconds, config_hash=cfg.config_hash())
            _write_report(report, out / "report", f"dualsci reconstruct ({algo})")
            p, s = report.average()
            lines.append(f"PSNR {p:.2f} dB  SSIM {s:.4f}")
            payload.update({"psnr": p, "ssim": s})
        lines.append(f"config: {cfg.config_hash()}")
        payload["config_hash"] = cfg.config_hash()
        _audit().write("reconstruct", payload)
        console.print(Panel.fit("\n".join(lines), title="dualsci reconstruct"))


@app.command()
def evaluate(
    truth: Path = typer.Option(..., "--truth", help="Scene container"),
    estimate: Path = typer.Option(..., "--estimate", help="Reconstruction container"),
    out: Path = typer.Option(Path("build/report"), "--out", help="Report directory"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Per-frame PSNR/SSIM of a reconstruction against its ground truth."""
    with _guard("evaluate"):
        cfg = _load_cfg(config)
        refs = _load_views(truth)
        ests = _load_views(estimate)
        box = read_manifest(estimate)
        report = framewise_report(
            refs,
            ests,
            peak=cfg.eval.peak,
            algo=str(box.get("meta", {}).get("algo", "")),
            seconds=box.get("meta", {}).get("seconds"),
            config_hash=cfg.config_hash(),
        )
        paths = _write_report(report, out, "dualsci evaluate")
        console.print(report.to_text(), markup=False)
        p, s = report.average()
        _audit().write(
            "evaluate",
            {"truth": str(truth), "estimate": str(estimate), "out": str(out), "psnr": p, "ssim": s,
             "config_hash": cfg.config_hash()},
        )
        console.print(Panel.fit(
            f"✅ Report: {', '.join(str(x) for x in paths)}\nPSNR {p:.2f} dB  SSIM {s:.4f}\nconfig: {cfg.config_hash()}",
            title="dualsci evaluate",
        ))


def _with_frames(cfg: PipelineConfig, frames: int) -> PipelineConfig:
    return with_changes(cfg, {"geometry": {"frames": frames}})


@app.command()
def sweep(
    kind: str = typer.Option("noise", "--kind", help="noise or rate"),
    algo: str = typer.Option("gaptv", "--algo", help="gaptv, pnp-tv or net"),
    count: int = typer.Option(2, "--count", min=1, help="Synthetic test scenes per point"),
    weights: Optional[Path] = typer.Option(None, "--weights", help="Checkpoint (noise) or directory of frames_<B> checkpoints (rate)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Test-scene and noise seed"),
    out: Path = typer.Option(Path("build/sweep"), "--out", help="Output directory"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Noise-robustness or compression-rate table on synthetic test scenes."""
    with _guard("sweep"):
        if algo not in ALGOS:
            raise ValidationError(f"Unknown algorithm '{algo}' (choose from {', '.join(ALGOS)})")
        cfg = _load_cfg(config, _overrides(top={"seed": seed}))
        if kind == "noise":
            if algo == "net" and weights is not None:
                cfg = config_for_weights(weights, cfg)
            masks = masks_for(cfg)
            table = noise_sweep(
                make_reconstructor(algo, cfg, weights=weights),
                synthetic_dataset(cfg, count, cfg.seed + 1),
                masks,
                cfg.eval.noise_sigmas,
                views=cfg.views,
                seed=cfg.seed,
                peak=cfg.eval.peak,
                reference=lambda s: noise_reference(algo, s),
            )
            chart = {"PSNR": [r["psnr"] for r in table.rows]}
        elif kind == "rate":
            algos, datasets = {}, {}
            for b in cfg.eval.rates:
                cfg_b = _with_frames(cfg, b)
                w = None
                if algo == "net":
                    if weights is None:
                        raise ValidationError("A rate sweep of the network needs --weights with frames_<B> checkpoints")
                    w = weights / f"frames_{b:02d}"
                    cfg_b = config_for_weights(w, cfg_b)
                algos[b] = (make_reconstructor(algo, cfg_b, weights=w), masks_for(cfg_b))
                datasets[b] = synthetic_dataset(cfg_b, count, cfg.seed + 1)
            table = rate_sweep(
                algos,
                datasets,
                cfg.eval.rates,
                views=cfg.views,
                peak=cfg.eval.peak,
                reference=lambda b: rate_reference(algo, b),
            )
            chart = {"PSNR": [r["psnr"] for r in table.rows]}
        else:
            raise ValidationError("--kind must be noise or rate")

        out.mkdir(parents=True, exist_ok=True)
        write_text(out / "sweep.csv", table.to_csv())
        write_text(out / "sweep.txt", table.to_text())
        build_line_chart(
            out_path=out / "sweep.png",
            title=f"{algo} {kind} sweep",
            series=chart,
            x=[r[table.key] for r in table.rows],
            xlabel=table.key,
        )
        console.print(table.to_text(), markup=False)
        _audit().write("sweep", {"kind": kind, "algo": algo, "out": str(out), "rows": table.rows, "config_hash": cfg.config_hash()})
        console.print(Panel.fit(f"✅ {kind} sweep: {out / 'sweep.csv'}\nconfig: {cfg.config_hash()}", title="dualsci sweep"))


@app.command()
def ablate(
    flags: str = typer.Option(..., "--flags", help="Comma-separated: no_flow,no_backward,no_diversity,no_refine,no_joint_training"),
    pairs: int = typer.Option(4, "--pairs", min=1, help="Synthetic training pairs per variant"),
    steps: int = typer.Option(50, "--steps", min=1, help="Training steps per variant"),
    count: int = typer.Option(2, "--count", min=1, help="Synthetic test scenes"),
    include_full: bool = typer.Option(False, "--include-full", help="Also train the unablated model"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Training and test-scene seed"),
    out: Path = typer.Option(Path("build/ablate"), "--out", help="Output directory"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)"),
) -> None:
    """Train one variant per ablation flag and tabulate their scores."""
    with _guard("ablate"):
        cfg = _load_cfg(config, _overrides(train={"pairs": pairs, "max_steps": steps, "seed": seed}))
        masks = masks_for(cfg)
        g, tc = cfg.geometry, cfg.train
        corpus = synth_corpus(g.rows, g.cols, g.frames, tc.pairs, seed=tc.seed, max_velocity=tc.max_velocity)
        dataset = synthetic_dataset(cfg, count, tc.seed + 1)
        table = run_ablation(cfg, flags, corpus, dataset, masks, out, include_full=include_full)

        write_text(out / "ablation.csv", table.to_csv())
        write_text(out / "ablation.txt", table.to_text())
        console.print(table.to_text(), markup=False)
        _audit().write("ablate", {"flags": flags, "out": str(out), "rows": table.rows, "config_hash": cfg.config_hash()})
        console.print(Panel.fit(
            f"✅ {len(table.rows)} variants: {out / 'ablation.csv'}\nconfig: {cfg.config_hash()}",
            title="dualsci ablate",
        ))


@app.command("verify-artifact")
def verify_artifact(in_dir: Path = typer.Option(..., "--in", help="Container directory")) -> None:
    """Re-check every tensor checksum of a container."""
    with _guard("verify_artifact"):
        _require_dir(in_dir, "container")
        ok, errors = verify_container(in_dir)
        manifest = read_manifest(in_dir) if (in_dir / "manifest.json").exists() else {}
        config_hash = str(manifest.get("config_hash", ""))
        _audit().write("verify_artifact", {"target": str(in_dir), "ok": ok, "errors": errors[:10], "config_hash": config_hash})
        if not ok:
            detail = "\n".join(errors[:10])
            console.print(Panel.fit(f"❌ Verification failed\n{detail}", title="dualsci verify-artifact"))
            raise typer.Exit(code=2)
        console.print(Panel.fit(
            f"✅ Verified {manifest.get('kind', '?')} container {in_dir}\nconfig: {config_hash or '-'}",
            title="dualsci verify-artifact",
        ))


@app.command()
def status(config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (.toml/.json)")) -> None:
    """Show the resolved config hash and the audit trail."""
    with _guard("status"):
        cfg = _load_cfg(config)
        log = _audit()
        events = log.read()
        failed = len(log.failures())
        recent = [f"{e.ts}  {'ok ' if e.ok else 'FAIL'}  {e.command}  {e.config_hash or '-'}" for e in events[-5:]]
        data_root = _resolve_setting(None, DATA_ROOT_ENV, "data_root", "") or "-"
        console.print(Panel.fit(
            "\n".join(
                [
                    f"config: {cfg.config_hash()} ({config or _local_config_path() or 'defaults'})",
                    f"mode: {cfg.mode}  geometry: {cfg.geometry.rows}x{cfg.geometry.cols}x{cfg.geometry.frames}",
                    f"data root: {data_root}",
                    f"audit: {_config_root() / 'audit.jsonl'} ({len(events)} events, {failed} failed)",
                    *recent,
                ]
            ),
            title="dualsci status",
        ))
