from __future__ import annotations

from dataclasses import dataclass, field
import json
from pathlib import Path
import time
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..amplifier import build_bundle
from ..errors import NumericalError, ValidationError
from ..nets.assembly import DualViewModel, bundle_tensor, mask_tensor, save_model
from ..sci.encoder import encode
from ..sci.masks import MaskSet
from ..specs import PipelineConfig
from .data import TrainPair


LOG_HEADER = "step\tepoch\tloss\tlr\twall_time\n"

StepCallback = Callable[[int, float], None]


def _sq(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape != b.shape:
        raise ValidationError(f"Loss operands differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")
    return ((a - b) ** 2).sum()


def _as_tensor(x: torch.Tensor | np.ndarray) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x, dtype=np.float64))


def loss_terms(
    coarse: Sequence[torch.Tensor],
    refined: Sequence[torch.Tensor],
    truth: Sequence[torch.Tensor],
    alpha: float = 1.0,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, separator term, refine term) summed over views and frames."""
    if not (len(coarse) == len(refined) == len(truth)) or not truth:
        raise ValidationError("Loss needs one coarse, refined and ground-truth cube per view")
    sep = sum((_sq(c, t) for c, t in zip(coarse, truth)), start=torch.zeros(()))
    ref = sum((_sq(r, t) for r, t in zip(refined, truth)), start=torch.zeros(()))
    return alpha * sep + ref, sep, ref


def loss(x1_coarse, x2_coarse, x1_refined, x2_refined, x1, x2, alpha: float = 1.0) -> torch.Tensor:
    """α·(‖X̃1−X1‖² + ‖X̃2−X2‖²) + ‖X̂1−X1‖² + ‖X̂2−X2‖²; pass None for the second view in single mode."""
    views = [(x1_coarse, x1_refined, x1)]
    if x2 is not None:
        views.append((x2_coarse, x2_refined, x2))
    coarse = [_as_tensor(v[0]) for v in views]
    refined = [_as_tensor(v[1]) for v in views]
    truth = [_as_tensor(v[2]) for v in views]
    return loss_terms(coarse, refined, truth, alpha)[0]


@dataclass
class TrainResult:
    model: DualViewModel
    losses: list[float] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    log_path: Optional[Path] = None
    steps: int = 0
    mask_id: str = ""


def make_batch(
    pairs: Sequence[TrainPair],
    masks: MaskSet,
    cfg: PipelineConfig,
    noise_seeds: Sequence[int],
) -> tuple[torch.Tensor, list[torch.Tensor]]:
    """Re-simulate each pair's snapshot with the fixed masks and build model inputs."""
    bundles = []
    truth: list[list[np.ndarray]] = [[] for _ in range(cfg.views)]
    shape = (masks.frames, *masks.spatial_shape)
    for pair, s in zip(pairs, noise_seeds):
        if pair.x1.shape != shape:
            raise ValidationError(f"Training pair is {pair.x1.shape}, masks expect {shape}")
        x2 = pair.x2 if cfg.views == 2 else None
        meas = encode(pair.x1, x2, masks, noise_sigma=cfg.train.noise_sigma, seed=int(s))
        bundles.append(build_bundle(meas, masks, cfg.smoothing, views=cfg.views))
        truth[0].append(pair.x1.data)
        if cfg.views == 2:
            truth[1].append(pair.x2.data)
    targets = [torch.from_numpy(np.stack(t).astype(np.float32)) for t in truth]
    return bundle_tensor(bundles), targets


def _param_norms(model: DualViewModel) -> dict[str, float]:
    return {name: float(p.detach().norm()) for name, p in model.named_parameters()}


def _dump_diagnostics(out_dir: Path, step: int, epoch: int, terms: dict[str, float], model: DualViewModel) -> Path:
    path = out_dir / "diagnostics.json"
    payload = {"step": step, "epoch": epoch, "loss_terms": terms, "parameter_norms": _param_norms(model)}
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")
    return path


def train(
    cfg: PipelineConfig,
    corpus: Sequence[TrainPair],
    masks: MaskSet,
    out_dir: Path,
    *,
    model: DualViewModel | None = None,
    on_step: Optional[StepCallback] = None,
) -> TrainResult:
    """Adam on the joint loss, lr × decay every `decay_every` epochs, checkpoint per epoch."""
    tc = cfg.train
    if not corpus:
        raise ValidationError("Training corpus is empty")
    shape = (masks.frames, *masks.spatial_shape)
    if corpus[0].x1.shape != shape:
        raise ValidationError(f"Corpus cubes are {corpus[0].x1.shape}, masks expect {shape}")

    torch.manual_seed(tc.seed)
    model = model or DualViewModel(cfg)
    if model.mask_id and model.mask_id != masks.mask_id():
        raise ValidationError(f"Checkpoint was trained with mask set {model.mask_id}, got {masks.mask_id()}")
    model.mask_id = masks.mask_id()
    params = model.trainable_parameters()
    optimizer = torch.optim.Adam(params, lr=tc.learning_rate)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=tc.decay_every, gamma=tc.lr_decay)

    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.tsv"
    if not log_path.exists():
        log_path.write_text(LOG_HEADER, encoding="utf-8")
    m = mask_tensor(masks, cfg.views)
    rng = np.random.default_rng(tc.seed)
    result = TrainResult(model=model, log_path=log_path, mask_id=masks.mask_id())
    config_hash = cfg.config_hash()
    start = time.perf_counter()
    step = 0
    done = False

    model.train()
    for epoch in range(tc.epochs):
        order = rng.permutation(len(corpus))
        lr = optimizer.param_groups[0]["lr"]
        for lo in range(0, len(order), tc.batch_size):
            idx = order[lo : lo + tc.batch_size]
            noise_seeds = rng.integers(0, 2**31 - 1, size=len(idx))
            net_in, truth = make_batch([corpus[i] for i in idx], masks, cfg, noise_seeds)

            optimizer.zero_grad(set_to_none=True)
            out = model(net_in, m)
            total, sep, ref = loss_terms(out.coarse, out.refined, truth, tc.alpha)
            value = float(total.detach())
            if not np.isfinite(value):
                terms = {"total": value, "separator": float(sep.detach()), "refine": float(ref.detach())}
                dump = _dump_diagnostics(out_dir, step, epoch, terms, model)
                raise NumericalError(f"Non-finite loss at step {step} (epoch {epoch}); diagnostics in {dump}")
            total.backward()
            optimizer.step()
            step += 1

            result.losses.append(value)
            with log_path.open("a", encoding="utf-8") as f:
                f.write(f"{step}\t{epoch}\t{value:.8e}\t{lr:.8e}\t{time.perf_counter() - start:.3f}\n")
            if on_step is not None:
                on_step(step, value)
            if tc.max_steps is not None and step >= tc.max_steps:
                done = True
                break

        scheduler.step()
        if done or (epoch + 1) % tc.checkpoint_every == 0 or epoch == tc.epochs - 1:
            ckpt = save_model(
                out_dir / f"epoch_{epoch + 1:04d}",
                model,
                config_hash=config_hash,
                step=step,
                epoch=epoch + 1,
                mask_id=masks.mask_id(),
                lr=lr,
            )
            result.checkpoints.append(ckpt)
        if done:
            break

    result.steps = step
    return result


def read_train_log(path: Path) -> list[dict[str, float]]:
    rows = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        step, epoch, value, lr, wall = line.split("\t")
        rows.append({"step": int(step), "epoch": int(epoch), "loss": float(value), "lr": float(lr), "wall_time": float(wall)})
    return rows
