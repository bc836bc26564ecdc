"""The end-to-end reconstructor: amplifier inputs -> separator -> flow -> refine."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..amplifier import DiversityBundle
from ..errors import ValidationError
from ..flow.adapter import FlowRegressor, load_flow_adapter
from ..flow.estimators import FlowContract, extract_bidirectional, fine_tune_hook
from ..flow.field import FlowField
from ..sci.cube import VideoCube
from ..sci.masks import MaskSet
from ..specs import PipelineConfig
from .refine import FlowPair, RefineCell, refine_views
from .separator import Separator
from .weights import WeightStore


@dataclass
class ModelOutput:
    coarse: list[torch.Tensor]
    refined: list[torch.Tensor]
    flows: list[FlowPair]


class DualViewModel(nn.Module):
    def __init__(self, cfg: PipelineConfig, flow_module: FlowRegressor | None = None):
        super().__init__()
        self.cfg = cfg
        self.frames = cfg.geometry.frames
        self.views = cfg.views
        self.flags = cfg.ablation
        # mask set the weights were trained against; empty until trained or loaded
        self.mask_id = ""
        self.separator = Separator(cfg.separator, self.frames, views=self.views, diversity=cfg.amplifier_enabled)
        self.cell = None if self.flags.no_refine else RefineCell(cfg.refine)

        spec = cfg.flow
        if self.flags.no_joint_training and spec.fine_tunable:
            spec = spec.model_copy(update={"fine_tunable": False})
        if spec.kind == "learned-adapter" and flow_module is None:
            flow_module = load_flow_adapter(spec)
        self.flow_spec = spec
        self.flow_contract: FlowContract = fine_tune_hook(spec, flow_module)
        self.flow = self.flow_contract.module

    def trainable_parameters(self) -> list[nn.Parameter]:
        """Every trainable tensor exactly once (the refine cell serves both views)."""
        seen: set[int] = set()
        out: list[nn.Parameter] = []
        for p in self.parameters():
            if p.requires_grad and id(p) not in seen:
                seen.add(id(p))
                out.append(p)
        return out

    def modules_by_namespace(self) -> dict[str, nn.Module]:
        mods: dict[str, nn.Module] = {"separator": self.separator}
        if self.cell is not None:
            mods["refine"] = self.cell
        if self.flow is not None:
            mods["flow"] = self.flow
        return mods

    def separator_inputs(self, net_in: torch.Tensor, masks: torch.Tensor) -> list[torch.Tensor]:
        ybar, d = net_in[:, :1], net_in[:, 1:5]
        head = [ybar, d] if self.separator.diversity else [ybar]
        modulated = [ybar * masks[k][None] for k in range(self.views)]
        if self.separator.shared:
            return [torch.cat(head + modulated, dim=1)]
        return [torch.cat(head + [m], dim=1) for m in modulated]

    def _classical_flows(self, coarse: torch.Tensor) -> FlowPair:
        fwd, bwd = [], []
        arr = coarse.detach().double().cpu().numpy()
        for sample in arr:
            f, b = extract_bidirectional(self.flow_spec, sample)
            fwd.append(np.stack([x.as_array() for x in f]))
            bwd.append(np.stack([x.as_array() for x in b]))
        return (
            torch.from_numpy(np.stack(fwd).astype(np.float32)).to(coarse.dtype),
            torch.from_numpy(np.stack(bwd).astype(np.float32)).to(coarse.dtype),
        )

    def _learned_flows(self, coarse: torch.Tensor) -> FlowPair:
        n, frames, rows, cols = coarse.shape
        x = coarse.clamp(0.0, 1.0)
        if not self.flow_contract.differentiable:
            x = x.detach()
        a = x[:, :-1].reshape(n * (frames - 1), 1, rows, cols)
        b = x[:, 1:].reshape(n * (frames - 1), 1, rows, cols)
        with torch.set_grad_enabled(self.flow_contract.differentiable and torch.is_grad_enabled()):
            fwd = self.flow(a, b).reshape(n, frames - 1, 2, rows, cols)
            bwd = self.flow(b, a).reshape(n, frames - 1, 2, rows, cols)
        return fwd, bwd

    def flows_for(self, coarse: torch.Tensor) -> FlowPair:
        n, frames, rows, cols = coarse.shape
        if self.flags.no_flow:
            z = coarse.new_zeros((n, frames - 1, 2, rows, cols))
            return z, z.clone()
        if self.flow is not None:
            return self._learned_flows(coarse)
        return self._classical_flows(coarse)

    def forward(
        self,
        net_in: torch.Tensor,
        masks: torch.Tensor,
        flows: Sequence[FlowPair] | None = None,
    ) -> ModelOutput:
        """net_in (N, 5, H, W) = [Ȳ, D1..D4]; masks (views, B, H, W).

        Passing `flows` pins the motion inputs instead of estimating them.
        """
        if net_in.ndim != 4 or net_in.shape[1] != 5:
            raise ValidationError(f"Model input must be (N, 5, H, W), got {tuple(net_in.shape)}")
        if masks.shape[:2] != (self.views, self.frames):
            raise ValidationError(f"Mask tensor must be ({self.views}, {self.frames}, H, W), got {tuple(masks.shape)}")
        coarse = self.separator(self.separator_inputs(net_in, masks))
        if self.cell is None:
            return ModelOutput(coarse=coarse, refined=list(coarse), flows=[])
        if flows is None:
            flows = [self.flows_for(c) for c in coarse]
        flows = list(flows)
        refined = refine_views(self.cell, coarse, flows, net_in[:, 1:5], self.flags)
        return ModelOutput(coarse=coarse, refined=refined, flows=flows)


def bundle_tensor(bundles: Sequence[DiversityBundle]) -> torch.Tensor:
    return torch.from_numpy(
        np.stack([np.concatenate([b.ybar[None], b.diversity_stack()], axis=0) for b in bundles]).astype(np.float32)
    )


def mask_tensor(masks: MaskSet, views: int) -> torch.Tensor:
    cube = masks.stacked(views).reshape(views, masks.frames, *masks.spatial_shape)
    return torch.from_numpy(cube.astype(np.float32))


@dataclass
class Reconstruction:
    coarse: list[VideoCube]
    refined: list[VideoCube]
    flows: list[tuple[list[FlowField], list[FlowField]]]


def _cubes(ts: Sequence[torch.Tensor], views: int) -> list[VideoCube]:
    ids = ["single"] if views == 1 else [1, 2]
    return [VideoCube(t[0].double().numpy(), ids[k]) for k, t in enumerate(ts)]  # type: ignore[arg-type]


def _fields(pair: FlowPair) -> tuple[list[FlowField], list[FlowField]]:
    fwd, bwd = pair
    f = [FlowField.from_array(fwd[0, t].double().numpy(), "forward", t) for t in range(fwd.shape[1])]
    b = [FlowField.from_array(bwd[0, t].double().numpy(), "backward", t) for t in range(bwd.shape[1])]
    return f, b


def reconstruct(model: DualViewModel, bundle: DiversityBundle, masks: MaskSet) -> Reconstruction:
    model.eval()
    with torch.no_grad():
        out = model(bundle_tensor([bundle]), mask_tensor(masks, model.views))
    return Reconstruction(
        coarse=_cubes(out.coarse, model.views),
        refined=_cubes(out.refined, model.views),
        flows=[_fields(p) for p in out.flows],
    )


def save_model(out_dir: Path, model: DualViewModel, *, config_hash: str = "", **meta: object) -> Path:
    store = WeightStore.from_modules(model.modules_by_namespace(), **meta)
    store.config_hash = config_hash
    return store.save(out_dir, seed=model.cfg.seed)


def load_model(src: Path, cfg: PipelineConfig) -> DualViewModel:
    store = WeightStore.load(src)
    flow_module = None
    if "flow" in store.namespaces() and cfg.flow.kind == "learned-adapter":
        flow_module = FlowRegressor(max_displacement=cfg.flow.max_displacement)
        store.apply_to({"flow": flow_module})
    model = DualViewModel(cfg, flow_module=flow_module)
    store.apply_to({k: v for k, v in model.modules_by_namespace().items() if k != "flow"})
    model.mask_id = str(store.meta.get("mask_id", ""))
    return model
