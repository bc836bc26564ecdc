"""Slot for a learned flow estimator.

Any pretrained network can be plugged in as long as its weights are exported as a
`checkpoint` (or `flow-weights`) container whose tensor names match
`FlowRegressor.state_dict()`, optionally prefixed `flow.`.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..container import load_container, save_container
from ..errors import ValidationError
from ..nets.layers import ConvChain, init_weights
from ..specs import FlowEstimatorSpec


PREFIX = "flow."


class FlowRegressor(nn.Module):
    def __init__(self, width: int = 16, max_displacement: float = 32.0, slope: float = 0.01):
        super().__init__()
        self.max_displacement = float(max_displacement)
        self.body = ConvChain(
            [(2, width, (5, 5), 1), (width, width, (3, 3), 1), (width, width, (3, 3), 1), (width, 2, (3, 3), 1)],
            slope=slope,
            linear_last=True,
        )
        init_weights(self, slope)

    def forward(self, frame_a: torch.Tensor, frame_b: torch.Tensor) -> torch.Tensor:
        """(N, 1, H, W) pairs -> (N, 2, H, W) flow (u, v), bounded by the max displacement."""
        out = self.body(torch.cat([frame_a, frame_b], dim=1))
        m = self.max_displacement
        return m * torch.tanh(out / m)


def save_flow_adapter(out_dir: Path, module: FlowRegressor, *, config_hash: str = "") -> Path:
    tensors = {PREFIX + k: v.detach().cpu().numpy().astype(np.float32) for k, v in module.state_dict().items()}
    meta = {"max_displacement": module.max_displacement, "width": module.body.convs[0].out_channels}
    return save_container(out_dir, tensors, kind="flow-weights", meta=meta, config_hash=config_hash)


def load_flow_adapter(spec: FlowEstimatorSpec) -> FlowRegressor:
    if spec.weights_path is None:
        raise ValidationError("The learned flow adapter needs flow.weights_path")
    path = Path(spec.weights_path)
    if not path.exists():
        raise ValidationError(f"Missing flow weight file: {path}")
    box = load_container(path)
    if box.kind not in ("flow-weights", "checkpoint"):
        raise ValidationError(f"{path} holds a '{box.kind}' container, not flow weights")

    state = {k[len(PREFIX):]: torch.from_numpy(v) for k, v in box.tensors.items() if k.startswith(PREFIX)}
    if not state:
        raise ValidationError(f"No '{PREFIX}*' tensors in {path}")
    width = int(box.meta.get("width", state["body.convs.0.weight"].shape[0]))
    module = FlowRegressor(width=width, max_displacement=spec.max_displacement)
    try:
        missing, unexpected = module.load_state_dict(state, strict=False)
    except RuntimeError as exc:
        raise ValidationError(f"Flow weights do not fit the adapter: {exc}") from exc
    if missing or unexpected:
        raise ValidationError(f"Flow weights do not fit the adapter: missing={missing} unexpected={unexpected}")
    module.requires_grad_(spec.fine_tunable)
    return module
