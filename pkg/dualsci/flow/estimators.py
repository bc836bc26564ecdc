from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..errors import UnsupportedError, ValidationError
from ..sci.cube import VideoCube
from ..specs import FlowEstimatorSpec
from .adapter import FlowRegressor, load_flow_adapter
from .field import FlowField
from .horn_schunck import horn_schunck_pyramid


@dataclass
class FlowContract:
    """What the training loop may do with the flow estimator."""

    kind: str
    differentiable: bool
    module: FlowRegressor | None = None
    parameters: list[nn.Parameter] = field(default_factory=list)

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters)


def _check_pair(frame_a: np.ndarray, frame_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValidationError(f"Flow needs two frames of equal 2-D shape, got {a.shape} and {b.shape}")
    return np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0)


def estimate(
    spec: FlowEstimatorSpec,
    frame_a: np.ndarray,
    frame_b: np.ndarray,
    *,
    adapter: FlowRegressor | None = None,
    direction: str = "forward",
    pair_index: int = 0,
) -> FlowField:
    """Displacement (u, v) with frame_a(x) ≈ frame_b(x + (u, v))."""
    a, b = _check_pair(frame_a, frame_b)
    if spec.kind == "classical":
        u, v = horn_schunck_pyramid(
            a,
            b,
            levels=spec.levels,
            alpha=spec.regularization,
            iterations=spec.iterations,
            max_displacement=spec.max_displacement,
        )
        return FlowField(u.astype(np.float32), v.astype(np.float32), direction, pair_index)  # type: ignore[arg-type]

    module = adapter if adapter is not None else load_flow_adapter(spec)
    with torch.no_grad():
        ta = torch.from_numpy(a.astype(np.float32))[None, None]
        tb = torch.from_numpy(b.astype(np.float32))[None, None]
        uv = module(ta, tb)[0].numpy()
    return FlowField.from_array(uv, direction, pair_index)  # type: ignore[arg-type]


def extract_bidirectional(
    spec: FlowEstimatorSpec,
    video: VideoCube | np.ndarray,
    *,
    adapter: FlowRegressor | None = None,
) -> tuple[list[FlowField], list[FlowField]]:
    """Forward (t -> t+1) and backward (t+1 -> t) fields for every adjacent pair of one view."""
    frames = video.data if isinstance(video, VideoCube) else np.asarray(video)
    if frames.ndim != 3:
        raise ValidationError(f"Expected a (frames, rows, cols) stack, got {frames.shape}")
    if frames.shape[0] < 2:
        raise ValidationError(f"Bidirectional flow needs at least 2 frames, got {frames.shape[0]}")
    if spec.kind == "learned-adapter" and adapter is None:
        adapter = load_flow_adapter(spec)

    forward: list[FlowField] = []
    backward: list[FlowField] = []
    for t in range(frames.shape[0] - 1):
        forward.append(estimate(spec, frames[t], frames[t + 1], adapter=adapter, direction="forward", pair_index=t))
        backward.append(estimate(spec, frames[t + 1], frames[t], adapter=adapter, direction="backward", pair_index=t))
    return forward, backward


def fine_tune_hook(spec: FlowEstimatorSpec, adapter: FlowRegressor | None = None) -> FlowContract:
    if spec.kind == "classical":
        if spec.fine_tunable:
            raise UnsupportedError("The classical flow estimator has no parameters to fine-tune")
        return FlowContract(kind="classical", differentiable=False)

    module = adapter if adapter is not None else load_flow_adapter(spec)
    module.requires_grad_(spec.fine_tunable)
    params = list(module.parameters()) if spec.fine_tunable else []
    return FlowContract(kind=spec.kind, differentiable=spec.fine_tunable, module=module, parameters=params)
