"""Recurrent refine cell and its unrolling over time.

One cell step fuses the coarse frame, forward and backward flow embeddings, the
diversity embedding and the previous hidden state (taken as is) into a new hidden
state, from which the head emits one refined frame. The same cell serves both
views.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..amplifier import DiversityBundle
from ..errors import ValidationError
from ..flow.field import FlowField
from ..sci.cube import VideoCube
from ..specs import AblationFlags, RefineConfig
from .layers import ConvChain, LayerSpec, ResBlock, conv, init_weights


FlowPair = tuple[torch.Tensor, torch.Tensor]


def _five_layer(cin: int, c: int) -> list[LayerSpec]:
    return [(cin, c, (5, 5), 1), (c, c, (1, 1), 1), (c, c, (3, 3), 1), (c, c, (1, 1), 1), (c, c, (3, 3), 1)]


def _three_layer(cin: int, c: int) -> list[LayerSpec]:
    return [(cin, c, (5, 5), 1), (c, c, (3, 3), 1), (c, c, (1, 1), 1)]


class RefineCell(nn.Module):
    def __init__(self, cfg: RefineConfig | None = None):
        super().__init__()
        cfg = cfg or RefineConfig()
        self.cfg = cfg
        w = cfg.widths()
        fx, ff, fd, fu = w["frame"], w["flow"], w["diversity"], w["fusion"]
        t0, t1 = w["fusion_tail"]
        hid = w["hidden"]
        h = w["head"]
        s = cfg.leaky_slope
        self.slope = s
        self.hidden_width = hid

        self.embed_frame = ConvChain(_five_layer(1, fx), slope=s)
        self.embed_forward = ConvChain(_three_layer(2, ff), slope=s)
        self.embed_backward = ConvChain(_three_layer(2, ff), slope=s)
        self.embed_diversity = ConvChain(_five_layer(4, fd), slope=s)
        self.fuse_entry = conv(fx + 2 * ff + fd + hid, fu, 1)
        self.fuse_blocks = nn.Sequential(*[ResBlock(fu, s) for _ in range(cfg.fusion_blocks)])
        self.fuse_tail = ConvChain([(fu, t0, (1, 3), 1), (t0, t1, (3, 1), 1), (t1, hid, (1, 3), 1)], slope=s)
        self.head = ConvChain(
            [
                (hid, h[0], (3, 3), 1),
                (h[0], h[1], (1, 1), 1),
                (h[1], h[2], (3, 3), 1),
                (h[2], h[3], (1, 1), 1),
                (h[3], h[4], (3, 3), 1),
                (h[4], 1, (1, 1), 1),
            ],
            slope=s,
            linear_last=True,
        )
        init_weights(self, s)

    @property
    def concat_width(self) -> int:
        return self.fuse_entry.in_channels

    def forward(
        self,
        x_prev: torch.Tensor,
        f_fwd: torch.Tensor,
        f_bwd: torch.Tensor,
        d: torch.Tensor,
        h_prev: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        z = torch.cat(
            [self.embed_frame(x_prev), self.embed_forward(f_fwd), self.embed_backward(f_bwd), self.embed_diversity(d), h_prev],
            dim=1,
        )
        z = nn.functional.leaky_relu(self.fuse_entry(z), self.slope)
        h_out = self.fuse_tail(self.fuse_blocks(z))
        return self.head(h_out), h_out


def _expect(t: torch.Tensor, channels: int, spatial: tuple[int, ...], name: str) -> None:
    if t.ndim != 4 or t.shape[1] != channels or tuple(t.shape[2:]) != spatial:
        raise ValidationError(f"{name} must be (N, {channels}, {spatial[0]}, {spatial[1]}), got {tuple(t.shape)}")


def cell_step(
    weights: RefineCell,
    x_prev: torch.Tensor,
    f_fwd: torch.Tensor,
    f_bwd: torch.Tensor,
    d: torch.Tensor,
    h_prev: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One recurrence step; returns (frame (N,1,H,W), hidden (N,c_h,H,W))."""
    spatial = tuple(x_prev.shape[2:])
    if h_prev is None:
        h_prev = x_prev.new_zeros((x_prev.shape[0], weights.hidden_width, *spatial))
    _expect(x_prev, 1, spatial, "frame")
    _expect(f_fwd, 2, spatial, "forward flow")
    _expect(f_bwd, 2, spatial, "backward flow")
    _expect(d, 4, spatial, "diversity stack")
    _expect(h_prev, weights.hidden_width, spatial, "hidden state")
    return weights(x_prev, f_fwd, f_bwd, d, h_prev)


def refine_view(
    weights: RefineCell,
    coarse: torch.Tensor,
    flows: FlowPair,
    d: torch.Tensor,
    flags: AblationFlags | None = None,
) -> torch.Tensor:
    """Unroll the cell over one view.

    `coarse` is (N, B, H, W); `flows` holds forward and backward stacks of shape
    (N, B-1, 2, H, W). Frame 1 comes from an extra step fed the zero forward flow
    and F(2→1); its hidden output is dropped so frame 2 starts from H = 0.
    """
    flags = flags or AblationFlags()
    n, frames, rows, cols = coarse.shape
    if frames < 2:
        raise ValidationError(f"Refinement needs at least 2 frames, got {frames}")
    fwd, bwd = flows
    if fwd.shape != (n, frames - 1, 2, rows, cols) or bwd.shape != fwd.shape:
        raise ValidationError(f"Flow stacks must be {(n, frames - 1, 2, rows, cols)}, got {tuple(fwd.shape)} / {tuple(bwd.shape)}")
    if flags.no_flow:
        fwd, bwd = torch.zeros_like(fwd), torch.zeros_like(bwd)
    elif flags.no_backward:
        bwd = torch.zeros_like(bwd)
    if flags.no_diversity:
        d = torch.zeros_like(d)

    zero_flow = coarse.new_zeros((n, 2, rows, cols))
    h0 = coarse.new_zeros((n, weights.hidden_width, rows, cols))
    first, _ = cell_step(weights, coarse[:, 0:1], zero_flow, bwd[:, 0], d, h0)
    outs = [first]
    h = h0
    for t in range(frames - 1):
        x_next, h = cell_step(weights, coarse[:, t : t + 1], fwd[:, t], bwd[:, t], d, h)
        outs.append(x_next)
    return torch.cat(outs, dim=1)


def refine_views(
    weights: RefineCell,
    coarse: Sequence[torch.Tensor],
    flows: Sequence[FlowPair],
    d: torch.Tensor,
    flags: AblationFlags | None = None,
) -> list[torch.Tensor]:
    flags = flags or AblationFlags()
    if flags.no_refine:
        return list(coarse)
    return [refine_view(weights, c, f, d, flags) for c, f in zip(coarse, flows)]


def flow_stack(fields: Sequence[FlowField]) -> torch.Tensor:
    """List of B-1 fields -> (1, B-1, 2, H, W) float32 tensor."""
    return torch.from_numpy(np.stack([f.as_array() for f in fields], axis=0).astype(np.float32))[None]


def refine(
    weights: RefineCell,
    x1: VideoCube,
    x2: VideoCube | None,
    flows: Sequence[tuple[Sequence[FlowField], Sequence[FlowField]]],
    bundle: DiversityBundle,
    flags: AblationFlags | None = None,
) -> tuple[VideoCube, VideoCube | None]:
    """Inference over numpy inputs; views share `weights`."""
    flags = flags or AblationFlags()
    cubes = [x1] if x2 is None else [x1, x2]
    if flags.no_refine:
        return x1, x2
    if len(flows) != len(cubes):
        raise ValidationError(f"Need flows for {len(cubes)} view(s), got {len(flows)}")
    coarse = [torch.from_numpy(c.data.astype(np.float32))[None] for c in cubes]
    pairs = [(flow_stack(f), flow_stack(b)) for f, b in flows]
    d = torch.from_numpy(bundle.diversity_stack().astype(np.float32))[None]
    with torch.no_grad():
        out = refine_views(weights, coarse, pairs, d, flags)
    refined = [o[0].double().numpy() for o in out]
    if x2 is None:
        return VideoCube(refined[0], x1.view_id), None
    return VideoCube(refined[0], 1), VideoCube(refined[1], 2)
