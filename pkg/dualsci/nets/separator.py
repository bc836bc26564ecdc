from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..amplifier import DiversityBundle
from ..errors import ValidationError
from ..sci.cube import VideoCube
from ..sci.masks import MaskSet
from ..specs import SeparatorConfig
from .layers import ConvChain, ResBlock, conv, init_weights


DIVERSITY_CHANNELS = 5  # Ȳ, D1, D2, D3, D4


def input_channels(frames: int, *, views: int = 2, shared: bool = False, diversity: bool = True) -> int:
    """Channel count of one separator input stack."""
    head = DIVERSITY_CHANNELS if diversity and views == 2 else 1
    return head + (2 * frames if shared else frames)


def _modulated(ybar: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ybar[None, :, :] * c.astype(np.float64)


def assemble_inputs(
    bundle: DiversityBundle,
    masks: MaskSet,
    *,
    views: int = 2,
    diversity: bool = True,
) -> list[np.ndarray]:
    """Per-view stacks [Ȳ, D1..D4, Ȳ⊙Ck¹..Ȳ⊙Ckᴮ], channel-first.

    Without diversity (or with one view) the D channels are dropped.
    """
    if bundle.ybar.shape != masks.spatial_shape:
        raise ValidationError(f"Bundle shape {bundle.ybar.shape} does not match mask shape {masks.spatial_shape}")
    head = [bundle.ybar[None]]
    if diversity and views == 2:
        head.append(bundle.diversity_stack())
    stacks = [np.concatenate(head + [_modulated(bundle.ybar, masks.c1)], axis=0)]
    if views == 2:
        stacks.append(np.concatenate(head + [_modulated(bundle.ybar, masks.c2)], axis=0))
    return stacks


def assemble_single_branch_input(bundle: DiversityBundle, masks: MaskSet, *, diversity: bool = True) -> np.ndarray:
    """One stack feeding a shared branch: [Ȳ, D1..D4, Ȳ⊙C1..., Ȳ⊙C2...]."""
    if bundle.ybar.shape != masks.spatial_shape:
        raise ValidationError(f"Bundle shape {bundle.ybar.shape} does not match mask shape {masks.spatial_shape}")
    head = [bundle.ybar[None]]
    if diversity:
        head.append(bundle.diversity_stack())
    return np.concatenate(head + [_modulated(bundle.ybar, masks.c1), _modulated(bundle.ybar, masks.c2)], axis=0)


class SeparatorBranch(nn.Module):
    def __init__(self, in_channels: int, out_frames: int, cfg: SeparatorConfig):
        super().__init__()
        w = cfg.widths()
        s1, res, s3 = w["stage1"], w["res"], w["stage3"]
        slope = cfg.leaky_slope
        self.slope = slope
        self.in_channels = in_channels
        self.out_frames = out_frames
        self.stage1 = ConvChain(
            [
                (in_channels, s1[0], (5, 5), 1),
                (s1[0], s1[1], (3, 3), 1),
                (s1[1], s1[2], (1, 1), 1),
                (s1[2], s1[3], (3, 3), 2),
            ],
            slope=slope,
        )
        self.entry = conv(s1[3], res, 1) if s1[3] != res else None
        self.stage2 = nn.Sequential(*[ResBlock(res, slope) for _ in range(cfg.res_blocks)])
        self.up = nn.ConvTranspose2d(res + s1[3], s3[0], 3, stride=2, padding=1, output_padding=1)
        self.stage3 = ConvChain(
            [(s3[0], s3[1], (1, 1), 1), (s3[1], s3[2], (3, 3), 1), (s3[2], out_frames, (1, 1), 1)],
            slope=slope,
            linear_last=True,
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f1 = self.stage1(x)
        h = f1
        if self.entry is not None:
            h = nn.functional.leaky_relu(self.entry(h), self.slope)
        f2 = self.stage2(h)
        u = nn.functional.leaky_relu(self.up(torch.cat([f2, f1], dim=1)), self.slope)
        return self.stage3(u)


class Separator(nn.Module):
    """Branches keyed `view1`/`view2` (own parameters each) or a single `shared` branch."""

    def __init__(self, cfg: SeparatorConfig, frames: int, *, views: int = 2, diversity: bool = True):
        super().__init__()
        if views == 1 and cfg.branch_mode == "single":
            raise ValidationError("The shared-branch separator only exists for dual-view capture")
        self.cfg = cfg
        self.frames = frames
        self.views = views
        self.shared = views == 2 and cfg.branch_mode == "single"
        self.diversity = diversity and views == 2
        if self.shared:
            cin = input_channels(frames, views=2, shared=True, diversity=self.diversity)
            self.branches = nn.ModuleDict({"shared": SeparatorBranch(cin, 2 * frames, cfg)})
        else:
            cin = input_channels(frames, views=views, diversity=self.diversity)
            self.branches = nn.ModuleDict(
                {f"view{k + 1}": SeparatorBranch(cin, frames, cfg) for k in range(views)}
            )
        init_weights(self, cfg.leaky_slope)

    @property
    def in_channels(self) -> int:
        return next(iter(self.branches.values())).in_channels

    def forward(self, inputs: Sequence[torch.Tensor]) -> list[torch.Tensor]:
        """Per-view input stacks (N, C, H, W) -> per-view coarse cubes (N, B, H, W)."""
        if self.shared:
            out = self.branches["shared"](inputs[0])
            return [out[:, : self.frames], out[:, self.frames :]]
        if len(inputs) != self.views:
            raise ValidationError(f"Expected {self.views} input stacks, got {len(inputs)}")
        return [self.branches[f"view{k + 1}"](x) for k, x in enumerate(inputs)]


def _check_stack(stack: np.ndarray, separator: Separator) -> torch.Tensor:
    if stack.ndim != 3:
        raise ValidationError(f"Separator input must be (channels, rows, cols), got {stack.shape}")
    if stack.shape[0] != separator.in_channels:
        raise ValidationError(
            f"Separator weights expect {separator.in_channels} input channels, got {stack.shape[0]}"
        )
    if stack.shape[1] % 2 or stack.shape[2] % 2:
        raise ValidationError(f"Rows and cols must be even for the stride-2 stage, got {stack.shape[1:]}")
    param = next(separator.parameters())
    return torch.as_tensor(np.ascontiguousarray(stack), dtype=param.dtype)[None]


def separate(
    inputs: Sequence[np.ndarray],
    weights: Separator,
    config: SeparatorConfig | None = None,
) -> tuple[VideoCube, VideoCube | None]:
    if weights.shared:
        raise ValidationError("This separator has one shared branch; use separate_single_branch")
    if config is not None and config.widths() != weights.cfg.widths():
        raise ValidationError("Separator weights were built for a different width configuration")
    tensors = [_check_stack(s, weights) for s in inputs]
    with torch.no_grad():
        outs = weights(tensors)
    cubes = [o[0].double().numpy() for o in outs]
    if weights.views == 1:
        return VideoCube(cubes[0], "single"), None
    return VideoCube(cubes[0], 1), VideoCube(cubes[1], 2)


def separate_single_branch(
    stack: np.ndarray,
    weights: Separator,
    config: SeparatorConfig | None = None,
) -> np.ndarray:
    """Both views from one branch, as a 2B-frame cube."""
    if not weights.shared or (config is not None and config.branch_mode != "single"):
        raise ValidationError("separate_single_branch needs a separator in single-branch mode")
    x = _check_stack(stack, weights)
    with torch.no_grad():
        out = weights.branches["shared"](x)
    return out[0].double().numpy()
