from __future__ import annotations

from typing import Sequence

import torch
from torch import nn


# (in_channels, out_channels, (kh, kw), stride)
LayerSpec = tuple[int, int, tuple[int, int], int]


def conv(in_ch: int, out_ch: int, kernel: int | tuple[int, int], stride: int = 1) -> nn.Conv2d:
    kh, kw = (kernel, kernel) if isinstance(kernel, int) else kernel
    return nn.Conv2d(in_ch, out_ch, (kh, kw), stride=stride, padding=(kh // 2, kw // 2), bias=True)


def init_weights(module: nn.Module, slope: float = 0.01) -> None:
    """Fan-in scaled uniform weights, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.kaiming_uniform_(m.weight, a=slope, mode="fan_in", nonlinearity="leaky_relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def zero_parameters(module: nn.Module) -> None:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


def count_parameters(module: nn.Module, trainable_only: bool = False) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad or not trainable_only)


class ConvChain(nn.Module):
    """Plain stack of same-resolution (or strided) convolutions with leaky activations."""

    def __init__(self, layers: Sequence[LayerSpec], slope: float = 0.01, linear_last: bool = False):
        super().__init__()
        self.convs = nn.ModuleList(conv(i, o, k, s) for i, o, k, s in layers)
        self.slope = slope
        self.linear_last = linear_last

    @property
    def out_channels(self) -> int:
        return self.convs[-1].out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        last = len(self.convs) - 1
        for i, c in enumerate(self.convs):
            x = c(x)
            if not (self.linear_last and i == last):
                x = nn.functional.leaky_relu(x, self.slope)
        return x


class ResBlock(nn.Module):
    """3x3 -> 1x1 -> 3x3 with an identity shortcut."""

    def __init__(self, width: int, slope: float = 0.01):
        super().__init__()
        self.body = ConvChain(
            [(width, width, (3, 3), 1), (width, width, (1, 1), 1), (width, width, (3, 3), 1)],
            slope=slope,
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)
