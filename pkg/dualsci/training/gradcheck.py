from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from ..nets.assembly import DualViewModel
from .loop import loss_terms


def _locate(params: Sequence[torch.Tensor], flat: int) -> tuple[int, int]:
    for j, p in enumerate(params):
        if flat < p.numel():
            return j, flat
        flat -= p.numel()
    raise IndexError(flat)


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    k: int = 8,
    eps: float = 1e-6,
    seed: int = 0,
    atol: float = 1e-10,
) -> float:
    """Max relative error |a − n| / max(|a| + |n|, atol) over `k` random scalar entries.

    `a` is the autograd derivative, `n` the central difference with step `eps`.
    """
    params = [p for p in params if p.numel()]
    total = sum(p.numel() for p in params)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(k, total), replace=False)

    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]

    worst = 0.0
    with torch.no_grad():
        for flat in picks:
            j, i = _locate(params, int(flat))
            a = float(analytic[j].reshape(-1)[i])
            view = params[j].view(-1)
            orig = float(view[i])
            view[i] = orig + eps
            up = float(loss_fn())
            view[i] = orig - eps
            down = float(loss_fn())
            view[i] = orig
            n = (up - down) / (2 * eps)
            worst = max(worst, abs(a - n) / max(abs(a) + abs(n), atol))
    return worst


def assembly_grad_check(
    model: DualViewModel,
    net_in: torch.Tensor,
    masks: torch.Tensor,
    truth: Sequence[torch.Tensor],
    *,
    k: int = 8,
    eps: float = 1e-6,
    seed: int = 0,
    alpha: float = 1.0,
) -> float:
    """Grad check of the joint loss in float64 with the motion inputs pinned.

    The classical flow estimator is a constant to autograd, so its output is
    computed once and reused for every perturbed evaluation.
    """
    model.double()
    net_in = net_in.double()
    masks = masks.double()
    truth = [t.double() for t in truth]
    with torch.no_grad():
        first = model(net_in, masks)
    flows = [(f.detach().double(), b.detach().double()) for f, b in first.flows] or None

    def fn() -> torch.Tensor:
        out = model(net_in, masks, flows=flows)
        return loss_terms(out.coarse, out.refined, truth, alpha)[0]

    return grad_check(fn, model.trainable_parameters(), k=k, eps=eps, seed=seed)


def module_grad_check(module: nn.Module, inputs: torch.Tensor, k: int = 8, eps: float = 1e-6, seed: int = 0) -> float:
    """Grad check of ½‖module(inputs)‖² for a standalone layer."""
    module.double()
    x = inputs.double()
    return grad_check(lambda: 0.5 * (module(x) ** 2).sum(), list(module.parameters()), k=k, eps=eps, seed=seed)
