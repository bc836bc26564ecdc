import numpy as np
import pytest
import torch
import torch.nn.functional as F

from dualsci.amplifier import build_bundle
from dualsci.errors import ValidationError
from dualsci.flow.field import FlowField
from dualsci.nets import RefineCell, cell_step, refine, refine_view, refine_views
from dualsci.nets.layers import zero_parameters
from dualsci.sci.cube import VideoCube
from dualsci.sci.masks import generate_masks
from dualsci.specs import AblationFlags, RefineConfig


SMALL = RefineConfig(scale=0.25)


def _inputs(n: int = 1, frames: int = 4, size: int = 8, seed: int = 0):
    g = torch.Generator().manual_seed(seed)
    coarse = torch.rand(n, frames, size, size, generator=g)
    fwd = torch.randn(n, frames - 1, 2, size, size, generator=g)
    bwd = torch.randn(n, frames - 1, 2, size, size, generator=g)
    d = torch.rand(n, 4, size, size, generator=g)
    return coarse, (fwd, bwd), d


def test_cell_step_shapes() -> None:
    cell = RefineCell(SMALL)
    x = torch.rand(2, 1, 8, 8)
    f = torch.zeros(2, 2, 8, 8)
    d = torch.zeros(2, 4, 8, 8)
    frame, hidden = cell_step(cell, x, f, f, d)
    assert frame.shape == (2, 1, 8, 8)
    assert hidden.shape == (2, cell.hidden_width, 8, 8)
    with pytest.raises(ValidationError):
        cell_step(cell, x, f, f, torch.zeros(2, 3, 8, 8))


def test_concat_width_counts_all_embeddings() -> None:
    cell = RefineCell(RefineConfig())
    assert cell.concat_width == 20 + 40 + 40 + 20 + 10


@pytest.mark.parametrize("frames", [2, 4, 6])
def test_refine_view_keeps_shape(frames: int) -> None:
    cell = RefineCell(SMALL)
    coarse, flows, d = _inputs(frames=frames)
    with torch.no_grad():
        out = refine_view(cell, coarse, flows, d)
    assert out.shape == coarse.shape


def test_zero_weights_give_zero_output() -> None:
    cell = RefineCell(SMALL)
    zero_parameters(cell)
    coarse, flows, d = _inputs()
    with torch.no_grad():
        out = refine_view(cell, coarse, flows, d)
    assert not out.any()


def test_later_inputs_do_not_reach_earlier_frames() -> None:
    cell = RefineCell(SMALL)
    coarse, (fwd, bwd), d = _inputs(frames=5)
    with torch.no_grad():
        base = refine_view(cell, coarse, (fwd, bwd), d)
        bumped = coarse.clone()
        bumped[:, 2] += 0.5
        f2, b2 = fwd.clone(), bwd.clone()
        f2[:, 3] += 1.0
        b2[:, 3] += 1.0
        out = refine_view(cell, bumped, (f2, b2), d)
    # frame k+1 is produced from coarse frame k and pair k
    assert torch.equal(out[:, :3], base[:, :3])
    assert not torch.equal(out[:, 3], base[:, 3])


def test_first_frame_uses_zero_forward_flow() -> None:
    cell = RefineCell(SMALL)
    coarse, (fwd, bwd), d = _inputs()
    with torch.no_grad():
        base = refine_view(cell, coarse, (fwd, bwd), d)
        f2 = fwd.clone()
        f2[:, 0] += 3.0
        out = refine_view(cell, coarse, (f2, bwd), d)
    assert torch.equal(out[:, 0], base[:, 0])
    assert not torch.equal(out[:, 1], base[:, 1])


def test_views_share_one_cell() -> None:
    cell = RefineCell(SMALL)
    coarse, flows, d = _inputs()
    with torch.no_grad():
        a, b = refine_views(cell, [coarse, coarse.clone()], [flows, flows], d)
    assert torch.equal(a, b)


def test_ablation_flags_zero_their_inputs() -> None:
    cell = RefineCell(SMALL)
    coarse, (fwd, bwd), d = _inputs()
    zeros = (torch.zeros_like(fwd), torch.zeros_like(bwd))
    with torch.no_grad():
        no_flow = refine_view(cell, coarse, (fwd, bwd), d, AblationFlags(no_flow=True))
        assert torch.equal(no_flow, refine_view(cell, coarse, zeros, d))
        no_bwd = refine_view(cell, coarse, (fwd, bwd), d, AblationFlags(no_backward=True))
        assert torch.equal(no_bwd, refine_view(cell, coarse, (fwd, zeros[1]), d))
        no_div = refine_view(cell, coarse, (fwd, bwd), d, AblationFlags(no_diversity=True))
        assert torch.equal(no_div, refine_view(cell, coarse, (fwd, bwd), torch.zeros_like(d)))
        bypass = refine_views(cell, [coarse], [(fwd, bwd)], d, AblationFlags(no_refine=True))
    assert bypass[0] is coarse


def test_bad_flow_stack_is_rejected() -> None:
    cell = RefineCell(SMALL)
    coarse, (fwd, bwd), d = _inputs()
    with pytest.raises(ValidationError):
        refine_view(cell, coarse, (fwd[:, :2], bwd[:, :2]), d)
    with pytest.raises(ValidationError):
        refine_view(cell, coarse[:, :1], (fwd[:, :0], bwd[:, :0]), d)


def test_numpy_refine_entry_point() -> None:
    rng = np.random.default_rng(0)
    masks = generate_masks(8, 8, 3, seed=0)
    bundle = build_bundle(rng.random((8, 8)), masks)
    x1 = VideoCube(rng.random((3, 8, 8)), 1)
    x2 = VideoCube(rng.random((3, 8, 8)), 2)
    flows = [
        ([FlowField.zeros((8, 8), "forward", t) for t in range(2)], [FlowField.zeros((8, 8), "backward", t) for t in range(2)])
    ] * 2
    r1, r2 = refine(RefineCell(SMALL), x1, x2, flows, bundle)
    assert r1.shape == r2.shape == (3, 8, 8)
    same1, same2 = refine(RefineCell(SMALL), x1, x2, flows, bundle, AblationFlags(no_refine=True))
    assert same1 is x1 and same2 is x2


def _chain(chain, x: torch.Tensor) -> torch.Tensor:
    last = len(chain.convs) - 1
    for i, c in enumerate(chain.convs):
        x = F.conv2d(x, c.weight, c.bias, padding=c.padding)
        if not (chain.linear_last and i == last):
            x = F.leaky_relu(x, chain.slope)
    return x


def test_cell_step_matches_functional_oracle() -> None:
    torch.manual_seed(3)
    cell = RefineCell(SMALL)
    with torch.no_grad():
        for m in cell.modules():
            if isinstance(m, torch.nn.Conv2d):
                torch.nn.init.uniform_(m.bias, -0.1, 0.1)
    g = torch.Generator().manual_seed(4)
    x = torch.rand(1, 1, 8, 8, generator=g)
    ff = torch.randn(1, 2, 8, 8, generator=g)
    fb = torch.randn(1, 2, 8, 8, generator=g)
    d = torch.rand(1, 4, 8, 8, generator=g)
    h = torch.rand(1, cell.hidden_width, 8, 8, generator=g)

    with torch.no_grad():
        frame, hidden = cell_step(cell, x, ff, fb, d, h)

        z = torch.cat(
            [_chain(cell.embed_frame, x), _chain(cell.embed_forward, ff), _chain(cell.embed_backward, fb),
             _chain(cell.embed_diversity, d), h],
            dim=1,
        )
        e = cell.fuse_entry
        z = F.leaky_relu(F.conv2d(z, e.weight, e.bias, padding=e.padding), cell.slope)
        for block in cell.fuse_blocks:
            z = z + _chain(block.body, z)
        want_hidden = _chain(cell.fuse_tail, z)
        want_frame = _chain(cell.head, want_hidden)

    assert torch.allclose(hidden, want_hidden, atol=1e-5)
    assert torch.allclose(frame, want_frame, atol=1e-5)


def test_refine_view_unrolls_cell_steps() -> None:
    cell = RefineCell(SMALL)
    coarse, (fwd, bwd), d = _inputs(frames=4, seed=5)
    zero_flow = torch.zeros(1, 2, 8, 8)
    h0 = torch.zeros(1, cell.hidden_width, 8, 8)
    with torch.no_grad():
        out = refine_view(cell, coarse, (fwd, bwd), d)

        first, h_first = cell_step(cell, coarse[:, 0:1], zero_flow, bwd[:, 0], d, h0)
        frames, h = [first], h0
        for t in range(3):
            nxt, h = cell_step(cell, coarse[:, t : t + 1], fwd[:, t], bwd[:, t], d, h)
            frames.append(nxt)
        carried, _ = cell_step(cell, coarse[:, 0:1], fwd[:, 0], bwd[:, 0], d, h_first)

    assert torch.equal(out, torch.cat(frames, dim=1))
    # the extra first step's hidden output is dropped
    assert not torch.allclose(out[:, 1:2], carried)
