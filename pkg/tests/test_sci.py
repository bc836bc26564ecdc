from pathlib import Path

import numpy as np
import pytest

from dualsci.errors import ValidationError
from dualsci.sci.cube import VideoCube
from dualsci.sci.encoder import encode, encode_stacked, normalize_and_add_noise
from dualsci.sci.masks import MaskSet, generate_masks
from dualsci.sci.operator import SensingOperator, adjoint_apply, forward_apply, phi_phit_diagonal
from dualsci.sci.storage import load_masks, load_measurement, load_scene, save_masks, save_measurement, save_scene


def _random_instance(rng: np.random.Generator, views: int) -> tuple[MaskSet, np.ndarray]:
    rows, cols = (int(s) for s in rng.integers(2, 17, size=2))
    frames = int(rng.choice([1, 2, 6]))
    c1 = (rng.random((frames, rows, cols)) < 0.5).astype(np.uint8)
    c2 = (rng.random((frames, rows, cols)) < 0.5).astype(np.uint8)
    x = rng.random((views * frames, rows, cols))
    return MaskSet(c1, c2), x


def _loop_forward(x: np.ndarray, cube: np.ndarray) -> np.ndarray:
    frames, rows, cols = x.shape
    y = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for b in range(frames):
                acc += x[b, i, j] * cube[b, i, j]
            y[i, j] = acc
    return y


def test_forward_and_adjoint_match_scalar_loops() -> None:
    rng = np.random.default_rng(0)
    for n in range(100):
        views = 1 if n % 4 == 0 else 2
        masks, x = _random_instance(rng, views)
        op = SensingOperator(masks, views)
        cube = masks.stacked(views)
        y = forward_apply(op, x)
        assert np.max(np.abs(y - _loop_forward(x, cube))) < 1e-6

        r = rng.random(masks.spatial_shape)
        back = adjoint_apply(op, r)
        expected = np.zeros_like(cube)
        for b in range(cube.shape[0]):
            for i in range(cube.shape[1]):
                for j in range(cube.shape[2]):
                    expected[b, i, j] = r[i, j] * cube[b, i, j]
        assert np.max(np.abs(back - expected)) < 1e-6


def test_encode_matches_forward_operator() -> None:
    rng = np.random.default_rng(1)
    for _ in range(20):
        masks, x = _random_instance(rng, 2)
        b = masks.frames
        meas = encode(VideoCube(x[:b], 1), VideoCube(x[b:], 2), masks)
        ref = _loop_forward(x, masks.stacked(2))
        assert np.max(np.abs(meas.y - ref)) < 1e-5
        assert meas.meta.views == 2
        assert meas.meta.mask_id == masks.mask_id()


def test_adjoint_identity() -> None:
    rng = np.random.default_rng(2)
    for _ in range(100):
        masks, x = _random_instance(rng, 2)
        op = SensingOperator(masks, 2)
        r = rng.random(masks.spatial_shape)
        lhs = float(np.sum(forward_apply(op, x) * r))
        rhs = float(np.sum(x * adjoint_apply(op, r)))
        assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), 1e-12)


def test_phi_phit_is_mask_count() -> None:
    masks = generate_masks(8, 8, 3, seed=4)
    diag = phi_phit_diagonal(SensingOperator(masks, 2))
    assert np.array_equal(diag, masks.c1.sum(axis=0) + masks.c2.sum(axis=0))


def test_generated_masks_hold_shift_relation() -> None:
    masks = generate_masks(16, 20, 4, density=0.5, shift=(0, 10), seed=7)
    assert masks.c1.dtype == np.uint8
    assert masks.shift_relation_holds()
    assert np.array_equal(np.roll(masks.c1, 10, axis=2), masks.c2)
    assert generate_masks(16, 20, 4, seed=7).mask_id() == masks.mask_id()
    assert generate_masks(16, 20, 4, seed=8).mask_id() != masks.mask_id()


@pytest.mark.parametrize("shift", [(0, 0), (1, 1), (0, -1)])
def test_small_shift_is_rejected(shift: tuple[int, int]) -> None:
    with pytest.raises(ValidationError):
        generate_masks(8, 8, 2, shift=shift)


def test_encode_rejects_shape_mismatch_and_out_of_range() -> None:
    masks = generate_masks(8, 8, 2, seed=0)
    with pytest.raises(ValidationError):
        encode(VideoCube(np.zeros((3, 8, 8)), 1), VideoCube(np.zeros((3, 8, 8)), 2), masks)
    with pytest.raises(ValidationError):
        encode(VideoCube(np.full((2, 8, 8), 1.5), 1), VideoCube(np.zeros((2, 8, 8)), 2), masks)


def test_single_view_encode_uses_first_mask_stack() -> None:
    rng = np.random.default_rng(3)
    masks = generate_masks(6, 6, 2, seed=1)
    x = rng.random((2, 6, 6))
    meas = encode(VideoCube(x, "single"), None, masks)
    assert meas.meta.views == 1
    assert np.allclose(meas.y, (x * masks.c1).sum(axis=0), atol=1e-6)


def test_stacked_encode_agrees_with_pair_encode() -> None:
    rng = np.random.default_rng(5)
    masks = generate_masks(10, 12, 3, seed=2)
    x = rng.random((6, 10, 12))
    a = encode(VideoCube(x[:3], 1), VideoCube(x[3:], 2), masks)
    b = encode_stacked(x, masks.stacked(2), masks.mask_id())
    assert np.array_equal(a.y, b.y)


def test_noise_is_added_on_the_normalized_scale() -> None:
    rng = np.random.default_rng(6)
    masks = generate_masks(256, 256, 2, seed=3)
    meas = encode(VideoCube(rng.random((2, 256, 256)), 1), VideoCube(rng.random((2, 256, 256)), 2), masks)
    clean = normalize_and_add_noise(meas, 0.0)
    assert clean.meta.normalized and abs(float(clean.y.max()) - 1.0) < 1e-6
    noisy = normalize_and_add_noise(meas, 0.05, seed=9)
    assert abs(float(np.std(noisy.y.astype(np.float64) - clean.y)) - 0.05) < 0.005
    assert abs(float(np.mean(noisy.y.astype(np.float64) - clean.y))) < 0.005
    assert np.allclose(noisy.denormalized().y / noisy.meta.scale, noisy.y, atol=1e-6)
    assert np.array_equal(noisy.y, normalize_and_add_noise(meas, 0.05, seed=9).y)
    with pytest.raises(ValidationError):
        normalize_and_add_noise(meas, -0.1)


def test_storage_round_trips_are_bit_exact(tmp_path: Path) -> None:
    rng = np.random.default_rng(7)
    masks = generate_masks(12, 12, 2, seed=5)
    x1 = VideoCube(rng.random((2, 12, 12)).astype(np.float32).astype(np.float64), 1)
    x2 = VideoCube(rng.random((2, 12, 12)).astype(np.float32).astype(np.float64), 2)

    save_masks(tmp_path / "masks", masks)
    back = load_masks(tmp_path / "masks")
    assert np.array_equal(back.c1, masks.c1) and np.array_equal(back.c2, masks.c2)
    assert back.mask_id() == masks.mask_id() and back.shift == masks.shift

    save_scene(tmp_path / "scene", [x1, x2])
    views = load_scene(tmp_path / "scene")
    assert np.array_equal(views[0].data, x1.data) and np.array_equal(views[1].data, x2.data)

    meas = encode(x1, x2, masks)
    save_measurement(tmp_path / "meas", meas)
    loaded, meta = load_measurement(tmp_path / "meas")
    assert np.array_equal(loaded.y, meas.y)
    assert loaded.meta == meas.meta
    assert meta["mask_id"] == masks.mask_id()


@pytest.mark.parametrize("density", [0.3, 0.5, 0.7])
def test_mask_density_matches_the_request(density: float) -> None:
    masks = generate_masks(64, 64, 10, density=density, seed=14)
    assert abs(float(masks.c1.mean()) - density) < 0.05
    assert abs(float(masks.c2.mean()) - density) < 0.05
