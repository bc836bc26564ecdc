import numpy as np
import pytest

from dualsci.errors import NumericalError, ValidationError
from dualsci.evaluation.metrics import psnr
from dualsci.evaluation.sweeps import time_reconstruction
from dualsci.sci.cube import VideoCube
from dualsci.sci.encoder import encode
from dualsci.sci.masks import MaskSet, generate_masks
from dualsci.sci.operator import SensingOperator, adjoint_apply, phi_phit_diagonal
from dualsci.solvers import (
    GaussianDenoiser,
    IdentityDenoiser,
    TvDenoiser,
    gap_tv,
    make_denoiser,
    pnp_solve,
    tv_denoise,
    tv_norm,
)
from dualsci.specs import GapTvConfig


def _blocky_scene(rows: int, cols: int, frames: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    video = np.full((frames, rows, cols), rng.uniform(0.1, 0.3))
    for _ in range(3):
        size = int(rng.integers(rows // 6, rows // 3))
        r0, c0 = (int(v) for v in rng.integers(0, rows - size - frames * 2, size=2))
        vr, vc = (int(v) for v in rng.integers(-1, 2, size=2))
        level = rng.uniform(0.5, 0.95)
        for t in range(frames):
            r, c = max(r0 + vr * t, 0), max(c0 + vc * t, 0)
            video[t, r : r + size, c : c + size] = level
    return video


def test_disjoint_masks_are_solved_by_the_first_projection() -> None:
    rng = np.random.default_rng(0)
    x1 = rng.random((1, 12, 12))
    masks = MaskSet(np.ones((1, 12, 12), dtype=np.uint8), np.zeros((1, 12, 12), dtype=np.uint8))
    meas = encode(VideoCube(x1, 1), VideoCube(np.zeros((1, 12, 12)), 2), masks)
    seen: dict[int, np.ndarray] = {}

    def grab(k: int, x: np.ndarray) -> None:
        seen[k] = x.copy()

    gap_tv(meas, masks, GapTvConfig(iterations=3), on_projection=grab)
    first = seen[0]
    assert np.max(np.abs(first[0] - x1[0])) < 1e-6
    assert not first[1].any()


def test_projection_residual_is_machine_small() -> None:
    rng = np.random.default_rng(1)
    masks = generate_masks(24, 24, 3, seed=2)
    meas = encode(VideoCube(rng.random((3, 24, 24)), 1), VideoCube(rng.random((3, 24, 24)), 2), masks)
    _, _, state = gap_tv(meas, masks, GapTvConfig(iterations=10))
    assert len(state.projection_residuals) == 10
    assert max(state.projection_residuals) < 1e-8
    assert state.iteration == 10 and state.denoiser == "tv"
    assert state.residual_table().startswith("iteration\tresidual\tprojection_residual\n")


def test_gap_tv_is_pnp_with_the_tv_denoiser() -> None:
    rng = np.random.default_rng(2)
    masks = generate_masks(16, 16, 2, seed=3)
    meas = encode(VideoCube(rng.random((2, 16, 16)), 1), VideoCube(rng.random((2, 16, 16)), 2), masks)
    cfg = GapTvConfig(iterations=8, tv_lambda=0.05)
    a1, a2, _ = gap_tv(meas, masks, cfg)
    b1, b2, _ = pnp_solve(meas, masks, TvDenoiser(0.05, cfg.tv_iterations), cfg)
    assert np.array_equal(a1.data, b1.data) and np.array_equal(a2.data, b2.data)


def test_gap_tv_recovers_blocky_scenes() -> None:
    rows, cols, frames = 64, 64, 4
    masks = generate_masks(rows, cols, frames, seed=11)
    x1 = _blocky_scene(rows, cols, frames, seed=1)
    x2 = _blocky_scene(rows, cols, frames, seed=2)
    meas = encode(VideoCube(x1, 1), VideoCube(x2, 2), masks)

    op = SensingOperator(masks, 2)
    diag = phi_phit_diagonal(op)
    start = adjoint_apply(op, np.where(diag > 0, meas.y / np.maximum(diag, 1), 0.0))

    r1, r2, state = gap_tv(meas, masks, GapTvConfig(iterations=100))
    truth = np.concatenate([x1, x2])
    est = np.clip(np.concatenate([r1.data, r2.data]), 0, 1)
    score = psnr(truth, est)
    assert score >= 12.0
    assert score > psnr(truth, np.clip(start, 0, 1))
    assert max(state.projection_residuals) < 1e-8


def test_accelerated_variant_runs_and_keeps_data_fit() -> None:
    rng = np.random.default_rng(3)
    masks = generate_masks(16, 16, 2, seed=4)
    meas = encode(VideoCube(rng.random((2, 16, 16)), 1), VideoCube(rng.random((2, 16, 16)), 2), masks)
    _, _, state = gap_tv(meas, masks, GapTvConfig(iterations=20, accelerate=True))
    assert state.iteration == 20
    assert all(np.isfinite(state.residuals))


def test_single_view_solver() -> None:
    rng = np.random.default_rng(4)
    masks = generate_masks(16, 16, 3, seed=5)
    x = rng.random((3, 16, 16))
    meas = encode(VideoCube(x, "single"), None, masks)
    r1, r2, _ = gap_tv(meas, masks, GapTvConfig(iterations=5), views=1)
    assert r2 is None and r1.shape == (3, 16, 16)


def test_all_zero_masks_are_rejected() -> None:
    z = np.zeros((2, 8, 8), dtype=np.uint8)
    with pytest.raises(ValidationError):
        gap_tv(np.ones((8, 8)), MaskSet(z, z.copy()))


def test_denoiser_contract_is_enforced() -> None:
    masks = generate_masks(8, 8, 2, seed=0)

    class Shrinks:
        name = "shrinks"

        def __call__(self, x: np.ndarray) -> np.ndarray:
            return x[:1]

    class Explodes:
        name = "explodes"

        def __call__(self, x: np.ndarray) -> np.ndarray:
            return np.full_like(x, np.inf)

    y = np.ones((8, 8))
    with pytest.raises(ValidationError):
        pnp_solve(y, masks, Shrinks())
    with pytest.raises(NumericalError):
        pnp_solve(y, masks, Explodes())


def test_plug_in_denoisers() -> None:
    x = np.random.default_rng(5).random((2, 10, 10))
    assert np.array_equal(IdentityDenoiser()(x), x)
    smooth = GaussianDenoiser(1.0)(x)
    assert smooth.shape == x.shape
    assert np.allclose(smooth[0], GaussianDenoiser(1.0)(x[:1])[0])
    assert make_denoiser("tv").name == "tv"
    with pytest.raises(ValidationError):
        make_denoiser("bm3d")


def test_tv_leaves_constants_alone() -> None:
    x = np.full((2, 9, 9), 0.4)
    assert np.array_equal(tv_denoise(x, 0.3, 20), x)


def test_tv_step_edge_has_the_analytic_solution() -> None:
    lo, hi, lam = 0.2, 0.8, 0.2
    img = np.tile(np.array([lo] * 4 + [hi] * 4), (5, 1))
    out = tv_denoise(img, lam, iterations=3000)
    assert np.allclose(out[:, :4], lo + lam / 4, atol=1e-3)
    assert np.allclose(out[:, 4:], hi - lam / 4, atol=1e-3)


def test_tv_is_frame_wise_and_reduces_variation() -> None:
    x = np.random.default_rng(6).random((3, 12, 12))
    cube = tv_denoise(x, 0.1, 10)
    for t in range(3):
        assert np.array_equal(cube[t], tv_denoise(x[t], 0.1, 10))
    assert tv_norm(cube) < tv_norm(x)


def test_tv_rejects_bad_parameters() -> None:
    with pytest.raises(ValidationError):
        tv_denoise(np.zeros((4, 4)), 0.0)
    with pytest.raises(ValidationError):
        tv_denoise(np.zeros((4, 4)), 0.1, iterations=0)


def test_tv_with_a_vanishing_weight_is_the_identity() -> None:
    x = np.random.default_rng(20).random((3, 16, 16))
    out = tv_denoise(x, 1e-12, iterations=10)
    assert np.max(np.abs(out - x)) < 1e-10


def test_identity_denoiser_fits_the_data_after_one_iteration() -> None:
    rng = np.random.default_rng(21)
    masks = generate_masks(24, 24, 3, seed=22)
    meas = encode(VideoCube(rng.random((3, 24, 24)), 1), VideoCube(rng.random((3, 24, 24)), 2), masks)
    _, _, state = pnp_solve(meas, masks, IdentityDenoiser(), GapTvConfig(iterations=1))
    assert state.residuals[0] < 1e-6 * float(np.linalg.norm(meas.y))


@pytest.mark.slow
def test_solver_time_grows_linearly_with_iterations() -> None:
    masks = generate_masks(96, 96, 8, seed=23)
    x = _blocky_scene(96, 96, 8, seed=24)
    meas = encode(VideoCube(x, 1), VideoCube(x[::-1].copy(), 2), masks)

    def run(iterations: int):
        cfg = GapTvConfig(iterations=iterations)

        def algo(m, c):
            x1, x2, _ = gap_tv(m, c, cfg)
            return [x1.data, x2.data]

        return time_reconstruction(algo, meas, masks, repetitions=3).seconds

    short, long = run(10), run(40)
    assert 2.0 < long / short < 8.0
