import math
from pathlib import Path

import numpy as np
import pytest

from dualsci.errors import ValidationError
from dualsci.evaluation import (
    SweepTable,
    evaluate_dataset,
    framewise_report,
    noise_sweep,
    psnr,
    rate_sweep,
    ssim,
    time_reconstruction,
)
from dualsci.evaluation.reference import noise_reference, rate_reference
from dualsci.sci.masks import generate_masks
from dualsci.training import synth_corpus


def _flat(value: float):
    def algo(meas, masks):
        shape = (masks.frames, *masks.spatial_shape)
        return [np.full(shape, value), np.full(shape, value)]

    return algo


def test_psnr_values() -> None:
    a = np.zeros((4, 4))
    assert psnr(a, a) == math.inf
    assert psnr(a, np.full((4, 4), 0.1)) == pytest.approx(20.0)
    assert psnr(a, np.full((4, 4), 0.2), peak=2.0) == pytest.approx(20.0)
    with pytest.raises(ValidationError):
        psnr(a, np.zeros((3, 4)))


def test_ssim_values() -> None:
    img = np.random.default_rng(0).random((16, 16))
    assert ssim(img, img) == pytest.approx(1.0)
    assert ssim(img, 1.0 - img) < 0.5
    with pytest.raises(ValidationError):
        ssim(img[None], img[None])
    with pytest.raises(ValidationError):
        ssim(img, img[:8])


@pytest.mark.parametrize("side", [1, 2, 3, 8, 10])
def test_ssim_on_frames_smaller_than_the_window(side: int) -> None:
    img = np.random.default_rng(side).random((side, side))
    assert ssim(img, img) == pytest.approx(1.0)
    if side > 1:
        assert ssim(img, 1.0 - img) < 0.5


def test_framewise_report_on_8x8_scenes() -> None:
    rng = np.random.default_rng(1)
    ref = rng.random((2, 8, 8))
    report = framewise_report([ref, ref], [ref, np.clip(ref + 0.1, 0, 1)])
    assert len(report.frames) == 4
    assert report.frames[0].ssim == pytest.approx(1.0)
    assert report.frames[2].ssim < 1.0


def test_framewise_report_rows_and_clamping(tmp_path: Path) -> None:
    rng = np.random.default_rng(1)
    ref = [rng.random((3, 16, 16)), rng.random((3, 16, 16))]
    over = [np.clip(r, 0, 1) + 5.0 for r in ref]
    report = framewise_report(ref, [ref[0], over[1]], algo="demo", seconds=0.5)
    assert [(f.view, f.frame) for f in report.frames][:4] == [("view1", 1), ("view1", 2), ("view1", 3), ("view2", 1)]
    assert report.view_average("view1")[0] == math.inf
    clamped = framewise_report([ref[1]], [np.ones((3, 16, 16))])
    assert report.view_average("view2")[0] == pytest.approx(clamped.view_average("single")[0])

    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == "view,frame,psnr,ssim"
    assert "inf" in csv_text
    assert "time per snapshot: 0.5000 s" in report.to_text()
    assert report.to_dict()["frames"][0]["psnr"] == "inf"
    paths = report.write(tmp_path)
    assert [p.name for p in paths] == ["framewise.csv", "report.txt"]


def test_framewise_report_rejects_mismatches() -> None:
    with pytest.raises(ValidationError):
        framewise_report([np.zeros((2, 16, 16))], [])
    with pytest.raises(ValidationError):
        framewise_report([np.zeros((2, 16, 16))], [np.zeros((3, 16, 16))])


def test_evaluate_dataset_and_timing() -> None:
    data = synth_corpus(16, 16, 3, 2, seed=0)
    masks = generate_masks(16, 16, 3, seed=1)
    reports, seconds = evaluate_dataset(_flat(0.5), data, masks)
    assert len(reports) == 2 and seconds >= 0
    assert reports[0].views == ["view1", "view2"]
    with pytest.raises(ValidationError):
        evaluate_dataset(_flat(0.5), [], masks)

    meas_calls = []
    timing = time_reconstruction(lambda m, c: meas_calls.append(1), None, masks, repetitions=3)
    assert len(timing.samples) == 3 and len(meas_calls) == 3
    assert timing.seconds == sorted(timing.samples)[1]
    with pytest.raises(ValidationError):
        time_reconstruction(_flat(0.5), None, masks, repetitions=0)


def test_noise_sweep_rows_and_reference() -> None:
    data = synth_corpus(16, 16, 3, 1, seed=2)
    masks = generate_masks(16, 16, 3, seed=3)
    table = noise_sweep(_flat(0.5), data, masks, sigmas=(0.0, 0.1), reference=lambda s: noise_reference("gaptv", s))
    assert [r["sigma"] for r in table.rows] == [0.0, 0.1]
    assert table.rows[0]["psnr"] == pytest.approx(table.rows[1]["psnr"])
    assert table.rows[1]["ref_psnr"] == 13.12
    assert not table.notes
    assert {"psnr_view1", "ssim_view2", "seconds"} <= set(table.columns)


def test_noise_sweep_flags_non_monotone_rows() -> None:
    pair = synth_corpus(16, 16, 3, 1, seed=4)[0]
    masks = generate_masks(16, 16, 3, seed=5)
    calls = []

    def improving(meas, c):
        calls.append(1)
        if len(calls) == 1:
            return [np.full(pair.x1.shape, 0.5)] * 2
        return [pair.x1.data, pair.x2.data]

    table = noise_sweep(improving, [pair], masks, sigmas=(0.0, 0.05))
    assert table.rows[1].get("non_monotone") is True
    assert table.notes == ["sigma=0.05 scores above a smaller sigma"]


def test_rate_sweep_checks_its_inputs() -> None:
    datasets = {b: synth_corpus(16, 16, b, 1, seed=b) for b in (2, 3)}
    algos = {b: (_flat(0.4), generate_masks(16, 16, b, seed=b)) for b in (2, 3)}
    table = rate_sweep(algos, datasets, rates=(2, 3))
    assert [r["frames"] for r in table.rows] == [2, 3]
    assert "ref_psnr" not in table.columns
    with pytest.raises(ValidationError):
        rate_sweep(algos, datasets, rates=(2, 4))
    with pytest.raises(ValidationError):
        rate_sweep(algos, {2: []}, rates=(2,))
    with pytest.raises(ValidationError):
        rate_sweep({2: algos[3]}, datasets, rates=(2,))


def test_sweep_table_formatting() -> None:
    table = SweepTable(key="sigma", rows=[{"sigma": 0.0, "psnr": math.inf}, {"sigma": 0.1, "psnr": 12.345678, "extra": None}])
    assert table.columns == ["sigma", "psnr", "extra"]
    assert table.to_csv().splitlines() == ["sigma,psnr,extra", "0.0000,inf,", "0.1000,12.3457,"]
    table.notes.append("hello")
    assert table.to_text().rstrip().endswith("note: hello")


def test_reference_lookups() -> None:
    assert noise_reference("pnp-tv", 0.01) == (21.69, 0.53)
    assert noise_reference("net", 0.3) is None
    assert rate_reference("net", 14) == (24.25, 0.63, 0.9481)
    assert rate_reference("gaptv", 12) is None
