import json
from pathlib import Path

import numpy as np
import pytest

from dualsci.errors import ValidationError
from dualsci.pipeline import (
    SolverTrace,
    build_config,
    config_for_weights,
    config_to_toml,
    load_config,
    make_reconstructor,
    masks_for,
    run_ablation,
    synthetic_dataset,
    with_changes,
    write_config_snapshot,
)
from dualsci.sci.encoder import encode
from dualsci.specs import Geometry, PipelineConfig, SeparatorConfig, TrainConfig
from dualsci.utils import load_toml


def _tiny(**kw) -> PipelineConfig:
    base = dict(
        geometry=Geometry(rows=16, cols=16, frames=3),
        separator=SeparatorConfig(scale=0.125),
        train=TrainConfig(epochs=1, max_steps=1, batch_size=1),
    )
    base.update(kw)
    return PipelineConfig(**base)


def test_toml_round_trip(tmp_path: Path) -> None:
    cfg = _tiny(seed=9)
    path = tmp_path / "config.toml"
    path.write_text(config_to_toml(cfg), encoding="utf-8")
    assert "weights_path" not in path.read_text(encoding="utf-8")
    data = load_toml(path)
    assert data["seed"] == 9 and data["geometry"]["frames"] == 3
    again = load_config(path)
    assert again.model_dump() == cfg.model_dump()
    assert again.config_hash() == cfg.config_hash()


def test_overrides_and_json_config(tmp_path: Path) -> None:
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"geometry": {"rows": 32, "cols": 32}}), encoding="utf-8")
    cfg = load_config(path, {"geometry": {"frames": 6}, "solver": {"iterations": 5}})
    assert (cfg.geometry.rows, cfg.geometry.frames, cfg.solver.iterations) == (32, 6, 5)


def test_bad_configs_are_reported(tmp_path: Path) -> None:
    with pytest.raises(ValidationError, match="Missing config"):
        load_config(tmp_path / "absent.toml")
    (tmp_path / "cfg.yaml").write_text("a: 1\n", encoding="utf-8")
    with pytest.raises(ValidationError, match=".toml or .json"):
        load_config(tmp_path / "cfg.yaml")
    with pytest.raises(ValidationError, match="Malformed config at geometry.rows"):
        build_config({"geometry": {"rows": 0}})
    with pytest.raises(ValidationError, match="Malformed config"):
        build_config({"masks": {"shift": [0, 1]}})
    with pytest.raises(ValidationError, match="Malformed config"):
        build_config({"geometry": {"rows": 15}})


def test_config_snapshot_is_found_next_to_weights(tmp_path: Path) -> None:
    cfg = _tiny(seed=4)
    write_config_snapshot(tmp_path, cfg)
    (tmp_path / "epoch_0001").mkdir()
    assert config_for_weights(tmp_path / "epoch_0001", PipelineConfig()).model_dump() == cfg.model_dump()
    assert config_for_weights(tmp_path / "elsewhere" / "w", cfg) is cfg


def test_solver_reconstructor_records_its_trace() -> None:
    cfg = _tiny(solver={"iterations": 4})
    masks = masks_for(cfg)
    pair = synthetic_dataset(cfg, 1, seed=0)[0]
    trace = SolverTrace()
    algo = make_reconstructor("gaptv", cfg, trace=trace)
    out = algo(encode(pair.x1, pair.x2, masks), masks)
    assert [o.shape for o in out] == [(3, 16, 16)] * 2
    assert trace.last is not None and trace.last.iteration == 4

    pnp = make_reconstructor("pnp-tv", cfg, denoiser="gaussian", trace=trace)
    pnp(encode(pair.x1, pair.x2, masks), masks)
    assert trace.last.denoiser == "gaussian"


def test_reconstructor_errors() -> None:
    cfg = _tiny()
    with pytest.raises(ValidationError, match="Unknown algorithm"):
        make_reconstructor("desci", cfg)
    with pytest.raises(ValidationError, match="needs trained weights"):
        make_reconstructor("net", cfg)
    single = _tiny(mode="single")
    masks = masks_for(single)
    pair = synthetic_dataset(single, 1, seed=0)[0]
    with pytest.raises(ValidationError, match="view"):
        make_reconstructor("gaptv", single)(encode(pair.x1, pair.x2, masks), masks)


def test_masks_follow_the_config() -> None:
    cfg = _tiny()
    a, b = masks_for(cfg), masks_for(cfg)
    assert a.mask_id() == b.mask_id()
    assert masks_for(cfg, seed=99).mask_id() != a.mask_id()
    assert a.shift_relation_holds()


def test_ablation_table_has_one_row_per_flag(tmp_path: Path) -> None:
    cfg = _tiny()
    masks = masks_for(cfg)
    corpus = synthetic_dataset(cfg, 2, seed=1)
    dataset = synthetic_dataset(cfg, 1, seed=2)
    table = run_ablation(cfg, "no_flow,no_refine", corpus, dataset, masks, tmp_path)
    assert [r["variant"] for r in table.rows] == ["W/o OF", "W/o RN"]
    assert (tmp_path / "no_flow" / "pipeline_config.json").exists()
    assert all(np.isfinite(r["psnr"]) for r in table.rows)
    assert table.rows[0]["config_hash"] != table.rows[1]["config_hash"]
    with pytest.raises(ValidationError):
        run_ablation(cfg, "no_flow,bogus", corpus, dataset, masks, tmp_path)


def test_with_changes_revalidates() -> None:
    cfg = _tiny(separator=SeparatorConfig(scale=0.125, branch_mode="single"))
    with pytest.raises(ValidationError, match="shared-branch"):
        with_changes(cfg, {"mode": "single"})
    with pytest.raises(ValidationError, match="geometry.frames"):
        with_changes(cfg, {"geometry": {"frames": 0}})

    longer = with_changes(cfg, {"geometry": {"frames": 5}})
    assert longer.geometry.frames == 5 and longer.geometry.rows == 16
    assert longer.separator.branch_mode == "single"
    assert with_changes(cfg, {}).config_hash() == cfg.config_hash()
