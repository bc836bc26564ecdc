import json
from pathlib import Path

import numpy as np
import pytest

from dualsci.container import load_container, read_manifest, save_container, verify_container
from dualsci.errors import ValidationError


def _sample(tmp_path: Path) -> Path:
    rng = np.random.default_rng(0)
    return save_container(
        tmp_path / "box",
        {"X1": rng.random((3, 4, 5)).astype(np.float32), "C1": (rng.random((3, 4, 5)) < 0.5).astype(np.uint8)},
        kind="scene",
        meta={"note": "sample"},
        config_hash="abc123",
        seed=11,
    )


def test_manifest_records_every_tensor(tmp_path: Path) -> None:
    out = _sample(tmp_path)
    manifest = read_manifest(out)
    assert manifest["kind"] == "scene"
    assert manifest["config_hash"] == "abc123"
    assert manifest["seed"] == 11
    rows = {r["name"]: r for r in manifest["tensors"]}
    assert rows["X1"]["dtype"] == "float32" and rows["C1"]["dtype"] == "uint8"
    assert rows["X1"]["dims"] == "frame,row,col"
    assert rows["X1"]["endianness"] == "little"
    assert rows["X1"]["shape"] == [3, 4, 5]


def test_round_trip_is_bit_exact(tmp_path: Path) -> None:
    rng = np.random.default_rng(1)
    x = rng.random((2, 6, 6)).astype(np.float32)
    save_container(tmp_path / "box", {"X1": x}, kind="scene")
    box = load_container(tmp_path / "box", kind="scene")
    assert box.tensors["X1"].dtype == np.float32
    assert np.array_equal(box.tensors["X1"], x)


def test_kind_mismatch_is_rejected(tmp_path: Path) -> None:
    out = _sample(tmp_path)
    with pytest.raises(ValidationError):
        load_container(out, kind="masks")


def test_verify_reports_tampering(tmp_path: Path) -> None:
    out = _sample(tmp_path)
    ok, errors = verify_container(out)
    assert ok and errors == []

    blob = out / "X1.bin"
    data = bytearray(blob.read_bytes())
    data[0] ^= 0xFF
    blob.write_bytes(bytes(data))
    ok, errors = verify_container(out)
    assert not ok
    assert any("Hash mismatch" in e for e in errors)
    with pytest.raises(ValidationError):
        load_container(out)


def test_verify_reports_missing_blob_and_manifest(tmp_path: Path) -> None:
    out = _sample(tmp_path)
    (out / "C1.bin").unlink()
    ok, errors = verify_container(out)
    assert not ok and any("Missing file" in e for e in errors)

    ok, errors = verify_container(tmp_path / "nowhere")
    assert not ok and "manifest.json" in errors[0]


def test_size_mismatch_is_reported(tmp_path: Path) -> None:
    out = _sample(tmp_path)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    for row in manifest["tensors"]:
        if row["name"] == "X1":
            row["shape"] = [3, 4, 6]
    (out / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    ok, errors = verify_container(out)
    assert not ok and any("Size mismatch" in e for e in errors)
