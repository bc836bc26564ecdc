from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ValidationError


MANIFEST_FILE_NAME = "manifest.json"

# Only these two element types ever hit the disk.
_DTYPES: dict[str, np.dtype] = {
    "float32": np.dtype("<f4"),
    "uint8": np.dtype("u1"),
}

DEFAULT_DIMS = {
    1: "param",
    2: "row,col",
    3: "frame,row,col",
    4: "batch,frame,row,col",
}


@dataclass
class Container:
    kind: str
    tensors: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)
    config_hash: str = ""
    seed: int | None = None
    created_at: str = ""


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            h.update(chunk)
    return h.hexdigest()


def _dtype_name(array: np.ndarray) -> str:
    if array.dtype == np.uint8 or array.dtype == np.bool_:
        return "uint8"
    return "float32"


def _blob_name(name: str) -> str:
    return name.replace("/", "__") + ".bin"


def save_container(
    out_dir: Path,
    tensors: Mapping[str, np.ndarray],
    *,
    kind: str,
    meta: Mapping[str, Any] | None = None,
    config_hash: str = "",
    seed: int | None = None,
    dims: Mapping[str, str] | None = None,
) -> Path:
    """Write named tensors as raw little-endian blobs plus a checksummed manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    dims = dims or {}
    rows: list[dict[str, Any]] = []
    for name, value in tensors.items():
        array = np.asarray(value)
        dtype_name = _dtype_name(array)
        data = np.ascontiguousarray(array, dtype=_DTYPES[dtype_name])
        blob = out_dir / _blob_name(name)
        blob.write_bytes(data.tobytes(order="C"))
        rows.append(
            {
                "name": name,
                "dtype": dtype_name,
                "shape": list(data.shape),
                "dims": dims.get(name, DEFAULT_DIMS.get(data.ndim, "")),
                "endianness": "little",
                "file": blob.name,
                "sha256": _sha256_file(blob),
            }
        )

    manifest = {
        "kind": kind,
        "config_hash": config_hash,
        "seed": seed,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "meta": dict(meta or {}),
        "tensors": rows,
    }
    (out_dir / MANIFEST_FILE_NAME).write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")
    return out_dir


def read_manifest(source_dir: Path) -> dict[str, Any]:
    path = source_dir / MANIFEST_FILE_NAME
    if not path.exists():
        raise ValidationError(f"Missing {MANIFEST_FILE_NAME} in {source_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_container(source_dir: Path, *, kind: str | None = None) -> Container:
    manifest = read_manifest(source_dir)
    if kind is not None and manifest.get("kind") != kind:
        raise ValidationError(f"{source_dir} holds a '{manifest.get('kind')}' container, expected '{kind}'")

    tensors: dict[str, np.ndarray] = {}
    for row in manifest.get("tensors", []):
        dtype_name = str(row.get("dtype", ""))
        if dtype_name not in _DTYPES:
            raise ValidationError(f"Unsupported dtype '{dtype_name}' for tensor {row.get('name')}")
        blob = source_dir / str(row["file"])
        if not blob.exists():
            raise ValidationError(f"Missing blob: {blob.name}")
        if _sha256_file(blob) != row.get("sha256"):
            raise ValidationError(f"Hash mismatch: {blob.name}")
        shape = tuple(int(s) for s in row["shape"])
        data = np.frombuffer(blob.read_bytes(), dtype=_DTYPES[dtype_name])
        if data.size != int(np.prod(shape, dtype=np.int64)):
            raise ValidationError(f"Size mismatch for {row['name']}: {data.size} values for shape {shape}")
        tensors[str(row["name"])] = data.reshape(shape).copy()

    return Container(
        kind=str(manifest.get("kind", "")),
        tensors=tensors,
        meta=dict(manifest.get("meta", {})),
        config_hash=str(manifest.get("config_hash", "")),
        seed=manifest.get("seed"),
        created_at=str(manifest.get("created_at", "")),
    )


def verify_container(source_dir: Path) -> tuple[bool, list[str]]:
    try:
        manifest = read_manifest(source_dir)
    except ValidationError as exc:
        return False, [str(exc)]
    rows = manifest.get("tensors", [])
    if not isinstance(rows, list):
        return False, ["Invalid manifest: tensors must be a list"]

    errors: list[str] = []
    for row in rows:
        if not isinstance(row, dict):
            errors.append("Invalid manifest row")
            continue
        rel = str(row.get("file", ""))
        path = source_dir / rel
        if not path.exists() or not path.is_file():
            errors.append(f"Missing file: {rel}")
            continue
        if _sha256_file(path) != str(row.get("sha256", "")):
            errors.append(f"Hash mismatch: {rel}")
            continue
        dtype = _DTYPES.get(str(row.get("dtype", "")))
        if dtype is None:
            errors.append(f"Unsupported dtype: {rel}")
            continue
        expected = int(np.prod(row.get("shape", []), dtype=np.int64)) * dtype.itemsize
        if path.stat().st_size != expected:
            errors.append(f"Size mismatch: {rel}")
    return len(errors) == 0, errors
