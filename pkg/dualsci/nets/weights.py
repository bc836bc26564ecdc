"""Named-tensor checkpoints for any set of torch modules.

Each module's state dict is stored under its namespace (`separator.*`,
`refine.*`, `flow.*`) inside one `checkpoint` container.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import torch
from torch import nn

from ..container import load_container, save_container
from ..errors import ValidationError


@dataclass
class WeightStore:
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)
    config_hash: str = ""

    @classmethod
    def from_modules(cls, modules: Mapping[str, nn.Module], **meta: Any) -> "WeightStore":
        tensors: dict[str, np.ndarray] = {}
        for ns, module in modules.items():
            for name, value in module.state_dict().items():
                tensors[f"{ns}.{name}"] = value.detach().cpu().numpy().astype(np.float32)
        return cls(tensors=tensors, meta=dict(meta))

    def namespaces(self) -> set[str]:
        return {k.split(".", 1)[0] for k in self.tensors}

    def apply_to(self, modules: Mapping[str, nn.Module]) -> None:
        """Load every namespace into its module; shapes must match exactly."""
        for ns, module in modules.items():
            prefix = ns + "."
            expected = module.state_dict()
            state = {k[len(prefix):]: v for k, v in self.tensors.items() if k.startswith(prefix)}
            missing = sorted(set(expected) - set(state))
            extra = sorted(set(state) - set(expected))
            if missing or extra:
                raise ValidationError(f"Checkpoint namespace '{ns}' does not fit: missing={missing} extra={extra}")
            for name, ref in expected.items():
                if tuple(state[name].shape) != tuple(ref.shape):
                    raise ValidationError(
                        f"Shape mismatch for {prefix}{name}: checkpoint {tuple(state[name].shape)}, model {tuple(ref.shape)}"
                    )
            module.load_state_dict({k: torch.from_numpy(np.array(v)).to(expected[k].dtype) for k, v in state.items()})

    def save(self, out_dir: Path, *, seed: int | None = None) -> Path:
        dims = {k: "param" for k in self.tensors}
        return save_container(
            out_dir,
            self.tensors,
            kind="checkpoint",
            meta=self.meta,
            config_hash=self.config_hash,
            seed=seed,
            dims=dims,
        )

    @classmethod
    def load(cls, src: Path) -> "WeightStore":
        if not Path(src).exists():
            raise ValidationError(f"Missing checkpoint: {src}")
        box = load_container(Path(src), kind="checkpoint")
        return cls(tensors=box.tensors, meta=box.meta, config_hash=box.config_hash)
