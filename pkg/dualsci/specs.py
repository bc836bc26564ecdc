from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .utils import canonical_json, sha256_text


Mode = Literal["dual", "single"]


def scaled(width: int, scale: float) -> int:
    return max(1, int(round(width * scale)))


class Geometry(BaseModel):
    rows: int = Field(default=64, ge=1)
    cols: int = Field(default=64, ge=1)
    frames: int = Field(default=4, ge=1)


class MaskConfig(BaseModel):
    density: float = Field(default=0.5, gt=0.0, le=1.0)
    shift: tuple[int, int] = (0, 10)
    seed: int = 7

    @field_validator("shift")
    @classmethod
    def _shift_exceeds_feature_size(cls, v: tuple[int, int]) -> tuple[int, int]:
        if max(abs(v[0]), abs(v[1])) < 2:
            raise ValueError("mask shift must be at least 2 pixels along one axis")
        return v


class SmoothingConfig(BaseModel):
    sigma_g: float = Field(default=5.0, gt=0.0)
    radius: int = Field(default=15, ge=1)
    boundary: Literal["reflect"] = "reflect"
    eps: float = Field(default=1e-6, gt=0.0)
    # divide by ΣC instead of the printed ΣC/(2B)
    normalize_by_sum: bool = False

    @model_validator(mode="after")
    def _radius_covers_kernel(self) -> "SmoothingConfig":
        if self.radius < 3 * self.sigma_g:
            raise ValueError(f"radius {self.radius} must be >= 3 * sigma_g ({3 * self.sigma_g:g})")
        return self


class FlowEstimatorSpec(BaseModel):
    kind: Literal["classical", "learned-adapter"] = "classical"
    levels: int = Field(default=3, ge=1)
    regularization: float = Field(default=0.1, gt=0.0)
    iterations: int = Field(default=50, ge=1)
    max_displacement: float = Field(default=32.0, gt=0.0)
    weights_path: Optional[Path] = None
    fine_tunable: bool = False


class SeparatorConfig(BaseModel):
    stage1_widths: tuple[int, int, int, int] = (32, 64, 64, 64)
    res_width: int = 64
    res_blocks: int = 3
    stage3_widths: tuple[int, int, int] = (64, 64, 32)
    scale: float = Field(default=1.0, gt=0.0)
    branch_mode: Literal["dual", "single"] = "dual"
    leaky_slope: float = 0.01

    def widths(self) -> dict[str, Any]:
        return {
            "stage1": [scaled(w, self.scale) for w in self.stage1_widths],
            "res": scaled(self.res_width, self.scale),
            "stage3": [scaled(w, self.scale) for w in self.stage3_widths],
        }


class RefineConfig(BaseModel):
    frame_width: int = 20
    flow_width: int = 40
    diversity_width: int = 20
    fusion_width: int = 40
    fusion_blocks: int = 2
    fusion_tail: tuple[int, int] = (20, 20)
    hidden_width: int = 10
    head_widths: tuple[int, int, int, int, int] = (40, 30, 20, 20, 20)
    scale: float = Field(default=1.0, gt=0.0)
    leaky_slope: float = 0.01

    def widths(self) -> dict[str, Any]:
        s = self.scale
        return {
            "frame": scaled(self.frame_width, s),
            "flow": scaled(self.flow_width, s),
            "diversity": scaled(self.diversity_width, s),
            "fusion": scaled(self.fusion_width, s),
            "fusion_tail": [scaled(w, s) for w in self.fusion_tail],
            "hidden": scaled(self.hidden_width, s),
            "head": [scaled(w, s) for w in self.head_widths],
        }


class AblationFlags(BaseModel):
    no_flow: bool = False
    no_backward: bool = False
    no_diversity: bool = False
    no_refine: bool = False
    no_joint_training: bool = False

    def active(self) -> list[str]:
        return [k for k, v in self.model_dump().items() if v]


class GapTvConfig(BaseModel):
    iterations: int = Field(default=100, ge=1)
    tv_lambda: float = Field(default=0.07, gt=0.0)
    tv_iterations: int = Field(default=5, ge=1)
    accelerate: bool = False


class TrainConfig(BaseModel):
    epochs: int = Field(default=90, ge=1)
    batch_size: int = Field(default=2, ge=1)
    learning_rate: float = Field(default=3e-4, ge=0.0)
    lr_decay: float = Field(default=0.9, gt=0.0)
    decay_every: int = Field(default=10, ge=1)
    alpha: float = Field(default=1.0, ge=0.0)
    seed: int = 0
    pairs: int = Field(default=200, ge=0)
    max_steps: Optional[int] = Field(default=None, ge=1)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    workers: int = Field(default=1, ge=1)
    max_velocity: float = Field(default=3.0, ge=0.0)
    checkpoint_every: int = Field(default=1, ge=1)


class EvalConfig(BaseModel):
    noise_sigmas: list[float] = Field(default_factory=lambda: [0.0, 0.01, 0.05, 0.1, 0.2])
    rates: list[int] = Field(default_factory=lambda: [6, 10, 14])
    repetitions: int = Field(default=3, ge=1)
    peak: float = Field(default=1.0, gt=0.0)


class PipelineConfig(BaseModel):
    mode: Mode = "dual"
    seed: int = 0
    geometry: Geometry = Field(default_factory=Geometry)
    masks: MaskConfig = Field(default_factory=MaskConfig)
    smoothing: SmoothingConfig = Field(default_factory=SmoothingConfig)
    separator: SeparatorConfig = Field(default_factory=lambda: SeparatorConfig(scale=0.25))
    refine: RefineConfig = Field(default_factory=lambda: RefineConfig(scale=0.25))
    flow: FlowEstimatorSpec = Field(default_factory=FlowEstimatorSpec)
    solver: GapTvConfig = Field(default_factory=GapTvConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ablation: AblationFlags = Field(default_factory=AblationFlags)

    @model_validator(mode="after")
    def _consistent(self) -> "PipelineConfig":
        if self.geometry.rows % 2 or self.geometry.cols % 2:
            raise ValueError(
                f"rows and cols must be divisible by the separator downsample factor 2, "
                f"got {self.geometry.rows}x{self.geometry.cols}"
            )
        if self.mode == "single" and self.separator.branch_mode == "single":
            raise ValueError("the shared-branch separator only exists for dual-view capture")
        return self

    @property
    def views(self) -> int:
        return 2 if self.mode == "dual" else 1

    @property
    def amplifier_enabled(self) -> bool:
        return self.mode == "dual" and not self.ablation.no_diversity

    def config_hash(self) -> str:
        return sha256_text(canonical_json(self.model_dump(mode="json")))[:16]
