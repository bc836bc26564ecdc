"""Generalized alternating projection with a plug-in denoiser.

Each iteration projects the estimate onto {x : Φx = y} (exact, because ΦΦᵀ is
diagonal) and then hands it to the denoiser. With the TV denoiser this is GAP-TV.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import time
from typing import Callable, Optional

import numpy as np

from ..errors import NumericalError, ValidationError
from ..sci.cube import Measurement, VideoCube
from ..sci.masks import MaskSet
from ..sci.operator import SensingOperator, adjoint_apply, forward_apply, phi_phit_diagonal
from ..specs import GapTvConfig
from .denoisers import Denoiser, TvDenoiser


ProjectionCallback = Callable[[int, np.ndarray], None]


@dataclass
class SolverState:
    x: np.ndarray
    # ‖y − Φx‖₂ after each full iteration (projection + denoise)
    residuals: list[float] = field(default_factory=list)
    # relative data-fit residual right after each projection, covered pixels only
    projection_residuals: list[float] = field(default_factory=list)
    iteration: int = 0
    elapsed: float = 0.0
    denoiser: str = ""

    def residual_table(self) -> str:
        lines = ["iteration\tresidual\tprojection_residual"]
        for i, (r, p) in enumerate(zip(self.residuals, self.projection_residuals), start=1):
            lines.append(f"{i}\t{r:.6e}\t{p:.6e}")
        return "\n".join(lines) + "\n"


def _measurement_array(y: Measurement | np.ndarray) -> np.ndarray:
    if isinstance(y, Measurement):
        return y.y.astype(np.float64)
    return np.asarray(y, dtype=np.float64)


def split_views(x: np.ndarray, views: int) -> tuple[VideoCube, VideoCube | None]:
    if views == 1:
        return VideoCube(x, "single"), None
    b = x.shape[0] // 2
    return VideoCube(x[:b], 1), VideoCube(x[b:], 2)


def pnp_solve(
    y: Measurement | np.ndarray,
    masks: MaskSet,
    denoiser: Denoiser,
    cfg: GapTvConfig | None = None,
    *,
    views: int = 2,
    on_projection: Optional[ProjectionCallback] = None,
) -> tuple[VideoCube, VideoCube | None, SolverState]:
    cfg = cfg or GapTvConfig()
    op = SensingOperator(masks, views)
    yv = _measurement_array(y)
    if yv.shape != masks.spatial_shape:
        raise ValidationError(f"Measurement shape {yv.shape} does not match mask shape {masks.spatial_shape}")

    diag = phi_phit_diagonal(op)
    valid = diag > 0
    if not valid.any():
        raise ValidationError("All masks are zero; the measurement carries no information")
    safe = np.where(valid, diag, 1.0)

    def project(x: np.ndarray, target: np.ndarray) -> np.ndarray:
        # zero-coverage pixels skip the correction and are left to the denoiser
        r = np.where(valid, (target - forward_apply(op, x)) / safe, 0.0)
        return x + adjoint_apply(op, r)

    x = adjoint_apply(op, np.where(valid, yv / safe, 0.0))
    y_acc = yv.copy()
    state = SolverState(x=x, denoiser=getattr(denoiser, "name", type(denoiser).__name__))
    start = time.perf_counter()
    for k in range(cfg.iterations):
        if cfg.accelerate:
            y_acc = y_acc + (yv - forward_apply(op, x))
            target = y_acc
        else:
            target = yv
        x = project(x, target)
        fit = (target - forward_apply(op, x))[valid]
        scale = max(float(np.linalg.norm(target[valid])), np.finfo(np.float64).tiny)
        state.projection_residuals.append(float(np.linalg.norm(fit)) / scale)
        if on_projection is not None:
            on_projection(k, x)

        z = denoiser(x)
        if z.shape != x.shape:
            raise ValidationError(f"Denoiser '{state.denoiser}' changed the cube shape {x.shape} -> {z.shape}")
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"Denoiser '{state.denoiser}' produced non-finite values at iteration {k + 1}")
        x = np.asarray(z, dtype=np.float64)
        state.residuals.append(float(np.linalg.norm(yv - forward_apply(op, x))))
        state.iteration = k + 1

    state.x = x
    state.elapsed = time.perf_counter() - start
    x1, x2 = split_views(x, views)
    return x1, x2, state


def gap_tv(
    y: Measurement | np.ndarray,
    masks: MaskSet,
    cfg: GapTvConfig | None = None,
    *,
    views: int = 2,
    on_projection: Optional[ProjectionCallback] = None,
) -> tuple[VideoCube, VideoCube | None, SolverState]:
    cfg = cfg or GapTvConfig()
    return pnp_solve(y, masks, TvDenoiser(cfg.tv_lambda, cfg.tv_iterations), cfg, views=views, on_projection=on_projection)
