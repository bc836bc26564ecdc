from .denoisers import DENOISERS, Denoiser, GaussianDenoiser, IdentityDenoiser, TvDenoiser, make_denoiser
from .gap import SolverState, gap_tv, pnp_solve, split_views
from .tv import tv_denoise, tv_norm
