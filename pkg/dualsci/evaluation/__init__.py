from .metrics import psnr, ssim
from .report import EvalReport, FrameMetrics, framewise_report
from .sweeps import SweepTable, Timing, evaluate_dataset, noise_sweep, rate_sweep, time_reconstruction
