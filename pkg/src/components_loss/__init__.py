"""Components loss (2CL/3CL) and baseline losses for mask-based speech
enhancement, with white-box component metrics."""

from .components import WhiteBoxBundle, apply_mask, components_to_time
from .config import LossWeights, OptimizeConfig, StftConfig, TrainConfig
from .losses import (
    LossInputs,
    LossResult,
    cl2_loss,
    cl3_loss,
    closed_form_2cl_mask,
    compute_loss,
    mse_loss,
    pw_filt_loss,
    pw_pesq_loss,
    pw_stoi_loss,
)
from .stft import SpectralFrames, analyze, synthesize

__all__ = [
    "LossInputs", "LossResult", "LossWeights", "OptimizeConfig", "SpectralFrames", "StftConfig",
    "TrainConfig", "WhiteBoxBundle", "analyze", "apply_mask", "cl2_loss", "cl3_loss",
    "closed_form_2cl_mask", "components_to_time", "compute_loss", "mse_loss", "pw_filt_loss",
    "pw_pesq_loss", "pw_stoi_loss", "synthesize",
]
