"""Conditional volumetric diffusion engine (python bindings)."""

from longdiff._core import (
    ConfigError,
    DataError,
    Denoiser,
    GaussianOracleDenoiser,
    NoiseSchedule,
    NumericalError,
    ScheduleStep,
    ZeroDenoiser,
    __version__,
    forward_marginal,
    forward_sample,
    frechet_proxy,
    generate_phantom,
    mse,
    normalize,
    posterior,
    read_volume,
    reverse_step,
    sample_from_checkpoint,
    sample_loop,
    ssim,
    tissue_voxel_count,
    train_denoiser,
    write_volume,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Denoiser",
    "GaussianOracleDenoiser",
    "NoiseSchedule",
    "NumericalError",
    "ScheduleStep",
    "ZeroDenoiser",
    "__version__",
    "forward_marginal",
    "forward_sample",
    "frechet_proxy",
    "generate_phantom",
    "mse",
    "normalize",
    "posterior",
    "read_volume",
    "reverse_step",
    "sample_from_checkpoint",
    "sample_loop",
    "ssim",
    "tissue_voxel_count",
    "train_denoiser",
    "write_volume",
]
