"""Underwater single-image super-resolution (DRM generator + PatchGAN)."""

from ._srdrm import (
    ConfigError,
    ContractError,
    CorruptionError,
    Error,
    FormatError,
    Generator,
    IoError,
    NumericError,
    VersionError,
    bench,
    build_generator,
    discriminator_map_shape,
    eval_report,
    evaluate_dataset,
    global_similarity_loss,
    halve,
    load_generator,
    perceptual_redmean_loss,
    prepare_lr_sets,
    psnr,
    redmean_disparity,
    resize_bicubic,
    ssim,
    train,
    uiqm,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "CorruptionError",
    "Error",
    "FormatError",
    "Generator",
    "IoError",
    "NumericError",
    "VersionError",
    "bench",
    "build_generator",
    "discriminator_map_shape",
    "eval_report",
    "evaluate_dataset",
    "global_similarity_loss",
    "halve",
    "load_generator",
    "perceptual_redmean_loss",
    "prepare_lr_sets",
    "psnr",
    "redmean_disparity",
    "resize_bicubic",
    "ssim",
    "train",
    "uiqm",
]
