"""Python surface of the two-time flow map laboratory.

Everything heavy lives in the native module; this package just re-exports
it under a stable name.
"""

from ._core import (
    ConfigError,
    DomainError,
    FlowMap,
    NumericError,
    UsageError,
    Velocity,
    __version__,
    checkerboard_contains,
    checkerboard_sample,
    gaussian_denoiser,
    gaussian_flowmap,
    gaussian_velocity,
    kl_histogram,
    schedule_coeffs,
    w2_assignment,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "FlowMap",
    "NumericError",
    "UsageError",
    "Velocity",
    "__version__",
    "checkerboard_contains",
    "checkerboard_sample",
    "gaussian_denoiser",
    "gaussian_flowmap",
    "gaussian_velocity",
    "kl_histogram",
    "schedule_coeffs",
    "w2_assignment",
]
