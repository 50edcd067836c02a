"""Gaussian mixture image segmentation: classical EM, spatially variant EM and
network-parameterized responsibilities trained by gradient descent."""

from ._dgmm import (
    DgmmError,
    Network,
    boundary_length,
    deep_fit,
    dice,
    em_fit,
    em_fit_v,
    normalize,
    read_tensor,
    synth,
    write_tensor,
)

__all__ = [
    "DgmmError",
    "Network",
    "boundary_length",
    "deep_fit",
    "dice",
    "em_fit",
    "em_fit_v",
    "normalize",
    "read_tensor",
    "synth",
    "write_tensor",
]
