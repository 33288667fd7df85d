"""Unsupervised mastoidectomy mask optimization on synthetic phantoms.

Volumes are numpy arrays indexed ``[z, y, x]`` (x varies fastest in memory),
matching the on-disk layout of the C++ library.
"""

from ._core import (
    ConfigError,
    IoError,
    NumericalError,
    evaluate,
    generate_phantom,
    loss,
    loss_and_gradient,
    marching_cubes,
    optimize,
    register_rigid,
    scc,
    set_threads,
)

__all__ = [
    "ConfigError",
    "IoError",
    "NumericalError",
    "evaluate",
    "generate_phantom",
    "loss",
    "loss_and_gradient",
    "marching_cubes",
    "optimize",
    "register_rigid",
    "scc",
    "set_threads",
]
