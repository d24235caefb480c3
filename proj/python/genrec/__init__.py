"""Video recovery from under-sampled measurements with deconvolutional generator priors."""

from ._genrec import (
    Architecture,
    ContractError,
    DivergedError,
    Error,
    IoError,
    RangeError,
    Rng,
    ShapeError,
    Weights,
    __version__,
    generate,
    make_sequence,
    max_line_distance,
    param_count,
    project_affine,
    project_rank,
    psnr,
    run_experiment,
)

__all__ = [
    "Architecture",
    "ContractError",
    "DivergedError",
    "Error",
    "IoError",
    "RangeError",
    "Rng",
    "ShapeError",
    "Weights",
    "__version__",
    "generate",
    "make_sequence",
    "max_line_distance",
    "param_count",
    "project_affine",
    "project_rank",
    "psnr",
    "run_experiment",
]
