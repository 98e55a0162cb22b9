"""Illumination-aware image vectorization."""

from ._covec import (
    InputError,
    ParseError,
    PipelineError,
    edit,
    gradcheck,
    mse,
    read_image,
    render,
    set_max_threads,
    vectorize,
    write_image,
)

__all__ = [
    "InputError",
    "ParseError",
    "PipelineError",
    "edit",
    "gradcheck",
    "mse",
    "read_image",
    "render",
    "set_max_threads",
    "vectorize",
    "write_image",
]
