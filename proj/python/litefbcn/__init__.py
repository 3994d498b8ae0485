"""Bilinear-pooling head family: numpy-facing core operations."""

from ._litefbcn import (  # noqa: F401
    NonDivisible,
    RtfError,
    ShapeMismatch,
    bilinear_pool_dual,
    bilinear_pool_self,
    channel_reduce,
    confusion,
    f_upper_tail,
    head_param_count,
    metrics,
    normalize_bilinear,
    read_rtf,
    resolve_reduction,
    rm_anova,
    signed_sqrt,
    softmax,
    write_rtf,
)

__all__ = [
    "NonDivisible",
    "RtfError",
    "ShapeMismatch",
    "bilinear_pool_dual",
    "bilinear_pool_self",
    "channel_reduce",
    "confusion",
    "f_upper_tail",
    "head_param_count",
    "metrics",
    "normalize_bilinear",
    "read_rtf",
    "resolve_reduction",
    "rm_anova",
    "signed_sqrt",
    "softmax",
    "write_rtf",
]
