"""Continuous, categorical and composite kernels on mixed input spaces."""

from .categorical import (
    CSKernel,
    CategoricalKernel,
    GCSKernel,
    GroupCorrelationKernel,
    OrdinalKernel,
    SphericalKernel,
    categorical_from_dict,
    default_warping,
    ordinal_kernel,
)
from .continuous import FAMILIES, ContinuousKernel1D, eval_continuous, matern52
from .expr import (
    CategoricalLeaf,
    Combine,
    ContinuousLeaf,
    Kernel,
    Node,
    combine,
    gram,
    node_from_dict,
    pack_params,
    product_kernel,
    unpack_params,
)
from .params import ParamSpec
from .warping import Warping, warp_positions

__all__ = [
    "CSKernel",
    "CategoricalKernel",
    "CategoricalLeaf",
    "Combine",
    "ContinuousKernel1D",
    "ContinuousLeaf",
    "FAMILIES",
    "GCSKernel",
    "GroupCorrelationKernel",
    "Kernel",
    "Node",
    "OrdinalKernel",
    "ParamSpec",
    "SphericalKernel",
    "Warping",
    "categorical_from_dict",
    "combine",
    "default_warping",
    "eval_continuous",
    "gram",
    "matern52",
    "node_from_dict",
    "ordinal_kernel",
    "pack_params",
    "product_kernel",
    "unpack_params",
    "warp_positions",
]
