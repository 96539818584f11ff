"""Compound symmetry and GCS block covariance matrices."""

from .centered import (
    CenteredCovariance,
    ContrastBasis,
    centered_from_reduced,
    helmert_basis,
    reduced_from_centered,
)
from .cs import (
    CSSpec,
    cs_from_hierarchical,
    cs_is_positive_definite,
    cs_is_positive_semidefinite,
    cs_matrix,
    hierarchical_from_cs,
)
from .gcs import (
    BlockCovariance,
    GCSParams,
    ValidationReport,
    block_average,
    gcs_assemble,
    gcs_decompose,
    gcs_identity_check,
    gcs_is_invertible,
    gcs_validate,
    is_pd,
    is_psd,
    min_eigenvalue,
    parameter_count,
    psd_tolerance,
)
from .partition import GroupPartition, Relabeling
from .spherical import cholesky_to_spherical, n_angles, spherical_to_cholesky

__all__ = [
    "BlockCovariance",
    "CSSpec",
    "CenteredCovariance",
    "ContrastBasis",
    "GCSParams",
    "GroupPartition",
    "Relabeling",
    "ValidationReport",
    "block_average",
    "centered_from_reduced",
    "cholesky_to_spherical",
    "cs_from_hierarchical",
    "cs_is_positive_definite",
    "cs_is_positive_semidefinite",
    "cs_matrix",
    "gcs_assemble",
    "gcs_decompose",
    "gcs_identity_check",
    "gcs_is_invertible",
    "gcs_validate",
    "helmert_basis",
    "hierarchical_from_cs",
    "is_pd",
    "is_psd",
    "min_eigenvalue",
    "n_angles",
    "parameter_count",
    "psd_tolerance",
    "reduced_from_centered",
    "spherical_to_cholesky",
]
