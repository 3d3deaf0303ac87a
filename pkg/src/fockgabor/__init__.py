"""Numerics for Gaussian Gabor systems in the classical Fock space."""

__version__ = "0.1.0"

from .core_num import (  # noqa: F401
    DomainError,
    LogComplex,
    NumericalFailure,
    QuadratureSpec,
    integrate_plane,
    log_combine,
    log_sum,
)
from .fock import (  # noqa: F401
    FockFunction,
    GaborAtom,
    KernelSpec,
    bargmann_gabor,
    bargmann_numeric,
    inner_product,
    kernel_function,
    kernel_weighted_eval,
    norm,
)
from .weierstrass import (  # noqa: F401
    LatticeIndex,
    SigmaConfig,
    dist_to_lattice,
    sigma0_weighted,
    sigma3_weighted,
    sigma_config,
    sigma_weighted,
)
