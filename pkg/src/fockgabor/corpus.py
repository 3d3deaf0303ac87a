"""A fixed 20-member family of space members used by the verification suites.

The corpus mixes every evaluation pathway the library has: plain and
normalized kernels, finite kernel combinations with real and complex
coefficients, transform images of Gabor atoms, polynomial multiples of
kernels, the sigma-derived functions (sigma0, sigma3, biorthogonal elements),
and a small two-bump profile.  Members carry honest decay metadata so the
automatic quadrature sizing stays valid for each of them.
"""

from __future__ import annotations

import math

import numpy as np

from .fock import (
    FockFunction,
    GaborAtom,
    KernelSpec,
    bargmann_gabor,
    kernel_combination,
    kernel_function,
    polynomial_times_kernel,
)
from .lattice_series import biorthogonal_function
from .weierstrass import (
    LatticeIndex,
    SigmaConfig,
    default_config,
    sigma0_weighted,
)


def sigma0_function(cfg: SigmaConfig | None = None) -> FockFunction:
    cfg = cfg or default_config()
    return FockFunction(
        label="sigma0",
        weighted=lambda z: sigma0_weighted(np.asarray(z, dtype=complex), cfg),
        known_zeros=(),
        feature_radius=1.0,
        gaussian_tail=False,
        growth_tag="polynomial",
    )


def build_corpus(cfg: SigmaConfig | None = None) -> list[FockFunction]:
    """The 20 members, deterministic order."""
    cfg = cfg or default_config()
    from .construction import ConstructionParams, build_profile, sigma3_function

    members: list[FockFunction] = [
        kernel_function(KernelSpec(0.0)),                       # constant 1
        kernel_function(KernelSpec(1.0)),
        kernel_function(KernelSpec(1j)),
        kernel_function(KernelSpec(1.0 + 1j)),
        kernel_function(KernelSpec(-2.0 + 0.5j)),
        kernel_function(KernelSpec(3.5j)),
        kernel_function(KernelSpec(2.0, normalized=False)),
        kernel_combination([(2 ** -0.5, 1.0), (2 ** -0.5, -1.0)], "sym-pair"),
        kernel_combination([(1.0, 2j), (-0.5, 1.0 - 1j)], "tilt-pair"),
        kernel_combination([(0.3 + 0.4j, 0.5), (0.8, -1.5j), (-0.2j, 2.0 + 2j)],
                           "three-term"),
        bargmann_gabor(GaborAtom(0.5, 0.25)),
        bargmann_gabor(GaborAtom(-1.0, 1.0)),
        polynomial_times_kernel((0.0,), 0.0, label="z*nk0"),
        polynomial_times_kernel((0.25 + 0.5j, -0.75 + 0.25j), 2.0 + 1j,
                                label="quad*nk"),
        sigma0_function(cfg),
        sigma3_function(cfg),
        biorthogonal_function(LatticeIndex(1, 0), cfg),
        biorthogonal_function(LatticeIndex(2, 1), cfg),
    ]
    params = ConstructionParams(q=8, levels=1)
    members.append(build_profile(params, cfg))              # two-bump profile
    members.append(kernel_combination(
        [(0.6, 0.25 + 0.25j), (0.4j, -0.5 + 1.5j), (0.2, 1.75)], "spread"))
    assert len(members) == 20
    return members


def decomposable_pairs(members: list[FockFunction]) -> list[tuple[int, int]]:
    """Index pairs (i, j) for which the closed-form inner product applies:
    at least one side is a pure kernel combination."""
    out = []
    for i, f in enumerate(members):
        for j, g in enumerate(members):
            if i < j and (f.is_pure_kernel_sum() or g.is_pure_kernel_sum()):
                out.append((i, j))
    return out
