from __future__ import annotations

import pytest

from fockgabor.weierstrass import sigma_config


@pytest.fixture(scope="session")
def cfg():
    return sigma_config()


@pytest.fixture(scope="session")
def built(cfg):
    """The default-scale construction, built once for the whole run."""
    from fockgabor.construction import ConstructionParams, build_construction

    return build_construction(ConstructionParams(q=8, levels=3), cfg)


@pytest.fixture(scope="session")
def mixed_small(built):
    """A six-kernel mixed system with both dual families, built once."""
    from fockgabor.mixed_gram import mixed_system_from_construction

    return mixed_system_from_construction(built, max_kernels=6,
                                          section_sizes=(4, 6))
