"""Shared builds. Trees are cached per session because several modules reuse them."""
from __future__ import annotations

from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings

from sparse_weight_lab import BuildParams, build, parse_kernel

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

RIESZ2 = "riesz:d=2,j=1"


@lru_cache(maxsize=None)
def tree_for(d: int, N: int, K: int, kernel: str | None = None, **kw):
    kernel = kernel or ("hilbert" if d == 1 else RIESZ2)
    return build(BuildParams(N, d, K, parse_kernel(kernel), max_support_cells=None, **kw))


@pytest.fixture(scope="session")
def hilbert():
    return parse_kernel("hilbert")


@pytest.fixture(scope="session")
def riesz2():
    return parse_kernel(RIESZ2)
