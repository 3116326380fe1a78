"""Shared fixtures: cached LHV polytopes and the long-running gate.

Vertex lists and facet hulls are expensive enough to share across test
modules; they are immutable, so a module-level cache is safe.  Tests marked
``long_running`` only run when BELLSCOPE_LONG_RUNNING=1 is exported.
"""

import os
from functools import lru_cache

import pytest

from bellscope.ffun import Scenario, lhv_vertices
from bellscope.poly import hull_facets

LONG_RUNNING = os.environ.get("BELLSCOPE_LONG_RUNNING") == "1"


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "long_running: multi-minute computations, gated behind "
        "BELLSCOPE_LONG_RUNNING=1")


def pytest_collection_modifyitems(config, items):
    if LONG_RUNNING:
        return
    skip = pytest.mark.skip(reason="set BELLSCOPE_LONG_RUNNING=1 to run")
    for item in items:
        if "long_running" in item.keywords:
            item.add_marker(skip)


@lru_cache(maxsize=None)
def cached_vertices(n, c, d):
    return tuple(lhv_vertices(Scenario(n, c, d)))


@lru_cache(maxsize=None)
def cached_hull(n, c, d):
    return hull_facets(cached_vertices(n, c, d))


class LhvCache:
    vertices = staticmethod(cached_vertices)
    hull = staticmethod(cached_hull)


@pytest.fixture(scope="session")
def lhv():
    return LhvCache
