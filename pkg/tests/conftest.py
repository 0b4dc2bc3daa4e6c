import functools

import pytest

from sepshift.graph import Digraph, gfs_from_digraph
from sepshift.ldiagram import build_ldiagram
from sepshift.resolution import canonical_resolution
from sepshift.suite import fixture, fixture_path
from sepshift.systems import FullOneSided, FullTwoSided


@functools.lru_cache(maxsize=None)
def gfs(name):
    g = fixture(name)
    return gfs_from_digraph(g) if isinstance(g, Digraph) else g


@functools.lru_cache(maxsize=None)
def resolution(name, depth):
    return canonical_resolution(gfs(name), depth)


@functools.lru_cache(maxsize=None)
def full1(depth):
    return build_ldiagram(FullOneSided(2), depth)


@functools.lru_cache(maxsize=None)
def full2(depth):
    return build_ldiagram(FullTwoSided(2), depth)


@pytest.fixture
def data_path():
    return lambda name: str(fixture_path(name))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
