import copy

import pytest
from hypothesis import given, settings, strategies as st

from sepshift.errors import HorizonExceeded, ResourceBudgetExceeded
from sepshift.graph import BLUE, RED, Digraph, DiEdge, digraph_from_matrix, gfs_from_digraph, validate_gfs
from sepshift.ldiagram import ldiagram_from_obj, validate_ldiagram
from sepshift.resolution import (
    adjacency_recursion_check,
    canonical_resolution,
    check_resolution_vs_higher_edge,
    find_isomorphism,
    higher_edge_graph,
    one_step_resolution,
    resolution_size,
    resolve,
)
from sepshift.suite import fixture

from conftest import gfs, resolution


def test_one_step_resolution_of_gfs2x1():
    g = gfs("gfs2x1")
    lay = one_step_resolution(g)
    assert len(lay.bottom) == 6
    assert len(lay.edges) == 12
    assert set(lay.top) == set(g.bottom)
    assert resolution_size(g) == (6, 12)


def test_structured_names_pick_one_edge_per_block():
    g = gfs("gfs2x1")
    res = resolve(g)
    for vid, name in res.vertex_names.items():
        assert name.base == "v"
        assert [x in b for x, b in zip(name.choice, g.blocks("v"))] == [True, True]
    for eid, name in res.edge_names.items():
        e = res.layer.edge[eid]
        assert e.color == g.edge[name.distinguished].color
        assert e.tgt == g.edge[name.distinguished].src


def test_resolution_blocks_are_indexed_by_edges_of_the_layer_above():
    g = gfs("gfs2x1")
    lay = one_step_resolution(g)
    for w in lay.top:
        assert len(lay.blocks(w)) == len([e for e in g.edges if e.src == w])
        for blk in lay.blocks(w):
            colors = {lay.edge[x].color for x in blk}
            assert len(colors) == 1


@pytest.mark.parametrize("name", ["gfs6x4", "gfs2x1", "full2", "no000", "loop"])
def test_even_layers_are_gfs(name):
    d = resolution(name, 5)
    assert validate_ldiagram(d).ok
    for n in range(0, d.horizon, 2):
        assert validate_gfs(d.layers[n]).ok


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, 2), min_size=2, max_size=2), min_size=2, max_size=2))
def test_size_formula_matches_the_construction(rows):
    for r in rows:
        r[rows.index(r) % 2] += 1  # avoid sinks and sources
    try:
        E = digraph_from_matrix(rows)
        g = gfs_from_digraph(E)
    except Exception:
        return
    d = canonical_resolution(g, 4)
    for k in range(1, d.horizon):
        assert resolution_size(d.layers[k - 1]) == (len(d.layers[k].bottom), len(d.layers[k].edges))


def test_higher_edge_graph_sizes():
    E = fixture("no000")
    H = higher_edge_graph(E, 1)
    assert len(H.vertices) == len(E.edges) == 7
    F = fixture("full2")
    H2 = higher_edge_graph(F, 2)
    assert (len(H2.vertices), len(H2.edges)) == (4, 8)
    L = higher_edge_graph(fixture("loop"), 3)
    assert (len(L.vertices), len(L.edges)) == (1, 1)
    with pytest.raises(ValueError):
        higher_edge_graph(E, 0)


@pytest.mark.parametrize("name,N", [("no000", 1), ("no000", 2), ("loop", 2), ("full2", 1), ("full2", 2)])
def test_resolution_matches_higher_edge_graph(name, N):
    ok, iso = check_resolution_vs_higher_edge(fixture(name), N)
    assert ok
    assert iso


def test_find_isomorphism_rejects_different_layers():
    a = gfs_from_digraph(fixture("full2"))
    b = gfs_from_digraph(higher_edge_graph(fixture("full2"), 1))
    assert find_isomorphism(a, b) is None
    assert find_isomorphism(a, a) is not None


def test_find_isomorphism_respects_color():
    E = Digraph(["x", "y"], [DiEdge("a", "x", "y"), DiEdge("b", "y", "x"), DiEdge("c", "x", "x")])
    g = gfs_from_digraph(E)
    obj_edges = [type(e)(e.id, e.src, e.tgt, RED if e.color == BLUE else BLUE) for e in g.edges]
    flipped = type(g)(g.top, g.bottom, obj_edges, g.separation, g.labels)
    assert find_isomorphism(g, flipped) is None


@pytest.mark.parametrize("name,depth", [("gfs6x4", 5), ("gfs2x1", 5), ("full2", 7), ("no000", 5)])
def test_adjacency_recursion_holds(name, depth):
    d = resolution(name, depth)
    for j in range((depth - 3) // 2 + 1):
        ok, wit = adjacency_recursion_check(d, j)
        assert ok, wit


def test_adjacency_recursion_needs_enough_layers():
    with pytest.raises(HorizonExceeded):
        adjacency_recursion_check(resolution("gfs6x4", 3), 1)


def test_adjacency_recursion_detects_a_duplicated_red_edge():
    d = resolution("gfs6x4", 3)
    obj = copy.deepcopy(d.to_obj())
    lay = obj["layers"][2]
    red = next(e for e in lay["edges"] if e["color"] == "red")
    lay["edges"].append(dict(red, id=red["id"] + "x"))
    bad = ldiagram_from_obj(obj)
    ok, wit = adjacency_recursion_check(bad, 0)
    assert not ok
    assert set(wit) == {"row", "column", "lhs", "rhs"}


def test_budget_caps_the_resolution(monkeypatch):
    with pytest.raises(ResourceBudgetExceeded):
        canonical_resolution(gfs("gfs2x1"), 8, budget=1000)
    monkeypatch.setenv("SEPSHIFT_BUDGET", "10")
    with pytest.raises(ResourceBudgetExceeded):
        canonical_resolution(gfs("gfs2x1"), 4)
