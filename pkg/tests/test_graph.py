import json

import pytest
from hypothesis import given, settings, strategies as st

from sepshift.errors import ParseError, SinkOrSource, UnknownReference
from sepshift.graph import (
    BLUE,
    RED,
    Digraph,
    DiEdge,
    Edge,
    GfsGraph,
    Layer,
    digraph_from_matrix,
    export_dot,
    gfs_from_digraph,
    make_gfs,
    matrix_axes,
    parse_graph,
    red_blue_matrices,
    resource_budget,
    serialize_graph,
    validate_gfs,
    validate_layer,
)
from sepshift.suite import GFS6X4_A, GFS6X4_I, fixture


def test_gfs6x4_matrices_match_the_known_values():
    A, I = red_blue_matrices(fixture("gfs6x4"))
    assert A == GFS6X4_A
    assert I == GFS6X4_I


def test_gfs2x1_matrices():
    A, I = red_blue_matrices(fixture("gfs2x1"))
    assert A == [[2], [1]]
    assert I == [[1], [1]]


def test_matrix_axes_are_sorted_names():
    g = fixture("gfs6x4")
    rows, cols = matrix_axes(g)
    assert rows == sorted(g.bottom) and cols == sorted(g.top)


@pytest.mark.parametrize("name", ["gfs6x4", "gfs2x1", "no000", "full2", "loop", "ldiag3"])
def test_serialize_round_trip(name):
    g = fixture(name)
    assert parse_graph(serialize_graph(g)) == g


def test_bundled_gfs_fixtures_validate():
    for name in ("gfs6x4", "gfs2x1"):
        assert validate_gfs(fixture(name)).ok


def test_parse_error_reports_line_and_column():
    with pytest.raises(ParseError) as exc:
        parse_graph('{"kind": "gfs",\n "top": [1, }')
    assert exc.value.line == 2


def test_unknown_kind_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_graph('{"kind": "tree"}')


def test_missing_key_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_graph('{"kind": "layer", "top": []}')


def test_bad_color_is_located():
    text = json.dumps({"kind": "gfs", "top": ["v"], "bottom": ["w"], "edges": [{"id": "e", "src": "w", "tgt": "v", "color": "green"}]}, indent=1)
    with pytest.raises(ParseError) as exc:
        parse_graph(text)
    assert exc.value.line > 1


def test_dangling_vertex_is_unknown_reference():
    text = json.dumps({"kind": "gfs", "top": ["v"], "bottom": ["w"], "edges": [{"id": "e", "src": "x", "tgt": "v", "color": "blue"}]})
    with pytest.raises(UnknownReference):
        parse_graph(text)


def test_separation_naming_unknown_edge():
    text = json.dumps(
        {"kind": "layer", "top": ["v"], "bottom": ["w"], "edges": [{"id": "e", "src": "w", "tgt": "v", "color": "blue"}], "separation": {"v": [["e", "zz"]]}}
    )
    with pytest.raises(UnknownReference):
        parse_graph(text)


def test_validate_layer_flags_uncovered_and_misplaced_edges():
    edges = [Edge("e", "w", "v", BLUE), Edge("f", "w", "u", RED)]
    lay = Layer(["v", "u"], ["w"], edges, {"v": [["e", "f"]], "u": []})
    rules = validate_layer(lay).rules()
    assert "block-range" in rules and "block-cover" in rules


def test_validate_layer_flags_duplicate_and_empty_blocks():
    edges = [Edge("e", "w", "v", BLUE)]
    lay = Layer(["v"], ["w"], edges, {"v": [["e"], ["e"], []]})
    rules = validate_layer(lay).rules()
    assert {"block-disjoint", "block-nonempty"} <= rules


def test_validate_gfs_requires_one_blue_edge_per_bottom_vertex():
    edges = [Edge("b1", "w", "v", BLUE), Edge("r", "w", "v", RED), Edge("b2", "x", "v", BLUE)]
    g = make_gfs(["v"], ["w", "x"], edges)
    assert "gfs-b-red-cover" in validate_gfs(g).rules()


def test_validate_gfs_requires_nonempty_red_block():
    g = make_gfs(["v"], ["w"], [Edge("b", "w", "v", BLUE)])
    rep = validate_gfs(g)
    assert not rep.ok and "block-nonempty" in rep.rules()


def test_gfs_from_digraph_shape():
    E = fixture("no000")
    g = gfs_from_digraph(E)
    assert isinstance(g, GfsGraph)
    assert g.count(BLUE) == len(E.vertices) == 4
    assert g.count(RED) == len(E.edges) == 7
    assert validate_gfs(g).ok


def test_digraph_with_sink_is_rejected():
    E = Digraph(["a", "b"], [DiEdge("x", "a", "b")])
    with pytest.raises(SinkOrSource):
        gfs_from_digraph(E)


def test_dot_export_colors_red_edges():
    text = export_dot(fixture("gfs6x4"))
    red = [ln for ln in text.splitlines() if "color=red" in ln]
    assert len(red) == sum(map(sum, GFS6X4_A))
    assert text.startswith("digraph")


def test_dot_export_of_diagram_ranks_levels(tmp_path):
    from conftest import resolution

    text = export_dot(resolution("gfs2x1", 3))
    assert text.count("rank=same") == 4


def test_budget_reads_environment(monkeypatch):
    monkeypatch.setenv("SEPSHIFT_BUDGET", "17")
    assert resource_budget() == 17
    assert resource_budget(5) == 5
    monkeypatch.delenv("SEPSHIFT_BUDGET")
    assert resource_budget() == 10**6


square = st.integers(1, 3).flatmap(lambda n: st.lists(st.lists(st.integers(0, 2), min_size=n, max_size=n), min_size=n, max_size=n))


@settings(max_examples=60, deadline=None)
@given(square)
def test_digraph_matrices_round_trip(M):
    """The red matrix of the GFS of a digraph is the adjacency matrix; blue is the identity."""
    n = len(M)
    if any(sum(r) == 0 for r in M) or any(sum(M[i][j] for i in range(n)) == 0 for j in range(n)):
        return
    E = digraph_from_matrix(M, [f"v{i}" for i in range(n)])
    g = gfs_from_digraph(E)
    A, I = red_blue_matrices(g)
    assert A == [[M[i][j] for j in range(n)] for i in range(n)]
    assert I == [[int(i == j) for j in range(n)] for i in range(n)]
    assert parse_graph(serialize_graph(g)) == g
    assert validate_gfs(g).ok
