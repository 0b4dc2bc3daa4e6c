"""Separated bipartite layers, generalized finite shift graphs, digraphs and their file formats."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, SinkOrSource, UnknownReference

DEFAULT_BUDGET = 10**6


def resource_budget(override: int | None = None) -> int:
    """Vertex cap per layer: explicit override, else SEPSHIFT_BUDGET, else 10^6."""
    if override is not None:
        return override
    env = os.environ.get("SEPSHIFT_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


class Color(str, Enum):
    BLUE = "blue"
    RED = "red"


BLUE = Color.BLUE
RED = Color.RED


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    tgt: str
    color: Color


@dataclass(frozen=True)
class DiEdge:
    id: str
    src: str
    tgt: str


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    witness: tuple = ()

    def to_json(self):
        return {"rule": self.rule, "message": self.message, "witness": list(map(str, self.witness))}


@dataclass
class Report:
    """Collected violations of one check; empty means the check passed."""

    check: str
    violations: list = field(default_factory=list)
    unchecked: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, rule, message, *witness):
        self.violations.append(Violation(rule, message, tuple(witness)))

    def extend(self, other: "Report"):
        self.violations.extend(other.violations)
        self.unchecked.extend(other.unchecked)

    def rules(self) -> set:
        return {v.rule for v in self.violations}

    def to_json(self):
        return {
            "check": self.check,
            "status": "pass" if self.ok else "fail",
            "violations": [v.to_json() for v in self.violations],
            "unchecked_at_horizon": list(self.unchecked),
        }

    def __bool__(self):
        return self.ok


class Layer:
    """One bipartite layer: edges run from bottom vertices to top vertices.

    ``separation`` maps each top vertex to an ordered tuple of blocks (tuples of
    edge ids). ``labels`` optionally tags each block: "B", "R", or the id of the
    red edge f of the layer above whose block R(f) it is.
    """

    kind = "layer"

    def __init__(self, top, bottom, edges, separation, labels=None):
        self.top = tuple(top)
        self.bottom = tuple(bottom)
        self.edges = tuple(edges)
        self.separation = {v: tuple(tuple(b) for b in blocks) for v, blocks in separation.items()}
        self.labels = None if labels is None else {v: tuple(ls) for v, ls in labels.items()}
        self.edge = {e.id: e for e in self.edges}
        ins = {v: [] for v in self.top}
        outs = {w: [] for w in self.bottom}
        for e in self.edges:
            ins.setdefault(e.tgt, []).append(e.id)
            outs.setdefault(e.src, []).append(e.id)
        self.in_edges = {v: tuple(ids) for v, ids in ins.items()}
        self.out_edges = {w: tuple(ids) for w, ids in outs.items()}

    def blocks(self, v) -> tuple:
        return self.separation.get(v, ())

    def block_labels(self, v) -> tuple:
        if self.labels is not None and v in self.labels:
            return self.labels[v]
        return tuple(str(i) for i in range(len(self.blocks(v))))

    def block(self, v, label):
        for lab, blk in zip(self.block_labels(v), self.blocks(v)):
            if lab == label:
                return blk
        return ()

    def key(self):
        """Structural identity, insensitive to declaration order of vertices and edges."""
        sep = tuple(sorted((v, tuple(frozenset(b) for b in bl)) for v, bl in self.separation.items()))
        labs = None if self.labels is None else tuple(sorted(self.labels.items()))
        return (
            self.kind,
            frozenset(self.top),
            frozenset(self.bottom),
            frozenset(self.edges),
            sep,
            labs,
        )

    def __eq__(self, other):
        return isinstance(other, Layer) and self.key() == other.key()

    def __hash__(self):
        return hash((self.kind, len(self.edges), len(self.top)))

    def __repr__(self):
        return f"{type(self).__name__}(top={len(self.top)}, bottom={len(self.bottom)}, edges={len(self.edges)})"

    def with_kind(self, cls):
        return cls(self.top, self.bottom, self.edges, self.separation, self.labels)

    def count(self, color: Color) -> int:
        return sum(1 for e in self.edges if e.color == color)


class GfsGraph(Layer):
    """A layer whose separation at each top vertex is {B_v, R_v}."""

    kind = "gfs"

    def blue(self, v) -> tuple:
        return tuple(i for i in self.in_edges.get(v, ()) if self.edge[i].color == BLUE)

    def red(self, v) -> tuple:
        return tuple(i for i in self.in_edges.get(v, ()) if self.edge[i].color == RED)


def make_gfs(top, bottom, edges) -> GfsGraph:
    """Build a GFS graph from colored edges; separations are derived from colors."""
    edges = tuple(edges)
    sep, labels = {}, {}
    for v in top:
        b = tuple(e.id for e in edges if e.tgt == v and e.color == BLUE)
        r = tuple(e.id for e in edges if e.tgt == v and e.color == RED)
        sep[v] = (b, r)
        labels[v] = ("B", "R")
    return GfsGraph(top, bottom, edges, sep, labels)


class Digraph:
    kind = "digraph"

    def __init__(self, vertices, edges):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.edge = {e.id: e for e in self.edges}

    def key(self):
        return (self.kind, frozenset(self.vertices), frozenset(self.edges))

    def __eq__(self, other):
        return isinstance(other, Digraph) and self.key() == other.key()

    def __hash__(self):
        return hash((len(self.vertices), len(self.edges)))

    def __repr__(self):
        return f"Digraph(vertices={len(self.vertices)}, edges={len(self.edges)})"

    def check_no_sinks_or_sources(self):
        srcs = {e.src for e in self.edges}
        tgts = {e.tgt for e in self.edges}
        bad = [v for v in self.vertices if v not in srcs or v not in tgts]
        if bad:
            raise SinkOrSource(f"vertices without incoming or outgoing edges: {sorted(bad)}")


# ---------------------------------------------------------------- validation


def validate_layer(layer: Layer) -> Report:
    rep = Report("layer")
    tops, bottoms = set(layer.top), set(layer.bottom)
    if len(tops) != len(layer.top):
        rep.add("unique-vertex", "duplicate top vertex name")
    if len(bottoms) != len(layer.bottom):
        rep.add("unique-vertex", "duplicate bottom vertex name")
    if len(layer.edge) != len(layer.edges):
        rep.add("unique-edge", "duplicate edge id")
    for e in layer.edges:
        if e.src not in bottoms:
            rep.add("edge-source", f"edge {e.id} has source {e.src} outside the bottom set", e.id)
        if e.tgt not in tops:
            rep.add("edge-range", f"edge {e.id} has range {e.tgt} outside the top set", e.id)
        if not isinstance(e.color, Color):
            rep.add("edge-color", f"edge {e.id} has no valid color", e.id)
    for v in layer.separation:
        if v not in tops:
            rep.add("separation-vertex", f"separation declared for unknown vertex {v}", v)
    for v in layer.top:
        seen = {}
        for bi, blk in enumerate(layer.blocks(v)):
            if not blk:
                rep.add("block-nonempty", f"empty separation block at {v}", v)
            for eid in blk:
                e = layer.edge.get(eid)
                if e is None:
                    rep.add("block-edge", f"block at {v} names unknown edge {eid}", v, eid)
                    continue
                if e.tgt != v:
                    rep.add("block-range", f"edge {eid} sits in a block of {v} but has range {e.tgt}", eid, v)
                if eid in seen:
                    rep.add("block-disjoint", f"edge {eid} appears in two blocks of {v}", eid, v)
                seen[eid] = bi
        for eid in layer.in_edges.get(v, ()):
            if eid not in seen:
                rep.add("block-cover", f"edge {eid} into {v} lies in no block", eid, v)
        if layer.labels is not None and v in layer.labels:
            if len(layer.labels[v]) != len(layer.blocks(v)):
                rep.add("block-labels", f"label count differs from block count at {v}", v)
    return rep


def validate_gfs(layer: Layer) -> Report:
    rep = Report("gfs")
    rep.extend(validate_layer(layer))
    if not rep.ok:
        return rep
    for v in layer.top:
        blocks = layer.blocks(v)
        colors = [{layer.edge[i].color for i in blk} for blk in blocks]
        blue_blocks = [b for b, c in zip(blocks, colors) if c == {BLUE}]
        red_blocks = [b for b, c in zip(blocks, colors) if c == {RED}]
        if len(blocks) != 2 or any(len(c) > 1 for c in colors):
            rep.add("gfs-a", f"separation at {v} is not one blue block and one red block", v)
        if not blue_blocks:
            rep.add("gfs-a", f"blue block B_{v} is empty", v)
        if not red_blocks:
            rep.add("gfs-a", f"red block R_{v} is empty", v)
        for blk in blue_blocks:
            srcs = [layer.edge[i].src for i in blk]
            if len(set(srcs)) != len(srcs):
                rep.add("gfs-b-distinct", f"two blue edges of B_{v} share a source (s(e) != s(e') fails)", v)
    blue_src = [e.src for e in layer.edges if e.color == BLUE]
    red_src = {e.src for e in layer.edges if e.color == RED}
    counts = {}
    for w in blue_src:
        counts[w] = counts.get(w, 0) + 1
    for w in layer.bottom:
        c = counts.get(w, 0)
        if c != 1:
            rep.add("gfs-b-blue-partition", f"bottom vertex {w} is the source of {c} blue edges", w)
        if w not in red_src:
            rep.add("gfs-b-red-cover", f"bottom vertex {w} is the source of no red edge", w)
    return rep


def as_gfs(layer: Layer) -> GfsGraph:
    if isinstance(layer, GfsGraph):
        return layer
    return make_gfs(layer.top, layer.bottom, layer.edges)


def red_blue_matrices(g: Layer):
    """(A, I) with rows = sorted bottom names, columns = sorted top names."""
    rows = sorted(g.bottom)
    cols = sorted(g.top)
    ri = {w: i for i, w in enumerate(rows)}
    ci = {v: j for j, v in enumerate(cols)}
    A = [[0] * len(cols) for _ in rows]
    I = [[0] * len(cols) for _ in rows]
    for e in g.edges:
        if e.color == RED:
            A[ri[e.src]][ci[e.tgt]] += 1
        else:
            I[ri[e.src]][ci[e.tgt]] = 1
    return A, I


def matrix_axes(g: Layer):
    return sorted(g.bottom), sorted(g.top)


def gfs_from_digraph(E: Digraph) -> GfsGraph:
    """Top copy v^ and bottom copy v_ of each vertex, blue v_ -> v^, red copy of each edge.

    A red copy of f runs from the bottom copy of s(f) to the top copy of r(f).
    """
    E.check_no_sinks_or_sources()
    top = [f"{v}^" for v in E.vertices]
    bottom = [f"{v}_" for v in E.vertices]
    edges = [Edge(f"b:{v}", f"{v}_", f"{v}^", BLUE) for v in E.vertices]
    edges += [Edge(f"r:{f.id}", f"{f.src}_", f"{f.tgt}^", RED) for f in E.edges]
    return make_gfs(top, bottom, edges)


def digraph_from_matrix(M: Sequence[Sequence[int]], names=None) -> Digraph:
    """Digraph with M[i][j] edges from vertex i to vertex j."""
    n = len(M)
    names = list(names) if names is not None else [str(i) for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            for k in range(M[i][j]):
                edges.append(DiEdge(f"{names[i]}>{names[j]}#{k}", names[i], names[j]))
    return Digraph(names, edges)


# ---------------------------------------------------------------- file format


def _locate(text: str, token) -> tuple[int, int]:
    needle = json.dumps(token) if not isinstance(token, str) or not token.startswith('"') else token
    pos = text.find(needle)
    if pos < 0:
        return 1, 1
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _need(obj, key, text, kind=list):
    if key not in obj:
        raise ParseError(f"missing key '{key}'", 1, 1)
    val = obj[key]
    if not isinstance(val, kind):
        line, col = _locate(text, f'"{key}"')
        raise ParseError(f"key '{key}' has the wrong type", line, col)
    return val


def _layer_from_obj(obj: Mapping, text: str, kind: str) -> Layer:
    top = [str(v) for v in _need(obj, "top", text)]
    bottom = [str(v) for v in _need(obj, "bottom", text)]
    edges = []
    for raw in _need(obj, "edges", text):
        if not isinstance(raw, dict) or not {"id", "src", "tgt", "color"} <= raw.keys():
            line, col = _locate(text, f'"{raw.get("id")}"' if isinstance(raw, dict) else "edges")
            raise ParseError("edge objects need id, src, tgt and color", line, col)
        try:
            color = Color(raw["color"])
        except ValueError:
            line, col = _locate(text, f'"{raw["color"]}"')
            raise ParseError(f"unknown color {raw['color']!r}", line, col) from None
        edges.append(Edge(str(raw["id"]), str(raw["src"]), str(raw["tgt"]), color))
    tops, bottoms = set(top), set(bottom)
    ids = {e.id for e in edges}
    for e in edges:
        if e.src not in bottoms:
            raise UnknownReference(f"edge {e.id}: source {e.src} is not a bottom vertex")
        if e.tgt not in tops:
            raise UnknownReference(f"edge {e.id}: range {e.tgt} is not a top vertex")
    sep_raw = obj.get("separation")
    if sep_raw is None and kind == "gfs":
        g = make_gfs(top, bottom, edges)
        return g
    if not isinstance(sep_raw, dict):
        line, col = _locate(text, '"separation"')
        raise ParseError("separation must map top vertices to lists of blocks", line, col)
    sep = {}
    for v, blocks in sep_raw.items():
        if v not in tops:
            raise UnknownReference(f"separation names unknown top vertex {v}")
        if not isinstance(blocks, list) or not all(isinstance(b, list) for b in blocks):
            line, col = _locate(text, f'"{v}"')
            raise ParseError(f"separation of {v} must be a list of lists of edge ids", line, col)
        for b in blocks:
            for eid in b:
                if not isinstance(eid, str):
                    line, col = _locate(text, f'"{v}"')
                    raise ParseError(f"separation of {v} contains a non-string edge id", line, col)
                if eid not in ids:
                    raise UnknownReference(f"separation of {v} names unknown edge {eid}")
        sep[v] = blocks
    for v in top:
        sep.setdefault(v, [])
    labels = obj.get("labels")
    if labels is not None and not isinstance(labels, dict):
        line, col = _locate(text, '"labels"')
        raise ParseError("labels must map top vertices to lists", line, col)
    cls = GfsGraph if kind == "gfs" else Layer
    return cls(top, bottom, edges, sep, labels)


def _digraph_from_obj(obj: Mapping, text: str) -> Digraph:
    verts = [str(v) for v in _need(obj, "vertices", text)]
    edges = []
    vs = set(verts)
    for raw in _need(obj, "edges", text):
        if not isinstance(raw, dict) or not {"id", "src", "tgt"} <= raw.keys():
            line, col = _locate(text, '"edges"')
            raise ParseError("digraph edge objects need id, src and tgt", line, col)
        e = DiEdge(str(raw["id"]), str(raw["src"]), str(raw["tgt"]))
        if e.src not in vs or e.tgt not in vs:
            raise UnknownReference(f"digraph edge {e.id} names an unknown vertex")
        edges.append(e)
    return Digraph(verts, edges)


def graph_from_obj(obj, text=""):
    if not isinstance(obj, dict):
        raise ParseError("top-level value must be an object", 1, 1)
    kind = obj.get("kind")
    if kind in ("layer", "gfs"):
        return _layer_from_obj(obj, text, kind)
    if kind == "digraph":
        return _digraph_from_obj(obj, text)
    if kind == "ldiagram":
        from .ldiagram import ldiagram_from_obj

        return ldiagram_from_obj(obj, text)
    line, col = _locate(text, '"kind"')
    raise ParseError(f"unknown kind {kind!r}", line, col)


def parse_graph(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return graph_from_obj(obj, text)


def load_graph(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def graph_to_obj(g) -> dict:
    if isinstance(g, Digraph):
        return {
            "kind": "digraph",
            "vertices": list(g.vertices),
            "edges": [{"id": e.id, "src": e.src, "tgt": e.tgt} for e in g.edges],
        }
    if isinstance(g, Layer):
        obj = {
            "kind": g.kind,
            "top": list(g.top),
            "bottom": list(g.bottom),
            "edges": [{"id": e.id, "src": e.src, "tgt": e.tgt, "color": e.color.value} for e in g.edges],
            "separation": {v: [list(b) for b in g.blocks(v)] for v in g.top},
        }
        if g.labels is not None:
            obj["labels"] = {v: list(ls) for v, ls in g.labels.items()}
        return obj
    to_obj = getattr(g, "to_obj", None)
    if to_obj is None:
        raise TypeError(f"cannot serialize {type(g).__name__}")
    return to_obj()


def serialize_graph(g) -> str:
    return json.dumps(graph_to_obj(g), indent=1, sort_keys=False)


def _q(name) -> str:
    return json.dumps(str(name))


def _dot_edges(layer: Layer, top_prefix: str, bottom_prefix: str) -> list[str]:
    out = []
    for e in sorted(layer.edges, key=lambda e: e.id):
        style = ' [color=red, label=' + _q(e.id) + "]" if e.color == RED else " [label=" + _q(e.id) + "]"
        out.append(f"  {_q(bottom_prefix + e.src)} -> {_q(top_prefix + e.tgt)}{style};")
    return out


def export_dot(g) -> str:
    """DOT text; red edges carry color=red, layers are ranked top to bottom."""
    lines = ["digraph G {", "  rankdir=BT;"]
    if isinstance(g, Digraph):
        for v in g.vertices:
            lines.append(f"  {_q(v)};")
        for e in g.edges:
            lines.append(f"  {_q(e.src)} -> {_q(e.tgt)} [label={_q(e.id)}];")
    elif isinstance(g, Layer):
        lines.append("  { rank=same; " + " ".join(_q("top:" + v) + ";" for v in sorted(g.top)) + " }")
        lines.append("  { rank=same; " + " ".join(_q("bot:" + w) + ";" for w in sorted(g.bottom)) + " }")
        lines += _dot_edges(g, "top:", "bot:")
    else:
        layers = g.layers
        names = [layers[0].top] + [lay.bottom for lay in layers] if layers else []
        for k, vs in enumerate(names):
            lines.append("  { rank=same; " + " ".join(_q(v) + ";" for v in sorted(vs)) + " }")
        for lay in layers:
            lines += _dot_edges(lay, "", "")
    lines.append("}")
    return "\n".join(lines) + "\n"


def dedupe(items: Iterable):
    seen, out = set(), []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out
