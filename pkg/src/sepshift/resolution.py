"""One-step and canonical resolutions, higher edge graphs and the adjacency recursion."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import product
from math import prod

from .errors import HorizonExceeded, ResourceBudgetExceeded
from .graph import (
    BLUE,
    RED,
    DiEdge,
    Digraph,
    Edge,
    GfsGraph,
    Layer,
    as_gfs,
    gfs_from_digraph,
    resource_budget,
)
from .ldiagram import LDiagram


@dataclass(frozen=True)
class VertexName:
    """v(x_1, ..., x_k): base top vertex u and one edge chosen from each block of u."""

    base: str
    choice: tuple


@dataclass(frozen=True)
class EdgeName:
    """alpha^{x_i}(x_1, ..., x_i omitted, ..., x_k)."""

    distinguished: str
    rest: tuple
    position: int


@dataclass
class Resolution:
    layer: Layer
    vertex_names: dict
    edge_names: dict


def resolution_size(layer: Layer) -> tuple[int, int]:
    """(new vertices, new edges) = (sum_u prod |X_i|, sum_u sum_i |X_i| prod_{j != i} |X_j|)."""
    nv = ne = 0
    for u in layer.top:
        sizes = [len(b) for b in layer.blocks(u)]
        p = prod(sizes)
        nv += p
        ne += p * len(sizes) if all(sizes) else 0
    return nv, ne


def resolve(layer: Layer, compact: str | None = None, budget: int | None = None) -> Resolution:
    """The 1-step resolution with its structured names.

    With ``compact`` set, vertices and edges get short sortable ids prefixed by
    that string; otherwise ids spell out the structured names.
    """
    nv, ne = resolution_size(layer)
    cap = resource_budget(budget)
    if nv > cap:
        raise ResourceBudgetExceeded(f"resolution needs {nv} vertices, cap is {cap}")
    vw = len(str(max(nv - 1, 0)))
    ew = len(str(max(ne - 1, 0)))
    vnames, enames = {}, {}
    bottom, edges = [], []
    by_x = defaultdict(list)
    for u in layer.top:
        blocks = layer.blocks(u)
        for choice in product(*blocks):
            vn = VertexName(u, choice)
            vid = f"{compact}v{len(bottom):0{vw}d}" if compact else f"v({','.join(choice)})"
            vnames[vid] = vn
            bottom.append(vid)
            for i, x in enumerate(choice):
                en = EdgeName(x, choice[:i] + choice[i + 1 :], i)
                if compact:
                    eid = f"{compact}e{len(edges):0{ew}d}"
                else:
                    eid = f"a[{x}]({','.join(en.rest)})"
                enames[eid] = en
                ex = layer.edge[x]
                edges.append(Edge(eid, vid, ex.src, ex.color))
                by_x[x].append(eid)
    sep, labels = {}, {}
    for w in layer.bottom:
        xs = layer.out_edges.get(w, ())
        sep[w] = tuple(tuple(by_x[x]) for x in xs)
        labels[w] = tuple(xs)
    new = Layer(layer.bottom, bottom, edges, sep, labels)
    return Resolution(new, vnames, enames)


def one_step_resolution(layer: Layer, budget: int | None = None) -> Layer:
    """Bottom vertices v(x_1..x_k), edges alpha^{x_i}(...) from v(x) to s(x_i), blocks X(x)."""
    return resolve(layer, None, budget).layer


def canonical_resolution(g: Layer, depth: int, budget: int | None = None, prefix: str = "") -> LDiagram:
    """Layer 0 is g; layer k+1 is the 1-step resolution of layer k.

    Red blocks on odd levels are labelled by the red edge x that indexes X(x).
    ``prefix`` is prepended to generated ids so several resolutions can share a diagram.
    """
    g = as_gfs(g)
    layers = [Layer(g.top, g.bottom, g.edges, {v: (g.blue(v), g.red(v)) for v in g.top}, {v: ("B", "R") for v in g.top})]
    vnames, enames = {}, {}
    for k in range(1, depth):
        res = resolve(layers[-1], compact=f"{prefix}{k + 1}.", budget=budget)
        vnames.update(res.vertex_names)
        enames.update(res.edge_names)
        lay = res.layer
        labels = {}
        for w in lay.top:
            labs = []
            for x in lay.labels[w]:
                if layers[-1].edge[x].color == BLUE:
                    labs.append("B")
                else:
                    labs.append("R" if k % 2 == 0 else x)
            labels[w] = tuple(labs)
        layers.append(Layer(lay.top, lay.bottom, lay.edges, lay.separation, labels))
    return LDiagram(layers[:depth], {"vertex_names": vnames, "edge_names": enames, "gfs": g})


def even_layer_gfs(d: LDiagram, n: int) -> GfsGraph:
    lay = d.layers[n]
    return as_gfs(lay)


# ---------------------------------------------------------------- higher edge graphs


def higher_edge_graph(E: Digraph, N: int) -> Digraph:
    """Vertices: words (w_1..w_N) with s(w_i) = r(w_{i+1}); edge (x_0..x_N) runs from x_1..x_N to x_0..x_{N-1}."""
    E.check_no_sinks_or_sources()
    if N < 1:
        raise ValueError("N must be at least 1")
    succ = defaultdict(list)
    for a in E.edges:
        for b in E.edges:
            if a.src == b.tgt:
                succ[a.id].append(b.id)
    words = [(e.id,) for e in E.edges]
    for _ in range(N - 1):
        words = [w + (b,) for w in words for b in succ[w[-1]]]
    longer = [w + (b,) for w in words for b in succ[w[-1]]]
    name = lambda w: ".".join(w)
    verts = [name(w) for w in words]
    edges = [DiEdge(name(x), name(x[1:]), name(x[:-1])) for x in longer]
    return Digraph(verts, edges)


def _colored_structure(g: Layer):
    """Vertex list and edge multiset (src, tgt, color) of a layer; top and bottom are kept apart."""
    verts = [("t", v) for v in g.top] + [("b", w) for w in g.bottom]
    edges = Counter((("b", e.src), ("t", e.tgt), e.color) for e in g.edges)
    return verts, edges


def find_isomorphism(g1: Layer, g2: Layer):
    """Layer-respecting isomorphism of colored bipartite multigraphs, or None.

    Color refinement gives initial classes; backtracking fixes the bijection.
    """
    v1, e1 = _colored_structure(g1)
    v2, e2 = _colored_structure(g2)
    if len(v1) != len(v2) or sum(e1.values()) != sum(e2.values()):
        return None
    adj1, adj2 = _adjacency(v1, e1), _adjacency(v2, e2)
    c1, c2 = _refine(v1, adj1, v2, adj2)
    if sorted(c1.values()) != sorted(c2.values()):
        return None
    order = sorted(v1, key=lambda v: (sum(1 for u in v1 if c1[u] == c1[v]), c1[v]))
    mapping, used = {}, set()

    def consistent(a, b):
        for (x, col), m in adj1[a].items():
            if x in mapping and adj2[b].get((mapping[x], col), 0) != m:
                return False
        return True

    def search(i):
        if i == len(order):
            return True
        a = order[i]
        for b in v2:
            if b in used or c2[b] != c1[a] or not consistent(a, b):
                continue
            mapping[a] = b
            used.add(b)
            if search(i + 1):
                return True
            del mapping[a]
            used.discard(b)
        return False

    if not search(0):
        return None
    return {a[1]: b[1] for a, b in mapping.items()}


def _adjacency(verts, edges):
    adj = {v: Counter() for v in verts}
    for (s, t, col), m in edges.items():
        adj[s][(t, ("out", col))] += m
        adj[t][(s, ("in", col))] += m
    return adj


def _refine(v1, adj1, v2, adj2):
    col1 = {v: v[0] for v in v1}
    col2 = {v: v[0] for v in v2}
    for _ in range(len(v1) + 1):
        sig1 = {v: (col1[v], tuple(sorted((col1[u], d, m) for (u, d), m in adj1[v].items()))) for v in v1}
        sig2 = {v: (col2[v], tuple(sorted((col2[u], d, m) for (u, d), m in adj2[v].items()))) for v in v2}
        palette = {s: i for i, s in enumerate(sorted(set(sig1.values()) | set(sig2.values()), key=repr))}
        new1 = {v: palette[sig1[v]] for v in v1}
        new2 = {v: palette[sig2[v]] for v in v2}
        if len(set(new1.values())) == len(set(col1.values())) and len(set(new2.values())) == len(set(col2.values())):
            col1, col2 = new1, new2
            break
        col1, col2 = new1, new2
    return col1, col2


def check_resolution_vs_higher_edge(E: Digraph, N: int, budget: int | None = None):
    """(ok, witness): level-2N layer of the resolution against gfs_from_digraph(E^{[N+1]})."""
    d = canonical_resolution(gfs_from_digraph(E), 2 * N + 1, budget)
    lhs = d.layers[2 * N]
    rhs = gfs_from_digraph(higher_edge_graph(E, N))
    iso = find_isomorphism(lhs, rhs)
    return iso is not None, iso


# ---------------------------------------------------------------- adjacency recursion


def _smul(a, b):
    """Sparse product of dict-of-dict integer matrices."""
    out = defaultdict(Counter)
    for i, row in a.items():
        acc = out[i]
        for k, x in row.items():
            for j, y in b.get(k, {}).items():
                acc[j] += x * y
    return {i: {j: v for j, v in r.items() if v} for i, r in out.items()}


def _transpose(a):
    out = defaultdict(dict)
    for i, row in a.items():
        for j, x in row.items():
            out[j][i] = x
    return out


def red_adjacency(d: LDiagram, n: int):
    """Rows: level n+1 vertices; columns: level n vertices; entries: red multiplicities."""
    out = defaultdict(Counter)
    for e in d.layers[n].edges:
        if e.color == RED:
            out[e.src][e.tgt] += 1
    return {i: dict(r) for i, r in out.items()}


def characteristic(d: LDiagram, n: int):
    """Rows: level n vertices; columns: level n+2 vertices two blue steps below."""
    out = defaultdict(dict)
    for w in d.level(n + 2):
        for e0, e1 in d.blue_pairs_from(w):
            out[d.tgt(e0)][w] = 1
    return out


def recursion_matrices(d: LDiagram, j: int):
    if d.horizon < 2 * j + 3:
        raise HorizonExceeded(f"recursion at j={j} needs {2 * j + 3} layers, have {d.horizon}")
    A0 = red_adjacency(d, 2 * j)
    A2 = red_adjacency(d, 2 * j + 2)
    P1 = characteristic(d, 2 * j)
    P2 = characteristic(d, 2 * j + 1)
    # D_{2j}: number of blue two-step paths hanging below each level-(2j+1) vertex
    below = Counter()
    for w in d.level(2 * j + 3):
        for e0, e1 in d.blue_pairs_from(w):
            below[d.tgt(e0)] += 1
    D = {w: {w: below[w]} for w in d.level(2 * j + 1) if below[w]}
    lhs = _smul(D, A0)
    rhs = _smul(_smul(P2, A2), _transpose(P1))
    return lhs, rhs


def adjacency_recursion_check(d: LDiagram, j: int):
    """(ok, witness) for D_{2j} A_{2j} = P_{2j+2} A_{2j+2} P_{2j+1}^T."""
    lhs, rhs = recursion_matrices(d, j)
    norm = lambda m: {(i, k): v for i, r in m.items() for k, v in r.items() if v}
    a, b = norm(lhs), norm(rhs)
    if a == b:
        return True, None
    diff = sorted(set(a) ^ set(b) | {k for k in set(a) & set(b) if a[k] != b[k]})
    i, k = diff[0]
    return False, {"row": i, "column": k, "lhs": a.get((i, k), 0), "rhs": b.get((i, k), 0)}


def matrix_csv(m, rows, cols) -> str:
    lines = []
    for i in rows:
        lines.append(",".join(str(m.get(i, {}).get(k, 0)) for k in cols))
    return "\n".join(lines) + "\n"


def dense_csv(M) -> str:
    return "\n".join(",".join(str(x) for x in row) for row in M) + "\n"
