"""Path-space dynamics of a truncated l-diagram, computed on blue prefixes.

A point of the path space is an infinite blue path (e_0, e_1, ...) starting at
level 0. At finite horizon we only ever see prefixes, and every operation here
states exactly how much depth it consumes:

* shift_prefix: even depth 2n+2 -> depth 2n+1
* preimages: odd depth 2n+1 -> depth 2n, one branch per red edge at s(e'_0)
* sigma_image: depth d -> depth d+1 (d even) or d+2 (d odd), an exact set identity
* sigma_preimage_set: depth d -> depth d+1 (d odd) or d+2 (d even), exact
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    EvenDepth,
    HorizonExceeded,
    InsufficientDepth,
    NoCompletion,
    NotHDiagram,
    OddDepth,
    StructureMismatch,
)
from .graph import BLUE, RED, Layer, Report, as_gfs
from .ldiagram import (
    LDiagram,
    complete_romb_from_blue,
    complete_romb_from_red,
    complete_romb_odd,
    validate_hdiagram,
)
from .resolution import canonical_resolution, find_isomorphism

# ---------------------------------------------------------------- prefixes


@dataclass(frozen=True)
class BluePrefix:
    """Blue path (e_0, ..., e_{m-1}) from level 0 down to level m; depth 0 is a level-0 vertex."""

    diagram: LDiagram = field(compare=False, hash=False, repr=False)
    edges: tuple
    root: str

    @property
    def depth(self) -> int:
        return len(self.edges)

    @property
    def end(self) -> str:
        return self.diagram.src(self.edges[-1]) if self.edges else self.root

    def truncate(self, m: int) -> "BluePrefix":
        if m > self.depth:
            raise InsufficientDepth(f"cannot truncate depth {self.depth} to {m}")
        return BluePrefix(self.diagram, self.edges[:m], self.root)

    def cell(self):
        """The clopen set of the end vertex, when the diagram was built from a system."""
        return self.diagram.meta["cells"][self.end]

    def __str__(self):
        return "(" + ", ".join(self.edges) + ")" if self.edges else f"<{self.root}>"


def prefix_of(d: LDiagram, v: str) -> BluePrefix:
    """The unique prefix ending at vertex v."""
    edges = d.blue_path_to_root(v)
    root = d.tgt(edges[0]) if edges else v
    return BluePrefix(d, edges, root)


def make_prefix(d: LDiagram, edges: Iterable[str], root: str | None = None) -> BluePrefix:
    """Validated constructor from an edge list."""
    edges = tuple(edges)
    for i, e in enumerate(edges):
        if e not in d.edge:
            raise NoCompletion(f"unknown edge {e}")
        if d.color(e) != BLUE or d.edge_layer[e] != i:
            raise NoCompletion(f"{e} is not a blue edge of layer {i}")
        if i and d.tgt(e) != d.src(edges[i - 1]):
            raise NoCompletion(f"{edges[i - 1]} and {e} are not composable")
    if edges:
        root = d.tgt(edges[0])
    elif root is None or d.vertex_level.get(root) != 0:
        raise NoCompletion("a depth-0 prefix needs a level-0 root vertex")
    return BluePrefix(d, edges, root)


def all_prefixes(d: LDiagram, m: int) -> list:
    if m > d.horizon:
        raise HorizonExceeded(f"depth {m} beyond horizon {d.horizon}")
    return [prefix_of(d, v) for v in d.level(m)]


def extensions(p: BluePrefix, to_depth: int) -> list:
    """All blue extensions of p to the given depth; their cylinders partition Z(p)."""
    d = p.diagram
    if to_depth > d.horizon:
        raise HorizonExceeded(f"depth {to_depth} beyond horizon {d.horizon}")
    if to_depth < p.depth:
        raise InsufficientDepth(f"cannot extend depth {p.depth} to {to_depth}")
    out = [p.edges]
    ends = [p.end]
    for _ in range(p.depth, to_depth):
        nxt, nends = [], []
        for path, v in zip(out, ends):
            for e in d.blue_in.get(v, ()):
                nxt.append(path + (e,))
                nends.append(d.src(e))
        out, ends = nxt, nends
    return [BluePrefix(d, path, p.root) for path in out]


def expand(d: LDiagram, vertices: Iterable[str], depth: int) -> frozenset:
    """The level-`depth` vertices lying below the given vertices of one level."""
    cur = set(vertices)
    if not cur:
        return frozenset()
    level = {d.vertex_level[v] for v in cur}
    if len(level) != 1:
        raise ValueError("vertices must lie on one level")
    (lvl,) = level
    if depth > d.horizon:
        raise HorizonExceeded(f"depth {depth} beyond horizon {d.horizon}")
    if depth < lvl:
        raise InsufficientDepth(f"cannot expand level {lvl} to {depth}")
    for _ in range(lvl, depth):
        cur = {d.src(e) for v in cur for e in d.blue_in.get(v, ())}
    return frozenset(cur)


# ---------------------------------------------------------------- shift and preimages


def red_trace(p: BluePrefix) -> tuple:
    """(f_0, ..., f_{m-1}) from the rombs closing each blue pair (e_{2j}, e_{2j+1})."""
    d = p.diagram
    out = []
    for j in range(p.depth // 2):
        r = complete_romb_from_blue(d, p.edges[2 * j], p.edges[2 * j + 1])
        out += [r.f0, r.f1]
    return tuple(out)


def label_at(p: BluePrefix, level: int = 0) -> str:
    """The red edge f_level of the romb closing (e_level, e_level+1); level is even."""
    if level % 2:
        raise OddDepth("labels live on even levels")
    if p.depth < level + 2:
        raise InsufficientDepth(f"label at level {level} needs depth {level + 2}, have {p.depth}")
    return complete_romb_from_blue(p.diagram, p.edges[level], p.edges[level + 1]).f0


def shift_prefix(p: BluePrefix) -> BluePrefix:
    """sigma on prefixes: sigma(Z(e_0..e_{2n+1})) is contained in Z(result), result of depth 2n+1."""
    if p.depth % 2 or p.depth < 2:
        raise OddDepth(f"shift needs an even depth >= 2, got {p.depth}")
    d = p.diagram
    f = red_trace(p)
    out = [None] * (p.depth - 1)
    for j in range(1, p.depth // 2):
        out[2 * j - 1], out[2 * j] = complete_romb_from_red(d, f[2 * j - 1], f[2 * j])
    v = d.src(f[0])
    e0 = d.blue_parent(v)
    if e0 is None:
        raise NoCompletion(f"{v} has no unique blue edge to level 0")
    out[0] = e0
    return BluePrefix(d, tuple(out), d.tgt(e0))


def _branch(d: LDiagram, p: BluePrefix, f0: str) -> BluePrefix:
    e = p.edges
    n = (p.depth - 1) // 2
    f = [f0]
    for j in range(n):
        r = complete_romb_odd(d, f[2 * j], e[2 * j + 1], e[2 * j + 2])
        f += [r.f0, r.f1]
    out = []
    for j in range(n):
        out += list(complete_romb_from_red(d, f[2 * j], f[2 * j + 1]))
    return BluePrefix(d, tuple(out), d.tgt(f0))


def preimages(p: BluePrefix) -> list:
    """[(f_0, prefix)]: one preimage branch per red edge f_0 leaving s(e'_0)."""
    if p.depth % 2 == 0:
        raise EvenDepth(f"preimages need an odd depth, got {p.depth}")
    d = p.diagram
    return [(f0, _branch(d, p, f0)) for f0 in d.red_out.get(d.src(p.edges[0]), ())]


def _is_h(d: LDiagram) -> bool:
    cache = d.__dict__.setdefault("_hcache", {})
    if "h" not in cache:
        cache["h"] = validate_hdiagram(d).ok
    return cache["h"]


def inverse_shift_prefix(p: BluePrefix) -> BluePrefix:
    """sigma^{-1} on an h-diagram; an even-depth input is first cut to odd depth."""
    if not _is_h(p.diagram):
        raise NotHDiagram("inverse shift needs an h-diagram")
    if p.depth < 1:
        raise InsufficientDepth("inverse shift needs depth >= 1")
    if p.depth % 2 == 0:
        p = p.truncate(p.depth - 1)
    (branch,) = preimages(p)
    return branch[1]


def _odd(p: BluePrefix) -> BluePrefix:
    if p.depth == 0:
        raise InsufficientDepth("an odd truncation needs depth >= 1")
    return p if p.depth % 2 else p.truncate(p.depth - 1)


def _even(p: BluePrefix) -> BluePrefix:
    return p if p.depth % 2 == 0 else p.truncate(p.depth - 1)


def sigma_image(p: BluePrefix, k: int = 1) -> set:
    """sigma^k(Z(p)) as an exact disjoint union of cylinders."""
    cur = {p}
    for _ in range(k):
        nxt = set()
        for q in cur:
            target = q.depth + 2 if q.depth % 2 == 0 else q.depth + 3
            nxt.update(shift_prefix(x) for x in extensions(q, target))
        cur = nxt
    return cur


def sigma_preimage_set(q: BluePrefix, k: int = 1) -> set:
    """sigma^{-k}(Z(q)) as an exact disjoint union of cylinders."""
    cur = {q}
    for _ in range(k):
        nxt = set()
        for r in cur:
            for s in extensions(r, r.depth + 1) if r.depth % 2 == 0 else [r]:
                for _, b in preimages(s):
                    nxt.update(x for x in extensions(b, s.depth + 1) if shift_prefix(x) == s)
        cur = nxt
    return cur


# ---------------------------------------------------------------- word oracle


def _system(d: LDiagram):
    if "system" not in d.meta or "cells" not in d.meta:
        raise ValueError("the word oracle needs a diagram built from a symbolic system")
    return d.meta["system"], d.meta["cells"]


def word_shift_oracle(p: BluePrefix) -> BluePrefix:
    """The depth-(m-1) prefix whose cell contains sigma(cell(p)), found on words alone."""
    sys, cells = _system(p.diagram)
    img = sys.sigma(cells[p.end])
    hits = [v for v in p.diagram.level(p.depth - 1) if sys.subset(img, cells[v])]
    if len(hits) != 1:
        raise NoCompletion(f"{len(hits)} cells contain the image of {p}")
    return prefix_of(p.diagram, hits[0])


def union_cell(d: LDiagram, prefixes: Iterable[BluePrefix]):
    sys, cells = _system(d)
    out = sys.nothing()
    for p in prefixes:
        out = sys.union(out, cells[p.end])
    return out


# ---------------------------------------------------------------- sigma-cylinder decompositions


@dataclass
class SigmaCylinderDecomposition:
    """Cells Z_gamma (level 2j+1 vertices) and V-cells keyed by (gamma, i, f).

    Gamma_i collects the gamma below the level-2j vertex i. A V-cell is stored as
    the set of level 2j+2 vertices whose romb at level 2j has red edge f.
    """

    diagram: LDiagram
    level: int
    groups: dict
    cells: dict
    vcells: dict

    @property
    def gamma(self) -> list:
        return sorted(self.cells)

    @property
    def index(self) -> list:
        return sorted(self.groups)

    def multiplicity(self, g, i) -> int:
        return sum(1 for (gg, ii, _) in self.vcells if gg == g and ii == i)

    def matrices(self):
        """(A, I) with rows sorted gamma and columns sorted index."""
        rows, cols = self.gamma, self.index
        A = [[self.multiplicity(g, i) for i in cols] for g in rows]
        member = {(g, i) for i, gs in self.groups.items() for g in gs}
        I = [[1 if (g, i) in member else 0 for i in cols] for g in rows]
        return A, I

    def keys(self) -> list:
        return sorted(self.vcells)


def extract_cylinder_decomposition(d: LDiagram, level: int) -> SigmaCylinderDecomposition:
    if level % 2:
        raise OddDepth("decompositions live on even levels")
    if level + 2 > d.horizon:
        raise HorizonExceeded(f"level {level} needs horizon {level + 2}, have {d.horizon}")
    groups = defaultdict(list)
    for g in d.level(level + 1):
        groups[d.tgt(d.blue_parent(g))].append(g)
    cells = {g: frozenset({g}) for g in d.level(level + 1)}
    vcells = defaultdict(set)
    for w in d.level(level + 2):
        for e0, e1 in d.blue_pairs_from(w):
            r = complete_romb_from_blue(d, e0, e1)
            vcells[(d.src(r.f0), d.tgt(r.f0), r.f0)].add(w)
    groups = {i: tuple(sorted(gs)) for i, gs in groups.items()}
    for i in d.level(level):
        groups.setdefault(i, ())
    return SigmaCylinderDecomposition(d, level, groups, cells, {k: frozenset(v) for k, v in vcells.items()})


def vcell_by_shift(d: LDiagram, level: int, g: str, i: str) -> frozenset:
    """{x in Z(i) : sigma(x) in Z(g)} at depth level+2, found through the shift alone."""
    out = set()
    for p in extensions(prefix_of(d, i), level + 2):
        if shift_prefix(p).end == g:
            out.add(p.end)
    return frozenset(out)


def validate_decomposition(dec: SigmaCylinderDecomposition) -> Report:
    """Partition and bijectivity conditions, checked with exact cylinder images.

    Each V-cell is cut into depth 2j+2 cylinders; their exact shift images (depth
    2j+3) must be pairwise disjoint and fill Z_gamma.
    """
    d, L = dec.diagram, dec.level
    rep = Report("sigma-cylinder-decomposition")
    if L + 4 > d.horizon:
        raise HorizonExceeded(f"validation at level {L} needs horizon {L + 4}, have {d.horizon}")
    D = L + 2
    whole = frozenset(d.level(D))
    seen = []
    for g in dec.gamma:
        seen.extend(expand(d, dec.cells[g], D))
    if len(seen) != len(set(seen)) or set(seen) != whole:
        rep.add("a-partition", "cells do not partition the space", D)
    for i in dec.index:
        vi = expand(d, [i], D)
        parts = [v for (g, ii, f), v in dec.vcells.items() if ii == i]
        flat = [x for p in parts for x in p]
        if len(flat) != len(set(flat)) or set(flat) != vi:
            rep.add("b-vcells", "V-cells do not partition V_i", i)
        zi = frozenset().union(*(expand(d, dec.cells[g], D) for g in dec.groups[i]))
        if zi != vi:
            rep.add("b-group", "Gamma_i cells do not cover V_i", i)
    for (g, i, f), v in sorted(dec.vcells.items()):
        imgs = [x.end for w in sorted(v) for x in sigma_image(prefix_of(d, w), 1)]
        if len(imgs) != len(set(imgs)):
            rep.add("c-injective", "shift images of a V-cell overlap", g, i, f)
        if set(imgs) != expand(d, dec.cells[g], D + 1):
            rep.add("c-onto", "shift does not map the V-cell onto its Z-cell", g, i, f)
    return rep


def check_refinement(fine: SigmaCylinderDecomposition, coarse: SigmaCylinderDecomposition) -> Report:
    """Cell refinement, V-cell refinement and the compatibility bijection."""
    rep = Report("refinement")
    d = fine.diagram
    if coarse.diagram is not d and coarse.diagram != d:
        rep.add("same-diagram", "decompositions live on different diagrams")
        return rep
    D = max(fine.level, coarse.level) + 2
    zc = {g: expand(d, c, D) for g, c in coarse.cells.items()}
    zf = {g: expand(d, c, D) for g, c in fine.cells.items()}
    vc = {k: expand(d, c, D) for k, c in coarse.vcells.items()}
    vf = {k: expand(d, c, D) for k, c in fine.vcells.items()}
    lam = defaultdict(set)
    for t, cells in zf.items():
        owners = [g for g, z in zc.items() if cells <= z]
        if len(owners) != 1:
            rep.add("a-cells", "fine cell is not inside exactly one coarse cell", t)
            continue
        lam[owners[0]].add(t)
    for g, z in zc.items():
        got = frozenset().union(*(zf[t] for t in lam[g])) if lam[g] else frozenset()
        if got != z:
            rep.add("a-cover", "fine cells do not cover the coarse cell", g)
    sub = defaultdict(list)
    for k, cells in vf.items():
        owners = [c for c, v in vc.items() if cells <= v]
        if len(owners) != 1:
            rep.add("b-vcells", "fine V-cell is not inside exactly one coarse V-cell", *k)
            continue
        sub[owners[0]].append(k)
    for c, v in vc.items():
        got = frozenset().union(*(vf[k] for k in sub[c])) if sub[c] else frozenset()
        if got != v:
            rep.add("b-cover", "fine V-cells do not cover the coarse V-cell", *c)
        projected = sorted(k[0] for k in sub[c])
        if projected != sorted(lam[c[0]]):
            rep.add("c-compatibility", "projection onto fine cells is not a bijection onto Lambda(gamma)", *c)
    return rep


# ---------------------------------------------------------------- configurations


Word = tuple  # ((letter, +1 or -1), ...), leftmost letter first


def reduce_word(w: Word) -> Word:
    out = []
    for x in w:
        if out and out[-1][0] == x[0] and out[-1][1] == -x[1]:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def mul(u: Word, v: Word) -> Word:
    return reduce_word(tuple(u) + tuple(v))


def inv(w: Word) -> Word:
    return tuple((a, -s) for a, s in reversed(w))


def word_text(w: Word, alias=None) -> str:
    if not w:
        return "1"
    alias = alias or {}
    parts = []
    for a, s in w:
        name = alias.get(a, a)
        parts.append(name if s == 1 else f"{name}^-1")
    return ".".join(parts)


def parse_word(text: str, alias=None) -> Word:
    back = {v: k for k, v in (alias or {}).items()}
    text = text.strip()
    if text == "1":
        return ()
    out = []
    for tok in text.split("."):
        s = 1
        if tok.endswith("^-1"):
            tok, s = tok[:-3], -1
        out.append((back.get(tok, tok), s))
    return reduce_word(tuple(out))


@dataclass(frozen=True)
class ConfigBall:
    """The radius-r ball of a configuration, a suffix-closed set of reduced words."""

    radius: int
    words: frozenset

    def local(self, alpha: Word = ()) -> frozenset:
        """Local configuration at alpha: the length-1 words of xi . alpha^{-1}."""
        ai = inv(alpha)
        return frozenset(u for u in (mul(w, ai) for w in self.words) if len(u) == 1)

    def forward_letter(self):
        pos = [a for ((a, s),) in self.local() if s == 1]
        return pos[0] if len(pos) == 1 else None

    def translate(self, alpha: Word, radius: int) -> "ConfigBall":
        """The radius-`radius` ball of xi . alpha^{-1}, the point reached along alpha."""
        if len(alpha) + radius > self.radius:
            raise InsufficientDepth(f"translating by a length-{len(alpha)} word to radius {radius} needs radius {len(alpha) + radius}")
        ai = inv(alpha)
        return ConfigBall(radius, frozenset(u for u in (mul(w, ai) for w in self.words) if len(u) <= radius))

    def texts(self, alias=None) -> list:
        return sorted(word_text(w, alias) for w in self.words)

    def local_texts(self, alpha: Word = (), alias=None) -> set:
        return {word_text(w, alias) for w in self.local(alpha)}


def tau_ball(b: ConfigBall) -> ConfigBall:
    """Right translation by a_f^{-1}, f the forward letter; the radius drops by one."""
    f = b.forward_letter()
    if f is None or b.radius < 1:
        raise InsufficientDepth("tau needs a ball of radius >= 1 with one forward letter")
    words = frozenset(u for u in (mul(w, ((f, -1),)) for w in b.words) if len(u) <= b.radius - 1)
    return ConfigBall(b.radius - 1, words)


def _back(d: LDiagram, z: BluePrefix, f: str, level: int) -> BluePrefix:
    """The preimage of z inside the V-cell of the red edge f of layer `level`."""
    zo = _odd(z)
    if level == 0:
        for f0, b in preimages(zo):
            if f0 == f:
                return b
        raise NoCompletion(f"no preimage branch through {f}")
    target = d.tgt(f)
    hits = [b for _, b in preimages(zo) if b.depth >= level and b.truncate(level).end == target]
    if len(hits) != 1:
        raise NoCompletion(f"{len(hits)} preimage branches through {target}")
    return hits[0]


def back_options(z: BluePrefix, level: int = 0) -> tuple:
    if z.depth <= level:
        raise InsufficientDepth(f"backward steps at level {level} need depth {level + 1}, have {z.depth}")
    d = z.diagram
    return tuple(d.red_out.get(d.src(z.edges[level]), ()))


def _walk(p: BluePrefix, radius: int, level: int, keep_points: bool = False):
    """Breadth-first walk of the configuration tree: forward along sigma, backward along red branches."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius and p.depth < level + 2 * radius:
        raise InsufficientDepth(f"radius {radius} at level {level} needs depth {level + 2 * radius}, have {p.depth}")
    d = p.diagram
    words = {(): p}
    frontier = [((), p, None)]
    for step in range(radius):
        last = step == radius - 1
        nxt = []
        for w, q, came in frontier:
            if came is None or came[1] == 1:
                g = label_at(q, level)
                u = ((g, 1),) + w
                q2 = None if last and not keep_points else shift_prefix(_even(q))
                words[u] = q2
                nxt.append((u, q2, (g, 1)))
            skip = came[0] if came is not None and came[1] == 1 else None
            for f in back_options(q, level):
                if f == skip:
                    continue
                u = ((f, -1),) + w
                q2 = None if last and not keep_points else _back(d, q, f, level)
                words[u] = q2
                nxt.append((u, q2, (f, -1)))
        frontier = nxt
    return words


def structure_ball(p: BluePrefix, radius: int, level: int = 0) -> ConfigBall:
    """Ball of the configuration attached to p by the structure on layer `level`."""
    return ConfigBall(radius, frozenset(_walk(p, radius, level)))


def config_ball(p: BluePrefix, radius: int) -> ConfigBall:
    """Radius-r ball of the configuration of p; needs depth >= 2r."""
    return structure_ball(p, radius, 0)


def validate_ball(b: ConfigBall, E: Layer) -> Report:
    """Contains 1, suffix closed, and every interior local configuration has the allowed shape."""
    g = as_gfs(E)
    rep = Report("config-ball")
    if () not in b.words:
        rep.add("contains-1", "ball misses the empty word")
    for w in b.words:
        for m in range(len(w)):
            if w[m:] not in b.words:
                rep.add("right-convex", "suffix missing", word_text(w))
                break
    red_from = defaultdict(set)
    for e in g.edges:
        if e.color == RED:
            red_from[e.src].add(e.id)
    blue = [e for e in g.edges if e.color == BLUE]
    for w in b.words:
        if len(w) >= b.radius:
            continue
        loc = b.local(w)
        pos = [a for ((a, s),) in loc if s == 1]
        neg = {a for ((a, s),) in loc if s == -1}
        if len(pos) != 1 or pos[0] not in g.edge or g.edge[pos[0]].color != RED:
            rep.add("one-forward", "local configuration needs exactly one forward letter", word_text(w))
            continue
        v = g.edge[pos[0]].tgt
        if not any(e.tgt == v and red_from[e.src] == neg for e in blue):
            rep.add("local-shape", "backward letters are not the red edges at a blue source over r(f)", word_text(w))
    return rep


# ---------------------------------------------------------------- universal maps


def _locator(X: LDiagram, radius: int) -> dict:
    cache = X.__dict__.setdefault("_balls", {})
    if radius not in cache:
        table = defaultdict(list)
        for p in all_prefixes(X, 2 * radius):
            table[config_ball(p, radius).words].append(p)
        cache[radius] = table
    return cache[radius]


def locate(X: LDiagram, ball: ConfigBall, first_edge: str | None = None) -> BluePrefix:
    """The depth-(2r-1) prefix of X determined by a radius-r configuration ball.

    A depth-2r prefix determines its r-ball, but the ball only pins down the
    first 2r-1 edges; all depth-2r prefixes carrying `ball` must agree there.
    """
    r = ball.radius
    if r == 0:
        if first_edge is None:
            raise InsufficientDepth("a radius-0 ball does not pin down a point")
        return make_prefix(X, [first_edge])
    hits = _locator(X, r).get(ball.words, [])
    if first_edge is not None:
        hits = [p for p in hits if p.edges[0] == first_edge]
    found = {p.truncate(2 * r - 1) for p in hits}
    if len(found) != 1:
        raise StructureMismatch(f"{len(found)} prefixes of the target carry this ball")
    return found.pop()


def structure_edge_map(Y: LDiagram, level: int, E: Layer) -> dict:
    """Match the red and blue edges of layer `level` of Y with those of E.

    Identical ids match directly; otherwise vertices are matched by a layer
    isomorphism and parallel edges in id order. Raises StructureMismatch when
    the red-blue adjacency data differ.
    """
    lay = as_gfs(Y.layers[level])
    g = as_gfs(E)
    if {e.id for e in g.edges} == {e.id for e in lay.edges}:
        mine = {e.id: (e.src, e.tgt, e.color) for e in lay.edges}
        if all(mine[e.id] == (e.src, e.tgt, e.color) for e in g.edges):
            return {e.id: e.id for e in lay.edges}
    iso = find_isomorphism(lay, g)
    if iso is None:
        raise StructureMismatch("the decomposition's (A, I) differ from those of the target graph")
    groups = defaultdict(list)
    for e in g.edges:
        groups[(e.src, e.tgt, e.color)].append(e.id)
    mapping = {}
    for key in groups:
        groups[key].sort()
    taken = defaultdict(int)
    for e in sorted(lay.edges, key=lambda e: e.id):
        key = (iso[e.src], iso[e.tgt], e.color)
        mapping[e.id] = groups[key][taken[key]]
        taken[key] += 1
    return mapping


def _rename(ball: ConfigBall, mapping: dict) -> ConfigBall:
    return ConfigBall(ball.radius, frozenset(tuple((mapping[a], s) for a, s in w) for w in ball.words))


def universal_map(y: BluePrefix, radius: int, E: Layer | None = None, level: int = 0) -> ConfigBall:
    """Ball of psi(y) for the structure carried by layer `level` of y's diagram.

    The ball is the set of red words whose composite partial maps have y in their
    domain; letters are renamed to the edges of E when E is given.
    """
    ball = structure_ball(y, radius, level)
    if E is None:
        return ball
    return _rename(ball, structure_edge_map(y.diagram, level, E))


def universal_prefix(y: BluePrefix, radius: int, X: LDiagram, level: int = 0) -> BluePrefix:
    """psi(y) as a depth-(2r-1) prefix of the canonical resolution X of the structure graph."""
    E = X.layers[0]
    mapping = structure_edge_map(y.diagram, level, E)
    first = mapping[y.edges[level]] if y.depth > level else None
    return locate(X, universal_map(y, radius, E, level), first)


def resolution_of_layer(d: LDiagram, level: int, depth: int, tag: str = "") -> LDiagram:
    return canonical_resolution(as_gfs(d.layers[level]), depth, prefix=tag)


# ---------------------------------------------------------------- inverse limit


def stacked_diagram(d: LDiagram, i: int, below: LDiagram) -> LDiagram:
    """Layers 2i and 2i+1 of d on top of `below`, whose layer 0 must be layer 2i+2 of d."""
    head, mine = below.layers[0], d.layers[2 * i + 2]
    if set(head.top) != set(mine.top) or {e.id for e in head.edges} != {e.id for e in mine.edges}:
        raise StructureMismatch("the lower diagram does not start at level 2i+2")
    return LDiagram([d.layers[2 * i], d.layers[2 * i + 1]] + list(below.layers))


def inverse_limit_check(d: LDiagram, depth: int, radius: int | None = None) -> Report:
    """psi_i = psi_{i,i+1} o psi_{i+1} on all prefixes, and (psi_i(x))_i recovers x.

    psi_i maps into the generalized finite shift X_i of layer 2i; it is computed as
    a configuration ball and located in X_i. Balls have the largest radius the
    prefix depth supports, capped by `radius` when given.
    """
    rep = Report("inverse-limit")
    if depth > d.horizon:
        raise HorizonExceeded(f"depth {depth} beyond horizon {d.horizon}")
    if depth < 2:
        return rep
    levels = [i for i in range(depth) if 2 * i + 2 <= depth and 2 * i + 2 <= d.horizon]
    radius_of = {}
    X, G = {}, {}
    for i in levels:
        r = (depth - 2 * i) // 2
        if radius is not None:
            r = min(r, radius)
        radius_of[i] = r
        X[i] = resolution_of_layer(d, 2 * i, 2 * r, tag=f"X{i}/")
    for i in levels:
        if i + 1 in levels and radius_of[i] >= 2:
            low = resolution_of_layer(d, 2 * i + 2, max(2 * (radius_of[i] - 1), 2), tag=f"X{i + 1}/")
            G[i] = (low, stacked_diagram(d, i, low))
    for p in all_prefixes(d, depth):
        located = {}
        for i in levels:
            r = radius_of[i]
            q = p.truncate(2 * i + 2 * r)
            try:
                img = locate(X[i], structure_ball(q, r, 2 * i), p.edges[2 * i])
            except StructureMismatch as exc:
                rep.add("locate", str(exc), str(p), i)
                continue
            located[i] = img
            if img.edges[0] != p.edges[2 * i]:
                rep.add("first-edge", "psi_i(x) does not start with e_2i", str(p), i)
        for i, (low, g) in G.items():
            if i not in located:
                continue
            r = radius_of[i]
            r1 = r - 1
            q = p.truncate(2 * i + 2 + 2 * r1)
            mid = locate(low, structure_ball(q, r1, 2 * i + 2), p.edges[2 * i + 2])
            lifted = BluePrefix(g, (p.edges[2 * i], p.edges[2 * i + 1]) + mid.edges, d.tgt(p.edges[2 * i]))
            try:
                via = locate(X[i], structure_ball(lifted, r1, 0), p.edges[2 * i])
            except StructureMismatch as exc:
                rep.add("factor-locate", str(exc), str(p), i)
                continue
            if via != located[i].truncate(via.depth):
                rep.add("factorization", "psi_i differs from psi_{i,i+1} o psi_{i+1}", str(p), i)
        recovered = _recover(d, {i: located[i].edges[0] for i in located}, depth)
        if recovered is not None and recovered != p.edges[: len(recovered)]:
            rep.add("injective", "the images do not determine the prefix", str(p))
    return rep


def _recover(d: LDiagram, firsts: dict, depth: int):
    """Rebuild (e_0, e_1, ...) from the even edges, filling odd edges by blue uniqueness."""
    out = []
    for i in sorted(firsts):
        if 2 * i != len(out):
            return None
        e = firsts[i]
        if out:
            between = [x for x in d.blue_in.get(d.src(out[-1]), ()) if d.src(x) == d.tgt(e)]
            if len(between) != 1:
                return None
            out.append(between[0])
        out.append(e)
    return tuple(out)


# ---------------------------------------------------------------- groupoid fibers


def fiber(y: BluePrefix, m: int, n: int, level: int = 0) -> dict:
    """{word: (z, lag)} for groupoid elements (z, m'-n', y) with m' <= m, n' <= n.

    Elements come from a forward run of n' steps and a backward run of m' steps
    that avoids returning along the forward path.
    """
    d = y.diagram
    out = {(): (y, 0)}
    fwd = [((), y)]
    w, q = (), y
    for k in range(n):
        g = label_at(q, level)
        w = ((g, 1),) + w
        q = shift_prefix(_even(q))
        fwd.append((w, q))
    for k, (w, q) in enumerate(fwd):
        out.setdefault(w, (q, -k))
        layer = [(w, q, w[0][0] if w else None)]
        for step in range(1, m + 1):
            nxt = []
            for u, z, skip in layer:
                for f in back_options(z, level):
                    if f == skip:
                        continue
                    u2 = ((f, -1),) + u
                    z2 = _back(d, z, f, level)
                    out[u2] = (z2, step - k)
                    nxt.append((u2, z2, None))
            layer = nxt
    return out


def _fiber_shape(w: Word, m: int, n: int):
    """(m', n') when w reads a_f^{-1}...a_f^{-1} a_g...a_g with m' <= m, n' <= n, else None."""
    k = 0
    while k < len(w) and w[k][1] == -1:
        k += 1
    if any(s != 1 for _, s in w[k:]):
        return None
    if k > m or len(w) - k > n:
        return None
    return k, len(w) - k


def configuration_fiber(xi: ConfigBall, m: int, n: int) -> dict:
    """{word: lag} for the fiber over a configuration: the words of xi of fiber shape."""
    out = {}
    for w in xi.words:
        shape = _fiber_shape(w, m, n)
        if shape is not None:
            out[w] = shape[0] - shape[1]
    return out


def fiber_bijection_check(y: BluePrefix, bound=(2, 2), X: LDiagram | None = None, level: int = 0, radius: int = 1) -> Report:
    """psi_* maps the truncated fiber over y bijectively onto the fiber over psi(y).

    The Y side walks the diagram of y. The X side is read off psi(y): with X
    given, as prefixes of that resolution located by balls; otherwise in the
    configuration model, where the element reached along a word w is xi . w^{-1}.
    Elements are compared by word, lag and the radius-`radius` ball of the point.
    """
    m, n = bound
    d = y.diagram
    rep = Report("fibers")
    R = m + n + radius
    need = level + 2 * R + (2 if X is not None else 0)
    if y.depth < need:
        raise InsufficientDepth(f"bound {bound} needs depth {need}, have {y.depth}")
    E = X.layers[0] if X is not None else as_gfs(d.layers[level])
    rename = structure_edge_map(d, level, E)
    top = {}
    for w, (z, lag) in fiber(y, m, n, level).items():
        w2 = tuple((rename[a], s) for a, s in w)
        if z.depth < level + 2 * radius:
            rep.add("push", "fiber element too shallow for its ball", word_text(w))
            continue
        top[w2] = (universal_map(z.truncate(level + 2 * radius), radius, E, level), lag)
    if X is None:
        xi = universal_map(y.truncate(level + 2 * R), R, E, level)
        bottom = {w: (xi.translate(w, radius), lag) for w, lag in configuration_fiber(xi, m, n).items()}
    else:
        px = universal_prefix(y.truncate(level + 2 * R + 2), R + 1, X, level)
        bottom = {}
        for w, (z, lag) in fiber(px, m, n, 0).items():
            if z.depth < 2 * radius:
                rep.add("resolution", "X-side fiber element too shallow for its ball", word_text(w))
                continue
            bottom[w] = (config_ball(z.truncate(2 * radius), radius), lag)
    for w in sorted(set(top) - set(bottom)):
        rep.add("defined", "Y-side element has no X-side partner", word_text(w))
    for w in sorted(set(bottom) - set(top)):
        rep.add("onto", "X-side element is not hit", word_text(w))
    for w in sorted(set(top) & set(bottom)):
        if top[w] != bottom[w]:
            rep.add("push", "pushed element differs from the X-side element", word_text(w))
    return rep
