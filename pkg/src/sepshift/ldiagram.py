"""Depth-truncated l-diagrams: validators, romb solvers, telescoping and construction from symbolic systems."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .errors import AmbiguousCompletion, CRViolated, HorizonExceeded, NoCompletion, ParseError
from .graph import BLUE, RED, Edge, Layer, Report, graph_to_obj, _layer_from_obj
from . import systems as S

SEP = "~"


class LDiagram:
    """A stack of layers; layer k joins vertex level k (top) to level k+1 (bottom).

    Even layers carry blocks labelled "B" and "R". Odd layers carry "B" plus one
    block per red edge f of the layer above with s(f) = v, labelled by f's id.
    ``meta`` may hold side information such as the clopen set of each vertex.
    """

    def __init__(self, layers: Sequence[Layer], meta=None):
        self.layers = tuple(_with_labels(k, lay) for k, lay in enumerate(layers))
        self.meta = dict(meta or {})
        self.edge = {}
        self.edge_layer = {}
        self.vertex_level = {}
        self.blue_out = defaultdict(list)
        self.red_out = defaultdict(list)
        self.blue_in = defaultdict(list)
        self.red_in = defaultdict(list)
        self.block_label = {}
        self.rblock = {}
        for k, lay in enumerate(self.layers):
            for v in lay.top:
                self.vertex_level.setdefault(v, k)
            for w in lay.bottom:
                self.vertex_level.setdefault(w, k + 1)
            for e in lay.edges:
                self.edge[e.id] = e
                self.edge_layer[e.id] = k
                (self.blue_out if e.color == BLUE else self.red_out)[e.src].append(e.id)
                (self.blue_in if e.color == BLUE else self.red_in)[e.tgt].append(e.id)
            for v in lay.top:
                for lab, blk in zip(lay.block_labels(v), lay.blocks(v)):
                    for eid in blk:
                        self.block_label[eid] = lab
                    if k % 2 == 1 and lab != "B":
                        self.rblock[lab] = blk
        self._pairs = {}

    # --- basic access
    @property
    def horizon(self) -> int:
        return len(self.layers)

    def level(self, n: int) -> tuple:
        if n == 0:
            return self.layers[0].top if self.layers else ()
        if n > self.horizon:
            raise HorizonExceeded(f"level {n} beyond horizon {self.horizon}")
        return self.layers[n - 1].bottom

    def src(self, eid):
        return self.edge[eid].src

    def tgt(self, eid):
        return self.edge[eid].tgt

    def color(self, eid):
        return self.edge[eid].color

    def B(self, v) -> tuple:
        return tuple(self.blue_in.get(v, ()))

    def R(self, v) -> tuple:
        return tuple(self.red_in.get(v, ()))

    def Rf(self, f) -> tuple:
        """R(f): the block at s(f) indexed by the red edge f of an even layer."""
        return tuple(self.rblock.get(f, ()))

    def in_R_of(self, f1, f0) -> bool:
        return self.block_label.get(f1) == f0

    def blue_parent(self, w):
        outs = self.blue_out.get(w, ())
        return outs[0] if len(outs) == 1 else None

    def truncate(self, n: int) -> "LDiagram":
        if n > self.horizon:
            raise HorizonExceeded(f"cannot truncate to {n} > horizon {self.horizon}")
        return LDiagram(self.layers[:n], self.meta)

    def sizes(self):
        levels = [len(self.level(n)) for n in range(self.horizon + 1)]
        blue = [lay.count(BLUE) for lay in self.layers]
        red = [lay.count(RED) for lay in self.layers]
        return levels, blue, red

    def key(self):
        return tuple(lay.key() for lay in self.layers)

    def __eq__(self, other):
        return isinstance(other, LDiagram) and self.key() == other.key()

    def __hash__(self):
        return hash(self.horizon)

    def __repr__(self):
        lv, b, r = self.sizes()
        return f"LDiagram(levels={lv}, blue={b}, red={r})"

    # --- two-step paths
    def blue_pairs_from(self, w) -> list:
        """Blue pairs (e0, e1) with s(e1) = w."""
        key = ("b", w)
        if key not in self._pairs:
            self._pairs[key] = [
                (e0, e1) for e1 in self.blue_out.get(w, ()) for e0 in self.blue_out.get(self.tgt(e1), ())
            ]
        return self._pairs[key]

    def red_pairs_from(self, w) -> list:
        """Red pairs (f0, f1) with s(f1) = w and s(f0) = r(f1)."""
        key = ("r", w)
        if key not in self._pairs:
            self._pairs[key] = [
                (f0, f1) for f1 in self.red_out.get(w, ()) for f0 in self.red_out.get(self.tgt(f1), ())
            ]
        return self._pairs[key]

    def blue_path_to_root(self, w) -> tuple:
        """The blue path from level 0 down to w (unique when blue sources are distinct)."""
        path = []
        while self.vertex_level.get(w, 0) > 0:
            e = self.blue_parent(w)
            if e is None:
                raise NoCompletion(f"vertex {w} has no unique blue parent")
            path.append(e)
            w = self.tgt(e)
        return tuple(reversed(path))

    def to_obj(self):
        return {"kind": "ldiagram", "layers": [graph_to_obj(lay) for lay in self.layers]}


def _with_labels(k: int, lay: Layer) -> Layer:
    if lay.labels is not None and all(v in lay.labels for v in lay.top):
        return lay
    labels = {}
    for v in lay.top:
        labs = []
        for i, blk in enumerate(lay.blocks(v)):
            colors = {lay.edge[e].color for e in blk}
            if k % 2 == 0 or colors == {BLUE}:
                labs.append("B" if colors == {BLUE} else "R" if colors == {RED} else str(i))
            else:
                labs.append(str(i))
        labels[v] = labs
    return Layer(lay.top, lay.bottom, lay.edges, lay.separation, labels)


def ldiagram_from_obj(obj, text="") -> LDiagram:
    raw = obj.get("layers")
    if not isinstance(raw, list):
        raise ParseError("ldiagram needs a list of layers", 1, 1)
    layers = [_layer_from_obj(lo, text, "layer") for lo in raw]
    for k in range(len(layers) - 1):
        if set(layers[k].bottom) != set(layers[k + 1].top):
            raise ParseError(f"bottom of layer {k} differs from top of layer {k + 1}", 1, 1)
    return LDiagram(layers)


# ---------------------------------------------------------------- validation


def validate_ldiagram(d: LDiagram) -> Report:
    rep = Report("ldiagram")
    N = d.horizon
    for k in range(N - 1):
        if set(d.layers[k].bottom) != set(d.layers[k + 1].top):
            rep.add("interface", f"levels of layers {k} and {k + 1} differ", k)
    for k, lay in enumerate(d.layers):
        if k % 2 == 0:
            _check_even_separation(d, k, lay, rep)
        else:
            _check_odd_separation(d, k, lay, rep)
        _check_vertices(d, k, lay, rep)
        if k + 1 < N:
            if k % 2 == 0:
                _check_even_rombs(d, k, rep)
            else:
                _check_odd_rombs(d, k, rep)
        else:
            rep.unchecked.append(f"layer {k}: compatibility and romb conditions need layer {k + 1}")
    return rep


def _check_even_separation(d, k, lay, rep):
    for v in lay.top:
        labs = lay.block_labels(v)
        blocks = lay.blocks(v)
        if sorted(labs) != ["B", "R"]:
            rep.add("a-even-separation", f"separation at {v} is not {{B_v, R_v}}", v)
            continue
        for lab, blk in zip(labs, blocks):
            want = BLUE if lab == "B" else RED
            if not blk:
                rep.add("a-even-separation", f"block {lab} at {v} is empty", v)
            if any(d.color(e) != want for e in blk):
                rep.add("a-even-separation", f"block {lab} at {v} has an edge of the wrong color", v)


def _check_odd_separation(d, k, lay, rep):
    for v in lay.top:
        labs = list(lay.block_labels(v))
        blocks = lay.blocks(v)
        expected = {"B"} | {f for f in d.red_out.get(v, ())}
        if sorted(labs) != sorted(expected) or len(labs) != len(set(labs)):
            rep.add("b-odd-separation", f"blocks at {v} are not B_v plus one R(f) per red f leaving {v}", v)
        for lab, blk in zip(labs, blocks):
            want = BLUE if lab == "B" else RED
            if not blk:
                rep.add("b-odd-separation", f"block {lab} at {v} is empty", v)
            if any(d.color(e) != want for e in blk):
                rep.add("b-odd-separation", f"block {lab} at {v} has an edge of the wrong color", v)


def _check_vertices(d, k, lay, rep):
    bottom = lay.bottom
    blue_src = Counter(e.src for e in lay.edges if e.color == BLUE)
    red_src = Counter(e.src for e in lay.edges if e.color == RED)
    if k % 2 == 1:
        rule = "c-even-vertices"
        for w in bottom:
            if blue_src[w] != 1:
                rep.add(rule, f"{w} is the source of {blue_src[w]} blue edges at layer {k}", w)
            if red_src[w] != 1:
                rep.add(rule, f"{w} is the source of {red_src[w]} red edges at layer {k}", w)
    else:
        rule = "d-first-odd-layer" if k == 0 else "i-odd-vertices"
        for w in bottom:
            if blue_src[w] != 1:
                rep.add(rule, f"{w} is the source of {blue_src[w]} blue edges at layer {k}", w)
            if red_src[w] < 1:
                rep.add(rule, f"{w} is the source of no red edge at layer {k}", w)
        if k > 0:
            for v in lay.top:
                srcs = [d.src(f) for f in d.R(v)]
                if len(srcs) != len(set(srcs)):
                    rep.add("i-odd-vertices", f"two red edges into {v} share a source", v)


def _check_even_rombs(d, k, rep):
    """Compatibility (e) and the even-layer romb property, base level k."""
    for v in d.level(k):
        blue_side = Counter(d.src(e1) for e in d.B(v) for e1 in d.B(d.src(e)))
        red_side = Counter(d.src(f1) for f in d.R(v) for f1 in d.Rf(f))
        dup = [w for w, c in list(blue_side.items()) + list(red_side.items()) if c > 1]
        if blue_side != red_side or dup:
            rep.add("e-compatibility", f"blue and red two-step source sets differ at {v}", v)
    for w in d.level(k + 2):
        nb = Counter(d.tgt(e0) for e0, e1 in d.blue_pairs_from(w))
        nr = Counter(d.tgt(f0) for f0, f1 in d.red_pairs_from(w) if d.in_R_of(f1, f0))
        for v in set(nb) | set(nr):
            if not (nb[v] == nr[v] == 1):
                rep.add(
                    "ii-even-romb",
                    f"between {w} and {v}: {nb[v]} blue pairs, {nr[v]} red pairs with f1 in R(f0)",
                    w,
                    v,
                )


def _check_odd_rombs(d, k, rep):
    for w in d.level(k + 2):
        blue_to = Counter(d.tgt(e0) for e0, e1 in d.blue_pairs_from(w))
        red_pairs = d.red_pairs_from(w)
        for f0, f1 in red_pairs:
            v = d.tgt(f0)
            if blue_to[v] != 1:
                rep.add("f-odd-romb-red", f"red pair ({f0}, {f1}) closes with {blue_to[v]} blue pairs", f0, f1)
        by_block = Counter((d.tgt(f0), d.block_label.get(f0)) for f0, f1 in red_pairs)
        for v, nb in blue_to.items():
            for g in d.red_out.get(v, ()):
                c = by_block[(v, g)]
                if c != 1:
                    rep.add(
                        "g-odd-romb-blue",
                        f"blue pairs from {w} to {v} close with {c} red pairs in R({g})",
                        w,
                        v,
                        g,
                    )


def validate_hdiagram(d: LDiagram) -> Report:
    rep = Report("hdiagram")
    N = d.horizon
    for k, lay in enumerate(d.layers):
        for v in lay.top:
            blocks = lay.blocks(v)
            colors = [{d.color(e) for e in blk} for blk in blocks]
            if len(blocks) != 2 or sorted(map(sorted, colors)) != [[BLUE], [RED]]:
                rep.add("h-a-separation", f"separation at {v} is not {{B_v, R_v}}", v)
        blue_src = Counter(e.src for e in lay.edges if e.color == BLUE)
        red_src = Counter(e.src for e in lay.edges if e.color == RED)
        for w in lay.bottom:
            if blue_src[w] != 1 or red_src[w] != 1:
                rep.add(
                    "h-b-vertices",
                    f"{w} is the source of {blue_src[w]} blue and {red_src[w]} red edges at layer {k}",
                    w,
                )
        if k + 1 < N:
            for v in lay.top:
                bl = Counter(d.src(e1) for e in d.B(v) for e1 in d.B(d.src(e)))
                rd = Counter(d.src(f1) for f in d.R(v) for f1 in d.R(d.src(f)))
                if bl != rd or any(c > 1 for c in bl.values()) or any(c > 1 for c in rd.values()):
                    rep.add("h-c-compatibility", f"blue and red two-step sources differ at {v}", v)
        else:
            rep.unchecked.append(f"layer {k}: compatibility needs layer {k + 1}")
    return rep


def is_refined(d: LDiagram) -> bool:
    return not refinement_failures(d)


def refinement_failures(d: LDiagram) -> list:
    """Layers containing two red edges with the same source and range."""
    bad = []
    for k, lay in enumerate(d.layers):
        pairs = Counter((e.src, e.tgt) for e in lay.edges if e.color == RED)
        if any(c > 1 for c in pairs.values()):
            bad.append(k)
    return bad


# ---------------------------------------------------------------- rombs


@dataclass(frozen=True)
class Romb:
    e0: str
    e1: str
    f0: str
    f1: str


def _unique(cands, what):
    if not cands:
        raise NoCompletion(f"no completion for {what}")
    if len(cands) > 1:
        raise AmbiguousCompletion(f"{len(cands)} completions for {what}")
    return cands[0]


def _check_blue_pair(d, e0, e1):
    if d.color(e0) != BLUE or d.color(e1) != BLUE or d.src(e0) != d.tgt(e1):
        raise ValueError(f"({e0}, {e1}) is not a composable blue pair")


def complete_romb_from_blue(d: LDiagram, e0: str, e1: str) -> Romb:
    """Even base: the unique red pair with f1 in R(f0) closing the blue pair."""
    _check_blue_pair(d, e0, e1)
    v, w = d.tgt(e0), d.src(e1)
    if d.vertex_level[v] % 2 == 1:
        gs = d.red_out.get(v, ())
        if len(gs) != 1:
            raise ValueError(f"{v} is on an odd level; pass the red edge g to complete_romb_odd")
        return complete_romb_odd(d, gs[0], e0, e1)
    cands = [(f0, f1) for f0, f1 in d.red_pairs_from(w) if d.tgt(f0) == v and d.in_R_of(f1, f0)]
    f0, f1 = _unique(cands, f"blue pair ({e0}, {e1})")
    return Romb(e0, e1, f0, f1)


def complete_romb_odd(d: LDiagram, g: str, e0: str, e1: str) -> Romb:
    """Odd base: the unique red pair with f0 in R(g) closing the blue pair."""
    _check_blue_pair(d, e0, e1)
    v, w = d.tgt(e0), d.src(e1)
    if d.color(g) != RED or d.src(g) != v:
        raise ValueError(f"{g} is not a red edge leaving {v}")
    cands = [(f0, f1) for f0, f1 in d.red_pairs_from(w) if d.tgt(f0) == v and d.block_label.get(f0) == g]
    f0, f1 = _unique(cands, f"blue pair ({e0}, {e1}) under {g}")
    return Romb(e0, e1, f0, f1)


def complete_romb_from_red(d: LDiagram, f0: str, f1: str) -> tuple:
    """The unique blue pair (e0, e1) closing a red pair."""
    if d.color(f0) != RED or d.color(f1) != RED or d.src(f0) != d.tgt(f1):
        raise ValueError(f"({f0}, {f1}) is not a composable red pair")
    v, w = d.tgt(f0), d.src(f1)
    if d.vertex_level[v] % 2 == 0 and not d.in_R_of(f1, f0):
        raise ValueError(f"{f1} is not in R({f0})")
    cands = [(e0, e1) for e0, e1 in d.blue_pairs_from(w) if d.tgt(e0) == v]
    return _unique(cands, f"red pair ({f0}, {f1})")


def all_rombs(d: LDiagram, k: int):
    """Every romb with base on level k, found by closing each blue pair."""
    out = []
    for w in d.level(k + 2):
        for e0, e1 in d.blue_pairs_from(w):
            v = d.tgt(e0)
            if k % 2 == 0:
                out.append(complete_romb_from_blue(d, e0, e1))
            else:
                for g in d.red_out.get(v, ()):
                    out.append(complete_romb_odd(d, g, e0, e1))
    return out


def romb_suite(d: LDiagram) -> Report:
    """Exhaustive completion in both directions on every layer pair in the horizon."""
    rep = Report("rombs")
    for k in range(d.horizon - 1):
        for w in d.level(k + 2):
            try:
                for e0, e1 in d.blue_pairs_from(w):
                    if k % 2 == 0:
                        r = complete_romb_from_blue(d, e0, e1)
                        if complete_romb_from_red(d, r.f0, r.f1) != (e0, e1):
                            rep.add("romb-roundtrip", "red-to-blue closure disagrees", e0, e1)
                    else:
                        for g in d.red_out.get(d.tgt(e0), ()):
                            r = complete_romb_odd(d, g, e0, e1)
                            if complete_romb_from_red(d, r.f0, r.f1) != (e0, e1):
                                rep.add("romb-roundtrip", "red-to-blue closure disagrees", e0, e1)
                for f0, f1 in d.red_pairs_from(w):
                    if k % 2 == 0 and not d.in_R_of(f1, f0):
                        continue
                    complete_romb_from_red(d, f0, f1)
            except (NoCompletion, AmbiguousCompletion) as exc:
                rep.add("romb-completion", str(exc), w)
    return rep


# ---------------------------------------------------------------- telescoping


def check_sequence(m: Sequence[int], horizon: int | None = None) -> tuple:
    m = tuple(int(x) for x in m)
    if not m:
        raise CRViolated("empty contraction sequence")
    if m[0] < 0 or m[0] % 2 != 0:
        raise CRViolated(f"m_0 = {m[0]} must be even and non-negative")
    for a, b in zip(m, m[1:]):
        if b <= a or (b - a) % 2 != 1:
            raise CRViolated(f"consecutive terms {a}, {b} must increase by an odd amount")
    if horizon is not None and m[-1] > horizon:
        raise HorizonExceeded(f"sequence reaches level {m[-1]} beyond horizon {horizon}")
    return m


def compose_sequences(m: Sequence[int], m2: Sequence[int]) -> tuple:
    """Index sequence of telescoping by m and then by m2: n -> m[m2[n]]."""
    return tuple(m[i] for i in m2)


def _paths(d: LDiagram, a: int, b: int, color) -> dict:
    """Paths from level a down to level b of one color, keyed by their top vertex.

    Red paths obey f_{i+1} in R(f_i) whenever edge f_i sits on an even layer i.
    """
    by_top = defaultdict(list)
    for v in d.level(a):
        frontier = [(e,) for e in (d.B(v) if color == BLUE else d.R(v))]
        for i in range(a + 1, b):
            nxt = []
            for p in frontier:
                last = p[-1]
                w = d.src(last)
                if color == BLUE:
                    nxt.extend(p + (e,) for e in d.B(w))
                elif (i - 1) % 2 == 0:
                    nxt.extend(p + (f,) for f in d.Rf(last))
                else:
                    nxt.extend(p + (f,) for f in d.R(w))
            frontier = nxt
        by_top[v] = frontier
    return by_top


def telescope(d: LDiagram, m: Sequence[int]) -> LDiagram:
    """Contract along m; a contracted edge's id joins its constituent ids with '~'."""
    m = check_sequence(m, d.horizon)
    layers = []
    prev_red_last = {}
    for n in range(len(m) - 1):
        a, b = m[n], m[n + 1]
        blue = _paths(d, a, b, BLUE)
        red = _paths(d, a, b, RED)
        edges, sep, labels = [], {}, {}
        red_last = {}
        for v in d.level(a):
            bp = [SEP.join(p) for p in blue[v]]
            rp = [SEP.join(p) for p in red[v]]
            for p, pid in zip(blue[v], bp):
                edges.append(Edge(pid, d.src(p[-1]), v, BLUE))
            for p, pid in zip(red[v], rp):
                edges.append(Edge(pid, d.src(p[-1]), v, RED))
                red_last[pid] = p[-1]
            if n % 2 == 0:
                sep[v] = (tuple(bp), tuple(rp))
                labels[v] = ("B", "R")
            else:
                blocks, labs = [tuple(bp)], ["B"]
                hats = sorted(fid for fid, last in prev_red_last.items() if d.src(last) == v)
                for fhat in hats:
                    g = prev_red_last[fhat]
                    blk = tuple(pid for p, pid in zip(red[v], rp) if d.block_label.get(p[0]) == g)
                    blocks.append(blk)
                    labs.append(fhat)
                sep[v] = tuple(blocks)
                labels[v] = tuple(labs)
        prev_red_last = {pid: last for pid, last in red_last.items()}
        bottom = d.level(b)
        layers.append(Layer(d.level(a), bottom, edges, sep, labels))
    meta = dict(d.meta)
    if "cells" in meta:
        keep = {v for n in m for v in d.level(n)}
        meta["cells"] = {v: c for v, c in meta["cells"].items() if v in keep}
    meta.pop("levels", None)
    return LDiagram(layers, meta)


# ---------------------------------------------------------------- construction from systems


def _contain_map(sys, fine, coarse):
    """For each fine cell index, the coarse indices whose sets contain it."""
    lo, hi = sys.hull(*fine, *coarse)
    owner = {}
    fine_words = []
    for i, c in enumerate(fine):
        ws = sys.extend(c, lo, hi).words
        fine_words.append(len(ws))
        for w in ws:
            owner[w] = i
    counts = defaultdict(Counter)
    for j, c in enumerate(coarse):
        for w in sys.extend(c, lo, hi).words:
            i = owner.get(w)
            if i is not None:
                counts[i][j] += 1
    return {i: [j for j, cnt in sorted(counts[i].items()) if cnt == fine_words[i]] for i in range(len(fine))}


def ldiagram_from_partitions(sys, P: Sequence[Sequence]) -> LDiagram:
    """Vertices are cells; blue edges are inclusions; red edges follow the shift."""
    names = []
    cells = {}
    for n, part in enumerate(P):
        lvl = []
        for c in part:
            name = f"{n}:{sys.cell_name(c)}"
            lvl.append(name)
            cells[name] = c
        names.append(lvl)
    layers = []
    for n in range(len(P) - 1):
        top, bottom = names[n], names[n + 1]
        edges = []
        parent = _contain_map(sys, P[n + 1], P[n])
        for i, js in parent.items():
            for j in js:
                edges.append(Edge(f"b{n}:{bottom[i][len(str(n + 1)) + 1:]}", bottom[i], top[j], BLUE))
        if n % 2 == 0:
            images = [sys.sigma(c) for c in P[n]]
            red = _contain_map(sys, P[n + 1], images)
            for i, js in red.items():
                for j in js:
                    edges.append(Edge(f"r{n}:{bottom[i][len(str(n + 1)) + 1:]}>{top[j][len(str(n)) + 1:]}", bottom[i], top[j], RED))
        else:
            pre = [sys.sigma_inv(c) for c in P[n]]
            red = _contain_map(sys, P[n + 1], pre)
            for i, js in red.items():
                for j in js:
                    edges.append(Edge(f"r{n}:{bottom[i][len(str(n + 1)) + 1:]}", bottom[i], top[j], RED))
        layers.append(_separate(n, top, bottom, edges, layers[-1] if layers else None, P, sys, cells))
    return LDiagram(layers, {"system": sys, "cells": cells, "partitions": P})


def _separate(n, top, bottom, edges, above, P, sys, cells):
    ins = defaultdict(lambda: ([], []))
    for e in edges:
        ins[e.tgt][0 if e.color == BLUE else 1].append(e)
    sep, labels = {}, {}
    for v in top:
        blue, red = ins[v]
        if n % 2 == 0:
            sep[v] = (tuple(e.id for e in blue), tuple(e.id for e in red))
            labels[v] = ("B", "R")
            continue
        # g in R(f) iff s(g) is contained in r(f)
        fs = sorted((f for f in above.edges if f.color == RED and f.src == v), key=lambda f: f.id)
        blocks, labs = [tuple(e.id for e in blue)], ["B"]
        for f in fs:
            target = cells[f.tgt]
            blocks.append(tuple(g.id for g in red if sys.subset(cells[g.src], target)))
            labs.append(f.id)
        sep[v] = tuple(blocks)
        labels[v] = tuple(labs)
    return Layer(top, bottom, edges, sep, labels)


def build_ldiagram(sys, depth: int) -> LDiagram:
    """Diagram of a built-in system from its closed cylinder partition sequence."""
    if depth < 0:
        raise HorizonExceeded("depth must be non-negative")
    P = S.refined_sequence(sys, depth)
    return ldiagram_from_partitions(sys, P)


def subsampled(sys, depth_m: Sequence[int]) -> LDiagram:
    """Diagram built directly from the partitions P_{m_0}, P_{m_1}, ..."""
    P = S.refined_sequence(sys, max(depth_m))
    return ldiagram_from_partitions(sys, [P[i] for i in depth_m])


def level_isomorphic(a: LDiagram, b: LDiagram) -> tuple[bool, str]:
    """Layer-respecting isomorphism between diagrams whose vertices carry the same clopen sets.

    Vertices are matched by their clopen-set keys; edges by (source, range, color)
    multiplicities; separations by the induced block partitions.
    """
    if a.horizon != b.horizon:
        return False, "different horizons"
    sys = a.meta["system"]
    ka = {v: (a.vertex_level[v], sys.key(c)) for v, c in a.meta["cells"].items() if v in a.vertex_level}
    kb = {v: (b.vertex_level[v], sys.key(c)) for v, c in b.meta["cells"].items() if v in b.vertex_level}
    for n in range(a.horizon + 1):
        sa = sorted(ka[v][1] for v in a.level(n))
        sb = sorted(kb[v][1] for v in b.level(n))
        if sa != sb:
            return False, f"level {n} cells differ"
    for k in range(a.horizon):
        ea = Counter((ka[e.src], ka[e.tgt], e.color) for e in a.layers[k].edges)
        eb = Counter((kb[e.src], kb[e.tgt], e.color) for e in b.layers[k].edges)
        if ea != eb:
            return False, f"layer {k} edges differ"
        pa = _block_shapes(a, k, ka)
        pb = _block_shapes(b, k, kb)
        if pa != pb:
            return False, f"layer {k} separations differ"
    return True, "isomorphic"


def _block_shapes(d, k, key):
    lay = d.layers[k]
    out = set()
    for v in lay.top:
        shape = frozenset(
            tuple(sorted(Counter((key[d.src(e)], d.color(e)) for e in blk).items(), key=repr)) for blk in lay.blocks(v)
        )
        out.add((key[v], shape))
    return out
