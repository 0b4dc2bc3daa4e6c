"""Locally constant functions on the groupoid of (X, sigma), stored exactly.

A groupoid element (x, m - n, y) is addressed by its source y and the reduced
configuration word w that leads from y to x (letters act right to left; a
positive letter is one forward shift, an inverse letter one backward branch).
A function is a map word -> cylinder function, a cylinder function maps
pairwise disjoint cylinders (keyed by the end vertex of their blue prefix) to
nonzero rationals. The stored form is the coarsest one, so equality of
functions is equality of dictionaries.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Callable, Iterable

from .dynamics import (
    BluePrefix,
    _back,
    _even,
    back_options,
    extensions,
    inv,
    label_at,
    mul,
    preimages,
    prefix_of,
    shift_prefix,
    word_text,
)
from .errors import HorizonExceeded, InsufficientDepth
from .ldiagram import LDiagram, complete_romb_from_red


class Model:
    """Per-diagram caches: prefixes by end vertex, ancestor chains and word walks."""

    def __init__(self, d: LDiagram):
        self.d = d
        self._prefix = {}
        self._anc = {}
        self._children = {}
        self._follow = {}

    def prefix(self, v: str) -> BluePrefix:
        p = self._prefix.get(v)
        if p is None:
            p = self._prefix[v] = prefix_of(self.d, v)
        return p

    def ancestors(self, v: str) -> tuple:
        """(v, parent(v), ..., root)."""
        a = self._anc.get(v)
        if a is None:
            e = self.d.blue_out.get(v)
            a = (v,) if not e else (v,) + self.ancestors(self.d.tgt(e[0]))
            self._anc[v] = a
        return a

    def children(self, v: str) -> tuple:
        c = self._children.get(v)
        if c is None:
            c = self._children[v] = tuple(self.d.src(e) for e in self.d.blue_in.get(v, ()))
        return c

    def shift(self, p: BluePrefix) -> BluePrefix:
        if p.depth < 2:
            raise InsufficientDepth(f"a shift needs depth 2, have {p.depth}")
        return shift_prefix(_even(p))

    def step(self, p: BluePrefix, letter) -> BluePrefix | None:
        """Apply one letter; None when the letter is not in the configuration of Z(p)."""
        g, s = letter
        if s == 1:
            if p.depth < 2:
                raise InsufficientDepth(f"a forward letter needs depth 2, have {p.depth}")
            if label_at(p) != g:
                return None
            return shift_prefix(_even(p))
        if g not in back_options(p):
            return None
        return self._back_exact(p, g)

    def _back_exact(self, p: BluePrefix, g: str) -> BluePrefix | None:
        """Common prefix of the exact preimage cells of Z(p) inside the branch of g.

        The single-branch prefix arithmetic loses up to two levels per step. For
        an odd-depth s with branch b, the exact cells are b extended by the blue
        pairs closing (f, f1) with f from s.end to b.end and f1 in R(f).
        """
        d = self.d
        odd = p.depth % 2 == 1
        if (p.depth + (1 if odd else 2)) > d.horizon:
            return _back(d, p, g, 0)
        cells = []
        for s in [p] if odd else extensions(p, p.depth + 1):
            for f0, b in preimages(s):
                if f0 != g:
                    continue
                for f in d.red_out.get(s.end, ()):
                    if d.tgt(f) != b.end or (b.depth == 0 and f != g):
                        continue
                    for f1 in d.Rf(f):
                        cells.append(b.edges + complete_romb_from_red(d, f, f1))
        if not cells:
            return None
        edges = cells[0]
        for c in cells[1:]:
            k = 0
            while k < len(edges) and c[k] == edges[k]:
                k += 1
            edges = edges[:k]
        return BluePrefix(d, edges, d.tgt(g))

    def _back_enumerated(self, p: BluePrefix, g: str):
        """Reference version of _back_exact by filtering all extensions."""
        odd = p.depth % 2 == 1
        cells = []
        for s in [p] if odd else extensions(p, p.depth + 1):
            for f0, b in preimages(s):
                if f0 == g:
                    cells.extend(x.edges for x in extensions(b, s.depth + 1) if shift_prefix(x) == s and label_at(x) == g)
        return cells

    def follow(self, p: BluePrefix, w: tuple) -> BluePrefix | None:
        """The prefix reached from Z(p) along w, or None when w leaves the configuration."""
        if not w:
            return p
        key = (p.end, w)
        if key in self._follow:
            hit = self._follow[key]
            if isinstance(hit, InsufficientDepth):
                raise hit
            return hit
        try:
            q = self.follow(p, w[1:])
            out = None if q is None else self.step(q, w[0])
        except InsufficientDepth as exc:
            self._follow[key] = exc
            raise
        self._follow[key] = out
        return out


def model_of(d: LDiagram) -> Model:
    m = d.__dict__.get("_groupoid_model")
    if m is None:
        m = d.__dict__["_groupoid_model"] = Model(d)
    return m


def word_lag(w: tuple) -> int:
    """k - l of the element reached along w: inverse letters count +1, forward letters -1."""
    return -sum(s for _, s in w)


def word_shape(w: tuple) -> tuple:
    """(#inverse letters, #forward letters)."""
    back = sum(1 for _, s in w if s == -1)
    return back, len(w) - back


def _coarsen(model: Model, cf: dict) -> dict:
    """Merge complete sibling families with a common value, deepest first."""
    cf = {v: x for v, x in cf.items() if x}
    level = model.d.vertex_level
    lv = max((level[v] for v in cf), default=0)
    while lv > 0:
        parents = defaultdict(list)
        for v in [v for v in cf if level[v] == lv]:
            parents[model.ancestors(v)[1]].append(v)
        for par, kids in parents.items():
            if len(kids) != len(model.children(par)):
                continue
            vals = {cf[k] for k in kids}
            if len(vals) == 1:
                for k in kids:
                    del cf[k]
                cf[par] = vals.pop()
        lv -= 1
    return cf


def _interior(model: Model, cf: dict) -> frozenset:
    out = set()
    for v in cf:
        out.update(model.ancestors(v)[1:])
    return frozenset(out)


class SteinbergElement:
    """An exact locally constant, compactly supported function on the groupoid."""

    __slots__ = ("model", "data", "_interior")

    def __init__(self, model: Model, data: dict):
        self.model = model
        clean = {}
        for w, cf in data.items():
            cf = _coarsen(model, {v: Fraction(x) for v, x in cf.items()})
            if cf:
                clean[tuple(w)] = cf
        self.data = clean
        self._interior = {}

    @property
    def diagram(self) -> LDiagram:
        return self.model.d

    @property
    def words(self):
        return self.data.keys()

    def interior(self, w) -> frozenset:
        s = self._interior.get(w)
        if s is None:
            s = self._interior[w] = _interior(self.model, self.data[w])
        return s

    def lookup(self, w, p: BluePrefix):
        """Value on Z(p) along w: a Fraction, or None when not constant there."""
        cf = self.data.get(w)
        if cf is None:
            return Fraction(0)
        for a in self.model.ancestors(p.end):
            x = cf.get(a)
            if x is not None:
                return x
        if p.end in self.interior(w):
            return None
        return Fraction(0)

    def at(self, p: BluePrefix):
        """{word: value} on Z(p), or None when some value is not constant there."""
        out = {}
        for w in self.data:
            x = self.lookup(w, p)
            if x is None:
                return None
            if x:
                out[w] = x
        return out

    # ------------------------------------------------------------ arithmetic

    def _combine(self, other: "SteinbergElement", sign: int) -> "SteinbergElement":
        _same(self, other)
        data = {}
        for w in set(self.data) | set(other.data):
            data[w] = _merge(self.model, self.data.get(w, {}), other.data.get(w, {}), sign)
        return SteinbergElement(self.model, data)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> "SteinbergElement":
        c = Fraction(c)
        return SteinbergElement(self.model, {w: {v: c * x for v, x in cf.items()} for w, cf in self.data.items()})

    def is_zero(self) -> bool:
        return not self.data

    def __eq__(self, other):
        if not isinstance(other, SteinbergElement):
            return NotImplemented
        return self.model is other.model and self.data == other.data

    def __hash__(self):
        return hash(frozenset((w, frozenset(cf.items())) for w, cf in self.data.items()))

    def convolve(self, other: "SteinbergElement") -> "SteinbergElement":
        """(F * G)(gamma) = sum over gamma = alpha beta of F(alpha) G(beta)."""
        _same(self, other)
        F, G = self, other
        if F.is_zero() or G.is_zero():
            return zero(self.model)
        follow = self.model.follow

        def fn(p):
            out = defaultdict(Fraction)
            for wb in G.data:
                gv = G.lookup(wb, p)
                if gv is None:
                    return None
                if not gv:
                    continue
                z = follow(p, wb)
                if z is None:
                    continue
                for u in F.data:
                    fv = F.lookup(u, z)
                    if fv is None:
                        return None
                    if fv:
                        out[mul(u, wb)] += fv * gv
            return out

        return tabulate(self.model, fn, _roots(G))

    __mul__ = convolve

    def star(self) -> "SteinbergElement":
        """F*(gamma) = F(gamma^{-1}) (the field involution is the identity)."""
        F = self
        follow = self.model.follow

        def fn(p):
            out = {}
            for w in F.data:
                w2 = inv(w)
                z = follow(p, w2)
                if z is None:
                    continue
                x = F.lookup(w, z)
                if x is None:
                    return None
                if x:
                    out[w2] = x
            return out

        return tabulate(self.model, fn)

    # ------------------------------------------------------------ inspection

    def degrees(self) -> set:
        return {word_lag(w) for w in self.data}

    def homogeneous(self, k: int) -> "SteinbergElement":
        return SteinbergElement(self.model, {w: cf for w, cf in self.data.items() if word_lag(w) == k})

    def pieces(self) -> list:
        """Sorted blocks (coefficient, range cells, m', n', source cells, word).

        One block per word and coefficient: the elements reached along the word
        from the source cells, with the exact range read off the adjoint.
        """
        try:
            adj = self.star().data
        except HorizonExceeded:
            adj = None
        out = []
        for w, cf in self.data.items():
            m, n = word_shape(w)
            back = adj.get(inv(w), {}) if adj is not None else {}
            for x in sorted(set(cf.values())):
                src = tuple(sorted(v for v, y in cf.items() if y == x))
                rng = tuple(sorted(u for u, y in back.items() if y == x)) if adj is not None else ("?",)
                out.append((x, rng, m, n, src, w))
        out.sort(key=lambda t: (t[2] - t[3], t[4], word_text(t[5]), t[0]))
        return out

    def support(self) -> set:
        return {(w, v) for w, cf in self.data.items() for v in cf}

    def disjoint(self, other: "SteinbergElement") -> bool:
        """True when no groupoid element lies in both supports."""
        _same(self, other)
        anc = self.model.ancestors
        for w in set(self.data) & set(other.data):
            mine = self.data[w]
            for v in other.data[w]:
                if any(a in mine for a in anc(v)):
                    return False
                if v in self.interior(w):
                    return False
        return True

    def __str__(self):
        if not self.data:
            return "0"
        parts = []
        for x, rng, m, n, v, w in self.pieces():
            sign = "-" if x < 0 else "+"
            parts.append(f"{sign} {abs(x)}*Z{{{'|'.join(rng)};{m};{n};{'|'.join(v)}}}")
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else s

    __repr__ = __str__

    def to_obj(self):
        return [
            {"coeff": str(x), "range": list(rng), "k": m, "l": n, "source": list(v), "word": word_text(w)}
            for x, rng, m, n, v, w in self.pieces()
        ]


def _same(a: SteinbergElement, b: SteinbergElement):
    if a.model is not b.model:
        raise ValueError("Steinberg elements over different diagrams")


def _merge(model: Model, f: dict, g: dict, sign: int) -> dict:
    """f + sign * g on the common refinement of two disjoint cylinder families."""
    keys = set(f) | set(g)
    inner = set()
    for k in keys:
        inner.update(model.ancestors(k)[1:])

    def val(cf, v):
        for a in model.ancestors(v):
            if a in cf:
                return cf[a]
        return 0

    out = {}
    stack = [k for k in keys if not any(a in keys for a in model.ancestors(k)[1:])]
    while stack:
        k = stack.pop()
        if k in inner:
            stack.extend(model.children(k))
        else:
            x = val(f, k) + sign * val(g, k)
            if x:
                out[k] = x
    return out


def _roots(el: SteinbergElement) -> list:
    """Top-most keys of a support: a cheaper start for tabulate than level 0."""
    keys = {v for cf in el.data.values() for v in cf}
    tops = set()
    for k in keys:
        anc = el.model.ancestors(k)
        tops.add(anc[-1])
    return sorted(tops)


def zero(model: Model) -> SteinbergElement:
    return SteinbergElement(model, {})


def tabulate(model: Model, fn: Callable, roots: Iterable[str] | None = None) -> SteinbergElement:
    """Build a function by refining cylinders until fn(prefix) is determined.

    fn returns {word: value} for the cylinder, or None (or raises
    InsufficientDepth) when the cylinder must be split further. Only cylinders
    below ``roots`` (default: all of level 0) are visited; elsewhere the
    function is zero.
    """
    d = model.d
    out = defaultdict(dict)
    stack = [model.prefix(v) for v in (d.level(0) if roots is None else roots)]
    while stack:
        p = stack.pop()
        try:
            r = fn(p)
        except InsufficientDepth:
            r = None
        if r is None:
            if p.depth >= d.horizon:
                raise HorizonExceeded(f"cylinder {p} is not resolved within horizon {d.horizon}")
            stack.extend(model.prefix(c) for c in model.children(p.end))
            continue
        for w, x in r.items():
            if x:
                out[w][p.end] = x
    return SteinbergElement(model, out)


# ---------------------------------------------------------------- builders


def indicator(model: Model, vertices: Iterable[str], coeff=1) -> SteinbergElement:
    """The characteristic function of a union of disjoint cylinders (unit space)."""
    return SteinbergElement(model, {(): {v: Fraction(coeff) for v in vertices}})


def whole_space(model: Model) -> SteinbergElement:
    return indicator(model, model.d.level(0))


def tset(model: Model, reds: tuple, level: int = 0) -> SteinbergElement:
    """1 on {y : sigma^{i-1} y carries the level-`level` label reds[i-1] for every i}.

    sigma^k is injective on this set and maps it into s(reds[-1]).
    """
    reds = tuple(reds)
    if not reds:
        raise ValueError("a label chain needs at least one red edge")
    first = model.d.tgt(reds[0])

    def fn(p):
        if p.depth >= level and p.truncate(level).end != first:
            return {}
        q = p
        for i, f in enumerate(reds):
            if q.depth < level + 2:
                return None
            if label_at(q, level) != f:
                return {}
            if i + 1 < len(reds):
                q = model.shift(q)
        return {(): 1}

    roots = [model.ancestors(first)[-1]]
    return tabulate(model, fn, roots)


def _reduced_fiber(model: Model, p: BluePrefix, k: int, l: int) -> dict:
    """{word: range prefix} for reduced words a^{-1}..a^{-1} b..b of shape (m', n') with
    m' - n' = k - l, m' <= k and n' <= l."""
    lag = k - l
    out = {}
    fwd = [((), p)]
    w, q = (), p
    for _ in range(l):
        g = label_at(q, 0) if q.depth >= 2 else None
        if g is None:
            raise InsufficientDepth("fiber walk needs more depth")
        w = ((g, 1),) + w
        q = model.shift(q)
        fwd.append((w, q))
    for n2, (w, q) in enumerate(fwd):
        m2 = n2 + lag
        if m2 < 0 or m2 > k:
            continue
        layer = [(w, q)]
        for _ in range(m2):
            nxt = []
            for u, z in layer:
                skip = u[0][0] if u and u[0][1] == 1 else None
                for f in back_options(z):
                    if f == skip:
                        continue
                    z2 = model._back_exact(z, f)
                    if z2 is not None:
                        nxt.append((((f, -1),) + u, z2))
            layer = nxt
        for u, z in layer:
            out[u] = z
    return out


def bisection(model: Model, U: SteinbergElement | None, k: int, l: int, V: SteinbergElement | None, coeff=1) -> SteinbergElement:
    """Coefficient times the indicator of Z(U, k, l, V) = {(x, k - l, y) : x in U, y in V, sigma^k x = sigma^l y}.

    U and V are unit-space indicators, None meaning all of X. The caller keeps
    sigma^k injective on U and sigma^l injective on V.
    """
    c = Fraction(coeff)

    def member(S, z):
        if S is None:
            return True
        x = S.lookup((), z)
        return None if x is None else bool(x)

    def fn(p):
        inV = member(V, p)
        if inV is None:
            return None
        if not inV:
            return {}
        out = {}
        for w, z in _reduced_fiber(model, p, k, l).items():
            inU = member(U, z)
            if inU is None:
                return None
            if inU:
                out[w] = c
        return out

    roots = _roots(V) if V is not None else None
    return tabulate(model, fn, roots)


def unit_cylinder(model: Model, v: str) -> SteinbergElement:
    return indicator(model, [v])
