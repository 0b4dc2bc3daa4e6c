"""Exact corner algebras of the layers, the connecting maps between them and
their evaluation in the Steinberg model of the groupoid.

Words are tuples of letters. A letter (e, 1) is the edge e, (e, -1) its ghost
e*, and (v, 0) the vertex idempotent p_v. Edges run from their source (the
lower level) to their target; the range of e is its target. Products are kept
in the normal form of the separated-graph relations: a ghost-edge junction
e* f inside one block is resolved, and for the least edge d of each block the
junction d d* is replaced by p_v minus the other g g* of the block. Vertices
are normal forms; expanding p_v into a sum of t(e, e) only happens when a
stage advance asks for it.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .dynamics import (
    locate,
    resolution_of_layer,
    stacked_diagram,
    structure_ball,
)
from .errors import HorizonExceeded, ParseError, StageOverflow, StructureMismatch
from .graph import BLUE, RED, Report
from .ldiagram import LDiagram
from .steinberg import (
    SteinbergElement,
    bisection,
    indicator,
    model_of,
    tabulate,
    tset,
    zero,
)


# ---------------------------------------------------------------- one layer


class LayerAlgebra:
    """The separated-graph algebra of layer `level` of a diagram (rational scalars)."""

    def __init__(self, d: LDiagram, level: int):
        if level >= d.horizon:
            raise HorizonExceeded(f"layer {level} is beyond horizon {d.horizon}")
        self.d = d
        self.level = level
        lay = d.layers[level]
        self.layer = lay
        self.top = frozenset(lay.top)
        self.bottom = frozenset(lay.bottom)
        self.block_of = {}
        self.blocks = {}
        for v in lay.top:
            for i, blk in enumerate(lay.blocks(v)):
                key = (v, i)
                self.blocks[key] = tuple(sorted(blk))
                for e in blk:
                    self.block_of[e] = key
        self.least = {key: blk[0] for key, blk in self.blocks.items() if blk}
        self._mul = {}

    def __repr__(self):
        return f"LayerAlgebra(level={self.level})"

    def letter_range(self, x):
        g, s = x
        if s == 0:
            return g
        return self.d.tgt(g) if s == 1 else self.d.src(g)

    def letter_source(self, x):
        g, s = x
        if s == 0:
            return g
        return self.d.src(g) if s == 1 else self.d.tgt(g)

    def word_range(self, w):
        return self.letter_range(w[0])

    def word_source(self, w):
        return self.letter_source(w[-1])

    def check_letter(self, x):
        g, s = x
        if s == 0:
            if g not in self.top and g not in self.bottom:
                raise KeyError(f"{g} is not a vertex of layer {self.level}")
        elif g not in self.block_of:
            raise KeyError(f"{g} is not an edge of layer {self.level}")

    def mul_words(self, a: tuple, b: tuple) -> dict:
        """Normal form of a * b as {word: coefficient}."""
        key = (a, b)
        hit = self._mul.get(key)
        if hit is None:
            hit = self._mul[key] = self._mul_words(a, b)
        return hit

    def _mul_words(self, a, b):
        if self.word_source(a) != self.word_range(b):
            return {}
        if a[0][1] == 0:
            return {b: 1}
        if b[0][1] == 0:
            return {a: 1}
        (e, s), (f, t) = a[-1], b[0]
        if s == t:
            return {}
        if s == -1:
            if self.block_of[e] != self.block_of[f]:
                return {a + b: 1}
            if e != f:
                return {}
            return self._join(a[:-1], b[1:], self.d.src(e))
        key = self.block_of[e]
        if e != f or self.least[key] != e:
            return {a + b: 1}
        out = defaultdict(int)
        for w, c in self._join(a[:-1], b[1:], self.d.tgt(e)).items():
            out[w] += c
        for g in self.blocks[key]:
            if g != e:
                out[a[:-1] + ((g, 1), (g, -1)) + b[1:]] -= 1
        return {w: c for w, c in out.items() if c}

    def _join(self, a, b, v):
        if not a and not b:
            return {((v, 0),): 1}
        if not a:
            return {b: 1}
        if not b:
            return {a: 1}
        return self.mul_words(a, b)

    # generators
    def vertex(self, v, c=1) -> "AlgElement":
        self.check_letter((v, 0))
        return AlgElement(self, {((v, 0),): c})

    def edge(self, e, c=1) -> "AlgElement":
        self.check_letter((e, 1))
        return AlgElement(self, {((e, 1),): c})

    def ghost(self, e, c=1) -> "AlgElement":
        self.check_letter((e, 1))
        return AlgElement(self, {((e, -1),): c})

    def tau(self, e, f, c=1) -> "AlgElement":
        """t(e, f) = e f*, defined when s(e) = s(f)."""
        if self.d.src(e) != self.d.src(f):
            raise ValueError(f"t({e},{f}) needs s({e}) = s({f})")
        return self.edge(e, c) * self.ghost(f)

    def unit(self, c=1) -> "AlgElement":
        """Sum of the top-vertex idempotents: the unit of the corner."""
        return AlgElement(self, {((v, 0),): c for v in self.layer.top})

    def zero(self) -> "AlgElement":
        return AlgElement(self, {})

    def generators(self) -> list:
        """(name, element) for every p_v and every t(e, f) with s(e) = s(f)."""
        out = [(f"p {v}", self.vertex(v)) for v in sorted(self.layer.top)]
        by_src = defaultdict(list)
        for e in self.layer.edges:
            by_src[e.src].append(e.id)
        for w in sorted(by_src):
            es = sorted(by_src[w])
            for e in es:
                for f in es:
                    out.append((f"t {e} {f}", self.tau(e, f)))
        return out


def layer_algebra(d: LDiagram, level: int) -> LayerAlgebra:
    cache = d.__dict__.setdefault("_layer_algebras", {})
    if level not in cache:
        cache[level] = LayerAlgebra(d, level)
    return cache[level]


def stage_algebra(d: LDiagram, n: int) -> LayerAlgebra:
    """The corner algebra A_{2n} of stage n."""
    return layer_algebra(d, 2 * n)


# ---------------------------------------------------------------- elements


class AlgElement:
    """A finite rational combination of normal words in one layer algebra."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg: LayerAlgebra, terms: dict):
        self.alg = alg
        out = defaultdict(Fraction)
        for w, c in terms.items():
            w = tuple(w)
            if not w:
                raise ValueError("empty word")
            for x in w:
                alg.check_letter(x)
            if len(w) == 1 or all(x[1] != 0 for x in w):
                out[w] += Fraction(c)
            else:
                raise ValueError("vertex letters only appear alone")
        self.terms = {w: c for w, c in out.items() if c}
        if any(len(w) > 1 for w in self.terms):
            self.terms = _normalize(alg, self.terms)

    @classmethod
    def _normal(cls, alg: LayerAlgebra, terms: dict) -> "AlgElement":
        """Wrap words already in normal form."""
        obj = cls.__new__(cls)
        obj.alg = alg
        obj.terms = {w: Fraction(c) for w, c in terms.items() if c}
        return obj

    @property
    def level(self) -> int:
        return self.alg.level

    @property
    def stage(self) -> int:
        if self.alg.level % 2:
            raise ValueError("odd levels carry no stage")
        return self.alg.level // 2

    @property
    def diagram(self) -> LDiagram:
        return self.alg.d

    def _lift(self, other):
        if isinstance(other, (int, Fraction)):
            return self.alg.unit(other)
        if not isinstance(other, AlgElement):
            return None
        if other.alg.d is not self.alg.d:
            raise ValueError("elements over different diagrams")
        return other

    def _matched(self, other):
        other = self._lift(other)
        if other is None:
            return None, None
        a, b = self, other
        while a.level < b.level:
            a = _pad(a, b.level)
        while b.level < a.level:
            b = _pad(b, a.level)
        return a, b

    def __add__(self, other):
        a, b = self._matched(other)
        if a is None:
            return NotImplemented
        out = dict(a.terms)
        for w, c in b.terms.items():
            out[w] = out.get(w, 0) + c
        return AlgElement._normal(a.alg, out)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        a, b = self._matched(other)
        if a is None:
            return NotImplemented
        return a + b.scale(-1)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "AlgElement":
        c = Fraction(c)
        return AlgElement._normal(self.alg, {w: c * x for w, x in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        a, b = self._matched(other)
        if a is None:
            return NotImplemented
        out = defaultdict(Fraction)
        for u, x in a.terms.items():
            for v, y in b.terms.items():
                for w, z in a.alg.mul_words(u, v).items():
                    out[w] += x * y * z
        return AlgElement._normal(a.alg, out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def star(self) -> "AlgElement":
        return AlgElement._normal(self.alg, {tuple((g, -s) for g, s in reversed(w)): c for w, c in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)) and other == 0:
            return self.is_zero()
        if not isinstance(other, AlgElement):
            return NotImplemented
        a, b = self._matched(other)
        return a.terms == b.terms

    def __hash__(self):
        return hash((self.alg.level, frozenset(self.terms.items())))

    def items(self):
        return sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0]))

    def is_vertex_sum(self) -> bool:
        """A sum of pairwise distinct vertex idempotents with coefficient 1."""
        return all(len(w) == 1 and w[0][1] == 0 and c == 1 for w, c in self.terms.items())

    def __str__(self):
        return format_element(self)

    __repr__ = __str__


def _normalize(alg: LayerAlgebra, terms: dict) -> dict:
    """Rewrite arbitrary words into normal form by multiplying letter by letter."""
    out = defaultdict(Fraction)
    for w, c in terms.items():
        acc = {(w[0],): Fraction(1)}
        for x in w[1:]:
            nxt = defaultdict(Fraction)
            for u, y in acc.items():
                for v, z in alg.mul_words(u, (x,)).items():
                    nxt[v] += y * z
            acc = {u: y for u, y in nxt.items() if y}
        for u, y in acc.items():
            out[u] += c * y
    return {w: c for w, c in out.items() if c}


# ---------------------------------------------------------------- connecting maps


def ghost_block(d: LDiagram, e: str) -> tuple:
    """X(e): the block at s(e) in the next layer that replaces e."""
    if d.color(e) == BLUE:
        return d.B(d.src(e))
    if d.edge_layer[e] % 2 == 0:
        return d.Rf(e)
    return d.R(d.src(e))


def S(d: LDiagram, v: str, via: str = "blue") -> dict:
    """S(v) as {vertex two levels down: multiplicity}, summed over the blue or over the red edges into v."""
    edges = d.B(v) if via == "blue" else d.R(v)
    out = defaultdict(int)
    for e in edges:
        for x in ghost_block(d, e):
            out[d.src(x)] += 1
    return dict(out)


def phi_tilde(a: AlgElement) -> AlgElement:
    """The *-homomorphism from layer n to layer n+1 given on generators.

    Top vertices go to S(v), bottom vertices to themselves, e to the sum of the
    ghosts of X(e) and e* to the sum of the edges of X(e).
    """
    d = a.alg.d
    n = a.alg.level
    if n + 2 > d.horizon:
        raise HorizonExceeded(f"the map out of layer {n} needs horizon {n + 2}, have {d.horizon}")
    nxt = layer_algebra(d, n + 1)
    images = {}

    def image(x):
        hit = images.get(x)
        if hit is not None:
            return hit
        g, s = x
        if s == 0:
            if g in a.alg.top:
                out = {((u, 0),): Fraction(c) for u, c in S(d, g).items()}
            else:
                out = {((g, 0),): Fraction(1)}
        else:
            out = {((h, -s),): Fraction(1) for h in ghost_block(d, g)}
        images[x] = out
        return out

    total = defaultdict(Fraction)
    for w, c in a.terms.items():
        acc = dict(image(w[0]))
        for x in w[1:]:
            nxt_acc = defaultdict(Fraction)
            img = image(x)
            for u, y in acc.items():
                for v, z in img.items():
                    for r, q in nxt.mul_words(u, v).items():
                        nxt_acc[r] += y * z * q
            acc = {u: y for u, y in nxt_acc.items() if y}
            if not acc:
                break
        for u, y in acc.items():
            total[u] += c * y
    return AlgElement._normal(nxt, total)


def phi_step(a: AlgElement) -> AlgElement:
    """Stage n to stage n+1: two applications of phi_tilde."""
    d = a.alg.d
    n = a.stage
    if 2 * n + 3 > d.horizon:
        raise HorizonExceeded(f"phi_step at stage {n} needs horizon {2 * n + 3}, have {d.horizon}")
    return phi_tilde(phi_tilde(a))


def _pad(a: AlgElement, level: int) -> AlgElement:
    try:
        return phi_step(a) if a.level % 2 == 0 and level - a.level >= 2 else phi_tilde(a)
    except HorizonExceeded as exc:
        raise StageOverflow(f"padding to level {level}: {exc}") from exc


def phi_power(a: AlgElement, k: int) -> AlgElement:
    for _ in range(k):
        a = phi_step(a)
    return a


def s_forms_agree(d: LDiagram, v: str) -> bool:
    """The blue-sum and the red-sum forms of S(v) agree."""
    return S(d, v, "blue") == S(d, v, "red")


# ---------------------------------------------------------------- tameness


def random_word(alg: LayerAlgebra, k: int, rng: random.Random) -> tuple:
    """A random normal word of k edge or ghost letters with composable junctions."""
    d = alg.d
    edges = [e.id for e in alg.layer.edges]
    for _ in range(1000):
        x = (rng.choice(edges), rng.choice((1, -1)))
        w = [x]
        ok = True
        for _ in range(k - 1):
            src = alg.letter_source(w[-1])
            if w[-1][1] == 1:
                cands = [(h, -1) for h in edges if d.src(h) == src]
            else:
                cands = [(h, 1) for h in edges if d.tgt(h) == src]
            cands = [c for c in cands if alg.mul_words(tuple(w[-1:]), (c,)) == {tuple(w[-1:]) + (c,): 1}]
            if not cands:
                ok = False
                break
            w.append(rng.choice(cands))
        if ok:
            return tuple(w)
    raise ValueError("no composable word found")


def tameness_check(a: AlgElement | tuple, level: int | None = None, d: LDiagram | None = None):
    """(ok, image): phi_tilde^k(w w*) is a sum of distinct vertices, k = length of w."""
    if isinstance(a, tuple):
        alg = layer_algebra(d, level)
        w = a
        elem = AlgElement(alg, {w: 1})
    else:
        elem = a
        if len(elem.terms) != 1:
            raise ValueError("tameness is checked on a single word")
        (w,) = elem.terms
    k = len(w)
    n = elem.level
    dd = elem.alg.d
    if n + k + 1 > dd.horizon:
        raise HorizonExceeded(f"a length-{k} word at level {n} needs horizon {n + k + 1}, have {dd.horizon}")
    x = elem * elem.star()
    for _ in range(k):
        x = phi_tilde(x)
    return x.is_vertex_sum(), x


# ---------------------------------------------------------------- canonical terms


@dataclass(frozen=True)
class CanonicalTerm:
    """One of the four shapes: (A) p_U, (B) f1 e1* ... fk ek*, (C) its adjoint,
    (D) RB^{k-1} RR BR^{l-1}. ``left`` and ``right`` list the red label chains
    read off the word; ``witness`` lists cylinders of the nonvanishing set."""

    kind: str
    stage: int
    word: tuple
    left: tuple = ()
    right: tuple = ()
    witness: tuple = field(default=(), compare=False)

    @property
    def degree(self) -> int:
        return len(self.left) - len(self.right)

    def element(self, d: LDiagram) -> AlgElement:
        return AlgElement(stage_algebra(d, self.stage), {self.word: 1})

    def __str__(self):
        return f"{self.kind}:{format_word(self.word)}"


def tau_factors(w: tuple) -> list:
    """[(x1, y1), ...] for a corner word x1 y1* x2 y2* ..."""
    if len(w) == 1 and w[0][1] == 0:
        return []
    if len(w) % 2 or any(w[i][1] != 1 or w[i + 1][1] != -1 for i in range(0, len(w), 2)):
        raise ValueError(f"{_plain_word(w)} is not a product of t-generators")
    return [(w[i][0], w[i + 1][0]) for i in range(0, len(w), 2)]


def classify(d: LDiagram, w: tuple, stage: int):
    """(kind, left reds, right reds) of a normal corner word, or None when a
    factor x x* remains and a stage advance is needed."""
    if len(w) == 1 and w[0][1] == 0:
        return "A", (), ()
    fs = tau_factors(w)
    if any(x == y for x, y in fs):
        return None
    col = lambda e: "R" if d.color(e) == RED else "B"
    pat = [col(x) + col(y) for x, y in fs]
    if all(p == "RB" for p in pat):
        return "B", tuple(x for x, _ in fs), ()
    if all(p == "BR" for p in pat):
        return "C", (), tuple(y for _, y in reversed(fs))
    k = pat.index("RR") if "RR" in pat else -1
    if k >= 0 and all(p == "RB" for p in pat[:k]) and all(p == "BR" for p in pat[k + 1 :]):
        left = tuple(x for x, _ in fs[: k + 1])
        right = tuple(y for _, y in reversed(fs[k:]))
        return "D", left, right
    raise ValueError(f"unexpected normal word {format_word(w)}")


def term_support(d: LDiagram, kind: str, stage: int, word: tuple, left: tuple, right: tuple) -> SteinbergElement:
    """The set whose emptiness makes the term vanish: U for (A), T1 for (B), (D), T for (C)."""
    M = model_of(d)
    if kind == "A":
        return indicator(M, [word[0][0]])
    if kind == "C":
        return tset(M, right, 2 * stage)
    t = tset(M, left, 2 * stage)
    if kind == "D":
        u = tset(M, right, 2 * stage)
        return t if not u.is_zero() else u
    return t


def canonicalize(a: AlgElement, budget: int = 4, drop_vanishing: bool = True):
    """(stage, [(coefficient, CanonicalTerm)]): advance stages until no x x* factor
    remains, then type every word; vanishing terms are dropped."""
    d = a.alg.d
    x = a
    for _ in range(budget + 1):
        kinds = {}
        for w in x.terms:
            kinds[w] = classify(d, w, x.stage)
            if kinds[w] is None:
                break
        else:
            out = []
            for w, c in x.items():
                kind, left, right = kinds[w]
                wit = _witness(d, kind, x.stage, w, left, right)
                if drop_vanishing and not wit:
                    continue
                out.append((c, CanonicalTerm(kind, x.stage, w, left, right, wit)))
            return x.stage, out
        try:
            x = phi_step(x)
        except HorizonExceeded:
            raise
    raise StageOverflow(f"canonical form not reached within {budget} stage advances")


def _witness(d, kind, stage, w, left, right) -> tuple:
    if kind == "A":
        return (w[0][0],)
    sup = term_support(d, kind, stage, w, left, right)
    if kind == "D":
        a = tset(model_of(d), left, 2 * stage)
        b = tset(model_of(d), right, 2 * stage)
        if a.is_zero() or b.is_zero():
            return ()
        return tuple(sorted(a.data[()])) + tuple(sorted(b.data[()]))
    return tuple(sorted(sup.data.get((), {})))


def to_steinberg(t: CanonicalTerm, d: LDiagram) -> SteinbergElement:
    """Closed forms: p_U -> 1_U, (B) -> Z(T1, k, 0, X), (C) -> Z(X, 0, k, T), (D) -> Z(T1, k, l, T2)."""
    M = model_of(d)
    lvl = 2 * t.stage
    if lvl + 2 > d.horizon:
        raise HorizonExceeded(f"stage {t.stage} needs horizon {lvl + 2}, have {d.horizon}")
    cache = d.__dict__.setdefault("_term_images", {})
    key = (t.kind, t.stage, t.word)
    if key in cache:
        return cache[key]
    if t.kind == "A":
        out = indicator(M, [t.word[0][0]])
    elif t.kind == "B":
        T1 = tset(M, t.left, lvl)
        out = zero(M) if T1.is_zero() else bisection(M, T1, len(t.left), 0, None)
    elif t.kind == "C":
        T = tset(M, t.right, lvl)
        out = zero(M) if T.is_zero() else bisection(M, None, 0, len(t.right), T)
    else:
        T1 = tset(M, t.left, lvl)
        T2 = tset(M, t.right, lvl)
        if T1.is_zero() or T2.is_zero():
            out = zero(M)
        else:
            out = bisection(M, T1, len(t.left), len(t.right), T2)
    cache[key] = out
    return out


def evaluate(a: AlgElement, budget: int = 4) -> SteinbergElement:
    """The evaluation map through canonical forms and closed-form bisections."""
    d = a.alg.d
    _, terms = canonicalize(a, budget)
    out = zero(model_of(d))
    for c, t in terms:
        out = out + to_steinberg(t, d).scale(c)
    return out


def generator_image(d: LDiagram, x: tuple, stage: int) -> SteinbergElement:
    """Images of p_v and of t(e, f) from the generator table: a red edge
    contributes its label set and one shift, a blue edge the cylinder of s(e)."""
    M = model_of(d)
    lvl = 2 * stage
    cache = d.__dict__.setdefault("_generator_images", {})
    key = (x, stage)
    if key in cache:
        return cache[key]
    if len(x) == 1:
        out = indicator(M, [x[0]])
    else:
        e, f = x
        W = d.src(e)

        def side(g):
            if d.color(g) == RED:
                return tset(M, (g,), lvl), 1
            return indicator(M, [W]), 0

        U, k = side(e)
        V, l = side(f)
        out = bisection(M, U, k, l, V)
    cache[key] = out
    return out


def evaluate_generators(a: AlgElement) -> SteinbergElement:
    """The evaluation map as a product of generator images (no canonical forms)."""
    d = a.alg.d
    M = model_of(d)
    n = a.stage
    if 2 * n + 2 > d.horizon:
        raise HorizonExceeded(f"stage {n} needs horizon {2 * n + 2}, have {d.horizon}")
    out = zero(M)
    for w, c in a.items():
        if len(w) == 1 and w[0][1] == 0:
            img = generator_image(d, (w[0][0],), n)
        else:
            img = None
            for x, y in tau_factors(w):
                g = generator_image(d, (x, y), n)
                img = g if img is None else img * g
        out = out + img.scale(c)
    return out


def injectivity_witness(t1: CanonicalTerm, t2: CanonicalTerm, d: LDiagram) -> bool:
    """True when the bisections of the two terms are disjoint."""
    return to_steinberg(t1, d).disjoint(to_steinberg(t2, d))


def vanishing_by_algebra(t: CanonicalTerm, d: LDiagram) -> bool:
    """phi_tilde^k(x x*) = 0 with k the length of the term's word."""
    x = t.element(d)
    y = x * x.star()
    for _ in range(len(t.word)):
        y = phi_tilde(y)
    return y.is_zero()


def degree_bounded_terms(d: LDiagram, stage: int = 0) -> list:
    """All nonvanishing canonical terms of degree -1, 0, 1 made of one factor, and the vertices."""
    alg = stage_algebra(d, stage)
    out = []
    for _, g in alg.generators():
        for w in g.terms:
            if len(g.terms) != 1:
                continue
            cls = classify(d, w, stage)
            if cls is None:
                continue
            kind, left, right = cls
            wit = _witness(d, kind, stage, w, left, right)
            if wit:
                out.append(CanonicalTerm(kind, stage, w, left, right, wit))
    return out


# ---------------------------------------------------------------- colimit square


def pullback_indicator(s: SteinbergElement, G: LDiagram, max_radius: int | None = None) -> SteinbergElement:
    """psi^* s: the function on the groupoid of G given by s at psi(y), where
    psi sends a point of G to the point of the diagram of s with the same
    level-0 configuration. The value on a cylinder of G is read at the prefix
    located from its configuration ball; radii grow until the value is fixed."""
    X = s.diagram
    MG = model_of(G)
    top = max_radius if max_radius is not None else X.horizon // 2

    def fn(p):
        r = 1
        while r <= top and 2 * r <= p.depth:
            try:
                q = locate(X, structure_ball(p.truncate(2 * r), r, 0), p.edges[0])
            except StructureMismatch:
                return None
            vals = s.at(q)
            if vals is not None:
                return vals
            r += 1
        return None

    return tabulate(MG, fn)


def commutativity_check(F: LDiagram, n: int = 0, depth: int = 6, generators=None) -> Report:
    """psi^* phi^{(n)}_0 (x) = phi^{(n+1)}_0 (phi_n (x)) for every generator x of stage n.

    The left side is evaluated over the resolution of layer 2n of F and pulled
    back along psi; the right side is evaluated at stage 1 of the diagram
    stacking layers 2n, 2n+1 of F on the resolution of layer 2n+2.
    """
    rep = Report("commutativity")
    Xn = resolution_of_layer(F, 2 * n, depth, tag=f"X{n}/")
    Y = resolution_of_layer(F, 2 * n + 2, depth - 2, tag=f"X{n + 1}/")
    G = stacked_diagram(F, n, Y)
    alg_x = stage_algebra(Xn, 0)
    alg_g0 = stage_algebra(G, 0)
    gens = alg_x.generators() if generators is None else generators
    for name, x in gens:
        lhs = pullback_indicator(evaluate_generators(x), G)
        xg = AlgElement(alg_g0, x.terms)
        rhs = evaluate_generators(phi_step(xg))
        if lhs != rhs:
            rep.add("square", "the two composites differ", name)
    rep.info = {"generators": len(gens), "depth": depth}
    return rep


# ---------------------------------------------------------------- text form


def format_word(w: tuple) -> str:
    if len(w) == 1 and w[0][1] == 0:
        return f"(p {_name(w[0][0])})"
    try:
        fs = tau_factors(w)
    except ValueError:
        return _plain_word(w)
    parts = [f"(t {_name(x)} {_name(y)})" for x, y in fs]
    return parts[0] if len(parts) == 1 else "(* " + " ".join(parts) + ")"


def _plain_word(w: tuple) -> str:
    return "(w " + " ".join(_name(g) + ("*" if s == -1 else "") for g, s in w) + ")"


def _name(v: str) -> str:
    if any(ch in v for ch in ' ()"*;') or not v:
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return v


def format_element(a: AlgElement) -> str:
    items = a.items()
    if not items:
        return "0"
    parts = []
    for w, c in items:
        t = format_word(w)
        parts.append(t if c == 1 else f"(* {c} {t})")
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def _tokens(text: str):
    i, n = 0, len(text)
    line, col = 1, 1
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if ch in "()":
            yield ch, line, col
            i, col = i + 1, col + 1
            continue
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            yield ("str", "".join(buf)), line, col
            col += j + 1 - i
            i = j + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in '()"':
            j += 1
        yield ("atom", text[i:j]), line, col
        col += j - i
        i = j


def parse_expr(text: str, d: LDiagram, stage: int = 0) -> AlgElement:
    """Parse an element of the stage-`stage` corner.

        expr   = number | "(" "p" name ")" | "(" "t" name name ")"
               | "(" op expr { expr } ")"
        op     = "+" | "-" | "*" | "star" | "phi"
        number = [ "-" ] digits [ "/" digits ]
        name   = atom | '"' chars '"'

    A number c stands for c times the unit of the corner.
    """
    toks = list(_tokens(text))
    pos = 0
    alg = stage_algebra(d, stage)

    def err(msg, k=None):
        k = pos if k is None else k
        if k < len(toks):
            _, line, col = toks[k]
        else:
            line, col = (toks[-1][1], toks[-1][2]) if toks else (1, 1)
        raise ParseError(msg, line, col)

    def name():
        nonlocal pos
        if pos >= len(toks) or toks[pos][0] in ("(", ")"):
            err("expected a name")
        tok = toks[pos][0]
        pos += 1
        return tok[1]

    def expr():
        nonlocal pos
        if pos >= len(toks):
            err("unexpected end of input")
        tok = toks[pos][0]
        if tok == ")":
            err("unexpected ')'")
        if tok != "(":
            pos += 1
            kind, val = tok
            if kind == "atom":
                try:
                    return alg.unit(Fraction(val))
                except (ValueError, ZeroDivisionError):
                    pass
            err(f"expected a number or '(', got {val!r}", pos - 1)
        start = pos
        pos += 1
        op = name()
        try:
            if op == "p":
                out = alg.vertex(name())
            elif op == "t":
                e, f = name(), name()
                out = alg.tau(e, f)
            elif op in ("+", "-", "*", "star", "phi"):
                args = []
                while pos < len(toks) and toks[pos][0] != ")":
                    args.append(expr())
                if not args:
                    err(f"'{op}' needs an argument")
                if op == "+":
                    out = args[0]
                    for x in args[1:]:
                        out = out + x
                elif op == "-":
                    out = -args[0] if len(args) == 1 else args[0]
                    for x in args[1:]:
                        out = out - x
                elif op == "*":
                    out = args[0]
                    for x in args[1:]:
                        out = out * x
                elif op == "star":
                    if len(args) != 1:
                        err("'star' takes one argument")
                    out = args[0].star()
                else:
                    if len(args) != 1:
                        err("'phi' takes one argument")
                    out = phi_step(args[0])
            else:
                err(f"unknown operator {op!r}", start + 1)
        except KeyError as exc:
            err(f"unknown name {exc.args[0]!r}", start)
        except ValueError as exc:
            err(str(exc), start)
        if pos >= len(toks) or toks[pos][0] != ")":
            err("expected ')'")
        pos += 1
        return out

    result = expr()
    if pos != len(toks):
        err("trailing input")
    return result
