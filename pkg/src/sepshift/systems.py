"""Built-in symbolic systems with an exact clopen-set calculus on word cylinders.

A clopen set is stored as a window [lo, hi] of coordinates together with the set
of admissible words on that window. Operations bring their arguments to a common
window first, so every answer is an exact set identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

from .errors import NonInjectiveCell
from .graph import Digraph


@dataclass(frozen=True)
class Cyl:
    """Clopen set {x : x[lo..hi] in words}; hi = lo - 1 means the empty window."""

    lo: int
    hi: int
    words: frozenset

    @property
    def empty(self) -> bool:
        return not self.words


class SymbolicSystem:
    """Base class: one-sided (coordinates >= 0) or two-sided shift over an alphabet."""

    two_sided = False

    def __init__(self, alphabet: Sequence, follows=None):
        self.alphabet = tuple(alphabet)
        self._follows = follows

    # --- admissibility
    def can_follow(self, a, b) -> bool:
        return True if self._follows is None else self._follows(a, b)

    def successors(self, a):
        return [b for b in self.alphabet if self.can_follow(a, b)]

    def predecessors(self, b):
        return [a for a in self.alphabet if self.can_follow(a, b)]

    def words(self, length: int) -> list:
        out = [()]
        for _ in range(length):
            out = [w + (b,) for w in out for b in (self.alphabet if not w else self.successors(w[-1]))]
        return out

    def admissible(self, w) -> bool:
        return all(self.can_follow(a, b) for a, b in zip(w, w[1:]))

    # --- cylinders
    def whole(self) -> Cyl:
        return Cyl(0, -1, frozenset({()}))

    def nothing(self) -> Cyl:
        return Cyl(0, -1, frozenset())

    def cylinder(self, word, lo=0) -> Cyl:
        word = tuple(word)
        return Cyl(lo, lo + len(word) - 1, frozenset({word}) if self.admissible(word) else frozenset())

    def extend(self, c: Cyl, lo: int, hi: int) -> Cyl:
        """Re-express c on the larger window [lo, hi]."""
        if c.hi < c.lo:
            if not c.words:
                return Cyl(lo, hi, frozenset())
            return Cyl(lo, hi, frozenset(self.words(hi - lo + 1)))
        assert lo <= c.lo and hi >= c.hi
        words = c.words
        for _ in range(c.hi, hi):
            words = {w + (b,) for w in words for b in self.successors(w[-1])}
        for _ in range(lo, c.lo):
            words = {(a,) + w for w in words for a in self.predecessors(w[0])}
        return Cyl(lo, hi, frozenset(words))

    def hull(self, *cs: Cyl) -> tuple[int, int]:
        real = [c for c in cs if c.hi >= c.lo]
        if not real:
            return 0, -1
        return min(c.lo for c in real), max(c.hi for c in real)

    def common(self, *cs: Cyl) -> list:
        a, b = self.hull(*cs)
        return [self.extend(c, a, b) for c in cs]

    def trim(self, c: Cyl) -> Cyl:
        """Drop boundary coordinates the set does not depend on."""
        if not c.words:
            return self.nothing()
        changed = True
        while changed and c.hi >= c.lo:
            changed = False
            shorter = Cyl(c.lo, c.hi - 1, frozenset(w[:-1] for w in c.words))
            if self.extend(shorter, c.lo, c.hi).words == c.words:
                c, changed = shorter, True
                continue
            if c.hi >= c.lo:
                shorter = Cyl(c.lo + 1, c.hi, frozenset(w[1:] for w in c.words))
                if self.extend(shorter, c.lo, c.hi).words == c.words:
                    c, changed = shorter, True
        if c.hi < c.lo:
            return self.whole()
        return c

    def key(self, c: Cyl):
        t = self.trim(c)
        return (t.lo, t.hi, tuple(sorted(t.words, key=_word_key)))

    def eq(self, a: Cyl, b: Cyl) -> bool:
        x, y = self.common(a, b)
        return x.words == y.words

    def inter(self, a: Cyl, b: Cyl) -> Cyl:
        x, y = self.common(a, b)
        return Cyl(x.lo, x.hi, x.words & y.words)

    def union(self, a: Cyl, b: Cyl) -> Cyl:
        x, y = self.common(a, b)
        return Cyl(x.lo, x.hi, x.words | y.words)

    def minus(self, a: Cyl, b: Cyl) -> Cyl:
        x, y = self.common(a, b)
        return Cyl(x.lo, x.hi, x.words - y.words)

    def subset(self, a: Cyl, b: Cyl) -> bool:
        x, y = self.common(a, b)
        return x.words <= y.words

    # --- dynamics (overridden for two-sided systems)
    def sigma(self, c: Cyl) -> Cyl:
        """Image of c under the shift."""
        if not c.words:
            return self.nothing()
        c = self.extend(c, 0, max(c.hi, 1))
        return Cyl(0, c.hi - 1, frozenset(w[1:] for w in c.words))

    def sigma_inv(self, c: Cyl) -> Cyl:
        """Preimage of c under the shift."""
        if c.hi < c.lo:
            return c
        return Cyl(c.lo + 1, c.hi + 1, c.words)

    def injective_on(self, c: Cyl) -> bool:
        if not c.words:
            return True
        c = self.extend(c, 0, max(c.hi, 1))
        tails = {}
        for w in c.words:
            if tails.setdefault(w[1:], w[0]) != w[0]:
                return False
        return True

    def shift_word(self, w, lo=0):
        """Word oracle: the shift on a word placed at coordinate lo."""
        return (w[1:], lo) if not self.two_sided else (w, lo - 1)

    # --- partitions
    def natural_partition(self, n: int) -> list:
        raise NotImplementedError

    def cell_name(self, c: Cyl) -> str:
        t = self.trim(c)
        if t.hi < t.lo:
            return "X"
        parts = []
        for w in sorted(t.words, key=_word_key):
            parts.append("[" + self._word_text(w, t.lo) + "]")
        return "+".join(parts)

    def _word_text(self, w, lo) -> str:
        syms = [str(a) for a in w]
        sep = "" if all(len(s) == 1 for s in syms) else "."
        if not self.two_sided:
            return "*" * lo + sep.join(syms)
        left = sep.join(syms[: max(0, -lo)])
        right = sep.join(syms[max(0, -lo):])
        if lo > 0:
            right = "*" * lo + right
        return left + "|" + right


def _word_key(w):
    return tuple(str(a) for a in w)


class FullOneSided(SymbolicSystem):
    def __init__(self, k: int):
        super().__init__(range(k))
        self.k = k

    def natural_partition(self, n):
        return [self.cylinder(w) for w in self.words(n + 1)]

    def __repr__(self):
        return f"FullOneSided({self.k})"


class EdgeShift(SymbolicSystem):
    """One-sided edge shift: sequences (e0, e1, ...) with s(e_i) = r(e_{i+1})."""

    def __init__(self, E: Digraph):
        E.check_no_sinks_or_sources()
        self.digraph = E
        edge = E.edge
        super().__init__([e.id for e in E.edges], lambda a, b: edge[a].src == edge[b].tgt)

    def natural_partition(self, n):
        return [self.cylinder(w) for w in self.words(n + 1)]

    def __repr__(self):
        return f"EdgeShift({len(self.digraph.vertices)} vertices, {len(self.digraph.edges)} edges)"


class FullTwoSided(SymbolicSystem):
    two_sided = True

    def __init__(self, k: int):
        super().__init__(range(k))
        self.k = k

    def sigma(self, c):
        if c.hi < c.lo:
            return c
        return Cyl(c.lo - 1, c.hi - 1, c.words)

    def sigma_inv(self, c):
        if c.hi < c.lo:
            return c
        return Cyl(c.lo + 1, c.hi + 1, c.words)

    def injective_on(self, c):
        return True

    def natural_partition(self, n):
        j = n // 2
        lo = -j - (n % 2)
        return [self.cylinder(w, lo) for w in self.words(j - lo + 1)]

    def __repr__(self):
        return f"FullTwoSided({self.k})"


def parse_system(spec: str, digraph: Digraph | None = None) -> SymbolicSystem:
    """'full1:k', 'full2:k' or 'edge' (with a digraph)."""
    name, _, arg = spec.partition(":")
    if name == "full1":
        return FullOneSided(int(arg or 2))
    if name == "full2":
        return FullTwoSided(int(arg or 2))
    if name == "edge":
        if digraph is None:
            raise ValueError("edge shift needs a digraph")
        return EdgeShift(digraph)
    raise ValueError(f"unknown system {spec!r}")


# ---------------------------------------------------------------- partitions


def _window(sys: SymbolicSystem, sets: Iterable[Cyl]):
    sets = list(sets)
    lo, hi = sys.hull(*sets)
    return lo, hi


def _label_words(sys, cells, lo, hi):
    """Map each word on [lo, hi] to the index of the cell containing it."""
    lab = {}
    for i, c in enumerate(cells):
        for w in sys.extend(c, lo, hi).words:
            lab[w] = i
    return lab


def canonical(sys: SymbolicSystem, cells: Iterable[Cyl]) -> list:
    """Trimmed, deduplicated, deterministically ordered cells."""
    out = {}
    for c in cells:
        if c.words:
            t = sys.trim(c)
            out[sys.key(t)] = t
    return [out[k] for k in sorted(out, key=lambda k: (k[0], k[1], tuple(map(_word_key, k[2]))))]


def wedge(sys: SymbolicSystem, *partitions) -> list:
    """Common refinement: nonempty pairwise intersections."""
    allcells = [c for p in partitions for c in p]
    lo, hi = _window(sys, allcells)
    labels = [_label_words(sys, p, lo, hi) for p in partitions]
    groups = {}
    for w in sys.extend(sys.whole(), lo, hi).words:
        groups.setdefault(tuple(lab.get(w) for lab in labels), set()).add(w)
    return canonical(sys, (Cyl(lo, hi, frozenset(ws)) for ws in groups.values()))


def signature_partition(sys: SymbolicSystem, P) -> tuple[list, dict]:
    """Partition points by the set of cells Z with x in sigma(Z).

    Returns the cells of that partition and a map from each cell key to its
    signature (tuple of cell indices).
    """
    for c in P:
        if not sys.injective_on(c):
            raise NonInjectiveCell(f"shift is not injective on {sys.cell_name(c)}")
    images = [sys.sigma(c) for c in P]
    lo, hi = _window(sys, images)
    ext = [sys.extend(im, lo, hi).words for im in images]
    groups = {}
    for w in sys.extend(sys.whole(), lo, hi).words:
        sig = tuple(i for i, ws in enumerate(ext) if w in ws)
        groups.setdefault(sig, set()).add(w)
    cells, sigs = [], {}
    for sig, ws in groups.items():
        c = sys.trim(Cyl(lo, hi, frozenset(ws)))
        cells.append(c)
        sigs[sys.key(c)] = sig
    return canonical(sys, cells), sigs


def sigma_partition(sys: SymbolicSystem, P) -> list:
    return signature_partition(sys, P)[0]


def level_sets(sys: SymbolicSystem, P) -> dict:
    """{k: U_k} where U_k is the set of points with exactly k preimages."""
    cells, sigs = signature_partition(sys, P)
    out = {}
    for c in cells:
        k = len(sigs[sys.key(c)])
        out[k] = c if k not in out else sys.union(out[k], c)
    return out


def n_sigma(sys: SymbolicSystem, P) -> int:
    return max(level_sets(sys, P))


def sigma_partition_literal(sys: SymbolicSystem, P) -> list:
    """Subset formula: sigma(Z_1) & ... & sigma(Z_k) minus U_{>=k+1}, over distinct cells.

    Exponential in |P|; kept as an independent route for small partitions.
    """
    from itertools import combinations

    images = [sys.sigma(c) for c in P]
    ge = {}
    k = 1
    while True:
        acc = sys.nothing()
        for combo in combinations(range(len(P)), k):
            inter = sys.whole()
            for i in combo:
                inter = sys.inter(inter, images[i])
            acc = sys.union(acc, inter)
        if not acc.words:
            break
        ge[k] = acc
        k += 1
    N = k - 1
    ge[N + 1] = sys.nothing()
    cells = []
    for k in range(1, N + 1):
        for combo in combinations(range(len(P)), k):
            inter = sys.whole()
            for i in combo:
                inter = sys.inter(inter, images[i])
            piece = sys.minus(inter, ge[k + 1])
            if piece.words:
                cells.append(piece)
    return canonical(sys, cells)


def preimage_partition(sys: SymbolicSystem, P) -> list:
    return canonical(sys, (sys.sigma_inv(c) for c in P))


def refine_partition(P, sys: SymbolicSystem):
    """(P v P^sigma, P v sigma^{-1}(P))."""
    return wedge(sys, P, sigma_partition(sys, P)), wedge(sys, P, preimage_partition(sys, P))


def is_partition(sys: SymbolicSystem, cells) -> bool:
    lo, hi = _window(sys, cells)
    seen = set()
    for c in cells:
        ws = sys.extend(c, lo, hi).words
        if not ws or seen & ws:
            return False
        seen |= ws
    return seen == sys.extend(sys.whole(), lo, hi).words


def refines(sys: SymbolicSystem, fine, coarse) -> bool:
    return all(any(sys.subset(f, c) for c in coarse) for f in fine)


def refined_sequence(sys: SymbolicSystem, depth: int) -> list:
    """Partitions P_0..P_depth obtained by the closure of the natural cylinder partitions."""
    P = [canonical(sys, sys.natural_partition(0))]
    for c in P[0]:
        if not sys.injective_on(c):
            raise NonInjectiveCell(f"shift is not injective on {sys.cell_name(c)}")
    for n in range(1, depth + 1):
        prev = P[-1]
        nat = sys.natural_partition(n)
        if n % 2 == 1:
            P.append(wedge(sys, nat, prev, sigma_partition(sys, prev)))
        else:
            P.append(wedge(sys, nat, prev, preimage_partition(sys, prev)))
    return P


def enumerate_points(sys: SymbolicSystem, lo: int, hi: int):
    """All admissible words on the window [lo, hi] (the oracle's finite point proxies)."""
    return sys.extend(sys.whole(), lo, hi).words


def all_words(alphabet, n):
    return list(product(alphabet, repeat=n))
