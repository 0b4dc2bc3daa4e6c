from collections import defaultdict
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sepshift.dynamics import all_prefixes, inv, mul
from sepshift.errors import HorizonExceeded
from sepshift.graph import RED
from sepshift.steinberg import (
    bisection,
    indicator,
    model_of,
    tset,
    unit_cylinder,
    whole_space,
    word_lag,
    zero,
)

from conftest import full1, full2, resolution


def _pool(d):
    """Bisections with sigma^k injective on U: label sets for k = 1, cylinders for k = 0."""
    M = model_of(d)
    reds = [e.id for e in d.layers[0].edges if e.color == RED]
    out = [whole_space(M)]
    out += [unit_cylinder(M, v) for v in d.level(1)]
    for f in reds:
        T = tset(M, (f,))
        out.append(bisection(M, T, 1, 0, None))
        out.append(bisection(M, None, 0, 1, T))
        for g in reds:
            out.append(bisection(M, T, 1, 1, tset(M, (g,))))
    return M, out


D = full2(8)
MODEL, POOL = _pool(D)
D1 = full1(8)
MODEL1, POOL1 = _pool(D1)


def elements(pool):
    term = st.tuples(st.sampled_from(range(len(pool))), st.integers(-2, 2))

    def build(ts):
        out = zero(pool[0].model)
        for i, c in ts:
            out = out + pool[i].scale(c)
        return out

    return st.lists(term, min_size=1, max_size=3).map(build)


both = st.sampled_from([POOL, POOL1]).flatmap(lambda p: st.tuples(elements(p), elements(p), elements(p)))


@settings(max_examples=25, deadline=None)
@given(both)
def test_star_is_an_anti_involution(fgh):
    F, G, _ = fgh
    assert F.star().star() == F
    assert (F * G).star() == G.star() * F.star()
    assert (F + G).star() == F.star() + G.star()


@settings(max_examples=20, deadline=None)
@given(both)
def test_convolution_is_associative_and_bilinear(fgh):
    F, G, H = fgh
    assert (F * G) * H == F * (G * H)
    assert F * (G + H) == F * G + F * H
    assert (F.scale(3) * G) == (F * G).scale(3)


@settings(max_examples=20, deadline=None)
@given(both)
def test_unit_space_indicator_is_a_unit(fgh):
    F, _, _ = fgh
    one = whole_space(F.model)
    assert one * F == F
    assert F * one == F


def test_bisection_times_its_adjoint_is_its_range():
    for f in [e.id for e in D.layers[0].edges if e.color == RED]:
        T = tset(MODEL, (f,))
        B = bisection(MODEL, T, 1, 0, None)
        assert B * B.star() == T
        assert B.star() * B == unit_cylinder(MODEL, D.src(f))


def test_partial_isometries_for_the_one_sided_shift():
    M = MODEL1
    S = bisection(M, None, 0, 1, None)
    # every point has two preimages under the full 2-shift
    assert S * S.star() == whole_space(M).scale(2)
    assert S.star() * S != S * S.star()
    reds = [e.id for e in D1.layers[0].edges if e.color == RED]
    total = zero(M)
    for f in reds:
        B = bisection(M, tset(M, (f,)), 1, 0, None)
        total = total + B * B.star()
    assert total == whole_space(M)


def _oracle(F, G):
    """(F * G) on the deepest cylinders, summing over every factorization."""
    M = F.model
    out = defaultdict(lambda: defaultdict(Fraction))
    for p in all_prefixes(M.d, M.d.horizon - 1):
        for wb in G.data:
            gv = G.lookup(wb, p)
            if not gv:
                continue
            z = M.follow(p, wb)
            if z is None:
                continue
            for u in F.data:
                fv = F.lookup(u, z)
                if fv:
                    out[mul(u, wb)][p.end] += fv * gv
    return out


@settings(max_examples=10, deadline=None)
@given(st.tuples(elements(POOL), elements(POOL)))
def test_convolution_matches_pointwise_oracle(fg):
    F, G = fg
    H = F * G
    want = _oracle(F, G)
    for p in all_prefixes(D, D.horizon - 1):
        for w in set(want) | set(H.data):
            assert H.lookup(w, p) == want[w][p.end]


def test_back_exact_is_the_common_prefix_of_the_enumerated_cells():
    for d in (resolution("gfs6x4", 7), resolution("gfs2x1", 6), full1(7)):
        M = model_of(d)
        for m in (2, 3, 4):
            for p in all_prefixes(d, m):
                for g in d.red_out.get(d.src(p.edges[0]), ()):
                    cells = M._back_enumerated(p, g)
                    got = M._back_exact(p, g)
                    if not cells:
                        assert got is None
                        continue
                    common = cells[0]
                    for c in cells[1:]:
                        k = 0
                        while k < len(common) and c[k] == common[k]:
                            k += 1
                        common = common[:k]
                    assert got.edges == common


def test_word_lag_counts_backward_minus_forward():
    assert word_lag((("a", -1), ("a", -1), ("b", 1))) == 1
    assert word_lag(()) == 0
    assert mul((("a", 1),), inv((("a", 1),))) == ()


def test_indicator_coarsens_complete_families():
    d = full2(4)
    M = model_of(d)
    kids = [v for v in d.level(1) if d.tgt(d.blue_out[v][0]) == d.level(0)[0]]
    assert indicator(M, kids) == unit_cylinder(M, d.level(0)[0])


def test_disjointness_and_degrees():
    T = [tset(MODEL, (f,)) for f in [e.id for e in D.layers[0].edges if e.color == RED]]
    assert T[0].disjoint(T[1])
    assert not T[0].disjoint(T[0])
    B = bisection(MODEL, T[0], 1, 0, None)
    assert B.degrees() == {1}
    assert B.star().degrees() == {-1}
    assert (B + B.star()).homogeneous(1) == B


def test_elements_over_different_diagrams_do_not_mix():
    with pytest.raises(ValueError):
        whole_space(MODEL) + whole_space(MODEL1)


def test_tabulate_reports_unresolved_cylinders():
    d = full2(2)
    M = model_of(d)
    with pytest.raises(HorizonExceeded):
        tset(M, ("r0:[0|0]>[|0]",) * 3)
