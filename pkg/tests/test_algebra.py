import random

import pytest
from hypothesis import given, settings, strategies as st

from sepshift.algebra import (
    AlgElement,
    S,
    canonicalize,
    classify,
    commutativity_check,
    degree_bounded_terms,
    evaluate,
    evaluate_generators,
    format_element,
    layer_algebra,
    parse_expr,
    phi_step,
    phi_tilde,
    random_word,
    s_forms_agree,
    stage_algebra,
    tameness_check,
    to_steinberg,
    vanishing_by_algebra,
)
from sepshift.errors import HorizonExceeded, ParseError
from sepshift.algebra import pullback_indicator
from sepshift.dynamics import resolution_of_layer, stacked_diagram
from sepshift.resolution import canonical_resolution

from conftest import full1, full2, gfs, resolution

GFS2X1 = resolution("gfs2x1", 6)
FULL1 = full1(9)


def _gens(d, stage=0):
    return stage_algebra(d, stage).generators()


def element_of(d, stage=0, size=3):
    gens = _gens(d, stage)
    term = st.tuples(st.sampled_from(range(len(gens))), st.integers(-2, 2))

    def build(ts):
        out = stage_algebra(d, stage).zero()
        for i, c in ts:
            out = out + gens[i][1].scale(c)
        return out

    return st.lists(term, min_size=1, max_size=size).map(build)


# ---------------------------------------------------------------- normal form


@settings(max_examples=30, deadline=None)
@given(st.tuples(element_of(GFS2X1), element_of(GFS2X1), element_of(GFS2X1)))
def test_corner_algebra_is_an_associative_star_algebra(xyz):
    x, y, z = xyz
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert (x * y).star() == y.star() * x.star()
    assert x.star().star() == x
    one = stage_algebra(GFS2X1, 0).unit()
    assert one * x == x == x * one


def test_block_relations_hold_in_normal_form():
    alg = layer_algebra(GFS2X1, 0)
    for v in alg.layer.top:
        for blk in alg.layer.blocks(v):
            total = alg.zero()
            for e in blk:
                total = total + alg.edge(e) * alg.ghost(e)
                for f in blk:
                    prod = alg.ghost(e) * alg.edge(f)
                    want = alg.vertex(GFS2X1.src(e)) if e == f else alg.zero()
                    assert prod == want
            assert total == alg.vertex(v)


def test_vertex_letters_stand_alone():
    alg = layer_algebra(GFS2X1, 0)
    with pytest.raises(ValueError):
        AlgElement(alg, {(("v", 0), ("v", 0)): 1})


# ---------------------------------------------------------------- connecting maps


@settings(max_examples=30, deadline=None)
@given(st.tuples(element_of(GFS2X1), element_of(GFS2X1)))
def test_phi_step_is_a_unital_star_homomorphism(xy):
    x, y = xy
    assert phi_step(x * y) == phi_step(x) * phi_step(y)
    assert phi_step(x + y) == phi_step(x) + phi_step(y)
    assert phi_step(x.star()) == phi_step(x).star()


def test_phi_step_preserves_the_unit():
    for d in (GFS2X1, resolution("gfs6x4", 6), full2(7)):
        assert phi_step(stage_algebra(d, 0).unit()) == stage_algebra(d, 1).unit()


@pytest.mark.parametrize("name", ["gfs6x4", "gfs2x1", "full2"])
def test_two_forms_of_s_agree(name):
    d = resolution(name, 5)
    for n in (0, 2):
        for v in d.level(n):
            assert s_forms_agree(d, v)
            assert sum(S(d, v).values()) > 0


def test_phi_needs_room_below():
    with pytest.raises(HorizonExceeded):
        phi_step(stage_algebra(resolution("gfs6x4", 2), 0).unit())
    with pytest.raises(HorizonExceeded):
        phi_tilde(layer_algebra(resolution("gfs6x4", 3), 2).unit())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.sampled_from([0, 1]))
def test_words_are_tame(seed, k, level):
    rng = random.Random(seed)
    w = random_word(layer_algebra(GFS2X1, level), k, rng)
    ok, image = tameness_check(w, level, GFS2X1)
    assert ok, image


def test_tameness_needs_horizon():
    alg = layer_algebra(GFS2X1, 2)
    w = random_word(alg, 4, random.Random(0))
    with pytest.raises(HorizonExceeded):
        tameness_check(w, 2, GFS2X1)


# ---------------------------------------------------------------- canonical forms and evaluation


def test_degree_bounded_terms_cover_all_kinds():
    terms = degree_bounded_terms(FULL1, 0)
    assert {t.kind for t in terms} == {"A", "B", "C", "D"}
    assert {t.degree for t in terms} == {-1, 0, 1}


def test_canonical_terms_evaluate_to_their_closed_forms():
    for t in degree_bounded_terms(FULL1, 0):
        assert evaluate(t.element(FULL1)) == to_steinberg(t, FULL1)
        assert evaluate_generators(t.element(FULL1)) == to_steinberg(t, FULL1)


@settings(max_examples=20, deadline=None)
@given(st.tuples(element_of(FULL1, size=2), element_of(FULL1, size=2)))
def test_evaluation_is_a_star_homomorphism(xy):
    x, y = xy
    assert evaluate(x * y) == evaluate(x) * evaluate(y)
    assert evaluate(x.star()) == evaluate(x).star()
    assert evaluate(x + y) == evaluate(x) + evaluate(y)


def test_evaluation_commutes_with_phi():
    for _, g in _gens(FULL1):
        assert evaluate_generators(phi_step(g)) == evaluate_generators(g)


def test_canonicalize_drops_exactly_the_vanishing_terms():
    d = FULL1
    alg = stage_algebra(d, 0)
    seen = 0
    for (_, a), (_, b) in zip(alg.generators(), reversed(alg.generators())):
        stage, kept = canonicalize(a * b, drop_vanishing=False)
        for c, t in kept:
            seen += 1
            assert (not t.witness) == vanishing_by_algebra(t, d)
            assert to_steinberg(t, d).is_zero() == (not t.witness)
    assert seen


def test_classify_reports_pending_stage_advance():
    e = FULL1.layers[0].edges[0].id
    f = next(x.id for x in FULL1.layers[1].edges if FULL1.tgt(x.id) == FULL1.src(e))
    w = ((e, 1), (f, 1), (f, -1), (e, -1))
    assert classify(FULL1, ((e, 1), (e, -1)), 0) is None
    with pytest.raises(ValueError):
        classify(FULL1, w, 0)


# ---------------------------------------------------------------- colimit square


@pytest.mark.parametrize("name", ["gfs6x4", "full2"])
def test_colimit_square_commutes(name):
    F = canonical_resolution(gfs(name), 5)
    rep = commutativity_check(F, 0, 6)
    assert rep.ok, rep.violations
    assert rep.info["generators"] == len(_gens(canonical_resolution(gfs(name), 2)))


def test_colimit_square_separates_different_generators():
    F = canonical_resolution(gfs("gfs6x4"), 5)
    X = resolution_of_layer(F, 0, 6, tag="X0/")
    G = stacked_diagram(F, 0, resolution_of_layer(F, 2, 4, tag="X1/"))
    gens = stage_algebra(X, 0).generators()
    rhs = {}
    for name, x in gens:
        rhs[name] = evaluate_generators(phi_step(AlgElement(stage_algebra(G, 0), x.terms)))
    images = {name: evaluate_generators(x) for name, x in gens}
    for name, x in gens:
        lhs = pullback_indicator(images[name], G)
        same = [n for n in images if images[n] == images[name]]
        assert [n for n, r in rhs.items() if r == lhs] == same


# ---------------------------------------------------------------- text form


@settings(max_examples=40, deadline=None)
@given(element_of(GFS2X1, size=4))
def test_format_and_parse_round_trip(x):
    assert parse_expr(format_element(x), GFS2X1) == x


def test_parse_operators():
    d = full1(5)
    one = stage_algebra(d, 0).unit()
    assert parse_expr("(+ 1 (- 1))", d).is_zero()
    assert parse_expr("(* 2 1/2)", d) == one
    assert parse_expr("(phi 1)", d) == stage_algebra(d, 1).unit()
    e = d.layers[0].edges[0].id
    x = parse_expr(f'(t "{e}" "{e}")', d)
    assert parse_expr(f'(star (t "{e}" "{e}"))', d) == x.star()


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("(+ 1", 1, 4),
        ("(t nope nope)", 1, 1),
        ("(frob 1)", 1, 2),
        ("(+ 1)\n)", 2, 1),
        ("(p\n  ())", 2, 3),
        ('(p "unterminated)', 1, 4),
        ("abc", 1, 1),
    ],
)
def test_parse_errors_carry_positions(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_expr(text, GFS2X1)
    assert (info.value.line, info.value.column) == (line, col)
