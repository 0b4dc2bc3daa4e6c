import random

import pytest
from hypothesis import given, settings, strategies as st

from sepshift.dynamics import (
    ConfigBall,
    all_prefixes,
    check_refinement,
    config_ball,
    expand,
    extensions,
    extract_cylinder_decomposition,
    fiber,
    fiber_bijection_check,
    inv,
    inverse_limit_check,
    inverse_shift_prefix,
    label_at,
    locate,
    make_prefix,
    mul,
    parse_word,
    preimages,
    prefix_of,
    reduce_word,
    shift_prefix,
    sigma_image,
    sigma_preimage_set,
    tau_ball,
    union_cell,
    validate_ball,
    validate_decomposition,
    vcell_by_shift,
    word_shift_oracle,
    word_text,
)
from sepshift.errors import (
    EvenDepth,
    HorizonExceeded,
    InsufficientDepth,
    NoCompletion,
    NotHDiagram,
    OddDepth,
)
from sepshift.ldiagram import build_ldiagram
from sepshift.systems import FullOneSided, FullTwoSided

from conftest import full1, full2, gfs, resolution


# ---------------------------------------------------------------- prefixes


def test_prefix_of_walks_back_to_the_root():
    d = full1(4)
    for v in d.level(4):
        p = prefix_of(d, v)
        assert p.depth == 4 and p.end == v
        assert make_prefix(d, p.edges) == p
        assert p.truncate(2).end == d.tgt(p.edges[2])


def test_make_prefix_rejects_bad_paths():
    d = full1(3)
    p = all_prefixes(d, 3)[0]
    with pytest.raises(NoCompletion):
        make_prefix(d, (p.edges[1],))
    with pytest.raises(NoCompletion):
        make_prefix(d, ("no-such-edge",))
    with pytest.raises(NoCompletion):
        make_prefix(d, ())
    with pytest.raises(InsufficientDepth):
        p.truncate(5)
    with pytest.raises(HorizonExceeded):
        all_prefixes(d, 4)


def test_extensions_partition_the_cylinder():
    d = resolution("gfs6x4", 5)
    for p in all_prefixes(d, 2):
        ext = extensions(p, 5)
        assert {q.end for q in ext} == expand(d, [p.end], 5)
        assert len({q.end for q in ext}) == len(ext)
        assert all(q.truncate(2) == p for q in ext)


# ---------------------------------------------------------------- shift


@pytest.mark.parametrize("make", [lambda: build_ldiagram(FullOneSided(2), 7), lambda: build_ldiagram(FullTwoSided(2), 7), lambda: build_ldiagram(FullOneSided(3), 5)])
def test_shift_matches_the_word_oracle(make):
    d = make()
    for m in range(2, d.horizon, 2):
        for p in all_prefixes(d, m):
            q = shift_prefix(p)
            assert q.depth == m - 1
            assert q == word_shift_oracle(p)


def test_shift_is_compatible_with_truncation():
    d = resolution("gfs2x1", 6)
    for p in all_prefixes(d, 6):
        assert shift_prefix(p).truncate(3) == shift_prefix(p.truncate(4))


def test_shift_rejects_odd_depth():
    d = full1(3)
    with pytest.raises(OddDepth):
        shift_prefix(all_prefixes(d, 3)[0])
    with pytest.raises(OddDepth):
        shift_prefix(all_prefixes(d, 0)[0])
    with pytest.raises(OddDepth):
        label_at(all_prefixes(d, 3)[0], 1)
    with pytest.raises(InsufficientDepth):
        label_at(all_prefixes(d, 1)[0], 0)


def test_preimage_branches_cover_the_preimage_exactly():
    d = resolution("gfs6x4", 6)
    for m in (1, 3):
        hit_by = {}
        for x in all_prefixes(d, m + 1):
            hit_by.setdefault(shift_prefix(x), set()).add(x)
        for p in all_prefixes(d, m):
            out = preimages(p)
            v = d.src(p.edges[0])
            assert len(out) == len(d.red_out.get(v, ()))
            assert all(b.depth == m - 1 for _, b in out)
            found = {x for _, b in out for x in extensions(b, m + 1) if shift_prefix(x) == p}
            assert found == hit_by.get(p, set())


def test_preimages_reject_even_depth():
    with pytest.raises(EvenDepth):
        preimages(all_prefixes(full2(4), 2)[0])


def test_inverse_shift_round_trips_on_the_two_sided_shift():
    d = full2(7)
    for m in range(3, 8):
        for p in all_prefixes(d, m):
            if m % 2 == 0:
                assert inverse_shift_prefix(shift_prefix(p)) == p.truncate(m - 2)
            else:
                assert shift_prefix(inverse_shift_prefix(p)) == p.truncate(m - 2)


def test_inverse_shift_needs_an_h_diagram():
    with pytest.raises(NotHDiagram):
        inverse_shift_prefix(all_prefixes(full1(4), 3)[0])


def _same(sys, a, b):
    return sys.subset(a, b) and sys.subset(b, a)


def test_sigma_image_and_preimage_are_exact():
    sys = FullOneSided(2)
    d = build_ldiagram(sys, 8)
    for p in all_prefixes(d, 2) + all_prefixes(d, 3):
        img = sigma_image(p)
        assert _same(sys, union_cell(d, img), sys.sigma(p.cell()))
    for q in all_prefixes(d, 2) + all_prefixes(d, 3):
        pre = sigma_preimage_set(q)
        assert _same(sys, union_cell(d, pre), sys.sigma_inv(q.cell()))


def test_sigma_image_composes():
    d = full2(8)
    for p in all_prefixes(d, 2):
        two = sigma_image(p, 2)
        once = set()
        for q in sigma_image(p, 1):
            once |= sigma_image(q, 1)
        assert two == once


# ---------------------------------------------------------------- decompositions


@pytest.mark.parametrize("name", ["gfs6x4", "gfs2x1", "full2"])
def test_cylinder_decomposition_is_valid(name):
    d = resolution(name, 6)
    dec = extract_cylinder_decomposition(d, 0)
    assert validate_decomposition(dec).ok
    for (g, i, f), cells in dec.vcells.items():
        assert cells <= vcell_by_shift(d, 0, g, i)


def test_cylinder_decomposition_matrices_of_gfs6x4():
    d = resolution("gfs6x4", 4)
    A, I = extract_cylinder_decomposition(d, 0).matrices()
    assert sum(map(sum, A)) == sum(1 for e in d.layers[0].edges if e.color.value == "red")
    assert all(sum(row) == 1 for row in I)


def test_finer_decomposition_refines_the_coarser():
    d = resolution("gfs6x4", 6)
    rep = check_refinement(extract_cylinder_decomposition(d, 2), extract_cylinder_decomposition(d, 0))
    assert rep.ok, rep.violations


def test_decomposition_rejects_odd_levels():
    with pytest.raises(OddDepth):
        extract_cylinder_decomposition(full2(4), 1)


# ---------------------------------------------------------------- configurations


words = st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from((1, -1))), max_size=6).map(tuple)


@given(words, words)
def test_free_group_words(u, v):
    ru = reduce_word(u)
    assert mul(ru, inv(ru)) == ()
    assert inv(mul(u, v)) == mul(inv(v), inv(u))
    assert parse_word(word_text(ru)) == ru


def test_word_text_with_alias():
    w = (("beta0", 1), ("beta1", -1))
    assert word_text(w, {"beta0": "a", "beta1": "b"}) == "a.b^-1"
    assert parse_word("a.b^-1", {"beta0": "a", "beta1": "b"}) == w
    assert word_text(()) == "1"


@pytest.mark.parametrize("name", ["gfs6x4", "gfs2x1", "full2"])
def test_config_balls_are_valid(name):
    d = resolution(name, 6)
    for p in all_prefixes(d, 4):
        b = config_ball(p, 2)
        assert () in b.words
        rep = validate_ball(b, gfs(name))
        assert rep.ok, rep.violations


def test_config_ball_needs_depth():
    p = all_prefixes(resolution("gfs2x1", 4), 3)[0]
    with pytest.raises(InsufficientDepth):
        config_ball(p, 2)


def test_shift_translates_the_configuration():
    d = resolution("gfs2x1", 6)
    for p in all_prefixes(d, 6):
        assert tau_ball(config_ball(p, 3)) == config_ball(shift_prefix(p), 2)


def test_translate_checks_radius():
    b = ConfigBall(1, frozenset({(), (("a", 1),)}))
    with pytest.raises(InsufficientDepth):
        b.translate((("a", 1),), 1)
    with pytest.raises(InsufficientDepth):
        tau_ball(ConfigBall(0, frozenset({()})))


def test_ball_locates_its_prefix_in_the_resolution():
    X = resolution("gfs2x1", 6)
    for p in all_prefixes(X, 4):
        assert locate(X, config_ball(p, 2), p.edges[0]) == p.truncate(3)


# ---------------------------------------------------------------- inverse limit and fibers


def test_inverse_limit_on_the_one_sided_shift():
    rep = inverse_limit_check(full1(6), 4)
    assert rep.ok, rep.violations


def test_inverse_limit_on_a_resolution():
    rep = inverse_limit_check(resolution("gfs6x4", 6), 4)
    assert rep.ok, rep.violations


def test_fiber_contains_forward_and_backward_runs():
    d = full2(8)
    y = all_prefixes(d, 8)[0]
    fib = fiber(y, 1, 1)
    assert fib[()] == (y, 0)
    lags = sorted(lag for _, lag in fib.values())
    assert min(lags) == -1 and max(lags) == 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_fiber_bijection_on_sampled_points(seed):
    d = resolution("gfs6x4", 8)
    v = random.Random(seed).choice(list(d.level(8)))
    rep = fiber_bijection_check(prefix_of(d, v), (1, 2))
    assert rep.ok, rep.violations


def test_fiber_bijection_needs_depth():
    d = full1(4)
    with pytest.raises(InsufficientDepth):
        fiber_bijection_check(all_prefixes(d, 4)[0], (2, 2))
