"""The acceptance suite: thirteen exact checks over the bundled fixtures.

Each check returns ``(ok, witness)``; ``run_check`` wraps it into a report
``{check, status, witness, runtime_ms}``. Randomized checks draw from a
``random.Random`` seeded by the run configuration, so a fixed seed gives the
same verdicts and witnesses.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .algebra import (
    canonicalize,
    commutativity_check,
    degree_bounded_terms,
    evaluate,
    injectivity_witness,
    layer_algebra,
    phi_step,
    random_word,
    s_forms_agree,
    stage_algebra,
    tameness_check,
    to_steinberg,
)
from .dynamics import (
    all_prefixes,
    config_ball,
    fiber_bijection_check,
    inverse_limit_check,
    inverse_shift_prefix,
    preimages,
    prefix_of,
    shift_prefix,
    tau_ball,
    word_shift_oracle,
    extensions,
)
from .errors import ResourceBudgetExceeded
from .graph import (
    Digraph,
    BLUE,
    RED,
    gfs_from_digraph,
    load_graph,
    red_blue_matrices,
    resource_budget,
    validate_gfs,
)
from .ldiagram import (
    build_ldiagram,
    check_sequence,
    compose_sequences,
    is_refined,
    refinement_failures,
    level_isomorphic,
    romb_suite,
    subsampled,
    telescope,
    validate_hdiagram,
    validate_ldiagram,
)
from .resolution import (
    adjacency_recursion_check,
    canonical_resolution,
    check_resolution_vs_higher_edge,
    red_adjacency,
)
from .steinberg import model_of, zero
from .systems import FullOneSided, FullTwoSided

GFS6X4_A = [[1, 1, 1, 0], [0, 1, 0, 0], [0, 2, 0, 0], [0, 0, 2, 0], [0, 0, 1, 0], [0, 0, 1, 1]]
GFS6X4_I = [[1, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 1]]
LETTER_ALIAS = {"beta0": "a", "beta1": "b", "beta2": "c"}


@dataclass
class RunConfig:
    """Suite settings. ``budget`` caps vertices per layer; 0 skips every check.
    ``data`` maps fixture names to replacement file paths."""

    seed: int = 0
    budget: int | None = None
    data: dict = field(default_factory=dict)
    only: tuple = ()
    stable: bool = False


def fixture_path(name: str, cfg: RunConfig | None = None) -> Path:
    if cfg is not None and name in cfg.data:
        return Path(cfg.data[name])
    return Path(str(resources.files("sepshift") / "data" / f"{name}.json"))


def fixture(name: str, cfg: RunConfig | None = None):
    return load_graph(str(fixture_path(name, cfg)))


def fixture_gfs(name: str, cfg: RunConfig | None = None):
    g = fixture(name, cfg)
    return gfs_from_digraph(g) if isinstance(g, Digraph) else g


def _first(rep) -> dict:
    v = rep.violations[0]
    return {"violations": len(rep.violations), "first": v.to_json()}


# ---------------------------------------------------------------- 1-3: fixtures and level counts


def check_gfs6x4_matrices(cfg: RunConfig):
    A, I = red_blue_matrices(fixture("gfs6x4", cfg))
    ok = A == GFS6X4_A and I == GFS6X4_I
    return ok, {"A": A, "I": I}


def check_level_counts(cfg: RunConfig):
    want = {
        "full2": ([2, 4, 8], [4, 8], [4, 8]),
        "full1": ([2, 4, 8], [4, 8], [8, 8]),
    }
    got = {
        "full2": tuple(map(list, build_ldiagram(FullTwoSided(2), 2).sizes())),
        "full1": tuple(map(list, build_ldiagram(FullOneSided(2), 2).sizes())),
    }
    return got == want, {k: {"levels": v[0], "blue": v[1], "red": v[2]} for k, v in got.items()}


def check_higher_edge(cfg: RunConfig):
    E = fixture("no000", cfg)
    g = gfs_from_digraph(E)
    blue = g.count(BLUE)
    red = g.count(RED)
    ok_iso, iso = check_resolution_vs_higher_edge(E, 1, cfg.budget)
    wit = {"blue": blue, "red": red, "isomorphic": ok_iso}
    if not ok_iso:
        return False, wit
    d = canonical_resolution(g, 3, cfg.budget)
    A2 = red_adjacency(d, 2)
    edge = {f.id: f for f in E.edges}
    strip = lambda name: iso[name][:-1]
    mismatches = []
    for w in d.level(3):
        for v in d.level(2):
            g_, f_ = edge[strip(w)], edge[strip(v)]
            want = 1 if g_.tgt == f_.src else 0
            if A2.get(w, {}).get(v, 0) != want:
                mismatches.append((g_.id, f_.id))
    wit["incidence_mismatches"] = len(mismatches)
    if mismatches:
        wit["first"] = list(mismatches[0])
    return blue == 4 and red == 7 and not mismatches, wit


# ---------------------------------------------------------------- 4-6: canonical resolutions


RESOLUTION_FIXTURES = ("gfs6x4", "gfs2x1", "full2")


def _resolutions(cfg: RunConfig, depth: int = 6):
    """Canonical resolutions of the three fixtures, shrunk until they fit the budget."""
    cache = cfg.__dict__.setdefault("_resolutions", {})
    key = (depth, cfg.budget)
    if key not in cache:
        out = {}
        for name in RESOLUTION_FIXTURES:
            g = fixture_gfs(name, cfg)
            for k in range(depth, 0, -1):
                try:
                    out[name] = canonical_resolution(g, k, cfg.budget)
                    break
                except ResourceBudgetExceeded:
                    continue
        cache[key] = out
    return cache[key]


def check_resolutions(cfg: RunConfig):
    wit = {}
    ok = True
    for name, d in _resolutions(cfg).items():
        item = {"depth": d.horizon}
        rep = validate_ldiagram(d)
        item["ldiagram"] = rep.ok
        if not rep.ok:
            item["first"] = _first(rep)
        bad_gfs = [n for n in range(0, d.horizon, 2) if not validate_gfs(d.layers[n]).ok]
        item["gfs_failures"] = bad_gfs
        bad_ref = [j for j in refinement_failures(d) if j > 0]
        item["unrefined_layers"] = bad_ref
        ok &= rep.ok and not bad_gfs and not bad_ref
        wit[name] = item
    return ok, wit


def check_recursion(cfg: RunConfig):
    wit = {}
    ok = True
    for name, d in _resolutions(cfg).items():
        for j in (0, 1):
            good, w = adjacency_recursion_check(d, j)
            wit[f"{name}/j={j}"] = True if good else w
            ok &= good
    return ok, wit


def check_rombs(cfg: RunConfig):
    wit = {}
    ok = True
    for name, d in _resolutions(cfg).items():
        rep = romb_suite(d)
        wit[name] = True if rep.ok else _first(rep)
        ok &= rep.ok
    return ok, wit


# ---------------------------------------------------------------- 7: dynamics


def check_dynamics(cfg: RunConfig, depth: int = 8):
    wit = {}
    ok = True
    for label, sys in (("full1", FullOneSided(2)), ("full2", FullTwoSided(2))):
        d = build_ldiagram(sys, depth + 1)
        shifts = branches = 0
        problems = []
        for m in range(2, depth + 1, 2):
            for p in all_prefixes(d, m):
                shifts += 1
                if shift_prefix(p) != word_shift_oracle(p):
                    problems.append(("shift", str(p)))
        for m in range(1, depth, 2):
            hit_by = {}
            for x in all_prefixes(d, m + 1):
                hit_by.setdefault(shift_prefix(x), set()).add(x)
            for p in all_prefixes(d, m):
                out = preimages(p)
                v = d.src(p.edges[0])
                expected = len(d.blue_out.get(v, ())) + len(d.red_out.get(v, ())) - 1
                branches += 1
                if len(out) != expected:
                    problems.append(("branch-count", str(p)))
                found = {x for _, b in out for x in extensions(b, m + 1) if shift_prefix(x) == p}
                if found != hit_by.get(p, set()):
                    problems.append(("branch-image", str(p)))
        rounds = 0
        if label == "full2":
            if not validate_hdiagram(d).ok:
                problems.append(("h-diagram", label))
            for m in range(3, depth + 1):
                for p in all_prefixes(d, m):
                    rounds += 1
                    if m % 2 == 0 and inverse_shift_prefix(shift_prefix(p)) != p.truncate(m - 2):
                        problems.append(("inverse-after-shift", str(p)))
                    if m % 2 == 1 and shift_prefix(inverse_shift_prefix(p)) != p.truncate(m - 2):
                        problems.append(("shift-after-inverse", str(p)))
        wit[label] = {"shifts": shifts, "preimage_prefixes": branches, "round_trips": rounds, "problems": len(problems)}
        if problems:
            wit[label]["first"] = list(problems[0])
            ok = False
    return ok, wit


# ---------------------------------------------------------------- 8: telescoping


def random_cr_sequence(rng: random.Random, horizon: int, start_max: int = 2) -> tuple:
    """A random sequence obeying (CR): even start, odd increments, inside the horizon."""
    m = [2 * rng.randint(0, start_max // 2)]
    while True:
        step = rng.choice((1, 1, 3))
        if m[-1] + step > horizon:
            break
        m.append(m[-1] + step)
    return check_sequence(m, horizon)


def check_telescoping(cfg: RunConfig):
    rng = random.Random(cfg.seed)
    wit = {}
    d = canonical_resolution(fixture_gfs("full2", cfg), 12, cfg.budget)
    trials = []
    ok = True
    for _ in range(6):
        m = random_cr_sequence(rng, d.horizon)
        while len(m) < 3:
            m = random_cr_sequence(rng, d.horizon)
        m2 = random_cr_sequence(rng, len(m) - 1, 0)
        lhs = telescope(telescope(d, m), m2)
        rhs = telescope(d, compose_sequences(m, m2))
        good = lhs == rhs
        trials.append({"m": list(m), "m2": list(m2), "equal": good})
        ok &= good
    wit["composition"] = trials
    refined = {}
    for name, dd in _resolutions(cfg).items():
        seq = tuple(range(2, dd.horizon + 1))
        t = telescope(dd, seq)
        refined[name] = is_refined(t) and validate_ldiagram(t).ok
        ok &= refined[name]
    wit["refined_after_2_3_4"] = refined
    m = (0, 3, 6, 9)
    sys = FullOneSided(2)
    iso, why = level_isomorphic(telescope(build_ldiagram(sys, 9), m), subsampled(sys, m))
    wit["subsampled"] = why
    return ok and iso, wit


# ---------------------------------------------------------------- 9-11: algebra


def check_tameness(cfg: RunConfig, words: int = 200, pairs: int = 200):
    rng = random.Random(cfg.seed)
    d = canonical_resolution(fixture_gfs("gfs2x1", cfg), 6, cfg.budget)
    untame = []
    for _ in range(words):
        k = rng.randint(1, 4)
        lv = rng.choice((0, 1))
        w = random_word(layer_algebra(d, lv), k, rng)
        good, _ = tameness_check(w, lv, d)
        if not good:
            untame.append(w)
    gens = stage_algebra(d, 0).generators()
    broken = []
    for _ in range(pairs):
        (n1, a), (n2, b) = rng.choice(gens), rng.choice(gens)
        if phi_step(a * b) != phi_step(a) * phi_step(b) or phi_step(a.star()) != phi_step(a).star():
            broken.append((n1, n2))
    unit = phi_step(stage_algebra(d, 0).unit()) == stage_algebra(d, 1).unit()
    s_forms = all(s_forms_agree(d, v) for n in range(0, d.horizon - 2, 2) for v in d.level(n))
    wit = {"words": words, "untame": len(untame), "pairs": pairs, "broken": len(broken), "unit": unit, "s_forms": s_forms}
    if untame:
        wit["first_untame"] = repr(untame[0])
    if broken:
        wit["first_broken"] = list(broken[0])
    return not untame and not broken and unit and s_forms, wit


def _sum_terms(d, terms):
    out = zero(model_of(d))
    for c, t in terms:
        out = out + to_steinberg(t, d).scale(c)
    return out


def check_steinberg(cfg: RunConfig):
    d = build_ldiagram(FullOneSided(2), 9)
    terms = degree_bounded_terms(d, 0)
    imgs = {t: to_steinberg(t, d) for t in terms}
    bad = []
    counts = {1: 0, 2: 0, 3: 0}
    seen = set(terms)
    for t in terms:
        counts[1] += 1
        if evaluate(t.element(d)) != imgs[t]:
            bad.append((str(t),))
    pair = {}
    for t1, t2 in itertools.product(terms, repeat=2):
        counts[2] += 1
        pair[t1, t2] = imgs[t1] * imgs[t2]
        _, out = canonicalize(t1.element(d) * t2.element(d))
        seen.update(t for _, t in out)
        if _sum_terms(d, out) != pair[t1, t2]:
            bad.append((str(t1), str(t2)))
    for t1, t2, t3 in itertools.product(terms, repeat=3):
        counts[3] += 1
        _, out = canonicalize(t1.element(d) * t2.element(d) * t3.element(d))
        seen.update(t for _, t in out)
        if _sum_terms(d, out) != pair[t1, t2] * imgs[t3]:
            bad.append((str(t1), str(t2), str(t3)))
    overlaps = []
    groups = {}
    for t in seen:
        groups.setdefault((t.stage, t.degree), []).append(t)
    for group in groups.values():
        group.sort(key=str)
        for a, b in itertools.combinations(group, 2):
            if not injectivity_witness(a, b, d):
                overlaps.append((str(a), str(b)))
    wit = {"terms": len(terms), "products": counts, "mismatches": len(bad), "distinct_terms": len(seen), "overlaps": len(overlaps)}
    if bad:
        wit["first_mismatch"] = list(bad[0])
    if overlaps:
        wit["first_overlap"] = list(overlaps[0])
    return not bad and not overlaps, wit


def check_commutativity(cfg: RunConfig):
    wit = {}
    ok = True
    for name in ("gfs2x1", "full2"):
        F = canonical_resolution(fixture_gfs(name, cfg), 5, cfg.budget)
        rep = commutativity_check(F, 0, 6)
        wit[name] = {"generators": rep.info["generators"], "ok": rep.ok}
        if not rep.ok:
            wit[name]["first"] = _first(rep)
        ok &= rep.ok
    return ok, wit


# ---------------------------------------------------------------- 12-13: inverse limit, fibers, configurations


def check_inverse_limit(cfg: RunConfig, samples: int = 200):
    rng = random.Random(cfg.seed)
    wit = {}
    ok = True
    diagrams = {
        "full1": build_ldiagram(FullOneSided(2), 10),
        "gfs6x4": canonical_resolution(fixture_gfs("gfs6x4", cfg), 10, cfg.budget),
    }
    for name, d in diagrams.items():
        rep = inverse_limit_check(d.truncate(8), 4)
        level = list(d.level(10))
        pick = sorted(rng.sample(level, min(samples, len(level))))
        bad = [v for v in pick if not fiber_bijection_check(prefix_of(d, v), (2, 2)).ok]
        wit[name] = {"inverse_limit": rep.ok, "fiber_points": len(pick), "fiber_failures": len(bad)}
        if bad:
            wit[name]["first"] = bad[0]
        ok &= rep.ok and not bad
    return ok, wit


TARGET_BALL = frozenset(
    {"1", "b", "a^-1", "b^-1", "a.b", "a^-1.b", "a^-1.a^-1", "b^-1.a^-1", "b^-1.b^-1", "a^-1.b^-1"}
)


def check_configurations(cfg: RunConfig):
    """Find the target configuration by its radius-2 ball and shift it."""
    X = canonical_resolution(fixture_gfs("gfs2x1", cfg), 6, cfg.budget)
    before = {"b", "a^-1", "b^-1"}
    after = {"a", "a^-1", "b^-1"}
    shapes = ({"a^-1", "b^-1"}, {"c^-1"})
    hits, shifted, odd_shapes = 0, 0, 0
    for p in all_prefixes(X, 4):
        ball = config_ball(p, 2)
        local = ball.local_texts(alias=LETTER_ALIAS)
        forward = {t for t in local if not t.endswith("^-1")}
        if len(forward) != 1 or local - forward not in shapes:
            odd_shapes += 1
        if frozenset(ball.texts(LETTER_ALIAS)) != TARGET_BALL:
            continue
        hits += 1
        moved = config_ball(shift_prefix(p), 1).local_texts(alias=LETTER_ALIAS)
        shifted += local == before and moved == after and tau_ball(ball).local_texts(alias=LETTER_ALIAS) == after
    ok = hits > 0 and shifted == hits and odd_shapes == 0
    return ok, {"points_with_target_ball": hits, "shifted_as_expected": shifted, "unexpected_local_shapes": odd_shapes}


CHECKS = (
    ("gfs6x4-matrices", check_gfs6x4_matrices),
    ("level-counts", check_level_counts),
    ("higher-edge", check_higher_edge),
    ("canonical-resolutions", check_resolutions),
    ("adjacency-recursion", check_recursion),
    ("romb-suite", check_rombs),
    ("dynamics-oracle", check_dynamics),
    ("telescoping", check_telescoping),
    ("tameness", check_tameness),
    ("steinberg-soundness", check_steinberg),
    ("colimit-square", check_commutativity),
    ("inverse-limit-fibers", check_inverse_limit),
    ("configuration-shift", check_configurations),
)


def run_check(name: str, fn, cfg: RunConfig) -> dict:
    if resource_budget(cfg.budget) <= 0:
        return {"check": name, "status": "skipped: budget", "witness": None, "runtime_ms": 0}
    t0 = time.perf_counter()
    try:
        ok, wit = fn(cfg)
        status = "pass" if ok else "fail"
    except Exception as exc:  # a crash is a named failure, not an aborted suite
        status, wit = "fail", {"error": type(exc).__name__, "message": str(exc)}
    ms = 0 if cfg.stable else round((time.perf_counter() - t0) * 1000)
    return {"check": name, "status": status, "witness": wit, "runtime_ms": ms}


def run_suite(cfg: RunConfig | None = None) -> dict:
    cfg = cfg or RunConfig()
    results = [run_check(n, fn, cfg) for n, fn in CHECKS if not cfg.only or n in cfg.only]
    passed = all(r["status"] in ("pass", "skipped: budget") for r in results)
    return {
        "check": "suite",
        "status": "pass" if passed else "fail",
        "seed": cfg.seed,
        "witness": results,
        "runtime_ms": sum(r["runtime_ms"] for r in results),
    }
