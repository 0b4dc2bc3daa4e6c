"""Command-line front end.

Checks print a JSON report ``{check, status, witness, runtime_ms}`` and exit 0
when they pass, 1 when they fail or the input is invalid; usage errors exit 2.
Constructions print graph JSON, CSV, DOT or algebra text.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import algebra as alg
from . import dynamics as dyn
from .errors import SepShiftError
from .graph import (
    Digraph,
    GfsGraph,
    as_gfs,
    export_dot,
    gfs_from_digraph,
    matrix_axes,
    parse_graph,
    red_blue_matrices,
    serialize_graph,
    validate_gfs,
    validate_layer,
)
from .ldiagram import LDiagram, build_ldiagram, telescope, validate_hdiagram, validate_ldiagram
from .resolution import (
    adjacency_recursion_check,
    canonical_resolution,
    check_resolution_vs_higher_edge,
    dense_csv,
    higher_edge_graph,
)
from .suite import RunConfig, run_suite
from .systems import parse_system


class Ctx:
    def __init__(self, args, out):
        self.args = args
        self.out = out
        self.t0 = time.perf_counter()

    def write(self, text: str):
        self.out.write(text if text.endswith("\n") else text + "\n")

    def json(self, obj):
        self.write(json.dumps(obj, indent=1, sort_keys=False))

    def report(self, check: str, ok: bool, witness) -> int:
        ms = 0 if getattr(self.args, "stable", False) else round((time.perf_counter() - self.t0) * 1000)
        rep = {"check": check, "status": "pass" if ok else "fail", "witness": witness, "runtime_ms": ms}
        if "seed" in self.args:
            rep["seed"] = self.args.seed
        self.json(rep)
        return 0 if ok else 1


def _witness(rep) -> dict:
    out = {"violations": [v.to_json() for v in rep.violations]}
    if rep.unchecked:
        out["unchecked_at_horizon"] = list(rep.unchecked)
    info = getattr(rep, "info", None)
    if info:
        out["info"] = info
    return out


# ---------------------------------------------------------------- input


def read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def read_graph(path: str):
    return parse_graph(read_text(path))


def read_gfs(path: str) -> GfsGraph:
    g = read_graph(path)
    if isinstance(g, Digraph):
        return gfs_from_digraph(g)
    if isinstance(g, LDiagram):
        raise SepShiftError("expected a graph file, got an l-diagram")
    return as_gfs(g)


def read_diagram(args) -> LDiagram:
    """An l-diagram from a diagram file, a graph file (resolved) or --system."""
    depth = args.depth
    if args.system:
        E = read_graph(args.input) if args.input else None
        sysm = parse_system(args.system, E if isinstance(E, Digraph) else None)
        return build_ldiagram(sysm, depth if depth is not None else 8)
    if not args.input:
        raise SepShiftError("give a diagram file or --system")
    g = read_graph(args.input)
    if isinstance(g, LDiagram):
        return g
    g = gfs_from_digraph(g) if isinstance(g, Digraph) else as_gfs(g)
    return canonical_resolution(g, depth if depth is not None else 6, args.budget)


def read_prefix(d: LDiagram, args) -> dyn.BluePrefix:
    if args.prefix:
        return dyn.make_prefix(d, [e for e in args.prefix.split(",") if e])
    if args.vertex:
        if args.vertex not in d.vertex_level:
            raise SepShiftError(f"unknown vertex {args.vertex}")
        return dyn.prefix_of(d, args.vertex)
    raise SepShiftError("give --prefix or --vertex")


def prefix_obj(p: dyn.BluePrefix) -> dict:
    return {"depth": p.depth, "edges": list(p.edges), "root": p.root, "end": p.end}


def parse_alias(text: str | None) -> dict | None:
    if not text:
        return None
    return dict(pair.split("=", 1) for pair in text.split(","))


# ---------------------------------------------------------------- graph commands


def cmd_validate(ctx: Ctx) -> int:
    g = read_graph(ctx.args.input)
    if isinstance(g, LDiagram):
        rep = validate_hdiagram(g) if ctx.args.h else validate_ldiagram(g)
    elif isinstance(g, Digraph):
        g.check_no_sinks_or_sources()
        return ctx.report("digraph", True, {"vertices": len(g.vertices), "edges": len(g.edges)})
    elif isinstance(g, GfsGraph):
        rep = validate_gfs(g)
    else:
        rep = validate_layer(g)
    return ctx.report(rep.check, rep.ok, _witness(rep))


def cmd_matrices(ctx: Ctx) -> int:
    g = read_gfs(ctx.args.input)
    A, I = red_blue_matrices(g)
    rows, cols = matrix_axes(g)
    if ctx.args.format == "json":
        ctx.json({"rows": rows, "columns": cols, "A": A, "I": I})
    elif ctx.args.which == "A":
        ctx.write(dense_csv(A))
    elif ctx.args.which == "I":
        ctx.write(dense_csv(I))
    else:
        ctx.write(dense_csv(A) + "\n" + dense_csv(I))
    return 0


def emit_graph(ctx: Ctx, g) -> int:
    ctx.write(export_dot(g) if getattr(ctx.args, "format", "json") == "dot" else serialize_graph(g))
    return 0


def cmd_gfs_from_digraph(ctx: Ctx) -> int:
    g = read_graph(ctx.args.input)
    if not isinstance(g, Digraph):
        raise SepShiftError("expected a digraph")
    return emit_graph(ctx, gfs_from_digraph(g))


def cmd_resolve(ctx: Ctx) -> int:
    d = canonical_resolution(read_gfs(ctx.args.input), ctx.args.depth, ctx.args.budget)
    return emit_graph(ctx, d)


def cmd_higher_edge(ctx: Ctx) -> int:
    g = read_graph(ctx.args.input)
    if not isinstance(g, Digraph):
        raise SepShiftError("expected a digraph")
    return emit_graph(ctx, higher_edge_graph(g, ctx.args.n))


def cmd_check_rvh(ctx: Ctx) -> int:
    g = read_graph(ctx.args.input)
    if not isinstance(g, Digraph):
        raise SepShiftError("expected a digraph")
    ok, iso = check_resolution_vs_higher_edge(g, ctx.args.n, ctx.args.budget)
    return ctx.report("resolution-vs-higher-edge", ok, {"n": ctx.args.n, "isomorphism": iso})


def cmd_check_recursion(ctx: Ctx) -> int:
    a = ctx.args
    if a.depth is None:
        a.depth = 2 * a.j + 3
    d = read_diagram(a)
    ok, w = adjacency_recursion_check(d, a.j)
    return ctx.report("adjacency-recursion", ok, {"j": a.j, "mismatch": w})


def cmd_telescope(ctx: Ctx) -> int:
    d = read_diagram(ctx.args)
    m = [int(x) for x in ctx.args.seq.split(",") if x.strip()]
    return emit_graph(ctx, telescope(d, m))


def cmd_build(ctx: Ctx) -> int:
    a = ctx.args
    E = read_graph(a.input) if a.input else None
    sysm = parse_system(a.system, E if isinstance(E, Digraph) else None)
    return emit_graph(ctx, build_ldiagram(sysm, a.depth))


# ---------------------------------------------------------------- dynamics commands


def cmd_shift(ctx: Ctx) -> int:
    d = read_diagram(ctx.args)
    p = read_prefix(d, ctx.args)
    ctx.json({"prefix": prefix_obj(p), "shift": prefix_obj(dyn.shift_prefix(p))})
    return 0


def cmd_preimages(ctx: Ctx) -> int:
    d = read_diagram(ctx.args)
    p = read_prefix(d, ctx.args)
    branches = [{"red_edge": f, "prefix": prefix_obj(q)} for f, q in dyn.preimages(p)]
    ctx.json({"prefix": prefix_obj(p), "branches": branches})
    return 0


def cmd_orbit(ctx: Ctx) -> int:
    d = read_diagram(ctx.args)
    q = read_prefix(d, ctx.args)
    orbit = [prefix_obj(q)]
    for _ in range(ctx.args.steps):
        if q.depth % 2:
            q = q.truncate(q.depth - 1)
        if q.depth < 2:
            break
        q = dyn.shift_prefix(q)
        orbit.append(prefix_obj(q))
    ctx.json({"orbit": orbit})
    return 0


def ball_dot(b: dyn.ConfigBall, alias=None) -> str:
    """River-basin picture: an arrow u -> a.u for every forward letter a."""
    name = lambda w: json.dumps(dyn.word_text(w, alias))
    lines = ["digraph ball {", "  rankdir=LR;"]
    for w in sorted(b.words, key=lambda w: (len(w), dyn.word_text(w, alias))):
        shape = "doublecircle" if not w else "circle"
        lines.append(f"  {name(w)} [shape={shape}];")
    letters = sorted({a for w in b.words for a, _ in w})
    for u in sorted(b.words, key=lambda w: dyn.word_text(w, alias)):
        for a in letters:
            v = dyn.mul(((a, 1),), u)
            if v in b.words:
                lab = json.dumps(dyn.word_text(((a, 1),), alias))
                lines.append(f"  {name(u)} -> {name(v)} [label={lab}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_config_ball(ctx: Ctx) -> int:
    a = ctx.args
    d = read_diagram(a)
    p = read_prefix(d, a)
    b = dyn.config_ball(p.truncate(min(p.depth, 2 * a.radius)), a.radius)
    alias = parse_alias(a.alias)
    if a.dot:
        ctx.write(ball_dot(b, alias))
    else:
        ctx.json({"radius": b.radius, "words": b.texts(alias), "local": sorted(b.local_texts(alias=alias))})
    return 0


def cmd_check_inverse_limit(ctx: Ctx) -> int:
    d = read_diagram(ctx.args)
    rep = dyn.inverse_limit_check(d, ctx.args.check_depth)
    return ctx.report("inverse-limit", rep.ok, _witness(rep))


def cmd_check_fibers(ctx: Ctx) -> int:
    a = ctx.args
    d = read_diagram(a)
    bound = (a.m, a.n)
    if a.prefix or a.vertex:
        points = [read_prefix(d, a)]
    else:
        need = 2 * (a.m + a.n + 1)
        points = dyn.all_prefixes(d, need)
    bad = []
    for y in points:
        rep = dyn.fiber_bijection_check(y, bound)
        if not rep.ok:
            bad.append({"point": prefix_obj(y), **_witness(rep)})
    return ctx.report("fibers", not bad, {"bound": list(bound), "points": len(points), "failures": bad[:5]})


# ---------------------------------------------------------------- algebra commands


def _elements(ctx: Ctx, d: LDiagram):
    return [alg.parse_expr(e, d, ctx.args.stage) for e in ctx.args.expr]


def cmd_alg(ctx: Ctx) -> int:
    a = ctx.args
    if a.op == "check-commute":
        F = read_diagram(a)
        rep = alg.commutativity_check(F, a.stage, a.res_depth)
        return ctx.report("commutativity", rep.ok, _witness(rep))
    d = read_diagram(a)
    xs = _elements(ctx, d)
    if not xs:
        raise SepShiftError("give at least one expression")
    if a.op == "mul":
        out = xs[0]
        for x in xs[1:]:
            out = out * x
        ctx.write(alg.format_element(out))
    elif a.op == "star":
        for x in xs:
            ctx.write(alg.format_element(x.star()))
    elif a.op == "canon":
        for x in xs:
            stage, terms = alg.canonicalize(x, a.stages)
            items = [{"coeff": str(c), "kind": t.kind, "stage": t.stage, "degree": t.degree, "word": alg.format_word(t.word)} for c, t in terms]
            ctx.json({"stage": stage, "terms": items})
    elif a.op == "eval-steinberg":
        for x in xs:
            ctx.write(str(alg.evaluate(x, a.stages)))
    elif a.op == "check-tame":
        results = []
        for text, x in zip(a.expr, xs):
            ok, img = alg.tameness_check(x)
            results.append({"word": text, "tame": ok, "image": alg.format_element(img)})
        return ctx.report("tameness", all(r["tame"] for r in results), results)
    return 0


# ---------------------------------------------------------------- suite


def cmd_suite(ctx: Ctx) -> int:
    a = ctx.args
    data = dict(pair.split("=", 1) for pair in a.data) if a.data else {}
    cfg = RunConfig(seed=a.seed, budget=a.budget, data=data, only=tuple(a.only or ()), stable=a.stable)
    rep = run_suite(cfg)
    if a.format == "text":
        for r in rep["witness"]:
            status = "SKIP" if r["status"].startswith("skipped") else r["status"].upper()
            ctx.write(f"{status:5s} {r['check']}")
    else:
        ctx.json(rep)
    return 0 if rep["status"] == "pass" else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--budget", type=int, default=argparse.SUPPRESS, help="vertex cap per layer (default: SEPSHIFT_BUDGET or 10^6)")
    common.add_argument("--stable", action="store_true", default=argparse.SUPPRESS, help="zero runtime_ms for byte-stable reports")

    diagram = argparse.ArgumentParser(add_help=False)
    diagram.add_argument("input", nargs="?", help="diagram file, or graph file to resolve ('-' for stdin)")
    diagram.add_argument("--system", help="build from full1:k, full2:k or edge (with a digraph input)")
    diagram.add_argument("--depth", type=int, help="depth when building or resolving")

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--prefix", help="comma-separated blue edges from level 0")
    point.add_argument("--vertex", help="end vertex of the prefix")

    p = argparse.ArgumentParser(prog="sepshift", parents=[common], description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, parents=(), **kw):
        sp = sub.add_parser(name, parents=[common, *parents], **kw)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("validate", cmd_validate, help="validate a layer, GFS, digraph or l-diagram file")
    sp.add_argument("input")
    sp.add_argument("--h", action="store_true", help="validate an l-diagram as an h-diagram")

    sp = add("matrices", cmd_matrices, help="red and blue adjacency matrices as CSV")
    sp.add_argument("input")
    sp.add_argument("--which", choices=("A", "I", "both"), default="both")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = add("gfs-from-digraph", cmd_gfs_from_digraph, help="GFS graph of a digraph")
    sp.add_argument("input", help="digraph file or '-'")
    sp.add_argument("--format", choices=("json", "dot"), default="json")

    sp = add("resolve", cmd_resolve, help="canonical resolution to a depth")
    sp.add_argument("input")
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--format", choices=("json", "dot"), default="json")

    sp = add("higher-edge", cmd_higher_edge, help="higher edge graph of a digraph")
    sp.add_argument("input")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--format", choices=("json", "dot"), default="json")

    sp = add("check-resolution-vs-higher-edge", cmd_check_rvh, help="compare resolution layer 2N with the higher edge GFS")
    sp.add_argument("input")
    sp.add_argument("--n", type=int, default=1)

    sp = add("check-recursion", cmd_check_recursion, parents=[diagram], help="adjacency recursion at index j")
    sp.add_argument("--j", type=int, default=0)

    sp = add("telescope", cmd_telescope, parents=[diagram], help="contract a diagram along a sequence")
    sp.add_argument("--seq", required=True, help="comma-separated levels, e.g. 0,3,6")
    sp.add_argument("--format", choices=("json", "dot"), default="json")

    sp = add("build", cmd_build, help="diagram of a built-in symbolic system")
    sp.add_argument("input", nargs="?", help="digraph file for --system edge")
    sp.add_argument("--system", required=True)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--format", choices=("json", "dot"), default="json")

    ld = sub.add_parser("ldiag", help="diagram commands grouped: validate, telescope, build")
    lsub = ld.add_subparsers(dest="ldiag_command", required=True, metavar="command")
    sp = lsub.add_parser("validate", parents=[common])
    sp.add_argument("input")
    sp.add_argument("--h", action="store_true")
    sp.set_defaults(fn=cmd_validate)
    sp = lsub.add_parser("telescope", parents=[common, diagram])
    sp.add_argument("--seq", required=True)
    sp.add_argument("--format", choices=("json", "dot"), default="json")
    sp.set_defaults(fn=cmd_telescope)
    sp = lsub.add_parser("build", parents=[common])
    sp.add_argument("input", nargs="?")
    sp.add_argument("--system", required=True)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--format", choices=("json", "dot"), default="json")
    sp.set_defaults(fn=cmd_build)

    add("shift", cmd_shift, parents=[diagram, point], help="shift of an even-depth prefix")
    add("preimages", cmd_preimages, parents=[diagram, point], help="preimage branches of an odd-depth prefix")
    sp = add("orbit", cmd_orbit, parents=[diagram, point], help="prefix orbit with shrinking depth")
    sp.add_argument("--steps", type=int, default=3)
    sp = add("config-ball", cmd_config_ball, parents=[diagram, point], help="configuration ball of a point")
    sp.add_argument("--radius", type=int, default=1)
    sp.add_argument("--dot", action="store_true", help="emit the ball as DOT")
    sp.add_argument("--alias", help="rename letters, e.g. beta0=a,beta1=b")
    sp = add("check-inverse-limit", cmd_check_inverse_limit, parents=[diagram], help="inverse-limit round trip")
    sp.add_argument("--check-depth", type=int, default=4)
    sp = add("check-fibers", cmd_check_fibers, parents=[diagram, point], help="fiber bijection up to (m, n)")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--n", type=int, default=2)

    ap = sub.add_parser("alg", help="corner algebra: mul, star, canon, eval-steinberg, check-tame, check-commute")
    asub = ap.add_subparsers(dest="op", required=True, metavar="op")
    for op in ("mul", "star", "canon", "eval-steinberg", "check-tame", "check-commute"):
        sp = asub.add_parser(op, parents=[common, diagram])
        sp.set_defaults(fn=cmd_alg)
        sp.add_argument("--stage", type=int, default=0, help="corner stage (layer 2*stage)")
        if op == "check-commute":
            sp.add_argument("--res-depth", type=int, default=6, help="depth of the resolutions compared")
            continue
        sp.add_argument("--expr", "-e", action="append", default=[], required=True, help="element expression; repeatable")
        sp.add_argument("--stages", type=int, default=4, help="stage advances allowed when canonicalizing")

    sp = add("suite", cmd_suite, help="run the acceptance suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--only", action="append", help="run only the named check; repeatable")
    sp.add_argument("--data", action="append", help="replace a fixture: name=path")
    sp.add_argument("--format", choices=("json", "text"), default="json")
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for key, default in (("budget", None), ("stable", False)):
        if not hasattr(args, key):
            setattr(args, key, default)
    ctx = Ctx(args, out)
    try:
        return args.fn(ctx)
    except (SepShiftError, ValueError, KeyError, OSError) as exc:
        name = {"ldiag": f"ldiag {getattr(args, 'ldiag_command', '')}", "alg": f"alg {getattr(args, 'op', '')}"}.get(args.command, args.command)
        ctx.json({"check": name, "status": "error", "witness": {"error": type(exc).__name__, "message": str(exc)}, "runtime_ms": 0})
        return 1


if __name__ == "__main__":
    sys.exit(main())
