"""Timings of the hot paths: resolution, telescoping, prefix shifts, convolution and the suite.

    python3 benchmarks/bench_core.py [--repeat N]
"""

import argparse
import time

from sepshift.dynamics import all_prefixes, shift_prefix
from sepshift.ldiagram import build_ldiagram, telescope
from sepshift.resolution import canonical_resolution
from sepshift.steinberg import bisection, model_of, tset, whole_space
from sepshift.suite import RunConfig, fixture_gfs, run_suite
from sepshift.systems import FullOneSided, FullTwoSided


def bench(label, fn, repeat):
    best = min(_timed(fn) for _ in range(repeat))
    print(f"{label:40s} {best * 1000:9.1f} ms")


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    n = ap.parse_args().repeat

    g = fixture_gfs("gfs2x1")
    bench("resolution gfs2x1 depth 6 (8190 vertices)", lambda: canonical_resolution(g, 6), n)
    full2 = canonical_resolution(fixture_gfs("full2"), 12)
    bench("telescope full2 depth 12 by (0,3,6,9,12)", lambda: telescope(full2, (0, 3, 6, 9, 12)), n)
    d = build_ldiagram(FullOneSided(2), 10)
    bench("shift all depth-10 prefixes, full 1-shift", lambda: [shift_prefix(p) for p in all_prefixes(d, 10)], n)

    def conv():
        e = build_ldiagram(FullTwoSided(2), 8)
        M = model_of(e)
        reds = [x.id for x in e.layers[0].edges if x.color.value == "red"]
        B = bisection(M, tset(M, (reds[0],)), 1, 0, None) + whole_space(M)
        return (B * B.star()) * B

    bench("convolution on fresh full 2-shift model", conv, n)
    bench("acceptance suite", lambda: run_suite(RunConfig(stable=True)), 1)


if __name__ == "__main__":
    main()
