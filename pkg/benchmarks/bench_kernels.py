"""Time the compiled and pure-Python metric kernels on random layouts.

    python3 benchmarks/bench_kernels.py --sizes 50 200 800 --repeat 5
"""

import argparse
import random
import timeit

from hstdoc import kernels


def random_boxes(n, seed, width=850, height=1100):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        x1, y1 = rng.randrange(width - 10), rng.randrange(height - 10)
        out.append((x1, y1, rng.randint(x1 + 1, width), rng.randint(y1 + 1, height)))
    return out


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(impls) == 1:
        print("compiled kernels not built; timing the pure-Python path only")
    print(f"{'n':>6} {'kernel':>10} " + " ".join(f"{i + ' ms':>12}" for i in impls) + f" {'speedup':>9}")
    for n in args.sizes:
        boxes = random_boxes(n, args.seed)
        for name, call in (("overlap", lambda impl: kernels.overlap_sum(boxes, impl=impl)),
                           ("alignment", lambda impl: kernels.alignment_sum(boxes, 850, impl=impl))):
            results = {impl: call(impl) for impl in impls}
            if len(impls) == 2 and abs(results["python"] - results["cython"]) > 1e-6 * max(1.0, abs(results["python"])):
                raise SystemExit(f"{name} n={n}: backends disagree {results}")
            times = {impl: bench(lambda: call(impl), args.repeat) * 1000 for impl in impls}
            speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else f"{'-':>9}"
            print(f"{n:>6} {name:>10} " + " ".join(f"{times[i]:12.3f}" for i in impls) + f" {speed}")


if __name__ == "__main__":
    main()
