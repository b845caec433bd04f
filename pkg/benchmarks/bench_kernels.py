"""Time the numba kernels against their numpy fallbacks and check they agree.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--profiles 20000]
"""

import argparse
from timeit import default_timer as timer

import numpy as np

from artifact import _kernels as K


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = timer()
        out = fn()
        best = min(best, timer() - t0)
    return best, out


def cases(rng, profiles):
    n, m, D = 3, 4, 8
    V = rng.integers(0, 10, (profiles, n, m)).astype(float)
    w = np.full(profiles, 1.0 / profiles)
    P = rng.integers(0, 10, (D, n, m)).astype(float)
    pw = np.full(D, 1.0 / D)
    order = np.arange(n, dtype=np.int64)
    Pt = rng.integers(0, 10, (profiles, n, m)).astype(float)
    q = np.sort(rng.uniform(0, 1, 5000))
    q[0] = 0.0
    r = q * rng.uniform(0, 10, q.size)
    T = rng.normal(size=(120, 200))
    return {
        "rspm_revenue": (lambda f: f(V, w, P, pw, order), "rspm_revenue_np", "rspm_revenue_nb"),
        "rspm_paired": (lambda f: f(V, Pt, order), "rspm_paired_np", "rspm_paired_nb"),
        "upper_hull": (lambda f: f(q, r), "upper_hull_np", "upper_hull_nb"),
        "pivot": (lambda f: (lambda A: (f(A, 3, 5), A)[1])(T.copy()), "pivot_np", "pivot_nb"),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--profiles", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K._HAVE_NUMBA:
        print("numba not importable; nothing to compare")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14}{'numpy s':>12}{'numba s':>12}{'speedup':>10}  agree")
    for name, (call, np_name, nb_name) in cases(rng, args.profiles).items():
        f_np, f_nb = getattr(K, np_name), getattr(K, nb_name)
        call(f_nb)  # compile outside the timed region
        t_np, a = best_of(lambda: call(f_np), args.repeat)
        t_nb, b = best_of(lambda: call(f_nb), args.repeat)
        agree = np.allclose(a, b, rtol=1e-12, atol=1e-12)
        print(f"{name:<14}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
