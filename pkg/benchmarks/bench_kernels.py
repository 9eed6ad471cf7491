"""Compare the numba and numpy paths of the inner kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on the
shapes it sees in practice: small transfer superoperators iterated for many
steps, and spectra of averaged observables with many near-degenerate atoms.
"""

import argparse
import time

import numpy as np

from spinchain import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_power_iterates(dim, n_max, repeat, rng):
    S = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    S = (S @ S.conj().T).astype(np.complex128)
    v = rng.random(dim).astype(np.complex128)
    w = rng.random(dim).astype(np.complex128)
    a = _kernels._log_power_iterates_numpy(S, v, w, n_max)
    b = _kernels._log_power_iterates_numba(S, v, w, n_max)  # warm-up compiles
    fin = np.isfinite(a)
    gap = float(np.max(np.abs(a[fin] - b[fin]), initial=0.0)) if np.array_equal(fin, np.isfinite(b)) else np.inf
    t_np = best_of(lambda: _kernels._log_power_iterates_numpy(S, v, w, n_max), repeat)
    t_nb = best_of(lambda: _kernels._log_power_iterates_numba(S, v, w, n_max), repeat)
    return t_np, t_nb, gap


def bench_merge(size, repeat, rng):
    values = np.sort(np.round(rng.normal(size=size), 3) + 1e-11 * rng.random(size))
    masses = rng.random(size)
    a = _kernels._merge_sorted_atoms_numpy(values, masses, 1e-8)
    b = _kernels._merge_sorted_atoms_numba(values, masses, 1e-8)
    gap = float(np.max(np.abs(a[1] - b[1])))
    t_np = best_of(lambda: _kernels._merge_sorted_atoms_numpy(values, masses, 1e-8), repeat)
    t_nb = best_of(lambda: _kernels._merge_sorted_atoms_numba(values, masses, 1e-8), repeat)
    return t_np, t_nb, gap


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':<28}{'shape':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for dim, n_max in ((4, 400), (9, 400), (16, 2000), (64, 500)):
        t_np, t_nb, gap = bench_power_iterates(dim, n_max, args.repeat, rng)
        print(f"{'log_power_iterates':<28}{f'{dim}x{dim}, n={n_max}':<18}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}{gap:>12.1e}")
    for size in (256, 4096, 65536):
        t_np, t_nb, gap = bench_merge(size, args.repeat, rng)
        print(f"{'merge_sorted_atoms':<28}{f'{size} atoms':<18}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}{gap:>12.1e}")


if __name__ == "__main__":
    main()
