"""Compare the numba and numpy kernel backends on synthetic CSR problems.

Times margins() and objective_and_grad() (both losses) at a few problem
shapes, prints a table with the per-call best-of-N time for each backend
and the speedup, and cross-checks that the two backends agree.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 50
"""

import argparse
import time

import numpy as np

from contentdense.kernels import (
    NUMBA_AVAILABLE,
    CsrMatrix,
    LOSSES,
    margins,
    objective_and_grad,
)

# (name, n_rows, n_cols, nnz_per_row); the small shape matches the sparse
# vocabulary spaces used by the classifiers, the larger ones probe scaling.
SHAPES = [
    ("small", 500, 100, 8),
    ("medium", 5000, 2000, 30),
    ("large", 20000, 20000, 60),
]


def random_problem(n_rows, n_cols, nnz_per_row, seed):
    rng = np.random.default_rng(seed)
    indices = np.empty(n_rows * nnz_per_row, dtype=np.int64)
    for i in range(n_rows):
        cols = rng.choice(n_cols, size=nnz_per_row, replace=False)
        cols.sort()
        indices[i * nnz_per_row:(i + 1) * nnz_per_row] = cols
    data = rng.uniform(0.1, 2.0, size=indices.shape[0])
    indptr = np.arange(0, (n_rows + 1) * nnz_per_row, nnz_per_row,
                       dtype=np.int64)
    X = CsrMatrix(data=data, indices=indices, indptr=indptr,
                  n_rows=n_rows, n_cols=n_cols)
    y = np.where(rng.random(n_rows) < 0.5, -1.0, 1.0)
    w = rng.normal(0.0, 0.5, size=n_cols)
    b = float(rng.normal())
    return X, y, w, b


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def check_close(a, b, what, tol=1e-9):
    diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    if diff > tol:
        raise AssertionError(f"{what}: backends disagree by {diff:g}")
    return diff


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20,
                    help="timing repeats per cell (best is reported)")
    args = ap.parse_args()

    if not NUMBA_AVAILABLE:
        print("numba is not importable; nothing to compare against")
        return

    print(f"{'shape':8} {'kernel':18} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    print("-" * 63)
    for name, n_rows, n_cols, nnz, in SHAPES:
        X, y, w, b = random_problem(n_rows, n_cols, nnz, seed=0)
        # warm-up: triggers JIT compilation and touches the .rows cache
        margins(X, w, b, which="numba")
        margins(X, w, b, which="numpy")

        z_np = margins(X, w, b, which="numpy")
        z_nb = margins(X, w, b, which="numba")
        check_close(z_np, z_nb, f"{name} margins")
        t_np = best_of(lambda: margins(X, w, b, which="numpy"), args.repeats)
        t_nb = best_of(lambda: margins(X, w, b, which="numba"), args.repeats)
        print(f"{name:8} {'margins':18} {t_np * 1e3:10.3f}ms "
              f"{t_nb * 1e3:10.3f}ms {t_np / t_nb:8.2f}x")

        for loss in LOSSES:
            objective_and_grad(w, b, X, y, 1.0, loss, which="numba")
            v_np, g_np, gb_np = objective_and_grad(w, b, X, y, 1.0, loss,
                                                   which="numpy")
            v_nb, g_nb, gb_nb = objective_and_grad(w, b, X, y, 1.0, loss,
                                                   which="numba")
            check_close([v_np], [v_nb], f"{name} {loss} value", tol=1e-8)
            check_close(g_np, g_nb, f"{name} {loss} grad_w", tol=1e-8)
            check_close([gb_np], [gb_nb], f"{name} {loss} grad_b", tol=1e-8)
            t_np = best_of(
                lambda: objective_and_grad(w, b, X, y, 1.0, loss,
                                           which="numpy"), args.repeats)
            t_nb = best_of(
                lambda: objective_and_grad(w, b, X, y, 1.0, loss,
                                           which="numba"), args.repeats)
            print(f"{name:8} {'grad/' + loss:18} {t_np * 1e3:10.3f}ms "
                  f"{t_nb * 1e3:10.3f}ms {t_np / t_nb:8.2f}x")
    print("-" * 63)
    print(f"repeats={args.repeats}, best-of timing; backends agreed within "
          "1e-8 on every cell")


if __name__ == "__main__":
    main()
