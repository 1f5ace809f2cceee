"""Compare the numba and numpy kernel backends on solver-sized inputs.

    python benchmarks/bench_kernels.py [--N 64] [--repeat 20]

Prints the best wall time per call for each kernel and backend, the speedup,
and the max deviation between the two results.
"""
import argparse
import timeit

import numpy as np

from viscoflux import _kernels


def _inputs(N, n=2, seed=0):
    rng = np.random.default_rng(seed)
    P = N ** n
    F = np.eye(n)[:, :, None] + 0.1 * rng.standard_normal((n, n, P))
    J = rng.standard_normal((n, n, P))
    tau = rng.standard_normal((n, n, P))
    tau = tau + tau.transpose(1, 0, 2)
    K = (2 * N // 3) ** (n - 1) * (N // 3)
    m = 1 + n + n * n
    M = rng.standard_normal((K, m, m)) + 1j * rng.standard_normal((K, m, m))
    y = rng.standard_normal((m, K)) + 1j * rng.standard_normal((m, K))
    xi = np.linspace(0.5, N / 2, K)
    zero = np.zeros(K)
    return {
        "tau_from_F": (F,),
        "stretch": (J, tau),
        "apply_modewise": (M, y),
        "expm2x2": (zero, xi, -xi, -xi * xi, 0.01),
    }


def _flat(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(o) for o in out])
    return np.ravel(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        print("numba is not installed; nothing to compare")
        return 1
    impls = {"numpy": _kernels.numpy_impl, "numba": _kernels.numba_impl}
    print(f"N = {args.N}, best of {args.repeat}")
    print(f"{'kernel':16s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max dev':>10s}")
    for name, inputs in _inputs(args.N).items():
        outs, best = {}, {}
        for label, impl in impls.items():
            fn = getattr(impl, name)
            outs[label] = _flat(fn(*inputs))  # first call also triggers compilation
            best[label] = min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat))
        dev = float(np.max(np.abs(outs["numpy"] - outs["numba"])))
        print(f"{name:16s} {1e3 * best['numpy']:11.3f} {1e3 * best['numba']:11.3f} "
              f"{best['numpy'] / best['numba']:8.2f} {dev:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
