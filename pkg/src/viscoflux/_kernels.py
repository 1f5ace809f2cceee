"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time. Set ``VISCOFLUX_NUMBA=0`` to force
the numpy path; by default numba is used whenever it imports. Both
implementations are always importable as ``numpy_impl`` / ``numba_impl`` so the
test-suite and ``benchmarks/bench_kernels.py`` can compare them directly.

Layout conventions (all kernels work on flattened grids):

* mode tables ``M`` have shape ``(K, m, m)`` and state vectors ``(m, K)``;
* pointwise tensors have shape ``(n, n, P)`` with ``P`` grid points.
"""
import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None


# ---------------------------------------------------------------- numpy path


def _np_apply_modewise(M, y):
    return np.einsum("kij,jk->ik", M, y)


def _np_tau_from_F(F):
    n = F.shape[0]
    if n == 2:
        det = F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]
    else:
        det = (F[0, 0] * (F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1])
               - F[0, 1] * (F[1, 0] * F[2, 2] - F[1, 2] * F[2, 0])
               + F[0, 2] * (F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]))
    B = np.einsum("ikp,jkp->ijp", F, F)
    tau = B / det
    for i in range(n):
        tau[i, i] -= 1.0
    return tau, det


def _np_stretch(J, tau):
    """J tau + tau J^T - tr(J) tau, pointwise."""
    Jt = np.einsum("ikp,kjp->ijp", J, tau)
    div = np.einsum("iip->p", J)
    return Jt + np.swapaxes(Jt, 0, 1) - div * tau


def _np_expm2x2(a, b, c, d, t):
    """exp(t [[a, b], [c, d]]) written as ``eS * A + c0 * I``.

    In the real-distinct branch the root nearer zero is taken from the
    determinant (Vieta) so it keeps full relative accuracy when the roots are
    widely separated."""
    a, b, c, d = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c, d)))
    m = 0.5 * (a + d)
    det = a * d - b * c
    disc = (0.5 * (a - d)) ** 2 + b * c
    eS = np.empty_like(m)
    c0 = np.empty_like(m)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        s = np.sqrt(np.abs(disc))
        x = s * t
        em = np.exp(m * t)
        pos = disc > 0
        small = pos & (x < 1.0)
        big = pos & ~small
        eS[small] = em[small] * np.sinh(x[small]) / s[small]
        c0[small] = em[small] * np.cosh(x[small]) - m[small] * eS[small]
        mb, sb, db = m[big], s[big], det[big]
        far = np.where(mb <= 0, mb - sb, mb + sb)
        near = np.where(far != 0, db / far, mb + sb - (far - mb + sb))
        e_far = np.exp(far * t)
        e_near = np.exp(near * t)
        gap = near - far
        eS[big] = (e_near - e_far) / gap
        c0[big] = (near * e_far - far * e_near) / gap
        neg = disc < 0
        eS[neg] = em[neg] * np.sin(x[neg]) / s[neg]
        c0[neg] = em[neg] * np.cos(x[neg]) - m[neg] * eS[neg]
        zero = disc == 0
        eS[zero] = em[zero] * t
        c0[zero] = em[zero] - m[zero] * eS[zero]
    return (eS * a + c0, eS * b, eS * c, eS * d + c0)


numpy_impl = types.SimpleNamespace(
    name="numpy",
    apply_modewise=_np_apply_modewise,
    tau_from_F=_np_tau_from_F,
    stretch=_np_stretch,
    expm2x2=_np_expm2x2,
)


# ---------------------------------------------------------------- numba path


def _build_numba_impl():
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # prefer OpenMP; an outdated TBB otherwise warns on first launch
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    njit = numba.njit(cache=True, fastmath=False)
    pjit = numba.njit(cache=True, fastmath=False, parallel=True)
    prange = numba.prange

    @pjit
    def apply_modewise(M, y):
        K, m, _ = M.shape
        out = np.zeros((m, K), dtype=np.complex128)
        for k in prange(K):
            for i in range(m):
                acc = 0j
                for j in range(m):
                    acc += M[k, i, j] * y[j, k]
                out[i, k] = acc
        return out

    @pjit
    def tau_from_F(F):
        n = F.shape[0]
        P = F.shape[2]
        tau = np.empty((n, n, P))
        det = np.empty(P)
        for p in prange(P):
            if n == 2:
                dt = F[0, 0, p] * F[1, 1, p] - F[0, 1, p] * F[1, 0, p]
            else:
                dt = (F[0, 0, p] * (F[1, 1, p] * F[2, 2, p] - F[1, 2, p] * F[2, 1, p])
                      - F[0, 1, p] * (F[1, 0, p] * F[2, 2, p] - F[1, 2, p] * F[2, 0, p])
                      + F[0, 2, p] * (F[1, 0, p] * F[2, 1, p] - F[1, 1, p] * F[2, 0, p]))
            det[p] = dt
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += F[i, k, p] * F[j, k, p]
                    tau[i, j, p] = acc / dt
                tau[i, i, p] -= 1.0
        return tau, det

    @pjit
    def stretch(J, tau):
        n = J.shape[0]
        P = J.shape[2]
        out = np.empty((n, n, P))
        for p in prange(P):
            div = 0.0
            for i in range(n):
                div += J[i, i, p]
            for i in range(n):
                for j in range(n):
                    acc = -div * tau[i, j, p]
                    for k in range(n):
                        acc += J[i, k, p] * tau[k, j, p] + J[j, k, p] * tau[k, i, p]
                    out[i, j, p] = acc
        return out

    @njit
    def _expm2x2_scalar(a, b, c, d, t):
        m = 0.5 * (a + d)
        disc = (0.5 * (a - d)) ** 2 + b * c
        if disc > 0.0:
            s = np.sqrt(disc)
            x = s * t
            if x < 1.0:
                em = np.exp(m * t)
                eS = em * np.sinh(x) / s
                c0 = em * np.cosh(x) - m * eS
            else:
                far = m - s if m <= 0.0 else m + s
                near = (a * d - b * c) / far if far != 0.0 else m + s
                e_far = np.exp(far * t)
                e_near = np.exp(near * t)
                gap = near - far
                eS = (e_near - e_far) / gap
                c0 = (near * e_far - far * e_near) / gap
        elif disc < 0.0:
            s = np.sqrt(-disc)
            em = np.exp(m * t)
            eS = em * np.sin(s * t) / s
            c0 = em * np.cos(s * t) - m * eS
        else:
            em = np.exp(m * t)
            eS = em * t
            c0 = em - m * eS
        return eS * a + c0, eS * b, eS * c, eS * d + c0

    @njit
    def _expm2x2_flat(a, b, c, d, t):
        K = a.size
        e11 = np.empty(K)
        e12 = np.empty(K)
        e21 = np.empty(K)
        e22 = np.empty(K)
        for k in range(K):
            e11[k], e12[k], e21[k], e22[k] = _expm2x2_scalar(a[k], b[k], c[k], d[k], t)
        return e11, e12, e21, e22

    def expm2x2(a, b, c, d, t):
        a, b, c, d = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c, d)))
        shape = a.shape
        out = _expm2x2_flat(np.ascontiguousarray(a).ravel(), np.ascontiguousarray(b).ravel(),
                            np.ascontiguousarray(c).ravel(), np.ascontiguousarray(d).ravel(),
                            float(t))
        return tuple(o.reshape(shape) for o in out)

    def _contig(f):
        return lambda *args: f(*(np.ascontiguousarray(x) for x in args))

    return types.SimpleNamespace(
        name="numba",
        apply_modewise=_contig(apply_modewise),
        tau_from_F=_contig(tau_from_F),
        stretch=_contig(stretch),
        expm2x2=expm2x2,
    )


numba_impl = _build_numba_impl() if numba is not None else None


def set_threads(count):
    """Thread count of the parallel numba kernels (no effect on the numpy path)."""
    if numba is not None:
        numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))


def _select():
    flag = os.environ.get("VISCOFLUX_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off") or numba_impl is None:
        return numpy_impl
    return numba_impl


backend = _select()


def apply_modewise(M, y):
    return backend.apply_modewise(M, y)


def tau_from_F(F):
    return backend.tau_from_F(F)


def stretch(J, tau):
    return backend.stretch(J, tau)


def expm2x2(a, b, c, d, t):
    return backend.expm2x2(a, b, c, d, t)
