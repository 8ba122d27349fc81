"""Hot numeric kernels: numba-jitted with pure-numpy fallbacks.

Backend selection via the ``PLSTOMO_NUMBA`` environment variable:
``"1"`` forces the jitted kernels (error if numba is missing), ``"0"``
forces the numpy fallbacks, anything else (default) uses numba when
importable. ``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "PLSTOMO_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def numba_enabled() -> bool:
    """Resolve the backend flag; read from the environment on every call."""
    flag = os.environ.get(_ENV_FLAG, "auto").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    if flag in ("1", "true", "on", "yes"):
        if not HAVE_NUMBA:
            raise RuntimeError(f"{_ENV_FLAG}={flag} but numba is not importable")
        return True
    return HAVE_NUMBA


# --------------------------------------------------------------------------
# weighted accumulation of Kronecker products of rank-1-minus-identity
# factors: out = sum_t w_t * kron_j [ (d_j+1)|v_j><v_j| - I_j ]
# --------------------------------------------------------------------------


def _accumulate_np(vecs, keys, weights, dim):
    out = np.zeros((dim, dim), dtype=np.complex128)
    M = len(vecs)
    eyes = [np.eye(v.shape[1]) for v in vecs]
    scale = [v.shape[1] + 1 for v in vecs]
    for t in range(keys.shape[0]):
        v0 = vecs[0][keys[t, 0]]
        term = scale[0] * np.outer(v0, v0.conj()) - eyes[0]
        for j in range(1, M):
            vj = vecs[j][keys[t, j]]
            term = np.kron(term, scale[j] * np.outer(vj, vj.conj()) - eyes[j])
        out += weights[t] * term
    return out


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _accumulate_nb(vec_data, vec_off, dims, keys, weights, out):  # pragma: no cover
        M = dims.size
        dim = 1
        dmax = 0
        for j in range(M):
            dim *= dims[j]
            if dims[j] > dmax:
                dmax = dims[j]
        buf_a = np.empty((dim, dim), np.complex128)
        buf_b = np.empty((dim, dim), np.complex128)
        fac = np.empty((dmax, dmax), np.complex128)
        for t in range(keys.shape[0]):
            w = weights[t]
            d0 = dims[0]
            base = vec_off[0] + keys[t, 0] * d0
            cur = buf_a
            oth = buf_b
            for r in range(d0):
                vr = vec_data[base + r] * (d0 + 1)
                for c in range(d0):
                    cur[r, c] = vr * np.conj(vec_data[base + c])
                cur[r, r] -= 1.0
            size = d0
            for j in range(1, M):
                dj = dims[j]
                bj = vec_off[j] + keys[t, j] * dj
                for r in range(dj):
                    vr = vec_data[bj + r] * (dj + 1)
                    for c in range(dj):
                        fac[r, c] = vr * np.conj(vec_data[bj + c])
                    fac[r, r] -= 1.0
                for r1 in range(size):
                    ro = r1 * dj
                    for c1 in range(size):
                        a = cur[r1, c1]
                        co = c1 * dj
                        for r2 in range(dj):
                            for c2 in range(dj):
                                oth[ro + r2, co + c2] = a * fac[r2, c2]
                tmp = cur
                cur = oth
                oth = tmp
                size *= dj
            for r in range(size):
                for c in range(size):
                    out[r, c] += w * cur[r, c]


def accumulate_ls_terms(vecs, keys, weights) -> np.ndarray:
    """Weighted sum over keys of kron_j[(d_j+1)|v><v| - I_j].

    ``vecs[j]`` is an ``(m_j, d_j)`` complex array of node-j unit vectors in
    flat index order; ``keys`` is ``(K, M)`` int64 of per-node flat indices;
    ``weights`` is ``(K,)`` float64.
    """
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if keys.ndim != 2 or keys.shape[1] != len(vecs):
        raise ValueError("keys must have one column per node")
    dims = np.array([v.shape[1] for v in vecs], dtype=np.int64)
    dim = int(np.prod(dims))
    if not numba_enabled():
        return _accumulate_np(vecs, keys, weights, dim)
    vec_data = np.concatenate([np.ascontiguousarray(v).ravel() for v in vecs])
    off = np.zeros(len(vecs), dtype=np.int64)
    for j in range(1, len(vecs)):
        off[j] = off[j - 1] + vecs[j - 1].size
    # offsets index vectors, not scalars: vector k of node j starts at
    # off[j] + k * d_j in vec_data
    out = np.zeros((dim, dim), dtype=np.complex128)
    _accumulate_nb(vec_data, off, dims, keys, weights, out)
    return out


# --------------------------------------------------------------------------
# Euclidean projection onto the probability simplex (sort-and-shift)
# --------------------------------------------------------------------------


def _simplex_np(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = np.nonzero(u - (css - 1.0) / j > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _simplex_nb(v):  # pragma: no cover
        n = v.size
        u = np.sort(v)[::-1]
        css = 0.0
        theta = 0.0
        for j in range(n):
            css += u[j]
            t = (css - 1.0) / (j + 1)
            if u[j] - t > 0.0:
                theta = t
        out = np.empty(n, np.float64)
        for i in range(n):
            x = v[i] - theta
            out[i] = x if x > 0.0 else 0.0
        return out


def project_to_simplex(values) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty 1-D real vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("entries must be finite")
    if numba_enabled():
        return _simplex_nb(v)
    return _simplex_np(v)
