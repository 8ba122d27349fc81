"""Dense complex/Hermitian matrix primitives.

Index convention used throughout the package: subsystem 0 occupies the most
significant tensor factor, i.e. a composite basis index factors as
``i = i_0 * (d_1 * ... * d_{M-1}) + i_1 * (d_2 * ... ) + ... + i_{M-1}``.
Subsystem index sets are 0-based.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
UNIT_NORM_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-9


def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a 2-D complex128 array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={m.ndim}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix entries must be finite")
    return m


def as_square_matrix(a) -> np.ndarray:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermiticity_defect(a: np.ndarray) -> float:
    """Max entrywise |A - A^dagger|."""
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = as_square_matrix(a)
    defect = hermiticity_defect(m)
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e} > {tol:.1e})")
    return m


def check_density_matrix(rho, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of a state matrix."""
    m = check_hermitian(rho, tol)
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace is {tr}, expected 1 within {TRACE_TOL:.1e}")
    lo = float(np.linalg.eigvalsh(m)[0])
    if lo < -PSD_TOL:
        raise ValueError(f"minimum eigenvalue {lo:.3e} below -{PSD_TOL:.1e}")
    return m


def check_pure_state(psi) -> np.ndarray:
    """Validate a unit-norm complex state vector."""
    v = np.asarray(psi, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError("expected a 1-D amplitude vector")
    if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
        raise ValueError("amplitudes must be finite")
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"state norm is {nrm}, expected 1 within {UNIT_NORM_TOL:.1e}")
    return v


def projector(psi) -> np.ndarray:
    """|psi><psi| for a (not necessarily normalized) vector."""
    v = np.asarray(psi, dtype=np.complex128)
    return np.outer(v, v.conj())


def kron_list(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of a nonempty list of square matrices, in list order.

    Factor 0 ends up as the most significant subsystem.
    """
    if len(factors) == 0:
        raise ValueError("kron_list requires at least one factor")
    out = as_square_matrix(factors[0])
    for f in factors[1:]:
        out = np.kron(out, as_square_matrix(f))
    return out


def _check_subsystems(rho: np.ndarray, dims: Sequence[int], subset: Iterable[int]):
    dims = tuple(int(d) for d in dims)
    total = math.prod(dims)
    if rho.shape[0] != total:
        raise ValueError(
            f"matrix dimension {rho.shape[0]} does not match subsystem dims {dims}"
        )
    subset = tuple(sorted(set(int(i) for i in subset)))
    for i in subset:
        if i < 0 or i >= len(dims):
            raise ValueError(f"subsystem index {i} out of range for {len(dims)} subsystems")
    return dims, subset


def partial_trace(rho, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out all subsystems not listed in ``keep`` (0-based indices)."""
    m = as_square_matrix(rho)
    dims, keep = _check_subsystems(m, dims, keep)
    M = len(dims)
    row = [chr(ord("a") + i) for i in range(M)]
    col = [row[i] if i not in keep else chr(ord("a") + M + i) for i in range(M)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    sub = "".join(row) + "".join(col) + "->" + "".join(out)
    t = np.einsum(sub, m.reshape(dims + dims))
    kept_dim = math.prod(dims[i] for i in keep)
    return t.reshape(kept_dim, kept_dim)


def partial_transpose(rho, dims: Sequence[int], transposed: Iterable[int]) -> np.ndarray:
    """Transpose the listed subsystems (0-based indices), leaving the rest."""
    m = as_square_matrix(rho)
    dims, transposed = _check_subsystems(m, dims, transposed)
    M = len(dims)
    t = m.reshape(dims + dims)
    perm = list(range(2 * M))
    for i in transposed:
        perm[i], perm[M + i] = perm[M + i], perm[i]
    return t.transpose(perm).reshape(m.shape)


def eigh_desc(a, tol: float = HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, V)`` with ``a = V @ diag(w) @ V.conj().T`` and column
    ``V[:, i]`` belonging to ``w[i]``.
    """
    m = check_hermitian(a, tol)
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def operator_norm(a) -> float:
    """Largest |eigenvalue| of a Hermitian matrix."""
    m = check_hermitian(a)
    w = np.linalg.eigvalsh(m)
    return float(max(abs(w[0]), abs(w[-1])))


def trace_norm(a) -> float:
    """Sum of singular values."""
    m = as_square_matrix(a)
    return float(np.linalg.svd(m, compute_uv=False).sum())
