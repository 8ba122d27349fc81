"""Least-squares state estimation from node-POVM frequencies and its
projection onto the density-matrix set.

The closed-form estimator accumulates, over observed keys only,
f_k * kron_j[(d_j+1)|v><v| - I_j]; each term has unit trace, so the sum is a
unit-trace Hermitian (generally indefinite) matrix. The normal-equations
solver rebuilds the same estimate by dense linear algebra and serves as the
oracle for the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import accumulate_ls_terms, project_to_simplex
from .designs import NodePartition, NodePovm
from .linalg import check_hermitian, eigh_desc, partial_trace
from .measurement import FrequencyTable, _flat_from_key, _key_from_flat

RANK_TOL = 1e-10
ORACLE_MAX_DIM = 16


@dataclass
class LsEstimate:
    """Unit-trace Hermitian least-squares reconstruction (not necessarily
    positive semidefinite)."""

    matrix: np.ndarray
    partition: NodePartition
    n_shots: int


@dataclass
class PlsEstimate:
    """Physical estimate: nearest density matrix to the LS estimate in
    Hilbert-Schmidt distance, plus the resulting rank estimate."""

    state: np.ndarray
    rank_estimate: int


def _check_partition(freqs: FrequencyTable, povm: NodePovm) -> None:
    if freqs.partition != povm.partition:
        raise ValueError(
            f"frequency table partition {freqs.partition} does not match "
            f"POVM partition {povm.partition}"
        )


def ls_estimator(freqs: FrequencyTable, povm: NodePovm) -> LsEstimate:
    """Closed-form least-squares estimate from a frequency table."""
    _check_partition(freqs, povm)
    part = povm.partition
    items = sorted(freqs.frequencies().items())
    keys = np.empty((len(items), part.n_nodes), dtype=np.int64)
    weights = np.empty(len(items))
    for t, ((basis, outcome), f) in enumerate(items):
        keys[t] = [b * d + x for b, x, d in zip(basis, outcome, part.dims)]
        weights[t] = f
    vecs = [dsg.flat_vectors() for dsg in povm.designs]
    matrix = accumulate_ls_terms(vecs, keys, weights)
    return LsEstimate(matrix=matrix, partition=part, n_shots=freqs.n_shots)


def inverse_frame_map(x, partition: NodePartition) -> np.ndarray:
    """Inverse of the measurement frame operator, applied node-wise:
    (m/d) * tensor extension of X_j -> (d_j+1) X_j - tr(X_j) I_j."""
    x = check_hermitian(x)
    if x.shape[0] != partition.dim:
        raise ValueError(f"dim {x.shape[0]} does not match partition {partition}")
    dims = partition.dims
    M = partition.n_nodes
    out = np.asarray(x, dtype=np.complex128)
    for j in range(M):
        keep = [i for i in range(M) if i != j]
        traced = partial_trace(out, dims, keep)
        # reinsert an identity factor at slot j
        left = int(np.prod(dims[:j], dtype=np.int64))
        right = int(np.prod(dims[j + 1 :], dtype=np.int64))
        t = traced.reshape(left, right, left, right)
        ins = np.einsum("pq,abcd->apbcqd", np.eye(dims[j]), t)
        out = (dims[j] + 1) * out - ins.reshape(out.shape)
    scale = partition.n_outcomes / partition.dim
    return scale * out


def _hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) real basis of the d-dim Hermitian space."""
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            basis.append(e)
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = -1j / np.sqrt(2)
            e[j, i] = 1j / np.sqrt(2)
            basis.append(e)
    return basis


def ls_via_normal_equations(freqs: FrequencyTable, povm: NodePovm) -> LsEstimate:
    """Oracle least-squares solve: vectorize the Hermitian space, build the
    full design matrix over all m outcomes, and solve by lstsq. Limited to
    small dimensions."""
    _check_partition(freqs, povm)
    part = povm.partition
    d = part.dim
    if d > ORACLE_MAX_DIM:
        raise ValueError(f"normal-equations oracle limited to dim <= {ORACLE_MAX_DIM}")
    basis = _hermitian_basis(d)
    m = part.n_outcomes
    elements = np.empty((m, d * d), dtype=np.complex128)
    for flat in range(m):
        key = _key_from_flat(part, flat)
        per_node = [b * dj + x for b, x, dj in zip(key[0], key[1], part.dims)]
        elements[flat] = povm.element(per_node).ravel()
    # tr(E @ B) = E.ravel() . B.T.ravel()
    bmat = np.stack([e.T.ravel() for e in basis], axis=1)
    design = (elements @ bmat).real
    f = np.zeros(m)
    for key, val in freqs.frequencies().items():
        f[_flat_from_key(part, key)] = val
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    matrix = np.zeros((d, d), dtype=np.complex128)
    for a, e in enumerate(basis):
        matrix += coef[a] * e
    return LsEstimate(matrix=matrix, partition=part, n_shots=freqs.n_shots)


def project_simplex(values) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    return project_to_simplex(values)


def pls_estimate(ls: LsEstimate) -> PlsEstimate:
    """Project the LS estimate onto unit-trace PSD matrices: eigendecompose,
    project the spectrum onto the simplex, reassemble."""
    w, v = eigh_desc(ls.matrix, tol=1e-9)
    w_proj = project_simplex(w)
    state = (v * w_proj) @ v.conj().T
    rank = int(np.sum(w_proj > RANK_TOL))
    return PlsEstimate(state=state, rank_estimate=max(rank, 1))
