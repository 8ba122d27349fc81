"""Per-node projective 2-designs from mutually unbiased bases, and the
separable POVM they induce on a multi-node system.

Flat outcome indexing: node j contributes a flat index k_j = basis_j * d_j +
outcome_j, and the global index is mixed-radix over nodes with node 0 most
significant: k = ((k_0 * m_1 + k_1) * m_2 + ...) + k_{M-1}.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import check_density_matrix, kron_list, projector

ORTHONORMAL_TOL = 1e-10
UNBIASED_TOL = 1e-9

# one irreducible polynomial over GF(2) per extension degree, bit i = coeff of x^i
_IRREDUCIBLE_POLY = {
    1: 0b11,          # x + 1
    2: 0b111,         # x^2 + x + 1
    3: 0b1011,        # x^3 + x + 1
    4: 0b10011,       # x^4 + x + 1
    5: 0b100101,      # x^5 + x^2 + 1
    6: 0b1000011,     # x^6 + x + 1
    7: 0b10000011,    # x^7 + x + 1
}

MAX_NODE_QUBITS = max(_IRREDUCIBLE_POLY)

_PAULI_1Q = {
    (0, 0): np.eye(2, dtype=np.complex128),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=np.complex128),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=np.complex128),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
}


def _gf_mul(a: int, b: int, k: int, poly: int) -> int:
    """Multiply in GF(2^k) with the given reduction polynomial."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> k:
            a ^= poly
    return r


def _gf_trace(x: int, k: int, poly: int) -> int:
    """Field trace down to GF(2): sum of the k Frobenius conjugates."""
    t = 0
    y = x
    for _ in range(k):
        t ^= y
        y = _gf_mul(y, y, k, poly)
    if t not in (0, 1):
        raise RuntimeError(f"trace of {x} landed outside GF(2); bad polynomial?")
    return t


def _pauli_label_classes(k: int) -> list[list[tuple[int, int]]]:
    """Partition the 4^k - 1 nontrivial Pauli labels (a, b) into 2^k + 1
    maximal commuting classes.

    The X part a is read in the power basis of GF(2^k); the Z part b in its
    trace-dual coordinates, so that members (alpha, lambda*alpha) of one class
    commute: the symplectic form reduces to tr(lambda*alpha*alpha') twice.
    """
    poly = _IRREDUCIBLE_POLY[k]
    d = 1 << k

    def dual_coords(beta: int) -> int:
        b = 0
        for i in range(k):
            if _gf_trace(_gf_mul(beta, 1 << i, k, poly), k, poly):
                b |= 1 << i
        return b

    classes = [[(0, b) for b in range(1, d)]]
    for lam in range(d):
        members = []
        for alpha in range(1, d):
            members.append((alpha, dual_coords(_gf_mul(lam, alpha, k, poly))))
        classes.append(members)
    return classes


def _independent_labels(members: Sequence[tuple[int, int]], k: int) -> list[tuple[int, int]]:
    """Pick k GF(2)-independent symplectic labels out of a commuting class."""
    rows: list[int] = []
    chosen: list[tuple[int, int]] = []
    for a, b in members:
        v = a | (b << k)
        for r in rows:
            v = min(v, v ^ r)
        if v:
            rows.append(v)
            chosen.append((a, b))
            if len(chosen) == k:
                return chosen
    raise RuntimeError(f"commuting class of rank < {k}")


def _pauli_matrix(a: int, b: int, k: int) -> np.ndarray:
    """Hermitian k-qubit Pauli for label (a, b); bit q of the label addresses
    the q-th least significant tensor slot, so Z-type labels are diagonal in
    natural binary order."""
    return kron_list(
        [_PAULI_1Q[((a >> q) & 1, (b >> q) & 1)] for q in reversed(range(k))]
    )


@dataclass(frozen=True)
class ProjectiveDesign:
    """A family of d+1 orthonormal bases whose union of rank-1 projectors is
    a projective 2-design.

    ``bases[b][:, x]`` is vector x of basis b; flat index ``k = b * dim + x``.
    """

    dim: int
    bases: np.ndarray

    def __post_init__(self):
        if self.bases.ndim != 3 or self.bases.shape[1:] != (self.dim, self.dim):
            raise ValueError(f"bases array has shape {self.bases.shape}")
        self.bases.setflags(write=False)

    @property
    def n_bases(self) -> int:
        return self.bases.shape[0]

    @property
    def n_vectors(self) -> int:
        return self.n_bases * self.dim

    def vector(self, flat_k: int) -> np.ndarray:
        b, x = divmod(int(flat_k), self.dim)
        return self.bases[b][:, x]

    def flat_vectors(self) -> np.ndarray:
        """(n_vectors, dim) array; row b*dim+x is vector x of basis b."""
        return np.transpose(self.bases, (0, 2, 1)).reshape(self.n_vectors, self.dim)


def _validate_mub(bases: np.ndarray, d: int) -> None:
    eye = np.eye(d)
    for b1 in range(bases.shape[0]):
        g = bases[b1].conj().T @ bases[b1]
        dev = np.max(np.abs(g - eye))
        if dev > ORTHONORMAL_TOL:
            raise RuntimeError(f"basis {b1} not orthonormal (deviation {dev:.3e})")
        for b2 in range(b1 + 1, bases.shape[0]):
            g = bases[b1].conj().T @ bases[b2]
            dev = np.max(np.abs(np.abs(g) ** 2 - 1.0 / d))
            if dev > UNBIASED_TOL:
                raise RuntimeError(
                    f"bases {b1},{b2} not mutually unbiased (deviation {dev:.3e})"
                )


@functools.lru_cache(maxsize=None)
def build_mubs(n_qubits: int) -> ProjectiveDesign:
    """Construct the d+1 mutually unbiased bases on n_qubits qubits (d = 2^n).

    Each commuting Pauli class is diagonalized jointly: a generic combination
    sum_i 3^i G_i of k independent class generators has 2^k distinct
    eigenvalues (3-adic separation), so its eigenbasis is the class eigenbasis
    and the output is deterministic. Every vector's global phase is fixed by
    making its largest-magnitude component real positive. Mutual unbiasedness
    is re-checked numerically; construction fails fast on violation.
    """
    k = int(n_qubits)
    if k < 1 or k > MAX_NODE_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_NODE_QUBITS}, got {n_qubits}")
    d = 1 << k
    bases = np.empty((d + 1, d, d), dtype=np.complex128)
    for ci, members in enumerate(_pauli_label_classes(k)):
        gens = _independent_labels(members, k)
        h = np.zeros((d, d), dtype=np.complex128)
        for i, (a, b) in enumerate(gens):
            h += (3.0**i) * _pauli_matrix(a, b, k)
        _, vecs = np.linalg.eigh(h)
        vecs = vecs[:, ::-1]  # descending eigenvalue: computational class
        # comes out in natural binary order
        for x in range(d):
            v = vecs[:, x]
            lead = v[np.argmax(np.abs(v))]
            vecs[:, x] = v * (lead.conjugate() / abs(lead))
        bases[ci] = vecs
    _validate_mub(bases, d)
    return ProjectiveDesign(dim=d, bases=bases)


def _swap_matrix(d: int) -> np.ndarray:
    eye = np.eye(d)
    return np.einsum("il,jk->ijkl", eye, eye).reshape(d * d, d * d)


def verify_2design(design: ProjectiveDesign, method: str = "auto") -> float:
    """Frobenius distance between the averaged second tensor moment of the
    design vectors and the Haar second moment (I + SWAP)/(d(d+1)).

    ``method="dense"`` materializes both d^2 x d^2 operators. ``"gram"``
    evaluates the identical norm from pairwise overlaps:
    ||A - B||_F^2 = (1/m^2) sum_{k,l} |<v_k|v_l>|^4 - 2/(d(d+1)).
    ``"auto"`` picks dense for d <= 32.
    """
    d = design.dim
    m = design.n_vectors
    if method == "auto":
        method = "dense" if d <= 32 else "gram"
    if method == "dense":
        v = design.flat_vectors()
        w = (v[:, :, None] * v[:, None, :]).reshape(m, d * d)
        second_moment = w.T @ w.conj() / m
        target = (np.eye(d * d) + _swap_matrix(d)) / (d * (d + 1))
        return float(np.linalg.norm(second_moment - target))
    if method == "gram":
        v = design.flat_vectors()
        vc = v.conj()
        chunk = max(1, (1 << 22) // max(m, 1))
        s4 = 0.0
        for start in range(0, m, chunk):
            g = vc[start : start + chunk] @ v.T
            a2 = g.real**2 + g.imag**2
            s4 += float((a2 * a2).sum())
        res2 = s4 / (m * m) - 2.0 / (d * (d + 1))
        return math.sqrt(max(res2, 0.0))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class NodePartition:
    """Ordered per-node qubit counts (node 0 = most significant factor)."""

    qubit_counts: tuple[int, ...]

    def __init__(self, qubit_counts):
        counts = tuple(int(c) for c in qubit_counts)
        if not counts:
            raise ValueError("partition must have at least one node")
        if any(c < 1 for c in counts):
            raise ValueError(f"every node needs >= 1 qubit, got {counts}")
        object.__setattr__(self, "qubit_counts", counts)

    @property
    def n_nodes(self) -> int:
        return len(self.qubit_counts)

    @property
    def n_qubits(self) -> int:
        return sum(self.qubit_counts)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(1 << c for c in self.qubit_counts)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def bases_per_node(self) -> tuple[int, ...]:
        return tuple(d + 1 for d in self.dims)

    @property
    def n_basis_tuples(self) -> int:
        return math.prod(self.bases_per_node)

    @property
    def design_sizes(self) -> tuple[int, ...]:
        return tuple(d * (d + 1) for d in self.dims)

    @property
    def n_outcomes(self) -> int:
        return math.prod(self.design_sizes)

    def __str__(self) -> str:
        return "(" + ",".join(str(c) for c in self.qubit_counts) + ")"


@dataclass(frozen=True)
class NodePovm:
    """Tensor product of per-node 2-designs, weighted to a POVM."""

    partition: NodePartition
    designs: tuple[ProjectiveDesign, ...]

    def __post_init__(self):
        if len(self.designs) != self.partition.n_nodes:
            raise ValueError("one design per node required")
        for dsg, d in zip(self.designs, self.partition.dims):
            if dsg.dim != d:
                raise ValueError(f"design dim {dsg.dim} does not match node dim {d}")

    @property
    def n_outcomes(self) -> int:
        return self.partition.n_outcomes

    @property
    def weight(self) -> float:
        return self.partition.dim / self.n_outcomes

    def element(self, key: Sequence[int]) -> np.ndarray:
        """POVM element for per-node flat keys (basis_j * d_j + outcome_j)."""
        return self.weight * kron_list(
            [projector(dsg.vector(kj)) for dsg, kj in zip(self.designs, key)]
        )

    def flat_index(self, key: Sequence[int]) -> int:
        idx = 0
        for kj, mj in zip(key, self.partition.design_sizes):
            idx = idx * mj + kj
        return idx


def node_povm(partition: NodePartition) -> NodePovm:
    if any(c > MAX_NODE_QUBITS for c in partition.qubit_counts):
        raise ValueError(f"nodes larger than {MAX_NODE_QUBITS} qubits are not supported")
    return NodePovm(partition, tuple(build_mubs(c) for c in partition.qubit_counts))


def _outcome_offsets(partition: NodePartition) -> np.ndarray:
    """Flat-index offsets of all outcome tuples for a fixed basis tuple."""
    strides = np.ones(partition.n_nodes, dtype=np.int64)
    sizes = partition.design_sizes
    for j in range(partition.n_nodes - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]
    off = np.zeros(1, dtype=np.int64)
    for j, dj in enumerate(partition.dims):
        off = (off[:, None] + np.arange(dj, dtype=np.int64)[None, :] * strides[j]).ravel()
    return off


def _basis_offset(partition: NodePartition, basis_tuple: Sequence[int]) -> int:
    idx = 0
    for bj, dj, mj in zip(basis_tuple, partition.dims, partition.design_sizes):
        idx = idx * mj + bj * dj
    return idx


def conditional_probabilities(rho: np.ndarray, unitary: np.ndarray) -> np.ndarray:
    """diag(U^dagger rho U) as a clamped real vector."""
    p = np.einsum("ij,ik,kj->j", unitary.conj(), rho, unitary, optimize=True).real
    return np.where(p < 0.0, 0.0, p)


def povm_probabilities(povm: NodePovm, rho) -> np.ndarray:
    """Outcome distribution of the node POVM on a state, flat-indexed."""
    part = povm.partition
    rho = check_density_matrix(rho)
    if rho.shape[0] != part.dim:
        raise ValueError(f"state dim {rho.shape[0]} does not match partition {part}")
    weight = 1.0 / part.n_basis_tuples
    out_off = _outcome_offsets(part)
    p = np.zeros(part.n_outcomes)
    for bt in np.ndindex(part.bases_per_node):
        u = kron_list([dsg.bases[bj] for dsg, bj in zip(povm.designs, bt)])
        cond = conditional_probabilities(rho, u)
        p[_basis_offset(part, bt) + out_off] = weight * cond
    return p


def design_to_json(design: ProjectiveDesign) -> dict:
    return {
        "dim": design.dim,
        "bases": [
            [[[float(a.real), float(a.imag)] for a in basis[:, x]] for x in range(design.dim)]
            for basis in design.bases
        ],
    }


def design_from_json(obj: dict) -> ProjectiveDesign:
    d = int(obj["dim"])
    raw = obj["bases"]
    bases = np.empty((len(raw), d, d), dtype=np.complex128)
    for b, basis in enumerate(raw):
        for x, vec in enumerate(basis):
            bases[b][:, x] = [complex(re, im) for re, im in vec]
    return ProjectiveDesign(dim=d, bases=bases)


def save_design(design: ProjectiveDesign, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_json(design), fh)


def load_design(path) -> ProjectiveDesign:
    with open(path, encoding="utf-8") as fh:
        return design_from_json(json.load(fh))
