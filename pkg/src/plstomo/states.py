"""State ensembles: Haar-random pure states, GHZ states, and GHZ states with
a depolarized link pair between two nodes.

Reproducibility: generators are derived from ``seeded_rng(seed, *stream)``;
the same (seed, stream) tuple always reproduces the same draws, and distinct
stream tuples give statistically independent streams.
"""

from __future__ import annotations

import numpy as np

from .designs import NodePartition
from .linalg import check_density_matrix, projector

RANK_EIG_TOL = 1e-12


def seeded_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for the given seed and stream indices."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(stream)))


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector: normalized complex-Gaussian draw."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase correction."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def ghz_state(n_qubits: int) -> np.ndarray:
    """(|0...0> + |1...1>)/sqrt(2) on n_qubits qubits."""
    if n_qubits < 2:
        raise ValueError(f"n_qubits must be >= 2, got {n_qubits}")
    psi = np.zeros(1 << n_qubits, dtype=np.complex128)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


class NoiseModel:
    """Depolarization strength and the affected adjacent qubit pair."""

    def __init__(self, strength: float, link: tuple[int, int]):
        if not 0.0 <= strength <= 1.0:
            raise ValueError(f"strength must be in [0, 1], got {strength}")
        q1, q2 = (int(link[0]), int(link[1]))
        if q2 != q1 + 1 or q1 < 0:
            raise ValueError(f"link must be an adjacent qubit pair, got {link}")
        self.strength = float(strength)
        self.link = (q1, q2)

    def __repr__(self):
        return f"NoiseModel(strength={self.strength}, link={self.link})"


def boundary_link(partition: NodePartition) -> tuple[int, int]:
    """The (last qubit of node 0, first qubit of node 1) pair, 0-based."""
    if partition.n_nodes < 2:
        raise ValueError("a link needs at least two nodes")
    n1 = partition.qubit_counts[0]
    return (n1 - 1, n1)


def depolarize_pair(rho, noise: NoiseModel) -> np.ndarray:
    """Two-qubit depolarizing channel on an adjacent pair:
    rho -> (1-p) rho + (p/4) I_pair (x) tr_pair(rho)."""
    rho = check_density_matrix(rho)
    n = rho.shape[0].bit_length() - 1
    if 1 << n != rho.shape[0]:
        raise ValueError("state dimension is not a power of two")
    q1, q2 = noise.link
    if q2 >= n:
        raise ValueError(f"link {noise.link} out of range for {n} qubits")
    p = noise.strength
    if p == 0.0:
        return rho
    dl = 1 << q1
    dr = 1 << (n - q2 - 1)
    t = rho.reshape(dl, 4, dr, dl, 4, dr)
    reduced = np.einsum("apbcpd->abcd", t)
    out = (1.0 - p) * t
    out += (p / 4.0) * np.einsum("pq,abcd->apbcqd", np.eye(4), reduced)
    return out.reshape(rho.shape)


def noisy_ghz(n_qubits: int, partition: NodePartition, strength: float) -> np.ndarray:
    """GHZ state on two nodes with a depolarized boundary pair, assembled in
    closed form: (1-p)|GHZ><GHZ| plus p/8 on the 8 diagonal entries whose
    non-link qubits are all 0 or all 1.

    Rank is exactly 8 for p > 0.
    """
    if partition.n_nodes != 2:
        raise ValueError("noisy_ghz is defined for exactly two nodes")
    if partition.n_qubits != n_qubits:
        raise ValueError("partition does not match n_qubits")
    if n_qubits < 3:
        raise ValueError("need n_qubits >= 3")
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    n = n_qubits
    rho = (1.0 - strength) * projector(ghz_state(n))
    if strength == 0.0:
        return rho
    q1, q2 = boundary_link(partition)
    rest = [q for q in range(n) if q not in (q1, q2)]
    for pair_bits in range(4):
        for rest_bit in (0, 1):
            idx = (pair_bits >> 1) << (n - 1 - q1) | (pair_bits & 1) << (n - 1 - q2)
            for q in rest:
                idx |= rest_bit << (n - 1 - q)
            rho[idx, idx] += strength / 8.0
    return rho


def locally_random_ghz(
    n_qubits: int, partition: NodePartition, strength: float, rng: np.random.Generator
) -> np.ndarray:
    """Noisy GHZ state conjugated by independent single-qubit Haar unitaries.

    Local rotations preserve the spectrum and the cross-node entanglement
    while scrambling basis alignment.
    """
    rho = noisy_ghz(n_qubits, partition, strength)
    u = haar_unitary(2, rng)
    for _ in range(n_qubits - 1):
        u = np.kron(u, haar_unitary(2, rng))
    return u @ rho @ u.conj().T


def state_rank(rho, tol: float = RANK_EIG_TOL) -> int:
    """Number of eigenvalues above tol."""
    return int(np.sum(np.linalg.eigvalsh(rho) > tol))
