"""Shot sampling of the node POVM and the frequency-table container.

Sampling is two-stage: shots are first allocated to basis tuples (uniform
weights 1/prod(d_j+1), which is exactly the POVM element weight), then each
basis tuple's shots are drawn from the conditional outcome distribution
diag(U_b^dagger rho U_b). Each basis tuple uses its own RNG stream derived
from (seed, stream, basis index), so results do not depend on evaluation
order or parallelism.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .designs import (
    NodePartition,
    NodePovm,
    ProjectiveDesign,
    conditional_probabilities,
    povm_probabilities,
)
from .linalg import check_density_matrix, kron_list
from .states import NoiseModel, depolarize_pair, seeded_rng

Key = tuple[tuple[int, ...], tuple[int, ...]]  # (basis tuple, outcome tuple)

EXACT_PROB_TOL = 1e-12


@dataclass
class FrequencyTable:
    """Counts (or exact probabilities) keyed by (basis tuple, outcome tuple)."""

    partition: NodePartition
    n_shots: int
    counts: dict[Key, float]
    mode: str = "sampled"  # "sampled" | "exact"
    basis_shots: dict[tuple[int, ...], int] | None = None  # equal allocation only

    def __post_init__(self):
        if self.mode not in ("sampled", "exact"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled":
            total = sum(self.counts.values())
            if total != self.n_shots:
                raise ValueError(f"counts sum to {total}, expected N={self.n_shots}")
        else:
            total = math.fsum(self.counts.values())
            if abs(total - 1.0) > EXACT_PROB_TOL:
                raise ValueError(f"exact-mode probabilities sum to {total}")

    def frequencies(self) -> dict[Key, float]:
        """Normalized frequencies f_k (estimates of the POVM probabilities)."""
        if self.mode == "exact":
            return dict(self.counts)
        if self.basis_shots is not None:
            t = self.partition.n_basis_tuples
            return {
                key: cnt / (t * self.basis_shots[key[0]])
                for key, cnt in self.counts.items()
                if self.basis_shots[key[0]] > 0
            }
        return {key: cnt / self.n_shots for key, cnt in self.counts.items()}

    def max_frequency_deviation(self, probabilities: np.ndarray) -> float:
        """Max-norm distance between table frequencies and a flat probability
        vector (for convergence diagnostics)."""
        freqs = self.frequencies()
        dev = 0.0
        for flat, p in enumerate(probabilities):
            key = _key_from_flat(self.partition, flat)
            dev = max(dev, abs(freqs.get(key, 0.0) - p))
        return dev


def _key_from_flat(partition: NodePartition, flat: int) -> Key:
    ks = []
    for mj in reversed(partition.design_sizes):
        flat, kj = divmod(flat, mj)
        ks.append(kj)
    ks.reverse()
    basis = tuple(k // d for k, d in zip(ks, partition.dims))
    outcome = tuple(k % d for k, d in zip(ks, partition.dims))
    return basis, outcome


def _flat_from_key(partition: NodePartition, key: Key) -> int:
    basis, outcome = key
    flat = 0
    for b, x, d, mj in zip(basis, outcome, partition.dims, partition.design_sizes):
        flat = flat * mj + b * d + x
    return flat


def iter_basis_tuples(partition: NodePartition):
    return itertools.product(*(range(nb) for nb in partition.bases_per_node))


def _check_state(rho, povm: NodePovm) -> np.ndarray:
    rho = check_density_matrix(rho)
    if rho.shape[0] != povm.partition.dim:
        raise ValueError(
            f"state dim {rho.shape[0]} does not match partition {povm.partition}"
        )
    return rho


def _conditional(rho, povm: NodePovm, basis_tuple) -> np.ndarray:
    u = kron_list([dsg.bases[b] for dsg, b in zip(povm.designs, basis_tuple)])
    p = conditional_probabilities(rho, u)
    return p / p.sum()


def _outcome_tuple(partition: NodePartition, flat_outcome: int) -> tuple[int, ...]:
    xs = []
    for d in reversed(partition.dims):
        flat_outcome, x = divmod(flat_outcome, d)
        xs.append(x)
    return tuple(reversed(xs))


def _stream_tuple(stream) -> tuple[int, ...]:
    return (int(stream),) if np.isscalar(stream) else tuple(int(s) for s in stream)


def sample_frequencies(
    rho,
    povm: NodePovm,
    n_shots: int,
    seed: int,
    stream=0,
    allocation: str = "multinomial",
) -> FrequencyTable:
    """Simulate N shots of the node POVM on a state.

    ``allocation="multinomial"`` draws the per-basis-tuple shot counts from
    the uniform multinomial (the POVM semantics); ``"equal"`` assigns
    floor(N/T) shots per tuple with the remainder round-robin, for variance
    studies. Deterministic for fixed (seed, stream); ``stream`` may be an int
    or a tuple of ints.
    """
    rho = _check_state(rho, povm)
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    part = povm.partition
    sid = _stream_tuple(stream)
    tuples = list(iter_basis_tuples(part))
    t = len(tuples)
    basis_shots = None
    if allocation == "multinomial":
        alloc_rng = seeded_rng(seed, *sid, 0)
        alloc = alloc_rng.multinomial(n_shots, np.full(t, 1.0 / t))
    elif allocation == "equal":
        alloc = np.full(t, n_shots // t, dtype=np.int64)
        alloc[: n_shots % t] += 1
        basis_shots = {bt: int(a) for bt, a in zip(tuples, alloc)}
    else:
        raise ValueError(f"unknown allocation {allocation!r}")
    counts: dict[Key, float] = {}
    for idx, bt in enumerate(tuples):
        nb = int(alloc[idx])
        if nb == 0:
            continue
        cond = _conditional(rho, povm, bt)
        draw = seeded_rng(seed, *sid, 1 + idx).multinomial(nb, cond)
        for flat_x in np.nonzero(draw)[0]:
            counts[(bt, _outcome_tuple(part, int(flat_x)))] = int(draw[flat_x])
    return FrequencyTable(part, n_shots, counts, mode="sampled", basis_shots=basis_shots)


def exact_frequencies(rho, povm: NodePovm) -> FrequencyTable:
    """Infinite-shot limit: frequencies equal the POVM probabilities."""
    rho = _check_state(rho, povm)
    probs = povm_probabilities(povm, rho)
    part = povm.partition
    counts: dict[Key, float] = {}
    for flat in np.nonzero(probs)[0]:
        counts[_key_from_flat(part, int(flat))] = float(probs[flat])
    return FrequencyTable(part, 0, counts, mode="exact")


def sample_frequencies_noisy_global(
    rho,
    design: ProjectiveDesign | NodePovm,
    n_shots: int,
    noise: NoiseModel,
    seed: int,
    stream=0,
) -> FrequencyTable:
    """Global (single-node) design measurement whose implementation corrupts
    the state: one depolarization of the link pair per measured copy, then an
    ideal global measurement."""
    if isinstance(design, ProjectiveDesign):
        n = design.dim.bit_length() - 1
        povm = NodePovm(NodePartition((n,)), (design,))
    else:
        povm = design
    if povm.partition.n_nodes != 1:
        raise ValueError("noisy-global sampling requires a single-node design")
    noisy = depolarize_pair(rho, noise) if noise.strength > 0 else rho
    return sample_frequencies(noisy, povm, n_shots, seed, stream)


# ---------------------------------------------------------------------------
# line-oriented text serialization
# ---------------------------------------------------------------------------


def table_to_lines(table: FrequencyTable) -> list[str]:
    """Header ``N=<count> partition=<n1,...,nM>`` then one record per key,
    ``b1,..,bM|x1,..,xM|count``, in sorted key order."""
    qc = ",".join(str(c) for c in table.partition.qubit_counts)
    header = f"N={table.n_shots} partition={qc}"
    if table.mode == "exact":
        header += " mode=exact"
    elif table.basis_shots is not None:
        header += " alloc=equal"
    lines = [header]
    for (basis, outcome), cnt in sorted(table.counts.items()):
        b = ",".join(str(v) for v in basis)
        x = ",".join(str(v) for v in outcome)
        c = repr(float(cnt)) if table.mode == "exact" else str(int(cnt))
        lines.append(f"{b}|{x}|{c}")
    return lines


def table_from_lines(lines) -> FrequencyTable:
    lines = [ln.rstrip("\n") for ln in lines if ln.strip()]
    if not lines:
        raise ValueError("empty table")
    head = lines[0].split()
    fields = dict(tok.split("=", 1) for tok in head)
    if "N" not in fields or "partition" not in fields:
        raise ValueError(f"malformed header: {lines[0]!r}")
    part = NodePartition(tuple(int(c) for c in fields["partition"].split(",")))
    n_shots = int(fields["N"])
    mode = fields.get("mode", "sampled")
    equal = fields.get("alloc") == "equal"
    counts: dict[Key, float] = {}
    for ln in lines[1:]:
        cols = ln.split("|")
        if len(cols) != 3:
            raise ValueError(f"malformed record (expected 3 fields): {ln!r}")
        basis = tuple(int(v) for v in cols[0].split(","))
        outcome = tuple(int(v) for v in cols[1].split(","))
        if len(basis) != part.n_nodes or len(outcome) != part.n_nodes:
            raise ValueError(f"record arity does not match partition: {ln!r}")
        counts[(basis, outcome)] = float(cols[2]) if mode == "exact" else int(cols[2])
    basis_shots = None
    if equal:
        basis_shots = {bt: 0 for bt in iter_basis_tuples(part)}
        for (bt, _), cnt in counts.items():
            basis_shots[bt] += int(cnt)
    return FrequencyTable(part, n_shots, counts, mode=mode, basis_shots=basis_shots)


def write_table(path, table: FrequencyTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(table_to_lines(table)) + "\n")


def read_table(path) -> FrequencyTable:
    with open(path, encoding="utf-8") as fh:
        return table_from_lines(fh)
