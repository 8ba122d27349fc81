"""Distributed acquisition harness: per-node actors report shot-tagged local
outcomes over a record stream, and an aggregator joins them into the global
frequency table.

A coordinator performs the joint sampling (local marginals cannot reproduce
cross-node correlations in a simulator), then each node actor sees only its
own (basis, outcome) per shot. Aggregation is order-independent and the
resulting table is identical to the centralized sampler's for the same seed.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass

from .designs import NodePartition, node_povm
from .measurement import FrequencyTable, sample_frequencies


class SessionError(ValueError):
    pass


class DuplicateRecordError(SessionError):
    pass


class MissingRecordError(SessionError):
    pass


@dataclass(frozen=True)
class OutcomeRecord:
    shot_id: int
    node_id: int  # 1-based
    basis_id: int
    outcome: int


@dataclass
class SessionConfig:
    partition: NodePartition
    n_shots: int
    seed: int
    stream: int = 0
    transport: str = "in-process"  # "in-process" | "stream"


def encode_record(rec: OutcomeRecord) -> str:
    """``shot,node,basis,outcome`` as decimal integers, newline-terminated."""
    return f"{rec.shot_id},{rec.node_id},{rec.basis_id},{rec.outcome}\n"


def decode_record(line: str, partition: NodePartition | None = None) -> OutcomeRecord:
    """Parse one record line; reports the offending column on failure. When a
    partition is given, node/basis/outcome ranges are validated against it."""
    cols = line.strip().split(",")
    names = ("shot_id", "node_id", "basis_id", "outcome")
    if len(cols) != 4:
        raise SessionError(
            f"malformed record {line.strip()!r}: expected 4 fields, got {len(cols)}"
            + (f" (missing {', '.join(names[len(cols):])})" if len(cols) < 4 else "")
        )
    vals = []
    for pos, (name, tok) in enumerate(zip(names, cols), start=1):
        try:
            v = int(tok)
        except ValueError:
            raise SessionError(
                f"malformed record {line.strip()!r}: column {pos} ({name}) "
                f"is not an integer: {tok!r}"
            ) from None
        if v < 0:
            raise SessionError(
                f"malformed record {line.strip()!r}: column {pos} ({name}) is negative"
            )
        vals.append(v)
    rec = OutcomeRecord(*vals)
    if partition is not None:
        _check_ranges(rec, partition)
    return rec


def _check_ranges(rec: OutcomeRecord, partition: NodePartition) -> None:
    m = partition.n_nodes
    if not 1 <= rec.node_id <= m:
        raise SessionError(f"node_id {rec.node_id} out of range 1..{m}")
    d = partition.dims[rec.node_id - 1]
    if not 0 <= rec.basis_id <= d:
        raise SessionError(f"basis_id {rec.basis_id} out of range 0..{d}")
    if not 0 <= rec.outcome < d:
        raise SessionError(f"outcome {rec.outcome} out of range 0..{d - 1}")


def session_manifest(config: SessionConfig) -> str:
    dims = ",".join(str(d) for d in config.partition.dims)
    return (
        f"SESSION N={config.n_shots} M={config.partition.n_nodes} "
        f"dims={dims} seed={config.seed}"
    )


def parse_manifest(line: str) -> dict:
    toks = line.split()
    if not toks or toks[0] != "SESSION":
        raise SessionError(f"not a session manifest: {line!r}")
    fields = dict(tok.split("=", 1) for tok in toks[1:])
    return {
        "n_shots": int(fields["N"]),
        "n_nodes": int(fields["M"]),
        "dims": tuple(int(d) for d in fields["dims"].split(",")),
        "seed": int(fields["seed"]),
    }


def _joint_shot_assignments(rho, config: SessionConfig) -> list[tuple]:
    """Coordinator step: joint sampling, expanded to per-shot key assignments
    in sorted key order (deterministic, seed-equal to the centralized path)."""
    povm = node_povm(config.partition)
    table = sample_frequencies(rho, povm, config.n_shots, config.seed, config.stream)
    shots = []
    for (basis, outcome), cnt in sorted(table.counts.items()):
        shots.extend((basis, outcome) for _ in range(int(cnt)))
    return shots


def node_records(shots, node_id: int) -> list[OutcomeRecord]:
    """The local view of one node: its (basis, outcome) per shot."""
    return [
        OutcomeRecord(shot_id, node_id, basis[node_id - 1], outcome[node_id - 1])
        for shot_id, (basis, outcome) in enumerate(shots)
    ]


def aggregate_records(
    records, partition: NodePartition, n_shots: int
) -> FrequencyTable:
    """Join shot-tagged local records into the global frequency table.

    ``records`` may be OutcomeRecord objects or encoded lines. Raises
    DuplicateRecordError / MissingRecordError on inconsistent streams;
    arrival order is irrelevant.
    """
    m = partition.n_nodes
    per_shot: dict[int, dict[int, OutcomeRecord]] = {}
    for item in records:
        rec = decode_record(item, partition) if isinstance(item, str) else item
        if isinstance(item, OutcomeRecord):
            _check_ranges(rec, partition)
        if rec.shot_id >= n_shots:
            raise SessionError(f"shot_id {rec.shot_id} out of range 0..{n_shots - 1}")
        slot = per_shot.setdefault(rec.shot_id, {})
        if rec.node_id in slot:
            raise DuplicateRecordError(
                f"duplicate record for (shot_id={rec.shot_id}, node_id={rec.node_id})"
            )
        slot[rec.node_id] = rec
    counts: dict = {}
    for shot_id in range(n_shots):
        slot = per_shot.get(shot_id)
        if slot is None or len(slot) < m:
            missing = (
                sorted(set(range(1, m + 1)) - set(slot)) if slot else list(range(1, m + 1))
            )
            raise MissingRecordError(
                f"shot_id {shot_id} missing report from node(s) {missing}"
            )
        basis = tuple(slot[j].basis_id for j in range(1, m + 1))
        outcome = tuple(slot[j].outcome for j in range(1, m + 1))
        key = (basis, outcome)
        counts[key] = counts.get(key, 0) + 1
    return FrequencyTable(partition, n_shots, counts, mode="sampled")


def run_distributed_session(rho, config: SessionConfig) -> FrequencyTable:
    """Full session: coordinator sampling, node actors emitting records over
    a shared stream, aggregation into a FrequencyTable."""
    if config.transport not in ("in-process", "stream"):
        raise ValueError(f"unknown transport {config.transport!r}")
    if config.n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    shots = _joint_shot_assignments(rho, config)
    chan: queue.Queue = queue.Queue()
    encode = config.transport == "stream"

    def actor(node_id: int):
        for rec in node_records(shots, node_id):
            chan.put(encode_record(rec) if encode else rec)

    threads = [
        threading.Thread(target=actor, args=(j,))
        for j in range(1, config.partition.n_nodes + 1)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    items = []
    while not chan.empty():
        items.append(chan.get())
    return aggregate_records(items, config.partition, config.n_shots)


def session_to_lines(rho, config: SessionConfig) -> list[str]:
    """Manifest line followed by every node's encoded records (for export)."""
    shots = _joint_shot_assignments(rho, config)
    lines = [session_manifest(config)]
    for node_id in range(1, config.partition.n_nodes + 1):
        lines.extend(encode_record(r).rstrip("\n") for r in node_records(shots, node_id))
    return lines


def replay_session(lines, partition: NodePartition | None = None) -> FrequencyTable:
    """Rebuild the frequency table from an exported manifest + record lines."""
    lines = [ln for ln in (l.rstrip("\n") for l in lines) if ln.strip()]
    if not lines:
        raise SessionError("empty session export")
    meta = parse_manifest(lines[0])
    if partition is None:
        qubit_counts = tuple(d.bit_length() - 1 for d in meta["dims"])
        partition = NodePartition(qubit_counts)
    return aggregate_records(lines[1:], partition, meta["n_shots"])
