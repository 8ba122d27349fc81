"""Batch command-line front end.

Subcommands: verify-designs, simulate, fit, bounds, plot, session. The
simulate engine is exposed as ``run_experiment`` for library use; its CSV
schema (columns and order) is a stable contract:

    partition,N,state_index,trace_error,negativity_error,bound_value

Partitions are rendered with dashes (e.g. ``2-1``) so CSV fields never need
quoting. Worker count for the simulate pool comes from PLSTOMO_WORKERS
(default 1); per-item RNG streams are derived from (seed, state, partition,
N) indices, so results do not depend on scheduling.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (
    effective_dimension,
    error_bound,
    failure_probability,
    fit_scaling,
    negativity_error_bound,
    negativity_qubit_split,
    sample_complexity,
    truncation_residual,
)
from .designs import NodePartition, build_mubs, node_povm, verify_2design
from .estimator import ls_estimator, pls_estimate
from .linalg import operator_norm, projector, trace_norm
from .measurement import sample_frequencies, sample_frequencies_noisy_global
from .session import SessionConfig, replay_session, run_distributed_session, session_to_lines
from .states import (
    NoiseModel,
    boundary_link,
    haar_state,
    locally_random_ghz,
    noisy_ghz,
    seeded_rng,
    state_rank,
)

MAX_QUBITS = 7
CSV_COLUMNS = ("partition", "N", "state_index", "trace_error", "negativity_error", "bound_value")

ENSEMBLES = ("haar", "noisy_ghz", "locally_random_ghz")

# stream-id namespaces so state generation and sampling never collide
_STATE_STREAM = 1
_SAMPLE_STREAM = 2


@dataclass
class ExperimentConfig:
    n_qubits: int
    partitions: list[tuple[int, ...]]
    ensemble: str = "haar"
    num_states: int = 20
    shots: list[int] = field(default_factory=lambda: [100_000])
    lam: float = 0.0
    delta: float = 0.01
    seed: int = 0
    output: str = "simulation.csv"
    state_split: int | None = None  # qubits in node 1, GHZ ensembles
    paper_scale: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.n_qubits > MAX_QUBITS:
            raise ValueError(
                f"n_qubits={self.n_qubits} rejected: dense simulation beyond "
                f"{MAX_QUBITS} qubits is infeasible here"
            )
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"ensemble must be one of {ENSEMBLES}")
        if self.num_states < 1:
            raise ValueError("num_states must be >= 1")
        if not self.shots:
            raise ValueError("need at least one shot count")
        for p in self.partitions:
            if sum(p) != self.n_qubits:
                raise ValueError(f"partition {p} does not sum to n_qubits={self.n_qubits}")
        if self.ensemble != "haar":
            if self.n_qubits < 3:
                raise ValueError("GHZ ensembles need n_qubits >= 3")
            split = self.state_split
            if split is None or not 1 <= split < self.n_qubits:
                raise ValueError(
                    "GHZ ensembles need state_split in 1..n_qubits-1 "
                    "(qubits in the first node)"
                )
        return self


def config_from_json(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    kwargs = {}
    rename = {"lambda": "lam"}
    for key, val in raw.items():
        kwargs[rename.get(key, key)] = val
    if "partitions" in kwargs:
        kwargs["partitions"] = [tuple(p) for p in kwargs["partitions"]]
    return ExperimentConfig(**kwargs)


@dataclass
class SimRecord:
    """One (state, partition, N) tomography run."""

    partition: tuple[int, ...]
    n_shots: int
    state_index: int
    trace_error: float
    negativity_error: float | None
    bound_value: float
    op_error: float
    prop4_bound: float
    true_rank: int


def _make_state(config: ExperimentConfig, index: int) -> np.ndarray:
    rng = seeded_rng(config.seed, _STATE_STREAM, index)
    if config.ensemble == "haar":
        return projector(haar_state(1 << config.n_qubits, rng))
    split = NodePartition((config.state_split, config.n_qubits - config.state_split))
    if config.ensemble == "noisy_ghz":
        return noisy_ghz(config.n_qubits, split, config.lam)
    return locally_random_ghz(config.n_qubits, split, config.lam, rng)


def run_experiment(config: ExperimentConfig) -> list[SimRecord]:
    """Tomography of every (state, partition, N) cell; deterministic per seed."""
    config.validate()
    partitions = [NodePartition(p) for p in config.partitions]
    povms = [node_povm(p) for p in partitions]
    states = [_make_state(config, s) for s in range(config.num_states)]
    ranks = [state_rank(rho) for rho in states]

    ghz_like = config.ensemble != "haar"
    if ghz_like:
        state_split = config.state_split
        noise = NoiseModel(
            config.lam,
            boundary_link(NodePartition((state_split, config.n_qubits - state_split))),
        )
        true_negs = [negativity_qubit_split(rho, state_split) for rho in states]
    else:
        true_negs = [None] * len(states)

    def neg_split_for(part: NodePartition) -> int | None:
        if ghz_like:
            return config.state_split
        if part.n_nodes == 2:
            return part.qubit_counts[0]
        return None

    def run_cell(item) -> SimRecord:
        p_idx, n_idx, s_idx = item
        part, povm = partitions[p_idx], povms[p_idx]
        n = config.shots[n_idx]
        rho = states[s_idx]
        stream = (_SAMPLE_STREAM, s_idx, p_idx, n_idx)
        if ghz_like and config.lam > 0 and part.n_nodes == 1:
            table = sample_frequencies_noisy_global(
                rho, povm.designs[0], n, noise, config.seed, stream
            )
        else:
            table = sample_frequencies(rho, povm, n, config.seed, stream)
        est = ls_estimator(table, povm)
        pls = pls_estimate(est)
        trace_err = trace_norm(rho - pls.state)
        split = neg_split_for(part)
        neg_err = None
        if split is not None:
            true_neg = (
                true_negs[s_idx]
                if true_negs[s_idx] is not None
                else negativity_qubit_split(rho, split)
            )
            neg_err = abs(true_neg - negativity_qubit_split(pls.state, split))
        r = ranks[s_idx]
        op_err = operator_norm(rho - est.matrix)
        lam_r = min(truncation_residual(rho, r), truncation_residual(pls.state, r))
        return SimRecord(
            partition=part.qubit_counts,
            n_shots=n,
            state_index=s_idx,
            trace_error=trace_err,
            negativity_error=neg_err,
            bound_value=error_bound(part, n, r, config.delta),
            op_error=op_err,
            prop4_bound=4.0 * r * op_err + 2.0 * lam_r,
            true_rank=r,
        )

    items = [
        (p, n, s)
        for p in range(len(partitions))
        for n in range(len(config.shots))
        for s in range(config.num_states)
    ]
    workers = int(os.environ.get("PLSTOMO_WORKERS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_cell, items))
    else:
        records = [run_cell(it) for it in items]
    return records


def partition_label(qubit_counts) -> str:
    return "-".join(str(c) for c in qubit_counts)


def parse_partition_label(label: str) -> tuple[int, ...]:
    return tuple(int(c) for c in label.replace("-", ",").split(","))


def write_records_csv(path: str, records: list[SimRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    partition_label(rec.partition),
                    rec.n_shots,
                    rec.state_index,
                    repr(rec.trace_error),
                    "" if rec.negativity_error is None else repr(rec.negativity_error),
                    repr(rec.bound_value),
                ]
            )


def read_csv_rows(paths) -> list[dict]:
    rows: list[dict] = []
    for path in paths:
        with open(path, encoding="utf-8", newline="") as fh:
            rows.extend(csv.DictReader(fh))
    return rows


def fit_records_from_rows(rows: list[dict]) -> list[tuple]:
    """Aggregate CSV rows into (M, d_eff, d, N, mean_eps^2) fit records."""
    cells: dict[tuple, list[float]] = {}
    for row in rows:
        key = (row["partition"], int(row["N"]))
        cells.setdefault(key, []).append(float(row["trace_error"]))
    records = []
    for (label, n), errs in sorted(cells.items()):
        part = NodePartition(parse_partition_label(label))
        mean_eps = sum(errs) / len(errs)
        records.append(
            (part.n_nodes, effective_dimension(part), part.dim, n, mean_eps**2)
        )
    return records


# ---------------------------------------------------------------------------
# SVG scatter plot
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _log_ticks(lo: float, hi: float) -> list[float]:
    start = math.floor(math.log10(lo))
    stop = math.ceil(math.log10(hi))
    return [10.0**e for e in range(start, stop + 1)]


def write_scatter_svg(path: str, rows: list[dict], x: str, y: str, group: str) -> None:
    """Log-log scatter of mean y vs x per group, error bars = group std."""
    if not rows:
        raise ValueError("no data rows to plot")
    for col in (x, y, group):
        if col not in rows[0]:
            raise ValueError(f"column {col!r} not in CSV header {sorted(rows[0])}")
    cells: dict[tuple, list[float]] = {}
    for row in rows:
        if row[y] == "":
            continue
        cells.setdefault((row[group], float(row[x])), []).append(float(row[y]))
    if not cells:
        raise ValueError(f"no usable values in column {y!r}")
    series: dict[str, list[tuple[float, float, float]]] = {}
    for (g, xv), ys in sorted(cells.items()):
        mean = sum(ys) / len(ys)
        std = math.sqrt(sum((v - mean) ** 2 for v in ys) / len(ys))
        series.setdefault(g, []).append((xv, mean, std))

    width, height = 640, 480
    ml, mr, mt, mb = 70, 160, 20, 50
    xs = [p[0] for pts in series.values() for p in pts]
    ys_lo = [max(p[1] - p[2], p[1] * 1e-3) for pts in series.values() for p in pts]
    ys_hi = [p[1] + p[2] for pts in series.values() for p in pts]
    ys_all = [p[1] for pts in series.values() for p in pts]
    if min(xs) <= 0 or min(ys_all) <= 0:
        raise ValueError("log-log plot needs positive x and y values")
    x0, x1 = min(xs) / 1.3, max(xs) * 1.3
    y0, y1 = min(ys_lo) / 1.3, max(ys_hi) * 1.3

    def px(v: float) -> float:
        return ml + (math.log10(v) - math.log10(x0)) / (math.log10(x1) - math.log10(x0)) * (
            width - ml - mr
        )

    def py(v: float) -> float:
        return height - mb - (math.log10(v) - math.log10(y0)) / (
            math.log10(y1) - math.log10(y0)
        ) * (height - mt - mb)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
        'fill="none" stroke="black"/>',
    ]
    for tv in _log_ticks(x0, x1):
        if x0 <= tv <= x1:
            parts.append(
                f'<line x1="{px(tv):.1f}" y1="{height - mb}" x2="{px(tv):.1f}" '
                f'y2="{height - mb + 5}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{px(tv):.1f}" y="{height - mb + 18}" font-size="11" '
                f'text-anchor="middle">1e{int(math.log10(tv))}</text>'
            )
    for tv in _log_ticks(y0, y1):
        if y0 <= tv <= y1:
            parts.append(
                f'<line x1="{ml - 5}" y1="{py(tv):.1f}" x2="{ml}" y2="{py(tv):.1f}" '
                'stroke="black"/>'
            )
            parts.append(
                f'<text x="{ml - 8}" y="{py(tv) + 4:.1f}" font-size="11" '
                f'text-anchor="end">1e{int(math.log10(tv))}</text>'
            )
    parts.append(
        f'<text x="{(ml + width - mr) / 2}" y="{height - 12}" font-size="13" '
        f'text-anchor="middle">{x}</text>'
    )
    parts.append(
        f'<text x="18" y="{(mt + height - mb) / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {(mt + height - mb) / 2})">{y}</text>'
    )
    for gi, (g, pts) in enumerate(sorted(series.items())):
        color = _PALETTE[gi % len(_PALETTE)]
        for xv, mean, std in pts:
            cx, cy = px(xv), py(mean)
            if std > 0:
                lo = py(max(mean - std, y0))
                hi = py(min(mean + std, y1))
                parts.append(
                    f'<line x1="{cx:.1f}" y1="{hi:.1f}" x2="{cx:.1f}" y2="{lo:.1f}" '
                    f'stroke="{color}"/>'
                )
            parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="4" fill="{color}"/>')
        ly = mt + 16 + 16 * gi
        parts.append(
            f'<circle cx="{width - mr + 14}" cy="{ly - 4}" r="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{width - mr + 24}" y="{ly}" font-size="12">{group}={g}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_verify_designs(args) -> int:
    if args.max_k < 1 or args.max_k > MAX_QUBITS:
        print(f"error: max-k must be in 1..{MAX_QUBITS}", file=sys.stderr)
        return 2
    failed = False
    for k in range(1, args.max_k + 1):
        design = build_mubs(k)
        residual = verify_2design(design)
        d = design.dim
        vecs = design.flat_vectors()
        unbias_dev = 0.0
        for b1 in range(design.n_bases):
            for b2 in range(b1 + 1, design.n_bases):
                g = design.bases[b1].conj().T @ design.bases[b2]
                unbias_dev = max(unbias_dev, float(np.max(np.abs(np.abs(g) ** 2 - 1.0 / d))))
        ok = residual < 1e-9 and unbias_dev < 1e-9
        failed |= not ok
        print(
            f"k={k} dim={d} bases={design.n_bases} vectors={vecs.shape[0]} "
            f"residual={residual:.3e} unbiasedness_dev={unbias_dev:.3e} "
            f"{'ok' if ok else 'VIOLATION'}"
        )
    return 1 if failed else 0


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.n_qubits is not None:
        updates["n_qubits"] = args.n_qubits
    if args.partitions is not None:
        updates["partitions"] = [
            tuple(int(c) for c in chunk.split(",")) for chunk in args.partitions.split(";")
        ]
    if args.ensemble is not None:
        updates["ensemble"] = args.ensemble
    if args.num_states is not None:
        updates["num_states"] = args.num_states
    if args.shots is not None:
        updates["shots"] = [int(s) for s in args.shots.split(",")]
    if args.lam is not None:
        updates["lam"] = args.lam
    if args.delta is not None:
        updates["delta"] = args.delta
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.output is not None:
        updates["output"] = args.output
    if args.state_split is not None:
        updates["state_split"] = args.state_split
    if args.paper_scale:
        updates["paper_scale"] = True
        updates.setdefault("num_states", 100)
        updates.setdefault("shots", [5_000_000, 10_000_000, 15_000_000])
    return replace(config, **updates)


def cmd_simulate(args) -> int:
    if args.config:
        config = config_from_json(args.config)
    else:
        if args.n_qubits is None or args.partitions is None:
            print("error: need --config or both --n-qubits and --partitions", file=sys.stderr)
            return 2
        config = ExperimentConfig(n_qubits=args.n_qubits, partitions=[])
    config = _apply_overrides(config, args)
    try:
        records = run_experiment(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_records_csv(config.output, records)
    print(f"wrote {len(records)} rows to {config.output}")
    return 0


def cmd_fit(args) -> int:
    rows = read_csv_rows(args.csv)
    try:
        records = fit_records_from_rows(rows)
        result = fit_scaling(records)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(result)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["coefficient", "value", "stderr"])
            writer.writerow(["alpha", repr(result.alpha), repr(result.alpha_se)])
            writer.writerow(["beta", repr(result.beta), repr(result.beta_se)])
            writer.writerow(["gamma", repr(result.gamma), repr(result.gamma_se)])
            writer.writerow(["delta", repr(result.delta_exp), repr(result.delta_se)])
        print(f"wrote coefficients to {args.output}")
    return 0


def cmd_bounds(args) -> int:
    try:
        part = NodePartition(parse_partition_label(args.partition))
        eps_sq = error_bound(part, args.n_shots, args.rank, args.delta)
        print(f"partition        : {part} (d={part.dim}, d_eff={effective_dimension(part)})")
        print(f"error bound      : eps^2 <= {eps_sq:.6g}  (eps <= {math.sqrt(eps_sq):.6g}) "
              f"at delta={args.delta}, r={args.rank}, N={args.n_shots}")
        print(f"negativity bound : {negativity_error_bound(math.sqrt(eps_sq)):.6g} "
              "(half the trace-norm bound)")
        if args.epsilon is not None:
            n_min = sample_complexity(part, args.rank, args.epsilon, args.delta)
            pfail = failure_probability(part, args.n_shots, args.rank, args.epsilon)
            print(f"sample complexity: N >= {n_min} for eps={args.epsilon}, delta={args.delta}")
            print(f"failure prob     : P[error >= {args.epsilon}] <= {pfail:.6g} at N={args.n_shots}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_plot(args) -> int:
    rows = read_csv_rows([args.csv])
    try:
        write_scatter_svg(args.output, rows, args.x, args.y, args.group)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output}")
    return 0


def cmd_session(args) -> int:
    part = NodePartition(parse_partition_label(args.partition))
    if part.n_qubits > MAX_QUBITS:
        print(f"error: at most {MAX_QUBITS} qubits", file=sys.stderr)
        return 2
    rng = seeded_rng(args.seed, _STATE_STREAM, 0)
    rho = projector(haar_state(part.dim, rng))
    config = SessionConfig(
        partition=part, n_shots=args.n_shots, seed=args.seed, transport=args.transport
    )
    table = run_distributed_session(rho, config)
    lines = session_to_lines(rho, config)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {len(lines)} lines to {args.output}")
    replayed = replay_session(lines)
    centralized = sample_frequencies(
        rho, node_povm(part), args.n_shots, args.seed, config.stream
    )
    same = table.counts == centralized.counts == replayed.counts
    print(f"distributed == centralized == replayed: {same}")
    return 0 if same else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plstomo",
        description="Projected least-squares tomography simulator for multi-node systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-designs", help="check 2-design and unbiasedness residuals")
    p.add_argument("--max-k", type=int, default=5, help="largest per-node qubit count")
    p.set_defaults(func=cmd_verify_designs)

    p = sub.add_parser("simulate", help="run tomography over states x partitions x N")
    p.add_argument("--config", help="JSON config file (flags override fields)")
    p.add_argument("--n-qubits", type=int)
    p.add_argument("--partitions", help="semicolon-separated, e.g. '3;2,1;1,1,1'")
    p.add_argument("--ensemble", choices=ENSEMBLES)
    p.add_argument("--num-states", type=int)
    p.add_argument("--shots", help="comma-separated shot counts")
    p.add_argument("--lambda", dest="lam", type=float, help="link depolarization strength")
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.add_argument("--state-split", type=int, help="qubits in node 1 (GHZ ensembles)")
    p.add_argument("--paper-scale", action="store_true",
                   help="100 states, N in {5e6,1e7,1.5e7} (hours of compute)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the error scaling law to simulate CSVs")
    p.add_argument("csv", nargs="+", help="CSV files from simulate")
    p.add_argument("--output", help="write coefficients to this CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bounds", help="evaluate error/sample-complexity bounds")
    p.add_argument("--partition", required=True, help="e.g. 2,2 or 2-2")
    p.add_argument("--n-shots", type=int, required=True)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plot", help="render a log-log scatter SVG from a CSV")
    p.add_argument("csv")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--output", default="plot.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("session", help="distributed acquisition demo/driver")
    p.add_argument("--partition", required=True)
    p.add_argument("--n-shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transport", choices=("in-process", "stream"), default="stream")
    p.add_argument("--output", help="write manifest + records here")
    p.set_defaults(func=cmd_session)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
