"""Error bounds, sample complexity, concentration parameters, negativity,
and the empirical scaling-law fit.

All bound formulas take the node partition through the effective dimension
d_eff = prod_j (d_j - 1/2) and the node count M; they are exact arithmetic
evaluations, conservative by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .designs import NodePartition
from .estimator import LsEstimate, pls_estimate
from .linalg import check_density_matrix, operator_norm, partial_transpose, trace_norm

BOUND_CONSTANT = 128.0 / 3.0
NEGATIVITY_CLAMP = 1e-10


def effective_dimension(partition: NodePartition) -> float:
    """prod_j (d_j - 1/2); at most the full dimension d."""
    return math.prod(d - 0.5 for d in partition.dims)


def _check_eps(epsilon: float) -> float:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(
            f"epsilon must be in (0, 1], got {epsilon}; the trace-norm "
            "concentration bound only holds for epsilon <= 1"
        )
    return float(epsilon)


def _check_delta(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return float(delta)


def failure_probability(
    partition: NodePartition, n_shots: int, rank: int, epsilon: float
) -> float:
    """Upper bound on P[trace error >= epsilon], clamped to [0, 1]."""
    eps = _check_eps(epsilon)
    if n_shots < 1 or rank < 1:
        raise ValueError("n_shots and rank must be >= 1")
    d = partition.dim
    expo = (
        -(3.0 / 128.0)
        * eps**2
        * n_shots
        / (2.0**partition.n_nodes * rank**2 * effective_dimension(partition))
    )
    return min(1.0, d * math.exp(expo))


def error_bound(
    partition: NodePartition, n_shots: int, rank: int, delta: float
) -> float:
    """Squared trace-norm error bound holding with probability 1 - delta."""
    dl = _check_delta(delta)
    if n_shots < 1 or rank < 1:
        raise ValueError("n_shots and rank must be >= 1")
    d = partition.dim
    return (
        BOUND_CONSTANT
        * (2.0**partition.n_nodes * rank**2 * effective_dimension(partition) / n_shots)
        * math.log(d / dl)
    )


def sample_complexity(
    partition: NodePartition, rank: int, epsilon: float, delta: float
) -> int:
    """Smallest shot count guaranteeing trace error epsilon with probability
    1 - delta (ceiling of the bound)."""
    eps = _check_eps(epsilon)
    dl = _check_delta(delta)
    if rank < 1:
        raise ValueError("rank must be >= 1")
    d = partition.dim
    val = (
        BOUND_CONSTANT
        * (2.0**partition.n_nodes * rank**2 * effective_dimension(partition) / eps**2)
        * math.log(d / dl)
    )
    return int(math.ceil(val))


def bernstein_params(partition: NodePartition, n_shots: int) -> tuple[float, float]:
    """(R, sigma^2) of the per-shot centered estimator terms: R = d/N and
    sigma^2 = 2^M * d_eff / N."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    r = partition.dim / n_shots
    sigma_sq = 2.0**partition.n_nodes * effective_dimension(partition) / n_shots
    return r, sigma_sq


def truncation_residual(rho, rank: int) -> float:
    """Trace-norm residual of the best rank-r approximation of a Hermitian
    matrix: the sum of all but the r largest eigenvalue magnitudes."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    if not 1 <= rank <= d:
        raise ValueError(f"rank must be in 1..{d}, got {rank}")
    mags = np.sort(np.abs(np.linalg.eigvalsh(rho)))[::-1]
    return float(mags[rank:].sum())


def negativity(rho, partition: NodePartition, transposed_nodes: Iterable[int]) -> float:
    """Entanglement negativity across a bipartition of the nodes:
    (||rho^{T_2}||_1 - 1)/2, transposing the listed node group."""
    rho = check_density_matrix(rho)
    group = set(int(i) for i in transposed_nodes)
    if not group or group == set(range(partition.n_nodes)):
        raise ValueError("bipartition needs two nonempty node groups")
    pt = partial_transpose(rho, partition.dims, group)
    val = (trace_norm(pt) - 1.0) / 2.0
    if -NEGATIVITY_CLAMP < val < 0.0:
        return 0.0
    return val


def negativity_qubit_split(rho, n_first: int) -> float:
    """Negativity across the (first n_first qubits | rest) cut."""
    rho = np.asarray(rho)
    n = rho.shape[0].bit_length() - 1
    if not 1 <= n_first < n:
        raise ValueError(f"n_first must be in 1..{n - 1}")
    return negativity(rho, NodePartition((n_first, n - n_first)), (1,))


def negativity_error_bound(epsilon: float) -> float:
    """Certified negativity error from a trace-norm error: epsilon/2."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    return epsilon / 2.0


def proposition4_bound(rho, ls: LsEstimate, rank: int) -> float:
    """Trace-norm error bound from the operator-norm residual:
    4 r ||rho - L||_inf + 2 min(Lambda_r(rho), Lambda_r(rho_hat))."""
    rho = check_density_matrix(rho)
    if rho.shape != ls.matrix.shape:
        raise ValueError("state and estimate dimensions do not match")
    rho_hat = pls_estimate(ls).state
    op_err = operator_norm(rho - ls.matrix)
    lam = min(truncation_residual(rho, rank), truncation_residual(rho_hat, rank))
    return 4.0 * rank * op_err + 2.0 * lam


@dataclass
class FitResult:
    alpha: float
    beta: float
    gamma: float
    delta_exp: float
    alpha_se: float
    beta_se: float
    gamma_se: float
    delta_se: float

    def __str__(self):
        return (
            f"alpha = {self.alpha:.4g} +/- {self.alpha_se:.2g}\n"
            f"beta  = {self.beta:.4g} +/- {self.beta_se:.2g}\n"
            f"gamma = {self.gamma:.4g} +/- {self.gamma_se:.2g}\n"
            f"delta = {self.delta_exp:.4g} +/- {self.delta_se:.2g}"
        )


def fit_scaling(records: Sequence[tuple]) -> FitResult:
    """Fit log(mean_eps_sq) = log(alpha) + beta log(2^M) + gamma log(d_eff)
    - delta log(N) + log(log d) by ordinary least squares.

    ``records`` rows are (M, d_eff, d, N, mean_eps_sq); log(log d) enters as
    a fixed offset, matching the scaling ansatz. Raises on fewer than 5
    records or a rank-deficient regressor matrix.
    """
    rows = [tuple(map(float, r)) for r in records]
    if len(rows) < 5:
        raise ValueError(f"need at least 5 records, got {len(rows)}")
    arr = np.array(rows)
    m_vals, d_eff, d_dim, n_vals, eps_sq = arr.T
    if np.any(eps_sq <= 0):
        raise ValueError("mean_eps_sq entries must be positive")
    for name, col in (("2^M", m_vals), ("d_eff", d_eff), ("N", n_vals)):
        if np.unique(col).size < 2:
            raise ValueError(f"regressor {name} needs >= 2 distinct values")
    y = np.log(eps_sq) - np.log(np.log(d_dim))
    x = np.column_stack(
        [np.ones(len(rows)), m_vals * math.log(2.0), np.log(d_eff), np.log(n_vals)]
    )
    rank = np.linalg.matrix_rank(x)
    if rank < x.shape[1]:
        raise ValueError(f"rank-deficient regressor matrix (rank {rank} < 4)")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = max(len(rows) - x.shape[1], 1)
    sigma_sq = float(resid @ resid) / dof
    cov = sigma_sq * np.linalg.inv(x.T @ x)
    se = np.sqrt(np.diag(cov))
    alpha = math.exp(coef[0])
    return FitResult(
        alpha=alpha,
        beta=float(coef[1]),
        gamma=float(coef[2]),
        delta_exp=float(-coef[3]),
        alpha_se=alpha * float(se[0]),
        beta_se=float(se[1]),
        gamma_se=float(se[2]),
        delta_se=float(se[3]),
    )
