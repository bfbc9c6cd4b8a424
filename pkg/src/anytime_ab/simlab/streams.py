"""Deterministic outcome-stream generation for the study harness.

Each replication owns a counter-based generator keyed by (master seed,
replication index), so a replication's stream is identical no matter how
the batch is chunked or which method consumes it; method comparisons are
therefore paired by construction. Outcomes are Bernoulli, and only the
sufficient statistics at the peek grid are materialized: per grid block,
the number of arm-1 assignments and the per-arm conversion counts, drawn
in that fixed order.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    """Counter-mode stream for one replication: key = (master_seed, rep)."""
    key = ((int(master_seed) & _MASK64) << 64) | (int(rep) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def two_arm_count_matrices(
    master_seed: int, reps: int, grid: np.ndarray, p0: float, p1: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Cumulative per-arm sizes and conversions at each grid point.

    Returns float64 matrices (n0, n1, s0, s1) of shape (reps, len(grid));
    grid entries are cumulative total sample sizes.
    """
    grid = np.asarray(grid, dtype=np.int64)
    blocks = np.diff(grid, prepend=0)
    if np.any(blocks <= 0):
        raise ValueError("grid must be strictly increasing and positive")
    n1 = np.empty((reps, grid.size), dtype=np.float64)
    s0 = np.empty_like(n1)
    s1 = np.empty_like(n1)
    for r in range(reps):
        rng = replication_rng(master_seed, r)
        m1 = rng.binomial(blocks, 0.5)
        c1 = rng.binomial(m1, p1)
        c0 = rng.binomial(blocks - m1, p0)
        n1[r] = np.cumsum(m1)
        s1[r] = np.cumsum(c1)
        s0[r] = np.cumsum(c0)
    n0 = grid.astype(np.float64)[None, :] - n1
    return n0, n1, s0, s1


def single_arm_count_matrices(
    master_seed: int,
    reps: int,
    grid: np.ndarray,
    truth_prior: tuple[float, float] | None = None,
    p: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-replication true rates and cumulative conversion counts.

    The rate is drawn from Beta(truth_prior) per replication, or fixed at
    ``p``. Returns (theta, s) with theta shape (reps,) and s shape
    (reps, len(grid)).
    """
    if (truth_prior is None) == (p is None):
        raise ValueError("exactly one of truth_prior and p must be given")
    grid = np.asarray(grid, dtype=np.int64)
    blocks = np.diff(grid, prepend=0)
    if np.any(blocks <= 0):
        raise ValueError("grid must be strictly increasing and positive")
    theta = np.empty(reps, dtype=np.float64)
    s = np.empty((reps, grid.size), dtype=np.float64)
    for r in range(reps):
        rng = replication_rng(master_seed, r)
        th = rng.beta(truth_prior[0], truth_prior[1]) if truth_prior is not None else float(p)
        theta[r] = th
        s[r] = np.cumsum(rng.binomial(blocks, th))
    return theta, s
