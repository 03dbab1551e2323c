"""Recursive transition-count statistics, the geometric checkpoint grid, and
closed-form windowed transition-probability estimates.

Counts are kept as float64 arrays: integer-valued (hence exact) for binary
snapshots, while also accommodating the layer-averaged baseline whose
"snapshots" carry fractional values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SuffStats",
    "GridStore",
    "dynamic_grid",
    "update",
    "windowed_mle_from_stats",
    "full_history_estimate",
    "DEGENERATE_VALUE",
]

# Neutral fill for entries whose conditioning state never occurred in the
# window (0/0 in the closed form); the returned mask flags them so downstream
# consumers can treat them as uninformative.
DEGENERATE_VALUE = 0.5


@dataclass(frozen=True)
class SuffStats:
    """Cumulative transition counts after t observed transitions.

    n01: 0->1 transitions; n10: 1->0 transitions; nact: sum of predecessor
    states (active-edge count).
    """

    t: int
    n01: np.ndarray
    n10: np.ndarray
    nact: np.ndarray

    @staticmethod
    def zeros(n: int, l_count: int) -> "SuffStats":
        shape = (n, n, l_count)
        return SuffStats(
            t=0,
            n01=np.zeros(shape),
            n10=np.zeros(shape),
            nact=np.zeros(shape),
        )


def update(stats: SuffStats, a_prev: np.ndarray, a_cur: np.ndarray) -> SuffStats:
    """Fold one transition a_prev -> a_cur into the cumulative counts."""
    a_prev = np.asarray(a_prev, dtype=float)
    a_cur = np.asarray(a_cur, dtype=float)
    if a_prev.shape != stats.n01.shape or a_cur.shape != stats.n01.shape:
        raise ValueError("snapshot dimensions do not match the statistics")
    return SuffStats(
        t=stats.t + 1,
        n01=stats.n01 + a_cur * (1 - a_prev),
        n10=stats.n10 + (1 - a_cur) * a_prev,
        nact=stats.nact + a_prev,
    )


def dynamic_grid(t: int) -> list[int]:
    """Candidate look-back windows at time t: a logarithmic-size sorted set.

    The two-sided construction 2^j + ((t-1) mod 2^(j-1)) plus its right
    shift by 2^(j-1); the left family always includes j=1 so that the grid
    is {1, 2} already at t=2. Elements never exceed t.
    """
    if t < 1:
        raise ValueError(f"time index must be >= 1, got {t}")
    if t == 1:
        return [1]
    grid = {1}
    j_left = max(1, int(np.floor(np.log2((t - 1) / 3))) + 1) if t > 1 else 0
    for j in range(1, j_left + 1):
        g = 2**j + ((t - 1) % 2 ** (j - 1))
        if g <= t:
            grid.add(g)
    j_right = int(np.floor(np.log2(t - 1))) - 1
    for j in range(1, j_right + 1):
        g = 2**j + ((t - 1) % 2 ** (j - 1)) + 2 ** (j - 1)
        if g <= t:
            grid.add(g)
    return sorted(grid)


def _mle_from_diffs(
    d01: np.ndarray, d10: np.ndarray, dact: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form windowed MLE from count differences over a window of size k.

    Entries whose conditioning state never occurred in the window are set to
    DEGENERATE_VALUE and flagged in the returned mask.
    """
    denom_theta = k - dact
    denom_delta = dact
    degenerate = (denom_theta <= 0) | (denom_delta <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(denom_theta > 0, d01 / np.where(denom_theta > 0, denom_theta, 1), DEGENERATE_VALUE)
        delta = np.where(denom_delta > 0, d10 / np.where(denom_delta > 0, denom_delta, 1), DEGENERATE_VALUE)
    return theta, delta, degenerate


def windowed_mle_from_stats(
    current: SuffStats, baseline: SuffStats
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Windowed MLE between two cumulative checkpoints; returns (theta, delta, degenerate_mask)."""
    k = current.t - baseline.t
    if k < 1:
        raise ValueError("window must span at least one transition")
    return _mle_from_diffs(
        current.n01 - baseline.n01,
        current.n10 - baseline.n10,
        current.nact - baseline.nact,
        k,
    )


def full_history_estimate(stats: SuffStats) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-history MLE (window = t, zero baseline)."""
    return _mle_from_diffs(stats.n01, stats.n10, stats.nact, stats.t)


class GridStore:
    """Single-writer store of the current counts plus checkpoints on the grid.

    After advancing to time t, checkpoint keys are exactly {t - k : k in
    dynamic_grid(t)}; the grid-nesting property guarantees every needed
    checkpoint is already present.
    """

    def __init__(self, n: int, l_count: int):
        self.current = SuffStats.zeros(n, l_count)
        self.checkpoints: dict[int, SuffStats] = {}

    @property
    def t(self) -> int:
        return self.current.t

    @property
    def grid(self) -> list[int]:
        return dynamic_grid(self.t) if self.t >= 1 else []

    def advance(self, a_prev: np.ndarray, a_cur: np.ndarray) -> None:
        # keep the outgoing state as a checkpoint candidate before pruning
        self.checkpoints[self.current.t] = self.current
        self.current = update(self.current, a_prev, a_cur)
        keep = {self.current.t - k for k in dynamic_grid(self.current.t)}
        missing = keep - set(self.checkpoints)
        if missing:
            raise RuntimeError(f"grid nesting violated at t={self.current.t}: missing {missing}")
        self.checkpoints = {s: self.checkpoints[s] for s in sorted(keep)}

    def window_counts(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Count differences (d01, d10, dact) over the last k transitions."""
        s = self.current.t - k
        if s not in self.checkpoints:
            raise KeyError(f"no checkpoint at time {s} (t={self.current.t}, k={k})")
        base = self.checkpoints[s]
        return (
            self.current.n01 - base.n01,
            self.current.n10 - base.n10,
            self.current.nact - base.nact,
        )

    def windowed_mle(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d01, d10, dact = self.window_counts(k)
        return _mle_from_diffs(d01, d10, dact, k)
