"""Autoregressive multilayer SBM: parameters, edge-refresh simulator, scenario presets.

Adjacency snapshots are uint8 arrays of shape (n, n, L), symmetric in the first
two axes with zero diagonals. A trajectory of horizon T is an array of shape
(T + 1, n, n, L) whose index-0 entry is the initial snapshot; transitions at
step t (1-based) are governed by the connectivity pair the schedule assigns
to t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Membership",
    "Connectivity",
    "ParamSchedule",
    "expand",
    "stationary_marginal",
    "simulate",
    "simulate_edge_chain",
    "make_scenario",
    "SCENARIO_NAMES",
]


@dataclass(frozen=True)
class Membership:
    """Community assignment: labels[i] in 0..k-1, every community non-empty."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1:
            raise ValueError("labels must be a 1-d array")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")

    @property
    def n(self) -> int:
        return self.labels.size

    def indicator(self) -> np.ndarray:
        """0/1 membership matrix with one 1 per row, shape (n, k)."""
        z = np.zeros((self.n, self.k), dtype=np.int64)
        z[np.arange(self.n), self.labels] = 1
        return z

    @staticmethod
    def balanced(n: int, k: int) -> "Membership":
        return Membership(labels=np.arange(n) * k // n, k=k)


@dataclass(frozen=True)
class Connectivity:
    """Block-level formation (w) and dissolution (m) tensors, shape (K, K, L)."""

    w: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        m = np.asarray(self.m, dtype=float)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "m", m)
        if w.shape != m.shape or w.ndim != 3 or w.shape[0] != w.shape[1]:
            raise ValueError(f"bad connectivity shapes: {w.shape}, {m.shape}")
        for name, x in (("w", w), ("m", m)):
            if not np.allclose(x, np.transpose(x, (1, 0, 2))):
                raise ValueError(f"{name} must be symmetric in its first two modes")
        if w.min() <= 0 or m.min() <= 0 or w.max() >= 1 or m.max() >= 1:
            raise ValueError("connectivity entries must lie strictly inside (0, 1)")

    @property
    def k(self) -> int:
        return self.w.shape[0]

    @property
    def l_count(self) -> int:
        return self.w.shape[2]

    @property
    def c_min(self) -> float:
        """Largest floor constant consistent with the entries."""
        return float(min(self.w.min(), self.m.min(), 1 - self.w.max(), 1 - self.m.max()))

    @staticmethod
    def from_layers(w_layer: np.ndarray, m_layer: np.ndarray, l_count: int) -> "Connectivity":
        """Replicate a single (K, K) pair across l_count identical layers."""
        w = np.repeat(np.asarray(w_layer, dtype=float)[:, :, None], l_count, axis=2)
        m = np.repeat(np.asarray(m_layer, dtype=float)[:, :, None], l_count, axis=2)
        return Connectivity(w=w, m=m)


@dataclass(frozen=True)
class _Piece:
    start: int
    conn: Connectivity
    ramp_to: Connectivity | None = None


@dataclass(frozen=True)
class ParamSchedule:
    """Piecewise connectivity over steps 1..t; optional linear ramp within a piece."""

    pieces: tuple[_Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("schedule needs at least one piece")
        starts = [p.start for p in self.pieces]
        if starts[0] != 1 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("piece start times must be strictly increasing and begin at 1")

    @staticmethod
    def constant(conn: Connectivity) -> "ParamSchedule":
        return ParamSchedule(pieces=(_Piece(1, conn),))

    @staticmethod
    def piecewise(specs: list[tuple[int, Connectivity]]) -> "ParamSchedule":
        return ParamSchedule(pieces=tuple(_Piece(s, c) for s, c in specs))

    @staticmethod
    def from_pieces(pieces: list[_Piece]) -> "ParamSchedule":
        return ParamSchedule(pieces=tuple(pieces))

    def at(self, t: int) -> Connectivity:
        """Connectivity governing the transition at step t >= 1."""
        if t < 1:
            raise ValueError(f"step index must be >= 1, got {t}")
        idx = 0
        for i, p in enumerate(self.pieces):
            if p.start <= t:
                idx = i
            else:
                break
        piece = self.pieces[idx]
        if piece.ramp_to is None:
            return piece.conn
        end = (self.pieces[idx + 1].start - 1) if idx + 1 < len(self.pieces) else t
        if end <= piece.start:
            return piece.ramp_to
        s = min(1.0, (t - piece.start) / (end - piece.start))
        return Connectivity(
            w=(1 - s) * piece.conn.w + s * piece.ramp_to.w,
            m=(1 - s) * piece.conn.m + s * piece.ramp_to.m,
        )


def expand(z: Membership, c: Connectivity) -> tuple[np.ndarray, np.ndarray]:
    """Lift block-level tensors to node level: theta[i, j, l] = w[z_i, z_j, l]."""
    if c.k != z.k:
        raise ValueError(f"membership has {z.k} communities, connectivity has {c.k}")
    ix = np.ix_(z.labels, z.labels)
    return c.w[ix], c.m[ix]


def stationary_marginal(theta: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Long-run edge-presence probability theta / (theta + delta)."""
    denom = theta + delta
    if np.any(denom <= 0):
        raise ValueError("theta + delta must be entrywise positive")
    return theta / denom


def _triu_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def simulate_tensors(
    theta_fn,
    delta_fn,
    n: int,
    l_count: int,
    t_max: int,
    seed: int,
    init: str = "marginal",
) -> np.ndarray:
    """Edge-refresh simulation from node-level probability tensors.

    theta_fn(t) / delta_fn(t) give the (n, n, L) transition tensors for step t.
    init: "marginal" draws the initial snapshot from theta/(theta+delta) at
    t=1; "zero" starts from the empty network.
    Returns a (t_max + 1, n, n, L) uint8 array; index 0 is the initial state.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    iu, ju = _triu_indices(n)
    out = np.zeros((t_max + 1, n, n, l_count), dtype=np.uint8)

    if init == "marginal":
        pi = stationary_marginal(theta_fn(1), delta_fn(1))[iu, ju, :]
        state = (rng.random(pi.shape) < pi).astype(np.uint8)
    elif init == "zero":
        state = np.zeros((iu.size, l_count), dtype=np.uint8)
    else:
        raise ValueError(f"unknown init rule: {init!r}")
    out[0, iu, ju, :] = state
    out[0, ju, iu, :] = state

    for t in range(1, t_max + 1):
        theta_u = theta_fn(t)[iu, ju, :]
        delta_u = delta_fn(t)[iu, ju, :]
        u = rng.random(state.shape)
        # from 0: form w.p. theta; from 1: dissolve w.p. delta
        state = np.where(state == 0, u < theta_u, u >= delta_u).astype(np.uint8)
        out[t, iu, ju, :] = state
        out[t, ju, iu, :] = state
    return out


def simulate(
    z: Membership,
    schedule: ParamSchedule,
    t_max: int,
    seed: int,
    init: str = "marginal",
) -> np.ndarray:
    """Simulate an adjacency-tensor trajectory; deterministic given seed."""
    cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def params(t: int) -> tuple[np.ndarray, np.ndarray]:
        if t not in cache:
            cache.clear()
            cache[t] = expand(z, schedule.at(t))
        return cache[t]

    return simulate_tensors(
        lambda t: params(t)[0],
        lambda t: params(t)[1],
        z.n,
        schedule.at(1).l_count,
        t_max,
        seed,
        init=init,
    )


def simulate_edge_chain(theta: float, delta: float, t_max: int, seed: int) -> np.ndarray:
    """Single two-state chain started from its stationary law; returns (t_max + 1,) 0/1."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out = np.empty(t_max + 1, dtype=np.uint8)
    out[0] = rng.random() < theta / (theta + delta)
    u = rng.random(t_max)
    for t in range(1, t_max + 1):
        prev = out[t - 1]
        out[t] = (u[t - 1] < theta) if prev == 0 else (u[t - 1] >= delta)
    return out


# ---------------------------------------------------------------------------
# Benchmark scenarios
# ---------------------------------------------------------------------------

SCENARIO_NAMES = tuple(
    f"{kind}-{i}" for kind in ("stat", "nonstat") for i in (1, 2, 3, 4)
)


def _sym2(d1: float, d2: float, off: float) -> np.ndarray:
    return np.array([[d1, off], [off, d2]])


def _stationary_connectivity(which: int) -> Connectivity:
    if which == 1:
        w = _sym2(0.10, 0.08, 0.05)
        m = _sym2(0.20, 0.20, 0.20)
        return Connectivity.from_layers(w, m, 2)
    if which == 2:
        w = _sym2(0.4, 0.2, 0.3)
        m = _sym2(0.4, 0.2, 0.3)
        return Connectivity.from_layers(w, m, 2)
    if which == 3:
        w = np.stack([_sym2(0.4, 0.4, 0.05), _sym2(0.05, 0.05, 0.4)], axis=2)
        m = np.stack([_sym2(0.4, 0.4, 0.45), _sym2(0.45, 0.45, 0.4)], axis=2)
        return Connectivity(w=w, m=m)
    if which == 4:
        w = np.stack([_sym2(0.015, 0.015, 0.010), np.full((2, 2), 0.15)], axis=2)
        m = np.stack([_sym2(0.09, 0.09, 0.10), np.full((2, 2), 0.35)], axis=2)
        return Connectivity(w=w, m=m)
    raise ValueError(f"unknown stationary scenario {which}")


def _regime(which: int) -> Connectivity:
    diag_w = {1: 0.10, 2: 0.15, 3: 0.35, 4: 0.50}[which]
    diag_m = {1: 0.20, 2: 0.25, 3: 0.45, 4: 0.50}[which]
    return Connectivity.from_layers(
        _sym2(diag_w, diag_w, 0.05), _sym2(diag_m, diag_m, 0.05), 2
    )


def _nonstationary_schedule(which: int) -> ParamSchedule:
    # Steps are transition indices: the published regime boundaries at
    # snapshot times 51 and 101 correspond to transition steps 50 and 100
    # (the initial snapshot carries index 1 in the published timeline).
    c1, c2, c3, c4 = (_regime(i) for i in (1, 2, 3, 4))
    if which == 1:
        return ParamSchedule.piecewise([(1, c1), (50, c2), (100, c4)])
    if which == 2:
        return ParamSchedule.piecewise([(1, c1), (50, c3), (100, c4)])
    if which == 3:
        return ParamSchedule.from_pieces(
            [_Piece(1, c1), _Piece(50, c1, ramp_to=c4), _Piece(100, c4)]
        )
    if which == 4:
        pieces = [_Piece(1, c1)]
        for t in range(50, 100, 2):
            pieces.append(_Piece(t, c2 if ((t - 50) // 2) % 2 == 0 else c3))
        pieces.append(_Piece(100, c4))
        return ParamSchedule.from_pieces(pieces)
    raise ValueError(f"unknown non-stationary scenario {which}")


def make_scenario(
    name: str, n: int | None = None, t_max: int | None = None
) -> tuple[Membership, ParamSchedule, int]:
    """Benchmark presets: stat-1..stat-4 (default n=100, T=300 snapshots) and
    nonstat-1..nonstat-4 (default n=100, T=175 snapshots).

    The returned horizon counts transition steps; the trajectory additionally
    contains the initial snapshot, for t_max + 1 snapshots in total.
    """
    try:
        kind, num_s = name.rsplit("-", 1)
        num = int(num_s)
    except ValueError:
        raise ValueError(f"unknown scenario: {name!r}") from None
    if kind not in ("stat", "nonstat") or num not in (1, 2, 3, 4):
        raise ValueError(f"unknown scenario: {name!r}")
    n = 100 if n is None else n
    z = Membership.balanced(n, 2)
    if kind == "stat":
        horizon = (300 if t_max is None else t_max) - 1
        return z, ParamSchedule.constant(_stationary_connectivity(num)), horizon
    horizon = (175 if t_max is None else t_max) - 1
    return z, _nonstationary_schedule(num), horizon
