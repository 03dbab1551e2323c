"""Adaptive look-back window selection via averaged negative log-likelihood
stability, plus parametric-bootstrap calibration of the tolerance constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .online import GridStore, SuffStats, full_history_estimate, update

__all__ = [
    "ToleranceRule",
    "WindowDecision",
    "WindowEval",
    "tolerance",
    "loss_tensor",
    "loss_gap",
    "evaluate_windows",
    "select_window",
    "calibrate_ctau",
    "GridExhaustedError",
    "DEFAULT_C_TAU",
]

CLAMP_EPS = 1e-6

# Default tolerance constant for the benchmark regime (n=100, L=2, T=175),
# chosen to reproduce the published error levels; see README for how it
# relates to the bootstrap-calibrated value.
DEFAULT_C_TAU = 0.15


def default_drift_envelope(t: float) -> float:
    return t**-0.5


@dataclass(frozen=True)
class ToleranceRule:
    """Tolerance tau(k) = c_tau * max{ln(n v L v T) ln(T) lnln(T) / k, V(k)^2}."""

    c_tau: float
    v_fn: object = default_drift_envelope  # non-increasing drift envelope, or None

    def __post_init__(self):
        if not self.c_tau > 0:
            raise ValueError("c_tau must be positive")


def tolerance(k: int, rule: ToleranceRule, n: int, l_count: int, t_max: int) -> float:
    if t_max < 3:
        raise ValueError("horizon must be >= 3 for the log-log term")
    if k < 1:
        raise ValueError("window must be >= 1")
    dim = max(n, l_count, t_max)
    stochastic = np.log(dim) * np.log(t_max) * np.log(np.log(t_max)) / k
    drift = rule.v_fn(k) ** 2 if rule.v_fn is not None else 0.0
    return float(rule.c_tau * max(stochastic, drift))


@dataclass(frozen=True)
class WindowEval:
    """Per-window MLEs plus the four per-edge count aggregates of the window."""

    k: int
    theta: np.ndarray
    delta: np.ndarray
    degenerate: np.ndarray
    c01: np.ndarray
    c10: np.ndarray
    c11: np.ndarray
    c00: np.ndarray


@dataclass(frozen=True)
class WindowDecision:
    k_hat: int
    brk: bool
    gap_trace: dict[int, float] = field(default_factory=dict)


def _clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, CLAMP_EPS, 1 - CLAMP_EPS)


def loss_tensor(ev: WindowEval, theta: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Averaged negative log-likelihood of the window's counts at (theta, delta)."""
    th = _clamp(theta)
    de = _clamp(delta)
    ll = (
        ev.c01 * np.log(th)
        + ev.c00 * np.log1p(-th)
        + ev.c10 * np.log(de)
        + ev.c11 * np.log1p(-de)
    )
    out = -ll / ev.k
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite loss despite clamping")
    return out


def _offdiag_mask(shape: tuple[int, ...]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    iu, ju = np.triu_indices(shape[0], k=1)
    mask[iu, ju, :] = True
    return mask


def loss_gap(ev_small: WindowEval, ev_large: WindowEval, valid: np.ndarray) -> float:
    """Worst per-edge loss deterioration of the large-window MLEs under the
    small window's averaged likelihood, over the valid (non-degenerate,
    upper-triangular off-diagonal) entries.
    """
    return _gap_from_own(
        ev_small, loss_tensor(ev_small, ev_small.theta, ev_small.delta), ev_large, valid
    )


def _gap_from_own(
    ev_small: WindowEval, own_loss: np.ndarray, ev_large: WindowEval, valid: np.ndarray
) -> float:
    diff = loss_tensor(ev_small, ev_large.theta, ev_large.delta) - own_loss
    mask = valid & ~ev_small.degenerate & ~ev_large.degenerate
    if not mask.any():
        return 0.0
    return float(np.max(diff[mask]))


def evaluate_windows(store: GridStore, windows: list[int] | None = None) -> list[WindowEval]:
    """Windowed MLEs and count aggregates for every candidate window."""
    evals = []
    for k in windows if windows is not None else store.grid:
        d01, d10, dact = store.window_counts(k)
        theta, delta, degenerate = store.windowed_mle(k)
        evals.append(
            WindowEval(
                k=k,
                theta=theta,
                delta=delta,
                degenerate=degenerate,
                c01=d01,
                c10=d10,
                c11=dact - d10,
                c00=(k - dact) - d01,
            )
        )
    return evals


@dataclass(frozen=True)
class _ScanEval:
    """One window's counts restricted to upper-triangular off-diagonal entries,
    with the candidate's log-probability tables precomputed."""

    k: int
    c01: np.ndarray
    c00: np.ndarray
    c10: np.ndarray
    c11: np.ndarray
    log_th: np.ndarray
    log1m_th: np.ndarray
    log_de: np.ndarray
    log1m_de: np.ndarray
    degenerate: np.ndarray
    own_loss: np.ndarray


def _scan_eval(ev: WindowEval, iu: np.ndarray, ju: np.ndarray) -> _ScanEval:
    th = _clamp(ev.theta[iu, ju, :])
    de = _clamp(ev.delta[iu, ju, :])
    se = _ScanEval(
        k=ev.k,
        c01=ev.c01[iu, ju, :],
        c00=ev.c00[iu, ju, :],
        c10=ev.c10[iu, ju, :],
        c11=ev.c11[iu, ju, :],
        log_th=np.log(th),
        log1m_th=np.log1p(-th),
        log_de=np.log(de),
        log1m_de=np.log1p(-de),
        degenerate=ev.degenerate[iu, ju, :],
        own_loss=np.empty(0),
    )
    object.__setattr__(se, "own_loss", _scan_loss(se, se))
    return se


def _scan_loss(counts: _ScanEval, cand: _ScanEval) -> np.ndarray:
    ll = (
        counts.c01 * cand.log_th
        + counts.c00 * cand.log1m_th
        + counts.c10 * cand.log_de
        + counts.c11 * cand.log1m_de
    )
    return -ll / counts.k


def _scan_gap(counts: _ScanEval, cand: _ScanEval) -> float:
    diff = _scan_loss(counts, cand) - counts.own_loss
    mask = ~counts.degenerate & ~cand.degenerate
    if not mask.any():
        return 0.0
    return float(np.max(diff[mask]))


def select_window(
    store: GridStore,
    rule: ToleranceRule,
    t_max: int,
    evals: list[WindowEval] | None = None,
) -> WindowDecision:
    """Stability scan over the sorted grid: accept a candidate iff its MLEs do
    not degrade any shorter window's averaged loss beyond the tolerance.
    """
    if evals is None:
        evals = evaluate_windows(store)
    n, _, l_count = store.current.n01.shape
    iu, ju = np.triu_indices(n, k=1)
    scans = [_scan_eval(ev, iu, ju) for ev in evals]
    taus = [tolerance(ev.k, rule, n, l_count, t_max) for ev in evals]
    trace: dict[int, float] = {}
    q = 0
    brk = False
    while q < len(scans):
        cand = scans[q]
        for u in range(q + 1):
            gap = _scan_gap(scans[u], cand)
            trace[cand.k] = max(trace.get(cand.k, 0.0), gap)
            if gap > taus[u]:
                brk = True
                break
        if brk:
            break
        q += 1
    k_hat = evals[q - 1].k if brk else evals[-1].k
    return WindowDecision(k_hat=k_hat, brk=brk, gap_trace=trace)


class GridExhaustedError(RuntimeError):
    """No constant in the candidate grid met the acceptance level."""


def _fit_training_mle(train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full-data MLE with an all-zero pre-sample state, per the calibration recipe."""
    n, _, l_count = train.shape[1:]
    stats = SuffStats.zeros(n, l_count)
    prev = np.zeros((n, n, l_count))
    for snap in train:
        stats = update(stats, prev, snap)
        prev = snap
    theta, delta, _ = full_history_estimate(stats)
    return theta, delta


def _bootstrap_trajectory(
    theta: np.ndarray, delta: np.ndarray, t_train: int, rng: np.random.Generator
) -> np.ndarray:
    n, _, l_count = theta.shape
    iu, ju = np.triu_indices(n, k=1)
    th = theta[iu, ju, :]
    de = delta[iu, ju, :]
    out = np.zeros((t_train + 1, n, n, l_count), dtype=np.uint8)
    state = np.zeros((iu.size, l_count), dtype=np.uint8)
    for t in range(1, t_train + 1):
        u = rng.random(state.shape)
        state = np.where(state == 0, u < th, u >= de).astype(np.uint8)
        out[t, iu, ju, :] = state
        out[t, ju, iu, :] = state
    return out


def critical_constant(traj: np.ndarray, burn_in: int, v_fn=default_drift_envelope) -> float:
    """Smallest tolerance constant under which the selection keeps the largest
    grid candidate at every post-burn-in step of the trajectory.

    Every pairwise gap is divided by its unit-constant tolerance; the maximum
    of those ratios over all steps t >= burn_in is returned. The largest grid
    candidate stands in for the full history, which the geometric grid does
    not contain verbatim.
    """
    n, _, l_count = traj.shape[1:]
    store = GridStore(n, l_count)
    t_max = traj.shape[0] - 1
    unit = ToleranceRule(c_tau=1.0, v_fn=v_fn)
    iu, ju = np.triu_indices(n, k=1)
    worst = 0.0
    for t in range(1, t_max + 1):
        store.advance(traj[t - 1], traj[t])
        if t < burn_in:
            continue
        evals = evaluate_windows(store)
        scans = [_scan_eval(ev, iu, ju) for ev in evals]
        taus = [tolerance(ev.k, unit, n, l_count, t_max) for ev in evals]
        for q, cand in enumerate(scans):
            for u in range(q + 1):
                worst = max(worst, _scan_gap(scans[u], cand) / taus[u])
    return worst


def keeps_full_window(traj: np.ndarray, rule: ToleranceRule, burn_in: int) -> bool:
    """True iff the selected window equals the largest grid candidate at every
    post-burn-in step."""
    return critical_constant(traj, burn_in, v_fn=rule.v_fn) <= rule.c_tau


def calibrate_ctau(
    train: np.ndarray,
    grid_c: list[float],
    burn_in: int,
    alpha: float,
    b: int,
    seed: int,
) -> tuple[float, dict[float, float]]:
    """Parametric-bootstrap calibration of the tolerance constant.

    Fits the full-data MLE on the training trajectory, simulates b bootstrap
    trajectories from it, and returns the smallest constant whose acceptance
    rate (fraction of trajectories keeping the full window at every step in
    [burn_in, T]) reaches 1 - alpha, together with the acceptance curve.
    """
    grid_c = sorted(grid_c)
    if not grid_c:
        raise ValueError("empty candidate grid")
    theta, delta = _fit_training_mle(np.asarray(train, dtype=np.uint8))
    t_train = train.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    # one pass per trajectory: its critical constant decides every candidate
    criticals = [
        critical_constant(_bootstrap_trajectory(theta, delta, t_train, rng), burn_in)
        for _ in range(b)
    ]
    acceptance: dict[float, float] = {}
    for c in grid_c:
        acceptance[c] = sum(crit <= c for crit in criticals) / b
        if acceptance[c] >= 1 - alpha:
            return c, acceptance
    raise GridExhaustedError(
        f"no candidate reached acceptance {1 - alpha:.3f}; curve: {acceptance}"
    )
