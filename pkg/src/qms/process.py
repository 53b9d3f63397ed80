"""The measurement process: exact laws, seeded sampling and correlations."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegenerateHistory, NotAProbability
from .transfer import TransferFamily

NEGATIVE_TOL = 1e-10
CHUNK = 4096


def joint_probability(tf: TransferFamily, subsets: Sequence[Iterable[int]]) -> float:
    """``P(X_1 in S_1, ..., X_n in S_n) = <psi_S, T_{S_1} ... T_{S_n} psi_S>``."""
    v = tf.psi_s
    for s in reversed(list(subsets)):
        v = tf.t_subset(s) @ v
    value = np.vdot(tf.psi_s, v)
    if abs(value.imag) > 1e-10 or not -1e-10 <= value.real <= 1 + 1e-10:
        raise NotAProbability(f"joint probability evaluated to {value}")
    return float(min(1.0, max(0.0, value.real)))


def sequence_probability(tf: TransferFamily, outcomes: Sequence[int]) -> float:
    return joint_probability(tf, [[m] for m in outcomes])


def rng_for(seed: int, stream: int | None = None) -> np.random.Generator:
    """Counter-based generator; ``stream`` selects an independent sub-stream."""
    entropy = [int(seed)] if stream is None else [int(seed), int(stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass
class Trajectory:
    seed: int
    outcomes: np.ndarray
    log_weight: np.ndarray
    values: np.ndarray = field(repr=False)
    stream: int | None = None

    @property
    def n(self) -> int:
        return len(self.outcomes)


def _sample_block(tf: TransferFamily, uniforms: np.ndarray, keep_weights: bool):
    """Sequential exact sampling for a block of trajectories.

    ``uniforms`` has shape ``(B, n)``; returns outcome indices ``(B, n)`` and
    log-weights (``(B, n)`` if ``keep_weights`` else final ``(B,)``).
    """
    n_traj, n = uniforms.shape
    psi = tf.psi_s
    t_ops = np.stack(tf.t_outcome)
    t_dag = t_ops.conj().transpose(0, 2, 1)
    t_psi = t_ops @ psi
    ell = np.tile(psi, (n_traj, 1))
    outcomes = np.empty((n_traj, n), dtype=np.int16)
    logw = np.zeros((n_traj, n)) if keep_weights else np.zeros(n_traj)
    running = np.zeros(n_traj)
    rows = np.arange(n_traj)
    for step in range(n):
        norm = (ell.conj() @ psi).real
        if np.any(norm < 1e-300):
            raise DegenerateHistory("history probability underflowed after renormalization")
        probs = (ell.conj() @ t_psi.T).real / norm[:, None]
        if probs.min() < -NEGATIVE_TOL:
            raise NotAProbability(f"conditional probability {probs.min():.3g} < 0")
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        cdf = np.cumsum(probs, axis=1)
        pick = (uniforms[:, step, None] >= cdf).sum(axis=1)
        pick = np.minimum(pick, tf.n_outcomes - 1)
        outcomes[:, step] = pick
        running += np.log(probs[rows, pick])
        if keep_weights:
            logw[:, step] = running
        ell = np.einsum("bij,bj->bi", t_dag[pick], ell)
        # Keep <ell, psi> = 1 so long histories never underflow.
        ell /= (ell.conj() @ psi).real[:, None]
    return outcomes, (logw if keep_weights else running)


def sample_trajectory(tf: TransferFamily, n: int, seed: int,
                      stream: int | None = None) -> Trajectory:
    """Draw ``X_1, ..., X_n`` from the exact conditional laws.

    Deterministic in ``(seed, stream, n)``.
    """
    u = rng_for(seed, stream).random(n)[None, :]
    out, logw = _sample_block(tf, u, keep_weights=True)
    values = np.asarray(tf.measurement.eigenvalues)[out[0]]
    return Trajectory(seed, out[0].astype(int), logw[0], values, stream)


@dataclass
class Ensemble:
    seed: int
    outcomes: np.ndarray
    log_weight: np.ndarray
    eigenvalues: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.eigenvalues[self.outcomes]

    @property
    def n_trajectories(self) -> int:
        return self.outcomes.shape[0]

    def means(self) -> np.ndarray:
        return self.values.mean(axis=1)

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.seed, self.outcomes[i].astype(int), np.array([self.log_weight[i]]),
                          self.eigenvalues[self.outcomes[i]], i)


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("QMS_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def sample_ensemble(tf: TransferFamily, n: int, n_trajectories: int, seed: int,
                    workers: int | None = None) -> Ensemble:
    """Trajectory ``i`` uses stream ``i`` of ``seed``; identical to
    ``sample_trajectory(tf, n, seed, stream=i)`` whatever the worker count."""
    blocks = [(s, min(s + CHUNK, n_trajectories)) for s in range(0, n_trajectories, CHUNK)]

    def run(block):
        lo, hi = block
        u = np.stack([rng_for(seed, i).random(n) for i in range(lo, hi)])
        return _sample_block(tf, u, keep_weights=False)

    n_workers = worker_count(workers)
    if n_workers == 1 or len(blocks) == 1:
        results = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run, blocks))
    outcomes = np.concatenate([r[0] for r in results]) if results else np.empty((0, n), np.int16)
    logw = np.concatenate([r[1] for r in results]) if results else np.empty(0)
    return Ensemble(seed, outcomes, logw, np.asarray(tf.measurement.eigenvalues))


def empirical_frequency(traj: Trajectory, m: int) -> float:
    return float(np.mean(np.asarray(traj.outcomes) == m))


def empirical_mean(traj: Trajectory) -> float:
    return float(np.mean(traj.values))


@dataclass(frozen=True)
class CorrelationRecord:
    lag: int
    value: float
    events: str


def exact_two_point(tf: TransferFamily, a: int, b: int, lag: int) -> CorrelationRecord:
    """``|P(X_1 = a, X_{k+1} = b) - P(X_1 = a) P(X_{k+1} = b)|`` for lag ``k``."""
    if lag < 1:
        raise ValueError("lag must be >= 1")
    psi = tf.psi_s
    t = tf.t_full
    tail = tf.t_outcome[b] @ psi
    bridge = np.linalg.matrix_power(t, lag - 1) @ tail
    joint = np.vdot(psi, tf.t_outcome[a] @ bridge)
    p_a = np.vdot(psi, tf.t_outcome[a] @ psi)
    p_b = np.vdot(psi, t @ bridge)
    value = float(abs(joint - p_a * p_b))
    return CorrelationRecord(lag, value, f"X_1={a}, X_{lag + 1}={b}")


def correlation_table(tf: TransferFamily, a: int, b: int, lags: Iterable[int]) -> list[CorrelationRecord]:
    return [exact_two_point(tf, a, b, k) for k in lags]


def fit_decay_rate(records: Sequence[CorrelationRecord], floor: float = 1e-13) -> float:
    """Least-squares exponential rate of the correlation values above ``floor``."""
    pts = [(r.lag, r.value) for r in records if r.value > floor]
    if len(pts) < 2:
        return float("inf")
    lags, vals = np.array(pts).T
    slope, _ = np.polyfit(lags, np.log(vals), 1)
    return float(-slope)


def dependence_bound_scan(family: Callable[[float], TransferFamily], lambdas: Sequence[float],
                          k: int, n_scan: int = 10) -> list[tuple[float, float]]:
    """``sup_n max |P(X_n..X_{n+k}) - prod P(X_j)|`` over singleton outcomes, per coupling."""
    table = []
    for lam in lambdas:
        tf = family(lam)
        psi = tf.psi_s
        t = tf.t_full
        outcomes = tf.all_outcomes
        worst = 0.0
        row = psi.conj().copy()  # <psi| T^{n-1}
        for _ in range(n_scan):
            marg_rows = [row]
            for _ in range(k):
                marg_rows.append(marg_rows[-1] @ t)
            marg = [[(r @ tf.t_outcome[m] @ psi).real for m in outcomes] for r in marg_rows]
            for combo in itertools.product(outcomes, repeat=k + 1):
                v = psi
                for m in reversed(combo):
                    v = tf.t_outcome[m] @ v
                joint = (row @ v).real
                prod = np.prod([marg[j][m] for j, m in enumerate(combo)])
                worst = max(worst, abs(joint - prod))
            row = row @ t
        table.append((float(lam), float(worst)))
    return table
