"""Reduced dynamics (transfer) operators and their spectral analysis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ClusterNotIsolated,
    DegenerateTop,
    DimensionMismatch,
    InvalidInput,
    NoFixedPoint,
    NonSimpleEigenvalue,
    NotAProbability,
    ZeroOverlap,
)
from .standard_rep import (
    IncomingState,
    StandardForm,
    embed_pair,
    is_hermitian,
    propagator,
)

CLUSTER_TOL = 1e-9
UNIT_CIRCLE_TOL = 1e-8
ISOLATION_MARGIN = 1e-8


@dataclass(frozen=True)
class MeasurementOperator:
    """A probe observable with its distinct eigenvalues and spectral projections.

    Eigenvalues are sorted in decreasing order; outcome indices refer to
    that order throughout the package.
    """

    m: np.ndarray
    eigenvalues: tuple[float, ...]
    projections: tuple[np.ndarray, ...]

    @classmethod
    def from_matrix(cls, m, cluster_tol: float = 1e-9) -> "MeasurementOperator":
        m = np.asarray(m, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch("measurement operator must be square")
        if not is_hermitian(m):
            raise InvalidInput("measurement operator is not Hermitian")
        w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
        order = np.argsort(-w, kind="stable")
        w, u = w[order], u[:, order]
        groups: list[list[int]] = []
        for i, x in enumerate(w):
            if groups and abs(w[groups[-1][0]] - x) <= cluster_tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        values = tuple(float(np.mean(w[g])) for g in groups)
        projs = tuple(u[:, g] @ u[:, g].conj().T for g in groups)
        return cls(m=m, eigenvalues=values, projections=projs)

    @property
    def n_outcomes(self) -> int:
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    def index_of(self, value: float, tol: float = 1e-9) -> int:
        for i, x in enumerate(self.eigenvalues):
            if abs(x - value) <= tol:
                return i
        raise InvalidInput(f"{value!r} is not an eigenvalue of the measurement operator")

    def projection(self, subset: Iterable[int]) -> np.ndarray:
        out = np.zeros_like(self.m)
        for i in set(subset):
            out = out + self.projections[i]
        return out

    def function(self, f) -> np.ndarray:
        """``f(M)`` through the spectral decomposition."""
        return sum(f(x) * e for x, e in zip(self.eigenvalues, self.projections))


@dataclass(frozen=True)
class TransferFamily:
    """The per-outcome operators ``T_m`` on the doubled scatterer space."""

    t_outcome: tuple[np.ndarray, ...]
    measurement: MeasurementOperator
    scatterer: StandardForm
    incoming: IncomingState
    tau: float
    coupling: float = float("nan")

    @property
    def psi_s(self) -> np.ndarray:
        return self.scatterer.psi

    @property
    def t_full(self) -> np.ndarray:
        return sum(self.t_outcome)

    @property
    def n_outcomes(self) -> int:
        return len(self.t_outcome)

    @property
    def all_outcomes(self) -> tuple[int, ...]:
        return tuple(range(self.n_outcomes))

    def t_subset(self, subset: Iterable[int]) -> np.ndarray:
        idx = sorted(set(subset))
        if not idx:
            return np.zeros_like(self.t_outcome[0])
        return sum(self.t_outcome[i] for i in idx)

    def free_propagator(self) -> np.ndarray:
        return propagator(self.scatterer.liouvillean, self.tau)

    def embed(self, a) -> np.ndarray:
        return self.scatterer.embed_observable(a)


def compress(op: np.ndarray, incoming: IncomingState, n_s: int) -> np.ndarray:
    """``P B*B op P`` restricted to the doubled scatterer space."""
    psi_p = incoming.probe.psi
    w = np.kron(np.eye(n_s), psi_p[:, None])
    bb = incoming.b_operator.conj().T @ incoming.b_operator
    return w.conj().T @ np.kron(np.eye(n_s), bb) @ op @ w


def build_transfer_family(k, scatterer: StandardForm, incoming: IncomingState,
                          meas: MeasurementOperator, tau: float,
                          coupling: float = float("nan")) -> TransferFamily:
    """Build ``T_m = P B*B exp(i tau K) E_m P`` for every outcome ``m``."""
    k = np.asarray(k, dtype=complex)
    n_s = scatterer.doubled_dim
    n_p = incoming.probe.doubled_dim
    if k.shape != (n_s * n_p, n_s * n_p):
        raise DimensionMismatch(f"K has shape {k.shape}, expected {(n_s * n_p,) * 2}")
    if meas.dim != incoming.probe.dim:
        raise DimensionMismatch("measurement operator does not act on the probe")
    u = propagator(k, tau)
    ops = []
    for e in meas.projections:
        e_joint = embed_pair(np.kron(np.eye(scatterer.dim), e), scatterer.dim, meas.dim)
        ops.append(compress(u @ e_joint, incoming, n_s))
    return TransferFamily(tuple(ops), meas, scatterer, incoming, float(tau), float(coupling))


def cluster_around(eigenvalues: np.ndarray, center: complex, tol: float) -> np.ndarray:
    """Boolean mask of eigenvalues within ``tol * max(1, |center|)`` of ``center``."""
    return np.abs(np.asarray(eigenvalues) - center) <= tol * max(1.0, abs(center))


def default_isolation_radius(eigenvalues: np.ndarray, center: complex,
                             tol: float = CLUSTER_TOL) -> float:
    """A radius separating the cluster at ``center`` from the rest of the spectrum."""
    ev = np.asarray(eigenvalues)
    d = np.abs(ev - center)
    inside = cluster_around(ev, center, tol)
    r_in = d[inside].max() if inside.any() else 0.0
    r_out = d[~inside].min() if (~inside).any() else 1.0
    return float(0.5 * (r_in + r_out)) if r_out > r_in else float(r_out)


def riesz_projection(op, center: complex = 1.0, isolation_radius: float | None = None,
                     margin: float = ISOLATION_MARGIN) -> np.ndarray:
    """Spectral projection of ``op`` for the eigenvalues inside a disk.

    The disk is centred at ``center`` with radius ``isolation_radius`` (chosen
    from the spectrum when omitted).  Generalized eigenvectors are handled by
    block-diagonalizing an ordered Schur form.  Returns the zero matrix when
    the disk holds no eigenvalue.
    """
    a = np.asarray(op, dtype=complex)
    n = a.shape[0]
    ev = np.linalg.eigvals(a)
    r = default_isolation_radius(ev, center) if isolation_radius is None else isolation_radius
    d = np.abs(ev - center)
    if np.any(np.abs(d - r) < margin):
        raise ClusterNotIsolated(
            f"eigenvalue within {margin:g} of the contour |z - {center}| = {r:g}")
    k = int(np.count_nonzero(d < r))
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    if k == n:
        return np.eye(n, dtype=complex)
    t, z, sdim = scipy.linalg.schur(a, output="complex",
                                    sort=lambda x: abs(x - center) < r)
    if sdim != k:
        raise ClusterNotIsolated("Schur reordering disagrees with the eigenvalue count")
    t11, t12, t22 = t[:k, :k], t[:k, k:], t[k:, k:]
    y = scipy.linalg.solve_sylvester(t11, -t22, -t12)
    block = np.zeros((n, n), dtype=complex)
    block[:k, :k] = np.eye(k)
    block[:k, k:] = -y
    return z @ block @ z.conj().T


def ergodic_projection(op, n_terms: int) -> np.ndarray:
    """Cesaro mean ``(1/N) sum_{n=1}^N op^n``.

    Converges to the Riesz projection at 1 at rate ``O(1/N)`` when the
    eigenvalue 1 is semisimple.
    """
    a = np.asarray(op, dtype=complex)
    power = np.eye(a.shape[0], dtype=complex)
    total = np.zeros_like(power)
    for _ in range(n_terms):
        power = power @ a
        total += power
    return total / n_terms


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    gap: float
    condition_a: bool
    psi_star: np.ndarray | None
    riesz_projection: np.ndarray
    nilpotent_norm: float
    fixed_multiplicity: int

    def require_condition_a(self) -> "SpectralData":
        if not self.condition_a:
            raise DegenerateTop(
                f"Condition A fails: {self.fixed_multiplicity} eigenvalue(s) at 1, "
                f"gap {self.gap:.3g}")
        return self


def _null_vector(a: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(a)
    return vh[-1].conj()


def spectral_analysis(tf: TransferFamily, strict: bool = False) -> SpectralData:
    """Eigenvalues, gap, Condition A and the Riesz projection at 1 of ``T``.

    With ``strict=True`` a failure of Condition A raises :class:`DegenerateTop`;
    otherwise it is reported through ``condition_a``.
    """
    t = tf.t_full
    ev = np.linalg.eigvals(t)
    near_one = cluster_around(ev, 1.0, CLUSTER_TOL)
    if not near_one.any():
        # Semisimple eigenvalue 1 is guaranteed; loosen only for the diagnosis.
        if not cluster_around(ev, 1.0, UNIT_CIRCLE_TOL).any():
            raise NoFixedPoint(f"no eigenvalue at 1; spectrum {np.round(ev, 12)}")
        near_one = cluster_around(ev, 1.0, UNIT_CIRCLE_TOL)
    mult = int(near_one.sum())
    others = np.abs(ev[~near_one])
    gap = float(1.0 - others.max()) if others.size else 1.0
    top = np.abs(ev) > 1.0 - UNIT_CIRCLE_TOL
    condition_a = bool(mult == 1 and int(top.sum()) == 1)
    radius = default_isolation_radius(ev, 1.0)
    d = np.abs(ev - 1.0)
    spread = d[d > radius].min() - radius if np.any(d > radius) else radius
    pi = riesz_projection(t, 1.0, radius, margin=min(ISOLATION_MARGIN, 0.5 * spread))
    nilpotent = float(np.linalg.norm((t - np.eye(t.shape[0])) @ pi, 2))
    psi_star = None
    if mult == 1:
        psi_star = _null_vector((t - np.eye(t.shape[0])).conj().T)
        overlap = np.vdot(psi_star, tf.psi_s)
        psi_star = psi_star / np.conj(overlap)
    data = SpectralData(ev, gap, condition_a, psi_star, pi, nilpotent, mult)
    if strict:
        data.require_condition_a()
    return data


def _fixed_projection(op: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(op)
    return riesz_projection(op, 1.0, default_isolation_radius(ev, 1.0))


def subset_projection(tf: TransferFamily, subset: Iterable[int]) -> np.ndarray:
    """Riesz projection of ``T_S`` at the eigenvalue 1."""
    return _fixed_projection(tf.t_subset(subset))


def eventually_probability(tf: TransferFamily, subset: Sequence[int],
                           spectral: SpectralData | None = None) -> float:
    """``P(X_n in S eventually) = <psi_S, Pi Pi_S psi_S>``."""
    pi = spectral.riesz_projection if spectral is not None else _fixed_projection(tf.t_full)
    pi_s = subset_projection(tf, subset)
    value = np.vdot(tf.psi_s, pi @ pi_s @ tf.psi_s)
    if abs(value.imag) > 1e-8 or not -1e-8 <= value.real <= 1 + 1e-8:
        raise NotAProbability(f"eventually-probability evaluated to {value}")
    return float(min(1.0, max(0.0, value.real)))


def asymptotic_state(tf: TransferFamily, subset: Sequence[int], observable) -> complex:
    """Limit state of the scatterer given that ``X_n`` stays in ``S``.

    Requires 1 to be a simple eigenvalue of ``T_S``; with ``Pi_S = |psi><psi*|``
    the result is ``<psi*, A psi_S> / <psi*, psi_S>``.
    """
    ts = tf.t_subset(subset)
    ev = np.linalg.eigvals(ts)
    mult = int(cluster_around(ev, 1.0, UNIT_CIRCLE_TOL).sum())
    if mult != 1:
        raise NonSimpleEigenvalue(
            f"eigenvalue 1 of T_S has multiplicity {mult}; the limit depends on the path")
    pi_s = riesz_projection(ts, 1.0, default_isolation_radius(ev, 1.0, UNIT_CIRCLE_TOL))
    _, _, vh = np.linalg.svd(pi_s)
    psi_star = vh[0].conj()
    denom = np.vdot(psi_star, tf.psi_s)
    if abs(denom) <= 1e-10:
        raise ZeroOverlap("<psi*, psi_S> vanishes")
    return complex(np.vdot(psi_star, tf.embed(observable) @ tf.psi_s) / denom)
