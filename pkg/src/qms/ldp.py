"""Large deviations of the empirical mean of the measurement record.

The tilted transfer operator ``R(alpha) = sum_m e^{alpha m} T_m / w(e^{alpha M})``
carries the moment generating function through
``E[exp(n alpha Xbar_n)] = w(e^{alpha M})^n <psi_S, R(alpha)^n psi_S>``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyExposedSet, NonUniqueLeadingEigenvalue, ZeroOverlap
from .transfer import CLUSTER_TOL, MeasurementOperator, TransferFamily, riesz_projection

ALPHA_MAX = 40.0
LEADING_MARGIN = 1e-8
OVERLAP_TOL = 1e-10
DIFF_STEP = 1e-6


def tilt_normalization(tf: TransferFamily, meas: MeasurementOperator, alpha: float) -> float:
    """``w_in(e^{alpha M})``."""
    weights = np.exp(alpha * np.asarray(meas.eigenvalues))
    probs = [tf.incoming.expect(e).real for e in meas.projections]
    return float(np.dot(weights, probs))


def deformed_operator(tf: TransferFamily, meas: MeasurementOperator | None, alpha: float) -> np.ndarray:
    """``sum_m e^{alpha m} T_m / w_in(e^{alpha M})``; equals ``T`` at ``alpha = 0``."""
    meas = meas or tf.measurement
    alpha = float(alpha)
    # Shift by the largest exponent so that e^{alpha m} never overflows.
    shift = max(alpha * x for x in meas.eigenvalues)
    weights = np.exp(alpha * np.asarray(meas.eigenvalues) - shift)
    probs = np.array([tf.incoming.expect(e).real for e in meas.projections])
    r = sum(w * t for w, t in zip(weights, tf.t_outcome))
    return r / float(np.dot(weights, probs))


def _log_normalization(tf: TransferFamily, meas: MeasurementOperator, alpha: float) -> float:
    x = alpha * np.asarray(meas.eigenvalues)
    shift = x.max()
    probs = np.array([tf.incoming.expect(e).real for e in meas.projections])
    return float(shift + np.log(np.dot(np.exp(x - shift), probs)))


def leading_eigenvalue(r: np.ndarray, psi: np.ndarray) -> complex:
    """Eigenvalue of largest modulus among those seen by ``psi``.

    Eigenvalues within ``LEADING_MARGIN`` of the top modulus are grouped by
    value; groups whose spectral projection has no overlap with ``psi`` are
    dropped.  Exactly one group must remain.
    """
    ev = np.linalg.eigvals(r)
    mods = np.abs(ev)
    top = ev[mods >= mods.max() - LEADING_MARGIN]
    centers: list[complex] = []
    for z in top:
        if all(abs(z - c) > CLUSTER_TOL * max(1.0, abs(c)) for c in centers):
            centers.append(complex(z))
    visible = []
    for c in centers:
        if len(centers) == 1:
            overlap = np.vdot(psi, riesz_projection(r, c) @ psi)
        else:
            radius = 0.5 * min(abs(c - o) for o in ev if abs(c - o) > CLUSTER_TOL)
            overlap = np.vdot(psi, riesz_projection(r, c, radius, margin=0.0) @ psi)
        if abs(overlap) > OVERLAP_TOL:
            visible.append(c)
    if not visible:
        raise ZeroOverlap(f"psi_S misses the leading spectral subspace; spectrum {np.round(ev, 10)}")
    if len(visible) > 1:
        raise NonUniqueLeadingEigenvalue(f"several leading eigenvalues {np.round(visible, 10)}")
    return visible[0]


def lmgf(tf: TransferFamily, meas: MeasurementOperator | None, alpha: float) -> float:
    """``Lambda(alpha) = log w_in(e^{alpha M}) + log |rho_+(alpha)|``."""
    meas = meas or tf.measurement
    rho = leading_eigenvalue(deformed_operator(tf, meas, alpha), tf.psi_s)
    return _log_normalization(tf, meas, alpha) + float(np.log(abs(rho)))


def leading_modulus(tf: TransferFamily, meas: MeasurementOperator | None, alpha: float) -> float:
    return float(abs(leading_eigenvalue(deformed_operator(tf, meas or tf.measurement, alpha),
                                        tf.psi_s)))


def log_moment(tf: TransferFamily, meas: MeasurementOperator | None, alpha: float, n: int) -> float:
    """``log E[exp(n alpha Xbar_n)]`` from the exact matrix product."""
    meas = meas or tf.measurement
    r = deformed_operator(tf, meas, alpha)
    v = tf.psi_s.copy()
    log_scale = 0.0
    for _ in range(n):
        v = r @ v
        s = np.linalg.norm(v)
        v /= s
        log_scale += np.log(s)
    inner = np.vdot(tf.psi_s, v)
    return float(n * _log_normalization(tf, meas, alpha) + log_scale + np.log(abs(inner)))


def lmgf_direct_check(tf: TransferFamily, meas: MeasurementOperator | None, alpha: float,
                      n1: int = 200, n2: int = 400) -> float:
    """Distance between ``lmgf`` and the growth rate of the exact moments.

    The growth rate is taken between ``n1`` and ``n2`` so that the constant
    prefactor of ``<psi_S, R^n psi_S>`` cancels.
    """
    rate = (log_moment(tf, meas, alpha, n2) - log_moment(tf, meas, alpha, n1)) / (n2 - n1)
    return abs(rate - lmgf(tf, meas, alpha))


def lmgf_derivative(lam: Callable[[float], float], alpha: float, h: float = DIFF_STEP) -> float:
    return (lam(alpha + h) - lam(alpha - h)) / (2 * h)


@dataclass(frozen=True)
class RatePoint:
    x: float
    rate: float
    alpha: float
    exposed: bool


def legendre_point(lam: Callable[[float], float], x: float, alpha_max: float = ALPHA_MAX,
                   tol: float = 1e-12, max_iter: int = 100) -> RatePoint:
    """``sup_alpha alpha x - Lambda(alpha)`` by safeguarded Newton on ``Lambda'(alpha) = x``.

    Newton steps use a central-difference second derivative and fall back to
    bisection when they leave the current bracket.  When ``x`` lies outside
    the range of ``Lambda'`` on ``[-alpha_max, alpha_max]`` the boundary value
    is returned and the point is flagged as not exposed.
    """
    def g(a):
        return lmgf_derivative(lam, a) - x

    lo, hi = -alpha_max, alpha_max
    g_lo, g_hi = g(lo), g(hi)
    if g_lo > 0 or g_hi < 0:
        best = max((lo, hi), key=lambda a: a * x - lam(a))
        return RatePoint(x, max(0.0, best * x - lam(best)), best, False)
    a = 0.0
    for _ in range(max_iter):
        ga = g(a)
        if abs(ga) < tol:
            break
        if ga > 0:
            hi = a
        else:
            lo = a
        curv = (lam(a + 1e-4) - 2 * lam(a) + lam(a - 1e-4)) / 1e-8
        step = a - ga / curv if curv > 0 else None
        a = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-13:
            break
    # A flat-top at the bracket edge means the sup is only approached.
    exposed = -alpha_max < a < alpha_max and abs(g(a)) < 1e-6
    return RatePoint(x, max(0.0, a * x - lam(a)), a, bool(exposed))


@dataclass
class LdpCurve:
    alphas: np.ndarray
    lambda_vals: np.ndarray
    rho_plus: np.ndarray
    xs: np.ndarray
    rate_vals: np.ndarray
    exposed_flags: np.ndarray
    mean: float
    lam: Callable[[float], float] = field(repr=False, default=None)

    def rate(self, x: float) -> RatePoint:
        return legendre_point(self.lam, x)

    def write_csv(self, lambda_path, rate_path, header: str = "") -> None:
        with open(lambda_path, "w", newline="") as fh:
            if header:
                fh.write(header + "\n")
            w = csv.writer(fh)
            w.writerow(["alpha", "Lambda", "rho_plus"])
            for row in zip(self.alphas, self.lambda_vals, self.rho_plus):
                w.writerow([f"{v:.17g}" for v in row])
        with open(rate_path, "w", newline="") as fh:
            if header:
                fh.write(header + "\n")
            w = csv.writer(fh)
            w.writerow(["x", "rate", "exposed"])
            for x, r, e in zip(self.xs, self.rate_vals, self.exposed_flags):
                w.writerow([f"{x:.17g}", f"{r:.17g}", str(bool(e)).lower()])


def ldp_curve(tf: TransferFamily, alphas: Sequence[float], xs: Sequence[float] | None = None,
              meas: MeasurementOperator | None = None) -> LdpCurve:
    """``Lambda`` on an alpha grid and its Legendre transform on an x grid."""
    meas = meas or tf.measurement

    def lam(a):
        return lmgf(tf, meas, a)

    alphas = np.asarray(alphas, dtype=float)
    lvals = np.array([lam(a) for a in alphas])
    rhos = np.array([leading_modulus(tf, meas, a) for a in alphas])
    mean = lmgf_derivative(lam, 0.0)
    if xs is None:
        lo, hi = min(meas.eigenvalues), max(meas.eigenvalues)
        xs = np.linspace(lo, hi, 41)[1:-1]
    xs = np.asarray(xs, dtype=float)
    points = [legendre_point(lam, x) for x in xs]
    return LdpCurve(alphas, lvals, rhos, xs, np.array([p.rate for p in points]),
                    np.array([p.exposed for p in points]), mean, lam)


def gartner_ellis_interval(curve: LdpCurve, eps: float, eps_prime: float,
                           n_grid: int = 21) -> tuple[float, float]:
    """Rates bounding ``P(eps <= |Xbar_n - mean| <= eps')`` from above and below.

    Returns ``(inf over the closed set, inf over the open set restricted to
    exposed points)`` of the rate function shifted to the asymptotic mean.
    """
    if not 0 < eps < eps_prime:
        raise ValueError("need 0 < eps < eps_prime")
    mu = curve.mean
    offsets = np.linspace(eps, eps_prime, n_grid)
    closed = [curve.rate(mu + s * d) for d in offsets for s in (1, -1)]
    # The open shell's infimum is approached at its inner edge.
    inner = offsets.copy()
    inner[0] += 1e-9 * (eps_prime - eps)
    inner[-1] -= 1e-9 * (eps_prime - eps)
    opened = [curve.rate(mu + s * d) for d in inner for s in (1, -1)]
    exposed = [p.rate for p in opened if p.exposed]
    if not exposed:
        raise EmptyExposedSet(f"no exposed points in the shell ({eps}, {eps_prime}) around {mu}")
    return min(p.rate for p in closed), min(exposed)


def spectral_distance(r: np.ndarray, reference: np.ndarray) -> float:
    """``max_z in spec(r) dist(z, spec(reference))``."""
    a = np.linalg.eigvals(r)
    b = np.linalg.eigvals(reference)
    return float(np.abs(a[:, None] - b[None, :]).min(axis=1).max())
