"""Asymptotic frequencies and means, and their first-order expansion in the coupling."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import legendre

from .errors import ConditionAViolated, NotAProbability
from .standard_rep import propagator
from .transfer import MeasurementOperator, SpectralData, TransferFamily, spectral_analysis


def phase_average(x: np.ndarray) -> np.ndarray:
    """``(exp(ix) - 1) / (ix)``, equal to 1 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x, dtype=complex)
    nz = np.abs(x) > 1e-8
    out[nz] = np.expm1(1j * x[nz]) / (1j * x[nz])
    small = ~nz
    out[small] = 1 + 0.5j * x[small] - x[small] ** 2 / 6
    return out


def time_averaged_operator(a, h_p, tau: float) -> np.ndarray:
    """``(1/tau) int_0^tau exp(isH) a exp(-isH) ds`` in closed form."""
    a = np.asarray(a, dtype=complex)
    e, u = np.linalg.eigh(np.asarray(h_p, dtype=complex))
    a_eig = u.conj().T @ a @ u
    a_eig = a_eig * phase_average(tau * (e[:, None] - e[None, :]))
    return u @ a_eig @ u.conj().T


def _require(spectral: SpectralData) -> None:
    if not spectral.condition_a:
        raise ConditionAViolated("the asymptotic statistics need Condition A")


def asymptotic_frequency(tf: TransferFamily, spectral: SpectralData, m: int) -> float:
    """``F_m = <psi_S, Pi T_m psi_S>``."""
    _require(spectral)
    value = np.vdot(tf.psi_s, spectral.riesz_projection @ tf.t_outcome[m] @ tf.psi_s)
    if abs(value.imag) > 1e-10:
        raise NotAProbability(f"frequency has imaginary part {value.imag:.3g}")
    return float(value.real)


def asymptotic_mean(tf: TransferFamily, spectral: SpectralData,
                    meas: MeasurementOperator | None = None) -> float:
    """``mu_inf = <psi_S, Pi (sum_m m T_m) psi_S>``, cross-checked against ``sum_m m F_m``."""
    _require(spectral)
    meas = meas or tf.measurement
    t_m = sum(x * t for x, t in zip(meas.eigenvalues, tf.t_outcome))
    mu = np.vdot(tf.psi_s, spectral.riesz_projection @ t_m @ tf.psi_s)
    check = sum(x * asymptotic_frequency(tf, spectral, i) for i, x in enumerate(meas.eigenvalues))
    if abs(mu.imag) > 1e-10 or abs(mu.real - check) > 1e-10:
        raise NotAProbability(f"inconsistent asymptotic mean {mu} vs {check}")
    return float(mu.real)


def first_order_flux(v, e_avg, omega_s, omega_in, tau: float) -> float:
    """``tr((rho_S (x) rho_in) i tau [V, 1 (x) e_avg])``."""
    v = np.asarray(v, dtype=complex)
    rho_s = np.asarray(omega_s, dtype=complex)
    rho_in = np.asarray(omega_in, dtype=complex)
    lifted = np.kron(np.eye(rho_s.shape[0]), np.asarray(e_avg, dtype=complex))
    comm = v @ lifted - lifted @ v
    return float(np.trace(np.kron(rho_s, rho_in) @ (1j * tau * comm)).real)


def flux_of_mean(v, m_avg, omega_s, omega_in, tau: float) -> float:
    return first_order_flux(v, m_avg, omega_s, omega_in, tau)


@dataclass(frozen=True)
class FluxReport:
    m: float
    f_exact: float
    f_zero: float
    f_prime: float
    residual: float


def left_fixed_vector(tf: TransferFamily) -> np.ndarray:
    """``psi*`` with ``T^dagger psi* = psi*`` and ``<psi*, psi_S> = 1``.

    Taken from the smallest singular vector, so it stays usable when the gap is
    too small for a Riesz contour.
    """
    t = tf.t_full
    _, _, vh = np.linalg.svd((t - np.eye(t.shape[0])).conj().T)
    v = vh[-1].conj()
    return v / np.conj(np.vdot(v, tf.psi_s))


def asymptotic_scatterer_state(tf: TransferFamily) -> np.ndarray:
    """Density matrix of ``A -> <psi*, A psi_S>``, the large-time scatterer state."""
    psi_star = left_fixed_vector(tf)
    d = tf.scatterer.dim
    # <psi*, (A x 1) vec(R)> = tr(X^dagger A R) with psi* = vec(X), psi_S = vec(R)
    x = psi_star.reshape(d, d)
    r = tf.psi_s.reshape(d, d)
    rho = r @ x.conj().T
    return 0.5 * (rho + rho.conj().T)


def limiting_scatterer_state(model, delta: float = 1e-3) -> np.ndarray:
    """Weak-coupling limit of the asymptotic scatterer state.

    Cubic extrapolation from couplings ``delta, 2 delta, 3 delta``.  This is the
    state in which the first-order fluxes are to be evaluated; it coincides
    with the reference state only in special cases.
    """
    states = [asymptotic_scatterer_state(model.with_coupling(k * delta).transfer_family())
              for k in (1, 2, 3)]
    return 3 * states[0] - 3 * states[1] + states[2]


def flux_report(model, omega_s=None) -> list[FluxReport]:
    """Exact frequencies at the model's coupling against their first-order expansion.

    ``omega_s`` defaults to :func:`limiting_scatterer_state`.
    """
    tf = model.transfer_family()
    spec = spectral_analysis(tf)
    lam = model.coupling
    if omega_s is None:
        omega_s = limiting_scatterer_state(model)
    rows = []
    for i, (x, e) in enumerate(zip(model.measurement.eigenvalues, model.measurement.projections)):
        f = asymptotic_frequency(tf, spec, i)
        f0 = float(np.trace(model.rho_in @ e).real)
        e_avg = time_averaged_operator(e, model.probe.hamiltonian, model.tau)
        fp = first_order_flux(model.interaction.v, e_avg, omega_s, model.rho_in, model.tau)
        rows.append(FluxReport(x, f, f0, fp, abs(f - f0 - lam * fp)))
    total = sum(r.f_exact for r in rows)
    if abs(total - 1) > 1e-9:
        raise NotAProbability(f"frequencies sum to {total!r}")
    return rows


_GL_NODES, _GL_WEIGHTS = legendre.leggauss(32)


def _integration_matrix(nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``S[j, k] = int_{-1}^{t_j} l_k(t) dt`` for the Lagrange basis on the nodes."""
    n = nodes.size
    vander = legendre.legvander(nodes, n - 1)
    coef = (vander * weights[:, None]).T * ((2 * np.arange(n) + 1) / 2)[:, None]
    out = np.empty((n, n))
    for k in range(n):
        out[:, k] = legendre.legval(nodes, legendre.legint(coef[:, k], lbnd=-1))
    return out


_GL_INTEGRATE = _integration_matrix(_GL_NODES, _GL_WEIGHTS)


def dyson_terms(k0, v_doubled, tau: float, order: int) -> list[np.ndarray]:
    """Iterated integrals ``W_n(tau)`` with ``exp(i tau (K0 + lam I)) = exp(i tau K0) sum (i lam)^n W_n``.

    ``W_n(t) = int_0^t I(s) W_{n-1}(s) ds`` and ``I(s) = exp(-isK0) I exp(isK0)``,
    integrated on 32 Gauss-Legendre nodes with the spectral integration matrix.
    """
    k0 = np.asarray(k0, dtype=complex)
    v = np.asarray(v_doubled, dtype=complex)
    nodes = 0.5 * tau * (_GL_NODES + 1)
    weights = 0.5 * tau * _GL_WEIGHTS
    integ = 0.5 * tau * _GL_INTEGRATE
    e, u = np.linalg.eigh(0.5 * (k0 + k0.conj().T))
    v_eig = u.conj().T @ v @ u
    phases = np.exp(-1j * nodes[:, None, None] * (e[None, :, None] - e[None, None, :]))
    i_t = u[None] @ (phases * v_eig[None]) @ u.conj().T[None]
    dim = k0.shape[0]
    w_nodes = np.broadcast_to(np.eye(dim, dtype=complex), (nodes.size, dim, dim))
    terms = [np.eye(dim, dtype=complex)]
    for _ in range(order):
        integrand = i_t @ w_nodes
        terms.append(np.einsum("k,kij->ij", weights, integrand))
        w_nodes = np.einsum("jk,kab->jab", integ, integrand)
    return terms


def dyson_bound(norm_i: float, lam: float, tau: float, order: int) -> float:
    x = abs(lam) * norm_i * tau
    return x ** (order + 1) / factorial(order + 1) * np.exp(x)


def dyson_expansion_check(k0, v_doubled, lam: float, tau: float, order: int) -> float:
    """``||exp(i tau (K0 + lam I)) - truncated Dyson series||``."""
    if order > 6:
        raise ValueError("order must be <= 6")
    terms = dyson_terms(k0, v_doubled, tau, order)
    series = sum((1j * lam) ** n * w for n, w in enumerate(terms))
    exact = propagator(np.asarray(k0) + lam * np.asarray(v_doubled), tau)
    return float(np.linalg.norm(exact - propagator(k0, tau) @ series, 2))
