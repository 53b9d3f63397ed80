"""Standard (GNS-doubled) representation of finite-dimensional systems.

Conventions
-----------
A vector of the doubled space ``C^d (x) C^d`` is the row-major flattening of a
``d x d`` matrix ``X``; ``vec(X)[i*d + j] = X[i, j]``.  With this convention

* an observable ``A`` acts as ``A (x) 1``:  ``vec(X) -> vec(A X)``,
* the commutant acts on the right:  ``1 (x) Y^T``:  ``vec(X) -> vec(X Y)``,
* the reference vector of a density matrix ``rho`` is ``vec(rho^{1/2})``,
  i.e. ``sum_i sqrt(p_i) |i> (x) conj|i>`` in the eigenbasis of ``rho``,
* ``J vec(X) = vec(X^dagger)`` (swap the two factors, conjugate entries),
* ``Delta = rho (x) conj(rho)^{-1}``:  ``vec(X) -> vec(rho X rho^{-1})``.

For a scatterer ``S`` coupled to a probe ``P`` the doubled space is ordered
``(S, S-bar, P, P-bar)``, so the doubled scatterer space is a contiguous
leading factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    InvalidInput,
    NonCommuting,
    NonFaithfulReference,
    NonFaithfulState,
    NonStationary,
)

HERMITIAN_TOL = 1e-12
FAITHFUL_TOL = 1e-12


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= tol)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _check_density(rho: np.ndarray, name: str) -> None:
    if not is_hermitian(rho):
        raise InvalidInput(f"{name} is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-12:
        raise InvalidInput(f"{name} does not have unit trace (trace={np.trace(rho).real!r})")
    if np.linalg.eigvalsh(rho).min() < -1e-12:
        raise InvalidInput(f"{name} is not positive semidefinite")


def psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T


def hermitian_function(a: np.ndarray, f) -> np.ndarray:
    w, u = np.linalg.eigh(a)
    return (u * f(w)) @ u.conj().T


def propagator(generator: np.ndarray, t: float) -> np.ndarray:
    """Return ``exp(i t G)``.

    Uses the Hermitian eigendecomposition when ``G`` is Hermitian (exact
    unitarity up to roundoff) and falls back to Pade scaling-and-squaring
    otherwise.
    """
    g = np.asarray(generator, dtype=complex)
    scale = max(1.0, float(np.abs(g).max(initial=0.0)))
    if is_hermitian(g, HERMITIAN_TOL * scale):
        g = 0.5 * (g + g.conj().T)
        w, u = np.linalg.eigh(g)
        return (u * np.exp(1j * t * w)) @ u.conj().T
    return scipy.linalg.expm(1j * t * g)


@dataclass(frozen=True)
class QuantumSystem:
    """A finite-dimensional quantum system with a reference state.

    ``reference_state`` is only checked to be a density matrix here;
    faithfulness and stationarity are enforced where they are needed
    (:func:`build_standard_form`).
    """

    hamiltonian: np.ndarray
    reference_state: np.ndarray
    basis_labels: tuple[str, ...] = ()

    def __post_init__(self):
        h = _as_matrix(self.hamiltonian, "hamiltonian")
        rho = _as_matrix(self.reference_state, "reference_state")
        if h.shape != rho.shape:
            raise DimensionMismatch("hamiltonian and reference_state differ in shape")
        if not is_hermitian(h):
            raise InvalidInput("hamiltonian is not Hermitian")
        _check_density(rho, "reference_state")
        labels = tuple(self.basis_labels) or tuple(str(i + 1) for i in range(h.shape[0]))
        if len(labels) != h.shape[0]:
            raise DimensionMismatch("basis_labels has the wrong length")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "reference_state", rho)
        object.__setattr__(self, "basis_labels", labels)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def expect(self, a) -> complex:
        return complex(np.trace(self.reference_state @ np.asarray(a, dtype=complex)))


@dataclass(frozen=True)
class ModularConjugation:
    """The anti-linear map ``J`` on a (product of) doubled space(s).

    ``factors`` lists the base dimensions ``(d_1, d_2, ...)``; the doubled
    space is ordered ``(1, 1-bar, 2, 2-bar, ...)`` and ``J`` swaps each pair
    and conjugates entries.  It is never stored as a complex matrix.
    """

    factors: tuple[int, ...]

    @property
    def doubled_dim(self) -> int:
        return int(np.prod([d * d for d in self.factors]))

    def _swap(self, v: np.ndarray) -> np.ndarray:
        shape = tuple(d for d in self.factors for _ in (0, 1))
        perm = []
        for k in range(len(self.factors)):
            perm += [2 * k + 1, 2 * k]
        extra = v.shape[1:]
        t = v.reshape(shape + extra)
        t = t.transpose(perm + list(range(len(shape), len(shape) + len(extra))))
        return t.reshape((self.doubled_dim,) + extra)

    def apply(self, v) -> np.ndarray:
        """``J v``; also accepts a stack of column vectors."""
        return self._swap(np.asarray(v, dtype=complex)).conj()

    def conjugate_operator(self, a) -> np.ndarray:
        """The linear operator ``J A J`` as a matrix."""
        a = np.asarray(a, dtype=complex)
        swapped_cols = self._swap(a.T).T
        return self._swap(swapped_cols).conj()


@dataclass(frozen=True)
class StandardForm:
    base: QuantumSystem
    psi: np.ndarray
    liouvillean: np.ndarray
    delta_half: np.ndarray
    delta_half_inv: np.ndarray
    modular_conjugation: ModularConjugation

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def doubled_dim(self) -> int:
        return self.base.dim ** 2

    def embed_observable(self, a) -> np.ndarray:
        a = _as_matrix(a, "observable")
        if a.shape[0] != self.dim:
            raise DimensionMismatch("observable has the wrong dimension")
        return np.kron(a, np.eye(self.dim))

    def embed_commutant(self, y) -> np.ndarray:
        """Right multiplication ``vec(X) -> vec(X y)``."""
        y = _as_matrix(y, "commutant factor")
        return np.kron(np.eye(self.dim), y.T)

    def vector_of(self, x) -> np.ndarray:
        return np.asarray(x, dtype=complex).reshape(-1)

    def expect(self, a) -> complex:
        return complex(np.vdot(self.psi, self.embed_observable(a) @ self.psi))


def build_standard_form(sys: QuantumSystem) -> StandardForm:
    rho = sys.reference_state
    h = sys.hamiltonian
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(commutator(h, rho)).max() > HERMITIAN_TOL * scale:
        raise NonCommuting("reference_state does not commute with the hamiltonian")
    w = np.linalg.eigvalsh(rho)
    if w.min() <= FAITHFUL_TOL:
        raise NonFaithfulState(f"reference_state is not faithful (min eigenvalue {w.min():.3g})")
    d = sys.dim
    eye = np.eye(d)
    rho_half = hermitian_function(rho, np.sqrt)
    rho_mhalf = hermitian_function(rho, lambda x: 1.0 / np.sqrt(x))
    psi = rho_half.reshape(-1)
    psi = psi / np.linalg.norm(psi)
    liouvillean = np.kron(h, eye) - np.kron(eye, h.conj())
    delta_half = np.kron(rho_half, rho_mhalf.T)
    delta_half_inv = np.kron(rho_mhalf, rho_half.T)
    return StandardForm(
        base=sys,
        psi=psi,
        liouvillean=liouvillean,
        delta_half=delta_half,
        delta_half_inv=delta_half_inv,
        modular_conjugation=ModularConjugation((d,)),
    )


@dataclass(frozen=True)
class Interaction:
    v: np.ndarray
    coupling: float
    tau: float

    def __post_init__(self):
        v = _as_matrix(self.v, "interaction")
        if not is_hermitian(v):
            raise InvalidInput("interaction V is not Hermitian")
        if not self.tau > 0:
            raise InvalidInput("interaction time tau must be positive")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "coupling", float(self.coupling))
        object.__setattr__(self, "tau", float(self.tau))


@dataclass(frozen=True)
class IncomingState:
    """Incoming probe state ``B psi_P`` with ``B`` in the commutant."""

    density: np.ndarray
    b_operator: np.ndarray
    probe: StandardForm = field(repr=False)

    @property
    def vector(self) -> np.ndarray:
        return self.b_operator @ self.probe.psi

    def expect(self, a) -> complex:
        return complex(np.trace(self.density @ np.asarray(a, dtype=complex)))


def build_incoming_state(probe: QuantumSystem, density) -> IncomingState:
    """Represent ``density`` as ``B psi_P`` for the probe reference vector.

    ``B = 1 (x) Y^T`` with ``Y = rho_ref^{-1/2} rho_in^{1/2}``, so that
    ``B psi_P = vec(rho_in^{1/2})``.  When both states are diagonal in a
    common basis this multiplies the ``i``-th doubled basis vector by
    ``sqrt(r_i / q_i)`` on the second factor.
    """
    rho_in = _as_matrix(density, "incoming density")
    if rho_in.shape[0] != probe.dim:
        raise DimensionMismatch("incoming density and probe differ in dimension")
    _check_density(rho_in, "incoming density")
    h = probe.hamiltonian
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(commutator(rho_in, h)).max() > HERMITIAN_TOL * scale:
        raise NonStationary("incoming density does not commute with the probe hamiltonian")
    q = np.linalg.eigvalsh(probe.reference_state)
    if q.min() <= FAITHFUL_TOL:
        raise NonFaithfulReference("probe reference state is not faithful")
    sf = build_standard_form(probe)
    y = hermitian_function(probe.reference_state, lambda x: 1.0 / np.sqrt(x)) @ psd_sqrt(rho_in)
    return IncomingState(density=rho_in, b_operator=sf.embed_commutant(y), probe=sf)


def embed_pair(a, d_s: int, d_p: int) -> np.ndarray:
    """Represent an operator on ``S (x) P`` on the ``(S, S-bar, P, P-bar)`` space."""
    a = _as_matrix(a, "operator")
    if a.shape[0] != d_s * d_p:
        raise DimensionMismatch(f"operator of size {a.shape[0]} does not act on {d_s}x{d_p}")
    a4 = a.reshape(d_s, d_p, d_s, d_p)
    out = np.einsum("spuq,ab,cd->sapcubqd", a4, np.eye(d_s), np.eye(d_p))
    n = (d_s * d_p) ** 2
    return out.reshape(n, n)


@dataclass(frozen=True)
class CoupledPair:
    """Joint doubled-space data of a scatterer and a probe."""

    scatterer: StandardForm
    probe: StandardForm

    @property
    def dims(self) -> tuple[int, int]:
        return self.scatterer.dim, self.probe.dim

    @property
    def doubled_dim(self) -> int:
        return self.scatterer.doubled_dim * self.probe.doubled_dim

    @property
    def psi(self) -> np.ndarray:
        return np.kron(self.scatterer.psi, self.probe.psi)

    @property
    def free_liouvillean(self) -> np.ndarray:
        n_s, n_p = self.scatterer.doubled_dim, self.probe.doubled_dim
        return (np.kron(self.scatterer.liouvillean, np.eye(n_p))
                + np.kron(np.eye(n_s), self.probe.liouvillean))

    @property
    def modular_conjugation(self) -> ModularConjugation:
        return ModularConjugation(self.dims)

    @property
    def delta_half(self) -> np.ndarray:
        return np.kron(self.scatterer.delta_half, self.probe.delta_half)

    @property
    def delta_half_inv(self) -> np.ndarray:
        return np.kron(self.scatterer.delta_half_inv, self.probe.delta_half_inv)

    def embed(self, a) -> np.ndarray:
        return embed_pair(a, *self.dims)

    def tomita_dual(self, a) -> np.ndarray:
        """``J Delta^{1/2} A Delta^{-1/2} J`` for an operator ``A`` on ``S (x) P``."""
        inner = self.delta_half @ self.embed(a) @ self.delta_half_inv
        return self.modular_conjugation.conjugate_operator(inner)


def build_k(sf_s: StandardForm, sf_p: StandardForm, inter: Interaction) -> np.ndarray:
    """Generator ``K = L_S + L_P + lam V - lam J Delta^{1/2} V Delta^{-1/2} J``.

    Acts on the ``(S, S-bar, P, P-bar)`` doubled space and annihilates
    ``psi_S (x) psi_P``.  ``K`` is Hermitian whenever ``V`` commutes with the
    joint reference state (e.g. trace-state references); otherwise it is not.
    """
    pair = CoupledPair(sf_s, sf_p)
    if inter.v.shape[0] != sf_s.dim * sf_p.dim:
        raise DimensionMismatch(
            f"V has size {inter.v.shape[0]}, expected {sf_s.dim}*{sf_p.dim}")
    lam = inter.coupling
    k = pair.free_liouvillean
    if lam != 0.0:
        k = k + lam * (pair.embed(inter.v) - pair.tomita_dual(inter.v))
    return k
