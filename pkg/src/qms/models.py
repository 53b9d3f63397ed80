"""Built-in models: the truncated Jaynes-Cummings model and random test models."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput
from .standard_rep import (
    IncomingState,
    Interaction,
    QuantumSystem,
    StandardForm,
    build_incoming_state,
    build_k,
    build_standard_form,
)
from .transfer import MeasurementOperator, TransferFamily, build_transfer_family

SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# Level 1 is the excited level: H phi_1 = phi_1, a phi_1 = phi_2.
LOWER = np.array([[0, 0], [1, 0]], dtype=complex)
RAISE = LOWER.conj().T


@dataclass(frozen=True)
class Model:
    """A scatterer, a probe, their coupling, the incoming probe state and a measurement."""

    scatterer: QuantumSystem
    probe: QuantumSystem
    interaction: Interaction
    incoming: IncomingState
    measurement: MeasurementOperator
    name: str = "custom"

    @property
    def tau(self) -> float:
        return self.interaction.tau

    @property
    def coupling(self) -> float:
        return self.interaction.coupling

    @property
    def rho_in(self) -> np.ndarray:
        return self.incoming.density

    def scatterer_form(self) -> StandardForm:
        return build_standard_form(self.scatterer)

    def generator(self) -> np.ndarray:
        return build_k(self.scatterer_form(), self.incoming.probe, self.interaction)

    def transfer_family(self) -> TransferFamily:
        return build_transfer_family(self.generator(), self.scatterer_form(), self.incoming,
                                     self.measurement, self.tau, self.coupling)

    def with_coupling(self, coupling: float) -> "Model":
        inter = dataclasses.replace(self.interaction, coupling=coupling)
        return dataclasses.replace(self, interaction=inter)

    def with_measurement(self, meas: MeasurementOperator) -> "Model":
        return dataclasses.replace(self, measurement=meas)

    def total_hamiltonian(self) -> np.ndarray:
        d_s, d_p = self.scatterer.dim, self.probe.dim
        return (np.kron(self.scatterer.hamiltonian, np.eye(d_p))
                + np.kron(np.eye(d_s), self.probe.hamiltonian)
                + self.coupling * self.interaction.v)


@dataclass(frozen=True)
class JaynesCummings:
    tau: float
    lam: float
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidInput(f"p must lie in [0, 1], got {self.p}")

    def omega_in(self, x) -> complex:
        x = np.asarray(x, dtype=complex)
        return self.p * x[0, 0] + (1 - self.p) * x[1, 1]


def jc_interaction() -> np.ndarray:
    return np.kron(RAISE, LOWER) + np.kron(LOWER, RAISE)


def build_jc(jc: JaynesCummings) -> tuple[QuantumSystem, QuantumSystem, Interaction, IncomingState]:
    """Scatterer, probe, interaction and incoming state of the two-level JC model.

    Both reference states are the trace state; the incoming state is
    ``diag(p, 1 - p)``.
    """
    labels = ("up", "down")
    trace_state = np.eye(2, dtype=complex) / 2
    sys_s = QuantumSystem(SIGMA_Z, trace_state, labels)
    sys_p = QuantumSystem(SIGMA_Z, trace_state, labels)
    inter = Interaction(jc_interaction(), jc.lam, jc.tau)
    incoming = build_incoming_state(sys_p, np.diag([jc.p, 1 - jc.p]).astype(complex))
    return sys_s, sys_p, inter, incoming


def jc_model(jc: JaynesCummings, measurement: MeasurementOperator | None = None) -> Model:
    sys_s, sys_p, inter, incoming = build_jc(jc)
    meas = measurement if measurement is not None else MeasurementOperator.from_matrix(SIGMA_Z)
    return Model(sys_s, sys_p, inter, incoming, meas, name="jaynes_cummings")


def explicit_jc_transfer(jc: JaynesCummings, x) -> np.ndarray:
    """Closed-form ``P B*B exp(i tau K) X P`` in the basis phi_11, phi_12, phi_21, phi_22."""
    x = np.asarray(x, dtype=complex)
    p, tau = jc.p, jc.tau
    s, c = np.sin(jc.lam * tau), np.cos(jc.lam * tau)
    a = -s ** 2
    b = -1j * s * c
    w = jc.omega_in(x)
    ep, em = np.exp(2j * tau), np.exp(-2j * tau)
    q = 1 - p
    x11, x12, x21, x22 = x[0, 0], x[0, 1], x[1, 0], x[1, 1]
    corr = np.array([
        [q * x22 * a, q * x21 * b, -q * x12 * b, -q * x11 * a],
        [-p * x12 * ep * 1j * s, ep * (c - 1) * w, 0, q * x12 * ep * 1j * s],
        [p * x21 * em * 1j * s, 0, em * (c - 1) * w, -q * x21 * em * 1j * s],
        [-p * x22 * a, -p * x21 * b, p * x12 * b, p * x11 * a],
    ], dtype=complex)
    return w * np.diag([1, ep, em, 1]) + corr


def is_resonant(lam: float, tau: float) -> bool:
    return bool(abs(np.sin(lam * tau)) < 1e-12)


def spin_direction_measurement(theta: float, phi: float = 0.0) -> MeasurementOperator:
    """Spin measured along the direction ``(theta, phi)``; outcomes ``+1, -1``."""
    m = np.array([[np.cos(theta), np.exp(-1j * phi) * np.sin(theta)],
                  [np.exp(1j * phi) * np.sin(theta), -np.cos(theta)]], dtype=complex)
    chi_p = np.array([np.exp(-0.5j * phi) * np.cos(theta / 2), np.exp(0.5j * phi) * np.sin(theta / 2)])
    chi_m = np.array([-np.exp(-0.5j * phi) * np.sin(theta / 2), np.exp(0.5j * phi) * np.cos(theta / 2)])
    projs = (np.outer(chi_p, chi_p.conj()), np.outer(chi_m, chi_m.conj()))
    return MeasurementOperator(m=m, eigenvalues=(1.0, -1.0), projections=projs)


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_stationary_density(rng: np.random.Generator, h: np.ndarray) -> np.ndarray:
    """A random full-rank density matrix diagonal in the eigenbasis of ``h``."""
    _, u = np.linalg.eigh(h)
    p = rng.dirichlet(np.ones(h.shape[0])) * 0.9 + 0.1 / h.shape[0]
    return (u * p) @ u.conj().T


def random_model(seed: int, d_s: int = 2, d_p: int = 2, coupling: float = 0.5,
                 tau: float = 1.0, trace_references: bool = True) -> Model:
    """A generic model with random Hamiltonians, interaction, incoming state and measurement.

    With ``trace_references=False`` the scatterer and probe reference states
    are random faithful stationary states instead of trace states.
    """
    rng = np.random.default_rng(seed)
    h_s = random_hermitian(rng, d_s)
    h_p = random_hermitian(rng, d_p)
    v = random_hermitian(rng, d_s * d_p)
    v = v / np.linalg.norm(v, 2)
    if trace_references:
        ref_s = np.eye(d_s, dtype=complex) / d_s
        ref_p = np.eye(d_p, dtype=complex) / d_p
    else:
        ref_s = random_stationary_density(rng, h_s)
        ref_p = random_stationary_density(rng, h_p)
    sys_s = QuantumSystem(h_s, ref_s)
    sys_p = QuantumSystem(h_p, ref_p)
    rho_in = random_stationary_density(rng, h_p)
    incoming = build_incoming_state(sys_p, rho_in)
    meas = MeasurementOperator.from_matrix(random_hermitian(rng, d_p))
    return Model(sys_s, sys_p, Interaction(v, coupling, tau), incoming, meas, name=f"random-{seed}")


MODEL_REGISTRY: dict[str, Callable[..., Model]] = {}


def register(name: str):
    def deco(fn):
        MODEL_REGISTRY[name] = fn
        return fn
    return deco


@register("jaynes_cummings")
def _jc_from_params(tau: float = 1.0, lam: float = 1.0, p: float = 1.0,
                    theta: float | None = None, phi: float = 0.0) -> Model:
    meas = None if theta is None else spin_direction_measurement(theta, phi)
    return jc_model(JaynesCummings(tau=tau, lam=lam, p=p), meas)


@register("random")
def _random_from_params(seed: int = 0, d_s: int = 2, d_p: int = 2, lam: float = 0.5,
                        tau: float = 1.0, trace_references: bool = True) -> Model:
    return random_model(seed, d_s, d_p, lam, tau, trace_references)
