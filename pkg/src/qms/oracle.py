"""Brute-force multi-probe simulation in the density-matrix picture.

Shares only matrix primitives with the transfer-operator code: no doubled
spaces, no modular data.  The chain ``S (x) P_1 (x) ... (x) P_n`` is evolved
probe by probe and projected after each interaction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidInput, TooManyProbes, ZeroProbabilityBranch
from .standard_rep import Interaction, QuantumSystem
from .transfer import MeasurementOperator

MAX_PROBES = 6
MAX_CHAIN_DIM = 4096


@dataclass
class ChainState:
    rho: np.ndarray
    n_probes: int
    d_s: int
    d_p: int
    tau: float
    lam: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def reduced_scatterer(self) -> np.ndarray:
        d_rest = self.d_p ** self.n_probes
        t = self.rho.reshape(self.d_s, d_rest, self.d_s, d_rest)
        return np.einsum("iaja->ij", t)


def initial_chain(sys_s: QuantumSystem, rho_in, n: int, tau: float, lam: float) -> ChainState:
    rho = sys_s.reference_state
    for _ in range(n):
        rho = np.kron(rho, rho_in)
    return ChainState(rho.astype(complex), n, sys_s.dim, rho_in.shape[0], tau, lam)


def _apply_on_slot(state: ChainState, op: np.ndarray, slot: int, with_scatterer: bool,
                   side: str) -> np.ndarray:
    """Multiply the chain density by ``op`` acting on (S,) probe ``slot``."""
    n, d_s, d_p = state.n_probes, state.d_s, state.d_p
    dims = [d_s] + [d_p] * n
    axes = ([0] if with_scatterer else []) + [1 + slot]
    t = state.rho.reshape(dims + dims)
    op_dims = [dims[a] for a in axes]
    op_t = op.reshape(op_dims + op_dims)
    k = len(axes)
    if side == "left":
        out = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), axes))
        rest = [a for a in range(2 * len(dims)) if a not in axes]
        order = np.argsort(axes + rest)
    else:
        cols = [len(dims) + a for a in axes]
        out = np.tensordot(t, op_t, axes=(cols, list(range(k))))
        rest = [a for a in range(2 * len(dims)) if a not in cols]
        order = np.argsort(rest + cols)
    total = int(np.prod(dims))
    return out.transpose(order).reshape(total, total)


def interaction_unitary(sys_s: QuantumSystem, sys_p: QuantumSystem, inter: Interaction) -> np.ndarray:
    """``exp(-i tau (H_S + H_P + lam V))`` on ``S (x) P``."""
    h = (np.kron(sys_s.hamiltonian, np.eye(sys_p.dim))
         + np.kron(np.eye(sys_s.dim), sys_p.hamiltonian)
         + inter.coupling * inter.v)
    return scipy.linalg.expm(-1j * inter.tau * h)


def run_chain(sys_s: QuantumSystem, sys_p: QuantumSystem, inter: Interaction,
              meas: MeasurementOperator, rho_in, subsets: Sequence[Sequence[int]]) -> ChainState:
    """Evolve and project the full chain; returns the unnormalized final state."""
    n = len(subsets)
    if n > MAX_PROBES or sys_s.dim * sys_p.dim ** n > MAX_CHAIN_DIM:
        raise TooManyProbes(f"{n} probes exceed the oracle's memory guard")
    rho_in = np.asarray(rho_in, dtype=complex)
    state = initial_chain(sys_s, rho_in, n, inter.tau, inter.coupling)
    u = interaction_unitary(sys_s, sys_p, inter)
    for k, subset in enumerate(subsets):
        if not len(subset):
            raise InvalidInput("empty outcome subset")
        state.rho = _apply_on_slot(state, u, k, True, "left")
        state.rho = _apply_on_slot(state, u.conj().T, k, True, "right")
        e = meas.projection(subset)
        state.rho = _apply_on_slot(state, e, k, False, "left")
        state.rho = _apply_on_slot(state, e, k, False, "right")
    return state


def brute_force_joint(sys_s: QuantumSystem, sys_p: QuantumSystem, inter: Interaction,
                      meas: MeasurementOperator, rho_in, subsets: Sequence[Sequence[int]]) -> float:
    """``||E_{S_n} U_n ... E_{S_1} U_1 Psi_0||^2`` as the trace of the projected chain."""
    return run_chain(sys_s, sys_p, inter, meas, rho_in, subsets).trace


def brute_force_post_state(sys_s: QuantumSystem, sys_p: QuantumSystem, inter: Interaction,
                           meas: MeasurementOperator, rho_in,
                           subsets: Sequence[Sequence[int]]) -> np.ndarray:
    """Scatterer state right after the last measurement, conditioned on the outcomes."""
    state = run_chain(sys_s, sys_p, inter, meas, rho_in, subsets)
    prob = state.trace
    if prob <= 1e-12:
        raise ZeroProbabilityBranch(f"outcome sequence has probability {prob:.3g}")
    return state.reduced_scatterer() / prob
