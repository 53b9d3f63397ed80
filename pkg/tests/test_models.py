import numpy as np
import pytest

from qms.errors import InvalidInput
from qms.models import (
    LOWER,
    MODEL_REGISTRY,
    SIGMA_Z,
    JaynesCummings,
    build_jc,
    explicit_jc_transfer,
    is_resonant,
    jc_model,
    random_hermitian,
    spin_direction_measurement,
)
from qms.standard_rep import propagator
from qms.transfer import eventually_probability

from conftest import close


def test_number_conservation():
    sys_s, sys_p, inter, _ = build_jc(JaynesCummings(1.0, 0.8, 0.5))
    h = np.kron(SIGMA_Z, np.eye(2)) + np.kron(np.eye(2), SIGMA_Z) + inter.coupling * inter.v
    n_op = np.kron(LOWER.conj().T @ LOWER, np.eye(2)) + np.kron(np.eye(2), LOWER.conj().T @ LOWER)
    assert close(h @ n_op, n_op @ h, 1e-14)


def test_omega_in_arithmetic():
    jc = JaynesCummings(1.0, 1.0, 0.7)
    assert abs(jc.omega_in(SIGMA_Z) - 0.4) < 1e-15
    _, _, _, incoming = build_jc(jc)
    assert abs(incoming.expect(SIGMA_Z) - 0.4) < 1e-12


def test_p_out_of_range():
    with pytest.raises(InvalidInput):
        JaynesCummings(1.0, 1.0, 1.2)


@pytest.mark.parametrize("p,tau,lam", [(0.6, 1.0, 0.3), (1.0, 0.7, 2.0), (0.2, 2.5, -0.4)])
def test_pipeline_matches_closed_form(p, tau, lam):
    jc = JaynesCummings(tau, lam, p)
    model = jc_model(jc)
    tf = model.transfer_family()
    assert close(tf.t_full, explicit_jc_transfer(jc, np.eye(2)), 1e-10)
    for e, t_m in zip(model.measurement.projections, tf.t_outcome):
        assert close(t_m, explicit_jc_transfer(jc, e), 1e-10)


def test_closed_form_special_cases():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    # lambda tau = pi: coherences flip sign on top of the free phase
    jc = JaynesCummings(1.0, np.pi, 0.3)
    w = jc.omega_in(x)
    flipped = np.diag([1, -np.exp(2j), -np.exp(-2j), 1])
    assert close(explicit_jc_transfer(jc, x), w * flipped, 1e-12)
    # with tau = pi the free phase is trivial
    jc = JaynesCummings(np.pi, 1.0, 0.3)
    assert close(explicit_jc_transfer(jc, x), w * np.diag([1, -1, -1, 1]), 1e-12)
    jc = JaynesCummings(np.pi, 2.0, 0.3)
    assert close(explicit_jc_transfer(jc, x), w * np.eye(4), 1e-12)
    jc0 = JaynesCummings(0.9, 0.0, 0.3)
    free = np.diag(np.exp(1j * 0.9 * np.array([0, 2, -2, 0])))
    assert close(explicit_jc_transfer(jc0, x), jc0.omega_in(x) * free, 1e-14)


def test_is_resonant():
    assert is_resonant(np.pi, 1.0)
    assert not is_resonant(1.0, 1.0)
    assert is_resonant(np.pi / 2, 2.0)


def test_spin_direction_measurement():
    m0 = spin_direction_measurement(0.0)
    assert close(m0.m, SIGMA_Z, 1e-15)
    assert close(m0.projections[0], np.diag([1, 0]), 1e-15)
    for theta, phi in [(0.3, 0.0), (1.2, 2.0), (1.5, 5.5)]:
        meas = spin_direction_measurement(theta, phi)
        assert close(meas.m @ meas.m, np.eye(2), 1e-14)
        rebuilt = sum(x * e for x, e in zip(meas.eigenvalues, meas.projections))
        assert close(rebuilt, meas.m, 1e-14)
        assert close(sum(meas.projections), np.eye(2), 1e-14)


@pytest.mark.parametrize("theta,expected", [(0.0, 1.0), (0.3, 0.0), (1.0, 0.0), (1.5, 0.0)])
def test_copying_eventually(theta, expected):
    model = jc_model(JaynesCummings(1.0, 1.0, 1.0), spin_direction_measurement(theta))
    assert abs(eventually_probability(model.transfer_family(), [0]) - expected) < 1e-8


def test_transition_probability():
    _, _, inter, _ = build_jc(JaynesCummings(1.0, 0.7, 1.0))
    h = np.kron(SIGMA_Z, np.eye(2)) + np.kron(np.eye(2), SIGMA_Z) + 0.7 * inter.v
    up_down = np.kron([1, 0], [0, 1])
    down_up = np.kron([0, 1], [1, 0])
    for t in (0.2, 1.0, 2.3):
        amp = np.vdot(up_down, propagator(h, t) @ down_up)
        assert abs(abs(amp) ** 2 - np.sin(0.7 * t) ** 2) < 1e-12


def test_resonant_transparency():
    model = jc_model(JaynesCummings(1.0, np.pi, 0.6))
    tf = model.transfer_family()
    free = np.diag(np.exp(1j * np.array([0, 2, -2, 0])))
    assert close(tf.t_full, free @ np.diag([1, -1, -1, 1]), 1e-12)
    for e, t_m in zip(model.measurement.projections, tf.t_outcome):
        assert close(t_m, model.incoming.expect(e) * tf.t_full, 1e-12)


def test_registry():
    assert set(MODEL_REGISTRY) >= {"jaynes_cummings", "random"}
    m = MODEL_REGISTRY["jaynes_cummings"](tau=1.0, lam=1.0, p=1.0, theta=0.5)
    assert m.measurement.n_outcomes == 2
    r = MODEL_REGISTRY["random"](seed=3, d_s=3)
    assert r.scatterer.dim == 3


def test_random_hermitian_is_hermitian():
    a = random_hermitian(np.random.default_rng(1), 4)
    assert close(a, a.conj().T, 1e-15)
