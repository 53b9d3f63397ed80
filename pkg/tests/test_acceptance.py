"""Acceptance criteria 1-11, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line with the
measured numbers before asserting.  Run with ``pytest -s`` to see them.
"""

import itertools

import numpy as np

from qms.ldp import gartner_ellis_interval, ldp_curve, lmgf, deformed_operator, spectral_distance
from qms.models import (
    JaynesCummings,
    build_jc,
    explicit_jc_transfer,
    jc_model,
    random_model,
    spin_direction_measurement,
)
from qms.oracle import brute_force_joint
from qms.perturbation import asymptotic_frequency, asymptotic_mean, flux_report
from qms.process import (
    correlation_table,
    fit_decay_rate,
    joint_probability,
    sample_ensemble,
    sample_trajectory,
)
from qms.standard_rep import build_k, build_standard_form, embed_pair, propagator
from qms.transfer import (
    compress,
    ergodic_projection,
    eventually_probability,
    spectral_analysis,
)

from conftest import battery


def report(number, ok, detail):
    print(f"[criterion {number}] {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def pipeline_transfer(jc, x):
    """``P B*B exp(i tau K) (1 x X) P`` assembled from the generic pipeline."""
    sys_s, sys_p, inter, incoming = build_jc(jc)
    sf_s = build_standard_form(sys_s)
    k = build_k(sf_s, incoming.probe, inter)
    op = propagator(k, jc.tau) @ embed_pair(np.kron(np.eye(2), x), 2, 2)
    return compress(op, incoming, 4)


def test_criterion_1_oracle_equivalence():
    models = [jc_model(JaynesCummings(1.0, 0.3, 0.6)),
              random_model(21, 2, 2, coupling=0.6),
              random_model(22, 3, 3, coupling=0.4),
              random_model(23, 3, 2, coupling=0.8, trace_references=False)]
    worst, worst_sum = 0.0, 0.0
    for model in models:
        tf = model.transfer_family()
        for n in range(1, 5):
            total = 0.0
            for seq in itertools.product(tf.all_outcomes, repeat=n):
                subsets = [[m] for m in seq]
                p = joint_probability(tf, subsets)
                q = brute_force_joint(model.scatterer, model.probe, model.interaction,
                                      model.measurement, model.rho_in, subsets)
                worst = max(worst, abs(p - q))
                total += q
            worst_sum = max(worst_sum, abs(total - 1))
    ok = report(1, worst <= 1e-10 and worst_sum <= 1e-10,
                f"max|transfer - oracle| = {worst:.2e}, max|sum - 1| = {worst_sum:.2e} (tol 1e-10)")
    assert ok


def test_criterion_2_explicit_transfer():
    rng = np.random.default_rng(2024)
    worst, worst_eig = 0.0, 0.0
    for _ in range(50):
        jc = JaynesCummings(tau=rng.uniform(0.1, 3.0), lam=rng.uniform(-2.0, 2.0), p=rng.uniform())
        x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        t_x = pipeline_transfer(jc, x)
        worst = max(worst, np.abs(t_x - explicit_jc_transfer(jc, x)).max())
        v = np.array([jc.p, 0, 0, 1 - jc.p])
        worst_eig = max(worst_eig, np.abs(t_x.conj().T @ v - np.conj(jc.omega_in(x)) * v).max())
    ok = report(2, worst <= 1e-10 and worst_eig <= 1e-10,
                f"max entry error {worst:.2e}, adjoint eigenvector error {worst_eig:.2e} (tol 1e-10)")
    assert ok


def test_criterion_3_spectrum_and_gap():
    tf = jc_model(JaynesCummings(1.0, 1.0, 1.0)).transfer_family()
    spec = spectral_analysis(tf)
    c = np.cos(1.0)
    expected = np.array([1, np.exp(2j) * c, np.exp(-2j) * c, c * c])
    ev_err = np.abs(spec.eigenvalues[:, None] - expected[None, :]).min(axis=1).max()
    gap_err = abs(spec.gap - (1 - c))
    # lambda tau = pi with tau = pi, where the free phase exp(2 i tau) is 1
    jc = JaynesCummings(np.pi, 1.0, 0.6)
    rng = np.random.default_rng(3)
    res_err = 0.0
    for x in [np.eye(2), np.diag([1.0, 0.0]), rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))]:
        t_x = pipeline_transfer(jc, x)
        res_err = max(res_err, np.abs(t_x - jc.omega_in(x) * np.diag([1, -1, -1, 1])).max())
    ok = report(3, ev_err <= 1e-10 and gap_err <= 1e-9 and spec.condition_a and res_err <= 1e-12,
                f"eigenvalue error {ev_err:.2e}, gap {spec.gap:.9f} (error {gap_err:.2e}), "
                f"condition A {spec.condition_a}, resonant error {res_err:.2e}")
    assert ok


def test_criterion_4_eventually():
    values = {}
    for theta in (0.0, 0.3, 1.0, 1.5):
        tf = jc_model(JaynesCummings(1.0, 1.0, 1.0), spin_direction_measurement(theta)).transfer_family()
        values[theta] = eventually_probability(tf, [0])
    copy_ok = abs(values[0.0] - 1) <= 1e-8 and all(abs(values[t]) <= 1e-8 for t in (0.3, 1.0, 1.5))
    weak = []
    for meas in (None, spin_direction_measurement(0.4), spin_direction_measurement(1.2)):
        tf = jc_model(JaynesCummings(1.0, 0.01, 0.6), meas).transfer_family()
        weak += [eventually_probability(tf, [0]), eventually_probability(tf, [1])]
    weak_ok = max(weak) <= 1e-8
    ok = report(4, copy_ok and weak_ok,
                f"p=1 values {[round(v, 12) for v in values.values()]}, "
                f"weak coupling max {max(weak):.2e}")
    assert ok


def test_criterion_5_frequencies_and_fluxes():
    worst_copy = 0.0
    for theta in (0.0, 0.5, 1.2):
        model = jc_model(JaynesCummings(1.0, 1.0, 1.0), spin_direction_measurement(theta))
        tf = model.transfer_family()
        spec = spectral_analysis(tf)
        for i, e in enumerate(model.measurement.projections):
            worst_copy = max(worst_copy, abs(asymptotic_frequency(tf, spec, i) - model.incoming.expect(e).real))
    model = random_model(11)
    res = [max(r.residual for r in flux_report(model.with_coupling(lam))) for lam in (0.04, 0.02, 0.01)]
    ratios = [res[0] / res[1], res[1] / res[2]]
    flux_sum = abs(sum(r.f_prime for r in flux_report(model.with_coupling(0.02))))
    ok = report(5, worst_copy <= 1e-10 and all(abs(r - 4) <= 1.0 for r in ratios) and flux_sum <= 1e-9,
                f"JC copy error {worst_copy:.2e}, residual ratios {ratios[0]:.3f} {ratios[1]:.3f} "
                f"(4 +- 25%), |sum f'| {flux_sum:.2e}")
    assert ok


def test_criterion_6_mean_and_lln():
    theta = 1.0
    tf = jc_model(JaynesCummings(1.0, 1.0, 1.0), spin_direction_measurement(theta)).transfer_family()
    mu = asymptotic_mean(tf, spectral_analysis(tf))
    n = 10_000
    band = 3 * np.sqrt(np.sin(theta) ** 2 / n)
    hits = sum(abs(sample_trajectory(tf, n, seed).values.mean() - mu) <= band for seed in range(20))
    ok = report(6, abs(mu - np.cos(theta)) <= 1e-10 and hits >= 19,
                f"mu_inf - cos(theta) = {mu - np.cos(theta):.2e}, {hits}/20 seeds inside 3 sigma")
    assert ok


def test_criterion_7_correlation_decay():
    worst_margin = np.inf
    for lam in (0.5, 1.0, 2.0):
        for meas in (None, spin_direction_measurement(0.6)):
            tf = jc_model(JaynesCummings(1.0, lam, 0.6), meas).transfer_family()
            bound = np.log(1 / (1 - spectral_analysis(tf).gap))
            for a, b in itertools.product(tf.all_outcomes, repeat=2):
                rate = fit_decay_rate(correlation_table(tf, a, b, range(2, 31)))
                worst_margin = min(worst_margin, rate - (bound - 0.05))
    tf0 = jc_model(JaynesCummings(1.0, 0.0, 0.6)).transfer_family()
    zero = max(r.value for a, b in itertools.product(range(2), repeat=2)
               for r in correlation_table(tf0, a, b, range(1, 31)))
    ok = report(7, worst_margin >= 0 and zero <= 1e-14,
                f"min(fitted rate - (ln(1/(1-gap)) - 0.05)) = {worst_margin:.4f}, "
                f"lambda=0 max correlation {zero:.1e}")
    assert ok


def test_criterion_8_large_deviations():
    theta = np.pi / 3
    tf = jc_model(JaynesCummings(1.0, 1.0, 1.0), spin_direction_measurement(theta)).transfer_family()
    alphas = np.linspace(-2, 2, 41)
    lam_err = max(abs(lmgf(tf, None, a) - np.log(np.cosh(a) + np.cos(theta) * np.sinh(a))) for a in alphas)
    curve = ldp_curve(tf, alphas, [])
    var = np.sin(theta) ** 2
    quad_err = max(abs(curve.rate(np.cos(theta) + dx).rate - dx ** 2 / (2 * var))
                   for dx in np.linspace(-0.05, 0.05, 11))
    eps, eps_prime = 0.05, 0.1
    lower, _ = gartner_ellis_interval(curve, eps, eps_prime)
    empirical = {}
    for n in (50, 100, 200):
        dev = np.abs(sample_ensemble(tf, n, 100_000, seed=n).means() - np.cos(theta))
        p_hat = np.mean((dev >= eps - 1e-12) & (dev <= eps_prime + 1e-12))
        empirical[n] = -np.log(p_hat) / n
    rel = abs(empirical[200] - lower) / lower
    ok = report(8, lam_err <= 1e-8 and quad_err <= 5e-5 and rel <= 0.2,
                f"Lambda error {lam_err:.2e}, quadratic error {quad_err:.2e}, rate {lower:.4e}, "
                f"Monte Carlo -log(P)/n at n=50,100,200: "
                + ", ".join(f"{v:.4e}" for v in empirical.values())
                + f" (relative error at n=200 {rel:.2f}, tol 0.20)")
    assert ok


def test_criterion_9_projections():
    models, seed = [], 100
    while len(models) < 20:
        tf = random_model(seed, 2 + seed % 2, 2, coupling=0.8).transfer_family()
        seed += 1
        spec = spectral_analysis(tf)
        if spec.condition_a:
            models.append((tf, spec))
    worst_growth, worst_idem, worst_comm = 0.0, 0.0, 0.0
    for tf, spec in models:
        pi, t = spec.riesz_projection, tf.t_full
        scaled = [n * np.linalg.norm(ergodic_projection(t, n) - pi, 2) for n in (1000, 10_000)]
        worst_growth = max(worst_growth, scaled[1] / scaled[0])
        worst_idem = max(worst_idem, np.abs(pi @ pi - pi).max())
        worst_comm = max(worst_comm, np.abs(t @ pi - pi @ t).max())
    ok = report(9, worst_growth <= 1.25 and worst_idem <= 1e-9 and worst_comm <= 1e-9,
                f"max N*||Cesaro - Riesz|| growth 1e3->1e4 {worst_growth:.3f}, "
                f"||Pi^2 - Pi|| {worst_idem:.1e}, ||T Pi - Pi T|| {worst_comm:.1e}")
    assert ok


def test_criterion_10_spectral_continuity():
    alphas = np.linspace(-3, 3, 41)
    lams = np.array([0.1, 0.2, 0.4])
    slopes = []
    for seed, d_s in ((1, 2), (2, 2), (3, 3)):
        dists = []
        for lam in lams:
            tf = random_model(seed, d_s, 2, coupling=lam).transfer_family()
            free = tf.free_propagator()
            dists.append(max(spectral_distance(deformed_operator(tf, None, a), free) for a in alphas))
        slopes.append(np.polyfit(np.log(lams), np.log(dists), 1)[0])
    ok = report(10, all(abs(s - 1) <= 0.15 for s in slopes),
                "fitted exponents " + ", ".join(f"{s:.3f}" for s in slopes) + " (1 +- 0.15)")
    assert ok


def test_criterion_11_structural_invariants():
    failures = []
    for model in battery():
        tf = model.transfer_family()
        if np.abs(tf.t_full @ tf.psi_s - tf.psi_s).max() > 1e-10:
            failures.append(f"{model.name}: T psi")
        k = model.generator()
        psi = np.kron(tf.psi_s, model.incoming.probe.psi)
        if np.linalg.norm(k @ psi) > 1e-12 * np.linalg.norm(k, 2):
            failures.append(f"{model.name}: K psi")
        for r in range(1, tf.n_outcomes + 1):
            for subset in itertools.combinations(tf.all_outcomes, r):
                if np.abs(np.linalg.eigvals(tf.t_subset(subset))).max() > 1 + 1e-10:
                    failures.append(f"{model.name}: disk {subset}")
        for seq in itertools.product(tf.all_outcomes, repeat=2):
            prefix = [[m] for m in seq]
            total = sum(joint_probability(tf, prefix + [[m]]) for m in tf.all_outcomes)
            if abs(total - joint_probability(tf, prefix)) > 1e-10:
                failures.append(f"{model.name}: Kolmogorov {seq}")
        a = sample_trajectory(tf, 200, seed=17)
        b = sample_trajectory(tf, 200, seed=17)
        e = sample_ensemble(tf, 30, 5000, seed=17, workers=3)
        if not np.array_equal(a.outcomes, b.outcomes) or not np.array_equal(
                e.outcomes[4321], sample_trajectory(tf, 30, 17, stream=4321).outcomes):
            failures.append(f"{model.name}: determinism")
    ok = report(11, not failures, f"{len(battery())} models, failures: {failures or 'none'}")
    assert ok
