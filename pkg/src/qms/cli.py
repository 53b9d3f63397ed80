"""``qms`` command-line front end.

Reads a TOML experiment description, runs one command and writes CSV or JSON.
Complex matrices are written as nested lists whose entries are ``[re, im]``
pairs (a bare number is taken as real).

Exit codes: 1 for configuration errors, 2 when a numerical precondition
fails, 3 when ``validate`` finds a mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .errors import InvalidInput, NumericalPreconditionError
from .ldp import gartner_ellis_interval, ldp_curve
from .models import (
    SIGMA_Z,
    JaynesCummings,
    Model,
    is_resonant,
    jc_model,
    random_model,
    spin_direction_measurement,
)
from .oracle import brute_force_joint
from .perturbation import asymptotic_mean, flux_report
from .process import correlation_table, fit_decay_rate, joint_probability, sample_ensemble
from .standard_rep import Interaction, QuantumSystem, build_incoming_state
from .transfer import (
    MeasurementOperator,
    eventually_probability,
    spectral_analysis,
    subset_projection,
)

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3
VALIDATE_TOL = 1e-10


class ConfigError(Exception):
    pass


def parse_matrix(value, name: str) -> np.ndarray:
    """Nested list of ``[re, im]`` pairs (or reals) to a square complex matrix."""
    try:
        rows = []
        for row in value:
            rows.append([complex(*e) if isinstance(e, list) else complex(e) for e in row])
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot read matrix ({exc})") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{name}: expected a square matrix, got shape {m.shape}")
    return m


@dataclass
class ExperimentConfig:
    raw: dict
    digest: str

    @property
    def model_section(self) -> dict:
        return self.raw.get("model", {})

    @property
    def run(self) -> dict:
        return self.raw.get("run", {})


def load_config(path) -> ExperimentConfig:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = tomli.loads(data.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "model" not in raw:
        raise ConfigError("missing [model] table")
    return ExperimentConfig(raw, hashlib.sha256(data).hexdigest())


def _float(section: dict, key: str, default=None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"missing key '{key}'")
        return default
    try:
        return float(section[key])
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a number") from None


def build_measurement(section: dict | None, d_p: int) -> MeasurementOperator | None:
    if not section:
        return None
    kind = section.get("name", "inline")
    if kind == "sigma_z":
        return MeasurementOperator.from_matrix(SIGMA_Z)
    if kind == "spin":
        return spin_direction_measurement(_float(section, "theta"), _float(section, "phi", 0.0))
    if kind == "inline":
        if "matrix" not in section:
            raise ConfigError("inline measurement needs 'matrix'")
        m = parse_matrix(section["matrix"], "measurement.matrix")
        if m.shape[0] != d_p:
            raise ConfigError(f"measurement has dimension {m.shape[0]}, probe has {d_p}")
        return MeasurementOperator.from_matrix(m)
    raise ConfigError(f"unknown measurement '{kind}'")


def build_model(cfg: ExperimentConfig) -> Model:
    sec = cfg.model_section
    name = sec.get("name")
    tau = _float(sec, "tau", 1.0)
    lam = _float(sec, "lambda", 0.0)
    try:
        if name == "jaynes_cummings":
            model = jc_model(JaynesCummings(tau=tau, lam=lam, p=_float(sec, "p", 1.0)))
        elif name == "random":
            model = random_model(int(sec.get("seed", 0)), int(sec.get("d_s", 2)),
                                 int(sec.get("d_p", 2)), lam, tau,
                                 bool(sec.get("trace_references", True)))
        elif name == "inline":
            for key in ("h_s", "h_p", "v", "rho_in"):
                if key not in sec:
                    raise ConfigError(f"inline model needs '{key}'")
            h_s = parse_matrix(sec["h_s"], "h_s")
            h_p = parse_matrix(sec["h_p"], "h_p")
            v = parse_matrix(sec["v"], "v")
            rho_in = parse_matrix(sec["rho_in"], "rho_in")
            d_s, d_p = h_s.shape[0], h_p.shape[0]
            if v.shape[0] != d_s * d_p or rho_in.shape[0] != d_p:
                raise ConfigError("matrix dimensions are inconsistent")
            ref_s = parse_matrix(sec["ref_s"], "ref_s") if "ref_s" in sec else np.eye(d_s) / d_s
            ref_p = parse_matrix(sec["ref_p"], "ref_p") if "ref_p" in sec else np.eye(d_p) / d_p
            sys_s = QuantumSystem(h_s, ref_s)
            sys_p = QuantumSystem(h_p, ref_p)
            incoming = build_incoming_state(sys_p, rho_in)
            meas = MeasurementOperator.from_matrix(h_p)
            model = Model(sys_s, sys_p, Interaction(v, lam, tau), incoming, meas, name="inline")
        else:
            raise ConfigError(f"unknown model '{name}'")
    except InvalidInput as exc:
        raise ConfigError(str(exc)) from None
    meas = build_measurement(cfg.raw.get("measurement"), model.probe.dim)
    return model.with_measurement(meas) if meas is not None else model


def _c(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config_sha256": cfg.digest, "version": __version__}


def _header(cfg: ExperimentConfig) -> str:
    return f"# qms {__version__} config_sha256={cfg.digest}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _csv_text(cfg: ExperimentConfig, columns: list[str], rows, comments=()) -> str:
    buf = io.StringIO()
    buf.write(_header(cfg) + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class Output:
    """Routes results to files in ``out_dir`` or to stdout."""

    def __init__(self, cfg: ExperimentConfig, out_dir, force_json: bool):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir else None
        self.force_json = force_json
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, payload: dict) -> None:
        payload = {"_meta": _meta(self.cfg), **payload}
        text = json.dumps(payload, indent=2, sort_keys=True)
        if self.out_dir:
            (self.out_dir / f"{name}.json").write_text(text + "\n")
        if self.force_json or not self.out_dir:
            print(text)

    def csv(self, name: str, columns: list[str], rows, comments=(), summary: dict | None = None) -> None:
        rows = list(rows)
        text = _csv_text(self.cfg, columns, rows, comments)
        if self.out_dir:
            (self.out_dir / f"{name}.csv").write_text(text)
        if self.force_json:
            payload = {"_meta": _meta(self.cfg), "columns": columns,
                       "rows": [[_json_value(v) for v in r] for r in rows]}
            if summary:
                payload["summary"] = summary
            print(json.dumps(payload, indent=2, sort_keys=True))
        elif not self.out_dir:
            sys.stdout.write(text)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _subsets(run: dict, meas: MeasurementOperator, key: str = "subsets") -> list[list[int]]:
    """Subsets given by outcome values; default is every proper nonempty subset."""
    if key in run:
        try:
            return [[meas.index_of(float(x)) for x in s] for s in run[key]]
        except (InvalidInput, TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    idx = range(meas.n_outcomes)
    return [list(c) for r in range(1, meas.n_outcomes) for c in itertools.combinations(idx, r)]


def cmd_spectrum(model: Model, cfg, out: Output, args) -> int:
    spec = spectral_analysis(model.transfer_family())
    order = np.argsort(-np.abs(spec.eigenvalues), kind="stable")
    out.json("spectrum", {
        "eigenvalues": [_c(z) for z in spec.eigenvalues[order]],
        "gap": spec.gap,
        "condition_a": spec.condition_a,
        "fixed_multiplicity": spec.fixed_multiplicity,
        "nilpotent_norm": spec.nilpotent_norm,
    })
    return 0


def cmd_probability(model: Model, cfg, out: Output, args) -> int:
    run = cfg.run
    if "sequence" not in run:
        raise ConfigError("run.sequence (outcome values) is required")
    meas = model.measurement
    try:
        seq = [meas.index_of(float(x)) for x in run["sequence"]]
    except (InvalidInput, TypeError, ValueError) as exc:
        raise ConfigError(f"sequence: {exc}") from None
    tf = model.transfer_family()
    prob = joint_probability(tf, [[m] for m in seq])
    t = tf.t_full
    marginals = []
    row = tf.psi_s.conj()
    for m in seq:
        marginals.append(float((row @ tf.t_outcome[m] @ tf.psi_s).real))
        row = row @ t
    independent = model.coupling == 0 or (
        model.name == "jaynes_cummings" and is_resonant(model.coupling, model.tau))
    out.json("probability", {
        "sequence": [float(meas.eigenvalues[m]) for m in seq],
        "probability": prob,
        "product_of_marginals": float(np.prod(marginals)),
        "marginals": marginals,
        "independent": bool(independent),
    })
    return 0


def _seed(cfg, args) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" not in cfg.run:
        raise ConfigError("sampling runs need run.seed or --seed")
    return int(cfg.run["seed"])


def cmd_sample(model: Model, cfg, out: Output, args) -> int:
    run = cfg.run
    seed = _seed(cfg, args)
    n = int(run.get("n_steps", 100))
    n_traj = int(run.get("n_trajectories", 1))
    ens = sample_ensemble(model.transfer_family(), n, n_traj, seed)
    values = ens.values
    rows = ((i, k + 1, int(ens.outcomes[i, k]), float(values[i, k]))
            for i in range(ens.n_trajectories) for k in range(n))
    means = ens.means()
    comments = [f"seed={seed} n_steps={n} n_trajectories={n_traj}"]
    out.csv("sample", ["trajectory_id", "step", "outcome_index", "outcome_value"], rows, comments,
            {"seed": seed, "trajectory_means": [float(x) for x in means],
             "log_probabilities": [float(x) for x in ens.log_weight]})
    return 0


def cmd_frequencies(model: Model, cfg, out: Output, args) -> int:
    tf = model.transfer_family()
    spectral_analysis(tf, strict=True)
    rows = [(r.m, r.f_exact, r.f_zero, r.f_prime, r.residual) for r in flux_report(model)]
    mu = asymptotic_mean(tf, spectral_analysis(tf))
    out.csv("frequencies", ["m", "F_exact", "F_zero", "f_prime", "residual"], rows,
            [f"lambda={_fmt(model.coupling)} mu_inf={_fmt(mu)}"], {"mu_inf": mu})
    return 0


def cmd_correlations(model: Model, cfg, out: Output, args) -> int:
    run = cfg.run
    tf = model.transfer_family()
    lags = run.get("lags", [1, 30])
    lags = range(int(lags[0]), int(lags[1]) + 1) if len(lags) == 2 else [int(k) for k in lags]
    a = model.measurement.index_of(float(run.get("a", model.measurement.eigenvalues[0])))
    b = model.measurement.index_of(float(run.get("b", model.measurement.eigenvalues[0])))
    records = correlation_table(tf, a, b, lags)
    spec = spectral_analysis(tf)
    fitted = fit_decay_rate(records)
    bound = float(-np.log(1 - spec.gap)) if 0 < spec.gap < 1 else float("inf")
    out.csv("correlations", ["lag", "value", "events"],
            [(r.lag, r.value, r.events) for r in records],
            [f"fitted_rate={_fmt(fitted)} gap_rate={_fmt(bound)} gap={_fmt(spec.gap)}"],
            {"fitted_rate": fitted, "gap_rate": bound, "gap": spec.gap})
    return 0


def cmd_ldp(model: Model, cfg, out: Output, args) -> int:
    run = cfg.run
    grid = run.get("alpha_grid", [-2.0, 2.0, 41])
    alphas = np.linspace(float(grid[0]), float(grid[1]), int(grid[2]))
    xs = None
    if "x_grid" in run:
        g = run["x_grid"]
        xs = np.linspace(float(g[0]), float(g[1]), int(g[2]))
    curve = ldp_curve(model.transfer_family(), alphas, xs)
    summary = {"mean": curve.mean}
    comments = [f"mean={_fmt(curve.mean)}"]
    if "eps" in run:
        lower, upper = gartner_ellis_interval(curve, float(run["eps"]), float(run["eps_prime"]))
        summary.update(closed_rate=lower, open_rate=upper)
        comments.append(f"closed_rate={_fmt(lower)} open_rate={_fmt(upper)}")
    out.csv("ldp_lambda", ["alpha", "Lambda", "rho_plus"],
            zip(curve.alphas, curve.lambda_vals, curve.rho_plus), comments, summary)
    out.csv("ldp_rate", ["x", "rate", "exposed"],
            zip(curve.xs, curve.rate_vals, curve.exposed_flags), comments, summary)
    return 0


def cmd_eventually(model: Model, cfg, out: Output, args) -> int:
    tf = model.transfer_family()
    spec = spectral_analysis(tf)
    entries = []
    for s in _subsets(cfg.run, model.measurement):
        pi_s = subset_projection(tf, s)
        overlap = np.vdot(tf.psi_s, spec.riesz_projection @ pi_s @ tf.psi_s)
        entries.append({
            "subset": [float(model.measurement.eigenvalues[m]) for m in s],
            "probability": eventually_probability(tf, s, spec),
            "overlap": _c(overlap),
        })
    out.json("eventually", {"condition_a": spec.condition_a, "subsets": entries})
    return 0


def cmd_validate(model: Model, cfg, out: Output, args) -> int:
    n_max = args.n_probes if args.n_probes is not None else int(cfg.run.get("n_probes", 3))
    tf = model.transfer_family()
    outcomes = tf.all_outcomes
    worst = 0.0
    worst_sum = 0.0
    count = 0
    for n in range(1, n_max + 1):
        total = 0.0
        for seq in itertools.product(outcomes, repeat=n):
            subsets = [[m] for m in seq]
            p = joint_probability(tf, subsets)
            q = brute_force_joint(model.scatterer, model.probe, model.interaction,
                                  model.measurement, model.rho_in, subsets)
            worst = max(worst, abs(p - q))
            total += p
            count += 1
        worst_sum = max(worst_sum, abs(total - 1))
    ok = worst <= VALIDATE_TOL and worst_sum <= VALIDATE_TOL
    out.json("validate", {"n_probes": n_max, "sequences": count, "max_abs_diff": worst,
                          "max_sum_defect": worst_sum, "tolerance": VALIDATE_TOL, "passed": ok})
    return 0 if ok else EXIT_VALIDATION


COMMANDS = {
    "spectrum": cmd_spectrum,
    "probability": cmd_probability,
    "sample": cmd_sample,
    "frequencies": cmd_frequencies,
    "correlations": cmd_correlations,
    "ldp": cmd_ldp,
    "eventually": cmd_eventually,
    "validate": cmd_validate,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qms", description="Repeated-measurement statistics.")
    parser.add_argument("--version", action="version", version=f"qms {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-c", "--config", required=True, help="TOML experiment file")
    parser.add_argument("-o", "--out", help="directory for output files")
    parser.add_argument("--seed", type=int, help="overrides run.seed")
    parser.add_argument("--json", action="store_true", help="print JSON to stdout")
    parser.add_argument("--n-probes", type=int, help="longest sequence for validate")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        model = build_model(cfg)
        out = Output(cfg, args.out, args.json)
        return COMMANDS[args.command](model, cfg, out, args)
    except (ConfigError, InvalidInput) as exc:
        print(f"qms: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalPreconditionError as exc:
        print(f"qms: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
