"""Command-line front end.

One JSON config document plus flag overrides drive every experiment; flags
win over the file, the file wins over built-in defaults, and the seed falls
back to the VBBOOST_SEED environment variable before defaulting to 0. Every
run prints a JSON report to stdout; with --out-dir it also writes report.json,
raw.csv, and metadata.json (the fully resolved config and seeds, so a run is
reproducible from its artifacts alone). Outputs carry no timestamps: the same
config always produces byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .boosting import BoostConfig, required_iterations, run_boost, step_record
from .divergences import sample_curvature
from .family import FamilyConstraints, GaussianMixture
from .lmo import LmoConfig, lmo_grid_oracle, solve_lmo
from .seeding import derive_seed
from .targets import (
    ConjugateGaussianModel,
    audit_exponential_family,
    bernoulli_family,
    gaussian_mean_family,
    reference_component,
    save_dataset,
)
from .validation import (
    ReplicationPlan,
    boundedness_experiment,
    bvm_experiment,
    convergence_experiment,
    convergence_sweep,
)

RAW_CSV_HEADER = ["n", "replicate", "statistic", "value", "seed"]
CURVATURE_CSV_HEADER = ["trial", "alpha", "scaled_kl", "pair_bound"]
LMO_CSV_HEADER = ["restart", "step", "objective"]
AUDIT_CSV_HEADER = ["statistic", "value"]


class CliError(Exception):
    """Configuration or dispatch failure with a structured payload."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field

    def payload(self) -> dict:
        return {"error": {"field": self.field, "message": str(self)}}


_COMMON_DEFAULTS = {
    "d": 1,
    "M": 2.0,
    "c0": 1.5,
    "sigma_n": None,  # resolved to n^-1/2 when a sample size is in play
    "R": 200,
    "n": None,
    "seed": None,
    "jobs": 1,
    "mu0": 0.0,
    "sigma": 1.0,  # likelihood variance (isotropic)
    "sigma0": 1.0,  # prior variance (isotropic)
    "theta0": 0.0,
}

_COMMAND_DEFAULTS = {
    "boost": {"n": 50, "iterations": 10, "mc_samples": 128, "restarts": 4, "max_steps": 50},
    "validate-thm1": {"n_grid": [100, 1000, 10000], "sigma_scale": 1.0, "sigma_power": 0.5},
    "validate-prop1": {"n": 2000},
    "validate-convergence": {
        "n": 25,
        "sigma0": 10.0,
        "M": 1.0,
        "sweep": False,
        "mc_samples": 64,
        "restarts": 2,
        "max_steps": 30,
        "curvature_trials": 0,
    },
    "curvature": {"trials": 1000},
    "lmo-debug": {"n": 50, "grid": False, "mc_samples": 128, "restarts": 4, "max_steps": 50},
    "audit-expfam": {
        "family": "gaussian",
        "grid_lo": -2.0,
        "grid_hi": 2.0,
        "grid_points": 21,
        "alpha": 1.0,
        "mc_samples": 100000,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vbboost",
        description="Greedy Gaussian-mixture posterior approximation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--out-dir", help="directory for report.json/raw.csv/metadata.json")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--M", type=float)
        p.add_argument("--c0", type=float)
        p.add_argument("--sigma-n", dest="sigma_n", type=float)
        p.add_argument("--mu0", type=float)
        p.add_argument("--sigma", type=float, help="likelihood variance")
        p.add_argument("--sigma0", type=float, help="prior variance")
        p.add_argument("--theta0", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--R", type=int)

    p = sub.add_parser("boost", help="run the boosting loop on a simulated posterior")
    add_common(p)
    p.add_argument("--iterations", "-K", dest="iterations", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--save-data", dest="save_data", action="store_true", default=None)

    p = sub.add_parser("validate-thm1", help="stochastic boundedness replication")
    add_common(p)
    p.add_argument("--n-grid", dest="n_grid", help="comma-separated sample sizes")
    p.add_argument("--sigma-scale", dest="sigma_scale", type=float)
    p.add_argument("--sigma-power", dest="sigma_power", type=float)

    p = sub.add_parser("validate-prop1", help="posterior limit statistics replication")
    add_common(p)

    p = sub.add_parser("validate-convergence", help="iteration-schedule replication")
    add_common(p)
    p.add_argument("--sweep", action="store_true", default=None)
    p.add_argument("--iterations", "-K", dest="iterations", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--curvature-trials", dest="curvature_trials", type=int)

    p = sub.add_parser("curvature", help="curvature bounds and empirical supremum")
    add_common(p)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("lmo-debug", help="solve one LMO instance and inspect descent")
    add_common(p)
    p.add_argument("--grid", action="store_true", default=None, help="also run the d=1 grid oracle")
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)

    p = sub.add_parser("audit-expfam", help="exponential-family assumption audit")
    add_common(p)
    p.add_argument("--family", choices=["gaussian", "bernoulli"])
    p.add_argument("--grid-lo", dest="grid_lo", type=float)
    p.add_argument("--grid-hi", dest="grid_hi", type=float)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit flags; seed also falls back to env."""
    command = args.command
    config = dict(_COMMON_DEFAULTS)
    config.update(_COMMAND_DEFAULTS[command])
    file_path = getattr(args, "config", None)
    if file_path:
        try:
            with open(file_path) as fh:
                loaded = json.load(fh)
        except FileNotFoundError:
            raise CliError("config", f"config file not found: {file_path}")
        except json.JSONDecodeError as exc:
            raise CliError("config", f"config file is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise CliError("config", "config file must hold a JSON object")
        for key, value in loaded.items():
            if key == "command":
                continue
            config[key] = value
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        config[key] = value
    if config.get("seed") is None:
        env = os.environ.get("VBBOOST_SEED")
        config["seed"] = int(env) if env else 0
    if isinstance(config.get("n_grid"), str):
        config["n_grid"] = [int(tok) for tok in config["n_grid"].split(",") if tok]
    config["command"] = command
    _validate(config)
    return config


def _validate(config: dict) -> None:
    c0 = config["c0"]
    if not 1.0 < c0 < 2.0:
        raise CliError("c0", f"c0 must lie in (1, 2), got {c0}")
    if config["M"] <= 0:
        raise CliError("M", f"M must be positive, got {config['M']}")
    if config["d"] < 1:
        raise CliError("d", f"d must be a positive integer, got {config['d']}")
    if config["d"] > 2 and config["command"] in ("curvature", "lmo-debug"):
        raise CliError("d", "this command needs quadrature and supports d <= 2")
    sigma_n = config.get("sigma_n")
    if sigma_n is not None and sigma_n <= 0:
        raise CliError("sigma_n", f"sigma_n must be positive, got {sigma_n}")
    for key in ("R", "jobs"):
        if config.get(key) is not None and config[key] < 1:
            raise CliError(key, f"{key} must be >= 1, got {config[key]}")
    n = config.get("n")
    if n is not None and n < 1:
        raise CliError("n", f"n must be >= 1, got {n}")
    if config.get("sigma", 1.0) <= 0 or config.get("sigma0", 1.0) <= 0:
        raise CliError("sigma", "variances must be positive")


def _resolved_sigma_n(config: dict) -> float:
    sigma_n = config.get("sigma_n")
    if sigma_n is not None:
        return float(sigma_n)
    n = config.get("n")
    if n is None:
        raise CliError("sigma_n", "sigma_n is required when no sample size is given")
    return float(n) ** -0.5


def _constraints(config: dict, sigma_n: float) -> FamilyConstraints:
    return FamilyConstraints(
        radius=float(config["M"]),
        bandwidth=sigma_n,
        bandwidth_factor=float(config["c0"]),
        dim=int(config["d"]),
    )


def _model(config: dict) -> ConjugateGaussianModel:
    d = int(config["d"])
    return ConjugateGaussianModel(
        likelihood_cov=float(config["sigma"]) * np.eye(d),
        prior_mean=np.full(d, float(config["mu0"])),
        prior_cov=float(config["sigma0"]) * np.eye(d),
        truth=np.full(d, float(config["theta0"])),
    )


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def _emit(report: dict, rows, header, config: dict, extra_files=None) -> None:
    text = json.dumps(_json_safe(report), indent=2, sort_keys=True)
    print(text)
    out_dir = config.get("out_dir")
    if not out_dir:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(text + "\n")
    with open(out / "raw.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    metadata = {
        "command": config["command"],
        "config": {k: v for k, v in config.items() if k != "out_dir"},
        "seed": config["seed"],
    }
    (out / "metadata.json").write_text(
        json.dumps(_json_safe(metadata), indent=2, sort_keys=True) + "\n"
    )
    for name, content in (extra_files or {}).items():
        (out / name).write_text(content)


def _cmd_boost(config: dict) -> None:
    seed = config["seed"]
    n = int(config["n"])
    sigma_n = _resolved_sigma_n(config)
    c = _constraints(config, sigma_n)
    model = _model(config)
    data = model.simulate(n, derive_seed(seed, 0))
    target = model.target(data)
    init = reference_component(c, model.truth)
    boost_config = BoostConfig(
        iterations=int(config["iterations"]),
        lmo=LmoConfig(
            mc_samples=int(config["mc_samples"]),
            restarts=int(config["restarts"]),
            max_steps=int(config["max_steps"]),
        ),
        seed=derive_seed(seed, 1),
    )
    mixture, trace = run_boost(target, c, init, boost_config)
    final = trace.steps[-1]
    report = {
        "command": "boost",
        "n": n,
        "iterations": len(trace),
        "sigma_n": sigma_n,
        "final_objective": final.objective.value,
        "final_std_error": final.objective.std_error,
        "normalized": final.objective.normalized,
        "init_objective": trace.init_objective.value,
        "components": mixture.n_components,
        "curvature": trace.curvature,
        "seed": seed,
    }
    header = trace.csv_header()
    rows = []
    for s in trace.steps:
        row = [s.k, s.gamma]
        row += [float(v) for v in s.component.mean]
        row += [
            s.component.sigma,
            s.lmo_objective,
            s.objective.value,
            s.objective.std_error,
            s.rate_bound,
            s.rate_bound_optimistic,
        ]
        rows.append(row)
    extra = {
        "trace.jsonl": "".join(
            json.dumps(step_record(s), sort_keys=True) + "\n" for s in trace.steps
        )
    }
    if config.get("save_data") and config.get("out_dir"):
        out_dir = Path(config["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        save_dataset(data, out_dir / "data.csv", model_label="conjugate_gaussian")
    _emit(report, rows, header, config, extra)


def _cmd_thm1(config: dict) -> None:
    plan = ReplicationPlan(
        model=_model(config),
        n_grid=tuple(config["n_grid"]),
        replicates=int(config["R"]),
        base_seed=config["seed"],
        radius=float(config["M"]),
        bandwidth_factor=float(config["c0"]),
        sigma_scale=float(config["sigma_scale"]),
        sigma_power=float(config["sigma_power"]),
    )
    report = boundedness_experiment(plan, jobs=int(config["jobs"]))
    _emit(report.to_dict(), report.raw_rows, RAW_CSV_HEADER, config)


def _cmd_prop1(config: dict) -> None:
    report = bvm_experiment(
        _model(config),
        n=int(config["n"]),
        replicates=int(config["R"]),
        base_seed=config["seed"],
        jobs=int(config["jobs"]),
    )
    _emit(report.to_dict(), report.raw_rows, RAW_CSV_HEADER, config)


def _cmd_convergence(config: dict) -> None:
    model = _model(config)
    lmo = LmoConfig(
        mc_samples=int(config["mc_samples"]),
        restarts=int(config["restarts"]),
        max_steps=int(config["max_steps"]),
    )
    if config.get("sweep"):
        report = convergence_sweep(
            model,
            radius=float(config["M"]),
            bandwidth_factor=float(config["c0"]),
            base_seed=config["seed"],
            lmo=lmo,
        )
    else:
        n = int(config["n"])
        sigma_n = (
            float(config["sigma_n"])
            if config.get("sigma_n") is not None
            else (float(config["c0"]) * n) ** -0.5
        )
        c = _constraints(config, sigma_n)
        iterations = config.get("iterations")
        boost_config = BoostConfig(
            iterations=int(iterations) if iterations else required_iterations(n),
            lmo=lmo,
            seed=derive_seed(config["seed"], n),
        )
        report = convergence_experiment(
            model,
            n,
            c,
            boost_config,
            base_seed=config["seed"],
            curvature_trials=int(config["curvature_trials"]),
        )
    _emit(report.to_dict(), report.raw_rows, RAW_CSV_HEADER, config)


def _cmd_curvature(config: dict) -> None:
    sigma_n = _resolved_sigma_n(config)
    c = _constraints(config, sigma_n)
    report = sample_curvature(c, trials=int(config["trials"]), seed=config["seed"])
    rows = [
        (i, rec[0], rec[1], rec[2]) for i, rec in enumerate(report.records)
    ]
    payload = report.to_dict()
    payload["command"] = "curvature"
    payload["sigma_n"] = sigma_n
    _emit(payload, rows, CURVATURE_CSV_HEADER, config)


def _cmd_lmo_debug(config: dict) -> None:
    seed = config["seed"]
    n = int(config["n"])
    sigma_n = _resolved_sigma_n(config)
    c = _constraints(config, sigma_n)
    model = _model(config)
    data = model.simulate(n, derive_seed(seed, 0))
    target = model.target(data)
    init = reference_component(c, model.truth)
    psi_prev = GaussianMixture((init,), [1.0])
    lmo_config = LmoConfig(
        mc_samples=int(config["mc_samples"]),
        restarts=int(config["restarts"]),
        max_steps=int(config["max_steps"]),
        seed=derive_seed(seed, 1),
    )
    result = solve_lmo(psi_prev, target, c, lmo_config)
    report = {
        "command": "lmo-debug",
        "component": result.component.to_dict(),
        "objective": result.objective,
        "restarts_used": result.restarts_used,
        "feasible": result.feasible,
        "descent_lengths": [len(s) for s in result.descent_objectives],
        "seed": seed,
    }
    if config.get("grid"):
        oracle = lmo_grid_oracle(psi_prev, target, c)
        report["grid_oracle"] = {
            "component": oracle.component.to_dict(),
            "objective": oracle.objective,
        }
        report["gap_vs_oracle"] = result.objective - oracle.objective
    rows = [
        (i, j, obj)
        for i, seq in enumerate(result.descent_objectives)
        for j, obj in enumerate(seq)
    ]
    _emit(report, rows, LMO_CSV_HEADER, config)


def _cmd_audit(config: dict) -> None:
    theta0 = float(config["theta0"])
    if config["family"] == "gaussian":
        model = gaussian_mean_family(dim=int(config["d"]), truth=theta0)
    else:
        model = bernoulli_family(truth=theta0)
    lo, hi, pts = float(config["grid_lo"]), float(config["grid_hi"]), int(config["grid_points"])
    if pts < 2 or hi <= lo:
        raise CliError("grid_points", "need an increasing grid with >= 2 points")
    base = np.linspace(lo, hi, pts)
    grid = [np.full(model.dim, g) for g in base]
    audit = audit_exponential_family(
        model,
        grid,
        alpha=float(config["alpha"]),
        mc_samples=int(config["mc_samples"]),
        seed=config["seed"],
    )
    payload = audit.to_dict()
    payload["command"] = "audit-expfam"
    payload["family"] = config["family"]
    rows = [("strong_convexity_margin", audit.strong_convexity_margin)]
    rows += [(f"lipschitz_{k}", v) for k, v in sorted(audit.lipschitz_constants.items())]
    rows += [
        ("kl_identity_max_err", audit.kl_identity_max_err),
        ("second_moment_max_sigmas", audit.second_moment_max_sigmas),
    ]
    _emit(payload, rows, AUDIT_CSV_HEADER, config)


_DISPATCH = {
    "boost": _cmd_boost,
    "validate-thm1": _cmd_thm1,
    "validate-prop1": _cmd_prop1,
    "validate-convergence": _cmd_convergence,
    "curvature": _cmd_curvature,
    "lmo-debug": _cmd_lmo_debug,
    "audit-expfam": _cmd_audit,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        _DISPATCH[config["command"]](config)
    except CliError as exc:
        print(json.dumps(exc.payload(), sort_keys=True), file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        payload = {"error": {"field": None, "message": str(exc), "type": type(exc).__name__}}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
