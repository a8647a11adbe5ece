"""Command line runner: ``evolab <command> --config cfg.json --out dir``.

Configs are flat JSON objects. Every key has a default per command, the
merged config is written back into ``report.json``, and unknown keys or
badly typed values are rejected before any computation starts.

Exit status is 0 when every verdict holds, 2 when a verdict fails and 1 on
any error (bad config, violated precondition, numerical failure).
"""

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._validation import ContractViolation, NumericalFailure
from .evo_solver import SCHEMES, check_causality, solve
from .homogenize import (PROFILES, CoefficientFamily, longitudinal_experiment,
                         orthogonal_experiment, periodic_moments,
                         standard_test_set, static_criterion)
from .material_law import (certify_accretivity, constant_law,
                           reciprocal_coefficient_law, shifted_law)
from .space_ops import SpaceGrid, SpatialOperator, periodic_derivative
from .time_axis import (TimeGrid, WeightedSignal, antiderivative,
                        fourier_laplace, inverse_fourier_laplace, smooth_bump,
                        time_derivative, weighted_bump_signal, weighted_norm,
                        write_signal_csv)

COMMANDS = ("selftest", "solve", "certify", "gconv-static",
            "example-longitudinal", "example-orthogonal")
LAWS = ("constant", "reciprocal_coefficient", "shifted_by_a_over_z")


class ConfigError(ValueError):
    """A config file that cannot be parsed or validated."""


_COMMON = {
    "seed": None,
    "profile": "two_plus_sine",
    "profile_value": 2.0,
    "profile_samples": None,
}

DEFAULTS = {
    "selftest": {"t_min": -8.0, "t_max": 8.0, "n_samples": 512, "rho": 1.0,
                 "length_x": 1.0, "n_x": 64},
    "solve": {"t_min": -4.0, "t_max": 20.0, "n_samples": 1024, "rho": 2.0,
              "length_x": 0.25, "n_x": 128, "law": "reciprocal_coefficient",
              "n": 4, "operator": "derivative", "scheme": "bdf2",
              "forcing_center": 2.0, "forcing_half_width": 2.0,
              "causality_cut": None},
    "certify": {"rho_list": [2.0], "length_x": 1.0, "n_x": 64,
                "law": "reciprocal_coefficient", "n": 1, "n_freq": 33,
                "xi_max": 1000.0, "beta": None},
    "gconv-static": {"rho": 2.0, "length_x": 0.25, "n_x": 512,
                     "n_list": [4, 8, 16, 32, 64], "tolerance": 2e-3},
    "example-longitudinal": {"rho": 2.0, "static_rhos": [1.0, 2.0, 4.0],
                             "t_min": -4.0, "t_max": 20.0, "n_samples": 256,
                             "length_x": 0.25, "n_x": 512,
                             "n_list": [4, 8, 16, 32, 64], "tolerance": 2e-3,
                             "consistency_tol": 5e-3, "scheme": "bdf2"},
    "example-orthogonal": {"rho": 17.0, "t_min": -2.0, "t_max": 2.0,
                           "n_samples": 1024, "length_x": 2.0, "n_x": 64,
                           "length_y": 1.0, "n_y": 512,
                           "n_list": [2, 4, 8, 16, 32, 64], "K": 16, "L": 16,
                           "tolerance": 2e-3, "consistency_tol": 5e-3,
                           "scheme": "bdf2"},
}

_TYPES = {
    "seed": int, "n_samples": int, "n_x": int, "n_y": int, "n": int,
    "n_freq": int, "K": int, "L": int,
    "t_min": float, "t_max": float, "rho": float, "length_x": float,
    "length_y": float, "profile_value": float, "tolerance": float,
    "consistency_tol": float, "forcing_center": float,
    "forcing_half_width": float, "xi_max": float, "beta": float,
    "causality_cut": float,
    "profile": str, "law": str, "operator": str, "scheme": str,
    "n_list": list, "rho_list": list, "static_rhos": list,
    "profile_samples": list,
}

_CHOICES = {"profile": PROFILES, "law": LAWS, "operator": ("derivative", "zero"),
            "scheme": SCHEMES}


def _check_value(key, value):
    kind = _TYPES[key]
    if value is None:
        return value
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        if key in _CHOICES and value not in _CHOICES[key]:
            raise ConfigError(f"field {key!r}: {value!r} is not one of {_CHOICES[key]}")
        return value
    if kind is list and isinstance(value, list):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"field {key!r}: expected a list of numbers")
        return value
    raise ConfigError(f"field {key!r}: expected {kind.__name__}, got {type(value).__name__}")


def load_config(command, path=None, text=None):
    """Parse, validate and complete a config for ``command``."""
    raw = {}
    if path is not None:
        text = Path(path).read_text()
    if text is not None and text.strip():
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): "
                f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {**_COMMON, **DEFAULTS[command]}
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown field(s) for {command}: {', '.join(unknown)}")
    cfg = dict(allowed)
    for key, value in raw.items():
        cfg[key] = _check_value(key, value)
    if cfg["seed"] is None:
        raise ConfigError("field 'seed': a seed is mandatory")
    return cfg


def _family(cfg):
    return CoefficientFamily.from_spec(cfg["profile"], cfg["profile_value"],
                                       cfg["profile_samples"])


def _time_grid(cfg):
    return TimeGrid(cfg["t_min"], cfg["t_max"], cfg["n_samples"])


def _law(cfg, family, grid, rho):
    a = family.coefficient(cfg["n"], grid.x)
    if cfg["law"] == "constant":
        return constant_law(1.0, grid.dim, alpha=rho)
    if cfg["law"] == "reciprocal_coefficient":
        return reciprocal_coefficient_law(a, alpha=rho / family.upper)
    return shifted_law(a, alpha=1.0)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_selftest(cfg, out):
    tg = _time_grid(cfg)
    rho = cfg["rho"]
    rng = np.random.default_rng(cfg["seed"])
    checks = {}

    prof = rng.standard_normal(3)
    f = weighted_bump_signal(tg, rho, 0.5 * (tg.t_min + tg.t_max), 0.2 * tg.length, prof)
    spec = fourier_laplace(f)
    # Parseval holds for the rectangle rule; the signal vanishes at the ends
    unit = abs(spec.norm() - weighted_norm(f)) / weighted_norm(f)
    checks["unitarity"] = {"value": unit, "tol": 1e-8, "passed": unit <= 1e-8}
    back = inverse_fourier_laplace(spec)
    rt = float(np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values)))
    checks["roundtrip"] = {"value": rt, "tol": 1e-10, "passed": rt <= 1e-10}
    pair = antiderivative(time_derivative(f), method="spectral") - f
    inv = weighted_norm(pair) / weighted_norm(f)
    checks["inverse_pair"] = {"value": inv, "tol": 1e-6, "passed": inv <= 1e-6}

    # the running trapezoid of a sampled indicator of [0, 1) is exactly 0
    # before the jump and exactly 1 after it when dt is a power of two
    ramp_grid = TimeGrid(-1.0, 3.0, 256)
    t = ramp_grid.times
    ramp = antiderivative(WeightedSignal(ramp_grid, ((t >= 0) & (t < 1)).astype(float), rho))
    vals = ramp.values[:, 0].real
    err = max(float(np.max(np.abs(vals[t < 0]))), float(np.max(np.abs(vals[t >= 1] - 1.0))))
    checks["antiderivative_ramp"] = {"value": err, "tol": 0.0, "passed": err == 0.0}

    sg = SpaceGrid(cfg["length_x"], cfg["n_x"], cfg["length_x"], cfg["n_x"])
    skew = 0.0
    for axis in ("x", "y"):
        D = periodic_derivative(sg, axis).matrix
        skew = max(skew, float(np.max(np.abs(D + D.conj().T))))
    checks["skew_adjointness"] = {"value": skew, "tol": 0.0, "passed": skew == 0.0}

    for c in checks.values():
        c["value"] = float(c["value"])
        c["passed"] = bool(c["passed"])
    return {"checks": checks}, all(c["passed"] for c in checks.values())


def run_solve(cfg, out):
    tg = _time_grid(cfg)
    rho = cfg["rho"]
    family = _family(cfg)
    grid = SpaceGrid(cfg["length_x"], cfg["n_x"])
    law = _law(cfg, family, grid, rho)
    A = periodic_derivative(grid) if cfg["operator"] == "derivative" \
        else SpatialOperator.zero(grid.dim)
    psi = smooth_bump(grid.x, 0.5 * grid.length_x, 0.3 * grid.length_x)
    f = weighted_bump_signal(tg, rho, cfg["forcing_center"], cfg["forcing_half_width"], psi)
    cert = certify_accretivity(law, [rho], n_freq=17, xi_max=np.pi / tg.dt)
    u, report = solve(law, A, f, cert, cfg["scheme"])
    cut = cfg["causality_cut"] if cfg["causality_cut"] is not None else cfg["forcing_center"]
    report.causality_defect = check_causality(law, A, f, cut, cert, cfg["scheme"])
    write_signal_csv(u, out / "u.csv")
    ok = report.bound_holds(1e-6)
    return {"solve": report.to_dict(), "certificate": cert.to_dict(),
            "bound_holds": bool(ok)}, ok


def run_certify(cfg, out):
    family = _family(cfg)
    grid = SpaceGrid(cfg["length_x"], cfg["n_x"])
    rho_min = min(cfg["rho_list"])
    law = _law(cfg, family, grid, rho_min)
    cert = certify_accretivity(law, cfg["rho_list"], n_freq=cfg["n_freq"],
                               xi_max=cfg["xi_max"], beta=cfg["beta"])
    (out / "certificate.json").write_text(cert.to_json() + "\n")
    return {"certificate": cert.to_dict()}, cert.verdict_wp


def run_gconv_static(cfg, out):
    family = _family(cfg)
    grid = SpaceGrid(cfg["length_x"], cfg["n_x"])
    rho = cfg["rho"]
    A = periodic_derivative(grid)
    ids, tests = standard_test_set(grid.x, grid.length_x, grid.h_x, cfg["seed"])
    psi = smooth_bump(grid.x, 0.5 * grid.length_x, 0.3 * grid.length_x)
    alpha = rho / family.upper
    laws = [reciprocal_coefficient_law(family.coefficient(n, grid.x), alpha, name=f"n{n}")
            for n in cfg["n_list"]]
    b_inv = periodic_moments(family, 1).b_inv
    limit = constant_law(b_inv, grid.dim, alpha, name="b_inv")
    report = static_criterion(laws, A, rho, psi, tests, ids, cfg["n_list"], limit,
                              measure=grid.h_x, tolerance=cfg["tolerance"],
                              label="gconv_static")
    report.write_csv(out / "pairings.csv")
    return {"gconv": report.to_dict()}, report.verdict


def _write_parts(report, out):
    report.write_csv(out / "pairings.csv")
    for name, part in report.parts.items():
        part.write_csv(out / f"pairings_{name.replace('=', '_')}.csv")


def run_example_longitudinal(cfg, out):
    family = _family(cfg)
    grid = SpaceGrid(cfg["length_x"], cfg["n_x"])
    psi = smooth_bump(grid.x, 0.5 * grid.length_x, 0.3 * grid.length_x)
    report = longitudinal_experiment(
        family, cfg["rho"], psi, cfg["n_list"], grid, _time_grid(cfg),
        static_rhos=cfg["static_rhos"], seed=cfg["seed"],
        tolerance=cfg["tolerance"], consistency_tol=cfg["consistency_tol"],
        scheme=cfg["scheme"])
    _write_parts(report, out)
    return {"gconv": report.to_dict()}, report.verdict


def run_example_orthogonal(cfg, out):
    family = _family(cfg)
    rho = cfg["rho"]
    if not rho > 4.0 * family.kappa:
        raise ContractViolation(
            f"example-orthogonal needs rho > 4*kappa = {4.0 * family.kappa:g} "
            f"(kappa = sup|a| + 1); got rho={rho:g}")
    tg = _time_grid(cfg)
    grid = SpaceGrid(cfg["length_x"], cfg["n_x"], cfg["length_y"], cfg["n_y"])
    g = weighted_bump_signal(tg, rho, tg.t_min + 0.375 * tg.length, 0.1875 * tg.length)
    p = smooth_bump(grid.x, 0.5 * grid.length_x, 0.3 * grid.length_x)
    q = 1.0 + 0.5 * np.cos(2.0 * np.pi * grid.y / grid.length_y)
    report = orthogonal_experiment(
        family, rho, g, p, q, cfg["n_list"], cfg["K"], cfg["L"], grid,
        seed=cfg["seed"], tolerance=cfg["tolerance"],
        consistency_tol=cfg["consistency_tol"], scheme=cfg["scheme"])
    _write_parts(report, out)
    return {"gconv": report.to_dict()}, report.verdict


RUNNERS = {
    "selftest": run_selftest,
    "solve": run_solve,
    "certify": run_certify,
    "gconv-static": run_gconv_static,
    "example-longitudinal": run_example_longitudinal,
    "example-orthogonal": run_example_orthogonal,
}


def _thread_limit():
    value = os.environ.get("EVOLAB_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"EVOLAB_THREADS must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError("EVOLAB_THREADS must be >= 1")
    return n


def _dump(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def run(command, config_path, out_dir):
    """Execute one command and write ``report.json``; returns the exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "timestamp": datetime.datetime.now(
        datetime.timezone.utc).isoformat()}
    try:
        cfg = load_config(command, config_path)
        doc["config"] = cfg
        threads = _thread_limit()
        if threads is None:
            result, verdict = RUNNERS[command](cfg, out)
        else:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=threads):
                result, verdict = RUNNERS[command](cfg, out)
    except (ConfigError, ContractViolation, NumericalFailure, OSError) as exc:
        doc["error"] = {"type": type(exc).__name__, "operation": command,
                        "message": str(exc)}
        doc["verdict"] = False
        (out / "report.json").write_text(_dump(doc))
        print(f"evolab {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    doc.update(result)
    doc["verdict"] = bool(verdict)
    (out / "report.json").write_text(_dump(doc))
    return 0 if verdict else 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; status 2 is reserved for failed verdicts."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="evolab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat JSON config file")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
