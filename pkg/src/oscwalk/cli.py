"""Command-line interface: ``oscwalk {analyze,invariant,simulate,classify,kemperman}``.

Every command reads one JSON config, applies flag overrides and writes
``<prefix>.report.json`` plus ``<prefix>.<name>.csv`` files.  Reports hold
the resolved config and the package version, and nothing time-dependent,
so equal inputs give byte-identical outputs.

Exit codes: 0 ok, 1 tolerance failure, 2 not covered by the analytic class
description (oracle result included), 3 precondition refusal, 64 usage.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .classes import crossing_classes, disagreements, essential_classes, reachability_oracle
from .errors import MeasureError, NotCovered, PreconditionError, SimulationOverflow, TruncationError
from .invariants import (
    ZERO_NEGATIVE,
    ZERO_POSITIVE,
    export_measure,
    nu,
    rho,
    stationarity_residual,
    total_mass_identity_check,
)
from .kernels import crossing_kernel_matrix, transition_matrix
from .measures import (
    DEFAULT_EPS_MASS,
    FINITE,
    STRICTLY_NEGATIVE,
    STRICTLY_POSITIVE,
    LatticeMeasure,
    moment,
    support_summary,
)
from .recurrence import classify, hypothesis_check, kemperman_diagnostic
from .simulate import WalkSpec, export_stats, occupation_tv, run_ensemble, run_trajectory

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_NOT_COVERED = 2
EXIT_PRECONDITION = 3
EXIT_USAGE = 64

TOL_FINITE = 1e-10
TOL_TRUNCATED = 1e-7
ORACLE_WINDOW = (-60, 60)
ERGODIC_TV_TOL = 0.02


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    mu: LatticeMeasure
    mu_prime: LatticeMeasure
    alpha: float = 0.0
    x0: int = 0
    window: tuple[int, int] = (-50, 50)
    seed: int = 0
    eps_mass: float = DEFAULT_EPS_MASS
    output: str = "oscwalk"

    def to_json(self) -> dict:
        return {"mu": self.mu.to_config(), "mu_prime": self.mu_prime.to_config(),
                "alpha": self.alpha, "x0": self.x0, "window": list(self.window),
                "seed": self.seed, "eps_mass": self.eps_mass, "output": self.output}


def _parse_window(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).replace(":", ",").split(",")
    if len(parts) != 2:
        raise UsageError(f"window must be two integers, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"window must be two integers, got {text!r}") from exc
    if hi < lo:
        raise UsageError(f"window [{lo}, {hi}] is empty")
    return lo, hi


def load_config(path, args) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "mu" not in raw or "mu_prime" not in raw:
        raise UsageError("config must be an object with 'mu' and 'mu_prime'")
    try:
        mu = LatticeMeasure.from_config(raw["mu"])
        mu_prime = LatticeMeasure.from_config(raw["mu_prime"])
    except MeasureError as exc:
        raise UsageError(f"invalid measure: {exc}") from exc
    try:
        alpha = float(raw.get("alpha", 0.0))
        x0 = int(raw.get("x0", 0))
        seed = int(raw.get("seed", 0))
        eps_mass = float(raw.get("eps_mass", DEFAULT_EPS_MASS))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    window = _parse_window(raw.get("window", (-50, 50)))
    output = str(raw.get("output", "oscwalk"))
    if args.seed is not None:
        seed = args.seed
    if args.window is not None:
        window = _parse_window(args.window)
    if args.eps_mass is not None:
        eps_mass = args.eps_mass
    if args.out is not None:
        output = args.out
    if not 0.0 <= alpha <= 1.0:
        raise UsageError("alpha must lie in [0, 1]")
    if not 0.0 < eps_mass < 1.0:
        raise UsageError("eps_mass must lie in (0, 1)")
    if seed < 0:
        raise UsageError("seed must be a nonnegative integer")
    return RunConfig(mu, mu_prime, alpha, x0, window, seed, eps_mass, output)


# -- output helpers -------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _report(command: str, cfg: RunConfig, body: dict, exit_code: int) -> dict:
    return {"command": command, "version": __version__, "config": cfg.to_json(),
            "exit_code": exit_code, **body}


def _write_report(cfg: RunConfig, report: dict) -> Path:
    path = Path(f"{cfg.output}.report.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _csv_path(cfg: RunConfig, name: str) -> Path:
    return Path(f"{cfg.output}.{name}.csv")


def _onesided(cfg: RunConfig) -> bool:
    return (support_summary(cfg.mu).sign_class == STRICTLY_POSITIVE
            and support_summary(cfg.mu_prime).sign_class == STRICTLY_NEGATIVE)


# -- commands -------------------------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, args) -> int:
    body: dict = {}
    try:
        dec = essential_classes(cfg.mu, cfg.mu_prime, cfg.window)
    except NotCovered as exc:
        oracle = reachability_oracle(cfg.mu, cfg.mu_prime, cfg.alpha, cfg.window)
        body["not_covered"] = str(exc)
        body["oracle"] = oracle.to_json()
        _write_report(cfg, _report("analyze", cfg, body, EXIT_NOT_COVERED))
        return EXIT_NOT_COVERED
    body["decomposition"] = dec.to_json()
    if _onesided(cfg):
        body["crossing_classes"] = [c.to_json() for c in crossing_classes(cfg.mu, cfg.mu_prime)]
    code = EXIT_OK
    if cfg.alpha == 0.0:
        oracle = reachability_oracle(cfg.mu, cfg.mu_prime, 0.0, ORACLE_WINDOW)
        diffs = disagreements(dec, oracle)
        body["oracle_check"] = {"window": list(ORACLE_WINDOW), "disagreements": diffs}
        if diffs:
            code = EXIT_TOLERANCE
    _write_report(cfg, _report("analyze", cfg, body, code))
    return code


def _residual_entry(res, tol) -> dict:
    return {**res.to_json(), "tolerance": tol, "ok": res.interior <= tol}


def cmd_invariant(cfg: RunConfig, args) -> int:
    if not _onesided(cfg):
        msg = ("nu and rho are defined for mu supported on Z+ and mu' on Z-; "
               "these supports are two-sided")
        _write_report(cfg, _report("invariant", cfg, {"refused": msg}, EXIT_PRECONDITION))
        print(msg, file=sys.stderr)
        return EXIT_PRECONDITION
    finite = cfg.mu.kind == FINITE and cfg.mu_prime.kind == FINITE
    tol = TOL_FINITE if finite else TOL_TRUNCATED
    w, eps = cfg.window, cfg.eps_mass
    nu_m = nu(cfg.mu, cfg.mu_prime, ZERO_POSITIVE, w)
    nus_m = nu(cfg.mu, cfg.mu_prime, ZERO_NEGATIVE, w)
    rho_m = rho(cfg.mu, cfg.mu_prime, w, eps)
    cls = crossing_classes(cfg.mu, cfg.mu_prime)
    rho_c = rho_m.masked(lambda x: any(x in c for c in cls))
    C = crossing_kernel_matrix(cfg.mu, cfg.mu_prime, w, eps)
    res = {
        "nu": _residual_entry(stationarity_residual(nu_m, transition_matrix(cfg.mu, cfg.mu_prime, 0.0, w, eps)), tol),
        "nu_star": _residual_entry(stationarity_residual(nus_m, transition_matrix(cfg.mu, cfg.mu_prime, 1.0, w, eps)), tol),
        "rho": _residual_entry(stationarity_residual(rho_c, C), tol),
    }
    mass = total_mass_identity_check(cfg.mu, cfg.mu_prime, w if not finite else None, eps)
    mass_ok = mass.residual <= tol + mass.bound
    for name, m in (("nu", nu_m), ("nu_star", nus_m), ("rho", rho_m)):
        export_measure(m, _csv_path(cfg, name), Path(f"{cfg.output}.{name}.json"))
    C.export_csv(_csv_path(cfg, "crossing_kernel"))
    C.export_json(Path(f"{cfg.output}.crossing_kernel.json"))
    ok = all(r["ok"] for r in res.values()) and mass_ok
    code = EXIT_OK if ok else EXIT_TOLERANCE
    body = {"residuals": res,
            "total_mass_identity": {**mass.to_json(), "tolerance": tol, "ok": mass_ok},
            "max_row_defect": C.max_row_defect,
            "tail_bounds": {"nu": nu_m.tail_bound, "nu_star": nus_m.tail_bound,
                            "rho": rho_m.tail_bound}}
    _write_report(cfg, _report("invariant", cfg, body, code))
    return code


def cmd_simulate(cfg: RunConfig, args) -> int:
    spec = WalkSpec(cfg.mu, cfg.mu_prime, cfg.alpha, cfg.x0)
    stats = run_ensemble(spec, args.n_traj, args.n_steps, cfg.seed, args.parallelism)
    extra = {"n_steps": args.n_steps}
    finite_means = (_onesided(cfg) and math.isfinite(moment(cfg.mu, 1.0))
                    and math.isfinite(moment(cfg.mu_prime, 1.0)))
    if finite_means and cfg.alpha in (0.0, 1.0):
        conv = ZERO_POSITIVE if cfg.alpha == 0.0 else ZERO_NEGATIVE
        target = nu(cfg.mu, cfg.mu_prime, conv, cfg.window)
        dec = essential_classes(cfg.mu, cfg.mu_prime)
        cls = dec.essential_class(cfg.x0)
        if cls is not None:
            target = target.masked(lambda x: x in cls)
            tv = occupation_tv(stats, target)
            extra["occupation_tv_to_nu"] = {"tv": tv, "reference": conv,
                                            "tolerance": ERGODIC_TV_TOL}
    report = _report("simulate", cfg, {"n_traj": args.n_traj, "n_steps": args.n_steps}, EXIT_OK)
    stats_json = stats.to_json()
    stats_json.update(extra)
    report["stats"] = stats_json
    _write_report(cfg, report)
    with open(_csv_path(cfg, "occupation"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "count"])
        for k in sorted(stats.occupation):
            w.writerow([k, stats.occupation[k]])
    if args.dump_path:
        run_trajectory(spec, args.n_steps, cfg.seed, 0, keep_path=True).export_path_csv(args.dump_path)
    return EXIT_OK


def cmd_classify(cfg: RunConfig, args) -> int:
    if not 0.0 < args.p < 1.0:
        raise UsageError("--p must lie in (0, 1)")
    v = classify(cfg.mu, cfg.mu_prime, args.p)
    body = {"verdict": v.to_json(),
            "hypotheses": hypothesis_check(cfg.mu, cfg.mu_prime).to_json()}
    body.update({"classification": v.classification, "rule": v.rule})
    _write_report(cfg, _report("classify", cfg, body, EXIT_OK))
    return EXIT_OK


def cmd_kemperman(cfg: RunConfig, args) -> int:
    est = kemperman_diagnostic(cfg.mu, cfg.mu_prime, args.h_max, args.n_sim, cfg.seed, args.max_len)
    _write_report(cfg, _report("kemperman", cfg, {"estimate": est.to_json()}, EXIT_OK))
    with open(_csv_path(cfg, "kemperman"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "C_hat", "C_se", "C_prime_hat", "C_prime_se", "partial_sum", "partial_sum_se"])
        for row in est.rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "invariant": cmd_invariant, "simulate": cmd_simulate,
            "classify": cmd_classify, "kemperman": cmd_kemperman}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--window", help="state window as LO,HI (use --window=-10,10)")
    common.add_argument("--eps-mass", type=float, dest="eps_mass", help="truncation mass budget")
    common.add_argument("--out", help="output path prefix")
    common.add_argument("--parallelism", type=int, default=1, help="worker threads")
    common.add_argument("--dump-path", dest="dump_path", help="CSV path for trajectory 0")

    parser = _Parser(prog="oscwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"oscwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analyze", parents=[common], help="class decomposition")
    sub.add_parser("invariant", parents=[common], help="invariant measures and residuals")
    p = sub.add_parser("simulate", parents=[common], help="seeded trajectory ensemble")
    p.add_argument("--n-steps", type=int, default=10**5, dest="n_steps")
    p.add_argument("--n-traj", type=int, default=1, dest="n_traj")
    p = sub.add_parser("classify", parents=[common], help="recurrence verdict")
    p.add_argument("--p", type=float, default=0.5)
    p = sub.add_parser("kemperman", parents=[common], help="renewal-function diagnostic")
    p.add_argument("--h-max", type=int, default=20, dest="h_max")
    p.add_argument("--n-sim", type=int, default=10**4, dest="n_sim")
    p.add_argument("--max-len", type=int, default=10**4, dest="max_len")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.parallelism < 1:
            raise UsageError("--parallelism must be at least 1")
        if args.command == "simulate" and (args.n_steps < 1 or args.n_traj < 1):
            raise UsageError("--n-steps and --n-traj must be positive")
        if args.command == "kemperman" and (args.h_max < 1 or args.n_sim < 1 or args.max_len < 1):
            raise UsageError("--h-max, --n-sim and --max-len must be positive")
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"oscwalk: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, TruncationError, SimulationOverflow) as exc:
        print(f"oscwalk: refused: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
