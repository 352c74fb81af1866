"""Command-line entry point: ``rwre <subcommand> [options]``.

Exit codes: 0 success or PASS, 1 usage or parameter error, 2 FAIL verdict,
3 INCONCLUSIVE verdict.  Output files contain no timestamps or host details,
so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checks
from .analysis import DEGENERATE_PASS, FAIL, INCONCLUSIVE, PASS, convergence_report, medium_integrals
from .config import RunConfig, dumps, environment_from_dict, parse_environment_spec
from .corrector import (
    CONTINUOUS,
    DISCRETE_L,
    DISCRETE_P,
    VARIANTS,
    asymptotic_ratio,
    build_continuous,
    build_discrete,
    build_discrete_L,
    continuous_residuals,
    poisson_residuals,
)
from .ctmc import DEFAULT_RATE_CAP, variance_curve_ctmc
from .diffusion import check_quadratic_bound, integrate, variance_curve_diffusion
from .environment import ContinuousEnvironment, DiscreteEnvironment
from .errors import RwreError
from .walk import EXACT_LIMIT, variance_curve

log = logging.getLogger("rwre")

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3

DEFAULTS = {
    "simulate-walk": {"steps": None, "checkpoints": None, "streams": 100_000,
                      "exact_limit": EXACT_LIMIT, "exact": False, "exact_window": None},
    "simulate-ctmc": {"horizons": [1.0, 10.0, 100.0], "streams": 10_000, "rate_cap": DEFAULT_RATE_CAP},
    "simulate-diffusion": {"dt": 1e-3, "horizons": [1.0, 10.0], "streams": 10_000,
                           "bias_streams": 4096, "check_bound": None},
    "corrector": {"variant": None, "range": None, "grid": 1e-3, "residual_range": None},
    "estimate-limit": {"process": None, "steps": [100, 1000, 10_000], "horizons": None,
                       "streams": 10_000, "dt": 1e-2, "no_curve": False, "birkhoff_n": 10**6},
    "verify": {"suite": "trivial"},
}

DEFAULT_TOLERANCE = {"walk": 0.05, "ctmc": 0.05, "diffusion": 0.10}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        vals = [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _count(text: str) -> int:
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--env", help="environment: shorthand, JSON object or @file.json")
    common.add_argument("--config", help="JSON run configuration; explicit flags override it")
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--threads", type=_count, default=None, help="worker threads (default 1)")
    common.add_argument("--out", default=None, help="output directory; omit to print to stdout")
    common.add_argument("--tolerance", type=float, default=None, help="relative tolerance for verdicts")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="rwre", description="Reversible random walks and diffusions in 1-d random media.")
    sub = p.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)

    w = sub.add_parser("simulate-walk", parents=[common], help="E(X_n^2)/n for the discrete-time walk")
    w.add_argument("--steps", type=_count, help="largest step count; checkpoints default to its decades")
    w.add_argument("--checkpoints", type=_int_list, help="comma-separated step counts")
    w.add_argument("--streams", type=_count, help="Monte Carlo streams for steps above --exact-limit")
    w.add_argument("--exact-limit", dest="exact_limit", type=int, help="largest n evolved exactly")
    w.add_argument("--exact", action="store_const", const=True, default=None,
                   help="evolve every checkpoint exactly")
    w.add_argument("--exact-window", dest="exact_window", type=int,
                   help="half-width of the exact window (default n; smaller gives certified bounds)")

    c = sub.add_parser("simulate-ctmc", parents=[common], help="E(X_t^2)/t for the jump process")
    c.add_argument("--horizons", type=_float_list, help="comma-separated times")
    c.add_argument("--streams", type=_count)
    c.add_argument("--rate-cap", dest="rate_cap", type=float, help="largest holding rate allowed")

    d = sub.add_parser("simulate-diffusion", parents=[common], help="Euler-Maruyama for the flow diffusion")
    d.add_argument("--dt", type=float)
    d.add_argument("--horizons", type=_float_list, help="comma-separated times (multiples of dt)")
    d.add_argument("--streams", type=_count)
    d.add_argument("--bias-streams", dest="bias_streams", type=_count,
                   help="streams also integrated with dt/2 for the bias check")
    d.add_argument("--check-bound", dest="check_bound", nargs="+", metavar="ARG",
                   help="SIGMA0SQ [upper|lower|equal]: compare E X_t^2 with SIGMA0SQ * t")

    k = sub.add_parser("corrector", parents=[common], help="tabulate the explicit corrector")
    k.add_argument("--variant", choices=VARIANTS)
    k.add_argument("--range", type=float, help="table extent M (sites) or X (continuous)")
    k.add_argument("--grid", type=float, help="grid step for the continuous variant")
    k.add_argument("--residual-range", dest="residual_range", type=float,
                   help="check the defining equation on |k| <= this (default: whole table)")

    e = sub.add_parser("estimate-limit", parents=[common], help="predicted limit with a convergence verdict")
    e.add_argument("--process", choices=("walk", "ctmc", "diffusion"))
    e.add_argument("--steps", type=_int_list, help="walk checkpoints for the curve")
    e.add_argument("--horizons", type=_float_list, help="time horizons for ctmc or diffusion curves")
    e.add_argument("--streams", type=_count)
    e.add_argument("--dt", type=float)
    e.add_argument("--no-curve", dest="no_curve", action="store_const", const=True, default=None,
                   help="report the limit only")
    e.add_argument("--birkhoff-n", dest="birkhoff_n", type=_count,
                   help="sites or samples for ergodic averages when no closed form exists")

    v = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    v.add_argument("--suite", choices=("trivial", "full"))
    return p


# ---------------------------------------------------------------------------
# Config merging and output
# ---------------------------------------------------------------------------

def _load_config(path: str | None) -> RunConfig | None:
    if not path:
        return None
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
        if "subcommand" not in data:
            data = {"subcommand": "", **data}
        return RunConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"config {path} is not a valid run configuration: {exc}") from None


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge built-in defaults, the config file and explicit flags (flags win)."""
    cfg = _load_config(args.config)
    base = cfg.params if cfg else {}
    params = {}
    for name, default in DEFAULTS[args.subcommand].items():
        flag = getattr(args, name, None)
        params[name] = flag if flag is not None else base.get(name, default)
    env_spec = args.env if args.env is not None else (cfg.environment if cfg and cfg.environment else None)
    environment = parse_environment_spec(env_spec) if env_spec is not None else {}
    tolerances = dict(cfg.tolerances) if cfg else {}
    if args.tolerance is not None:
        tolerances["relative"] = args.tolerance
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    threads = args.threads if args.threads is not None else (cfg.threads if cfg else 1)
    out = args.out if args.out is not None else (cfg.out if cfg else None)
    return RunConfig(args.subcommand, environment, params, int(seed), int(threads), out, tolerances)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(x) for x in r])
    return buf.getvalue()


class Output:
    """Collects named text artifacts and writes them to ``--out`` or stdout."""

    def __init__(self, directory: str | None, quiet: bool = False):
        self.directory = Path(directory) if directory else None
        self.quiet = quiet
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def flush(self, primary: str):
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for name, text in self.files.items():
                (self.directory / name).write_text(text, encoding="utf-8")
        elif not self.quiet:
            sys.stdout.write(self.files[primary])


def _require_env(cfg: RunConfig):
    if not cfg.environment:
        raise UsageError("an environment is required: pass --env (e.g. --env iid-two-point:1,2,0.5)")
    return environment_from_dict(cfg.environment, cfg.seed)


def _require_discrete(env, what: str) -> DiscreteEnvironment:
    if not isinstance(env, DiscreteEnvironment):
        raise UsageError(f"{what} needs a lattice environment (constant, iid-*, rotation, markov), "
                         "not a flow; use simulate-diffusion for flows")
    return env


def _verdict_code(verdicts: Sequence[str]) -> int:
    if FAIL in verdicts:
        return EXIT_FAIL
    if INCONCLUSIVE in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _decades(n_max: int) -> list[int]:
    pts = [10 ** i for i in range(int(math.log10(n_max)) + 1) if 10 ** i < n_max]
    return pts + [n_max]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate_walk(cfg: RunConfig, out: Output) -> int:
    env = _require_discrete(_require_env(cfg), "simulate-walk")
    p = cfg.params
    cps = p["checkpoints"]
    if cps is None:
        if p["steps"] is None:
            raise UsageError("give --steps N or --checkpoints n1,n2,...")
        cps = _decades(int(p["steps"]))
    elif p["steps"] is not None:
        cps = sorted(set(cps) | {int(p["steps"])})
    exact_limit = max(cps) if p["exact"] else int(p["exact_limit"])
    rep = variance_curve(env, cps, exact_limit=exact_limit, n_streams=int(p["streams"]),
                         seed=cfg.seed, threads=cfg.threads, window=p["exact_window"])
    rows = [(r["time"], r["second_moment"], r["value"], r["stderr"], r["method"]) for r in rep.rows()]
    out.add("curve.csv", _csv_text(["n", "second_moment", "second_moment_over_n", "stderr", "method"], rows))
    out.add("report.json", dumps({"config": cfg.echo(), **rep.to_dict()}))
    out.flush("curve.csv")
    return EXIT_OK


def cmd_simulate_ctmc(cfg: RunConfig, out: Output) -> int:
    env = _require_discrete(_require_env(cfg), "simulate-ctmc")
    p = cfg.params
    rep = variance_curve_ctmc(env, p["horizons"], int(p["streams"]), cfg.seed,
                              cfg.threads, float(p["rate_cap"]))
    rows = zip(rep.times, rep.values, rep.stderr, rep.extra["events_per_t"])
    out.add("curve.csv", _csv_text(["t", "second_moment_over_t", "stderr", "events_per_t"], rows))
    out.add("report.json", dumps({"config": cfg.echo(), **rep.to_dict()}))
    out.flush("curve.csv")
    return EXIT_OK


def _parse_bound(arg) -> tuple[float, str] | None:
    if arg is None:
        return None
    if isinstance(arg, (int, float)):
        return float(arg), "upper"
    if not 1 <= len(arg) <= 2:
        raise UsageError("--check-bound takes SIGMA0SQ and an optional direction")
    try:
        s0 = float(arg[0])
    except ValueError:
        raise UsageError(f"--check-bound: {arg[0]!r} is not a number") from None
    direction = arg[1] if len(arg) == 2 else "upper"
    if direction not in ("upper", "lower", "equal"):
        raise UsageError("--check-bound direction must be upper, lower or equal")
    return s0, direction


def cmd_simulate_diffusion(cfg: RunConfig, out: Output) -> int:
    env = _require_env(cfg)
    if not isinstance(env, ContinuousEnvironment):
        raise UsageError("simulate-diffusion needs a flow environment, e.g. --env flow:lambda=2+sin")
    p = cfg.params
    bound = _parse_bound(p["check_bound"])
    hs = sorted({float(t) for t in p["horizons"]})
    run = integrate(env, float(p["dt"]), hs, int(p["streams"]), cfg.seed, cfg.threads,
                    bias_streams=int(p["bias_streams"]))
    rep = variance_curve_diffusion(run)
    rows = zip(rep.times, rep.values, rep.stderr, rep.extra["em_bias"])
    out.add("curve.csv", _csv_text(["t", "second_moment_over_t", "stderr", "em_bias"], rows))
    report = {"config": cfg.echo(), **rep.to_dict()}
    code = EXIT_OK
    if bound is not None:
        hv = check_quadratic_bound(run, *bound)
        report["bound"] = {"sigma0sq": bound[0], "direction": bound[1]}
        report["verdicts"] = [
            {"t": h.t, "second_moment": h.estimate, "stderr": h.stderr, "bound": h.target,
             "em_bias": h.em_bias, "verdict": h.verdict}
            for h in hv
        ]
        code = _verdict_code([h.verdict for h in hv])
    out.add("report.json", dumps(report))
    out.flush("curve.csv")
    return code


def cmd_corrector(cfg: RunConfig, out: Output) -> int:
    env = _require_env(cfg)
    p = cfg.params
    continuous = isinstance(env, ContinuousEnvironment)
    variant = p["variant"] or (CONTINUOUS if continuous else DISCRETE_P)
    if (variant == CONTINUOUS) != continuous:
        raise UsageError(f"variant {variant} does not match the {'flow' if continuous else 'lattice'} environment")
    if variant == CONTINUOUS:
        X = float(p["range"] or 10.0)
        table = build_continuous(env, X, float(p["grid"]))
        ext = float(p["residual_range"] or min(X - 2 * table.grid, 10.0))
        xs, res = continuous_residuals(table, ext)
    else:
        M = int(p["range"] or 1000)
        if M < 2:
            raise UsageError("--range must be >= 2 for lattice correctors")
        table = (build_discrete if variant == DISCRETE_P else build_discrete_L)(env, M)
        R = int(p["residual_range"] or M - 1)
        xs, res = poisson_residuals(table, env, -min(R, M - 1), min(R, M - 1))
    pts = table.points
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pts != 0, table.values / (pts.astype(np.float64) ** 2), np.nan)
    rows = ((x, f, None if x == 0 else r) for x, f, r in zip(pts.tolist(), table.values.tolist(), ratio.tolist()))
    out.add("table.csv", _csv_text(["m_or_x", "f", "f_over_msq"], rows))
    out.add("residuals.csv", _csv_text(["m_or_x", "residual"], zip(xs.tolist(), res.tolist())))
    ar = asymptotic_ratio(table)
    summary = {
        "config": cfg.echo(),
        "environment": env.describe(),
        "variant": variant,
        "extent": float(table.extent),
        "max_residual": float(res.max()) if res.size else 0.0,
        "ratio_at_plus_extent": ar.plus,
        "ratio_at_minus_extent": ar.minus,
        "ratio_at_half_extent": [ar.half_plus, ar.half_minus],
        "expected_ratio": ar.expected,
        "divergent": ar.divergent,
    }
    out.add("corrector.json", dumps(summary))
    out.flush("corrector.json")
    return EXIT_OK


def cmd_estimate_limit(cfg: RunConfig, out: Output) -> int:
    env = _require_env(cfg)
    p = cfg.params
    continuous = isinstance(env, ContinuousEnvironment)
    process = p["process"] or ("diffusion" if continuous else "walk")
    if (process == "diffusion") != continuous:
        raise UsageError(f"process {process} does not match the {'flow' if continuous else 'lattice'} environment")
    it = medium_integrals(env, int(p["birkhoff_n"]))
    tol = float(cfg.tolerances.get("relative", DEFAULT_TOLERANCE[process]))
    report: dict = {"config": cfg.echo(), "environment": env.describe(), "process": process,
                    "integrals": {"mean": it.mean, "mean_inverse": it.mean_inverse,
                                  "mean_infinite": it.mean_infinite,
                                  "inverse_infinite": it.inverse_infinite}}
    if p["no_curve"]:
        from .analysis import flow_limit, jump_process_limit, walk_limit
        lim = {"walk": walk_limit, "ctmc": jump_process_limit, "diffusion": flow_limit}[process](env)
        report.update(limit=lim.value, provenance=lim.provenance, curve=None, verdict=None)
        out.add("limit.json", dumps(report))
        out.flush("limit.json")
        return EXIT_OK
    if process == "walk":
        rep = variance_curve(env, p["steps"], exact_limit=max(p["steps"]),
                             n_streams=int(p["streams"]), seed=cfg.seed, threads=cfg.threads)
    elif process == "ctmc":
        rep = variance_curve_ctmc(env, p["horizons"] or [10.0, 100.0, 1000.0],
                                  int(p["streams"]), cfg.seed, cfg.threads)
    else:
        hs = p["horizons"] or [1.0, 10.0, 100.0]
        run = integrate(env, float(p["dt"]), hs, int(p["streams"]), cfg.seed, cfg.threads,
                        bias_streams=min(int(p["streams"]), 1024))
        rep = variance_curve_diffusion(run)
    verdict = convergence_report(rep.times, rep.values, rep.limit, tol, rep.stderr)
    report.update(
        limit=rep.limit,
        provenance=rep.limit_provenance,
        curve=[{"time": t, "value": v, "stderr": s, "method": m}
               for t, v, s, m in zip(rep.times, rep.values, rep.stderr, rep.methods)],
        verdict=verdict.verdict,
        reason=verdict.reason,
        tolerance=tol,
    )
    out.add("limit.json", dumps(report))
    out.flush("limit.json")
    return _verdict_code([verdict.verdict])


def cmd_verify(cfg: RunConfig, out: Output) -> int:
    results = checks.run_suite(cfg.params["suite"], threads=cfg.threads)
    if not out.quiet:
        for r in results:
            print(r.line())
    report = {
        "suite": cfg.params["suite"],
        "checks": [{"key": r.key, "title": r.title, "verdict": r.verdict} for r in results],
        "passed": all(r.passed for r in results),
    }
    out.add("verify.json", dumps(report))
    if out.directory is not None:
        out.flush("verify.json")
    return _verdict_code([r.verdict for r in results])


COMMANDS = {
    "simulate-walk": cmd_simulate_walk,
    "simulate-ctmc": cmd_simulate_ctmc,
    "simulate-diffusion": cmd_simulate_diffusion,
    "corrector": cmd_corrector,
    "estimate-limit": cmd_estimate_limit,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None, quiet: bool = False) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.subcommand:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        return COMMANDS[args.subcommand](cfg, Output(cfg.out, quiet))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RwreError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
