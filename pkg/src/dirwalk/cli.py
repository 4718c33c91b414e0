"""Command-line front end.

Exit codes: 0 when every check is consistent (or inconclusive), 2 when
any check is violated, 3 for configuration, hypothesis or I/O errors.
"""
import argparse
import csv
import io
import json
import os
import sys

from .constants import (EllipticityParams, base_constants, exit_constants,
                        thin_rect_requirements, transformed_ellipticity)
from .process import WALKS, make_walk
from . import montecarlo as mc
from . import rng
from .verify import SUITES, VerifyConfig, run_suite

OUT_DIR_ENV = "DIRWALK_OUT_DIR"
EXIT_OK, EXIT_VIOLATED, EXIT_ERROR = 0, 2, 3

WALK_PARAMS = {"beta": float, "ell": None, "u": float, "rho_r": int, "p": float}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _ell(text):
    parts = [float(z) for z in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return tuple(parts)


def _add_walk_args(p):
    p.add_argument("--walk", choices=sorted(WALKS))
    p.add_argument("--beta", type=float, help="excited walk drift")
    p.add_argument("--ell", type=_ell, help="excited walk direction, e.g. 1,0")
    p.add_argument("--u", type=float, help="excited walk cone cosine")
    p.add_argument("--rho-r", dest="rho_r", type=int, help="radial jump length")
    p.add_argument("--p", type=float, help="radial jump probability")


def _add_common(p):
    p.add_argument("--config", help="JSON file with default values for these options")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="upper bound on worker threads")


def build_parser():
    parser = _Parser(prog="dirwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("constants", help="print the explicit constants")
    c.add_argument("--config")
    for name, default in (("K", 1.0), ("r", 0.5), ("h", 0.25), ("a", 1.0), ("b", 1.0),
                          ("c", 1.0)):
        c.add_argument(f"--{name}", type=float, default=None,
                       help=f"default {default:g}")
    c.add_argument("--json", action="store_true", help="print JSON instead of a table")

    s = sub.add_parser("simulate", help="per-trajectory range and local-time summaries")
    _add_common(s)
    _add_walk_args(s)
    s.add_argument("--n", type=int, help="steps per trajectory (default 1000)")
    s.add_argument("--traj", type=int, help="number of trajectories (default 100)")
    s.add_argument("--traj0", type=int, help="first trajectory index (default 0)")
    s.add_argument("--out", help="CSV path (default: standard output)")
    s.add_argument("--dump", help="also write full trajectories as CSV to this path")

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    _add_common(v)
    _add_walk_args(v)
    v.add_argument("--n", type=int, help="horizon of the tail checks")
    v.add_argument("--traj", type=int, help="trajectories per check")
    v.add_argument("--gamma", type=float)
    v.add_argument("--lambda", dest="lam", type=float)
    v.add_argument("--a", type=float)
    v.add_argument("--b", type=float)
    v.add_argument("--c", type=float)
    v.add_argument("--out", help="write the JSON report to this path")
    v.add_argument("--json", action="store_true", help="print JSON instead of a table")
    v.add_argument("--timing", action="store_true", help="include runtimes in the report")

    sub.add_parser("list-walks", help="list the built-in walks")
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"cannot read config {path}: {err}") from err
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _merge(args, allowed):
    """Command-line values over config-file values; unknown keys are errors."""
    cfg = _load_config(getattr(args, "config", None))
    if "lambda" in cfg:
        cfg["lam"] = cfg.pop("lambda")
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key in allowed:
        val = getattr(args, key, None)
        out[key] = val if val is not None else cfg.get(key)
    return out


def _walk_params(opts):
    params = dict(opts.pop("walk_params", None) or {})
    for key in WALK_PARAMS:
        val = opts.pop(key, None)
        if val is not None:
            params[key] = val
    if "ell" in params:
        params["ell"] = tuple(params["ell"])
    return params


def _require_seed(seed):
    if seed is None:
        raise UsageError("a --seed is required")
    try:
        return rng.check_seed(seed)
    except (TypeError, ValueError) as err:
        raise UsageError(str(err)) from err


def _out_path(path):
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _write(path, text):
    path = _out_path(path)
    try:
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err}") from err


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be positive")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _fmt(x):
    return format(x, ".17g") if isinstance(x, float) else str(x)


def cmd_constants(args, stdout):
    opts = _merge(args, ("K", "r", "h", "a", "b", "c"))
    defaults = {"K": 1.0, "r": 0.5, "h": 0.25, "a": 1.0, "b": 1.0, "c": 1.0}
    opts = {k: defaults[k] if v is None else float(v) for k, v in opts.items()}
    p = EllipticityParams(opts["K"], opts["r"], opts["h"])
    base = base_constants(p)
    ec = exit_constants(opts["a"], opts["b"], opts["c"], p)
    a_min, lam_min = thin_rect_requirements(opts["b"], p)
    tp = transformed_ellipticity(p)
    rows = [("a0", base.a0), ("alpha0", base.alpha0), ("m0", base.m0),
            ("log2_s0", base.log2_s0), ("log2_lambda0", ec.log2_lambda0),
            ("ln_rho", ec.log_rho), ("ln_neg_ln_rho", ec.log_neg_log_rho),
            ("rho_approx", ec.approx), ("a_min", a_min), ("lambda_min", lam_min),
            ("K_prime", float(tp.K)), ("r_prime", tp.r), ("h_prime", tp.h)]
    if args.json:
        from .verify import _clean

        stdout.write(json.dumps({"params": opts, "constants": _clean(dict(rows))},
                                indent=2, allow_nan=False) + "\n")
    else:
        width = max(len(k) for k, _ in rows)
        for k, v in rows:
            stdout.write(f"{k.ljust(width)}  {_fmt(v)}\n")
    return EXIT_OK


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(z) for z in row])
    return buf.getvalue()


def cmd_simulate(args, stdout):
    opts = _merge(args, ("walk", "walk_params", "seed", "threads", "n", "traj", "traj0",
                         "out", "dump", *WALK_PARAMS))
    seed = _require_seed(opts.pop("seed"))
    _set_threads(opts.pop("threads"))
    walk = make_walk(opts.pop("walk") or "srw2d", **_walk_params(opts))
    n = 1000 if opts["n"] is None else int(opts["n"])
    n_traj = 100 if opts["traj"] is None else int(opts["traj"])
    traj0 = int(opts["traj0"] or 0)
    if n_traj < 1 or n < 0:
        raise UsageError("--traj must be positive and --n nonnegative")
    batch = mc.simulate_batch(walk, (0, 0), n, n_traj, seed, traj0=traj0)
    cols = ("traj_index", "n", "range", "L_at_start", "max_norm", "seed")
    text = _csv_text(cols, ([r[c] for c in cols] for r in batch.rows()))
    if opts["out"]:
        _write(opts["out"], text)
    else:
        stdout.write(text)
    if opts["dump"]:
        paths = mc.sample_paths(walk, (0, 0), n, n_traj, seed, traj0)
        rows = ((traj0 + i, t, *paths[i, t].tolist())
                for i in range(n_traj) for t in range(n + 1))
        _write(opts["dump"], _csv_text(("traj_index", "t", "x", "y"), rows))
    return EXIT_OK


def cmd_verify(args, stdout):
    keys = ("walk", "walk_params", "seed", "threads", "n", "traj", "gamma", "lam", "a",
            "b", "c", "out", *WALK_PARAMS)
    opts = _merge(args, keys)
    seed = _require_seed(opts.pop("seed"))
    _set_threads(opts.pop("threads"))
    out = opts.pop("out")
    params = _walk_params(opts)
    walk = opts.pop("walk")
    if walk is None and params:
        raise UsageError("walk parameters need --walk")
    kw = {k: v for k, v in opts.items() if v is not None}
    if kw.get("traj") is not None and kw["traj"] < 30:
        raise UsageError("--traj must be at least 30")
    cfg = VerifyConfig(seed=seed, walk=walk, walk_params=params, **kw)
    report = run_suite(args.suite, cfg)
    text = report.to_json(args.timing)
    if out:
        _write(out, text)
    stdout.write(text if args.json else report.table())
    return report.exit_code


def cmd_list_walks(args, stdout):
    for name, factory in WALKS.items():
        w = factory()
        p = w.spec.params
        params = ", ".join(f"{k}={v!r}" for k, v in w.params.items()) or "-"
        stdout.write(f"{name:14s} {w.spec.klass.value:21s} K={float(p.K):g} "
                     f"r={float(p.r):g} h={float(p.h):.6g}  defaults: {params}\n")
    return EXIT_OK


COMMANDS = {"constants": cmd_constants, "simulate": cmd_simulate,
            "verify": cmd_verify, "list-walks": cmd_list_walks}


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, stdout)
    except (UsageError, ValueError, TypeError) as err:
        # HypothesisError is a ValueError and lands here too.
        sys.stderr.write(f"dirwalk: error: {err}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
