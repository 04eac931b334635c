"""Command-line front end: ``testsched {solve,immediate,simulate,study}``."""

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, config, studies
from .model import ConfigError, State
from .rollout import simulate
from .solver import MemoryBudgetError, PolicyTable, UtilityTable, solve_problem

log = logging.getLogger("testsched")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_MEMORY = 0, 1, 2, 3
POLICY_COLUMNS = ("t", "K", "N", "beta_i", "n_star", "utility")


# -- atomic output --------------------------------------------------------------


def write_atomic(path, text):
    """Write UTF-8 text with LF endings; the target appears only once fsynced."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    dfd = os.open(path.parent, os.O_RDONLY)
    try:
        os.fsync(dfd)
    finally:
        os.close(dfd)


def _dump_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def output_paths(out):
    """(csv path, json path) for an --out argument."""
    out = Path(out)
    if out.suffix != ".csv":
        out = out.with_name(out.name + ".csv")
    return out, out.with_suffix(".json")


# -- policy tables as CSV -------------------------------------------------------


def policy_csv(pt: PolicyTable, ut: UtilityTable, horizon=None):
    """Rows ``t,K,N,beta_i,n_star,utility`` over valid states, t ascending."""
    s = pt.spec
    T = pt.horizon if horizon is None else horizon
    buf = io.StringIO()
    buf.write(",".join(POLICY_COLUMNS) + "\n")
    states = list(ut.states())
    for t in range(1, T + 1):
        P, U = pt.values[t - 1], ut.values[t - 1]
        for K, N, b in states:
            ix = (K - s.k_lo, N - s.n_lo, b - s.b_lo)
            buf.write(f"{t},{K},{N},{b},{int(P[ix])},{float(U[ix]):.12g}\n")
    return buf.getvalue()


def read_policy_csv(text, spec):
    """Parse :func:`policy_csv` output back into (PolicyTable, UtilityTable)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != POLICY_COLUMNS:
        raise ConfigError("policy", f"header must be {','.join(POLICY_COLUMNS)}")
    rows = [tuple(r) for r in reader]
    if not rows:
        raise ConfigError("policy", "no rows")
    T = max(int(r[0]) for r in rows)
    shape = (T,) + spec.table_shape()
    P = np.zeros(shape, dtype=np.int32)
    U = np.zeros(shape)
    pt, ut = PolicyTable(spec, P), UtilityTable(spec, U)
    for t, K, N, b, n, u in rows:
        try:
            ix = (int(t) - 1,) + pt.index(int(K), int(N), int(b))
        except KeyError as exc:
            raise ConfigError("policy", f"{exc.args[0]} for the configured grid") from None
        P[ix] = int(n)
        U[ix] = float(u)
    return pt, ut


# -- commands -------------------------------------------------------------------


def _load_config(args):
    if args.preset:
        return config.load_preset(args.preset)
    if not args.config:
        raise ConfigError("--config", "a config path or --preset is required")
    try:
        return config.load(args.config)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None


def _sidecar(command, spec, stats, **extra):
    stats = {k: v for k, v in stats.items() if k != "wall_time"}
    return dict({"command": command, "config": config.spec_to_doc(spec), "stats": stats, "version": __version__},
                **extra)


def _solve_and_write(args, command, horizon):
    doc = _load_config(args)
    spec = config.to_spec(doc)
    sol = solve_problem(spec, workers=args.workers, horizon=horizon)
    log.info("%s: %d states, %d backups in %.3f s", command, sol.stats["states"], sol.stats["backups"],
             sol.stats["wall_time"])
    csv_path, json_path = output_paths(args.out)
    write_atomic(csv_path, policy_csv(sol.policy, sol.utility))
    write_atomic(json_path, _dump_json(_sidecar(command, spec, sol.stats)))
    return EXIT_OK


def cmd_solve(args):
    return _solve_and_write(args, "solve", None)


def cmd_immediate(args):
    return _solve_and_write(args, "immediate", 1)


def _parse_start(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        vals = []
    if len(vals) not in (2, 3):
        raise ConfigError("--start", "expected K,N or K,N,beta_i")
    return State(*vals)


def cmd_simulate(args):
    doc = _load_config(args)
    spec = config.to_spec(doc)
    sim = doc.get("simulation", {})
    try:
        text = Path(args.policy).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--policy", str(exc)) from None
    pt, _ = read_policy_csv(text, spec)
    start = _parse_start(args.start) if args.start else config.start_state(doc, spec)
    mode = args.mode or sim.get("mode", "belief")
    lam = args.lambda_true if args.lambda_true is not None else sim.get("lambda_true")
    try:
        summary = simulate(
            pt, spec, mode=mode,
            seed=args.seed if args.seed is not None else sim.get("seed", 0),
            episodes=args.episodes if args.episodes is not None else sim.get("episodes", 10_000),
            start=start, lambda_true=lam, workers=args.workers or 1,
        )
    except ValueError as exc:
        raise ConfigError("simulation", str(exc)) from None
    out = dict(summary.to_dict(), config=config.spec_to_doc(spec), version=__version__)
    text = _dump_json(out)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_study(args):
    overrides = {}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("--config", str(exc)) from None
    res = studies.run_study(args.study, overrides, workers=args.workers)
    csv_path, json_path = output_paths(args.out)
    write_atomic(csv_path, res.to_csv())
    write_atomic(json_path, res.to_json())
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------


def _schema_epilog(*sections):
    return "config schema:\n" + json.dumps(config.schema_subset(*sections), indent=2)


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="testsched", description=__doc__, formatter_class=fmt,
                                     epilog=_schema_epilog("simulation", "study"))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and timings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="JSON config document")
        src.add_argument("--preset", choices=config.PRESETS, help="use a shipped preset config")
        p.add_argument("--out", metavar="PATH", required=out_required, help="output path")
        p.add_argument("--workers", type=int, default=None, metavar="INT",
                       help="parallel workers (default: machine parallelism)")

    p = sub.add_parser("solve", help="finite-horizon policy by backward induction", formatter_class=fmt,
                       epilog=_schema_epilog())
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("immediate", help="single-step policy", formatter_class=fmt, epilog=_schema_epilog())
    common(p)
    p.set_defaults(func=cmd_immediate)

    p = sub.add_parser("simulate", help="Monte Carlo rollouts of a policy CSV", formatter_class=fmt,
                       epilog=_schema_epilog("simulation"))
    common(p, out_required=False)
    p.add_argument("--policy", metavar="PATH", required=True, help="policy CSV written by solve")
    p.add_argument("--seed", type=int, metavar="INT", help="root seed (overrides simulation.seed)")
    p.add_argument("--episodes", type=int, metavar="INT", help="number of episodes (overrides simulation.episodes)")
    p.add_argument("--mode", choices=["belief", "fixed"],
                   help="draw the rate from the belief each quarter, or hold it fixed")
    p.add_argument("--lambda-true", type=float, metavar="REAL", help="true rate for --mode fixed")
    p.add_argument("--start", metavar="K,N[,B]", help="start state (default: empty record)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="parametric study tables", formatter_class=fmt,
                       epilog=_schema_epilog("study"))
    p.add_argument("study", choices=studies.STUDY_IDS)
    p.add_argument("--config", metavar="PATH", help="JSON overrides merged onto the study's preset")
    p.add_argument("--out", metavar="PATH", required=True, help="CSV path; a JSON twin is written alongside")
    p.add_argument("--workers", type=int, default=None, metavar="INT",
                   help="parallel workers (default: machine parallelism)")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MemoryBudgetError as exc:
        print(f"memory budget exceeded: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
