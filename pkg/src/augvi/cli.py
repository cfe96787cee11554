"""Command-line front end.

::

    augvi list
    augvi solve box-qp --dim 1
    augvi table poisson-control --n 64 --format csv --out t1.csv
    augvi errorbound box-qp --dim 10 --seed 7

Exit status: 0 converged (or non-solving command succeeded), 2 outer
iteration limit, 3 inner solver failure, 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys
import time

from . import __version__
from .alm import CONVERGED, INNER_FAILURE, MAX_OUTER, SolverConfig, solve
from .errors import AugviError, ConfigError
from .zoo import REGISTRY

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MAX_OUTER = 2
EXIT_INNER = 3
STATUS_EXIT = {CONVERGED: EXIT_OK, MAX_OUTER: EXIT_MAX_OUTER, INNER_FAILURE: EXIT_INNER}

# config keys that can be set from a file, with their parsers
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _config_fields():
    return {f.name: f for f in dataclasses.fields(SolverConfig) if f.name != "B"}


def _parse_value(key, raw, typ):
    if typ in (float, "float"):
        return float(raw)
    if typ in (int, "int"):
        return int(raw)
    if typ in (bool, "bool"):
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ValueError(f"expected true/false, got {raw!r}") from None
    return raw


def load_config(path):
    """Read ``key=value`` lines (``#`` starts a comment) into SolverConfig overrides.

    Unknown keys, malformed lines and ill-typed values raise
    :class:`ConfigError` with the offending line number; the combined
    overrides are validated by constructing a :class:`SolverConfig`.
    """
    fields = _config_fields()
    out = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"expected key=value, got {text!r}", line=no)
        key, raw = (s.strip() for s in text.split("=", 1))
        if key not in fields:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(sorted(fields))}", line=no)
        try:
            out[key] = _parse_value(key, raw, fields[key].type)
        except ValueError as err:
            raise ConfigError(f"bad value for {key}: {err}", line=no) from None
    try:
        SolverConfig(**out)
    except AugviError as err:
        raise ConfigError(str(err)) from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="augvi", description="Safeguarded augmented Lagrangian method for variational problems")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("list", help="list the available problems")

    def problem_parser(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("problem", help="problem name (see `list`)")
        sp.add_argument("--n", type=int, help="grid size")
        sp.add_argument("--beta", type=float, help="regularization weight (param-estimation)")
        sp.add_argument("--dim", type=int, help="dimension (box-qp, l2-counterexample)")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--format", choices=("text", "csv"), default="text")
        sp.add_argument("--out", help="write to this file instead of standard output")
        return sp

    for name, help_ in (("solve", "solve and print a summary"), ("table", "solve and print the iteration table")):
        sp = problem_parser(name, help_)
        sp.add_argument("--rho0", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--outer-tol", type=float, dest="outer_tol")
        sp.add_argument("--inner-tol", type=float, dest="inner_tol")
        sp.add_argument("--config", help="key=value file of solver settings")
    eb = problem_parser("errorbound", "probe dist/sigma near the exact solution")
    eb.add_argument("--radius", type=float, default=1e-2)
    eb.add_argument("--samples", type=int, default=200)
    return p


def _instance(args):
    entry = REGISTRY.get(args.problem)
    if entry is None:
        raise ConfigError(f"unknown problem {args.problem!r}; choose from {', '.join(sorted(REGISTRY))}")
    given = {"n": args.n, "beta": args.beta, "dim": args.dim, "seed": args.seed}
    kwargs = {}
    for key, option in entry.cli.items():
        value = given[option.lstrip("-")]
        if value is not None:
            kwargs[key] = value
    extra = [f"--{k}" for k, v in given.items() if v is not None and f"--{k}" not in entry.cli.values()]
    if extra:
        raise ConfigError(f"{entry.name} does not accept {', '.join(extra)}")
    return entry.make(**kwargs)


def _solver_config(args, inst):
    overrides = dict(inst.config)
    if getattr(args, "config", None):
        overrides.update(load_config(args.config))
    for key in ("rho0", "gamma", "tau", "outer_tol", "inner_tol"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return SolverConfig(**overrides)


def _sci(v):
    return "-" if v is None else f"{v:.2e}"


def _full(v):
    return "" if v is None else repr(float(v))


def format_table(history, fmt="text", header=None):
    """Rows ``k, rho_k, sigma_k, dist_k`` in text (3 significant digits) or CSV."""
    rows = [(r.k, r.rho, r.sigma, r.dist) for r in history.records]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "rho", "sigma", "dist"])
        for k, rho, s, d in rows:
            w.writerow([k, _full(rho), _full(s), _full(d)])
        return buf.getvalue()
    lines = [f"# {header}"] if header else []
    lines.append(f"{'k':>3} {'rho_k':>8} {'sigma_k':>10} {'dist_k':>10}")
    for k, rho, s, d in rows:
        lines.append(f"{k:>3} {rho:>8g} {_sci(s):>10} {_sci(d):>10}")
    lines.append(f"# status: {history.status}")
    return "\n".join(lines) + "\n"


def format_summary(history, inst, elapsed=None, fmt="text"):
    """One-run summary; ``elapsed`` is shown in text mode only so CSV stays reproducible."""
    final = history.records[-1]
    items = [
        ("problem", inst.header),
        ("status", history.status),
        ("outer_iterations", final.k),
        ("final_rho", final.rho),
        ("final_sigma", final.sigma),
        ("final_dist", final.dist),
        ("penalty_increases", history.penalty_increases),
    ]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([k for k, _ in items])
        w.writerow([v if isinstance(v, (str, int)) else _full(v) for _, v in items])
        return buf.getvalue()
    out = []
    for k, v in items:
        if k == "final_rho":
            v = f"{v:g}"
        elif v is None or isinstance(v, float):
            v = _sci(v)
        out.append(f"{k:<18} {v}")
    if elapsed is not None:
        out.append(f"{'seconds':<18} {elapsed:.1f}")
    if history.message:
        out.append(f"{'message':<18} {history.message}")
    return "\n".join(out) + "\n"


def format_errorbound(rep, inst, fmt="text"):
    items = [
        ("problem", inst.header),
        ("samples", rep.samples),
        ("ratio_min", rep.ratio_min),
        ("ratio_max", rep.ratio_max),
        ("c1_hat", rep.c1_hat),
        ("c2_hat", rep.c2_hat),
        ("slope", rep.slope),
        ("radius", rep.radius),
        ("flag", rep.flag),
    ]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([k for k, _ in items])
        w.writerow([v if isinstance(v, (str, int)) else _full(v) for _, v in items])
        return buf.getvalue()
    return "\n".join(f"{k:<10} {_sci(v) if isinstance(v, float) else v}" for k, v in items) + "\n"


def _list_text():
    lines = []
    for e in REGISTRY.values():
        lines.append(f"{e.name:<20} {e.description}")
        lines.append(f"{'':<20} parameters: {e.schema or 'none'}")
    return "\n".join(lines) + "\n"


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Parse ``argv``, execute, and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "list":
        _emit(_list_text(), None)
        return EXIT_OK
    try:
        inst = _instance(args)
        if args.command == "errorbound":
            from .diagnostics import probe_error_bound

            rep = probe_error_bound(inst, radius=args.radius, n_samples=args.samples, seed=args.seed or 0)
            _emit(format_errorbound(rep, inst, args.format), args.out)
            return EXIT_OK
        cfg = _solver_config(args, inst)
    except ConfigError as err:
        print(f"augvi: {err}", file=sys.stderr)
        return EXIT_USAGE
    except AugviError as err:
        print(f"augvi: {err}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    history = solve(inst.problem, cfg)
    elapsed = time.perf_counter() - t0
    if args.command == "table":
        text = format_table(history, args.format, header=inst.header)
    else:
        text = format_summary(history, inst, elapsed, args.format)
    _emit(text, args.out)
    return STATUS_EXIT[history.status]


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
