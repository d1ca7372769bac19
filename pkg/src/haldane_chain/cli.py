"""Batch front end: parameter sweeps and the acceptance suite.

    haldane-chain tilings  --L-range 6:12 --bc per
    haldane-chain spectrum --L 12 --bc per --kappa 1 --lambda-grid -1:0:0.1
    haldane-chain bounds   --alpha-grid 0:1.5:0.1 --format json
    haldane-chain epsilon  --L-range 10:13 --lambda -1
    haldane-chain verify   --out report.json

Every row echoes the version and all parameters.  A ``--config`` file holds
``key = value`` lines using the long flag names; flags given on the command
line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, acceptance, bounds
from .configspace import BC
from .hamiltonian import ModelParams, physical_params
from .spectra import SolverError, epsilon_numeric, gap_split
from .tiling import config_value, enumerate_roots, enumerate_tilings

ALIASES = {"lambda": "lam", "L": "L_range"}
MAX_L = {"tilings": 28, "spectrum": 16, "epsilon": 14}


def parse_range(text: str) -> list[int]:
    """'12', '6:12' (inclusive) or '6,8,10'."""
    if "," in text:
        return [int(t) for t in text.split(",")]
    if ":" in text:
        a, b, *step = (int(t) for t in text.split(":"))
        return list(range(a, b + 1, step[0] if step else 1))
    return [int(text)]


def parse_grid(text: str) -> list[complex]:
    """'a:b:step' (inclusive, real) or a comma list of real or complex numbers."""
    parts = text.split(":")
    if len(parts) == 3:
        a, b, h = map(float, parts)
        if h <= 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [complex(round(a + i * h, 12)) for i in range(n)]
    return [complex(t.replace(" ", "").replace("i", "j")) for t in text.split(",") if t.strip()]


def read_config(path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.lstrip("-").replace("-", "_")
        out[ALIASES.get(k, k)] = v
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haldane-chain", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("tilings", "spectrum", "bounds", "epsilon", "verify"):
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--L", dest="L_range")
        s.add_argument("--L-range", dest="L_range")
        s.add_argument("--bc", default="per", choices=["per", "obc"])
        s.add_argument("--kappa", type=float, default=1.0)
        s.add_argument("--lambda", dest="lam")
        s.add_argument("--lambda-grid")
        s.add_argument("--alpha-grid")
        s.add_argument("--n", type=int)
        s.add_argument("--out")
        s.add_argument("--format", default="csv", choices=["csv", "json"])
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--deterministic", action="store_true")
        if name == "tilings":
            s.add_argument("--family", default=None, choices=["vmd", "bvmd", "edge"])
            s.add_argument("--list", action="store_true", help="emit every tiling, not just counts")
        if name == "verify":
            s.add_argument("--only", help="comma list of criterion ids, e.g. C1,C5")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        for a in sub._actions:
            if a.dest in conf and a.const is True:
                conf[a.dest] = conf[a.dest].lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
        for a in sub._actions:
            # values from the file arrive as strings; run them through the type
            v = getattr(args, a.dest, None)
            if a.type and isinstance(v, str):
                setattr(args, a.dest, a.type(v))
    return args


def param_grid(args) -> list[ModelParams]:
    if args.alpha_grid:
        return [physical_params(a.real) for a in parse_grid(args.alpha_grid)]
    if args.lambda_grid:
        lams = parse_grid(args.lambda_grid)
    elif args.lam is not None:
        lams = parse_grid(args.lam)
    else:
        lams = [complex(-1.0)]
    if not lams:
        raise ValueError("empty lambda grid")
    return [ModelParams(args.kappa, lam) for lam in lams]


def _echo(args, p: ModelParams | None = None) -> dict:
    row = {"version": __version__, "command": args.command, "bc": args.bc}
    if p is not None:
        row.update(kappa=p.kappa, lambda_re=p.lam.real, lambda_im=p.lam.imag,
                   alpha="" if p.alpha is None else p.alpha)
    return row


def _L_values(args, default) -> list[int]:
    Ls = parse_range(args.L_range) if args.L_range else list(default)
    cap = MAX_L.get(args.command)
    if not Ls or min(Ls) < 1 or (cap and max(Ls) > cap):
        raise ValueError(f"L must lie in 1..{cap}")
    return Ls


def _map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # preserves input order


def cmd_tilings(args) -> list[dict]:
    bc = BC.of(args.bc)
    fam = args.family or ("vmd" if bc is BC.PER else "bvmd")

    def one(L):
        tilings = enumerate_tilings(L, bc, fam)
        roots = enumerate_roots(L, bc, fam)
        row = {**_echo(args), "L": L, "family": fam, "tilings": len(tilings), "roots": len(roots)}
        if args.list:
            row["items"] = [[str(T), format(config_value(T), f"0{L}b")] for T in tilings]
        return row

    return _map(one, _L_values(args, [6]), args.threads)


def cmd_spectrum(args) -> list[dict]:
    bc = BC.of(args.bc)
    jobs = [(L, p) for L in _L_values(args, [12]) for p in param_grid(args)]

    def one(job):
        L, p = job
        row = {**_echo(args, p), "L": L}
        try:
            s = gap_split(L, p, bc)
            row.update(gap=s.gap, multiplicity=s.kernel_dim, E1=s.e1, E0=s.e0, error="")
        except (SolverError, ValueError, MemoryError) as exc:
            row.update(gap=math.nan, multiplicity=-1, E1=math.nan, E0=math.nan, error=str(exc))
        return row

    return _map(one, jobs, args.threads)


def cmd_bounds(args) -> list[dict]:
    def one(p):
        rep = bounds.bound_report(p.kappa, p.lam, args.n).to_dict()
        for k in ("kappa", "lambda_re", "lambda_im"):
            rep.pop(k)
        return {**_echo(args, p), **rep}

    return _map(one, param_grid(args), args.threads)


def cmd_epsilon(args) -> list[dict]:
    jobs = [(M, p) for M in _L_values(args, [10]) for p in param_grid(args)]

    def one(job):
        M, p = job
        res = epsilon_numeric(M, p)
        fv = bounds.f(p.r)
        return {**_echo(args, p), "M": M, "eps": res.eps, "eps2": res.eps2, "f": fv,
                "slack": fv - res.eps2, "roots": len(res.per_root)}

    return _map(one, jobs, args.threads)


def _to_text(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, default=_jsonable) + "\n"
    if not rows:
        return ""
    buf = io.StringIO()
    fields = list(rows[0])
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in r.items()})
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return str(v)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    ids = args.only.split(",") if args.only else None
    results = acceptance.run(ids)
    for r in results:
        if args.deterministic:
            r.seconds = 0.0
        print(r.line(), file=sys.stderr)
    report = json.loads(acceptance.report_json(results))
    report["version"] = __version__
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0 if report["passed"] else 1


COMMANDS = {"tilings": cmd_tilings, "spectrum": cmd_spectrum, "bounds": cmd_bounds, "epsilon": cmd_epsilon}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if args.command == "verify":
            return cmd_verify(args)
        rows = COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(_to_text(rows, args.format), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
