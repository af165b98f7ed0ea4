"""Command-line front end.

Every subcommand reads its inputs from files given by flags, writes JSON
or CSV to ``--out`` (stdout by default) and exits with 0 on success, 1 on
bad arguments or unreadable input, 2 when the library rejects the data
or a solver fails. Errors are reported on stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import branched, degree, duality, fixtures, relaxed, transport
from .errors import TopoChargeError
from .geometry import ChargeConfig, config_from_json, config_to_json
from .serialize import csv_line, dumps

SUBCOMMANDS = ("degree", "energy", "transport", "dual", "dualfield", "relaxed",
               "branched", "sweep", "selftest", "generate")


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Output:
    """Result of a subcommand: a JSON object and optionally a CSV table."""

    def __init__(self, obj=None, header=None, rows=None, text=None):
        self.obj, self.header, self.rows, self.text = obj, header, rows, text

    def render(self, fmt: str) -> str:
        if self.text is not None:
            return self.text
        if fmt == "csv":
            if self.header is None:
                raise UsageError("this subcommand has no csv output; use --format json")
            lines = [",".join(self.header)] + [csv_line(r) for r in self.rows]
            return "\n".join(lines) + "\n"
        if self.obj is None:
            raise UsageError("this subcommand has no json output; use --format csv")
        return dumps(self.obj) + "\n"


# --- argument handling ----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topocharge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text, inp=True, **defaults):
        p = sub.add_parser(name, help=help_text)
        if inp:
            p.add_argument("--in", dest="inp", required=True, help="input file")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=defaults.pop("fmt", "json"))
        for flag, (typ, default, text) in defaults.items():
            p.add_argument(f"--{flag}", type=typ, default=default, help=text)
        return p

    add("degree", "singularities of a GridMap CSV")
    add("energy", "discrete p-energy of a GridMap CSV", p=(float, 1.0, "exponent p >= 1"))
    add("transport", "optimal transport plan of a ChargeConfig JSON")
    add("dual", "optimal Kantorovich prices of a ChargeConfig JSON")
    add("dualfield", "Lipschitz extension of the optimal prices on a grid", fmt="csv",
        grid=(int, 64, "samples per axis"))
    add("relaxed", "relaxed energy report of a GridMap CSV")
    p = add("branched", "branched transport: optimize a tree or sweep dyadic arrays", inp=False,
            fmt=None,
            alpha=(str, None, "cost exponent in (0, 1], e.g. 0.5 or 3/4"),
            m=(int, 2, "lattice dimension (sweep)"), n=(int, 8, "largest array level (sweep)"),
            h=(float, 1.0, "lattice spacing (sweep)"), d=(float, 1.0, "source degree (sweep)"))
    p.add_argument("--in", dest="inp", help="ChargeConfig JSON (optimize mode)")
    p.add_argument("--mode", choices=("optimize", "sweep"), default=None)
    add("sweep", "dyadic-array cost table (n, centralized, recurrence, closed form, regime)",
        inp=False, fmt="csv",
        alpha=(str, None, "cost exponent in (0, 1]"), m=(int, 2, "lattice dimension"),
        n=(int, 8, "largest array level"), h=(float, 1.0, "lattice spacing"),
        d=(float, 1.0, "source degree"))
    add("selftest", "run the embedded fixture checks", inp=False)
    p = add("generate", "write an analytic fixture", inp=False,
            grid=(int, 256, "grid size (map fixtures)"), eps=(float, 0.0, "hole radius"),
            m=(int, 2, "lattice dimension (dyadic_array)"), n=(int, 3, "array level (dyadic_array)"),
            h=(float, 1.0, "lattice spacing (dyadic_array)"), d=(float, 1.0, "source degree (dyadic_array)"))
    p.add_argument("kind", choices=fixtures.FIXTURE_KINDS)
    return parser


def _check(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _alpha(args):
    _check(args.alpha is not None, "--alpha is required")
    try:
        a = branched.as_exponent(args.alpha)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --alpha {args.alpha!r}: {exc}") from None
    except TopoChargeError as exc:
        raise UsageError(f"bad --alpha {args.alpha!r}: {exc.detail}") from None
    return a


def validate_args(args):
    """Range checks done before any work is dispatched."""
    if getattr(args, "p", None) is not None:
        _check(math.isfinite(args.p) and args.p >= 1, f"--p must be >= 1, got {args.p}")
    if getattr(args, "grid", None) is not None:
        _check(2 <= args.grid <= 4096, f"--grid must be in 2..4096, got {args.grid}")
    if getattr(args, "eps", None) is not None:
        _check(math.isfinite(args.eps) and args.eps >= 0, f"--eps must be >= 0, got {args.eps}")
    if getattr(args, "m", None) is not None:
        _check(1 <= args.m <= 8, f"--m must be in 1..8, got {args.m}")
    if getattr(args, "n", None) is not None:
        _check(args.n >= 0, f"--n must be >= 0, got {args.n}")
    if getattr(args, "h", None) is not None:
        _check(math.isfinite(args.h) and args.h > 0, f"--h must be > 0, got {args.h}")
    if getattr(args, "d", None) is not None:
        _check(math.isfinite(args.d) and args.d > 0, f"--d must be > 0, got {args.d}")
    if args.command == "generate" and args.kind == "dyadic_array":
        _check(args.m * args.n <= 12, "dyadic_array limited to 2^(m n) <= 4096 sources")
        _check(float(args.d).is_integer() and args.d >= 1, "--d must be a positive integer here")


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_config(path: str) -> ChargeConfig:
    text = _read(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, list):
        raise UsageError(f"{path}: charge config must be a JSON array")
    return config_from_json(text)


def _load_grid(path: str) -> degree.GridMap:
    return degree.gridmap_from_csv(_read(path))


# --- subcommands ------------------------------------------------------------

def cmd_degree(args) -> Output:
    gm = _load_grid(args.inp)
    sing = degree.detect_singularities(gm)
    recs = [{"pos": list(p.coords), "deg": d} for p, d in sing.entries]
    obj = {"singularities": recs, "total": sing.total_degree(),
           "boundary_degree": degree.boundary_degree(gm)}
    rows = [(p.coords[0], p.coords[1], d) for p, d in sing.entries]
    return Output(obj, ("x", "y", "deg"), rows)


def cmd_energy(args) -> Output:
    gm = _load_grid(args.inp)
    e = degree.p_energy(gm, args.p)
    return Output({"p": args.p, "energy": e}, ("p", "energy"), [(args.p, e)])


def cmd_transport(args) -> Output:
    plan = transport.min_cost_transport(_load_config(args.inp))
    return Output(plan.to_dict(), ("i", "j", "flow"), [e for e in plan.edges])


def cmd_dual(args) -> Output:
    config = _load_config(args.inp)
    value, pot = duality.kantorovich_dual(config)
    gap = transport.min_cost_transport(config).cost - value
    obj = {"value": value, "potential": list(pot.values), "gap": gap}
    return Output(obj, ("i", "f"), list(enumerate(pot.values)))


def _field_box(config: ChargeConfig):
    pts = config.positions
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = max(0.25 * float((hi - lo).max()), 1.0)
    return lo - pad, hi + pad


def cmd_dualfield(args) -> Output:
    config = _load_config(args.inp)
    if config.dim != 2:
        raise UsageError(f"dualfield needs a 2-d config, got dimension {config.dim}")
    if not len(config):
        raise UsageError("dualfield needs at least one charge")
    _, pot = duality.kantorovich_dual(config)
    lo, hi = _field_box(config)
    xs = np.linspace(lo[0], hi[0], args.grid)
    ys = np.linspace(lo[1], hi[1], args.grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    phi = duality.LipschitzField(config, pot).on_grid(X, Y)
    rows = [(X[i, j], Y[i, j], phi[i, j]) for i in range(args.grid) for j in range(args.grid)]
    obj = {"x": xs, "y": ys, "phi": phi}
    return Output(obj, ("x", "y", "phi"), rows)


def cmd_relaxed(args) -> Output:
    rep = relaxed.relaxed_energy(_load_grid(args.inp))
    return Output(rep.to_dict(), ("dirichlet", "transport", "total"),
                  [(rep.dirichlet, rep.transport, rep.total)])


def _sweep(args) -> Output:
    alpha = _alpha(args)
    _check(args.n <= 30, f"--n must be <= 30 for a sweep, got {args.n}")
    rows = sorted(branched.sweep_rows(args.m, alpha, args.n, args.h, args.d))
    header = ("n", "centralized", "hierarchical_recurrence", "hierarchical_closed", "regime")
    obj = {"m": args.m, "alpha": str(alpha), "h": args.h, "d": args.d,
           "rows": [dict(zip(header, r)) for r in rows]}
    return Output(obj, header, rows)


def cmd_branched(args) -> Output:
    mode = args.mode or ("optimize" if args.inp else "sweep")
    if args.format is None:
        # sweep tables default to csv, trees to json
        args.format = "csv" if mode == "sweep" else "json"
    if mode == "sweep":
        return _sweep(args)
    _check(args.inp is not None, "--in is required in optimize mode")
    alpha = _alpha(args)
    tree = branched.branched_optimize(_load_config(args.inp), alpha)
    return Output(tree.to_dict(), ("u", "v", "flow"), list(tree.edges))


def cmd_sweep(args) -> Output:
    return _sweep(args)


def cmd_generate(args) -> Output:
    kind = args.kind
    if kind == "dyadic_array":
        fx = fixtures.dyadic_array(args.m, args.n, args.h, int(args.d))
    elif kind == "constant":
        fx = fixtures.constant_map(n=args.grid)
    elif kind == "single_vortex":
        fx = fixtures.single_vortex(n=args.grid, eps=args.eps, disk=1.0 if args.eps > 0 else None)
    else:
        fx = fixtures.generate_fixture(kind, n=args.grid, eps=args.eps)
    if isinstance(fx, ChargeConfig):
        return Output(text=config_to_json(fx) + "\n")
    return Output(text=degree.gridmap_to_csv(fx))


def selftest_checks():
    """Small fixture suite; yields (name, ok, detail)."""
    from .geometry import validate_config

    t = 2 * math.pi * np.arange(512) / 512
    ok = all(degree.winding_number(np.stack([np.cos(k * t), np.sin(k * t)], 1)) == k
             for k in range(-3, 4))
    yield "winding", ok, "k in -3..3"

    pair = validate_config([((0.0, 0.0), 1), ((3.0, 0.0), -1)])
    cost = transport.min_cost_transport(pair).cost
    yield "transport_pair", cost == 3.0, f"cost {cost}"

    square = validate_config([((0, 0), 1), ((1, 1), 1), ((1, 0), -1), ((0, 1), -1)])
    value, _ = duality.kantorovich_dual(square)
    yield "duality_square", abs(value - 2.0) < 1e-9, f"dual {value}"

    gm = fixtures.vortex_pair(n=128)
    rep = relaxed.relaxed_energy(gm)
    yield "relaxed_pair", abs(rep.transport - 1.0) < 1e-9, f"transport {rep.transport}"

    worst = 0.0
    for m in range(2, 5):
        for a in (Fraction(1, 2), Fraction(m - 1, m), 1):
            for n in range(0, 12):
                spec = branched.ArraySpec(m, n, 1.0, 1.0, a)
                r = branched.hierarchical_cost_recurrence(spec)
                c = branched.hierarchical_cost_closed_form(spec)
                worst = max(worst, abs(r - c) / max(abs(r), 1.0))
    yield "recurrence", worst < 1e-12, f"max rel err {worst:.3g}"

    cl = validate_config([((0, 0), 1), ((0, 0.1), 1), ((10, 0), -1), ((10, 0.1), -1)])
    tree = branched.branched_optimize(cl, 0.5)
    yield "merge", tree.max_flow == 2.0 and tree.cost < 20.0, f"cost {tree.cost}"


def cmd_selftest(args) -> Output:
    checks = []
    for name, ok, detail in selftest_checks():
        checks.append({"name": name, "ok": bool(ok), "detail": detail})
    obj = {"passed": all(c["ok"] for c in checks), "checks": checks}
    rows = [(c["name"], c["ok"], c["detail"]) for c in checks]
    out = Output(obj, ("name", "ok", "detail"), rows)
    out.failed = not obj["passed"]
    return out


COMMANDS = {
    "degree": cmd_degree, "energy": cmd_energy, "transport": cmd_transport,
    "dual": cmd_dual, "dualfield": cmd_dualfield, "relaxed": cmd_relaxed,
    "branched": cmd_branched, "sweep": cmd_sweep, "selftest": cmd_selftest,
    "generate": cmd_generate,
}


def _fail(kind: str, detail: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}) + "\n")
    return code


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
        validate_args(args)
        result = COMMANDS[args.command](args)
        text = result.render(args.format)
    except UsageError as exc:
        return _fail("ValidationError", str(exc), 1)
    except TopoChargeError as exc:
        return _fail(exc.name, exc.detail, 2)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        return _fail("SolverError", str(exc), 2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if getattr(result, "failed", False):
        return _fail("SelftestFailed", "one or more embedded checks failed", 2)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
