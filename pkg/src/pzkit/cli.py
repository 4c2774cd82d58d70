"""Command-line front end.

Every command writes one JSON report (or a CSV table with ``--format csv``)
to ``--out`` or stdout.  Reports are deterministic: identical inputs give
byte-identical JSON.  Exit codes: 0 success, 1 configuration error,
2 solver failure, 3 violated precondition.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import discrete_space as ds
from . import eigen1d
from . import inequalities as ineq
from . import jsonio
from . import model_weights as mw
from .errors import ConfigurationError, PZError
from .rearrange import SampledFunction, equimeasurability_report, rearrange

OUT_DIR_ENV = "PZKIT_OUT_DIR"

# named test functions for verify-pz and stability, evaluated on vertex positions
FUNCTIONS = {
    "cos": np.cos,
    "sin": np.sin,
    "linear": lambda x: x,
    "neg_linear": lambda x: -x,
    "exp_decay": lambda x: np.exp(-0.25 * x),
    "parabola": lambda x: 1 - x**2,
    "bliss": lambda x: (1 + x**2) ** -0.5,
    "gaussian_bump": lambda x: np.exp(-(x**2)),
    "constant": np.ones_like,
}


# -- parsing helpers -----------------------------------------------------------


def _weight_from_args(args) -> mw.WeightedInterval:
    fam = args.family
    if fam == "sphere":
        return mw.sphere(_need(args, "N"))
    if fam == "euclidean":
        return mw.euclidean(_need(args, "N"), 1.0 if args.avr is None else args.avr)
    if fam == "gaussian":
        return mw.gaussian()
    if fam == "exponential":
        return mw.exponential(args.h)
    if fam == "double_cone":
        return mw.double_cone(_need(args, "Q"), args.r)
    if fam == "uniform":
        lo = 0.0 if args.lower is None else args.lower
        return mw.uniform(lo, lo + 1.0 if args.upper is None else args.upper)
    raise ConfigurationError(f"unknown family {fam!r}")


def _need(args, name):
    val = getattr(args, name)
    if val is None:
        raise ConfigurationError(f"--{name} is required for family {args.family!r}" if len(name) > 1
                                 else f"-{name} is required for family {args.family!r}")
    return val


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc


def _read_atoms(path: str) -> SampledFunction:
    """JSON ``{"atoms": [[v, m], ...]}`` or whitespace-separated ``value mass`` lines."""
    text = _read_text(path).strip()
    if not text:
        raise ConfigurationError("empty atom input")
    if text[0] in "{[":
        data = jsonio.loads(text)
        atoms = data["atoms"] if isinstance(data, dict) else data
        return SampledFunction.from_atoms(atoms, source=path)
    rows = [line.split(",") if "," in line else line.split() for line in text.splitlines() if line.strip()]
    try:
        return SampledFunction.from_atoms([[float(a), float(b)] for a, b in rows], source=path)
    except ValueError as exc:
        raise ConfigurationError(f"malformed atom line: {exc}") from exc


def _read_space(path: str) -> ds.DiscreteSpace:
    try:
        return ds.DiscreteSpace.from_json(jsonio.loads(_read_text(path)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PZError):
            raise
        raise ConfigurationError(f"{path} is not a space file: {exc}") from exc


def _values_on(space: ds.DiscreteSpace, args) -> np.ndarray:
    if args.values:
        vals = jsonio.loads(_read_text(args.values))
        return np.asarray(vals["values"] if isinstance(vals, dict) else vals, dtype=float)
    if args.function not in FUNCTIONS:
        raise ConfigurationError(f"unknown function {args.function!r}; choose from {sorted(FUNCTIONS)}")
    if space.positions is None:
        raise ConfigurationError("space has no vertex positions; pass --values")
    x = space.positions
    if x.ndim == 2:
        x = np.linalg.norm(x - 0.5, axis=1)
    return np.asarray(FUNCTIONS[args.function](x), dtype=float)


def _envelope(command: str, inputs: dict, result, provenance=None) -> dict:
    return {
        "schema_version": jsonio.SCHEMA_VERSION,
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "result": result,
        "provenance": provenance or {},
    }


def _inputs(args) -> dict:
    skip = {"func", "out", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _csv(header, rows) -> str:
    def fmt(v):
        return format(v, ".17g") if isinstance(v, float) else str(v)

    lines = [",".join(header)] + [",".join(fmt(r[h]) for h in header) for r in rows]
    return "\n".join(lines) + "\n"


# -- commands -------------------------------------------------------------------


def cmd_generate(args):
    desc = {"model": args.family, "resolution": args.grid}
    for key, val in (("N", args.N), ("avr", args.avr), ("radius", args.radius), ("Q", args.Q), ("r", args.r),
                     ("aperture", args.aperture), ("h", args.h), ("half_width", args.half_width),
                     ("lower", args.lower), ("upper", args.upper)):
        if val is not None:
            desc[key] = val
    if args.diam is not None:
        desc["diameter"] = args.diam
        if args.family == "sphere" and args.diam < math.pi:
            desc["model"] = "suspension"
    space = ds.generate(desc)
    out = space.to_json()
    out["metadata_hash"] = space.metadata_hash()
    return out


def cmd_rearrange(args):
    u = _read_atoms(args.atoms)
    w = _weight_from_args(args)
    prof = rearrange(u, w)
    if args.format == "csv":
        hi = prof.knots[-1] if math.isfinite(prof.knots[-1]) else prof.knots[-2] + 1.0
        lo = prof.knots[0] if math.isfinite(prof.knots[0]) else prof.knots[1] - 1.0
        return prof.to_csv(np.linspace(lo, hi, args.samples))
    report = equimeasurability_report(u, prof)
    return _envelope("rearrange", _inputs(args), {
        "profile": prof.to_json(),
        "omega_star": list(prof.domain),
        "equimeasurability": {k: report[k] for k in ("superlevel", "level", "sublevel", "worst_exact")},
    }, {"weight": w.to_json()})


def cmd_eigen(args):
    w = _weight_from_args(args)
    if args.neumann:
        res = eigen1d.neumann_eigenvalue(w, args.p, grid=args.grid, tol=args.tol)
    else:
        rho = args.rho
        if rho is None:
            if not math.isfinite(w.upper):
                raise ConfigurationError("--rho is required for Dirichlet problems on unbounded weights")
            rho = w.upper
        res = eigen1d.dirichlet_eigenvalue(w, rho, args.p, grid=args.grid, tol=args.tol)
    if args.format == "csv":
        return _csv(["x", "f"], [{"x": float(a), "f": float(b)} for a, b in zip(res.x, res.f)])
    return _envelope("eigen", _inputs(args), res.to_json(), {"weight": w.to_json()})


def cmd_verify_pz(args):
    space = _read_space(args.space)
    u = _values_on(space, args)
    if args.bv:
        rep = ineq.pz_bv_deficit(space, u, C=args.C)
    else:
        rep = ineq.pz_deficit(space, u, C=args.C, p=args.p)
    return _envelope("verify-pz", _inputs(args), rep.to_json(), {
        "metadata_hash": space.metadata_hash(),
        "target": space.metadata.get("target"),
        "constant_source": rep.metadata.get("constant_source"),
    })


def cmd_stability(args):
    kind = args.kind
    prov = {}
    if kind == "lichnerowicz":
        if args.rq is None:
            raise ConfigurationError("--rq is required")
        rep = ineq.lichnerowicz_deficit(_need(args, "N"), args.p, args.diam or math.pi, args.rq)
        return _envelope("stability", _inputs(args), rep.to_json(), prov)
    if kind == "bbg":
        grid = np.linspace(args.diam_min, math.pi, args.samples)
        return _envelope("stability", _inputs(args), ineq.bbg_quantitative_fit(_need(args, "N"), grid), prov)
    if args.space is None:
        raise ConfigurationError("--space is required for sobolev and logsobolev deficits")
    space = _read_space(args.space)
    u = _values_on(space, args)
    N = args.N if args.N is not None else space.metadata.get("N")
    diam = args.diam if args.diam is not None else space.metadata.get("diameter", math.pi)
    if N is None:
        raise ConfigurationError("-N is required (space metadata has none)")
    prov["metadata_hash"] = space.metadata_hash()
    if kind == "sobolev":
        rep = ineq.sobolev_deficit_compact(N, args.q, diam, ineq.sobolev_norms(space, u, args.q))
    else:
        rep = ineq.logsobolev_deficit_compact(N, diam, space, u)
    return _envelope("stability", _inputs(args), rep.to_json(), prov)


def cmd_constants(args):
    result = {}
    if args.sobolev:
        result["sobolev"] = mw.sobolev_constant(args.p, _need(args, "N"))
    if args.logsobolev:
        result["logsobolev"] = mw.logsobolev_constant(args.p, _need(args, "N"))
    if args.bbg:
        if args.diam is None:
            raise ConfigurationError("--diam is required for --bbg")
        result["bbg"] = mw.bbg_factor(_need(args, "N"), args.diam)
    if args.outside_convex:
        result["outside_convex"] = ineq.outside_convex_constant(args.p, _need(args, "N")).to_json()
    if not result:
        raise ConfigurationError("choose at least one of --sobolev, --logsobolev, --bbg, --outside-convex")
    return _envelope("constants", _inputs(args), result)


def cmd_neumann_bound(args):
    Q = args.Q if args.Q is not None else args.N
    if Q is None:
        raise ConfigurationError("-Q is required")
    bound = ineq.neumann_lower_bound(Q, args.C, args.p, args.mass, grid=args.grid)
    R = (args.mass / mw.ball_volume(Q)) ** (1.0 / Q)
    return _envelope("neumann-bound", _inputs(args), {"bound": bound, "R": R},
                     {"dirichlet_weight": mw.euclidean(Q).to_json()})


def cmd_faber_krahn(args):
    coeffs = [float(c) for c in args.coeffs.split(",")] if args.coeffs else [0.0]
    d = int(args.N) if args.N is not None else 2
    res = ineq.log_convex_faber_krahn(coeffs, d, args.p, args.volume, grid=args.grid)
    return _envelope("faber-krahn", _inputs(args), res)


def cmd_profile(args):
    D = args.diam if args.diam is not None else 1.0
    vs = [float(v) for v in args.v.split(",")]
    rows = []
    for v in vs:
        t0 = time.perf_counter()
        I_D = ineq.gaussian_diameter_profile(D, v)
        I = float(ineq.gaussian_isoperimetric_profile(v))
        rows.append({"D": D, "v": v, "I_D": I_D, "I_inf": I, "ratio": I_D / I,
                     "runtime_ms": 1e3 * (time.perf_counter() - t0)})
    if args.format == "csv":
        return _csv(["D", "v", "I_D", "I_inf", "ratio", "runtime_ms"], rows)
    for r in rows:
        del r["runtime_ms"]
    return _envelope("profile", _inputs(args), {"rows": rows, "bracket": list(ineq.XI_BRACKET)})


# -- parser ---------------------------------------------------------------------


def _common(p, *, family=False, grid=eigen1d.DEFAULT_GRID):
    p.add_argument("--out", help="output path (relative paths honour $%s)" % OUT_DIR_ENV)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-N", type=float, help="dimension parameter")
    p.add_argument("-p", "--p", dest="p", type=float, default=2.0, help="exponent p > 1")
    p.add_argument("-Q", type=float, help="Ahlfors-regularity exponent")
    p.add_argument("--diam", type=float, help="diameter")
    p.add_argument("--avr", type=float, default=None, help="asymptotic volume ratio")
    p.add_argument("--grid", type=int, default=grid, help="grid resolution")
    p.add_argument("--tol", type=float, default=eigen1d.DEFAULT_TOL, help="relative tolerance")
    if family:
        p.add_argument("--family", required=True, help="model family")
        p.add_argument("--rate", dest="h", type=float, default=1.0, help="exponential rate h")
        p.add_argument("-r", type=float, default=1.0, help="double-cone half-length")
        p.add_argument("--lower", type=float, default=None)
        p.add_argument("--upper", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pzkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pzkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a weighted chain or grid")
    _common(p, family=True, grid=1000)
    p.add_argument("--radius", type=float)
    p.add_argument("--aperture", type=float)
    p.add_argument("--half-width", type=float)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("rearrange", help="decreasing rearrangement of an atom list")
    _common(p, family=True)
    p.add_argument("--atoms", default="-", help="atom file, '-' for stdin")
    p.add_argument("--samples", type=int, default=201, help="CSV sample count")
    p.set_defaults(func=cmd_rearrange)

    p = sub.add_parser("eigen", help="first Dirichlet or Neumann p-eigenvalue")
    _common(p, family=True)
    bc = p.add_mutually_exclusive_group()
    bc.add_argument("--neumann", action="store_true")
    bc.add_argument("--dirichlet", action="store_true")
    p.add_argument("--rho", type=float, help="Dirichlet endpoint")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("verify-pz", help="Polya-Szego deficit on a space file")
    _common(p)
    p.add_argument("--space", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--function", default="cos", help="named test function")
    src.add_argument("--values", help="JSON file with vertex values")
    p.add_argument("-C", type=float, help="isoperimetric constant (default: from the space)")
    p.add_argument("--bv", action="store_true", help="total-variation version")
    p.set_defaults(func=cmd_verify_pz)

    p = sub.add_parser("stability", help="quantitative stability deficits")
    _common(p)
    p.add_argument("--kind", choices=("lichnerowicz", "sobolev", "logsobolev", "bbg"), required=True)
    p.add_argument("--rq", type=float, help="Rayleigh quotient")
    p.add_argument("-q", type=float, default=4.0)
    p.add_argument("--space")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--function", default="cos")
    src.add_argument("--values")
    p.add_argument("--diam-min", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=64)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("constants", help="sharp constants")
    _common(p)
    p.add_argument("--sobolev", action="store_true")
    p.add_argument("--logsobolev", action="store_true")
    p.add_argument("--bbg", action="store_true")
    p.add_argument("--outside-convex", action="store_true")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("neumann-bound", help="Neumann eigenvalue lower bound")
    _common(p)
    p.add_argument("-C", type=float, default=1.0)
    p.add_argument("--mass", type=float, required=True)
    p.set_defaults(func=cmd_neumann_bound)

    p = sub.add_parser("faber-krahn", help="weighted Faber-Krahn eigenvalue for e^f densities")
    _common(p)
    p.add_argument("--coeffs", help="polynomial coefficients of f, constant term first")
    p.add_argument("--volume", type=float, default=math.pi)
    p.set_defaults(func=cmd_faber_krahn)

    p = sub.add_parser("profile", help="Gaussian isoperimetric profile under a diameter bound")
    _common(p)
    p.add_argument("--v", default="0.5", help="comma-separated volume fractions")
    p.set_defaults(func=cmd_profile)
    return parser


def _resolve_out(path):
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(text: str, out) -> None:
    if out:
        jsonio.atomic_write(_resolve_out(out), text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except PZError as exc:
        err = {
            "schema_version": jsonio.SCHEMA_VERSION,
            "version": __version__,
            "command": args.command,
            "error": {"code": exc.code, "type": type(exc).__name__, "message": str(exc)},
        }
        print(f"pzkit {args.command}: {exc}", file=sys.stderr)
        if args.out:
            _emit(jsonio.dumps(err) + "\n", args.out)
        return exc.code
    text = result if isinstance(result, str) else jsonio.dumps(result) + "\n"
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
