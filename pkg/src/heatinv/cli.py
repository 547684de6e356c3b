"""Command line driver.

    heatinv rho --alpha j --beta k --format latex
    heatinv invariant --k 4 --operator scalar
    heatinv hodge --n 4 --nu 2 --check
    heatinv jet --n 4 --seed 3 --check identities

Every subcommand accepts ``--config FILE`` (a JSON object with the same keys
as the long flags, dashes or underscores); explicit flags win over the file.
With ``--output`` the result goes to a file and a manifest with the
configuration, library versions and a SHA-256 digest is written beside it.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from fractions import Fraction

from . import __version__
from .expr import StructuralError, RewriteError, has_bundle, is_bundle_linear
from .textio import (
    ParseError,
    poly_to_obj,
    symbol_to_latex,
    symbol_to_obj,
    symbol_to_text,
    to_latex,
    to_text,
)

FORMATS = ("text", "latex", "json")


def _labels(s: str | None) -> list:
    """``"j,k"`` or the compact ``"jk"`` for single-letter labels."""
    if not s:
        return []
    s = s.strip()
    if "," in s:
        return [x.strip() for x in s.split(",") if x.strip()]
    if s.startswith("~"):
        return [s]
    return list(s)


def _render_poly(p, fmt):
    if fmt == "json":
        return poly_to_obj(p)
    return to_latex(p) if fmt == "latex" else to_text(p)


def _dump(obj, fmt) -> str:
    if fmt == "json":
        return json.dumps(obj, sort_keys=True, indent=2)
    return obj


# --------------------------------------------------------------------------
# subcommands

def cmd_rho(a) -> str:
    from .identities import normal_form
    from .rho_chi import compute_rho

    p = compute_rho(_labels(a.alpha), _labels(a.beta), bound=a.bound)
    if a.flat_bundle:
        p = normal_form(p, drop=has_bundle)
    elif a.mod_linear:
        p = normal_form(p, drop=is_bundle_linear)
    elif a.simplify:
        p = normal_form(p)
    return _dump(_render_poly(p, a.format), a.format)


def cmd_chi(a) -> str:
    from .rho_chi import compute_chi

    parts = compute_chi(_labels(a.alpha), bound=a.bound)
    which = range(3) if a.p is None else [a.p]
    if a.format == "json":
        return _dump({f"chi{p}": poly_to_obj(parts[p]) for p in which}, "json")
    return "\n".join(f"chi{p}: {_render_poly(parts[p], a.format)}" for p in which)


def _spec(a):
    from .parametrix import GENERIC, SCALAR, OperatorSpec, hodge

    if a.operator == "scalar":
        return SCALAR
    if a.operator == "hodge":
        if a.n is None or a.nu is None:
            raise ValueError("--operator hodge needs --n and --nu")
        return hodge(a.n, a.nu)
    if a.no_trace_free:
        return OperatorSpec("generic", trace_free=False)
    return GENERIC


def cmd_rk(a) -> str:
    from .parametrix import r_k

    if a.k < 0:
        raise ValueError("--k must be non-negative")
    spec = _spec(a)
    if spec.variant == "hodge":
        raise ValueError("rk uses the generic symbols for the Hodge operator; pass --operator generic")
    s = r_k(a.k, spec)
    if a.format == "json":
        return _dump(symbol_to_obj(s), "json")
    return symbol_to_latex(s) if a.format == "latex" else symbol_to_text(s)


def cmd_invariant(a) -> str:
    from .assemble import heat_invariant

    if a.k < 0 or a.k % 2:
        raise ValueError("--k must be a non-negative even integer")
    spec = _spec(a)
    p = heat_invariant(a.k, spec, simplify=not a.no_simplify)
    return _dump(_render_poly(p, a.format), a.format)


def _hodge_row(n, nu, check):
    from .hodge import compare_paths, patodi_coefficients, patodi_invariant

    pc = patodi_coefficients(n, nu)
    row = {"n": n, "nu": nu, **pc.as_dict()}
    if check:
        row["pipeline_agrees"] = all(compare_paths(n, nu).values())
    return row, pc, patodi_invariant


def cmd_hodge(a) -> str:
    if a.n is None or a.n < 1:
        raise ValueError("--n must be a positive integer")
    if a.table:
        rows = [_hodge_row(n, nu, a.check)[0] for n in range(1, a.n + 1) for nu in range(n + 1)]
        if a.format == "json":
            return _dump(rows, "json")
        cols = ["n", "nu", "a0", "a2", "c1", "c2", "c3", "c4"] + (["pipeline_agrees"] if a.check else [])
        lines = ["\t".join(cols)]
        lines += ["\t".join(str(r[c]) for c in cols) for r in rows]
        return "\n".join(lines)
    if a.nu is None or not 0 <= a.nu <= a.n:
        raise ValueError("--nu must lie in 0..n")
    row, pc, patodi_invariant = _hodge_row(a.n, a.nu, a.check)
    if a.format == "json":
        row["a4"] = poly_to_obj(patodi_invariant(4, a.n, a.nu))
        return _dump(row, "json")
    render = to_latex if a.format == "latex" else to_text
    lines = [
        f"a0 = {pc.a0}",
        f"a2 = {render(patodi_invariant(2, a.n, a.nu))}",
        f"a4 = {render(patodi_invariant(4, a.n, a.nu))}",
        "c = ({}, {}, {}, {})".format(*pc.c),
    ]
    if a.check:
        lines.append(f"pipeline agrees: {row['pipeline_agrees']}")
    return "\n".join(lines)


def cmd_jet(a) -> str:
    from .jetlab import (
        constant_curvature_jet,
        evaluate_curvature,
        gauge_residuals,
        identity_residuals,
        random_metric_jet,
    )

    if a.n is None or a.n < 2:
        raise ValueError("--n must be at least 2")
    if a.sphere is not None:
        jet = constant_curvature_jet(a.n, Fraction(a.sphere))
    else:
        jet = random_metric_jet(a.n, degree=a.degree, seed=a.seed)
    if a.check == "identities":
        res = {k: str(v) for k, v in identity_residuals(jet).items()}
        L = [[1 + (i == j) + (j == (i + 1) % a.n) for j in range(a.n)] for i in range(a.n)]
        res.update({f"gauge_{k}": str(v) for k, v in gauge_residuals(jet, L).items()})
        a._failed = any(v != "0" for v in res.values())
    else:
        cd = evaluate_curvature(jet)
        res = {k: str(cd[k]) for k in ("S", "Ric2", "R2")}
    if a.format == "json":
        return _dump(res, "json")
    return "\n".join(f"{k}: {v}" for k, v in res.items())


# --------------------------------------------------------------------------
# parser

def _common(p):
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--output", help="write the result to this file (plus a manifest)")
    p.add_argument("--config", help="JSON file with defaults for these flags")


def _operator(p):
    p.add_argument("--operator", choices=("generic", "scalar", "hodge"), default="generic")
    p.add_argument("--n", type=int)
    p.add_argument("--nu", type=int)
    p.add_argument("--no-trace-free", action="store_true",
                   help="keep single curvature traces (generic operator only)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatinv", description="Heat invariants of Laplace-type operators.")
    ap.add_argument("--version", action="version", version=f"heatinv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rho", help="composition coefficient rho_{alpha,beta}")
    p.add_argument("--alpha", default="")
    p.add_argument("--beta", default="")
    p.add_argument("--bound", type=int, default=6)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--simplify", action="store_true", help="normal form modulo Bianchi identities")
    g.add_argument("--mod-linear", action="store_true", help="normal form dropping terms linear in the bundle curvature")
    g.add_argument("--flat-bundle", action="store_true", help="set the bundle curvature to zero")
    _common(p)
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("chi", help="chi^(p)_alpha")
    p.add_argument("--alpha", default="")
    p.add_argument("--p", type=int, choices=(0, 1, 2))
    p.add_argument("--bound", type=int, default=6)
    _common(p)
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("rk", help="resolvent symbol r_k")
    p.add_argument("--k", type=int, required=True)
    _operator(p)
    _common(p)
    p.set_defaults(func=cmd_rk)

    p = sub.add_parser("invariant", help="local heat invariant a_k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--no-simplify", action="store_true")
    _operator(p)
    _common(p)
    p.set_defaults(func=cmd_invariant)

    p = sub.add_parser("hodge", help="invariants of the Hodge Laplacian on nu-forms")
    p.add_argument("--n", type=int)
    p.add_argument("--nu", type=int)
    p.add_argument("--table", action="store_true", help="all 1 <= n' <= n, 0 <= nu <= n'")
    p.add_argument("--check", action="store_true", help="compare with the full pipeline")
    _common(p)
    p.set_defaults(func=cmd_hodge)

    p = sub.add_parser("jet", help="numeric oracle on a random metric jet")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--sphere", help="use the constant curvature jet with this K instead")
    p.add_argument("--check", choices=("identities", "curvature"), default="curvature")
    _common(p)
    p.set_defaults(func=cmd_jet)
    return ap


def _load_config(path, subparser):
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    known = {a.dest for a in subparser._actions}
    out = {}
    for k, v in cfg.items():
        key = k.replace("-", "_")
        if key in ("command", "config"):
            continue
        if key not in known:
            raise ValueError(f"unknown config key {k!r}")
        out[key] = v
    return out


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        sp = ap._subparsers._group_actions[0].choices[args.command]
        cfg = _load_config(args.config, sp)
        # the config supplies defaults; whatever was typed wins
        for action in sp._actions:
            if action.dest in cfg:
                action.default = cfg[action.dest]
                action.required = False
        args = ap.parse_args(argv)
    return args


def _manifest(args, payload: str) -> str:
    import gmpy2
    import numpy

    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "_failed")}
    digest = hashlib.sha256(payload.encode()).hexdigest()
    return json.dumps({
        "config": cfg,
        "versions": {"heatinv": __version__, "python": platform.python_version(),
                     "numpy": numpy.__version__, "gmpy2": gmpy2.version()},
        "output": {"path": args.output, "sha256": digest},
    }, sort_keys=True, indent=2) + "\n"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        args._failed = False
        out = args.func(args)
    except (ValueError, StructuralError, RewriteError, ParseError, OSError) as exc:
        print(f"heatinv: error: {exc}", file=sys.stderr)
        return 2
    out = out if out.endswith("\n") else out + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
        with open(args.output + ".manifest.json", "w") as fh:
            fh.write(_manifest(args, out))
    else:
        sys.stdout.write(out)
    return 1 if args._failed else 0


if __name__ == "__main__":
    sys.exit(main())
