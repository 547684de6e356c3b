"""Parsing and rendering of tensor polynomials (term syntax, JSON, LaTeX).

Term syntax, used both as input and as the plain-text rendering::

    -1/3*R[p,k,l,j]*xi[p] + 1/2*Rv[j,k]
    S/6 - Tr(A)
    D[p,p]S, D[i]Rv[j,k], N[i,j]R[a,b,c,d]

``D[...]`` is a symmetrized ``-i nabla`` prefix, ``DD[...]`` an ordered string
of ``-i nabla`` and ``N[...]`` an ordered string of plain covariant derivatives
(outermost first).  A label repeated inside a factor
or across factors of one term is summed over.  ``~a`` denotes a constant vector
contracted into a slot.  Names: ``R Ric S Rv A I xi xi2 g n d Tr(...)``.
"""
from __future__ import annotations

import json
import re
from fractions import Fraction

from .expr import (
    XI,
    RationalSymbol,
    StructuralError,
    TensorPolynomial,
    mul,
    trace,
)

POLY_SCHEMA = "heatinv.tensorpoly/1"
SYMBOL_SCHEMA = "heatinv.symbol/1"

_TOKEN = re.compile(r"\s*(?:(\d+)|(~?[A-Za-z][A-Za-z0-9]*)|(.))")


class ParseError(ValueError):
    pass


def _tokenize(s: str):
    out = []
    pos = 0
    s = s.strip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            break
        pos = m.end()
        num, name, ch = m.groups()
        if num is not None:
            out.append(("num", int(num)))
        elif name is not None:
            out.append(("name", name))
        elif ch is not None and not ch.isspace():
            out.append(("op", ch))
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, s):
        self.toks = _tokenize(s)
        self.i = 0
        self.src = s

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, val=None):
        t = self.toks[self.i]
        if (kind and t[0] != kind) or (val is not None and t[1] != val):
            raise ParseError(f"unexpected {t[1]!r} in {self.src!r}")
        self.i += 1
        return t

    def expr(self):
        total = None
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        elif self.peek() == ("op", "+"):
            self.take()
        while True:
            t = self.term().scale(sign)
            total = t if total is None else total + t
            nxt = self.peek()
            if nxt == ("op", "+"):
                self.take()
                sign = 1
            elif nxt == ("op", "-"):
                self.take()
                sign = -1
            else:
                return total

    def term(self):
        coeff = Fraction(1)
        factors = []
        first = True
        while True:
            t = self.peek()
            if t[0] == "num":
                self.take()
                coeff *= t[1]
            elif t == ("op", "/"):
                self.take()
                coeff /= self.take("num")[1]
                first = False
                continue
            elif t == ("op", "*") and not first:
                self.take()
                continue
            elif t[0] == "name" or t == ("op", "("):
                factors.append(self.power())
            else:
                break
            first = False
        if first:
            raise ParseError(f"expected a term at {self.peek()[1]!r} in {self.src!r}")
        out = TensorPolynomial.scalar(coeff)
        for f in factors:
            out = mul(out, f)
        return out

    def power(self):
        f = self.factor()
        if self.peek() == ("op", "^"):
            self.take()
            e = self.take("num")[1]
            out = TensorPolynomial.one()
            for _ in range(e):
                out = mul(out, f)
            return out
        return f

    def labels(self):
        self.take("op", "[")
        out = []
        while True:
            t = self.take()
            if t[0] == "name":
                out.append(t[1])
            elif t[0] == "num":
                out.append(t[1])
            else:
                raise ParseError(f"bad label {t[1]!r}")
            if self.peek() == ("op", ","):
                self.take()
                continue
            self.take("op", "]")
            return out

    def factor(self):
        t = self.peek()
        if t == ("op", "("):
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        name = self.take("name")[1]
        if name == "Tr":
            self.take("op", "(")
            e = self.expr()
            self.take("op", ")")
            return trace(e)
        prefix = []
        outer = []
        while name in ("D", "N", "DD") and self.peek() == ("op", "["):
            labs = self.labels()
            if name == "D":
                prefix.extend(labs)
            else:
                outer.append((name, labs))
            name = self.take("name")[1]
        args = self.labels() if self.peek() == ("op", "[") else []
        base = make_factor(name, args, prefix)
        from .calculus import apply_ordered

        for name, labs in reversed(outer):
            base = apply_ordered(labs, base, plain=(name == "N"))
        return base


def _assign_dummies(labels, start=1000):
    counts: dict = {}
    for l in labels:
        counts[l] = counts.get(l, 0) + 1
    mp = {}
    nxt = start
    for l, c in counts.items():
        if c == 2 and not str(l).startswith("~"):
            mp[l] = nxt
            nxt += 1
        elif c > 2 and not str(l).startswith("~"):
            raise StructuralError(f"label {l!r} used {c} times in one factor")
    return mp


def make_factor(name: str, args, prefix=()) -> TensorPolynomial:
    prefix = list(prefix)
    if name in ("Ric", "S", "R") and name != "R":
        if name == "Ric":
            if len(args) != 2:
                raise ParseError("Ric takes two indices")
            name, args = "R", [args[0], "_c1", args[1], "_c1"]
        else:
            if args:
                raise ParseError("S takes no indices")
            name, args = "R", ["_c1", "_c2", "_c1", "_c2"]
    kinds = {"R": "R", "Rv": "F", "A": "A", "xi": "xi", "g": "g", "n": "n", "d": "d",
             "xi2": "xx", "I": None, "u": "u"}
    if name not in kinds:
        raise ParseError(f"unknown symbol {name!r}")
    kind = kinds[name]
    if kind is None:
        if args or prefix:
            raise ParseError("I takes no indices")
        return TensorPolynomial.one()
    if prefix and kind not in ("R", "F", "A", "u"):
        raise ParseError(f"cannot differentiate {name}")
    mp = _assign_dummies(list(prefix) + list(args))
    pre = tuple(mp.get(l, l) for l in prefix)
    sl = tuple(mp.get(l, l) for l in args)
    at = (kind, pre, sl)
    if kind in ("F", "A", "u"):
        body = ((), (at,), ())
    else:
        body = ((at,), (), ())
    return TensorPolynomial.from_bodies([(body, 1)])


def parse(s: str) -> TensorPolynomial:
    """Parse the term syntax into a canonical polynomial."""
    p = _Parser(s)
    e = p.expr()
    p.take("end")
    return e


# --------------------------------------------------------------------------
# rendering helpers

_DUMMY_NAMES = "pqrstuvwyzabcefghjklmo"


def _dummy_namer(free):
    pool = [c for c in _DUMMY_NAMES if c not in free]
    pool += [f"q{i}" for i in range(1, 200)]
    return pool


def _sort_key(body):
    from .expr import weight, xi_degree

    return (weight(body), xi_degree(body), repr(body))


def _ric_form(atom):
    """Detect Ricci/scalar contractions inside a Riemann atom."""
    kind, pre, sl = atom
    if kind != "R":
        return None
    pairs = {}
    for i in range(4):
        for j in range(i + 1, 4):
            if sl[i] == sl[j] and isinstance(sl[i], int):
                pairs[(i, j)] = sl[i]
    if set(pairs) == {(0, 2), (1, 3)}:
        return ("S", 1, ())
    if set(pairs) == {(0, 3), (1, 2)}:
        return ("S", -1, ())
    if len(pairs) == 1:
        (i, j), _ = next(iter(pairs.items()))
        rest = tuple(sl[k] for k in range(4) if k not in (i, j))
        sign = 1 if (i, j) in ((0, 2), (1, 3)) else -1
        return ("Ric", sign, rest)
    return None


def _fmt_coeff_term(c: Fraction, factors: list[str], sep="*") -> str:
    a, b = abs(c.numerator), c.denominator
    body = sep.join(factors)
    if not factors:
        s = f"{a}" if b == 1 else f"{a}/{b}"
    elif a == 1:
        s = body if b == 1 else f"{body}/{b}"
    else:
        s = f"{a}{sep}{body}" if b == 1 else f"{a}{sep}{body}/{b}"
    return s


def _join(terms):
    out = ""
    for i, (c, s) in enumerate(terms):
        if i == 0:
            out = ("-" if c < 0 else "") + s
        else:
            out += (" - " if c < 0 else " + ") + s
    return out or "0"


def _term_factors_text(body, names):
    scalars, chain, traces = body
    sign = 1
    factors = []
    xi_dummies = []

    def lab(l):
        if l == XI:
            nm = names.pop(0)
            xi_dummies.append(nm)
            return nm
        if isinstance(l, int):
            return lab.map.setdefault(l, names.pop(0))
        return l

    lab.map = {}

    def fmt(a):
        nonlocal sign
        kind, pre, sl = a
        p = "".join(["D[" + ",".join(lab(l) for l in pre) + "]"]) if pre else ""
        rf = _ric_form(a)
        if rf is not None:
            nm, sg, rest = rf
            sign *= sg
            if nm == "S":
                # consume the dummies so the mapping stays consistent
                return p + "S"
            return p + "Ric[" + ",".join(lab(l) for l in rest) + "]"
        if kind == "R":
            return p + "R[" + ",".join(lab(l) for l in sl) + "]"
        if kind == "F":
            return p + "Rv[" + ",".join(lab(l) for l in sl) + "]"
        if kind in ("A", "u"):
            return p + kind
        if kind == "xi":
            return "xi[" + lab(sl[0]) + "]"
        if kind == "g":
            return "g[" + ",".join(lab(l) for l in sl) + "]"
        if kind == "xx":
            return "xi2"
        return kind

    for a in chain:
        factors.append(fmt(a))
    for tr in traces:
        factors.append("Tr(" + "*".join(fmt(a) for a in tr) + ")")
    for a in scalars:
        factors.append(fmt(a))
    for nm in xi_dummies:
        factors.append(f"xi[{nm}]")
    return sign, _collapse_powers(factors)


def _collapse_powers(factors):
    out = []
    for f in factors:
        if out and out[-1][0] == f and "[" not in f:
            out[-1][1] += 1
        else:
            out.append([f, 1])
    return [f if e == 1 else f"{f}^{e}" for f, e in out]


def to_text(p: TensorPolynomial) -> str:
    """Plain text in the term syntax; parseable by :func:`parse`."""
    terms = []
    for body in sorted(p.terms, key=_sort_key):
        c = p.terms[body]
        names = _dummy_namer(set(p.free()))
        sign, factors = _term_factors_text(body, names)
        c = c * sign
        terms.append((c, _fmt_coeff_term(c, factors)))
    return _join(terms)


_LATEX_NAMES = {"R": "R", "F": r"\mathcal{R}", "A": "A", "u": "u"}


def to_latex(p: TensorPolynomial) -> str:
    """LaTeX rendering; ``D`` denotes the symmetrized ``-i\\nabla`` prefix."""
    terms = []
    for body in sorted(p.terms, key=_sort_key):
        c = p.terms[body]
        names = _dummy_namer(set(p.free()))
        sign, factors = _term_factors_text(body, names)
        c = c * sign
        tex = [_latex_factor(f) for f in factors]
        a, b = abs(c.numerator), c.denominator
        coef = "" if (a == 1 and b == 1 and tex) else (str(a) if b == 1 else rf"\frac{{{a}}}{{{b}}}")
        terms.append((c, (coef + " " + " ".join(tex)).strip()))
    return _join(terms)


_FACTOR = re.compile(r"^(?:D\[([^\]]*)\])?([A-Za-z0-9]+)(?:\[([^\]]*)\])?(?:\^(\d+))?$")


def _latex_factor(f: str) -> str:
    if f.startswith("Tr("):
        inner = f[3:-1]
        m = re.match(r"^(.*)\)\^(\d+)$", f)
        if m:
            return _latex_factor(m.group(1) + ")") + "^{" + m.group(2) + "}"
        return r"\mathrm{Tr}(" + " ".join(_latex_factor(x) for x in inner.split("*")) + ")"
    m = _FACTOR.match(f)
    if not m:
        return f
    pre, name, idx, power = m.groups()
    if name == "S" and pre:
        labs = pre.split(",")
        if len(labs) == 2 and labs[0] == labs[1]:
            s = r"\Delta S"
            return s if not power else f"({s})^{{{power}}}"
    base = {"Rv": r"\mathcal{R}", "xi": r"\xi", "xi2": r"|\xi|^2", "Ric": r"\mathrm{Ric}"}.get(name, name)
    if idx is not None:
        idx = idx.replace(",", "")
        base = f"{base}^{{{idx}}}" if name == "xi" else f"{base}_{{{idx}}}"
    if pre:
        base = "D_{" + pre.replace(",", "") + "}" + base
    if power:
        base = f"({base})^{{{power}}}" if pre or idx else f"{base}^{{{power}}}"
    return base


# --------------------------------------------------------------------------
# JSON

def _atom_json(a):
    kind, pre, sl = a
    return {"kind": kind, "prefix": list(pre), "slots": list(sl)}


def _atom_from(d):
    return (d["kind"], tuple(d["prefix"]), tuple(d["slots"]))


def poly_to_obj(p: TensorPolynomial) -> dict:
    terms = []
    for body in sorted(p.terms, key=repr):
        sc, ch, tr = body
        terms.append({
            "coeff": _fmt_frac(p.terms[body]),
            "scalars": [_atom_json(a) for a in sc],
            "chain": [_atom_json(a) for a in ch],
            "traces": [[_atom_json(a) for a in t] for t in tr],
        })
    return {"schema": POLY_SCHEMA, "free": sorted(p.free()), "terms": terms}


def _fmt_frac(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


def poly_from_obj(obj: dict) -> TensorPolynomial:
    if obj.get("schema") != POLY_SCHEMA:
        raise ParseError(f"unsupported schema {obj.get('schema')!r}")
    items = []
    for t in obj["terms"]:
        body = (
            tuple(_atom_from(a) for a in t["scalars"]),
            tuple(_atom_from(a) for a in t["chain"]),
            tuple(tuple(_atom_from(a) for a in tr) for tr in t["traces"]),
        )
        items.append((body, Fraction(t["coeff"])))
    return TensorPolynomial.from_bodies(items)


def to_json(p: TensorPolynomial) -> str:
    return json.dumps(poly_to_obj(p), sort_keys=True, separators=(",", ":"))


def from_json(s: str) -> TensorPolynomial:
    return poly_from_obj(json.loads(s))


def symbol_to_obj(r: RationalSymbol) -> dict:
    return {
        "schema": SYMBOL_SCHEMA,
        "parts": {str(m): poly_to_obj(p) for m, p in sorted(r.parts.items()) if p},
    }


def symbol_from_obj(obj: dict) -> RationalSymbol:
    if obj.get("schema") != SYMBOL_SCHEMA:
        raise ParseError(f"unsupported schema {obj.get('schema')!r}")
    return RationalSymbol({int(m): poly_from_obj(p) for m, p in obj["parts"].items()})


def symbol_to_text(r: RationalSymbol) -> str:
    parts = []
    for m, p in sorted(r.parts.items()):
        if p:
            parts.append(f"({to_text(p)})/(lambda - xi2)^{m}")
    return " + ".join(parts) or "0"


def symbol_to_latex(r: RationalSymbol) -> str:
    parts = []
    for m, p in sorted(r.parts.items()):
        if p:
            parts.append(rf"\frac{{{to_latex(p)}}}{{(\lambda-|\xi|^2)^{{{m}}}}}")
    return " + ".join(parts) or "0"
