"""From resolvent symbols to local heat invariants.

``a_k = Tr  M[ res_lambda r_k ]`` where the residue of ``(lambda-|xi|^2)^{-m}``
against ``e^{-lambda}`` gives ``(-1)^{m-1}/(m-1)!`` times the Gaussian weight and
``M`` is the normalized Gaussian moment ``xi_{i1}..xi_{i2m} -> 2^{-m} sum over
pairings of products of deltas``.  All constants of the integral formula are
absorbed into these two rules, so ``a_0 = d``.
"""
from __future__ import annotations

from fractions import Fraction
from math import factorial

from .expr import (
    XI,
    RationalSymbol,
    StructuralError,
    TensorPolynomial,
    body_atoms,
    max_dummy,
)
from .identities import normal_form
from .parametrix import GENERIC, SCALAR, OperatorSpec, parametrix


def contour_integrate(s: RationalSymbol) -> TensorPolynomial:
    out = TensorPolynomial()
    for m, f in s.parts.items():
        if m < 1:
            raise StructuralError(f"resolvent part with exponent {m} < 1")
        out = out + f.scale(Fraction((-1) ** (m - 1), factorial(m - 1)))
    return out


def _pairings(items):
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for p in _pairings(rest):
            yield [(a, items[i])] + p


def _moment_body(body):
    sc, ch, trs = body
    nxt = max_dummy(body) + 1
    occ = []
    extra = []

    def fix(a):
        nonlocal nxt
        k, pre, sl = a
        pre2 = []
        for l in pre:
            if l == XI:
                occ.append(nxt)
                pre2.append(nxt)
                nxt += 1
            else:
                pre2.append(l)
        sl2 = []
        for l in sl:
            if l == XI:
                occ.append(nxt)
                sl2.append(nxt)
                nxt += 1
            else:
                sl2.append(l)
        return (k, tuple(pre2), tuple(sl2))

    new_sc = []
    for a in sc:
        if a[0] == "xx":
            occ.extend([nxt, nxt + 1])
            extra.append(("g", (), (nxt, nxt + 1)))
            nxt += 2
        elif a[0] == "xi":
            occ.append(a[2][0])
        else:
            new_sc.append(fix(a))
    new_ch = tuple(fix(a) for a in ch)
    new_trs = tuple(tuple(fix(a) for a in tr) for tr in trs)
    if len(occ) % 2:
        return []
    w = Fraction(1, 2 ** (len(occ) // 2))
    out = []
    for pairing in _pairings(occ):
        gs = tuple(("g", (), (a, b)) for a, b in pairing)
        out.append(((tuple(new_sc) + tuple(extra) + gs, new_ch, new_trs), w))
    return out


def gaussian_moment(p: TensorPolynomial) -> TensorPolynomial:
    """Replace monomials in xi by their normalized Gaussian averages."""
    return p.map_bodies(_moment_body)


def _trace_body(body, trace_free: bool):
    sc, ch, trs = body
    if any(a[0] == "u" for a in ch):
        raise StructuralError("cannot trace a section-valued expression")
    trs = trs + (ch,)
    if trace_free:
        for tr in trs:
            if len(tr) == 1 and tr[0][0] == "F":
                return []
    return [((sc, (), trs), 1)]


def trace_reduce(p: TensorPolynomial, spec: OperatorSpec = GENERIC) -> TensorPolynomial:
    """Fiber trace; ``Tr I = d``; single-curvature traces vanish if trace free."""
    return p.map_bodies(lambda b: _trace_body(b, spec.trace_free))


def integrate_symbol(s: RationalSymbol, spec: OperatorSpec = GENERIC, order="trace-first") -> TensorPolynomial:
    p = contour_integrate(s)
    if order == "trace-first":
        return gaussian_moment(trace_reduce(p, spec))
    return trace_reduce(gaussian_moment(p), spec)


_INV_CACHE: dict = {}


def _scalar_cleanup(p: TensorPolynomial, spec: OperatorSpec) -> TensorPolynomial:
    if spec.variant == "scalar":
        # trivial line bundle: d = 1
        def fn(b):
            sc, ch, trs = b
            return [((tuple(a for a in sc if a[0] != "d"), ch, trs), 1)]

        p = p.map_bodies(fn)
    return p


def heat_invariant(k: int, spec: OperatorSpec = GENERIC, simplify: bool = True) -> TensorPolynomial:
    """Local heat invariant ``a_k(x, P)`` as a curvature polynomial."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if spec.variant == "hodge":
        from .hodge import hodge_invariant

        return hodge_invariant(k, spec.n, spec.nu)
    key = (k, spec.variant, spec.trace_free, simplify)
    if key in _INV_CACHE:
        return _INV_CACHE[key]
    base = SCALAR if spec.variant == "scalar" else GENERIC
    rk = parametrix(base).r(k)
    out = integrate_symbol(rk, spec)
    out = _scalar_cleanup(out, spec)
    if simplify:
        out = normal_form(out)
    _INV_CACHE[key] = out
    return out


def cluster_invariants(spec: OperatorSpec = GENERIC) -> dict:
    """Integrated clusters of ``r_4``: with A / only from r_0 / the rest."""
    par = parametrix(SCALAR if spec.variant == "scalar" else GENERIC)
    clusters = {1: RationalSymbol(), 2: RationalSymbol(), 3: RationalSymbol()}
    for j, kind, _, s in par.contributions(4):
        s = s.shift(1)
        for m, f in s.parts.items():
            with_a = f.filter(lambda b: any(a[0] == "A" for a in body_atoms(b)))
            without = f.filter(lambda b: not any(a[0] == "A" for a in body_atoms(b)))
            clusters[1].add(m, with_a)
            clusters[2 if j == 0 else 3].add(m, without)
    return {c: normal_form(integrate_symbol(s, spec)) for c, s in clusters.items()}
