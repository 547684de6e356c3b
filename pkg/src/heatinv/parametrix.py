"""Resolvent symbols r_k as finite sums f_m / (lambda - |xi|^2)^m.

Recurrence (k >= 2), with End(V) factors multiplied on the right::

    r_k = (lambda - |xi|^2)^{-1} sum_{j <= k-2} [
              sum_{|a| = k-j-2} (1/a!) dv^a r_j . D^a A
            + sum_{p=0..2} sum_{|a| = k-j-p} (1/a!) dv^a r_j . chi^{(2-p)}_a ]

Multi-index sums run over ordered tuples of dummy labels weighted by 1/m!,
which equals the multiset sum with 1/a! weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .expr import (
    XI,
    RationalSymbol,
    StructuralError,
    TensorPolynomial,
    mul,
)
from .rho_chi import _SING, chi_bound


@dataclass(frozen=True)
class OperatorSpec:
    """Which operator ``P = -nabla^p nabla_p + A`` the pipeline runs on.

    ``variant`` is ``"generic"``, ``"scalar"`` (trivial line bundle, ``A = 0``)
    or ``"hodge"`` (forms of degree ``nu`` in dimension ``n``).
    """

    variant: str = "generic"
    trace_free: bool = True
    n: int | None = None
    nu: int | None = None

    def __post_init__(self):
        if self.variant not in ("generic", "scalar", "hodge"):
            raise ValueError(f"unknown operator variant {self.variant!r}")
        if self.variant == "hodge":
            if self.n is None or self.nu is None:
                raise ValueError("hodge operator needs n and nu")
            if not 0 <= self.nu <= self.n:
                raise ValueError("nu must lie in 0..n")
            if not self.trace_free:
                raise ValueError("the Hodge Laplacian always has a trace free curvature")

    @property
    def has_potential(self) -> bool:
        return self.variant != "scalar"

    @property
    def has_bundle_curvature(self) -> bool:
        return self.variant != "scalar"


GENERIC = OperatorSpec("generic")
SCALAR = OperatorSpec("scalar")


def hodge(n: int, nu: int) -> OperatorSpec:
    return OperatorSpec("hodge", True, n, nu)


# --------------------------------------------------------------------------
# vertical derivatives

def _xi_derivative_body(body, label):
    """d/dxi_label of one monomial, as raw (body, coeff) pairs."""
    sc, ch, trs = body
    out = []
    lists = [("s", sc), ("c", ch)] + [(("t", t), tr) for t, tr in enumerate(trs)]

    def rebuild(which, new_list, extra=()):
        nsc, nch, ntrs = sc, ch, trs
        if which == "s":
            nsc = new_list
        elif which == "c":
            nch = new_list
        else:
            t = which[1]
            ntrs = trs[:t] + (new_list,) + trs[t + 1:]
        return (nsc + tuple(extra), nch, ntrs)

    for which, lst in lists:
        for i, (k, pre, sl) in enumerate(lst):
            if k == "xx":
                new = lst[:i] + lst[i + 1:]
                out.append((rebuild(which, new, (("xi", (), (label,)),)), 2))
                continue
            if k == "xi":
                if sl[0] == XI:
                    raise StructuralError("uncanonical xi atom")
                new = lst[:i] + lst[i + 1:]
                out.append((rebuild(which, new, (("g", (), (sl[0], label)),)), 1))
                continue
            for j, l in enumerate(pre):
                if l == XI:
                    na = (k, pre[:j] + (label,) + pre[j + 1:], sl)
                    out.append((rebuild(which, lst[:i] + (na,) + lst[i + 1:]), 1))
            for j, l in enumerate(sl):
                if l == XI:
                    na = (k, pre, sl[:j] + (label,) + sl[j + 1:])
                    out.append((rebuild(which, lst[:i] + (na,) + lst[i + 1:]), 1))
    return out


def xi_derivative(p: TensorPolynomial, label) -> TensorPolynomial:
    return p.map_bodies(lambda b: _xi_derivative_body(b, label))


def _xi_vector(label) -> TensorPolynomial:
    return TensorPolynomial.from_bodies([(((("xi", (), (label,)),), (), ()), 1)])


def vertical_derivative(s: RationalSymbol, labels) -> RationalSymbol:
    """``dv^{labels} s``; each label becomes a free index of the result."""
    for l in labels:
        out = RationalSymbol()
        for m, f in s.parts.items():
            out.add(m, xi_derivative(f, l))
            out.add(m + 1, mul(f, _xi_vector(l)).scale(2 * m))
        s = out
    return s


# --------------------------------------------------------------------------
# the recurrence

def _potential(labels) -> TensorPolynomial:
    a = ("A", tuple(labels), ())
    return TensorPolynomial.from_bodies([(((), (a,), ()), 1)])


def _dummies(m):
    return [f"x{i}_" for i in range(m)]


def _times_chi(s: RationalSymbol, labels, p: int, spec: OperatorSpec, c) -> RationalSymbol:
    """``s . chi^{(p)}_labels``, binding each label to what ``s`` contracts it with.

    A label on an ``xi`` atom becomes a xi slot of chi and two labels on one
    metric atom a contracted pair; the rest stay free.  Only chi for these
    patterns is ever built.
    """
    flat = not spec.has_bundle_curvature
    labset = set(labels)
    out = RationalSymbol()
    for m, f in s.parts.items():
        groups: dict = {}
        for (sc, ch, trs), coeff in f.terms.items():
            nx = npairs = 0
            bound = set()
            keep = []
            for a in sc:
                if a[0] == "xi" and a[2][0] in labset:
                    nx += 1
                    bound.add(a[2][0])
                elif a[0] == "g" and a[2][0] in labset and a[2][1] in labset:
                    npairs += 1
                    bound.update(a[2])
                else:
                    keep.append(a)
            singles = tuple(l for l in labels if l not in bound)
            groups.setdefault((nx, npairs, singles), []).append(((tuple(keep), ch, trs), coeff))
        acc = TensorPolynomial()
        for (nx, npairs, singles), bodies in groups.items():
            q = chi_bound(nx, npairs, len(singles), p, flat)
            if not q:
                continue
            q = q.relabel(dict(zip(_SING, singles)))
            acc = acc + mul(TensorPolynomial.from_bodies(bodies), q)
        if acc:
            out.add(m, acc.scale(c))
    return out


def _times(s: RationalSymbol, q: TensorPolynomial, c) -> RationalSymbol:
    out = RationalSymbol()
    if not q:
        return out
    for m, f in s.parts.items():
        out.add(m, mul(f, q).scale(c))
    return out


class Parametrix:
    """Memoized r_0, r_1, ... for one operator."""

    def __init__(self, spec: OperatorSpec = GENERIC):
        self.spec = spec
        self.history: list[RationalSymbol] = []

    def r(self, k: int) -> RationalSymbol:
        while len(self.history) <= k:
            self.history.append(self._next(len(self.history)))
        return self.history[k]

    def contributions(self, k: int):
        """Yield ``(j, kind, m, symbol)`` before the final 1/(lambda-|xi|^2) shift.

        ``kind`` is ``"A"`` or ``p`` in 0..2.
        """
        for j in range(0, k - 1):
            rj = self.r(j)
            if rj.is_zero():
                continue
            m = k - j - 2
            if self.spec.has_potential:
                labs = _dummies(m)
                v = vertical_derivative(rj, labs)
                yield j, "A", m, _times(v, _potential(labs), Fraction(1, factorial(m)))
            for p in range(3):
                m = k - j - p
                if m == 0:
                    continue
                labs = _dummies(m)
                v = vertical_derivative(rj, labs)
                yield j, p, m, _times_chi(v, labs, 2 - p, self.spec, Fraction(1, factorial(m)))

    def _next(self, k: int) -> RationalSymbol:
        if k == 0:
            return RationalSymbol({1: TensorPolynomial.one()})
        if k == 1:
            return RationalSymbol()
        acc = RationalSymbol()
        for _, _, _, s in self.contributions(k):
            acc = acc + s
        return acc.shift(1)


_CACHE: dict = {}


def parametrix(spec: OperatorSpec = GENERIC) -> Parametrix:
    """Shared memo; the Hodge operator reuses the generic symbols."""
    key = "scalar" if spec.variant == "scalar" else "generic"
    if key not in _CACHE:
        _CACHE[key] = Parametrix(SCALAR if key == "scalar" else GENERIC)
    return _CACHE[key]


def r_k(k: int, spec: OperatorSpec = GENERIC) -> RationalSymbol:
    """The homogeneous resolvent symbol ``r_k`` for ``spec``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return parametrix(spec).r(k)


def r_next(k: int, history, spec: OperatorSpec = GENERIC) -> RationalSymbol:
    """One step of the recurrence from an explicit history ``r_0..r_{k-1}``."""
    history = list(history)
    if len(history) < k:
        raise StructuralError(f"r_{k} needs r_0..r_{k - 1}; got {len(history)} entries")
    par = Parametrix(spec)
    par.history = history[:k]
    return par._next(k)
