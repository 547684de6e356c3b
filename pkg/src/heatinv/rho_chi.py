"""The coefficients rho_{alpha,beta} and chi^{(p)}_alpha of the symbol calculus.

``R^{lam,mu} = D_(lam) D_(mu) u`` evaluated with ``D_(gamma) u -> xi_gamma``;
``rho_{alpha,beta}`` is the alternating sum over sub-multi-indices

    (-1)^{|a|+|b|} sum_{S<=alpha, T<=beta} (-1)^{|S|+|T|} xi_{alpha\\S} xi_{beta\\T} R^{S,T}

where subsets are taken over label positions (this absorbs the binomial
weights).  ``chi_alpha = rho_{alpha,<ii>} + 2 rho_{alpha,<i>} xi^i``.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

from .calculus import derive, section, section_to_xi, sym_derivative
from .expr import (
    XI,
    StructuralError,
    TensorPolynomial,
    contract,
    has_bundle,
    max_dummy,
    relabel_body,
    mul,
    split_by_xi_degree,
    xi_degree,
)

_ALPHA = tuple(f"a{i}_" for i in range(12))
_BETA = tuple(f"b{i}_" for i in range(12))


def _subset_derivatives(labels, start: TensorPolynomial, flat: bool = False) -> dict:
    """All ``D_(S) start`` for subsets ``S`` of ``labels`` keyed by bitmask.

    ``labels`` must not occur in ``start``.  Subsets of equal size are then
    relabelings of each other, so one chain ``D_(l0..l_{s-1}) start`` suffices.
    With ``flat`` monomials containing the bundle curvature are dropped as they
    appear; they form an ideal closed under ``D``, so nothing else changes.
    """
    labels = list(labels)
    n = len(labels)
    chain = [start]
    for s in range(1, n + 1):
        prev = chain[-1]
        acc = TensorPolynomial()
        for j in range(s):
            rest = labels[:j] + labels[j + 1:s]
            acc = acc + derive(labels[j], prev.relabel(dict(zip(labels[:s - 1], rest))))
        if flat:
            acc = acc.filter(lambda b: not has_bundle(b))
        chain.append(acc.scale(Fraction(1, s)))
    out = {}
    for mask in range(1 << n):
        members = [labels[j] for j in range(n) if mask >> j & 1]
        out[mask] = chain[len(members)].relabel(dict(zip(labels, members)))
    return out


def _xi_product(labels) -> TensorPolynomial:
    bodies = tuple(("xi", (), (l,)) for l in labels)
    return TensorPolynomial.from_bodies([((bodies, (), ()), 1)])


@lru_cache(maxsize=None)
def _rho_generic(a: int, b: int, flat: bool = False) -> TensorPolynomial:
    alpha = _ALPHA[:a]
    beta = _BETA[:b]
    total = TensorPolynomial()
    for tmask in range(1 << b):
        T = tuple(beta[j] for j in range(b) if tmask >> j & 1)
        Tc = tuple(beta[j] for j in range(b) if not tmask >> j & 1)
        derivs = _subset_derivatives(alpha, section(T), flat)
        for smask, val in derivs.items():
            Sc = tuple(alpha[j] for j in range(a) if not smask >> j & 1)
            sign = (-1) ** (bin(smask).count("1") + len(T))
            term = section_to_xi(val)
            if Sc or Tc:
                term = mul(_xi_product(Sc + Tc), term)
            total = total + term.scale(sign)
    return total.scale((-1) ** (a + b))


def rho(alpha, beta, flat: bool = False) -> TensorPolynomial:
    """``rho_{alpha,beta}`` with free labels ``alpha`` (first) and ``beta``.

    A label repeated in ``alpha`` + ``beta`` is contracted; ``"~xi"`` (or any
    ``~vector``) contracts the slot with a constant vector.  ``flat`` sets the
    bundle curvature to zero.
    """
    alpha = list(alpha)
    beta = list(beta)
    gen = _rho_generic(len(alpha), len(beta), flat)
    return _bind(gen, _ALPHA[: len(alpha)] + _BETA[: len(beta)], alpha + beta)


def _bind(p: TensorPolynomial, placeholders, labels) -> TensorPolynomial:
    if not p:
        return p
    mp = {}
    pairs = []
    seen = {}
    for ph, l in zip(placeholders, labels):
        if isinstance(l, str) and l.startswith("~"):
            mp[ph] = l
        elif l in seen:
            pairs.append((seen[l], ph))
        else:
            seen[l] = ph
            mp[ph] = l
    out = p
    for x, y in pairs:
        mp.pop(x, None)
        out = contract(out, x, y)
    return out.relabel(mp)


@lru_cache(maxsize=None)
def _chi_generic(a: int, flat: bool = False) -> TensorPolynomial:
    if a == 0:
        return TensorPolynomial()
    alpha = list(_ALPHA[:a])
    t1 = rho(alpha, ["c_", "c_"], flat)
    t2 = rho(alpha, [XI], flat).scale(2)
    return t1 + t2


def chi_total(alpha, flat: bool = False) -> TensorPolynomial:
    alpha = list(alpha)
    return _bind(_chi_generic(len(alpha), flat), _ALPHA[: len(alpha)], alpha)


def chi(alpha, p: int, flat: bool = False) -> TensorPolynomial:
    """Homogeneous part of ``chi_alpha`` of xi-degree ``p`` (0, 1 or 2)."""
    if p not in (0, 1, 2):
        raise StructuralError("chi has xi-degree 0, 1 or 2")
    tot = chi_total(alpha, flat)
    return tot.filter(lambda b: xi_degree(b) == p)


# --------------------------------------------------------------------------
# chi with alpha bound to xi, metric pairs and free singles

_SING = tuple(f"f{i}_" for i in range(16))
_W = tuple(f"~w{i}_" for i in range(16))
_SW = "~s_"
_STARTS = {"u": (), "xi": (XI,), "pp": (_SW, _SW)}


def _xi2_power(e: int) -> TensorPolynomial:
    return TensorPolynomial.from_bodies([(((("xx", (), ()),) * e, (), ()), 1)])


def _contract_vectors(p: TensorPolynomial, names) -> TensorPolynomial:
    """Turn each vector of ``names`` (used exactly twice per monomial) into a dummy pair."""

    def fn(body):
        d = max_dummy(body) + 1
        return [(relabel_body(body, {v: d + t for t, v in enumerate(names)}), 1)]

    return p.map_bodies(fn)


@lru_cache(maxsize=None)
def _dsym_polar(start: str, nxi: int, n2: int, n1: int, ns: int, flat: bool) -> TensorPolynomial:
    """``D_(M) D_(start) u`` with M = xi^nxi, ``~w0_ ..`` twice each (n2 of them),
    then n1 vectors once each and the free singles ``f0_ ..``.

    A pair of slots traced with the metric is the polarization of a vector
    used twice, so only vector-valued prefix slots reach the templates.
    """
    size = nxi + 2 * n2 + n1 + ns
    if size == 0:
        return section(_STARTS[start])
    twice, once = _W[:n2], _W[n2:n2 + n1]
    acc = TensorPolynomial()
    if nxi:
        acc = acc + derive(XI, _dsym_polar(start, nxi - 1, n2, n1, ns, flat)).scale(nxi)
    if n2:
        sub = _dsym_polar(start, nxi, n2 - 1, n1 + 1, ns, flat)
        for i in range(n2):
            mp = dict(zip(_W, [w for t, w in enumerate(twice) if t != i] + [twice[i]] + list(once)))
            acc = acc + derive(twice[i], sub.relabel(mp)).scale(2)
    if n1:
        sub = _dsym_polar(start, nxi, n2, n1 - 1, ns, flat)
        for i in range(n1):
            mp = dict(zip(_W, list(twice) + [w for t, w in enumerate(once) if t != i]))
            acc = acc + derive(once[i], sub.relabel(mp))
    if ns:
        sub = _dsym_polar(start, nxi, n2, n1, ns - 1, flat)
        for j in range(ns):
            rest = _SING[:j] + _SING[j + 1:ns]
            acc = acc + derive(_SING[j], sub.relabel(dict(zip(_SING[:ns - 1], rest))))
    if flat:
        acc = acc.filter(lambda b: not has_bundle(b))
    return acc.scale(Fraction(1, size))


@lru_cache(maxsize=None)
def _dsym(start: str, nxi: int, npairs: int, ns: int, flat: bool) -> TensorPolynomial:
    """``D_(M) D_(start) u`` for the multiset M = xi^nxi, npairs contracted pairs
    and the free singles ``f0_ .. f{ns-1}_``."""
    p = _dsym_polar(start, nxi, npairs, 0, ns, flat)
    names = _W[:npairs] + ((_SW,) if start == "pp" else ())
    return _contract_vectors(p, names) if names else p


def _binom(n, k):
    return factorial(n) // (factorial(k) * factorial(n - k))


def _alternating(start: str, nx: int, npairs: int, ns: int, flat: bool) -> TensorPolynomial:
    """``sum_S (-1)^|S| xi_{alpha minus S} sigma(D_(S) D_(start) u)`` for bound alpha."""
    total = TensorPolynomial()
    for k in range(nx + 1):
        for c2 in range(npairs + 1):
            for c1 in range(npairs - c2 + 1):
                c0 = npairs - c2 - c1
                w = _binom(nx, k) * factorial(npairs) // (factorial(c2) * factorial(c1) * factorial(c0))
                w *= 2 ** c1
                # a half-included pair differentiates along its partner xi
                base = section_to_xi(_dsym(start, k + c1, c2, 0, flat)) if ns == 0 else None
                for mask in range(1 << ns):
                    members = [_SING[j] for j in range(ns) if mask >> j & 1]
                    out = [_SING[j] for j in range(ns) if not mask >> j & 1]
                    if base is not None:
                        val = base
                    else:
                        val = section_to_xi(_dsym(start, k + c1, c2, len(members), flat))
                        val = val.relabel(dict(zip(_SING[:len(members)], members)))
                    e = nx - k + c0
                    if e or out:
                        fac = _xi2_power(e)
                        if out:
                            fac = mul(fac, _xi_product(out))
                        val = mul(fac, val)
                    sign = (-1) ** (k + c1 + len(members))
                    total = total + val.scale(sign * w)
    return total


@lru_cache(maxsize=None)
def chi_bound(nx: int, npairs: int, ns: int, p: int, flat: bool = False) -> TensorPolynomial:
    """``chi^{(p)}_alpha`` with alpha = (xi^nx, contracted pairs, singles).

    The singles carry the free labels ``f0_ .. f{ns-1}_``.  The beta sums of
    ``rho_{alpha,<ii>} + 2 rho_{alpha,<xi>}`` collapse to
    ``(-1)^|alpha| (R(D_(pp) u) - |xi|^2 R(u))``.
    """
    if p not in (0, 1, 2):
        raise StructuralError("chi has xi-degree 0, 1 or 2")
    a = nx + 2 * npairs + ns
    if a == 0:
        return TensorPolynomial()
    tot = _alternating("pp", nx, npairs, ns, flat)
    tot = tot - mul(_xi2_power(1), _alternating("u", nx, npairs, ns, flat))
    tot = tot.scale((-1) ** a)
    return tot.filter(lambda b: xi_degree(b) == p + nx)


def rho_parts(alpha, beta) -> dict:
    return split_by_xi_degree(rho(alpha, beta))


class CapacityError(ValueError):
    """Requested order exceeds the configured bound."""


DEFAULT_BOUND = 6


def _check_bound(total, bound):
    if bound is not None and total > bound:
        raise CapacityError(f"|alpha| + |beta| = {total} exceeds the bound {bound}")


def compose_sym_derivs(alpha, beta, bound=DEFAULT_BOUND) -> TensorPolynomial:
    """``D_(alpha) D_(beta)`` as a sum of curvature terms times ``D_(gamma) u``.

    ``u`` is the section the operator acts on; its prefix is ``gamma``.
    """
    _check_bound(len(alpha) + len(beta), bound)
    return sym_derivative(list(alpha), section(tuple(beta)))


def operator_terms(p: TensorPolynomial) -> dict:
    """Split a composed operator into ``{len(gamma): coefficient part}``."""
    out: dict = {}
    for b, c in p.terms.items():
        k = len(b[1][-1][1])
        out.setdefault(k, []).append((b, c))
    return {k: TensorPolynomial.from_bodies(v) for k, v in sorted(out.items())}


def compute_rho(alpha, beta, bound=DEFAULT_BOUND) -> TensorPolynomial:
    _check_bound(len(alpha) + len(beta), bound)
    return rho(alpha, beta)


def compute_chi(alpha, bound=DEFAULT_BOUND) -> tuple:
    """``(chi^(0), chi^(1), chi^(2))`` of ``alpha``."""
    _check_bound(len(alpha), bound)
    return tuple(chi(alpha, p) for p in range(3))
