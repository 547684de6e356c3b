"""Shared fixtures: published reference values, cached jets, comparison helpers."""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from heatinv import parse
from heatinv.expr import TensorPolynomial, polarize, symmetrize
from heatinv.identities import normal_form
from heatinv.jetlab import numeric_eval, random_metric_jet

# Reference values, written in the term syntax.  D[..] is a symmetrized
# (-i nabla) prefix, DD[..] an ordered (-i nabla) string, N[..] an ordered
# plain nabla string, Rv the bundle curvature.

RHO = {
    ("j", "k"): "-1/2*Rv[j,k]",
    ("j", "kl"): "-1/3*R[p,k,l,j]*xi[p] - 1/3*R[p,l,k,j]*xi[p] - 1/6*D[k]Rv[j,l] - 1/6*D[l]Rv[j,k]",
    ("jk", "l"): "-1/6*R[p,j,l,k]*xi[p] - 1/6*R[p,k,l,j]*xi[p] - 1/3*D[j]Rv[k,l] - 1/3*D[k]Rv[j,l]",
}

# (body, symmetrized label groups)
RHO_SYM = {
    ("j", "klm"): ("1/4*(2*D[k]R[p,l,j,m]*xi[p] - D[k,l]Rv[j,m] + R[p,k,l,j]*Rv[m,p])", ["klm"]),
    ("jkl", "m"): ("1/4*(2*D[j]R[p,k,l,m]*xi[p] - 3*D[j,k]Rv[l,m] - R[p,j,k,m]*Rv[l,p])", ["jkl"]),
    ("jk", "lm"): (
        "1/6*(5*D[j]R[p,l,k,m]*xi[p] + D[l]R[p,j,k,m]*xi[p] - 3*DD[j,l]Rv[k,m]"
        " + 2*R[p,l,m,j]*Rv[k,p] + R[p,j,k,l]*Rv[p,m] + 3*Rv[j,l]*Rv[k,m])",
        ["jk", "lm"],
    ),
}

# Valid with zero bundle curvature; compared after polarizing the symmetric groups.
RHO_FLAT = {
    ("ijk", "lm"): (
        "-1/30*(27*N[i,j]R[p,l,k,m] + 7*N[i,l]R[p,j,k,m] + 2*N[l,i]R[p,j,k,m]"
        " - 4*R[q,i,j,l]*R[p,q,k,m] - 12*R[q,i,j,l]*R[p,m,k,q] - 16*R[q,l,i,m]*R[p,j,k,q])*xi[p]",
        {"i": "~a", "j": "~a", "k": "~a", "l": "~b", "m": "~b"},
        1,
    ),
    ("ijkl", "m"): (
        "1/15*(-9*N[i,j]R[p,k,l,m] + 7*R[q,i,j,m]*R[p,k,l,q])*xi[p]",
        {"i": "~a", "j": "~a", "k": "~a", "l": "~a", "m": "~b"},
        1,
    ),
    ("ijkl", "pq"): (
        "2/3*R[r,i,j,p]*R[s,k,l,q]*xi[r]*xi[s]",
        {"i": "~a", "j": "~a", "k": "~a", "l": "~a", "p": "~b", "q": "~b"},
        2,
    ),
}

CHI = {
    ("i", 1): "2/3*Ric[i,p]*xi[p] - Rv[i,p]*xi[p]",
    ("i", 2): "0",
    ("ij", 2): "-2/3*R[i,p,j,q]*xi[p]*xi[q]",
}

# Exact up to terms linear in the bundle curvature.
CHI_MOD_LINEAR = {
    ("ij", 0): ("1/4*Rv[i,p]*Rv[j,p] + 1/4*Rv[j,p]*Rv[i,p]", None),
    ("ijk", 1): (
        "-1/30*(27*N[i,j]Ric[k,p] + 7*N[i,q]R[p,j,k,q] + 2*N[q,i]R[p,j,k,q]"
        " - 4*R[q,i,j,r]*R[p,q,k,r] - 12*R[q,i,j,r]*R[p,r,k,q] - 16*Ric[q,i]*R[p,j,k,q])*xi[p]",
        {"i": "~a", "j": "~a", "k": "~a"},
    ),
    ("ijkl", 2): (
        "2/5*(3*N[i,j]R[k,p,l,q] + 4*R[p,i,j,r]*R[r,k,l,q])*xi[p]*xi[q]",
        {"i": "~a", "j": "~a", "k": "~a", "l": "~a"},
    ),
}

R2_SYMBOL = {2: "A", 3: "2/3*Ric[p,q]*xi[p]*xi[q]"}

A4_GENERIC = (
    "d/360*(-12*D[p,p]S + 5*S^2 - 2*Ric[a,b]*Ric[a,b] + 2*R[a,b,c,e]*R[a,b,c,e])"
    " + 1/12*Tr(Rv[i,k]*Rv[i,k]) + 1/12*Tr(2*D[p,p]A + 6*A*A - 2*S*A)"
)
A4_SCALAR = "1/360*(-12*D[p,p]S + 5*S^2 - 2*Ric[a,b]*Ric[a,b] + 2*R[a,b,c,e]*R[a,b,c,e])"
CLUSTERS = {
    1: "Tr(1/6*D[p,p]A + 1/2*A*A - 1/6*S*A)",
    2: "d/540*(-18*D[p,p]S + 2*Ric[a,b]*Ric[a,b] + 3*R[a,b,c,e]*R[a,b,c,e]) + 1/12*Tr(Rv[i,k]*Rv[i,k])",
    3: "d/216*(3*S^2 - 2*Ric[a,b]*Ric[a,b])",
}


def sym_ref(text, groups) -> TensorPolynomial:
    p = parse(text)
    for g in groups:
        p = symmetrize(p, g)
    return p


def diff_nf(a: TensorPolynomial, b: TensorPolynomial, drop=None) -> TensorPolynomial:
    return normal_form(a - b, drop)


def polarized_diff(a, b, pol, drop=None):
    return normal_form(polarize(a, pol) - polarize(b, pol), drop)


# --------------------------------------------------------------------------
# jets

VECTORS = {
    "xi": [Fraction(1, 2), Fraction(-1), Fraction(2, 3), Fraction(1, 3), Fraction(-2, 5)],
    "a": [Fraction(1), Fraction(2, 3), Fraction(-1, 2), Fraction(1, 4), Fraction(3, 5)],
    "b": [Fraction(-1, 3), Fraction(1), Fraction(1, 2), Fraction(-2), Fraction(1, 7)],
}


def vectors(n):
    return {k: v[:n] for k, v in VECTORS.items()}


@lru_cache(maxsize=None)
def metric_jets(count=20, n=3, degree=5, start=0):
    return tuple(random_metric_jet(n, degree=degree, seed=start + s) for s in range(count))


@lru_cache(maxsize=None)
def bundle_jets(count=20, n=3, degree=5, start=1000, fiber=2):
    return tuple(random_metric_jet(n, degree=degree, seed=start + s, fiber_dim=fiber)
                 for s in range(count))


def evaluate(p, jet, free_order=None):
    return numeric_eval(p, jet, vectors(jet.n), free_order=free_order, allow_complex=True)


def same_value(p, q, jets) -> bool:
    free = sorted(p.free() | q.free())
    for jet in jets:
        a = evaluate(p, jet, free)
        b = evaluate(q, jet, free)
        for x, y in zip(a, b):
            if not _eq(x, y):
                return False
    return True


def _eq(x, y):
    import numpy as np

    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return bool(np.all(np.asarray(x) == np.asarray(y)))
    return x == y


def flip_xi(p: TensorPolynomial) -> TensorPolynomial:
    """``p(-xi)``."""
    from heatinv.expr import xi_degree

    return TensorPolynomial({b: c * (-1) ** xi_degree(b) for b, c in p.terms.items()}, canonical=True)
