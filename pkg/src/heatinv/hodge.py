"""The Hodge Laplacian on nu-forms.

Two independent routes lead to its heat invariants:

* exterior-algebra matrices of the Weitzenboeck potential ``A_nu`` and of the
  induced curvature, built from numeric curvature at a point (``jetlab``);
  their traces are fitted against ``S``, ``S^2``, ``|Ric|^2``, ``|R|^2``;
* the generic invariants of ``-nabla^p nabla_p + A`` with the fiber traces
  replaced by their binomial closed forms, reduced to normal form and compared
  with the closed-form coefficients ``c_1..c_4``.

Binomials vanish when ``m < 0``, ``k < 0`` or ``m < k``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .expr import StructuralError, TensorPolynomial, max_dummy
from .identities import normal_form
from .jetlab import Jet, geometry, random_metric_jet, to_fraction
from .textio import parse


def binom(m: int, k: int) -> int:
    if m < 0 or k < 0 or m < k:
        return 0
    return comb(m, k)


def form_basis(n: int, nu: int) -> list[tuple[int, ...]]:
    """Increasing ``nu``-subsets of ``range(n)``; empty outside ``0..n``."""
    if nu < 0 or nu > n:
        return []
    return list(itertools.combinations(range(n), nu))


def _wedge(idx):
    """Sort a tuple of indices: ``(sign, sorted)``, sign 0 on repetition."""
    if len(set(idx)) < len(idx):
        return 0, None
    sign = 1
    lst = list(idx)
    for i in range(len(lst)):
        for j in range(len(lst) - 1 - i):
            if lst[j] > lst[j + 1]:
                lst[j], lst[j + 1] = lst[j + 1], lst[j]
                sign = -sign
    return sign, tuple(lst)


def _matrix(basis, image):
    """``M[J, I]`` = coefficient of ``e_J`` in ``image(I)``."""
    pos = {I: k for k, I in enumerate(basis)}
    M = np.empty((len(basis), len(basis)), dtype=object)
    M.fill(Fraction(0))
    for k, I in enumerate(basis):
        for J, c in image(I):
            s, Js = _wedge(J)
            if s:
                M[pos[Js], k] += s * c
    return M


def _curvature(R):
    R = np.asarray(R, dtype=object)
    if R.size and not isinstance(R.flat[0], Fraction):
        R = np.vectorize(to_fraction, otypes=[object])(R)
    n = R.shape[0]
    Ric = np.einsum("ipjp->ij", R)
    return R, Ric, n


def build_A_parts(n: int, nu: int, R):
    """``(B, C)`` with ``A_nu = B - 2C``: ``B = sum_a A^a``, ``C = sum_{a<b} A^{ab}``."""
    R, Ric, _ = _curvature(R)
    basis = form_basis(n, nu)

    def single(I):
        for a in range(len(I)):
            for p in range(n):
                yield I[:a] + (p,) + I[a + 1:], Ric[I[a], p]

    def double(I):
        for a, b in itertools.combinations(range(len(I)), 2):
            for p in range(n):
                for q in range(n):
                    J = list(I)
                    J[a], J[b] = p, q
                    yield tuple(J), R[I[a], p, I[b], q]

    return _matrix(basis, single), _matrix(basis, double)


def build_A_nu(n: int, nu: int, R) -> np.ndarray:
    """Matrix of the Weitzenboeck potential on ``nu``-forms at a point.

    ``R`` is the Riemann tensor in an orthonormal frame.
    """
    B, C = build_A_parts(n, nu, R)
    return B - 2 * C


def build_curv_nu(n: int, nu: int, R) -> np.ndarray:
    """Induced curvature, shape ``(n, n, N, N)`` with ``N = C(n, nu)``."""
    R, _, _ = _curvature(R)
    basis = form_basis(n, nu)
    N = len(basis)
    out = np.empty((n, n, N, N), dtype=object)
    out.fill(Fraction(0))
    for i in range(n):
        for j in range(n):
            def image(I, i=i, j=j):
                for a in range(len(I)):
                    for p in range(n):
                        yield I[:a] + (p,) + I[a + 1:], -R[I[a], p, i, j]

            if N:
                out[i, j] = _matrix(basis, image)
    return out


def _tr(M):
    return sum((M[i, i] for i in range(M.shape[0])), Fraction(0))


def trace_data(n: int, nu: int, R) -> dict:
    """``Tr A``, ``Tr A^2`` and ``Tr(curv_ij curv_ij)`` from the matrices."""
    A = build_A_nu(n, nu, R)
    F = build_curv_nu(n, nu, R)
    ff = Fraction(0)
    for i in range(n):
        for j in range(n):
            if F.shape[2]:
                ff += _tr(F[i, j].dot(F[i, j]))
    return {"TrA": _tr(A), "TrA2": _tr(A.dot(A)) if A.size else Fraction(0), "TrFF": ff}


def invariant_vector(R) -> dict:
    R, Ric, _ = _curvature(R)
    S = _tr(Ric)
    return {
        "S": S,
        "S2": S * S,
        "Ric2": sum((x * x for x in Ric.flat), Fraction(0)),
        "R2": sum((x * x for x in R.flat), Fraction(0)),
    }


# --------------------------------------------------------------------------
# closed forms

def trace_closed_forms(n: int, nu: int) -> dict:
    """Coefficients of ``Tr A`` in ``S``, of ``Tr A^2`` in ``(S^2, |Ric|^2, |R|^2)``
    and of ``Tr(curv curv)`` in ``|R|^2``."""
    c1, c2 = binom(n - 2, nu - 1), binom(n - 4, nu - 2)
    return {
        "TrA": Fraction(c1),
        "TrA2": (Fraction(c2), Fraction(c1 - 4 * c2), Fraction(c2)),
        "TrFF": Fraction(-c1),
    }


@dataclass(frozen=True)
class PatodiCoefficients:
    a0: int
    a2: Fraction
    c: tuple

    def as_dict(self):
        return {"a0": self.a0, "a2": str(self.a2), "c1": self.c[0], "c2": self.c[1],
                "c3": self.c[2], "c4": self.c[3]}


def patodi_coefficients(n: int, nu: int) -> PatodiCoefficients:
    """``a_0``, the ``S`` coefficient of ``a_2`` and ``c_1..c_4`` of ``360 a_4``."""
    b0, b1, b2 = binom(n, nu), binom(n - 2, nu - 1), binom(n - 4, nu - 2)
    c = (
        -12 * (b0 - 5 * b1),
        5 * (b0 - 12 * b1 + 36 * b2),
        -2 * (b0 - 90 * b1 + 360 * b2),
        2 * (b0 - 15 * b1 + 90 * b2),
    )
    return PatodiCoefficients(b0, Fraction(b0 - 6 * b1, 6), c)


_LAP_S = "D[p,p]S"
_S2 = "S^2"
_RIC2 = "Ric[a,b]*Ric[a,b]"
_R2 = "R[a,b,c,e]*R[a,b,c,e]"


def patodi_invariant(k: int, n: int, nu: int) -> TensorPolynomial:
    """Closed-form ``a_k`` for ``k <= 4`` as a curvature polynomial."""
    pc = patodi_coefficients(n, nu)
    if k % 2:
        return TensorPolynomial()
    if k == 0:
        return TensorPolynomial.scalar(pc.a0)
    if k == 2:
        return parse("S").scale(pc.a2)
    if k == 4:
        out = TensorPolynomial()
        for ci, txt in zip(pc.c, (_LAP_S, _S2, _RIC2, _R2)):
            out = out + parse(txt).scale(Fraction(ci, 360))
        return normal_form(out)
    raise ValueError("closed forms are known for k <= 4 only")


# --------------------------------------------------------------------------
# the pipeline route

def _s_atom(pre, x, y):
    return ("R", tuple(pre), (x, y, x, y))


def _substitute_body(body, n, nu):
    sc, ch, trs = body
    if ch:
        raise StructuralError("untraced End(V) factor in a heat invariant")
    tc = trace_closed_forms(n, nu)
    d = binom(n, nu)
    coeff = Fraction(1)
    scal = []
    for a in sc:
        if a[0] == "d":
            coeff *= d
        else:
            scal.append(a)
    nxt = max_dummy(body) + 1
    options = [(tuple(scal), coeff)]

    def fresh(k):
        nonlocal nxt
        out = list(range(nxt, nxt + k))
        nxt += k
        return out

    for tr in trs:
        kinds = tuple(a[0] for a in tr)
        if kinds == ("A",):
            x, y = fresh(2)
            alts = [((_s_atom(tr[0][1], x, y),), tc["TrA"])]
        elif kinds == ("A", "A") and not tr[0][1] and not tr[1][1]:
            p, q, r, s, t, u, v, w = fresh(8)
            b1, b2, b3 = tc["TrA2"]
            alts = [
                ((_s_atom((), p, q), _s_atom((), r, s)), b1),
                ((("R", (), (t, p, u, p)), ("R", (), (t, q, u, q))), b2),
                ((("R", (), (p, q, r, s)), ("R", (), (p, q, r, s))), b3),
            ]
        elif kinds == ("F", "F") and not tr[0][1] and not tr[1][1] \
                and set(tr[0][2]) == set(tr[1][2]) and all(isinstance(l, int) for l in tr[0][2]):
            sign = 1 if tr[0][2] == tr[1][2] else -1
            p, q, r, s = fresh(4)
            alts = [((("R", (), (p, q, r, s)), ("R", (), (p, q, r, s))), sign * tc["TrFF"])]
        else:
            raise StructuralError(f"no closed form for the fiber trace {tr!r}")
        options = [(o + a, c * ca) for o, c in options for a, ca in alts]
    return [((o, (), ()), c) for o, c in options if c]


@lru_cache(maxsize=None)
def hodge_invariant(k: int, n: int, nu: int) -> TensorPolynomial:
    """``a_k`` of the Hodge Laplacian from the generic pipeline.

    The generic invariant is computed once; the fiber traces are replaced by
    their closed forms and the result is put into normal form.
    """
    from .assemble import heat_invariant
    from .parametrix import GENERIC

    if not 0 <= nu <= n:
        raise ValueError("nu must lie in 0..n")
    gen = heat_invariant(k, GENERIC)
    out = gen.map_bodies(lambda b: _substitute_body(b, n, nu))
    return normal_form(out)


def compare_paths(n: int, nu: int, ks=(0, 2, 4)) -> dict:
    """``{k: pipeline == closed form}``."""
    return {k: not normal_form(hodge_invariant(k, n, nu) - patodi_invariant(k, n, nu)) for k in ks}


# --------------------------------------------------------------------------
# numeric fits

def _solve(rows, rhs):
    """Exact solve of a consistent overdetermined system; None if singular."""
    m = len(rows[0])
    M = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    piv_rows = []
    r = 0
    for c in range(m):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            return None
        M[r], M[p] = M[p], M[r]
        M[r] = [x / M[r][c] for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        piv_rows.append(r)
        r += 1
    for i in range(r, len(M)):
        if M[i][m] != 0:
            raise ArithmeticError("inconsistent samples: the trace is not in the span")
    return tuple(M[i][m] for i in range(m))


def curvature_samples(n: int, count: int = 4, seed: int = 0) -> list:
    """Riemann tensors at the origin of random metric jets."""
    out = []
    for s in range(count):
        geo = geometry(random_metric_jet(n, degree=2, seed=seed + s))
        out.append(np.vectorize(to_fraction, otypes=[object])(geo.R.d[0]))
    return out


def fit_trace_invariants(n: int, nu: int, samples) -> dict:
    """Exact fit of the matrix traces against the curvature invariants.

    Needs ``n >= 4`` for the quadratic fit, where ``S^2``, ``|Ric|^2`` and
    ``|R|^2`` are independent; raises ``ArithmeticError`` otherwise.
    """
    rows1, rhs1, rows2, rhs2, rows3, rhs3 = [], [], [], [], [], []
    for R in samples:
        iv = invariant_vector(R)
        td = trace_data(n, nu, R)
        rows1.append([iv["S"]])
        rhs1.append(td["TrA"])
        rows2.append([iv["S2"], iv["Ric2"], iv["R2"]])
        rhs2.append(td["TrA2"])
        rows3.append([iv["R2"]])
        rhs3.append(td["TrFF"])
    a = _solve(rows1, rhs1)
    b = _solve(rows2, rhs2)
    f = _solve(rows3, rhs3)
    if a is None or b is None or f is None:
        raise ArithmeticError("curvature samples are not independent")
    return {"TrA": a[0], "TrA2": b, "TrFF": f[0]}


def extend_flat(jet: Jet) -> Jet:
    """Metric product with a flat line: one more coordinate, ``g_{nn} = 1``."""
    n = jet.n
    g = []
    for m, a in enumerate(jet.g):
        b = np.empty((n + 1,) * (2 + m), dtype=object)
        b.fill(a.flat[0] * 0)
        b[(slice(0, n),) * (2 + m)] = a
        if m == 0:
            b[n, n] = a.flat[0] * 0 + 1
        g.append(b)
    return Jet(n=n + 1, g=g)
