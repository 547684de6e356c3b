"""Exact numeric oracle: Taylor jets of a metric, a connection and a potential.

A field is stored as the list of its derivative arrays at the origin,
``T[m]`` of shape ``base + (n,)*m`` and symmetric in the trailing ``m`` axes.
Products follow the Leibniz rule; covariant derivatives are assembled from
Christoffel symbols and the connection form.  Nothing here shares code with
the symbolic engine.  Arithmetic is exact (``gmpy2.mpq`` in object arrays).

Conventions: ``[nabla_k, nabla_l] V^i = R^i_{jkl} V^j``, ``R_ijkl = g_im R^m_jkl``,
``Ric_ij = R_ipjq g^pq``, ``F_kl = d_k w_l - d_l w_k + [w_k, w_l]``.
"""
from __future__ import annotations

import itertools
import random
import string
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from gmpy2 import mpq

from .expr import TensorPolynomial

_LET = string.ascii_letters


class EvalError(ValueError):
    pass


def _zeros(shape):
    a = np.empty(shape, dtype=object)
    a.fill(mpq(0))
    return a


def _eye(n):
    a = _zeros((n, n))
    for i in range(n):
        a[i, i] = mpq(1)
    return a


def _q(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def to_fraction(x) -> Fraction:
    if isinstance(x, np.ndarray):
        x = x.item()
    x = mpq(x)
    return Fraction(int(x.numerator), int(x.denominator))


_to_fraction_arr = np.vectorize(to_fraction, otypes=[object])


def _sym_axes(a: np.ndarray, axes) -> np.ndarray:
    axes = list(axes)
    if len(axes) < 2:
        return a
    perms = list(itertools.permutations(axes))
    acc = None
    for p in perms:
        order = list(range(a.ndim))
        for src, dst in zip(axes, p):
            order[src] = dst
        t = np.transpose(a, order)
        acc = t.copy() if acc is None else acc + t
    return acc * mpq(1, len(perms))


def _sym_last(a, m):
    return _sym_axes(a, range(a.ndim - m, a.ndim))


def _sym_first(a, k):
    return _sym_axes(a, range(k))


class Field:
    """Derivative arrays ``[T(0), dT(0), d^2T(0), ...]``."""

    def __init__(self, arrays, nbase):
        self.d = list(arrays)
        self.nbase = nbase

    @property
    def order(self):
        return len(self.d) - 1

    def __add__(self, o):
        m = min(self.order, o.order)
        return Field([self.d[i] + o.d[i] for i in range(m + 1)], self.nbase)

    def __sub__(self, o):
        m = min(self.order, o.order)
        return Field([self.d[i] - o.d[i] for i in range(m + 1)], self.nbase)

    def scale(self, c):
        c = _q(c)
        return Field([a * c for a in self.d], self.nbase)

    def permute(self, perm):
        """``out[x_0..] = T[y]`` with ``y[perm[m]] = x_m`` on the base axes."""
        nb = self.nbase
        return Field([np.transpose(a, tuple(perm) + tuple(range(nb, a.ndim))) for a in self.d], nb)

    def partial(self):
        """``d_a T`` with the new index first."""
        return Field([np.moveaxis(self.d[m + 1], self.nbase, 0) for m in range(self.order)],
                     self.nbase + 1)


def product(spec: str, f: Field, g: Field, order: int | None = None) -> Field:
    """Leibniz product; ``spec`` is an einsum over base axes only."""
    ins, out = spec.split("->")
    fa, ga = ins.split(",")
    spare = [c for c in _LET if c not in spec]
    top = min(f.order, g.order) if order is None else order
    res = []
    for m in range(top + 1):
        dl = "".join(spare[:m])
        acc = None
        for s in range(m + 1):
            if s > f.order or m - s > g.order:
                continue
            t = np.einsum(f"{fa}{dl[:s]},{ga}{dl[s:]}->{out}{dl}", f.d[s], g.d[m - s], optimize=True)
            if comb(m, s) != 1:
                t = t * comb(m, s)
            acc = t if acc is None else acc + t
        res.append(_sym_last(acc, m))
    return Field(res, len(out))


# --------------------------------------------------------------------------
# jets

@dataclass
class Jet:
    """Taylor data at the origin.

    ``g[m]`` is ``d^m g_ij`` (base ``(n, n)``), ``w[m]`` is ``d^m w_i`` (base
    ``(n, d, d)``) and ``A[m]`` is ``d^m A`` (base ``(d, d)``).
    """

    n: int
    g: list
    w: list = field(default_factory=list)
    A: list = field(default_factory=list)
    fiber_dim: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def has_bundle(self) -> bool:
        return bool(self.w)


def _rand_q(rng):
    return mpq(rng.randint(-3, 3), rng.choice((1, 2, 3)))


def _random_array(shape, rng):
    a = _zeros(shape)
    for idx in np.ndindex(*shape):
        a[idx] = _rand_q(rng)
    return a


def random_metric_jet(n: int, degree: int = 4, seed: int = 0, fiber_dim: int = 0,
                      trace_free: bool = True, potential: bool = True) -> Jet:
    """Random polynomial metric ``delta + O(|x|^2)`` of the given degree.

    With ``fiber_dim > 0`` a connection form with ``w(0) = 0`` (skew matrices
    when ``trace_free``) and a symmetric potential are added.  Degree
    ``K + 2`` is enough to evaluate ``K`` derivatives of curvature.
    """
    rng = random.Random(seed)
    g = [_eye(n), _zeros((n, n, n))]
    for m in range(2, degree + 1):
        a = _random_array((n, n) + (n,) * m, rng)
        g.append(_sym_last((a + np.swapaxes(a, 0, 1)) * mpq(1, 2), m))
    jet = Jet(n=n, g=g, fiber_dim=max(fiber_dim, 1))
    if fiber_dim > 0:
        d = fiber_dim
        w = [_zeros((n, d, d))]
        for m in range(1, degree):
            a = _random_array((n, d, d) + (n,) * m, rng)
            if trace_free:
                a = (a - np.swapaxes(a, 1, 2)) * mpq(1, 2)
            w.append(_sym_last(a, m))
        A = []
        for m in range(degree - 1):
            a = _random_array((d, d) + (n,) * m, rng) if potential else _zeros((d, d) + (n,) * m)
            A.append(_sym_last((a + np.swapaxes(a, 0, 1)) * mpq(1, 2), m))
        jet.w, jet.A = w, A
    return jet


def constant_curvature_jet(n: int, K=1) -> Jet:
    """``g_ij = delta_ij - (K/3)(delta_ij |x|^2 - x_i x_j)``, exact to second order."""
    K = _q(K)
    a = _zeros((n, n, n, n))
    for i, j, p, q in itertools.product(range(n), repeat=4):
        v = 2 * (i == j and p == q) - (i == p and j == q) - (i == q and j == p)
        a[i, j, p, q] = -K * v / 3
    return Jet(n=n, g=[_eye(n), _zeros((n, n, n)), a])


def transform_jet(jet: Jet, L) -> Jet:
    """The metric jet in coordinates ``x = L y``; ``g(0)`` becomes ``L^T g L``."""
    n = jet.n
    Lq = np.array([[_q(x) for x in row] for row in L], dtype=object)
    g = []
    for a in jet.g:
        t = a
        for _ in range(a.ndim):
            # contract the leading axis; the new axis goes last so axes cycle back
            t = np.tensordot(t, Lq, axes=([0], [0]))
        g.append(t)
    return Jet(n=n, g=g)


def _matrix_inverse(a):
    n = a.shape[0]
    m = [[mpq(a[i, j]) for j in range(n)] + [mpq(int(i == j)) for j in range(n)] for i in range(n)]
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            raise ValueError("singular metric")
        m[c], m[p] = m[p], m[c]
        piv = m[c][c]
        m[c] = [x / piv for x in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return np.array([[m[i][n + j] for j in range(n)] for i in range(n)], dtype=object)


def _inverse_metric(g: Field) -> Field:
    inv0 = _matrix_inverse(g.d[0])
    out = [inv0]
    for m in range(1, g.order + 1):
        lets = "cdefgh"[:m]
        acc = None
        for s in range(1, m + 1):
            t = np.einsum(f"ij{lets[:s]},jk{lets[s:]}->ik{lets}", g.d[s], out[m - s],
                          optimize=True) * comb(m, s)
            acc = t if acc is None else acc + t
        out.append(-np.einsum("li,ik...->lk...", inv0, _sym_last(acc, m), optimize=True))
    return Field(out, 2)


# --------------------------------------------------------------------------
# geometry

class Geometry:
    """Curvature and its covariant derivatives at the origin."""

    def __init__(self, jet: Jet):
        self.jet = jet
        self.n = jet.n
        self.fiber_dim = jet.fiber_dim
        self.has_bundle = jet.has_bundle
        g = Field(jet.g, 2)
        self.ginv = _inverse_metric(g)
        dg = g.partial()
        # t[i,j,l] = d_i g_jl + d_j g_il - d_l g_ij
        t = dg + dg.permute((1, 0, 2)) - dg.permute((1, 2, 0))
        self.gamma = product("kl,ijl->kij", self.ginv, t).scale(mpq(1, 2))
        G = self.gamma
        dG = G.partial()
        t1 = dG.permute((1, 3, 0, 2))  # d_k G^i_lj at (i, j, k, l)
        t2 = dG.permute((1, 3, 2, 0))  # d_l G^i_kj
        Rup = t1 - t2 + product("ikm,mlj->ijkl", G, G) - product("ilm,mkj->ijkl", G, G)
        self.R = product("im,mjkl->ijkl", g, Rup)
        self._tower = {"R": [self.R]}
        self._sym = {}
        if self.has_bundle:
            w = Field(jet.w, 3)
            dw = w.partial()
            ww = product("krs,lsc->klrc", w, w)
            self.w = w
            self.F = dw - dw.permute((1, 0, 2, 3)) + ww - ww.permute((1, 0, 2, 3))
            self._tower["F"] = [self.F]
            self._tower["A"] = [Field(jet.A, 2)]

    def nabla(self, T: Field, nt: int, endo: bool) -> Field:
        """Covariant derivative; the first ``nt`` base axes are form slots."""
        out = T.partial()
        lets = "abcdefghijkl"
        tl = lets[1:1 + T.nbase]
        for s in range(nt):
            tin = tl[:s] + "z" + tl[s + 1:]
            out = out - product(f"za{tl[s]},{tin}->a{tl}", self.gamma, T, order=out.order)
        if endo:
            tb = tl[:-2]
            out = out + product(f"amo,{tb}oq->a{tb}mq", self.w, T, order=out.order)
            out = out - product(f"{tb}mo,aoq->a{tb}mq", T, self.w, order=out.order)
        return out

    def nabla_k(self, kind: str, k: int) -> np.ndarray:
        """``nabla^k X`` at the origin, outermost derivative index first."""
        if kind not in self._tower:
            raise EvalError("jet has no bundle data")
        tower = self._tower[kind]
        nt = {"R": 4, "F": 2, "A": 0}[kind]
        while len(tower) <= k:
            j = len(tower)
            if tower[-1].order < 1:
                raise EvalError(f"jet degree too low for nabla^{k} {kind}")
            tower.append(self.nabla(tower[-1], nt + j - 1, kind != "R"))
        return tower[k].d[0]

    def sym_nabla(self, kind: str, k: int) -> np.ndarray:
        key = (kind, k)
        if key not in self._sym:
            self._sym[key] = _sym_first(self.nabla_k(kind, k), k)
        return self._sym[key]

    def ricci(self):
        return np.einsum("ipjq,pq->ij", self.R.d[0], self.ginv.d[0], optimize=True)

    def invariants(self) -> dict:
        """``S``, ``|Ric|^2`` and ``|R|^2`` with explicit inverse metrics."""
        gi = self.ginv.d[0]
        R = self.R.d[0]
        Ric = self.ricci()
        S = np.einsum("ij,ij->", Ric, gi, optimize=True)
        ric2 = np.einsum("ij,kl,ik,jl->", Ric, Ric, gi, gi, optimize=True)
        r2 = np.einsum("abcd,efgh,ae,bf,cg,dh->", R, R, gi, gi, gi, gi, optimize=True)
        return {"S": to_fraction(S), "Ric2": to_fraction(ric2), "R2": to_fraction(r2)}


def geometry(jet: Jet) -> Geometry:
    geo = jet._cache.get("geometry")
    if geo is None:
        geo = jet._cache["geometry"] = Geometry(jet)
    return geo


def evaluate_curvature(jet: Jet) -> dict:
    """Riemann and Ricci arrays plus the quadratic scalars, all exact."""
    geo = geometry(jet)
    return {"R": _to_fraction_arr(geo.R.d[0]), "Ric": _to_fraction_arr(geo.ricci()),
            **geo.invariants()}


# --------------------------------------------------------------------------
# evaluation of tensor polynomials

def _vec(vectors, name):
    if name not in vectors:
        raise EvalError(f"no value for vector {name!r}")
    return np.array([_q(x) for x in vectors[name]], dtype=object)


def _eval_body(body, geo: Geometry, vectors, free):
    """Value of one monomial as ``(re, im)``; one of them is None."""
    n, d = geo.n, geo.fiber_dim
    lets = iter(_LET)
    labmap = {}
    ops, subs = [], []
    scalar = mpq(1)
    nder = 0

    def letter(l):
        if isinstance(l, str) and l.startswith("~"):
            c = next(lets)
            ops.append(_vec(vectors, l[1:]))
            subs.append(c)
            return c
        if l not in labmap:
            labmap[l] = next(lets)
        return labmap[l]

    def put(atom, row="", col=""):
        nonlocal scalar, nder
        kind, pre, sl = atom
        if kind == "n":
            scalar *= n
        elif kind == "d":
            scalar *= d
        elif kind == "xx":
            scalar *= sum(x * x for x in _vec(vectors, "xi"))
        elif kind == "xi":
            ops.append(_vec(vectors, "xi"))
            subs.append(letter(sl[0]))
        elif kind == "g":
            ops.append(_eye(n))
            subs.append(letter(sl[0]) + letter(sl[1]))
        elif kind in ("R", "F", "A"):
            nder += len(pre)
            # letter() may push a vector operand, so name the slots first
            s = "".join(letter(l) for l in pre + sl) + row + col
            ops.append(geo.sym_nabla(kind, len(pre)))
            subs.append(s)
        else:
            raise EvalError(f"cannot evaluate atom kind {kind!r}")

    sc, ch, trs = body
    for a in sc:
        put(a)
    endo = ""
    if ch:
        first = prev = next(lets)
        for a in ch:
            nxt = next(lets)
            put(a, prev, nxt)
            prev = nxt
        endo = first + prev
    for tr in trs:
        first = prev = next(lets)
        for i, a in enumerate(tr):
            nxt = first if i == len(tr) - 1 else next(lets)
            put(a, prev, nxt)
            prev = nxt
    out = "".join(labmap[l] for l in free) + endo
    val = np.einsum(",".join(subs) + "->" + out, *ops, optimize=True) if ops else mpq(1)
    val = val * scalar
    # D = -i nabla
    ph = nder % 4
    if ph == 0:
        return val, None
    if ph == 2:
        return -val, None
    return None, (-val if ph == 1 else val)


def numeric_eval(p: TensorPolynomial, jet: Jet, vectors: dict | None = None,
                 free_order=None, allow_complex: bool = False):
    """Exact value of ``p`` on ``jet``.

    ``vectors`` maps constant vector names (``"xi"`` and polarization tokens
    without the ``~``) to coordinate lists.  Free indices are laid out in
    ``free_order`` (sorted by default).  End(V)-valued polynomials evaluate to
    matrices; scalar terms in them stand for multiples of the identity.
    Returns Fractions, or ``(re, im)`` when ``allow_complex``.
    """
    geo = geometry(jet)
    vectors = vectors or {}
    free = sorted(p.free()) if free_order is None else list(free_order)
    endo = any(b[1] for b in p.terms)
    shape = (geo.n,) * len(free) + ((geo.fiber_dim,) * 2 if endo else ())
    re = _zeros(shape) if shape else mpq(0)
    im = _zeros(shape) if shape else mpq(0)
    eye = _eye(geo.fiber_dim)
    for body, c in p.terms.items():
        r, i = _eval_body(body, geo, vectors, free)
        v = r if r is not None else i
        if endo and not body[1]:
            v = np.multiply.outer(v, eye)
        if r is not None:
            re = re + v * _q(c)
        else:
            im = im + v * _q(c)

    def conv(x):
        return _to_fraction_arr(x) if isinstance(x, np.ndarray) else to_fraction(x)

    if allow_complex:
        return conv(re), conv(im)
    if (any(x != 0 for x in im.flat) if isinstance(im, np.ndarray) else im != 0):
        raise EvalError("polynomial has a non-zero imaginary part on this jet")
    return conv(re)


def _max_abs(a) -> Fraction:
    vals = [abs(to_fraction(x)) for x in np.asarray(a, dtype=object).flat]
    return max(vals, default=Fraction(0))


def identity_residuals(jet: Jet) -> dict:
    """Largest violation of each curvature identity at the origin (all zero)."""
    geo = geometry(jet)
    R = geo.R.d[0]
    out = {
        "antisym_first_pair": _max_abs(R + np.transpose(R, (1, 0, 2, 3))),
        "antisym_last_pair": _max_abs(R + np.transpose(R, (0, 1, 3, 2))),
        "pair_exchange": _max_abs(R - np.transpose(R, (2, 3, 0, 1))),
        "first_bianchi": _max_abs(R + np.transpose(R, (0, 2, 3, 1)) + np.transpose(R, (0, 3, 1, 2))),
    }
    Ric = geo.ricci()
    out["ricci_symmetric"] = _max_abs(Ric - Ric.T)
    r2 = np.einsum("ijkl,ijkl->", R, R)
    out["quadratic_cyclic"] = _max_abs(np.einsum("ijkl,ikjl->", R, R) - r2 * mpq(1, 2))
    if geo.R.order >= 1:
        dR = geo.nabla_k("R", 1)  # (e, a, b, c, d)
        cyc = dR + np.transpose(dR, (2, 0, 1, 3, 4)) + np.transpose(dR, (1, 2, 0, 3, 4))
        out["second_bianchi"] = _max_abs(cyc)
        dRic = np.einsum("eipjp->eij", dR)
        dS = np.einsum("eii->e", dRic)
        out["contracted_bianchi"] = _max_abs(np.einsum("iij->j", dRic) - dS * mpq(1, 2))
    if geo.R.order >= 2:
        ddRic = np.einsum("abipjp->abij", geo.nabla_k("R", 2))
        lhs = np.einsum("ijij->", ddRic)
        out["double_contracted_bianchi"] = _max_abs(lhs - np.einsum("ppii->", ddRic) * mpq(1, 2))
    return out


def gauge_residuals(jet: Jet, L) -> dict:
    """Change of the scalar invariants under the frame change ``x = L y``."""
    a = geometry(Jet(n=jet.n, g=jet.g)).invariants()
    b = geometry(transform_jet(jet, L)).invariants()
    return {k: abs(a[k] - b[k]) for k in a}
