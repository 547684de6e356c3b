"""Covariant differentiation on symmetrized derivative prefixes.

Every atom carries a symmetrized prefix ``D_(pi) X`` with ``D = -i nabla``.
Differentiating once more uses

    D_e D_(pi) X = D_(e pi) X + C(e, pi, X)
    C(e, pi, X)  = 1/(k+1) sum_j [ D_{pi_j} C(e, pi\\j, X) + [D_e, D_{pi_j}] D_(pi\\j) X ]

where ``k = |pi|``.  The commutator ``[D_e, D_a] = -[nabla_e, nabla_a]`` acts on
every index of its argument through the Riemann tensor and on End(V) values
through the bundle curvature ``F``:

    [D_e, D_a] Z = -F_ea Z + Z F_ea + sum_s R_{p s e a} Z[s -> p]

(the section placeholder ``u`` only sees the left action).  ``C`` only depends on
the kind of ``X`` and on ``k``, so it is computed once with placeholder labels.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

from .expr import (
    DIFFERENTIABLE,
    SLOTS,
    RewriteError,
    StructuralError,
    TensorPolynomial,
    body_labels,
    canonicalize,
    contract,
    is_vec,
    max_dummy,
    relabel_body,
    shift_dummies,
)

_E = "E_"


def _pre_ph(k):
    return tuple(f"P{i}_" for i in range(k))


def _base_ph(kind):
    return tuple(f"B{i}_" for i in range(SLOTS[kind]))


def _single(kind, prefix, slots):
    a = (kind, tuple(prefix), tuple(slots))
    if kind == "R":
        return ((a,), (), ())
    return ((), (a,), ())


def _commutator(e, a, kind, prefix, slots) -> list:
    """Raw terms of ``[D_e, D_a] D_(prefix) X`` as ``(coeff, body)``."""
    z = (kind, tuple(prefix), tuple(slots))
    labels = list(prefix) + list(slots)
    top = max([l for l in labels + [e, a] if isinstance(l, int)], default=-1) + 1
    out = []
    if kind in ("F", "A", "u"):
        f = ("F", (), (e, a))
        out.append((-1, ((), (f, z), ())))
        if kind != "u":
            out.append((1, ((), (z, f), ())))
    p = top
    for i, s in enumerate(prefix):
        pre2 = tuple(prefix[:i]) + (p,) + tuple(prefix[i + 1:])
        r = ("R", (), (p, s, e, a))
        out.append((1, _with_scalar(_single(kind, pre2, slots), r)))
    for i, s in enumerate(slots):
        sl2 = tuple(slots[:i]) + (p,) + tuple(slots[i + 1:])
        r = ("R", (), (p, s, e, a))
        out.append((1, _with_scalar(_single(kind, prefix, sl2), r)))
    return out


def _with_scalar(body, r):
    sc, ch, tr = body
    return ((r,) + sc, ch, tr)


def _vec_ph(i):
    return f"~v{i}_"


@lru_cache(maxsize=None)
def correction(kind: str, k: int, vecs: tuple = (), evec: int | None = None) -> TensorPolynomial:
    """``C(e, pi, X)`` for an atom of ``kind`` with ``k`` prefix slots.

    ``vecs[i]`` prefix slots hold the constant vector ``~v{i}_``; the rest are
    ``P0_, P1_, ...``.  ``e`` is ``E_``, or ``~v{evec}_`` when ``evec`` is set.
    Equal prefix entries give equal summands, so each vector is handled once
    with its multiplicity.
    """
    if kind not in DIFFERENTIABLE:
        raise RewriteError(f"{kind} is not differentiable")
    nplain = k - sum(vecs)
    pre = _pre_ph(nplain)
    vs = tuple(l for i, c in enumerate(vecs) for l in (_vec_ph(i),) * c)
    e = _E if evec is None else _vec_ph(evec)
    base = _base_ph(kind)
    out = TensorPolynomial()
    for j in range(nplain):
        rest = pre[:j] + pre[j + 1:]
        sub = correction(kind, k - 1, vecs, evec)
        if sub:
            mp = {f"P{i}_": rest[i] for i in range(len(rest))}
            out = out + derive(pre[j], sub.relabel(mp))
        out = out + TensorPolynomial.from_bodies(
            (b, c) for c, b in _commutator(e, pre[j], kind, rest + vs, base)
        )
    for i, c in enumerate(vecs):
        if not c:
            continue
        fewer = vecs[:i] + (c - 1,) + vecs[i + 1:]
        v = _vec_ph(i)
        sub = correction(kind, k - 1, fewer, evec)
        part = derive(v, sub) if sub else TensorPolynomial()
        left = tuple(l for t, n in enumerate(fewer) for l in (_vec_ph(t),) * n)
        part = part + TensorPolynomial.from_bodies(
            (b, cf) for cf, b in _commutator(e, v, kind, pre + left, base)
        )
        out = out + part.scale(c)
    return out.scale(Fraction(1, k + 1))


def _template_key(e, pre):
    """Vector multiplicities of ``pre`` (with ``e`` first when it is a vector)."""
    names = []
    if is_vec(e):
        names.append(e)
    counts = {}
    for l in pre:
        if is_vec(l):
            counts[l] = counts.get(l, 0) + 1
    rest = sorted((l for l in counts if l != e), key=lambda l: (-counts[l], l))
    names += rest
    vecs = tuple(counts.get(l, 0) for l in names)
    evec = 0 if is_vec(e) else None
    return names, vecs, evec


def _extend_terms(e, atom_, off):
    """Terms of ``D_e atom`` as (coeff, extra_scalars, replacement)."""
    kind, pre, sl = atom_
    lead = (kind, pre + (e,), sl)
    res = [(Fraction(1), (), (lead,))]
    k = len(pre)
    if k == 0:
        return res
    names, vecs, evec = _template_key(e, pre)
    tmpl = correction(kind, k, vecs, evec)
    if not tmpl:
        return res
    mp = {_vec_ph(i): l for i, l in enumerate(names)}
    if evec is None:
        mp[_E] = e
    mp.update({f"P{i}_": l for i, l in enumerate(l for l in pre if not is_vec(l))})
    mp.update({f"B{i}_": sl[i] for i in range(len(sl))})
    for body, c in tmpl.terms.items():
        b = relabel_body(shift_dummies(body, off), mp)
        sc, ch, _ = b
        if kind == "R":
            res.append((c, (), sc))
        else:
            res.append((c, sc, ch))
    return res


def _derive_body(e, body):
    """Leibniz rule on one monomial; yields raw (body, coeff)."""
    sc, ch, trs = body
    off = max(max_dummy(body), e if isinstance(e, int) else -1) + 1
    for i, a in enumerate(sc):
        if a[0] != "R":
            continue
        for c, extra, repl in _extend_terms(e, a, off):
            yield (sc[:i] + sc[i + 1:] + extra + repl, ch, trs), c
    for i, a in enumerate(ch):
        if a[0] not in DIFFERENTIABLE:
            continue
        for c, extra, repl in _extend_terms(e, a, off):
            yield (sc + extra, ch[:i] + repl + ch[i + 1:], trs), c
    for t, tr in enumerate(trs):
        for i, a in enumerate(tr):
            for c, extra, repl in _extend_terms(e, a, off):
                ntr = tr[:i] + repl + tr[i + 1:]
                yield (sc + extra, ch, trs[:t] + (ntr,) + trs[t + 1:]), c


def derive(e, p: TensorPolynomial) -> TensorPolynomial:
    """Apply ``D_e = -i nabla_e`` (Leibniz rule, symmetrized output)."""
    out = TensorPolynomial()
    for body, c in p.terms.items():
        for nb, nc in _derive_body(e, body):
            out._add_raw(nb, c * nc)
    return out


covariant_derivative = derive


def apply_D(labels, p: TensorPolynomial) -> TensorPolynomial:
    """Ordered string ``D_{l1} D_{l2} ... D_{lk} p`` (innermost applied first)."""
    for l in reversed(list(labels)):
        p = derive(l, p)
    return p


def sym_derivative(labels, p: TensorPolynomial) -> TensorPolynomial:
    """Symmetrized ``D_(labels) p`` computed by a subset recursion."""
    labels = list(labels)
    n = len(labels)
    layer = {0: p}
    for size in range(1, n + 1):
        new = {}
        for mask in range(1 << n):
            if bin(mask).count("1") != size:
                continue
            acc = TensorPolynomial()
            for j in range(n):
                if mask >> j & 1:
                    acc = acc + derive(labels[j], layer[mask ^ (1 << j)])
            new[mask] = acc.scale(Fraction(1, size))
        layer = new
    return layer[(1 << n) - 1]


def apply_plain_nabla(labels, p: TensorPolynomial) -> TensorPolynomial:
    """``nabla_{l1} ... nabla_{lk} p`` for even ``k`` (``nabla = i D``)."""
    return apply_ordered(labels, p, plain=True)


def apply_ordered(labels, p: TensorPolynomial, plain: bool = False) -> TensorPolynomial:
    """Ordered derivative string, outermost label first.

    Labels repeated among ``labels`` or shared with the free indices of ``p``
    are contracted.  With ``plain`` the string is of ``nabla`` (``k`` even).
    """
    labels = list(labels)
    k = len(labels)
    if plain and k % 2:
        raise RewriteError("odd number of plain derivatives has an imaginary D-form")
    free = p.free()
    tmp = {}
    new_labels = []
    pairs = []
    for i, l in enumerate(labels):
        t = f"{l}__{i}"
        new_labels.append(t)
        if l in tmp:
            pairs.append((tmp.pop(l), t))
        else:
            tmp[l] = t
    out = apply_D(new_labels, p)
    if plain:
        out = out.scale((-1) ** (k // 2))
    for a, b in pairs:
        out = contract(out, a, b)
    back = {}
    for l, t in tmp.items():
        if l in free:
            m = f"{l}__x"
            out = contract(out.relabel({l: m}), m, t)
        else:
            back[t] = l
    return out.relabel(back) if back else out


def section(prefix=()) -> TensorPolynomial:
    """The placeholder ``D_(prefix) u`` for a section of V."""
    return TensorPolynomial.from_bodies([(((), (("u", tuple(prefix), ()),), ()), 1)])


def section_to_xi(p: TensorPolynomial) -> TensorPolynomial:
    """Replace ``D_(gamma) u`` by ``xi_gamma`` (product of xi's over gamma)."""

    def fn(body):
        sc, ch, tr = body
        if not ch or ch[-1][0] != "u":
            raise StructuralError("expected a section-valued monomial")
        u = ch[-1]
        xs = tuple(("xi", (), (l,)) for l in u[1])
        return [((sc + xs, ch[:-1], tr), 1)]

    return p.map_bodies(fn)
