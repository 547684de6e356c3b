"""Normal forms modulo the Bianchi identities.

Relations are generated symbolically, starting from the monomials of the input
and closing under:

* the cyclic identity ``R_abcd + R_acdb + R_adbc = 0``;
* the differential identity ``D_(pi') [D_e R_abcd + D_a R_becd + D_b R_eacd] = 0``
  on either pair, rewritten in symmetrized prefixes;
* ``D_(pi') [D_e F_ab + D_a F_be + D_b F_ea] = 0`` for the bundle curvature.

The span of these relations is then row reduced over Q.  The pivot of a
relation is its largest monomial for :func:`term_key`, so derivatives contracted
into base slots and non-canonical contraction patterns are eliminated first.
The reduced remainder is unique, hence two polynomials agree modulo the
identities iff their normal forms coincide.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .calculus import sym_derivative
from .expr import (
    TensorPolynomial,
    canonicalize,
    max_dummy,
    relabel_body,
    shift_dummies,
)

_E = "E_"


def _ph(prefix_len):
    return tuple(f"P{i}_" for i in range(prefix_len))


@lru_cache(maxsize=None)
def _bianchi2_template(kind: str, k: int, variant: int) -> TensorPolynomial:
    """``D_(P0..P{k-1})`` of the cyclic sum with placeholders E_, B0_.."""
    pre = _ph(k)
    if kind == "R":
        b = ("B0_", "B1_", "B2_", "B3_") if variant == 0 else ("B2_", "B3_", "B0_", "B1_")
        x, y, c, d = b
        atoms = [
            ("R", (_E,), (x, y, c, d)),
            ("R", (x,), (y, _E, c, d)),
            ("R", (y,), (_E, x, c, d)),
        ]
        bodies = [((a,), (), ()) for a in atoms]
    else:
        x, y = "B0_", "B1_"
        atoms = [
            ("F", (_E,), (x, y)),
            ("F", (x,), (y, _E)),
            ("F", (y,), (_E, x)),
        ]
        bodies = [((), (a,), ()) for a in atoms]
    base = TensorPolynomial.from_bodies((bd, 1) for bd in bodies)
    return sym_derivative(pre, base)


def _splice(body, where, tmpl: TensorPolynomial, mapping):
    """Replace the atom at ``where`` by each term of ``tmpl`` (raw bodies)."""
    sc, ch, trs = body
    off = max_dummy(body) + 1
    out = []
    for tb, c in tmpl.terms.items():
        tsc, tch, _ = relabel_body(shift_dummies(tb, off), mapping)
        if where[0] == "s":
            i = where[1]
            nb = (sc[:i] + sc[i + 1:] + tsc + tch, ch, trs)
        elif where[0] == "c":
            i = where[1]
            nb = (sc + tsc, ch[:i] + tch + ch[i + 1:], trs)
        else:
            t, i = where[1], where[2]
            tr = trs[t]
            nb = (sc + tsc, ch, trs[:t] + (tr[:i] + tch + tr[i + 1:],) + trs[t + 1:])
        out.append((nb, c))
    return out


def _poly(items) -> TensorPolynomial:
    return TensorPolynomial.from_bodies(items)


def instances(body) -> list[TensorPolynomial]:
    """All generating relations that involve ``body`` through one of its atoms."""
    sc, ch, trs = body
    rels = []
    positions = [(("s", i), a) for i, a in enumerate(sc) if a[0] == "R"]
    positions += [(("c", i), a) for i, a in enumerate(ch) if a[0] == "F"]
    for t, tr in enumerate(trs):
        positions += [(("t", t, i), a) for i, a in enumerate(tr) if a[0] == "F"]
    for where, (kind, pre, sl) in positions:
        if kind == "R":
            a, b, c, d = sl
            cyc = [(pre, (a, b, c, d)), (pre, (a, c, d, b)), (pre, (a, d, b, c))]
            items = []
            for p2, s2 in cyc:
                items.append((_replace_atom(body, where, ("R", p2, s2)), 1))
            rels.append(_poly(items))
        if not pre:
            continue
        done = set()
        for i, e in enumerate(pre):
            if e in done:
                continue
            done.add(e)
            rest = pre[:i] + pre[i + 1:]
            mp = {_E: e}
            mp.update({f"P{j}_": rest[j] for j in range(len(rest))})
            mp.update({f"B{j}_": sl[j] for j in range(len(sl))})
            variants = (0, 1) if kind == "R" else (0,)
            for v in variants:
                tmpl = _bianchi2_template(kind, len(rest), v)
                rels.append(_poly(_splice(body, where, tmpl, mp)))
    return [r for r in rels if r]


def _replace_atom(body, where, new):
    sc, ch, trs = body
    if where[0] == "s":
        i = where[1]
        return (sc[:i] + (new,) + sc[i + 1:], ch, trs)
    if where[0] == "c":
        i = where[1]
        return (sc, ch[:i] + (new,) + ch[i + 1:], trs)
    t, i = where[1], where[2]
    tr = trs[t]
    return (sc, ch, trs[:t] + (tr[:i] + (new,) + tr[i + 1:],) + trs[t + 1:])


def _prefix_base_contractions(body) -> int:
    n = 0
    from .expr import body_atoms

    for _, pre, sl in body_atoms(body):
        for l in pre:
            if isinstance(l, int) and l in sl:
                n += 1
    return n


def term_key(body):
    """Elimination order: larger keys are eliminated first."""
    from .expr import body_atoms

    nder = sum(len(a[1]) for a in body_atoms(body))
    return (nder, _prefix_base_contractions(body), repr(body))


class Reducer:
    """Incremental row echelon form over Q keyed by largest monomial."""

    def __init__(self, key=term_key):
        self.key = key
        self.rows: dict = {}
        self._kc: dict = {}

    def k(self, b):
        v = self._kc.get(b)
        if v is None:
            v = self._kc[b] = self.key(b)
        return v

    def _lead(self, row):
        return max(row, key=self.k)

    def reduce_row(self, row: dict) -> dict:
        row = dict(row)
        while row:
            piv = None
            for b in sorted(row, key=self.k, reverse=True):
                if b in self.rows:
                    piv = b
                    break
            if piv is None:
                return row
            c = row[piv]
            for b, v in self.rows[piv].items():
                nv = row.get(b, 0) - c * v
                if nv:
                    row[b] = nv
                else:
                    row.pop(b, None)
        return row

    def add(self, row: dict) -> bool:
        row = self._reduce_lead(row)
        if not row:
            return False
        lead = self._lead(row)
        c = row[lead]
        self.rows[lead] = {b: v / c for b, v in row.items()}
        return True

    def _reduce_lead(self, row: dict) -> dict:
        row = dict(row)
        while row:
            lead = self._lead(row)
            if lead not in self.rows:
                return row
            c = row[lead]
            for b, v in self.rows[lead].items():
                nv = row.get(b, 0) - c * v
                if nv:
                    row[b] = nv
                else:
                    row.pop(b, None)
        return row


def relation_closure(seeds, drop=None) -> list[dict]:
    queue = list(seeds)
    seen = set(queue)
    rels = []
    keys = set()
    while queue:
        b = queue.pop()
        for rel in instances(b):
            terms = rel.terms
            if drop is not None:
                terms = {m: c for m, c in terms.items() if not drop(m)}
            if not terms:
                continue
            lead = max(terms, key=repr)
            c0 = terms[lead]
            sig = frozenset((m, c / c0) for m, c in terms.items())
            if sig in keys:
                continue
            keys.add(sig)
            rels.append(terms)
            for m in terms:
                if m not in seen:
                    seen.add(m)
                    queue.append(m)
    return rels


def normal_form(p: TensorPolynomial, drop=None) -> TensorPolynomial:
    """Canonical representative of ``p`` modulo the Bianchi identities.

    ``drop(body)`` marks monomials treated as zero (a quotient such as
    "modulo terms linear in the bundle curvature"); relations are projected
    accordingly.
    """
    terms = p.terms
    if drop is not None:
        terms = {b: c for b, c in terms.items() if not drop(b)}
    if not terms:
        return TensorPolynomial()
    red = Reducer()
    for rel in relation_closure(terms, drop):
        red.add(rel)
    out = red.reduce_row(terms)
    return TensorPolynomial(out, canonical=True)


simplify_identities = normal_form


def equal_modulo_identities(p: TensorPolynomial, q: TensorPolynomial, drop=None) -> bool:
    return not normal_form(p - q, drop)
