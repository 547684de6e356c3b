"""Tensor polynomials over an orthonormal frame with exact rational coefficients.

A monomial is stored as a *body* ``(scalars, chain, traces)``:

* ``scalars``: commuting atoms (Riemann tensors, free xi, metric, n, d, |xi|^2).
* ``chain``: ordered End(V)-valued atoms (bundle curvature ``F``, potential ``A``
  and the internal section placeholder ``u``). Empty chain means the identity.
* ``traces``: a tuple of traced chains.

An atom is ``(kind, prefix, slots)``.  ``prefix`` is a symmetrized string of
``D = -i nabla`` derivatives, so its order carries no information.  Labels are
``str`` for free indices, ``int`` for dummies, and strings starting with ``~``
for constant vectors contracted into a slot (``~xi`` is the cotangent variable).
Because the frame is orthonormal no variance is stored on dummies.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

XI = "~xi"

# kind -> number of base slots
SLOTS = {"R": 4, "F": 2, "A": 0, "u": 0, "xi": 1, "g": 2, "n": 0, "d": 0, "xx": 0}
CHAIN_KINDS = frozenset({"F", "A", "u"})
DIFFERENTIABLE = frozenset({"R", "F", "A", "u"})
_SCALAR_RANK = {"R": 0, "xi": 1, "g": 2, "n": 3, "d": 4, "xx": 5}

_R_SYM = (
    ((0, 1, 2, 3), 1), ((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((1, 0, 3, 2), 1),
    ((2, 3, 0, 1), 1), ((3, 2, 0, 1), -1), ((2, 3, 1, 0), -1), ((3, 2, 1, 0), 1),
)
_BASE_SYM = {
    "R": _R_SYM,
    "F": (((0, 1), 1), ((1, 0), -1)),
    "g": (((0, 1), 1), ((1, 0), 1)),
    "xi": (((0,), 1),),
}
_NOSYM = (((), 1),)


class StructuralError(ValueError):
    """Malformed index structure (repeated free label, triple occurrence, ...)."""


class RewriteError(ValueError):
    """A rewrite rule or specialization was applied outside its domain."""


@dataclass(frozen=True)
class Index:
    label: str
    variance: str = "down"
    binding: str = "free"


def is_vec(label) -> bool:
    return isinstance(label, str) and label.startswith("~")


def is_free(label) -> bool:
    return isinstance(label, str) and not label.startswith("~")


def atom(kind: str, slots=(), prefix=()) -> tuple:
    slots = tuple(slots)
    if len(slots) != SLOTS[kind]:
        raise StructuralError(f"{kind} expects {SLOTS[kind]} slots, got {len(slots)}")
    return (kind, tuple(prefix), slots)


def body_atoms(body) -> Iterator[tuple]:
    scalars, chain, traces = body
    yield from scalars
    yield from chain
    for tr in traces:
        yield from tr


def body_labels(body) -> Iterator:
    for _, pre, sl in body_atoms(body):
        yield from pre
        yield from sl


def free_labels(body) -> frozenset:
    return frozenset(l for l in body_labels(body) if is_free(l))


def max_dummy(body) -> int:
    return max((l for l in body_labels(body) if isinstance(l, int)), default=-1)


def relabel_body(body, mapping: Mapping):
    def ra(a):
        k, pre, sl = a
        return (k, tuple(mapping.get(l, l) for l in pre), tuple(mapping.get(l, l) for l in sl))

    scalars, chain, traces = body
    return (
        tuple(ra(a) for a in scalars),
        tuple(ra(a) for a in chain),
        tuple(tuple(ra(a) for a in tr) for tr in traces),
    )


def shift_dummies(body, offset: int):
    if offset == 0:
        return body
    mp = {l: l + offset for l in body_labels(body) if isinstance(l, int)}
    return relabel_body(body, mp)


# --------------------------------------------------------------------------
# canonicalization

def _count_check(body):
    counts: dict = {}
    for l in body_labels(body):
        counts[l] = counts.get(l, 0) + 1
    for l, c in counts.items():
        if isinstance(l, int):
            if c != 2:
                raise StructuralError(f"dummy index {l} occurs {c} times")
        elif not is_vec(l) and c != 1:
            raise StructuralError(f"free index {l!r} occurs {c} times")
    return counts


def _replace_label(atoms_lists, old, new):
    """Replace the single remaining occurrence of ``old`` in nested atom lists."""
    for lst in atoms_lists:
        for i, (k, pre, sl) in enumerate(lst):
            if old in pre:
                j = pre.index(old)
                lst[i] = (k, pre[:j] + (new,) + pre[j + 1:], sl)
                return
            if old in sl:
                j = sl.index(old)
                lst[i] = (k, pre, sl[:j] + (new,) + sl[j + 1:])
                return
    raise StructuralError(f"dangling dummy {old}")


def _eliminate(body):
    """Contract metrics and xi atoms carrying dummies; returns list-form body."""
    scalars, chain, traces = body
    sc = list(scalars)
    ch = list(chain)
    trs = [list(t) for t in traces]
    lists = [sc, ch] + trs
    changed = True
    while changed:
        changed = False
        for i, (k, pre, sl) in enumerate(sc):
            if k == "g":
                a, b = sl
                if a == b and isinstance(a, int):
                    sc[i] = ("n", (), ())
                elif isinstance(a, int) or isinstance(b, int):
                    if not isinstance(a, int):
                        a, b = b, a
                    del sc[i]
                    _replace_label(lists, a, b)
                elif a == XI and b == XI:
                    sc[i] = ("xx", (), ())
                else:
                    continue
                changed = True
                break
            if k == "xi":
                (a,) = sl
                if isinstance(a, int):
                    del sc[i]
                    _replace_label(lists, a, XI)
                    changed = True
                    break
                if a == XI:
                    sc[i] = ("xx", (), ())
                    changed = True
                    break
    return sc, ch, trs


def _tok(label, num):
    if isinstance(label, str):
        return (0, label)
    return (1, num[label])


class _State:
    __slots__ = ("num", "nxt", "sign", "pool", "out", "key", "trace_atoms")

    def __init__(self, num, nxt, sign, pool, out, key, trace_atoms):
        self.num = num
        self.nxt = nxt
        self.sign = sign
        self.pool = pool
        self.out = out
        self.key = key
        self.trace_atoms = trace_atoms


def _atom_candidates(a, num, nxt):
    """Yield (token, relabeled_atom, new_num, new_nxt, sign) for symmetry images of ``a``."""
    kind, pre, sl = a
    syms = _BASE_SYM.get(kind, _NOSYM)
    seen = set()
    for perm, sgn in syms:
        base = tuple(sl[p] for p in perm)
        nm = dict(num)
        n2 = nxt
        btok = []
        for l in base:
            if isinstance(l, int) and l not in nm:
                nm[l] = n2
                n2 += 1
            btok.append(_tok(l, nm))
        known = []
        mult: dict = {}
        for l in pre:
            if isinstance(l, int) and l not in nm:
                mult[l] = mult.get(l, 0) + 1
            else:
                known.append(l)
        known.sort(key=lambda l: _tok(l, nm))
        doubles = [l for l, c in mult.items() if c == 2]
        singles = [l for l, c in mult.items() if c == 1]
        orders = itertools.permutations(singles) if len(singles) > 1 else [tuple(singles)]
        for order in orders:
            nm2 = dict(nm)
            n3 = n2
            newpre = []
            for l in doubles:
                nm2[l] = n3
                n3 += 1
                newpre += [l, l]
            for l in order:
                nm2[l] = n3
                n3 += 1
                newpre.append(l)
            prelabels = known + newpre
            ptok = tuple(_tok(l, nm2) for l in prelabels)
            tok = (kind, len(pre), tuple(btok), ptok)
            rel = (
                kind,
                tuple(nm2[l] if isinstance(l, int) else l for l in prelabels),
                tuple(nm2[l] if isinstance(l, int) else l for l in base),
            )
            sig = (tok, rel, sgn, tuple(sorted(nm2.items())))
            if sig in seen:
                continue
            seen.add(sig)
            yield tok, rel, nm2, n3, sgn


def _rot_sig(tr):
    return tuple((k, len(pre)) for k, pre, _ in tr)


def _min_rotations(tr):
    sigs = [_rot_sig(tr[i:] + tr[:i]) for i in range(len(tr))]
    best = min(sigs)
    return best, [i for i, s in enumerate(sigs) if s == best]


def _dedupe(states):
    if len(states) < 2:
        return states
    seen = {}
    for st in states:
        sig = (
            st.sign,
            tuple(sorted(st.num.items())),
            tuple(tuple(v) for _, v in sorted(st.pool["scalars"].items())),
            tuple((s, t) for s, t, _ in st.pool["traces"]),
            tuple(st.trace_atoms),
        )
        seen.setdefault(sig, st)
    return list(seen.values())


_CANON_CACHE: dict = {}


def canonicalize(body):
    """Return ``(canonical_body, sign)`` or ``None`` when the monomial vanishes."""
    hit = _CANON_CACHE.get(body)
    if hit is not None or body in _CANON_CACHE:
        return hit
    res = _canonicalize(body)
    if len(_CANON_CACHE) > 2_000_000:
        _CANON_CACHE.clear()
    _CANON_CACHE[body] = res
    return res


def _canonicalize(body):
    _count_check(body)
    sc, ch, trs = _eliminate(body)
    # zero trace of an empty chain is d
    fixed = []
    for tr in trs:
        if not tr:
            sc.append(("d", (), ()))
        else:
            fixed.append(tr)
    trs = fixed

    # plan: chain atoms, traces (by signature), then scalar classes
    plan = [("chain", a) for a in ch]
    tr_info = []
    for tr in trs:
        sig, rots = _min_rotations(tr)
        tr_info.append((sig, tr, rots))
    tr_info.sort(key=lambda t: t[0])
    sigs = []
    for sig, _, _ in tr_info:
        if not sigs or sigs[-1] != sig:
            sigs.append(sig)
    for sig in sigs:
        count = sum(1 for s, _, _ in tr_info if s == sig)
        for _ in range(count):
            plan.append(("trace", sig))
            for _ in sig:
                plan.append(("tatom", None))
    classes: dict = {}
    for a in sc:
        classes.setdefault((_SCALAR_RANK[a[0]], len(a[1])), []).append(a)
    for cls in sorted(classes):
        for _ in classes[cls]:
            plan.append(("scalar", cls))

    pool0 = {"traces": tr_info, "scalars": classes}
    states = [_State({}, 0, 1, pool0, [], (), [])]
    for step, item in plan:
        new_states = []
        best = None
        if step == "trace":
            for st in states:
                avail = st.pool["traces"]
                for ti, (sig, tr, rots) in enumerate(avail):
                    if sig != item:
                        continue
                    rest = avail[:ti] + avail[ti + 1:]
                    for r in rots:
                        pool = {"traces": rest, "scalars": st.pool["scalars"]}
                        rotated = tr[r:] + tr[:r]
                        new_states.append(
                            _State(st.num, st.nxt, st.sign, pool, st.out + [("T", len(tr))],
                                   st.key + (("T", item),), list(rotated))
                        )
            states = new_states
            continue
        for st in states:
            if step == "chain":
                cands = [(item, None)]
            elif step == "tatom":
                cands = [(st.trace_atoms[0], "t")]
            else:
                cands = [(a, i) for i, a in enumerate(st.pool["scalars"][item])]
            for a, where in cands:
                for tok, rel, nm, nxt, sgn in _atom_candidates(a, st.num, st.nxt):
                    if best is not None and tok > best:
                        continue
                    if where == "t":
                        pool = st.pool
                        tatoms = st.trace_atoms[1:]
                    elif where is None:
                        pool = st.pool
                        tatoms = st.trace_atoms
                    else:
                        lst = st.pool["scalars"][item]
                        sc2 = dict(st.pool["scalars"])
                        sc2[item] = lst[:where] + lst[where + 1:]
                        pool = {"traces": st.pool["traces"], "scalars": sc2}
                        tatoms = st.trace_atoms
                    ns = _State(nm, nxt, st.sign * sgn, pool, st.out + [rel], st.key + (tok,), tatoms)
                    if best is None or tok < best:
                        best = tok
                        new_states = [ns]
                    else:
                        new_states.append(ns)
        states = _dedupe(new_states)

    signs = {st.sign for st in states}
    if len(signs) > 1:
        return None
    st = states[0]
    out = st.out
    pos = 0
    chain = tuple(out[: len(ch)])
    pos = len(ch)
    traces = []
    scalars = []
    while pos < len(out):
        it = out[pos]
        if it[0] == "T":
            ln = it[1]
            traces.append(tuple(out[pos + 1: pos + 1 + ln]))
            pos += 1 + ln
        else:
            scalars.append(it)
            pos += 1
    return (tuple(scalars), chain, tuple(traces)), st.sign


# --------------------------------------------------------------------------
# polynomials

def _frac(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class TensorPolynomial:
    """Finite sum of canonical monomials with rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping | None = None, *, canonical: bool = False):
        self.terms: dict = {}
        if terms:
            if canonical:
                self.terms = {b: _frac(c) for b, c in terms.items() if c}
            else:
                for b, c in terms.items():
                    self._add_raw(b, _frac(c))

    def _add_raw(self, body, c):
        if not c:
            return
        res = canonicalize(body)
        if res is None:
            return
        cb, s = res
        v = self.terms.get(cb, 0) + s * c
        if v:
            self.terms[cb] = v
        else:
            self.terms.pop(cb, None)

    @classmethod
    def from_bodies(cls, items: Iterable) -> "TensorPolynomial":
        p = cls()
        for b, c in items:
            p._add_raw(b, _frac(c))
        return p

    @classmethod
    def one(cls) -> "TensorPolynomial":
        return cls({((), (), ()): 1}, canonical=True)

    @classmethod
    def scalar(cls, c) -> "TensorPolynomial":
        return cls({((), (), ()): c}, canonical=True)

    # -- basics
    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TensorPolynomial.scalar(other)
        return isinstance(other, TensorPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def free(self) -> frozenset:
        fr = None
        for b in self.terms:
            f = free_labels(b)
            if fr is None:
                fr = f
            elif f != fr:
                raise StructuralError(f"inconsistent free indices {sorted(fr)} vs {sorted(f)}")
        return fr or frozenset()

    def copy(self):
        return TensorPolynomial(self.terms, canonical=True)

    def __neg__(self):
        return TensorPolynomial({b: -c for b, c in self.terms.items()}, canonical=True)

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TensorPolynomial.scalar(other)
        if self.terms and other.terms and self.free() != other.free():
            raise StructuralError(
                f"free index mismatch: {sorted(self.free())} vs {sorted(other.free())}"
            )
        out = dict(self.terms)
        for b, c in other.terms.items():
            v = out.get(b, 0) + c
            if v:
                out[b] = v
            else:
                out.pop(b, None)
        return TensorPolynomial(out, canonical=True)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "TensorPolynomial":
        c = _frac(c)
        if not c:
            return TensorPolynomial()
        return TensorPolynomial({b: c * v for b, v in self.terms.items()}, canonical=True)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def filter(self, pred) -> "TensorPolynomial":
        return TensorPolynomial({b: c for b, c in self.terms.items() if pred(b)}, canonical=True)

    def map_bodies(self, fn) -> "TensorPolynomial":
        """Apply ``fn(body) -> iterable of (body, coeff)`` termwise and recanonicalize."""
        out = TensorPolynomial()
        for b, c in self.terms.items():
            for nb, nc in fn(b):
                out._add_raw(nb, c * nc)
        return out

    def relabel(self, mapping: Mapping) -> "TensorPolynomial":
        return self.map_bodies(lambda b: [(relabel_body(b, mapping), 1)])

    def __repr__(self):
        from .textio import to_text

        return f"TensorPolynomial({to_text(self)!r})"


Poly = TensorPolynomial


def mul(a: TensorPolynomial, b: TensorPolynomial) -> TensorPolynomial:
    """Product with Einstein convention: shared free labels are contracted.

    End(V) chains concatenate in order ``a`` then ``b``.
    """
    out = TensorPolynomial()
    if not a.terms or not b.terms:
        return out
    shared = a.free() & b.free()
    for ba, ca in a.terms.items():
        off = max_dummy(ba) + 1
        for bb, cb in b.terms.items():
            bb2 = shift_dummies(bb, off)
            ba2 = ba
            if shared:
                top = max(max_dummy(bb2), off - 1) + 1
                mp = {l: top + i for i, l in enumerate(sorted(shared))}
                ba2 = relabel_body(ba, mp)
                bb2 = relabel_body(bb2, mp)
            body = (ba2[0] + bb2[0], ba2[1] + bb2[1], ba2[2] + bb2[2])
            out._add_raw(body, ca * cb)
    return out


poly_mul = mul


def poly_add(a: TensorPolynomial, b: TensorPolynomial) -> TensorPolynomial:
    return a + b


def contract(p: TensorPolynomial, i: str, j: str) -> TensorPolynomial:
    """Contract free labels ``i`` and ``j`` (orthonormal frame, no metric needed)."""
    fr = p.free()
    for l in (i, j):
        if l not in fr:
            raise StructuralError(f"{l!r} is not a free index")

    def fn(b):
        m = max_dummy(b) + 1
        return [(relabel_body(b, {i: m, j: m}), 1)]

    return p.map_bodies(fn)


def trace(p: TensorPolynomial) -> TensorPolynomial:
    """Fiber trace of an End(V)-valued polynomial."""

    def fn(b):
        sc, ch, tr = b
        if any(a[0] == "u" for a in ch):
            raise RewriteError("cannot trace a section-valued expression")
        return [((sc, (), tr + (ch,)), 1)]

    return p.map_bodies(fn)


# -- body predicates / measures

def xi_degree(body) -> int:
    d = 0
    for k, pre, sl in body_atoms(body):
        if k == "xx":
            d += 2
        elif k == "xi":
            d += 1
        else:
            d += sum(1 for l in sl if l == XI) + sum(1 for l in pre if l == XI)
    return d


def weight(body) -> int:
    """Curvature weight: R, F, A count 2, each derivative counts 1."""
    w = 0
    for k, pre, _ in body_atoms(body):
        if k in ("R", "F", "A"):
            w += 2 + len(pre)
        elif k == "u":
            w += len(pre)
    return w


def count_kind(body, kind) -> int:
    return sum(1 for a in body_atoms(body) if a[0] == kind)


def chain_kinds(body) -> list:
    return [a[0] for a in body[1]]


def is_bundle_linear(body) -> bool:
    """Exactly one bundle curvature factor and no potential anywhere."""
    kinds = [a[0] for a in body_atoms(body)]
    return kinds.count("F") == 1 and "A" not in kinds


def has_bundle(body) -> bool:
    return any(a[0] == "F" for a in body_atoms(body))


def split_by_xi_degree(p: TensorPolynomial) -> dict:
    out: dict = {}
    for b, c in p.terms.items():
        out.setdefault(xi_degree(b), {})[b] = c
    return {k: TensorPolynomial(v, canonical=True) for k, v in sorted(out.items())}


def polarize(p: TensorPolynomial, mapping: Mapping[str, str]) -> TensorPolynomial:
    """Replace free labels by constant vectors (``~name`` tokens)."""
    mp = {}
    for k, v in mapping.items():
        mp[k] = v if v.startswith("~") else "~" + v
    return p.relabel(mp)


def symmetrize(p: TensorPolynomial, labels: Iterable[str]) -> TensorPolynomial:
    labels = list(labels)
    out = TensorPolynomial()
    perms = list(itertools.permutations(labels))
    for perm in perms:
        out = out + p.relabel(dict(zip(labels, perm)))
    return out.scale(Fraction(1, len(perms)))


@dataclass
class RationalSymbol:
    """sum_m parts[m] / (lambda - |xi|^2)^m with End(V)-valued numerators."""

    parts: dict = field(default_factory=dict)

    def add(self, m: int, p: TensorPolynomial):
        if not p:
            return
        cur = self.parts.get(m)
        s = p if cur is None else cur + p
        if s:
            self.parts[m] = s
        else:
            self.parts.pop(m, None)

    def __add__(self, other):
        out = RationalSymbol(dict(self.parts))
        for m, p in other.parts.items():
            out.add(m, p)
        return out

    def __eq__(self, other):
        return isinstance(other, RationalSymbol) and {
            m: p for m, p in self.parts.items() if p
        } == {m: p for m, p in other.parts.items() if p}

    def is_zero(self):
        return not any(self.parts.values())

    def shift(self, k=1):
        return RationalSymbol({m + k: p for m, p in self.parts.items()})

    def map(self, fn):
        out = RationalSymbol()
        for m, p in self.parts.items():
            out.add(m, fn(p))
        return out
