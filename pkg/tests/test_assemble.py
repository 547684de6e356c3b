from fractions import Fraction

import pytest

from heatinv import parse, to_text
from heatinv.assemble import (
    cluster_invariants,
    contour_integrate,
    gaussian_moment,
    heat_invariant,
    integrate_symbol,
    trace_reduce,
)
from heatinv.calculus import section
from heatinv.expr import RationalSymbol, StructuralError
from heatinv.identities import normal_form
from heatinv.parametrix import SCALAR, OperatorSpec, r_k

from helpers import A4_GENERIC, A4_SCALAR, CLUSTERS


def test_contour_weights():
    s = RationalSymbol({1: parse("S"), 2: parse("A"), 4: parse("xi2")})
    assert contour_integrate(s) == parse("S - A - xi2/6")


def test_contour_rejects_polynomial_part():
    with pytest.raises(StructuralError):
        contour_integrate(RationalSymbol({0: parse("S")}))


def test_gaussian_moments():
    assert gaussian_moment(parse("xi[i]*xi[j]")) == parse("g[i,j]/2")
    assert gaussian_moment(parse("xi2")) == parse("n/2")
    assert gaussian_moment(parse("Ric[p,q]*xi[p]*xi[q]")) == parse("S/2")
    # three pairings of four xi
    assert gaussian_moment(parse("xi2*xi2")) == parse("n^2/4 + n/2")
    assert not gaussian_moment(parse("D[p]S*xi[p]"))


def test_trace_reduce():
    assert trace_reduce(parse("1")) == parse("d")
    assert not trace_reduce(parse("Rv[i,j]"))
    assert trace_reduce(parse("Rv[i,j]"), OperatorSpec(trace_free=False)) == parse("Tr(Rv[i,j])")
    with pytest.raises(StructuralError):
        trace_reduce(section(("j",)))


def test_a0():
    assert heat_invariant(0) == parse("d")
    assert heat_invariant(0, SCALAR) == 1


def test_odd_orders_vanish():
    assert not heat_invariant(1)
    assert not heat_invariant(3)


def test_a2():
    assert heat_invariant(2) == parse("d*S/6 - Tr(A)")
    assert to_text(heat_invariant(2, SCALAR)) == "S/6"


def test_trace_and_moment_commute():
    for k in (2, 3):
        s = r_k(k)
        assert integrate_symbol(s, order="trace-first") == integrate_symbol(s, order="moment-first")


@pytest.mark.slow
def test_a4_generic():
    a4 = heat_invariant(4)
    assert not normal_form(a4 - parse(A4_GENERIC))
    assert to_text(a4) == (
        "S^2*d/72 - Tr(A)*S/6 - Ric[p,q]*Ric[p,q]*d/180 + R[p,q,r,s]*R[p,q,r,s]*d/180"
        " - D[p,p]S*d/30 + Tr(A*A)/2 + Tr(D[p,p]A)/6 + Tr(Rv[p,q]*Rv[p,q])/12"
    )


@pytest.mark.slow
def test_a4_scalar():
    a4 = heat_invariant(4, SCALAR)
    assert a4 == normal_form(parse(A4_SCALAR))
    assert a4.free() == set()


@pytest.mark.slow
def test_clusters():
    cl = cluster_invariants()
    for c, text in CLUSTERS.items():
        assert not normal_form(cl[c] - parse(text)), c
    total = cl[1] + cl[2] + cl[3]
    assert not normal_form(total - heat_invariant(4))


def test_negative_k():
    with pytest.raises(ValueError):
        heat_invariant(-2)


def test_unsimplified_a2_agrees():
    raw = heat_invariant(2, simplify=False)
    assert normal_form(raw) == heat_invariant(2)
    assert Fraction(1, 6) in raw.terms.values()
