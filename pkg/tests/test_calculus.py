import numpy as np
import pytest

from heatinv import parse, to_text
from heatinv.calculus import apply_D, apply_ordered, derive, section, section_to_xi, sym_derivative
from heatinv.expr import RewriteError
from heatinv.identities import normal_form
from heatinv.jetlab import _to_fraction_arr, geometry, numeric_eval, random_metric_jet
from heatinv.rho_chi import compose_sym_derivs

from helpers import bundle_jets, same_value


def test_metric_and_xi_are_parallel():
    assert not derive("e", parse("xi2"))
    assert not derive("e", parse("g[a,b]*Ric[a,b]") - parse("S"))


def test_derive_scalar_curvature():
    assert derive("e", parse("S")) == parse("D[e]S")


def test_derive_product_is_leibniz():
    p = derive("e", parse("S*A"))
    assert p == parse("D[e]S*A + S*D[e]A")


def test_second_derivative_of_scalar_is_symmetric():
    # no curvature correction on a function
    assert apply_D("ab", parse("S")) == parse("D[a,b]S")


def test_commutator_on_potential():
    p = apply_D("ab", parse("A")) - apply_D("ba", parse("A"))
    assert p == parse("-Rv[a,b]*A + A*Rv[a,b]")


def test_commutator_on_one_form():
    p = apply_D("ab", parse("D[c]S")) - apply_D("ba", parse("D[c]S"))
    # the symmetrized form is a Bianchi rearrangement of R_pcab D_p S
    assert to_text(p) == "-2*R[a,b,c,p]*D[p]S/3 - R[a,c,b,p]*D[p]S/3 + R[a,p,b,c]*D[p]S/3"
    assert not normal_form(p - parse("R[p,c,a,b]*D[p]S"))


def test_symmetrized_derivative_of_section():
    assert sym_derivative("jk", section()) == sym_derivative("kj", section())
    q = compose_sym_derivs(["j"], ["k"])
    assert to_text(q) == "-Rv[j,k]*u/2 + D[j,k]u"


def test_section_to_xi():
    assert section_to_xi(section(("j", "k"))) == parse("xi[j]*xi[k]")


def test_odd_plain_string_rejected():
    with pytest.raises(RewriteError):
        apply_ordered("abc", parse("S"), plain=True)


def test_ordered_contraction():
    assert apply_ordered("pp", parse("S")) == parse("D[p,p]S")


# ordered -i nabla strings against the jet oracle, which builds nabla^k
# directly from Christoffel symbols and the connection form
@pytest.mark.parametrize("text,kind,k", [
    ("DD[a,b]Rv[c,e]", "F", 2),
    ("DD[a,b,c]A", "A", 3),
    ("DD[a,b]R[c,e,f,h]", "R", 2),
    ("DD[a,b,c]R[e,f,h,i]", "R", 3),
])
def test_commutator_calculus_against_jets(text, kind, k):
    p = parse(text)
    for seed in (4, 5):
        jet = random_metric_jet(3, degree=5, seed=seed, fiber_dim=2)
        re, im = numeric_eval(p, jet, allow_complex=True)
        ref = _to_fraction_arr(geometry(jet).nabla_k(kind, k))
        # (-i)^2 = -1, (-i)^3 = i
        if k == 2:
            assert np.all(re == -ref) and not np.any(im)
        else:
            assert np.all(im == ref) and not np.any(re)


def test_ordered_vs_symmetrized_on_jets():
    jets = bundle_jets(3)
    lhs = parse("DD[a,b]Rv[c,e]") - parse("DD[b,a]Rv[c,e]")
    rhs = parse("-Rv[a,b]*Rv[c,e] + Rv[c,e]*Rv[a,b] + R[p,c,a,b]*Rv[p,e] + R[p,e,a,b]*Rv[c,p]")
    assert lhs == rhs
    assert same_value(lhs, rhs, jets)


def test_constant_vector_slot_evaluates_like_contraction():
    from fractions import Fraction

    from heatinv.jetlab import evaluate_curvature

    from helpers import vectors

    jet = random_metric_jet(3, degree=3, seed=7)
    p = parse("R[j,l,m,p]*xi[p]")
    (b, _), = p.terms.items()
    assert "~xi" in b[0][0][2]
    xi = np.array([Fraction(x) for x in vectors(3)["xi"]], dtype=object)
    R = _to_fraction_arr(evaluate_curvature(jet)["R"])
    ref = np.einsum("jlmp,p->jlm", R, xi)
    val = numeric_eval(p, jet, vectors(3), free_order=["j", "l", "m"])
    assert np.all(np.vectorize(Fraction)(val) == ref)


@pytest.mark.parametrize("text", ["D[j]R[a,b,c,e]", "D[j,k]S", "Rv[a,b]*A", "D[j]u"])
def test_repeated_vector_prefix_is_the_polarization(text):
    # D_(aab) on free labels, then a=b=~v, must match the grouped-vector path
    p = parse(text)
    free = sym_derivative(["x", "y", "z"], p).relabel({"x": "~v", "y": "~v", "z": "~w"})
    assert sym_derivative(["~v", "~v", "~w"], p) == free
    assert derive("~xi", derive("~xi", p)) == apply_D(["x", "y"], p).relabel({"x": "~xi", "y": "~xi"})
