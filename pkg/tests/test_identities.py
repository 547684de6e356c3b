import numpy as np
import pytest

from heatinv import parse
from heatinv.expr import TensorPolynomial, has_bundle, is_bundle_linear
from heatinv.identities import equal_modulo_identities, instances, normal_form, relation_closure

from helpers import bundle_jets, evaluate, metric_jets, same_value

SEEDS = [
    "D[p,p]S",
    "R[a,b,c,e]*R[a,b,c,e]",
    "R[a,c,b,e]*R[a,b,c,e]",
    "D[a,b]Ric[a,b]",
    "D[j]R[p,k,l,m]*xi[p]",
    "D[j,k]Rv[l,m]",
    "D[p]Rv[j,k]*A",
    "R[p,j,k,l]*Rv[p,m]",
]


def _vanishes(rel, jets):
    p = TensorPolynomial(rel, canonical=True)
    free = sorted(p.free())
    for jet in jets:
        for part in evaluate(p, jet, free):
            if part is not None and np.any(np.asarray(part) != 0):
                return False
    return True


@pytest.mark.parametrize("seed", SEEDS)
def test_every_relation_is_value_preserving(seed):
    p = parse(seed)
    rels = relation_closure(p.terms)
    assert rels
    jets = bundle_jets(20)
    for rel in rels:
        assert _vanishes(rel, jets), rel


def test_instances_include_cyclic_identity():
    (b, _), = parse("R[a,b,c,e]*R[a,b,c,e]").terms.items()
    rels = instances(b)
    assert any(len(r) == 2 for r in rels)


def test_first_bianchi_quadratic():
    # R_ijkl R_ikjl = |R|^2 / 2
    p = parse("R[i,j,k,l]*R[i,k,j,l]")
    q = parse("R[i,j,k,l]*R[i,j,k,l]/2")
    assert p != q
    assert equal_modulo_identities(p, q)
    assert same_value(p, q, metric_jets(20))


def test_contracted_bianchi():
    p = parse("D[i,j]Ric[i,j]")
    q = parse("D[p,p]S/2")
    assert equal_modulo_identities(p, q)
    assert same_value(p, q, metric_jets(20))


def test_normal_form_is_idempotent_and_preserves_values():
    p = parse("R[i,j,k,l]*R[i,k,j,l] + D[i,j]Ric[i,j] - Ric[a,b]*Ric[a,b] + D[j]Rv[j,k]*D[p]Rv[p,k]")
    nf = normal_form(p)
    assert normal_form(nf) == nf
    assert same_value(p, nf, bundle_jets(20))


def test_drop_quotients():
    p = parse("D[p]Rv[p,j] + Rv[j,p]*Rv[p,k]*xi[k]")
    assert normal_form(p, drop=has_bundle) == 0
    assert normal_form(p, drop=is_bundle_linear) == normal_form(parse("Rv[j,p]*Rv[p,k]*xi[k]"))


def test_differential_bianchi_on_bundle_curvature():
    p = parse("D[e]Rv[a,b] + D[a]Rv[b,e] + D[b]Rv[e,a]")
    assert p
    assert not normal_form(p)
    assert _vanishes(p.terms, bundle_jets(20))


def test_zero_input():
    assert normal_form(TensorPolynomial()) == 0
