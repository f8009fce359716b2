import pytest

import oracles
from folia.catalog import circles, euler, radius2, rot
from folia.cech import (
    Nerve,
    TransitionCocycle,
    builtin_nerve,
    coboundary_cocycle,
    cocycle_defect,
    identity_cocycle,
    lift_to_order,
)
from folia.errors import DomainError
from folia.geometry import FormalDiffeo, exp_field
from folia.jets import TruncatedSeries

N = 8


def test_torus_nerve_matches_brute_force():
    nerve = builtin_nerve("torus3x3")
    choices = oracles.torus_grid_nerves(3)
    assert (list(nerve.pairs), list(nerve.triples)) in choices
    assert len(nerve.opens) == 9


def test_torus_nerve_topology():
    nerve = builtin_nerve("torus3x3")
    assert oracles.euler_characteristic(len(nerve.opens), len(nerve.pairs), len(nerve.triples)) == 0
    for p in nerve.pairs:
        assert sum(set(p) <= set(t) for t in nerve.triples) == 2
    c = builtin_nerve("circle3")
    assert c.triples == () and len(c.pairs) == 3
    with pytest.raises(DomainError):
        builtin_nerve("sphere")


def test_nerve_validation():
    with pytest.raises(DomainError):
        Nerve("bad", ("a", "b"), ((1, 0),), ())
    with pytest.raises(DomainError):
        Nerve("bad", ("a", "b", "c"), ((0, 1), (1, 2)), ((0, 1, 2),))


def test_identity_lifts_with_zero_corrections():
    res = lift_to_order(identity_cocycle(builtin_nerve("torus3x3"), circles(N)), N - 1)
    assert res.success and res.cocycle.level == N - 1
    assert all(e.theta_norm == 0 for e in res.log)


def test_coboundaries_lift_to_the_top():
    nerve = builtin_nerve("torus3x3")
    x = TruncatedSeries.variable(2, N, 0)
    y = TruncatedSeries.variable(2, N, 1)
    zs = [(0.1 * i + 0.3 * x - 0.2 * i * y * y) * rot(N) for i in range(len(nerve.opens))]
    res = lift_to_order(coboundary_cocycle(nerve, circles(N), zs), N - 1)
    assert res.success and res.cocycle.level == N - 1


def perturbed(field):
    nerve = builtin_nerve("torus3x3")
    ident = FormalDiffeo.identity(2, N)
    sigma = {p: ident for p in nerve.pairs}
    sigma[(0, 1)] = exp_field(0.37 * radius2(N) * field)
    return nerve, sigma


def test_perturbed_pair_hits_its_two_triangles():
    nerve, sigma = perturbed(rot(N))
    tc = TransitionCocycle(nerve, circles(N), 3, sigma)
    hit = {t: v.max_abs() for t, v in cocycle_defect(tc).items() if v.max_abs() > 1e-8}
    assert sorted(hit) == [(0, 1, 4), (0, 1, 6)]
    assert all(v == pytest.approx(0.37, rel=1e-12) for v in hit.values())
    res = lift_to_order(tc, N - 1)
    assert res.success and res.cocycle.is_valid()


def test_defect_outside_the_module_escapes():
    nerve, sigma = perturbed(euler(N))
    res = lift_to_order(TransitionCocycle(nerve, circles(N), 2, sigma), N - 1)
    ob = res.stopped
    assert not res.success and ob.kind == "defect-escape"
    assert (ob.level, ob.degree, ob.triple) == (2, 3, (0, 1, 4))
    assert ob.residual_norm > 0


def test_lift_domain_errors():
    tc = identity_cocycle(builtin_nerve("circle3"), circles(N))
    with pytest.raises(DomainError):
        lift_to_order(tc, N)
    with pytest.raises(DomainError):
        identity_cocycle(builtin_nerve("circle3"), circles(N), level=1)
    with pytest.raises(DomainError):
        TransitionCocycle(builtin_nerve("circle3"), circles(N), 2, {})
