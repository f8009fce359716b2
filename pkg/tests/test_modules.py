import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strategies import close, seeds, random_coeffs
from folia.catalog import all_fields, circles, euler, radius2, rot, spiral_generator, spirals
from folia.errors import DomainError, InconsistencyError, StructuralError
from folia.geometry import FormalVectorField
from folia.jets import TruncatedSeries, layout
from folia.modules import FoliationModule, degree_dimensions, filtration_membership, linear_part_algebra, membership, module_equal

N = 10
FAST = settings(max_examples=25, deadline=None, derandomize=True, database=None)


def var(i, order=N):
    return TruncatedSeries.variable(2, order, i)


def vf(a, b):
    return FormalVectorField.from_components([a, b])


def test_rotation_multiples_are_members_with_recovered_coefficients():
    m = circles(N)
    r2 = radius2(N)
    cert = m.membership(r2 * rot(N))
    assert cert and cert.valid
    assert close(cert.coefficients[0], r2, 1e-10)


def test_euler_field_is_not_a_circle_member():
    res = membership(circles(N), euler(N))
    assert not res
    assert res.degree == 1
    assert close(res.residual, euler(N), 1e-12)
    assert res.residual_norm == pytest.approx(1.0)


def test_radial_field_leaves_the_spirals_at_degree_three():
    res = spirals(N).membership(radius2(N) * euler(N))
    assert not res and res.degree == 3
    assert spirals(N).contains((1 + var(0)) * spiral_generator(N))


@FAST
@given(seeds)
def test_random_combinations_are_members(seed):
    rng = np.random.default_rng(seed)
    m = all_fields(2, N)
    fs = [TruncatedSeries(2, N, random_coeffs(rng, 2, N)) for _ in m.generators]
    x = sum((f * g for f, g in zip(fs, m.generators)), FormalVectorField.zero(2, N))
    cert = m.membership(x)
    assert cert
    rebuilt = sum((f * g for f, g in zip(cert.coefficients, m.generators)), FormalVectorField.zero(2, N))
    assert close(rebuilt, x, 1e-8)


@FAST
@given(seeds, st.integers(min_value=2, max_value=N))
def test_failure_degree_is_the_first_bad_degree(seed, d):
    rng = np.random.default_rng(seed)
    m = circles(N)
    f = TruncatedSeries(2, N, random_coeffs(rng, 2, N))
    bump = np.zeros((2, layout(2, N).size))
    bump[0, layout(2, N).starts[d]] = 1.0  # x^d d/dx is never a multiple of rot
    x = f * rot(N) + FormalVectorField(2, N, bump)
    res = m.membership(x)
    assert not res and res.degree == d


def test_degree_dimensions():
    assert degree_dimensions(circles(N)) == list(range(N + 1))
    assert all_fields(2, N).degree_dimensions() == [0] + [2 * (k + 1) for k in range(1, N + 1)]
    assert spirals(N).degree_dimensions() == list(range(N + 1))


@pytest.mark.parametrize("k", [1, 2, 5])
def test_graded_basis_is_orthonormal_and_in_the_module(k):
    m = circles(N)
    fields, parts = m.graded_basis(k)
    assert len(fields) == k
    assert np.allclose(parts.T @ parts, np.eye(k), atol=1e-10)
    for f in fields:
        assert f.valuation() >= k
        assert m.contains(f)


def test_filtration_strict_versus_plain():
    x, y = var(0), var(1)
    zero = TruncatedSeries.zero(2, N)
    m = FoliationModule([vf(x, y * y), vf(x, zero)])
    target = vf(zero, y * y)  # V1 - V2: order 2 only through cancellation
    assert filtration_membership(m, 2, target)
    assert not m.filtration_membership(2, target, strict=True)
    with pytest.raises(DomainError):
        m.filtration_membership(3, target)


def test_closure_is_checked_at_construction():
    x, y = var(0), var(1)
    zero = TruncatedSeries.zero(2, N)
    with pytest.raises(InconsistencyError) as e:
        FoliationModule([vf(zero, x), vf(y, zero)])
    assert e.value.details["degree"] == 1


def test_generators_must_vanish_and_match():
    one = TruncatedSeries.constant(2, N, 1.0)
    with pytest.raises(DomainError):
        FoliationModule([vf(one, var(0))])
    with pytest.raises(StructuralError):
        FoliationModule([rot(N), rot(N - 1)])
    with pytest.raises(StructuralError):
        circles(N).membership(rot(N - 1))


def test_module_equality():
    assert module_equal(circles(N), FoliationModule([(1 + var(0)) * rot(N)]))
    assert not module_equal(circles(N), spirals(N))
    assert not module_equal(circles(N), all_fields(2, N))


def test_linear_part_algebra():
    (a,) = linear_part_algebra(circles(N))
    assert np.allclose(a, [[0, -1], [1, 0]])
    assert len(all_fields(2, N).linear_part_algebra()) == 4
    m = FoliationModule([radius2(N) * rot(N)])
    assert m.linear_part_algebra() == []
