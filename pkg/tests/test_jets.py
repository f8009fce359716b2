import math

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from strategies import close, series
from folia.errors import DomainError, NotAFunctionOfInvariant, StructuralError
from folia.jets import (
    ScalarJet,
    TruncatedSeries,
    layout,
    num_monomials,
    scalar_jet_solve,
    series_compose,
    valuation,
)

FAST = settings(max_examples=25, deadline=None, derandomize=True, database=None)


@pytest.mark.parametrize("dim,order", [(1, 0), (1, 12), (2, 12), (3, 5)])
def test_layout_size_is_binomial(dim, order):
    assert layout(dim, order).size == math.comb(dim + order, dim) == num_monomials(dim, order)


def test_graded_lex_order_and_names():
    lay = layout(2, 3)
    names = [lay.monomial_name(i, ("x", "y")) for i in range(lay.size)]
    assert names[:6] == ["1", "x", "y", "x^2", "x*y", "y^2"]
    assert list(lay.degrees) == sorted(lay.degrees)


def test_layout_is_cached():
    assert layout(2, 7) is layout(2, 7)


@FAST
@given(series(2, 6), series(2, 6))
def test_mul_matches_exact_product(a, b):
    ref = oracles.series_from(oracles.mul(oracles.poly(a), oracles.poly(b), 6), 2, 6)
    assert close(a * b, ref, 1e-12)


@FAST
@given(series(2, 5), series(2, 5, min_degree=1), series(2, 5, min_degree=1))
def test_compose_matches_exact_substitution(f, g, h):
    (ref,) = oracles.compose([oracles.poly(f)], [oracles.poly(g), oracles.poly(h)], 5)
    ref = oracles.series_from(ref, 2, 5)
    assert close(f.compose([g, h]), ref, 1e-11)


@FAST
@given(series(2, 8), series(2, 8))
def test_truncation_commutes_with_products(a, b):
    for k in (0, 3, 8):
        assert np.array_equal((a * b).truncate(k).coeffs, (a.truncate(k) * b.truncate(k)).coeffs)


@FAST
@given(series(2, 8), series(2, 8, min_degree=1), series(2, 8, min_degree=1))
def test_truncation_commutes_with_composition(f, g, h):
    for k in (2, 5):
        lhs = f.compose([g, h]).truncate(k)
        rhs = f.truncate(k).compose([g.truncate(k), h.truncate(k)])
        assert np.array_equal(lhs.coeffs, rhs.coeffs)


@FAST
@given(series(2, 6))
def test_derivative_matches_exact(a):
    for i in range(2):
        ref = oracles.series_from(oracles.diff(oracles.poly(a), i), 2, 6)
        assert close(a.derivative(i), ref, 1e-12)


def test_valuation_and_graded_pieces():
    x = TruncatedSeries.variable(2, 6, 0)
    y = TruncatedSeries.variable(2, 6, 1)
    s = x**3 + 2 * x * y**4
    assert valuation(s) == 3
    assert s.graded_piece(5).coefficient((1, 4)) == 2.0
    assert valuation(TruncatedSeries.zero(2, 6)) > 6
    assert valuation(s + 1e-12 * x) == 3


def test_from_terms_drops_high_degrees_and_rejects_bad_exponents():
    s = TruncatedSeries.from_terms(1, 3, {(2,): 1.0, (5,): 7.0})
    assert list(s.coeffs) == [0, 0, 1, 0]
    with pytest.raises(StructuralError):
        TruncatedSeries.from_terms(2, 3, {(1,): 1.0})


def test_mismatched_operands_raise_structural_error():
    with pytest.raises(StructuralError):
        TruncatedSeries.zero(2, 4) + TruncatedSeries.zero(2, 5)
    with pytest.raises(StructuralError):
        TruncatedSeries.zero(1, 4) * TruncatedSeries.zero(2, 4)
    with pytest.raises(StructuralError):
        TruncatedSeries.zero(2, 4).truncate(6)


def test_negative_power_is_a_domain_error():
    with pytest.raises(DomainError):
        TruncatedSeries.variable(1, 3, 0) ** -1


def test_compose_with_constant_terms_is_rejected_or_exact():
    t = TruncatedSeries.variable(1, 4, 0)
    # substituting a series with constant term would need infinitely many terms
    with pytest.raises(DomainError):
        series_compose(t**2, [t + 1.0])


def test_scalar_jet_solve_recovers_function_of_r2():
    x = TruncatedSeries.variable(2, 10, 0)
    y = TruncatedSeries.variable(2, 10, 1)
    r2 = x * x + y * y
    g = ScalarJet((0.0, 1.0, 2.0, -0.5, 3.0, 0.25))
    got = scalar_jet_solve(g(r2), r2)
    assert got.equal_within(g, 1e-12)


def test_scalar_jet_solve_reports_first_bad_degree():
    x = TruncatedSeries.variable(2, 8, 0)
    y = TruncatedSeries.variable(2, 8, 1)
    with pytest.raises(NotAFunctionOfInvariant) as e:
        scalar_jet_solve(x * x + y**3, x * x + y * y)
    assert e.value.details["degree"] == 2
    assert e.value.code == "not-a-function-of-invariant"


def test_scalar_jet_compose_matches_lagrange_inverse():
    f = (0.0, 1.0, 0.5, -0.25, 0.125, 0.0, 0.3)
    inv = [float(c) for c in oracles.lagrange_inverse(f, 6)]
    assert ScalarJet(f).compose(ScalarJet(tuple(inv))).equal_within(ScalarJet((0.0, 1.0) + (0.0,) * 5), 1e-12)
