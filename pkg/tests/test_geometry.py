import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from strategies import close, diffeos, field_from_rng, fields, series
from folia.catalog import euler, radius2, rot
from folia.errors import DomainError, StructuralError
from folia.geometry import (
    FormalDiffeo,
    FormalVectorField,
    diffeo_compose,
    diffeo_invert,
    exp_field,
    flow,
    lie_bracket,
    log_diffeo,
    pushforward,
)
from folia.jets import TruncatedSeries, layout

FAST = settings(max_examples=20, deadline=None, derandomize=True, database=None)


@FAST
@given(fields(2, 6), fields(2, 6))
def test_bracket_matches_exact(x, y):
    ref = oracles.bracket(oracles.field_poly(x), oracles.field_poly(y), 6)
    assert close(lie_bracket(x, y), oracles.field_from(ref, 2, 6), 1e-12)


@FAST
@given(fields(2, 10), fields(2, 10), series(2, 10))
def test_bracket_antisymmetry_and_product_rule(x, y, f):
    assert close(lie_bracket(x, y), -lie_bracket(y, x), 1e-13)
    lhs = lie_bracket(x, f * y)
    rhs = x.apply(f) * y + f * lie_bracket(x, y)
    assert close(lhs, rhs, 1e-12)


def test_bracket_of_circle_fields():
    # [rot, r^2 Eul] = 0 and [x dx, y dy] = 0, [x dy, y dx] = x dx - y dy
    assert lie_bracket(rot(8), radius2(8) * euler(8)).max_abs() < 1e-14
    x = TruncatedSeries.variable(2, 4, 0)
    y = TruncatedSeries.variable(2, 4, 1)
    z = TruncatedSeries.zero(2, 4)
    a = FormalVectorField.from_components([z, x])
    b = FormalVectorField.from_components([y, z])
    assert close(lie_bracket(a, b), FormalVectorField.from_components([x, -y]), 0)


@settings(max_examples=20, deadline=None, derandomize=True, database=None)
@given(fields(2, 8, 2))
def test_exp_matches_exact_lie_series(x):
    ref = oracles.lie_series_exp(oracles.field_poly(x), 8)
    assert close(exp_field(x), oracles.diffeo_from(ref, 2, 8), 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_exp_of_linear_field_matches_matrix_exponential(seed):
    a = np.random.default_rng(seed).normal(size=(2, 2)) * 2
    phi = exp_field(FormalVectorField.linear(a, 6))
    assert np.allclose(phi.linear_part(), oracles.matrix_exp(a), rtol=1e-12, atol=1e-12)
    assert np.abs(np.array(phi.comps)[:, layout(2, 6).starts[2] :]).max() == 0


def test_exp_of_rotation_is_rotation_and_two_pi_is_identity():
    phi = exp_field(0.7 * rot(10))
    assert np.allclose(phi.linear_part(), [[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]], atol=1e-15)
    assert close(exp_field(2 * np.pi * rot(10)), FormalDiffeo.identity(2, 10), 1e-13)


@FAST
@given(fields(2, 8, 1, scale=0.7))
def test_flow_group_law(x):
    half = flow(x, 0.5)
    assert close(diffeo_compose(half, half), exp_field(x), 1e-10)
    assert close(diffeo_compose(exp_field(x), exp_field(-x)), FormalDiffeo.identity(2, 8), 1e-10)


@settings(max_examples=20, deadline=None, derandomize=True, database=None)
@given(diffeos(2, 6, linear=False))
def test_log_matches_order_by_order_oracle(phi):
    ref = oracles.log_order_by_order(oracles.field_poly(phi), 6)
    assert close(log_diffeo(phi), oracles.field_from(ref, 2, 6), 1e-11)


def test_log_of_large_coefficients_stays_accurate():
    x = field_from_rng(np.random.default_rng(206), 2, 12, 2)
    assert exp_field(x).max_abs() > 1000
    assert close(log_diffeo(exp_field(x)), x, 1e-10)


@settings(max_examples=20, deadline=None, derandomize=True, database=None)
@given(fields(2, 6, 2), fields(2, 6, 2))
def test_bch_through_degree_four(x, y):
    # f o exp(X) o exp(Y) = e^{Y} e^{X} f on functions, so the log is BCH(Y, X)
    z = log_diffeo(diffeo_compose(exp_field(x), exp_field(y)))
    ref = oracles.field_from(oracles.bch3(oracles.field_poly(y), oracles.field_poly(x), 6), 2, 6)
    cut = layout(2, 4).size
    assert close(np.array(z.comps)[:, :cut], np.array(ref.comps)[:, :cut], 1e-12)


def test_inverse_matches_lagrange_inversion():
    coeffs = [0.0, 1.5, -0.5, 0.25, 1.0, 0.0, -0.75, 0.1, 0.0]
    f = FormalDiffeo.from_components([TruncatedSeries(1, 8, np.array(coeffs))])
    ref = [float(c) for c in oracles.lagrange_inverse(coeffs, 8)]
    assert close(diffeo_invert(f).comps[0], ref, 1e-12)


@FAST
@given(diffeos(2, 10))
def test_inverse_roundtrip(phi):
    ident = FormalDiffeo.identity(2, 10)
    inv = diffeo_invert(phi)
    assert close(diffeo_compose(phi, inv), ident, 1e-11)
    assert close(diffeo_compose(inv, phi), ident, 1e-11)


def test_singular_linear_part_cannot_be_inverted():
    with pytest.raises(DomainError):
        diffeo_invert(FormalDiffeo.linear(np.array([[1.0, 2.0], [0.5, 1.0]]), 4))


@FAST
@given(diffeos(2, 8), diffeos(2, 8), diffeos(2, 8))
def test_composition_is_associative(f, g, h):
    assert close(diffeo_compose(diffeo_compose(f, g), h), diffeo_compose(f, diffeo_compose(g, h)), 1e-11)


@FAST
@given(diffeos(2, 8), fields(2, 8, 1, scale=0.5))
def test_pushforward_conjugates_flows(phi, x):
    lhs = diffeo_compose(diffeo_compose(phi, exp_field(x)), diffeo_invert(phi))
    assert close(lhs, exp_field(pushforward(phi, x)), 1e-9)


def test_composition_order_convention():
    x = TruncatedSeries.variable(1, 4, 0)
    f = FormalDiffeo.from_components([x + x**2])
    g = FormalDiffeo.from_components([x + x**3])
    # (f o g)(x) = g + g^2 = x + x^2 + x^3 + 2 x^4
    assert list(diffeo_compose(f, g).comps[0]) == [0, 1, 1, 1, 2]


def test_domain_errors():
    x = TruncatedSeries.variable(2, 4, 0)
    one = TruncatedSeries.constant(2, 4, 1.0)
    with pytest.raises(DomainError):
        exp_field(FormalVectorField.from_components([one, x]))
    with pytest.raises(DomainError):
        log_diffeo(FormalDiffeo.linear(np.diag([1.0, 2.0]), 4))
    with pytest.raises(DomainError):
        pushforward(FormalDiffeo.identity(2, 4), FormalVectorField.from_components([one, x]))
    with pytest.raises(StructuralError):
        diffeo_compose(FormalDiffeo.identity(2, 4), FormalDiffeo.identity(2, 5))


def test_tangent_to_identity_order():
    t = TruncatedSeries.variable(1, 12, 0)
    assert FormalDiffeo.from_components([t + t**10]).tangent_to_identity_order() == 10
    assert FormalDiffeo.identity(1, 12).tangent_to_identity_order() > 12
