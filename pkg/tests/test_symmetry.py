import math

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from strategies import close, random_coeffs, seeds
from folia.catalog import all_fields, circles, euler, radius2, reflection, rot, rotation, shear, spiral_generator, spirals
from folia.errors import DomainError, NotAFunctionOfInvariant, UnsupportedError
from folia.geometry import FormalDiffeo, FormalVectorField, diffeo_compose, exp_field
from folia.jets import TruncatedSeries
from folia.symmetry import (
    check_first_integral,
    inner_certificate,
    inner_geq_k_test,
    is_infinitesimal_symmetry,
    is_symmetry,
    out_class_invariant,
    winding_number,
)

N = 10
FAST = settings(max_examples=10, deadline=None, derandomize=True, database=None)


def recompose(factors, dim, order):
    phi = FormalDiffeo.identity(dim, order)
    for z in factors:
        phi = diffeo_compose(phi, exp_field(z))
    return phi


def test_symmetry_reports():
    m = circles(N)
    assert is_symmetry(m, rotation(0.7, N)).is_symmetry
    rep = is_symmetry(m, shear(N))
    assert not rep and rep.fail_degrees() == [1, 1]
    assert is_symmetry(m, exp_field(radius2(N) * euler(N)))


def test_infinitesimal_symmetries():
    m = circles(N)
    assert is_infinitesimal_symmetry(m, radius2(N) * euler(N))
    assert is_infinitesimal_symmetry(m, rot(N))
    x = TruncatedSeries.variable(2, N, 0)
    assert not is_infinitesimal_symmetry(m, FormalVectorField.from_components([x, TruncatedSeries.zero(2, N)]))


@pytest.mark.parametrize("theta", [0.7, -2.5, 0.7 + 2 * math.pi])
def test_rotation_certificates_recompose(theta):
    m = circles(N)
    phi = rotation(theta, N)
    cert = inner_certificate(m, phi)
    assert cert and cert.recompose_error < 1e-10
    assert close(recompose(cert.factors, 2, N), phi, 1e-10)
    assert all(m.contains(z) for z in cert.factors)


@FAST
@given(seeds)
def test_flows_of_module_elements_are_certified(seed):
    rng = np.random.default_rng(seed)
    m = circles(N)
    f = TruncatedSeries(2, N, random_coeffs(rng, 2, N, scale=0.5))
    phi = exp_field(f * rot(N))
    cert = inner_certificate(m, phi)
    assert cert
    assert close(recompose(cert.factors, 2, N), phi, 1e-8)


def test_reflection_is_refuted_at_the_linear_stage():
    res = inner_certificate(circles(N), reflection(N))
    assert not res and res.stage == 1 and res.refuted


def test_radial_flow_fails_at_stage_two_degree_three():
    res = inner_certificate(circles(N), exp_field(radius2(N) * euler(N)))
    assert not res and res.stage == 2 and res.degree == 3 and not res.refuted


def test_negative_eigenvalues_use_two_linear_factors():
    m = all_fields(2, N)
    phi = FormalDiffeo.linear(np.diag([-1.0, -2.0]), N)
    cert = inner_certificate(m, phi)
    assert cert and len(cert.factors) >= 2
    assert close(recompose(cert.factors, 2, N), phi, 1e-10)


def test_filtered_inner_test():
    assert inner_geq_k_test(circles(N), 2, exp_field(2 * math.pi * rot(N))).passed
    res = inner_geq_k_test(spirals(N), 2, exp_field(2 * math.pi * spiral_generator(N)))
    assert not res.passed and res.obstruction_degree == 3
    assert inner_geq_k_test(circles(N), 3, exp_field(radius2(N) * rot(N))).passed
    with pytest.raises(DomainError):
        inner_geq_k_test(circles(N), 1, rotation(0.3, N))
    with pytest.raises(DomainError):
        inner_geq_k_test(circles(N), 2, rotation(0.3, N))


def test_out_class_matches_picard_oracle():
    oc = out_class_invariant(circles(N), radius2(N), exp_field(radius2(N) * euler(N)))
    ref = [float(c) for c in oracles.picard_flow(lambda u: 2 * u**2, 1, oc.g.order)]
    assert close(oc.g.coeffs, ref, 1e-9) and oc.sign == 1
    oc = out_class_invariant(circles(N), radius2(N), reflection(N))
    assert close(oc.g.coeffs, [0, 1] + [0] * (oc.g.order - 1), 1e-12) and oc.sign == -1


def test_out_class_rejects_non_invariants():
    x = TruncatedSeries.variable(2, N, 0)
    with pytest.raises(DomainError):
        check_first_integral(circles(N), x)
    # pullback by a shear is not a function of r^2
    with pytest.raises(NotAFunctionOfInvariant):
        out_class_invariant(FoliationModuleFree(), radius2(N), shear(N))


def FoliationModuleFree():
    from folia.modules import FoliationModule

    return FoliationModule([], dim=2, order=N)


@pytest.mark.parametrize("n", [-2, -1, 0, 1, 2])
def test_winding_numbers(n):
    path = [exp_field((2 * math.pi * n * s / 63) * rot(N)) for s in range(64)]
    assert winding_number(circles(N), path) == n


def test_winding_errors():
    m = circles(N)
    with pytest.raises(UnsupportedError):
        winding_number(all_fields(2, N), [FormalDiffeo.identity(2, N)])
    with pytest.raises(UnsupportedError):
        winding_number(spirals(N).__class__([radius2(N) * euler(N) + euler(N)]), [FormalDiffeo.identity(2, N)])
    with pytest.raises(DomainError):
        winding_number(m, [])
    with pytest.raises(DomainError):
        winding_number(m, [rotation(0.5, N), FormalDiffeo.identity(2, N)])
    with pytest.raises(DomainError):
        winding_number(m, [FormalDiffeo.identity(2, N), rotation(0.5, N)])
    with pytest.raises(DomainError):
        winding_number(m, [rotation(t, N) for t in np.linspace(0, 2 * math.pi, 4)])
