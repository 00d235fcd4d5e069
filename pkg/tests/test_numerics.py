import math

import numpy as np
import pytest

from mmhetnet.model import DomainError
from mmhetnet.numerics import (
    NonConvergence,
    QuadSpec,
    integrate_semiinfinite,
    lognormal_expectation,
    nth_derivative,
)


def test_quadspec_validation():
    with pytest.raises(DomainError):
        QuadSpec(rel_tol=0.0).check()
    with pytest.raises(DomainError):
        QuadSpec(max_evals=10).check()


def test_semiinfinite_known_integrals():
    est = integrate_semiinfinite(lambda x: math.exp(-x))
    assert est.value == pytest.approx(1.0, abs=1e-8)
    assert est.error >= 0 and est.count > 0
    est = integrate_semiinfinite(lambda x: x * math.exp(-(x**2)))
    assert est.value == pytest.approx(0.5, abs=1e-8)


def test_semiinfinite_power_tail():
    # oracle: high-resolution composite Simpson on [0, 100] plus geometric
    # continuation to 1e9 (frozen 1.5001913); the analytic value is
    # (pi/p)/sin(pi/p) at p = 2.1
    est = integrate_semiinfinite(lambda x: 1.0 / (1.0 + x**2.1))
    assert est.value == pytest.approx(1.5001913, abs=2e-6)


def test_semiinfinite_linearity():
    f = lambda x: math.exp(-x)
    g = lambda x: 1.0 / (1.0 + x**3)
    a, b = 2.5, -0.7
    lhs = integrate_semiinfinite(lambda x: a * f(x) + b * g(x)).value
    rhs = a * integrate_semiinfinite(f).value + b * integrate_semiinfinite(g).value
    assert lhs == pytest.approx(rhs, abs=1e-7)


def test_semiinfinite_nonconvergence_budget():
    # highly oscillatory integrand with a tiny budget exhausts subdivision
    with pytest.raises(NonConvergence) as exc:
        integrate_semiinfinite(
            lambda x: math.sin(23.0 * x) / (1.0 + 1e-4 * x), QuadSpec(max_evals=400)
        )
    assert math.isfinite(exc.value.estimate)
    assert exc.value.bound > 0


def test_lognormal_expectation_identity_and_moments():
    # sigma = sqrt(2) rho; rho for sigma = 1
    rho = 1.0 / math.sqrt(2.0)
    assert lognormal_expectation(lambda g: g, rho) == pytest.approx(math.exp(0.5), rel=1e-9)
    # moment family: E[G^(2/alpha)] = exp(4 rho^2/alpha^2)
    assert lognormal_expectation(lambda g: g ** (2.0 / 4.0), 1.0) == pytest.approx(
        math.exp(0.25), rel=1e-9
    )
    assert lognormal_expectation(lambda g: g * 0 + 7.0, 0.0) == 7.0


def test_lognormal_expectation_node_doubling():
    for s in (-2.0, -0.5, 1.0, 2.0):
        a = lognormal_expectation(lambda g, s=s: g**s, 0.8, nodes=24)
        b = lognormal_expectation(lambda g, s=s: g**s, 0.8, nodes=48)
        assert a == pytest.approx(b, rel=1e-6)


def test_nth_derivative_polynomial_and_exponential():
    assert nth_derivative(lambda t: t**3, 2.0, 2) == pytest.approx(12.0, abs=1e-6)
    # the n = 3 stencil at step 1e-3 sits on a ~1e-6 roundoff floor
    assert nth_derivative(lambda t: math.exp(-t), 1.0, 3) == pytest.approx(
        -math.exp(-1.0), rel=1e-4
    )
    assert nth_derivative(lambda t: t**2, 5.0, 0) == 25.0
    with pytest.raises(DomainError):
        nth_derivative(lambda t: t, 1.0, 7)


def test_nth_derivative_first_order_matches_symmetric_quotient():
    f = lambda t: math.log(1.0 + t) * math.exp(-0.3 * t)
    x0 = 1.7
    d1 = nth_derivative(f, x0, 1)
    h = 1e-6
    quotient = (f(x0 + h) - f(x0 - h)) / (2 * h)
    assert d1 == pytest.approx(quotient, rel=1e-6)
