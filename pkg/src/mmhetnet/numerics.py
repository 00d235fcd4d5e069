"""Quadrature and differentiation utilities shared by the analytical engine."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .model import DomainError, MetricEstimate


class NonConvergence(RuntimeError):
    """Quadrature budget exhausted; carries the best estimate and bound."""

    def __init__(self, message: str, estimate: float, bound: float, count: int = 0):
        super().__init__(message)
        self.estimate = estimate
        self.bound = bound
        self.count = count


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    max_evals: int = 200_000

    def check(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("tolerances must be positive")
        if self.max_evals < 100:
            raise DomainError("max_evals must be at least 100")


def integrate_semiinfinite(f: Callable[[float], float], spec: QuadSpec = QuadSpec()) -> MetricEstimate:
    """Integrate f over [0, inf) with adaptive subdivision.

    The substitution t = x/(1-x) maps [0, 1) onto [0, inf) so slow
    power-law tails keep their mass; the transformed integrand is then fed
    to adaptive Gauss-Kronrod subdivision.  Raises NonConvergence (with the
    best estimate attached) when the error bound cannot be brought under
    max(rel_tol*|value|, abs_tol) within the evaluation budget.
    """
    spec.check()

    def g(t: float) -> float:
        x = t / (1.0 - t)
        return f(x) / (1.0 - t) ** 2

    limit = max(10, spec.max_evals // 21)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, bound, info = integrate.quad(
            g, 0.0, 1.0, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
            limit=limit, full_output=True,
        )[:3]
    count = int(info.get("neval", 0))
    if bound > max(spec.rel_tol * abs(value), spec.abs_tol) * 10.0:
        raise NonConvergence(
            f"semi-infinite quadrature did not converge (bound {bound:.3e})",
            estimate=value, bound=bound, count=count,
        )
    return MetricEstimate(value=float(value), error=float(bound), count=count)


def lognormal_expectation(g: Callable[[np.ndarray], np.ndarray], rho: float, nodes: int = 24) -> float:
    """E[g(G)] for G = exp(Normal(0, 2*rho^2)) by Gauss-Hermite quadrature.

    Standard-normal nodes are scaled by sigma = sqrt(2)*rho; ``g`` must
    accept a vector of positive gains.  rho = 0 returns g(1) exactly.
    """
    if rho < 0:
        raise DomainError("rho must be nonnegative")
    if nodes < 4:
        raise DomainError("nodes must be at least 4")
    if rho == 0.0:
        return float(np.asarray(g(np.ones(1)))[0])
    x, w = np.polynomial.hermite.hermgauss(nodes)
    sigma = math.sqrt(2.0) * rho
    gains = np.exp(sigma * math.sqrt(2.0) * x)
    vals = np.asarray(g(gains), dtype=float)
    return float(np.dot(w, vals) / math.sqrt(math.pi))


def _stencil(offsets: np.ndarray, n: int) -> np.ndarray:
    """Finite-difference weights for the n-th derivative on given offsets."""
    k = len(offsets)
    a = np.vander(offsets, k, increasing=True).T
    b = np.zeros(k)
    b[n] = math.factorial(n)
    return np.linalg.solve(a, b)


def nth_derivative(f: Callable[[float], float], x0: float, n: int) -> float:
    """n-th derivative of f at x0 by central differences plus Richardson.

    Uses a symmetric stencil two orders wider than the derivative, step
    h = max(1e-3 * x0, 1e-5), refined once by Richardson extrapolation
    (the symmetric stencil has even error order, so the h, h/2 pair is
    combined with weight 4/3, -1/3).  Supports n <= 6; n = 0 is f(x0).
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return float(f(x0))
    if n > 6:
        raise DomainError("nth_derivative supports n <= 6")
    half = (n + 1) // 2 + 1
    offsets = np.arange(-half, half + 1, dtype=float)
    w = _stencil(offsets, n)
    h = max(1e-3 * abs(x0), 1e-5)

    def estimate(step: float) -> float:
        vals = np.array([f(x0 + o * step) for o in offsets])
        return float(np.dot(w, vals) / step**n)

    d_h = estimate(h)
    d_h2 = estimate(h / 2.0)
    return (4.0 * d_h2 - d_h) / 3.0
