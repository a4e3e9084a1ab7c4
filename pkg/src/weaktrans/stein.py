"""Kernel-damped Stein features for a Gaussian target family.

The Gaussian target N(mu, sigma^2) has Stein operator
``A g = g' - ((x - mu) / sigma^2) g``; its expectation under the target
vanishes for every admissible g, and that zero characterises the target.
Here the operator is applied to the *kernel-damped* test functions
``g = f_k phi`` (product rule), so each feature

    psi_k(candidate) = E_candidate[ A(f_k phi)(X) ]

is finite even for candidates without moments (e.g. Cauchy), and the target
family is the common zero set.  The test-function dictionary defaults to
scaled probabilists' Hermite polynomials, orthogonal under the target,
which keeps the feature rows well conditioned.

The dictionary is finite by construction; whether it is measure-determining
is a modelling assumption documented in reports, not machine-checked.  Only
the rank (surjectivity) condition of the zero-set Jacobian is computed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e

from .featuremap import FD_STEP
from .kernel import GaussianKernel
from .models import Model, SteinGaussianTarget
from .quadrature import DEFAULT_CONFIG, QuadConfig, integrate
from .transversality import RANK_RTOL, numerical_rank

__all__ = [
    "SteinSpec",
    "hermite_pair",
    "stein_feature",
    "stein_features",
    "weak_stein_discrepancy",
    "stein_jacobian_check",
]


def hermite_pair(degree: int, mu: float, sigma: float) -> Tuple[Callable, Callable]:
    """``sigma^k He_k((x - mu) / sigma)`` and its derivative.

    The scaling makes the low degrees the familiar centred monomial
    combinations: degree 1 is ``x - mu``, degree 2 is ``(x - mu)^2 - sigma^2``.
    """
    if degree < 1:
        raise ValueError("hermite degrees start at 1")
    coeffs = np.zeros(degree + 1)
    coeffs[degree] = 1.0

    def f(x, c=coeffs, d=degree):
        return sigma**d * hermite_e.hermeval((np.asarray(x) - mu) / sigma, c)

    dcoeffs = hermite_e.hermeder(coeffs)

    def fprime(x, c=dcoeffs, d=degree):
        return sigma ** (d - 1) * hermite_e.hermeval((np.asarray(x) - mu) / sigma, c)

    return f, fprime


@dataclass(frozen=True)
class SteinSpec:
    """Gaussian target, kernel, and a finite test-function dictionary.

    ``n_functions`` requests Hermite degrees ``1..K`` standardised to the
    target; passing explicit ``functions`` (pairs ``(f, f')``) overrides the
    dictionary, e.g. for conditioning experiments.
    """

    target_theta: Tuple[float, float]
    kernel: GaussianKernel
    n_functions: int = 0
    functions: Tuple = ()

    def __post_init__(self) -> None:
        mu, sigma = self.target_theta
        if sigma <= 0:
            raise ValueError("target sigma must be positive")
        if not self.functions and self.n_functions < 1:
            raise ValueError("need a dictionary: n_functions >= 1 or explicit functions")

    @property
    def pairs(self) -> Tuple[Tuple[Callable, Callable], ...]:
        if self.functions:
            return tuple(self.functions)
        mu, sigma = self.target_theta
        return tuple(
            hermite_pair(k, mu, sigma) for k in range(1, self.n_functions + 1)
        )

    @property
    def n_features(self) -> int:
        return len(self.functions) if self.functions else self.n_functions

    def with_target(self, theta) -> "SteinSpec":
        return dataclasses.replace(self, target_theta=(float(theta[0]), float(theta[1])))

    def with_kernel(self, kernel: GaussianKernel) -> "SteinSpec":
        return dataclasses.replace(self, kernel=kernel)

    def operator_factor(self, k: int) -> Callable:
        """``A(f_k phi) / phi`` as a plain function of x.

        With a Gaussian kernel ``phi'/phi = -x/s^2``, the product rule gives
        ``A(f phi) = phi * (f' - f * (x / s^2 + (x - mu) / sigma^2))``.
        """
        mu, sigma = self.target_theta
        s2 = self.kernel.s**2
        f, fprime = self.pairs[k]

        def factor(x):
            x = np.asarray(x, dtype=float)
            return fprime(x) - f(x) * (x / s2 + (x - mu) / sigma**2)

        return factor


def _expectation(model: Model, theta, kernel: GaussianKernel, factor, cfg: QuadConfig) -> float:
    theta = model.check_theta(theta)

    def integrand(x):
        w = np.exp(model.log_density(x, theta) + kernel.log_eval(x))
        out = np.zeros_like(w)
        m = w != 0
        if m.any():
            out[m] = w[m] * factor(x[m])
        return out

    value, _ = integrate(integrand, model.support, cfg)
    return value


def stein_feature(
    candidate: Model,
    theta_c,
    spec: SteinSpec,
    k: int,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> float:
    """``E_candidate[A(f_k phi)(X)]``; zero when the candidate is the target."""
    if not 0 <= k < spec.n_features:
        raise IndexError(f"test-function index {k} out of range")
    return _expectation(candidate, theta_c, spec.kernel, spec.operator_factor(k), cfg)


def stein_features(
    candidate: Model,
    theta_c,
    spec: SteinSpec,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """All K Stein features of the candidate."""
    return np.array(
        [stein_feature(candidate, theta_c, spec, k, cfg) for k in range(spec.n_features)]
    )


def weak_stein_discrepancy(
    candidate: Model,
    theta_c,
    spec: SteinSpec,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> float:
    """Largest absolute Stein feature over the dictionary; zero on the target."""
    return float(np.max(np.abs(stein_features(candidate, theta_c, spec, cfg))))


def stein_jacobian_check(
    spec: SteinSpec,
    theta_grid: Sequence,
    cfg: QuadConfig = DEFAULT_CONFIG,
    rank_rtol: float = RANK_RTOL,
) -> list:
    """Zero-set surjectivity audit along the target family.

    Each grid point theta* is a zero-set point: the candidate family equals
    the target family and the features vanish at theta_c = theta*.  The
    K x (p + q) Jacobian in (candidate parameters, kernel scale) is formed
    by central differences there; surjectivity means numerical rank K.
    Returns one dict per grid point with the rank report, the verdict, and
    the zero-set residual actually achieved.
    """
    candidate = SteinGaussianTarget()
    results = []
    for theta in theta_grid:
        theta = candidate.check_theta(theta)
        spec_here = spec.with_target(theta)
        residual = float(np.max(np.abs(stein_features(candidate, theta, spec_here, cfg))))

        columns = []
        for a in range(candidate.param_dim):
            h = FD_STEP * max(1.0, abs(theta[a]))
            step = np.zeros(candidate.param_dim)
            step[a] = h
            plus = stein_features(candidate, theta + step, spec_here, cfg)
            minus = stein_features(candidate, theta - step, spec_here, cfg)
            columns.append((plus - minus) / (2 * h))
        s = spec_here.kernel.s
        hk = FD_STEP * max(1.0, s)
        plus = stein_features(
            candidate, theta, spec_here.with_kernel(spec_here.kernel.with_scale(s + hk)), cfg
        )
        minus = stein_features(
            candidate, theta, spec_here.with_kernel(spec_here.kernel.with_scale(s - hk)), cfg
        )
        columns.append((plus - minus) / (2 * hk))

        jac = np.column_stack(columns)
        report = numerical_rank(jac, rank_rtol)
        results.append(
            {
                "theta": [float(v) for v in theta],
                "zero_residual": residual,
                "rank_report": report,
                "surjective": report.numerical_rank == spec_here.n_features,
                "marginal": report.marginal,
            }
        )
    return results
