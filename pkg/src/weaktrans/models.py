"""Parametric model families exposed through densities and score functions.

Every family is population-level: densities, supports, analytic scores and
closed-form classical moments where they exist.  There is no sampling and
no fitting.  Families with pathological classical moments (the Cauchy has
none, the log-normal is moment-indeterminate) are exactly the point of the
library; their classical defects are encoded explicitly so the degeneracy
classifier can report them.

``classical_moment`` returns the :data:`UNDEFINED` sentinel, never NaN,
when a moment does not exist.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np

__all__ = [
    "UNDEFINED",
    "Model",
    "GaussianLocation",
    "CauchyLocation",
    "LogNormal",
    "LogNormalStieltjes",
    "SteinGaussianTarget",
    "GaussianMVN",
    "four_cycle_edges",
    "path_edges",
    "make_model",
    "model_from_dict",
]

_REAL_LINE = (-math.inf, math.inf)
_POSITIVE_HALF_LINE = (0.0, math.inf)


class _Undefined:
    """Sentinel for classically nonexistent moments (a value, not an error)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "undefined"


UNDEFINED = _Undefined()


def _gaussian_raw_moment(mu: float, sigma: float, j: int) -> float:
    """E[X^j] for X ~ N(mu, sigma^2) via the binomial/double-factorial form."""
    total = 0.0
    for k in range(0, j + 1, 2):
        dfact = 1.0
        for m in range(k - 1, 0, -2):
            dfact *= m
        total += math.comb(j, k) * dfact * sigma**k * mu ** (j - k)
    return total


class Model:
    """Common surface of all families.

    Subclasses set ``family``, ``param_dim``, ``support``, ``dim``,
    ``has_analytic_score``, ``classical_moments_defined`` and
    ``preferred_transform`` (the quadrature variable change that suits the
    family's support).
    """

    family: str = ""
    param_dim: int = 0
    dim: int = 1
    support: Tuple[float, float] = _REAL_LINE
    has_analytic_score: bool = False
    classical_moments_defined: bool = True
    preferred_transform: str = "none"

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.param_dim,):
            raise ValueError(
                f"{self.family} expects {self.param_dim} parameter(s), got {theta.shape}"
            )
        return theta

    def _check_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        if np.any(x <= lo) or np.any(x >= hi):
            raise ValueError(f"point outside support ({lo}, {hi}) of {self.family}")
        return x

    def density(self, x, theta) -> np.ndarray:
        return np.exp(self.log_density(x, theta))

    def log_density(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def score(self, x, theta, a: int) -> np.ndarray:
        """d/d theta_a of log density; only for has_analytic_score families."""
        raise NotImplementedError(f"{self.family} has no analytic score")

    def classical_moment(self, theta, j: int):
        raise ValueError(f"classical moments are not implemented for {self.family}")

    def to_dict(self) -> dict:
        return {"family": self.family}


class GaussianLocation(Model):
    """Location family N(mu, sigma0^2) with sigma0 fixed; theta = (mu,)."""

    family = "gaussian_location"
    param_dim = 1
    support = _REAL_LINE
    has_analytic_score = True

    def __init__(self, sigma0: float = 1.0):
        if not sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        self.sigma0 = float(sigma0)

    def log_density(self, x, theta):
        (mu,) = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        z = (x - mu) / self.sigma0
        return -0.5 * z * z - math.log(self.sigma0 * math.sqrt(2 * math.pi))

    def score(self, x, theta, a: int):
        (mu,) = self.check_theta(theta)
        if a != 0:
            raise IndexError(f"parameter index {a} out of range for p = 1")
        return (np.asarray(x, dtype=float) - mu) / self.sigma0**2

    def classical_moment(self, theta, j: int):
        (mu,) = self.check_theta(theta)
        return _gaussian_raw_moment(mu, self.sigma0, j)

    def to_dict(self) -> dict:
        return {"family": self.family, "sigma0": self.sigma0}


class CauchyLocation(Model):
    """Cauchy location family 1 / (pi (1 + (x - mu)^2)); theta = (mu,).

    Classically momentless for every order >= 1; with a decaying kernel all
    weak moments are finite.
    """

    family = "cauchy_location"
    param_dim = 1
    support = _REAL_LINE
    has_analytic_score = True
    classical_moments_defined = False

    def log_density(self, x, theta):
        (mu,) = self.check_theta(theta)
        z = np.asarray(x, dtype=float) - mu
        return -np.log1p(z * z) - math.log(math.pi)

    def score(self, x, theta, a: int):
        (mu,) = self.check_theta(theta)
        if a != 0:
            raise IndexError(f"parameter index {a} out of range for p = 1")
        z = np.asarray(x, dtype=float) - mu
        return 2 * z / (1 + z * z)

    def classical_moment(self, theta, j: int):
        self.check_theta(theta)
        if j == 0:
            return 1.0
        return UNDEFINED


class LogNormal(Model):
    """Log-normal family on (0, inf); theta = (mu, sigma)."""

    family = "lognormal"
    param_dim = 2
    support = _POSITIVE_HALF_LINE
    has_analytic_score = True
    preferred_transform = "log_substitution"

    def check_theta(self, theta):
        theta = super().check_theta(theta)
        if theta[1] <= 0:
            raise ValueError("lognormal sigma must be positive")
        return theta

    def log_density(self, x, theta):
        mu, sigma = self.check_theta(theta)
        x = self._check_support(x)
        z = (np.log(x) - mu) / sigma
        return -0.5 * z * z - np.log(x) - math.log(sigma * math.sqrt(2 * math.pi))

    def score(self, x, theta, a: int):
        mu, sigma = self.check_theta(theta)
        x = self._check_support(x)
        centred = np.log(x) - mu
        if a == 0:
            return centred / sigma**2
        if a == 1:
            return centred**2 / sigma**3 - 1 / sigma
        raise IndexError(f"parameter index {a} out of range for p = 2")

    def classical_moment(self, theta, j: int):
        mu, sigma = self.check_theta(theta)
        return math.exp(j * mu + j * j * sigma * sigma / 2)


class LogNormalStieltjes(LogNormal):
    """Log-normal perturbed by the oscillation ``1 + eps sin(2 pi ln x)``.

    All polynomial moments of the perturbation against the log-normal vanish,
    so the classical moments coincide exactly with the unperturbed family
    while the distributions differ.  Requires ``|eps| <= 1`` to keep the
    density nonnegative.  The perturbation is parameter-free, so the score
    functions are those of the log-normal.
    """

    family = "lognormal_stieltjes"

    def __init__(self, eps: float = 0.5):
        if not abs(eps) <= 1:
            raise ValueError("lognormal_stieltjes requires |eps| <= 1")
        self.eps = float(eps)

    def density(self, x, theta):
        base = np.exp(LogNormal.log_density(self, x, theta))
        x = np.asarray(x, dtype=float)
        return base * (1 + self.eps * np.sin(2 * math.pi * np.log(x)))

    def log_density(self, x, theta):
        with np.errstate(divide="ignore"):
            return np.log(self.density(x, theta))

    def to_dict(self) -> dict:
        return {"family": self.family, "eps": self.eps}


class SteinGaussianTarget(Model):
    """Two-parameter Gaussian family N(mu, sigma^2); theta = (mu, sigma).

    Serves both as the Stein target and as the candidate family whose zero
    set is probed.
    """

    family = "stein_gaussian_target"
    param_dim = 2
    support = _REAL_LINE
    has_analytic_score = True

    def check_theta(self, theta):
        theta = super().check_theta(theta)
        if theta[1] <= 0:
            raise ValueError("sigma must be positive")
        return theta

    def log_density(self, x, theta):
        mu, sigma = self.check_theta(theta)
        z = (np.asarray(x, dtype=float) - mu) / sigma
        return -0.5 * z * z - math.log(sigma * math.sqrt(2 * math.pi))

    def score(self, x, theta, a: int):
        mu, sigma = self.check_theta(theta)
        centred = np.asarray(x, dtype=float) - mu
        if a == 0:
            return centred / sigma**2
        if a == 1:
            return centred**2 / sigma**3 - 1 / sigma
        raise IndexError(f"parameter index {a} out of range for p = 2")

    def classical_moment(self, theta, j: int):
        mu, sigma = self.check_theta(theta)
        return _gaussian_raw_moment(mu, sigma, j)


def four_cycle_edges() -> Tuple[Tuple[int, int], ...]:
    """Chordless 4-cycle 0-1-2-3-0 (precision zeros at (0,2) and (1,3))."""
    return ((0, 1), (1, 2), (2, 3), (0, 3))


def path_edges(d: int = 4) -> Tuple[Tuple[int, int], ...]:
    """Chordal path 0-1-...-(d-1)."""
    return tuple((i, i + 1) for i in range(d - 1))


class GaussianMVN(Model):
    """Zero-mean Gaussian graphical model parameterised by its precision matrix.

    The free parameters are the entries of the precision matrix Omega that
    the graph allows: all d diagonal entries first, then one entry per edge
    in the given order.  Non-edges are identically zero by construction.
    Densities require Omega to be symmetric positive definite.

    Scores are not exposed; downstream derivative computations use finite
    differences of the closed-form weak features.
    """

    family = "gaussian_mvn"
    has_analytic_score = False

    def __init__(self, edges: Sequence[Tuple[int, int]], dim: int = 4):
        self.dim = int(dim)
        edges = tuple((min(i, j), max(i, j)) for i, j in edges)
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges")
        for i, j in edges:
            if not (0 <= i < j < self.dim):
                raise ValueError(f"edge ({i}, {j}) out of range for dim {self.dim}")
        self.edges = edges
        self.param_dim = self.dim + len(edges)
        self.support = _REAL_LINE

    @property
    def free_entries(self) -> Tuple[Tuple[int, int], ...]:
        """Index pairs of the free precision entries, diagonal first."""
        return tuple((i, i) for i in range(self.dim)) + self.edges

    def omega(self, theta) -> np.ndarray:
        theta = self.check_theta(theta)
        om = np.zeros((self.dim, self.dim))
        for value, (i, j) in zip(theta, self.free_entries):
            om[i, j] = value
            om[j, i] = value
        return om

    def covariance(self, theta) -> np.ndarray:
        om = self.omega(theta)
        try:
            np.linalg.cholesky(om)
        except np.linalg.LinAlgError as exc:
            raise ValueError("precision matrix is not positive definite") from exc
        return np.linalg.inv(om)

    def log_density(self, x, theta):
        om = self.omega(theta)
        sign, logdet = np.linalg.slogdet(om)
        if sign <= 0:
            raise ValueError("precision matrix is not positive definite")
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points in R^{self.dim}")
        quad = np.einsum("...i,ij,...j->...", x, om, x)
        return 0.5 * (logdet - self.dim * math.log(2 * math.pi)) - 0.5 * quad

    def to_dict(self) -> dict:
        return {"family": self.family, "dim": self.dim, "edges": [list(e) for e in self.edges]}


_FAMILIES = {
    "gaussian_location": GaussianLocation,
    "cauchy_location": CauchyLocation,
    "lognormal": LogNormal,
    "lognormal_stieltjes": LogNormalStieltjes,
    "stein_gaussian_target": SteinGaussianTarget,
    "gaussian_mvn": GaussianMVN,
}


def make_model(family: str, **kwargs) -> Model:
    """Instantiate a family by its enumeration name."""
    try:
        cls = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}") from None
    return cls(**kwargs)


def model_from_dict(spec: dict) -> Model:
    """Build a model from its scenario-file form."""
    spec = dict(spec)
    family = spec.pop("family", None)
    if family is None:
        raise ValueError("model block needs a 'family' key")
    spec.pop("theta", None)  # grids/points live elsewhere in the scenario
    if family == "gaussian_mvn" and "edges" in spec:
        spec["edges"] = [tuple(e) for e in spec["edges"]]
    return make_model(family, **spec)
