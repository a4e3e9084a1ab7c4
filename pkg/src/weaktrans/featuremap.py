"""Weak feature maps and their joint parameter/kernel Jacobians.

A feature is a kernel-damped expectation ``E_theta[g(X) phi(X)]``: monomials
give weak moments, complex exponentials give the weak characteristic
function (stored as interleaved real/imaginary coordinates so downstream
rank analysis sees a real matrix), and arbitrary test functions are allowed
for custom diagnostics.  The joint Jacobian splits into a model block
(derivatives in theta) and a kernel block (derivatives in the kernel scale).

Integrands are assembled as ``exp(log density + log kernel)`` and the
polynomial/score factors are applied only where that base weight is nonzero,
which keeps ``x**j`` overflow at the far quadrature nodes from polluting the
sums.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .kernel import GaussianKernel
from .models import GaussianMVN, LogNormal, LogNormalStieltjes, Model
from .quadrature import DEFAULT_CONFIG, QuadConfig, gaussian_product_moment, integrate

__all__ = [
    "FeatureSpec",
    "FeatureVector",
    "JacobianDecomposition",
    "weak_moment",
    "feature_map",
    "weak_char_fn",
    "weak_cgf",
    "weak_cumulants",
    "jacobian",
]

# Central-difference step scale; cube root of the effective evaluation noise.
FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


@dataclass(frozen=True)
class FeatureSpec:
    """Which weak features make up the map.

    ``kind`` is one of ``moments`` (integer orders), ``charfn`` (a grid of
    frequencies, each contributing a (Re, Im) pair), or ``custom`` (monomial
    multi-indices, or callables for one-dimensional models).  ``n_features``
    counts real coordinates, so a charfn spec with m frequencies has 2m.
    """

    kind: str
    orders: Tuple[int, ...] = ()
    u_values: Tuple[float, ...] = ()
    entries: Tuple = ()
    labels: Tuple[str, ...] = field(default=(), compare=False)

    @staticmethod
    def moments(orders: Sequence[int]) -> "FeatureSpec":
        orders = tuple(int(j) for j in orders)
        if len(orders) < 1:
            raise ValueError("need at least one moment order")
        if any(j < 0 for j in orders) or any(
            a >= b for a, b in zip(orders, orders[1:])
        ):
            raise ValueError("moment orders must be strictly increasing and >= 0")
        return FeatureSpec(
            kind="moments", orders=orders, labels=tuple(f"m{j}" for j in orders)
        )

    @staticmethod
    def charfn(u_values: Sequence[float]) -> "FeatureSpec":
        u_values = tuple(float(u) for u in u_values)
        if len(u_values) < 1:
            raise ValueError("need at least one frequency")
        labels = []
        for u in u_values:
            labels += [f"re_cf({u:g})", f"im_cf({u:g})"]
        return FeatureSpec(kind="charfn", u_values=u_values, labels=tuple(labels))

    @staticmethod
    def monomials(alphas: Sequence[Sequence[int]]) -> "FeatureSpec":
        entries = tuple(tuple(int(a) for a in alpha) for alpha in alphas)
        if len(entries) < 1:
            raise ValueError("need at least one monomial")
        labels = []
        for alpha in entries:
            terms = [f"x{i}" if a == 1 else f"x{i}^{a}" for i, a in enumerate(alpha) if a]
            labels.append("*".join(terms) if terms else "1")
        return FeatureSpec(kind="custom", entries=entries, labels=tuple(labels))

    @staticmethod
    def custom(functions: Sequence[Callable], labels: Optional[Sequence[str]] = None) -> "FeatureSpec":
        entries = tuple(functions)
        if len(entries) < 1:
            raise ValueError("need at least one test function")
        if labels is None:
            labels = tuple(f"g{r}" for r in range(len(entries)))
        return FeatureSpec(kind="custom", entries=entries, labels=tuple(labels))

    @staticmethod
    def pair_features(model: GaussianMVN) -> "FeatureSpec":
        """Second-moment monomials x_i x_j over the model's free precision entries."""
        alphas = []
        for i, j in model.free_entries:
            alpha = [0] * model.dim
            alpha[i] += 1
            alpha[j] += 1
            alphas.append(alpha)
        return FeatureSpec.monomials(alphas)

    @property
    def n_features(self) -> int:
        if self.kind == "moments":
            return len(self.orders)
        if self.kind == "charfn":
            return 2 * len(self.u_values)
        return len(self.entries)

    def to_dict(self) -> dict:
        if self.kind == "moments":
            return {"kind": "moments", "orders": list(self.orders)}
        if self.kind == "charfn":
            return {"kind": "charfn", "u": list(self.u_values)}
        if all(isinstance(e, tuple) for e in self.entries):
            return {"kind": "pair_moments", "monomials": [list(e) for e in self.entries]}
        return {"kind": "custom", "labels": list(self.labels)}


def spec_from_dict(block: dict, model: Optional[Model] = None) -> FeatureSpec:
    """Build a FeatureSpec from its scenario-file form."""
    kind = block.get("kind")
    if kind == "moments":
        return FeatureSpec.moments(block["orders"])
    if kind == "charfn":
        return FeatureSpec.charfn(block["u"])
    if kind == "pair_moments":
        if "monomials" in block:
            return FeatureSpec.monomials(block["monomials"])
        if isinstance(model, GaussianMVN):
            return FeatureSpec.pair_features(model)
        raise ValueError("pair_moments needs explicit monomials or a gaussian_mvn model")
    raise ValueError(f"unknown feature kind {kind!r}")


@dataclass(frozen=True)
class FeatureVector:
    """Weak feature values at one (theta, lambda) point."""

    values: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    labels: Tuple[str, ...] = ()


@dataclass(frozen=True)
class JacobianDecomposition:
    """The joint feature-map Jacobian split into model and kernel blocks."""

    d_theta: np.ndarray  # (K+1) x p
    d_lambda: np.ndarray  # (K+1) x q
    method: str

    @property
    def joint(self) -> np.ndarray:
        return np.hstack([self.d_theta, self.d_lambda])

    @property
    def n_features(self) -> int:
        return self.d_theta.shape[0]


def _effective_cfg(model: Model, cfg: QuadConfig) -> QuadConfig:
    if cfg.transform == "none" and model.preferred_transform != "none":
        return dataclasses.replace(cfg, transform=model.preferred_transform)
    return cfg


def _base_weight(model: Model, theta, kernel: GaussianKernel):
    """Vectorised x -> density(x; theta) * phi(x), assembled in log space."""
    theta = model.check_theta(theta)
    if isinstance(model, LogNormalStieltjes):
        eps = model.eps

        def base(x):
            w = np.exp(LogNormal.log_density(model, x, theta) + kernel.log_eval(x))
            return w * (1 + eps * np.sin(2 * math.pi * np.log(x)))

        return base

    def base(x):
        return np.exp(model.log_density(x, theta) + kernel.log_eval(x))

    return base


def _masked_integrand(base, factor: Optional[Callable]):
    """Apply a possibly overflowing factor only where the base weight is nonzero."""
    if factor is None:
        return base

    def integrand(x):
        w = base(x)
        out = np.zeros_like(w)
        m = w != 0
        if m.any():
            out[m] = w[m] * factor(x[m])
        return out

    return integrand


def _feature_factors(spec: FeatureSpec):
    """Per-feature multiplicative factors g_r(x) for the 1-d quadrature path."""
    factors = []
    if spec.kind == "moments":
        for j in spec.orders:
            factors.append(None if j == 0 else (lambda x, j=j: x**j))
    elif spec.kind == "charfn":
        for u in spec.u_values:
            factors.append(lambda x, u=u: np.cos(u * x))
            factors.append(lambda x, u=u: np.sin(u * x))
    else:
        for entry in spec.entries:
            if isinstance(entry, tuple):
                if len(entry) != 1:
                    raise ValueError(
                        "multivariate monomial features need a gaussian_mvn model"
                    )
                j = entry[0]
                factors.append(None if j == 0 else (lambda x, j=j: x**j))
            else:
                factors.append(entry)
    return factors


def _mvn_feature_values(model: GaussianMVN, theta, kernel: GaussianKernel, spec: FeatureSpec):
    if spec.kind != "custom" or not all(isinstance(e, tuple) for e in spec.entries):
        raise ValueError("gaussian_mvn supports monomial feature specs only")
    if kernel.dim != model.dim:
        raise ValueError("kernel dimension must match model dimension")
    cov = model.covariance(theta)
    mean = np.zeros(model.dim)
    scale = 1.0 if kernel.normalized else (2 * math.pi * kernel.s**2) ** (model.dim / 2)
    return np.array(
        [scale * gaussian_product_moment(cov, mean, kernel.s, alpha) for alpha in spec.entries]
    )


def weak_moment(
    model: Model,
    theta,
    kernel: GaussianKernel,
    j: int,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> float:
    """Kernel-damped moment ``E_theta[X^j phi(X)]``; finite for every order."""
    if isinstance(model, GaussianMVN):
        raise ValueError("scalar weak moments are for 1-d families; use pair features")
    if j < 0:
        raise ValueError("moment order must be >= 0")
    cfg = _effective_cfg(model, cfg)
    base = _base_weight(model, theta, kernel)
    factor = None if j == 0 else (lambda x: x**j)
    value, _ = integrate(_masked_integrand(base, factor), model.support, cfg)
    return value


def feature_map(
    model: Model,
    theta,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> FeatureVector:
    """Evaluate the full weak feature vector at theta."""
    theta = model.check_theta(theta)
    if isinstance(model, GaussianMVN):
        values = _mvn_feature_values(model, theta, kernel, spec)
    else:
        cfg = _effective_cfg(model, cfg)
        base = _base_weight(model, theta, kernel)
        values = np.array(
            [
                integrate(_masked_integrand(base, factor), model.support, cfg)[0]
                for factor in _feature_factors(spec)
            ]
        )
    return FeatureVector(values=values, theta=theta, lam=kernel.lam, labels=spec.labels)


def weak_char_fn(
    model: Model,
    theta,
    kernel: GaussianKernel,
    u: float,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> complex:
    """Weak characteristic function ``E_theta[e^{iuX} phi(X)]``."""
    if isinstance(model, GaussianMVN):
        raise ValueError("weak_char_fn is for 1-d families")
    cfg = _effective_cfg(model, cfg)
    base = _base_weight(model, theta, kernel)
    re, _ = integrate(_masked_integrand(base, lambda x: np.cos(u * x)), model.support, cfg)
    im, _ = integrate(_masked_integrand(base, lambda x: np.sin(u * x)), model.support, cfg)
    return complex(re, im)


def weak_cgf(
    model: Model,
    theta,
    kernel: GaussianKernel,
    t: float,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> float:
    """Weak cumulant generating function ``log E[e^{tX} phi] - log E[phi]``.

    The kernel's Gaussian decay dominates the exponential tilt, so this is
    finite for every real t even when the classical CGF does not exist.  The
    tilt is folded into the exponent of the integrand for stability.
    """
    if isinstance(model, GaussianMVN):
        raise ValueError("weak_cgf is for 1-d families")
    theta = model.check_theta(theta)
    cfg = _effective_cfg(model, cfg)

    if isinstance(model, LogNormalStieltjes):
        eps = model.eps

        def integrand(x):
            w = np.exp(
                t * x + LogNormal.log_density(model, x, theta) + kernel.log_eval(x)
            )
            return w * (1 + eps * np.sin(2 * math.pi * np.log(x)))

    else:

        def integrand(x):
            return np.exp(t * x + model.log_density(x, theta) + kernel.log_eval(x))

    tilted, _ = integrate(integrand, model.support, cfg)
    w0 = weak_moment(model, theta, kernel, 0, cfg)
    if tilted <= 0 or w0 <= 0:
        raise ValueError("nonpositive integral in weak_cgf")
    return math.log(tilted) - math.log(w0)


def weak_cumulants(
    model: Model,
    theta,
    kernel: GaussianKernel,
    max_order: int = 4,
    cfg: QuadConfig = DEFAULT_CONFIG,
    h: float = 0.05,
) -> np.ndarray:
    """Weak cumulants up to order 4 by central differences of the CGF at 0."""
    if not 1 <= max_order <= 4:
        raise ValueError("cumulant orders 1..4 are supported")
    k = {
        dt: weak_cgf(model, theta, kernel, dt * h, cfg)
        for dt in (-2, -1, 1, 2)
    }
    out = [
        (k[1] - k[-1]) / (2 * h),
        (k[1] + k[-1]) / h**2,  # K(0) = 0
        (k[2] - 2 * k[1] + 2 * k[-1] - k[-2]) / (2 * h**3),
        (k[2] - 4 * k[1] - 4 * k[-1] + k[-2]) / h**4,
    ]
    return np.array(out[:max_order])


def _fd_steps(values: np.ndarray) -> np.ndarray:
    return FD_STEP * np.maximum(1.0, np.abs(values))


def jacobian(
    model: Model,
    theta,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    method: Optional[str] = None,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> JacobianDecomposition:
    """Joint Jacobian of ``(theta, lambda) -> features`` split into blocks.

    ``method`` governs the model block: ``"analytic_score"`` integrates
    feature x kernel x density x score (families with analytic scores only),
    ``"finite_difference"`` uses central differences of the feature map with
    step ``eps^(1/3) * max(1, |theta_a|)``.  The kernel block uses the
    analytic kernel-scale derivative on the quadrature path; the closed-form
    multivariate Gaussian path differentiates its features by central
    differences in the scale.
    """
    theta = model.check_theta(theta)
    if method is None:
        method = "analytic_score" if model.has_analytic_score else "finite_difference"
    if method not in ("analytic_score", "finite_difference"):
        raise ValueError(f"unknown jacobian method {method!r}")
    if method == "analytic_score" and not model.has_analytic_score:
        raise ValueError(f"{model.family} has no analytic score; use finite_difference")

    p = model.param_dim
    n = spec.n_features

    if isinstance(model, GaussianMVN):
        if method == "analytic_score":
            raise ValueError("gaussian_mvn supports finite_difference only")

        def features_at(th, kern):
            return _mvn_feature_values(model, th, kern, spec)

        d_theta = np.zeros((n, p))
        hs = _fd_steps(theta)
        for a in range(p):
            step = np.zeros(p)
            step[a] = hs[a]
            d_theta[:, a] = (
                features_at(theta + step, kernel) - features_at(theta - step, kernel)
            ) / (2 * hs[a])
        hk = FD_STEP * max(1.0, kernel.s)
        d_lambda = (
            features_at(theta, kernel.with_scale(kernel.s + hk))
            - features_at(theta, kernel.with_scale(kernel.s - hk))
        ) / (2 * hk)
        return JacobianDecomposition(d_theta, d_lambda.reshape(n, 1), method)

    cfg = _effective_cfg(model, cfg)
    factors = _feature_factors(spec)
    base = _base_weight(model, theta, kernel)

    if method == "analytic_score":
        d_theta = np.zeros((n, p))
        for a in range(p):
            score = lambda x, a=a: model.score(x, theta, a)
            for r, factor in enumerate(factors):
                combined = (
                    score
                    if factor is None
                    else (lambda x, f=factor, sc=score: f(x) * sc(x))
                )
                d_theta[r, a], _ = integrate(
                    _masked_integrand(base, combined), model.support, cfg
                )
    else:
        hs = _fd_steps(theta)
        d_theta = np.zeros((n, p))
        for a in range(p):
            step = np.zeros(p)
            step[a] = hs[a]
            plus = feature_map(model, theta + step, kernel, spec, cfg).values
            minus = feature_map(model, theta - step, kernel, spec, cfg).values
            d_theta[:, a] = (plus - minus) / (2 * hs[a])

    dl_factor = kernel.dlambda_factor
    d_lambda = np.zeros((n, 1))
    for r, factor in enumerate(factors):
        combined = (
            dl_factor
            if factor is None
            else (lambda x, f=factor: f(x) * dl_factor(x))
        )
        d_lambda[r, 0], _ = integrate(
            _masked_integrand(base, combined), model.support, cfg
        )
    return JacobianDecomposition(d_theta, d_lambda, method)
