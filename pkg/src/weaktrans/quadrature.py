"""Deterministic double-exponential (tanh-sinh family) quadrature.

All integrals in this package go through :func:`integrate`, which uses
nested trapezoidal refinement of a double-exponential change of variable.
Node sets are fixed per refinement level and cached, so repeated runs are
bit-identical.  Three variable changes are supported:

* ``sinh-sinh`` for the whole real line,
* ``exp-sinh`` for half-lines ``(a, inf)``,
* ``tanh-sinh`` for finite intervals,

plus a logarithmic substitution ``u = ln x`` for ``(0, inf)`` that maps the
half-line onto the real line before applying the sinh-sinh rule (the natural
choice for log-normal integrands).

Integrands must be vectorised: ``f(x: ndarray) -> ndarray``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

__all__ = [
    "QuadConfig",
    "QuadratureError",
    "integrate",
    "gaussian_product_moment",
]

_A = math.pi / 2.0
_H0 = 0.5
# sinh-sinh / exp-sinh reach |x| ~ 1.6e137 at t = 6.0, large enough for any
# kernel-damped integrand while keeping x**2 finite in float64.
_T_MAX_INF = 6.0
# finite-interval nodes are stored as offsets from the endpoints, so the
# only cap is keeping the offsets representable; 4.0 gives ~4e-38.
_T_MAX_FINITE = 4.0
# ln-substitution: drop nodes whose |ln x| exceeds this (exp would over/underflow).
_U_CLIP = 700.0


class QuadratureError(RuntimeError):
    """Raised on non-convergence or a NaN produced by the integrand."""


@dataclass(frozen=True)
class QuadConfig:
    """Tolerances and refinement budget for :func:`integrate`.

    ``transform`` selects the change of variable for semi-infinite supports:
    ``"none"`` picks automatically, ``"double_exponential"`` forces the
    exp-sinh map, ``"log_substitution"`` forces ``u = ln x`` (support must
    be ``(0, inf)``).
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_levels: int = 12
    transform: str = "none"

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.transform not in ("none", "double_exponential", "log_substitution"):
            raise ValueError(f"unknown transform {self.transform!r}")


DEFAULT_CONFIG = QuadConfig()

# (rule, level) -> (abscissae, weights without the trapezoidal step factor)
_NODE_CACHE: dict = {}


def _t_values(level: int, t_max: float) -> np.ndarray:
    """Trapezoid abscissae new at this level (all of them for level 0)."""
    if level == 0:
        n = int(math.floor(t_max / _H0))
        return np.arange(-n, n + 1) * _H0
    h = _H0 / 2**level
    k_max = int(math.floor(t_max / h))
    odd = np.arange(1, k_max + 1, 2)
    return np.concatenate([-odd[::-1], odd]) * h


def _nodes(rule: str, level: int) -> Tuple[np.ndarray, np.ndarray]:
    key = (rule, level)
    cached = _NODE_CACHE.get(key)
    if cached is not None:
        return cached
    if rule == "sinh_sinh":
        t = _t_values(level, _T_MAX_INF)
        inner = _A * np.sinh(t)
        x = np.sinh(inner)
        w = _A * np.cosh(t) * np.cosh(inner)
    elif rule == "exp_sinh":
        t = _t_values(level, _T_MAX_INF)
        inner = _A * np.sinh(t)
        x = np.exp(inner)
        w = _A * np.cosh(t) * x
    elif rule == "log_sinh_sinh":
        t = _t_values(level, _T_MAX_INF)
        inner = _A * np.sinh(t)
        u = np.sinh(inner)
        keep = np.abs(u) <= _U_CLIP
        u = u[keep]
        x = np.exp(u)
        w = _A * np.cosh(t[keep]) * np.cosh(inner[keep]) * x
    elif rule == "tanh_sinh":
        # abscissae on (-1, 1) held as signed offsets from the nearer
        # endpoint: 1 - |tanh(inner)| = 2 / (exp(2 |inner|) + 1), which stays
        # positive long after tanh itself would round to +-1.
        t = _t_values(level, _T_MAX_FINITE)
        inner = _A * np.sinh(t)
        offset = 2.0 / (np.exp(2.0 * np.abs(inner)) + 1.0)
        x = np.where(t >= 0, offset, -offset)  # sign marks the endpoint
        w = _A * np.cosh(t) / np.cosh(inner) ** 2
    else:  # pragma: no cover - internal
        raise ValueError(rule)
    _NODE_CACHE[key] = (x, w)
    return x, w


def _select_rule(support, cfg: QuadConfig):
    """Return (rule, shift, scale) mapping cached abscissae into the support."""
    lo, hi = float(support[0]), float(support[1])
    if not lo < hi:
        raise ValueError(f"empty support ({lo}, {hi})")
    if math.isinf(lo) and math.isinf(hi):
        if cfg.transform == "log_substitution":
            raise ValueError("log_substitution requires support (0, inf)")
        return "sinh_sinh", 0.0, 1.0
    if math.isinf(hi):
        if cfg.transform == "log_substitution":
            if lo != 0.0:
                raise ValueError("log_substitution requires support (0, inf)")
            return "log_sinh_sinh", 0.0, 1.0
        return "exp_sinh", lo, 1.0
    if math.isinf(lo):
        raise ValueError("supports (-inf, b) are not used; negate the integrand")
    if cfg.transform == "log_substitution":
        raise ValueError("log_substitution requires support (0, inf)")
    return "tanh_sinh", 0.5 * (lo + hi), 0.5 * (hi - lo)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    support,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> Tuple[float, float]:
    """Integrate a vectorised function over ``support = (lo, hi)``.

    Returns ``(value, err_est)`` where ``err_est`` is the change between the
    last two refinement levels; on return it satisfies
    ``err_est <= max(cfg.abs_tol, cfg.rel_tol * |value|)``.

    Raises
    ------
    QuadratureError
        If the integrand produces NaN or the tolerance is not reached
        within ``cfg.max_levels`` refinements.
    """
    rule, shift, scale = _select_rule(support, cfg)

    def _eval(level: int) -> Tuple[float, float]:
        x, w = _nodes(rule, level)
        if rule == "tanh_sinh":
            # x is a signed endpoint offset: positive values measure from the
            # upper endpoint, negative from the lower.
            xx = np.where(x >= 0, shift + scale, shift - scale) - scale * x
            ww = scale * w
        elif rule == "exp_sinh" and shift != 0.0:
            xx = shift + x
            ww = w
        else:
            xx, ww = x, w
        with np.errstate(over="ignore", under="ignore"):
            fx = np.asarray(f(xx), dtype=float)
        if np.isnan(fx).any():
            bad = xx[np.isnan(fx)][0]
            raise QuadratureError(f"integrand returned NaN near x = {bad!r}")
        contrib = fx * ww
        return float(np.sum(contrib)), float(np.sum(np.abs(contrib)))

    acc, _ = _eval(0)
    value = _H0 * acc
    prev = value
    delta = math.inf
    for level in range(1, cfg.max_levels + 1):
        new, _ = _eval(level)
        acc += new
        h = _H0 / 2**level
        value = h * acc
        delta = abs(value - prev)
        if level >= 2 and delta <= max(cfg.abs_tol, cfg.rel_tol * abs(value)):
            return value, delta
        prev = value
    raise QuadratureError(
        f"no convergence within {cfg.max_levels} levels "
        f"(value ~ {value!r}, last delta {delta!r})"
    )


def gaussian_product_moment(sigma, mu, s: float, alpha) -> float:
    """Exact ``int x^alpha N(x; mu, sigma) phi_s(x) dx`` for ``|alpha| <= 2``.

    ``phi_s`` is the normalised Gaussian kernel ``N(x; 0, s^2 I)``.  The
    product of the two Gaussians is ``Z * N(x; mu_t, sigma_t)`` with

    ``sigma_t = (sigma^-1 + s^-2 I)^-1``, ``mu_t = sigma_t sigma^-1 mu``,
    ``Z = N(mu; 0, sigma + s^2 I)``,

    so the integral reduces to a low-order moment of ``N(mu_t, sigma_t)``.

    Parameters
    ----------
    sigma : (d, d) array_like, symmetric positive definite covariance.
    mu : (d,) array_like mean.
    s : kernel scale, > 0.
    alpha : length-d multi-index of nonnegative ints with ``sum(alpha) <= 2``.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    d = mu.shape[0]
    if sigma.shape != (d, d):
        raise ValueError("sigma and mu have inconsistent shapes")
    if s <= 0:
        raise ValueError("kernel scale must be positive")
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != d or any(a < 0 for a in alpha) or sum(alpha) > 2:
        raise ValueError("alpha must be a nonnegative multi-index with |alpha| <= 2")

    try:
        omega = np.linalg.inv(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular covariance") from exc
    sigma_t = np.linalg.inv(omega + np.eye(d) / s**2)
    mu_t = sigma_t @ (omega @ mu)

    conv = sigma + s**2 * np.eye(d)
    sign, logdet = np.linalg.slogdet(conv)
    if sign <= 0:
        raise ValueError("singular covariance")
    quad_form = float(mu @ np.linalg.solve(conv, mu))
    z = math.exp(-0.5 * quad_form - 0.5 * logdet - 0.5 * d * math.log(2 * math.pi))

    order = sum(alpha)
    if order == 0:
        moment = 1.0
    elif order == 1:
        i = alpha.index(1)
        moment = mu_t[i]
    else:
        if 2 in alpha:
            i = alpha.index(2)
            moment = sigma_t[i, i] + mu_t[i] ** 2
        else:
            i, j = (k for k in range(d) if alpha[k] == 1)
            moment = sigma_t[i, j] + mu_t[i] * mu_t[j]
    return z * float(moment)
