"""Gaussian kernel families: evaluation, scale derivatives, decay checks.

The kernel is the single deformation handle of the whole library: a strictly
positive, rapidly decaying weight ``phi_s`` with one parameter, the scale
``s`` (so ``q = 1``).  Two normalisation modes exist because downstream uses
disagree: transversality demonstrations want the bare exponential
``exp(-|x|^2 / (2 s^2))`` (its scale derivative is strictly positive away
from the origin), while probability tilting wants the unit-mass version with
the ``(2 pi s^2)^(-d/2)`` prefactor.  Every report records which mode was
used.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["GaussianKernel", "kernel_from_dict"]


@dataclass(frozen=True)
class GaussianKernel:
    """Gaussian kernel ``phi_s`` on R^d.

    Parameters
    ----------
    s : scale, > 0.  This is the kernel parameter vector (q = 1).
    dim : ambient dimension d.
    normalized : include the ``(2 pi s^2)^(-d/2)`` prefactor when True.
    """

    s: float
    dim: int = 1
    normalized: bool = False

    kind = "gaussian"
    n_params = 1  # q

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise ValueError("kernel scale s must be positive")
        if self.dim < 1:
            raise ValueError("kernel dim must be >= 1")

    def _sqnorm(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return x * x
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points in R^{self.dim}")
        return np.sum(x * x, axis=-1)

    @property
    def log_norm_const(self) -> float:
        if not self.normalized:
            return 0.0
        return -0.5 * self.dim * math.log(2 * math.pi * self.s**2)

    def log_eval(self, x) -> np.ndarray:
        """log phi_s(x); safe building block for products of exponentials."""
        return self.log_norm_const - self._sqnorm(x) / (2 * self.s**2)

    def eval(self, x) -> np.ndarray:
        """phi_s(x), strictly positive for finite x."""
        return np.exp(self.log_eval(x))

    def dlambda(self, x, b: int = 0) -> np.ndarray:
        """Analytic derivative of phi_s(x) with respect to kernel parameter b.

        Only b = 0 (the scale) exists.  For the unnormalized kernel this is
        ``phi_s(x) * |x|^2 / s^3`` (strictly positive for x != 0); the
        normalized kernel picks up an extra ``-d/s`` from the prefactor.
        """
        if b != 0:
            raise ValueError(f"unknown kernel parameter index {b} (q = 1)")
        factor = self._sqnorm(x) / self.s**3
        if self.normalized:
            factor = factor - self.dim / self.s
        return self.eval(x) * factor

    def dlambda_factor(self, x) -> np.ndarray:
        """``dlambda(x) / eval(x)``, for composing stable integrands."""
        factor = self._sqnorm(x) / self.s**3
        if self.normalized:
            factor = factor - self.dim / self.s
        return factor

    def decay_certificate(self, eps: float = 0.1, grid=None):
        """Empirically certify ``phi(x) <= C exp(-a |x|^2)``.

        Uses ``a = (1 - eps) / (2 s^2)`` and returns ``(ok, C)`` where C is
        the largest ratio ``phi(x) / exp(-a |x|^2)`` seen on the grid; ok
        means the ratio stayed finite and bounded by its value at 0 times a
        safety factor (for a Gaussian the ratio is maximised at the origin).
        """
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if grid is None:
            grid = np.linspace(-10 * self.s, 10 * self.s, 401)
        grid = np.asarray(grid, dtype=float)
        if self.dim > 1 and grid.ndim == 1:
            grid = np.stack([grid] + [np.zeros_like(grid)] * (self.dim - 1), axis=-1)
        a = (1 - eps) / (2 * self.s**2)
        ratio = np.exp(self.log_eval(grid) + a * self._sqnorm(grid))
        c = float(np.max(ratio))
        ok = bool(np.isfinite(c) and c <= math.exp(self.log_norm_const) * (1 + 1e-12))
        return ok, c

    def with_scale(self, s: float) -> "GaussianKernel":
        return dataclasses.replace(self, s=float(s))

    @property
    def lam(self) -> np.ndarray:
        """Kernel parameter vector (just the scale)."""
        return np.array([self.s])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "s": self.s,
            "dim": self.dim,
            "normalized": self.normalized,
        }


def kernel_from_dict(spec: dict) -> GaussianKernel:
    """Build a kernel from its scenario-file form."""
    kind = spec.get("kind", "gaussian")
    if kind != "gaussian":
        raise ValueError(f"unknown kernel kind {kind!r}")
    return GaussianKernel(
        s=float(spec["s"]),
        dim=int(spec.get("dim", 1)),
        normalized=bool(spec.get("normalized", False)),
    )
