"""Kernel-regularised two-sample analysis for the normal means problem.

Two normal populations with unknown, unequal variances admit no classical
pivot for comparing means that is free of the variance ratio.  Damping each
population with a Gaussian kernel of scale s couples location and scale
through ``sigma^2 + s^2`` only, so for large s the zeroth weak moments
become insensitive to the nuisance variances - at the price of a shrinking
mean signal.  This module quantifies both sides of that trade-off with the
closed-form zeroth weak moment.

The closed form used here is the Gaussian-product value

    w0(mu, sigma, s) = (2 pi (sigma^2 + s^2))^(-1/2)
                       * exp(-mu^2 / (2 (sigma^2 + s^2))),

i.e. the integral of N(mu, sigma^2) against the unit-mass kernel.  A widely
quoted version of this formula drops the ``(2 pi)^(-1/2)`` factor; reports
print both values and their ratio, and all analysis uses the
quadrature-verified form above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

__all__ = [
    "BFConfig",
    "w0_closed_form",
    "w0_unnormalised_form",
    "nuisance_sensitivity",
    "power_proxy",
    "trade_off_table",
]


def w0_closed_form(mu: float, sigma: float, s: float) -> float:
    """Zeroth weak moment of N(mu, sigma^2) under the unit-mass Gaussian kernel."""
    if sigma <= 0 or s <= 0:
        raise ValueError("sigma and s must be positive")
    v = sigma**2 + s**2
    return math.exp(-(mu**2) / (2 * v)) / math.sqrt(2 * math.pi * v)


def w0_unnormalised_form(mu: float, sigma: float, s: float) -> float:
    """The same quantity without the ``(2 pi)^(-1/2)`` factor, for comparison."""
    v = sigma**2 + s**2
    return math.exp(-(mu**2) / (2 * v)) / math.sqrt(v)


@dataclass(frozen=True)
class BFConfig:
    """Two populations, a kernel-scale grid, and a nuisance grid.

    ``s_grid`` indexes the deformation; ``sigma_grid`` is the set of nuisance
    standard deviations over which worst cases are taken.
    """

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    s_grid: Tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 50.0, 100.0)
    sigma_grid: Tuple[float, ...] = tuple(0.5 + 0.1 * i for i in range(16))

    def __post_init__(self) -> None:
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("population scales must be positive")
        if not self.s_grid or not self.sigma_grid:
            raise ValueError("grids must be nonempty")
        if any(s <= 0 for s in self.s_grid) or any(v <= 0 for v in self.sigma_grid):
            raise ValueError("all scales must be positive")

    @property
    def variance_ratio(self) -> float:
        return self.sigma1**2 / self.sigma2**2

    def to_dict(self) -> dict:
        return {
            "mu1": self.mu1,
            "mu2": self.mu2,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "variance_ratio": self.variance_ratio,
            "s_grid": list(self.s_grid),
            "sigma_grid": list(self.sigma_grid),
        }


def nuisance_sensitivity(cfg: BFConfig) -> list:
    """Worst-case ``|Delta w0|`` over the nuisance grid, per kernel scale.

    The null (equal means, forced to ``mu1``) is imposed, so any difference
    in the zeroth weak moments is pure nuisance leakage.  Rows are ordered
    by s.
    """
    mu = cfg.mu1
    rows = []
    for s in cfg.s_grid:
        sup_gap = 0.0
        argmax = (cfg.sigma_grid[0], cfg.sigma_grid[0])
        for sig1 in cfg.sigma_grid:
            for sig2 in cfg.sigma_grid:
                gap = abs(w0_closed_form(mu, sig1, s) - w0_closed_form(mu, sig2, s))
                if gap > sup_gap:
                    sup_gap = gap
                    argmax = (sig1, sig2)
        rows.append({"s": s, "sup_nuisance_gap": sup_gap, "argmax_sigmas": argmax})
    return rows


def power_proxy(cfg: BFConfig) -> list:
    """Mean-shift signal ``|Delta w0|`` under the alternative, per kernel scale."""
    if cfg.mu1 == cfg.mu2:
        raise ValueError("power_proxy needs mu1 != mu2")
    rows = []
    for s in cfg.s_grid:
        signal = abs(
            w0_closed_form(cfg.mu1, cfg.sigma1, s) - w0_closed_form(cfg.mu2, cfg.sigma2, s)
        )
        rows.append({"s": s, "signal_gap": signal})
    return rows


def trade_off_table(cfg: BFConfig) -> list:
    """Signal vs worst-case nuisance leakage per kernel scale.

    Combines :func:`nuisance_sensitivity` (under the forced null) with
    :func:`power_proxy` (at the configured alternative) and reports their
    ratio.  Both columns shrink with s; the ratio shows what the
    insensitivity costs.
    """
    nuisance = {row["s"]: row["sup_nuisance_gap"] for row in nuisance_sensitivity(cfg)}
    rows = []
    for row in power_proxy(cfg):
        s = row["s"]
        sup_gap = nuisance[s]
        signal = row["signal_gap"]
        rows.append(
            {
                "s": s,
                "sup_nuisance_gap": sup_gap,
                "signal_gap": signal,
                "ratio": signal / sup_gap if sup_gap > 0 else math.inf,
            }
        )
    return rows
