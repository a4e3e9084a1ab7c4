"""Rank analysis and verifiable transversality checks in feature space.

A degeneracy stratum is a level set ``{y : g(y) = 0}`` in feature space with
a smooth codimension-c normal structure.  Transversality of the joint
feature map to the stratum reduces to a rank condition: the Jacobian,
projected onto the stratum's normal space, must have rank c.  Submersivity
(full feature-space rank) is the stratum-free sufficient condition, and the
kernel block can enrich the rank of a deficient model block.  Because none
of these statements is finitely checkable over a continuum, the sweep
operation probes them on explicit parameter/kernel grids and reports the
fraction of failures per kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .featuremap import FeatureSpec, JacobianDecomposition, feature_map, jacobian
from .kernel import GaussianKernel
from .models import Model
from .quadrature import DEFAULT_CONFIG, QuadConfig

__all__ = [
    "RANK_RTOL",
    "ON_STRATUM_TOL",
    "RankReport",
    "StratumError",
    "Stratum",
    "numerical_rank",
    "normal_projection",
    "check_transversal_at",
    "check_componentwise",
    "check_submersion",
    "enrichment_gain",
    "SweepRow",
    "SweepResult",
    "lambda_sweep",
]

# Quadrature delivers ~1e-10 accurate entries; smaller singular values are noise.
RANK_RTOL = 1e-10
ON_STRATUM_TOL = 1e-8
# |g| above on-stratum tolerance but below this gets one Newton projection step.
NEWTON_TOL = 1e-4


class StratumError(ValueError):
    """Point not on the stratum, or the stratum is not smooth there."""


@dataclass(frozen=True)
class RankReport:
    """SVD-based numerical rank with the threshold that produced it.

    ``marginal`` flags any singular value within a factor 10 of the
    threshold; marginal verdicts are surfaced, never silently resolved.
    """

    singular_values: np.ndarray
    numerical_rank: int
    tol_used: float
    matrix_shape: Tuple[int, int]
    marginal: bool

    def to_dict(self) -> dict:
        return {
            "singular_values": [float(s) for s in self.singular_values],
            "numerical_rank": self.numerical_rank,
            "tol_used": self.tol_used,
            "matrix_shape": list(self.matrix_shape),
            "marginal": self.marginal,
        }


def numerical_rank(matrix, rank_rtol: float = RANK_RTOL) -> RankReport:
    """Numerical rank with threshold ``rank_rtol * sigma_max * max(shape)``."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    sv = np.linalg.svd(matrix, compute_uv=False)
    sigma_max = sv[0] if sv.size else 0.0
    tol = rank_rtol * sigma_max * max(matrix.shape)
    rank = int(np.sum(sv > tol))
    marginal = bool(tol > 0 and np.any((sv > tol / 10) & (sv < tol * 10)))
    return RankReport(
        singular_values=sv,
        numerical_rank=rank,
        tol_used=tol,
        matrix_shape=matrix.shape,
        marginal=marginal,
    )


class Stratum:
    """Codimension-c submanifold of feature space given as a level set.

    ``level_map(y)`` returns the c residuals and ``level_jacobian(y)`` their
    c x (K+1) derivative; the stratum's normal space at y is the row space
    of that derivative.
    """

    def __init__(
        self,
        codim: int,
        level_map: Callable[[np.ndarray], np.ndarray],
        level_jacobian: Callable[[np.ndarray], np.ndarray],
        kind: str = "custom",
        meta: Optional[dict] = None,
    ):
        if codim < 1:
            raise ValueError("codimension must be >= 1")
        self.codim = int(codim)
        self.level_map = level_map
        self.level_jacobian = level_jacobian
        self.kind = kind
        self.meta = meta or {}

    @staticmethod
    def coordinate(indices: Sequence[int], values: Sequence[float]) -> "Stratum":
        """Affine stratum ``{y : y[i] = v_i}``."""
        indices = tuple(int(i) for i in indices)
        values = np.asarray(values, dtype=float)
        if len(indices) != values.shape[0] or len(set(indices)) != len(indices):
            raise ValueError("indices and values must match and be distinct")

        def g(y):
            y = np.asarray(y, dtype=float)
            return y[list(indices)] - values

        def dg(y):
            y = np.asarray(y, dtype=float)
            out = np.zeros((len(indices), y.shape[0]))
            for row, i in enumerate(indices):
                out[row, i] = 1.0
            return out

        return Stratum(
            codim=len(indices),
            level_map=g,
            level_jacobian=dg,
            kind="coordinate",
            meta={"indices": list(indices), "values": [float(v) for v in values]},
        )

    @staticmethod
    def determinant(n: int) -> "Stratum":
        """Rank-deficiency stratum ``{det(Y) = 0}`` for y read as an n x n matrix."""

        def g(y):
            y = np.asarray(y, dtype=float)
            return np.array([np.linalg.det(y.reshape(n, n))])

        def dg(y):
            y = np.asarray(y, dtype=float)
            m = y.reshape(n, n)
            cof = np.zeros((n, n))
            for i in range(n):
                for j in range(n):
                    minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
                    det = np.linalg.det(minor) if minor.size else 1.0
                    cof[i, j] = (-1) ** (i + j) * det
            return cof.reshape(1, n * n)

        return Stratum(
            codim=1, level_map=g, level_jacobian=dg, kind="rank_deficiency", meta={"n": n}
        )

    @staticmethod
    def custom(
        g: Callable[[np.ndarray], np.ndarray],
        dg: Callable[[np.ndarray], np.ndarray],
        codim: int,
    ) -> "Stratum":
        return Stratum(codim=codim, level_map=g, level_jacobian=dg, kind="custom")

    def residual(self, y) -> float:
        return float(np.max(np.abs(np.atleast_1d(self.level_map(np.asarray(y, dtype=float))))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "codim": self.codim, **self.meta}


def stratum_from_dict(block: dict) -> Stratum:
    kind = block.get("kind")
    if kind == "coordinate":
        return Stratum.coordinate(block["indices"], block["values"])
    if kind == "custom_det":
        return Stratum.determinant(int(block.get("n", 2)))
    raise ValueError(f"unknown stratum kind {kind!r}")


def _project_to_stratum(stratum: Stratum, y: np.ndarray, on_tol: float) -> np.ndarray:
    """One Newton step toward the stratum for near-miss points."""
    g = np.atleast_1d(stratum.level_map(y))
    res = float(np.max(np.abs(g)))
    if res <= on_tol:
        return y
    if res > NEWTON_TOL:
        raise StratumError(
            f"point is off the stratum (residual {res:.3e} > {NEWTON_TOL:g})"
        )
    dg = np.atleast_2d(stratum.level_jacobian(y))
    y_new = y - np.linalg.pinv(dg) @ g
    res_new = float(np.max(np.abs(np.atleast_1d(stratum.level_map(y_new)))))
    if res_new > on_tol:
        raise StratumError(
            f"Newton projection left residual {res_new:.3e} > on_stratum_tol {on_tol:g}"
        )
    return y_new


def normal_projection(
    stratum: Stratum,
    y,
    on_stratum_tol: float = ON_STRATUM_TOL,
    rank_rtol: float = RANK_RTOL,
) -> np.ndarray:
    """Orthonormal rows spanning the stratum's normal space at y.

    Raises :class:`StratumError` if y is off the stratum or the level
    Jacobian drops rank there (the stratum is not smooth at y).
    """
    y = np.asarray(y, dtype=float)
    res = stratum.residual(y)
    if res > on_stratum_tol:
        raise StratumError(
            f"point is not on the stratum (residual {res:.3e} > {on_stratum_tol:g})"
        )
    dg = np.atleast_2d(stratum.level_jacobian(y))
    u, sv, vt = np.linalg.svd(dg, full_matrices=False)
    tol = rank_rtol * (sv[0] if sv.size else 0.0) * max(dg.shape)
    if int(np.sum(sv > tol)) != stratum.codim:
        raise StratumError("level jacobian is rank-deficient; stratum not smooth here")
    return vt[: stratum.codim]


def check_transversal_at(
    jac: JacobianDecomposition,
    stratum: Stratum,
    y,
    rank_rtol: float = RANK_RTOL,
    on_stratum_tol: float = ON_STRATUM_TOL,
) -> Tuple[bool, RankReport]:
    """Normal-rank transversality test at an on-stratum point.

    Projects the joint Jacobian onto the normal space and compares its
    numerical rank with the stratum codimension.
    """
    y = _project_to_stratum(stratum, np.asarray(y, dtype=float), on_stratum_tol)
    basis = normal_projection(stratum, y, on_stratum_tol, rank_rtol)
    report = numerical_rank(basis @ jac.joint, rank_rtol)
    return report.numerical_rank == stratum.codim, report


def check_componentwise(
    jac: JacobianDecomposition,
    stratum: Stratum,
    y,
    rank_rtol: float = RANK_RTOL,
    on_stratum_tol: float = ON_STRATUM_TOL,
) -> dict:
    """Whether each Jacobian block alone, and both jointly, span the normal space.

    ``joint`` agrees with :func:`check_transversal_at` by construction of
    the projected-rank criterion.
    """
    y = _project_to_stratum(stratum, np.asarray(y, dtype=float), on_stratum_tol)
    basis = normal_projection(stratum, y, on_stratum_tol, rank_rtol)
    c = stratum.codim
    theta_rank = numerical_rank(basis @ jac.d_theta, rank_rtol)
    lambda_rank = numerical_rank(basis @ jac.d_lambda, rank_rtol)
    joint_rank = numerical_rank(basis @ jac.joint, rank_rtol)
    return {
        "theta_only": theta_rank.numerical_rank == c,
        "lambda_only": lambda_rank.numerical_rank == c,
        "joint": joint_rank.numerical_rank == c,
        "reports": {"theta": theta_rank, "lambda": lambda_rank, "joint": joint_rank},
    }


def check_submersion(
    jac: JacobianDecomposition, rank_rtol: float = RANK_RTOL
) -> Tuple[bool, RankReport]:
    """Full-rank test of the joint Jacobian (transversal to every stratum)."""
    report = numerical_rank(jac.joint, rank_rtol)
    return report.numerical_rank == jac.n_features, report


def enrichment_gain(jac: JacobianDecomposition, rank_rtol: float = RANK_RTOL) -> int:
    """Independent directions the kernel block adds to the model block's image."""
    joint = numerical_rank(jac.joint, rank_rtol).numerical_rank
    model_only = numerical_rank(jac.d_theta, rank_rtol).numerical_rank
    return joint - model_only


@dataclass(frozen=True)
class SweepRow:
    lam: float
    fraction: float
    hits: int
    n_points: int


@dataclass(frozen=True)
class SweepResult:
    indicator: str
    rows: Tuple[SweepRow, ...]
    bad_lambdas: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "indicator": self.indicator,
            "rows": [
                {
                    "lambda": r.lam,
                    "fraction": r.fraction,
                    "hits": r.hits,
                    "n_points": r.n_points,
                }
                for r in self.rows
            ],
            "bad_lambdas": list(self.bad_lambdas),
        }


def lambda_sweep(
    model: Model,
    spec: FeatureSpec,
    kernel_grid: Sequence[GaussianKernel],
    theta_grid: Sequence,
    indicator: str,
    stratum: Optional[Stratum] = None,
    method: Optional[str] = None,
    cfg: QuadConfig = DEFAULT_CONFIG,
    rank_rtol: float = RANK_RTOL,
    on_stratum_tol: float = ON_STRATUM_TOL,
) -> SweepResult:
    """Empirical genericity probe over a kernel-parameter grid.

    For each kernel in the grid, evaluates the chosen degeneracy indicator
    at every theta grid point and records the firing fraction.  Kernels with
    a positive fraction form the "bad" set; genericity predicts this set is
    empty or isolated.  Indicators:

    * ``submersion_fail`` - joint Jacobian rank below the feature count,
    * ``info_singular`` - model block rank below the parameter count,
    * ``stratum_hit`` - feature vector lands on the given stratum.
    """
    if indicator not in ("submersion_fail", "info_singular", "stratum_hit"):
        raise ValueError(f"unknown indicator {indicator!r}")
    if indicator == "stratum_hit" and stratum is None:
        raise ValueError("stratum_hit needs a stratum")
    if not kernel_grid or len(theta_grid) == 0:
        raise ValueError("kernel and theta grids must be nonempty")

    rows: List[SweepRow] = []
    bad: List[float] = []
    for kern in kernel_grid:
        hits = 0
        for theta in theta_grid:
            if indicator == "stratum_hit":
                vec = feature_map(model, theta, kern, spec, cfg)
                fired = stratum.residual(vec.values) <= on_stratum_tol
            else:
                jac = jacobian(model, theta, kern, spec, method, cfg)
                if indicator == "submersion_fail":
                    fired = not check_submersion(jac, rank_rtol)[0]
                else:
                    rep = numerical_rank(jac.d_theta, rank_rtol)
                    fired = rep.numerical_rank < model.param_dim
            hits += int(fired)
        fraction = hits / len(theta_grid)
        rows.append(SweepRow(lam=kern.s, fraction=fraction, hits=hits, n_points=len(theta_grid)))
        if fraction > 0:
            bad.append(kern.s)
    return SweepResult(indicator=indicator, rows=tuple(rows), bad_lambdas=tuple(bad))
