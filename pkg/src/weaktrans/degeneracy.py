"""Degeneracy classification: representation, identifiability, information
rank, moment indeterminacy, and higher-order jet deficiencies.

The five verdict types target distinct statistical pathologies:

* Type 0 - the classical moment representation does not exist (heavy tails)
  while the kernel-damped features stay finite;
* Type I - self-intersection of the feature map (non-identifiability),
  probed by a pairwise separation scan over a parameter grid;
* Type II - rank drop of the model Jacobian, equivalently a singular weak
  information matrix;
* Type III - moment indeterminacy: classical moments coincide under an
  oscillatory perturbation while the kernel-damped moments separate, plus a
  Carleman-style growth bound certifying determinacy of the kernel-tilted
  measure;
* Type IV - rank profile of the stacked first-plus-second derivatives
  (reported descriptively, not pass/fail).

Every verdict carries the evidence values that produced it; injectivity is
certified only at the stated grid resolution.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .featuremap import (
    FD_STEP,
    FeatureSpec,
    feature_map,
    jacobian,
    weak_moment,
)
from .kernel import GaussianKernel
from .models import LogNormal, LogNormalStieltjes, Model
from .quadrature import DEFAULT_CONFIG, QuadConfig, QuadratureError, integrate
from .transversality import RANK_RTOL, RankReport, numerical_rank

__all__ = [
    "Thresholds",
    "InfoMatrix",
    "weak_info",
    "InjectivityResult",
    "injectivity_scan",
    "InfoScanResult",
    "info_regularity_scan",
    "StieltjesResult",
    "stieltjes_test",
    "CarlemanResult",
    "carleman_probe",
    "jet2_rank",
    "DegeneracyReport",
    "classify",
]


@dataclass(frozen=True)
class Thresholds:
    """Classification thresholds, two orders above the quadrature noise floor."""

    margin_tol: float = 1e-6  # Type I separation margin
    sigma_tol: float = 1e-8  # Type II smallest singular value
    weak_gap_tol: float = 1e-3  # Type III weak-moment separation
    classical_gap_tol: float = 1e-8  # Type III classical coincidence (relative)
    rank_rtol: float = RANK_RTOL

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class InfoMatrix:
    """Weak information matrix G = (D_theta Phi)^T (D_theta Phi)."""

    G: np.ndarray
    spec: FeatureSpec
    theta: np.ndarray
    lam: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.G))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.G)


def weak_info(
    model: Model,
    theta,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    method: Optional[str] = None,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> InfoMatrix:
    """The Gram matrix of the model block of the feature-map Jacobian."""
    jac = jacobian(model, theta, kernel, spec, method, cfg)
    g = jac.d_theta.T @ jac.d_theta
    return InfoMatrix(G=g, spec=spec, theta=model.check_theta(theta), lam=kernel.lam)


@dataclass(frozen=True)
class InjectivityResult:
    margin: float  # inf when no admissible pair exists
    worst_pair: Optional[Tuple[np.ndarray, np.ndarray]]
    n_pairs: int
    delta: float

    def to_dict(self) -> dict:
        pair = None
        if self.worst_pair is not None:
            pair = [[float(v) for v in p] for p in self.worst_pair]
        return {
            "margin": self.margin if math.isfinite(self.margin) else "inf",
            "worst_pair": pair,
            "n_pairs": self.n_pairs,
            "delta": self.delta,
        }


def injectivity_scan(
    model: Model,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    theta_grid: Sequence,
    delta: float = 1e-6,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> InjectivityResult:
    """Minimum feature separation over grid pairs at least ``delta`` apart.

    A positive margin certifies the absence of self-intersections at the
    grid resolution, nothing more.
    """
    thetas = [model.check_theta(t) for t in theta_grid]
    if len(thetas) < 2:
        return InjectivityResult(math.inf, None, 0, delta)
    vectors = [feature_map(model, t, kernel, spec, cfg).values for t in thetas]
    margin = math.inf
    worst = None
    n_pairs = 0
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            if np.linalg.norm(thetas[i] - thetas[j]) < delta:
                continue
            n_pairs += 1
            sep = float(np.linalg.norm(vectors[i] - vectors[j]))
            if sep < margin:
                margin = sep
                worst = (thetas[i], thetas[j])
    return InjectivityResult(margin, worst, n_pairs, delta)


@dataclass(frozen=True)
class InfoScanResult:
    min_det: float
    min_sigma_min: float
    argmin_theta: np.ndarray
    table: Tuple[Tuple[float, ...], ...]  # (theta..., det, sigma_min) per point

    def to_dict(self) -> dict:
        return {
            "min_det": self.min_det,
            "min_sigma_min": self.min_sigma_min,
            "argmin_theta": [float(v) for v in self.argmin_theta],
        }


def info_regularity_scan(
    model: Model,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    theta_grid: Sequence,
    method: Optional[str] = None,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> InfoScanResult:
    """Scan det G and the smallest singular value of D_theta Phi over a grid."""
    if len(theta_grid) == 0:
        raise ValueError("theta grid must be nonempty")
    min_det = math.inf
    min_sigma = math.inf
    argmin = None
    table = []
    for theta in theta_grid:
        jac = jacobian(model, theta, kernel, spec, method, cfg)
        g = jac.d_theta.T @ jac.d_theta
        det = float(np.linalg.det(g))
        sv = np.linalg.svd(jac.d_theta, compute_uv=False)
        sigma_min = float(sv[-1]) if sv.size else 0.0
        theta_arr = model.check_theta(theta)
        table.append(tuple(float(v) for v in theta_arr) + (det, sigma_min))
        if sigma_min < min_sigma:
            min_sigma = sigma_min
            argmin = theta_arr
        min_det = min(min_det, det)
    return InfoScanResult(min_det, min_sigma, argmin, tuple(table))


@dataclass(frozen=True)
class StieltjesResult:
    orders_classical: Tuple[int, ...]
    orders_weak: Tuple[int, ...]
    classical_gaps: Tuple[float, ...]  # relative to max(1, |classical moment|)
    classical_gaps_abs: Tuple[float, ...]
    weak_gaps: Tuple[float, ...]
    classical_coincide: bool
    weak_separate: bool
    eps: float
    kernel_scale: float

    def to_dict(self) -> dict:
        return {
            "orders_classical": list(self.orders_classical),
            "orders_weak": list(self.orders_weak),
            "classical_gaps_rel": list(self.classical_gaps),
            "classical_gaps_abs": list(self.classical_gaps_abs),
            "weak_gaps": list(self.weak_gaps),
            "classical_coincide": self.classical_coincide,
            "weak_separate": self.weak_separate,
            "eps": self.eps,
            "kernel_scale": self.kernel_scale,
        }


def stieltjes_test(
    eps: float,
    theta,
    kernel: GaussianKernel,
    orders_classical: Sequence[int] = tuple(range(11)),
    orders_weak: Sequence[int] = tuple(range(5)),
    cfg: QuadConfig = DEFAULT_CONFIG,
    thresholds: Thresholds = Thresholds(),
) -> StieltjesResult:
    """Classical coincidence vs weak separation for the perturbed log-normal.

    The gap of order j is ``eps * |int x^j sin(2 pi ln x) f(x) (phi(x)) dx|``,
    integrated directly (one quadrature per order, not a difference of two
    huge moments).  Classical moments grow like ``exp(j^2 sigma^2 / 2)``, so
    classical gaps are reported relative to ``max(1, m_j)``; in double
    precision an absolute criterion at high order would measure nothing but
    the rounding of the moment itself.  Weak gaps are absolute.
    """
    if not 0 <= abs(eps) <= 1:
        raise ValueError("eps must lie in [-1, 1]")
    base_model = LogNormal()
    theta = base_model.check_theta(theta)
    cfg_log = dataclasses.replace(cfg, transform="log_substitution")

    def oscillation(x):
        return np.sin(2 * math.pi * np.log(x))

    classical_abs = []
    classical_rel = []
    for j in orders_classical:
        scale = base_model.classical_moment(theta, j)

        def integrand(x, j=j):
            w = base_model.density(x, theta)
            out = np.zeros_like(w)
            m = w != 0
            if m.any():
                xm = x[m]
                out[m] = w[m] * xm**j * oscillation(xm)
            return out

        cfg_j = dataclasses.replace(cfg_log, abs_tol=cfg.abs_tol * max(1.0, scale))
        value, _ = integrate(integrand, base_model.support, cfg_j)
        gap = abs(eps) * abs(value)
        classical_abs.append(gap)
        classical_rel.append(gap / max(1.0, scale))

    weak_gaps = []
    for j in orders_weak:

        def integrand(x, j=j):
            w = np.exp(base_model.log_density(x, theta) + kernel.log_eval(x))
            out = np.zeros_like(w)
            m = w != 0
            if m.any():
                xm = x[m]
                out[m] = w[m] * xm**j * oscillation(xm)
            return out

        value, _ = integrate(integrand, base_model.support, cfg_log)
        weak_gaps.append(abs(eps) * abs(value))

    return StieltjesResult(
        orders_classical=tuple(int(j) for j in orders_classical),
        orders_weak=tuple(int(j) for j in orders_weak),
        classical_gaps=tuple(classical_rel),
        classical_gaps_abs=tuple(classical_abs),
        weak_gaps=tuple(weak_gaps),
        classical_coincide=all(g < thresholds.classical_gap_tol for g in classical_rel),
        weak_separate=(max(weak_gaps) > thresholds.weak_gap_tol if weak_gaps else False),
        eps=float(eps),
        kernel_scale=kernel.s,
    )


@dataclass(frozen=True)
class CarlemanResult:
    orders: Tuple[int, ...]  # even orders 2j
    tilted_moments: Tuple[float, ...]  # moments of Q = phi dP / w0
    terms: Tuple[float, ...]  # t_j = m_{2j}(Q)^(-1/(2j))
    partial_sums: Tuple[float, ...]
    scaled_terms: Tuple[float, ...]  # t_j * sqrt(j); bounded below => divergence
    truncated_at: Optional[int]  # first j dropped due to overflow, if any

    def to_dict(self) -> dict:
        return {
            "orders": list(self.orders),
            "tilted_moments": list(self.tilted_moments),
            "terms": list(self.terms),
            "partial_sums": list(self.partial_sums),
            "scaled_terms": list(self.scaled_terms),
            "truncated_at": self.truncated_at,
        }


def carleman_probe(
    model: Model,
    theta,
    kernel: GaussianKernel,
    j_max: int = 20,
    cfg: QuadConfig = DEFAULT_CONFIG,
) -> CarlemanResult:
    """Moment-determinacy evidence for the kernel-tilted measure.

    Tilting by the kernel gives sub-Gaussian tails, so the even moments obey
    ``m_{2j}^(1/(2j)) = O(sqrt(j))`` and the determinacy series
    ``sum_j m_{2j}^(-1/(2j))`` diverges.  Literal divergence is not finitely
    checkable; the probe reports the terms, their partial sums, and the
    scaling bound ``t_j sqrt(j)`` whose positive lower bound is the evidence.
    Overflowing orders truncate the probe and are reported.
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    w0 = weak_moment(model, theta, kernel, 0, cfg)
    if w0 <= 0:
        raise ValueError("zeroth weak moment must be positive for tilting")
    orders, moments, terms, sums, scaled = [], [], [], [], []
    truncated_at = None
    running = 0.0
    for j in range(1, j_max + 1):
        try:
            m2j = weak_moment(model, theta, kernel, 2 * j, cfg) / w0
        except QuadratureError:
            truncated_at = j
            break
        if not math.isfinite(m2j) or m2j <= 0:
            truncated_at = j
            break
        t_j = m2j ** (-1.0 / (2 * j))
        running += t_j
        orders.append(2 * j)
        moments.append(m2j)
        terms.append(t_j)
        sums.append(running)
        scaled.append(t_j * math.sqrt(j))
    return CarlemanResult(
        orders=tuple(orders),
        tilted_moments=tuple(moments),
        terms=tuple(terms),
        partial_sums=tuple(sums),
        scaled_terms=tuple(scaled),
        truncated_at=truncated_at,
    )


def jet2_rank(
    model: Model,
    theta,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    method: Optional[str] = None,
    cfg: QuadConfig = DEFAULT_CONFIG,
    rank_rtol: float = RANK_RTOL,
    h2: Optional[float] = None,
) -> Tuple[RankReport, np.ndarray]:
    """Rank of the stacked first and second derivatives of the feature map.

    Stacks ``D Phi`` with its directional derivatives ``d/d theta_a (D Phi)``
    (finite differences), giving a ``(K+1)(1+p) x p`` matrix whose columns
    are parameter directions.  Returns the rank report and the stack.
    """
    theta = model.check_theta(theta)
    p = model.param_dim
    base = jacobian(model, theta, kernel, spec, method, cfg).d_theta
    blocks = [base]
    for a in range(p):
        h = h2 if h2 is not None else math.sqrt(FD_STEP) * max(1.0, abs(theta[a]))
        step = np.zeros(p)
        step[a] = h
        plus = jacobian(model, theta + step, kernel, spec, method, cfg).d_theta
        minus = jacobian(model, theta - step, kernel, spec, method, cfg).d_theta
        blocks.append((plus - minus) / (2 * h))
    stack = np.vstack(blocks)
    return numerical_rank(stack, rank_rtol), stack


@dataclass(frozen=True)
class DegeneracyReport:
    """Per-type verdicts with the evidence that produced them."""

    family: str
    kernel: dict
    spec: dict
    type0: dict
    type1: dict
    type2: dict
    type3: dict
    type4: dict
    thresholds: dict
    n_grid_points: int

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "kernel": self.kernel,
            "features": self.spec,
            "type0_representation": self.type0,
            "type1_identifiability": self.type1,
            "type2_information": self.type2,
            "type3_indeterminacy": self.type3,
            "type4_higher_order": self.type4,
            "thresholds": self.thresholds,
            "n_grid_points": self.n_grid_points,
        }


def classify(
    model: Model,
    kernel: GaussianKernel,
    spec: FeatureSpec,
    theta_grid: Sequence,
    thresholds: Thresholds = Thresholds(),
    cfg: QuadConfig = DEFAULT_CONFIG,
    delta: float = 1e-6,
    method: Optional[str] = None,
    carleman_jmax: int = 12,
    jet2_points: int = 3,
) -> DegeneracyReport:
    """Run all degeneracy scans over a parameter grid and assemble verdicts.

    The Type 0 verdict combines family metadata (whether classical moments
    exist at all) with a computed finiteness check of the weak features;
    Type III runs the perturbation cross-check for the log-normal families
    and the tilted-measure growth probe everywhere it applies; Type IV is a
    rank profile of the second-order jet at a few grid points, reported
    descriptively.
    """
    thetas = [model.check_theta(t) for t in theta_grid]
    if not thetas:
        raise ValueError("theta grid must be nonempty")

    vectors = [feature_map(model, t, kernel, spec, cfg).values for t in thetas]
    all_finite = bool(all(np.all(np.isfinite(v)) for v in vectors))
    max_abs = float(max(np.max(np.abs(v)) for v in vectors))
    type0 = {
        "classical_moments_defined": model.classical_moments_defined,
        "weak_features_finite": all_finite,
        "max_abs_feature": max_abs,
        "flagged": not model.classical_moments_defined,
    }

    inj = injectivity_scan(model, kernel, spec, thetas, delta, cfg)
    type1 = inj.to_dict()
    type1["flagged"] = bool(
        math.isfinite(inj.margin) and inj.margin < thresholds.margin_tol
    )

    info = info_regularity_scan(model, kernel, spec, thetas, method, cfg)
    type2 = info.to_dict()
    type2["flagged"] = bool(info.min_sigma_min < thresholds.sigma_tol)

    type3: dict = {}
    is_lognormal = isinstance(model, LogNormal)
    if model.dim == 1:
        mid = thetas[len(thetas) // 2]
        carleman = carleman_probe(model, mid, kernel, carleman_jmax, cfg)
        type3["carleman"] = carleman.to_dict()
        scaled = carleman.scaled_terms[1:]  # the j = 1 term is scale-dominated
        type3["min_scaled_term"] = min(scaled) if scaled else None
        if is_lognormal:
            eps = model.eps if isinstance(model, LogNormalStieltjes) else 0.5
            # the oscillation frequency is matched to unit log-variance, so
            # exact classical cancellation holds at the reference parameters
            ref_theta = np.array([0.0, 1.0])
            st = stieltjes_test(
                eps, ref_theta, kernel, cfg=cfg, thresholds=thresholds
            )
            type3["stieltjes"] = st.to_dict()
            type3["indeterminacy_broken"] = bool(
                st.classical_coincide and st.weak_separate
            )
        type3["flagged"] = not model.classical_moments_defined
    else:
        type3["note"] = "distribution-level separation probe applies to 1-d families"
        type3["flagged"] = False

    step = max(1, len(thetas) // max(1, jet2_points))
    jet_profile = []
    for theta in thetas[::step][:jet2_points]:
        report, _ = jet2_rank(model, theta, kernel, spec, method, cfg, thresholds.rank_rtol)
        jet_profile.append(
            {
                "theta": [float(v) for v in theta],
                "rank": report.numerical_rank,
                "full_rank": report.numerical_rank == model.param_dim,
                "smallest_singular_value": float(report.singular_values[-1]),
                "marginal": report.marginal,
            }
        )
    type4 = {"profile": jet_profile, "descriptive": True}

    return DegeneracyReport(
        family=model.family,
        kernel=kernel.to_dict(),
        spec=spec.to_dict(),
        type0=type0,
        type1=type1,
        type2=type2,
        type3=type3,
        type4=type4,
        thresholds=thresholds.to_dict(),
        n_grid_points=len(thetas),
    )
