"""Kernel-regularised weak moments and transversality diagnostics.

Damping a parametric model with a strictly positive, rapidly decaying
kernel makes every moment finite and turns statistical pathologies
(non-identifiability, singular information, moment indeterminacy) into
rank conditions on the Jacobian of the induced feature map.  This package
evaluates those feature maps by deterministic double-exponential
quadrature, splits their Jacobians into model and kernel blocks, checks
the transversality criteria, classifies degeneracies, and exposes the
whole pipeline through the ``weaktrans`` command line.
"""

from .behrens_fisher import BFConfig, nuisance_sensitivity, power_proxy, trade_off_table, w0_closed_form
from .degeneracy import (
    CarlemanResult,
    DegeneracyReport,
    InfoMatrix,
    Thresholds,
    carleman_probe,
    classify,
    info_regularity_scan,
    injectivity_scan,
    jet2_rank,
    stieltjes_test,
    weak_info,
)
from .featuremap import (
    FeatureSpec,
    FeatureVector,
    JacobianDecomposition,
    feature_map,
    jacobian,
    weak_cgf,
    weak_char_fn,
    weak_cumulants,
    weak_moment,
)
from .kernel import GaussianKernel, kernel_from_dict
from .models import (
    UNDEFINED,
    CauchyLocation,
    GaussianLocation,
    GaussianMVN,
    LogNormal,
    LogNormalStieltjes,
    Model,
    SteinGaussianTarget,
    four_cycle_edges,
    make_model,
    model_from_dict,
    path_edges,
)
from .quadrature import QuadConfig, QuadratureError, gaussian_product_moment, integrate
from .stein import SteinSpec, stein_feature, stein_features, stein_jacobian_check, weak_stein_discrepancy
from .transversality import (
    RankReport,
    Stratum,
    StratumError,
    check_componentwise,
    check_submersion,
    check_transversal_at,
    enrichment_gain,
    lambda_sweep,
    normal_projection,
    numerical_rank,
)

__version__ = "0.1.0"
