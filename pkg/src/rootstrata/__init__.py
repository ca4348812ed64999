"""Stratification of the hyperbolicity domain by arrangements of the roots
of a polynomial and of its k-th derivative: configuration vectors, stratum
posets, root-sensitivity matrices and retraction flows."""

from .polycore import (
    CoefficientVector,
    DerivedRoots,
    NotHyperbolicError,
    RootConfiguration,
    coeffs_from_roots,
    derivative_roots,
    gamma_normalize,
    roots_from_coeffs,
    std_normalize,
)
from .configvec import (
    ConfigVector,
    CvEntry,
    DimensionReport,
    classify,
    dimension,
    is_admissible,
    parse_cv,
    validate,
)
from .strata import StrataPoset, build_poset, enumerate_cvs, expansions, zero_dim_point
from .sensitivity import (
    SensitivityMatrix,
    TransversalityCertificate,
    deriv_k1_formula,
    lemma_report,
    sensitivity_fd,
    sensitivity_matrix,
    transversality_jacobian,
)
from .flow import (
    FlowEvent,
    FlowResult,
    FlowState,
    SpeedVector,
    Trajectory,
    advance,
    flow_to_boundary,
    retract,
    reverse_check,
    solve_speeds,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
