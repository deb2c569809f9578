"""Numerical exterior calculus for symplectic half-flat SU(3)-structures.

The package has three layers: a dense exterior algebra over a fixed
six-dimensional coframe (:mod:`halfflat.exterior`), the pointwise stable-form
machinery that turns a (2-form, 3-form) pair into a full SU(3)-structure with
its torsion (:mod:`halfflat.hitchin`), and two concrete geometries built on
top: the cohomogeneity-one construction on the tangent bundle of the
3-sphere (:mod:`halfflat.ts3`) and the T^6 family (:mod:`halfflat.torus`).
"""

from .errors import (
    AdmissibilityFailure,
    DegenerateMetric,
    DegenerateSymplectic,
    DegenerateVolume,
    DegreeMismatch,
    DegreeOverflow,
    DegreeUnderflow,
    FrameMismatch,
    HalfFlatError,
    NotProportional,
    NotStable,
    ODEStiffness,
    ParseError,
    PeriodicityViolation,
    SingularSystem,
    UnsupportedModel,
    ValidationFailure,
)
from .exterior import (
    Form,
    Metric,
    Vector6,
    contract,
    hodge_star,
    inner_product,
    pullback,
    wedge,
    wedge_all,
)
from .expr import diff_expr, evaluate, parse_expr, to_text
from .coframe import (
    CoframeModel,
    FormField,
    chart_model,
    evaluate_at,
    exterior_derivative,
    lie_derivative,
    ts3_model,
)
from .hitchin import (
    SU3Data,
    TorsionReport,
    almost_complex,
    hitchin_p,
    lefschetz_inverse,
    lemma1_residual,
    s_endomorphism,
    torsion_report,
    validate_su3,
)
from .ts3 import (
    AdmissibilityReport,
    BuiltStructure,
    Profile,
    build_structure,
    check_admissibility,
    integrate_f2,
    scal_closed_form,
    scal_from_torsion,
    stenzel_solve,
    symbolic_profile,
)
from .torus import (
    AutomorphismReport,
    TorusSpec,
    automorphism_scan,
    build_torus,
    verify_half_flat,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
