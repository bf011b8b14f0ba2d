"""conefix: fixed points of monotone strongly concave operators on
discretized cones, with a-priori geometric-rate certificates, two-sided
solution brackets, uniqueness probes, and counterexample constructors."""

from .cones import (
    Axis,
    ConeVector,
    ConicalSegment,
    Grid,
    ORDER_TOL,
    add,
    axpy,
    diff_norm,
    full,
    leq,
    load_csv,
    ones,
    save_csv,
    scale,
    segment_contains,
    subtract,
    sup_norm,
    zeros,
)
from .engine import (
    AuditResult,
    CollapseResult,
    ConvergenceReport,
    IterationCertificate,
    IterationMode,
    OperatorHandle,
    ProbeResult,
    WHOLE_CONE,
    audit_concavity,
    audit_monotonicity,
    collapse_check,
    complement_fixed_point,
    periodic_points,
    rate_dominated,
    solve_decreasing,
    solve_general,
    solve_increasing,
    solve_sum,
    uniqueness_probe,
    verify_bracket,
)
from .profiles import (
    ConcavityProfile,
    Power,
    SumMix,
    parse_profile,
    phi_eval,
    phi_iterate,
    profile_name,
    rate_k,
    rate_k_general,
    rate_k_increasing,
    solve_delta,
    solve_tau,
    validate_profile,
)
from .quadrature import (
    AccuracyBudget,
    QuadratureRule,
    apply_difference_kernel,
    gauss_kernel,
    gaussian_line_blur,
    gaussian_tail_radius,
    heat_rule,
    residual,
)

__version__ = "0.1.0"
