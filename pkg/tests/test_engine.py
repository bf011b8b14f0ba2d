"""Driver behavior against scalar closed forms and the sequence-space
operator: bracket certification, the three iteration modes, the complement
and sum constructions, periodic points, and the uniqueness probe."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conefix import (
    ConeVector,
    ConicalSegment,
    Grid,
    OperatorHandle,
    Power,
    WHOLE_CONE,
    audit_concavity,
    audit_monotonicity,
    collapse_check,
    complement_fixed_point,
    diff_norm,
    full,
    leq,
    ones,
    periodic_points,
    rate_dominated,
    scale,
    segment_contains,
    solve_decreasing,
    solve_general,
    solve_increasing,
    solve_sum,
    sup_norm,
    uniqueness_probe,
    verify_bracket,
    zeros,
)
from conefix.engine import fit_prefactor, observed_rate
from conefix.errors import (
    CertificationError,
    DegenerateResultError,
    DomainError,
    IterationError,
    NonConvergenceError,
    PreconditionError,
    TheoremViolationError,
)
from conefix.gallery import (
    SCALAR_GRID,
    make_capped_linear,
    make_complement_operator,
    make_linf_operator,
    make_scalar_power,
    scalar_vector,
)

SQRT = make_scalar_power(0.5)


def scalar_value(vec):
    return float(vec.values[0])


# -- verify_bracket ---------------------------------------------------------------


def test_bracket_linf_remark_operator():
    op = make_linf_operator(16)
    grid = Grid.line(1.0, 16.0, 16)
    r1, r2 = verify_bracket(op, full(grid, 2.0), 1, 1)
    assert r1 == pytest.approx(0.5, abs=1e-15)
    assert r2 == pytest.approx(0.5, abs=1e-15)


def test_bracket_scalar_power():
    r1, r2 = verify_bracket(SQRT, scalar_vector(16.0), 1, 1)
    assert (r1, r2) == (0.25, 0.25)


def test_bracket_floor_failure_names_node():
    grid = Grid.line(0.0, 1.0, 3)

    def weird(x):
        # second application turns on a node that was below the floor
        if x.values[0] == 0.0:
            return ConeVector(grid, [1.0, 1.0, 1.0])
        return ConeVector(grid, [0.0, 1.0, 1.0])

    op = OperatorHandle("weird", weird, Power(0.5), WHOLE_CONE)
    with pytest.raises(CertificationError, match="node 0"):
        verify_bracket(op, ConeVector(grid, [5.0, 1.0, 1.0]), 2, 1)


def test_bracket_rejects_bad_order():
    with pytest.raises(DomainError):
        verify_bracket(SQRT, scalar_vector(4.0), 1, 2)


# -- decreasing driver ---------------------------------------------------------------


def test_decreasing_linf_remark_example():
    op = make_linf_operator(64)
    grid = Grid.line(1.0, 64.0, 64)
    x, cert, report = solve_decreasing(op, full(grid, 2.0), 1, 1.0 / 3.0)
    assert np.all(x.values == 1.0)
    assert report.fixed_point_residual == 0.0
    assert cert.tau_star == pytest.approx(1.0 / 9.0, abs=1e-14)
    assert report.bracket_ok


def test_decreasing_scalar_iterates_closed_form():
    # iterates are v^(2^-n); a start below 1 grows, so the decreasing mode
    # needs v0 > 1 and the sub-1 start runs through the increasing mode
    v0 = 1.0 / 0.9
    x, cert, report = solve_decreasing(SQRT, scalar_vector(v0), 1, v0**-0.5, tol=1e-12)
    assert scalar_value(x) == pytest.approx(1.0, abs=1e-11)
    assert report.residuals[0] == pytest.approx(abs(math.sqrt(v0) - v0), rel=1e-12)
    y, _, _ = solve_increasing(SQRT, scalar_vector(0.9), 1, math.sqrt(0.9) / 0.9, tol=1e-12)
    assert scalar_value(y) == pytest.approx(1.0, abs=1e-11)


def test_decreasing_requires_certified_sigma0():
    with pytest.raises(CertificationError):
        solve_decreasing(SQRT, scalar_vector(16.0), 1, 0.5)  # ratio is 0.25 < 0.5


def test_decreasing_rejects_increasing_chain():
    with pytest.raises(CertificationError):
        solve_decreasing(SQRT, scalar_vector(0.25), 1, 0.2)  # sqrt grows below 1


def test_decreasing_monotonicity_violation_is_reported():
    grid = SCALAR_GRID
    state = {"n": 0}

    def bouncy(x):
        state["n"] += 1
        if state["n"] == 3:
            return ConeVector(grid, x.values * 1.5)
        return ConeVector(grid, np.sqrt(x.values))

    op = OperatorHandle("bouncy", bouncy, Power(0.5), WHOLE_CONE)
    with pytest.raises(IterationError):
        solve_decreasing(op, scalar_vector(9.0), 1, 0.3, tol=1e-12)


def test_decreasing_nonconvergence_carries_partial_report():
    with pytest.raises(NonConvergenceError) as err:
        solve_decreasing(SQRT, scalar_vector(100.0), 1, 0.1, tol=1e-12, max_iter=3)
    assert err.value.report is not None
    assert len(err.value.report.residuals) == 3


def test_scalar_oracle_equivalence_decreasing():
    v0, sigma0 = 7.3, 7.3**-0.5
    x, cert, report = solve_decreasing(SQRT, scalar_vector(v0), 1, sigma0, tol=1e-12)
    y = v0
    oracle_steps = []
    for _ in range(report.iterates_kept - 1):
        y_next = math.sqrt(y)
        oracle_steps.append(abs(y_next - y))
        y = y_next
    assert scalar_value(x) == pytest.approx(y, abs=1e-12)
    assert np.allclose(report.residuals, oracle_steps, rtol=1e-12, atol=0)


# -- increasing driver -----------------------------------------------------------------


def test_increasing_scalar_closed_form():
    x, cert, report = solve_increasing(SQRT, scalar_vector(1.0 / 16.0), 1, 4.0, tol=1e-12)
    assert scalar_value(x) == pytest.approx(1.0, abs=1e-11)
    assert cert.delta == pytest.approx(16.0, rel=1e-12)
    assert all(b >= a - 1e-15 for a, b in zip(report.residuals, report.residuals))


def test_increasing_scalar_second_case():
    x, cert, _ = solve_increasing(SQRT, scalar_vector(0.25), 1, 2.0, tol=1e-12)
    assert scalar_value(x) == pytest.approx(1.0, abs=1e-11)
    assert cert.delta == pytest.approx(4.0, rel=1e-12)


def test_increasing_already_fixed_point_returns_start():
    x, cert, report = solve_increasing(SQRT, scalar_vector(1.0), 1, 1.5, tol=1e-12)
    assert scalar_value(x) == 1.0
    assert report.residuals == [0.0]
    assert report.fixed_point_residual == 0.0


def test_increasing_certified_envelope_with_theorem_prefactor():
    x, cert, report = solve_increasing(SQRT, scalar_vector(1.0 / 16.0), 1, 4.0, tol=1e-12)
    assert rate_dominated(report.residuals, cert.rate, prefactor=cert.prefactor)
    # and the first-residual fit is genuinely too tight here
    assert not rate_dominated(report.residuals, cert.rate)


# -- general driver -----------------------------------------------------------------------


def test_general_scalar_mixed_bracket():
    x, cert, report = solve_general(SQRT, scalar_vector(0.5), 1, 0.7, 1.5, tol=1e-12)
    assert scalar_value(x) == pytest.approx(1.0, abs=1e-11)
    assert cert.tau_star == pytest.approx(0.49, rel=1e-12)
    assert cert.delta == pytest.approx(2.25, rel=1e-12)
    assert report.bracket_ok


def test_general_rejects_degenerate_bracket():
    with pytest.raises(DomainError):
        solve_general(SQRT, scalar_vector(0.5), 1, 1.0, 1.0)


def test_general_rejects_uncertified_bracket():
    # the actual ratio at v0 = 0.25 is 2, outside the declared [0.9, 1.1]
    with pytest.raises(CertificationError):
        solve_general(SQRT, scalar_vector(0.25), 1, 0.9, 1.1)


# -- complement driver ---------------------------------------------------------------------


def test_complement_scalar_full_strength():
    # base sqrt with v0 = 4, chain start x0 = 2, inner fixed point 1
    v0 = scalar_vector(4.0)
    a0 = make_complement_operator(SQRT, v0, 2, 1.0)
    x = complement_fixed_point(SQRT, a0, v0, 2, 0.25, 0.5, tol=1e-12)
    assert scalar_value(x) == pytest.approx(1.0, abs=1e-10)


def test_complement_scalar_saturated_lower_constant():
    v0 = scalar_vector(4.0)
    gamma0 = 0.25
    c = gamma0 ** (1.0 - 0.5)
    a0 = make_complement_operator(SQRT, v0, 2, c)
    x = complement_fixed_point(SQRT, a0, v0, 2, gamma0, 0.5, tol=1e-12)
    # fixed point of u -> c*sqrt(u) is c^2; the complement value is 2 - c^2
    assert scalar_value(x) == pytest.approx(2.0 - c * c, abs=1e-10)
    assert 1.0 - 1e-9 <= scalar_value(x) <= 1.75 + 1e-9


def test_complement_rejects_wrong_profile():
    v0 = scalar_vector(4.0)
    a0 = make_complement_operator(SQRT, v0, 2, 1.0)
    with pytest.raises(DomainError):
        complement_fixed_point(SQRT, a0, v0, 2, 0.25, 0.3)


def test_complement_rejects_operator_outside_envelope():
    v0 = scalar_vector(4.0)
    x0 = scalar_vector(2.0)

    def too_big(u):
        return x0
    bad = OperatorHandle("bad", too_big, None, WHOLE_CONE)
    with pytest.raises(PreconditionError):
        complement_fixed_point(SQRT, bad, v0, 2, 0.25, 0.5)


# -- sum driver -----------------------------------------------------------------------------


def test_sum_scalar_against_root_finder():
    a0 = make_capped_linear(0.5, 1.0)
    x_star = scalar_vector(1.0)
    x, r_star, report = solve_sum(SQRT, a0, x_star, 0.5, tol=1e-13)
    oracle = brentq(lambda t: math.sqrt(t) + min(t, 1.0) / 2.0 - t, 1.2, 2.2, xtol=1e-14)
    assert scalar_value(x) == pytest.approx(oracle, abs=1e-10)
    assert scalar_value(x) == pytest.approx(((1.0 + math.sqrt(3.0)) / 2.0) ** 2, abs=1e-10)
    assert r_star == pytest.approx(2.25, rel=1e-12)
    assert report.bracket_ok


def test_sum_zero_companion_returns_fixed_point():
    def zero_op(x):
        return zeros(x.grid)

    a0 = OperatorHandle("zero", zero_op, None, WHOLE_CONE)
    x, r_star, report = solve_sum(SQRT, a0, scalar_vector(1.0), 0.5, tol=1e-13)
    assert scalar_value(x) == 1.0
    assert report.residuals == [0.0]


def test_sum_rejects_noncritical_companion():
    def shifted(x):
        return ConeVector(x.grid, x.values * 0.0 + 0.5)

    a0 = OperatorHandle("shifted", shifted, None, WHOLE_CONE)
    with pytest.raises(PreconditionError):
        solve_sum(SQRT, a0, scalar_vector(1.0), 0.5)


def test_sum_rejects_oversized_companion():
    a0 = make_capped_linear(5.0, 10.0)  # 5*min(x,10) > 0.5*sqrt(x)
    with pytest.raises(PreconditionError):
        solve_sum(SQRT, a0, scalar_vector(1.0), 0.5)


def test_sum_return_path_rate():
    # plain sqrt iterates from the sum fixed point fall back to 1 under
    # k = (1 - phi(1/r*))/(1 - 1/r*) = 0.6 with the prefactor fit at n = 1
    a0 = make_capped_linear(0.5, 1.0)
    x, r_star, _ = solve_sum(SQRT, a0, scalar_vector(1.0), 0.5, tol=1e-13)
    k_star = (1.0 - math.sqrt(1.0 / r_star)) / (1.0 - 1.0 / r_star)
    assert k_star == pytest.approx(0.6, rel=1e-12)
    dists = []
    z = scalar_value(x)
    for _ in range(60):
        z = math.sqrt(z)
        dists.append(abs(z - 1.0))
    c1 = dists[0] / k_star
    for n, d in enumerate(dists, start=1):
        if d > 1e-14:
            assert d <= c1 * k_star**n * (1.0 + 1e-9)


# -- periodic points and collapse -------------------------------------------------------------


def test_periodic_scalar_all_points_collapse():
    points = periodic_points(SQRT, scalar_vector(0.5), 3, 3, tol=1e-12)
    assert len(points) == 3
    for p in points:
        assert scalar_value(p) == pytest.approx(1.0, abs=1e-10)
    result = collapse_check(points, 0, 2, 0.9, 1.1, tol=1e-10)
    assert result.collapsed
    assert scalar_value(result.point) == pytest.approx(1.0, abs=1e-10)


def test_periodic_m0_one_reduces_to_plain_iteration():
    points = periodic_points(SQRT, scalar_vector(0.5), 1, 1, tol=1e-12)
    assert len(points) == 1
    assert scalar_value(points[0]) == pytest.approx(1.0, abs=1e-10)


def test_periodic_linf_unique_fixed_point_collapses():
    op = make_linf_operator(8)
    grid = Grid.line(1.0, 8.0, 8)
    points = periodic_points(op, full(grid, 2.0), 2, 2, tol=1e-12)
    for p in points:
        assert diff_norm(p, ones(grid)) <= 1e-10


def test_collapse_check_gcd_two_distinct_classes():
    grid = Grid.line(0.0, 1.0, 4)
    a, b = full(grid, 1.0), full(grid, 2.0)
    points = [a, b, a, b, a, b]
    result = collapse_check(points, 0, 2, 0.4, 2.5, tol=1e-10)
    assert not result.collapsed
    assert result.classes == ((0, 2, 4), (1, 3, 5))


def test_collapse_check_gcd_one_mismatch_is_violation():
    grid = Grid.line(0.0, 1.0, 4)
    points = [full(grid, 1.0), full(grid, 2.0), full(grid, 1.0)]
    with pytest.raises(TheoremViolationError):
        collapse_check(points, 0, 2, 0.4, 2.5, tol=1e-10)


def test_collapse_check_requires_two_sided_comparison():
    grid = Grid.line(0.0, 1.0, 4)
    points = [full(grid, 1.0), full(grid, 5.0), full(grid, 1.0)]
    with pytest.raises(CertificationError):
        collapse_check(points, 0, 1, 0.5, 2.0, tol=1e-10)


# -- uniqueness probe ----------------------------------------------------------------------------


def test_probe_true_for_linf(rng):
    op = make_linf_operator(16)
    grid = Grid.line(1.0, 16.0, 16)
    probe = uniqueness_probe(op, ones(grid), 0.5, 2.0, 8, tol=1e-8, rng=rng)
    assert bool(probe)
    assert probe.offending_limits == []
    assert probe.horizon is not None


def test_probe_true_for_scalar_wide_bracket(rng):
    probe = uniqueness_probe(SQRT, scalar_vector(1.0), 0.01, 100.0, 6, tol=1e-8, rng=rng)
    assert bool(probe)


def test_probe_requires_fixed_point():
    with pytest.raises(PreconditionError):
        uniqueness_probe(SQRT, scalar_vector(2.0), 0.5, 2.0, 4, tol=1e-10)


# -- audits ----------------------------------------------------------------------------------------


def test_audit_passes_for_linf(rng):
    op = make_linf_operator(16)
    grid = Grid.line(1.0, 16.0, 16)
    seg = ConicalSegment(zeros(grid), full(grid, 3.0))
    assert audit_monotonicity(op, seg, 100, rng).passed
    assert audit_concavity(op, seg, 100, rng).passed


def test_audit_catches_nonmonotone_operator(rng):
    grid = Grid.line(0.0, 1.0, 3)

    def flipper(x):
        return ConeVector(grid, 1.0 / (1.0 + x.values))

    op = OperatorHandle("flip", flipper, Power(0.5), WHOLE_CONE)
    seg = ConicalSegment(zeros(grid), ones(grid))
    assert not audit_monotonicity(op, seg, 50, rng).passed


def test_audit_catches_wrong_profile(rng):
    # x**0.8 is concave but cannot dominate the sqrt profile near 0
    op = make_scalar_power(0.8)
    wrong = OperatorHandle("mislabeled", op.apply, Power(0.5), WHOLE_CONE)
    seg = ConicalSegment(scalar_vector(0.5), scalar_vector(2.0))
    assert not audit_concavity(wrong, seg, 200, rng).passed


# -- report diagnostics ------------------------------------------------------------------------------


def test_observed_rate_matches_geometric_sequence():
    residuals = [0.5 * 0.3**n for n in range(12)]
    assert observed_rate(residuals) == pytest.approx(0.3, rel=1e-6)


def test_fit_prefactor_uses_second_residual():
    assert fit_prefactor([1.0, 0.3], 0.6) == pytest.approx(0.5)
    assert fit_prefactor([0.7], 0.6) == pytest.approx(0.7)


def test_report_serialization_round_trip():
    x, cert, report = solve_decreasing(SQRT, scalar_vector(4.0), 1, 0.5, tol=1e-12)
    from conefix.engine import report_json, residuals_rows

    doc = report_json(cert, report)
    for key in ("mode", "n0", "sigma0", "tau_star", "delta", "rate",
                "residuals", "observed_rate", "bracket_ok", "fixed_point_residual"):
        assert key in doc
    rows = residuals_rows(report)
    assert rows[0][0] == 0
    assert all(isinstance(r[1], float) and isinstance(r[2], float) for r in rows)
