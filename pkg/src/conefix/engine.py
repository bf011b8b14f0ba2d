"""Iteration drivers with a-priori certificates.

Each driver certifies a two-sided ratio bracket for the first step, derives
the characteristic-equation roots and the geometric rate from the declared
concavity profile, runs the successive approximations with the structural
properties (monotone decrease/increase, segment membership) asserted every
step, and reports the fixed-point residual measured directly.

The stopping rule is step-difference <= tol * (1 - rate): with a normality
constant of 1 for the sup norm, the geometric tail then bounds the distance
to the limit by tol.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .cones import (
    ConeVector,
    ConicalSegment,
    ORDER_TOL,
    add,
    diff_norm,
    leq,
    scale,
    segment_contains,
    subtract,
    sup_norm,
    zeros,
)
from .errors import (
    CertificationError,
    DegenerateResultError,
    DomainError,
    IterationError,
    NonConvergenceError,
    PreconditionError,
    TheoremViolationError,
)
from .profiles import (
    ConcavityProfile,
    Power,
    SumMix,
    phi_iterate,
    rate_k,
    rate_k_general,
    rate_k_increasing,
    solve_delta,
    solve_tau,
)

DEFAULT_FLOOR = 1e-8
HORIZON_CAP = 10**6


class WholeCone:
    """Marker for operators declared strongly concave on the whole cone."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "WHOLE_CONE"


WHOLE_CONE = WholeCone()


@dataclass(frozen=True)
class OperatorHandle:
    """An evaluable operator with its declared profile and concavity domain.

    Declared monotonicity and strong concavity are never trusted: they are
    property-tested by the audit functions below.  Every application checks
    that the result stays in the cone.
    """

    name: str
    apply: Callable[[ConeVector], ConeVector]
    profile: Optional[ConcavityProfile]
    concavity_domain: object = WHOLE_CONE
    order_tol: float = ORDER_TOL

    def __call__(self, x: ConeVector) -> ConeVector:
        y = self.apply(x)
        if y.values.size and float(y.values.min()) < -self.order_tol:
            raise DomainError(
                f"operator {self.name!r} left the cone "
                f"(min value {y.values.min()})"
            )
        return y


class IterationMode(str, Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"
    GENERAL = "general"


@dataclass(frozen=True)
class IterationCertificate:
    """A-priori guarantees derived before the run.

    prefactor, when set, is the theorem constant C with
    step_difference[n] <= C * rate**n; the mixed-bracket mode leaves it
    unset and the prefactor is fit empirically from the first residuals.
    """

    mode: IterationMode
    n0: int
    rate: float
    sigma0: Optional[float] = None
    r0: Optional[float] = None
    r1: Optional[float] = None
    r2: Optional[float] = None
    tau_star: Optional[float] = None
    delta: Optional[float] = None
    prefactor: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise DomainError("certified rate must lie in (0, 1)")
        if self.n0 < 1:
            raise DomainError("n0 must be >= 1")

    def as_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "n0": self.n0,
            "sigma0": self.sigma0,
            "r0": self.r0,
            "r1": self.r1,
            "r2": self.r2,
            "tau_star": self.tau_star,
            "delta": self.delta,
            "rate": self.rate,
            "prefactor": self.prefactor,
        }


@dataclass
class ConvergenceReport:
    """Per-run diagnostics; fixed_point_residual is measured with one extra
    operator application, never inferred from step differences."""

    iterates_kept: int
    residuals: list[float]
    certified_rate: float
    observed_rate: float
    bracket_ok: bool
    fixed_point_residual: float

    def as_dict(self) -> dict:
        return {
            "iterates_kept": self.iterates_kept,
            "residuals": list(self.residuals),
            "certified_rate": self.certified_rate,
            "observed_rate": self.observed_rate,
            "bracket_ok": self.bracket_ok,
            "fixed_point_residual": self.fixed_point_residual,
        }


def report_json(cert: IterationCertificate, report: ConvergenceReport) -> dict:
    out = cert.as_dict()
    rep = report.as_dict()
    rep["residuals"] = rep.pop("residuals")
    out.update(rep)
    return out


def residuals_rows(report: ConvergenceReport) -> list[tuple[int, float, float]]:
    """(n, residual, certified_bound) rows; the bound prefactor is fit from
    the first usable residual."""
    rows = []
    c = fit_prefactor(report.residuals, report.certified_rate)
    for n, r in enumerate(report.residuals):
        rows.append((n, float(r), float(c * report.certified_rate**n)))
    return rows


def observed_rate(residuals: list[float], window: int = 10) -> float:
    """Least-squares geometric fit over the final `window` positive steps;
    diagnostic only, never used for stopping."""
    tail = [r for r in residuals[-window:] if r > 0.0]
    if len(tail) < 2:
        return float("nan")
    n = np.arange(len(tail), dtype=float)
    slope = np.polyfit(n, np.log(tail), 1)[0]
    return float(np.exp(slope))


def fit_prefactor(residuals: list[float], rate: float) -> float:
    """C such that residuals[1] = C * rate; falls back to residuals[0]."""
    if len(residuals) >= 2 and residuals[1] > 0.0:
        return residuals[1] / rate
    if residuals and residuals[0] > 0.0:
        return residuals[0]
    return 0.0


def rate_dominated(
    residuals: list[float],
    rate: float,
    prefactor: Optional[float] = None,
    rel_slack: float = 1e-9,
) -> bool:
    """Check residuals[n] <= C * rate**n for n >= 1, ignoring steps within
    100 machine epsilons of zero.  C is the given theorem prefactor, or is
    fit from the first residual when none is supplied."""
    eps_floor = 100.0 * np.finfo(float).eps * max(residuals, default=0.0)
    c = fit_prefactor(residuals, rate) if prefactor is None else prefactor
    for n, r in enumerate(residuals):
        if n == 0 or r <= eps_floor:
            continue
        if r > c * rate**n * (1.0 + rel_slack):
            return False
    return True


# -- sampling helpers ----------------------------------------------------------


def sample_segment(seg: ConicalSegment, n: int, rng: np.random.Generator) -> list[ConeVector]:
    """Componentwise-uniform samples between the segment endpoints."""
    out = []
    lo, hi = seg.lo.values, seg.hi.values
    for _ in range(n):
        u = rng.uniform(size=lo.size)
        out.append(ConeVector(seg.lo.grid, lo + u * (hi - lo)))
    return out


def sample_ordered_pairs(
    seg: ConicalSegment, n: int, rng: np.random.Generator
) -> list[tuple[ConeVector, ConeVector]]:
    pairs = []
    lo, hi = seg.lo.values, seg.hi.values
    for _ in range(n):
        u = lo + rng.uniform(size=lo.size) * (hi - lo)
        v = u + rng.uniform(size=lo.size) * (hi - u)
        pairs.append((ConeVector(seg.lo.grid, u), ConeVector(seg.lo.grid, v)))
    return pairs


@dataclass
class AuditResult:
    checked: int
    violations: int
    worst_excess: float
    witness: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {
            "checked": self.checked,
            "violations": self.violations,
            "worst_excess": self.worst_excess,
            "passed": self.passed,
        }


def audit_monotonicity(
    op: OperatorHandle,
    segment: ConicalSegment,
    n_pairs: int = 100,
    rng: Optional[np.random.Generator] = None,
    tol: Optional[float] = None,
) -> AuditResult:
    """Random ordered pairs u <= v in the segment must map to A u <= A v."""
    rng = rng or np.random.default_rng(0)
    tol = op.order_tol if tol is None else tol
    violations, worst, witness = 0, 0.0, None
    for u, v in sample_ordered_pairs(segment, n_pairs, rng):
        excess = float(np.max(op(u).values - op(v).values))
        if excess > tol:
            violations += 1
            if excess > worst:
                worst, witness = excess, (u, v)
    return AuditResult(n_pairs, violations, worst, witness)


def audit_concavity(
    op: OperatorHandle,
    segment: ConicalSegment,
    n_samples: int = 100,
    rng: Optional[np.random.Generator] = None,
    tol: Optional[float] = None,
    phi: Optional[Callable[[float], float]] = None,
) -> AuditResult:
    """Random (u, sigma) must satisfy A(sigma u) >= phi(sigma) A u up to
    tol * ||A u||.  phi defaults to the declared profile."""
    rng = rng or np.random.default_rng(0)
    tol = op.order_tol if tol is None else tol
    if phi is None:
        if op.profile is None:
            raise DomainError(f"operator {op.name!r} declares no profile")
        phi = op.profile
    violations, worst, witness = 0, 0.0, None
    for u in sample_segment(segment, n_samples, rng):
        sigma = float(rng.uniform())
        au = op(u)
        left = op(scale(sigma, u)).values
        slack = tol * sup_norm(au)
        excess = float(np.max(phi(sigma) * au.values - left)) - slack
        if excess > 0.0:
            violations += 1
            if excess > worst:
                worst, witness = excess, (u, sigma)
    return AuditResult(n_samples, violations, worst, witness)


# -- bracket certification -----------------------------------------------------


def _power_chain(op: OperatorHandle, v0: ConeVector, count: int) -> ConeVector:
    x = v0
    for _ in range(count):
        x = op(x)
    return x


def verify_bracket(
    op: OperatorHandle,
    v0: ConeVector,
    n0: int,
    m0: int = 1,
    floor: float = DEFAULT_FLOOR,
) -> tuple[float, float]:
    """Certify r1 * A^{n0-m0} v0 <= A^{n0} v0 <= r2 * A^{n0-m0} v0.

    Ratios are taken over nodes where the denominator clears a relative
    floor; nodes below the floor must have a correspondingly small
    numerator, otherwise no finite bracket exists there.
    """
    if not (n0 >= m0 >= 1):
        raise DomainError("need n0 >= m0 >= 1")
    if not floor > 0.0:
        raise DomainError("floor must be positive")
    w = _power_chain(op, v0, n0 - m0)
    z = _power_chain(op, w, m0)
    w_max, z_max = sup_norm(w), sup_norm(z)
    if w_max == 0.0:
        raise CertificationError("denominator chain is identically zero")
    valid = w.values >= floor * w_max
    if not valid.any():
        raise CertificationError("no nodes clear the ratio floor")
    bad = ~valid & (z.values >= floor * z_max)
    if bad.any():
        node = int(np.argmax(bad))
        raise CertificationError(
            f"bracket failure at node {node}: denominator below floor but "
            f"numerator {z.values[node]} is not"
        )
    ratios = z.values[valid] / w.values[valid]
    r1 = float(ratios.min())
    r2 = float(ratios.max())
    if r1 <= 0.0:
        raise CertificationError(f"nonpositive ratio bound r1={r1}")
    return r1, r2


# -- core iteration loop -------------------------------------------------------


def _run_iteration(
    op: OperatorHandle,
    x0: ConeVector,
    stop_abs: float,
    max_iter: int,
    monotone: Optional[str] = None,
    enclosure: Optional[ConicalSegment] = None,
    mode_name: str = "",
) -> tuple[ConeVector, list[float]]:
    x = x0
    residuals: list[float] = []
    for step in range(max_iter):
        x_next = op(x)
        if monotone == "decreasing" and not leq(x_next, x, op.order_tol):
            raise IterationError(step, "monotone decrease violated")
        if monotone == "increasing" and not leq(x, x_next, op.order_tol):
            raise IterationError(step, "monotone increase violated")
        if enclosure is not None and not segment_contains(enclosure, x_next, op.order_tol):
            raise CertificationError(
                f"{mode_name}: iterate escaped the certified segment at step {step}"
            )
        d = diff_norm(x_next, x)
        residuals.append(d)
        x = x_next
        if d <= stop_abs:
            return x, residuals
    partial = ConvergenceReport(
        iterates_kept=len(residuals) + 1,
        residuals=residuals,
        certified_rate=float("nan"),
        observed_rate=observed_rate(residuals),
        bracket_ok=False,
        fixed_point_residual=float("nan"),
    )
    raise NonConvergenceError(
        f"{mode_name}: no convergence within {max_iter} iterations "
        f"(last step {residuals[-1] if residuals else float('nan')})",
        report=partial,
    )


def _finish_report(
    op: OperatorHandle,
    x: ConeVector,
    residuals: list[float],
    rate: float,
    bracket_ok: bool,
) -> ConvergenceReport:
    return ConvergenceReport(
        iterates_kept=len(residuals) + 1,
        residuals=residuals,
        certified_rate=rate,
        observed_rate=observed_rate(residuals),
        bracket_ok=bracket_ok,
        fixed_point_residual=diff_norm(op(x), x),
    )


def _require_profile(op: OperatorHandle) -> ConcavityProfile:
    if op.profile is None:
        raise DomainError(f"operator {op.name!r} declares no concavity profile")
    return op.profile


# -- drivers -------------------------------------------------------------------


def solve_decreasing(
    op: OperatorHandle,
    v0: ConeVector,
    n0: int,
    sigma0: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    floor: float = DEFAULT_FLOOR,
) -> tuple[ConeVector, IterationCertificate, ConvergenceReport]:
    """Monotone-decreasing run from x0 = A^{n0-1} v0 under the certified
    condition sigma0 * x0 <= A x0 <= x0."""
    profile = _require_profile(op)
    if not 0.0 < sigma0 < 1.0:
        raise DomainError("sigma0 must lie in (0, 1)")
    r1, r2 = verify_bracket(op, v0, n0, 1, floor)
    if r2 > 1.0 + op.order_tol:
        raise CertificationError(
            f"decreasing condition fails: upper ratio {r2} exceeds 1"
        )
    if sigma0 > r1 + op.order_tol:
        raise CertificationError(
            f"sigma0={sigma0} is not certified: smallest ratio is {r1}"
        )
    tau = solve_tau(profile, sigma0)
    rate = rate_k(profile, sigma0)
    x0 = _power_chain(op, v0, n0 - 1)
    x, residuals = _run_iteration(
        op,
        x0,
        stop_abs=tol * (1.0 - rate),
        max_iter=max_iter,
        monotone="decreasing",
        mode_name="decreasing",
    )
    bracket = ConicalSegment(scale(tau, x0), x0)
    cert = IterationCertificate(
        IterationMode.DECREASING,
        n0,
        rate,
        sigma0=sigma0,
        tau_star=tau,
        prefactor=(1.0 - sigma0) * sup_norm(x0),
    )
    report = _finish_report(op, x, residuals, rate, segment_contains(bracket, x, op.order_tol))
    return x, cert, report


def solve_increasing(
    op: OperatorHandle,
    v0: ConeVector,
    n0: int,
    r0: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    floor: float = DEFAULT_FLOOR,
) -> tuple[ConeVector, IterationCertificate, ConvergenceReport]:
    """Monotone-nondecreasing run under x0 <= A x0 <= r0 * x0."""
    profile = _require_profile(op)
    if not r0 > 1.0:
        raise DomainError("r0 must exceed 1")
    r1, r2 = verify_bracket(op, v0, n0, 1, floor)
    if r1 < 1.0 - op.order_tol:
        raise CertificationError(
            f"increasing condition fails: smallest ratio {r1} is below 1"
        )
    if r2 > r0 + op.order_tol:
        raise CertificationError(f"r0={r0} is not certified: largest ratio is {r2}")
    delta = solve_delta(profile, r0)
    rate = rate_k_increasing(profile, r0)
    x0 = _power_chain(op, v0, n0 - 1)
    x, residuals = _run_iteration(
        op,
        x0,
        stop_abs=tol * (1.0 - rate),
        max_iter=max_iter,
        monotone="increasing",
        mode_name="increasing",
    )
    bracket = ConicalSegment(x0, scale(delta, x0))
    cert = IterationCertificate(
        IterationMode.INCREASING,
        n0,
        rate,
        r0=r0,
        delta=delta,
        prefactor=(r0 - 1.0) * delta * sup_norm(x0),
    )
    report = _finish_report(op, x, residuals, rate, segment_contains(bracket, x, op.order_tol))
    return x, cert, report


def solve_general(
    op: OperatorHandle,
    v0: ConeVector,
    n0: int,
    r1: float,
    r2: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    floor: float = DEFAULT_FLOOR,
) -> tuple[ConeVector, IterationCertificate, ConvergenceReport]:
    """Run under the mixed bracket r1 * x0 <= A x0 <= r2 * x0 with
    r1 < 1 < r2; iterates must stay inside the certified segment."""
    profile = _require_profile(op)
    if not 0.0 < r1 < 1.0:
        raise DomainError("r1 must lie in (0, 1)")
    if not r2 > 1.0:
        raise DomainError("r2 must exceed 1")
    num_r1, num_r2 = verify_bracket(op, v0, n0, 1, floor)
    if num_r1 < r1 - op.order_tol:
        raise CertificationError(
            f"declared r1={r1} is not certified: smallest ratio is {num_r1}"
        )
    if num_r2 > r2 + op.order_tol:
        raise CertificationError(
            f"declared r2={r2} is not certified: largest ratio is {num_r2}"
        )
    tau1 = solve_tau(profile, r1)
    delta1 = solve_delta(profile, r2)
    rate = rate_k_general(profile, r1, r2)
    x0 = _power_chain(op, v0, n0 - 1)
    enclosure = ConicalSegment(scale(tau1, x0), scale(delta1, x0))
    x, residuals = _run_iteration(
        op,
        x0,
        stop_abs=tol * (1.0 - rate),
        max_iter=max_iter,
        enclosure=enclosure,
        mode_name="general",
    )
    cert = IterationCertificate(
        IterationMode.GENERAL, n0, rate, r1=r1, r2=r2, tau_star=tau1, delta=delta1
    )
    report = _finish_report(op, x, residuals, rate, segment_contains(enclosure, x, op.order_tol))
    return x, cert, report


def complement_fixed_point(
    op: OperatorHandle,
    op0: OperatorHandle,
    v0: ConeVector,
    n0: int,
    gamma0: float,
    alpha: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    floor: float = DEFAULT_FLOOR,
    n_hypothesis_samples: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> ConeVector:
    """Nontrivial fixed point of the complement-type operator op0.

    op must run the decreasing driver with a pure power profile of exponent
    alpha; op0 must sit inside the two-sided envelope
    x0 - gamma0^{1-alpha} A(x0 - u) >= A0 u >= x0 - A(x0 - u),
    which is sampled on random u in <0, x0>.
    """
    rng = rng or np.random.default_rng(0)
    if not 0.0 < gamma0 < 1.0:
        raise DomainError("gamma0 must lie in (0, 1)")
    profile = _require_profile(op)
    if not (isinstance(profile, Power) and profile.gamma == alpha):
        raise DomainError("complement construction needs a pure power profile matching alpha")
    r1, r2 = verify_bracket(op, v0, n0, 1, floor)
    if r2 > 1.0 + op.order_tol:
        raise CertificationError("decreasing condition fails for the base operator")
    x0 = _power_chain(op, v0, n0 - 1)
    x1 = op(x0)
    if diff_norm(x1, x0) <= 10.0 * tol:
        raise PreconditionError("the chain is already fixed: A^{n0} v0 == A^{n0-1} v0")
    sigma0 = min(r1, 1.0 - 1e-12)
    x_star, _, _ = solve_decreasing(op, v0, n0, sigma0, tol, max_iter, floor)

    c_hi = gamma0 ** (1.0 - alpha)
    seg = ConicalSegment(zeros(x0.grid), x0)
    slack = op.order_tol
    for u in sample_segment(seg, n_hypothesis_samples, rng):
        au = op(subtract(x0, u)).values
        mid = op0(u).values
        if np.any(mid < x0.values - au - slack):
            raise PreconditionError(
                "two-sided envelope fails on the lower side: A0 u < x0 - A(x0 - u)"
            )
        if np.any(mid > x0.values - c_hi * au + slack):
            raise PreconditionError(
                "two-sided envelope fails on the upper side: "
                "A0 u > x0 - gamma0^{1-alpha} A(x0 - u)"
            )

    start = subtract(x0, x_star)
    upper = ConeVector(x0.grid, x0.values - gamma0 * x_star.values)
    x, _ = _run_iteration(
        op0,
        start,
        stop_abs=tol,
        max_iter=max_iter,
        monotone="increasing",
        enclosure=ConicalSegment(start, upper),
        mode_name="complement",
    )
    if not leq(x, upper, op.order_tol) or not leq(start, x, op.order_tol):
        raise CertificationError("complement result escaped its two-sided envelope")
    if sup_norm(x) <= 10.0 * tol:
        raise DegenerateResultError("complement fixed point collapsed to zero")
    if diff_norm(x, x0) <= 10.0 * tol:
        raise DegenerateResultError("complement fixed point collapsed to x0")
    return x


def solve_sum(
    op: OperatorHandle,
    op0: OperatorHandle,
    x_star: ConeVector,
    c0: float,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    n_hypothesis_samples: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> tuple[ConeVector, float, ConvergenceReport]:
    """Fixed point of A + A0 grown from x_star, with the mixed profile.

    Hypotheses sampled before the run: A0 is critical and monotone,
    A0 u <= c0 * A u, and A0(t u) >= t * A0 u on the certified segment.
    After convergence the return path is verified: plain A-iterates from
    the sum fixed point fall back to x_star under the certified rate.
    """
    rng = rng or np.random.default_rng(0)
    profile = _require_profile(op)
    if not c0 > 0.0:
        raise DomainError("c0 must be positive")
    fp_res = diff_norm(op(x_star), x_star)
    if fp_res > max(tol * 10.0, 1e-12):
        raise PreconditionError(f"x_star is not fixed for the base operator ({fp_res})")
    if sup_norm(op0(zeros(x_star.grid))) > op.order_tol:
        raise PreconditionError("A0 is not critical: A0(0) != 0")

    r_star = solve_delta(profile, c0 + 1.0)
    seg_full = ConicalSegment(zeros(x_star.grid), scale(r_star, x_star))
    seg_upper = ConicalSegment(x_star, scale(r_star, x_star))
    slack = op.order_tol

    for u in sample_segment(seg_full, n_hypothesis_samples, rng):
        if np.any(op0(u).values > c0 * op(u).values + slack):
            raise PreconditionError("sampled bound fails: A0 u <= c0 * A u")
    for u, v in sample_ordered_pairs(seg_full, n_hypothesis_samples, rng):
        if np.any(op0(u).values > op0(v).values + slack):
            raise PreconditionError("A0 is not monotone on the sampled segment")
    for u in sample_segment(seg_upper, n_hypothesis_samples, rng):
        t = float(rng.uniform())
        if np.any(op0(scale(t, u)).values < t * op0(u).values - slack):
            raise PreconditionError("sampled bound fails: A0(t u) >= t * A0 u")

    sum_profile = SumMix(profile, c0)
    sum_op = OperatorHandle(
        name=f"{op.name}+{op0.name}",
        apply=lambda x: add(op(x), op0(x)),
        profile=sum_profile,
        concavity_domain=seg_upper,
        order_tol=op.order_tol,
    )
    rate = rate_k_increasing(sum_profile, c0 + 1.0)
    x, residuals = _run_iteration(
        sum_op,
        x_star,
        stop_abs=tol * (1.0 - rate),
        max_iter=max_iter,
        monotone="increasing",
        enclosure=seg_upper,
        mode_name="sum",
    )
    bracket_ok = segment_contains(seg_upper, x, op.order_tol)
    report = _finish_report(sum_op, x, residuals, rate, bracket_ok)

    # Return path: plain A-iterates from the sum fixed point contract back
    # to x_star no slower than the one-sided rate at r_star.
    k_star = rate_k_increasing(profile, r_star)
    dists = []
    z = x
    floor_abs = 100.0 * np.finfo(float).eps * max(sup_norm(x_star), 1.0)
    for _ in range(max_iter):
        z = op(z)
        dists.append(diff_norm(z, x_star))
        if dists[-1] <= max(floor_abs, tol):
            break
    if dists and dists[0] > 0.0:
        c1 = dists[0] / k_star
        for n, d in enumerate(dists, start=1):
            if d > floor_abs and d > c1 * k_star**n * (1.0 + 1e-9):
                raise CertificationError(
                    "return path to x_star broke the certified geometric envelope"
                )
    return x, r_star, report


def periodic_points(
    op: OperatorHandle,
    v0: ConeVector,
    n0: int,
    m0: int,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    floor: float = DEFAULT_FLOOR,
) -> list[ConeVector]:
    """Limits of the m0 interleaved subsequences x_{m0 k + j}; each limit is
    fixed under m0 applications of the operator."""
    _require_profile(op)
    if not (n0 >= m0 >= 1):
        raise DomainError("need n0 >= m0 >= 1")
    num_r1, num_r2 = verify_bracket(op, v0, n0, m0, floor)
    # Widening the certified bracket into the open intervals keeps the
    # two-sided condition valid when the numeric ratios are one-sided.
    r1 = min(num_r1, 1.0 - 1e-9)
    r2 = max(num_r2, 1.0 + 1e-9)
    if r1 <= 0.0:
        raise CertificationError("nonpositive lower ratio")

    x = _power_chain(op, v0, n0 - m0)
    window: list[ConeVector] = []
    # Per-subsequence step differences: entry j compares x_{m0 k + j} with
    # x_{m0 (k-1) + j}.
    prev_cycle: list[Optional[ConeVector]] = [None] * m0
    diffs = [math.inf] * m0
    detect = 0.05 * tol
    for n in range(1, max_iter + 1):
        x = op(x)
        j = n % m0
        if prev_cycle[j] is not None:
            diffs[j] = diff_norm(x, prev_cycle[j])
        prev_cycle[j] = x
        if n >= 2 * m0 and max(diffs) <= detect:
            # collect one aligned cycle p_0 .. p_{m0-1}
            points = [None] * m0
            points[j] = x
            q = x
            for step in range(1, m0):
                q = op(q)
                points[(j + step) % m0] = q
            ok = True
            for p in points:
                if diff_norm(_power_chain(op, p, m0), p) > tol:
                    ok = False
                    break
            if ok:
                for idx, p in enumerate(points):
                    if sup_norm(p) <= 10.0 * tol:
                        raise DegenerateResultError(f"periodic point {idx} is zero")
                return points
            detect *= 0.1
    raise NonConvergenceError(
        f"periodic subsequences did not settle within {max_iter} iterations"
    )


@dataclass(frozen=True)
class CollapseResult:
    """Either all periodic points coincide (collapsed, with the common
    point) or only the residue classes mod gcd are forced to coincide."""

    collapsed: bool
    point: Optional[ConeVector]
    classes: tuple[tuple[int, ...], ...]


def collapse_check(
    points: list[ConeVector],
    i0: int,
    j0: int,
    d1: float,
    d2: float,
    tol: float = 1e-10,
) -> CollapseResult:
    """Decide whether a two-sided comparison between points i0 and j0 forces
    all periodic points to coincide (coprime index gap) or only the residue
    classes modulo the gcd."""
    m0 = len(points)
    if not (0 <= i0 < m0 and 0 <= j0 < m0 and i0 != j0):
        raise DomainError("need distinct indices inside the point list")
    if not 0.0 < d1 < 1.0:
        raise DomainError("d1 must lie in (0, 1)")
    if not d2 > 1.0:
        raise DomainError("d2 must exceed 1")
    g = math.gcd(m0, abs(i0 - j0))
    base = points[i0]
    target = points[j0]
    if not (
        leq(scale(d1, base), target, ORDER_TOL)
        and leq(target, scale(d2, base), ORDER_TOL)
    ):
        raise CertificationError(
            f"two-sided comparison d1*p[{i0}] <= p[{j0}] <= d2*p[{i0}] fails"
        )
    classes = tuple(
        tuple(idx for idx in range(m0) if idx % g == r) for r in range(g)
    )
    if g == 1:
        for idx in range(1, m0):
            if diff_norm(points[0], points[idx]) > tol:
                raise TheoremViolationError(
                    f"coprime collapse failed: points 0 and {idx} differ by "
                    f"{diff_norm(points[0], points[idx])}"
                )
        return CollapseResult(True, points[0], classes)
    for cls in classes:
        anchor = points[cls[0]]
        for idx in cls[1:]:
            if diff_norm(anchor, points[idx]) > tol:
                raise TheoremViolationError(
                    f"residue class {cls} does not coincide at index {idx}"
                )
    return CollapseResult(False, None, classes)


@dataclass
class ProbeResult:
    """Truthy iff the probe certifies uniqueness on the sampled segment.
    Offending limits (deduplicated) are attached as evidence when not."""

    unique: bool
    offending_limits: list[ConeVector]
    horizon: Optional[int]
    starts_checked: int

    def __bool__(self) -> bool:
        return self.unique

    def as_dict(self) -> dict:
        return {
            "unique": self.unique,
            "offending_count": len(self.offending_limits),
            "horizon": self.horizon,
            "starts_checked": self.starts_checked,
        }


def uniqueness_probe(
    op: OperatorHandle,
    x_star: ConeVector,
    r1: float,
    r2: float,
    n_starts: int = 8,
    tol: float = 1e-8,
    rng: Optional[np.random.Generator] = None,
    max_iter: int = 100_000,
) -> ProbeResult:
    """Empirical + analytic uniqueness check on <r1 x*, r2 x*>.

    (a) every start (segment corners always included) must iterate back to
    x_star within tol; (b) the squeeze horizon, the first n at which the
    iterated profile pins both r1 and 1/r2 to within tol of 1, must be
    finite.  A failing start is evidence, not a crash: the result is falsy
    with the offending limits attached.
    """
    rng = rng or np.random.default_rng(0)
    if not 0.0 < r1 < 1.0:
        raise DomainError("r1 must lie in (0, 1)")
    if not r2 > 1.0:
        raise DomainError("r2 must exceed 1")
    if n_starts < 2:
        raise DomainError("need at least the two corner starts")
    fp = diff_norm(op(x_star), x_star)
    if fp > tol:
        raise PreconditionError(f"x_star is not fixed within tol ({fp})")

    horizon: Optional[int] = None
    if op.profile is not None:
        s_lo, s_hi = r1, 1.0 / r2
        for n in range(1, HORIZON_CAP + 1):
            s_lo = op.profile(s_lo)
            s_hi = op.profile(s_hi)
            if 1.0 - s_lo <= tol and 1.0 - s_hi <= tol:
                horizon = n
                break
    analytic_ok = horizon is not None

    seg = ConicalSegment(scale(r1, x_star), scale(r2, x_star))
    starts = [seg.lo, seg.hi] + sample_segment(seg, n_starts - 2, rng)
    inner_cap = min(max_iter, 4 * horizon + 100 if horizon else 10_000)
    offending: list[ConeVector] = []
    for start in starts:
        x = start
        for _ in range(inner_cap):
            x_next = op(x)
            d = diff_norm(x_next, x)
            x = x_next
            if d <= 0.01 * tol:
                break
        if diff_norm(x, x_star) > tol:
            if all(diff_norm(x, other) > 10.0 * tol for other in offending):
                offending.append(x)
    return ProbeResult(
        unique=analytic_ok and not offending,
        offending_limits=offending,
        horizon=horizon,
        starts_checked=len(starts),
    )
