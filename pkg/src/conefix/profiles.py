"""Concavity profiles and the scalar characteristic-equation solvers.

A profile is a continuous increasing concave map of [0,1] onto itself with
an infinite right derivative at 0.  Two families ship: pure powers
sigma**gamma with gamma in (0,1), and the mixed profile
(c0*sigma + base(sigma))/(1 + c0) that governs sums of a concave operator
with a positively homogeneous one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError

TAU_RESIDUAL_TOL = 1e-14
DELTA_RESIDUAL_TOL = 1e-12
MAX_BISECT_STEPS = 200


class ConcavityProfile:
    """Base class; subclasses implement _eval on scalars or arrays."""

    def __call__(self, sigma):
        arr = np.asarray(sigma, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError(f"profile argument outside [0, 1]: {sigma}")
        out = self._eval(arr)
        return float(out) if np.isscalar(sigma) or arr.ndim == 0 else out

    def _eval(self, sigma):
        raise NotImplementedError


@dataclass(frozen=True)
class Power(ConcavityProfile):
    """sigma ** gamma with gamma in (0, 1)."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise DomainError("power exponent must lie in (0, 1)")

    def _eval(self, sigma):
        return np.power(sigma, self.gamma)


@dataclass(frozen=True)
class SumMix(ConcavityProfile):
    """(c0*sigma + base(sigma)) / (1 + c0) with c0 > 0."""

    base: ConcavityProfile
    c0: float

    def __post_init__(self):
        if not self.c0 > 0.0:
            raise DomainError("mix weight c0 must be positive")

    def _eval(self, sigma):
        return (self.c0 * sigma + self.base._eval(sigma)) / (1.0 + self.c0)


def phi_eval(profile: ConcavityProfile, sigma: float) -> float:
    return profile(sigma)


def phi_iterate(profile: ConcavityProfile, sigma: float, n: int) -> float:
    """n-fold composition of the profile; n = 0 returns sigma unchanged."""
    if n < 0:
        raise DomainError("composition count must be >= 0")
    s = profile(sigma) if n else sigma  # validates the argument either way
    if n == 0:
        if not 0.0 <= sigma <= 1.0:
            raise DomainError(f"profile argument outside [0, 1]: {sigma}")
        return float(sigma)
    for _ in range(n - 1):
        s = profile._eval(s)
    return float(s)


def solve_tau(profile: ConcavityProfile, sigma0: float) -> float:
    """Root tau in (0, sigma0) of phi(tau) = tau/sigma0.

    Bisection on g(tau) = sigma0*phi(tau) - tau (same sign pattern as the
    decreasing ratio phi(tau)/tau - 1/sigma0 on (0,1]).  The lower bracket
    starts at sigma0/2 and halves until g turns positive; the halving loop
    itself brackets the root in [lo, 2*lo], which keeps the step budget
    bounded for tiny roots.
    """
    if not 0.0 < sigma0 < 1.0:
        raise DomainError("sigma0 must lie in (0, 1)")
    g = lambda t: sigma0 * profile._eval(t) - t
    lo = sigma0 / 2.0
    hi = 1.0
    if g(lo) <= 0.0:
        for _ in range(4000):
            hi = lo
            lo /= 2.0
            if lo == 0.0:
                raise SolverError("lower bracket for tau underflowed")
            if g(lo) > 0.0:
                break
        else:
            raise SolverError("no positive lower bracket for tau found")
    # g(hi) <= 0 on both paths: g(1) = sigma0 - 1 < 0, and the shrink loop
    # only reassigns hi to a point with g <= 0.
    for _ in range(MAX_BISECT_STEPS):
        if hi - lo <= 1e-15 * lo:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    if abs(sigma0 * profile._eval(tau) - tau) > TAU_RESIDUAL_TOL * sigma0:
        raise SolverError(
            f"tau solve missed its residual contract at sigma0={sigma0}"
        )
    if not 0.0 < tau < sigma0:
        raise SolverError(f"tau={tau} escaped (0, sigma0={sigma0})")
    return tau


def solve_delta(profile: ConcavityProfile, r0: float) -> float:
    """Root delta > r0 of delta*phi(1/delta) = r0, for r0 > 1.

    The map d -> d*phi(1/d) is increasing, so the root is bracketed by
    doubling from r0 and pinned by bisection.
    """
    if not r0 > 1.0:
        raise DomainError("r0 must exceed 1")
    h = lambda d: d * profile._eval(1.0 / d) - r0
    lo = r0
    hi = 2.0 * r0
    for _ in range(4000):
        if h(hi) >= 0.0:
            break
        lo = hi
        hi *= 2.0
        if not np.isfinite(hi):
            raise SolverError("upper bracket for delta overflowed")
    else:
        raise SolverError("no upper bracket for delta found")
    for _ in range(MAX_BISECT_STEPS):
        if hi - lo <= 1e-15 * lo:
            break
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    if abs(delta * profile._eval(1.0 / delta) - r0) > DELTA_RESIDUAL_TOL * r0:
        raise SolverError(f"delta solve missed its residual contract at r0={r0}")
    if not delta > r0:
        raise SolverError(f"delta={delta} did not exceed r0={r0}")
    return delta


def rate_k(profile: ConcavityProfile, sigma0: float) -> float:
    """Geometric rate (1 - phi(sigma0)) / (1 - sigma0) for decreasing runs."""
    if not 0.0 < sigma0 < 1.0:
        raise DomainError("sigma0 must lie in (0, 1)")
    return (1.0 - profile._eval(sigma0)) / (1.0 - sigma0)


def rate_k_increasing(profile: ConcavityProfile, r0: float) -> float:
    """Geometric rate (1 - phi(1/r0)) / (1 - 1/r0) for increasing runs."""
    if not r0 > 1.0:
        raise DomainError("r0 must exceed 1")
    s = 1.0 / r0
    return (1.0 - profile._eval(s)) / (1.0 - s)


def rate_k_general(profile: ConcavityProfile, r1: float, r2: float) -> float:
    """max of the two one-sided rate constants for a mixed bracket."""
    if not 0.0 < r1 < 1.0:
        raise DomainError("r1 must lie in (0, 1)")
    if not r2 > 1.0:
        raise DomainError("r2 must exceed 1")
    k_upper = rate_k_increasing(profile, r2)
    k_lower = rate_k(profile, r1)
    return max(k_upper, k_lower)


def validate_profile(profile: ConcavityProfile, samples: int = 10_000) -> None:
    """Sampling guard for profile properties; raises DomainError on failure.

    Checks endpoints, monotonicity, midpoint concavity, phi(s) >= s, and
    divergence of the right derivative at 0 (linear-like profiles are
    rejected).
    """
    s = np.linspace(0.0, 1.0, samples)
    v = profile._eval(s)
    if v[0] != 0.0:
        raise DomainError("profile must map 0 to 0 exactly")
    if v[-1] != 1.0:
        raise DomainError("profile must map 1 to 1 exactly")
    if np.any(np.diff(v) < -1e-15):
        raise DomainError("profile must be nondecreasing")
    mid = profile._eval(0.5 * (s[:-1] + s[1:]))
    if np.any(mid < 0.5 * (v[:-1] + v[1:]) - 1e-12):
        raise DomainError("profile must be concave")
    if np.any(v < s - 1e-12):
        raise DomainError("profile must dominate the identity on [0, 1]")
    h = 1e-10
    if profile._eval(np.asarray(h)) / h < 100.0:
        raise DomainError("profile derivative at 0+ must diverge")


# -- config naming -----------------------------------------------------------


def parse_profile(text: str) -> ConcavityProfile:
    """Parse 'power:<gamma>' or 'summix:<gamma>:<c0>'."""
    parts = text.split(":")
    if parts[0] == "power" and len(parts) == 2:
        return Power(float(parts[1]))
    if parts[0] == "summix" and len(parts) == 3:
        return SumMix(Power(float(parts[1])), float(parts[2]))
    raise DomainError(f"unknown profile spec: {text!r}")


def profile_name(profile: ConcavityProfile) -> str:
    if isinstance(profile, Power):
        return f"power:{profile.gamma!r}"
    if isinstance(profile, SumMix) and isinstance(profile.base, Power):
        return f"summix:{profile.base.gamma!r}:{profile.c0!r}"
    raise DomainError(f"profile {profile} has no config name")
