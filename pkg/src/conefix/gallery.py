"""Concrete operators: the sequence-space truncation example, scalar power
oracles, the half-line difference-kernel convolution operator, a concrete
Urysohn instance, the heat mild-solution operator, and the two constructions
that witness non-uniqueness for non-concave operators.

The integral operators are discretized with the quadrature module's rules;
each carries an accuracy budget that is reported next to any residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf, erfc

from .cones import (
    Axis,
    ConeVector,
    ConicalSegment,
    Grid,
    ORDER_TOL,
    diff_norm,
    leq,
    scale,
    segment_contains,
    subtract,
    sup_norm,
    zeros,
)
from .engine import OperatorHandle, WHOLE_CONE, _power_chain, sample_segment
from .errors import ConstructionError, DomainError, PreconditionError
from .profiles import ConcavityProfile, Power
from .quadrature import (
    AccuracyBudget,
    QuadratureRule,
    gauss_kernel,
    gaussian_line_blur,
    gaussian_tail_radius,
    heat_rule,
    simpson_error_estimate,
)

SCALAR_GRID = Grid.scalar()


def scalar_vector(value: float) -> ConeVector:
    return ConeVector(SCALAR_GRID, [float(value)])


# -- sequence-space truncation operator ---------------------------------------


def make_linf_operator(n_coords: int) -> OperatorHandle:
    """Coordinatewise y_i = min(i^{1/4} * sqrt(x_i), 1) on the first
    n_coords coordinates (1-based index as the node coordinate).  Critical,
    monotone, discontinuous at zero, and strongly concave with the square
    root profile; the nontrivial fixed point is the all-ones vector."""
    if n_coords < 1:
        raise DomainError("need at least one coordinate")
    if n_coords == 1:
        grid = Grid((Axis(1.0, 1.0, 1),))
    else:
        grid = Grid.line(1.0, float(n_coords), n_coords)
    quarter = grid.axes[0].nodes ** 0.25

    def apply(x: ConeVector) -> ConeVector:
        return ConeVector(grid, np.minimum(quarter * np.sqrt(x.values), 1.0))

    return OperatorHandle("linf", apply, Power(0.5), WHOLE_CONE)


# -- scalar oracles ------------------------------------------------------------


def make_scalar_power(alpha: float) -> OperatorHandle:
    """x -> x**alpha on the 1-node grid; fixed points are 0 and 1 and the
    concavity inequality holds with equality."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")

    def apply(x: ConeVector) -> ConeVector:
        return ConeVector(x.grid, np.power(x.values, alpha))

    return OperatorHandle("scalar-power", apply, Power(alpha), WHOLE_CONE)


def make_capped_linear(factor: float = 0.5, cap: float = 1.0) -> OperatorHandle:
    """x -> factor * min(x, cap) componentwise: monotone, critical, and
    positively superhomogeneous, but with no concavity profile of its own.
    The standard companion for the sum driver."""
    if factor <= 0.0 or cap <= 0.0:
        raise DomainError("factor and cap must be positive")

    def apply(x: ConeVector) -> ConeVector:
        return ConeVector(x.grid, factor * np.minimum(x.values, cap))

    return OperatorHandle("capped-linear", apply, None, WHOLE_CONE)


def make_complement_operator(
    base: OperatorHandle, v0: ConeVector, n0: int, c: float
) -> OperatorHandle:
    """A0 u = x0 - c * A(x0 - u) on <0, x0> with x0 = A^{n0-1} v0.

    For c in [gamma0^{1-alpha}, 1] this family fills the two-sided envelope
    used by the complement driver, saturating each side at an endpoint."""
    if not 0.0 < c <= 1.0:
        raise DomainError("c must lie in (0, 1]")
    x0 = _power_chain(base, v0, n0 - 1)

    def apply(u: ConeVector) -> ConeVector:
        if not leq(u, x0, ORDER_TOL):
            raise DomainError("complement operator input must stay below x0")
        inner = base(subtract(x0, u))
        return ConeVector(u.grid, x0.values - c * inner.values)

    return OperatorHandle(f"complement(c={c})", apply, None, WHOLE_CONE)


# -- half-line difference-kernel operator --------------------------------------


@dataclass(frozen=True)
class PadicSpec:
    """Parameters of the half-line convolution power operator: dimension
    (1 or 2 axes), odd exponent p >= 3, kernel widths per axis.  The inner
    power is alpha = 1/p exactly."""

    n: int
    p: int
    betas: tuple[float, ...]

    def __post_init__(self):
        if self.n not in (1, 2):
            raise DomainError("dimension must be 1 or 2")
        if self.p < 3 or self.p % 2 == 0:
            raise DomainError("p must be an odd integer >= 3")
        if isinstance(self.betas, list):
            object.__setattr__(self, "betas", tuple(self.betas))
        if len(self.betas) != self.n:
            raise DomainError("need one kernel width per axis")
        if any(b <= 0 for b in self.betas):
            raise DomainError("kernel widths must be positive")

    @property
    def alpha(self) -> float:
        return 1.0 / self.p


class PadicOperator:
    """(A psi)(x) = integral over the positive orthant of the product of
    reflected-difference Gaussian kernels against psi**alpha.

    The kernel difference vanishes on the axes, is pointwise nonnegative,
    and scaling commutes exactly: A(sigma psi) = sigma**alpha A psi."""

    def __init__(
        self,
        spec: PadicSpec,
        grid: Grid,
        gamma: Optional[float] = None,
        tail_tol: float = 1e-13,
    ):
        if grid.dim != spec.n:
            raise DomainError("grid dimension does not match the spec")
        gamma = spec.alpha if gamma is None else gamma
        if not spec.alpha <= gamma < 1.0:
            raise DomainError("declared profile exponent must lie in [alpha, 1)")
        self.spec = spec
        self.grid = grid
        self.gamma = gamma
        self._mats = []
        tail_total, rule_total = 0.0, 0.0
        for ax, beta in zip(grid.axes, spec.betas):
            if ax.lower != 0.0:
                raise DomainError("half-line axes must start at 0")
            needed = gaussian_tail_radius(beta, tail_tol)
            if ax.upper < needed:
                raise ConstructionError(
                    f"axis reaches {ax.upper} but the kernel tail needs {needed}"
                )
            rule = QuadratureRule.for_axis(ax)
            est = simpson_error_estimate(beta, ax)
            mass = rule.integrate(gauss_kernel(rule.nodes, beta))
            exact = 0.5 * erf(ax.upper / (2.0 * math.sqrt(beta)))
            if abs(mass - exact) > max(1e-9, 100.0 * est):
                raise ConstructionError(
                    f"grid too coarse: half-line kernel mass off by {abs(mass - exact)}"
                )
            x = rule.nodes[:, None]
            y = rule.nodes[None, :]
            kernel = gauss_kernel(x - y, beta) - gauss_kernel(x + y, beta)
            self._mats.append(kernel * rule.weights[None, :])
            tail_total += tail_tol
            rule_total += est
        self.budget = AccuracyBudget(tail_total, rule_total)

    @property
    def alpha(self) -> float:
        return self.spec.alpha

    @property
    def p(self) -> int:
        return self.spec.p

    def linear_apply(self, values: np.ndarray) -> np.ndarray:
        """Difference-kernel integral of a plain grid function (flat array in,
        flat array out)."""
        if self.spec.n == 1:
            return self._mats[0] @ values
        field = values.reshape(self.grid.shape)
        return (self._mats[0] @ field @ self._mats[1].T).reshape(-1)

    def apply(self, psi: ConeVector) -> ConeVector:
        inner = np.power(np.maximum(psi.values, 0.0), self.spec.alpha)
        return ConeVector(self.grid, self.linear_apply(inner))

    @property
    def handle(self) -> OperatorHandle:
        return OperatorHandle("padic", self.apply, Power(self.gamma), WHOLE_CONE)

    # full-line machinery for the odd extension

    @property
    def mirrored_grid(self) -> Grid:
        axes = tuple(
            Axis(-ax.upper, ax.upper, 2 * ax.node_count - 1) for ax in self.grid.axes
        )
        return Grid(axes)

    def full_line_apply(self, values: np.ndarray) -> np.ndarray:
        """Plain (non-reflected) Gaussian convolution on the mirrored grid,
        axis by axis, with zero continuation beyond the truncation radius."""
        mgrid = self.mirrored_grid
        field = np.asarray(values, dtype=float).reshape(mgrid.shape)
        for axis_idx, (ax, beta) in enumerate(zip(mgrid.axes, self.spec.betas)):
            rule = QuadratureRule.for_axis(ax)
            n = ax.node_count
            kernel = gauss_kernel(np.arange(-(n - 1), n) * ax.spacing, beta)
            moved = np.moveaxis(field, axis_idx, 0)
            out = np.empty_like(moved)
            weighted = moved * rule.weights[:, None] if moved.ndim == 2 else moved * rule.weights
            if moved.ndim == 1:
                out = np.convolve(weighted, kernel)[n - 1 : 2 * n - 1]
            else:
                for col in range(moved.shape[1]):
                    out[:, col] = np.convolve(weighted[:, col], kernel)[n - 1 : 2 * n - 1]
            field = np.moveaxis(out, 0, axis_idx)
        return field.reshape(-1)


def make_padic_operator(
    spec: PadicSpec, grid: Grid, gamma: Optional[float] = None
) -> PadicOperator:
    return PadicOperator(spec, grid, gamma=gamma)


def padic_sigma0_theoretical(spec: PadicSpec, eps: float, grid: Grid) -> float:
    """Analytic lower bound for the second-to-first ratio of the operator
    chain started from the constant one: eps**(alpha*n) times the product of
    per-axis minima of Q(x) = eps*(1 - e^{-s x}) / erf(x/(2 sqrt(beta))),
    where s solves the exponential-moment equation
    integral of gauss_kernel * e^{-s u} over the half line = eps/2
    by bisection on a fine independent rule."""
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    if grid.dim != spec.n:
        raise DomainError("grid dimension does not match the spec")
    product = 1.0
    for ax, beta in zip(grid.axes, spec.betas):
        s_j = _solve_exponential_moment(beta, eps)
        x = ax.nodes
        q = np.empty_like(x)
        positive = x > 0.0
        root = 2.0 * math.sqrt(beta)
        q[positive] = eps * (1.0 - np.exp(-s_j * x[positive])) / erf(x[positive] / root)
        q[~positive] = eps * s_j * math.sqrt(math.pi * beta)
        sigma_tilde = float(q.min())
        if not 0.0 < sigma_tilde < 1.0:
            raise ConstructionError(f"per-axis bound {sigma_tilde} escaped (0, 1)")
        product *= sigma_tilde
    return eps ** (spec.alpha * spec.n) * product


def _solve_exponential_moment(beta: float, eps: float) -> float:
    """s >= 0 with quadrature(integral of gauss_kernel(u)*e^{-s u}) = eps/2.

    The left side decreases from 1/2 at s = 0; the independent closed form
    (1/2) e^{beta s^2} erfc(s sqrt(beta)) is used as a test oracle only.
    """
    radius = gaussian_tail_radius(beta, 1e-14)
    axis = Axis(0.0, radius, 4001)
    rule = QuadratureRule.for_axis(axis)
    kernel = gauss_kernel(rule.nodes, beta)

    def lhs(s: float) -> float:
        return rule.integrate(kernel * np.exp(-s * rule.nodes))

    target = eps / 2.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if lhs(hi) < target:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ConstructionError("no bracket for the exponential-moment solve")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lhs(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(hi, 1.0):
            break
    s = 0.5 * (lo + hi)
    if abs(lhs(s) - target) > 1e-12:
        raise ConstructionError("exponential-moment solve missed its residual")
    return s


@dataclass(frozen=True)
class OddExtension:
    """Sign-changing full-line function obtained by odd reflection across
    every axis; values at the reflection planes are exactly zero.  The
    full-line equation residual is computed at construction."""

    grid: Grid
    values: np.ndarray
    residual: "object"


def _mirror_odd(field: np.ndarray, axis: int) -> np.ndarray:
    n = field.shape[axis]
    head = -np.flip(np.take(field, range(1, n), axis=axis), axis=axis)
    out = np.concatenate([head, field], axis=axis)
    index = [slice(None)] * out.ndim
    index[axis] = n - 1
    out[tuple(index)] = 0.0
    return out


def padic_extend_odd(phi_half: ConeVector, op: PadicOperator) -> OddExtension:
    """Odd reflection of the half-domain solution profile onto the full
    domain, with the full-line equation residual attached."""
    from .quadrature import residual as eq_residual

    if not phi_half.grid.compatible(op.grid):
        raise DomainError("profile grid does not match the operator grid")
    field = phi_half.values.reshape(op.grid.shape)
    for axis_idx in range(op.grid.dim):
        field = _mirror_odd(field, axis_idx)
    ext = OddExtension(op.mirrored_grid, field.reshape(-1), None)
    rep = eq_residual("padic_full", None, {"operator": op, "extension": ext})
    return OddExtension(op.mirrored_grid, ext.values, rep)


# -- Urysohn instance -----------------------------------------------------------


@dataclass(frozen=True)
class UrysohnSpec:
    """Kernel U(x, t, z) = amplitude(x) * base_kernel(x - t) * eta^{1-alpha} z^alpha
    with amplitude(x) = 1 - 1/(2 (1 + x^2)) and base_kernel the unit-mass
    Gaussian e^{-u^2}/sqrt(pi).  The amplitude dips to 1/2 at the origin and
    tends to 1 at infinity, so the certified first-step ratio is 1/2."""

    eta: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.eta <= 0.0:
            raise DomainError("eta must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")

    @staticmethod
    def amplitude(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - 1.0 / (2.0 * (1.0 + x * x))

    amplitude_limit = 1.0
    kernel_beta = 0.25  # e^{-u^2}/sqrt(pi) == gauss_kernel(u, 1/4)


class UrysohnOperator:
    """(A f)(x) = amplitude(x) * eta^{1-alpha} * full-line Gaussian average
    of f^alpha, truncated with constant continuation and closed-form tails."""

    def __init__(self, spec: UrysohnSpec, grid: Grid, tail_tol: float = 1e-12):
        if grid.dim != 1:
            raise DomainError("the kernel instance is one-dimensional")
        ax = grid.axes[0]
        if ax.lower != -ax.upper:
            raise DomainError("need a symmetric axis [-R, R]")
        needed = gaussian_tail_radius(spec.kernel_beta, tail_tol)
        if ax.upper < needed:
            raise ConstructionError(
                f"axis reaches {ax.upper} but the kernel tail needs {needed}"
            )
        self.spec = spec
        self.grid = grid
        rule = QuadratureRule.for_axis(ax)
        x = rule.nodes
        amp = spec.amplitude(x)
        pre = spec.eta ** (1.0 - spec.alpha)
        kernel = gauss_kernel(x[:, None] - x[None, :], spec.kernel_beta)
        self._matrix = pre * amp[:, None] * kernel * rule.weights[None, :]
        root = 2.0 * math.sqrt(spec.kernel_beta)
        self._tail_left = pre * amp * 0.5 * erfc((x - ax.lower) / root)
        self._tail_right = pre * amp * 0.5 * erfc((ax.upper - x) / root)
        est = simpson_error_estimate(spec.kernel_beta, ax)
        self.budget = AccuracyBudget(tail_tol, est)

        # kernel-mass sanity: the normalized Gaussian with completed tails
        # must integrate to 1 at every output node
        mass = (
            kernel @ rule.weights
            + 0.5 * erfc((x - ax.lower) / root)
            + 0.5 * erfc((ax.upper - x) / root)
        )
        if np.max(np.abs(mass - 1.0)) > max(1e-6, 100.0 * est):
            raise ConstructionError(
                f"kernel mass deviates from 1 by {np.max(np.abs(mass - 1.0))}"
            )
        # the sup of the first-step integral is eta (attained in the
        # amplitude limit); on the grid it must stay below eta + budget
        first = self.apply(ConeVector(grid, np.full(grid.size, spec.eta)))
        if float(first.values.max()) > spec.eta + max(1e-6, 100.0 * est):
            raise ConstructionError("first-step integral exceeds its analytic sup")
        if abs(spec.amplitude_limit * spec.eta - spec.eta) > 1e-12:
            raise ConstructionError("amplitude limit does not reproduce eta")

    def apply(self, f: ConeVector) -> ConeVector:
        powered = np.power(np.maximum(f.values, 0.0), self.spec.alpha)
        vals = (
            self._matrix @ powered
            + self._tail_left * powered[0]
            + self._tail_right * powered[-1]
        )
        return ConeVector(self.grid, vals)

    @property
    def handle(self) -> OperatorHandle:
        return OperatorHandle("urysohn", self.apply, Power(self.spec.alpha), WHOLE_CONE)


def make_urysohn_operator(spec: UrysohnSpec, grid: Grid) -> UrysohnOperator:
    return UrysohnOperator(spec, grid)


# -- heat mild-solution operator -------------------------------------------------


@dataclass(frozen=True)
class HeatSpec:
    """Concrete data for the mild-solution operator in one space dimension.

    Initial datum 1 + e^{-x^2} (infimum 1, supremum 2), forcing amplitude
    e^{-t} (2 + sin x)/3 squeezed between e^{-t}/3 and e^{-t}, square-root
    nonlinearity, and a constant comparison start xi.  The envelope ratio
    of the two squeezing amplitudes is exactly 1/3, which makes the
    certified bracket available in closed form."""

    xi: float = 1.0

    c0 = 1.0
    beta0 = 2.0
    delta0 = 1.0 / 3.0
    lambda2_l1 = 1.0

    @staticmethod
    def u0(x):
        x = np.asarray(x, dtype=float)
        return 1.0 + np.exp(-x * x)

    @staticmethod
    def lam(x, t):
        x = np.asarray(x, dtype=float)
        return math.exp(-t) * (2.0 + np.sin(x)) / 3.0

    @staticmethod
    def lam1(t):
        return math.exp(-t) / 3.0

    @staticmethod
    def lam2(t):
        return math.exp(-t)

    @staticmethod
    def nonlinearity(u):
        return np.sqrt(u)

    @property
    def profile(self) -> ConcavityProfile:
        return Power(0.5)

    @property
    def r1(self) -> float:
        return self.delta0 * math.sqrt(self.c0) / math.sqrt(self.xi + self.beta0)

    @property
    def r2(self) -> float:
        grown = math.sqrt(
            math.sqrt(self.xi + self.beta0) * self.lambda2_l1 + self.beta0
        )
        return (1.0 / self.delta0) * max(1.0, grown / math.sqrt(self.xi + self.c0))


class HeatOperator:
    """(A v)(x, t) = integral over (0, t) x R of the heat kernel against
    lam * G(v + g), with g the heat evolution of the initial datum.

    Space-time rules are precomputed per output time; the kernel blur at
    each graded node reuses the full-line blur with analytic tails, so the
    kernel keeps unit mass at every node and the discrete operator is
    exactly monotone and strongly concave with the square-root profile."""

    def __init__(self, spec: HeatSpec, grid: Grid):
        if grid.dim != 2:
            raise DomainError("need an (x, t) grid")
        x_axis, t_axis = grid.axes
        if t_axis.lower <= 0.0:
            raise DomainError("time axis must start after 0")
        if 4.0 * x_axis.spacing**2 > t_axis.upper / 4.0:
            raise ConstructionError(
                "spatial grid too coarse: kernel resolution floor swallows the time axis"
            )
        self.spec = spec
        self.grid = grid
        self._x = x_axis.nodes
        self._times = t_axis.nodes
        self._nx = x_axis.node_count
        self._nt = t_axis.node_count

        self._rules = [heat_rule(grid, k) for k in range(1, self._nt + 1)]
        self._blurs: dict[float, object] = {}
        for rule in self._rules:
            for tau in rule.taus:
                key = float(tau)
                if key > 0.0 and key not in self._blurs:
                    self._blurs[key] = gaussian_line_blur(x_axis, key)

        u0_vals = spec.u0(self._x)
        self._g_cache: dict[float, np.ndarray] = {}
        needed = set()
        for rule in self._rules:
            needed.update(float(s) for s in rule.s_nodes)
            needed.update(float(s) for s in rule.collapse_mids)
        needed.update(float(t) for t in self._times)
        for s in sorted(needed):
            if s <= 0.0:
                self._g_cache[s] = u0_vals.copy()
            else:
                self._g_cache[s] = gaussian_line_blur(x_axis, s)(u0_vals)

        # time interpolation table: v is known at the grid times and is 0 at
        # t = 0; every rule node interpolates linearly between those
        self._interp: dict[float, tuple[int, float]] = {}
        knots = np.concatenate([[0.0], self._times])
        for s in sorted(needed):
            j = int(np.searchsorted(knots, s, side="right") - 1)
            j = min(j, knots.size - 2)
            w = (s - knots[j]) / (knots[j + 1] - knots[j])
            self._interp[s] = (j, float(w))

        worst = self._rules[-1].budget
        self.budget = AccuracyBudget(worst.tail, worst.rule_error)
        self.background = ConeVector(
            grid,
            np.column_stack([self._g_cache[float(t)] for t in self._times]).reshape(
                self._nx, self._nt
            ),
        )

    def _v_at(self, field: np.ndarray, s: float) -> np.ndarray:
        j, w = self._interp[s]
        if j == 0:
            return w * field[:, 0]
        return (1.0 - w) * field[:, j - 1] + w * field[:, j]

    def apply(self, v: ConeVector) -> ConeVector:
        field = v.values.reshape(self._nx, self._nt)
        spec = self.spec
        out = np.empty((self._nx, self._nt))
        for k, rule in enumerate(self._rules):

            def integrand(s: float) -> np.ndarray:
                vs = self._v_at(field, float(s))
                return spec.lam(self._x, float(s)) * spec.nonlinearity(
                    np.maximum(vs, 0.0) + self._g_cache[float(s)]
                )

            out[:, k] = rule.integrate(
                integrand, lambda F, tau: self._blurs[float(tau)](F)
            )
        return ConeVector(self.grid, out.reshape(-1))

    @property
    def handle(self) -> OperatorHandle:
        return OperatorHandle("heat", self.apply, self.spec.profile, WHOLE_CONE)


def make_heat_operator(spec: HeatSpec, grid: Grid) -> tuple[OperatorHandle, ConeVector]:
    """Operator handle plus the background field g evaluated on the grid."""
    op = HeatOperator(spec, grid)
    return op.handle, op.background


def make_heat_instance(spec: HeatSpec, grid: Grid) -> HeatOperator:
    return HeatOperator(spec, grid)


def heat_background_exact(spec: HeatSpec, grid: Grid) -> ConeVector:
    """Closed form of the heat evolution of 1 + e^{-x^2}; test oracle for the
    numeric background."""
    x_axis, t_axis = grid.axes
    x = x_axis.nodes[:, None]
    t = t_axis.nodes[None, :]
    vals = 1.0 + np.exp(-x * x / (1.0 + 4.0 * t)) / np.sqrt(1.0 + 4.0 * t)
    return ConeVector(grid, vals.reshape(-1))


# -- non-concave constructions with continuum fixed-point sets -------------------


def make_tilde_operator(
    base: OperatorHandle,
    x_star: ConeVector,
    fixed_tol: float = 1e-8,
    n_samples: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> OperatorHandle:
    """x + A(pull(x)) - pull(x), where pull moves x toward x_star by the
    norm of x_star; every point of the local section (the ball of radius
    ||x_star|| around x_star intersected with the cone) is fixed.  The
    construction deliberately carries no concavity profile."""
    rng = rng or np.random.default_rng(0)
    if diff_norm(base(x_star), x_star) > fixed_tol:
        raise PreconditionError("x_star is not fixed for the base operator")
    norm_star = sup_norm(x_star)
    if norm_star == 0.0:
        raise DomainError("x_star must be nonzero")
    probe_seg = ConicalSegment(zeros(x_star.grid), scale(2.0, x_star))
    for u in sample_segment(probe_seg, n_samples, rng):
        t = float(rng.uniform())
        if np.any(base(scale(t, u)).values < t * base(u).values - base.order_tol):
            raise PreconditionError("sampled bound fails: A(t u) >= t A u")

    def pull(x: ConeVector) -> ConeVector:
        d = diff_norm(x, x_star)
        if d <= norm_star:
            return x_star
        lam = norm_star / d
        return ConeVector(x.grid, x.values + lam * (x_star.values - x.values))

    def apply(x: ConeVector) -> ConeVector:
        p = pull(x)
        return ConeVector(x.grid, x.values + base(p).values - p.values)

    return OperatorHandle(f"tilde({base.name})", apply, None, WHOLE_CONE)


def make_hat_operator(
    base: OperatorHandle,
    x_star: ConeVector,
    lam: float,
    fixed_tol: float = 1e-8,
) -> OperatorHandle:
    """A(P(x) + x) - P(x) on <0, x_star>, where P reflects x toward x_star
    once x is far enough from it; every point of distance more than
    lam * ||x_star|| from x_star is fixed.  No concavity profile."""
    if not 0.0 < lam < 1.0:
        raise DomainError("lam must lie in (0, 1)")
    if diff_norm(base(x_star), x_star) > fixed_tol:
        raise PreconditionError("x_star is not fixed for the base operator")
    norm_star = sup_norm(x_star)
    if norm_star == 0.0:
        raise DomainError("x_star must be nonzero")
    domain = ConicalSegment(zeros(x_star.grid), x_star)

    def apply(x: ConeVector) -> ConeVector:
        if not segment_contains(domain, x, ORDER_TOL):
            raise DomainError("hat operator input must lie in <0, x_star>")
        d = diff_norm(x, x_star)
        if d > lam * norm_star:
            p_vals = x_star.values - x.values
        else:
            p_vals = (d / (lam * norm_star)) * (x_star.values - x.values)
        shifted = ConeVector(x.grid, p_vals + x.values)
        return ConeVector(x.grid, base(shifted).values - p_vals)

    return OperatorHandle(f"hat({base.name})", apply, None, domain)
