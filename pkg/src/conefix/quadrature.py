"""Kernel discretization: composite rules, Gaussian tail radii, difference
kernels on the half line, full-line blurs with analytic tail completion, and
the graded space-time rule for the heat kernel.

Conventions.  The Gaussian kernel of width parameter beta is
gauss_kernel(u, beta) = exp(-u^2/(4*beta)) / sqrt(4*pi*beta); its one-sided
tail mass beyond R is erfc(R/(2*sqrt(beta)))/2.  All rules carry an
AccuracyBudget (tail bound + rule-error estimate) that is reported next to
any residual computed with them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

from .cones import Axis, ConeVector, Grid
from .errors import ConstructionError, DomainError

DEFAULT_TAIL_TOL = 1e-13


def gauss_kernel(u, beta: float):
    u = np.asarray(u, dtype=float)
    return np.exp(-(u * u) / (4.0 * beta)) / math.sqrt(4.0 * math.pi * beta)


def gaussian_tail_radius(beta: float, tol: float) -> float:
    """Smallest R on the 0.5-step lattice with one-sided tail mass <= tol."""
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    if not 0.0 < tol < 1.0:
        raise DomainError("tol must lie in (0, 1)")
    k = 0
    while 0.5 * math.erfc(0.5 * k / (2.0 * math.sqrt(beta))) > tol:
        k += 1
        if k > 10_000:
            raise DomainError("tail radius search did not terminate")
    return 0.5 * k


@dataclass(frozen=True)
class AccuracyBudget:
    """Tail bound plus rule-error estimate, both reported, never silently mixed."""

    tail: float
    rule_error: float

    @property
    def total(self) -> float:
        return self.tail + self.rule_error

    def as_dict(self) -> dict:
        return {"tail": self.tail, "rule_error": self.rule_error, "total": self.total}


@dataclass(frozen=True)
class QuadratureRule:
    """Composite rule on one axis: Simpson when the panel count is even
    (odd node count), trapezoid fallback otherwise.  Weights are positive
    and sum to the axis length."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @staticmethod
    def for_axis(axis: Axis) -> "QuadratureRule":
        n = axis.node_count
        if n < 2:
            raise DomainError("quadrature needs at least 2 nodes")
        h = axis.spacing
        x = axis.nodes
        if n % 2 == 1:
            w = np.empty(n)
            w[0] = w[-1] = h / 3.0
            w[1:-1:2] = 4.0 * h / 3.0
            w[2:-1:2] = 2.0 * h / 3.0
            kind = "simpson"
        else:
            w = np.full(n, h)
            w[0] = w[-1] = h / 2.0
            kind = "trapezoid"
        w.setflags(write=False)
        x.setflags(write=False)
        return QuadratureRule(x, w, kind)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values)))


def simpson_error_estimate(beta: float, axis: Axis) -> float:
    """Standard h^4 bound for the Gaussian kernel: max |4th derivative| is
    attained at 0 and equals 12*a^2*gauss_kernel(0) with a = 1/(4*beta)."""
    a = 1.0 / (4.0 * beta)
    m4 = 12.0 * a * a / math.sqrt(4.0 * math.pi * beta)
    h = axis.spacing
    length = axis.upper - axis.lower
    return length * h**4 / 180.0 * m4


# -- difference kernel on the half line --------------------------------------


def difference_kernel_matrix(beta: float, axis: Axis) -> np.ndarray:
    """Matrix of (gauss(x_i - y_j) - gauss(x_i + y_j)) * w_j on [0, R].

    The difference is pointwise nonnegative for x, y >= 0 (the exponent is
    larger at |x - y| than at x + y), so the matrix has no negative entries.
    """
    if axis.lower != 0.0:
        raise DomainError("difference kernel requires a [0, R] axis")
    rule = QuadratureRule.for_axis(axis)
    x = rule.nodes[:, None]
    y = rule.nodes[None, :]
    kernel = gauss_kernel(x - y, beta) - gauss_kernel(x + y, beta)
    return kernel * rule.weights[None, :]


def apply_difference_kernel(beta: float, f: ConeVector, grid: Grid) -> ConeVector:
    """g(x) = integral over [0, R] of the difference kernel against f."""
    if not f.grid.compatible(grid):
        raise DomainError("vector grid does not match the requested grid")
    if grid.dim != 1:
        raise DomainError("difference kernel application is 1-d")
    mat = difference_kernel_matrix(beta, grid.axes[0])
    return ConeVector(grid, mat @ f.values)


# -- full-line Gaussian blur with analytic tails ------------------------------


@dataclass(frozen=True)
class LineBlur:
    """Full-line convolution against gauss_kernel(. , tau) restricted to a
    uniform axis, with constant continuation of the integrand beyond the
    truncation radius; the continuation mass is the closed-form erfc tail,
    so a constant input blurs to exactly 1 up to the rule error."""

    kernel: np.ndarray
    weights: np.ndarray
    tail_left: np.ndarray
    tail_right: np.ndarray

    def __call__(self, values: np.ndarray) -> np.ndarray:
        n = self.weights.size
        core = np.convolve(values * self.weights, self.kernel)[n - 1 : 2 * n - 1]
        return core + values[0] * self.tail_left + values[-1] * self.tail_right


def gaussian_line_blur(axis: Axis, tau: float) -> LineBlur:
    if not tau > 0.0:
        raise DomainError("blur width must be positive")
    rule = QuadratureRule.for_axis(axis)
    n = axis.node_count
    h = axis.spacing
    offsets = np.arange(-(n - 1), n) * h
    kernel = gauss_kernel(offsets, tau)
    x = rule.nodes
    root = 2.0 * math.sqrt(tau)
    tail_left = 0.5 * erfc((x - axis.lower) / root)
    tail_right = 0.5 * erfc((axis.upper - x) / root)
    return LineBlur(kernel, rule.weights, tail_left, tail_right)


# -- heat-kernel space-time rule ----------------------------------------------
#
# For output time t the s-integral over (0, t) uses panels graded toward
# s = t with ratio 2 (at least 8 of them).  Panels whose kernel width stays
# above the spatial resolution floor are integrated by Simpson in s with a
# numeric blur in y; panels below the floor, where the kernel is sharper
# than the y-grid can resolve, use the unit-mass collapse of the kernel and
# a midpoint rule in s.  The innermost panel is always collapsed.


@dataclass(frozen=True)
class HeatRule:
    """Space-time rule for one output time.  integrate() assumes the output
    nodes coincide with the integration nodes in y (shared spatial axis)."""

    t_value: float
    s_nodes: np.ndarray
    s_weights: np.ndarray
    taus: np.ndarray
    collapse_mids: np.ndarray
    collapse_widths: np.ndarray
    budget: AccuracyBudget

    @property
    def empty(self) -> bool:
        return self.s_nodes.size == 0 and self.collapse_mids.size == 0

    def integrate(self, integrand, blur) -> np.ndarray:
        """integrand(s) -> values on the spatial nodes; blur(values, tau)
        -> blurred values on the same nodes."""
        acc = None
        for s, w, tau in zip(self.s_nodes, self.s_weights, self.taus):
            term = w * blur(integrand(s), tau)
            acc = term if acc is None else acc + term
        for s_mid, width in zip(self.collapse_mids, self.collapse_widths):
            term = width * integrand(s_mid)
            acc = term if acc is None else acc + term
        return acc


def _tau_floor(x_axis: Axis) -> float:
    # Kernel std dev sqrt(2*tau) must stay >= 2*h for the composite rule to
    # resolve the spike; below that the unit-mass collapse takes over.
    return 4.0 * x_axis.spacing**2


def heat_rule(grid: Grid, t_index: int) -> HeatRule:
    """Rule for the t_index-th time node (1-based); t_index = 0 is the empty
    integral at t = 0."""
    if grid.dim != 2:
        raise DomainError("heat rule needs an (x, t) grid")
    if t_index < 0:
        raise DomainError("t_index must be >= 0")
    x_axis, t_axis = grid.axes
    empty = HeatRule(
        0.0,
        np.empty(0),
        np.empty(0),
        np.empty(0),
        np.empty(0),
        np.empty(0),
        AccuracyBudget(0.0, 0.0),
    )
    if t_index == 0:
        return empty
    t = float(t_axis.nodes[t_index - 1])
    floor = _tau_floor(x_axis)

    target = 1e-3
    m = max(8, math.ceil(math.log2(t / target))) if t > target else 8
    bounds = t * np.power(2.0, -np.arange(m + 1, dtype=float))

    s_nodes, s_weights, taus = [], [], []
    collapse_mids, collapse_widths = [], []
    for i in range(m):
        tau_hi, tau_lo = bounds[i], bounds[i + 1]
        width = tau_hi - tau_lo
        if tau_lo >= floor:
            for tau_node, w in (
                (tau_hi, width / 6.0),
                (0.5 * (tau_hi + tau_lo), 4.0 * width / 6.0),
                (tau_lo, width / 6.0),
            ):
                s_nodes.append(t - tau_node)
                s_weights.append(w)
                taus.append(tau_node)
        else:
            collapse_mids.append(t - 0.5 * (tau_hi + tau_lo))
            collapse_widths.append(width)
    # innermost panel [t - bounds[m], t], always collapsed
    collapse_mids.append(t - 0.5 * bounds[m])
    collapse_widths.append(bounds[m])

    collapse_top = min(floor, t)
    budget = AccuracyBudget(
        tail=0.5,  # worst-case boundary mass handled by constant continuation
        rule_error=0.5 * collapse_top**2 + simpson_error_estimate(max(floor, 1e-12), x_axis),
    )
    return HeatRule(
        t,
        np.array(s_nodes),
        np.array(s_weights),
        np.array(taus),
        np.array(collapse_mids),
        np.array(collapse_widths),
        budget,
    )


# -- equation residuals --------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    value: float
    budget: AccuracyBudget

    def as_dict(self) -> dict:
        return {"value": self.value, "budget": self.budget.as_dict()}


def _interior_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for axis_idx, ax in enumerate(grid.axes):
        if ax.node_count > 2:
            sl = [slice(None)] * grid.dim
            sl[axis_idx] = 0
            mask[tuple(sl)] = False
            sl[axis_idx] = -1
            mask[tuple(sl)] = False
    return mask.reshape(-1)


def residual(equation: str, solution, params: dict) -> ResidualReport:
    """sup-norm of (left side - right side) over interior nodes, both sides
    evaluated with the module's rules; reported with the rule budget."""
    if equation == "padic_half":
        op = params["operator"]
        psi = solution
        phi = np.power(psi.values, op.alpha)
        lhs = np.power(phi, op.p)
        rhs = op.linear_apply(phi)
        mask = _interior_mask(psi.grid)
        return ResidualReport(float(np.max(np.abs(lhs - rhs)[mask])), op.budget)
    if equation == "padic_full":
        op = params["operator"]
        ext = solution if solution is not None else params["extension"]
        lhs = np.power(ext.values, op.p)
        rhs = op.full_line_apply(ext.values)
        mask = _interior_mask(ext.grid)
        return ResidualReport(float(np.max(np.abs(lhs - rhs)[mask])), op.budget)
    if equation == "urysohn":
        op = params["operator"]
        f = solution
        rhs = op.apply(f)
        mask = _interior_mask(f.grid)
        value = float(np.max(np.abs(f.values - rhs.values)[mask]))
        return ResidualReport(value, op.budget)
    if equation == "heat_mild":
        op = params["operator"]
        u = solution
        v_vals = u.values - op.background.values
        v = ConeVector(u.grid, v_vals, order_tol=1e-6)
        rhs = op.background.values + op.apply(v).values
        mask = _interior_mask(u.grid)
        value = float(np.max(np.abs(u.values - rhs)[mask]))
        return ResidualReport(value, op.budget)
    raise DomainError(f"unknown equation tag: {equation!r}")
