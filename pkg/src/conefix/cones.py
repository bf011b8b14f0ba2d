"""Grid-backed nonnegative vectors, the componentwise partial order, and
conical segments.

All types are immutable after construction and safe to share across threads.
Reductions (norms, mins, maxes) go through numpy's fixed serial evaluation
order, so identical inputs reproduce bit-identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridCompatibilityError

# Default undershoot allowance for cone membership.  Quadrature introduces
# signed noise near zero, so membership permits values down to -ORDER_TOL.
ORDER_TOL = 1e-10


@dataclass(frozen=True)
class Axis:
    """One uniform axis: node_count nodes from lower to upper inclusive.

    A single-node axis (used for scalar cones and index sets) must have
    upper == lower and has spacing 0.
    """

    lower: float
    upper: float
    node_count: int

    def __post_init__(self):
        if self.node_count < 1:
            raise DomainError("axis node_count must be >= 1")
        if self.node_count == 1:
            if self.upper != self.lower:
                raise DomainError("a 1-node axis requires upper == lower")
        elif not self.upper > self.lower:
            raise DomainError("axis upper bound must exceed lower bound")

    @property
    def spacing(self) -> float:
        if self.node_count == 1:
            return 0.0
        return (self.upper - self.lower) / (self.node_count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.node_count)


@dataclass(frozen=True)
class Grid:
    """Cartesian product of 1 or 2 uniform axes; values stored row-major."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        if isinstance(self.axes, list):
            object.__setattr__(self, "axes", tuple(self.axes))
        if len(self.axes) not in (1, 2):
            raise DomainError("grids are 1- or 2-dimensional")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.node_count for ax in self.axes)

    @property
    def size(self) -> int:
        n = 1
        for ax in self.axes:
            n *= ax.node_count
        return n

    def compatible(self, other: "Grid") -> bool:
        return self.axes == other.axes

    @staticmethod
    def line(lower: float, upper: float, node_count: int) -> "Grid":
        return Grid((Axis(lower, upper, node_count),))

    @staticmethod
    def scalar() -> "Grid":
        return Grid((Axis(0.0, 0.0, 1),))


class ConeVector:
    """Nonnegative grid function; the discrete stand-in for a cone element.

    Values are stored exactly as given (no clamping); construction rejects
    any component below -order_tol.  The backing array is read-only.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values, order_tol: float = ORDER_TOL):
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size != grid.size:
            raise DomainError(
                f"value count {arr.size} does not match grid size {grid.size}"
            )
        if arr.size and float(arr.min()) < -order_tol:
            raise DomainError(
                f"vector leaves the cone: min value {arr.min()} < -{order_tol}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ConeVector is immutable")

    def with_values(self, values, order_tol: float = ORDER_TOL) -> "ConeVector":
        """Same grid, new values."""
        return ConeVector(self.grid, values, order_tol=order_tol)

    @property
    def field(self) -> np.ndarray:
        """Values reshaped to the grid shape (row-major)."""
        return self.values.reshape(self.grid.shape)

    def __repr__(self):
        return f"ConeVector(grid={self.grid.shape}, sup={sup_norm(self):.6g})"


def zeros(grid: Grid) -> ConeVector:
    return ConeVector(grid, np.zeros(grid.size))


def full(grid: Grid, value: float) -> ConeVector:
    return ConeVector(grid, np.full(grid.size, float(value)))


def ones(grid: Grid) -> ConeVector:
    return full(grid, 1.0)


def _require_compatible(a: ConeVector, b: ConeVector):
    if not a.grid.compatible(b.grid):
        raise GridCompatibilityError(
            f"incompatible grids: {a.grid.axes} vs {b.grid.axes}"
        )


def leq(a: ConeVector, b: ConeVector, tol: float = 0.0) -> bool:
    """Componentwise order: a_i <= b_i + tol at every node."""
    _require_compatible(a, b)
    if tol < 0:
        raise DomainError("order tolerance must be >= 0")
    return bool(np.all(a.values <= b.values + tol))


def sup_norm(a: ConeVector) -> float:
    """Max-abs norm.  Monotone on the cone, so the normality constant is 1."""
    if a.values.size == 0:
        return 0.0
    return float(np.max(np.abs(a.values)))


def diff_norm(a: ConeVector, b: ConeVector) -> float:
    """sup-norm of a - b without building an intermediate vector."""
    _require_compatible(a, b)
    return float(np.max(np.abs(a.values - b.values))) if a.values.size else 0.0


@dataclass(frozen=True)
class ConicalSegment:
    """All x with lo <= x <= hi; the order is checked at construction."""

    lo: ConeVector
    hi: ConeVector

    def __post_init__(self):
        if not leq(self.lo, self.hi, ORDER_TOL):
            raise DomainError("segment endpoints are not ordered: lo <= hi fails")


def segment_contains(seg: ConicalSegment, x: ConeVector, tol: float = ORDER_TOL) -> bool:
    return leq(seg.lo, x, tol) and leq(x, seg.hi, tol)


def axpy(alpha: float, x: ConeVector, y: ConeVector, order_tol: float = ORDER_TOL) -> ConeVector:
    """alpha*x + y componentwise, IEEE round-to-nearest, no normalization."""
    _require_compatible(x, y)
    return ConeVector(x.grid, alpha * x.values + y.values, order_tol=order_tol)


def scale(alpha: float, x: ConeVector, order_tol: float = ORDER_TOL) -> ConeVector:
    return ConeVector(x.grid, alpha * x.values, order_tol=order_tol)


def add(x: ConeVector, y: ConeVector, order_tol: float = ORDER_TOL) -> ConeVector:
    _require_compatible(x, y)
    return ConeVector(x.grid, x.values + y.values, order_tol=order_tol)


def subtract(x: ConeVector, y: ConeVector, order_tol: float = ORDER_TOL) -> ConeVector:
    """x - y; the result must still lie in the cone (within order_tol)."""
    _require_compatible(x, y)
    return ConeVector(x.grid, x.values - y.values, order_tol=order_tol)


# -- CSV serialization -------------------------------------------------------
#
# Header line:  # grid: dim=<d> axis0=<lo>:<hi>:<n> [axis1=...]
# then one value per line in node order.  repr() gives shortest decimal that
# round-trips, so save/load is bit-exact.


def _format_header(grid: Grid) -> str:
    parts = [f"# grid: dim={grid.dim}"]
    for i, ax in enumerate(grid.axes):
        parts.append(f"axis{i}={ax.lower!r}:{ax.upper!r}:{ax.node_count}")
    return " ".join(parts)


def _parse_header(line: str) -> Grid:
    tokens = line.lstrip("#").split()
    if not tokens or tokens[0] != "grid:":
        raise DomainError(f"malformed grid header: {line!r}")
    fields = dict(tok.split("=", 1) for tok in tokens[1:])
    dim = int(fields["dim"])
    axes = []
    for i in range(dim):
        lo, hi, n = fields[f"axis{i}"].split(":")
        axes.append(Axis(float(lo), float(hi), int(n)))
    return Grid(tuple(axes))


def save_grid_csv(grid: Grid, values: np.ndarray, path) -> None:
    """Write any grid function (signed values allowed) in the CSV format."""
    lines = [_format_header(grid)]
    lines.extend(repr(float(v)) for v in np.asarray(values).reshape(-1))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid_csv(path) -> tuple[Grid, np.ndarray]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    grid = _parse_header(lines[0])
    values = np.array([float(ln) for ln in lines[1:]])
    if values.size != grid.size:
        raise DomainError("CSV value count does not match grid header")
    return grid, values


def save_csv(vec: ConeVector, path) -> None:
    save_grid_csv(vec.grid, vec.values, path)


def load_csv(path, order_tol: float = ORDER_TOL) -> ConeVector:
    grid, values = load_grid_csv(path)
    return ConeVector(grid, values, order_tol=order_tol)
