"""Order, norm, segment, and serialization behavior of the cone primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conefix import (
    Axis,
    ConeVector,
    ConicalSegment,
    Grid,
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
from conefix.cones import load_grid_csv, save_grid_csv
from conefix.errors import DomainError, GridCompatibilityError

GRID3 = Grid.line(0.0, 2.0, 3)


def v3(*values):
    return ConeVector(GRID3, list(values), order_tol=np.inf)


# -- construction -------------------------------------------------------------


def test_axis_spacing_and_nodes():
    ax = Axis(0.0, 12.0, 1601)
    assert ax.spacing == pytest.approx(12.0 / 1600)
    nodes = ax.nodes
    assert nodes[0] == 0.0 and nodes[-1] == 12.0
    assert np.all(np.diff(nodes) > 0)


def test_single_node_axis_needs_equal_bounds():
    assert Axis(1.0, 1.0, 1).spacing == 0.0
    with pytest.raises(DomainError):
        Axis(0.0, 1.0, 1)


def test_axis_rejects_bad_bounds():
    with pytest.raises(DomainError):
        Axis(1.0, 0.0, 5)
    with pytest.raises(DomainError):
        Axis(0.0, 1.0, 0)


def test_grid_dim_limits():
    with pytest.raises(DomainError):
        Grid((Axis(0, 1, 2), Axis(0, 1, 2), Axis(0, 1, 2)))


def test_vector_rejects_wrong_length():
    with pytest.raises(DomainError):
        ConeVector(GRID3, [1.0, 2.0])


def test_vector_rejects_negative_beyond_tol():
    with pytest.raises(DomainError):
        ConeVector(GRID3, [0.0, -1e-6, 0.0])
    ConeVector(GRID3, [0.0, -1e-12, 0.0])  # inside the allowance


def test_vector_stores_exact_values_and_is_readonly():
    v = ConeVector(GRID3, [0.1, 0.2, 0.3])
    assert v.values[1] == 0.2
    with pytest.raises(ValueError):
        v.values[0] = 5.0
    with pytest.raises(AttributeError):
        v.values = np.zeros(3)


# -- order and norm ------------------------------------------------------------


def test_leq_examples():
    assert leq(zeros(GRID3), zeros(GRID3), 0.0)
    assert leq(ones(GRID3), full(GRID3, 2.0), 0.0)


def test_leq_tolerance_boundary():
    a = ConeVector(Grid.line(0.0, 1.0, 2), [1.0, 1.0 + 5e-13])
    b = ones(Grid.line(0.0, 1.0, 2))
    assert leq(a, b, 1e-12)
    assert not leq(a, b, 1e-14)


def test_leq_incompatible_grids():
    with pytest.raises(GridCompatibilityError):
        leq(ones(GRID3), ones(Grid.line(0.0, 2.0, 4)))


def test_leq_rejects_negative_tol():
    with pytest.raises(DomainError):
        leq(zeros(GRID3), zeros(GRID3), -1.0)


def test_sup_norm_examples():
    assert sup_norm(zeros(GRID3)) == 0.0
    assert sup_norm(ones(GRID3)) == 1.0
    two = ConeVector(Grid.line(0.0, 1.0, 2), [-3.0, 2.0], order_tol=np.inf)
    assert sup_norm(two) == 3.0


@given(st.lists(st.floats(0.0, 1e6), min_size=3, max_size=3))
def test_order_reflexive(values):
    v = v3(*values)
    assert leq(v, v, 0.0)


@given(
    st.lists(st.floats(0.0, 1e6), min_size=3, max_size=3),
    st.lists(st.floats(0.0, 1e6), min_size=3, max_size=3),
)
def test_order_antisymmetric(a_vals, b_vals):
    a, b = v3(*a_vals), v3(*b_vals)
    if leq(a, b, 0.0) and leq(b, a, 0.0):
        assert np.array_equal(a.values, b.values)


@given(
    st.lists(st.floats(0.0, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(0.0, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(0.0, 1e3), min_size=3, max_size=3),
)
def test_order_transitive(a_vals, b_vals, c_vals):
    a, b, c = v3(*a_vals), v3(*b_vals), v3(*c_vals)
    if leq(a, b, 0.0) and leq(b, c, 0.0):
        assert leq(a, c, 0.0)


@given(
    st.lists(st.floats(0.0, 1e6), min_size=3, max_size=3),
    st.lists(st.floats(0.0, 1e6), min_size=3, max_size=3),
)
def test_norm_monotone_on_cone(a_vals, b_vals):
    a, b = v3(*a_vals), v3(*b_vals)
    if leq(zeros(GRID3), a, 0.0) and leq(a, b, 0.0):
        assert sup_norm(a) <= sup_norm(b)


# -- arithmetic ------------------------------------------------------------------


def test_axpy_identity_cases():
    x, y = v3(1.0, 2.0, 3.0), v3(4.0, 5.0, 6.0)
    assert np.array_equal(axpy(0.0, x, y).values, y.values)
    assert np.array_equal(axpy(1.0, ones(GRID3), ones(GRID3)).values, [2.0, 2.0, 2.0])
    assert np.array_equal(axpy(-1.0, x, x).values, [0.0, 0.0, 0.0])


@given(
    st.floats(-10, 10),
    st.lists(st.floats(0, 100), min_size=3, max_size=3),
    st.lists(st.floats(0, 100), min_size=3, max_size=3),
)
def test_axpy_componentwise_ieee(alpha, x_vals, y_vals):
    x, y = v3(*x_vals), v3(*y_vals)
    out = axpy(alpha, x, y, order_tol=np.inf)
    assert np.array_equal(out.values, alpha * x.values + y.values)


def test_scale_add_subtract():
    x = v3(2.0, 4.0, 6.0)
    assert np.array_equal(scale(0.5, x).values, [1.0, 2.0, 3.0])
    assert np.array_equal(add(x, x).values, [4.0, 8.0, 12.0])
    assert np.array_equal(subtract(x, scale(0.5, x)).values, [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        subtract(zeros(GRID3), ones(GRID3))  # leaves the cone


# -- segments -----------------------------------------------------------------------


def test_segment_requires_order():
    with pytest.raises(DomainError):
        ConicalSegment(ones(GRID3), zeros(GRID3))


def test_segment_contains_examples():
    seg = ConicalSegment(zeros(GRID3), ones(GRID3))
    assert segment_contains(seg, full(GRID3, 0.5))
    assert not segment_contains(seg, full(GRID3, 1.5), 1e-12)


def test_two_dim_grid_row_major():
    grid = Grid((Axis(0.0, 1.0, 2), Axis(0.0, 2.0, 3)))
    v = ConeVector(grid, np.arange(6.0))
    assert v.field.shape == (2, 3)
    assert v.field[1, 0] == 3.0


# -- serialization -------------------------------------------------------------------


def test_csv_round_trip_bit_exact(tmp_path, rng):
    grid = Grid((Axis(-8.0, 8.0, 7), Axis(0.25, 4.0, 3)))
    values = rng.uniform(0.0, 1.0, grid.size) * np.pi
    v = ConeVector(grid, values)
    path = tmp_path / "vec.csv"
    save_csv(v, path)
    back = load_csv(path)
    assert back.grid == grid
    assert np.array_equal(back.values, v.values)


def test_csv_header_format(tmp_path):
    v = ones(Grid.line(0.0, 12.0, 3))
    path = tmp_path / "vec.csv"
    save_csv(v, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("# grid: dim=1 axis0=0.0:12.0:3")


@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False), min_size=1, max_size=8))
@settings(max_examples=50)
def test_signed_grid_csv_round_trip(tmp_path_factory, values):
    grid = Grid.line(0.0, 1.0, len(values)) if len(values) > 1 else Grid.scalar()
    path = tmp_path_factory.mktemp("csv") / "raw.csv"
    save_grid_csv(grid, np.array(values), path)
    back_grid, back_values = load_grid_csv(path)
    assert back_grid == grid
    assert np.array_equal(back_values, np.array(values))
