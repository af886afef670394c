import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import BSpline

from fcifem.splines import DomainError, Spline1D


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def test_linear_hat_values():
    s = Spline1D.periodic(1, 1.0, 10)
    assert s.eval_basis(0, 0.0) == 1.0
    assert s.eval_basis(0, 1.0) == 0.0
    assert s.eval_basis(0, 9.0) == 0.0  # one period back from the edge


def test_quadratic_peak_value():
    s = Spline1D.periodic(2, 1.0, 10)
    assert s.eval_basis(0, 0.0) == 0.75


def test_linear_downslope_and_knot_convention():
    s = Spline1D.periodic(1, 1.0, 10)
    assert s.eval_basis_deriv(0, 0.5) == -1.0
    # right-continuous tie-break at the node itself
    assert s.eval_basis_deriv(0, 0.0) == -1.0


def test_quadratic_deriv_symmetry():
    s = Spline1D.periodic(2, 1.0, 10)
    assert s.eval_basis_deriv(0, 0.0) == 0.0


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("boundary", ["periodic", "clamped"])
def test_partition_of_unity(order, boundary, rng):
    s = Spline1D(order, 0.31, 23, boundary,
                 origin=-2.0, ghost_layers=order - 1 if boundary == "clamped" else 0)
    x = rng.uniform(-2.0, -2.0 + s.length, 10_000)
    _, vals, dvals = s.basis_rows(x)
    assert np.abs(vals.sum(axis=1) - 1.0).max() < 1e-12
    assert np.abs(dvals.sum(axis=1)).max() < 1e-11  # derivative of unity


@pytest.mark.parametrize("order", [1, 2])
def test_first_moment_identity(order, rng):
    # away from the seam the wrapped indices are the integer node indices
    s = Spline1D.periodic(order, 0.5, 16)
    x = rng.uniform(1.0, 7.0, 5000)
    first, vals, _ = s.basis_rows(x)
    idx = first[:, None] + np.arange(order + 1)
    moment = (idx * vals).sum(axis=1)
    assert np.abs(moment - x / 0.5).max() < 1e-12


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("ghosts", [None, 3])
def test_clamped_marsden_identity(order, ghosts, rng):
    s = Spline1D.clamped(order, 0.25, 20, origin=0.0, ghost_layers=ghosts)
    pos = s.node_positions
    x = rng.uniform(0.0, s.length, 5000)
    first, vals, _ = s.basis_rows(x)
    idx = first[:, None] + np.arange(order + 1)
    assert np.abs((pos[idx] * vals).sum(axis=1) - x).max() < 1e-12


@pytest.mark.parametrize("order", [1, 2])
def test_derivative_matches_finite_difference(order, rng):
    s = Spline1D.periodic(order, 0.7, 12)
    eps = 1e-6
    for x in rng.uniform(0.01, 8.0, 50):
        # stay away from knots where the derivative may jump
        u = (x / 0.7) % 0.5
        if min(u, 0.5 - u) * 0.7 < 10 * eps:
            continue
        for i in range(12):
            fd = (s.eval_basis(i, x + eps) - s.eval_basis(i, x - eps)) / (2 * eps)
            assert s.eval_basis_deriv(i, x) == pytest.approx(fd, abs=5e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 11.9), st.integers(0, 11))
def test_periodic_translation(x, i):
    s = Spline1D.periodic(2, 1.0, 12)
    assert s.eval_basis(i, x) == pytest.approx(
        s.eval_basis((i + 1) % 12, x + 1.0), abs=1e-13)


def test_nonzero_range_examples():
    lin = Spline1D.periodic(1, 1.0, 10)
    quad = Spline1D.periodic(2, 1.0, 10)
    assert lin.nonzero_range(2.5) == (2, 3)
    assert quad.nonzero_range(2.5) == (1, 3)
    lo, hi = quad.nonzero_range(9.9)
    assert lo == 9 and hi == 1  # wraps through node 0


def test_nonzero_range_contains_all_nonzero(rng):
    for order in (1, 2):
        s = Spline1D.periodic(order, 1.0, 11)
        for x in rng.uniform(0, 11, 200):
            lo, hi = s.nonzero_range(x)
            span = {(lo + k) % 11 for k in range((hi - lo) % 11 + 1)}
            for i in range(11):
                if abs(s.eval_basis(i, x)) > 0:
                    assert i in span


def test_clamped_domain_error():
    s = Spline1D.clamped(2, 1.0, 5)
    with pytest.raises(DomainError):
        s.eval_basis(0, -0.5)
    with pytest.raises(DomainError):
        s.nonzero_range(5.5)


def test_clamped_matches_scipy_cardinal(rng):
    # every clamped basis function is a cardinal B-spline on uniform knots
    for order in (1, 2):
        s = Spline1D.clamped(order, 0.4, 9, origin=2.0, ghost_layers=2)
        x = rng.uniform(2.0, 2.0 + s.length - 1e-9, 400)
        first, vals, dvals = s.basis_rows(x)
        for j in range(s.n_nodes):
            center = s.node_positions[j]
            t = center + 0.4 * (np.arange(order + 2) - (order + 1) / 2)
            ref = BSpline.basis_element(t, extrapolate=False)
            mine = np.where((first <= j) & (j <= first + order),
                            np.take_along_axis(
                                vals, np.clip(j - first, 0, order)[:, None],
                                1)[:, 0], 0.0)
            want = np.nan_to_num(ref(x))
            assert np.abs(mine - want).max() < 1e-12


def test_smooth_extension_beyond_walls():
    # just outside a clamped domain the surviving basis functions continue
    # their polynomial pieces instead of being cut off
    s = Spline1D.clamped(2, 1.0, 6, ghost_layers=1)
    eps = 1e-7
    for j in range(s.n_nodes):
        inner = s.eval_basis(j, eps)
        first, vals, _ = s.basis_rows(np.array([-eps]), check=False)
        idx = first[0] + np.arange(3)
        outer = vals[0][idx == j]
        outer = float(outer[0]) if outer.size else 0.0
        assert outer == pytest.approx(inner, abs=1e-6)


def test_dof_counts():
    assert Spline1D.periodic(2, 1.0, 7).n_nodes == 7
    assert Spline1D.clamped(1, 1.0, 10).n_nodes == 11
    assert Spline1D.clamped(2, 1.0, 10).n_nodes == 13
    assert Spline1D.clamped(2, 1.0, 10, ghost_layers=4).n_nodes == 19


def test_single_node_periodic_axis_is_constant(rng):
    s = Spline1D.periodic(2, 1.0, 1)
    for x in rng.uniform(-3, 3, 50):
        assert s.eval_basis(0, x) == pytest.approx(1.0, abs=1e-13)
        assert s.eval_basis_deriv(0, x) == pytest.approx(0.0, abs=1e-13)
