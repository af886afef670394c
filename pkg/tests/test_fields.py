import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fcifem.fields import (DivertorField, StraightField, X_POINT,
                           trace_field_line, trace_variable_span)

BOX = (-2.0, 4.0, -3.0, 4.0)
ZETA1 = np.pi / 20


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_straight_field_advection():
    f = StraightField(bz=1.0, bzeta=1.0)
    tr = trace_field_line(f, np.array([[0.0, 0.0]]), 0.0, np.pi, box=BOX)
    assert tr.rz[0, 1] == pytest.approx(np.pi, abs=1e-12)
    assert tr.rz[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert not tr.exited.any()


def test_x_point_is_stationary():
    f = DivertorField()
    ar, az = f.grad_flux(*X_POINT)
    assert abs(ar) < 1e-14 and abs(az) < 1e-14
    tr = trace_field_line(f, np.array([X_POINT]), 0.0, 5 * ZETA1, box=BOX)
    assert np.abs(tr.rz[0] - np.array(X_POINT)).max() < 1e-12


def test_flux_conserved_along_lines(rng):
    f = DivertorField()
    starts = np.stack([rng.uniform(0.4, 1.6, 100),
                       rng.uniform(-0.7, 1.1, 100)], -1)
    tr = trace_field_line(f, starts, 0.0, ZETA1, box=BOX)
    a0 = f.flux(starts[:, 0], starts[:, 1])
    a1 = f.flux(tr.rz[:, 0], tr.rz[:, 1])
    assert np.abs(a1 - a0).max() < 1e-11


def test_tracer_matches_scipy(rng):
    f = DivertorField()
    for r0, z0 in rng.uniform(0.3, 1.3, (5, 2)):
        def rhs(t, y):
            fr, fz = f.slope(y[0], y[1])
            return [fr, fz]
        ref = solve_ivp(rhs, (0.0, ZETA1), [r0, z0],
                        rtol=1e-12, atol=1e-13).y[:, -1]
        tr = trace_field_line(f, np.array([[r0, z0]]), 0.0, ZETA1, box=BOX)
        assert np.abs(tr.rz[0] - ref).max() < 1e-10


def test_exit_detection():
    f = DivertorField()
    # strong outward drift near the top boundary exits a tight box
    tr = trace_field_line(f, np.array([[0.2, 1.4]]), 0.0, ZETA1,
                          box=(0.0, 2.0, -1.0, 1.5))
    assert tr.exited[0]
    r, z = tr.exit_rz[0]
    assert not (0.0 <= r <= 2.0 and -1.0 <= z <= 1.5)


def test_record_stops_consistent():
    f = DivertorField()
    stops = [ZETA1 / 4, ZETA1 / 2, ZETA1]
    tr = trace_field_line(f, np.array([[0.8, 0.2]]), 0.0, ZETA1,
                          box=BOX, record=stops)
    single = trace_field_line(f, np.array([[0.8, 0.2]]), 0.0, ZETA1 / 2, box=BOX)
    assert np.abs(tr.rz[1, 0] - single.rz[0]).max() < 1e-11


def test_variable_span(rng):
    f = DivertorField()
    r = rng.uniform(0.5, 1.5, 40)
    z = rng.uniform(-0.5, 1.0, 40)
    spans = rng.uniform(-ZETA1, ZETA1, 40)
    qr, qz = trace_variable_span(f, r, z, spans, box=BOX)
    for i in (0, 13, 39):
        tr = trace_field_line(f, np.array([[r[i], z[i]]]), 0.0, spans[i], box=BOX)
        assert abs(qr[i] - tr.rz[0, 0]) < 1e-10
        assert abs(qz[i] - tr.rz[0, 1]) < 1e-10


def test_slope_accel_matches_flow_curvature(rng):
    # the quadratic Taylor coefficient is half of (f.grad) f
    f = DivertorField()
    pts = np.stack([rng.uniform(0.3, 1.7, 50), rng.uniform(-0.7, 1.2, 50)], -1)
    eps = 1e-3
    plus = trace_field_line(f, pts, 0.0, eps, box=BOX).rz
    minus = trace_field_line(f, pts, 0.0, -eps, box=BOX).rz
    a2_fd = (plus + minus - 2 * pts) / (2 * eps * eps)
    acr, acz = f.slope_accel(pts[:, 0], pts[:, 1])
    assert np.abs(a2_fd - 0.5 * np.stack([acr, acz], -1)).max() < 2e-5


def test_bzeta_must_not_vanish():
    with pytest.raises(ValueError):
        StraightField(bz=1.0, bzeta=0.0)
    with pytest.raises(ValueError):
        DivertorField(b0=0.0)
