import math

import numpy as np
import pytest

from superneumann.core import ProblemParams
from superneumann.numerics import integrate_ivp
from superneumann.records import single_shot
from superneumann.superlinear import (CENTRE, CLOSED, HOMOCLINIC, arc_time, energy, solve_alpha0,
                                      t1_map, tn_map, turning_points)

B, P = 1.0, 3.0
OMEGA30 = math.sqrt(30.0)


def flow(lam, b=B, p=P):
    return lambda t, y: [y[1], -lam * y[0] - b * abs(y[0]) ** (p - 1) * y[0]]


def test_energy_examples():
    assert energy(0, 0, -1, B, P) == 0
    assert energy(1, 0, -1, B, P) == pytest.approx(-0.5, abs=1e-15)
    assert energy(1, math.sqrt(0.5), -1, B, P) == pytest.approx(0, abs=1e-15)


def test_turning_points_center_and_homoclinic():
    c = turning_points(-0.5, -1, B, P)
    assert c.classification == CENTRE and c.m == c.M == 1.0
    h = turning_points(0.0, -1, B, P)
    assert h.classification == HOMOCLINIC and h.m is None
    assert h.M == pytest.approx(math.sqrt(2), abs=1e-12)


def test_turning_points_closed_quartic():
    sl = turning_points(-0.25, -1, B, P)
    assert sl.classification == CLOSED
    assert sl.M == pytest.approx(math.sqrt(1 + math.sqrt(0.5)), abs=1e-12)
    assert sl.m == pytest.approx(math.sqrt(1 - math.sqrt(0.5)), abs=1e-12)
    assert sl.M == pytest.approx(1.306563, abs=1e-6) and sl.m == pytest.approx(0.541196, abs=1e-6)
    assert abs(sl.q(sl.m)) <= 1e-10 and abs(sl.q(sl.M)) <= 1e-10
    u = np.linspace(sl.m, sl.M, 50)[1:-1]
    assert np.all(sl.q(u) > 0)
    assert sl.m < 1.0 < sl.M < math.sqrt(2)


def test_exterior_beyond_homoclinic():
    assert turning_points(0.3, -1, B, P).M > math.sqrt(2)


def test_below_center_rejected():
    with pytest.raises(ValueError):
        turning_points(-0.6, -1, B, P)


def test_half_lap_near_center():
    eps = [1e-3, 1e-5]
    errs = [abs(turning_points(-0.5 + e, -1, B, P).half_period - math.pi / math.sqrt(2)) for e in eps]
    assert errs[1] < errs[0] < 1e-2
    assert math.pi / math.sqrt(2) == pytest.approx(2.221441, abs=1e-6)


def test_arc_time_zero_length():
    sl = turning_points(-0.25, -1, B, P)
    assert arc_time(sl, 0.9, 0.9) == 0.0


@pytest.mark.parametrize("u_from, u_to", [(0.6, 1.2), (0.541196100146197, 1.0), (0.8, None)])
def test_arc_time_against_rk(u_from, u_to):
    sl = turning_points(-0.25, -1, B, P)
    v0 = math.sqrt(max(sl.q(u_from), 0.0))
    if u_to is None:
        # the turning point is where the velocity vanishes
        u_to, start = sl.M, [u_from, v0]

        def reach(t, y):
            return y[1]
        reach.direction = -1
    else:
        def reach(t, y):
            return y[0] - u_to
    start = [u_from, max(v0, 1e-300)]
    res = integrate_ivp(flow(-1.0), 0, 10, start, events=[reach], rtol=1e-12, atol=1e-14)
    assert arc_time(sl, u_from, u_to) == pytest.approx(res.event_times[0], abs=1e-7)


def rk_half_period(x, lam):
    """Time from (x, 0) to the next zero of v, by RK after a short head start."""
    head = integrate_ivp(flow(lam), 0, 1e-3, [x, 0.0], rtol=1e-13, atol=1e-14)

    def stop(t, y):
        return y[1]
    res = integrate_ivp(flow(lam), 1e-3, 20, head.terminal, events=[stop], rtol=1e-12, atol=1e-14)
    return res.event_times[0]


def test_t1_blows_up_at_both_ends():
    assert t1_map(0.01, -30, B, P) > t1_map(0.1, -30, B, P) > t1_map(OMEGA30 + 1e-6, -30, B, P)
    u_h = OMEGA30 * math.sqrt(2)
    assert t1_map(u_h * (1 - 1e-8), -30, B, P) > t1_map(u_h * (1 - 1e-3), -30, B, P)


def test_t1_center_value():
    assert t1_map(OMEGA30, -30, B, P) == pytest.approx(math.pi / math.sqrt(60), abs=1e-12)
    assert t1_map(OMEGA30 * (1 + 1e-6), -30, B, P) == pytest.approx(0.405578, abs=1e-4)


def test_t1_symmetric_on_orbit():
    x = 0.5 * OMEGA30
    sl = turning_points(energy(x, 0, -30, B, P), -30, B, P)
    assert t1_map(x, -30, B, P) == pytest.approx(t1_map(sl.M, -30, B, P), abs=1e-9)


@pytest.mark.parametrize("x", [0.3, 2.0, 7.0])
def test_t1_against_rk_half_period(x):
    assert t1_map(x, -30, B, P) == pytest.approx(rk_half_period(x, -30.0), rel=1e-8)


def test_tn_examples():
    assert tn_map(2, OMEGA30, -30, B, P) == pytest.approx(2 * math.pi / math.sqrt(60), abs=1e-12)
    assert tn_map(3, 1.7, -30, B, P) == 3 * tn_map(1, 1.7, -30, B, P)


@pytest.mark.parametrize("n", [1, 2])
def test_tn_monotone_halves(n):
    left = np.linspace(0.0, OMEGA30, 202)[1:-1]
    right = np.linspace(OMEGA30, OMEGA30 * math.sqrt(2), 202)[1:-1]
    tl = np.array([tn_map(n, x, -30, B, P) for x in left])
    tr = np.array([tn_map(n, x, -30, B, P) for x in right])
    assert np.all(np.diff(tl) < 0) and np.all(np.diff(tr) > 0)


@pytest.mark.parametrize("lam, count", [(-1.0, 1), (-30.0, 5), (-70.0, 7)])
def test_solve_alpha0_counts_and_oracle(lam, count):
    recs = solve_alpha0(ProblemParams.symmetric(lam))
    assert len(recs) == count
    for r in recs:
        assert r.validated, r.residuals.failures()
        u = r.profile.u
        end = single_shot(ProblemParams.symmetric(lam), float(u[0]))
        assert abs(end[1]) <= 1e-6 * np.max(np.abs(u))


def test_solve_alpha0_unique_constant():
    (rec,) = solve_alpha0(ProblemParams.symmetric(-1.0))
    assert rec.x == 1.0 and np.allclose(rec.profile.u, 1.0, atol=1e-12)


def test_solve_alpha0_rejects_positive_alpha():
    with pytest.raises(ValueError):
        solve_alpha0(ProblemParams.symmetric(-30.0, alpha=0.1))
