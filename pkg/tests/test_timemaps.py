import math

import numpy as np
import pytest

from superneumann.core import ProblemParams
from superneumann.numerics import integrate_ivp
from superneumann.sublinear import GammaCurve, eval_y
from superneumann.superlinear import energy, turning_points
from superneumann.timemaps import (CurveOrbitGeometry, DomainError, homoclinic_crossing_x,
                                   partner_point, tangency_x, tau, tau_j, theta, theta_tilde)

LAM = -30.0
OMEGA = math.sqrt(30.0)
U_H = OMEGA * math.sqrt(2.0)
CENTER_HALF = math.pi / math.sqrt(60.0)


def flow(lam=LAM):
    return lambda t, y: [y[1], -lam * y[0] - y[0] ** 3]


@pytest.fixture(scope="module")
def geo():
    return CurveOrbitGeometry(ProblemParams.symmetric(LAM, alpha=0.1))


def rk_first_crossing(geo, x):
    """Event time of the first hit of the arrival curve, from (x, y(x))."""
    right = geo.right.curve
    start = [x, eval_y(geo.left.curve, x)]

    def hit(t, y):
        return y[1] + abs(eval_y(right, y[0])) if y[0] > 0 else y[1]
    hit.direction = -1
    res = integrate_ivp(flow(), 0, 10, start, events=[hit], rtol=1e-12, atol=1e-12)
    return res.event_times[0]


def rk_period(x, y):
    head = integrate_ivp(flow(), 0, 1e-3, [x, y], rtol=1e-13, atol=1e-13)

    def back(t, s):
        return s[0] - x
    back.direction = 1
    res = integrate_ivp(flow(), 1e-3, 10, head.terminal, events=[back], rtol=1e-13, atol=1e-13)
    return res.event_times[0]


def test_tangency_below_center():
    for a in (0.05, 0.2):
        assert 0 < tangency_x(GammaCurve(LAM, 3, 1, a), 1.0) < OMEGA


def test_tangency_approaches_center_faster_than_alpha():
    gaps = {a: OMEGA - tangency_x(GammaCurve(LAM, 3, 1, a), 1.0) for a in (1e-2, 1e-3)}
    assert gaps[1e-3] < gaps[1e-2]
    assert gaps[1e-3] / 1e-3 < gaps[1e-2] / 1e-2


def test_homoclinic_crossing(geo):
    x_h = geo.x_h
    y = eval_y(geo.left.curve, x_h)
    assert abs(energy(x_h, y, LAM, 1, 3)) <= 1e-9 * OMEGA**4
    assert geo.x_t < x_h
    gaps = [abs(homoclinic_crossing_x(GammaCurve(LAM, 3, 1, a), 1.0) - U_H) for a in (1e-2, 1e-3)]
    assert gaps[1] < gaps[0]


def test_partner_degenerates_at_tangency(geo):
    z = partner_point(geo.x_t, geo.left, geo.right)
    assert len(z) >= 1 and all(abs(v - geo.x_t) < 1e-6 * OMEGA for v in z)


def test_partner_involution_and_energy(geo):
    x = 0.5 * geo.x_t
    z = partner_point(x, geo.left, geo.right)
    assert len(z) == 2
    other = max(z)
    back = partner_point(other, geo.left, geo.right)
    assert min(back) == pytest.approx(x, abs=1e-9)
    e_x = energy(x, eval_y(geo.left.curve, x), LAM, 1, 3)
    e_z = energy(other, eval_y(geo.left.curve, other), LAM, 1, 3)
    assert abs(e_x - e_z) < 1e-10 * OMEGA**4


def test_period_same_on_orbit(geo):
    x = 0.5 * geo.x_t
    other = max(partner_point(x, geo.left, geo.right))
    assert tau(x, geo) == pytest.approx(tau(other, geo), abs=1e-9)


def test_period_near_center(geo):
    x = geo.x_t * (1 - 1e-6)
    sl = turning_points(energy(OMEGA * (1 + 1e-4), 0, LAM, 1, 3), LAM, 1, 3)
    assert 2 * sl.half_period == pytest.approx(2 * CENTER_HALF, rel=1e-6)
    assert 2 * CENTER_HALF == pytest.approx(0.811156, abs=1e-6)
    assert tau(x, geo) > 2 * CENTER_HALF


def test_period_against_rk(geo):
    x = 0.8 * geo.x_t
    assert tau(x, geo) == pytest.approx(rk_period(x, eval_y(geo.left.curve, x)), abs=1e-6)


def test_exterior_has_no_period(geo):
    with pytest.raises(DomainError):
        tau(geo.x_h * 1.1, geo)


def sample_closed(geo, n=20, seed=3):
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(0.02 * geo.x_t, 0.98 * geo.x_h, n))


def test_ladder_and_ordering(geo):
    for x in sample_closed(geo):
        assert tau_j(3, x, geo) - tau_j(1, x, geo) == pytest.approx(tau(x, geo), abs=1e-9)
        assert tau_j(2, x, geo) > tau_j(1, x, geo)
        assert tau_j(4, x, geo) - tau_j(2, x, geo) == pytest.approx(tau(x, geo), abs=1e-9)


def test_first_two_crossings_meet_at_tangency(geo):
    assert tau_j(1, geo.x_t, geo) == pytest.approx(tau_j(2, geo.x_t, geo), abs=1e-6)


def test_first_crossing_against_rk(geo):
    rng = np.random.default_rng(11)
    xs = np.concatenate([rng.uniform(0.05, 0.95, 7) * geo.x_t,
                         geo.x_t + rng.uniform(0.05, 0.95, 7) * (geo.x_h - geo.x_t),
                         geo.x_h * rng.uniform(1.05, 3.0, 6)])
    for x in xs:
        assert tau_j(1, x, geo) == pytest.approx(rk_first_crossing(geo, x), abs=1e-6)


def test_mid_arc_identity(geo):
    for x in np.linspace(0.1, 0.9, 5) * geo.x_t:
        other = max(partner_point(x, geo.left, geo.right))
        mid = 0.5 * (tau_j(2, x, geo) + tau_j(1, other, geo))
        assert tau_j(1, x, geo) == pytest.approx(mid, abs=1e-9)
        assert tau_j(1, x, geo) == pytest.approx(tau_j(2, other, geo), abs=1e-9)


def test_theta_continuous_at_tangency(geo):
    jumps = [abs(theta(0, geo.x_t - e, geo) - theta(0, geo.x_t + e, geo)) for e in (1e-4, 1e-5)]
    assert jumps[1] < jumps[0] < 1e-2
    # the companion selector already agrees to the partner-root noise (about sqrt(eps))
    jumps = [abs(theta_tilde(1, geo.x_t - e, geo) - theta_tilde(1, geo.x_t + e, geo)) for e in (1e-4, 1e-5)]
    assert max(jumps) < 1e-6


def test_theta_selectors(geo):
    x3 = 1.5 * geo.x_h
    assert theta(0, x3, geo) == tau_j(1, x3, geo)
    x1 = 0.5 * geo.x_t
    assert theta_tilde(0, x1, geo) == tau_j(1, x1, geo)
    assert theta(1, x1, geo) == tau_j(4, x1, geo)


def test_divergence_at_origin(geo):
    xs = geo.x_t * np.geomspace(1e-2, 1e-6, 6)
    for j in (1, 2, 3):
        vals = [tau_j(j, x, geo) for x in xs]
        assert np.all(np.diff(vals) > 0)


def test_divergence_at_homoclinic(geo):
    xs = geo.x_h - (geo.x_h - geo.x_t) * np.geomspace(1e-2, 1e-6, 6)
    vals = [tau_j(2, x, geo) for x in xs]
    assert np.all(np.diff(vals) > 0)


def test_exterior_time_vanishes(geo):
    for x in (4 * U_H, 8 * U_H, 16 * U_H):
        assert tau_j(1, x, geo) < tau_j(1, x / 2, geo)


def test_tangency_time_limit():
    errs = []
    for a in (1e-2, 1e-3, 1e-4):
        g = CurveOrbitGeometry(ProblemParams.symmetric(LAM, alpha=a), n_scan=40)
        errs.append(abs(tau_j(1, g.x_t, g) - CENTER_HALF) / CENTER_HALF)
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-2


def test_upper_turning_point_expansion():
    """(M - Omega)/alpha at the tangency tends to (-lam*Omega + c*Omega^p)/sqrt(lam(1-p))."""
    ratios = []
    for a in (1e-2, 1e-3):
        g = CurveOrbitGeometry(ProblemParams.symmetric(LAM, alpha=a), n_scan=40)
        ratios.append((g.schedule(g.x_t).M - OMEGA) / a)
    limit = (-LAM * OMEGA + OMEGA**3) / math.sqrt(60.0)
    assert ratios[0] > 0 and ratios[1] > 0
    assert abs(ratios[1] - ratios[0]) <= 0.2 * ratios[1]
    assert abs(ratios[1] - limit) < abs(ratios[0] - limit)


def test_asymmetric_path_reproduces_symmetric():
    p = ProblemParams.symmetric(LAM, alpha=0.1)
    sym = CurveOrbitGeometry(p)
    asym = CurveOrbitGeometry(p)
    asym.right = type(sym.left)(sym.left.curve, 1.0)  # a distinct but identical arrival table
    asym.snap = 0.0
    for x in sample_closed(sym, 10):
        for j in (1, 2, 3):
            assert tau_j(j, x, asym) == pytest.approx(tau_j(j, x, sym), abs=1e-12)


def test_asymmetric_missing_crossings_are_nan():
    g = CurveOrbitGeometry(ProblemParams(LAM, 3, 1, 1, 1.3, 0.1))
    # levels below the arrival curve's tangency energy never reach it
    lows = [x for x in np.linspace(0.05, 0.999, 200) * g.x_t
            if g.left.energy_at(g.left.curve.s_of_x(x))[2] < g.right.e_min]
    if lows:
        assert math.isnan(tau_j(2, lows[0], g))


def test_alpha_zero_rejected():
    with pytest.raises(DomainError):
        CurveOrbitGeometry(ProblemParams.symmetric(LAM, alpha=0.0))
