import math

import numpy as np
import pytest

from superneumann.core import ProblemParams
from superneumann.matching import (build_profile, count_and_classify, enumerate_solutions, family_of,
                                   j_max_for, scan_roots)
from superneumann.records import CENTER, DOMAIN_D1, DOMAIN_D2, single_shot
from superneumann.superlinear import solve_alpha0
from superneumann.timemaps import CurveOrbitGeometry


def sup_distance(a, b):
    return float(np.max(np.abs(a.profile.u - b.profile.u)))


@pytest.fixture(scope="module")
def near_zero():
    return enumerate_solutions(ProblemParams.symmetric(-30.0, alpha=0.01))


def check_record(rec, params):
    u, v, t = rec.profile.u, rec.profile.v, rec.profile.t
    scale = np.max(np.abs(u))
    assert np.all(u > 0)
    assert abs(v[0]) <= 1e-6 * scale and abs(v[-1]) <= 1e-6 * scale
    a = params.alpha
    assert np.any(np.isclose(t, a, rtol=0, atol=1e-15)) and np.any(np.isclose(t, 1 - a, rtol=0, atol=1e-15))
    end = single_shot(params, float(u[0]))
    assert abs(end[1]) <= 1e-5 * scale
    assert abs(end[0] - u[-1]) <= 1e-5 * scale
    assert rec.residuals.energy_drift <= 1e-8


def test_j_max_rule():
    assert j_max_for(ProblemParams.symmetric(-30.0, alpha=0.1)) == 8
    assert j_max_for(ProblemParams.symmetric(-1.0, alpha=0.1)) == 4


def test_family_labels():
    assert family_of(1, DOMAIN_D1) == "theta~0"
    assert family_of(2, DOMAIN_D1) == "theta0"
    assert family_of(3, DOMAIN_D2) == "theta1"
    assert family_of(2, DOMAIN_D2) == "theta~0"


def test_high_multiplicity_near_zero(near_zero):
    params = ProblemParams.symmetric(-30.0, alpha=0.01)
    assert len(near_zero) >= 5
    for rec in near_zero:
        assert rec.validated, rec.residuals.failures()
        check_record(rec, params)


def distance_to_alpha0(rec, base):
    return min(float(np.max(np.abs(np.interp(b.profile.t, rec.profile.t, rec.profile.u) - b.profile.u)))
               for b in base)


def test_profiles_converge_to_alpha_zero_linearly():
    base = solve_alpha0(ProblemParams.symmetric(-30.0))
    dist = {}
    for a in (1e-3, 1e-4):
        recs = enumerate_solutions(ProblemParams.symmetric(-30.0, alpha=a))
        assert len(recs) == len(base)
        dist[a] = sorted(distance_to_alpha0(r, base) for r in recs)
    for d_big, d_small in zip(dist[1e-3], dist[1e-4]):
        # one decade in alpha buys one decade in the sup-norm gap
        assert d_small < 0.2 * d_big
    assert max(dist[1e-4]) < 0.05


def test_pairing_across_tangency(near_zero):
    by_energy = [(r.energy, r.j, r.domain) for r in near_zero]
    pairs = 0
    for r in near_zero:
        if r.domain == DOMAIN_D1 and r.j % 2 == 1:
            mates = [e for e, j, d in by_energy if d == DOMAIN_D2 and j == r.j + 1
                     and abs(e - r.energy) <= 1e-8 * abs(r.energy)]
            if mates:
                pairs += 1
    assert pairs >= 1


@pytest.mark.parametrize("alpha", [0.1, 0.3])
def test_existence_profiles_pass_oracle(alpha):
    params = ProblemParams.symmetric(-30.0, alpha=alpha)
    recs = enumerate_solutions(params)
    assert recs and any(r.validated for r in recs)
    for r in recs:
        check_record(r, params)


def test_monotone_loss():
    lo = count_and_classify(ProblemParams.symmetric(-30.0, alpha=0.01))
    hi = count_and_classify(ProblemParams.symmetric(-30.0, alpha=0.4))
    assert hi.count <= lo.count


def test_scan_leaves_margin_at_j_max():
    params = ProblemParams.symmetric(-30.0, alpha=0.05)
    scan = scan_roots(params, CurveOrbitGeometry(params))
    assert scan.j_max_margin > 0
    assert scan.d3_cutoff_tau < 1 - 2 * params.alpha


def test_roots_solve_matching_equation():
    params = ProblemParams.symmetric(-30.0, alpha=0.05)
    geo = CurveOrbitGeometry(params)
    for s, x, j, dom in scan_roots(params, geo).roots:
        assert geo.schedule(x).tau_j(j) == pytest.approx(0.9, abs=1e-8)


def test_alpha_zero_profile_is_orbit():
    rec = build_profile(math.sqrt(30.0), 0, ProblemParams.symmetric(-30.0))
    assert rec.domain == CENTER
    assert np.allclose(rec.profile.u, math.sqrt(30.0), atol=1e-12)


def test_classify_examples():
    one = count_and_classify(ProblemParams.symmetric(-1.0, alpha=0.2))
    assert one.count >= 1 and one.lower_bound == 1
    seven = count_and_classify(ProblemParams.symmetric(-70.0, alpha=0.005))
    assert seven.count >= 7 and not seven.shortfall
    assert set(seven.per_domain) <= {DOMAIN_D1, DOMAIN_D2, "D3", "tangency"}


def test_asymmetric_enumeration_validates():
    params = ProblemParams(-30.0, 3, 1, 1, 1.3, 0.1)
    recs = enumerate_solutions(params)
    assert recs
    for r in recs:
        check_record(r, params)
