import math

import numpy as np
import pytest

from superneumann.numerics import (BLOWUP, INVERSE_SQRT, NoSignChange, QuadratureSpec,
                                   find_root, integrate, integrate_ivp, scan_brackets)
from superneumann.sublinear import blowup_time, s_infinity


def test_inverse_sqrt_left():
    assert integrate(lambda u: 1 / math.sqrt(u), 0, 1, QuadratureSpec(left=INVERSE_SQRT)) == pytest.approx(2, abs=1e-10)


def test_inverse_sqrt_right():
    val = integrate(lambda u: 1 / math.sqrt(1 - u * u), 0, 1, QuadratureSpec(right=INVERSE_SQRT))
    assert val == pytest.approx(math.pi / 2, abs=1e-10)


def test_infinite_tail():
    assert integrate(lambda x: x**-2, 1, math.inf) == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("f, a, b", [(math.exp, 0, 1), (math.cos, 0.3, 2.5), (lambda x: 1 / (1 + x * x), -1, 4)])
def test_flags_harmless_on_regular_integrands(f, a, b):
    plain = integrate(f, a, b)
    flagged = integrate(f, a, b, QuadratureSpec(left=INVERSE_SQRT, right=INVERSE_SQRT))
    assert flagged == pytest.approx(plain, abs=1e-10)


@pytest.mark.parametrize("g, lo, hi, root", [
    (lambda x: x - 0.5, 0, 1, 0.5),
    (lambda x: x * x - 2, 1, 2, math.sqrt(2)),
    (math.cos, 1, 2, math.pi / 2),
])
def test_find_root(g, lo, hi, root):
    assert find_root(g, lo, hi) == pytest.approx(root, abs=1e-12)


def test_find_root_bracket_independence():
    a = find_root(math.cos, 1.0, 2.0, 1e-13)
    b = find_root(math.cos, 1.5, 1.6, 1e-13)
    assert abs(a - b) <= 1e-13


def test_find_root_requires_sign_change():
    with pytest.raises(NoSignChange):
        find_root(lambda x: 1.0, 0.0, 1.0)


def test_scan_brackets():
    cells = scan_brackets(math.sin, 1, 7, 600)
    assert len(cells) == 2
    assert cells[0][0] <= math.pi <= cells[0][1] and cells[1][0] <= 2 * math.pi <= cells[1][1]
    assert scan_brackets(lambda x: 1.0, 0, 1, 50) == []
    assert len(scan_brackets(lambda x: (x - 1) * (x - 2) * (x - 3), 0, 4, 400)) == 3


def test_harmonic_oscillator():
    res = integrate_ivp(lambda t, y: [y[1], -y[0]], 0, math.pi / 2, [1.0, 0.0])
    assert np.allclose(res.terminal, [0.0, -1.0], atol=1e-8)


def test_blowup_guard_matches_quadrature():
    lam, c, p = -1.0, 1.0, 3.0
    s = 1.5 * s_infinity(0.3, lam, c, p)
    field = lambda t, y: [y[1], -lam * y[0] + c * y[0] ** 3]
    res = integrate_ivp(field, 0, 1.0, [s, 0.0], blow_up_cap=1e8)
    assert res.reason == BLOWUP
    # the guard fires at |u| = 1e8; the remaining escape time from there is O(1e-8)
    assert res.t[-1] == pytest.approx(blowup_time(s, lam, c, p), rel=1e-6)


def test_equilibrium_at_center():
    lam, b = -30.0, 1.0
    omega = math.sqrt(30.0)
    res = integrate_ivp(lambda t, y: [y[1], -lam * y[0] - b * y[0] ** 3], 0, 1, [omega, 0.0])
    assert np.allclose(res.terminal, [omega, 0.0], atol=1e-10)


def test_energy_conserved_over_period():
    lam, b, p = -1.0, 1.0, 3.0
    u0 = 0.541196100146197  # left turning point of the level -0.25
    field = lambda t, y: [y[1], -lam * y[0] - b * y[0] ** 3]
    res = integrate_ivp(field, 0, 8.0, [u0, 0.0], t_eval=np.linspace(0, 8, 800))
    e = res.y[:, 1] ** 2 + lam * res.y[:, 0] ** 2 + 0.5 * res.y[:, 0] ** 4
    assert np.max(np.abs(e + 0.25)) <= 1e-8


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(left="log")
    with pytest.raises(ValueError):
        QuadratureSpec(tail_decay=1.0)
