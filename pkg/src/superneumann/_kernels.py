"""Hot numeric kernels.

Everything here is written in the numba-compatible subset of Python and is
compiled by :func:`superneumann._jit.jit` unless ``SUPERNEUMANN_NO_NUMBA`` is
set.  Kernels take and return plain floats/arrays; all validation lives in
the calling modules.
"""

import math

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from ._jit import jit

# DOP853 tableau (12 stages + FSAL row for the error estimate).
RK_A = np.ascontiguousarray(_dop.A[:12, :12], dtype=np.float64)
RK_B = np.ascontiguousarray(_dop.B, dtype=np.float64)
RK_C = np.ascontiguousarray(_dop.C[:12], dtype=np.float64)
RK_E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
RK_E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_UNDERFLOW = 2

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
GK_X = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
GK_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
GK_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KIND_ARC_FROM_MAX = 0   # u = M - w^2, prm = (lam, b, p, M)
KIND_ARC_FROM_MIN = 1   # u = m + w^2, prm = (lam, b, p, m)
KIND_BLOWUP_HEAD = 2    # xi = 1 + w^2, prm = (lam, c, p, s)
KIND_BLOWUP_TAIL = 3    # xi = w^(-2/(p-1)), prm = (lam, c, p, s)

_EPS = 2.220446049250313e-16


# ----------------------------------------------------------------------------
# Runge-Kutta flow of  u'' = -lam*u - w*u^p  with its variational equation
# ----------------------------------------------------------------------------

@jit
def _rhs(lam, w, p, y, out):
    u = y[0]
    au = abs(u)
    up1 = au ** (p - 1.0)
    out[0] = y[1]
    out[1] = -lam * u - w * u * up1
    out[2] = y[3]
    out[3] = (-lam - w * p * up1) * y[2]


@jit
def flow(lam, w, p, t0, t1, y0, rtol, atol, cap, max_steps):
    """Integrate the 4-dim (state + variation) system from t0 to t1.

    Returns (y_end, t_end, status, n_accepted).  ``status`` is STATUS_OK,
    STATUS_BLOWUP (|u| exceeded ``cap``) or STATUS_UNDERFLOW.
    """
    n = 4
    y = y0.copy()
    t = t0
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    if span == 0.0:
        return y, t, STATUS_OK, 0
    K = np.empty((13, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    f0 = np.empty(n)
    _rhs(lam, w, p, y, f0)

    # initial step (Hairer-Wanner heuristic)
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h = min(h0, span)

    steps = 0
    rejected = False
    while True:
        remaining = abs(t1 - t)
        if remaining <= 1e-15 * max(1.0, abs(t1)):
            break
        if h > remaining:
            h = remaining
        if h < 1e-14 * max(1.0, abs(t)):
            return y, t, STATUS_UNDERFLOW, steps
        if steps >= max_steps:
            return y, t, STATUS_UNDERFLOW, steps
        hs = h * direction
        for i in range(n):
            K[0, i] = f0[i]
        for s in range(1, 12):
            for i in range(n):
                acc = 0.0
                for r in range(s):
                    acc += RK_A[s, r] * K[r, i]
                ytmp[i] = y[i] + hs * acc
            _rhs(lam, w, p, ytmp, K[s])
        for i in range(n):
            acc = 0.0
            for r in range(12):
                acc += RK_B[r] * K[r, i]
            ynew[i] = y[i] + hs * acc
        finite = True
        for i in range(n):
            if not math.isfinite(ynew[i]):
                finite = False
        if finite:
            _rhs(lam, w, p, ynew, K[12])
            e5 = 0.0
            e3 = 0.0
            for i in range(n):
                sc = atol + max(abs(y[i]), abs(ynew[i])) * rtol
                a5 = 0.0
                a3 = 0.0
                for r in range(13):
                    a5 += RK_E5[r] * K[r, i]
                    a3 += RK_E3[r] * K[r, i]
                e5 += (a5 / sc) ** 2
                e3 += (a3 / sc) ** 2
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h * e5 / math.sqrt((e5 + 0.01 * e3) * n)
        else:
            err = math.inf
        if err <= 1.0:
            t = t + hs
            for i in range(n):
                y[i] = ynew[i]
                f0[i] = K[12, i]
            steps += 1
            if abs(y[0]) > cap:
                return y, t, STATUS_BLOWUP, steps
            if err == 0.0:
                factor = 10.0
            else:
                factor = min(10.0, 0.9 * err ** (-1.0 / 8.0))
            if rejected:
                factor = min(1.0, factor)
            h = h * factor
            rejected = False
        else:
            if math.isfinite(err):
                factor = max(0.2, 0.9 * err ** (-1.0 / 8.0))
            else:
                factor = 0.2
            h = h * factor
            rejected = True
    return y, t, STATUS_OK, steps


@jit
def shoot(lam, c, p, s, alpha, rtol, atol, cap):
    """Sublinear shot from (s, 0) over [0, alpha]; returns x, y, dx/ds, dy/ds, status."""
    y0 = np.empty(4)
    y0[0] = s
    y0[1] = 0.0
    y0[2] = 1.0
    y0[3] = 0.0
    y, t, status, _ = flow(lam, -c, p, 0.0, alpha, y0, rtol, atol, cap, 200000)
    return y[0], y[1], y[2], y[3], status


@jit
def shoot_many(lam, c, p, s_values, alpha, rtol, atol, cap):
    n = s_values.shape[0]
    out = np.empty((n, 4))
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        x, y, dx, dy, st = shoot(lam, c, p, s_values[i], alpha, rtol, atol, cap)
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = dx
        out[i, 3] = dy
        status[i] = st
    return out, status


# ----------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature on the regularised integrands
# ----------------------------------------------------------------------------

@jit
def _integrand(kind, w, prm):
    lam = prm[0]
    coef = prm[1]
    p = prm[2]
    z = prm[3]
    if kind == KIND_ARC_FROM_MAX:
        k = 2.0 * coef / (p + 1.0)
        w2 = w * w
        r = w2 / z
        if r == 0.0:
            h = p + 1.0
        else:
            h = -math.expm1((p + 1.0) * math.log1p(-r)) / r
        q = lam * (2.0 * z - w2) + k * z ** p * h
        return 2.0 / math.sqrt(q)
    elif kind == KIND_ARC_FROM_MIN:
        k = 2.0 * coef / (p + 1.0)
        w2 = w * w
        r = w2 / z
        if r == 0.0:
            g = p + 1.0
        else:
            g = math.expm1((p + 1.0) * math.log1p(r)) / r
        q = -lam * (2.0 * z + w2) - k * z ** p * g
        return 2.0 / math.sqrt(q)
    elif kind == KIND_BLOWUP_HEAD:
        kc = 2.0 * coef / (p + 1.0) * z ** (p - 1.0)
        w2 = w * w
        if w2 == 0.0:
            g = p + 1.0
        else:
            g = math.expm1((p + 1.0) * math.log1p(w2)) / w2
        q = -lam * (2.0 + w2) + kc * g
        return 2.0 / math.sqrt(q)
    else:
        kc = 2.0 * coef / (p + 1.0) * z ** (p - 1.0)
        if w == 0.0:
            tp = 0.0
        else:
            tp = w ** (2.0 * (p + 1.0) / (p - 1.0))
        q = -lam * (w * w - tp) + kc * (1.0 - tp)
        return (2.0 / (p - 1.0)) / math.sqrt(q)


@jit
def _gk15(kind, a, b, prm):
    centr = 0.5 * (a + b)
    hl = 0.5 * (b - a)
    fc = _integrand(kind, centr, prm)
    resg = fc * GK_WG[3]
    resk = fc * GK_WK[7]
    resabs = abs(resk)
    fv1 = np.empty(7)
    fv2 = np.empty(7)
    for j in range(7):
        absc = hl * GK_X[j]
        f1 = _integrand(kind, centr - absc, prm)
        f2 = _integrand(kind, centr + absc, prm)
        fv1[j] = f1
        fv2[j] = f2
        resk += GK_WK[j] * (f1 + f2)
        resabs += GK_WK[j] * (abs(f1) + abs(f2))
        if j % 2 == 1:
            resg += GK_WG[j // 2] * (f1 + f2)
    reskh = 0.5 * resk
    resasc = GK_WK[7] * abs(fc - reskh)
    for j in range(7):
        resasc += GK_WK[j] * (abs(fv1[j] - reskh) + abs(fv2[j] - reskh))
    result = resk * hl
    resabs *= abs(hl)
    resasc *= abs(hl)
    err = abs((resk - resg) * hl)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > 1e-300 / (50.0 * _EPS):
        err = max(50.0 * _EPS * resabs, err)
    return result, err


@jit
def gk_adapt(kind, a, b, prm, rtol, atol, limit):
    """Globally adaptive GK15 over [a, b]; returns (value, error, status)."""
    if b == a:
        return 0.0, 0.0, 0
    lo = np.empty(limit)
    hi = np.empty(limit)
    val = np.empty(limit)
    err = np.empty(limit)
    r, e = _gk15(kind, a, b, prm)
    lo[0] = a
    hi[0] = b
    val[0] = r
    err[0] = e
    n = 1
    total = r
    toterr = e
    while True:
        if not math.isfinite(total):
            return total, toterr, 2
        if toterr <= max(atol, rtol * abs(total)):
            return total, toterr, 0
        if n >= limit:
            return total, toterr, 1
        imax = 0
        for i in range(1, n):
            if err[i] > err[imax]:
                imax = i
        a1 = lo[imax]
        b2 = hi[imax]
        mid = 0.5 * (a1 + b2)
        if mid <= a1 or mid >= b2:
            return total, toterr, 1
        r1, e1 = _gk15(kind, a1, mid, prm)
        r2, e2 = _gk15(kind, mid, b2, prm)
        hi[imax] = mid
        val[imax] = r1
        err[imax] = e1
        lo[n] = mid
        hi[n] = b2
        val[n] = r2
        err[n] = e2
        n += 1
        total = 0.0
        toterr = 0.0
        for i in range(n):
            total += val[i]
            toterr += err[i]


# ----------------------------------------------------------------------------
# Superlinear orbit geometry
# ----------------------------------------------------------------------------

@jit
def orbit_q(lam, b, p, e0, u):
    return e0 - lam * u * u - (2.0 * b / (p + 1.0)) * u ** (p + 1.0)


@jit
def _orbit_dq(lam, b, p, u):
    return -2.0 * u * (lam + b * u ** (p - 1.0))


@jit
def _safe_newton(lam, b, p, e0, lo, hi, x):
    """Root of Q in [lo, hi] with sign(Q(lo)) != sign(Q(hi)); Newton + bisection."""
    qlo = orbit_q(lam, b, p, e0, lo)
    for _ in range(300):
        q = orbit_q(lam, b, p, e0, x)
        if q == 0.0:
            return x
        if (q > 0.0) == (qlo > 0.0):
            lo = x
            qlo = q
        else:
            hi = x
        dq = _orbit_dq(lam, b, p, x)
        xn = x - q / dq if dq != 0.0 else 0.5 * (lo + hi)
        if not (min(lo, hi) < xn < max(lo, hi)):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 2.0 * _EPS * abs(x) or abs(hi - lo) <= 4.0 * _EPS * abs(x):
            return xn
        x = xn
    return x


@jit
def turning_max(lam, b, p, e0):
    """Largest abscissa M with Q(M) = 0 (the orbit's rightmost point)."""
    omega = (-lam / b) ** (1.0 / (p - 1.0))
    e_center = lam * omega * omega + (2.0 * b / (p + 1.0)) * omega ** (p + 1.0)
    gap = e0 - e_center
    if gap <= 0.0:
        return omega
    hi = 2.0 * omega
    while orbit_q(lam, b, p, e0, hi) > 0.0:
        hi *= 2.0
    guess = omega + math.sqrt(gap / (lam * (1.0 - p)))
    if not (omega < guess < hi):
        guess = 0.5 * (omega + hi)
    return _safe_newton(lam, b, p, e0, omega, hi, guess)


@jit
def turning_min(lam, b, p, e0):
    """Smallest positive abscissa m with Q(m) = 0; requires e_center <= e0 < 0."""
    omega = (-lam / b) ** (1.0 / (p - 1.0))
    e_center = lam * omega * omega + (2.0 * b / (p + 1.0)) * omega ** (p + 1.0)
    gap = e0 - e_center
    if gap <= 0.0:
        return omega
    guess = omega - math.sqrt(gap / (lam * (1.0 - p)))
    if not (0.0 < guess < omega):
        guess = 0.5 * omega
    return _safe_newton(lam, b, p, e0, 0.0, omega, guess)


@jit
def half_lap(lam, b, p, m, big_m, rtol, atol, limit):
    """Time from m to M along a closed orbit (half of the period)."""
    if big_m <= m:
        return math.pi / math.sqrt(lam * (1.0 - p)), 0.0, 0
    prm = np.empty(4)
    prm[0] = lam
    prm[1] = b
    prm[2] = p
    mid = 0.5 * (m + big_m)
    prm[3] = m
    v1, e1, s1 = gk_adapt(KIND_ARC_FROM_MIN, 0.0, math.sqrt(mid - m), prm, rtol, atol, limit)
    prm[3] = big_m
    v2, e2, s2 = gk_adapt(KIND_ARC_FROM_MAX, 0.0, math.sqrt(big_m - mid), prm, rtol, atol, limit)
    return v1 + v2, e1 + e2, max(s1, s2)


@jit
def arc_to_max(lam, b, p, m, big_m, half, z, rtol, atol, limit):
    """Time from abscissa z to M on the upper (or lower) half of an orbit.

    ``m <= 0`` marks an orbit without a left turning point (E0 >= 0); then
    ``half`` is ignored.
    """
    prm = np.empty(4)
    prm[0] = lam
    prm[1] = b
    prm[2] = p
    if z >= big_m:
        return 0.0, 0.0, 0
    if m > 0.0 and (z - m) < (big_m - z):
        if z <= m:
            return half, 0.0, 0
        prm[3] = m
        v, e, s = gk_adapt(KIND_ARC_FROM_MIN, 0.0, math.sqrt(z - m), prm, rtol, atol, limit)
        return half - v, e, s
    prm[3] = big_m
    return gk_adapt(KIND_ARC_FROM_MAX, 0.0, math.sqrt(big_m - z), prm, rtol, atol, limit)


@jit
def blowup_time(lam, c, p, s, rtol, atol, limit):
    prm = np.empty(4)
    prm[0] = lam
    prm[1] = c
    prm[2] = p
    prm[3] = s
    v1, e1, s1 = gk_adapt(KIND_BLOWUP_HEAD, 0.0, 1.0, prm, rtol, atol, limit)
    w_top = 2.0 ** (-(p - 1.0) / 2.0)
    v2, e2, s2 = gk_adapt(KIND_BLOWUP_TAIL, 0.0, w_top, prm, rtol, atol, limit)
    return v1 + v2, e1 + e2, max(s1, s2)


# ----------------------------------------------------------------------------
# Energy along a shooting curve and the crossing schedule of an orbit
# ----------------------------------------------------------------------------

@jit
def curve_energy(lam, b, p, c, alpha, s, rtol, atol, cap):
    """Shot from s, then the superlinear energy of (x, y) and its s-derivative."""
    x, y, dx, dy, status = shoot(lam, c, p, s, alpha, rtol, atol * min(1.0, s), cap * max(1.0, s))
    k = 2.0 * b / (p + 1.0)
    e = y * y + lam * x * x + k * x ** (p + 1.0)
    de = 2.0 * (y * dy + (lam * x + b * x ** p) * dx)
    return x, y, e, de, status


@jit
def curve_energy_many(lam, b, p, c, alpha, s_values, rtol, atol, cap):
    n = s_values.shape[0]
    out = np.empty((n, 4))
    for i in range(n):
        x, y, e, de, st = curve_energy(lam, b, p, c, alpha, s_values[i], rtol, atol, cap)
        if st != STATUS_OK:
            out[i, 0] = np.nan
            out[i, 1] = np.nan
            out[i, 2] = np.inf
            out[i, 3] = np.nan
        else:
            out[i, 0] = x
            out[i, 1] = y
            out[i, 2] = e
            out[i, 3] = de
    return out


@jit
def level_root(lam, b, p, c, alpha, target, lo, hi, guess, increasing, rtol, atol, cap):
    """s in [lo, hi] with curve energy e(s) = target.

    ``increasing`` gives the orientation of e on the bracket.  A failed shot
    (blow-up near the threshold) counts as e = +inf.  Returns (s, x).
    """
    inc = increasing
    best_s = lo
    best_x = math.nan
    best_f = math.inf
    s = guess
    if not (lo <= s <= hi) or s <= 0.0:
        s = 0.5 * (lo + hi)
    for _ in range(200):
        x, y, e, de, st = curve_energy(lam, b, p, c, alpha, s, rtol, atol, cap)
        if st != STATUS_OK:
            f = math.inf
            de = math.nan
        else:
            f = e - target
            if abs(f) < best_f:
                best_f = abs(f)
                best_s = s
                best_x = x
            # the energy carries the shot's relative error; stop at that floor
            floor = 1e-11 * (y * y + abs(lam) * x * x + (2.0 * b / (p + 1.0)) * x ** (p + 1.0))
            if abs(f) <= floor:
                return s, x
        if (f < 0.0) == inc:
            lo = s
        else:
            hi = s
        if hi - lo <= 1e-14 * hi:
            break
        nxt = math.nan
        if math.isfinite(f) and de == de and de != 0.0:
            nxt = s - f / de
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        s = nxt
    return best_s, best_x


@jit
def _table_bracket(s_tab, e_tab, i0, i1, target, s_end):
    """Cell of the monotone table segment [i0, i1] containing the level."""
    increasing = e_tab[i1] > e_tab[i0]
    lo = i0
    hi = i1
    if increasing:
        if target >= e_tab[i1]:
            return s_tab[i1], s_end, 0.5 * (s_tab[i1] + s_end)
        if target <= e_tab[i0]:
            return s_tab[i0], s_tab[i0], s_tab[i0]
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if e_tab[mid] < target:
                lo = mid
            else:
                hi = mid
    else:
        if target >= e_tab[i0]:
            return s_end, s_tab[i0], 0.5 * (s_end + s_tab[i0])
        if target <= e_tab[i1]:
            return s_tab[i1], s_tab[i1], s_tab[i1]
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if e_tab[mid] > target:
                lo = mid
            else:
                hi = mid
    e0 = e_tab[lo]
    e1 = e_tab[hi]
    w = (target - e0) / (e1 - e0) if e1 != e0 else 0.5
    return s_tab[lo], s_tab[hi], s_tab[lo] + w * (s_tab[hi] - s_tab[lo])


@jit
def crossings(lam, b, p, c, alpha, e0, s_tab, e_tab, i_t, s_inf, x_t, e_min,
              rtol, atol, cap):
    """Abscissae z1 >= z2 where the level e0 meets the arrival curve.

    ``s_tab``/``e_tab`` tabulate the curve energy on increasing s with the
    minimum at index ``i_t``.  NaN marks a missing crossing.
    """
    n = s_tab.shape[0]
    if e0 < e_min:
        return math.nan, math.nan
    if e0 == e_min:
        return x_t, x_t
    lo, hi, g = _table_bracket(s_tab, e_tab, i_t, n - 1, e0, s_inf)
    if lo == hi:
        z1 = x_t
    else:
        _, z1 = level_root(lam, b, p, c, alpha, e0, lo, hi, g, True, rtol, atol, cap)
    if e0 >= 0.0:
        return z1, math.nan
    lo, hi, g = _table_bracket(s_tab, e_tab, 0, i_t, e0, 0.0)
    if lo == hi:
        z2 = x_t
    else:
        _, z2 = level_root(lam, b, p, c, alpha, e0, lo, hi, g, False, rtol, atol, cap)
    return z1, z2


@jit
def schedule_many(lam, b, p, c_dep, c_arr, alpha, s_values, s_tab, e_tab, i_t, s_inf,
                  x_t, e_min, x_t_dep, snap, srtol, satol, cap, qrtol, qatol, qlimit):
    """Crossing schedule for departures from the left curve at each s.

    Columns: x, e0, z1, z2, A(x), A(z1), A(z2), half-lap, M, m, status.
    A(z) is the time from z to the rightmost point M of the level.  When
    ``snap > 0`` departures within ``snap`` of ``x_t_dep`` use the tangency
    crossings z1 = z2 = x_t.
    """
    n = s_values.shape[0]
    out = np.empty((n, 11))
    for i in range(n):
        x, y, e0, de, st = curve_energy(lam, b, p, c_dep, alpha, s_values[i], srtol, satol, cap)
        for k in range(11):
            out[i, k] = math.nan
        if st != STATUS_OK:
            out[i, 10] = 1.0
            continue
        out[i, 0] = x
        out[i, 1] = e0
        big_m = turning_max(lam, b, p, e0)
        if e0 < 0.0:
            m = turning_min(lam, b, p, e0)
            half, _, qs = half_lap(lam, b, p, m, big_m, qrtol, qatol, qlimit)
        else:
            m = 0.0
            half = math.inf
            qs = 0
        if snap > 0.0 and abs(x - x_t_dep) < snap:
            z1 = x_t
            z2 = x_t
        else:
            z1, z2 = crossings(lam, b, p, c_arr, alpha, e0, s_tab, e_tab, i_t, s_inf,
                               x_t, e_min, srtol, satol, cap)
        ax, _, q1 = arc_to_max(lam, b, p, m, big_m, half, x, qrtol, qatol, qlimit)
        a1 = math.nan
        a2 = math.nan
        q2 = 0
        q3 = 0
        if z1 == z1:
            a1, _, q2 = arc_to_max(lam, b, p, m, big_m, half, z1, qrtol, qatol, qlimit)
        if z2 == z2:
            a2, _, q3 = arc_to_max(lam, b, p, m, big_m, half, z2, qrtol, qatol, qlimit)
        out[i, 2] = z1
        out[i, 3] = z2
        out[i, 4] = ax
        out[i, 5] = a1
        out[i, 6] = a2
        out[i, 7] = half
        out[i, 8] = big_m
        out[i, 9] = m if e0 < 0.0 else math.nan
        out[i, 10] = 0.0 if (qs == 0 and q1 == 0 and q2 == 0 and q3 == 0) else 2.0
    return out
