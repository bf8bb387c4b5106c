"""Enumeration and validation of all solutions at fixed alpha.

Solutions correspond to roots of tau_j(x) = 1 - 2*alpha.  The maps are
scanned on the departure curve in its shooting parameter s (x is increasing
in s, and s avoids inverting the curve at every grid point); each sign
change is refined by a bracketing solver and the resulting profile is
integrated and checked independently.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import ProblemParams, band_index, derive_constants
from .numerics import DEFAULT_TOLERANCES, Tolerances, brackets_from_samples, find_root
from .records import (CENTER, DOMAIN_D1, DOMAIN_D2, DOMAIN_D3, TANGENCY, SolutionRecord,
                      glue_profile, profile_grid, residuals_for)
from .superlinear import energy, solve_alpha0
from .timemaps import _NEAREST, _REFINE, N_SCAN, CurveOrbitGeometry

GRID_SIZE = 1001
TIME_TOL = 1e-6


class StaleRoot(RuntimeError):
    """A matching root whose profile does not reach the arrival curve as predicted."""


class EnumerationWarning(UserWarning):
    pass


def j_max_for(params: ProblemParams) -> int:
    return 2 * (band_index(params.lam, params.p) + 2)


def family_of(j: int, domain: str) -> str:
    """Name of the smooth selector a root of tau_j belongs to (symmetric weights)."""
    if domain in (DOMAIN_D3, CENTER):
        return "theta0"
    if domain == TANGENCY:
        return f"theta{(j - 1) // 2}"
    odd = j % 2 == 1
    if (domain == DOMAIN_D1) == odd:
        return f"theta~{(j - 1) // 2}"
    return f"theta{(j - 1) // 2}"


@dataclass
class RootScan:
    """Roots of tau_j = target on the departure curve, before profiles are built."""

    roots: list = field(default_factory=list)  # (s, x, j, domain)
    j_max: int = 0
    j_max_margin: float = math.nan
    d3_cutoff_tau: float = math.nan


def _scan_values(geometry, s, j, target):
    return geometry.schedule_s(s).tau_j(j) - target


def _refine_cell(geometry, j, target, lo, hi, tol):
    def f(s):
        return float(geometry.schedule_s([s]).tau_j(j)[0] - target)
    return find_root(f, lo, hi, tol.root_tol * hi)


def _hidden_pairs(geometry, j, target, s, v):
    """Brackets around grid-local extrema that dip through the target between samples."""
    out = []
    for i in range(1, len(v) - 1):
        a, b, c = v[i - 1], v[i], v[i + 1]
        if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
            continue
        if b <= a and b <= c and b > 0.0:
            sign = 1.0
        elif b >= a and b >= c and b < 0.0:
            sign = -1.0
        else:
            continue

        def g(q):
            return sign * float(geometry.schedule_s([q]).tau_j(j)[0] - target)

        res = optimize.minimize_scalar(g, bounds=(s[i - 1], s[i + 1]), method="bounded",
                                       options={"xatol": 1e-12 * s[i + 1]})
        if res.fun < 0.0 and sign * a > 0.0 and sign * c > 0.0:
            out += [(s[i - 1], res.x), (res.x, s[i + 1])]
    return out


def scan_roots(params: ProblemParams, geometry: CurveOrbitGeometry, tol: Tolerances = DEFAULT_TOLERANCES,
               j_max: int | None = None, s_window=None) -> RootScan:
    """All roots (s, x, j, domain) of the matching equations on the scan grids."""
    target = 1.0 - 2.0 * params.alpha
    left = geometry.left
    j_max = j_max or j_max_for(params)
    out = RootScan(j_max=j_max)
    found = []
    lows = []
    edges = _arrival_edges(geometry)
    for dom in (DOMAIN_D1, DOMAIN_D2, DOMAIN_D3):
        s = _with_edges(left.domain_grid(dom), edges)
        if dom == DOMAIN_D3:
            s = _extend_d3(geometry, s, target, out)
        if s_window is not None:
            s = s[(s >= s_window[0]) & (s <= s_window[1])]
        if len(s) < 2:
            continue
        table = geometry.schedule_s(s)
        for j in range(1, (1 if dom == DOMAIN_D3 else j_max) + 1):
            v = table.tau_j(j) - target
            if dom != DOMAIN_D3 and j == j_max and np.isfinite(v).any():
                lows.append(np.nanmin(v))
            cells = brackets_from_samples(s, v) + _hidden_pairs(geometry, j, target, s, v)
            for lo, hi in cells:
                try:
                    root = _refine_cell(geometry, j, target, lo, hi, tol)
                except ValueError:
                    continue
                found.append((root, j, dom))
    if lows:
        out.j_max_margin = float(min(lows))
        if out.j_max_margin <= 0.0:
            warnings.warn(f"tau_{j_max} reaches the target; raise j_max", EnumerationWarning, stacklevel=2)
    out.roots = _dedupe(geometry, found)
    return out


def _arrival_edges(geometry):
    """Departure heights s whose level touches the arrival curve tangentially.

    Past them the level misses the arrival curve and the even crossings are
    undefined, so roots sliding onto the edge would hide in a half-defined cell.
    """
    if geometry.right is geometry.left:
        return []
    left = geometry.left
    return [left.curve.s_of_x(z) for z in left.level_points(geometry.right.e_min)]


def _with_edges(s, edges):
    if not len(s):
        return s
    lo, hi = s[0], s[-1]
    extra = []
    for e in edges:
        if lo < e < hi:
            offsets = e * np.geomspace(_NEAREST, 1e-2, _REFINE)
            extra += [e + offsets, e - offsets, [e]]
    if not extra:
        return s
    s = np.unique(np.concatenate([s, *extra]))
    return s[(s >= lo) & (s <= hi)]


def _extend_d3(geometry, s, target, out):
    """Push the exterior grid outwards until tau_1 falls below a quarter of the target."""
    s_inf = geometry.left.s_inf
    s = np.asarray(s)
    for _ in range(40):
        last = geometry.schedule_s(s[-1:]).tau_j(1)[0]
        if np.isfinite(last) and last < 0.25 * target:
            break
        extra = s_inf - (s_inf - s[-1]) * np.geomspace(0.5, 1e-3, 20)
        extra = extra[extra < s_inf]
        if not len(extra) or extra[-1] <= s[-1]:
            break
        s = np.concatenate([s, extra])
    out.d3_cutoff_tau = float(geometry.schedule_s(s[-1:]).tau_j(1)[0])
    return s


def _dedupe(geometry, found):
    omega = geometry.constants.omega
    x_t = geometry.x_t
    recs = []
    for s, j, dom in found:
        x = float(geometry.left.energy_at(s)[0])
        if abs(x - x_t) < 1e-6 * omega:
            dom = TANGENCY
        recs.append([s, x, j, dom])
    recs.sort(key=lambda r: (r[1], r[2]))
    out = []
    for r in recs:
        dup = False
        for q in out:
            same_point = abs(q[1] - r[1]) <= 1e-9 * max(1.0, r[1])
            if same_point and (q[2] == r[2] or (r[3] == TANGENCY and q[3] == TANGENCY)):
                dup = True
                break
        if not dup:
            out.append(r)
    return [tuple(r) for r in out]


def _crossing_event(geometry):
    right = geometry.right.curve

    def g(t, state):
        u = state[0]
        if u <= 0.0:
            return state[1]
        return state[1] + abs(right.y(u))  # the arrival curve sits below the axis
    return g


def _early_crossings(geometry, x, j, a, mid, lag):
    """Crossings before t = 1 - alpha, or -1 when the trajectory disagrees with the schedule.

    Every predicted crossing time must carry either a located event or a
    state on the arrival curve (a near-tangential double crossing can fall
    inside a single RK step); any event away from the predictions is extra.
    """
    events = [te for te in mid.event_times if te < 1.0 - a - TIME_TOL]
    if j == 1:
        return len(events)
    sched = geometry.schedule(x)
    predicted = [a + sched.tau_j(i) for i in range(1, j)]
    found = 0
    for tp in predicted:
        if not math.isfinite(tp):
            return -1
        if any(abs(te - tp) <= TIME_TOL for te in events) or lag(mid.sol(tp)) <= TIME_TOL:
            found += 1
    extra = [te for te in events if all(abs(te - tp) > TIME_TOL for tp in predicted)]
    return found if not extra else -1


def build_profile(x, j, params: ProblemParams, grid_size: int = GRID_SIZE,
                  geometry: CurveOrbitGeometry | None = None,
                  tol: Tolerances = DEFAULT_TOLERANCES, domain: str | None = None) -> SolutionRecord:
    """Glue and validate the profile of the solution leaving the left curve at x.

    Raises StaleRoot when the middle leg does not meet the arrival curve for
    the j-th time exactly at t = 1 - alpha.
    """
    if params.alpha == 0.0:
        from .records import build_alpha0_record
        if domain is None:
            omega = derive_constants(params).omega
            domain = CENTER if j == 0 or x == omega else (DOMAIN_D1 if x < omega else DOMAIN_D2)
        return build_alpha0_record(x, j, domain, params, grid_size, tol)
    geometry = geometry or CurveOrbitGeometry(params, tol)
    a = params.alpha
    curve = geometry.left.curve
    s = curve.s_of_x(x)
    y = curve.y(x)
    ev = _crossing_event(geometry)
    t = profile_grid(a, grid_size)
    prof, mid, seam = glue_profile(params, x, y, s, t, tol, center_events=(ev,))
    right = geometry.right.curve

    def lag(state):
        u, v = state
        dgdt = (-params.lam * u - params.b * u ** params.p) + abs(right.dy_dx(u)) * v
        return abs(ev(0.0, state)) / abs(dgdt) if dgdt != 0.0 else math.inf

    crossings = _early_crossings(geometry, x, j, a, mid, lag)
    gap = ev(1.0 - a, mid.terminal)
    landing = lag(mid.terminal)
    if crossings != j - 1 or landing > TIME_TOL:
        raise StaleRoot(f"x={x!r}, j={j}: {crossings} early crossings, landing lag {landing:.3g}")
    e0 = energy(x, y, params.lam, params.b, params.p)
    res = residuals_for(params, prof, e0, max(abs(gap), seam), crossings + 1, tol)
    dom = domain or geometry.domain(x)
    return SolutionRecord(x=float(x), j=int(j), domain=dom, alpha=a, energy=float(e0),
                          family=family_of(j, dom) if params.is_symmetric else None,
                          profile=prof, residuals=res)


def enumerate_solutions(params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES,
                        grid_size: int = GRID_SIZE, n_scan: int = N_SCAN,
                        profiles: bool = True, geometry: CurveOrbitGeometry | None = None):
    """Every solution found at the given alpha, sorted by x then j.

    With ``profiles=False`` the records carry no profile and no residuals;
    that mode is used by sweeps, which validate samples separately.
    """
    if params.alpha == 0.0:
        return solve_alpha0(params, grid_size, tol)
    geometry = geometry or CurveOrbitGeometry(params, tol, n_scan)
    scan = scan_roots(params, geometry, tol)
    records = []
    stale = []
    for s, x, j, dom in scan.roots:
        if not profiles:
            e0 = geometry.left.energy_at(s)[2]
            records.append(SolutionRecord(x=x, j=j, domain=dom, alpha=params.alpha, energy=float(e0),
                                          family=family_of(j, dom) if params.is_symmetric else None))
            continue
        try:
            records.append(build_profile(x, j, params, grid_size, geometry, tol, dom))
        except StaleRoot as exc:
            stale.append(str(exc))
    if stale and n_scan < 4 * N_SCAN:
        # one retry on a doubled grid before giving up on those roots
        return enumerate_solutions(params, tol, grid_size, 2 * n_scan, profiles)
    for msg in stale:
        warnings.warn(f"dropping stale root: {msg}", EnumerationWarning, stacklevel=2)
    records.sort(key=lambda r: (r.x, r.j))
    return records


@dataclass
class MultiplicitySummary:
    lam: float
    alpha: float
    band: int
    count: int
    per_j: dict
    per_domain: dict
    lower_bound: int
    alpha_star: float
    shortfall: bool
    validated: int

    def as_dict(self):
        return dict(self.__dict__)


def count_and_classify(params: ProblemParams, alpha_star: float | None = None,
                       tol: Tolerances = DEFAULT_TOLERANCES, records=None) -> MultiplicitySummary:
    """Compare the enumerated count with the applicable lower bound.

    The bound is 2n+1 below ``alpha_star`` (the smallest critical alpha, found
    by the bifurcation module when not supplied) and 1 otherwise.
    """
    n = band_index(params.lam, params.p)
    if records is None:
        records = enumerate_solutions(params, tol)
    if params.alpha == 0.0:
        bound, alpha_star = 2 * n + 1, math.inf
    else:
        if alpha_star is None:
            if n == 0:
                alpha_star = 0.5
            else:
                from .bifurcation import smallest_critical
                alpha_star = smallest_critical(params, tol)
        bound = 2 * n + 1 if params.alpha < alpha_star else 1
    per_j = dict(sorted(Counter(r.j for r in records).items()))
    per_domain = dict(sorted(Counter(r.domain for r in records).items()))
    return MultiplicitySummary(lam=params.lam, alpha=params.alpha, band=n, count=len(records),
                               per_j=per_j, per_domain=per_domain, lower_bound=bound,
                               alpha_star=float(alpha_star), shortfall=len(records) < bound,
                               validated=sum(1 for r in records if r.validated))
