"""Connection times between the departure and arrival curves.

A solution leaves the departure curve at (x, y(x)) when t = alpha, follows a
level of E clockwise and must sit on the arrival curve when t = 1 - alpha.
With z1 >= z2 the abscissae where that level meets the arrival curve and
A(z) the time from z to the rightmost point M of the level,

    tau_{2i+1}(x) = A(x) + A(z1) + i*tau,   tau_{2i+2}(x) = A(x) + A(z2) + i*tau,

where tau is the period.  Exterior levels (E >= 0) cross only once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import ProblemParams, derive_constants
from .numerics import DEFAULT_TOLERANCES, Tolerances, find_root, brackets_from_samples
from .records import DOMAIN_D1, DOMAIN_D2, DOMAIN_D3, TANGENCY
from .sublinear import LEFT, RIGHT, GammaCurve


class GeometryWarning(UserWarning):
    """The curve/orbit picture departs from the single-tangency configuration."""


class DomainError(ValueError):
    pass


N_SCAN = 400
_REFINE = 32  # extra geometric points inside 1% of a singular endpoint
_NEAREST = 1e-7  # closest relative approach to a singular endpoint
D3_CUTOFF = 20.0  # initial exterior scan limit, in units of u_h


def _refined(a, b, n, near_a, near_b):
    """n uniform points on [a, b] plus geometric clusters towards flagged ends."""
    span = b - a
    pts = [np.linspace(a, b, n)]
    offsets = span * np.geomspace(_NEAREST, 1e-2, _REFINE)
    if near_a:
        pts.append(a + offsets)
    if near_b:
        pts.append(b - offsets)
    return np.unique(np.concatenate(pts))


def _monotone_mask(values, increasing):
    keep = np.zeros(values.shape, dtype=bool)
    best = -math.inf if increasing else math.inf
    for i, v in enumerate(values):
        if (v > best) if increasing else (v < best):
            keep[i] = True
            best = v
    return keep


class CurveTable:
    """Energy of the superlinear flow along one shooting curve, tabulated in s.

    The energy e(s) falls from 0 to a minimum at the tangency s_t and then
    grows through 0 at the homoclinic crossing s_h towards +inf at s_inf.
    """

    def __init__(self, curve: GammaCurve, b: float, tol: Tolerances = DEFAULT_TOLERANCES,
                 n_scan: int = N_SCAN):
        if curve.alpha <= 0.0:
            raise DomainError("the connection geometry needs alpha > 0")
        self.curve, self.b, self.tol = curve, float(b), tol
        self.lam, self.p, self.c, self.alpha = curve.lam, curve.p, curve.c, curve.alpha
        self.omega = (-self.lam / self.b) ** (1.0 / (self.p - 1.0))
        self.u_h = self.omega * ((self.p + 1.0) / 2.0) ** (1.0 / (self.p - 1.0))
        self.s_inf = curve.s_infinity
        self.warnings: list[str] = []
        self.tangency_roots = self._tangency_roots()
        self.s_t = max(self.tangency_roots)
        self.x_t, _, self.e_min, _ = self.energy_at(self.s_t)
        self.s_h = self._homoclinic()
        self.x_h = self.energy_at(self.s_h)[0]
        self._build(n_scan)

    # pointwise helpers -----------------------------------------------------
    def energy_at(self, s):
        """(x, y, e, de/ds) at the shot from s; y is unsigned."""
        tol = self.tol
        x, y, e, de, st = K.curve_energy(self.lam, self.b, self.p, self.c, self.alpha, float(s),
                                         tol.shoot_rtol, tol.shoot_atol, tol.blowup_factor)
        if st != K.STATUS_OK:
            return math.inf, math.inf, math.inf, math.nan
        return x, y, e, de

    def energy_many(self, s_values):
        tol = self.tol
        return K.curve_energy_many(self.lam, self.b, self.p, self.c, self.alpha,
                                   np.asarray(s_values, dtype=float), tol.shoot_rtol,
                                   tol.shoot_atol, tol.blowup_factor)

    def tangency_residual(self, s):
        """G = y*dy/dx + lam*x + b*x^p, half the x-derivative of the energy."""
        sh = self.curve.shot(s)
        return sh.y * sh.dy_ds / sh.dx_ds + self.lam * sh.x + self.b * sh.x ** self.p

    def _tangency_roots(self):
        s_omega = self.curve.s_of_x(self.omega)
        grid = _refined(0.0, s_omega, 200, True, False)[1:]
        vals = np.array([self.tangency_residual(s) for s in grid])
        cells = brackets_from_samples(grid, vals)
        if not cells:
            raise AssertionError("no tangency between the curve and the closed orbits")
        roots = [find_root(self.tangency_residual, lo, hi, self.tol.root_tol * s_omega)
                 for lo, hi in cells]
        if len(roots) > 1:
            msg = (f"{len(roots)} tangencies with closed orbits detected "
                   f"(c={self.c}, alpha={self.alpha}); using the largest")
            self.warnings.append(msg)
            warnings.warn(msg, GeometryWarning, stacklevel=3)
        return roots

    def _homoclinic(self):
        s_top = self.curve.s_of_x(10.0 * self.u_h)
        grid = _refined(self.s_t, s_top, 200, False, False)
        vals = self.energy_many(grid)[:, 2]
        cells = brackets_from_samples(grid, vals)
        if not cells:
            raise AssertionError("the curve does not cross the homoclinic level")
        if len(cells) > 1:
            msg = (f"{len(cells)} crossings with the homoclinic level detected "
                   f"(c={self.c}, alpha={self.alpha}); using the smallest")
            self.warnings.append(msg)
            warnings.warn(msg, GeometryWarning, stacklevel=3)
        lo, hi = cells[0]
        return find_root(lambda s: self.energy_at(s)[2], lo, hi, self.tol.root_tol * hi)

    def _build(self, n):
        d1 = _refined(0.0, self.s_t, n, True, True)[1:]
        d2 = _refined(self.s_t, self.s_h, n, True, True)
        # the exterior part stops at a cutoff; enumeration extends it on demand
        self.s_cut = self.curve.s_of_x(D3_CUTOFF * self.u_h)
        d3 = _refined(self.s_h, self.s_cut, n, True, False)
        s = np.unique(np.concatenate([d1, d2, d3]))
        s = s[(s > 0.0) & (s < self.s_inf)]
        data = self.energy_many(s)
        ok = np.isfinite(data[:, 2])
        s, data = s[ok], data[ok]
        i_t = int(np.argmin(np.abs(s - self.s_t)))
        i_h = int(np.argmin(np.abs(s - self.s_h)))
        data[i_t, 2] = self.e_min
        data[i_h, 2] = 0.0
        self.s_grid, self.x_grid, self.e_grid = s, data[:, 0], data[:, 2]
        self.i_t, self.i_h = i_t, i_h
        # bracket table: strictly monotone on each side of the minimum
        e = data[:, 2]
        keep = np.concatenate([_monotone_mask(e[:i_t + 1][::-1], True)[::-1],
                               _monotone_mask(e[i_t:], True)[1:]])
        keep[i_t] = True
        self.s_tab = np.ascontiguousarray(s[keep])
        self.e_tab = np.ascontiguousarray(e[keep])
        self.i_tab = int(np.flatnonzero(np.flatnonzero(keep) == i_t)[0])

    def domain_grid(self, domain):
        """Scan grid (in s) for one departure domain."""
        if domain == DOMAIN_D1:
            return self.s_grid[:self.i_t + 1]
        if domain == DOMAIN_D2:
            return self.s_grid[self.i_t:self.i_h + 1]
        if domain == DOMAIN_D3:
            return self.s_grid[self.i_h:]
        raise ValueError(f"unknown domain {domain!r}")

    def level_points(self, e0):
        """Abscissae where the level e0 meets this curve, ascending (0, 1 or 2 of them)."""
        tol = self.tol
        z1, z2 = K.crossings(self.lam, self.b, self.p, self.c, self.alpha, float(e0), self.s_tab,
                             self.e_tab, self.i_tab, self.s_inf, self.x_t, self.e_min,
                             tol.shoot_rtol, tol.shoot_atol, tol.blowup_factor)
        return sorted({z for z in (z1, z2) if z == z})


@dataclass(frozen=True)
class CrossingSchedule:
    """Arrival data for one departure point x on the left curve."""

    x: float
    s: float
    e0: float
    first: float            # larger arrival abscissa z1 (NaN if missing)
    second: float           # smaller arrival abscissa z2 (NaN if missing or exterior)
    a_start: float          # A(x)
    a_first: float          # A(z1)
    a_second: float         # A(z2)
    half: float             # half period, inf for exterior levels
    M: float

    @property
    def closed(self) -> bool:
        return self.e0 < 0.0

    @property
    def period(self) -> float:
        return 2.0 * self.half

    def tau_j(self, j: int) -> float:
        if j < 1:
            raise ValueError("crossing index starts at 1")
        laps = (j - 1) // 2
        if laps and not self.closed:
            return math.nan
        arrival = self.a_first if j % 2 == 1 else self.a_second
        return self.a_start + arrival + (laps * self.period if laps else 0.0)


_COLS = ("x", "e0", "z1", "z2", "ax", "a1", "a2", "half", "M", "m", "status")


@dataclass
class ScheduleTable:
    s: np.ndarray
    data: np.ndarray

    def __getattr__(self, name):
        if name in _COLS:
            return self.data[:, _COLS.index(name)]
        raise AttributeError(name)

    def tau_j(self, j):
        laps = (j - 1) // 2
        arrival = self.a1 if j % 2 == 1 else self.a2
        out = self.ax + arrival
        if laps:
            out = out + 2.0 * laps * self.half
        return out

    def row(self, i) -> CrossingSchedule:
        d = self.data[i]
        return CrossingSchedule(x=d[0], s=self.s[i], e0=d[1], first=d[2], second=d[3],
                                a_start=d[4], a_first=d[5], a_second=d[6], half=d[7], M=d[8])


class CurveOrbitGeometry:
    """Departure/arrival geometry for one problem instance with alpha > 0."""

    def __init__(self, params: ProblemParams, tol: Tolerances = DEFAULT_TOLERANCES,
                 n_scan: int = N_SCAN):
        if not params.alpha > 0.0:
            raise DomainError("the connection geometry needs alpha > 0")
        self.params, self.tol = params, tol
        self.constants = derive_constants(params)
        self.left = CurveTable(GammaCurve.from_params(params, LEFT, tol), params.b, tol, n_scan)
        if params.is_symmetric:
            self.right = self.left
        else:
            self.right = CurveTable(GammaCurve.from_params(params, RIGHT, tol), params.b, tol, n_scan)
        self.snap = 1e-6 * self.constants.omega if params.is_symmetric else 0.0

    @property
    def x_t(self):
        return self.left.x_t

    @property
    def x_h(self):
        return self.left.x_h

    @property
    def x_t_right(self):
        return self.right.x_t

    @property
    def x_h_right(self):
        return self.right.x_h

    @property
    def warnings(self):
        out = list(self.left.warnings)
        if self.right is not self.left:
            out += self.right.warnings
        return out

    def domain(self, x) -> str:
        if abs(x - self.x_t) < 1e-6 * self.constants.omega:
            return TANGENCY
        if x < self.x_t:
            return DOMAIN_D1
        if x < self.x_h:
            return DOMAIN_D2
        return DOMAIN_D3

    def schedule_s(self, s_values) -> ScheduleTable:
        p, tol, r = self.params, self.tol, self.right
        s_values = np.ascontiguousarray(np.atleast_1d(np.asarray(s_values, dtype=float)))
        data = K.schedule_many(p.lam, p.b, p.p, p.c_left, p.c_right, p.alpha, s_values,
                               r.s_tab, r.e_tab, r.i_tab, r.s_inf, r.x_t, r.e_min, self.x_t,
                               self.snap, tol.shoot_rtol, tol.shoot_atol, tol.blowup_factor,
                               tol.quad_rtol, tol.quad_atol, tol.quad_limit)
        return ScheduleTable(s_values, data)

    def schedule(self, x) -> CrossingSchedule:
        if not x > 0.0:
            raise DomainError("departure abscissa must be positive")
        s = self.left.curve.s_of_x(x)
        row = self.schedule_s([s]).row(0)
        # report the requested abscissa rather than its round trip through s
        return CrossingSchedule(x=float(x), s=row.s, e0=row.e0, first=row.first,
                                second=row.second, a_start=row.a_start, a_first=row.a_first,
                                a_second=row.a_second, half=row.half, M=row.M)


def tangency_x(curve: GammaCurve, b: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Abscissa where the curve touches a closed orbit."""
    return CurveTable(curve, b, tol, n_scan=16).x_t


def homoclinic_crossing_x(curve: GammaCurve, b: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Positive abscissa where the curve meets the homoclinic level."""
    return CurveTable(curve, b, tol, n_scan=16).x_h


def partner_point(x, start: CurveTable, target: CurveTable):
    """Abscissae on ``target`` sharing the energy level of x on ``start``."""
    s = start.curve.s_of_x(x)
    e0 = start.energy_at(s)[2]
    if e0 >= 0.0:
        return []
    return target.level_points(e0)


def _closed_check(x, geometry):
    if x >= geometry.x_h:
        raise DomainError(f"x = {x!r} lies on an exterior level, which is not periodic")


def tau(x, geometry: CurveOrbitGeometry) -> float:
    """Period of the level through (x, y(x))."""
    _closed_check(x, geometry)
    return geometry.schedule(x).period


def tau_j(j: int, x, geometry: CurveOrbitGeometry) -> float:
    """Time to reach the arrival curve for the j-th time (NaN when it is never reached)."""
    if int(j) != j or j < 1:
        raise ValueError("j must be a positive integer")
    if j > 1:
        _closed_check(x, geometry)
    return geometry.schedule(x).tau_j(int(j))


def theta(k: int, x, geometry: CurveOrbitGeometry) -> float:
    """Selector continuous across the tangency: tau_{2k+2} before it, tau_{2k+1} after."""
    if k > 0:
        _closed_check(x, geometry)
    sc = geometry.schedule(x)
    return sc.tau_j(2 * k + 2) if x < geometry.x_t else sc.tau_j(2 * k + 1)


def theta_tilde(k: int, x, geometry: CurveOrbitGeometry) -> float:
    """The companion selector: tau_{2k+1} before the tangency, tau_{2k+2} after."""
    _closed_check(x, geometry)
    sc = geometry.schedule(x)
    return sc.tau_j(2 * k + 1) if x < geometry.x_t else sc.tau_j(2 * k + 2)
