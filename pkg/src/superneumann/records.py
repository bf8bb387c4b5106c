"""Solution records and RK profile construction.

A profile is glued from up to three legs: the left negative-weight leg
integrated backwards from (x, y(x)) at t = alpha, the positive-weight middle
leg, and the right negative-weight leg.  Every record also carries the
residuals of an independent forward shot over the whole interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ProblemParams
from .numerics import DEFAULT_TOLERANCES, Tolerances, integrate_ivp

DOMAIN_D1 = "D1"
DOMAIN_D2 = "D2"
DOMAIN_D3 = "D3"
TANGENCY = "tangency"
CENTER = "center"

NEUMANN_TOL = 1e-6
ORACLE_TOL = 1e-5
DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class Profile:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def as_rows(self):
        return np.column_stack([self.t, self.u, self.v])


@dataclass(frozen=True)
class Residuals:
    """All values are relative to max|u| except the energy drift (relative to max(1, |E0|))."""

    neumann_left: float
    neumann_right: float
    interface: float
    energy_drift: float
    oracle_terminal: float
    oracle_mismatch: float
    min_u: float
    crossings: Optional[int] = None
    # rounding of u(0) alone moves the oracle by this much (set when the oracle fails)
    oracle_floor: Optional[float] = None

    def failures(self) -> list[str]:
        """Names of the checks that did not pass (NaN counts as a failure)."""
        limits = {"neumann_left": NEUMANN_TOL, "neumann_right": NEUMANN_TOL, "interface": NEUMANN_TOL,
                  "energy_drift": DRIFT_TOL, "oracle_terminal": ORACLE_TOL, "oracle_mismatch": ORACLE_TOL}
        out = [k for k, lim in limits.items() if not getattr(self, k) <= lim]
        if not self.min_u > 0.0:
            out.append("min_u")
        return out

    def passes(self) -> bool:
        return not self.failures()

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SolutionRecord:
    x: float
    j: int
    domain: str
    alpha: float
    energy: float
    family: Optional[str] = None
    profile: Optional[Profile] = field(default=None, repr=False)
    residuals: Optional[Residuals] = None

    @property
    def validated(self) -> bool:
        return self.residuals is not None and self.residuals.passes()

    def summary(self):
        out = {"x": self.x, "j": self.j, "domain": self.domain, "alpha": self.alpha,
               "energy": self.energy, "family": self.family}
        if self.residuals is not None:
            out["residuals"] = self.residuals.as_dict()
            out["validated"] = self.validated
        return out


def _field(lam, weight, p):
    def f(t, y):
        u = y[0]
        return [y[1], -lam * u - weight * u * abs(u) ** (p - 1.0)]
    return f


def profile_grid(alpha, n):
    """Uniform grid on [0, 1] with the interfaces forced in."""
    t = np.linspace(0.0, 1.0, n)
    if alpha > 0.0:
        t = np.union1d(t, [alpha, 1.0 - alpha])
    return t


def leg(lam, weight, p, t0, t1, state, tol: Tolerances, events=(), terminal=False):
    """One RK leg with dense output; blow-up guard scaled to the initial state."""
    cap = tol.blowup_factor * max(1.0, abs(state[0]))
    return integrate_ivp(_field(lam, weight, p), t0, t1, state, blow_up_cap=cap, events=events,
                         terminal=terminal, rtol=tol.profile_rtol, atol=tol.profile_atol, dense=True)


def single_shot(params: ProblemParams, u0: float, tol: Tolerances = DEFAULT_TOLERANCES, v0: float = 0.0):
    """Forward shot from (u0, v0) across the piecewise weight; returns the state at t = 1.

    The integration restarts at each weight discontinuity so the RK error
    control never straddles a jump.
    """
    a = params.alpha
    pieces = [(0.0, a, -params.c_left), (a, 1.0 - a, params.b), (1.0 - a, 1.0, -params.c_right)]
    state = np.array([u0, v0])
    for t0, t1, w in pieces:
        if t1 <= t0:
            continue
        res = leg(params.lam, w, params.p, t0, t1, state, tol)
        if res.reason != "end":
            return np.array([math.nan, math.nan])
        state = res.terminal
    return state


def _energy(u, v, lam, b, p):
    return v * v + lam * u * u + (2.0 * b / (p + 1.0)) * np.abs(u) ** (p + 1.0)


def _drift(u, v, params: ProblemParams, e0):
    e = _energy(u, v, params.lam, params.b, params.p)
    return float(np.max(np.abs(e - e0))) / max(1.0, abs(e0))


def _oracle(params, u, v, tol):
    scale = float(np.max(np.abs(u)))
    end = single_shot(params, float(u[0]), tol)
    return abs(end[1]) / scale, abs(end[0] - u[-1]) / scale


def oracle_floor(params, u0, v0, scale, tol: Tolerances = DEFAULT_TOLERANCES):
    """Oracle change explained by the profile's own start: one rounding of u(0)
    plus its residual slope v(0), relative to max|u|.

    Values near or above the oracle tolerance mean the full-interval shot
    cannot resolve the solution at the accuracy the profile carries.
    """
    def slope_gain(shift):
        for rel in (1e-7, 1e-9, 1e-11):
            h = rel * max(abs(u0), 1.0)
            hi = single_shot(params, shift(h)[0], tol, shift(h)[1])[1]
            lo = single_shot(params, shift(-h)[0], tol, shift(-h)[1])[1]
            if math.isfinite(hi) and math.isfinite(lo):
                return abs(hi - lo) / (2.0 * h)
        return math.inf

    du = slope_gain(lambda h: (u0 + h, 0.0))
    dv = slope_gain(lambda h: (u0, h))
    return (du * abs(u0) * np.finfo(float).eps + dv * abs(v0)) / scale


def build_alpha0_record(x, j, domain, params: ProblemParams, grid_size=1001,
                        tol: Tolerances = DEFAULT_TOLERANCES) -> SolutionRecord:
    """Record for the problem without negative-weight intervals, started at (x, 0)."""
    lam, b, p = params.lam, params.b, params.p
    t = profile_grid(0.0, grid_size)
    e0 = float(_energy(x, 0.0, lam, b, p))
    res = leg(lam, b, p, 0.0, 1.0, [x, 0.0], tol)
    y = res.sol(t)
    u, v = y[0], y[1]
    scale = float(np.max(np.abs(u)))
    term, mism = _oracle(params, u, v, tol)
    residuals = Residuals(neumann_left=abs(v[0]) / scale, neumann_right=abs(v[-1]) / scale,
                          interface=0.0, energy_drift=_drift(u, v, params, e0),
                          oracle_terminal=term, oracle_mismatch=mism, min_u=float(np.min(u)),
                          crossings=None, oracle_floor=_floor_if_failed(params, u, v, term, mism, tol))
    return SolutionRecord(x=float(x), j=int(j), domain=domain, alpha=0.0, energy=e0,
                          profile=Profile(t, u, v), residuals=residuals)


def glue_profile(params: ProblemParams, x, y, s, t_grid, tol: Tolerances, center_events=()):
    """Three-leg profile through the departure state (x, y) at t = alpha.

    The left leg runs forward from its shooting height (s, 0), so u'(0) = 0
    holds exactly; integrating it backwards from (x, y) instead would turn
    the last digits of y into a slope at t = 0, which the forward flow
    amplifies by orders of magnitude across the middle interval.  Returns
    (Profile, middle-leg IvpResult, seam), where seam is the relative gap
    between the left leg's end and (x, y).
    """
    a, lam, p = params.alpha, params.lam, params.p
    left = leg(lam, -params.c_left, p, 0.0, a, [s, 0.0], tol)
    mid = leg(lam, params.b, p, a, 1.0 - a, [x, y], tol, events=center_events)
    right = leg(lam, -params.c_right, p, 1.0 - a, 1.0, mid.terminal, tol)
    for r in (left, mid, right):
        if r.reason != "end":
            raise FloatingPointError("profile leg hit the blow-up guard")
    u = np.empty_like(t_grid)
    v = np.empty_like(t_grid)
    masks = [(t_grid < a, left), ((t_grid >= a) & (t_grid < 1.0 - a), mid), (t_grid >= 1.0 - a, right)]
    for mask, r in masks:
        if mask.any():
            yy = r.sol(t_grid[mask])
            u[mask], v[mask] = yy[0], yy[1]
    # leg endpoints are exact; dense output only fills the interior
    u[0], v[0] = s, 0.0
    u[-1], v[-1] = right.terminal
    seam = max(abs(left.terminal[0] - x), abs(left.terminal[1] - y))
    return Profile(t_grid, u, v), mid, seam


def residuals_for(params: ProblemParams, profile: Profile, e0, landing_gap, crossings, tol):
    u, v = profile.u, profile.v
    scale = float(np.max(np.abs(u)))
    a = params.alpha
    inner = (profile.t >= a) & (profile.t <= 1.0 - a)
    term, mism = _oracle(params, u, v, tol)
    return Residuals(neumann_left=abs(v[0]) / scale, neumann_right=abs(v[-1]) / scale,
                     interface=landing_gap / scale,
                     energy_drift=_drift(u[inner], v[inner], params, e0),
                     oracle_terminal=term, oracle_mismatch=mism, min_u=float(np.min(u)),
                     crossings=crossings, oracle_floor=_floor_if_failed(params, u, v, term, mism, tol))


def _floor_if_failed(params, u, v, term, mism, tol):
    if term <= ORACLE_TOL and mism <= ORACLE_TOL:
        return None
    return oracle_floor(params, float(u[0]), float(v[0]), float(np.max(np.abs(u))), tol)
