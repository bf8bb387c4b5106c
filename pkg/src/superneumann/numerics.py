"""Quadrature, bracketing root finders and an IVP oracle.

The adaptive quadrature here works on arbitrary Python callables.  The hot
paths of the time maps use the specialised compiled kernels instead; this
module is the general-purpose (and test-facing) surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from ._kernels import GK_WG, GK_WK, GK_X


class QuadratureFailure(RuntimeError):
    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error!r})")
        self.estimate = estimate
        self.error = error


class NoSignChange(ValueError):
    pass


class StiffnessFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Central numerical tolerances; defaults are the normative ones."""

    quad_rtol: float = 1e-10
    quad_atol: float = 1e-12
    quad_limit: int = 200
    root_tol: float = 1e-13
    ivp_rtol: float = 1e-10
    ivp_atol: float = 1e-12
    shoot_rtol: float = 1e-12
    shoot_atol: float = 1e-14
    blowup_factor: float = 1e8
    event_tol: float = 1e-12
    # solution profiles are held to a drift budget relative to the energy level,
    # which the generic IVP defaults cannot meet near the homoclinic
    profile_rtol: float = 1e-13
    profile_atol: float = 1e-13


DEFAULT_TOLERANCES = Tolerances()

NONE = "none"
INVERSE_SQRT = "inverse-sqrt"


@dataclass(frozen=True)
class QuadratureSpec:
    rtol: float = 1e-10
    atol: float = 1e-12
    limit: int = 200
    left: str = NONE
    right: str = NONE
    tail_decay: float = 2.0  # f(x) ~ x**-tail_decay on infinite upper limits

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.limit < 1:
            raise ValueError("subdivision cap must be at least 1")
        for flag in (self.left, self.right):
            if flag not in (NONE, INVERSE_SQRT):
                raise ValueError(f"unknown singularity flag {flag!r}")
        if not self.tail_decay > 1.0:
            raise ValueError("tail_decay must exceed 1 for a convergent tail")


def _gk15(f, a, b):
    centr = 0.5 * (a + b)
    hl = 0.5 * (b - a)
    nodes = np.concatenate((centr - hl * GK_X[:7], [centr], centr + hl * GK_X[6::-1]))
    vals = np.array([f(x) for x in nodes], dtype=float)
    wk = np.concatenate((GK_WK[:7], [GK_WK[7]], GK_WK[6::-1]))
    wg = np.zeros(15)
    wg[[1, 3, 5]] = GK_WG[:3]
    wg[7] = GK_WG[3]
    wg[[13, 11, 9]] = GK_WG[:3]
    resk = wk @ vals
    resg = wg @ vals
    reskh = 0.5 * resk
    resasc = wk @ np.abs(vals - reskh) * abs(hl)
    resabs = wk @ np.abs(vals) * abs(hl)
    err = abs((resk - resg) * hl)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > 1e-300 / (50.0 * np.finfo(float).eps):
        err = max(50.0 * np.finfo(float).eps * resabs, err)
    return resk * hl, err


def _adapt(f, a, b, spec):
    value, err = _gk15(f, a, b)
    panels = [(err, a, b, value)]
    total, toterr = value, err
    while toterr > max(spec.atol, spec.rtol * abs(total)):
        if not math.isfinite(total):
            raise QuadratureFailure("non-finite integrand", total, toterr)
        if len(panels) >= spec.limit:
            raise QuadratureFailure("subdivision cap reached", total, toterr)
        i = max(range(len(panels)), key=lambda k: panels[k][0])
        _, lo, hi, _ = panels.pop(i)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        panels += [(e1, lo, mid, v1), (e2, mid, hi, v2)]
        total = math.fsum(p[3] for p in panels)
        toterr = sum(p[0] for p in panels)
    return total, toterr


def integrate(f: Callable[[float], float], a: float, b: float,
              spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral of f over [a, b] with optional inverse-sqrt endpoint flags.

    A flagged endpoint e is removed by u = e +/- w**2.  ``b = inf`` splits at a
    pivot and maps the tail with w = x**-(tail_decay - 1).
    """
    return integrate_with_error(f, a, b, spec)[0]


def integrate_with_error(f, a, b, spec: QuadratureSpec = QuadratureSpec()):
    if not a < b:
        if a == b:
            return 0.0, 0.0
        raise ValueError("integration limits must satisfy a < b")
    if math.isinf(b):
        pivot = max(2.0 * abs(a), a + 1.0)
        head = integrate_with_error(f, a, pivot, QuadratureSpec(
            spec.rtol, spec.atol, spec.limit, spec.left, NONE, spec.tail_decay))
        q = spec.tail_decay - 1.0

        def tail(w):
            if w == 0.0:
                return 0.0
            x = w ** (-1.0 / q)
            return f(x) * x / (q * w)

        t = _adapt(tail, 0.0, pivot ** (-q), spec)
        return head[0] + t[0], head[1] + t[1]
    if spec.left == INVERSE_SQRT and spec.right == INVERSE_SQRT:
        mid = 0.5 * (a + b)
        lhs = integrate_with_error(f, a, mid, QuadratureSpec(spec.rtol, spec.atol, spec.limit, INVERSE_SQRT, NONE))
        rhs = integrate_with_error(f, mid, b, QuadratureSpec(spec.rtol, spec.atol, spec.limit, NONE, INVERSE_SQRT))
        return lhs[0] + rhs[0], lhs[1] + rhs[1]
    if spec.left == INVERSE_SQRT:
        # GK nodes are interior, so w = 0 is never sampled
        return _adapt(lambda w: 2.0 * w * f(a + w * w), 0.0, math.sqrt(b - a), spec)
    if spec.right == INVERSE_SQRT:
        return _adapt(lambda w: 2.0 * w * f(b - w * w), 0.0, math.sqrt(b - a), spec)
    return _adapt(f, a, b, spec)


def find_root(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13) -> float:
    """Bracketed root of g on [lo, hi] (Brent: bisection safeguarded secant/IQI)."""
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if not (glo * ghi < 0.0):
        raise NoSignChange(f"no sign change on [{lo!r}, {hi!r}]: g = ({glo!r}, {ghi!r})")
    return optimize.brentq(g, lo, hi, xtol=tol, rtol=4.0 * np.finfo(float).eps, maxiter=500)


def scan_brackets(g: Callable[[float], float], lo: float, hi: float, n_grid: int):
    """Every consecutive cell of an ``n_grid``-point uniform grid on which g changes sign."""
    if not lo < hi:
        raise ValueError("scan interval must satisfy lo < hi")
    if n_grid < 2:
        raise ValueError("n_grid must be at least 2")
    xs = np.linspace(lo, hi, n_grid)
    return brackets_from_samples(xs, np.array([g(x) for x in xs], dtype=float))


def brackets_from_samples(xs, values):
    """Sign-change cells of sampled values; exact zeros at grid points yield a cell ending there."""
    out = []
    for i in range(len(xs) - 1):
        v0, v1 = values[i], values[i + 1]
        if not (math.isfinite(v0) and math.isfinite(v1)):
            continue
        if v0 == 0.0:
            if i == 0:
                out.append((xs[0], xs[1]))
            continue
        if v0 * v1 < 0.0 or v1 == 0.0:
            out.append((xs[i], xs[i + 1]))
    return out


END = "end"
EVENT = "event"
BLOWUP = "blow-up guard"


@dataclass
class IvpResult:
    t: np.ndarray
    y: np.ndarray  # shape (n_samples, n_state)
    terminal: np.ndarray
    nfev: int
    reason: str
    event_times: list = field(default_factory=list)
    sol: object = None


def integrate_ivp(field_fn, t0: float, t1: float, state0: Sequence[float],
                  blow_up_cap: float = 1e8, events: Sequence[Callable] = (),
                  terminal: bool = True, rtol: float = 1e-10, atol: float = 1e-12,
                  t_eval=None, dense: bool = False) -> IvpResult:
    """Adaptive DOP853 integration with event location and a blow-up guard.

    ``events`` are scalar functions g(t, state); an event fires where g
    changes sign.  With ``terminal`` the first event stops the integration.
    """
    if t0 == t1:
        raise ValueError("t0 and t1 must differ")
    evs = []
    for g in events:
        def ev(t, y, g=g):
            return g(t, y)
        ev.terminal = terminal
        ev.direction = getattr(g, "direction", 0)
        evs.append(ev)

    def guard(t, y):
        return blow_up_cap - abs(y[0])
    guard.terminal = True
    guard.direction = -1
    evs.append(guard)

    sol = solve_ivp(field_fn, (t0, t1), np.asarray(state0, dtype=float), method="DOP853",
                    rtol=rtol, atol=atol, events=evs, t_eval=t_eval,
                    dense_output=dense)
    if sol.status == -1:
        raise StiffnessFailure(sol.message)
    reason = END
    event_times = []
    for te in sol.t_events[:-1]:
        event_times.extend(float(x) for x in te)
    if sol.t_events[-1].size:
        reason = BLOWUP
    elif sol.status == 1:
        reason = EVENT
    event_times.sort()
    y = sol.y.T
    if sol.status == 1:
        terminal_state = (sol.y_events[-1][0] if reason == BLOWUP
                          else next(ye[0] for ye in sol.y_events[:-1] if ye.size))
    else:
        terminal_state = y[-1] if y.size else np.asarray(state0, dtype=float)
    return IvpResult(t=sol.t, y=y, terminal=np.asarray(terminal_state), nfev=int(sol.nfev),
                     reason=reason, event_times=event_times,
                     sol=sol.sol if dense else None)
