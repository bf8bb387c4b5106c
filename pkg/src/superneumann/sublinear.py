"""The negative-weight legs: blow-up threshold and the shooting curves.

On an interval where the weight equals -c the equation reads
``u'' = -lam*u + c*u^p``.  Starting from rest at height s, the state reached
after time alpha traces, as s runs over (0, s_inf), the graph of an increasing
function y(x) through the origin.  The left curve is that graph; the right
curve (arrival states on the final interval) is its reflection (x, -y(x)).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _kernels as K
from .numerics import DEFAULT_TOLERANCES, QuadratureFailure, StiffnessFailure, Tolerances

LEFT = "left"
RIGHT = "right"


class BlowUpError(ValueError):
    """Raised when a shot starts at or beyond the blow-up threshold."""


def _check(lam, c, p):
    if not lam < 0.0:
        raise ValueError("lambda must be negative")
    if not c > 0.0:
        raise ValueError("c must be positive")
    if not p > 1.0:
        raise ValueError("p must exceed 1")


def sublinear_energy(u, s, lam, c, p):
    """F(u; s), the squared velocity at height u of the shot started at s."""
    k = 2.0 * c / (p + 1.0)
    return -lam * (u * u - s * s) + k * (u ** (p + 1.0) - s ** (p + 1.0))


def blowup_time(s, lam, c, p, tol: Tolerances = DEFAULT_TOLERANCES):
    """Time for the shot from (s, 0) to escape to infinity."""
    if not s > 0.0:
        raise ValueError("s must be positive")
    _check(lam, c, p)
    value, err, status = K.blowup_time(lam, c, p, s, tol.quad_rtol, tol.quad_atol, tol.quad_limit)
    if status != 0:
        raise QuadratureFailure("blow-up time quadrature did not converge", value, err)
    return value


def s_infinity(alpha, lam, c, p, tol: Tolerances = DEFAULT_TOLERANCES):
    """The unique s whose blow-up time equals alpha (``inf`` for alpha = 0)."""
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0.0:
        return math.inf
    _check(lam, c, p)

    def g(log_s):
        return blowup_time(math.exp(log_s), lam, c, p, tol) - alpha

    # blowup_time decreases from +inf to 0, so an expanding search brackets the root
    lo = hi = 0.0
    while g(hi) > 0.0:
        hi += 2.0
    lo = hi - 2.0
    while g(lo) < 0.0:
        lo -= 2.0
    return math.exp(optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps))


@dataclass(frozen=True)
class Shot:
    """State at time alpha of the shot from (s, 0), with its s-derivatives."""

    s: float
    x: float
    y: float
    dx_ds: float
    dy_ds: float


def _energy_residual(shot, lam, c, p):
    k = 2.0 * c / (p + 1.0)
    f = sublinear_energy(shot.x, shot.s, lam, c, p)
    scale = max(1.0, shot.y ** 2, -lam * shot.x ** 2, k * shot.x ** (p + 1.0))
    return abs(shot.y ** 2 - f) / scale


def shoot(s, alpha, lam, c, p, tol: Tolerances = DEFAULT_TOLERANCES, s_inf=None) -> Shot:
    """Integrate the sublinear leg from (s, 0) over [0, alpha].

    The first integral y^2 = F(x; s) is checked on the result; a violation
    triggers one retry at tighter tolerances before giving up.
    """
    _check(lam, c, p)
    if not s > 0.0:
        raise ValueError("s must be positive")
    if alpha == 0.0:
        return Shot(s, s, 0.0, 1.0, 0.0)
    if s_inf is None:
        s_inf = s_infinity(alpha, lam, c, p, tol)
    if s >= s_inf:
        raise BlowUpError(f"s = {s!r} is beyond blow-up threshold {s_inf!r}")
    rtol, atol = tol.shoot_rtol, tol.shoot_atol * min(1.0, s)
    for attempt in range(2):
        x, y, dx, dy, status = K.shoot(lam, c, p, s, alpha, rtol, atol, tol.blowup_factor * max(1.0, s))
        if status == K.STATUS_BLOWUP:
            raise BlowUpError(f"s = {s!r} is beyond blow-up threshold (numerically)")
        if status != K.STATUS_OK:
            raise StiffnessFailure(f"step size underflow shooting from s = {s!r}")
        shot = Shot(s, x, y, dx, dy)
        if _energy_residual(shot, lam, c, p) <= 1e-8:
            return shot
        rtol, atol = rtol * 1e-2, atol * 1e-2
    raise StiffnessFailure(f"energy identity violated shooting from s = {s!r}")


class GammaCurve:
    """Evaluator for the shooting curve y(x) of one negative-weight leg.

    ``orientation`` LEFT gives the departure curve (x, y(x)); RIGHT gives the
    arrival curve (x, -y(x)).
    """

    def __init__(self, lam, p, c, alpha, orientation=LEFT, tol: Tolerances = DEFAULT_TOLERANCES):
        _check(lam, c, p)
        if not 0.0 <= alpha < 0.5:
            raise ValueError("alpha must lie in [0, 1/2)")
        if orientation not in (LEFT, RIGHT):
            raise ValueError(f"unknown orientation {orientation!r}")
        self.lam, self.p, self.c, self.alpha = float(lam), float(p), float(c), float(alpha)
        self.orientation = orientation
        self.tol = tol
        self.sign = 1.0 if orientation == LEFT else -1.0
        self.s_infinity = s_infinity(self.alpha, self.lam, self.c, self.p, tol)
        root = math.sqrt(-self.lam)
        self.slope0 = root * math.tanh(root * self.alpha)
        self._cosh = math.cosh(root * self.alpha)
        self.x_small = 1e-8 * max(1.0, (-self.lam / self.c) ** (1.0 / (self.p - 1.0)))
        self._seen = set()
        self._shot = functools.lru_cache(maxsize=None)(self._shoot_uncached)

    @classmethod
    def from_params(cls, params, side=LEFT, tol: Tolerances = DEFAULT_TOLERANCES):
        c = params.c_left if side == LEFT else params.c_right
        return cls(params.lam, params.p, c, params.alpha, side, tol)

    def reflected(self) -> "GammaCurve":
        return GammaCurve(self.lam, self.p, self.c, self.alpha,
                          RIGHT if self.orientation == LEFT else LEFT, self.tol)

    def __repr__(self):
        return (f"GammaCurve(lam={self.lam}, p={self.p}, c={self.c}, alpha={self.alpha}, "
                f"orientation={self.orientation!r})")

    def _shoot_uncached(self, s):
        shot = shoot(s, self.alpha, self.lam, self.c, self.p, self.tol, self.s_infinity)
        self._seen.add(s)
        return shot

    def shot(self, s) -> Shot:
        """The (memoized) shot from height s; y is always the left-curve value."""
        return self._shot(float(s))

    def samples(self):
        """Memoized shots sorted by s, as an (n, 3) array of (s, x, y).  For plotting only."""
        rows = []
        for s in sorted(self._seen):
            sh = self.shot(s)
            rows.append((s, sh.x, self.sign * sh.y))
        return np.array(rows, dtype=float).reshape(-1, 3)

    def shoot_grid(self, s_values):
        """Vectorised shots: returns arrays (x, y, dx/ds, dy/ds) with NaN past blow-up."""
        s_values = np.asarray(s_values, dtype=float)
        if self.alpha == 0.0:
            return s_values.copy(), np.zeros_like(s_values), np.ones_like(s_values), np.zeros_like(s_values)
        tol = self.tol
        out, status = K.shoot_many(self.lam, self.c, self.p, s_values, self.alpha, tol.shoot_rtol,
                                   tol.shoot_atol * min(1.0, float(s_values.min(initial=1.0))),
                                   tol.blowup_factor * max(1.0, float(s_values.max(initial=1.0))))
        out = out.copy()
        out[status != K.STATUS_OK] = np.nan
        return out[:, 0], self.sign * out[:, 1], out[:, 2], self.sign * out[:, 3]

    def s_of_x(self, x) -> float:
        """Invert the increasing map s -> x(s) by safeguarded Newton."""
        if not x > 0.0:
            raise ValueError("x must be positive")
        if self.alpha == 0.0:
            return float(x)
        s_inf = self.s_infinity
        lo, hi = 0.0, s_inf
        s = min(x / self._cosh, 0.5 * s_inf)
        for _ in range(200):
            try:
                sh = self.shot(s)
                r = sh.x - x
            except BlowUpError:
                sh, r = None, math.inf
            if abs(r) <= 1e-14 * x:
                return s
            if r < 0.0:
                lo = s
            else:
                hi = s
            if hi - lo <= 4.0 * np.finfo(float).eps * hi:
                return s
            step = r / sh.dx_ds if sh is not None and sh.dx_ds > 0.0 else math.nan
            nxt = s - step
            if not (lo < nxt < hi) or not math.isfinite(nxt):
                nxt = 0.5 * (lo + hi) if lo > 0.0 else 0.5 * hi
            elif abs(step) <= 2.0 * np.finfo(float).eps * s:
                return nxt
            s = nxt
        raise AssertionError(f"inversion of x(s) failed to converge at x = {x!r}")

    def y(self, x) -> float:
        if x < 0.0:
            raise ValueError("x must be nonnegative")
        if x < self.x_small:
            return self.sign * self.slope0 * x
        return self.sign * self.shot(self.s_of_x(x)).y

    def dy_dx(self, x) -> float:
        if not x > 0.0:
            raise ValueError("x must be positive")
        if x < self.x_small:
            return self.sign * self.slope0
        sh = self.shot(self.s_of_x(x))
        return self.sign * sh.dy_ds / sh.dx_ds


def eval_y(curve: GammaCurve, x: float) -> float:
    """Height of the curve above (left) or below (right) the abscissa x."""
    return curve.y(x)


def eval_dy_dx(curve: GammaCurve, x: float) -> float:
    """Slope of the curve at x, from the variational equation."""
    return curve.dy_dx(x)
