"""Phase portrait of the positive-weight equation ``u'' = -lam*u - b*u^p``.

Orbits are level sets of E(u, v) = v^2 + lam*u^2 + (2b/(p+1)) u^(p+1).  The
centre (Omega, 0) is surrounded by closed orbits up to the homoclinic level
E = 0, whose rightmost point is u_h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import ProblemParams, band_index, derive_constants
from .numerics import DEFAULT_TOLERANCES, QuadratureFailure, Tolerances, find_root
from .records import CENTER, DOMAIN_D1, DOMAIN_D2, SolutionRecord, build_alpha0_record

CLOSED = "closed"
HOMOCLINIC = "homoclinic"
EXTERIOR = "exterior"
CENTRE = "center"

# below this relative distance from Omega the linearised half period is used
_BLEND = 1e-4


def energy(u, v, lam, b, p):
    return v * v + lam * u * u + (2.0 * b / (p + 1.0)) * abs(u) ** (p + 1.0)


def homoclinic_v(u, lam, b, p):
    """Upper branch of the zero level, defined on [0, u_h]."""
    val = -lam * u * u - (2.0 * b / (p + 1.0)) * u ** (p + 1.0)
    return math.sqrt(max(val, 0.0))


def orbit_q(e0, u, lam, b, p):
    """Q(u) = E0 - lam*u^2 - (2b/(p+1)) u^(p+1), the squared speed on the level."""
    return e0 - lam * u * u - (2.0 * b / (p + 1.0)) * u ** (p + 1.0)


@dataclass(frozen=True)
class OrbitSlice:
    e0: float
    m: Optional[float]
    M: float
    classification: str
    lam: float
    b: float
    p: float

    def q(self, u):
        return orbit_q(self.e0, u, self.lam, self.b, self.p)

    @property
    def half_period(self) -> float:
        """Time from m to M (infinite unless the orbit is closed or the centre)."""
        if self.classification == CENTRE:
            return math.pi / math.sqrt(self.lam * (1.0 - self.p))
        if self.classification != CLOSED:
            return math.inf
        value, err, status = K.half_lap(self.lam, self.b, self.p, self.m, self.M,
                                        DEFAULT_TOLERANCES.quad_rtol, DEFAULT_TOLERANCES.quad_atol,
                                        DEFAULT_TOLERANCES.quad_limit)
        if status != 0:
            raise QuadratureFailure("half period did not converge", value, err)
        return value


def turning_points(e0, lam, b, p) -> OrbitSlice:
    omega = (-lam / b) ** (1.0 / (p - 1.0))
    e_center = energy(omega, 0.0, lam, b, p)
    if e0 < e_center:
        raise ValueError(f"empty orbit: level {e0!r} lies below the centre energy {e_center!r}")
    if e0 == e_center:
        return OrbitSlice(e0, omega, omega, CENTRE, lam, b, p)
    big_m = K.turning_max(lam, b, p, e0)
    if e0 < 0.0:
        return OrbitSlice(e0, K.turning_min(lam, b, p, e0), big_m, CLOSED, lam, b, p)
    return OrbitSlice(e0, None, big_m, HOMOCLINIC if e0 == 0.0 else EXTERIOR, lam, b, p)


def _to_max(sl: OrbitSlice, z, tol: Tolerances):
    m = sl.m if sl.classification == CLOSED else 0.0
    half = sl.half_period if sl.classification == CLOSED else math.inf
    value, err, status = K.arc_to_max(sl.lam, sl.b, sl.p, m, sl.M, half, z,
                                      tol.quad_rtol, tol.quad_atol, tol.quad_limit)
    if status != 0:
        raise QuadratureFailure("arc time did not converge", value, err)
    return value


def arc_time(sl: OrbitSlice, u_from, u_to, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Traversal time of the level between two abscissae, integral of du/sqrt(Q)."""
    lo = sl.m if sl.m is not None else 0.0
    slack = 1e-12 * max(1.0, sl.M)
    if not (lo - slack <= u_from <= u_to <= sl.M + slack):
        raise ValueError(f"arc [{u_from!r}, {u_to!r}] is not inside the slice [{lo!r}, {sl.M!r}]")
    if u_from == u_to:
        return 0.0
    if sl.classification == CENTRE:
        return sl.half_period
    if sl.m is None and u_from <= 0.0:
        return math.inf
    return _to_max(sl, max(u_from, lo), tol) - _to_max(sl, min(u_to, sl.M), tol)


class SuperlinearMaps:
    """Time maps of the problem without negative-weight intervals."""

    def __init__(self, lam, b, p, tol: Tolerances = DEFAULT_TOLERANCES):
        self.lam, self.b, self.p, self.tol = float(lam), float(b), float(p), tol
        self.omega = (-lam / b) ** (1.0 / (p - 1.0))
        self.u_h = self.omega * ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
        self.center_half = math.pi / math.sqrt(lam * (1.0 - p))

    def opposite(self, x):
        """The other turning abscissa of the level through (x, 0)."""
        sl = turning_points(energy(x, 0.0, self.lam, self.b, self.p), self.lam, self.b, self.p)
        return sl.M if x < self.omega else sl.m

    def _half(self, x):
        lam, b, p = self.lam, self.b, self.p
        e0 = energy(x, 0.0, lam, b, p)
        # keep the known turning point exact and solve only for the other one
        if x < self.omega:
            m, big_m = x, K.turning_max(lam, b, p, e0)
        else:
            m, big_m = K.turning_min(lam, b, p, e0), x
        value, err, status = K.half_lap(lam, b, p, m, big_m, self.tol.quad_rtol,
                                        self.tol.quad_atol, self.tol.quad_limit)
        if status != 0:
            raise QuadratureFailure("half period did not converge", value, err)
        return value

    def t1(self, x) -> float:
        if not 0.0 < x < self.u_h:
            raise ValueError(f"x = {x!r} is outside (0, u_h = {self.u_h!r})")
        d = (x - self.omega) / self.omega
        if d == 0.0:
            return self.center_half
        if abs(d) <= _BLEND:
            edge = self._half(self.omega * (1.0 + math.copysign(_BLEND, d)))
            w = abs(d) / _BLEND
            return (1.0 - w) * self.center_half + w * edge
        return self._half(x)

    def tn(self, n, x) -> float:
        if int(n) != n or n < 1:
            raise ValueError("n must be a positive integer")
        return n * self.t1(x)


def t1_map(x, lam, b, p, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return SuperlinearMaps(lam, b, p, tol).t1(x)


def tn_map(n, x, lam, b, p, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return SuperlinearMaps(lam, b, p, tol).tn(n, x)


def _root_towards(g, inner, edge_of, n_max=80):
    """Root of g between ``inner`` (g < 0) and an endpoint approached by ``edge_of``."""
    for k in range(1, n_max):
        outer = edge_of(k)
        if g(outer) > 0.0:
            return find_root(g, min(inner, outer), max(inner, outer))
    raise RuntimeError("time map did not exceed the target near the domain edge")


def alpha0_roots(lam, b, p, tol: Tolerances = DEFAULT_TOLERANCES):
    """Roots (j, x) of T_j(x) = 1, two per j = 1..n, ordered by x."""
    maps = SuperlinearMaps(lam, b, p, tol)
    n = band_index(lam, p)
    omega, u_h = maps.omega, maps.u_h
    out = []
    for j in range(1, n + 1):
        def g(x, j=j):
            return maps.tn(j, x) - 1.0

        if not g(omega) < 0.0:
            # lam sits exactly on a threshold for this j; the centre is the only crossing
            continue
        out.append((j, _root_towards(g, omega, lambda k: omega * 2.0 ** -k)))
        out.append((j, _root_towards(g, omega, lambda k: u_h - (u_h - omega) * 2.0 ** -k)))
    return sorted(out, key=lambda r: r[1])


def solve_alpha0(params: ProblemParams, grid_size: int = 1001,
                 tol: Tolerances = DEFAULT_TOLERANCES) -> list[SolutionRecord]:
    """All positive solutions without negative-weight intervals.

    The constant Omega plus two solutions per j <= n, where n is the band of
    lambda; each carries an RK profile with its residuals.
    """
    if params.alpha != 0.0:
        raise ValueError("solve_alpha0 requires alpha = 0")
    lam, b, p = params.lam, params.b, params.p
    omega = derive_constants(params).omega
    records = [build_alpha0_record(omega, 0, CENTER, params, grid_size, tol)]
    for j, x in alpha0_roots(lam, b, p, tol):
        tag = DOMAIN_D1 if x < omega else DOMAIN_D2
        records.append(build_alpha0_record(x, j, tag, params, grid_size, tol))
    records.sort(key=lambda r: r.x)
    return records


def sample_orbit(sl: OrbitSlice, n: int = 400):
    """Closed polyline (u, v) of the level, traversed clockwise from its top-left."""
    if sl.classification == CENTRE:
        return np.array([[sl.M, 0.0]])
    lo = sl.m if sl.m is not None else 0.0
    theta = np.linspace(0.0, math.pi, n)
    u = lo + (sl.M - lo) * 0.5 * (1.0 - np.cos(theta))
    v = np.sqrt(np.maximum(sl.q(u), 0.0))
    v[-1] = 0.0
    if sl.m is not None:
        v[0] = 0.0
    upper = np.column_stack([u, v])
    lower = np.column_stack([u[::-1], -v[::-1]])[1:]
    return np.vstack([upper, lower])
