"""Problem parameters and closed-form constants.

The boundary value problem is

    -u'' = lam*u + a(t)*u^p on (0, 1),   u'(0) = u'(1) = 0,

with a(t) = -c_left on (0, alpha), b on [alpha, 1 - alpha] and -c_right on
(1 - alpha, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """Raised when a problem instance violates its admissible ranges."""


@dataclass(frozen=True)
class ProblemParams:
    lam: float
    p: float
    b: float
    c_left: float
    c_right: float
    alpha: float

    def __post_init__(self):
        for name in ("lam", "p", "b", "c_left", "c_right", "alpha"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not self.lam < 0.0:
            raise ParameterError(f"lambda must be negative, got {self.lam}")
        if not self.p > 1.0:
            raise ParameterError(f"p must exceed 1, got {self.p}")
        if not self.b > 0.0:
            raise ParameterError(f"b must be positive, got {self.b}")
        if not (self.c_left > 0.0 and self.c_right > 0.0):
            raise ParameterError("negative-weight magnitudes c_left, c_right must be positive")
        if not 0.0 <= self.alpha < 0.5:
            raise ParameterError(f"alpha must lie in [0, 1/2), got {self.alpha}")

    @classmethod
    def symmetric(cls, lam, p=3.0, b=1.0, c=1.0, alpha=0.0) -> "ProblemParams":
        return cls(lam=lam, p=p, b=b, c_left=c, c_right=c, alpha=alpha)

    @property
    def is_symmetric(self) -> bool:
        return self.c_left == self.c_right

    def with_alpha(self, alpha: float) -> "ProblemParams":
        return replace(self, alpha=alpha)

    def weight(self, t: float) -> float:
        """Piecewise-constant weight a(t); interfaces belong to the positive part."""
        if t < self.alpha:
            return -self.c_left
        if t > 1.0 - self.alpha:
            return -self.c_right
        return self.b


@dataclass(frozen=True)
class DerivedConstants:
    omega: float
    u_h: float
    omega_energy: float
    linear_half_period: float


def derive_constants(params: ProblemParams) -> DerivedConstants:
    lam, p, b = params.lam, params.p, params.b
    omega = (-lam / b) ** (1.0 / (p - 1.0))
    u_h = omega * ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    omega_energy = lam * omega**2 + (2.0 * b / (p + 1.0)) * omega ** (p + 1.0)
    half = math.pi / math.sqrt(lam * (1.0 - p))
    return DerivedConstants(omega=omega, u_h=u_h, omega_energy=omega_energy, linear_half_period=half)


def lambda_threshold(n: int, p: float) -> float:
    """Resonance value -(n*pi)^2/(p-1)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not p > 1.0:
        raise ParameterError("p must exceed 1")
    return -((n * math.pi) ** 2) / (p - 1.0)


def band_index(lam: float, p: float) -> int:
    """The n with lam in [lambda_{n+1}, lambda_n) (left endpoint closed)."""
    if not lam < 0.0:
        raise ParameterError("lambda must be negative")
    n = int(math.floor(math.sqrt(lam * (1.0 - p)) / math.pi))
    # settle floating point ties against the thresholds themselves
    while n > 0 and lam >= lambda_threshold(n, p):
        n -= 1
    while lam < lambda_threshold(n + 1, p):
        n += 1
    return n
