"""Analytic reference solutions.

Two families are available: the explicit dark solitons of the contact
(``dirac``) interaction and the small-amplitude KdV ansatz that any kernel
approaches as the momentum goes to zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .fields import ComplexField, HydroField
from .grid import Grid, differentiate, quadrature

log = logging.getLogger(__name__)

__all__ = [
    "GpSoliton",
    "KdvAnsatz",
    "gp_soliton",
    "gp_soliton_invariants",
    "gp_speed_for_momentum",
    "kdv_ansatz",
    "kdv_predictions",
    "kdv_epsilon_for_momentum",
    "kdv_profile_residual",
    "kdv_A",
]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GpSoliton:
    """Contact-interaction soliton of speed ``c``.

    ``hydro`` is ``None`` for the black soliton (``c = 0``), whose modulus
    vanishes at the origin.
    """

    c: float
    complex: ComplexField
    hydro: Optional[HydroField]

    @property
    def is_hydro(self) -> bool:
        return self.hydro is not None


def _check_speed(c: float, allow_zero: bool) -> None:
    lo_ok = c >= 0 if allow_zero else c > 0
    if not (lo_ok and c < SQRT2):
        raise ValueError(f"speed {c} outside {'[0' if allow_zero else '(0'}, sqrt(2))")


def _gp_parts(c: float, x):
    a = math.sqrt((2.0 - c * c) / 2.0)
    k = math.sqrt(2.0 - c * c) / 2.0
    t = np.tanh(k * x)
    s2 = 1.0 / np.cosh(k * x) ** 2
    return a, k, t, s2


def gp_soliton(c: float, grid: Grid, shift: float = 0.0) -> GpSoliton:
    """Sample ``u_c(x) = a tanh(k x) - i c/sqrt(2)`` and its hydrodynamic form."""
    _check_speed(c, allow_zero=True)
    x = grid.x - shift
    a, k, t, s2 = _gp_parts(c, x)
    u = a * t - 1j * c / SQRT2
    if c == 0.0:
        return GpSoliton(c, ComplexField(grid, u, math.pi), None)
    eta = a * a * s2
    w = c * eta / (2.0 * (1.0 - eta))
    # theta stays in (-pi, 0) because Im u < 0, so the jump is the atan2 difference
    ends = np.array([-0.5 * grid.length, 0.5 * grid.length]) - shift
    th = -np.arctan2(c / SQRT2, a * np.tanh(k * ends))
    jump = float(th[1] - th[0])
    return GpSoliton(c, ComplexField(grid, u, jump), HydroField(grid, eta, w))


@lru_cache(maxsize=256)
def gp_soliton_invariants(c: float) -> tuple[float, float]:
    """Energy and momentum of ``u_c`` by adaptive quadrature on the half line."""
    _check_speed(c, allow_zero=False)
    a = math.sqrt((2.0 - c * c) / 2.0)
    k = math.sqrt(2.0 - c * c) / 2.0

    def sech2(x):
        return 1.0 / math.cosh(k * x) ** 2 if k * x < 350 else 0.0

    def e_density(x):
        s2 = sech2(x)
        eta = a * a * s2
        return 0.5 * (a * k * s2) ** 2 + 0.25 * eta * eta

    def p_density(x):
        s2 = sech2(x)
        eta = a * a * s2
        # |u|^2 written without the cancellation in 1 - eta near a slow core
        mod2 = a * a * math.tanh(k * x) ** 2 + 0.5 * c * c
        return 0.25 * c * eta * eta / mod2

    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
    # the momentum density has a Lorentzian core of width ~c; split geometrically around it
    core = min(c / (SQRT2 * a * k), 1.0 / k)
    edges = [0.0, core]
    while edges[-1] < 40.0 / k:
        edges.append(min(10.0 * edges[-1], edges[-1] + 1.0 / k))

    def half_line(fn):
        total, err = 0.0, 0.0
        for lo, hi in zip(edges, edges[1:] + [np.inf]):
            v, e = integrate.quad(fn, lo, hi, **opts)
            total, err = total + v, err + e
        return total, err

    E_half, e_err = half_line(e_density)
    p_half, p_err = half_line(p_density)
    if max(e_err, p_err) > 1e-10:
        log.warning("quadrature error estimate above 1e-10 at c=%g: %g, %g", c, e_err, p_err)
    return 2.0 * E_half, 2.0 * p_half


def gp_speed_for_momentum(q: float, c_min: float = 1e-6) -> float:
    """Speed whose soliton momentum is nearest ``q`` within ``[c_min, sqrt(2))``."""
    c_max = SQRT2 * (1.0 - 1e-12)
    if q <= 0:
        return c_max
    p_lo = gp_soliton_invariants(c_min)[1]
    if q >= p_lo:
        return c_min
    return float(optimize.brentq(lambda c: gp_soliton_invariants(c)[1] - q, c_min, c_max, xtol=1e-14))


@dataclass(frozen=True)
class KdvAnsatz:
    epsilon: float
    omega: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


def kdv_A(x, omega: float):
    """Profile ``A(x) = -1/4 sech^2(x / (2 omega))``."""
    return -0.25 / np.cosh(np.asarray(x) / (2.0 * omega)) ** 2


def kdv_ansatz(a: KdvAnsatz, grid: Grid, check_length: bool = True) -> HydroField:
    """``rho = 1 + eps^2 A(eps x)``, ``w = eps^2 phi'(eps x)`` with ``phi' = -sqrt(2) A``."""
    if a.epsilon <= 0:
        raise ValueError("kdv_ansatz needs epsilon > 0")
    if check_length and grid.length < 40.0 * a.omega / a.epsilon:
        raise ValueError(
            f"box length {grid.length} below 40*omega/epsilon = {40 * a.omega / a.epsilon:.4g}"
        )
    e2 = a.epsilon**2
    A = kdv_A(a.epsilon * grid.x, a.omega)
    rho = 1.0 + e2 * A
    return HydroField(grid, 1.0 - rho**2, -SQRT2 * e2 * A)


def kdv_predictions(a: KdvAnsatz) -> tuple[float, float]:
    """Predicted energy (up to its sixth-order remainder) and exact momentum."""
    e, om = a.epsilon, a.omega
    E = om / 3.0 * (e**3 - e**5 / 4.0)
    p = SQRT2 * om / 6.0 * (e**3 - e**5 / 10.0)
    return E, p


def kdv_epsilon_for_momentum(q: float, omega: float) -> float:
    """Invert the momentum prediction for ``epsilon`` in ``(0, 1]`` by bisection."""
    if q <= 0:
        raise ValueError("momentum must be positive")
    p1 = kdv_predictions(KdvAnsatz(1.0, omega))[1]
    if q >= p1:
        log.warning("q=%g beyond the KdV range (max %g); using epsilon=1", q, p1)
        return 1.0
    return float(optimize.bisect(lambda e: kdv_predictions(KdvAnsatz(e, omega))[1] - q,
                                 0.0, 1.0, xtol=1e-15))


def kdv_profile_residual(omega: float, grid: Grid, amplitude: float = 1.0) -> float:
    """L2 norm of ``omega^2 A'' - 6 A^2 - A`` for ``amplitude * A``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    A = amplitude * kdv_A(grid.x, omega)
    r = omega**2 * differentiate(grid, A, 2) - 6.0 * A**2 - A
    return float(math.sqrt(quadrature(grid, r**2)))
