"""Hydrodynamic and complex field representations with their functionals.

A hydrodynamic field stores ``eta = 1 - |u|^2`` and ``w = theta'``. Both decay
at the box edges even when ``u`` picks up a net phase, so they are periodic on
the grid. The complex form carries that net phase as ``phase_jump`` and all
derivatives of ``u`` are taken in the untwisted frame
``v = u * exp(-i phase_jump x / L)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import Grid, convolve_with_symbol, differentiate, quadrature

log = logging.getLogger(__name__)

__all__ = [
    "HydroField",
    "ComplexField",
    "EnergyParts",
    "AprioriReport",
    "boundary_decay",
    "reconstruct_complex",
    "hydro_from_complex",
    "energy_parts",
    "energy",
    "momentum",
    "complex_derivative",
    "energy_complex",
    "momentum_complex",
    "scale_phase",
    "apriori_check",
    "KAPPA_TILDE",
]

KAPPA_TILDE = 1.5
EDGE_FRACTION = 0.05
EDGE_TOL = 1e-8


@dataclass(frozen=True)
class HydroField:
    grid: Grid
    eta: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        eta = np.asarray(self.eta, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if eta.shape != (n,) or w.shape != (n,):
            raise ValueError(f"eta and w must have {n} samples")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "w", w)

    @property
    def rho(self) -> np.ndarray:
        return np.sqrt(1.0 - self.eta)

    def require_nonvanishing(self) -> None:
        m = float(np.max(self.eta))
        if not m < 1.0:
            raise ValueError(f"eta reaches {m} >= 1; field leaves the nonvanishing space")


@dataclass(frozen=True)
class ComplexField:
    grid: Grid
    values: np.ndarray
    phase_jump: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"values must have {self.grid.n_points} samples")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "phase_jump", float(self.phase_jump))

    @property
    def bloch_shift(self) -> float:
        return self.phase_jump / self.grid.length

    def untwisted(self) -> np.ndarray:
        return self.values * np.exp(-1j * self.bloch_shift * self.grid.x)

    def edge_report(self) -> tuple[float, float]:
        """Worst ``| |u| - 1 |`` on the edges and the twisted periodicity mismatch."""
        n_edge = max(1, int(EDGE_FRACTION * self.grid.n_points))
        mod = np.abs(self.values)
        dev = max(np.max(np.abs(mod[:n_edge] - 1)), np.max(np.abs(mod[-n_edge:] - 1)))
        v = self.untwisted()
        # the untwisted field should continue smoothly across the edge
        step = np.abs(v[0] - v[-1])
        typical = np.max(np.abs(np.diff(v[:n_edge]))) if n_edge > 1 else 0.0
        return float(dev), float(max(0.0, step - 2 * typical))


@dataclass(frozen=True)
class EnergyParts:
    kinetic_rho: float
    kinetic_phase: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic_rho + self.kinetic_phase + self.potential


@dataclass
class AprioriReport:
    energy: float
    momentum: float
    eta_sup: float
    eta_l2_sq: float
    bound: float
    sup_ok: bool
    l2_ok: bool
    momentum_bound: float
    momentum_ok: bool

    @property
    def ok(self) -> bool:
        return self.sup_ok and self.l2_ok and self.momentum_ok


def boundary_decay(h: HydroField, fraction: float = EDGE_FRACTION) -> float:
    """Largest ``|eta|`` or ``|w|`` on the outer ``fraction`` of the box."""
    n_edge = max(1, int(fraction * h.grid.n_points))
    edges = np.concatenate([h.eta[:n_edge], h.eta[-n_edge:], h.w[:n_edge], h.w[-n_edge:]])
    return float(np.max(np.abs(edges)))


def _antiderivative(grid: Grid, w: np.ndarray) -> tuple[np.ndarray, float]:
    """``theta(x_j) = int_{-L/2}^{x_j} w`` spectrally, plus the total integral."""
    total = quadrature(grid, w)
    mean = total / grid.length
    xi = grid.rfrequencies
    W = sfft.rfft(w - mean)
    inv = np.zeros_like(xi)
    inv[1:] = 1.0 / xi[1:]
    inv[-1] = 0.0
    P = sfft.irfft(-1j * inv * W, n=grid.n_points)
    theta = mean * (grid.x - grid.x[0]) + P - P[0]
    return theta, total


def reconstruct_complex(h: HydroField) -> ComplexField:
    """Lift ``(eta, w)`` to ``u = sqrt(1-eta) exp(i theta)`` with ``theta(-L/2) = 0``."""
    h.require_nonvanishing()
    theta, jump = _antiderivative(h.grid, h.w)
    return ComplexField(h.grid, h.rho * np.exp(1j * theta), jump)


def hydro_from_complex(c: ComplexField) -> HydroField:
    """Inverse lifting: ``eta = 1-|u|^2`` and ``w = Im(conj(u) u') / |u|^2``."""
    mod2 = np.abs(c.values) ** 2
    if np.min(mod2) <= 0:
        raise ValueError("field vanishes; phase derivative undefined")
    du = complex_derivative(c)
    return HydroField(c.grid, 1.0 - mod2, np.imag(np.conj(c.values) * du) / mod2)


def energy_parts(h: HydroField, kernel) -> EnergyParts:
    """Kinetic (modulus and phase) and potential parts of the energy."""
    h.require_nonvanishing()
    g = h.grid
    rho = h.rho
    drho = -differentiate(g, h.eta, 1) / (2.0 * rho)
    kin_rho = 0.5 * quadrature(g, drho**2)
    kin_phase = 0.5 * quadrature(g, (1.0 - h.eta) * h.w**2)
    pot = 0.25 * quadrature(g, convolve_with_symbol(g, h.eta, kernel) * h.eta)
    return EnergyParts(float(kin_rho), float(kin_phase), float(pot))


def energy(h: HydroField, kernel) -> float:
    return energy_parts(h, kernel).total


def momentum(h: HydroField) -> float:
    """Renormalized momentum ``1/2 int eta w``."""
    return float(0.5 * quadrature(h.grid, h.eta * h.w))


def complex_derivative(c: ComplexField, order: int = 1) -> np.ndarray:
    """Spectral derivative of ``u`` taken through the untwisted frame."""
    g = c.grid
    k = c.bloch_shift
    xi = g.frequencies.copy()
    if order % 2 == 1:
        xi[g.nyquist_index] = 0.0
    mult = (1j * (xi + k)) ** order
    phase = np.exp(1j * k * g.x)
    return phase * sfft.ifft(mult * sfft.fft(c.values / phase))


def energy_complex(c: ComplexField, kernel) -> float:
    """``1/2 int |u'|^2 + 1/4 int (W*eta) eta``."""
    g = c.grid
    du = complex_derivative(c)
    eta = 1.0 - np.abs(c.values) ** 2
    kin = 0.5 * quadrature(g, np.abs(du) ** 2)
    pot = 0.25 * quadrature(g, convolve_with_symbol(g, eta, kernel) * eta)
    return float(kin + pot)


def momentum_complex(c: ComplexField) -> float:
    """``1/2 int eta Im(conj(u) u') / |u|^2``; requires a nonvanishing field."""
    mod2 = np.abs(c.values) ** 2
    if np.min(mod2) <= 0:
        raise ValueError("momentum undefined for a vanishing field")
    du = complex_derivative(c)
    return float(0.5 * quadrature(c.grid, (1.0 - mod2) * np.imag(np.conj(c.values) * du) / mod2))


def scale_phase(h: HydroField, lam: float) -> HydroField:
    """Phase rescaling ``rho e^{i theta} -> rho e^{i lam theta}``."""
    return HydroField(h.grid, h.eta.copy(), lam * h.w)


def apriori_check(E: float, q: float, h: HydroField, kappa_tilde: float = KAPPA_TILDE,
                  rtol: float = 1e-12) -> AprioriReport:
    """Check the sup/L2 bounds on eta and the momentum-energy control."""
    if E < -rtol:
        raise ValueError("apriori_check needs E >= 0")
    e = max(E, 0.0)
    k = kappa_tilde
    bound = 8 * k * e * (1 + 8 * k * e + 2 * math.sqrt(2 * k * e))
    eta_sup = float(np.max(np.abs(h.eta)))
    eta_l2 = float(quadrature(h.grid, h.eta**2))
    slack = rtol * max(1.0, bound)
    sup_ok = eta_sup**2 <= bound + slack
    l2_ok = eta_l2 <= bound + slack
    if eta_sup < 1.0:
        mbound = e / (math.sqrt(2.0) * (1.0 - eta_sup))
        mom_ok = abs(q) <= mbound + rtol * max(1.0, mbound)
    else:
        mbound, mom_ok = math.inf, True
    return AprioriReport(E, q, eta_sup, eta_l2, bound, bool(sup_ok), bool(l2_ok), mbound, bool(mom_ok))
