"""Energy minimization at fixed momentum.

The public gradients are taken with respect to ``(eta, w)``. The descent
itself runs on ``(rho, w)`` with ``rho = sqrt(1 - eta)``: the kinetic term is
then the quadratic form ``1/2 int rho'^2``, which a spectral preconditioner
inverts cheaply, and the phase weight ``rho^2`` is undone exactly by a
pointwise one. Each iteration takes a preconditioned step tangent to the
momentum constraint, clamps ``rho`` from below, restores the momentum by
phase rescaling, and accepts the step by Armijo backtracking.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.fft as sfft

from . import closed_form
from .fields import (
    EDGE_TOL,
    HydroField,
    boundary_decay,
    complex_derivative,
    energy,
    momentum,
    reconstruct_complex,
)
from .grid import Grid, convolve_with_symbol, differentiate, kernel_rsymbol, quadrature
from .kernels import InteractionKernel, check_H1

log = logging.getLogger(__name__)

__all__ = [
    "MinimizerConfig",
    "SolitonSolution",
    "BoundaryDecayError",
    "grad_energy",
    "grad_momentum",
    "project_momentum",
    "seed_field",
    "minimize",
    "estimate_speed_residual",
]

_EPS = np.finfo(float).eps


class BoundaryDecayError(RuntimeError):
    """The accepted minimizer does not decay at the box edge."""


@dataclass
class MinimizerConfig:
    step_init: float = 0.1
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    grad_tol: float = 1e-8
    max_iter: int = 200000
    eta_cap: float = 0.999
    step_growth: float = 1.5
    precond_shift: float = 1.0
    residual_tol: float = 1e-5
    min_step: float = 1e-14

    def __post_init__(self):
        for name in ("step_init", "armijo_slope", "grad_tol", "step_growth", "precond_shift",
                     "residual_tol", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must lie in (0, 1)")
        if not 0 < self.eta_cap < 1:
            raise ValueError("eta_cap must lie in (0, 1)")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        self.max_iter = int(self.max_iter)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolitonSolution:
    field: HydroField
    q: float
    E: float
    c_est: float
    residual_norm: float
    iterations: int
    converged: bool
    multiplier: float = float("nan")
    grad_norm: float = float("nan")
    clamp_active: bool = False
    message: str = ""
    elapsed: float = 0.0
    stats: dict = field(default_factory=dict)


# ---- gradients in (eta, w) ----------------------------------------------


def grad_energy(h: HydroField, kernel: InteractionKernel) -> tuple[np.ndarray, np.ndarray]:
    """First variation of the hydrodynamic energy with respect to ``(eta, w)``."""
    h.require_nonvanishing()
    g = h.grid
    one_m = 1.0 - h.eta
    deta = differentiate(g, h.eta, 1)
    g_eta = (
        deta**2 / (8.0 * one_m**2)
        - differentiate(g, deta / (4.0 * one_m), 1)
        - 0.5 * h.w**2
        + 0.5 * convolve_with_symbol(g, h.eta, kernel)
    )
    return g_eta, one_m * h.w


def grad_momentum(h: HydroField) -> tuple[np.ndarray, np.ndarray]:
    """First variation of ``1/2 int eta w``."""
    return 0.5 * h.w, 0.5 * h.eta


def project_momentum(h: HydroField, q: float) -> HydroField:
    """Rescale the phase so the momentum equals ``q`` exactly."""
    p = momentum(h)
    if p == 0:
        raise ValueError("cannot rescale a field with zero momentum")
    return HydroField(h.grid, h.eta.copy(), (q / p) * h.w)


# ---- internal (rho, w) problem ------------------------------------------


class _RhoProblem:
    """Energy, momentum and gradients in ``(rho, w)`` on real transforms."""

    def __init__(self, grid: Grid, kernel: InteractionKernel, precond_shift: float):
        self.grid = grid
        self.dx = grid.spacing
        self.n = grid.n_points
        xi2 = grid.rfrequencies**2
        self.xi2 = xi2
        self.what = None if kernel.is_identity else kernel_rsymbol(grid, kernel)
        self.prec = 1.0 / (xi2 + precond_shift)

    def _conv(self, f):
        if self.what is None:
            return f
        return sfft.irfft(self.what * sfft.rfft(f), n=self.n)

    def _lap(self, f):
        # -f'' including the Nyquist mode
        return sfft.irfft(self.xi2 * sfft.rfft(f), n=self.n)

    def energy(self, rho, w):
        eta = 1.0 - rho * rho
        kin = 0.5 * self.dx * np.dot(self._lap(rho), rho)
        phase = 0.5 * self.dx * np.dot(rho * rho, w * w)
        pot = 0.25 * self.dx * np.dot(self._conv(eta), eta)
        return kin + phase + pot

    def momentum(self, rho, w):
        return 0.5 * self.dx * np.dot(1.0 - rho * rho, w)

    def grad(self, rho, w):
        eta = 1.0 - rho * rho
        gr = self._lap(rho) + rho * (w * w - self._conv(eta))
        gw = rho * rho * w
        return gr, gw

    def grad_p(self, rho, w):
        return -rho * w, 0.5 * (1.0 - rho * rho)

    def precondition(self, gr, gw, rho):
        return sfft.irfft(self.prec * sfft.rfft(gr), n=self.n), gw / (rho * rho)

    def dot(self, a1, a2, b1, b2):
        return self.dx * (np.dot(a1, b1) + np.dot(a2, b2))


@dataclass
class _State:
    rho: np.ndarray
    w: np.ndarray
    E: float
    gr: np.ndarray
    gw: np.ndarray
    qr: np.ndarray
    qw: np.ndarray
    lam: float
    rr: np.ndarray
    rw: np.ndarray
    res: float


def _evaluate(prob: _RhoProblem, rho, w, E, rmin) -> _State:
    gr, gw = prob.grad(rho, w)
    qr, qw = prob.grad_p(rho, w)
    lam = prob.dot(gr, gw, qr, qw) / prob.dot(qr, qw, qr, qw)
    rr = gr - lam * qr
    rw = gw - lam * qw
    # at the lower bound on rho only inward-pointing residual counts
    rr = np.where((rho <= rmin * (1 + 1e-12)) & (rr > 0), 0.0, rr)
    res = math.sqrt(prob.dot(rr, rw, rr, rw))
    return _State(rho, w, E, gr, gw, qr, qw, lam, rr, rw, res)


# ---- seeding ------------------------------------------------------------


def _smooth_noise(grid: Grid, rng: np.random.Generator, corr: float = 1.0) -> np.ndarray:
    """Unit-sup random field with correlation length ``corr``."""
    raw = rng.standard_normal(grid.n_points)
    filt = np.exp(-0.5 * (grid.rfrequencies * corr) ** 2)
    f = sfft.irfft(filt * sfft.rfft(raw), n=grid.n_points)
    return f / np.max(np.abs(f))


def seed_field(kernel: InteractionKernel, q: float, grid: Grid, rule: str,
               eta_cap: float = 0.999, noise: float = 0.0, seed: int = 0) -> HydroField:
    """Initial field for ``minimize`` from a named rule ("gp" or "kdv").

    ``noise`` multiplies ``eta`` and ``w`` by ``1 + noise * r(x)`` with ``r``
    a smooth random field of unit sup norm, so the perturbation is relative
    and keeps the edge decay of the seed.
    """
    if rule == "gp":
        c_min = math.sqrt(2.0 * (1.0 - eta_cap))
        c = closed_form.gp_speed_for_momentum(q, c_min=max(c_min, 1e-6))
        h = closed_form.gp_soliton(c, grid).hydro
    elif rule == "kdv":
        omega = check_H1(kernel).omega
        if omega is None:
            raise ValueError(f"kdv seed needs W_hat''(0) > -1 for kernel {kernel.name!r}")
        eps = closed_form.kdv_epsilon_for_momentum(q, omega)
        h = closed_form.kdv_ansatz(closed_form.KdvAnsatz(eps, omega), grid, check_length=False)
    else:
        raise ValueError(f"unknown seeding rule {rule!r}")
    if noise > 0:
        rng = np.random.default_rng(seed)
        eta = h.eta * (1.0 + noise * _smooth_noise(grid, rng))
        w = h.w * (1.0 + noise * _smooth_noise(grid, rng))
        h = HydroField(grid, np.minimum(eta, eta_cap), w)
    return h


# ---- main loop ----------------------------------------------------------


def minimize(kernel: InteractionKernel, q: float, init: Union[HydroField, str],
             config: Optional[MinimizerConfig] = None, grid: Optional[Grid] = None,
             noise: float = 0.0, seed: int = 0, check_edges: bool = True) -> SolitonSolution:
    """Minimize the energy at momentum ``q``.

    ``init`` is a field or a seeding rule; a rule needs ``grid``.
    Raises :class:`BoundaryDecayError` when a converged field does not decay
    at the box edge.
    """
    cfg = config or MinimizerConfig()
    if not q > 0:
        raise ValueError("minimize needs q > 0")
    if isinstance(init, str):
        if grid is None:
            raise ValueError("a seeding rule needs a grid")
        h0 = seed_field(kernel, q, grid, init, cfg.eta_cap, noise, seed)
    else:
        h0 = init
        grid = h0.grid
    t_start = time.perf_counter()
    prob = _RhoProblem(grid, kernel, cfg.precond_shift)
    rmin = math.sqrt(1.0 - cfg.eta_cap)

    rho = np.sqrt(1.0 - np.minimum(h0.eta, cfg.eta_cap))
    w = h0.w.copy()
    p0 = prob.momentum(rho, w)
    if p0 == 0:
        raise ValueError("initial field has zero momentum")
    w *= q / p0
    st = _evaluate(prob, rho, w, prob.energy(rho, w), rmin)

    t = cfg.step_init
    it = 0
    n_energy = 1
    n_grad = 1
    n_roundoff = 0
    max_rise = 0.0
    n_big_scale = 0
    message = "max_iter reached"
    while it < cfg.max_iter:
        if st.res < cfg.grad_tol:
            message = "converged"
            break
        pr, pw = prob.precondition(st.gr, st.gw, st.rho)
        sr, sw = prob.precondition(st.qr, st.qw, st.rho)
        mu = prob.dot(st.qr, st.qw, pr, pw) / prob.dot(st.qr, st.qw, sr, sw)
        dr = -(pr - mu * sr)
        dw = -(pw - mu * sw)
        active = (st.rho <= rmin * (1 + 1e-12)) & (dr < 0)
        if active.any():
            dr[active] = 0.0
        # along the constraint-projected path dE = <r, d>; using r instead of the raw
        # gradient avoids cancelling the large lam * grad_p part near convergence
        slope = prob.dot(st.rr, st.rw, dr, dw)
        if slope >= 0:
            dr = np.where(active, 0.0, -st.rr)
            dw = -st.rw.copy()
            slope = prob.dot(st.rr, st.rw, dr, dw)
        if slope >= 0:
            message = "no descent direction"
            break

        accepted = None
        while True:
            nr = np.maximum(st.rho + t * dr, rmin)
            nw = st.w + t * dw
            pn = prob.momentum(nr, nw)
            if pn == 0:
                t *= cfg.armijo_shrink
                continue
            scale = q / pn
            nw *= scale
            En = prob.energy(nr, nw)
            n_energy += 1
            if En <= st.E + cfg.armijo_slope * t * slope:
                accepted = _evaluate(prob, nr, nw, En, rmin)
                n_grad += 1
                break
            if En - st.E <= 16 * _EPS * abs(st.E):
                # energy change is at roundoff level; fall back on the slope
                cand = _evaluate(prob, nr, nw, En, rmin)
                n_grad += 1
                if prob.dot(cand.rr, cand.rw, dr, dw) <= -0.8 * slope:
                    accepted = cand
                    n_roundoff += 1
                    break
            if t < cfg.min_step:
                break
            t *= cfg.armijo_shrink
        if accepted is None:
            message = "line search stalled"
            break
        if abs(scale) > 1:
            n_big_scale += 1
            log.debug("iteration %d: momentum rescale factor %.6g", it, scale)
        max_rise = max(max_rise, accepted.E - st.E)
        st = accepted
        t *= cfg.step_growth
        it += 1
        if it % 2000 == 0:
            log.debug("it %d E %.15g res %.3e lam %.6g t %.3g", it, st.E, st.res, st.lam, t)

    grad_ok = st.res < cfg.grad_tol
    h = HydroField(grid, 1.0 - st.rho**2, st.w)
    # restore the constraint on the stored representation
    pf = momentum(h)
    if pf != 0:
        h = HydroField(grid, h.eta, h.w * (q / pf))
    clamp = bool(np.any(st.rho <= rmin * (1 + 1e-12)))
    try:
        c_est, resid = estimate_speed_residual(h, kernel)
    except ValueError:
        c_est, resid = float("nan"), float("inf")
    converged = bool(grad_ok and resid <= cfg.residual_tol)
    if grad_ok and not converged:
        message = f"gradient converged but traveling-wave residual {resid:.3e} above tolerance"
    if clamp and grad_ok:
        log.warning("minimizer at q=%g converged with the eta cap active (suspect)", q)
    edge = boundary_decay(h)
    if converged and check_edges and edge > EDGE_TOL:
        raise BoundaryDecayError(
            f"minimizer at q={q} has edge amplitude {edge:.3e} > {EDGE_TOL:g}; enlarge the box"
        )
    elapsed = time.perf_counter() - t_start
    log.info("minimize q=%g: %s after %d iterations (res %.3e, %.2fs)", q, message, it, st.res, elapsed)
    return SolitonSolution(
        field=h,
        q=momentum(h),
        E=energy(h, kernel),
        c_est=c_est,
        residual_norm=resid,
        iterations=it,
        converged=converged,
        multiplier=float(st.lam),
        grad_norm=float(st.res),
        clamp_active=clamp,
        message=message,
        elapsed=elapsed,
        stats={
            "energy_evals": n_energy,
            "gradient_evals": n_grad,
            "roundoff_acceptances": n_roundoff,
            "max_energy_rise": max_rise,
            "rescales_above_one": n_big_scale,
            "edge_amplitude": edge,
            "internal_energy": float(st.E),
        },
    )


def estimate_speed_residual(h: HydroField, kernel: InteractionKernel) -> tuple[float, float]:
    """Least-squares speed and residual norm of ``i c u' + u'' + u (W*eta) = 0``."""
    u = reconstruct_complex(h)
    g = h.grid
    du = complex_derivative(u, 1)
    d2u = complex_derivative(u, 2)
    nl = d2u + u.values * convolve_with_symbol(g, h.eta, kernel)
    idu = 1j * du
    den = float(quadrature(g, np.abs(du) ** 2))
    if den <= 1e-28:
        raise ValueError("field is constant; speed undefined")
    c = -float(quadrature(g, np.real(nl * np.conj(idu)))) / den
    r = c * idu + nl
    return c, float(math.sqrt(quadrature(g, np.abs(r) ** 2)))
