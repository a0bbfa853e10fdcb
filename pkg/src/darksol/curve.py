"""Sweeps of the minimizing curve and their diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fields import HydroField
from .grid import Grid
from .kernels import InteractionKernel
from .minimizer import (
    BoundaryDecayError,
    MinimizerConfig,
    SolitonSolution,
    minimize,
    project_momentum,
)

log = logging.getLogger(__name__)

__all__ = [
    "CurvePoint",
    "CurveDiagnostics",
    "sweep",
    "diagnose",
    "speed_bracket",
    "estimate_q_star",
    "kdv_k1",
    "lower_envelope",
]

SQRT2 = math.sqrt(2.0)


@dataclass
class CurvePoint:
    q: float
    E: float
    c_est: float
    residual_norm: float
    converged: bool
    iterations: int
    multiplier: float = float("nan")
    message: str = ""
    solution: Optional[SolitonSolution] = field(default=None, repr=False)

    @property
    def speed(self) -> float:
        """Lagrange multiplier when available, else the fitted speed."""
        return self.multiplier if np.isfinite(self.multiplier) else self.c_est


@dataclass
class CurveDiagnostics:
    concave: bool
    worst_second_difference: float
    worst_index: Optional[int]
    concavity_tol: float
    nondecreasing: bool
    lipschitz_ok: bool
    below_line: bool
    tangent_gap: list
    sigma: list
    q_star_estimate: Optional[float]
    kdv_bound_ok: Optional[bool]
    kdv_constants: dict
    subadditive_ok: Optional[bool]
    n_points: int

    def to_dict(self) -> dict:
        return {
            "concave": self.concave,
            "worst_second_difference": self.worst_second_difference,
            "worst_index": self.worst_index,
            "concavity_tol": self.concavity_tol,
            "nondecreasing": self.nondecreasing,
            "lipschitz_ok": self.lipschitz_ok,
            "below_line": self.below_line,
            "tangent_gap": self.tangent_gap,
            "sigma": self.sigma,
            "q_star_estimate": self.q_star_estimate,
            "kdv_bound_ok": self.kdv_bound_ok,
            "kdv_constants": self.kdv_constants,
            "subadditive_ok": self.subadditive_ok,
            "n_points": self.n_points,
        }


def _point(sol: SolitonSolution, q: float) -> CurvePoint:
    return CurvePoint(q, sol.E, sol.c_est, sol.residual_norm, sol.converged, sol.iterations,
                      sol.multiplier, sol.message, sol)


def sweep(kernel: InteractionKernel, q_values: Sequence[float], config: Optional[MinimizerConfig] = None,
          grid: Optional[Grid] = None, first_init="kdv") -> list[CurvePoint]:
    """Minimize along ascending ``q_values`` with warm starts.

    The first point is seeded by ``first_init`` (a rule or a field); each
    later point starts from the last converged field rescaled to the new
    momentum. Failures are recorded and the sweep continues.
    """
    qs = [float(q) for q in q_values]
    if not qs or any(q <= 0 for q in qs) or any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError("q_values must be positive and strictly ascending")
    if isinstance(first_init, HydroField):
        grid = first_init.grid
    if grid is None:
        raise ValueError("sweep needs a grid")
    cfg = config or MinimizerConfig()
    points: list[CurvePoint] = []
    warm: Optional[HydroField] = first_init if isinstance(first_init, HydroField) else None
    for q in qs:
        init = project_momentum(warm, q) if warm is not None else first_init
        try:
            sol = minimize(kernel, q, init, cfg, grid=grid)
        except BoundaryDecayError as exc:
            log.warning("sweep q=%g: %s", q, exc)
            points.append(CurvePoint(q, float("nan"), float("nan"), float("inf"), False, 0,
                                     message=str(exc)))
            continue
        points.append(_point(sol, q))
        # a gradient-converged field is a good warm start even if flagged
        if sol.converged or sol.grad_norm < cfg.grad_tol:
            warm = sol.field
        log.info("sweep q=%.4g E=%.12g c=%.6g converged=%s", q, sol.E, sol.c_est, sol.converged)
    return points


def lower_envelope(*branches: Sequence[CurvePoint]) -> list[CurvePoint]:
    """Pointwise lowest converged energy over sweeps that share momenta.

    Warm-started continuation follows one branch of critical points; when
    another branch crosses below it, only a second sweep finds it. Points
    are matched on ``q`` rounded to 12 digits. A momentum with no converged
    point keeps its lowest finite-energy point, still flagged unconverged.
    """
    by_q: dict[float, list[CurvePoint]] = {}
    for branch in branches:
        for p in branch:
            by_q.setdefault(round(p.q, 12), []).append(p)
    out = []
    for key in sorted(by_q):
        cands = by_q[key]
        good = [p for p in cands if p.converged and np.isfinite(p.E)]
        pool = good or [p for p in cands if np.isfinite(p.E)] or cands
        out.append(min(pool, key=lambda p: p.E if np.isfinite(p.E) else math.inf))
    return out


def kdv_k1(omega: float) -> float:
    """Constant of the ``q^{5/3}`` term in the small-momentum upper bound."""
    return (3.0 * SQRT2 / omega) ** (5.0 / 3.0) * omega / 20.0


def _concavity_terms(q: np.ndarray, E: np.ndarray) -> np.ndarray:
    # scaled difference of one-sided slopes; equals E+ - 2E + E- on a uniform grid
    hl = q[1:-1] - q[:-2]
    hr = q[2:] - q[1:-1]
    return 0.5 * (hl + hr) * ((E[2:] - E[1:-1]) / hr - (E[1:-1] - E[:-2]) / hl)


def diagnose(points: Sequence[CurvePoint], omega: Optional[float] = None,
             rel_tol: float = 1e-6, abs_tol: float = 1e-8,
             small_q: Optional[float] = None) -> CurveDiagnostics:
    """Curve-level checks on the converged points."""
    good = sorted((p for p in points if p.converged and np.isfinite(p.E)), key=lambda p: p.q)
    if len(good) < 3:
        raise ValueError(f"diagnose needs at least 3 converged points, got {len(good)}")
    q = np.array([p.q for p in good])
    E = np.array([p.E for p in good])
    tol = rel_tol * float(np.max(np.abs(E)))
    sd = _concavity_terms(q, E)
    worst = int(np.argmax(sd))
    concave = bool(sd[worst] <= tol)
    dE = np.diff(E)
    dq = np.diff(q)
    nondecreasing = bool(np.all(dE >= -abs_tol))
    lipschitz = bool(np.all(np.abs(dE) <= SQRT2 * dq + abs_tol))
    below = bool(np.all(E <= SQRT2 * q + abs_tol))
    gap = [(float(a), float(SQRT2 - b / a)) for a, b in zip(q, E)]
    sigma = [(float(a), float(1.0 - b / (SQRT2 * a))) for a, b in zip(q, E)]

    kdv_ok, consts = None, {}
    if omega is not None:
        kdv_ok, consts = _kdv_bounds(q, E, omega, small_q)

    # subadditivity on exact sums inside the grid
    sub_ok = None
    lookup = {round(a, 12): b for a, b in zip(q, E)}
    checks = []
    for i in range(len(q)):
        for j in range(i, len(q)):
            key = round(q[i] + q[j], 12)
            if key in lookup:
                checks.append(lookup[key] <= E[i] + E[j] + tol)
    if checks:
        sub_ok = bool(all(checks))

    return CurveDiagnostics(
        concave=concave,
        worst_second_difference=float(sd[worst]),
        worst_index=worst + 1 if not concave else None,
        concavity_tol=tol,
        nondecreasing=nondecreasing,
        lipschitz_ok=lipschitz,
        below_line=below,
        tangent_gap=gap,
        sigma=sigma,
        q_star_estimate=estimate_q_star(points),
        kdv_bound_ok=kdv_ok,
        kdv_constants=consts,
        subadditive_ok=sub_ok,
        n_points=len(good),
    )


def _kdv_bounds(q, E, omega, small_q):
    """Fit the free constants on the smaller half of the small-q points, test on the rest.

    The lower bound is ``sqrt2 q - K0 q^{3/2}``; the upper bound is
    ``sqrt2 q - K1 q^{5/3} + K2 q^2`` with ``K1`` fixed by ``omega``.
    """
    k1 = kdv_k1(omega)
    limit = small_q if small_q is not None else float(np.median(q))
    mask = q <= limit
    qs, Es = q[mask], E[mask]
    if qs.size < 2:
        return None, {"K1": k1}
    n_fit = max(1, qs.size // 2)
    gap = SQRT2 * qs - Es
    k0 = float(np.max(gap[:n_fit] / qs[:n_fit] ** 1.5))
    k2 = float(np.max((Es[:n_fit] - SQRT2 * qs[:n_fit] + k1 * qs[:n_fit] ** (5 / 3)) / qs[:n_fit] ** 2))
    k0, k2 = max(k0, 0.0) * 1.05, max(k2, 0.0) * 1.05
    lower = SQRT2 * qs - k0 * qs**1.5
    upper = SQRT2 * qs - k1 * qs ** (5 / 3) + k2 * qs**2
    slack = 1e-8
    ok = bool(np.all(Es >= lower - slack) and np.all(Es <= upper + slack) and np.all(gap > 0))
    return ok, {"K0": k0, "K1": k1, "K2": k2, "q_limit": limit, "n_fit": int(n_fit),
                "n_test": int(qs.size - n_fit)}


def speed_bracket(points: Sequence[CurvePoint], index: int) -> tuple[float, float]:
    """One-sided slopes around an interior point: ``(right, left)``."""
    if not 0 < index < len(points) - 1:
        raise ValueError("speed_bracket needs an interior index")
    a, b, c = points[index - 1], points[index], points[index + 1]
    left = (b.E - a.E) / (b.q - a.q)
    right = (c.E - b.E) / (c.q - b.q)
    return right, left


def estimate_q_star(points: Sequence[CurvePoint], slope_threshold: float = 0.02) -> Optional[float]:
    """Onset of the plateau of the curve.

    Finds the first point from which every forward slope stays below
    ``slope_threshold * sqrt(2)``. When the two preceding speeds decrease,
    the onset is refined by extrapolating the speed linearly to zero inside
    the first plateau interval.
    """
    pts = sorted((p for p in points if np.isfinite(p.E)), key=lambda p: p.q)
    if len(pts) < 2:
        return None
    q = np.array([p.q for p in pts])
    E = np.array([p.E for p in pts])
    slopes = np.diff(E) / np.diff(q)
    thr = slope_threshold * SQRT2
    below = slopes < thr
    if not below[-1]:
        return None
    i = len(slopes) - 1
    while i > 0 and below[i - 1]:
        i -= 1
    q_on = float(q[i])
    if i >= 1:
        c_prev, c_cur = pts[i - 1].speed, pts[i].speed
        if np.isfinite(c_prev) and np.isfinite(c_cur) and c_prev > c_cur > 0:
            q_zero = q[i] + c_cur * (q[i] - q[i - 1]) / (c_prev - c_cur)
            q_on = float(min(max(q_zero, q[i]), q[i + 1]))
    return q_on
