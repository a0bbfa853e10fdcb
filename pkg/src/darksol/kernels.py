"""Interaction kernels given by their Fourier symbols, plus hypothesis checks.

Every catalog kernel is normalized so that ``W_hat(0) = 1``. The checks are
numeric: H0 (nonnegative bounded symbol) and H1 (``W_hat''(0) > -1`` and the
lower bound ``W_hat >= 1 - xi^2/2`` on ``|xi| < 2``) by sampling, and H2'
(a sign condition over odd test functions) by searching a parameterized
family for a negative value. A passing H2' result means "no counterexample
found on the family", nothing stronger.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft
from scipy import optimize

log = logging.getLogger(__name__)

__all__ = [
    "InteractionKernel",
    "make_kernel",
    "custom_kernel",
    "kernel_from_spec",
    "speed_of_sound",
    "dispersion",
    "dispersion_extrema",
    "H0Result",
    "H1Result",
    "H2Witness",
    "H2Result",
    "HypothesisReport",
    "check_H0",
    "check_H1",
    "check_H2prime",
    "check_hypotheses",
    "h2prime_integral",
]

CATALOG = {
    "dirac": (),
    "exp_pair": ("alpha", "beta"),
    "log_kernel": ("alpha",),
    "perturbed_log": ("sigma", "m"),
    "three_delta": ("sigma",),
    "roton": ("a", "b", "c"),
}


def _bernoulli_even(n_max: int) -> list[Fraction]:
    """Bernoulli numbers B_0..B_n_max (Akiyama-Tanigawa), exact."""
    out = []
    a = [Fraction(0)] * (n_max + 1)
    for m in range(n_max + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        out.append(a[0])
    return out


def _coth_series_coeffs(n_terms: int = 16) -> np.ndarray:
    # 3(xi coth xi - 1)/xi^2 = sum_n a_n xi^{2n}
    b = _bernoulli_even(2 * n_terms + 2)
    coeffs = [
        3 * Fraction(2) ** (2 * n + 2) * b[2 * n + 2] / math.factorial(2 * n + 2)
        for n in range(n_terms)
    ]
    return np.array([float(c) for c in coeffs])


_V_COEFFS = _coth_series_coeffs()
_V_SERIES_TINY = 1e-4
_V_SERIES_BAND = 0.5


def _v_hat(xi) -> np.ndarray:
    """``3(xi coth xi - 1)/xi^2`` evaluated without cancellation."""
    xi = np.abs(np.asarray(xi, dtype=float))
    out = np.empty_like(xi)
    tiny = xi < _V_SERIES_TINY
    band = (~tiny) & (xi < _V_SERIES_BAND)
    big = ~(tiny | band)
    out[tiny] = 1.0 - xi[tiny] ** 2 / 15.0
    if band.any():
        z = xi[band] ** 2
        out[band] = np.polynomial.polynomial.polyval(z, _V_COEFFS)
    if big.any():
        xb = xi[big]
        out[big] = 3.0 * (xb / np.tanh(xb) - 1.0) / xb**2
    return out


@dataclass(frozen=True)
class InteractionKernel:
    """Even interaction described by its Fourier symbol.

    ``params`` is a tuple of ``(name, value)`` pairs so kernels stay hashable
    and can key per-grid symbol caches. ``scale`` multiplies the symbol; it
    is 1 for catalog kernels.
    """

    name: str
    params: tuple = ()
    scale: float = 1.0
    custom: Optional[Callable] = field(default=None, compare=True)

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def p(self, key: str) -> float:
        return self.param_dict[key]

    @property
    def is_identity(self) -> bool:
        return self.name == "dirac" and self.scale == 1.0

    @property
    def is_catalog(self) -> bool:
        return self.custom is None and self.scale == 1.0

    def symbol(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self.scale * self._raw_symbol(xi)

    def _raw_symbol(self, xi: np.ndarray) -> np.ndarray:
        if self.custom is not None:
            return np.asarray(self.custom(xi), dtype=float) * np.ones_like(xi)
        n = self.name
        if n == "dirac":
            return np.ones_like(xi)
        if n == "exp_pair":
            a, b = self.p("alpha"), self.p("beta")
            return b / (b - 2 * a) * (1.0 - 2 * a * b / (xi**2 + b**2))
        if n == "log_kernel":
            a = self.p("alpha")
            return (1.0 - a * _v_hat(xi)) / (1.0 - a)
        if n == "perturbed_log":
            s, m = self.p("sigma"), self.p("m")
            m2p2 = (m * np.pi) ** 2
            return 2 * m2p2 / (m2p2 + 2 * s) * (1.0 - 0.5 * _v_hat(xi) + s / (xi**2 + m2p2))
        if n == "three_delta":
            return 2.0 - np.cos(self.p("sigma") * xi)
        if n == "roton":
            a, b, c = self.p("a"), self.p("b"), self.p("c")
            x2 = xi**2
            return (1.0 + a * x2 + b * x2**2) * np.exp(-c * x2)
        raise ValueError(f"unknown kernel {n!r}")

    def scaled(self, factor: float) -> "InteractionKernel":
        """Same kernel with its symbol multiplied by ``factor``."""
        return InteractionKernel(self.name, self.params, self.scale * factor, self.custom)

    def to_spec(self) -> dict:
        spec = {"name": self.name, "params": self.param_dict}
        if self.scale != 1.0:
            spec["scale"] = self.scale
        return spec


def make_kernel(name: str, params: Optional[dict] = None) -> InteractionKernel:
    """Construct a catalog kernel, validating the parameter domain."""
    if name not in CATALOG:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(CATALOG)}")
    params = dict(params or {})
    expected = CATALOG[name]
    if set(params) != set(expected):
        raise ValueError(f"kernel {name!r} needs params {list(expected)}, got {sorted(params)}")
    vals = {k: float(params[k]) for k in expected}
    if any(not np.isfinite(v) for v in vals.values()):
        raise ValueError(f"non-finite parameter for {name!r}: {vals}")
    if name == "exp_pair":
        if not vals["beta"] > 2 * vals["alpha"] > 0:
            raise ValueError("exp_pair needs beta > 2*alpha > 0")
    elif name == "log_kernel":
        if not 0.0 <= vals["alpha"] < 1.0:
            raise ValueError("log_kernel needs alpha in [0, 1)")
    elif name == "perturbed_log":
        m = vals["m"]
        if m != int(m) or m < 1:
            raise ValueError("perturbed_log needs a positive integer m")
        vals["m"] = float(int(m))
        if not -(np.pi**2) * m**2 / 2 < vals["sigma"] <= 3.0:
            raise ValueError("perturbed_log needs sigma in (-pi^2 m^2/2, 3]")
    elif name == "three_delta":
        if not vals["sigma"] > 0:
            raise ValueError("three_delta needs sigma > 0")
    kern = InteractionKernel(name, tuple((k, vals[k]) for k in expected))
    w0 = float(kern.symbol(0.0))
    if abs(w0 - 1.0) > 1e-12:
        raise ValueError(f"kernel {name!r} has W_hat(0) = {w0}, expected 1")
    return kern


def custom_kernel(symbol: Callable, label: str = "custom") -> InteractionKernel:
    """Kernel from an arbitrary even symbol (library use only, not the CLI)."""
    return InteractionKernel(label, (), 1.0, symbol)


def kernel_from_spec(spec: dict) -> InteractionKernel:
    """Build a catalog kernel from ``{"name": ..., "params": {...}}``."""
    if not isinstance(spec, dict):
        raise ValueError("kernel spec must be an object")
    extra = set(spec) - {"name", "params"}
    if extra:
        raise ValueError(f"unknown kernel keys: {sorted(extra)}")
    if "name" not in spec:
        raise ValueError("kernel spec needs a name")
    params = spec.get("params", {})
    if not isinstance(params, dict):
        raise ValueError("kernel params must be an object")
    return make_kernel(spec["name"], params)


def speed_of_sound(kernel: InteractionKernel) -> float:
    """``sqrt(2 W_hat(0))``."""
    w0 = float(kernel.symbol(0.0))
    if w0 <= 0:
        raise ValueError(f"speed of sound undefined: W_hat(0) = {w0}")
    return math.sqrt(2.0 * w0)


def dispersion(kernel: InteractionKernel, xi):
    """Bogoliubov branch ``sqrt(xi^4 + 2 W_hat(xi) xi^2)``."""
    xi_arr = np.asarray(xi, dtype=float)
    rad = xi_arr**4 + 2.0 * kernel.symbol(xi_arr) * xi_arr**2
    if np.any(rad < 0):
        bad = np.atleast_1d(xi_arr)[np.atleast_1d(rad) < 0][0]
        raise ValueError(f"negative dispersion radicand at xi = {bad} (unstable constant state)")
    out = np.sqrt(rad)
    return float(out) if out.ndim == 0 else out


def dispersion_extrema(kernel: InteractionKernel, xi_min: float, xi_max: float,
                       n_samples: int = 4001) -> list[tuple[float, float, str]]:
    """Interior local extrema of the dispersion curve on ``[xi_min, xi_max]``."""
    if not 0 < xi_min < xi_max:
        raise ValueError("need 0 < xi_min < xi_max")
    xs = np.linspace(xi_min, xi_max, n_samples)
    ws = dispersion(kernel, xs)
    out = []
    for i in range(1, n_samples - 1):
        left, mid, right = ws[i - 1], ws[i], ws[i + 1]
        if mid > left and mid >= right:
            kind, sgn = "max", -1.0
        elif mid < left and mid <= right:
            kind, sgn = "min", 1.0
        else:
            continue
        res = optimize.minimize_scalar(
            lambda z: sgn * dispersion(kernel, z),
            bracket=(xs[i - 1], xs[i], xs[i + 1]),
            method="golden",
            options={"xtol": 1e-10},
        )
        xe = float(res.x)
        out.append((xe, float(dispersion(kernel, xe)), kind))
    return out


@dataclass
class H0Result:
    ok: bool
    worst_value: float
    worst_xi: float
    w0: float


@dataclass
class H1Result:
    ok: bool
    w2_0: float
    margin: float
    margin_xi: float
    omega: Optional[float]


@dataclass
class H2Witness:
    """Odd test function recorded as family name plus parameters."""

    family: str
    params: tuple
    value: float
    norm2: float

    def samples(self, x: np.ndarray) -> np.ndarray:
        return _family_eval(self.family, np.asarray(self.params), x)


@dataclass
class H2Result:
    status: str  # "verified-on-family" | "violated" | "inconclusive"
    min_ratio: float
    evaluations: int
    witness: Optional[H2Witness] = None


@dataclass
class HypothesisReport:
    kernel: dict
    h0: H0Result
    h1: H1Result
    h2prime: H2Result

    @property
    def h0_ok(self) -> bool:
        return self.h0.ok

    @property
    def h1_ok(self) -> bool:
        return self.h1.ok

    @property
    def omega(self) -> Optional[float]:
        return self.h1.omega

    def to_dict(self) -> dict:
        w = self.h2prime.witness
        return {
            "kernel": self.kernel,
            "h0_ok": self.h0.ok,
            "h0_worst_value": self.h0.worst_value,
            "h0_worst_xi": self.h0.worst_xi,
            "h1_ok": self.h1.ok,
            "w2_0": self.h1.w2_0,
            "h1_margin": self.h1.margin,
            "h1_margin_xi": self.h1.margin_xi,
            "omega": self.h1.omega,
            "h2prime": self.h2prime.status,
            "h2prime_min_ratio": self.h2prime.min_ratio,
            "h2prime_evaluations": self.h2prime.evaluations,
            "h2prime_witness": None if w is None else {
                "family": w.family, "params": list(w.params), "value": w.value, "norm2": w.norm2,
            },
        }


def check_H0(kernel: InteractionKernel, xi_max: float = 100.0, n_samples: int = 100001) -> H0Result:
    """Sample the symbol on ``[0, xi_max]``; it must be nonnegative with ``W_hat(0) = 1``."""
    if n_samples < 1000:
        raise ValueError("check_H0 needs at least 1000 samples")
    xs = np.linspace(0.0, xi_max, n_samples)
    vals = kernel.symbol(xs)
    i = int(np.argmin(vals))
    w0 = float(vals[0])
    ok = bool(vals[i] >= -1e-12 and abs(w0 - 1.0) <= 1e-12 and np.all(np.isfinite(vals)))
    return H0Result(ok, float(vals[i]), float(xs[i]), w0)


def second_derivative_at_zero(kernel: InteractionKernel, h: float = 1e-3) -> float:
    """Five-point central difference at 0 with one Richardson step."""

    def d2(step):
        f = kernel.symbol(np.array([-2 * step, -step, 0.0, step, 2 * step]))
        return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * step**2)

    return (16.0 * d2(h) - d2(2 * h)) / 15.0


def check_H1(kernel: InteractionKernel) -> H1Result:
    """``W_hat''(0) > -1`` and ``W_hat(xi) >= 1 - xi^2/2`` on ``|xi| < 2``."""
    w2 = float(second_derivative_at_zero(kernel))
    xs = np.linspace(-2.0, 2.0, 4001)
    margin = kernel.symbol(xs) - (1.0 - xs**2 / 2.0)
    i = int(np.argmin(margin))
    ok = bool(w2 > -1.0 and margin[i] >= -1e-12)
    omega = math.sqrt(1.0 + w2) if w2 > -1.0 else None
    return H1Result(ok, w2, float(margin[i]), float(xs[i]), omega)


# ---- H2' machinery -------------------------------------------------------

_H2_N = 16384
_H2_L = 512.0
_CUTOFF_MIN = 0.25
# widths below this are under-resolved on the H2' grid
_WIDTH_MIN = 0.5


def _bump(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


# Every member is multiplied by the even cutoff exp(-d^2/x^2), flat at the
# origin, so the half-line restriction stays smooth and the discrete sum is
# spectrally accurate. The last parameter of each family sets d.
_FAMILIES = {
    # three translated bumps: (amp, center, width) * 3, then d
    "bumps": 10,
    # x * exp(-x^2/s^2) * (p0 + p1 (x/s)^2 + p2 (x/s)^4): (s, p0, p1, p2), then d
    "gauss_poly": 5,
}


def _flat_cutoff(x: np.ndarray, d: float) -> np.ndarray:
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = np.exp(-(d**2) / x[nz] ** 2)
    return out


def _family_eval(family: str, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    cut = _flat_cutoff(x, abs(theta[-1]) + _CUTOFF_MIN)
    if family == "bumps":
        f = np.zeros_like(x)
        for amp, ctr, wid in theta[:9].reshape(3, 3):
            wid = abs(wid) + _WIDTH_MIN
            f += amp * (_bump((x - ctr) / wid) - _bump((-x - ctr) / wid))
        return f * cut
    s = abs(theta[0]) + _WIDTH_MIN
    z = x / s
    return x * np.exp(-(z**2)) * (theta[1] + theta[2] * z**2 + theta[3] * z**4) * cut


def h2prime_integral(kernel: InteractionKernel, f_samples: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Return ``(I(f), ||f||^2)`` for an odd field sampled on a symmetric grid.

    With ``g = f 1_{x>0}`` and ``G`` its transform, the integrand
    ``|f_s|^2 - |f_c|^2`` equals ``-Re G^2``, so
    ``I = -1/2 Re sum_k W_hat(xi_k) G_k^2 dxi`` over the whole frequency grid.
    """
    n = x.size
    dx = x[1] - x[0]
    g = np.where(x > 0, f_samples, 0.0)
    xi = 2.0 * np.pi * sfft.fftfreq(n, d=dx)
    G = dx * np.exp(-1j * xi * x[0]) * sfft.fft(g)
    dxi = 2.0 * np.pi / (n * dx)
    val = -0.5 * dxi * np.real(np.sum(kernel.symbol(xi) * G * G))
    norm2 = dx * float(np.sum(f_samples**2))
    return float(val), norm2


def check_H2prime(kernel: InteractionKernel, search_budget: int = 600, seed: int = 0,
                  n_points: int = _H2_N, length: float = _H2_L) -> H2Result:
    """Search odd test functions for a negative H2' integral.

    Half the budget goes to random sampling of both families, the rest to
    coordinate descent from the best candidates. The score is
    ``I(f)/||f||^2``; below ``-1e-9`` counts as a violation.
    """
    if search_budget < 100:
        raise ValueError("search_budget must be at least 100")
    rng = np.random.default_rng(seed)
    dx = length / n_points
    x = -0.5 * length + dx * np.arange(n_points)
    evals = 0

    def score(family, theta):
        nonlocal evals
        evals += 1
        f = _family_eval(family, theta, x)
        val, nrm = h2prime_integral(kernel, f, x)
        if nrm <= 1e-300:
            return np.inf, val, nrm
        return val / nrm, val, nrm

    span = 0.1 * length
    cands = []
    n_random = search_budget // 2
    for k in range(n_random):
        if k % 2 == 0:
            amp = rng.normal(size=3)
            ctr = rng.uniform(0.0, span, size=3)
            wid = np.exp(rng.uniform(np.log(0.3), np.log(span / 2), size=3))
            cut = rng.uniform(0.0, 2.0)
            theta = np.concatenate([np.column_stack([amp, ctr, wid]).ravel(), [cut]])
            fam = "bumps"
        else:
            s_w = np.exp(rng.uniform(np.log(0.3), np.log(span / 2)))
            theta = np.concatenate([[s_w], rng.normal(size=3), [rng.uniform(0.0, 2.0)]])
            fam = "gauss_poly"
        s, _, _ = score(fam, theta)
        cands.append((s, fam, theta))
    cands.sort(key=lambda c: c[0])

    best_s, best_fam, best_theta = cands[0]
    remaining = search_budget - evals
    starts = cands[: max(1, min(4, len(cands)))]
    per_start = max(1, remaining // len(starts))
    for s0, fam, theta0 in starts:
        theta, s_cur = theta0.copy(), s0
        step = 0.25 * np.maximum(np.abs(theta), 0.5)
        budget_end = evals + per_start
        while evals < budget_end and np.max(step) > 1e-6:
            improved = False
            for j in range(theta.size):
                for sgn in (1.0, -1.0):
                    if evals >= budget_end:
                        break
                    trial = theta.copy()
                    trial[j] += sgn * step[j]
                    s_try, _, _ = score(fam, trial)
                    if s_try < s_cur:
                        theta, s_cur, improved = trial, s_try, True
                        break
            if not improved:
                step *= 0.5
        if s_cur < best_s:
            best_s, best_fam, best_theta = s_cur, fam, theta

    f = _family_eval(best_fam, best_theta, x)
    val, nrm = h2prime_integral(kernel, f, x)
    if not np.isfinite(best_s):
        return H2Result("inconclusive", float("nan"), evals)
    if best_s < -1e-9:
        wit = H2Witness(best_fam, tuple(float(t) for t in best_theta), val, nrm)
        log.info("H2' violated for %s: I/|f|^2 = %.3e", kernel.name, best_s)
        return H2Result("violated", float(best_s), evals, wit)
    return H2Result("verified-on-family", float(best_s), evals)


def check_hypotheses(kernel: InteractionKernel, xi_max: float = 100.0,
                     search_budget: int = 600, seed: int = 0) -> HypothesisReport:
    """Run all three checks and bundle them."""
    return HypothesisReport(
        kernel=kernel.to_spec(),
        h0=check_H0(kernel, xi_max=xi_max),
        h1=check_H1(kernel),
        h2prime=check_H2prime(kernel, search_budget=search_budget, seed=seed),
    )
