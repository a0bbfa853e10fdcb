"""Uniform periodic grid and the spectral operations built on it.

The Fourier convention is the integral one, ``f_hat(xi) = int exp(-i x xi) f(x) dx``,
so the discrete forward transform is ``spacing * fft``. Samples live on
``x_j = -L/2 + j*spacing`` and the phase factor of the shifted origin is folded
into the coefficients, which makes pure modes and analytic Fourier pairs line up
with their continuum values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "convolve_with_symbol",
    "differentiate",
    "quadrature",
]


@dataclass(frozen=True)
class Grid:
    """Periodic lattice on ``[-L/2, L/2)`` with ``n_points`` samples."""

    n_points: int
    length: float
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.spacing * np.arange(self.n_points)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Angular frequencies in transform-native (fft) order."""
        return 2.0 * np.pi * sfft.fftfreq(self.n_points, d=self.spacing)

    @cached_property
    def rfrequencies(self) -> np.ndarray:
        """Non-negative frequencies of the real-input transform."""
        return 2.0 * np.pi * sfft.rfftfreq(self.n_points, d=self.spacing)

    @cached_property
    def sorted_index(self) -> np.ndarray:
        """Index map from ascending frequency order to native order."""
        return np.argsort(self.frequencies, kind="stable")

    @property
    def nyquist_index(self) -> int:
        return self.n_points // 2

    @cached_property
    def _origin_phase(self) -> np.ndarray:
        # exp(-i xi x_0) with x_0 = -L/2; equals (-1)^k on this lattice
        return np.exp(0.5j * self.length * self.frequencies)

    def derivative_symbol(self, order: int, real: bool = False) -> np.ndarray:
        """Spectral multiplier ``(i xi)^order``.

        Odd orders drop the Nyquist mode so the operator stays real and
        antisymmetric; order 2 keeps ``-xi^2`` there.
        """
        if order not in (1, 2, 3):
            raise ValueError(f"unsupported derivative order {order}")
        key = ("dsym", order, real)
        if key not in self._cache:
            xi = (self.rfrequencies if real else self.frequencies).copy()
            if order % 2 == 1:
                if real:
                    xi[-1] = 0.0
                else:
                    xi[self.nyquist_index] = 0.0
            sym = (1j * xi) ** order
            if order == 2:
                sym = -(xi**2) + 0j
            self._cache[key] = sym
        return self._cache[key]


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def make_grid(n_points: int, length: float) -> Grid:
    """Build a grid; ``n_points`` must be a power of two (at least 8)."""
    if int(n_points) != n_points or not _is_power_of_two(int(n_points)):
        raise ValueError(f"n_points must be a power of two, got {n_points}")
    if n_points < 8:
        raise ValueError(f"n_points must be at least 8, got {n_points}")
    if not np.isfinite(length) or length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    return Grid(int(n_points), float(length))


def _check_len(grid: Grid, arr: np.ndarray) -> None:
    if arr.shape != (grid.n_points,):
        raise ValueError(f"expected {grid.n_points} samples, got shape {arr.shape}")


def forward_transform(grid: Grid, samples) -> np.ndarray:
    """Coefficients approximating ``int exp(-i x xi_k) f(x) dx`` in native order."""
    f = np.asarray(samples)
    _check_len(grid, f)
    return grid.spacing * grid._origin_phase * sfft.fft(f)


def inverse_transform(grid: Grid, coefficients) -> np.ndarray:
    """Exact inverse of :func:`forward_transform`."""
    c = np.asarray(coefficients)
    _check_len(grid, c)
    return sfft.ifft(c / grid._origin_phase) / grid.spacing


def kernel_rsymbol(grid: Grid, kernel) -> np.ndarray:
    """Kernel symbol sampled at the real-transform frequencies (cached per grid)."""
    key = ("rsym", kernel)
    if key not in grid._cache:
        grid._cache[key] = np.asarray(kernel.symbol(grid.rfrequencies), dtype=float)
    return grid._cache[key]


def kernel_symbol_full(grid: Grid, kernel) -> np.ndarray:
    """Kernel symbol sampled at the native full-transform frequencies."""
    key = ("sym", kernel)
    if key not in grid._cache:
        grid._cache[key] = np.asarray(kernel.symbol(grid.frequencies), dtype=float)
    return grid._cache[key]


def convolve_with_symbol(grid: Grid, field, kernel) -> np.ndarray:
    """Real-valued ``F^{-1}(W_hat * f_hat)`` for a real field."""
    f = np.asarray(field)
    _check_len(grid, f)
    if np.iscomplexobj(f):
        if np.max(np.abs(f.imag), initial=0.0) > 0:
            raise ValueError("convolve_with_symbol expects a real field")
        f = f.real
    if getattr(kernel, "is_identity", False):
        return np.array(f, dtype=float)
    return sfft.irfft(kernel_rsymbol(grid, kernel) * sfft.rfft(f), n=grid.n_points)


def differentiate(grid: Grid, field, order: int = 1) -> np.ndarray:
    """Spectral derivative of a real or complex field."""
    f = np.asarray(field)
    _check_len(grid, f)
    if np.isrealobj(f):
        sym = grid.derivative_symbol(order, real=True)
        return sfft.irfft(sym * sfft.rfft(f), n=grid.n_points)
    sym = grid.derivative_symbol(order)
    return sfft.ifft(sym * sfft.fft(f))


def quadrature(grid: Grid, field) -> float:
    """Rectangle rule, spectrally accurate for smooth periodic integrands."""
    f = np.asarray(field)
    _check_len(grid, f)
    return grid.spacing * np.sum(f)
