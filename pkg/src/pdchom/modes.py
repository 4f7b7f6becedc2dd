"""Hermite broadband-mode algebra: basis functions, projections, Schmidt decomposition."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import BasisEscapesGrid, OrderOutOfRange
from .spectra import SpectralGrid, trapezoid_weights

DEFAULT_MAX_ORDER = 5
ESCAPE_TOL = 1e-4
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HermiteBasis:
    center: float
    scale: float
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if int(self.max_order) != self.max_order or self.max_order < 1:
            raise ValueError(f"max_order must be an integer >= 1, got {self.max_order}")

    def functions(self, omega) -> np.ndarray:
        """All basis functions up to ``max_order``; shape ``(max_order + 1, *omega.shape)``.

        Uses the three-term recurrence on normalized functions,
        ``u[n+1] = x sqrt(2/(n+1)) u[n] - sqrt(n/(n+1)) u[n-1]``.
        """
        x = (np.asarray(omega, dtype=float) - self.center) / self.scale
        out = np.empty((self.max_order + 1,) + x.shape)
        out[0] = math.pi**-0.25 * np.exp(-x * x / 2.0)
        out[1] = math.sqrt(2.0) * x * out[0]
        for n in range(1, self.max_order):
            out[n + 1] = x * math.sqrt(2.0 / (n + 1)) * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
        return out / math.sqrt(self.scale)


def hermite_function(basis: HermiteBasis, n: int, omega):
    if not 0 <= n <= basis.max_order:
        raise OrderOutOfRange(f"order {n} outside 0..{basis.max_order}")
    val = basis.functions(omega)[n]
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    coefficients: np.ndarray
    captured_weight: float
    schmidt_values: np.ndarray
    basis: Optional[HermiteBasis] = None

    @property
    def leading_weight(self) -> float:
        """Largest Schmidt weight; 1 for a separable state."""
        return float(self.schmidt_values[0] ** 2) if self.schmidt_values.size else 0.0

    @property
    def schmidt_number(self) -> float:
        p = self.schmidt_values**2
        return float(p.sum() ** 2 / np.sum(p**2))


def _escape_check(basis: HermiteBasis, axis: np.ndarray) -> None:
    u = basis.functions(axis)[basis.max_order]
    inside = trapezoid_weights(axis) @ (u * u)
    if 1.0 - inside > ESCAPE_TOL:
        raise BasisEscapesGrid(
            f"order-{basis.max_order} Hermite function keeps only {inside:.6f} of its mass on the grid")


def project(jsa: SpectralGrid, basis: HermiteBasis) -> ModeDecomposition:
    """Coefficients ``c[i, j]`` of ``u_i(ws) u_j(wi)`` by trapezoidal quadrature."""
    _escape_check(basis, jsa.omega_s)
    _escape_check(basis, jsa.omega_i)
    ws, wi = jsa.weights()
    us = basis.functions(jsa.omega_s) * ws
    ui = basis.functions(jsa.omega_i) * wi
    c = us @ jsa.amplitude @ ui.T
    sv = np.linalg.svd(c, compute_uv=False)
    return ModeDecomposition(c, float(np.sum(np.abs(c) ** 2)), sv, basis)


def reconstruct(decomp: ModeDecomposition, jsa: SpectralGrid) -> np.ndarray:
    """Resynthesize the amplitude from its mode coefficients on the grid of ``jsa``."""
    us = decomp.basis.functions(jsa.omega_s)
    ui = decomp.basis.functions(jsa.omega_i)
    return us.T @ decomp.coefficients @ ui


def singlet_overlap(jsa: SpectralGrid, basis: HermiteBasis) -> float:
    """``|<psi-|F>|^2`` with ``psi- = (u0 u1 - u1 u0)/sqrt(2)``."""
    c = project(jsa, basis).coefficients
    return float(abs((c[0, 1] - c[1, 0]) / math.sqrt(2.0)) ** 2)


def schmidt_decompose(jsa: SpectralGrid, cutoff: float = 1e-12) -> ModeDecomposition:
    """Schmidt values from the SVD of the quadrature-weighted amplitude.

    Values below ``cutoff`` times the largest are dropped.  The returned
    coefficient matrix is diagonal in the Schmidt basis.
    """
    ws, wi = jsa.weights()
    scaled = np.sqrt(ws)[:, None] * jsa.amplitude * np.sqrt(wi)[None, :]
    sv = np.linalg.svd(scaled, compute_uv=False)
    weight = float(np.sum(sv**2))
    head = sv[sv > cutoff * sv[0]] if sv.size else sv
    return ModeDecomposition(np.diag(head).astype(complex), weight, head)


def product_jsa(f_s, f_i, axis) -> SpectralGrid:
    """Normalized ``f_s(ws) f_i(wi)`` sampled on a shared axis."""
    axis = np.asarray(axis, dtype=float)
    amp = np.multiply.outer(np.asarray(f_s, dtype=complex), np.asarray(f_i, dtype=complex))
    return SpectralGrid(axis, axis.copy(), amp).normalized()


def basis_axis(basis: HermiteBasis, samples: int = 513, half_width: float = 12.0) -> np.ndarray:
    return basis.center + basis.scale * np.linspace(-half_width, half_width, samples)


def singlet_jsa(basis: HermiteBasis, axis: Optional[np.ndarray] = None) -> SpectralGrid:
    """Maximally entangled ``(u0(ws) u1(wi) - u1(ws) u0(wi)) / sqrt(2)``."""
    axis = basis_axis(basis) if axis is None else np.asarray(axis, dtype=float)
    u = basis.functions(axis)
    amp = (np.outer(u[0], u[1]) - np.outer(u[1], u[0])) / math.sqrt(2.0)
    return SpectralGrid(axis, axis.copy(), amp, {"state": "singlet"}).normalized()


def _scale_bounds(jsa: SpectralGrid, max_order: int) -> tuple[float, float]:
    h = jsa.spacing[0]
    half = min(jsa.omega_s[-1] - jsa.omega_s[0], jsa.omega_i[-1] - jsa.omega_i[0]) / 2.0
    reach = math.sqrt(2 * max_order + 1)
    # smallest scale still sampled a few times per lobe; largest still inside the grid
    return 2.0 * h * reach, half / (reach + 4.0)


def optimize_basis(jsa: SpectralGrid, initial: HermiteBasis, scan: int = 24,
                   tol: float = 1e-5) -> HermiteBasis:
    """Scale maximizing the singlet overlap, centre held fixed.

    A coarse log-spaced scan brackets the optimum, golden-section search
    refines it.  The initial basis is returned unless the result is a strict
    improvement.
    """
    lo, hi = _scale_bounds(jsa, initial.max_order)
    if not lo < hi:
        return initial

    def overlap(log_s: float) -> float:
        b = replace(initial, scale=math.exp(log_s))
        try:
            return singlet_overlap(jsa, b)
        except BasisEscapesGrid:
            return -1.0

    start = overlap(math.log(initial.scale)) if lo <= initial.scale <= hi else -1.0
    grid = np.linspace(math.log(lo), math.log(hi), scan)
    vals = np.array([overlap(s) for s in grid])
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, scan - 1)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = overlap(c), overlap(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = overlap(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = overlap(d)
    best_s, best = max([(grid[k], vals[k]), (c, fc), (d, fd)], key=lambda t: t[1])
    if best > start + 1e-12:
        return replace(initial, scale=math.exp(best_s))
    return initial
