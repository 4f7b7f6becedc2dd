"""Hong-Ou-Mandel coincidence probability: numeric, separable and closed-form engines."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (DegenerateGroupDelay, DelayTooLargeForGrid, EmptyTrace,
                     NonFiniteData, NumericalError, ZeroNorm)
from .spectra import ProcessModel, SpectralGrid, trapezoid_weights

CLAMP_TOL = 1e-9
DEGENERATE_TAU_MINUS = 1e-6
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True, eq=False)
class HomTrace:
    delays: np.ndarray
    probabilities: np.ndarray
    meta: dict = field(default_factory=dict)
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float).reshape(-1)
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if d.shape != p.shape:
            raise ValueError(f"delays ({d.size}) and probabilities ({p.size}) differ in length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(p))):
            raise NonFiniteData("trace contains non-finite values")
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise ValueError("delays must be strictly increasing")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("coincidence probabilities must lie in [0, 1]")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "probabilities", p)
        if self.stderr is not None:
            s = np.asarray(self.stderr, dtype=float).reshape(-1)
            if s.shape != d.shape:
                raise ValueError("stderr must match delays in length")
            object.__setattr__(self, "stderr", s)

    def __len__(self) -> int:
        return self.delays.size


def _clamp(p):
    """Clamp round-off excursions past [0, 1]; larger excursions are errors."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -CLAMP_TOL) or np.any(p > 1 + CLAMP_TOL):
        raise NumericalError(f"coincidence probability out of range: {p.min():.3g}..{p.max():.3g}")
    return np.clip(p, 0.0, 1.0)


class ExchangeKernel:
    """Diagonal sums of ``f*(ws, wi) f(wi, ws)`` with trapezoid weights.

    On a grid whose signal and idler axes coincide, ``ws - wi`` takes the
    values ``k * h``; grouping the double sum by ``k`` makes every delay a
    single sum over ``2N - 1`` terms, with no approximation.
    """

    def __init__(self, jsa: SpectralGrid):
        if not jsa.same_axes:
            raise ValueError("numeric HOM engine needs identical signal and idler axes")
        n = jsa.omega_s.size
        w = trapezoid_weights(jsa.omega_s)
        f = jsa.amplitude
        prod = (w[:, None] * w[None, :]) * np.conj(f) * f.T
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + (n - 1)).ravel()
        self.diagonals = (np.bincount(idx, weights=prod.real.ravel(), minlength=2 * n - 1)
                          + 1j * np.bincount(idx, weights=prod.imag.ravel(), minlength=2 * n - 1))
        self.h = jsa.spacing[0]
        self.offsets = (np.arange(2 * n - 1) - (n - 1)) * self.h
        self.span = jsa.omega_s[-1] - jsa.omega_s[0]
        self.samples = n
        self.norm2 = float(w @ (np.abs(f) ** 2) @ w)
        if not self.norm2 > 0:
            raise ZeroNorm("joint spectral amplitude has zero norm")

    @property
    def max_delay(self) -> float:
        return math.pi * self.samples / self.span

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        bad = np.abs(tau) >= self.max_delay
        if np.any(bad):
            t = float(np.atleast_1d(tau)[np.atleast_1d(bad)][0])
            raise DelayTooLargeForGrid(
                f"|tau| = {abs(t):.4g} ps not resolved by the grid (limit {self.max_delay:.4g} ps)")
        phase = np.exp(-1j * np.multiply.outer(tau, self.offsets))
        overlap = (phase @ self.diagonals).real / self.norm2
        return _clamp(0.5 - 0.5 * overlap)


def hom_numeric(jsa: SpectralGrid, tau):
    """Coincidence probability of a sampled JSA at delay(s) ``tau`` (ps)."""
    p = ExchangeKernel(jsa)(tau)
    return float(p) if p.ndim == 0 else p


def hom_separable(f1, f2, tau, axis):
    """Coincidence probability of a product state ``f1(ws) f2(wi)``.

    ``f1`` and ``f2`` are samples on the shared uniform ``axis``.  The result
    never exceeds 1/2.
    """
    f1 = np.asarray(f1, dtype=complex)
    f2 = np.asarray(f2, dtype=complex)
    axis = np.asarray(axis, dtype=float)
    w = trapezoid_weights(axis)
    n1 = w @ np.abs(f1) ** 2
    n2 = w @ np.abs(f2) ** 2
    if not (n1 > 0 and n2 > 0):
        raise ZeroNorm("separable amplitudes must have nonzero norm")
    tau = np.asarray(tau, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(tau, axis))
    overlap = phase @ (w * np.conj(f1) * f2)
    frac = np.abs(overlap) ** 2 / (n1 * n2)
    p = _clamp(0.5 - 0.5 * frac)
    return float(p) if p.ndim == 0 else p


def hom_closed_form(tau, *, tau_minus, tau_plus, sigma, delta_omega, rho, phi, gamma):
    """Closed-form probability for the two-Gaussian superposition (vectorized over tau).

    ``phi`` enters the cosines as ``cos(delta_omega * t - phi)``.
    """
    if abs(tau_minus) < DEGENERATE_TAU_MINUS:
        raise DegenerateGroupDelay(
            f"|tau_minus| = {abs(tau_minus):.3g} ps: the dip envelope is singular at tau_minus = 0")
    tau = np.asarray(tau, dtype=float)
    c_minus = gamma / 2.0 * delta_omega**2 * tau_minus**2
    c_plus = 1.0 + gamma / 2.0 * sigma**2 * tau_plus**2
    envelope = np.exp(-(tau - tau_minus) ** 2 / (2.0 * gamma * tau_minus**2)) / (2.0 * math.sqrt(c_plus))
    fringes = np.exp(-c_minus / c_plus) + rho * np.cos(delta_omega * tau - phi)
    norm = 1.0 + np.exp(-c_minus) * rho * math.cos(delta_omega * tau_minus - phi)
    return 0.5 - envelope * fringes / norm


def analytic_params(model: ProcessModel) -> dict:
    pm = model.phasematch
    sup = model.superposition
    return dict(
        tau_minus=pm.tau_minus,
        tau_plus=pm.tau_plus,
        sigma=model.pump.sigma,
        delta_omega=sup.delta_omega if sup else 0.0,
        rho=sup.rho if sup else 0.0,
        phi=sup.phi if sup else 0.0,
        gamma=pm.gamma,
    )


def hom_analytic(model: ProcessModel, tau):
    """Closed-form coincidence probability of ``model`` at delay(s) ``tau``.

    The model must use the Gaussian phasematching approximation; the shape
    field is not consulted so that a sinc model can be compared against its
    Gaussian stand-in.  Note the phase convention: this formula matches a
    numerically sampled superposition with weight ``r * exp(-i phi)``
    (see :func:`mirrored_phase`).
    """
    p = _clamp(hom_closed_form(tau, **analytic_params(model)))
    return float(p) if p.ndim == 0 else p


def mirrored_phase(model: ProcessModel) -> ProcessModel:
    """Same model with the superposition phase negated.

    Sampling ``f+ + r e^{i phi} f-`` and integrating numerically yields
    ``cos(delta_omega * tau + phi)`` where the closed form reads
    ``cos(delta_omega * tau - phi)``; the two agree once phi is mirrored.
    """
    from dataclasses import replace

    if model.superposition is None:
        return model
    return replace(model, superposition=replace(model.superposition, phi=-model.superposition.phi))


class Engine(str, enum.Enum):
    NUMERIC = "numeric"
    ANALYTIC = "analytic"


def sweep(engine: Union[Engine, str], source, delays, meta: Optional[dict] = None) -> HomTrace:
    """Evaluate an engine over a strictly increasing delay array.

    ``source`` is a :class:`SpectralGrid` for the numeric engine and a
    :class:`ProcessModel` for the analytic one.
    """
    engine = Engine(engine)
    delays = np.asarray(delays, dtype=float).reshape(-1)
    if delays.size > 1 and np.any(np.diff(delays) <= 0):
        raise ValueError("delays must be strictly increasing")
    record = {"engine": engine.value}
    if delays.size == 0:
        return HomTrace(delays, delays.copy(), {**record, **(meta or {})})
    if engine is Engine.NUMERIC:
        if not isinstance(source, SpectralGrid):
            raise TypeError("numeric engine needs a SpectralGrid")
        kernel = ExchangeKernel(source)
        probs = _with_index(kernel, delays)
        record.update({f"jsa_{k}": v for k, v in source.meta.items()})
        record.update(grid_size=source.omega_s.size,
                      grid_half_span=(source.omega_s[-1] - source.omega_s[0]) / 2.0)
    else:
        if not isinstance(source, ProcessModel):
            raise TypeError("analytic engine needs a ProcessModel")
        probs = _with_index(lambda t: hom_analytic(source, t), delays)
        record.update(analytic_params(source))
    record.update(meta or {})
    return HomTrace(delays, np.atleast_1d(probs), record)


def _with_index(fn, delays):
    try:
        return np.atleast_1d(fn(delays))
    except NumericalError as exc:
        for k, t in enumerate(delays):
            try:
                fn(np.array([t]))
            except NumericalError as inner:
                raise type(inner)(f"delay index {k} (tau = {t:.6g} ps): {inner}") from exc
        raise


class Verdict(str, enum.Enum):
    ENTANGLED = "Entangled"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class WitnessResult:
    verdict: Verdict
    max_probability: float
    delay_at_max: float
    epsilon: float


def default_guard_band(trace: HomTrace) -> float:
    """Three standard errors at the maximum sample when the trace carries them."""
    if trace.stderr is None:
        return DEFAULT_EPSILON
    k = int(np.argmax(trace.probabilities))
    return 3.0 * float(trace.stderr[k])


def witness(trace: HomTrace, epsilon: Optional[float] = None) -> WitnessResult:
    """One-sided entanglement test: ``max p > 1/2 + epsilon`` certifies entanglement."""
    if len(trace) == 0:
        raise EmptyTrace("witness needs at least one sample")
    if epsilon is None:
        epsilon = default_guard_band(trace)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    k = int(np.argmax(trace.probabilities))
    pmax = float(trace.probabilities[k])
    verdict = Verdict.ENTANGLED if pmax > 0.5 + epsilon else Verdict.INCONCLUSIVE
    return WitnessResult(verdict, pmax, float(trace.delays[k]), float(epsilon))


def beating_period(trace: HomTrace, region: Optional[tuple[float, float]] = None,
                   min_lag: Optional[float] = None) -> float:
    """Lag (ps) of the first autocorrelation maximum of ``p - mean`` inside ``region``.

    ``min_lag`` skips the zero-lag lobe; by default the first zero crossing
    of the autocorrelation is used.
    """
    d, p = trace.delays, trace.probabilities
    if region is not None:
        keep = (d >= region[0]) & (d <= region[1])
        d, p = d[keep], p[keep]
    if d.size < 4:
        raise EmptyTrace("too few samples for an autocorrelation")
    x = p - p.mean()
    ac = np.correlate(x, x, mode="full")[x.size - 1:]
    step = d[1] - d[0]
    if min_lag is None:
        neg = np.nonzero(ac < 0)[0]
        start = int(neg[0]) if neg.size else 1
    else:
        start = max(1, int(round(min_lag / step)))
    k = start + int(np.argmax(ac[start:]))
    return k * step
