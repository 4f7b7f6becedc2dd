"""Joint spectral amplitudes of (superposed) parametric down-conversion processes.

All frequencies are angular, in rad/ps.  Phasematching is written in terms of
detunings ``nu = omega - omega_c`` and linearized mismatch
``x = (dk_s * nu_s + dk_i * nu_i) * L / 2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import GridTooCoarse, GridTooNarrow, ZeroNorm
from .units import fwhm_nm_to_sigma, wavelength_to_angular

DEFAULT_GAMMA = 0.193
DEFAULT_GRID_SIZE = 512
MAX_GRID_SIZE = 4096

# boundary amplitude relative to peak above which the grid is rejected
BOUNDARY_TOL = 1e-4
# sinc tails decay like 1/x; no practical grid reaches 1e-4 (see DESIGN notes in README)
BOUNDARY_TOL_SINC = 2e-2


class Shape(enum.Enum):
    SINC = "sinc"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, text: str) -> "Shape":
        key = text.strip().lower().replace("_", "").replace("-", "")
        if key in ("sinc",):
            return cls.SINC
        if key in ("gaussian", "gaussianapprox", "gauss"):
            return cls.GAUSSIAN
        raise ValueError(f"unknown phasematching shape {text!r}")


@dataclass(frozen=True)
class PumpModel:
    """Gaussian pump envelope centred on ``2 * omega_c``; ``sigma`` is the amplitude std."""

    omega_c: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.omega_c) and self.omega_c > 0):
            raise ValueError(f"omega_c must be finite and positive, got {self.omega_c}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and positive, got {self.sigma}")

    @classmethod
    def from_wavelength(cls, wavelength_nm: float, fwhm_nm: float) -> "PumpModel":
        """Pump given by centre wavelength and spectral FWHM, both in nm."""
        omega_p = wavelength_to_angular(wavelength_nm)
        return cls(omega_c=omega_p / 2.0, sigma=fwhm_nm_to_sigma(wavelength_nm, fwhm_nm))


@dataclass(frozen=True)
class PhasematchModel:
    length: float
    dk_s: float
    dk_i: float
    gamma: float = DEFAULT_GAMMA
    shape: Shape = Shape.GAUSSIAN

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"crystal length must be positive, got {self.length}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not (math.isfinite(self.tau_plus) and math.isfinite(self.tau_minus)):
            raise ValueError("group-delay mismatches must be finite")

    @property
    def tau_plus(self) -> float:
        return (self.dk_s + self.dk_i) * self.length / 2.0

    @property
    def tau_minus(self) -> float:
        return (self.dk_s - self.dk_i) * self.length / 2.0

    @classmethod
    def from_taus(cls, tau_plus: float, tau_minus: float, length: float = 1.0, **kw) -> "PhasematchModel":
        return cls(length=length, dk_s=(tau_plus + tau_minus) / length,
                   dk_i=(tau_plus - tau_minus) / length, **kw)


@dataclass(frozen=True)
class SuperpositionModel:
    """Second process displaced by ``delta_omega`` with complex weight ``r * exp(i phi)``."""

    delta_omega: float
    r: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta_omega):
            raise ValueError("delta_omega must be finite")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValueError(f"r must be >= 0, got {self.r}")
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")

    @property
    def rho(self) -> float:
        return 2.0 * self.r / (1.0 + self.r**2)

    @staticmethod
    def r_from_rho(rho: float) -> float:
        """Inverse of ``rho = 2r/(1+r^2)`` on the branch ``r <= 1``."""
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {rho}")
        if rho == 0.0:
            return 0.0
        return (1.0 - math.sqrt(1.0 - rho * rho)) / rho


@dataclass(frozen=True)
class ProcessModel:
    pump: PumpModel
    phasematch: PhasematchModel
    superposition: Optional[SuperpositionModel] = None

    @property
    def omega_c(self) -> float:
        return self.pump.omega_c

    @property
    def delta_omega(self) -> float:
        return self.superposition.delta_omega if self.superposition else 0.0

    @property
    def rho(self) -> float:
        return self.superposition.rho if self.superposition else 0.0

    def with_shape(self, shape: Shape) -> "ProcessModel":
        return replace(self, phasematch=replace(self.phasematch, shape=shape))

    def single(self) -> "ProcessModel":
        """The undisplaced single process."""
        return replace(self, superposition=None)


def trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    h = axis[1] - axis[0]
    w = np.full(axis.shape, h)
    w[0] = w[-1] = h / 2.0
    return w


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Sampled joint spectral amplitude, ``amplitude[i_s, i_i]``."""

    omega_s: np.ndarray
    omega_i: np.ndarray
    amplitude: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("omega_s", "omega_i"):
            ax = np.asarray(getattr(self, name), dtype=float)
            if ax.ndim != 1 or ax.size < 2:
                raise ValueError(f"{name} must be a 1-D axis with at least two samples")
            d = np.diff(ax)
            if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
                raise ValueError(f"{name} must be uniformly spaced and increasing")
            ax.setflags(write=False)
            object.__setattr__(self, name, ax)
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != (self.omega_s.size, self.omega_i.size):
            raise ValueError(f"amplitude shape {amp.shape} does not match axes "
                             f"({self.omega_s.size}, {self.omega_i.size})")
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitude contains non-finite entries")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)

    @property
    def shape(self) -> tuple[int, int]:
        return self.amplitude.shape

    @property
    def spacing(self) -> tuple[float, float]:
        return float(self.omega_s[1] - self.omega_s[0]), float(self.omega_i[1] - self.omega_i[0])

    @property
    def same_axes(self) -> bool:
        return self.omega_s.size == self.omega_i.size and np.allclose(
            self.omega_s, self.omega_i, rtol=0, atol=1e-9 * self.spacing[0])

    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        return trapezoid_weights(self.omega_s), trapezoid_weights(self.omega_i)

    def norm(self) -> float:
        """Trapezoidal L2 norm."""
        ws, wi = self.weights()
        return float(np.sqrt(ws @ (np.abs(self.amplitude) ** 2) @ wi))

    def normalized(self) -> "SpectralGrid":
        n = self.norm()
        if not n > 0:
            raise ZeroNorm("joint spectral amplitude has zero norm")
        return SpectralGrid(self.omega_s, self.omega_i, self.amplitude / n, dict(self.meta))

    def transpose(self) -> "SpectralGrid":
        """Exchange signal and idler."""
        return SpectralGrid(self.omega_i, self.omega_s, self.amplitude.T, dict(self.meta))

    def scaled(self, factor: complex) -> "SpectralGrid":
        return SpectralGrid(self.omega_s, self.omega_i, self.amplitude * factor, dict(self.meta))


def pump_envelope(pump: PumpModel, omega_sum):
    """Pump amplitude at sum frequency ``omega_s + omega_i``; peak 1 at ``2*omega_c``."""
    detuning = 2.0 * pump.omega_c - np.asarray(omega_sum, dtype=float)
    return np.exp(-detuning**2 / (2.0 * pump.sigma**2)).astype(complex)


def mismatch(pm: PhasematchModel, nu_s, nu_i):
    """Linearized ``Delta k L / 2`` for detunings ``nu_s``, ``nu_i``."""
    return (pm.dk_s * np.asarray(nu_s, dtype=float) + pm.dk_i * np.asarray(nu_i, dtype=float)) * pm.length / 2.0


def phasematching(pm: PhasematchModel, nu_s, nu_i):
    x = mismatch(pm, nu_s, nu_i)
    if pm.shape is Shape.SINC:
        mag = np.sinc(x / np.pi)
    else:
        mag = np.exp(-pm.gamma * x**2)
    return mag * np.exp(-1j * x)


@dataclass(frozen=True)
class GridSpec:
    """Grid request.  ``None`` fields are derived from the model."""

    size: Optional[int] = None
    half_span: Optional[float] = None

    def __post_init__(self):
        if self.size is not None and self.size < 16:
            raise ValueError("grid size must be at least 16")
        if self.half_span is not None and not self.half_span > 0:
            raise ValueError("half_span must be positive")


def _phasematch_extent(pm: PhasematchModel, tol: float) -> float:
    """Mismatch |x| beyond which the phasematching magnitude stays below ``tol``."""
    if pm.shape is Shape.SINC:
        return 1.0 / tol
    return math.sqrt(math.log(1.0 / tol) / pm.gamma)


def feature_width(model: ProcessModel) -> float:
    """Narrowest 1/e amplitude half-width of the JSA along either frequency axis."""
    pm = model.phasematch
    k = max(abs(pm.dk_s), abs(pm.dk_i)) * pm.length / 2.0
    pump_w = math.sqrt(2.0) * model.pump.sigma
    if pm.shape is Shape.SINC:
        # quarter of the main lobe (zeros at |x| = pi)
        pm_w = math.pi / 2.0
    else:
        pm_w = 1.0 / math.sqrt(pm.gamma)
    return min(pump_w, pm_w / k) if k > 0 else pump_w


def required_half_span(model: ProcessModel, tol: float = BOUNDARY_TOL * 0.1) -> float:
    """Half-width about omega_c enclosing every JSA sample with amplitude above ``tol``.

    Bounds the parallelogram ``|S| <= S_max``, ``|x| <= x_max`` (S = nu_s + nu_i)
    and adds the displacement of the superposed processes.
    """
    pm = model.phasematch
    a = pm.dk_s * pm.length / 2.0
    b = pm.dk_i * pm.length / 2.0
    if abs(a - b) < 1e-12:
        raise GridTooNarrow("tau_minus = 0: the amplitude is not confined along the difference frequency")
    s_max = model.pump.sigma * math.sqrt(2.0 * math.log(1.0 / tol))
    x_max = _phasematch_extent(pm, tol if pm.shape is Shape.GAUSSIAN else BOUNDARY_TOL_SINC * 0.5)
    extent = 0.0
    for s in (-s_max, s_max):
        for x in (-x_max, x_max):
            nu_s = (x - b * s) / (a - b)
            nu_i = s - nu_s
            extent = max(extent, abs(nu_s), abs(nu_i))
    return extent + abs(model.delta_omega) / 2.0


def make_axis(model: ProcessModel, spec: Optional[GridSpec] = None) -> np.ndarray:
    """Absolute frequency axis shared by signal and idler."""
    spec = spec or GridSpec()
    half = spec.half_span if spec.half_span is not None else required_half_span(model)
    if spec.size is not None:
        n = spec.size
    else:
        h_target = feature_width(model) / 3.0
        n = max(DEFAULT_GRID_SIZE, int(math.ceil(2.0 * half / h_target)) + 1)
        n = min(MAX_GRID_SIZE, n + (n % 2 == 0))  # odd: omega_c sits on a sample
    return model.omega_c + np.linspace(-half, half, n)


def _check_resolution(model: ProcessModel, h: float) -> None:
    width = feature_width(model)
    if h > width / 2.0:
        raise GridTooCoarse(
            f"grid spacing {h:.4g} rad/ps exceeds half the narrowest spectral feature "
            f"({width:.4g} rad/ps); increase grid size")


def _check_boundary(amp: np.ndarray, tol: float) -> None:
    peak = np.max(np.abs(amp))
    edge = max(np.max(np.abs(amp[0, :])), np.max(np.abs(amp[-1, :])),
               np.max(np.abs(amp[:, 0])), np.max(np.abs(amp[:, -1])))
    if edge > tol * peak:
        raise GridTooNarrow(
            f"boundary amplitude {edge / peak:.3g} of peak exceeds {tol:g}; widen the grid")


def process_amplitude(model: ProcessModel, nu_s, nu_i):
    """Unnormalized ``F = f+ + r e^{i phi} f-`` (or the single process) at detunings."""
    nu_s = np.asarray(nu_s, dtype=float)
    nu_i = np.asarray(nu_i, dtype=float)
    alpha = pump_envelope(model.pump, 2.0 * model.omega_c + nu_s + nu_i)
    sup = model.superposition
    if sup is None:
        return alpha * phasematching(model.phasematch, nu_s, nu_i)
    half = sup.delta_omega / 2.0
    f_plus = phasematching(model.phasematch, nu_s + half, nu_i - half)
    f_minus = phasematching(model.phasematch, nu_s - half, nu_i + half)
    return alpha * (f_plus + sup.r * np.exp(1j * sup.phi) * f_minus)


def build_jsa(model: ProcessModel, grid: Optional[GridSpec] = None) -> SpectralGrid:
    """Sample the joint spectral amplitude on a square grid and normalize it to unit L2 norm."""
    axis = make_axis(model, grid)
    h = axis[1] - axis[0]
    _check_resolution(model, h)
    nu = axis - model.omega_c
    amp = process_amplitude(model, nu[:, None], nu[None, :])
    tol = BOUNDARY_TOL_SINC if model.phasematch.shape is Shape.SINC else BOUNDARY_TOL
    _check_boundary(amp, tol)
    meta = {
        "omega_c": model.omega_c,
        "sigma": model.pump.sigma,
        "length": model.phasematch.length,
        "dk_s": model.phasematch.dk_s,
        "dk_i": model.phasematch.dk_i,
        "gamma": model.phasematch.gamma,
        "shape": model.phasematch.shape.value,
    }
    if model.superposition is not None:
        meta.update(delta_omega=model.superposition.delta_omega,
                    r=model.superposition.r, phi=model.superposition.phi)
    return SpectralGrid(axis, axis.copy(), amp, meta).normalized()


def reference_model(delta_omega_thz: Optional[float] = 1.35, r: float = 1.0, phi: float = 0.0,
                     shape: Shape = Shape.GAUSSIAN) -> ProcessModel:
    """404 nm / 1.4 nm FWHM pump, 12 mm KTP-like crystal.

    The group-delay mismatches (0.60 and 0.30 ps/mm) are illustrative values
    for type-II KTP near 808 nm, not measured ones.
    """
    pump = PumpModel.from_wavelength(404.0, 1.4)
    pm = PhasematchModel(length=12.0, dk_s=0.60, dk_i=0.30, shape=shape)
    sup = None
    if delta_omega_thz is not None:
        sup = SuperpositionModel(delta_omega=2.0 * math.pi * delta_omega_thz, r=r, phi=phi)
    return ProcessModel(pump, pm, sup)
