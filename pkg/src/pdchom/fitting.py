"""Least-squares fitting of the closed-form HOM model to measured or synthetic traces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateGroupDelay, NonFiniteData, TooFewSamples
from .homi import HomTrace, hom_analytic, hom_closed_form, sweep
from .spectra import DEFAULT_GAMMA, ProcessModel, Shape, build_jsa, GridSpec

MODEL_PARAMS = ("delta_omega", "rho", "phi", "tau_minus", "tau_plus", "sigma")
NUISANCE_DEFAULTS = {"visibility": 1.0, "baseline": 0.5, "tau_offset": 0.0}
ALL_PARAMS = MODEL_PARAMS + ("r",) + tuple(NUISANCE_DEFAULTS)

UNITS = {
    "delta_omega": "rad/ps", "rho": "", "r": "", "phi": "rad", "tau_minus": "ps",
    "tau_plus": "ps", "sigma": "rad/ps", "visibility": "", "baseline": "", "tau_offset": "ps",
}

DEFAULT_BOUNDS = {
    "delta_omega": (0.0, math.inf),
    "rho": (0.0, 1.0),
    "r": (0.0, 1.0),
    "phi": (-math.inf, math.inf),
    "tau_minus": (-math.inf, math.inf),
    "tau_plus": (-math.inf, math.inf),
    "sigma": (1e-9, math.inf),
    "visibility": (1e-9, 1.0),
    "baseline": (0.0, 1.0),
    "tau_offset": (-math.inf, math.inf),
}

_PENALTY = 1e12


@dataclass
class FitSpec:
    """Which parameters to fit, where to start, and the box they live in.

    ``initial`` must hold a value for every model parameter (free or fixed);
    ``r`` may stand in for ``rho``.  Nuisance parameters default to a
    perfect-visibility trace with baseline 1/2.
    """

    free: Sequence[str]
    initial: dict
    bounds: dict = field(default_factory=dict)
    gamma: float = DEFAULT_GAMMA
    restarts: int = 8
    seed: int = 0
    agreement: float = 1e-4

    def __post_init__(self):
        self.free = tuple(self.free)
        unknown = [p for p in self.free if p not in ALL_PARAMS]
        if unknown:
            raise ValueError(f"unknown free parameters: {unknown}")
        if len(set(self.free)) != len(self.free):
            raise ValueError("duplicate free parameters")
        if "rho" in self.free and "r" in self.free:
            raise ValueError("fit either rho or r, not both")
        init = dict(NUISANCE_DEFAULTS)
        init.update(self.initial)
        if "r" in init and "rho" not in init:
            init["rho"] = 2 * init["r"] / (1 + init["r"] ** 2)
        if "r" in self.free and "r" not in init:
            rho = init["rho"]
            init["r"] = 0.0 if rho == 0 else (1 - math.sqrt(1 - rho * rho)) / rho
        missing = [p for p in MODEL_PARAMS if p not in init]
        if missing:
            raise ValueError(f"initial values missing for {missing}")
        self.initial = {k: float(v) for k, v in init.items()}
        bounds = dict(DEFAULT_BOUNDS)
        bounds.update({k: (float(lo), float(hi)) for k, (lo, hi) in self.bounds.items()})
        for name in ("rho", "r"):
            lo, hi = bounds[name]
            if lo < 0 or hi > 1:
                raise ValueError(f"{name} bounds must lie within [0, 1]")
        lo, hi = bounds["visibility"]
        if lo <= 0 or hi > 1:
            raise ValueError("visibility bounds must lie within (0, 1]")
        for p in self.free:
            lo, hi = bounds[p]
            if not lo <= self.initial[p] <= hi:
                raise ValueError(f"initial {p} = {self.initial[p]} outside bounds [{lo}, {hi}]")
        self.bounds = bounds


@dataclass
class FitResult:
    params: dict
    residual_rms: float
    iterations: int
    converged: bool
    param_stderr: dict
    free: tuple
    restart_params: list = field(default_factory=list)
    restart_costs: list = field(default_factory=list)
    history: list = field(default_factory=list)
    gamma: float = DEFAULT_GAMMA

    def curve(self, delays) -> np.ndarray:
        return model_curve(delays, self.params, self.gamma)

    def units(self) -> dict:
        return {k: UNITS[k] for k in self.params}


def model_curve(delays, params: dict, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """``baseline + visibility * (p(tau + tau_offset) - 1/2)`` with the closed-form p."""
    rho = params["rho"] if "r" not in params else 2 * params["r"] / (1 + params["r"] ** 2)
    tau = np.asarray(delays, dtype=float) + params.get("tau_offset", 0.0)
    p = hom_closed_form(tau, tau_minus=params["tau_minus"], tau_plus=params["tau_plus"],
                        sigma=params["sigma"], delta_omega=params["delta_omega"], rho=rho,
                        phi=params["phi"], gamma=gamma)
    return params.get("baseline", 0.5) + params.get("visibility", 1.0) * (p - 0.5)


def _full_params(spec: FitSpec, x: np.ndarray) -> dict:
    params = dict(spec.initial)
    params.update(zip(spec.free, map(float, x)))
    if "r" in spec.free:
        r = params["r"]
        params["rho"] = 2 * r / (1 + r * r)
    params.pop("r", None)
    return params


def _start_points(spec: FitSpec) -> list[np.ndarray]:
    x0 = np.array([spec.initial[p] for p in spec.free])
    starts = [x0]
    for k in range(1, spec.restarts):
        rng = np.random.default_rng(spec.seed + k)
        x = x0.copy()
        for j, p in enumerate(spec.free):
            lo, hi = spec.bounds[p]
            if p == "phi":
                x[j] = x0[j] + 2 * math.pi * k / spec.restarts
                continue
            width = hi - lo if math.isfinite(hi - lo) else 0.0
            scale = 0.05 * width if width > 0 else 0.05 * max(abs(x0[j]), 1e-3)
            x[j] = float(np.clip(x0[j] + scale * rng.standard_normal(), lo, hi))
        starts.append(x)
    return starts


def _simplex(spec: FitSpec, x0: np.ndarray) -> np.ndarray:
    n = x0.size
    pts = np.tile(x0, (n + 1, 1))
    for j, p in enumerate(spec.free):
        lo, hi = spec.bounds[p]
        step = 0.3 if p == "phi" else 0.05 * max(abs(x0[j]), 1e-2)
        if x0[j] + step > hi:
            step = -step
        if x0[j] + step < lo:
            step = (hi - lo) / 4.0
        pts[j + 1, j] += step
    return pts


def _circular(p: str, a: float, b: float) -> float:
    d = abs(a - b)
    return min(d % (2 * math.pi), 2 * math.pi - d % (2 * math.pi)) if p == "phi" else d


def _recorder(history: list):
    def record(intermediate_result):
        history.append(float(intermediate_result.fun))
    return record


def fit_trace(data: HomTrace, spec: FitSpec) -> FitResult:
    """Multi-start bounded Nelder-Mead fit of the closed-form model to ``data``."""
    if not (np.all(np.isfinite(data.delays)) and np.all(np.isfinite(data.probabilities))):
        raise NonFiniteData("trace contains non-finite samples")
    k = len(spec.free)
    if len(data) < 2 * k:
        raise TooFewSamples(f"{len(data)} samples for {k} free parameters (need {2 * k})")
    tau, y = data.delays, data.probabilities

    def cost(x):
        try:
            r = model_curve(tau, _full_params(spec, x), spec.gamma) - y
        except DegenerateGroupDelay:
            return _PENALTY
        c = float(r @ r)
        return c if math.isfinite(c) else _PENALTY

    bounds = [spec.bounds[p] for p in spec.free]
    bounds = [(None if not math.isfinite(lo) else lo, None if not math.isfinite(hi) else hi)
              for lo, hi in bounds]
    runs = []
    for idx, x0 in enumerate(_start_points(spec)):
        history: list[float] = []
        res = minimize(cost, x0, method="Nelder-Mead", bounds=bounds, callback=_recorder(history),
                       options={"initial_simplex": _simplex(spec, x0), "xatol": 1e-10,
                                "fatol": 1e-16, "maxiter": 4000 * max(k, 1),
                                "maxfev": 8000 * max(k, 1), "adaptive": k > 2})
        runs.append((float(res.fun), idx, np.asarray(res.x, dtype=float), int(res.nit), history))
    runs.sort(key=lambda t: (t[0], t[1]))
    best_cost, _, best_x, nit, history = runs[0]

    converged = len(runs) == 1
    if len(runs) > 1:
        second = runs[1][2]
        converged = all(
            _circular(p, a, b) <= spec.agreement * max(abs(a), abs(b), 1e-3)
            if p != "phi" else _circular(p, a, b) <= spec.agreement * 2 * math.pi
            for p, a, b in zip(spec.free, best_x, second))

    params = _full_params(spec, best_x)
    if "r" in spec.free:
        params["r"] = float(best_x[spec.free.index("r")])
    params["phi"] = params["phi"] % (2 * math.pi)
    stderr = _stderr(spec, tau, y, best_x, best_cost)
    return FitResult(
        params=params,
        residual_rms=math.sqrt(best_cost / len(y)),
        iterations=nit,
        converged=converged,
        param_stderr=stderr,
        free=spec.free,
        restart_params=[dict(zip(spec.free, map(float, r[2]))) for r in runs],
        restart_costs=[r[0] for r in runs],
        history=history,
        gamma=spec.gamma,
    )


def _stderr(spec: FitSpec, tau, y, x, cost) -> dict:
    """Gauss-Newton standard errors from a central-difference Jacobian."""
    n, k = y.size, x.size
    if n <= k:
        return {p: math.nan for p in spec.free}
    jac = np.empty((n, k))
    for j in range(k):
        step = 1e-6 * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        jac[:, j] = (model_curve(tau, _full_params(spec, xp), spec.gamma)
                     - model_curve(tau, _full_params(spec, xm), spec.gamma)) / (2 * step)
    s2 = cost / (n - k)
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
        err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        err = np.full(k, math.nan)
    return dict(zip(spec.free, map(float, err)))


def counts_to_trace(delays, counts, outer_fraction: float = 0.2, meta: Optional[dict] = None) -> HomTrace:
    """Normalize raw coincidence counts to probabilities.

    The plateau is the mean count over the outer ``outer_fraction`` of the
    delay samples and maps to p = 1/2.  Poisson standard errors are carried
    along for the witness guard band.
    """
    delays = np.asarray(delays, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if not (np.all(np.isfinite(delays)) and np.all(np.isfinite(counts))):
        raise NonFiniteData("counts contain non-finite values")
    n = counts.size
    m = max(1, int(round(n * outer_fraction / 2)))
    plateau = float(np.mean(np.concatenate([counts[:m], counts[-m:]])))
    if not plateau > 0:
        raise NonFiniteData("outer plateau of the counts is not positive")
    p = np.clip(counts / (2 * plateau), 0.0, 1.0)
    se = np.sqrt(np.maximum(counts, 1.0)) / (2 * plateau)
    return HomTrace(delays, p, {"source": "counts", "plateau": plateau, **(meta or {})}, stderr=se)


@dataclass
class SincReport:
    delays: np.ndarray
    sinc_trace: np.ndarray
    gaussian_trace: np.ndarray
    max_sinc: float
    max_gaussian: float
    sinc_exceeds: bool
    gaussian_exceeds: bool
    l2_distance: float
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "max_p_sinc_numeric": self.max_sinc,
            "max_p_gaussian_pair_analytic": self.max_gaussian,
            "sinc_exceeds_half": self.sinc_exceeds,
            "gaussian_pair_exceeds_half": self.gaussian_exceeds,
            "l2_distance": self.l2_distance,
            "tolerance": self.tolerance,
        }


def default_delays(model: ProcessModel, samples: int = 200) -> np.ndarray:
    pm = model.phasematch
    width = max(math.sqrt(pm.gamma) * abs(pm.tau_minus), 1.0 / model.pump.sigma)
    return np.linspace(pm.tau_minus - 6 * width, pm.tau_minus + 6 * width, samples)


def discriminate_sinc(model: ProcessModel, delays=None, grid: Optional[GridSpec] = None,
                      tolerance: float = 1e-3) -> SincReport:
    """Compare the true single sinc process with its two-Gaussian stand-in.

    The sinc trace is computed numerically from the single undisplaced
    process with sinc phasematching; the stand-in (``model`` with its
    superposition, Gaussian phasematching) uses the closed form.
    """
    delays = default_delays(model) if delays is None else np.asarray(delays, dtype=float)
    sinc_jsa = build_jsa(model.single().with_shape(Shape.SINC), grid)
    p_sinc = sweep("numeric", sinc_jsa, delays).probabilities
    p_gauss = np.atleast_1d(hom_analytic(model.with_shape(Shape.GAUSSIAN), delays))
    diff2 = (p_sinc - p_gauss) ** 2
    l2 = math.sqrt(float(np.trapezoid(diff2, delays))) if delays.size > 1 else float(np.sqrt(diff2.sum()))
    return SincReport(
        delays=delays,
        sinc_trace=p_sinc,
        gaussian_trace=p_gauss,
        max_sinc=float(p_sinc.max()),
        max_gaussian=float(p_gauss.max()),
        sinc_exceeds=bool(p_sinc.max() > 0.5 + tolerance),
        gaussian_exceeds=bool(p_gauss.max() > 0.5 + tolerance),
        l2_distance=l2,
        tolerance=tolerance,
    )
