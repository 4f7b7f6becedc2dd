"""Run configuration: YAML with nested sections and mandatory unit tags.

Dimensioned values are strings such as ``"1.35 THz"`` or ``"12 mm"``.
Parsing never stops at the first problem; every diagnostic carries the
dotted field path and its line in the file.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigInvalid
from .modes import DEFAULT_MAX_ORDER, HermiteBasis
from .spectra import (DEFAULT_GAMMA, GridSpec, PhasematchModel, ProcessModel, PumpModel,
                      Shape, SuperpositionModel)
from .units import UnitError, fwhm_nm_to_sigma, parse_quantity, to_internal, wavelength_to_angular

COMMANDS = ("simulate", "decompose", "witness", "fit", "discriminate")

# fit parameter -> dimension of its unit tag (None: dimensionless)
FIT_DIMENSIONS = {
    "delta_omega": "angular_frequency", "rho": None, "r": None, "phi": "angle",
    "tau_minus": "time", "tau_plus": "time", "sigma": "angular_frequency",
    "visibility": None, "baseline": None, "tau_offset": "time",
}


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "note"
    path: str
    line: Optional[int]
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line else "file"
        return f"{self.level}: {self.path} ({where}): {self.message}"


@dataclass(frozen=True)
class DelayRange:
    start: float
    stop: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class RunConfig:
    command: str
    model: Optional[ProcessModel] = None
    grid: GridSpec = field(default_factory=GridSpec)
    delays: Optional[DelayRange] = None
    io: dict = field(default_factory=dict)
    basis: Optional[HermiteBasis] = None
    optimize_basis: bool = False
    fit: Optional[dict] = None
    noise: float = 0.0
    epsilon: Optional[float] = None
    counts: bool = False
    config_hash: str = ""
    source: Optional[Path] = None


def _load_with_lines(text: str) -> tuple[Any, dict]:
    """Plain Python data plus a map from dotted key path to 1-based line number."""
    node = yaml.compose(text, Loader=yaml.SafeLoader)
    lines: dict[str, int] = {}

    def walk(n, path):
        if isinstance(n, yaml.MappingNode):
            for k, v in n.value:
                p = f"{path}.{k.value}" if path else str(k.value)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(n, yaml.SequenceNode):
            for i, v in enumerate(n.value):
                lines[f"{path}[{i}]"] = v.start_mark.line + 1
                walk(v, f"{path}[{i}]")

    if node is not None:
        walk(node, "")
    data = yaml.safe_load(text)
    return data, lines


class _Reader:
    def __init__(self, data: dict, lines: dict):
        self.data = data if isinstance(data, dict) else {}
        self.lines = lines
        self.diags: list[Diagnostic] = []

    def error(self, path, msg):
        self.diags.append(Diagnostic("error", path, self._line(path), msg))

    def note(self, path, msg):
        self.diags.append(Diagnostic("note", path, self._line(path), msg))

    def _line(self, path):
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rpartition(".")[0]
        return None

    def get(self, path, default=None):
        cur: Any = self.data
        for part in path.split("."):
            key, _, index = part.partition("[")
            if not isinstance(cur, dict) or key not in cur:
                return default
            cur = cur[key]
            if index:
                i = int(index.rstrip("]"))
                if not isinstance(cur, list) or i >= len(cur):
                    return default
                cur = cur[i]
        return cur

    def has(self, path) -> bool:
        return self.get(path, _MISSING) is not _MISSING

    def section(self, path, required=False) -> bool:
        val = self.get(path, _MISSING)
        if val is _MISSING:
            if required:
                self.error(path, "required section missing")
            return False
        if not isinstance(val, dict):
            self.error(path, "expected a section (mapping)")
            return False
        return True

    def quantity(self, path, dimension, required=True, default=None):
        raw = self.get(path, _MISSING)
        if raw is _MISSING:
            if required:
                self.error(path, f"missing required field ({dimension.replace('_', ' ')} with unit tag)")
            return default
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            self.error(path, f"value {raw!r} has no unit tag (expected {dimension.replace('_', ' ')})")
            return default
        try:
            value = to_internal(str(raw), dimension)
        except UnitError as exc:
            self.error(path, str(exc))
            return default
        _, unit = parse_quantity(str(raw))
        if unit == "THz":
            self.note(path, f"{raw!r} read as ordinary frequency; multiplied by 2*pi "
                            f"-> {value:.6g} rad/ps")
        if not math.isfinite(value):
            self.error(path, "value must be finite")
            return default
        return value

    def number(self, path, required=False, default=None, integer=False):
        raw = self.get(path, _MISSING)
        if raw is _MISSING:
            if required:
                self.error(path, "missing required field")
            return default
        try:
            if isinstance(raw, bool):
                raise ValueError
            value = int(raw) if integer else float(raw)
            if integer and float(raw) != value:
                raise ValueError
        except (TypeError, ValueError):
            kind = "an integer" if integer else "a dimensionless number"
            self.error(path, f"expected {kind}, got {raw!r}")
            return default
        return value


_MISSING = object()


def _pump(rd: _Reader) -> Optional[PumpModel]:
    if not rd.section("model.pump", required=True):
        return None
    if rd.has("model.pump.omega_c"):
        omega_c = rd.quantity("model.pump.omega_c", "angular_frequency")
        wavelength = None
    else:
        wavelength = rd.quantity("model.pump.wavelength", "wavelength")
        omega_c = None if wavelength is None else wavelength_to_angular(wavelength) / 2.0
    if rd.has("model.pump.sigma"):
        sigma = rd.quantity("model.pump.sigma", "angular_frequency")
    elif rd.has("model.pump.fwhm"):
        fwhm = rd.quantity("model.pump.fwhm", "wavelength")
        if wavelength is None and rd.has("model.pump.omega_c"):
            rd.error("model.pump.fwhm", "a wavelength FWHM needs model.pump.wavelength")
            return None
        sigma = None if fwhm is None or wavelength is None else fwhm_nm_to_sigma(wavelength, fwhm)
    else:
        rd.error("model.pump.sigma", "missing required field (give sigma in rad/ps or fwhm in nm)")
        sigma = None
    if omega_c is None or sigma is None:
        return None
    try:
        return PumpModel(omega_c, sigma)
    except ValueError as exc:
        rd.error("model.pump", str(exc))
        return None


def _phasematch(rd: _Reader) -> Optional[PhasematchModel]:
    if not rd.section("model.phasematch", required=True):
        return None
    length = rd.quantity("model.phasematch.length", "length")
    dk_s = rd.quantity("model.phasematch.dk_s", "inverse_velocity")
    dk_i = rd.quantity("model.phasematch.dk_i", "inverse_velocity")
    gamma = rd.number("model.phasematch.gamma", default=DEFAULT_GAMMA)
    shape_raw = rd.get("model.phasematch.shape", "gaussian")
    try:
        shape = Shape.parse(str(shape_raw))
    except ValueError as exc:
        rd.error("model.phasematch.shape", str(exc))
        return None
    if None in (length, dk_s, dk_i, gamma):
        return None
    try:
        return PhasematchModel(length, dk_s, dk_i, gamma, shape)
    except ValueError as exc:
        rd.error("model.phasematch", str(exc))
        return None


def _superposition(rd: _Reader, bad: list) -> Optional[SuperpositionModel]:
    if not rd.section("model.superposition"):
        return None
    dw = rd.quantity("model.superposition.delta_omega", "angular_frequency")
    if rd.has("model.superposition.rho") and rd.has("model.superposition.r"):
        rd.error("model.superposition", "give either r or rho, not both")
    if rd.has("model.superposition.rho"):
        rho = rd.number("model.superposition.rho")
        r = None
        if rho is not None:
            try:
                r = SuperpositionModel.r_from_rho(rho)
            except ValueError as exc:
                rd.error("model.superposition.rho", str(exc))
    else:
        r = rd.number("model.superposition.r", default=1.0)
    phi = rd.quantity("model.superposition.phi", "angle", required=False, default=0.0)
    if dw is None or r is None or phi is None:
        bad.append(True)
        return None
    try:
        return SuperpositionModel(dw, r, phi)
    except ValueError as exc:
        rd.error("model.superposition", str(exc))
        bad.append(True)
        return None


def _model(rd: _Reader, required: bool) -> Optional[ProcessModel]:
    if not rd.section("model", required=required):
        return None
    pump = _pump(rd)
    pm = _phasematch(rd)
    bad: list = []
    sup = _superposition(rd, bad)
    if pump is None or pm is None or bad:
        return None
    return ProcessModel(pump, pm, sup)


def _grid(rd: _Reader) -> GridSpec:
    if not rd.section("grid"):
        return GridSpec()
    size = rd.number("grid.size", integer=True)
    half = rd.quantity("grid.half_span", "angular_frequency", required=False)
    try:
        return GridSpec(size, half)
    except ValueError as exc:
        rd.error("grid", str(exc))
        return GridSpec()


def _delays(rd: _Reader, required: bool) -> Optional[DelayRange]:
    if not rd.section("delays", required=required):
        return None
    start = rd.quantity("delays.start", "time")
    stop = rd.quantity("delays.stop", "time")
    count = rd.number("delays.count", required=True, integer=True)
    if None in (start, stop, count):
        return None
    if count < 1:
        rd.error("delays.count", "must be at least 1")
        return None
    if count > 1 and not stop > start:
        rd.error("delays", "stop must exceed start")
        return None
    return DelayRange(start, stop, count)


def _basis(rd: _Reader, model: Optional[ProcessModel], required: bool):
    if not rd.section("basis", required=required):
        return None, False
    center = rd.quantity("basis.center", "angular_frequency", required=False)
    if center is None and not rd.has("basis.center"):
        if model is None:
            rd.error("basis.center", "missing (no model to take omega_c from)")
            return None, False
        center = model.omega_c
    scale = rd.quantity("basis.scale", "angular_frequency")
    order = rd.number("basis.max_order", integer=True, default=DEFAULT_MAX_ORDER)
    optimize = rd.get("basis.optimize", False)
    if not isinstance(optimize, bool):
        rd.error("basis.optimize", "expected true or false")
        optimize = False
    if None in (center, scale, order):
        return None, optimize
    try:
        return HermiteBasis(center, scale, order), optimize
    except ValueError as exc:
        rd.error("basis", str(exc))
        return None, optimize


def _fit(rd: _Reader, model: Optional[ProcessModel]) -> Optional[dict]:
    if not rd.section("fit", required=True):
        return None
    free = rd.get("fit.free")
    if not isinstance(free, list) or not free:
        rd.error("fit.free", "expected a non-empty list of parameter names")
        free = []
    for k, name in enumerate(free):
        if name not in FIT_DIMENSIONS:
            rd.error(f"fit.free[{k}]", f"unknown parameter {name!r}; known: {', '.join(FIT_DIMENSIONS)}")
    initial = {}
    if model is not None:
        initial.update(tau_minus=model.phasematch.tau_minus, tau_plus=model.phasematch.tau_plus,
                       sigma=model.pump.sigma)
        sup = model.superposition
        initial.update(delta_omega=sup.delta_omega if sup else 0.0, rho=sup.rho if sup else 0.0,
                       phi=sup.phi if sup else 0.0)
    if rd.section("fit.initial"):
        for name in rd.get("fit.initial"):
            path = f"fit.initial.{name}"
            if name not in FIT_DIMENSIONS:
                rd.error(path, f"unknown parameter {name!r}")
                continue
            dim = FIT_DIMENSIONS[name]
            val = rd.quantity(path, dim) if dim else rd.number(path)
            if val is not None:
                initial[name] = val
    bounds = {}
    if rd.section("fit.bounds"):
        for name, pair in rd.get("fit.bounds").items():
            path = f"fit.bounds.{name}"
            if name not in FIT_DIMENSIONS:
                rd.error(path, f"unknown parameter {name!r}")
                continue
            if not isinstance(pair, list) or len(pair) != 2:
                rd.error(path, "expected [low, high]")
                continue
            dim = FIT_DIMENSIONS[name]
            lo = rd.quantity(f"{path}[0]", dim) if dim else rd.number(f"{path}[0]")
            hi = rd.quantity(f"{path}[1]", dim) if dim else rd.number(f"{path}[1]")
            if lo is not None and hi is not None:
                if not lo < hi:
                    rd.error(path, "low bound must be below high bound")
                bounds[name] = (lo, hi)
    for p in ("delta_omega", "phi", "tau_minus", "tau_plus", "sigma"):
        if p not in initial:
            rd.error(f"fit.initial.{p}", "missing (no model section to take it from)")
    if "rho" not in initial and "r" not in initial:
        rd.error("fit.initial.rho", "missing (no model section to take it from)")
    restarts = rd.number("fit.restarts", integer=True, default=8)
    counts = rd.get("fit.counts", False)
    if not isinstance(counts, bool):
        rd.error("fit.counts", "expected true or false")
    gamma = model.phasematch.gamma if model is not None else DEFAULT_GAMMA
    gamma = rd.number("fit.gamma", default=gamma)
    return {"free": list(free), "initial": initial, "bounds": bounds,
            "restarts": restarts, "gamma": gamma}


def parse_config(text: str, source: Optional[Path] = None) -> tuple[Optional[RunConfig], list[Diagnostic]]:
    try:
        data, lines = _load_with_lines(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        return None, [Diagnostic("error", "<file>", mark.line + 1 if mark else None, f"YAML syntax: {exc}")]
    rd = _Reader(data, lines)
    if not isinstance(data, dict):
        rd.error("<file>", "top level must be a mapping")
        return None, rd.diags
    known = {"command", "model", "grid", "delays", "io", "basis", "fit", "simulate", "witness"}
    for key in data:
        if key not in known:
            rd.error(str(key), f"unknown section; known: {', '.join(sorted(known))}")
    command = rd.get("command")
    if command not in COMMANDS:
        rd.error("command", f"expected one of {', '.join(COMMANDS)}, got {command!r}")
        command = None
    io_sec = rd.get("io", {}) or {}
    if not isinstance(io_sec, dict):
        rd.error("io", "expected a section (mapping)")
        io_sec = {}
    has_input = "input" in io_sec

    needs_model = command in ("simulate", "discriminate") or (
        command == "decompose" and "jsa" not in io_sec) or (command == "witness" and not has_input)
    model = _model(rd, required=needs_model)
    grid = _grid(rd)
    delays = _delays(rd, required=command == "simulate" or (command == "witness" and not has_input))
    basis, optimize = _basis(rd, model, required=command == "decompose")
    fit = _fit(rd, model) if command == "fit" else None
    if command == "fit" and not has_input:
        rd.error("io.input", "fit needs io.input (a trace CSV)")
    noise = rd.number("simulate.noise", default=0.0)
    if noise is not None and noise < 0:
        rd.error("simulate.noise", "must be non-negative")
    epsilon = rd.number("witness.epsilon")
    if epsilon is not None and epsilon < 0:
        rd.error("witness.epsilon", "must be non-negative")
    counts = bool(rd.get("fit.counts", False)) if command == "fit" else bool(rd.get("witness.counts", False))

    if command == "fit" and fit is not None and not any(d.level == "error" for d in rd.diags):
        from .fitting import FitSpec

        try:
            FitSpec(fit["free"], fit["initial"], fit["bounds"], gamma=fit["gamma"],
                    restarts=fit["restarts"])
        except ValueError as exc:
            rd.error("fit", str(exc))

    if any(d.level == "error" for d in rd.diags):
        return None, rd.diags
    cfg = RunConfig(
        command=command, model=model, grid=grid, delays=delays,
        io={k: str(v) for k, v in io_sec.items()}, basis=basis, optimize_basis=optimize,
        fit=fit, noise=noise or 0.0, epsilon=epsilon, counts=counts,
        config_hash=hashlib.sha256(text.encode("utf-8")).hexdigest(), source=source,
    )
    return cfg, rd.diags


def validate_config(path) -> list[Diagnostic]:
    """All diagnostics for the file at ``path``; raises FileNotFoundError if absent."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    return parse_config(text, p)[1]


def load_config(path) -> RunConfig:
    p = Path(path)
    cfg, diags = parse_config(p.read_text(encoding="utf-8"), p)
    if cfg is None:
        raise ConfigInvalid("\n".join(str(d) for d in diags if d.level == "error"))
    return cfg
