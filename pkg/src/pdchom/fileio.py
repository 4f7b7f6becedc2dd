"""Readers and writers for the on-disk artifacts.

Every text file starts with ``# key=value`` comment lines carrying
provenance; readers skip them and return the key/value pairs as meta.
"""
from __future__ import annotations

import functools
import io
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .errors import FileFormatError, NumericalError
from .homi import HomTrace
from .modes import ModeDecomposition
from .spectra import SpectralGrid
from .units import UNIT_CONVENTION

JSA_MAGIC = b"JSA1"
TRACE_HEADER = "tau_ps,p_coincidence"
JSA_HEADER = "omega_s_rad_per_ps,omega_i_rad_per_ps,re,im"
DECOMP_HEADER = "i,j,re_c,im_c"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(fmt(v) for v in value)
    return str(value)


def provenance(config_hash: Optional[str] = None, extra: Optional[dict] = None) -> dict:
    out = {"tool": f"pdchom {__version__}"}
    if config_hash:
        out["config_sha256"] = config_hash
    out["units"] = UNIT_CONVENTION
    out.update(extra or {})
    return out


def comment_lines(meta: dict) -> str:
    return "".join(f"# {k}={fmt(v)}\n" for k, v in meta.items())


def _parse_meta(lines: Iterable[str]) -> dict:
    meta = {}
    for line in lines:
        body = line[1:].strip()
        if "=" in body:
            k, v = body.split("=", 1)
            meta[k.strip()] = _coerce(v.strip())
    return meta


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _reader(fn):
    """Report malformed content as :class:`FileFormatError` naming the file."""
    @functools.wraps(fn)
    def wrapper(path, *args, **kwargs):
        try:
            return fn(path, *args, **kwargs)
        except (NumericalError, FileFormatError, OSError):
            raise
        except (ValueError, IndexError, struct.error) as exc:
            raise FileFormatError(f"{path}: {exc}") from exc
    return wrapper


def _split(path) -> tuple[dict, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = _parse_meta(l for l in lines if l.startswith("#"))
    body = [l for l in lines if l and not l.startswith("#")]
    return meta, body


# ---- HOM traces -------------------------------------------------------------

@_reader
def read_counts(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Delay and raw coincidence-count columns of a two-column CSV."""
    meta, body = _split(path)
    if not body:
        raise FileFormatError(f"{path}: no data")
    rows = body[1:] if not _is_number(body[0].split(",")[0]) else body
    data = np.array([[float(x) for x in r.split(",")[:2]] for r in rows]).reshape(-1, 2)
    return data[:, 0], data[:, 1], meta


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_trace(path, trace: HomTrace, header: Optional[dict] = None) -> None:
    buf = io.StringIO()
    buf.write(comment_lines({**(header or {}), **trace.meta}))
    if trace.stderr is None:
        buf.write(TRACE_HEADER + "\n")
        for t, p in zip(trace.delays, trace.probabilities):
            buf.write(f"{fmt(t)},{fmt(p)}\n")
    else:
        buf.write(TRACE_HEADER + ",p_stderr\n")
        for t, p, s in zip(trace.delays, trace.probabilities, trace.stderr):
            buf.write(f"{fmt(t)},{fmt(p)},{fmt(s)}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


@_reader
def read_trace(path) -> HomTrace:
    meta, body = _split(path)
    if not body or body[0].split(",")[:2] != TRACE_HEADER.split(","):
        raise FileFormatError(f"{path}: expected header {TRACE_HEADER!r}")
    cols = body[0].split(",")
    data = np.array([[float(x) for x in row.split(",")] for row in body[1:]]).reshape(-1, len(cols))
    stderr = data[:, 2] if len(cols) > 2 else None
    return HomTrace(data[:, 0], data[:, 1], meta, stderr=stderr)


def write_overlay(path, delays, data, model, header: Optional[dict] = None) -> None:
    buf = io.StringIO()
    buf.write(comment_lines(header or {}))
    buf.write("tau_ps,p_data,p_model\n")
    for t, d, m in zip(delays, data, model):
        buf.write(f"{fmt(t)},{fmt(d)},{fmt(m)}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# ---- joint spectral amplitudes ---------------------------------------------

def write_jsa_csv(path, jsa: SpectralGrid, header: Optional[dict] = None) -> None:
    ns, ni = jsa.shape
    s = np.repeat(jsa.omega_s, ni)
    i = np.tile(jsa.omega_i, ns)
    a = jsa.amplitude.ravel()
    buf = io.StringIO()
    buf.write(comment_lines({**(header or {}), **jsa.meta, "n_s": ns, "n_i": ni}))
    buf.write(JSA_HEADER + "\n")
    np.savetxt(buf, np.column_stack([s, i, a.real, a.imag]), fmt="%.17g", delimiter=",")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


@_reader
def read_jsa_csv(path) -> SpectralGrid:
    meta, body = _split(path)
    if not body or body[0] != JSA_HEADER:
        raise FileFormatError(f"{path}: expected header {JSA_HEADER!r}")
    data = np.loadtxt(io.StringIO("\n".join(body[1:])), delimiter=",", ndmin=2)
    omega_s = np.unique(data[:, 0])
    omega_i = np.unique(data[:, 1])
    amp = (data[:, 2] + 1j * data[:, 3]).reshape(omega_s.size, omega_i.size)
    meta = {k: v for k, v in meta.items() if k not in ("n_s", "n_i")}
    return SpectralGrid(omega_s, omega_i, amp, meta)


def write_jsa_binary(path, jsa: SpectralGrid) -> None:
    """``JSA1`` magic, two little-endian uint64 sizes, then little-endian float64:
    the signal axis, the idler axis, and interleaved (re, im) amplitude in row-major order."""
    ns, ni = jsa.shape
    with open(path, "wb") as fh:
        fh.write(JSA_MAGIC)
        fh.write(struct.pack("<QQ", ns, ni))
        fh.write(jsa.omega_s.astype("<f8").tobytes())
        fh.write(jsa.omega_i.astype("<f8").tobytes())
        inter = np.empty((ns, ni, 2), dtype="<f8")
        inter[..., 0] = jsa.amplitude.real
        inter[..., 1] = jsa.amplitude.imag
        fh.write(inter.tobytes())


@_reader
def read_jsa_binary(path) -> SpectralGrid:
    raw = Path(path).read_bytes()
    if raw[:4] != JSA_MAGIC:
        raise FileFormatError(f"{path}: not a JSA1 file")
    ns, ni = struct.unpack_from("<QQ", raw, 4)
    off = 20
    expected = off + 8 * (ns + ni + 2 * ns * ni)
    if len(raw) != expected:
        raise FileFormatError(f"{path}: size {len(raw)} does not match header ({expected} bytes)")
    omega_s = np.frombuffer(raw, "<f8", ns, off)
    off += 8 * ns
    omega_i = np.frombuffer(raw, "<f8", ni, off)
    off += 8 * ni
    inter = np.frombuffer(raw, "<f8", 2 * ns * ni, off).reshape(ns, ni, 2)
    return SpectralGrid(omega_s.copy(), omega_i.copy(), inter[..., 0] + 1j * inter[..., 1])


def read_jsa(path) -> SpectralGrid:
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_jsa_binary(path) if head == JSA_MAGIC else read_jsa_csv(path)


# ---- mode decompositions ------------------------------------------------------

def write_decomposition(path, decomp: ModeDecomposition, header: Optional[dict] = None,
                        summary: Optional[dict] = None) -> None:
    buf = io.StringIO()
    info = dict(header or {})
    if decomp.basis is not None:
        info.update(basis_center=decomp.basis.center, basis_scale=decomp.basis.scale,
                    basis_max_order=decomp.basis.max_order)
    buf.write(comment_lines(info))
    line = {"captured_weight": decomp.captured_weight, "schmidt_values": decomp.schmidt_values}
    line.update(summary or {})
    buf.write("# summary " + " ".join(f"{k}={fmt(v)}" for k, v in line.items()) + "\n")
    buf.write(DECOMP_HEADER + "\n")
    c = decomp.coefficients
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            buf.write(f"{i},{j},{fmt(c[i, j].real)},{fmt(c[i, j].imag)}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


@_reader
def read_decomposition(path) -> tuple[np.ndarray, dict]:
    """Coefficient matrix and the summary fields."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    summary = {}
    for l in lines:
        if l.startswith("# summary "):
            for tok in l[len("# summary "):].split():
                k, v = tok.split("=", 1)
                summary[k] = [float(x) for x in v.split(";")] if ";" in v else _coerce(v)
    rows = [l for l in lines if l and not l.startswith("#")][1:]
    entries = [r.split(",") for r in rows]
    n = max(int(e[0]) for e in entries) + 1
    m = max(int(e[1]) for e in entries) + 1
    c = np.zeros((n, m), dtype=complex)
    for i, j, re, im in entries:
        c[int(i), int(j)] = float(re) + 1j * float(im)
    return c, summary


# ---- fit results --------------------------------------------------------------

def fit_record(result, header: Optional[dict] = None) -> dict:
    units = result.units()
    return {
        **(header or {}),
        "params": {k: {"value": v, "unit": units.get(k, ""),
                       "stderr": result.param_stderr.get(k), "free": k in result.free}
                   for k, v in result.params.items()},
        "residual_rms": result.residual_rms,
        "iterations": result.iterations,
        "converged": result.converged,
        "gamma": result.gamma,
    }


def write_fit(path_txt, path_json, result, header: Optional[dict] = None) -> None:
    units = result.units()
    buf = io.StringIO()
    buf.write(comment_lines(header or {}))
    for k, v in result.params.items():
        unit = units.get(k, "")
        err = result.param_stderr.get(k)
        tail = f" +- {fmt(err)}" if err is not None and math.isfinite(err) else (" (fixed)" if k not in result.free else "")
        buf.write(f"{k} = {fmt(v)}{(' ' + unit) if unit else ''}{tail}\n")
    buf.write(f"residual_rms = {fmt(result.residual_rms)}\n")
    buf.write(f"iterations = {result.iterations}\n")
    buf.write(f"converged = {fmt(result.converged)}\n")
    Path(path_txt).write_text(buf.getvalue(), encoding="utf-8")
    Path(path_json).write_text(json.dumps(fit_record(result, header), indent=2, sort_keys=True) + "\n",
                               encoding="utf-8")
