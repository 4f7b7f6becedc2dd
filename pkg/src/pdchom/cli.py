"""Command-line front end.

    pdchom run --config run.yaml [--out-dir DIR] [--seed N] [--verbose]
    pdchom validate --config run.yaml

Exit status: 0 ok, 2 configuration error, 3 numerical error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import RunConfig, load_config, validate_config
from .errors import ConfigInvalid, FileFormatError, NumericalError
from .fitting import FitSpec, counts_to_trace, discriminate_sinc, fit_trace
from .homi import HomTrace, hom_analytic, mirrored_phase, sweep, witness
from .modes import optimize_basis, project, schmidt_decompose, singlet_overlap
from .spectra import Shape, build_jsa

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("pdchom")


def _input_path(cfg: RunConfig, key: str) -> Path:
    p = Path(cfg.io[key])
    if not p.is_absolute() and cfg.source is not None:
        p = cfg.source.parent / p
    return p


def _read_input_trace(cfg: RunConfig) -> HomTrace:
    path = _input_path(cfg, "input")
    if cfg.counts:
        delays, counts, _ = fileio.read_counts(path)
        return counts_to_trace(delays, counts, meta={"input": str(path)})
    return fileio.read_trace(path)


def _simulate(cfg: RunConfig, out: Path, header: dict, seed: int) -> list[Path]:
    model = cfg.model
    delays = cfg.delays.values()
    jsa = build_jsa(model, cfg.grid)
    log.info("JSA grid %s, spacing %.4g rad/ps", jsa.shape, jsa.spacing[0])
    rng = np.random.default_rng(seed)
    written = []

    numeric = sweep("numeric", jsa, delays)
    traces = {"numeric": numeric}
    if model.phasematch.shape is Shape.GAUSSIAN:
        analytic = sweep("analytic", model, delays)
        dev = float(np.max(np.abs(analytic.probabilities - numeric.probabilities)))
        dev_mirror = float(np.max(np.abs(
            np.atleast_1d(hom_analytic(mirrored_phase(model), delays)) - numeric.probabilities)))
        check = {"analytic_vs_numeric_max_dev": dev,
                 "analytic_vs_numeric_max_dev_phi_mirrored": dev_mirror,
                 "phase_convention": "closed form uses cos(delta_omega*tau - phi); "
                                     "sampled F = f+ + r exp(i phi) f- gives cos(delta_omega*tau + phi)"}
        traces["analytic"] = HomTrace(analytic.delays, analytic.probabilities, {**analytic.meta, **check})
        traces["numeric"] = HomTrace(numeric.delays, numeric.probabilities, {**numeric.meta, **check})
        log.info("analytic vs numeric: max dev %.3g (phi mirrored: %.3g)", dev, dev_mirror)

    for name, tr in traces.items():
        if cfg.noise > 0:
            noisy = np.clip(tr.probabilities + cfg.noise * rng.standard_normal(len(tr)), 0.0, 1.0)
            tr = HomTrace(tr.delays, noisy, {**tr.meta, "noise": cfg.noise, "seed": seed})
        path = out / f"trace_{name}.csv"
        fileio.write_trace(path, tr, header)
        written.append(path)

    path = out / "jsa.bin"
    fileio.write_jsa_binary(path, jsa)
    written.append(path)
    if cfg.io.get("jsa_csv", "").lower() in ("true", "1", "yes"):
        path = out / "jsa.csv"
        fileio.write_jsa_csv(path, jsa, header)
        written.append(path)
    return written


def _decompose(cfg: RunConfig, out: Path, header: dict) -> list[Path]:
    jsa = fileio.read_jsa(_input_path(cfg, "jsa")) if "jsa" in cfg.io else build_jsa(cfg.model, cfg.grid)
    basis = cfg.basis
    if cfg.optimize_basis:
        basis = optimize_basis(jsa, basis)
        log.info("optimized basis scale %.6g rad/ps", basis.scale)
    decomp = project(jsa, basis)
    schmidt = schmidt_decompose(jsa)
    overlap = singlet_overlap(jsa, basis)
    summary = {"singlet_overlap": overlap, "grid_schmidt_values": schmidt.schmidt_values[:8],
               "grid_leading_weight": schmidt.leading_weight,
               "grid_schmidt_number": schmidt.schmidt_number}
    path = out / "decomposition.csv"
    fileio.write_decomposition(path, decomp, header, summary)
    print(f"captured_weight={decomp.captured_weight:.6g} singlet_overlap={overlap:.6g} "
          f"basis_scale={basis.scale:.6g} grid_leading_weight={schmidt.leading_weight:.6g}")
    return [path]


def _witness(cfg: RunConfig, out: Path, header: dict) -> list[Path]:
    if "input" in cfg.io:
        trace = _read_input_trace(cfg)
    else:
        trace = sweep("numeric", build_jsa(cfg.model, cfg.grid), cfg.delays.values())
    res = witness(trace, cfg.epsilon)
    lines = [f"verdict={res.verdict.value}", f"guard_band={res.epsilon:.6g}",
             f"max_p={res.max_probability:.17g}", f"tau_at_max_ps={res.delay_at_max:.17g}"]
    path = out / "witness.txt"
    path.write_text(fileio.comment_lines(header) + "\n".join(lines) + "\n", encoding="utf-8")
    print(f"{res.verdict.value} (max p = {res.max_probability:.6f}, guard band {res.epsilon:.3g})")
    return [path]


def _fit(cfg: RunConfig, out: Path, header: dict, seed: int) -> list[Path]:
    trace = _read_input_trace(cfg)
    f = cfg.fit
    spec = FitSpec(f["free"], f["initial"], f["bounds"], gamma=f["gamma"], restarts=f["restarts"], seed=seed)
    result = fit_trace(trace, spec)
    hdr = {**header, "phase_convention": "closed form, cos(delta_omega*tau - phi)"}
    txt, js, ov = out / "fit.txt", out / "fit.json", out / "fit_overlay.csv"
    fileio.write_fit(txt, js, result, hdr)
    fileio.write_overlay(ov, trace.delays, trace.probabilities, result.curve(trace.delays), hdr)
    free = " ".join(f"{k}={result.params[k]:.6g}" for k in result.free)
    print(f"{free} residual_rms={result.residual_rms:.3g} converged={result.converged}")
    return [txt, js, ov]


def _discriminate(cfg: RunConfig, out: Path, header: dict) -> list[Path]:
    delays = cfg.delays.values() if cfg.delays is not None else None
    rep = discriminate_sinc(cfg.model, delays, cfg.grid)
    txt, csv = out / "discriminate.txt", out / "discriminate.csv"
    txt.write_text(fileio.comment_lines(header)
                   + "".join(f"{k}={fileio.fmt(v)}\n" for k, v in rep.as_dict().items()), encoding="utf-8")
    body = fileio.comment_lines(header) + "tau_ps,p_sinc_numeric,p_gaussian_pair_analytic\n" + "".join(
        f"{fileio.fmt(t)},{fileio.fmt(a)},{fileio.fmt(b)}\n"
        for t, a, b in zip(rep.delays, rep.sinc_trace, rep.gaussian_trace))
    csv.write_text(body, encoding="utf-8")
    print(" ".join(f"{k}={fileio.fmt(v)}" for k, v in rep.as_dict().items()))
    return [txt, csv]


def run(cfg: RunConfig, out_dir, seed: int = 0) -> list[Path]:
    """Execute one configured command, returning the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = fileio.provenance(cfg.config_hash, {"command": cfg.command, "seed": seed})
    if cfg.command == "simulate":
        return _simulate(cfg, out, header, seed)
    if cfg.command == "decompose":
        return _decompose(cfg, out, header)
    if cfg.command == "witness":
        return _witness(cfg, out, header)
    if cfg.command == "fit":
        return _fit(cfg, out, header, seed)
    return _discriminate(cfg, out, header)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdchom", description="Broadband PDC Hong-Ou-Mandel toolkit")
    sub = ap.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="execute the command named in the config")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=".")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--verbose", "-v", action="store_true")
    v = sub.add_parser("validate", help="check a config file and list diagnostics")
    v.add_argument("--config", required=True)
    v.add_argument("--verbose", "-v", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.action == "validate":
        try:
            diags = validate_config(args.config)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        for d in diags:
            print(d)
        errors = sum(d.level == "error" for d in diags)
        print(f"{errors} error(s), {len(diags) - errors} note(s)")
        return EXIT_OK if errors == 0 else EXIT_CONFIG

    stage = "config"
    try:
        cfg = load_config(args.config)
        stage = cfg.command
        written = run(cfg, args.out_dir, args.seed)
    except ConfigInvalid as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error in {stage} ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FileFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
