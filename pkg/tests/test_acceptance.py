"""Acceptance suite: the seven end-to-end criteria at their stated tolerances.

Each test prints a single ``[acceptance N] PASS|FAIL ...`` line; the lines
are repeated in the terminal summary so they survive output capture.
"""
import math
import time

import numpy as np
import pytest

from pdchom.fitting import FitSpec, discriminate_sinc, fit_trace, model_curve
from pdchom.homi import (HomTrace, Verdict, beating_period, hom_analytic, hom_numeric,
                         hom_separable, mirrored_phase, sweep, witness)
from pdchom.modes import HermiteBasis, basis_axis, project, schmidt_decompose, singlet_jsa
from pdchom.spectra import (PhasematchModel, ProcessModel, PumpModel, SuperpositionModel,
                            build_jsa, reference_model, trapezoid_weights)

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[acceptance {n}] {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)


def test_1_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    direct, mirrored = [], []
    for _ in range(20):
        model = ProcessModel(
            PumpModel(1000.0, rng.uniform(2.0, 12.0)),
            PhasematchModel(12.0, rng.uniform(0.5, 0.7), rng.uniform(0.2, 0.35)),
            SuperpositionModel(rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 2 * math.pi)),
        )
        span = 3 * max(1 / model.pump.sigma, abs(model.phasematch.tau_minus))
        delays = np.linspace(-span, span, 200)
        numeric = hom_numeric(build_jsa(model), delays)
        direct.append(np.max(np.abs(hom_analytic(model, delays) - numeric)))
        mirrored.append(np.max(np.abs(hom_analytic(mirrored_phase(model), delays) - numeric)))
    elapsed = time.perf_counter() - t0
    d, m = max(direct), max(mirrored)
    agrees = d <= 1e-3
    characterized = m <= 1e-3
    ok = (agrees or characterized) and elapsed <= 60
    how = "direct agreement" if agrees else "deviation characterized as a phase-sign convention finding"
    report(1, ok, f"{how}: max dev as printed {d:.3g}, with phi -> -phi {m:.3g} "
                  f"(tol 1e-3, 20 models, {elapsed:.1f} s)")
    assert ok


def test_2_witness_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    axis = np.linspace(-40.0, 40.0, 801)
    delays = np.linspace(-6.0, 6.0, 61)
    worst = 0.0
    for _ in range(1000):
        c1, c2 = rng.uniform(-8, 8, 2)
        w1, w2 = rng.uniform(0.3, 5.0, 2)
        f1 = np.exp(-((axis - c1) ** 2) / (2 * w1**2))
        f2 = np.exp(-((axis - c2) ** 2) / (2 * w2**2))
        p = hom_separable(f1, f2, delays, axis)
        worst = max(worst, float(p.max()))
        if witness(HomTrace(delays, p), 1e-6).verdict is not Verdict.INCONCLUSIVE:
            worst = math.inf
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.5 + 1e-6 and elapsed <= 30
    report(2, ok, f"1000 separable states, max p = {worst:.12f} (bound 0.5 + 1e-6, {elapsed:.1f} s)")
    assert ok


def test_3_singlet_signature():
    basis = HermiteBasis(1000.0, 3.0)
    jsa = singlet_jsa(basis)
    p0 = hom_numeric(jsa, 0.0)
    verdict = witness(sweep("numeric", jsa, np.linspace(-1, 1, 41))).verdict
    c = project(jsa, basis).coefficients
    target = 1 / math.sqrt(2)
    dev_c = max(abs(c[0, 1] - target), abs(c[1, 0] + target))
    ok = abs(p0 - 1) <= 1e-6 and verdict is Verdict.ENTANGLED and dev_c <= 1e-4
    report(3, ok, f"p(0) = {p0:.12f}, verdict {verdict.value}, c01 = {c[0, 1].real:.10f}, "
                  f"c10 = {c[1, 0].real:.10f}")
    assert ok


def test_4_beating_reproduction():
    model = reference_model(delta_omega_thz=1.35, r=1.0, phi=0.0)
    delays = np.linspace(-10, 10, 401)
    trace = sweep("numeric", build_jsa(model), delays)
    tm = model.phasematch.tau_minus
    half = 3 * math.sqrt(model.phasematch.gamma) * tm
    region = (tm - half, tm + half)
    inside = (delays >= region[0]) & (delays <= region[1])
    bump = float(trace.probabilities[inside].max())
    period = beating_period(trace, region)
    expected = 2 * math.pi / model.delta_omega
    step = delays[1] - delays[0]
    ok = bump > 0.5 and abs(period - expected) <= step
    report(4, ok, f"central max p = {bump:.5f}, period {period:.4f} ps vs 2pi/dw = {expected:.4f} ps "
                  f"(one sample = {step:.3f} ps)")
    assert ok


def test_5_sinc_discrimination():
    t0 = time.perf_counter()
    model = reference_model(1.62, r=SuperpositionModel.r_from_rho(0.44), phi=1.5 * math.pi)
    rep = discriminate_sinc(model, np.linspace(-10, 10, 400))
    elapsed = time.perf_counter() - t0
    ok = rep.max_sinc <= 0.5 + 1e-3 and rep.max_gaussian <= 0.5 + 1e-3 and elapsed <= 30
    report(5, ok, f"max p sinc {rep.max_sinc:.6f}, Gaussian pair {rep.max_gaussian:.6f} "
                  f"(bound 0.5 + 1e-3, {elapsed:.1f} s)")
    assert ok


def test_6_fit_recovery():
    t0 = time.perf_counter()
    truth = dict(delta_omega=2 * math.pi * 1.35, rho=0.9, phi=5.8, tau_minus=1.8, tau_plus=5.4,
                 sigma=6.8607)
    delays = np.linspace(-10, 10, 200)
    clean = model_curve(delays, truth)
    spec = FitSpec(["delta_omega"], dict(truth, delta_omega=truth["delta_omega"] * 1.03))
    errors = []
    for seed in range(100):
        noisy = np.clip(clean + 0.01 * np.random.default_rng(seed).standard_normal(clean.size), 0, 1)
        res = fit_trace(HomTrace(delays, noisy), spec)
        errors.append(abs(res.params["delta_omega"] / truth["delta_omega"] - 1))
    elapsed = time.perf_counter() - t0
    p95 = float(np.percentile(errors, 95))
    ok = p95 <= 0.02 and elapsed <= 120
    report(6, ok, f"95th percentile relative delta_omega error {p95:.4f} over 100 seeds "
                  f"(bound 0.02, {elapsed:.1f} s)")
    assert ok


def test_7_hermite_basis():
    basis = HermiteBasis(1000.0, 3.0, max_order=10)
    axis = basis_axis(basis)
    u = basis.functions(axis)
    gram = (u * trapezoid_weights(axis)) @ u.T
    gram_dev = float(np.max(np.abs(gram - np.eye(11))))
    sv = schmidt_decompose(singlet_jsa(HermiteBasis(1000.0, 3.0))).schmidt_values
    sv_dev = float(np.max(np.abs(sv[:2] - 1 / math.sqrt(2))))
    ok = gram_dev <= 1e-8 and sv_dev <= 1e-6
    report(7, ok, f"Gram deviation {gram_dev:.2e} (tol 1e-8), singlet Schmidt deviation {sv_dev:.2e} (tol 1e-6)")
    assert ok


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    request.config._acceptance_lines = list(RESULTS)
