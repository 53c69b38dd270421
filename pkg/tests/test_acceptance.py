"""Acceptance criteria A1-A10.

Each test records one ``A<n> PASS|FAIL`` line (shown in the terminal summary)
and then asserts at the stated tolerance.
"""

import io
import json
import time
import warnings
from dataclasses import replace
from importlib import resources
from itertools import product

import numpy as np
import pytest

from sentencing_mlms.cli import run_cli
from sentencing_mlms.metrics import not_one_check, relative_accuracy, theorem2_bound
from sentencing_mlms.mlms import ConstantMomentum, Hyperparams, run_stream
from sentencing_mlms.noise import (
    GaussianNoiseModel,
    quadrature_oracle,
    sat_abs_deviation,
    sat_kinks,
    sat_mean,
    sat_mean_deriv,
)
from sentencing_mlms.simulator import (
    DriftSpec,
    StartingPoint,
    gen_case_stream,
    reference_spec,
    run_replication,
    sigma_for_snr,
)
from sentencing_mlms.sms_core import (
    CaseRecord,
    StructuralParams,
    build_regressor,
    build_theta,
    sms_inner,
)

SAMPLE = str(resources.files("sentencing_mlms") / "data" / "synthetic_cibh.csv")
REFERENCE_INI = str(resources.files("sentencing_mlms") / "data" / "reference.ini")

# Reference learner: step 0.5, constant momentum 0.5, no G' floor (the
# bounds keep G' well away from zero in these runs).
HP = Hyperparams(0.5, ConstantMomentum(0.5), box_radius=50.0, gprime_floor=None)
HP_PLAIN = replace(HP, momentum=ConstantMomentum(0.0))


def record(log, tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    log.append(line)
    print(line)


@pytest.fixture(scope="module")
def reference():
    spec = reference_spec()
    return replace(spec, noise=GaussianNoiseModel(sigma_for_snr(spec, 10.0)))


def steady_gap(stream, report, fraction=0.2):
    start = len(stream) - int(round(fraction * len(stream)))
    adaptive = relative_accuracy(*report.pairs(start))
    oracle = relative_accuracy(stream.y[start:], stream.oracle_predictions()[start:])
    return oracle.ra - adaptive.ra, adaptive.ra, oracle.ra


# -- A1 -----------------------------------------------------------------------


def test_a1_linearization_identity(acceptance_log):
    rng = np.random.Generator(np.random.PCG64(2024))
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        m1, m2 = int(rng.integers(1, 5)), int(rng.integers(0, 4))
        sp = StructuralParams(
            *rng.uniform(-5, 5, 4), eta=rng.uniform(-0.5, 0.5),
            p=rng.uniform(-0.9, 1.5, m1), q=rng.uniform(-0.5, 0.5, m2),
        )
        rec = CaseRecord(
            "a1", rng.uniform(0, 200), rng.integers(0, 4, 4), rng.integers(0, 2, m1),
            rng.integers(0, 2, m2), 1.0, 2.0,
        )
        inner = sms_inner(sp, rec)
        err = abs(inner - build_regressor(rec) @ build_theta(sp, 1e9).values) / (1 + abs(inner))
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 1.0
    record(acceptance_log, "A1", ok, f"max scaled error {worst:.2e} (<= 1e-9) over 1000 instances in {elapsed:.2f}s (< 1s)")
    assert worst <= 1e-9
    assert elapsed < 1.0


# -- A2 -----------------------------------------------------------------------


def test_a2_saturation_calculus(acceptance_log):
    configs = [(36.0, 120.0, 9.17), (6.0, 36.0, 3.42), (-1.0, 1.0, 0.5), (1.0, 400.0, 1.0)]
    t0 = time.perf_counter()
    worst_mean = worst_dev = worst_fd = 0.0
    h = 1e-5
    for lo, hi, s in configs:
        noise = GaussianNoiseModel(s)
        for m in np.linspace(lo - 3 * s, hi + 3 * s, 100):
            m = float(m)
            c = min(hi, max(lo, m))
            kinks = sat_kinks(m, lo, hi)
            q_mean = quadrature_oracle(lambda e: min(hi, max(lo, m + e)), noise, points=kinks)
            q_dev = quadrature_oracle(lambda e: abs(min(hi, max(lo, m + e)) - c), noise, points=(*kinks, c - m))
            worst_mean = max(worst_mean, abs(sat_mean(m, lo, hi, noise) - q_mean))
            worst_dev = max(worst_dev, abs(sat_abs_deviation(m, lo, hi, noise) - q_dev))
            fd = (sat_mean(m + h, lo, hi, noise) - sat_mean(m - h, lo, hi, noise)) / (2 * h)
            worst_fd = max(worst_fd, abs(fd - sat_mean_deriv(m, lo, hi, noise)))
    elapsed = time.perf_counter() - t0
    ok = worst_mean <= 1e-8 and worst_dev <= 1e-8 and worst_fd <= 1e-6 and elapsed < 10
    record(
        acceptance_log, "A2", ok,
        f"|G - quad| {worst_mean:.1e}, |sigma_k - quad| {worst_dev:.1e} (<= 1e-8); "
        f"|G' - FD| {worst_fd:.1e} (<= 1e-6); {elapsed:.1f}s (< 10s)",
    )
    assert worst_mean <= 1e-8 and worst_dev <= 1e-8
    assert worst_fd <= 1e-6
    assert elapsed < 10


# -- A3 -----------------------------------------------------------------------


def test_a3_oracle_matches_bound(acceptance_log):
    t0 = time.perf_counter()
    spec = reference_spec(T=200_000, seed=31)
    stream = gen_case_stream(spec)
    oracle = relative_accuracy(stream.y, stream.oracle_predictions())
    bound = theorem2_bound(stream.inner, spec.lower, spec.upper, stream.y, spec.noise)
    elapsed = time.perf_counter() - t0
    gap = abs(oracle.ra - bound)
    ok = gap <= 0.003 and elapsed < 30
    record(acceptance_log, "A3", ok, f"oracle RA {oracle.ra:.5f} vs bound {bound:.5f}, |diff| {gap:.5f} (<= 0.003), {elapsed:.1f}s")
    assert gap <= 0.003
    assert elapsed < 30


# -- A4 -----------------------------------------------------------------------


def test_a4_convergence_constant_theta(acceptance_log, reference):
    t0 = time.perf_counter()
    stream = gen_case_stream(reference)
    report = run_stream(stream.items(), reference.noise, HP)
    elapsed = time.perf_counter() - t0
    theta = stream.theta[-1]
    rel = np.linalg.norm(report.final_state.theta_hat - theta) / np.linalg.norm(theta)
    gap, ra, ra_star = steady_gap(stream, report)
    ok = rel <= 0.1 and gap <= 0.01 and elapsed < 60
    record(
        acceptance_log, "A4", ok,
        f"||theta_hat - theta||/||theta|| {rel:.4f} (<= 0.1); steady RA {ra:.4f} vs oracle {ra_star:.4f}, "
        f"gap {100 * gap:.2f} pp (<= 1 pp); sigma {reference.noise.sigma:.4f}; {elapsed:.1f}s",
    )
    assert rel <= 0.1
    assert gap <= 0.01
    assert elapsed < 60


# -- A5 -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "label, drift",
    [("random_walk xi=1e-3", DriftSpec.random_walk(1e-3)), ("piecewise_jump 0.1/100", DriftSpec.piecewise_jump(0.1, 100))],
)
def test_a5_drift_tracking(acceptance_log, reference, label, drift):
    spec = replace(reference, drift=drift, seed=7)
    stream = gen_case_stream(spec)
    report = run_stream(stream.items(), spec.noise, HP)
    gap, ra, ra_star = steady_gap(stream, report)
    ok = gap <= 0.03
    record(acceptance_log, f"A5[{label}]", ok, f"steady RA {ra:.4f} vs oracle {ra_star:.4f}, gap {100 * gap:.2f} pp (<= 3 pp)")
    assert gap <= 0.03


# -- A6 -----------------------------------------------------------------------


def terminal_error(spec, seeds):
    out = []
    for seed in seeds:
        s = replace(spec, seed=seed)
        stream = gen_case_stream(s)
        report = run_stream(stream.items(), s.noise, HP)
        out.append(1.0 - relative_accuracy(*report.pairs()).ra)
    return float(np.mean(out))


def test_a6_monotone_in_noise_and_drift(acceptance_log):
    seeds = range(5)
    base = reference_spec(T=20_000)
    sig = [terminal_error(replace(base, noise=GaussianNoiseModel(s)), seeds) for s in (0.5, 1.0, 2.0, 4.0)]
    drifts = [DriftSpec(), DriftSpec.random_walk(1e-4), DriftSpec.random_walk(1e-3)]
    xi = [terminal_error(replace(base, drift=d), seeds) for d in drifts]
    ok_sig = all(a <= b for a, b in zip(sig, sig[1:]))
    ok_xi = all(a <= b for a, b in zip(xi, xi[1:]))
    record(
        acceptance_log, "A6", ok_sig and ok_xi,
        "1-RA over sigma (0.5,1,2,4): " + ", ".join(f"{v:.5f}" for v in sig)
        + "; over xi (0,1e-4,1e-3): " + ", ".join(f"{v:.6f}" for v in xi),
    )
    assert ok_sig
    assert ok_xi


# -- A7 -----------------------------------------------------------------------


A7_CONFIGS = {
    "reference sigma=1": dict(),
    "reference sigma=2": dict(noise=GaussianNoiseModel(2.0)),
    "serious bounds sigma=9.17": dict(
        lower=36.0, upper=120.0, noise=GaussianNoiseModel(9.17), a_law=StartingPoint(50.0, 70.0)
    ),
}


@pytest.mark.parametrize("label", list(A7_CONFIGS))
def test_a7_accuracy_bounded_away_from_one(acceptance_log, label):
    spec = reference_spec(T=200_000, seed=71, **A7_CONFIGS[label])
    stream = gen_case_stream(spec)
    oracle = relative_accuracy(stream.y, stream.oracle_predictions())
    bound = theorem2_bound(stream.inner, spec.lower, spec.upper, stream.y, spec.noise)
    ok = oracle.ra <= 0.999 and not_one_check(oracle, 0.001) and abs(oracle.ra - bound) <= 0.003
    record(acceptance_log, f"A7[{label}]", ok, f"oracle RA {oracle.ra:.5f} (<= 0.999), bound {bound:.5f}, |diff| {abs(oracle.ra - bound):.5f} (<= 0.003)")
    assert oracle.ra <= 0.999
    assert abs(oracle.ra - bound) <= 0.003


# -- A8 -----------------------------------------------------------------------


def test_a8_momentum_ablation(acceptance_log, reference):
    """Reported, not gated: a reversal is flagged with a warning."""
    spec = replace(reference, drift=DriftSpec.random_walk(1e-3))
    steps = {"mlms": [], "plain_lms": []}
    for seed in range(1, 21):
        res = run_replication(replace(spec, seed=seed), HP, reach_margin=0.02, reach_window=500)
        for v in steps:
            reached = res.steps_to_oracle[v]
            steps[v].append(spec.T if reached is None else reached)
    med = {v: float(np.median(s)) for v, s in steps.items()}
    ok = med["mlms"] <= med["plain_lms"]
    record(
        acceptance_log, "A8", ok,
        f"median steps to within 2 pp of oracle RA over 20 seeds: momentum {med['mlms']:.0f}, "
        f"plain {med['plain_lms']:.0f}" + ("" if ok else " (flagged regression, not gated)"),
    )
    if not ok:
        warnings.warn(f"momentum ablation reversed: {med}", UserWarning)


# -- A9 -----------------------------------------------------------------------


REFERENCE_TARGETS = {"RA serious": 91.34, "RA minor": 77.53, "bound serious": 95.13, "bound minor": 83.61}


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code = run_cli(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_a9_pipeline_on_bundled_sample(acceptance_log, tmp_path):
    theta = tmp_path / "theta.json"
    fit_code, fit_out, fit_err = cli("fit", "--preset", "serious", "--input", SAMPLE, "--theta-out", str(theta))
    bound_code, bound_out, bound_err = cli("bound", "--preset", "serious", "--input", SAMPLE, "--theta", str(theta))
    bound_fit_code, _, _ = cli("bound", "--preset", "serious", "--input", SAMPLE)
    ok = fit_code == bound_code == bound_fit_code == 0
    detail = f"fit exit {fit_code}, bound exit {bound_code}/{bound_fit_code} on the 50-row sample"
    if ok:
        ra = json.loads(fit_out)["summary"]["ra"]
        bd = json.loads(bound_out)["summary"]["bound"]
        detail += f" (RA {ra:.4f}, bound {bd:.4f}); published targets need the unreleased dataset: " + ", ".join(
            f"{k} {v}" for k, v in REFERENCE_TARGETS.items()
        )
    record(acceptance_log, "A9", ok, detail)
    assert fit_code == 0, fit_err
    assert bound_code == 0, bound_err
    assert bound_fit_code == 0


# -- A10 ----------------------------------------------------------------------


def test_a10_byte_identical_reports(acceptance_log, tmp_path):
    ini = tmp_path / "small.ini"
    ini.write_text(open(REFERENCE_INI).read().replace("T = 100000", "T = 5000").replace("seeds = 5", "seeds = 3"))
    runs = {
        "simulate": ["simulate", "--config", str(ini)],
        "fit": ["fit", "--preset", "serious", "--input", SAMPLE],
        "bound": ["bound", "--preset", "serious", "--input", SAMPLE],
        "validate": ["validate", "--input", SAMPLE],
    }
    mismatches = []
    for (name, argv), fmt in product(runs.items(), ("json", "csv", "jsonl")):
        blobs = []
        for i in range(2):
            path = tmp_path / f"{name}-{fmt}-{i}"
            code, _, err = cli(*argv, "--format", fmt, "--output", str(path))
            assert code == 0, err
            blobs.append(path.read_bytes())
        if blobs[0] != blobs[1]:
            mismatches.append(f"{name}/{fmt}")
    ok = not mismatches
    record(acceptance_log, "A10", ok, f"12 command/format pairs run twice; mismatches: {mismatches or 'none'}")
    assert ok
