"""Exit criteria. Each test prints one PASS/FAIL line; run with ``-s`` or as a
script (``python tests/test_acceptance.py``) to see them."""

import math
import re
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from haltlab.cli import COMMANDS, main
from haltlab.machine import run_bounded
from haltlab.oracle import RankTable, build_surrogate, h_T, omega_T
from haltlab.protocols import (
    default_etas,
    estimate_omega,
    extract_bits,
    perturbation_sweep,
    protocol_amplified,
    protocol_measure_halting,
    protocol_parity,
    rank_permutation,
    trial_rngs,
    truncated_permutation,
    verify_candidate_oracle,
)
from haltlab.quantum import SeededRng, closed_index_set, permutation_matrix

OMEGA_X_MAX, OMEGA_T = 12, 10**4


def report(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    print(line, flush=True)
    return passed


def criterion_1():
    """Probability-one readout of the halting observable."""
    t0 = time.perf_counter()
    T = 10**4
    s = build_surrogate(999, T)
    direct = [int(run_bounded(x, x, T).halted) for x in range(1000)]
    mismatches = 0
    for seed in range(5):
        rng = SeededRng(seed)
        mismatches += sum(protocol_measure_halting(x, s, 1000, rng) != direct[x] for x in range(1000))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    return report(1, ok, f"measurement vs h_T over x<1000 x 5 seeds: {mismatches} mismatches ({elapsed:.1f}s)")


def criterion_2():
    """Parity decoding and unitarity of the 64-dimensional permutation."""
    t0 = time.perf_counter()
    s = build_surrogate(499, 10**4)
    table = RankTable.from_surrogate(s)
    D = 2 * len(table)
    rng = SeededRng(2)
    mismatches = sum(protocol_parity(x, s, table, D, rng) != h_T(x, 10**4) for x in range(500))
    g = rank_permutation(table)
    u64 = truncated_permutation(g, 64)
    mat = permutation_matrix(u64, list(range(64)))
    err64 = float(np.max(np.abs(mat.conj().T @ mat - np.eye(64))))
    agree = sum(u64(x) == g(x) for x in range(64) if g(x) < 64)
    inside = sum(g(x) < 64 for x in range(64))
    orbit = closed_index_set(g, range(500))
    mo = permutation_matrix(g, orbit)
    err_orbit = float(np.max(np.abs(mo.conj().T @ mo - np.eye(len(orbit)))))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and err64 <= 1e-12 and err_orbit <= 1e-12 and agree == inside and elapsed < 60
    return report(
        2,
        ok,
        f"parity vs h_T over x<500: {mismatches} mismatches; ||U'U-I||_max={err64:.1e} on D=64 "
        f"(agrees with g_T on {agree}/{inside} in-range indices), {err_orbit:.1e} on the "
        f"{len(orbit)}-element closed orbit ({elapsed:.1f}s)",
    )


def criterion_3():
    """Majority-vote amplification at eps=0.3, confidence 0.99."""
    t0 = time.perf_counter()
    eps, conf, delta, trials = 0.3, 0.99, 0.2, 2000
    s = build_surrogate(63, 10**4)
    errors = 0
    for t, rng in enumerate(trial_rngs(3, trials)):
        x = t % 64
        errors += protocol_amplified(x, s, eps, delta, conf, rng) != s.h(x)
    limit = (1 - conf) + 3 * math.sqrt((1 - conf) / trials)
    elapsed = time.perf_counter() - t0
    ok = errors / trials <= limit and elapsed < 60
    return report(3, ok, f"amplified error rate {errors}/{trials} = {errors / trials:.4f} <= {limit:.4f} ({elapsed:.1f}s)")


def criterion_4():
    """Coverage of the rotation-angle confidence interval."""
    t0 = time.perf_counter()
    w = omega_T(OMEGA_X_MAX, OMEGA_T)
    covered = sum(estimate_omega(w, 10**4, 0.95, rng).covers(w) for rng in trial_rngs(4, 1000))
    elapsed = time.perf_counter() - t0
    ok = covered / 1000 >= 0.94 and elapsed < 120
    return report(4, ok, f"coverage {covered}/1000 = {covered / 1000:.3f} >= 0.94 at N=1e4 ({elapsed:.1f}s)")


def _certified_soundness(N, sampler, seed):
    w = omega_T(OMEGA_X_MAX, OMEGA_T)
    certified = wrong = 0
    for rng in trial_rngs(seed, 1000):
        ext = extract_bits(estimate_omega(w, N, 0.95, rng, sampler), 8, w)
        if ext.certified and ext.covered:
            certified += 1
            wrong += ext.bits != "".join(map(str, w.bits(8)))
    return certified, wrong


def criterion_5():
    """Certified digits match the exact expansion whenever the interval covers."""
    c_lo, w_lo = _certified_soundness(10**4, "shots", 5)
    c_hi, w_hi = _certified_soundness(2**28, "binomial", 55)
    ok = w_lo == 0 and w_hi == 0 and c_hi > 0
    return report(
        5,
        ok,
        f"n=8 certified&covered trials: {c_lo}/1000 at N=1e4 ({w_lo} wrong), "
        f"{c_hi}/1000 at N=2^28 ({w_hi} wrong)",
    )


def criterion_6():
    """Exact perturbation witnesses for n = 3..10."""
    t0 = time.perf_counter()
    w = omega_T(OMEGA_X_MAX, OMEGA_T)
    etas = default_etas(w)
    found = {}
    for n in range(3, 11):
        found[n] = perturbation_sweep(w, n, etas).smallest_corrupting
    elapsed = time.perf_counter() - t0
    ok = all(v is not None and v <= 2 * 2.0**-n for n, v in found.items()) and elapsed < 1
    detail = ", ".join(f"n={n}: {v:g}" for n, v in found.items())
    return report(6, ok, f"smallest corrupting |eta| <= 2*2^-n: {detail} ({elapsed * 1000:.0f} ms)")


def criterion_7():
    """Monotone refinement and the digit law over the T grid."""
    grid = [10, 10**2, 10**3, 10**4]
    bits = {T: [h_T(x, T) for x in range(201)] for T in grid}
    mono_bad = sum(
        1 for i, T in enumerate(grid) for T2 in grid[i + 1 :] for x in range(201) if bits[T][x] and not bits[T2][x]
    )
    law_bad = sum(omega_T(200, T).bit(x) != bits[T][x] for T in grid for x in range(201))
    ok = mono_bad == 0 and law_bad == 0
    counts = "/".join(str(sum(bits[T])) for T in grid)
    return report(7, ok, f"x<=200: {mono_bad} monotonicity and {law_bad} digit-law violations (halting counts {counts})")


def criterion_8():
    """Inductive verification: refutation of a flipped halter, looper stays pending."""
    x_max = 200
    base = build_surrogate(x_max, 10**4).bits()
    flipped = list(base)
    assert flipped[1] == 1
    flipped[1] = 0
    rep = verify_candidate_oracle(flipped, x_max, 10**6)
    refuted = [r.x for r in rep.refutations] == [1] and all(r.replay() for r in rep.refutations)
    looper = list(base)
    assert looper[7] == 0
    looper[7] = 1
    budgets = [0, 10**2, 10**4, 10**6]
    pending = all(7 in verify_candidate_oracle(looper, x_max, b).pending for b in budgets)
    ok = refuted and pending
    return report(
        8,
        ok,
        f"flipped x=1 refuted={refuted} (trace {rep.refutations[0] if rep.refutations else None}); "
        f"x=7 pending at budgets {budgets}: {pending}",
    )


FAST_ARGS = {
    "enumerate": ["--x-max", "8"],
    "run-program": ["--x", "7", "--T", "500"],
    "oracle": ["--x-max", "20", "--T", "200"],
    "omega": [],
    "measure": ["--x", "0", "--T", "0", "--D", "16", "--seed", "1"],
    "amplify": ["--x", "3", "--eps", "0.3", "--seed", "4"],
    "parity": ["--x", "7", "--T", "1000000", "--x-max", "32", "--D", "128", "--seed", "1"],
    "estimate-omega": ["--seed", "9"],
    "extract-bits": ["--N", "268435456", "--sampler", "binomial", "--seed", "2"],
    "perturb": ["--N", "100000", "--seed", "3"],
    "verify-oracle": ["--flip", "1", "--claim", "7"],
}
TIMESTAMP = re.compile(rb'"timestamp":"[^"]*"')


def criterion_9():
    """Re-running every command with an identical config gives identical records."""
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in COMMANDS:
            path = Path(tmp) / f"{name}.jsonl"
            for _ in range(2):
                assert main([name, *FAST_ARGS[name], "--results", str(path), "--quiet"]) == 0
            a, b = path.read_bytes().splitlines()
            if TIMESTAMP.sub(b"", a) != TIMESTAMP.sub(b"", b):
                differing.append(name)
    ok = not differing
    return report(9, ok, f"{len(COMMANDS)} commands rerun; records differing beyond timestamp: {differing or 'none'}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_acceptance(criterion, capsys):
    with capsys.disabled():
        assert criterion()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
