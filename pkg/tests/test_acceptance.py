"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from svetjoint.measure import (
    Setting,
    busch_margin,
    equal_sharpness_max,
    joint_effect_matrices,
    joint_povm,
    verify_proportionality,
)
from svetjoint.optimize import maximize
from svetjoint.qcore import Direction, make_ghz, random_state
from svetjoint.simulate import audit_chain_n, audit_chain_three, audit_no_signaling, empirical_correlators, sample_grid
from svetjoint.svetlichny import (
    SettingsGrid,
    bounds,
    correlator_table,
    parity_counts,
    sign_v,
    svetlichny_joint_value,
    svetlichny_value,
)

from conftest import random_dir

RESTARTS = {3: 24, 4: None, 5: None, 6: None}


@pytest.fixture(scope="session")
def ghz_optima():
    out = {}
    for n, restarts in RESTARTS.items():
        t0 = time.perf_counter()
        res = maximize(make_ghz(n), restarts=restarts, seed=0)
        out[n] = (res, time.perf_counter() - t0)
    return out


def random_config(rng, n, eta_scale=None):
    grid = SettingsGrid.projective([(random_dir(rng), random_dir(rng)) for _ in range(n)])
    a, a2 = grid.parties[0][0].direction, grid.parties[0][1].direction
    eta = equal_sharpness_max(a, a2) * (rng.uniform(0, 1) if eta_scale is None else eta_scale)
    joint = joint_povm(Setting(a, eta), Setting(a2, eta))
    rho = random_state(n, str(rng.choice(["pure", "mixed"])), int(rng.integers(2**31)))
    return rho, grid, joint, eta


@pytest.fixture(scope="session")
def random_configs():
    rng = np.random.default_rng(20260101)
    return [random_config(rng, int(rng.integers(2, 6))) for _ in range(200)]


def ghz_optimal_grid(n):
    phis = [(-math.pi / 4, math.pi / 4)] + [(0.0, math.pi / 2)] * (n - 1)
    return SettingsGrid.projective(
        [(Direction.from_angles(math.pi / 2, p), Direction.from_angles(math.pi / 2, q)) for p, q in phis]
    )


def test_c01_ghz3_maximum(ghz_optima, acceptance_log):
    res, dt = ghz_optima[3]
    err = abs(res.best_value - 4 * math.sqrt(2))
    ok = err <= 1e-6 and dt < 10.0
    acceptance_log("C1 GHZ3 maximum", ok, f"S={res.best_value:.12f} |err|={err:.2e} time={dt:.1f}s")
    assert ok


def test_c02_quantum_bound_scaling(ghz_optima, acceptance_log):
    parts, ok = [], True
    for n in (4, 5, 6):
        res, dt = ghz_optima[n]
        q = bounds(n)[1]
        gap = q - res.best_value
        good = abs(gap) <= 1e-5 and res.best_value <= q + 1e-6 and dt < 60.0
        # every restart must also respect the bound
        good = good and max(t.value for t in res.trace) <= q + 1e-6
        ok &= good
        parts.append(f"N={n} gap={gap:.1e} t={dt:.1f}s")
    acceptance_log("C2 quantum bound N=4..6", ok, "; ".join(parts))
    assert ok


def test_c03_eta_scaling(random_configs, acceptance_log):
    worst = 0.0
    for rho, grid, joint, eta in random_configs:
        sj = svetlichny_joint_value(rho, joint, grid.parties[1:])
        s = svetlichny_value(correlator_table(rho, grid)).value
        worst = max(worst, abs(sj - eta * s))
    ok = worst <= 1e-10
    acceptance_log("C3 eta scaling", ok, f"{len(random_configs)} configs, max |S^J - eta S|={worst:.1e}")
    assert ok


def test_c04_joint_bound(random_configs, ghz_optima, acceptance_log):
    excess = -math.inf
    for rho, grid, joint, _ in random_configs:
        sj = svetlichny_joint_value(rho, joint, grid.parties[1:])
        excess = max(excess, sj - bounds(grid.n)[0])
    sat_err = 0.0
    r = math.sqrt(0.5)
    for n in (3, 4, 5, 6):
        grids = [ghz_optimal_grid(n), ghz_optima[n][0].best_angles.to_grid()]
        for grid in grids:
            a, a2 = grid.parties[0][0].direction, grid.parties[0][1].direction
            joint = joint_povm(Setting(a, r), Setting(a2, r))
            sj = svetlichny_joint_value(make_ghz(n), joint, grid.parties[1:])
            excess = max(excess, sj - bounds(n)[0])
            sat_err = max(sat_err, abs(sj - 2 ** (n - 1)))
    ok = excess <= 1e-9 and sat_err <= 1e-6
    acceptance_log("C4 joint bound", ok, f"max excess={excess:.1e}, GHZ saturation err={sat_err:.1e}")
    assert ok


def test_c05_busch_equivalence(acceptance_log):
    rng = np.random.default_rng(5)
    counter = checked = 0
    for _ in range(10_000):
        s1 = Setting(random_dir(rng), float(rng.uniform(0, 1)))
        s2 = Setting(random_dir(rng), float(rng.uniform(0, 1)))
        margin = busch_margin(s1, s2)
        if abs(margin) < 1e-8:
            continue
        checked += 1
        lam = min(float(np.linalg.eigvalsh(g)[0]) for g in joint_effect_matrices(s1, s2).values())
        if (lam >= -1e-12) != (margin >= 0):
            counter += 1
    ok = counter == 0
    acceptance_log("C5 Busch equivalence", ok, f"{checked} samples, {counter} counterexamples")
    assert ok


def test_c06_proportionality(acceptance_log):
    rng = np.random.default_rng(6)
    worst = 0.0
    for i in range(1000):
        rho = random_state(1, "mixed" if i % 2 else "pure", i)
        worst = max(worst, verify_proportionality(rho, Setting(random_dir(rng), float(rng.uniform(0, 1)))))
    ok = worst <= 1e-12
    acceptance_log("C6 proportionality", ok, f"1000 samples, max residual={worst:.1e}")
    assert ok


def test_c07_no_signaling(acceptance_log):
    rng = np.random.default_rng(7)
    failures = 0
    for i in range(100):
        rho, grid, joint, _ = random_config(rng, 2 + i % 3)
        report = audit_no_signaling(rho, joint, grid.parties[1:], shots=100_000, seed=i)
        failures += len(report.failures())
    ok = failures == 0
    acceptance_log("C7 no-signaling", ok, f"100 configs at 1e5 shots, {failures} failed checks")
    assert ok


def test_c08_chain_audits(acceptance_log):
    rng = np.random.default_rng(8)
    failures = {"chain_three N=3": 0, "chain_n N=3": 0, "chain_n N=4": 0}
    for _ in range(100):
        rho, grid, joint, _ = random_config(rng, 3)
        failures["chain_three N=3"] += len(audit_chain_three(rho, grid, joint).failures())
        rho, grid, joint, _ = random_config(rng, 3)
        failures["chain_n N=3"] += len(audit_chain_n(rho, grid, joint).failures())
        rho, grid, joint, _ = random_config(rng, 4)
        failures["chain_n N=4"] += len(audit_chain_n(rho, grid, joint).failures())
    ok = sum(failures.values()) == 0
    acceptance_log("C8 derivation chain", ok, ", ".join(f"{k}: {v} failures" for k, v in failures.items()))
    assert ok


def test_c09_combinatorics(acceptance_log):
    counts_ok = all(parity_counts(n) == (2 ** (n - 2), 2 ** (n - 2)) for n in range(2, 11))
    order = [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
    pattern = [sign_v(x) for x in order]
    ok = counts_ok and pattern == [1, 1, 1, 1, -1, -1, -1, -1]
    acceptance_log("C9 combinatorics", ok, f"parity counts n=2..10 ok={counts_ok}, N=3 signs={pattern}")
    assert ok


def test_c10_estimator(acceptance_log):
    rho, grid = make_ghz(3), ghz_optimal_grid(3)
    target = 4 * math.sqrt(2)
    sigmas = {}
    dev = 0.0
    for shots in (1_000, 10_000, 100_000):
        est, se = empirical_correlators(sample_grid(rho, grid, shots, seed=10)).svetlichny_estimate()
        sigmas[shots] = se
        if shots == 100_000:
            dev = abs(est - target) / se
    r1 = sigmas[1_000] / sigmas[10_000]
    r2 = sigmas[10_000] / sigmas[100_000]
    root10 = math.sqrt(10)
    ok = dev <= 5.0 and abs(r1 / root10 - 1) < 0.1 and abs(r2 / root10 - 1) < 0.1
    acceptance_log("C10 estimator", ok, f"dev={dev:.2f} sigma, se ratios {r1:.3f}, {r2:.3f} (sqrt10={root10:.3f})")
    assert ok
