"""Acceptance checks.  Each test records a single PASS/FAIL line with the measured numbers."""
import math
import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from oracles import field_to_dict, first_iterate_oracle
from nlsinflate.lattice import SpectralField, field_multiply, signed_sumset, support_bound_check, torus
from nlsinflate.norms import d_norm, f_s, hs_norm, lowfreq_l2, modulation_norm
from nlsinflate.picard import (IterateTable, NonlinearitySpec, first_iterate, next_iterate,
                               sequence_a, series_decompose, series_sum, verify_sequence_bound)
from nlsinflate.resonance import constraint_tuple_count, enumerate_resonant_array, verify_characterization
from nlsinflate.scenarios import (build_phi, gauge_separation_check, quartic_zero_mode,
                                  run_inflation, schedule_case)
from nlsinflate.solver import SolverConfig, compare_series


def datum(entries):
    idx = np.array([[k] for k in entries], dtype=np.int64)
    return SpectralField.static(torus(1), 1.0, idx, np.array(list(entries.values()), dtype=complex))


def test_acc01_quartic_resonance_identity(report_line):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10):
        N = int(2 ** rng.integers(6, 13))
        s = float(rng.uniform(-1, 0))
        r = float(rng.uniform(0.05, 1.0))
        rho = float(rng.uniform(0.05, 0.85))
        T = (rho / (r * N ** (-s))) ** 3
        a = r * N ** (-s)
        G = first_iterate(datum({-N: a, 2 * N: a, 3 * N: a}), 4, 1, T)
        got = abs(G.value_at((0,), T))
        worst = max(worst, abs(got / quartic_zero_mode(r, N, s, T) - 1))
    count, resonant = constraint_tuple_count([(-64,), (128,), (192,)], 4, 2, (0,))
    N, r, s, T = 256, 0.3, -0.5, 1e-6
    a = r * N ** (-s)
    G = first_iterate(datum({-N: a, 2 * N: a, 3 * N: a}), 4, 2, T)
    dev42 = abs(abs(G.value_at((0,), T)) / (15 * a ** 4 * T) - 1)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and count == 15 and resonant == 15 and dev42 <= 1e-10 and elapsed < 10
    report_line("ACC1", ok, f"max_rel_dev={worst:.2e} (4,2) tuples={count} resonant={resonant} "
                            f"(4,2)_dev={dev42:.2e} time={elapsed:.2f}s")
    assert ok


@pytest.mark.slow
def test_acc02_quintic_characterization(report_line):
    t0 = time.perf_counter()
    reps = {K: verify_characterization(K) for K in (3, 6, 10)}
    t10 = time.perf_counter()
    arr = enumerate_resonant_array(1, 2, (0,), 10)[:, :, 0]
    parity = bool(np.all(np.any(arr[:, [0, 2, 4]] % 2 == 0, axis=1)))
    elapsed = time.perf_counter() - t0
    ok = all(r.equal for r in reps.values()) and parity and elapsed < 60
    detail = " ".join(f"K={K}:{'equal' if r.equal else 'differ'}({r.brute_count})"
                      for K, r in reps.items())
    report_line("ACC2", ok, f"{detail} parity={parity} time={elapsed:.1f}s "
                            f"(characterization {t10 - t0:.1f}s)")
    assert ok


def test_acc03_sequence_bounds(report_line):
    t0 = time.perf_counter()
    ones = all(v == Fraction(1) for v in sequence_a(2, 50))
    bounds = {p: verify_sequence_bound(sequence_a(p, 30), p, 1.0) for p in (2, 3, 4, 5)}
    elapsed = time.perf_counter() - t0
    ok = ones and all(bounds.values()) and elapsed < 1
    report_line("ACC3", ok, f"a(2)==1:{ones} bounds={bounds} time={elapsed:.3f}s")
    assert ok


def test_acc04_engine_vs_formula(report_line):
    rng = np.random.default_rng(4)
    worst = 0.0
    for p, q in [(2, 0), (2, 1), (2, 2), (3, 1), (3, 3)]:
        for _ in range(20):
            n = int(rng.integers(1, 5))
            keys = rng.choice(np.arange(-15, 16), size=n, replace=False)
            data = {int(k): complex(rng.normal(), rng.normal()) for k in keys}
            nu = complex(rng.normal(), rng.normal())
            T = float(rng.uniform(0.05, 1.0))
            table = IterateTable.build(datum(data), NonlinearitySpec.single(p, q, nu), T, p - 1)
            got = field_to_dict(next_iterate(table, p).at(T))
            ref = {k: v for k, v in first_iterate_oracle(data, p, q, nu, T).items() if v != 0}
            for k in set(got) | set(ref):
                g, r = got.get(k, 0), ref.get(k, 0)
                worst = max(worst, abs(g - r) / abs(r) if r else math.inf if abs(g) > 1e-14 else 0)
    ok = worst <= 1e-12
    report_line("ACC4", ok, f"max_entrywise_rel_err={worst:.2e} over 100 data")
    assert ok


@pytest.mark.slow
def test_acc05_series_vs_solver(report_line):
    t0 = time.perf_counter()
    sc = schedule_case("case6", 4, {"r": 0.05})
    res = compare_series(sc, 7, SolverConfig.for_horizon(sc.T, 384, 2 ** 14))
    elapsed = time.perf_counter() - t0
    ok = (res["rho_hat"] <= 0.3 and res["bound"] <= 1e-6 and res["l2_rel_err"] <= res["bound"]
          and 3.5 <= res["dt_order_estimate"] <= 4.5 and elapsed < 120)
    report_line("ACC5", ok, f"rho_hat={res['rho_hat']:.3g} err={res['l2_rel_err']:.2e} "
                            f"bound={res['bound']:.2e} order={res['dt_order_estimate']:.2f} "
                            f"time={elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_acc06_support_bound(report_line):
    fails = []
    for case in ("case1", "case2", "case3", "case4", "case5", "case6"):
        sc = schedule_case(case, 4)
        phi = build_phi(sc)
        Sigma = phi.support()
        table = IterateTable.build(phi, sc.nonlinearity, sc.T, 9)
        for k in range(1, 10):
            if not support_bound_check(k, Sigma, table.get(k)):
                fails.append((case, k))
    sizes = [len(signed_sumset([(5,), (-5,), (10,)], k)) for k in range(1, 8)]
    sizes_ok = all(n <= 6 ** k for k, n in enumerate(sizes, start=1))
    ok = not fails and sizes_ok
    report_line("ACC6", ok, f"violations={fails} |S_k|={sizes} (<= 6^k: {sizes_ok})")
    assert ok


def test_acc07_norm_suite(report_line):
    rng = np.random.default_rng(7)

    def rand_field(n, span):
        keys = rng.choice(np.arange(-span, span + 1), size=n, replace=False)
        return datum({int(k): complex(rng.normal(), rng.normal()) for k in keys})

    C = 0.0
    for A in (1, 2, 4, 8):
        for _ in range(100):
            f, g = rand_field(10, 40), rand_field(10, 40)
            lhs = modulation_norm(field_multiply(f, g), A)
            C = max(C, lhs / (math.sqrt(A) * modulation_norm(f, A) * modulation_norm(g, A)))
    dev = 0.0
    for _ in range(50):
        f = rand_field(int(rng.integers(1, 30)), 2000)
        a, b = d_norm(f, 2, 2, alpha=0.0), d_norm(f, 2, 2, s=-0.5)
        dev = max(dev, abs(a - b) / b)
    fval = f_s(1.0, -0.5)
    f_ok = abs(fval - math.sqrt(math.pi / 2)) <= 1e-9
    chain = 0.0
    chain_ok = True
    for _ in range(100):
        f = rand_field(int(rng.integers(1, 40)), 500)
        l2, m1 = hs_norm(f, 0.0), modulation_norm(f, 1)
        chain_ok &= l2 <= m1 * (1 + 1e-12)
        chain = max(chain, m1 / hs_norm(f, 0.6))
    chain_ok &= chain <= 10
    ok = C <= 2 and dev <= 1e-12 and f_ok and chain_ok
    report_line("ACC7", ok, f"product_C={C:.3f} D_identity_dev={dev:.1e} "
                            f"f_-1/2(1)={fval:.10f} vs sqrt(pi/2)={math.sqrt(math.pi / 2):.10f} "
                            f"({'ok' if f_ok else 'mismatch'}) embedding_C={chain:.2f} ({chain_ok})")
    assert ok


@pytest.mark.slow
def test_acc08_inflation_trend(report_line):
    t0 = time.perf_counter()
    Ns = [2 ** 6, 2 ** 8, 2 ** 10, 2 ** 12]
    ratios, rho_hats = [], []
    for N in Ns:
        rep = run_inflation(schedule_case("case6", N, {"rho": 0.7}), strict=False)
        ratios.append(rep.ratio)
        rho_hats.append(rep.rho_hat)
    slope = float(np.polyfit(np.log(Ns), np.log(ratios), 1)[0])
    elapsed = time.perf_counter() - t0
    mono = all(b > a for a, b in zip(ratios, ratios[1:]))
    ok = mono and ratios[-1] > 1 and abs(slope - 1 / 6) <= 0.1 / 6 and elapsed < 300
    report_line("ACC8", ok, f"ratios={[round(r, 4) for r in ratios]} monotone={mono} "
                            f"exponent={slope:.4f} target=0.1667+-0.0167 "
                            f"rho_hat={[round(r, 3) for r in rho_hats]} time={elapsed:.0f}s")
    assert ok


def test_acc09_gauge_separation(report_line):
    devs = {}
    for label, terms, q_star in [("u^2+ubar^2", ((2, 2, 1.0), (2, 0, 1.0)), 2),
                                 ("u^4+u^3ubar", ((4, 4, 1.0), (4, 3, 1.0)), 3),
                                 ("u^3+u ubar^2", ((3, 3, 1.0), (3, 1, 1.0)), 1)]:
        sc = schedule_case("case6", 16, {"nonlinearity": NonlinearitySpec(terms), "s": -0.1})
        devs[label] = gauge_separation_check(sc, q_star)
    sc = schedule_case("sec4_case6", 16)
    table = IterateTable.build(build_phi(sc), sc.nonlinearity, sc.T, 7)
    total, _ = series_sum(table, sc.T, 7, strict=False)
    diff = series_decompose(table, sc.T, 7).total() - total
    idx, val = diff.values() if diff.n_rows else (None, np.zeros(0))
    rec = float(np.max(np.abs(val))) if val.size else 0.0
    ok = max(devs.values()) <= 1e-10 and rec <= 1e-14 * max(1.0, float(np.max(np.abs(total.values()[1]))))
    report_line("ACC9", ok, " ".join(f"{k}:{v:.1e}" for k, v in devs.items())
                + f" recomposition_max_abs={rec:.1e}")
    assert ok


def test_acc10_appendix_low_frequency(report_line):
    N = 2 ** 10
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sc = schedule_case("appA_quintic", N)
    phi = build_phi(sc)
    U5 = first_iterate(phi, 5, 3, sc.T).at(sc.T)
    got = lowfreq_l2(U5, 1.0)
    # only exactly resonant tuples grow like T; the rest stay O(N^-2)
    Sigma = [(N,), (3 * N,), (4 * N,)]
    _, n_res = constraint_tuple_count(Sigma, 5, 3, (0,))
    amp = sc.r * N ** (-sc.s)
    oracle = n_res * amp ** 5 * sc.T
    ratio = got / oracle
    ok = abs(ratio - 1) <= 0.1 and N ** -2 < sc.T < 1
    report_line("ACC10", ok, f"lowfreq={got:.4e} oracle={oracle:.4e} ({n_res} resonant tuples) "
                             f"ratio={ratio:.4f} T={sc.T:.2e}")
    assert ok
