"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line (also visible under pytest capture) with
its measured worst case and runtime.  Run directly with
``python tests/test_acceptance.py`` for just the summary lines.
"""

import math
import time

import numpy as np
import pytest

from varq import harness as hz
from varq import operators as op
from varq import transference as tr
from varq.martingale import (DyadicFunction, conditional_expectation, cotype_ratio, partial_sums,
                             random_martingale, witness_linfty)
from varq.spaces import INF, Space
from varq.variation import SamplePath, vq_bruteforce, vq_dp

# tolerances and budgets pinned from the acceptance criteria
VQ_REL = 1e-12
CLOSED_FORM_TOL = 1e-8
IDENTITY_TOL = 1e-6
DECOMPOSITION_TOL = 1e-10
WEIGHT_MASS_TOL = 1e-10
PYTHAGORAS_REL = 1e-12
TELESCOPING_SLACK = 1e-9
RICHARDSON_GATE = 0.05
INVARIANCE_REL = 1e-10
BUDGET = {1: 10, 2: 10, 3: 30, 4: 60, 5: 10, 6: 120, 7: 60}

ACCEPT_GRID = op.ScaleGrid.geometric(2.0 ** -6, 2.0 ** 6, 33)


def report(n, ok, detail, elapsed, capsys=None):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} ({elapsed:.1f}s, budget {BUDGET[n]}s)"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return line


def criterion_1():
    rng = np.random.default_rng(2024)
    spaces = [Space.lr(2, 1), Space.lr(3, 2), Space.lr(4, INF)]
    qs = [1.0, 2.0, 2.5, 4.0]
    worst, chains_differ = 0.0, 0
    for i in range(500):
        sp, q = spaces[i % 3], qs[(i // 3) % 4]
        J = int(rng.integers(0, 13))
        p = SamplePath.from_values(rng.normal(size=(J + 1, sp.dim)), sp)
        a, b = vq_dp(p, q), vq_bruteforce(p, q)
        if b.value > 0:
            worst = max(worst, abs(a.value - b.value) / b.value)
        elif a.value != 0:
            worst = math.inf
        chains_differ += a.chain != b.chain
    ok = worst <= VQ_REL and chains_differ == 0
    return ok, f"V_q DP vs brute force, 500 paths, worst rel {worst:.1e}, chain mismatches {chains_differ}"


def criterion_2():
    rng = np.random.default_rng(7)
    sp = Space.lr(3, 2)
    qs = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 8.0]
    bad = {"q-monotone": 0, "subset": 0, "homogeneity": 0, "translation": 0}
    for _ in range(200):
        p = SamplePath.from_values(rng.normal(size=(int(rng.integers(1, 15)), 3)), sp)
        q1, q2 = sorted(rng.choice(qs, 2, replace=False))
        if vq_dp(p, q2).value > vq_dp(p, q1).value * (1 + 1e-12):
            bad["q-monotone"] += 1
        q = float(rng.choice(qs))
        base = vq_dp(p, q).value
        if p.J > 0 and vq_dp(p.drop(int(rng.integers(0, p.J + 1))), q).value > base * (1 + 1e-12):
            bad["subset"] += 1
        lam = float(rng.normal(scale=3.0))
        if abs(vq_dp(p.scaled(lam), q).value - abs(lam) * base) > 1e-12 * abs(lam) * base + 1e-300:
            bad["homogeneity"] += 1
        shift = rng.normal(scale=5.0, size=3)
        if abs(vq_dp(p.shifted(shift), q).value - base) > 1e-9 * max(base, 1.0):
            bad["translation"] += 1
    ok = not any(bad.values())
    return ok, "V_q laws, 200 cases each, violations " + ", ".join(f"{k} {v}" for k, v in bad.items())


FAMILIES = [op.AVERAGE, op.POISSON, op.CONJUGATE_POISSON, op.TRUNCATED_HILBERT, op.doubly_truncated(3.0),
            op.PHI_PLUS, op.PHI_MINUS, op.RHO_PLUS, op.RHO_MINUS]


def criterion_3():
    worst = {}
    for idx, kind in enumerate(FAMILIES):
        rng = np.random.default_rng(100 + idx)
        w = 0.0
        for _ in range(100):
            f = op.StepFunction.random(rng, Space(2))
            t = float(np.exp(rng.uniform(math.log(0.05), math.log(20.0))))
            x = float(rng.uniform(-4.0, 4.0))
            diff = op.eval(kind, f, t, x).coords - op.quad_convolve(kind.kernel(t), f, x).coords
            w = max(w, float(np.max(np.abs(diff))))
        worst[kind.label] = w
    one, unit = op.StepFunction.indicator(-1.0, 1.0), op.StepFunction.indicator(0.0, 1.0)
    anchors = [
        abs(op.eval(op.POISSON, one, 1.0, 0.0).coords[0] - 0.5),
        abs(op.hilbert_full(one, 2.0).coords[0] - math.log(3) / math.pi),
        abs(op.eval(op.TRUNCATED_HILBERT, unit, 0.5, 2.0).coords[0] - math.log(2) / math.pi),
    ]
    top = max(worst.values())
    ok = top <= CLOSED_FORM_TOL and max(anchors) <= 1e-14
    return ok, f"closed forms vs quadrature, 9 families x 100, worst {top:.1e}, anchors {max(anchors):.1e}"


def criterion_4():
    rows = {r.family: r for r in hz.identity_suite(seed=0)}
    tampered = {r.family: r for r in hz.identity_suite(seed=0, tamper=True, count=10, variational_count=0)}
    checks = [
        rows["conjugate-poisson"].estimate <= IDENTITY_TOL,
        rows["decomposition"].estimate <= DECOMPOSITION_TOL,
        rows["poisson-average"].estimate <= IDENTITY_TOL,
        rows["weight-mass"].estimate <= WEIGHT_MASS_TOL,
        rows["variational-average"].passed,
        rows["kernel-hypotheses"].passed,
        rows["negative-control"].passed,
        not tampered["conjugate-poisson"].passed,
    ]
    ok = all(checks)
    detail = (f"identities: Q=P(Hf) {rows['conjugate-poisson'].estimate:.1e}, "
              f"decomposition {rows['decomposition'].estimate:.1e}, "
              f"Poisson average {rows['poisson-average'].estimate:.1e}, "
              f"mass {rows['weight-mass'].estimate:.1e}, "
              f"negative control {rows['negative-control'].estimate:.1e} (must exceed {IDENTITY_TOL:g})")
    return ok, detail


def criterion_5():
    rng = np.random.default_rng(5)
    exact = True
    for _ in range(20):
        m = int(rng.integers(1, 8))
        g = DyadicFunction(m, rng.normal(size=(2 ** m, 3)), Space.lr(3, 1))
        for j in range(m + 1):
            for k in range(m + 1):
                a = conditional_expectation(conditional_expectation(g, k), j).values
                exact &= bool(np.array_equal(a, conditional_expectation(g, min(j, k)).values))
    mart_gap = 0.0
    pyth = 0.0
    for seed in range(20):
        M = random_martingale(seed, Space.lr(4, 2), 6)
        S = partial_sums(M, check=True)
        for k in range(M.m):
            mart_gap = max(mart_gap, float(np.abs(conditional_expectation(S[k + 1], k).values - S[k].values).max()))
        num = math.fsum(d.expect_norm_pow(2) for d in M.increments())
        pyth = max(pyth, abs(num - S[-1].expect_norm_pow(2)) / S[-1].expect_norm_pow(2))
    ratios = {n: cotype_ratio(witness_linfty(n), 2.0).ratio for n in (2, 4, 8)}
    ok = exact and mart_gap <= 1e-14 and pyth <= PYTHAGORAS_REL and all(ratios[n] == n for n in ratios)
    return ok, (f"martingales: tower exact {exact}, martingale gap {mart_gap:.1e}, Pythagoras rel {pyth:.1e}, "
                f"witness ratios {[ratios[n] for n in (2, 4, 8)]}")


def criterion_6():
    worst_tel, worst_gap, fails = 0.0, 0.0, []
    for m in (1, 2, 3):
        for eps in (0.1, 0.01):
            for label, M in (("witness", witness_linfty(m)), ("random l2", random_martingale(m, Space.lr(2, 2), m))):
                blocks = tr.build_blocks(M, 31)
                cert = tr.select_sequences(blocks, eps)
                check = tr.check_certificate(blocks, cert, grid=2 ** 12)
                if not (cert.holds() and check.holds(cert) and check.dominated_by(cert)):
                    fails.append(f"certificate m={m} eps={eps} {label}")
                tel = tr.telescoping_error(blocks, cert, grid=2 ** 12)
                worst_tel = max(worst_tel, max(e / (3 * eps) for e in tel))
                if max(tel) > 3 * eps + TELESCOPING_SLACK:
                    fails.append(f"telescoping m={m} eps={eps} {label}")
                rep = tr.cotype_chain_report(M, 2.0, eps, 31, gate=RICHARDSON_GATE)
                worst_gap = max(worst_gap, rep.max_gap)
                if not all(math.isfinite(ln.lhs) and math.isfinite(ln.rhs) for ln in rep.links):
                    fails.append(f"non-finite link m={m} eps={eps} {label}")
                if rep.max_gap > RICHARDSON_GATE:
                    fails.append(f"gap m={m} eps={eps} {label}")
    rng = np.random.default_rng(6)
    g = tr.DiagonalPoly.from_rows(rng.integers(-200, 200, 40), rng.normal(size=(40, 2)), Space(2))
    semigroup = all(np.array_equal(tr.poisson_flow(tr.poisson_flow(g, s), t).coeffs,
                                   tr.poisson_flow(g, s + t).coeffs)
                    for s, t in [(0.1, 0.2), (0.01, 0.3), (0.0, 1.0), (0.7, math.inf)])
    if not semigroup:
        fails.append("semigroup")
    ok = not fails
    detail = (f"transference: worst telescoping / 3eps {worst_tel:.3f}, worst Richardson gap {worst_gap:.2%}, "
              f"semigroup exact {semigroup}" + (f", failures {fails}" if fails else ""))
    return ok, detail


def criterion_7():
    spatial = hz.SpatialSpec(points_per_unit=32)
    cfg = hz.ExperimentConfig(q=3.0, p=2.0, family=op.POISSON, grid=ACCEPT_GRID,
                              corpus=hz.CorpusSpec(count=4, seed=3),
                              optimizer=hz.OptimizerSpec(restarts=2, iterations=12, seed=3), spatial=spatial)
    a, b = hz.estimate_constant(cfg), hz.estimate_constant(cfg)
    same_bytes = hz.dumps([a], "json") == hz.dumps([b], "json") and hz.dumps([a]) == hz.dumps([b])

    rng = np.random.default_rng(9)
    refine_ok = True
    for _ in range(3):
        f = op.StepFunction.random(rng, Space.lr(2, 2))
        vals = [hz.field_vq_lp(f, op.CONJUGATE_POISSON, hz._nested_grid(op.ScaleGrid.geometric(2.0 ** -6, 2.0 ** 6, 9), L),
                               2.5, 2.0, spatial, check=False) for L in range(3)]
        refine_ok &= all(y >= x * (1 - 1e-12) for x, y in zip(vals[:-1], vals[1:]))

    one = op.StepFunction.indicator(0.0, 1.0)
    curve = [hz.field_vq_lp(one, op.AVERAGE, ACCEPT_GRID, q, 2.0, spatial) for q in (2.0, 2.5, 3.0, 4.0)]
    q_ok = all(y <= x * (1 + 1e-12) for x, y in zip(curve[:-1], curve[1:]))

    base = a.estimate
    scaled = hz.estimate_constant(cfg.replace(corpus=hz.CorpusSpec(count=4, seed=3, scale=-7.5))).estimate
    dilated = hz.estimate_constant(cfg.replace(corpus=hz.CorpusSpec(count=4, seed=3, dilation=2.0),
                                               grid=ACCEPT_GRID.dilated(0.5))).estimate
    scale_err = abs(scaled - base) / base
    dil_err = abs(dilated - base) / base
    ok = same_bytes and refine_ok and q_ok and scale_err <= INVARIANCE_REL and dil_err <= INVARIANCE_REL
    return ok, (f"harness: identical bytes {same_bytes}, refinement monotone {refine_ok}, q-curve nonincreasing "
                f"{q_ok}, scaling rel {scale_err:.1e}, dilation rel {dil_err:.1e}")


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
            7: criterion_7}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    start = time.perf_counter()
    ok, detail = CRITERIA[n]()
    elapsed = time.perf_counter() - start
    within = elapsed <= BUDGET[n]
    report(n, ok and within, detail if within else f"{detail}; over runtime budget", elapsed, capsys)
    assert ok, detail
    assert within, f"criterion {n} took {elapsed:.1f}s, budget {BUDGET[n]}s"


if __name__ == "__main__":
    for n, fn in CRITERIA.items():
        start = time.perf_counter()
        ok, detail = fn()
        report(n, ok, detail, time.perf_counter() - start)
