import math

import numpy as np
import pytest
from scipy.special import polygamma

from varq import transference as tr
from varq.errors import DomainError, SizeError
from varq.martingale import WalshMartingale, random_martingale, witness_linfty
from varq.spaces import INF, Point, Space


def test_walsh_examples():
    sp = Space(1)
    const = tr.walsh_expand([[2.0], [2.0]], sp)
    assert const[()].coords[0] == 2.0 and const[(1,)].coords[0] == 0.0
    first = tr.walsh_expand([[1.0], [-1.0]], sp)
    assert first[()].coords[0] == 0.0 and first[(1,)].coords[0] == 1.0
    c = tr.walsh_expand([[1.0], [2.0], [3.0], [4.0]], sp)
    assert {k: v.coords[0] for k, v in c.items()} == {(): 2.5, (1,): -1.0, (2,): -0.5, (1, 2): 0.0}


def test_walsh_reconstructs_table():
    rng = np.random.default_rng(0)
    table = rng.normal(size=(8, 2))
    c = tr.walsh_expand(table, Space(2))
    from varq.martingale import signs
    s = signs(3)
    rebuilt = sum(np.outer(np.prod(s[:, [i - 1 for i in A]], axis=1), v.coords) for A, v in c.items())
    assert np.allclose(rebuilt, table, atol=1e-14)


def test_fejer_examples():
    w = tr.fejer_squarewave(1)
    assert w.coefficient(0) == 0.0
    assert w.coefficient(1) == pytest.approx(1 / math.pi) and w.coefficient(-1) == pytest.approx(1 / math.pi)
    for M in (2, 5, 31):
        assert tr.fejer_squarewave(M).coefficient(0) == 0.0
    with pytest.raises(DomainError):
        tr.fejer_squarewave(0)


def _parseval_error(M):
    # sum over odd |j| <= M of c_j^2 (|j| / (M + 1))^2 plus the tail sum over odd |j| > M
    c2 = 4 / math.pi ** 2
    inner = sum(2 * c2 / j ** 2 * (j / (M + 1)) ** 2 for j in range(1, M + 1, 2))
    first = M + 1 if M % 2 == 0 else M + 2
    tail = 2 * c2 * 0.25 * float(polygamma(1, first / 2))
    return math.sqrt(inner + tail)


def test_fejer_l2_error_matches_parseval_and_decreases():
    errs = []
    for M in (3, 7, 15, 31):
        w = tr.fejer_squarewave(M, 2.0)
        assert w.lq_error == pytest.approx(_parseval_error(M), rel=1e-3)
        errs.append(w.lq_error)
    assert all(b < a for a, b in zip(errs[:-1], errs[1:]))


def test_m1_block_is_scaled_wave():
    M = WalshMartingale([[[2.0, -1.0]]], Space(2))
    (b,) = tr.build_blocks(M, 7)
    w = tr.fejer_squarewave(7)
    for row, co in zip(b.freqs, b.coeffs):
        assert np.allclose(co, w.coefficient(int(row[0])) * np.array([2.0, -1.0]))
    assert b.nnz == w.support().size


def test_zero_martingale_gives_zero_blocks():
    Z = random_martingale(0, Space(2), 3, amplitude=0.0)
    blocks = tr.build_blocks(Z, 7)
    assert all(b.coefficient_sum() == 0.0 for b in blocks)


def test_m2_witness_block_structure():
    W = witness_linfty(2)
    b1, b2 = tr.build_blocks(W, 3)
    w = tr.fejer_squarewave(3)
    assert b2.nnz == w.support().size  # phi_2 = e_2 is constant: no theta_1 dependence
    # a hand expansion with phi_2 = (1, -1) on (+, -): phi_2(s) = s_1 e_1
    M = WalshMartingale([[[1.0]], [[1.0], [-1.0]]], Space(1))
    _, b = tr.build_blocks(M, 3)
    assert b.nnz == w.support().size ** 2
    terms = {tuple(r): c[0] for r, c in zip(b.freqs.tolist(), b.coeffs)}
    assert terms[(1, -3)] == pytest.approx(w.coefficient(1) * w.coefficient(-3))
    assert (0, 1) not in terms


def test_block_limits():
    with pytest.raises(SizeError):
        tr.build_blocks(random_martingale(0, Space(1), 5), 3)


def test_lift_error_shrinks_with_degree():
    M = random_martingale(2, Space.lr(2, 2), 2)
    low = [b.lift_error for b in tr.build_blocks(M, 3)]
    high = [b.lift_error for b in tr.build_blocks(M, 31)]
    assert all(h < l for h, l in zip(high, low))


def test_flow_examples():
    sp = Space(1)
    g = tr.DiagonalPoly.single(5, 2.0, sp)
    assert tr.poisson_flow(g, 0.1).coefficient(5)[0] == pytest.approx(2.0 * math.exp(-0.5), rel=1e-15)
    assert np.array_equal(tr.poisson_flow(g, 0.0).coeffs, g.coeffs)
    h = g + tr.DiagonalPoly.single(-3, 1.0, sp)
    assert not np.any(tr.poisson_flow(h, math.inf).coeffs)
    with pytest.raises(DomainError):
        tr.poisson_flow(g, -1.0)


def test_flow_semigroup_is_exact():
    rng = np.random.default_rng(4)
    g = tr.DiagonalPoly.from_rows(rng.integers(-50, 50, 20), rng.normal(size=(20, 2)), Space(2))
    for s, t in [(0.1, 0.2), (0.0, 3.0), (1e-3, math.inf), (0.3, 0.7)]:
        a = tr.poisson_flow(tr.poisson_flow(g, s), t)
        b = tr.poisson_flow(g, s + t)
        assert np.array_equal(a.coeffs, b.coeffs)


def test_grid_values_match_direct_evaluation_and_parseval():
    rng = np.random.default_rng(8)
    g = tr.DiagonalPoly.from_rows(rng.integers(-40, 40, 15),
                                  rng.normal(size=(15, 3)) + 1j * rng.normal(size=(15, 3)), Space.lr(3, 2))
    G = 128
    vals = g.grid_values(G)
    assert np.allclose(vals, g.values_at(np.arange(G) / G), atol=1e-12)
    l2 = math.sqrt(np.mean(tr.cnorms(g.space, vals) ** 2))
    assert l2 == pytest.approx(math.sqrt(np.sum(tr.cnorms(g.space, g.coeffs) ** 2)), abs=1e-10)


def test_circle_vq_examples():
    sp = Space(1)
    assert tr.circle_poisson_vq(tr.DiagonalPoly.single(0, 3.0, sp), 2, 2, [0.0, 1.0, 2.0], 64) == 0.0
    g = tr.DiagonalPoly.single(1, 1.0, sp)
    times = np.linspace(0.0, 3.0, 301)
    assert tr.circle_poisson_vq(g, 2, 2, times, 32) == pytest.approx(1 - math.exp(-3.0), rel=1e-12)
    coarse = tr.circle_poisson_vq(g + tr.DiagonalPoly.single(-7, 0.5, sp), 2.5, 3, times[::10], 64)
    fine = tr.circle_poisson_vq(g + tr.DiagonalPoly.single(-7, 0.5, sp), 2.5, 3, times, 64)
    assert fine >= coarse * (1 - 1e-12)


def test_selection_m1():
    (b,) = tr.build_blocks(WalshMartingale([[[1.0]]], Space(1)), 7)
    cert = tr.select_sequences([b], 0.1)
    assert cert.n == (1,) and cert.l == (math.inf, 0.0) and cert.holds()
    assert tr.telescoping_error([b], cert) == [0.0]


def _toy_blocks():
    sp = Space(1)
    b1 = tr.MultiTrigPoly.from_terms({(1,): 0.5, (-1,): 0.5}, sp)
    b2 = tr.MultiTrigPoly.from_terms({(1, 1): 0.25, (-1, -1): 0.25, (1, -1): 0.25, (-1, 1): 0.25}, sp)
    return [b1, b2]


def test_two_toy_blocks():
    blocks = _toy_blocks()
    cert = tr.select_sequences(blocks, 0.1)
    assert cert.holds()
    check = tr.check_certificate(blocks, cert)
    assert check.holds(cert) and check.dominated_by(cert)
    cert = tr.select_sequences(blocks, 0.05)
    assert max(tr.telescoping_error(blocks, cert)) <= 0.15


def test_huge_eps_takes_minimal_choices():
    M = WalshMartingale([[[1.0]], [[1.0], [-1.0]]], Space(1))
    blocks = tr.build_blocks(M, 7)
    cert = tr.select_sequences(blocks, 10.0)
    assert blocks[1].partial_radius(cert.n) == 7
    assert cert.n == (1, 8) and cert.l[1] == 1.0
    assert cert.search_steps == ((0, 0),)
    # no theta_1 dependence: N = 0 and n_2 must still exceed n_1
    cert = tr.select_sequences(tr.build_blocks(witness_linfty(2), 7), 10.0)
    assert cert.n == (1, 2)


def test_certificates_dominate_grid_sups():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 4))
        space = [Space.lr(2, 1), Space.lr(2, 2), Space.lr(3, INF)][seed % 3]
        blocks = tr.build_blocks(random_martingale(seed, space, m), 5, lift_grid=16)
        eps = [0.1, 0.03][seed % 2]
        cert = tr.select_sequences(blocks, eps)
        assert cert.holds()
        check = tr.check_certificate(blocks, cert, grid=2 ** 10, samples=2, seed=seed)
        assert check.dominated_by(cert), seed
        assert check.holds(cert)


def test_telescoping_scales_linearly():
    blocks = tr.build_blocks(random_martingale(3, Space.lr(2, 2), 2), 7)
    cert = tr.select_sequences(blocks, 0.05)
    base = tr.telescoping_error(blocks, cert)
    scaled_blocks = [b.scaled(3.0) for b in blocks]
    cert3 = tr.select_sequences(scaled_blocks, 0.15)
    assert cert3.n == cert.n and cert3.l == cert.l
    assert np.allclose(tr.telescoping_error(scaled_blocks, cert3), 3.0 * np.array(base), rtol=1e-9, atol=1e-15)
    assert all(e <= 3 * 0.05 + 1e-9 for e in base)


def test_selection_validation():
    with pytest.raises(DomainError):
        tr.select_sequences(_toy_blocks(), 0.0)
    with pytest.raises(DomainError):
        tr.select_sequences(_toy_blocks()[::-1], 0.1)


def test_chain_zero_martingale():
    rep = tr.cotype_chain_report(random_martingale(0, Space(1), 2, amplitude=0.0), 2.0, 0.1, 7)
    for ln in rep.links:
        if ln.kind == "le":
            assert ln.holds and ln.lhs == 0.0


def test_chain_m1():
    rep = tr.cotype_chain_report(WalshMartingale([[[1.0]]], Space(1)), 2.0, 0.1, 31)
    e2e = rep.link("end-to-end")
    assert e2e.lhs == 1.0 and math.isfinite(e2e.rhs) and e2e.holds
    assert all(ln.holds for ln in rep.links)


def test_chain_m2_witness_fubini():
    rep = tr.cotype_chain_report(witness_linfty(2), 2.0, 0.1, 31)
    for name in ("fubini[1]", "fubini[2]", "fubini[total]"):
        ln = rep.link(name)
        assert ln.kind == "eq" and abs(ln.lhs - ln.rhs) <= 0.01 * ln.rhs
    assert all(ln.holds for ln in rep.links) and rep.max_gap <= 0.05
    assert rep.to_dict()["surrogate"] == tr.SURROGATE


def test_chain_limits():
    with pytest.raises(SizeError):
        tr.cotype_chain_report(random_martingale(0, Space(1), 4), 2.0, 0.1, 7)
    with pytest.raises(DomainError):
        tr.cotype_chain_report(witness_linfty(2), 1.5, 0.1, 7)


def test_complex_surrogate():
    sp = Space.lr(2, 1)
    z = np.array([[3 + 4j, 0.0]])
    assert tr.cnorms(sp, z)[0] == pytest.approx(5.0)
    assert tr.cnorms(Space.lr(2, 2), np.array([[1 + 1j, 1 - 1j]]))[0] == pytest.approx(2.0)
    assert isinstance(tr.walsh_expand([[1.0]], Space(1))[()], Point)
