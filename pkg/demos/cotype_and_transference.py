"""Martingale cotype in l^inf_n, then the transference chain for small m.

The coordinate martingale in l^inf_n has every partial sum of norm one,
yet n unit increments, so its cotype ratio grows like n.  The second
half lifts a martingale to trigonometric blocks on the torus, selects
lacunary frequencies and Poisson times, and evaluates every link of the
resulting inequality chain.

    python demos/cotype_and_transference.py
"""

from varq import Space, cotype_chain_report, cotype_ratio, random_martingale, witness_linfty


def main():
    print("cotype ratio of the l^inf witness")
    for n in (1, 2, 4, 8, 16):
        r = cotype_ratio(witness_linfty(n), 2.0)
        print(f"  n={n:2d} sum E|dM|^2 = {r.numerator:5.1f}  sup E|M_k|^2 = {r.denominator:.1f}  ratio {r.ratio:g}")
    r = cotype_ratio(random_martingale(0, Space.lr(16, 2), 8), 2.0)
    print(f"  random l^2_16 martingale, m=8: ratio {r.ratio:.12f}")

    for M, label in ((witness_linfty(2), "witness l^inf_2"),
                     (random_martingale(1, Space.lr(3, 2), 3), "random l^2_3, m=3")):
        rep = cotype_chain_report(M, q=2.0, eps=0.01, fejer_degree=31)
        cert = rep.certificate
        print(f"\n{label}: n={cert.n} l={cert.l}")
        print(f"  telescoping errors {[f'{e:.2e}' for e in rep.telescoping]} (bound {3 * rep.eps:g})")
        print(f"  lift errors {[f'{e:.3f}' for e in rep.lift_errors]}")
        for ln in rep.links:
            verdict = "ok " if ln.holds else "BAD"
            print(f"  {verdict} {ln.kind:5s} {ln.name:18s} {ln.lhs:12.6g} vs {ln.rhs:12.6g}  gap {ln.gap:.2%}")


if __name__ == "__main__":
    main()
