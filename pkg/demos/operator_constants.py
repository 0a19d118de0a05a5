"""Lower-bound estimates of variational constants for several families.

Each row is the best ratio ||V_q(T_t f)||_p / ||f||_p found by a small
seeded search; the numbers are lower bounds for the true constants.

    python demos/operator_constants.py
"""

from varq import harness
from varq.operators import AVERAGE, CONJUGATE_POISSON, POISSON, TRUNCATED_HILBERT, ScaleGrid


def main():
    base = harness.ExperimentConfig(
        grid=ScaleGrid.geometric(2.0 ** -4, 2.0 ** 4, 17),
        corpus=harness.CorpusSpec(count=4, seed=0),
        optimizer=harness.OptimizerSpec(restarts=2, iterations=20),
        spatial=harness.SpatialSpec(points_per_unit=32),
    )
    for family in (AVERAGE, POISSON, CONJUGATE_POISSON, TRUNCATED_HILBERT):
        for q in (2.0, 3.0, 6.0):
            row = harness.estimate_constant(base.replace(family=family, q=q))
            print(f"{family.label:18s} q={q:<3g} estimate {row.estimate:.4f} "
                  f"(Richardson gap {row.diagnostic['richardson_gap']:.1e})")

    rows = harness.sweep(base.replace(family=POISSON), "q", [2.0, 2.5, 3.0, 4.0])
    print("\nfixed f = 1_[0,1], Poisson:", [f"{v:.4f}" for _, v in harness.fixed_curve(rows)])


if __name__ == "__main__":
    main()
