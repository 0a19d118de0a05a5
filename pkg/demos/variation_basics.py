"""Walk through the q-variation engine on a few hand-sized paths.

    python demos/variation_basics.py
"""

import numpy as np

from varq import SamplePath, Space, vq_bruteforce, vq_dp, vq_stream_lower


def show(label, path, q):
    r = vq_dp(path, q)
    print(f"{label:28s} q={q:<4g} V_q={r.value:.6f} chain={r.chain} "
          f"adjacent lower bound={vq_stream_lower(path, q):.6f}")


def main():
    show("monotone 0,1,2,3", SamplePath.scalar([0, 1, 2, 3]), 2)
    show("alternating +-1", SamplePath.scalar([1, -1, 1, -1, 1]), 2)
    show("monotone at q = 1", SamplePath.scalar([0, 1, 2, 3]), 1)

    # a path in l^inf_3; the DP agrees with the 2^J enumeration
    rng = np.random.default_rng(0)
    p = SamplePath.from_values(rng.normal(size=(10, 3)), Space.lr(3, np.inf))
    for q in (1.0, 2.0, 4.0):
        a, b = vq_dp(p, q), vq_bruteforce(p, q)
        print(f"random l^inf_3 path           q={q:<4g} dp={a.value:.12f} brute={b.value:.12f}")

    # larger q looks at fewer, bigger jumps
    t = np.linspace(0, 6 * np.pi, 400)
    wave = SamplePath.scalar(np.sin(t) + 0.05 * np.sin(37 * t))
    for q in (1.0, 2.0, 3.0, 8.0):
        r = vq_dp(wave, q)
        print(f"noisy sine, q={q:<4g} V_q={r.value:8.4f} with {len(r.chain)} chain nodes")


if __name__ == "__main__":
    main()
