"""Transference of Walsh-Paley martingales to trigonometric polynomials.

Pipeline:

1. ``walsh_expand`` writes each predictable table phi_k as a Walsh
   polynomial in the signs eps_1..eps_{k-1}.
2. ``fejer_squarewave`` gives a zero-mean trigonometric approximant of
   sgn(cos 2 pi theta).
3. ``build_blocks`` replaces every sign by that approximant, producing
   f_k(theta_1..theta_k) = a_k(theta_1..theta_{k-1}) b_k(theta_k), stored as
   a sparse multivariate trigonometric polynomial.
4. For a frequency vector n, f_{k,(n)}(theta) = f_k(theta_1 + n_1 theta, ...,
   theta_k + n_k theta) is a one-variable polynomial in theta with
   frequencies nu = m_1 n_1 + ... + m_k n_k (``DiagonalPoly``); the circle
   Poisson semigroup damps frequency nu by exp(-|nu| t).
5. ``select_sequences`` picks n_k (doubling) and times l_k (halving) and
   certifies both selection conditions with absolute coefficient sums.
6. ``telescoping_error`` and ``cotype_chain_report`` evaluate the
   resulting inequality chain numerically.

Complex X-vectors are complex arrays; their modulus is the surrogate
sqrt(||re||^2 + ||im||^2), which dominates ||Re(c e^{i a})|| for every
phase a in every l^r, so coefficient sums are sound sup bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PrecisionError, ResolutionError, SizeError, SpaceMismatchError
from .martingale import WalshMartingale, partial_sums
from .spaces import Point, Space, as_values
from .variation import vq_values

MAX_BLOCKS = 4
MAX_CHAIN_M = 3
SEARCH_CAP = 200
FREQ_LIMIT = 2 ** 62
SURROGATE = "sqrt(|re|^2+|im|^2)"


def cnorms(space: Space, z) -> np.ndarray:
    """Surrogate norm hypot(||Re z||, ||Im z||) of complex vectors along the last axis.

    A norm on the realification; for z = w v with w complex and v real it
    equals |w| ||v||, so phase factors leave block coefficients unchanged.
    """
    z = np.asarray(z)
    if not np.iscomplexobj(z):
        return space.norms(z)
    return np.hypot(space.norms(z.real), space.norms(z.imag))


@dataclass(frozen=True)
class CPoint:
    """A complexified point (re, im)."""

    re: Point
    im: Point

    def __post_init__(self):
        if self.re.space != self.im.space:
            raise SpaceMismatchError("real and imaginary parts in different spaces")

    @classmethod
    def from_complex(cls, z, space: Space) -> "CPoint":
        z = np.asarray(z, dtype=complex)
        return cls(Point(z.real, space), Point(z.imag, space))

    @property
    def space(self) -> Space:
        return self.re.space

    def to_complex(self) -> np.ndarray:
        return self.re.coords + 1j * self.im.coords

    def modulus(self) -> float:
        return float(cnorms(self.space, self.to_complex()))


# ---------------------------------------------------------------------------
# Walsh expansion and square waves

def _subset_of_mask(mask: int, k1: int) -> tuple[int, ...]:
    # bit (k1 - i) of the mask stands for coordinate i (1-based)
    return tuple(i for i in range(1, k1 + 1) if (mask >> (k1 - i)) & 1)


def walsh_expand(table, space: Space) -> dict[tuple[int, ...], Point]:
    """Coefficients c_A with phi(s) = sum_A c_A prod_{i in A} s_i.

    ``table`` has 2^(k-1) rows ordered like the atoms of the (k-1)-cube.
    Keys are sorted tuples of 1-based coordinates; () is the mean.
    """
    arr = as_values(table, space)
    size = arr.shape[0]
    k1 = size.bit_length() - 1
    if 2 ** k1 != size:
        raise DomainError(f"table size {size} is not a power of two")
    coeffs = _hadamard(arr) / size
    return {_subset_of_mask(mask, k1): Point(coeffs[mask], space) for mask in range(size)}


def _hadamard(arr: np.ndarray) -> np.ndarray:
    """Unnormalised transform out[A] = sum_s arr[s] (-1)^{popcount(s & A)}."""
    out = np.array(arr, dtype=float)
    size = out.shape[0]
    h = 1
    while h < size:
        view = out.reshape(size // (2 * h), 2, h, -1)
        top, bot = view[:, 0].copy(), view[:, 1].copy()
        view[:, 0], view[:, 1] = top + bot, top - bot
        h *= 2
    return out


@dataclass(frozen=True, eq=False)
class FejerSquareWave:
    """Fejer mean of sgn(cos 2 pi theta), as exponential coefficients on -M..M."""

    degree: int
    coeffs: np.ndarray       # real, index j + degree
    lq_error: float
    q: float
    grid: int

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(-self.degree, self.degree + 1)

    def coefficient(self, j: int) -> float:
        return float(self.coeffs[j + self.degree]) if abs(j) <= self.degree else 0.0

    def support(self) -> np.ndarray:
        """Frequencies carrying a nonzero coefficient."""
        return self.freqs[self.coeffs != 0.0]

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        j = np.arange(1, self.degree + 1)
        c = self.coeffs[self.degree + 1:]
        return self.coeffs[self.degree] + 2.0 * np.cos(2 * np.pi * np.multiply.outer(theta, j)) @ c


def squarewave_coefficient(j: int) -> float:
    """Exponential Fourier coefficient of sgn(cos 2 pi theta)."""
    j = abs(j)
    if j % 2 == 0:
        return 0.0
    return (2.0 / math.pi) * (-1) ** ((j - 1) // 2) / j


def squarewave(theta) -> np.ndarray:
    return np.sign(np.cos(2 * np.pi * np.asarray(theta, dtype=float)))


def fejer_squarewave(M: int, q: float = 2.0, grid: int = 2 ** 14) -> FejerSquareWave:
    """Fejer (Cesaro) mean of order M of the square wave, with its L^q error.

    The error is measured on a midpoint grid of ``grid`` points, which
    never lands on a zero of cos 2 pi theta when ``grid`` is even.
    """
    if M < 1:
        raise DomainError(f"Fejer degree must be >= 1, got {M}")
    j = np.arange(-M, M + 1)
    coeffs = np.array([squarewave_coefficient(int(i)) for i in j]) * (1.0 - np.abs(j) / (M + 1))
    w = FejerSquareWave(M, coeffs, 0.0, q, grid)
    theta = (np.arange(grid) + 0.5) / grid
    err = float(np.mean(np.abs(w(theta) - squarewave(theta)) ** q) ** (1.0 / q))
    return FejerSquareWave(M, coeffs, err, q, grid)


# ---------------------------------------------------------------------------
# multivariate blocks

@dataclass(frozen=True, eq=False)
class MultiTrigPoly:
    """Sparse trig polynomial in theta_1..theta_k with X-valued coefficients.

    Row r carries the multi-index ``freqs[r] = (m_1, ..., m_{k-1}, j)``
    and the complex coefficient ``coeffs[r]``; every j is nonzero.
    """

    k: int
    freqs: np.ndarray
    coeffs: np.ndarray
    space: Space
    lift_error: float | None = None
    structure: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        fr = np.asarray(self.freqs, dtype=np.int64).reshape(-1, self.k)
        co = np.asarray(self.coeffs, dtype=complex).reshape(fr.shape[0], self.space.dim)
        if fr.shape[0] and np.any(fr[:, -1] == 0):
            raise DomainError("block frequencies in the last variable must be nonzero")
        object.__setattr__(self, "freqs", fr)
        object.__setattr__(self, "coeffs", co)

    @classmethod
    def from_terms(cls, terms: dict, space: Space) -> "MultiTrigPoly":
        """Build from {multi-index tuple: coefficient vector}."""
        keys = list(terms)
        if not keys:
            raise DomainError("empty block; use a zero coefficient instead")
        k = len(keys[0])
        fr = np.array(keys, dtype=np.int64).reshape(-1, k)
        co = np.array([np.broadcast_to(np.asarray(terms[key], dtype=complex), (space.dim,)) for key in keys])
        return cls(k, fr, co, space)

    @property
    def nnz(self) -> int:
        return self.freqs.shape[0]

    @property
    def bounds(self) -> tuple[int, ...]:
        """(N_1, ..., N_{k-1}, M_k)."""
        if self.nnz == 0:
            return (0,) * self.k
        return tuple(int(b) for b in np.abs(self.freqs).max(axis=0))

    def coefficient_norms(self) -> np.ndarray:
        return cnorms(self.space, self.coeffs)

    def coefficient_sum(self) -> float:
        return float(self.coefficient_norms().sum())

    def partial_radius(self, n) -> int:
        """max over rows of |m_1 n_1 + ... + m_{k-1} n_{k-1}|."""
        if self.k == 1 or self.nnz == 0:
            return 0
        part = self.freqs[:, :-1] @ np.asarray(n[: self.k - 1], dtype=np.int64)
        return int(np.abs(part).max())

    def frequencies(self, n) -> np.ndarray:
        """nu = m . n for every row."""
        n = [int(v) for v in n[: self.k]]
        bound = sum(b * v for b, v in zip(self.bounds, n))
        if bound >= FREQ_LIMIT:
            raise PrecisionError(f"block {self.k} frequencies exceed int64 range", condition="frequency overflow")
        return self.freqs @ np.asarray(n, dtype=np.int64)

    def scaled(self, lam: float) -> "MultiTrigPoly":
        return MultiTrigPoly(self.k, self.freqs, lam * self.coeffs, self.space,
                             None if self.lift_error is None else abs(lam) * self.lift_error)

    def diagonal(self, n, theta_vec=None) -> "DiagonalPoly":
        """f_{k,(n)} as a polynomial in theta, phases of fixed theta_1..theta_k absorbed."""
        nu = self.frequencies(n)
        co = self.coeffs
        if theta_vec is not None:
            th = np.asarray(theta_vec, dtype=float)[: self.k]
            co = co * np.exp(2j * np.pi * (self.freqs @ th))[:, None]
        return DiagonalPoly.from_rows(nu, co, self.space)

    def torus_values(self, G: int, t: float = 0.0, n=None) -> np.ndarray:
        """Values of P_t f_{k,(n)} as a function of phi = theta_vec + n theta.

        Returned on the uniform grid phi_i = g_i / G, shape (G,)*k + (n_dim,).
        Exact point values: the grid folds frequencies modulo G.
        """
        co = self.coeffs
        if t != 0.0:
            nu = self.frequencies(n)
            co = co * _damping(nu, t)[:, None]
        arr = np.zeros((G,) * self.k + (self.space.dim,), dtype=complex)
        idx = tuple((self.freqs % G).T)
        np.add.at(arr, idx, co)
        axes = tuple(range(self.k))
        return np.fft.ifftn(arr, axes=axes) * G ** self.k


def _damping(nu: np.ndarray, t: float) -> np.ndarray:
    nu = np.abs(np.asarray(nu, dtype=float))
    if t == math.inf:
        return (nu == 0).astype(float)
    return np.exp(-nu * t)


def build_blocks(M: WalshMartingale, fejer_degree: int, q: float = 2.0,
                 lift_grid: int | None = None) -> list[MultiTrigPoly]:
    """Trigonometric blocks f_k = a_k b_k approximating the increments dM_k.

    Each sign eps_i in the Walsh expansion of phi_k, and the sign eps_k
    itself, is replaced by the Fejer square-wave approximant of degree
    ``fejer_degree``.  The L^q distance between f_k and the sign lift of
    dM_k on a midpoint tensor grid is stored as ``lift_error``.
    """
    if M.m > MAX_BLOCKS:
        raise SizeError(f"block assembly limited to m <= {MAX_BLOCKS}, got {M.m}")
    wave = fejer_squarewave(fejer_degree, q)
    odd = wave.support()
    ycoef = np.array([wave.coefficient(int(j)) for j in odd])
    blocks = []
    for k, table in enumerate(M.phi, start=1):
        walsh = walsh_expand(table, M.space)
        rows, vals = [], []
        for A, cA in walsh.items():
            if not np.any(cA.coords):
                continue
            # frequency choices: odd for coordinates in A, 0 elsewhere; j odd
            axes = [odd if i in A else np.array([0]) for i in range(1, k)] + [odd]
            weights = [ycoef if i in A else np.array([1.0]) for i in range(1, k)] + [ycoef]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
            w = weights[0]
            for extra in weights[1:]:
                w = np.multiply.outer(w, extra)
            rows.append(grid)
            vals.append(np.multiply.outer(w.reshape(-1), cA.coords))
        if rows:
            fr = np.concatenate(rows)
            co = np.concatenate(vals)
        else:
            fr = np.zeros((0, k), dtype=np.int64)
            co = np.zeros((0, M.space.dim))
        block = MultiTrigPoly(k, fr, co, M.space, structure=(walsh, wave))
        err = lift_distance(block, q, lift_grid)
        blocks.append(MultiTrigPoly(k, fr, co, M.space, err, (walsh, wave)))
    return blocks


def _default_lift_grid(k: int) -> int:
    return {1: 4096, 2: 256, 3: 64}.get(k, 24)


def lift_distance(block: MultiTrigPoly, q: float = 2.0, G: int | None = None) -> float:
    """|| f_k - phi_k(sgn cos .) sgn cos . ||_{L^q} on a midpoint tensor grid."""
    walsh, wave = block.structure
    k = block.k
    G = G or _default_lift_grid(k)
    theta = (np.arange(G) + 0.5) / G
    approx_1d, sign_1d = wave(theta), squarewave(theta)
    n = block.space.dim
    shape = (G,) * k + (n,)
    diff = np.zeros(shape)
    for A, cA in walsh.items():
        if not np.any(cA.coords):
            continue
        fa = np.ones(())
        fs = np.ones(())
        for i in range(1, k):
            fa = np.multiply.outer(fa, approx_1d if i in A else np.ones(G))
            fs = np.multiply.outer(fs, sign_1d if i in A else np.ones(G))
        fa = np.multiply.outer(fa, approx_1d)
        fs = np.multiply.outer(fs, sign_1d)
        diff += np.multiply.outer(fa - fs, cA.coords)
    return float(np.mean(block.space.norms(diff) ** q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# one-variable polynomials and the Poisson semigroup

@dataclass(frozen=True, eq=False)
class DiagonalPoly:
    """Trig polynomial sum_nu c_nu e^{2 pi i nu theta} flowed to Poisson time ``time``.

    Coefficients are stored at time 0; the flowed coefficients are
    c_nu exp(-|nu| time).  Keeping the time symbolic makes the semigroup
    law exact: flowing by s and then t lands on the same time s + t.
    """

    freqs: np.ndarray
    base: np.ndarray
    space: Space
    time: float = 0.0

    @classmethod
    def from_rows(cls, nu, coeffs, space: Space) -> "DiagonalPoly":
        nu = np.asarray(nu, dtype=np.int64).reshape(-1)
        co = np.asarray(coeffs, dtype=complex).reshape(nu.size, space.dim)
        uniq, inv = np.unique(nu, return_inverse=True)
        merged = np.zeros((uniq.size, space.dim), dtype=complex)
        np.add.at(merged, inv.reshape(-1), co)
        return cls(uniq, merged, space)

    @classmethod
    def single(cls, nu: int, coeff, space: Space) -> "DiagonalPoly":
        return cls.from_rows([nu], [np.broadcast_to(np.asarray(coeff, dtype=complex), (space.dim,))], space)

    @property
    def coeffs(self) -> np.ndarray:
        if self.time == 0.0:
            return self.base
        return self.base * _damping(self.freqs, self.time)[:, None]

    def coefficient(self, nu: int) -> np.ndarray:
        hit = np.flatnonzero(self.freqs == nu)
        if hit.size == 0:
            return np.zeros(self.space.dim, dtype=complex)
        return self.coeffs[hit[0]]

    def coefficient_sum(self) -> float:
        return float(cnorms(self.space, self.coeffs).sum())

    def __add__(self, other: "DiagonalPoly") -> "DiagonalPoly":
        if self.space != other.space:
            raise SpaceMismatchError("polynomials in different spaces")
        return DiagonalPoly.from_rows(np.concatenate([self.freqs, other.freqs]),
                                      np.concatenate([self.coeffs, other.coeffs]), self.space)

    def scaled(self, lam) -> "DiagonalPoly":
        return DiagonalPoly(self.freqs, lam * self.base, self.space, self.time)

    def grid_values(self, G: int) -> np.ndarray:
        """Exact values at theta_g = g / G, g = 0..G-1; shape (G, n)."""
        co = self.coeffs
        idx = self.freqs % G
        out = np.zeros((G, self.space.dim), dtype=complex)
        np.add.at(out, idx, co)
        return np.fft.ifft(out, axis=0) * G

    def values_at(self, theta) -> np.ndarray:
        """Direct evaluation at arbitrary theta (moderate frequencies only)."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        ph = np.exp(2j * np.pi * np.multiply.outer(theta, self.freqs.astype(float)))
        return ph @ self.coeffs


def poisson_flow(g: DiagonalPoly, t: float) -> DiagonalPoly:
    """P_t g: damp frequency nu by exp(-|nu| t); t = inf keeps only nu = 0."""
    t = float(t)
    if not t >= 0:
        raise DomainError(f"Poisson time must be >= 0, got {t!r}")
    return DiagonalPoly(g.freqs, g.base, g.space, g.time + t)


def circle_poisson_vq(g: DiagonalPoly, q: float, p: float, times, thetas) -> float:
    """Discrete || V_q(P_t g(theta) : t in times) ||_{L^p(theta)}.

    ``times`` is an increasing list in [0, inf]; ``thetas`` is either an
    int G (the grid g / G) or an explicit array of points.
    """
    times = [float(t) for t in times]
    if not times or any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise DomainError("times must be nonempty and strictly increasing")
    if isinstance(thetas, (int, np.integer)):
        values = [poisson_flow(g, t).grid_values(int(thetas)) for t in times]
    else:
        values = [poisson_flow(g, t).values_at(thetas) for t in times]
    path = np.stack(values, axis=1)
    v = vq_values(path, q, lambda z: cnorms(g.space, z))
    return float(np.mean(v ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# selection of frequencies and times

@dataclass(frozen=True)
class SelectionCertificate:
    """Frequencies n_1 < ... < n_m and times l_0 = inf > l_1 > ... > l_m = 0.

    ``decay_bounds[k-1]`` certifies sup_{t >= l_{k-1}} ||P_t f_{k,(n)}||
    through sum_nu |c_nu| exp(-l_{k-1} |nu|), to be compared with
    eps / 2^k.  ``stability_bounds[k-1]`` certifies
    sup_{0 <= t <= l_k} sum_{j <= k} ||P_{l_k} f_j - P_t f_j|| through
    sum_j sum_nu |c_nu| (1 - exp(-l_k |nu|)), to be compared with eps.
    """

    eps: float
    n: tuple[int, ...]
    l: tuple[float, ...]
    decay_bounds: tuple[float, ...]
    stability_bounds: tuple[float, ...]
    search_steps: tuple[tuple[int, int], ...]
    surrogate: str = SURROGATE

    @property
    def m(self) -> int:
        return len(self.n)

    def decay_threshold(self, k: int) -> float:
        return self.eps / 2 ** k

    def holds(self) -> bool:
        return (all(b < self.decay_threshold(k) for k, b in enumerate(self.decay_bounds, start=1))
                and all(b < self.eps for b in self.stability_bounds))

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "n": list(self.n),
            "l": [("inf" if math.isinf(v) else v) for v in self.l],
            "decay_bounds": list(self.decay_bounds),
            "decay_thresholds": [self.decay_threshold(k) for k in range(1, self.m + 1)],
            "stability_bounds": list(self.stability_bounds),
            "search_steps": [list(s) for s in self.search_steps],
            "surrogate": self.surrogate,
        }


def _decay_bound(block: MultiTrigPoly, n, t: float) -> float:
    nu = block.frequencies(n)
    return float((block.coefficient_norms() * _damping(nu, t)).sum())


def _stability_bound(blocks, n, t: float) -> float:
    total = 0.0
    for b in blocks:
        nu = np.abs(b.frequencies(n).astype(float))
        total += float((b.coefficient_norms() * -np.expm1(-nu * t)).sum())
    return total


def select_sequences(blocks: list[MultiTrigPoly], eps: float) -> SelectionCertificate:
    """Choose n_k and l_k so that both selection conditions hold, with certificates.

    n_1 = 1 and l_0 = inf.  For k = 1..m-1, l_k halves down from l_{k-1}/2
    (from 1 when l_{k-1} = inf) until the stability bound drops below eps;
    n_{k+1} doubles up from max(N, n_k) + 1, N the radius of the partial
    frequencies of block k+1, until the decay bound at time l_k drops below
    eps / 2^(k+1).  Finally l_m = 0.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    m = len(blocks)
    if m == 0:
        raise DomainError("no blocks")
    for k, b in enumerate(blocks, start=1):
        if b.k != k:
            raise DomainError(f"block {k} has {b.k} variables")
    n = [1]
    l = [math.inf]
    decay = [_decay_bound(blocks[0], n, math.inf)]
    stability = []
    steps = []
    for k in range(1, m + 1):
        if k < m:
            t = 1.0 if l[-1] == math.inf else l[-1] / 2
            halvings = 0
            while True:
                bound = _stability_bound(blocks[:k], n, t)
                if bound < eps:
                    break
                halvings += 1
                t /= 2
                if halvings > SEARCH_CAP or t < np.finfo(float).tiny:
                    raise PrecisionError(
                        f"stability condition at k = {k} needs l_k below floating point range (eps = {eps})",
                        condition=f"stability k={k}",
                    )
            l.append(t)
            stability.append(bound)

            nxt = blocks[k]
            cand = max(nxt.partial_radius(n), n[-1]) + 1
            doublings = 0
            while True:
                bound = _decay_bound(nxt, n + [cand], t)
                if bound < eps / 2 ** (k + 1):
                    break
                doublings += 1
                cand *= 2
                if doublings > SEARCH_CAP:
                    raise PrecisionError(f"decay condition at k = {k + 1} not reached",
                                         condition=f"decay k={k + 1}")
            n.append(cand)
            decay.append(bound)
            steps.append((halvings, doublings))
        else:
            l.append(0.0)
            stability.append(_stability_bound(blocks, n, 0.0))
    return SelectionCertificate(float(eps), tuple(int(v) for v in n), tuple(l), tuple(decay),
                                tuple(stability), tuple(steps))


def _theta_samples(m: int, count: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.vstack([np.zeros(m), rng.uniform(0.0, 1.0, size=(max(count - 1, 0), m))])


@dataclass(frozen=True)
class GridCheck:
    """Grid sups that confirm a certificate: one entry per k."""

    decay_sup: tuple[float, ...]
    stability_sup: tuple[float, ...]
    grid: int
    samples: int

    def holds(self, cert: SelectionCertificate) -> bool:
        return (all(s < cert.decay_threshold(k) for k, s in enumerate(self.decay_sup, start=1))
                and all(s < cert.eps for s in self.stability_sup))

    def dominated_by(self, cert: SelectionCertificate, slack: float = 1e-12) -> bool:
        return (all(s <= b + slack for s, b in zip(self.decay_sup, cert.decay_bounds))
                and all(s <= b + slack for s, b in zip(self.stability_sup, cert.stability_bounds)))


def check_certificate(blocks, cert: SelectionCertificate, grid: int = 2 ** 12, samples: int = 4,
                      seed=0, time_factors=(1.0, 1.5, 4.0, 32.0)) -> GridCheck:
    """Measure both selection conditions on a theta grid.

    theta_1..theta_m are drawn from ``samples`` seeded points (the first
    is the origin).  The decay condition is probed at t = c l_{k-1} for c in
    ``time_factors``; the stability condition at five times in [0, l_k].
    """
    m = len(blocks)
    thetas = _theta_samples(m, samples, seed)
    decay = [0.0] * m
    stab = [0.0] * m
    space = blocks[0].space
    for tv in thetas:
        diags = [b.diagonal(cert.n, tv) for b in blocks]
        for k in range(1, m + 1):
            lk1 = cert.l[k - 1]
            ts = [math.inf] if math.isinf(lk1) else [c * lk1 for c in time_factors]
            for t in ts:
                v = cnorms(space, poisson_flow(diags[k - 1], t).grid_values(grid)).max()
                decay[k - 1] = max(decay[k - 1], float(v))
            lk = cert.l[k]
            ref = [poisson_flow(d, lk).grid_values(grid) for d in diags[:k]]
            for t in (0.0, 0.25 * lk, 0.5 * lk, 0.75 * lk, lk):
                s = sum(cnorms(space, r - poisson_flow(d, t).grid_values(grid)) for r, d in zip(ref, diags[:k]))
                stab[k - 1] = max(stab[k - 1], float(np.max(s)))
    return GridCheck(tuple(decay), tuple(stab), grid, len(thetas))


def telescoping_error(blocks, cert: SelectionCertificate, grid: int = 2 ** 12, samples: int = 4,
                      seed=0) -> list[float]:
    """sup over theta of || sum_k (P_{l_i} - P_{l_{i-1}}) f_{k,(n)} - f_{i,(n)} ||, i = 1..m."""
    m = len(blocks)
    space = blocks[0].space
    errs = [0.0] * m
    for tv in _theta_samples(m, samples, seed):
        diags = [b.diagonal(cert.n, tv) for b in blocks]
        at = {}
        for t in set(cert.l):
            at[t] = sum(poisson_flow(d, t).grid_values(grid) for d in diags)
        for i in range(1, m + 1):
            fi = diags[i - 1].grid_values(grid)
            resid = at[cert.l[i]] - at[cert.l[i - 1]] - fi
            errs[i - 1] = max(errs[i - 1], float(cnorms(space, resid).max()))
    return errs


# ---------------------------------------------------------------------------
# the integrated inequality chain

@dataclass(frozen=True)
class ChainLink:
    """One step of the chain.

    ``kind`` is "le" (lhs <= rhs must hold), "eq" (two quadratures of one
    integral, must agree to ``tol``) or "ratio" (reported, no verdict).
    ``gap`` is the Richardson gap: the larger movement of either side
    between the two resolutions, relative to the larger side.
    """

    name: str
    lhs: float
    rhs: float
    gap: float = 0.0
    kind: str = "le"
    tol: float = 0.05

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs

    @property
    def holds(self) -> bool:
        if self.kind == "ratio":
            return True
        if self.kind == "eq":
            return abs(self.lhs - self.rhs) <= self.tol * max(abs(self.lhs), abs(self.rhs))
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-15

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "lhs": self.lhs, "rhs": self.rhs,
                "ratio": self.ratio, "holds": self.holds, "richardson_gap": self.gap}


@dataclass(frozen=True)
class ChainReport:
    q: float
    eps: float
    fejer_degree: int
    resolution: tuple[int, int]
    certificate: SelectionCertificate
    telescoping: tuple[float, ...]
    lift_errors: tuple[float, ...]
    links: tuple[ChainLink, ...]
    integrals: dict
    surrogate: str = SURROGATE

    def link(self, name: str) -> ChainLink:
        for ln in self.links:
            if ln.name == name:
                return ln
        raise KeyError(name)

    @property
    def max_gap(self) -> float:
        return max((ln.gap for ln in self.links), default=0.0)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "eps": self.eps,
            "fejer_degree": self.fejer_degree,
            "resolution": list(self.resolution),
            "certificate": self.certificate.to_dict(),
            "telescoping": list(self.telescoping),
            "lift_errors": list(self.lift_errors),
            "links": [ln.to_dict() for ln in self.links],
            "integrals": self.integrals,
            "surrogate": self.surrogate,
        }


def _chain_integrals(blocks, cert: SelectionCertificate, q: float, G: int, shift_grid: int = 7) -> dict:
    """All torus integrals of the chain on a G^m grid.

    After the change of variables phi_i = theta_i + n_i theta every
    integrand over [0,1]^m x [0,1] becomes a function of phi alone; the
    Fubini entries recompute the same integrals directly in (theta_vec,
    theta) at ``shift_grid`` midpoint values of theta.
    """
    m = len(blocks)
    space = blocks[0].space

    def lift(arr, k):
        return arr.reshape(arr.shape[:k] + (1,) * (m - k) + arr.shape[-1:])

    def at_time(t):
        total = 0
        for b in blocks:
            total = total + lift(b.torus_values(G, t, cert.n), b.k)
        return np.broadcast_to(total, (G,) * m + (space.dim,))

    def mean_pow(z):
        return float(np.mean(cnorms(space, z) ** q))

    levels = {t: at_time(t) for t in set(cert.l)}
    f = [lift(b.torus_values(G, 0.0, cert.n), b.k) for b in blocks]
    F, D, T = [], [], []
    for i in range(1, m + 1):
        d = levels[cert.l[i]] - levels[cert.l[i - 1]]
        D.append(mean_pow(d))
        T.append(mean_pow(d - f[i - 1]))
        F.append(mean_pow(np.broadcast_to(f[i - 1], d.shape)))
    total = mean_pow(levels[0.0])
    # time path l_m = 0 < ... < l_0 = inf at every grid point
    path = np.stack([levels[t].reshape(-1, space.dim) for t in reversed(cert.l)], axis=1)
    vq = float(np.mean(vq_values(path, q, lambda z: cnorms(space, z)) ** q))

    # direct (theta_vec, theta) quadrature: phase shift e^{2 pi i nu theta_h}
    fub_F = [0.0] * m
    fub_total = 0.0
    for h in range(shift_grid):
        acc = 0
        for i, b in enumerate(blocks):
            nu = b.frequencies(cert.n)
            # theta_h = (2h + 1) / (2 shift_grid); reduce nu (2h+1) exactly
            ph = np.exp(2j * np.pi * (((nu % (2 * shift_grid)) * (2 * h + 1)) % (2 * shift_grid)) / (2 * shift_grid))
            shifted = MultiTrigPoly(b.k, b.freqs, b.coeffs * ph[:, None], space)
            vals = lift(shifted.torus_values(G), b.k)
            fub_F[i] += mean_pow(np.broadcast_to(vals, (G,) * m + (space.dim,))) / shift_grid
            acc = acc + vals
        fub_total += mean_pow(np.broadcast_to(acc, (G,) * m + (space.dim,))) / shift_grid
    return {"F": F, "D": D, "T": T, "total": total, "vq": vq, "fubini_F": fub_F, "fubini_total": fub_total}


def _links(x: dict, incs, top: float, lift: tuple, q: float, eps: float) -> list[tuple]:
    """(name, lhs, rhs, kind, ref) for every link, from one set of integrals.

    ``ref`` names the integral whose resolution movement gauges the link
    when the sides themselves are differences of nearly equal numbers.
    """
    m = len(x["F"])
    cq = 2.0 ** (q - 1)
    tel = (3 * eps) ** q
    out = []
    for i in range(m):
        out.append((f"split[{i + 1}]", x["F"][i], cq * (x["D"][i] + x["T"][i]), "le", None))
        out.append((f"telescoping[{i + 1}]", x["T"][i], tel, "le", None))
    out.append(("control", sum(x["F"]), cq * (sum(x["D"]) + m * tel), "le", None))
    out.append(("chain<=variation", sum(x["D"]), x["vq"], "le", None))
    out.append(("variation/total", x["vq"], x["total"], "ratio", None))
    for i in range(m):
        out.append((f"fubini[{i + 1}]", x["F"][i], x["fubini_F"][i], "eq", None))
    out.append(("fubini[total]", x["total"], x["fubini_total"], "eq", None))
    # the torus integrals see the increments through the Fejer lift; by
    # Minkowski each L^q norm moves by at most the lift error
    r = 1.0 / q
    for i in range(m):
        out.append((f"lift[{i + 1}]", abs(incs[i] ** r - x["F"][i] ** r), lift[i], "le", x["F"][i]))
    out.append(("lift[total]", abs(top ** r - x["total"] ** r), sum(lift), "le", x["total"]))
    K = x["vq"] / x["total"] if x["total"] > 0 else 0.0
    tot = (top ** r + sum(lift)) ** q
    lift_q = sum(e ** q for e in lift) ** r
    bound = ((cq * (K * tot + m * tel)) ** r + lift_q) ** q
    out.append(("end-to-end", float(sum(incs)), bound, "le", None))
    return out


def cotype_chain_report(M: WalshMartingale, q: float, eps: float, fejer_degree: int,
                        resolution: int | None = None, gate: float = 0.05,
                        check_samples: int = 4, seed=0) -> ChainReport:
    """Run the full transference pipeline on M and evaluate every inequality link.

    Integrals are Riemann sums on G^m tensor grids, computed at G/2 and G;
    if either side of any link moves by more than ``gate`` times the
    larger side, :class:`ResolutionError` is raised.  Measuring against the
    link's own scale keeps tiny remainders, which are far below their
    bounds, from tripping the gate.
    """
    if M.m > MAX_CHAIN_M:
        raise SizeError(f"chain report limited to m <= {MAX_CHAIN_M}, got {M.m}")
    if not q >= 2:
        raise DomainError(f"q must be >= 2, got {q!r}")
    G = resolution or {1: 256, 2: 128, 3: 64}[M.m]
    blocks = build_blocks(M, fejer_degree, q)
    cert = select_sequences(blocks, eps)
    tele = telescoping_error(blocks, cert, samples=check_samples, seed=seed)
    fine = _chain_integrals(blocks, cert, q, G)
    coarse = _chain_integrals(blocks, cert, q, G // 2)

    incs = [d.expect_norm_pow(q) for d in M.increments()]
    top = partial_sums(M)[-1].expect_norm_pow(q)
    lift = tuple(b.lift_error for b in blocks)
    links = []
    for (name, lhs, rhs, kind, ref), (_, lc, rc, _, refc) in zip(_links(fine, incs, top, lift, q, eps),
                                                                  _links(coarse, incs, top, lift, q, eps)):
        if ref is not None:
            gap = abs(ref - refc) / abs(ref) if ref else 0.0
        else:
            scale = max(abs(lhs), abs(rhs))
            gap = max(abs(lhs - lc), abs(rhs - rc)) / scale if scale > 0 else 0.0
        links.append(ChainLink(name, float(lhs), float(rhs), gap, kind, gate))

    bad = [ln for ln in links if not math.isfinite(ln.lhs) or not math.isfinite(ln.rhs) or ln.gap > gate]
    if bad:
        worst = max(bad, key=lambda ln: ln.gap)
        raise ResolutionError(
            f"link {worst.name} moves by {worst.gap:.3%} between resolutions {G // 2} and {G}",
            coarse=coarse, fine=fine,
        )
    const = fine["vq"] / fine["total"] if fine["total"] > 0 else 0.0
    integrals = {
        "sum_E_dM_q": float(sum(incs)),
        "E_M_m_q": top,
        "F": fine["F"], "D": fine["D"], "T": fine["T"],
        "total": fine["total"], "vq": fine["vq"],
        "fubini_F": fine["fubini_F"], "fubini_total": fine["fubini_total"],
        "poisson_constant_estimate": const,
    }
    return ChainReport(float(q), float(eps), int(fejer_degree), (G // 2, G), cert, tuple(tele),
                       lift, tuple(links), integrals)
