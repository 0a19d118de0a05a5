"""Finite Walsh-Paley martingales on the dyadic cube {-1, 1}^m.

Atoms are indexed 0 .. 2^m - 1 with eps_1 as the most significant sign
and ``+`` before ``-``: bit (m - k) of the atom index is 1 exactly when
eps_k = -1.  Expectations are exact finite averages over atoms.

Conditional expectations are computed by repeated pairwise averaging over
the last coordinate, so E_j(E_k g) and E_{min(j,k)} g perform the same
floating point operations and the tower property holds bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError, SizeError, SpaceMismatchError
from .spaces import INF, Space, as_values
from .variation import vq_values

MAX_M = 20


def signs(m: int) -> np.ndarray:
    """Array of shape (2^m, m) with entry [a, k-1] = eps_k(atom a)."""
    idx = np.arange(2 ** m)[:, None]
    shift = m - 1 - np.arange(m)[None, :]
    return 1 - 2 * ((idx >> shift) & 1)


@dataclass(frozen=True, eq=False)
class DyadicFunction:
    """X-valued function on {-1, 1}^m stored as a (2^m, n) array."""

    m: int
    values: np.ndarray
    space: Space

    def __init__(self, m: int, values, space: Space):
        if not 0 <= m <= MAX_M:
            raise SizeError(f"m must lie in [0, {MAX_M}], got {m}")
        vals = as_values(values, space)
        if vals.shape[0] != 2 ** m:
            raise DomainError(f"expected 2^{m} = {2 ** m} atoms, got {vals.shape[0]}")
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "space", space)

    def mean(self) -> np.ndarray:
        return conditional_expectation(self, 0).values[0]

    def expect_norm_pow(self, q: float) -> float:
        """E ||g||^q."""
        return float(np.mean(self.space.norms(self.values) ** q))

    def __sub__(self, other: "DyadicFunction") -> "DyadicFunction":
        _same(self, other)
        return DyadicFunction(self.m, self.values - other.values, self.space)

    def __add__(self, other: "DyadicFunction") -> "DyadicFunction":
        _same(self, other)
        return DyadicFunction(self.m, self.values + other.values, self.space)

    def equals(self, other: "DyadicFunction") -> bool:
        return self.m == other.m and self.space == other.space and np.array_equal(self.values, other.values)


def _same(a: DyadicFunction, b: DyadicFunction):
    if a.m != b.m or a.space != b.space:
        raise SpaceMismatchError("dyadic functions live on different cubes or spaces")


def conditional_expectation(g: DyadicFunction, k: int) -> DyadicFunction:
    """E_k g: average out eps_{k+1}, ..., eps_m."""
    m = g.m
    if not 0 <= k <= m:
        raise DomainError(f"k must lie in [0, {m}], got {k}")
    v = g.values
    n = g.space.dim
    for level in range(m, k, -1):
        # atoms 2i and 2i+1 differ only in eps_level
        pairs = v.reshape(2 ** (level - 1), 2, n)
        v = 0.5 * (pairs[:, 0] + pairs[:, 1])
    out = np.repeat(v, 2 ** (m - k), axis=0)
    return DyadicFunction(m, out, g.space)


def filtration_path(g: DyadicFunction) -> np.ndarray:
    """Array (2^m, m+1, n) holding E_0 g, ..., E_m g at every atom."""
    return np.stack([conditional_expectation(g, k).values for k in range(g.m + 1)], axis=1)


@dataclass(frozen=True, eq=False)
class WalshMartingale:
    """Predictable tables phi_k : {-1,1}^{k-1} -> X, k = 1..m.

    ``phi[k-1]`` has shape (2^{k-1}, n) ordered like the atoms of the
    (k-1)-cube.  Increments are dM_k = phi_k(eps_1..eps_{k-1}) * eps_k.
    """

    m: int
    phi: tuple
    space: Space

    def __init__(self, phi, space: Space):
        tables = []
        for k, table in enumerate(phi, start=1):
            arr = as_values(table, space)
            if arr.shape[0] != 2 ** (k - 1):
                raise DomainError(f"table {k} needs 2^{k - 1} entries, got {arr.shape[0]}")
            tables.append(arr)
        m = len(tables)
        if not 1 <= m <= MAX_M:
            raise SizeError(f"m must lie in [1, {MAX_M}], got {m}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "phi", tuple(tables))
        object.__setattr__(self, "space", space)

    def increments(self) -> list[DyadicFunction]:
        """dM_1, ..., dM_m as functions on the full m-cube."""
        m, n = self.m, self.space.dim
        eps = signs(m)
        out = []
        for k, table in enumerate(self.phi, start=1):
            # phi_k depends on the first k-1 signs: repeat over the rest
            lifted = np.repeat(table, 2 ** (m - k + 1), axis=0)
            out.append(DyadicFunction(m, lifted * eps[:, k - 1:k], self.space))
        return out

    def scaled(self, lam: float) -> "WalshMartingale":
        return WalshMartingale([lam * t for t in self.phi], self.space)

    def to_dict(self) -> dict:
        return {"m": self.m, "space": self.space.to_dict(), "phi": [t.tolist() for t in self.phi]}

    @classmethod
    def from_dict(cls, d: dict) -> "WalshMartingale":
        space = Space.from_dict(d["space"])
        mart = cls(d["phi"], space)
        if "m" in d and int(d["m"]) != mart.m:
            raise DomainError(f"declared m = {d['m']} but {mart.m} tables given")
        return mart


def partial_sums(M: WalshMartingale, check: bool = True) -> list[DyadicFunction]:
    """M_0 = 0, M_1, ..., M_m with M_k = sum_{j <= k} dM_j.

    With ``check`` set, each M_k is compared against E_k M_m.
    """
    incs = M.increments()
    acc = np.zeros((2 ** M.m, M.space.dim))
    out = [DyadicFunction(M.m, acc, M.space)]
    for d in incs:
        acc = acc + d.values
        out.append(DyadicFunction(M.m, acc, M.space))
    if check:
        top = out[-1]
        scale = max(float(np.abs(top.values).max()), 1.0)
        for k, Mk in enumerate(out):
            gap = np.abs(conditional_expectation(top, k).values - Mk.values).max()
            if gap > 1e-12 * scale * (M.m + 1):
                raise AssertionError(f"M_{k} differs from E_{k} M_m by {gap}")
    return out


@dataclass(frozen=True)
class CotypeRatio:
    numerator: float
    denominator: float
    ratio: float

    def to_dict(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator, "ratio": self.ratio}


def cotype_ratio(M: WalshMartingale, q: float) -> CotypeRatio:
    """sum_k E||dM_k||^q divided by sup_k E||M_k||^q."""
    if not q >= 2:
        raise DomainError(f"q must be >= 2, got {q!r}")
    num = math.fsum(d.expect_norm_pow(q) for d in M.increments())
    den = max(Mk.expect_norm_pow(q) for Mk in partial_sums(M, check=False)[1:])
    if den <= 0.0:
        raise DegenerateInputError("zero martingale: sup_k E||M_k||^q vanishes")
    return CotypeRatio(num, den, num / den)


def martingale_vq_lp(g: DyadicFunction, q: float, p: float) -> float:
    """|| V_q(E_k g : k = 0..m) ||_{L^p(Omega)}, exact over all atoms."""
    if not q >= 2:
        raise DomainError(f"q must be >= 2, got {q!r}")
    if not p > 1:
        raise DomainError(f"p must be > 1, got {p!r}")
    per_atom = vq_values(filtration_path(g), q, g.space.norms)
    if math.isinf(p):
        return float(per_atom.max())
    return float(np.mean(per_atom ** p) ** (1.0 / p))


def witness_linfty(n: int, m: int | None = None) -> WalshMartingale:
    """phi_k = e_k in l^inf_n: every partial sum has norm exactly 1."""
    m = n if m is None else m
    if m > n:
        raise DomainError(f"witness needs m <= n, got m = {m}, n = {n}")
    space = Space.lr(n, INF)
    tables = []
    for k in range(1, m + 1):
        e = np.zeros((2 ** (k - 1), n))
        e[:, k - 1] = 1.0
        tables.append(e)
    return WalshMartingale(tables, space)


def random_martingale(seed, space: Space, m: int, amplitude: float = 1.0) -> WalshMartingale:
    """Tables with iid entries uniform in [-amplitude, amplitude]; fixed by ``seed``."""
    if amplitude < 0:
        raise DomainError("amplitude must be nonnegative")
    rng = np.random.default_rng(seed)
    tables = [rng.uniform(-1.0, 1.0, size=(2 ** (k - 1), space.dim)) * amplitude for k in range(1, m + 1)]
    return WalshMartingale(tables, space)
