"""The q-variation seminorm of a finite sample path.

For values a_0, ..., a_J the q-variation is

    V_q = sup over index chains s_0 < s_1 < ... < s_r of
          ( sum_i ||a_{s_{i+1}} - a_{s_i}||^q )^(1/q)

with increments taken between consecutive chosen indices.  Computing it is
a maximum weight chain problem in the complete DAG on {0..J} with edge
weight ||a_j - a_i||^q, solved exactly by an O(J^2) dynamic program.  A
2^J enumeration serves as the oracle for small J.

Ties are broken toward fewer nodes, then the lexicographically smallest
chain.  Sums within a relative ``TIE_REL`` of each other count as tied:
chains with mathematically equal sums (collinear increments, common in
l^1 and l^inf at q = 1) can differ by an ulp depending on the order of
additions, and the tie rule must not depend on that rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SizeError, SpaceMismatchError
from .spaces import Point, Space, as_values

BRUTEFORCE_MAX_J = 20
TIE_REL = 1e-14


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Labels t_0 < ... < t_J with one sample in ``space`` per label."""

    labels: np.ndarray
    values: np.ndarray
    space: Space

    def __init__(self, labels, values, space: Space):
        lab = np.array(labels, dtype=float).reshape(-1)
        vals = as_values(values, space)
        if lab.shape[0] != vals.shape[0]:
            raise SpaceMismatchError(
                f"{lab.shape[0]} labels but {vals.shape[0]} values"
            )
        if lab.shape[0] == 0:
            raise DomainError("a sample path needs at least one sample")
        if np.any(lab <= 0) or np.any(np.diff(lab) <= 0):
            raise DomainError("labels must be positive and strictly increasing")
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "space", space)

    @classmethod
    def from_values(cls, values, space: Space) -> "SamplePath":
        """Path labelled 1, 2, ..., J+1."""
        vals = as_values(values, space)
        return cls(np.arange(1, vals.shape[0] + 1, dtype=float), vals, space)

    @classmethod
    def scalar(cls, values: Sequence[float]) -> "SamplePath":
        return cls.from_values([[v] for v in values], Space(1))

    @property
    def J(self) -> int:
        return self.values.shape[0] - 1

    def point(self, i: int) -> Point:
        return Point(self.values[i], self.space)

    def scaled(self, lam: float) -> "SamplePath":
        return SamplePath(self.labels, lam * self.values, self.space)

    def shifted(self, v) -> "SamplePath":
        shift = v.coords if isinstance(v, Point) else np.asarray(v, dtype=float)
        return SamplePath(self.labels, self.values + shift, self.space)

    def drop(self, i: int) -> "SamplePath":
        keep = np.arange(self.J + 1) != i
        return SamplePath(self.labels[keep], self.values[keep], self.space)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "values": self.values.tolist(),
            "space": self.space.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplePath":
        space = Space.from_dict(d["space"]) if "space" in d else None
        values = d["values"]
        if space is None:
            width = len(values[0]) if values and isinstance(values[0], list) else 1
            space = Space(width)
        values = [v if isinstance(v, list) else [v] for v in values]
        if "labels" in d:
            return cls(d["labels"], values, space)
        return cls.from_values(values, space)


@dataclass(frozen=True)
class VariationResult:
    value: float
    chain: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"value": self.value, "chain": list(self.chain)}


def _check_q(q: float) -> float:
    q = float(q)
    if not (q >= 1) or math.isinf(q):
        raise DomainError(f"q must be a finite real >= 1, got {q!r}")
    return q


def increment_weights(path: SamplePath, q: float) -> np.ndarray:
    """Matrix W[i, j] = ||a_j - a_i||^q."""
    diff = path.values[None, :, :] - path.values[:, None, :]
    return path.space.norms(diff) ** q


def chain_sum(path: SamplePath, chain: Sequence[int], q: float) -> float:
    """Left-to-right sum of ||increment||^q along ``chain``."""
    s = 0.0
    for a, b in zip(chain[:-1], chain[1:]):
        s = s + float(path.space.norms(path.values[b] - path.values[a])) ** q
    return s


def _better(s1, c1, s2, c2) -> bool:
    """Is (s1, c1) strictly preferred to (s2, c2)?"""
    if abs(s1 - s2) > TIE_REL * max(abs(s1), abs(s2)):
        return s1 > s2
    if len(c1) != len(c2):
        return len(c1) < len(c2)
    return c1 < c2


def vq_bruteforce(path: SamplePath, q: float) -> VariationResult:
    """Exact V_q by enumerating every index chain (J <= 20)."""
    q = _check_q(q)
    J = path.J
    if J > BRUTEFORCE_MAX_J:
        raise SizeError(f"brute force enumeration limited to J <= {BRUTEFORCE_MAX_J}, got {J}")
    W = increment_weights(path, q).tolist()
    best_s, best_c = 0.0, ()
    stack = [(i, 0.0, (i,)) for i in range(J, -1, -1)]
    while stack:
        last, s, chain = stack.pop()
        if len(chain) >= 2 and _better(s, chain, best_s, best_c):
            best_s, best_c = s, chain
        row = W[last]
        for nxt in range(J, last, -1):
            stack.append((nxt, s + row[nxt], chain + (nxt,)))
    if best_s == 0.0:
        best_c = ()
    return VariationResult(best_s ** (1.0 / q), best_c)


def vq_dp(path: SamplePath, q: float) -> VariationResult:
    """Exact V_q via the O(J^2) maximum weight chain recursion."""
    q = _check_q(q)
    vals = path.values
    n_pts = vals.shape[0]
    F = np.zeros(n_pts)          # best chain sum ending at j
    nodes = np.ones(n_pts, dtype=np.int64)
    pred = np.full(n_pts, -1, dtype=np.int64)

    def chain_of(i):
        out = []
        while i >= 0:
            out.append(int(i))
            i = pred[i]
        return tuple(reversed(out))

    for j in range(1, n_pts):
        cand = F[:j] + path.space.norms(vals[j] - vals[:j]) ** q
        top = cand.max()
        if top <= 0.0:
            continue  # singleton chain {j} wins
        tied = np.flatnonzero(cand >= top * (1.0 - TIE_REL))
        if tied.size > 1:
            fewest = nodes[tied].min()
            tied = tied[nodes[tied] == fewest]
        if tied.size > 1:
            i = min(tied, key=lambda t: chain_of(t))
        else:
            i = tied[0]
        F[j] = cand[i]
        nodes[j] = nodes[i] + 1
        pred[j] = i

    top = F.max()
    if top <= 0.0:
        return VariationResult(0.0, ())
    ends = np.flatnonzero(F >= top * (1.0 - TIE_REL))
    if ends.size > 1:
        fewest = nodes[ends].min()
        ends = ends[nodes[ends] == fewest]
    chain = min((chain_of(e) for e in ends))
    return VariationResult(float(F[chain[-1]]) ** (1.0 / q), chain)


def vq_stream_lower(path: SamplePath, q: float) -> float:
    """V_q of the full adjacent chain; a lower bound for :func:`vq_dp`."""
    q = _check_q(q)
    if path.J == 0:
        return 0.0
    inc = path.space.norms(np.diff(path.values, axis=0))
    return float((inc ** q).sum() ** (1.0 / q))


def vq_values(values, q: float, norms: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """V_q of many paths at once, values only.

    ``values`` has shape ``(..., L, n)``: a batch of paths of length L.
    ``norms`` reduces the last axis of an array to norms.  Returns an array
    of shape ``values.shape[:-2]``.  Runs the same recursion as
    :func:`vq_dp`, vectorised over the batch.
    """
    q = _check_q(q)
    vals = np.asarray(values)
    L = vals.shape[-2]
    batch = vals.shape[:-2]
    if L <= 1:
        return np.zeros(batch)
    F = np.zeros(batch + (L,))
    for j in range(1, L):
        w = norms(vals[..., j : j + 1, :] - vals[..., :j, :]) ** q
        F[..., j] = np.maximum((F[..., :j] + w).max(axis=-1), 0.0)
    return F.max(axis=-1) ** (1.0 / q)
