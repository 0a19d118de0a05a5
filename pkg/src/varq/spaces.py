"""Finite-dimensional normed spaces l^r_n used as concrete Banach spaces.

Points are immutable wrappers around a read-only float array.  Bulk
computations elsewhere in the package work on raw ``(..., n)`` arrays and
call :meth:`Space.norms`, which reduces over the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SpaceMismatchError

INF = math.inf


@dataclass(frozen=True)
class NormKind:
    """Exponent r of an l^r norm; ``r = math.inf`` is the max norm."""

    r: float

    def __post_init__(self):
        r = float(self.r)
        if math.isnan(r) or r < 1:
            raise DomainError(f"norm exponent must satisfy r >= 1, got {self.r!r}")
        object.__setattr__(self, "r", r)

    @property
    def is_inf(self) -> bool:
        return self.r == INF

    def label(self) -> str:
        if self.is_inf:
            return "linf"
        if self.r == 1.0:
            return "l1"
        if self.r == 2.0:
            return "l2"
        return f"l{self.r:g}"


@dataclass(frozen=True)
class Space:
    dim: int
    norm: NormKind = NormKind(2.0)

    def __post_init__(self):
        if isinstance(self.norm, (int, float)):
            object.__setattr__(self, "norm", NormKind(self.norm))
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def lr(cls, dim: int, r: float) -> "Space":
        return cls(dim, NormKind(r))

    @property
    def r(self) -> float:
        return self.norm.r

    @property
    def label(self) -> str:
        return self.norm.label()

    def norms(self, arr) -> np.ndarray:
        """Norm of every vector stored along the last axis of ``arr``."""
        a = np.abs(np.asarray(arr, dtype=float))
        if a.shape[-1] != self.dim:
            raise SpaceMismatchError(
                f"last axis has length {a.shape[-1]}, space has dim {self.dim}"
            )
        r = self.r
        if r == INF:
            return a.max(axis=-1)
        if r == 1.0:
            return a.sum(axis=-1)
        if r == 2.0:
            return np.sqrt((a * a).sum(axis=-1))
        # scale by the max entry so large r does not overflow
        m = a.max(axis=-1)
        safe = np.where(m > 0, m, 1.0)
        return m * ((a / safe[..., None]) ** r).sum(axis=-1) ** (1.0 / r)

    def point(self, coords) -> "Point":
        return Point(coords, self)

    def zero(self) -> "Point":
        return Point(np.zeros(self.dim), self)

    def basis(self, i: int) -> "Point":
        e = np.zeros(self.dim)
        e[i] = 1.0
        return Point(e, self)

    def to_dict(self) -> dict:
        r = self.r
        if r in (1.0, 2.0, INF):
            norm = self.label
        else:
            norm = {"lr": r}
        return {"dim": self.dim, "norm": norm}

    @classmethod
    def from_dict(cls, d: dict) -> "Space":
        norm = d.get("norm", "l2")
        if isinstance(norm, dict):
            if set(norm) != {"lr"}:
                raise DomainError(f"unknown norm descriptor {norm!r}")
            r = float(norm["lr"])
        else:
            try:
                r = {"l1": 1.0, "l2": 2.0, "linf": INF}[norm]
            except KeyError:
                raise DomainError(f"unknown norm descriptor {norm!r}") from None
        return cls(int(d["dim"]), NormKind(r))


class Point:
    """An element of a :class:`Space`. Immutable."""

    __slots__ = ("_coords", "space")

    def __init__(self, coords, space: Space):
        c = np.array(coords, dtype=float).reshape(-1)
        if c.shape[0] != space.dim:
            raise SpaceMismatchError(
                f"{c.shape[0]} coordinates given for a space of dim {space.dim}"
            )
        if np.isnan(c).any():
            raise DomainError("NaN coordinate")
        c.flags.writeable = False
        object.__setattr__(self, "_coords", c)
        object.__setattr__(self, "space", space)

    def __setattr__(self, name, value):
        raise AttributeError("Point is immutable")

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    def norm(self) -> float:
        return norm(self)

    def __add__(self, other: "Point") -> "Point":
        return axpy(1.0, self, other)

    def __sub__(self, other: "Point") -> "Point":
        return axpy(-1.0, other, self)

    def __neg__(self) -> "Point":
        return Point(-self._coords, self.space)

    def __mul__(self, alpha: float) -> "Point":
        return Point(float(alpha) * self._coords, self.space)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return self.space == other.space and np.array_equal(self._coords, other._coords)

    def __hash__(self):
        return hash((self.space, self._coords.tobytes()))

    def __repr__(self):
        return f"Point({self._coords.tolist()}, {self.space.label}_{self.space.dim})"


def norm(v: Point) -> float:
    return float(v.space.norms(v.coords))


def axpy(alpha: float, v: Point, w: Point) -> Point:
    """Return ``alpha * v + w``."""
    if v.space != w.space:
        raise SpaceMismatchError(f"{v.space} vs {w.space}")
    return Point(float(alpha) * v.coords + w.coords, v.space)


def as_values(values, space: Space) -> np.ndarray:
    """Coerce a sequence of Points or raw rows to a read-only ``(k, n)`` array."""
    rows = []
    for v in values:
        if isinstance(v, Point):
            if v.space != space:
                raise SpaceMismatchError(f"{v.space} vs {space}")
            rows.append(v.coords)
        else:
            rows.append(np.atleast_1d(np.asarray(v, dtype=float)))
    arr = np.array(rows, dtype=float).reshape(len(rows), -1) if rows else np.zeros((0, space.dim))
    if arr.shape[1] != space.dim:
        raise SpaceMismatchError(f"values have width {arr.shape[1]}, space has dim {space.dim}")
    if np.isnan(arr).any():
        raise DomainError("NaN coordinate")
    arr.flags.writeable = False
    return arr
