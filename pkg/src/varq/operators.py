"""Convolution operators on compactly supported step functions.

Every kernel family here has an elementary primitive C_t, so for a step
function with breakpoints x_0 < ... < x_K, values v_1..v_K and jumps
d_j = v_{j+1} - v_j (v_0 = v_{K+1} = 0),

    (K_t * f)(x) = sum_j v_j * int_{x - x_j}^{x - x_{j-1}} K_t(y) dy
                 = sum_j d_j * C_t(x - x_j).

Additive constants in C_t cancel because the jumps sum to zero.  The
convolution convention is (K * f)(x) = int K(y) f(x - y) dy throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, SingularityError, SpaceMismatchError, TailNotStableError
from .quadrature import adaptive_simpson, integrate_pieces, integrate_to_infinity, smooth_endpoints
from .spaces import Point, Space, as_values

INV_PI = 1.0 / math.pi

FAMILY_TAGS = (
    "Average",
    "TruncatedHilbert",
    "DoublyTruncatedHilbert",
    "Poisson",
    "ConjugatePoisson",
    "PhiPlus",
    "PhiMinus",
    "RhoPlus",
    "RhoMinus",
)


# ---------------------------------------------------------------------------
# step functions and scale grids

class StepFunction:
    """Piecewise constant f with value ``values[i]`` on [x_i, x_{i+1}), zero outside."""

    __slots__ = ("breakpoints", "values", "space", "_jumps")

    def __init__(self, breakpoints, values, space: Space | None = None):
        bp = np.array(breakpoints, dtype=float).reshape(-1)
        if space is None:
            first = np.atleast_1d(np.asarray(values[0], dtype=float)) if len(values) else [0.0]
            space = Space(len(first))
        vals = as_values(values, space)
        if bp.shape[0] < 2 or vals.shape[0] != bp.shape[0] - 1:
            raise DomainError(
                f"need K+1 >= 2 breakpoints for K values, got {bp.shape[0]} and {vals.shape[0]}"
            )
        if not np.all(np.isfinite(bp)) or np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be finite and strictly increasing")
        bp.flags.writeable = False
        padded = np.vstack([np.zeros((1, space.dim)), vals, np.zeros((1, space.dim))])
        jumps = np.diff(padded, axis=0)
        jumps.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "_jumps", jumps)

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    @classmethod
    def indicator(cls, a: float, b: float, value=1.0, space: Space | None = None) -> "StepFunction":
        space = space or Space(1)
        v = np.broadcast_to(np.asarray(value, dtype=float), (space.dim,))
        return cls([a, b], [v], space)

    @property
    def jumps(self) -> np.ndarray:
        """d_j = v_{j+1} - v_j, one row per breakpoint."""
        return self._jumps

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def __call__(self, x: float) -> Point:
        i = np.searchsorted(self.breakpoints, x, side="right") - 1
        if 0 <= i < self.K:
            return Point(self.values[i], self.space)
        return self.space.zero()

    def scaled(self, lam: float) -> "StepFunction":
        return StepFunction(self.breakpoints, lam * self.values, self.space)

    def dilated(self, lam: float) -> "StepFunction":
        """x -> f(lam * x)."""
        if lam <= 0:
            raise DomainError("dilation factor must be positive")
        return StepFunction(self.breakpoints / lam, self.values, self.space)

    def embedded(self, space: Space, coord: int = 0) -> "StepFunction":
        """Place a scalar step function on coordinate ``coord`` of ``space``."""
        if self.space.dim != 1:
            raise SpaceMismatchError("only scalar step functions can be embedded")
        vals = np.zeros((self.K, space.dim))
        vals[:, coord] = self.values[:, 0]
        return StepFunction(self.breakpoints, vals, space)

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict, space: Space | None = None) -> "StepFunction":
        vals = [v if isinstance(v, list) else [v] for v in d["values"]]
        if space is None:
            space = Space(len(vals[0]))
        return cls(d["breakpoints"], vals, space)

    @classmethod
    def random(cls, rng: np.random.Generator, space: Space, max_intervals: int = 5,
               amplitude: float = 1.0, span: float = 4.0) -> "StepFunction":
        K = int(rng.integers(1, max_intervals + 1))
        widths = rng.uniform(0.1, 1.0, size=K)
        widths *= span / widths.sum() * rng.uniform(0.25, 1.0)
        start = rng.uniform(-span / 2, 0.0)
        bp = start + np.concatenate([[0.0], np.cumsum(widths)])
        vals = rng.uniform(-amplitude, amplitude, size=(K, space.dim))
        return cls(bp, vals, space)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (self.space == other.space and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"StepFunction(K={self.K}, support={self.support}, space={self.space.label}_{self.space.dim})"


@dataclass(frozen=True, eq=False)
class ScaleGrid:
    """Finite increasing set of positive scales t_1 < ... < t_J."""

    scales: np.ndarray
    spec: dict | None = None

    def __init__(self, scales, spec: dict | None = None):
        s = np.array(scales, dtype=float).reshape(-1)
        if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise DomainError("scales must be positive and strictly increasing")
        s.flags.writeable = False
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "spec", spec)

    @classmethod
    def geometric(cls, t_min: float, t_max: float, count: int) -> "ScaleGrid":
        if count < 1 or t_min <= 0 or t_max < t_min or (count > 1 and t_max == t_min):
            raise DomainError("geometric grid needs 0 < t_min < t_max and count >= 1")
        if count == 1:
            scales = np.array([t_min])
        else:
            scales = np.exp(np.linspace(math.log(t_min), math.log(t_max), count))
            scales[0], scales[-1] = t_min, t_max
        return cls(scales, {"geometric": {"min": t_min, "max": t_max, "count": int(count)}})

    def __len__(self):
        return self.scales.size

    @property
    def t_min(self) -> float:
        return float(self.scales[0])

    @property
    def t_max(self) -> float:
        return float(self.scales[-1])

    def dilated(self, lam: float) -> "ScaleGrid":
        spec = None
        if self.spec and "geometric" in self.spec:
            g = self.spec["geometric"]
            spec = {"geometric": {"min": g["min"] * lam, "max": g["max"] * lam, "count": g["count"]}}
        return ScaleGrid(self.scales * lam, spec)

    def to_dict(self) -> dict:
        return self.spec if self.spec else {"scales": self.scales.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleGrid":
        if "geometric" in d:
            g = d["geometric"]
            return cls.geometric(float(g["min"]), float(g["max"]), int(g["count"]))
        return cls(d["scales"])


# ---------------------------------------------------------------------------
# kernel families

def _phi_primitive(s):
    # antiderivative of 1/(s(1+s^2)) on s > 0: log s - log(1+s^2)/2
    return -0.5 * np.log1p(1.0 / (s * s))


@dataclass(frozen=True)
class KernelFamily:
    """One of the operator families; ``R`` only for the doubly truncated Hilbert kernel."""

    tag: str
    R: float | None = None

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise DomainError(f"unknown kernel family {self.tag!r}")
        if self.tag == "DoublyTruncatedHilbert":
            if self.R is None or not self.R > 0:
                raise DomainError("DoublyTruncatedHilbert needs R > 0")
        elif self.R is not None:
            raise DomainError(f"{self.tag} takes no R parameter")

    @classmethod
    def parse(cls, spec) -> "KernelFamily":
        if isinstance(spec, KernelFamily):
            return spec
        if isinstance(spec, str):
            return cls(spec)
        if isinstance(spec, dict):
            if "DoublyTruncatedHilbert" in spec:
                return cls("DoublyTruncatedHilbert", float(spec["DoublyTruncatedHilbert"]["R"]))
            return cls(spec["tag"], spec.get("R"))
        raise DomainError(f"cannot parse kernel family {spec!r}")

    def to_dict(self):
        if self.R is None:
            return self.tag
        return {"DoublyTruncatedHilbert": {"R": self.R}}

    @property
    def label(self) -> str:
        return self.tag if self.R is None else f"{self.tag}(R={self.R:g})"

    @property
    def hilbert_type(self) -> bool:
        return self.tag in ("TruncatedHilbert", "DoublyTruncatedHilbert")

    # primitives --------------------------------------------------------

    def cumulative(self, y, t):
        """A primitive C_t of the dilated kernel, vectorised over ``y`` and ``t``."""
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        tag = self.tag
        if tag == "Average":
            return np.clip(y, -t, t) / (2.0 * t)
        if tag == "Poisson":
            return INV_PI * np.arctan(y / t)
        if tag == "ConjugatePoisson":
            return (0.5 * INV_PI) * np.log(t * t + y * y)
        if tag == "TruncatedHilbert":
            return INV_PI * np.log(np.maximum(np.abs(y), t))
        if tag == "DoublyTruncatedHilbert":
            return INV_PI * np.log(np.minimum(np.maximum(np.abs(y), t), self.R))
        u = y / t
        if tag == "PhiPlus":
            return INV_PI * _phi_primitive(np.maximum(u, 1.0))
        if tag == "PhiMinus":
            return INV_PI * _phi_primitive(-np.minimum(u, -1.0))
        if tag == "RhoPlus":
            v = np.clip(u, 0.0, 1.0)
            return (0.5 * INV_PI) * np.log1p(v * v)
        if tag == "RhoMinus":
            v = np.clip(u, -1.0, 0.0)
            return (0.5 * INV_PI) * np.log1p(v * v)
        raise AssertionError(tag)

    def density(self, y: float, t: float) -> float:
        """Pointwise value of the dilated kernel K_t(y) = K(y/t)/t (scalar)."""
        tag = self.tag
        if tag == "Average":
            return 1.0 / (2.0 * t) if abs(y) < t else 0.0
        if tag == "Poisson":
            return INV_PI * t / (t * t + y * y)
        if tag == "ConjugatePoisson":
            return INV_PI * y / (t * t + y * y)
        if tag == "TruncatedHilbert":
            return INV_PI / y if abs(y) > t else 0.0
        if tag == "DoublyTruncatedHilbert":
            return INV_PI / y if t < abs(y) < self.R else 0.0
        u = y / t
        if tag == "PhiPlus":
            return INV_PI / (u * (u * u + 1.0)) / t if u >= 1.0 else 0.0
        if tag == "PhiMinus":
            return INV_PI / (u * (u * u + 1.0)) / t if u <= -1.0 else 0.0
        if tag == "RhoPlus":
            return INV_PI * u / (u * u + 1.0) / t if 0.0 <= u <= 1.0 else 0.0
        if tag == "RhoMinus":
            return INV_PI * u / (u * u + 1.0) / t if -1.0 <= u <= 0.0 else 0.0
        raise AssertionError(tag)

    def breaks(self, t: float) -> tuple[float, ...]:
        """Points where K_t is not smooth."""
        tag = self.tag
        if tag in ("Average", "TruncatedHilbert"):
            return (-t, t)
        if tag == "DoublyTruncatedHilbert":
            return (-t, t, -self.R, self.R)
        if tag in ("Poisson", "ConjugatePoisson"):
            return ()
        return {"PhiPlus": (t,), "PhiMinus": (-t,), "RhoPlus": (0.0, t), "RhoMinus": (-t, 0.0)}[tag]

    def kernel(self, t: float) -> "ScaledKernel":
        if not t > 0:
            raise DomainError(f"scale must be positive, got {t!r}")
        return ScaledKernel(lambda y: self.density(y, t), self.breaks(t))


@dataclass(frozen=True)
class ScaledKernel:
    """A scalar kernel callable plus the points where it is not smooth."""

    fn: Callable[[float], float]
    breaks: tuple[float, ...] = ()

    def __call__(self, y: float) -> float:
        return self.fn(y)


AVERAGE = KernelFamily("Average")
POISSON = KernelFamily("Poisson")
CONJUGATE_POISSON = KernelFamily("ConjugatePoisson")
TRUNCATED_HILBERT = KernelFamily("TruncatedHilbert")
PHI_PLUS = KernelFamily("PhiPlus")
PHI_MINUS = KernelFamily("PhiMinus")
RHO_PLUS = KernelFamily("RhoPlus")
RHO_MINUS = KernelFamily("RhoMinus")


def doubly_truncated(R: float) -> KernelFamily:
    return KernelFamily("DoublyTruncatedHilbert", float(R))


# ---------------------------------------------------------------------------
# evaluation

def eval(kind: KernelFamily, f: StepFunction, t: float, x: float) -> Point:
    """Exact value of (K_t * f)(x)."""
    t = float(t)
    if not t > 0:
        raise DomainError(f"scale must be positive, got {t!r}")
    kind = KernelFamily.parse(kind)
    c = kind.cumulative(float(x) - f.breakpoints, t)
    return Point(c @ f.jumps, f.space)


def apply(kind: KernelFamily, f: StepFunction, ts, xs, chunk: int = 4096) -> np.ndarray:
    """(K_t * f)(x) for all t in ``ts`` and x in ``xs``; shape (len(ts), len(xs), n)."""
    kind = KernelFamily.parse(kind)
    ts = np.asarray(ts, dtype=float).reshape(-1)
    xs = np.asarray(xs, dtype=float).reshape(-1)
    if np.any(ts <= 0):
        raise DomainError("scales must be positive")
    out = np.empty((ts.size, xs.size, f.space.dim))
    tcol = ts[:, None, None]
    for lo in range(0, xs.size, chunk):
        y = xs[lo:lo + chunk, None] - f.breakpoints[None, :]
        c = kind.cumulative(y[None, :, :], tcol)
        out[:, lo:lo + chunk, :] = c @ f.jumps
    return out


def hilbert_full(f: StepFunction, x: float) -> Point:
    """Hf(x) = (1/pi) sum_j d_j log|x - x_j|; undefined at breakpoints."""
    return Point(_hilbert_vec(f, float(x)), f.space)


def _hilbert_vec(f: StepFunction, x: float) -> np.ndarray:
    dist = np.abs(x - f.breakpoints)
    if np.any(dist == 0.0):
        raise SingularityError(f"Hf diverges logarithmically at breakpoint x = {x!r}")
    return INV_PI * (np.log(dist) @ f.jumps)


def hilbert_scalar(f: StepFunction, coord: int = 0) -> Callable[[float], float]:
    """Fast scalar closure x -> (Hf(x))[coord] for use inside quadrature loops.

    Far from the support the jumps sum to zero, so log|x| cancels exactly
    and sum_j d_j log|1 - x_j/x| is used instead; this keeps the value
    free of cancellation noise as x grows.
    """
    pts = f.breakpoints.tolist()
    d = f.jumps[:, coord].tolist()
    pairs = [(p, w) for p, w in zip(pts, d) if w != 0.0]
    far = 2.0 * max((abs(p) for p in pts), default=0.0)

    def h(x: float) -> float:
        s = 0.0
        if abs(x) > far:
            for p, w in pairs:
                s += w * math.log1p(-p / x)
            return INV_PI * s
        for p, w in pairs:
            r = abs(x - p)
            if r == 0.0:
                raise SingularityError(f"Hf diverges at breakpoint x = {x!r}")
            s += w * math.log(r)
        return INV_PI * s

    return h


def lp_norm(f: StepFunction, p: float) -> float:
    """||f||_{L^p(R; X)}, exact."""
    p = float(p)
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p!r}")
    widths = np.diff(f.breakpoints)
    nv = f.space.norms(f.values)
    if math.isinf(p):
        return float(nv.max())
    return float((widths * nv ** p).sum() ** (1.0 / p))


def quad_convolve(kernel: Callable[[float], float], f: StepFunction, x: float,
                  tol: float = 1e-11) -> Point:
    """Quadrature oracle for (kernel * f)(x).

    Integrates the kernel over each interval x - [x_i, x_{i+1}] by adaptive
    Simpson, splitting at ``kernel.breaks`` when the kernel carries them.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    brk = tuple(getattr(kernel, "breaks", ()))
    x = float(x)
    total = np.zeros(f.space.dim)
    for i in range(f.K):
        v = f.values[i]
        if not np.any(v):
            continue
        lo, hi = x - f.breakpoints[i + 1], x - f.breakpoints[i]
        pts = [lo, hi] + [b for b in brk if lo < b < hi]
        mass = integrate_pieces(kernel, pts, tol)
        total += mass * v
    return Point(total, f.space)


# ---------------------------------------------------------------------------
# H_eps - Q_eps decomposition

def decomposition_terms(f: StepFunction, eps: float, x: float) -> dict[str, np.ndarray]:
    """The four pieces of (H_eps - Q_eps) f(x) as integrals against f(x -+ y).

    ``A+`` and ``G+`` are convolutions with the phi+/rho+ kernels.  ``A-``
    and ``G-`` are the mirrored integrals over f(x + y), y > 0:

        A-(x) = (1/pi) int_eps^inf f(x + y) (1/y - y/(y^2 + eps^2)) dy
        G-(x) = (1/pi) int_0^eps  f(x + y) y/(y^2 + eps^2) dy

    which equal minus the convolutions with the odd kernels phi-/rho-
    (those kernels are negative on their support).  With these pieces
    (H_eps - Q_eps) f = A+ - A- - G+ + G-.
    """
    return {
        "A+": eval(PHI_PLUS, f, eps, x).coords,
        "A-": -eval(PHI_MINUS, f, eps, x).coords,
        "G+": eval(RHO_PLUS, f, eps, x).coords,
        "G-": -eval(RHO_MINUS, f, eps, x).coords,
    }


def decomposition_residual(f: StepFunction, eps: float, x: float) -> float:
    """||(H_eps - Q_eps) f(x) - (A+ - A- - G+ + G-) f(x)||; zero up to rounding."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    lhs = eval(TRUNCATED_HILBERT, f, eps, x).coords - eval(CONJUGATE_POISSON, f, eps, x).coords
    T = decomposition_terms(f, eps, x)
    rhs = T["A+"] - T["A-"] - T["G+"] + T["G-"]
    return float(f.space.norms(lhs - rhs))


# ---------------------------------------------------------------------------
# kernel hypotheses of the form int x |Phi'(x)| dx < inf

@dataclass(frozen=True)
class ProfileKernel:
    """A scalar profile Phi on an interval support, with its derivative."""

    name: str
    phi: Callable[[float], float]
    dphi: Callable[[float], float]
    support: tuple[float, float]


def _phi_profile(y):
    return INV_PI / (y * (y * y + 1.0))


def _dphi_profile(y):
    return -INV_PI * (3.0 * y * y + 1.0) / (y * (y * y + 1.0)) ** 2


def _rho_profile(y):
    return INV_PI * y / (y * y + 1.0)


def _drho_profile(y):
    return INV_PI * (1.0 - y * y) / (1.0 + y * y) ** 2


PROFILES = {
    "PhiPlus": ProfileKernel("PhiPlus", _phi_profile, _dphi_profile, (1.0, math.inf)),
    "PhiMinus": ProfileKernel("PhiMinus", _phi_profile, _dphi_profile, (-math.inf, -1.0)),
    "RhoPlus": ProfileKernel("RhoPlus", _rho_profile, _drho_profile, (0.0, 1.0)),
    "RhoMinus": ProfileKernel("RhoMinus", _rho_profile, _drho_profile, (-1.0, 0.0)),
}


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    integral: float
    passes: bool
    cutoff: float | None = None
    tail_value: float | None = None
    note: str = ""


def kernel_hypothesis_check(which, rel_tol: float = 1e-6, stable_rel: float = 0.01,
                            max_doublings: int = 40) -> HypothesisCheck:
    """Evaluate int |x| |Phi'(x)| dx over the support of Phi.

    Bounded supports are integrated directly.  Half-line supports use
    cutoff doubling: the check passes only if the newest slab changes the
    running value by at most ``stable_rel`` (relative) within
    ``max_doublings`` doublings, and Phi is numerically zero at the final
    cutoff.  Negative supports are mirrored.
    """
    prof = PROFILES[which] if isinstance(which, str) else which
    lo, hi = prof.support
    if lo == -math.inf:
        mirrored = ProfileKernel(prof.name, lambda y: prof.phi(-y), lambda y: -prof.dphi(-y), (-hi, math.inf))
        res = kernel_hypothesis_check(mirrored, rel_tol, stable_rel, max_doublings)
        return HypothesisCheck(prof.name, res.integral, res.passes, res.cutoff, res.tail_value, res.note)

    def integrand(y):
        return abs(y) * abs(prof.dphi(y))

    if hi < math.inf:
        g = smooth_endpoints(integrand, lo, hi)
        rough = adaptive_simpson(g, 0.0, 1.0, 1e-6)
        value = adaptive_simpson(g, 0.0, 1.0, max(rel_tol * abs(rough), 1e-15))
        return HypothesisCheck(prof.name, value, math.isfinite(value))

    start = max(2.0 * lo, lo + 1.0) if lo > 0 else 1.0
    try:
        rough, _, _ = integrate_to_infinity(integrand, lo, start, 1e-6, rel_stable=stable_rel,
                                            max_doublings=max_doublings)
    except TailNotStableError:
        return HypothesisCheck(prof.name, math.inf, False, note="cutoff doubling never stabilised")
    value, cutoff, _ = integrate_to_infinity(integrand, lo, start, max(rel_tol * abs(rough), 1e-15),
                                             rel_stable=min(stable_rel, rel_tol),
                                             max_doublings=max_doublings + 40)
    tail = abs(prof.phi(cutoff))
    scale = max(abs(prof.phi(lo)), 1e-300)
    vanishes = tail <= 1e-6 * scale
    return HypothesisCheck(prof.name, value, bool(math.isfinite(value) and vanishes), cutoff, tail,
                           "" if vanishes else "Phi does not vanish at infinity")
