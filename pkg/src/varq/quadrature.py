"""Adaptive Simpson quadrature with absolute error control.

Used as the independent oracle for every closed form in the package and
for the integral identities that have no closed form.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

from .errors import QuadratureError, TailNotStableError

DEFAULT_MAX_INTERVALS = 200_000


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                     max_intervals: int = DEFAULT_MAX_INTERVALS, min_width: float = 0.0) -> float:
    """Integrate a scalar function over [a, b] to absolute tolerance ``tol``.

    Standard recursive Simpson refinement with the Richardson correction
    ``S2 + (S2 - S1) / 15``, written with an explicit stack.  Raises
    :class:`QuadratureError` (carrying the running estimate) if more than
    ``max_intervals`` subintervals are needed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    used = 0
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) * (flo + 4 * flm + fmid) / 6
        right = (hi - mid) * (fmid + 4 * frm + fhi) / 6
        delta = left + right - s
        if abs(delta) <= 15 * eps or depth >= 60 or (hi - lo) <= min_width:
            total += left + right + delta / 15
            continue
        used += 1
        if used > max_intervals:
            raise QuadratureError(
                f"adaptive Simpson exceeded {max_intervals} subdivisions on [{a}, {b}]",
                estimate=sign * (total + s),
            )
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    if not math.isfinite(total):
        raise QuadratureError("non-finite integrand encountered", estimate=total)
    return sign * total


def integrate_pieces(f: Callable[[float], float], points: Iterable[float], tol: float = 1e-10,
                     **kw) -> float:
    """Integrate over consecutive pieces [p_0, p_1], [p_1, p_2], ...

    Splitting at kinks and jumps keeps each piece smooth, which is what
    Simpson refinement needs to hit tight tolerances.  ``tol`` applies to
    each piece.
    """
    pts = sorted(set(float(p) for p in points))
    return math.fsum(adaptive_simpson(f, lo, hi, tol, **kw) for lo, hi in zip(pts[:-1], pts[1:]))


def smooth_endpoints(f: Callable[[float], float], a: float, b: float) -> Callable[[float], float]:
    """Reparametrise ``f`` on [a, b] by u -> a + (b - a)(3u^2 - 2u^3) over [0, 1].

    The Jacobian vanishes at both ends, which tames integrable endpoint
    singularities (logarithmic ones in particular).  The returned integrand
    is defined as 0 exactly at u = 0 and u = 1.
    """
    w = b - a

    def g(u: float) -> float:
        jac = 6.0 * u * (1.0 - u)
        if jac == 0.0:
            return 0.0
        return f(a + w * u * u * (3.0 - 2.0 * u)) * w * jac

    return g


def integrate_to_infinity(f: Callable[[float], float], a: float, start: float, tol: float = 1e-10,
                          breaks: Iterable[float] = (), rel_stable: float | None = None,
                          max_doublings: int = 60) -> tuple[float, float, int]:
    """Integrate f over [a, inf) by doubling an outer cutoff.

    Integrates [a, start], then [L, 2L], [2L, 4L], ... until the newest
    slab contributes at most ``tol`` (or, if ``rel_stable`` is given, at
    most ``rel_stable`` times the running total).  Returns
    ``(value, cutoff, doublings)``; raises :class:`TailNotStableError` if
    the cutoff never stabilises.
    """
    brk = [p for p in breaks if a < p]
    upper = max(start, a)
    pieces = [a] + [p for p in brk if p < upper] + [upper]
    total = integrate_pieces(f, pieces, tol)
    for k in range(1, max_doublings + 1):
        nxt = 2.0 * upper if upper > 0 else 1.0
        pieces = [upper] + [p for p in brk if upper < p < nxt] + [nxt]
        slab = integrate_pieces(f, pieces, tol)
        total += slab
        upper = nxt
        gate = tol if rel_stable is None else rel_stable * abs(total)
        if abs(slab) <= gate:
            return total, upper, k
    raise TailNotStableError(
        f"integral over [{a}, inf) did not stabilise after {max_doublings} cutoff doublings",
        estimate=total,
    )
