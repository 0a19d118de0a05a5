"""Experiment driver: constant estimation, sweeps, the identity suite and reports.

Every estimate reported here is a lower bound of a lower bound: finite
scale grids under-approximate V_q and the search under-approximates the
supremum over f.  Nothing here claims a true operator constant.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import operators as ops
from .errors import DegenerateInputError, DomainError, ResolutionError
from .martingale import WalshMartingale, cotype_ratio, random_martingale, witness_linfty
from .operators import KernelFamily, ScaleGrid, StepFunction
from .quadrature import adaptive_simpson, integrate_to_infinity
from .spaces import Space
from .transference import cotype_chain_report
from .variation import vq_values

KINDS = ("variation", "estimate", "sweep", "identities", "cotype", "transfer")
CSV_COLUMNS = ("experiment_id", "kind", "space", "dim", "p", "q", "family", "estimate", "diagnostic", "seed")

IDENTITY_TOL = {
    "conjugate-poisson": 1e-6,
    "decomposition": 1e-10,
    "poisson-average": 1e-6,
    "weight-mass": 1e-10,
    "variational-average": 1e-6,
}


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class CorpusSpec:
    """Seeded random step functions, optionally replaced by explicit ones.

    ``scale`` multiplies every value and ``dilation`` maps f to f(dilation x);
    both are applied after generation.
    """

    count: int = 8
    max_intervals: int = 5
    amplitude: float = 1.0
    seed: int = 0
    scale: float = 1.0
    dilation: float = 1.0
    functions: tuple = ()

    def build(self, space: Space) -> list[StepFunction]:
        if self.functions:
            fs = [f if isinstance(f, StepFunction) else StepFunction.from_dict(f, space) for f in self.functions]
        else:
            rng = np.random.default_rng(self.seed)
            fs = [StepFunction.random(rng, space, self.max_intervals, self.amplitude) for _ in range(self.count)]
        return [self.transform(f) for f in fs]

    def transform(self, f: StepFunction) -> StepFunction:
        if self.dilation != 1.0:
            f = f.dilated(self.dilation)
        if self.scale != 1.0:
            f = f.scaled(self.scale)
        return f

    def to_dict(self) -> dict:
        d = {"count": self.count, "max_intervals": self.max_intervals, "amplitude": self.amplitude,
             "seed": self.seed, "scale": self.scale, "dilation": self.dilation}
        if self.functions:
            d["functions"] = [f.to_dict() if isinstance(f, StepFunction) else f for f in self.functions]
        return d


@dataclass(frozen=True)
class OptimizerSpec:
    """Random restarts plus coordinate hill climbing, all seeded."""

    restarts: int = 16
    iterations: int = 200
    step: float = 0.25
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SpatialSpec:
    """Midpoint grid over [x_0 - M t_max, x_K + M t_max].

    Spacing is ``1 / points_per_unit`` in units of the reference scale
    sqrt(t_min t_max) of the scale grid, so jointly dilating f and the grid
    moves every sample point with them.
    """

    points_per_unit: int = 64
    tail: float = 4.0
    gate: float = 0.01

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "estimate"
    space: Space = Space(1)
    p: float = 2.0
    q: float = 3.0
    family: KernelFamily = ops.AVERAGE
    grid: ScaleGrid = field(default_factory=lambda: ScaleGrid.geometric(2.0 ** -6, 2.0 ** 6, 33))
    corpus: CorpusSpec = CorpusSpec()
    optimizer: OptimizerSpec = OptimizerSpec()
    spatial: SpatialSpec = SpatialSpec()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        if not self.p > 1:
            raise DomainError(f"p must be > 1, got {self.p!r}")
        qmin = 1.0 if self.kind == "variation" else 2.0
        if not (self.q >= qmin and math.isfinite(self.q)):
            raise DomainError(f"q must be finite and >= {qmin:g}, got {self.q!r}")
        c, o, s = self.corpus, self.optimizer, self.spatial
        if c.count < 1 or c.max_intervals < 1 or not c.amplitude > 0:
            raise DomainError("corpus needs positive count, max_intervals and amplitude")
        if not (c.scale != 0 and c.dilation > 0):
            raise DomainError("corpus scale must be nonzero and dilation positive")
        if o.restarts < 0 or o.iterations < 0 or not o.step > 0:
            raise DomainError("optimizer needs restarts >= 0, iterations >= 0, step > 0")
        if s.points_per_unit < 1 or not s.tail > 0 or not s.gate > 0:
            raise DomainError("spatial grid needs positive points_per_unit, tail and gate")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "space": self.space.to_dict(),
            "p": self.p,
            "q": self.q,
            "family": self.family.to_dict(),
            "grid": self.grid.to_dict(),
            "corpus": self.corpus.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "spatial": self.spatial.to_dict(),
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"kind", "space", "p", "q", "family", "grid", "corpus", "optimizer", "spatial", "params"}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config fields: {sorted(extra)}")
        kw = {}
        if "kind" in d:
            kw["kind"] = d["kind"]
        if "space" in d:
            kw["space"] = Space.from_dict(d["space"])
        for key in ("p", "q"):
            if key in d:
                kw[key] = float(d[key])
        if "family" in d:
            kw["family"] = KernelFamily.parse(d["family"])
        if "grid" in d:
            kw["grid"] = ScaleGrid.from_dict(d["grid"])
        if "corpus" in d:
            c = dict(d["corpus"])
            c["functions"] = tuple(c.get("functions", ()))
            kw["corpus"] = CorpusSpec(**c)
        if "optimizer" in d:
            kw["optimizer"] = OptimizerSpec(**d["optimizer"])
        if "spatial" in d:
            kw["spatial"] = SpatialSpec(**d["spatial"])
        if "params" in d:
            kw["params"] = dict(d["params"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise DomainError(str(exc)) from exc


def experiment_id(config: ExperimentConfig, tag: str = "") -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True) + tag
    return f"{config.kind}-{hashlib.sha256(blob.encode()).hexdigest()[:10]}"


# ---------------------------------------------------------------------------
# report rows

@dataclass(frozen=True)
class ReportRow:
    """One line of a report; ``diagnostic`` pairs the estimate with its tolerances."""

    experiment_id: str
    kind: str
    space: str
    dim: int
    p: float
    q: float
    family: str
    estimate: float
    diagnostic: dict
    seed: int
    config: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.diagnostic.get("pass", True))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ReportRow":
        return cls(**d)

    def csv_fields(self) -> list[str]:
        return [self.experiment_id, self.kind, self.space, str(self.dim), _num(self.p), _num(self.q),
                self.family, _num(self.estimate), _diag(self.diagnostic), str(self.seed)]


def _num(v) -> str:
    return repr(float(v))


def _diag(d: dict) -> str:
    parts = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, float):
            v = repr(v)
        elif isinstance(v, (list, tuple, dict)):
            v = json.dumps(v, sort_keys=True, separators=(",", ":"))
        parts.append(f"{k}={v}")
    return ";".join(parts)


def _row(config: ExperimentConfig, estimate: float, diagnostic: dict, seed: int, tag: str = "",
         family: str | None = None, results: dict | None = None) -> ReportRow:
    return ReportRow(
        experiment_id=experiment_id(config, tag),
        kind=config.kind,
        space=config.space.label,
        dim=config.space.dim,
        p=float(config.p),
        q=float(config.q),
        family=family if family is not None else config.family.label,
        estimate=float(estimate),
        diagnostic=_plain(diagnostic),
        seed=int(seed),
        config=config.to_dict(),
        results=_plain(results or {}),
    )


def _plain(obj):
    """numpy scalars and tuples to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def emit(rows, path, fmt: str = "csv") -> Path:
    """Write rows as CSV or as structured JSON; byte-deterministic."""
    rows = list(rows)
    if not rows:
        raise DomainError("nothing to emit")
    text = dumps(rows, fmt)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def dumps(rows, fmt: str = "csv") -> str:
    rows = list(rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()
    if fmt in ("json", "structured"):
        return json.dumps({"rows": [r.to_dict() for r in rows]}, sort_keys=True, indent=2) + "\n"
    raise DomainError(f"unknown report format {fmt!r}")


def load_rows(path) -> list[ReportRow]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [ReportRow.from_dict(d) for d in data["rows"]]


def emit_plot(pairs, path) -> Path:
    """Two-column TSV (axis value, estimate)."""
    path = Path(path)
    lines = [f"{_num(a)}\t{_num(b)}" for a, b in pairs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# the field quantity

def spatial_points(f: StepFunction, grid: ScaleGrid, spatial: SpatialSpec, refine: int = 1) -> tuple[np.ndarray, float]:
    """Midpoint sample points and their spacing."""
    lo = f.breakpoints[0] - spatial.tail * grid.t_max
    hi = f.breakpoints[-1] + spatial.tail * grid.t_max
    unit = math.sqrt(grid.t_min * grid.t_max)
    count = max(1, math.ceil(round(spatial.points_per_unit * (hi - lo) / unit, 9))) * refine
    h = (hi - lo) / count
    return lo + (np.arange(count) + 0.5) * h, h


def _field_once(f, family, grid, q, p, spatial, refine=1) -> float:
    xs, h = spatial_points(f, grid, spatial, refine)
    vals = ops.apply(family, f, grid.scales, xs)          # (T, X, n)
    v = vq_values(np.swapaxes(vals, 0, 1), q, f.space.norms)
    if math.isinf(p):
        return float(v.max())
    return float((h * np.sum(v ** p)) ** (1.0 / p))


@dataclass(frozen=True)
class FieldValue:
    value: float
    refined: float | None
    gap: float | None
    points: int


def field_vq(f: StepFunction, family, grid: ScaleGrid, q: float, p: float,
             spatial: SpatialSpec = SpatialSpec(), check: bool = True) -> FieldValue:
    """|| V_q(T_t f(x) : t in grid) ||_{L^p(dx)} with its Richardson diagnostic.

    The value is taken on the spatial grid of ``spatial``; with ``check``
    the computation is repeated at half the spacing and a relative
    disagreement above ``spatial.gate`` raises :class:`ResolutionError`.
    """
    family = KernelFamily.parse(family)
    if not p > 1:
        raise DomainError(f"p must be > 1, got {p!r}")
    if not np.any(f.values):
        return FieldValue(0.0, 0.0 if check else None, 0.0 if check else None, 0)
    xs, _ = spatial_points(f, grid, spatial)
    value = _field_once(f, family, grid, q, p, spatial)
    if not check:
        return FieldValue(value, None, None, xs.size)
    fine = _field_once(f, family, grid, q, p, spatial, refine=2)
    gap = abs(fine - value) / max(abs(fine), abs(value), 1e-300)
    if gap > spatial.gate:
        raise ResolutionError(f"spatial grid h vs h/2 disagree by {gap:.3%} (gate {spatial.gate:.1%})",
                              coarse=value, fine=fine)
    return FieldValue(value, fine, gap, xs.size)


def field_vq_lp(f: StepFunction, family, grid: ScaleGrid, q: float, p: float,
                spatial: SpatialSpec = SpatialSpec(), check: bool = True) -> float:
    """Discrete || V_q(T_t f : t in grid) ||_{L^p}; see :func:`field_vq`."""
    return field_vq(f, family, grid, q, p, spatial, check).value


def single_increment_bound(f: StepFunction, family, grid: ScaleGrid, p: float,
                           spatial: SpatialSpec = SpatialSpec()) -> float:
    """|| T_{t_max} f - T_{t_min} f ||_{L^p} / ||f||_p on the same spatial grid."""
    norm = ops.lp_norm(f, p)
    if norm == 0.0:
        return 0.0
    xs, h = spatial_points(f, grid, spatial)
    vals = ops.apply(family, f, [grid.t_min, grid.t_max], xs)
    d = f.space.norms(vals[1] - vals[0])
    if math.isinf(p):
        return float(d.max()) / norm
    return float((h * np.sum(d ** p)) ** (1.0 / p)) / norm


# ---------------------------------------------------------------------------
# constant estimation

def _ratio(f, config: ExperimentConfig, check=False) -> float:
    norm = ops.lp_norm(f, config.p)
    if norm == 0.0:
        return 0.0
    return field_vq_lp(f, config.family, config.grid, config.q, config.p, config.spatial, check) / norm


def _moves(f: StepFunction, step_x: float, step_v: float):
    """Coordinate perturbations: every breakpoint, then every value entry."""
    for i in range(f.breakpoints.size):
        yield ("x", i, step_x)
    for i in range(f.K):
        for j in range(f.space.dim):
            yield ("v", (i, j), step_v)


def _perturb(f: StepFunction, move, sign: float) -> StepFunction | None:
    kind, idx, step = move
    if kind == "x":
        bp = f.breakpoints.copy()
        bp[idx] += sign * step
        if np.any(np.diff(bp) <= 0):
            return None
        return StepFunction(bp, f.values, f.space)
    vals = f.values.copy()
    vals[idx] += sign * step
    return StepFunction(f.breakpoints, vals, f.space)


def hill_climb(f0: StepFunction, score, iterations: int, step: float):
    """Coordinate ascent with relative steps; returns (best f, best score, trace, evaluations).

    Breakpoint moves are ``step`` times the initial support length and
    value moves ``step`` times the initial largest |value|, so the search
    commutes with scaling and dilation of f.  Each coordinate tries both
    directions and keeps the better one.  The step halves after a full
    pass over the coordinates without improvement.
    """
    best, best_score = f0, score(f0)
    trace = [best_score]
    length = f0.breakpoints[-1] - f0.breakpoints[0]
    vmax = float(np.abs(f0.values).max())
    rel = step
    used = 0
    while used < iterations and rel > 1e-9:
        improved = False
        for move in _moves(best, rel * length, rel * vmax):
            # score both directions so that negating f does not change the path
            top, top_score = None, best_score * (1.0 + 1e-12)
            for sign in (1.0, -1.0):
                if used >= iterations:
                    break
                cand = _perturb(best, move, sign)
                used += 1
                if cand is None:
                    continue
                s = score(cand)
                if s > top_score:
                    top, top_score = cand, s
            if top is not None:
                best, best_score = top, top_score
                trace.append(top_score)
                improved = True
            if used >= iterations:
                break
        if not improved:
            rel *= 0.5
    return best, best_score, trace, used


def estimate_constant(config: ExperimentConfig) -> ReportRow:
    """Best ratio || V_q(T_t f) ||_p / ||f||_p over a seeded corpus plus hill climbing.

    The corpus is scored first, ``optimizer.restarts`` extra random
    candidates (drawn with the optimizer seed, same generator settings) are
    added, and the best candidate is refined by :func:`hill_climb`.  The
    winner is re-evaluated with the Richardson check.
    """
    corpus = config.corpus.build(config.space)
    if not any(np.any(f.values) for f in corpus):
        raise DegenerateInputError("corpus contains only zero functions")
    rng = np.random.default_rng(config.optimizer.seed)
    extra = [config.corpus.transform(StepFunction.random(rng, config.space, config.corpus.max_intervals,
                                                         config.corpus.amplitude))
             for _ in range(config.optimizer.restarts)]
    pool = [f for f in corpus + extra if np.any(f.values)]

    def score(f):
        return _ratio(f, config)

    scores = [score(f) for f in pool]
    start = int(np.argmax(scores))
    best, best_score, trace, used = hill_climb(pool[start], score, config.optimizer.iterations,
                                               config.optimizer.step)
    fv = field_vq(best, config.family, config.grid, config.q, config.p, config.spatial, check=True)
    norm = ops.lp_norm(best, config.p)
    lower = max(single_increment_bound(f, config.family, config.grid, config.p, config.spatial) for f in corpus)
    diagnostic = {
        "richardson_gap": fv.gap,
        "gate": config.spatial.gate,
        "points": fv.points,
        "evaluations": len(pool) + used,
        "iterations_used": used,
        "single_increment_bound": lower,
        "grid_slack": best_score - lower,
        "label": "lower-bound estimate",
    }
    results = {"best_f": best.to_dict(), "trace": trace, "corpus_scores": scores,
               "refined_ratio": (fv.refined / norm) if fv.refined is not None else None}
    return _row(config, best_score, diagnostic, config.corpus.seed, results=results)


# ---------------------------------------------------------------------------
# sweeps

def _nested_grid(grid: ScaleGrid, level: int) -> ScaleGrid:
    g = grid.spec["geometric"] if grid.spec and "geometric" in grid.spec else None
    if g is None:
        raise DomainError("grid refinement needs a geometric scale grid")
    count = (int(g["count"]) - 1) * 2 ** level + 1
    return ScaleGrid.geometric(float(g["min"]), float(g["max"]), count)


def _axis_config(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "q":
        return config.replace(q=float(value))
    if axis == "dim":
        return config.replace(space=Space(int(value), config.space.norm))
    if axis == "grid":
        return config.replace(grid=_nested_grid(config.grid, int(value)))
    raise DomainError(f"unknown sweep axis {axis!r}")


def sweep(config: ExperimentConfig, axis: str, values, fixed: StepFunction | None = None) -> list[ReportRow]:
    """Repeat :func:`estimate_constant` along an axis, plus a fixed-f curve.

    Axes: ``q`` (a list of exponents), ``dim`` (a list of dimensions; the
    corpus is drawn scalar and embedded in the first coordinate) and
    ``grid`` (refinement levels of a geometric grid; level L has
    (count - 1) 2^L + 1 nested scales).  The fixed-f curve evaluates
    ``fixed`` (default the indicator of [0, 1]) with the same settings.
    """
    values = list(values)
    if not values:
        raise DomainError("sweep axis is empty")
    fixed = fixed or StepFunction.indicator(0.0, 1.0)
    rows, curve = [], []
    if axis == "dim":
        # search once among scalars, then measure the embedded winner in each X
        scalar_space = Space(1, config.space.norm)
        scalar_est = estimate_constant(config.replace(kind="estimate", space=scalar_space))
        scalar_best = StepFunction.from_dict(scalar_est.results["best_f"], scalar_space)
    for v in values:
        cfg = _axis_config(config, axis, v).replace(kind="sweep")
        if axis == "dim":
            est = scalar_est
            best = scalar_best.embedded(cfg.space)
            fb = field_vq(best, cfg.family, cfg.grid, cfg.q, cfg.p, cfg.spatial)
            est = dataclasses.replace(est, estimate=fb.value / ops.lp_norm(best, cfg.p))
            f_fixed = fixed.embedded(cfg.space) if fixed.space.dim == 1 else fixed
        else:
            est = estimate_constant(cfg.replace(kind="estimate"))
            f_fixed = fixed
        fv = field_vq(f_fixed, cfg.family, cfg.grid, cfg.q, cfg.p, cfg.spatial)
        ratio = fv.value / ops.lp_norm(f_fixed, cfg.p)
        curve.append((float(v), ratio))
        diag = dict(est.diagnostic, axis=axis, axis_value=float(v), fixed_f_ratio=ratio)
        rows.append(_row(cfg, est.estimate, diag, config.corpus.seed, tag=f"{axis}={v}", results=est.results))
    ests = [r.estimate for r in rows]
    fixed_vals = [c[1] for c in curve]
    mono = _monotone(axis, fixed_vals)
    for i, r in enumerate(rows):
        d = dict(r.diagnostic, fixed_curve_monotone=mono, estimates_monotone=_monotone(axis, ests))
        rows[i] = dataclasses.replace(r, diagnostic=_plain(d))
    return rows


def _monotone(axis: str, vals, rel: float = 1e-12) -> bool:
    pairs = list(zip(vals[:-1], vals[1:]))
    if axis == "q":
        return all(b <= a * (1 + rel) for a, b in pairs)
    if axis == "grid":
        return all(b >= a * (1 - rel) for a, b in pairs)
    return all(abs(b - a) <= rel * max(abs(a), abs(b), 1e-300) for a, b in pairs)


def fixed_curve(rows: list[ReportRow]) -> list[tuple[float, float]]:
    return [(r.diagnostic["axis_value"], r.diagnostic["fixed_f_ratio"]) for r in rows]


# ---------------------------------------------------------------------------
# identity suite

def _scalar_hilbert_average(f: StepFunction, eps: float, x: float, tamper: bool = False) -> np.ndarray:
    """P_eps(Hf)(x) by quadrature, via y = x + eps tan s on (-pi/2, pi/2).

    With s_j = arctan((x_j - x) / eps) and sum_j d_j = 0,

        Hf(x + eps tan s) = (1/pi) sum_j d_j (log|sin(s - s_j)| - log cos s_j),

    which avoids forming y - x_j by subtraction.  The s-axis is split at
    every s_j and each piece is smoothed at its ends; distances to the
    piece's own endpoints come straight from the smoothing parameter.
    With ``tamper`` the right half uses 2 eps: a deliberately wrong kernel.
    """
    out = np.zeros(f.space.dim)
    halves = ((-math.pi / 2, 0.0, eps), (0.0, math.pi / 2, 2 * eps if tamper else eps))
    for c in range(f.space.dim):
        d = f.jumps[:, c]
        if not np.any(d):
            continue
        total = 0.0
        for lo, hi, scale in halves:
            sj = [math.atan((xb - x) / scale) for xb in f.breakpoints]
            offs = [-math.log(math.cos(v)) for v in sj]
            pts = sorted({lo, hi, *(v for v in sj if lo < v < hi)})
            for a, b in zip(pts[:-1], pts[1:]):
                total += adaptive_simpson(_piece(a, b, sj, offs, d.tolist()), 0.0, 1.0, 1e-10)
        # one 1/pi from Hf, one from the Poisson measure ds / pi
        out[c] = total / math.pi ** 2
    return out


def _piece(a: float, b: float, sj, offs, d):
    w = b - a

    def g(u: float) -> float:
        jac = 6.0 * u * (1.0 - u)
        if jac == 0.0:
            return 0.0
        phi = u * u * (3.0 - 2.0 * u)
        psi = (1.0 - u) * (1.0 - u) * (1.0 + 2.0 * u)
        s = a + w * phi
        acc = 0.0
        for sv, off, dv in zip(sj, offs, d):
            if sv == a:
                delta = w * phi
            elif sv == b:
                delta = -w * psi
            else:
                delta = s - sv
            acc += dv * (math.log(abs(math.sin(delta))) + off)
        return acc * w * jac

    return g


def _weight(y: float) -> float:
    return 2.0 * y / (1.0 + y * y) ** 2


def weight_mass() -> float:
    """int_0^inf 2y/(1+y^2)^2 dy by cutoff doubling."""
    value, _, _ = integrate_to_infinity(_weight, 0.0, 1.0, 1e-13)
    return value


def _hilbert_average(f: StepFunction, eps: float, x: float) -> np.ndarray:
    """int_0^inf H_{eps y} f(x) w(y) dy with w = 2y/(1+y^2)^2.

    The integrand vanishes once eps y exceeds every |x - x_j|; kinks sit at
    y_j = |x - x_j| / eps.
    """
    kinks = sorted(abs(x - xb) / eps for xb in f.breakpoints)
    out = np.zeros(f.space.dim)
    for c in range(f.space.dim):
        d = f.jumps[:, c]
        if not np.any(d):
            continue
        dist = np.abs(x - f.breakpoints)

        def g(y):
            return float(np.log(np.maximum(dist, eps * y)) @ d) / math.pi * _weight(y)

        value, _, _ = integrate_to_infinity(g, 0.0, kinks[-1], 1e-12, breaks=kinks)
        out[c] = value
    return out


def _variational_average(f: StepFunction, x: float, scales: np.ndarray, q: float) -> tuple[float, float]:
    """(V_q(Q_t f(x) : t), int_0^inf V_q(H_{ty} f(x) : t) w(y) dy) over the given scales."""
    qv = ops.apply(ops.CONJUGATE_POISSON, f, scales, [x])[:, 0, :]
    lhs = float(vq_values(qv[None], q, f.space.norms)[0])
    dist = np.abs(x - f.breakpoints)
    kinks = sorted({float(dd / t) for dd in dist for t in scales})

    def g(y):
        path = (np.log(np.maximum(dist[None, :], scales[:, None] * y)) @ f.jumps) / math.pi
        return float(vq_values(path[None], q, f.space.norms)[0]) * _weight(y)

    rhs, _, _ = integrate_to_infinity(g, 0.0, kinks[-1], 1e-11, breaks=kinks)
    return lhs, rhs


def identity_residuals(f: StepFunction, eps: float, x: float, tamper: bool = False) -> dict:
    """Residuals of the three pointwise identities at one (f, eps, x)."""
    norms = f.space.norms
    q_exact = ops.eval(ops.CONJUGATE_POISSON, f, eps, x).coords
    return {
        "conjugate-poisson": float(norms(q_exact - _scalar_hilbert_average(f, eps, x, tamper))),
        "decomposition": ops.decomposition_residual(f, eps, x),
        "poisson-average": float(norms(q_exact - _hilbert_average(f, eps, x))),
    }


def _triples(seed: int, count: int, space: Space):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        f = StepFunction.random(rng, space, 4)
        eps = float(np.exp(rng.uniform(math.log(0.1), math.log(2.0))))
        lo, hi = f.support
        x = float(rng.uniform(lo - 1.0, hi + 1.0))
        while np.min(np.abs(x - f.breakpoints)) < 1e-3:
            x = float(rng.uniform(lo - 1.0, hi + 1.0))
        out.append((f, eps, x))
    return out


def identity_suite(seed: int = 0, tamper: bool = False, count: int = 100,
                   space: Space = Space(2), variational_count: int | None = None) -> list[ReportRow]:
    """Run every identity on ``count`` seeded (f, eps, x) triples.

    Rows: the conjugate Poisson identity, the H_eps - Q_eps decomposition,
    the Poisson averaging identity with its weight mass, the pointwise
    variational comparison, the kernel hypothesis checks, and a negative
    control that must fail.  With ``tamper`` the conjugate Poisson row runs
    on the corrupted kernel and is expected to fail.
    """
    config = ExperimentConfig(kind="identities", space=space, q=2.0, p=2.0)
    triples = _triples(seed, count, space)
    worst = {k: 0.0 for k in ("conjugate-poisson", "decomposition", "poisson-average")}
    for f, eps, x in triples:
        for k, v in identity_residuals(f, eps, x, tamper).items():
            worst[k] = max(worst[k], v)
    rows = []
    for k, v in worst.items():
        tol = IDENTITY_TOL[k]
        rows.append(_row(config, v, {"tolerance": tol, "pass": v <= tol, "count": count,
                                     "tampered": tamper and k == "conjugate-poisson"},
                         seed, tag=k, family=k))
    mass = weight_mass()
    rows.append(_row(config, abs(mass - 1.0), {"tolerance": IDENTITY_TOL["weight-mass"],
                                               "pass": abs(mass - 1.0) <= IDENTITY_TOL["weight-mass"],
                                               "mass": mass}, seed, tag="weight-mass", family="weight-mass"))

    vcount = count if variational_count is None else variational_count
    q = 2.5
    scales = ScaleGrid.geometric(0.1, 4.0, 9).scales
    worst_v, margin = 0.0, math.inf
    for f, _, x in triples[:vcount]:
        lhs, rhs = _variational_average(f, x, scales, q)
        worst_v = max(worst_v, lhs - rhs)
        margin = min(margin, rhs - lhs)
    tol = IDENTITY_TOL["variational-average"]
    rows.append(_row(config.replace(q=q), worst_v, {"tolerance": tol, "pass": worst_v <= tol, "count": vcount,
                                                    "min_margin": margin},
                     seed, tag="variational-average", family="variational-average"))

    checks = {name: ops.kernel_hypothesis_check(name) for name in ops.PROFILES}
    hilbert = ops.ProfileKernel("OneOverX", lambda y: 1.0 / (math.pi * y), lambda y: -1.0 / (math.pi * y * y),
                                (1.0, math.inf))
    bad = ops.kernel_hypothesis_check(hilbert)
    ok = all(c.passes for c in checks.values()) and not bad.passes
    rows.append(_row(config, float(max(c.integral for c in checks.values())),
                     {"pass": ok, **{f"{n}_passes": c.passes for n, c in checks.items()},
                      **{f"{n}_integral": c.integral for n, c in checks.items()},
                      "OneOverX_passes": bad.passes, "OneOverX_note": bad.note},
                     seed, tag="kernel-hypotheses", family="kernel-hypotheses"))

    # negative control: the corrupted kernel must be detected
    ctl = max(identity_residuals(f, eps, x, tamper=True)["conjugate-poisson"] for f, eps, x in triples[:10])
    tol = IDENTITY_TOL["conjugate-poisson"]
    rows.append(_row(config, ctl, {"tolerance": tol, "pass": ctl > tol, "expect": "fail"},
                     seed, tag="negative-control", family="negative-control"))
    return rows


# ---------------------------------------------------------------------------
# martingale and transference rows

def cotype_row(space: Space, m: int, q: float, martingale: str = "witness", seed: int = 0) -> ReportRow:
    """Cotype ratio of the l^inf witness or of a seeded random martingale."""
    if martingale == "witness":
        if not space.norm.is_inf:
            raise DomainError("the witness martingale lives in l^inf")
        M = witness_linfty(space.dim, m)
    elif martingale == "random":
        M = random_martingale(seed, space, m)
    else:
        raise DomainError(f"unknown martingale {martingale!r}")
    r = cotype_ratio(M, q)
    config = ExperimentConfig(kind="cotype", space=space, q=float(q), params={"m": m, "martingale": martingale})
    return _row(config, r.ratio, {"numerator": r.numerator, "denominator": r.denominator}, seed,
                family=martingale)


def transfer_row(M: WalshMartingale, q: float, eps: float, fejer: int, seed: int = 0) -> ReportRow:
    rep = cotype_chain_report(M, q, eps, fejer, seed=seed)
    config = ExperimentConfig(kind="transfer", space=M.space, q=float(q),
                              params={"m": M.m, "eps": eps, "fejer": fejer})
    ok = all(ln.holds for ln in rep.links)
    diag = {"pass": ok, "max_richardson_gap": rep.max_gap, "telescoping_max": max(rep.telescoping),
            "telescoping_bound": 3 * eps, "certificate_holds": rep.certificate.holds()}
    return _row(config, rep.link("end-to-end").ratio, diag, seed, family="transfer", results=rep.to_dict())
