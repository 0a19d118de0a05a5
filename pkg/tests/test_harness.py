import json
import math

import numpy as np
import pytest
from scipy import integrate

from varq import harness as hz
from varq import operators as op
from varq.errors import DomainError, ResolutionError
from varq.spaces import INF, Space

SMALL_GRID = op.ScaleGrid.geometric(2.0 ** -3, 2.0 ** 3, 9)


def small_config(**kw):
    base = dict(q=3.0, p=2.0, family=op.AVERAGE, grid=SMALL_GRID,
                corpus=hz.CorpusSpec(count=3, seed=1), optimizer=hz.OptimizerSpec(restarts=2, iterations=12),
                spatial=hz.SpatialSpec(points_per_unit=32))
    base.update(kw)
    return hz.ExperimentConfig(**base)


def test_zero_function_field():
    zero = op.StepFunction([0.0, 1.0], [[0.0]])
    assert hz.field_vq_lp(zero, op.POISSON, SMALL_GRID, 2, 2) == 0.0


def test_single_scale_gives_zero():
    one = op.StepFunction.indicator(0.0, 1.0)
    assert hz.field_vq_lp(one, op.AVERAGE, op.ScaleGrid([0.5]), 2, 2, check=False) == 0.0


def test_two_scales_match_closed_form_difference():
    one = op.StepFunction.indicator(0.0, 1.0)
    t1, t2 = 0.25, 2.0
    grid = op.ScaleGrid([t1, t2])

    def avg(t, x):
        # |[x - t, x + t] cap [0, 1]| / 2t
        return max(0.0, min(x + t, 1.0) - max(x - t, 0.0)) / (2 * t)

    kinks = sorted({s * t + c for t in (t1, t2) for s in (-1, 1) for c in (0.0, 1.0)})
    ref = math.sqrt(integrate.quad(lambda x: (avg(t2, x) - avg(t1, x)) ** 2, -3.0, 4.0, points=kinks,
                                   epsabs=1e-13, limit=200)[0])
    val = hz.field_vq(one, op.AVERAGE, grid, 2.0, 2.0, hz.SpatialSpec(points_per_unit=256))
    assert val.value == pytest.approx(ref, rel=1e-4)
    assert val.gap <= 0.01


def test_refinement_never_decreases():
    rng = np.random.default_rng(2)
    f = op.StepFunction.random(rng, Space.lr(2, 1))
    sp = hz.SpatialSpec(points_per_unit=16)
    vals = [hz.field_vq_lp(f, op.POISSON, hz._nested_grid(SMALL_GRID, L), 2.5, 2.0, sp, check=False)
            for L in range(4)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(vals[:-1], vals[1:]))


def test_resolution_gate():
    f = op.StepFunction.indicator(0.0, 1.0)
    with pytest.raises(ResolutionError):
        hz.field_vq(f, op.TRUNCATED_HILBERT, SMALL_GRID, 2.0, 2.0, hz.SpatialSpec(points_per_unit=1, gate=1e-6))


def test_estimate_single_candidate_equals_field_value():
    one = op.StepFunction.indicator(0.0, 1.0)
    cfg = small_config(corpus=hz.CorpusSpec(functions=(one,)), optimizer=hz.OptimizerSpec(restarts=0, iterations=0))
    row = hz.estimate_constant(cfg)
    assert row.estimate == hz.field_vq_lp(one, op.AVERAGE, SMALL_GRID, 3.0, 2.0, cfg.spatial, check=False)
    assert row.diagnostic["label"] == "lower-bound estimate"


def test_hill_climb_never_gets_worse():
    cfg = small_config()
    row = hz.estimate_constant(cfg)
    assert row.estimate >= max(row.results["corpus_scores"])
    assert row.estimate >= row.diagnostic["single_increment_bound"] - 1e-12


def test_estimate_invariances():
    cfg = small_config()
    base = hz.estimate_constant(cfg).estimate
    scaled = hz.estimate_constant(cfg.replace(corpus=hz.CorpusSpec(count=3, seed=1, scale=-2.5))).estimate
    assert scaled == pytest.approx(base, rel=1e-10)
    dil = cfg.replace(corpus=hz.CorpusSpec(count=3, seed=1, dilation=4.0), grid=SMALL_GRID.dilated(0.25))
    assert hz.estimate_constant(dil).estimate == pytest.approx(base, rel=1e-10)


def test_sweeps():
    cfg = small_config(optimizer=hz.OptimizerSpec(restarts=1, iterations=4))
    rows = hz.sweep(cfg, "q", [2.0, 2.5, 3.0, 4.0])
    curve = [v for _, v in hz.fixed_curve(rows)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(curve[:-1], curve[1:]))
    assert rows[0].diagnostic["fixed_curve_monotone"]
    rows = hz.sweep(cfg.replace(space=Space.lr(1, INF)), "dim", [1, 2, 4])
    ests = [r.estimate for r in rows]
    assert max(ests) - min(ests) <= 1e-12 * max(ests)
    rows = hz.sweep(cfg, "grid", [0, 1, 2])
    assert [len(hz._nested_grid(SMALL_GRID, L)) for L in (0, 1, 2)] == [9, 17, 33]
    assert rows[0].diagnostic["fixed_curve_monotone"]
    with pytest.raises(DomainError):
        hz.sweep(cfg, "p", [2.0])


def test_emit_formats(tmp_path):
    row = hz.cotype_row(Space.lr(4, INF), 4, 2.0)
    text = hz.dumps([row], "csv")
    assert len(text.strip().splitlines()) == 2
    assert text.splitlines()[0].split(",") == list(hz.CSV_COLUMNS)
    a = hz.emit([row], tmp_path / "a.json", "json")
    b = hz.emit([row], tmp_path / "b.json", "json")
    assert a.read_bytes() == b.read_bytes()
    back = hz.load_rows(a)
    assert back == [hz.ReportRow.from_dict(json.loads(json.dumps(row.to_dict())))]
    assert back[0].estimate == 4.0


def test_config_round_trip_and_validation():
    cfg = small_config(family=op.doubly_truncated(2.0))
    again = hz.ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
    assert hz.experiment_id(again) == hz.experiment_id(cfg)
    with pytest.raises(DomainError):
        small_config(q=1.5)
    with pytest.raises(DomainError):
        small_config(p=1.0)
    with pytest.raises(DomainError):
        hz.ExperimentConfig.from_dict({"bogus": 1})
    assert hz.ExperimentConfig(kind="variation", q=1.0).q == 1.0


def test_identity_residuals_zero_function():
    zero = op.StepFunction([0.0, 1.0], [[0.0, 0.0]], Space(2))
    assert all(v == 0.0 for v in hz.identity_residuals(zero, 0.5, 0.3).values())


def test_identity_residuals_small_and_tamper_detected():
    f = op.StepFunction([-1.0, 0.0, 1.5], [[1.0], [-0.5]])
    res = hz.identity_residuals(f, 0.4, 0.2)
    assert res["conjugate-poisson"] <= 1e-6 and res["poisson-average"] <= 1e-6
    assert res["decomposition"] <= 1e-10
    assert hz.identity_residuals(f, 0.4, 0.2, tamper=True)["conjugate-poisson"] > 1e-3
    assert hz.weight_mass() == pytest.approx(1.0, abs=1e-10)


def test_cotype_rows():
    assert hz.cotype_row(Space.lr(8, INF), 8, 2.0).estimate == 8.0
    assert hz.cotype_row(Space.lr(3, 2), 5, 2.0, "random", 1).estimate == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        hz.cotype_row(Space.lr(3, 2), 2, 2.0)
