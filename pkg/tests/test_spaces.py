import math

import numpy as np
import pytest

from varq.errors import DomainError, SpaceMismatchError
from varq.spaces import INF, NormKind, Point, Space, as_values, axpy, norm


def test_norm_examples():
    assert norm(Point([3.0, 4.0], Space.lr(2, 2))) == 5.0
    assert norm(Point([1.0, -2.0], Space.lr(2, INF))) == 2.0
    assert norm(Point([1.0, -2.0, 3.0], Space.lr(3, 1))) == 6.0


def test_generic_r_matches_definition():
    v = np.array([0.3, -1.2, 2.5])
    sp = Space.lr(3, 3.5)
    assert norm(Point(v, sp)) == pytest.approx(np.sum(np.abs(v) ** 3.5) ** (1 / 3.5), rel=1e-14)


def test_large_r_does_not_overflow():
    sp = Space.lr(2, 400.0)
    assert norm(Point([1e300, 1e300], sp)) == pytest.approx(1e300 * 2 ** (1 / 400), rel=1e-12)


def test_axpy_examples():
    sp = Space.lr(2, 2)
    v, w = Point([1.0, 0.0], sp), Point([0.0, 1.0], sp)
    assert axpy(0.0, v, w) == w
    assert axpy(1.0, v, w) == Point([1.0, 1.0], sp)
    assert axpy(-1.0, v, v) == sp.zero()


def test_mismatch_is_an_error():
    with pytest.raises(SpaceMismatchError):
        axpy(1.0, Point([1.0, 0.0], Space.lr(2, 2)), Point([1.0, 0.0], Space.lr(2, 1)))
    with pytest.raises(SpaceMismatchError):
        Point([1.0, 0.0], Space.lr(2, 2)) + Point([1.0, 0.0, 0.0], Space.lr(3, 2))
    with pytest.raises(SpaceMismatchError):
        Space.lr(2, 2).norms(np.zeros((4, 3)))


def test_validation():
    with pytest.raises(DomainError):
        NormKind(0.5)
    with pytest.raises(DomainError):
        Space(0)
    with pytest.raises(ValueError):
        Point([float("nan"), 1.0], Space(2))
    with pytest.raises(SpaceMismatchError):
        Point([1.0], Space(2))


def test_points_are_immutable():
    p = Point([1.0, 2.0], Space(2))
    with pytest.raises((AttributeError, ValueError)):
        p.coords[0] = 3.0
    with pytest.raises(AttributeError):
        p.space = Space(3)


@pytest.mark.parametrize("r", [1.0, 2.0, 3.0, INF])
def test_triangle_and_homogeneity(rng, r):
    sp = Space.lr(5, r)
    v = rng.normal(size=(1000, 5))
    w = rng.normal(size=(1000, 5))
    nv, nw = sp.norms(v), sp.norms(w)
    assert np.all(sp.norms(v + w) <= nv + nw + 1e-12 * (nv + nw))
    alpha = rng.normal(size=(1000, 1))
    assert np.allclose(sp.norms(alpha * v), np.abs(alpha[:, 0]) * nv, rtol=1e-12, atol=0)


def test_monotone_in_r(rng):
    v = rng.normal(size=(500, 4))
    rs = [1.0, 1.5, 2.0, 3.0, 7.0, INF]
    vals = [Space.lr(4, r).norms(v) for r in rs]
    for a, b in zip(vals[:-1], vals[1:]):
        assert np.all(b <= a * (1 + 1e-14))


@pytest.mark.parametrize("desc", [{"dim": 3, "norm": "l2"}, {"dim": 1, "norm": "l1"},
                                  {"dim": 4, "norm": "linf"}, {"dim": 2, "norm": {"lr": 3.0}}])
def test_descriptor_round_trip(desc):
    sp = Space.from_dict(desc)
    assert sp.to_dict() == desc
    assert Space.from_dict(sp.to_dict()) == sp


def test_bad_descriptor():
    with pytest.raises(DomainError):
        Space.from_dict({"dim": 2, "norm": "l7x"})


def test_as_values_is_read_only():
    arr = as_values([[1.0, 2.0]], Space(2))
    assert arr.shape == (1, 2)
    with pytest.raises(ValueError):
        arr[0, 0] = 5.0
    assert as_values([Point([1.0, 2.0], Space(2))], Space(2)).tolist() == [[1.0, 2.0]]
    assert math.isinf(INF)
