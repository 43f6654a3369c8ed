import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxlab.geometry import (BackendMismatchError, Euclidean, Hyperboloid, LInfPlane, ParameterRangeError,
                              SampleSpec, Spider, combine, dist, minkowski, quasilin, space_from_dict,
                              validate_busemann, validate_cat0, validate_geodesic, validate_quasilinearization)

E2, H2, S3 = Euclidean(2), Hyperboloid(2), Spider(3)


def test_distance_examples():
    assert dist(E2, np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0
    assert dist(S3, (1, 2.0), (2, 3.0)) == 5.0
    assert dist(S3, (1, 2.0), (1, 3.5)) == 1.5
    y = H2.point([math.cosh(1), math.sinh(1), 0.0])
    assert dist(H2, H2.origin(), y) == pytest.approx(1.0, abs=1e-14)


def test_hyperboloid_short_distances_are_accurate():
    # acosh near 1 loses about half the digits; the chordal form does not
    x = H2.origin()
    for d in (1e-12, 1e-8, 1e-4):
        y = H2.from_spatial([math.sinh(d), 0.0])
        assert H2.dist(x, y) == pytest.approx(d, rel=1e-9)


def test_combine_examples():
    mid = combine(E2, np.array([0.0, 0.0]), np.array([2.0, 0.0]), 0.5)
    assert np.array_equal(mid, [1.0, 0.0])
    assert combine(S3, (1, 2.0), (2, 2.0), 0.5) == (0, 0.0)
    y = H2.point([math.cosh(1), math.sinh(1), 0.0])
    h = combine(H2, H2.origin(), y, 0.5)
    assert np.allclose(h, [math.cosh(0.5), math.sinh(0.5), 0.0], atol=1e-14)


def test_combine_hyperboloid_against_arc_length_bisection():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = H2.sample(rng, H2.origin(), 2.0)
        y = H2.sample(rng, H2.origin(), 2.0)
        t = rng.uniform()
        z = H2.combine(x, y, t)
        # oracle: bisection on the parameter of the unnormalized chord projected to the sheet
        lo, hi = 0.0, 1.0
        for _ in range(80):
            s = 0.5 * (lo + hi)
            w = (1 - s) * x + s * y
            w = w / math.sqrt(-minkowski(w, w))
            if H2.dist(x, w) < t * H2.dist(x, y):
                lo = s
            else:
                hi = s
        assert H2.dist(z, w) < 1e-9


def test_combine_endpoints_exact_and_range_checked():
    x, y = np.array([0.1, 0.2]), np.array([-3.0, 7.0])
    assert np.array_equal(E2.combine(x, y, 0), x) and np.array_equal(E2.combine(x, y, 1), y)
    assert S3.combine((1, 2.0), (2, 1.0), 1) == (2, 1.0)
    with pytest.raises(ParameterRangeError):
        E2.combine(x, y, 1.5)
    with pytest.raises(ParameterRangeError):
        S3.combine((1, 2.0), (2, 1.0), -0.1)


def test_backend_mismatch():
    with pytest.raises(BackendMismatchError):
        E2.dist(np.zeros(2), np.zeros(3))
    with pytest.raises(BackendMismatchError):
        H2.point([1.0, 1.0, 0.0])
    with pytest.raises(BackendMismatchError):
        S3.point([3, 1.0])
    with pytest.raises(BackendMismatchError):
        S3.dist((0, 1.0), np.zeros(2))


def test_spider_hub_is_canonical():
    assert S3.point([2, 0.0]) == (0, 0.0)
    assert S3.combine((1, 1.0), (2, 1.0), 0.5) == (0, 0.0)
    assert S3.dist(S3.point([2, 0.0]), S3.point([1, 0.0])) == 0.0


def test_hyperboloid_stays_on_sheet():
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = H2.sample(rng, H2.origin(), 3.0)
        y = H2.sample(rng, x, 3.0)
        z = H2.combine(x, y, rng.uniform())
        for p in (x, y, z):
            assert abs(minkowski(p, p) + 1.0) <= 1e-12 * p[0] ** 2


def test_quasilin_examples():
    x, y, u, v = (np.array(p, dtype=float) for p in [(0, 0), (1, 0), (0, 1), (1, 2)])
    assert quasilin(E2, x, y, u, v) == pytest.approx(1.0)
    assert quasilin(E2, x, y, x, y) == pytest.approx(E2.dist(x, y) ** 2)
    assert quasilin(E2, y, x, u, v) == pytest.approx(-quasilin(E2, x, y, u, v))


def test_sampling_contract():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        E2.sample(rng, np.zeros(2), 0.0)
    c = np.array([0.5, -1.0])
    pts = [E2.sample(rng, c, 1e-6) for _ in range(100)]
    assert max(E2.dist(c, p) for p in pts) <= 1e-6
    a = E2.sample(np.random.default_rng(7), c, 1.0)
    b = E2.sample(np.random.default_rng(7), c, 1.0)
    assert np.array_equal(a, b)
    big = [E2.sample(rng, c, 2.0) for _ in range(10_000)]
    assert max(E2.dist(c, p) for p in big) <= 2.0
    for space, center in ((H2, H2.from_spatial([1.0, 2.0])), (S3, (2, 0.3))):
        assert max(space.dist(center, space.sample(rng, center, 1.5)) for _ in range(2000)) <= 1.5


@pytest.mark.parametrize("space", [Euclidean(2), Euclidean(5), Hyperboloid(2), Hyperboloid(3), Spider(3)])
def test_cat0_backends_clean(space):
    spec = SampleSpec(count=500, seed=11)
    reports = (validate_cat0(space, spec) + [validate_busemann(space, spec)] + validate_quasilinearization(space, spec)
               + validate_geodesic(space, spec))
    for r in reports:
        assert r.clean, r.summary()


def _four_point_slack(d, x, y, u, v):
    return d(x, u) ** 2 + d(y, v) ** 2 + d(x, y) ** 2 + d(u, v) ** 2 - d(x, v) ** 2 - d(y, u) ** 2


def test_linf_plane_violates_four_point():
    spec = SampleSpec(count=1000, seed=0)
    cat0, cs, four = validate_cat0(LInfPlane(2), spec)
    assert four.violations >= 1 and cat0.violations >= 1
    # the reported witness really is a violating quadruple
    x, y, u, v = (np.array(p) for p in four.witness[:4])
    assert _four_point_slack(LInfPlane(2).dist, x, y, u, v) == pytest.approx(four.worst_violation)
    assert four.worst_violation < 0
    assert validate_geodesic(LInfPlane(2), spec)[0].clean


def test_linf_four_point_violation_exists_on_grid():
    # oracle: exhaustive search over a coarse grid in the unit square
    d = lambda a, b: max(abs(a[0] - b[0]), abs(a[1] - b[1]))  # noqa: E731
    grid = [(i / 2, j / 2) for i in range(3) for j in range(3)]
    worst = min(_four_point_slack(d, *q) for q in itertools.product(grid, repeat=4))
    assert worst < 0


def test_busemann_degenerate_slack_is_zero():
    spec = SampleSpec(count=50, seed=2)
    r = validate_busemann(E2, spec)
    assert r.clean and r.worst_violation >= -1e-15


def test_space_from_dict_round_trip():
    for s in (E2, H2, S3, LInfPlane(2)):
        assert space_from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        space_from_dict({"kind": "sphere", "dim": 2})


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.floats(0, 1))
def test_hyperboloid_geodesic_parametrization(c, t):
    x, y = H2.from_spatial(c[:2]), H2.from_spatial(c[2:4])
    z = H2.combine(x, y, t)
    D = H2.dist(x, y)
    assert H2.dist(x, z) == pytest.approx(t * D, abs=1e-9 * (1 + D))
    assert H2.dist(z, y) == pytest.approx((1 - t) * D, abs=1e-9 * (1 + D))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.floats(0, 5)), min_size=3, max_size=3), st.floats(0, 1))
def test_spider_triangle_and_combine(pts, t):
    x, y, z = (S3.point(list(p)) for p in pts)
    assert S3.dist(x, z) <= S3.dist(x, y) + S3.dist(y, z) + 1e-12
    m = S3.combine(x, y, t)
    assert S3.dist(x, m) == pytest.approx(t * S3.dist(x, y), abs=1e-12)
