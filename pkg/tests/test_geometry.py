"""Tests for the elliptical forwarding-zone geometry.

Membership is cross-checked against an independently coded oracle that
performs the frame change with complex arithmetic instead of an explicit
rotation matrix.
"""

import cmath
import math
import random

import pytest

from petalant.geometry import (
    DegeneratePetal,
    PetalRegion,
    Point,
    build_petal,
    contains,
    distance,
    midpoint,
    petal_area,
    quadratic_form,
)


def oracle_quadratic(cx, cy, a, b, theta, px, py):
    """Independent rotated-frame evaluation using complex rotation."""
    local = complex(px - cx, py - cy) * cmath.exp(complex(0.0, -theta))
    return (local.real / a) ** 2 + (local.imag / b) ** 2


def oracle_contains(region, px, py):
    q = oracle_quadratic(
        region.center.x,
        region.center.y,
        region.semi_major,
        region.semi_minor,
        region.orientation,
        px,
        py,
    )
    return q <= 1.0


class TestDistance:
    def test_three_four_five(self):
        assert distance(Point(0, 0), Point(3, 4)) == 5.0

    def test_identical_points(self):
        assert distance(Point(7, -2), Point(7, -2)) == 0.0

    def test_long_diagonal(self):
        # sqrt(300^2 + 400^2) by hand
        assert distance(Point(100, 200), Point(400, 600)) == 500.0

    def test_symmetric_and_nonnegative(self):
        rng = random.Random(11)
        for _ in range(200):
            p = Point(rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3))
            q = Point(rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3))
            assert distance(p, q) == distance(q, p)
            assert distance(p, q) >= 0.0

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Point(float("nan"), 0.0)
        with pytest.raises(ValueError):
            Point(0.0, float("inf"))


class TestMidpoint:
    def test_basic(self):
        assert midpoint(Point(0, 0), Point(10, 20)) == Point(5, 10)

    def test_identity(self):
        assert midpoint(Point(3, -8), Point(3, -8)) == Point(3, -8)

    def test_symmetry_about_origin(self):
        assert midpoint(Point(-3, 4), Point(3, -4)) == Point(0, 0)


class TestBuildPetal:
    def test_horizontal(self):
        r = build_petal(Point(0, 0), Point(100, 0), width_ratio=0.5, margin=1.0)
        assert r.center == Point(50, 0)
        assert r.semi_major == 51.0
        assert r.semi_minor == 25.5
        assert r.orientation == 0.0

    def test_vertical_no_margin(self):
        r = build_petal(Point(0, 0), Point(0, 100), width_ratio=0.5, margin=0.0)
        assert r.orientation == pytest.approx(math.pi / 2)
        assert r.semi_major == 50.0
        assert r.semi_minor == 25.0

    def test_coincident_endpoints(self):
        with pytest.raises(DegeneratePetal):
            build_petal(Point(5, 5), Point(5, 5))

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            build_petal(Point(0, 0), Point(1, 0), width_ratio=0.0)
        with pytest.raises(ValueError):
            build_petal(Point(0, 0), Point(1, 0), width_ratio=1.5)
        with pytest.raises(ValueError):
            build_petal(Point(0, 0), Point(1, 0), margin=-1.0)

    def test_orientation_normalized(self):
        rng = random.Random(23)
        for _ in range(300):
            s = Point(rng.uniform(-500, 500), rng.uniform(-500, 500))
            d = Point(rng.uniform(-500, 500), rng.uniform(-500, 500))
            if s == d:
                continue
            r = build_petal(s, d)
            assert -math.pi < r.orientation <= math.pi

    def test_invalid_region_rejected(self):
        with pytest.raises(ValueError):
            PetalRegion(Point(0, 0), semi_major=1.0, semi_minor=2.0, orientation=0.0)
        with pytest.raises(ValueError):
            PetalRegion(Point(0, 0), semi_major=-1.0, semi_minor=0.5, orientation=0.0)


class TestPetalArea:
    def test_small(self):
        assert petal_area(PetalRegion(Point(0, 0), 5, 2, 0.0)) == pytest.approx(
            math.pi * 10
        )

    def test_unit_circle(self):
        assert petal_area(PetalRegion(Point(0, 0), 1, 1, 0.0)) == pytest.approx(math.pi)

    def test_default_horizontal_petal(self):
        # pi * 51 * 25.5, frozen from the oracle computation
        r = build_petal(Point(0, 0), Point(100, 0), width_ratio=0.5, margin=1.0)
        assert petal_area(r) == pytest.approx(4085.641245993526, abs=1e-9)

    def test_quadratic_scaling(self):
        r = PetalRegion(Point(3, 7), 40, 10, 0.3)
        doubled = PetalRegion(Point(3, 7), 80, 20, 0.3)
        assert petal_area(doubled) == 4 * petal_area(r)


class TestContains:
    def test_center_inside(self):
        r = build_petal(Point(0, 0), Point(100, 0), 0.5, 1.0)
        assert contains(r, Point(50, 0))

    def test_far_point_outside(self):
        r = build_petal(Point(0, 0), Point(100, 0), 0.5, 1.0)
        assert not contains(r, Point(50, 200))

    def test_endpoints_inside_with_margin(self):
        rng = random.Random(5)
        for _ in range(500):
            s = Point(rng.uniform(-200, 300), rng.uniform(-200, 300))
            d = Point(rng.uniform(-200, 300), rng.uniform(-200, 300))
            if distance(s, d) == 0.0:
                continue
            r = build_petal(s, d, rng.uniform(0.05, 1.0), rng.uniform(0.01, 10.0))
            assert contains(r, s)
            assert contains(r, d)
            assert contains(r, midpoint(s, d))

    def test_agrees_with_oracle(self):
        rng = random.Random(99)
        checked = 0
        while checked < 20_000:
            s = Point(rng.uniform(-200, 300), rng.uniform(-200, 300))
            d = Point(rng.uniform(-200, 300), rng.uniform(-200, 300))
            if distance(s, d) < 1e-9:
                continue
            r = build_petal(s, d, rng.uniform(0.05, 1.0), rng.uniform(0.0, 5.0))
            p = Point(rng.uniform(-200, 300), rng.uniform(-200, 300))
            q = oracle_quadratic(
                r.center.x, r.center.y, r.semi_major, r.semi_minor, r.orientation, p.x, p.y
            )
            if abs(q - 1.0) < 1e-6:
                continue  # keep test points off the boundary
            assert contains(r, p) == oracle_contains(r, p.x, p.y)
            checked += 1


class TestRigidMotionInvariance:
    def test_quadratic_form_preserved(self):
        rng = random.Random(41)
        for _ in range(500):
            s = Point(rng.uniform(-100, 100), rng.uniform(-100, 100))
            d = Point(rng.uniform(-100, 100), rng.uniform(-100, 100))
            if distance(s, d) < 1e-6:
                continue
            w = rng.uniform(0.1, 1.0)
            m = rng.uniform(0.0, 5.0)
            p = Point(rng.uniform(-150, 150), rng.uniform(-150, 150))

            angle = rng.uniform(-math.pi, math.pi)
            tx, ty = rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)
            ca, sa = math.cos(angle), math.sin(angle)

            def move(pt):
                return Point(pt.x * ca - pt.y * sa + tx, pt.x * sa + pt.y * ca + ty)

            original = quadratic_form(build_petal(s, d, w, m), p)
            moved = quadratic_form(build_petal(move(s), move(d), w, m), move(p))
            assert moved == pytest.approx(original, abs=1e-9)


class TestWidthMonotonicity:
    def test_wider_petal_contains_more(self):
        rng = random.Random(61)
        for _ in range(500):
            s = Point(rng.uniform(-100, 100), rng.uniform(-100, 100))
            d = Point(rng.uniform(-100, 100), rng.uniform(-100, 100))
            if distance(s, d) < 1e-6:
                continue
            m = rng.uniform(0.0, 5.0)
            w1 = rng.uniform(0.05, 1.0)
            w2 = rng.uniform(w1, 1.0)
            p = Point(rng.uniform(-150, 150), rng.uniform(-150, 150))
            if contains(build_petal(s, d, w1, m), p):
                assert contains(build_petal(s, d, w2, m), p)
