import numpy as np
import pytest

from subflow import (
    EmbeddedSpace,
    SamplingExhaustedError,
    SpaceError,
    bump,
    evaluate,
    parse,
    restricted_eq,
)


class TestMembership:
    def test_disk_center(self, disk):
        assert disk.membership((0.0, 0.0))

    def test_disk_outside(self, disk):
        assert not disk.membership((2.0, 0.0))

    def test_disk_boundary(self, disk):
        assert disk.membership((1.0, 0.0))

    def test_domain_error_is_non_membership(self):
        space = EmbeddedSpace(1, inequalities=(parse("log(x0)"),))
        ok, reason = space.membership((-1.0,), diagnostics=True)
        assert not ok
        assert "domain error" in reason

    def test_dimension_check(self, disk):
        with pytest.raises(SpaceError):
            disk.membership((0.0,))

    def test_determinism(self, disk):
        p = (0.3, -0.7)
        assert all(disk.membership(p) == disk.membership(p) for _ in range(5))


class TestSample:
    def test_disk_sample(self, disk):
        points = disk.sample(100, seed=7)
        assert len(points) == 100
        for p in points:
            assert p[0] ** 2 + p[1] ** 2 <= 1.0 + disk.tol_ineq

    def test_circle_sample_on_constraint(self, circle):
        g = circle.equalities[0]
        points = circle.sample(10, seed=3)
        assert len(points) == 10
        for p in points:
            assert abs(evaluate(g, p)) <= circle.tol_eq

    def test_deterministic(self, disk):
        a = disk.sample(20, seed=42)
        b = disk.sample(20, seed=42)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_exhausted_when_box_misses_space(self):
        space = EmbeddedSpace(
            1,
            inequalities=(parse("x0 - 1"), parse("-x0")),
            sample_box=((5.0, 6.0),),
        )
        with pytest.raises(SamplingExhaustedError):
            space.sample(10, seed=0)


class TestRestrictedEq:
    def test_constraint_identity_on_circle(self, circle):
        f = circle.restrict("x0^2 + x1^2")
        g = circle.restrict("1")
        assert restricted_eq(f, g, samples=100, seed=1, tol=1e-6)

    def test_distinct_on_disk(self, disk):
        assert not restricted_eq(disk.restrict("x0"), disk.restrict("x1"))

    def test_vanishing_factor_on_line(self):
        line = EmbeddedSpace(
            2, equalities=(parse("x0"),), sample_box=((-1, 1), (-1, 1))
        )
        f = line.restrict("x0*sin(x1)")
        g = line.restrict("0")
        assert restricted_eq(f, g, samples=50, seed=2, tol=1e-6)

    def test_space_mismatch(self, disk, circle):
        with pytest.raises(SpaceError):
            restricted_eq(disk.restrict("x0"), circle.restrict("x0"))

    def test_respects_algebra(self, circle):
        f = circle.restrict("x0^2 + x1^2")
        g = circle.restrict("1")
        h = circle.restrict("sin(x0)")
        fh = circle.restrict(parse("(x0^2 + x1^2) + sin(x0)"))
        gh = circle.restrict(parse("1 + sin(x0)"))
        assert restricted_eq(fh, gh, samples=100, seed=1, tol=1e-6)
        fm = circle.restrict(parse("(x0^2 + x1^2)*sin(x0)"))
        gm = circle.restrict(parse("1*sin(x0)"))
        assert restricted_eq(fm, gm, samples=100, seed=1, tol=1e-6)


class TestProductAndSubspace:
    def test_disk_times_interval(self, disk, interval01):
        prod = disk.product(interval01)
        assert prod.ambient_dim == 3
        assert [str(h) for h in prod.inequalities] == [
            "x0^2.0 + x1^2.0 - 1.0",
            "-x2",
            "x2 - 1.0",
        ]

    def test_membership_factorizes(self, disk, interval01):
        prod = disk.product(interval01)
        rng = np.random.default_rng(9)
        for _ in range(100):
            p = rng.uniform(-1.1, 1.1, 2)
            q = rng.uniform(-0.1, 1.1, 1)
            joint = np.concatenate([p, q])
            assert prod.membership(joint) == (
                disk.membership(p) and interval01.membership(q)
            )

    def test_point_times_space(self, disk):
        point = EmbeddedSpace(1, equalities=(parse("x0"),), sample_box=((-1, 1),))
        prod = point.product(disk)
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = rng.uniform(-1.1, 1.1, 2)
            assert prod.membership(np.concatenate([[0.0], q])) == disk.membership(q)

    def test_nested_subspace_coincides(self):
        plane = EmbeddedSpace(2, sample_box=((-1.5, 1.5), (-1.5, 1.5)))
        step1 = plane.subspace(extra_ineq=[parse("x0^2 + x1^2 - 1")])
        nested = step1.subspace(extra_ineq=[parse("x1")])
        direct = plane.subspace(
            extra_ineq=[parse("x0^2 + x1^2 - 1"), parse("x1")]
        )
        rng = np.random.default_rng(11)
        disagreements = 0
        for _ in range(10_000):
            p = rng.uniform(-1.5, 1.5, 2)
            if nested.membership(p) != direct.membership(p):
                disagreements += 1
        assert disagreements == 0

    def test_empty_subspace_is_identity(self, disk):
        same = disk.subspace()
        rng = np.random.default_rng(2)
        for _ in range(200):
            p = rng.uniform(-1.2, 1.2, 2)
            assert same.membership(p) == disk.membership(p)

    def test_diameter_segment(self, disk):
        seg = disk.subspace(extra_eq=[parse("x0")])
        assert seg.membership((0.0, 0.5))
        assert not seg.membership((0.5, 0.5))


class TestBump:
    def test_plateau_is_exactly_one(self):
        rho = bump([0.0, 0.0], 1.0, 2.0)
        for r in (0.0, 0.3, 0.7, 1.0):
            assert evaluate(rho, (r, 0.0)) == 1.0

    def test_vanishes_outside(self):
        rho = bump([0.0, 0.0], 1.0, 2.0)
        assert evaluate(rho, (3.0, 0.0)) == 0.0
        assert evaluate(rho, (0.0, -2.5)) == 0.0

    def test_transition_in_open_interval(self):
        rho = bump([0.0, 0.0], 1.0, 2.0)
        v = evaluate(rho, (1.5, 0.0))
        assert 0.0 < v < 1.0

    def test_range_everywhere(self):
        rho = bump([0.5], 0.5, 1.5)
        for x in np.linspace(-2.0, 3.0, 101):
            v = evaluate(rho, (x,))
            assert 0.0 <= v <= 1.0

    def test_parameter_order(self):
        with pytest.raises(ValueError):
            bump([0.0], 2.0, 1.0)

    @pytest.mark.parametrize("radius", [1.0, 2.0])
    def test_derivatives_continuous_across_seams(self, radius):
        # finite-difference first and second derivatives stay bounded and
        # jump by less than 1e-4 across the plateau/support boundaries
        rho = bump([0.0], 1.0, 2.0)
        h = 1e-4

        def d1(x):
            return (evaluate(rho, (x + h,)) - evaluate(rho, (x - h,))) / (2 * h)

        def d2(x):
            return (
                evaluate(rho, (x + h,))
                - 2 * evaluate(rho, (x,))
                + evaluate(rho, (x - h,))
            ) / h**2

        # the contact at each seam is infinitely flat, so the one-sided
        # finite-difference values straddling it must agree closely
        for fn in (d1, d2):
            inner, outer = fn(radius - h), fn(radius + h)
            assert abs(inner) < 10.0 and abs(outer) < 10.0
            assert abs(inner - outer) <= 1e-4
        # ... and the whole transition keeps bounded derivatives
        for x in np.linspace(0.5, 2.5, 41):
            assert abs(d1(x)) < 10.0
            assert abs(d2(x)) < 50.0
