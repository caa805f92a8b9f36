"""Composition-walk tests: enumeration, closed forms, boundary kernel,
conditioned walks, convergence detection."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martinwalk import (
    alpha_walk,
    boundary_harmonic,
    boundary_kernel,
    boundary_limit,
    closed_form_kernel,
    comp_state,
    compositions,
    dm_convergence_check,
    h_transform,
    is_harmonic,
    polya_cotransition,
    uniform_walk,
)
from martinwalk.compositions import EXACT_KERNEL_LIMIT, rounded_ray_point


class TestCompositions:
    def test_small_cases(self):
        assert compositions(2, 2) == ((0, 2), (1, 1), (2, 0))
        assert compositions(1, 5) == ((5,),)

    @given(st.integers(1, 5), st.integers(0, 8))
    @settings(max_examples=60, deadline=None)
    def test_count_and_order(self, d, n):
        comps = compositions(d, n)
        assert len(comps) == math.comb(n + d - 1, d - 1)
        assert all(sum(c) == n for c in comps)
        assert list(comps) == sorted(comps)


class TestUniformWalk:
    def test_single_part_deterministic(self):
        w = uniform_walk(1, level_budget=5)
        assert w.forward_law(4).prob(comp_state((4,))) == 1

    def test_step_probability(self):
        w = uniform_walk(2)
        assert w.step(comp_state((1, 1)), comp_state((2, 1))) == Fraction(1, 2)

    def test_forward_law_d3(self):
        w = uniform_walk(3)
        assert w.forward_law(2).prob(comp_state((2, 0, 0))) == Fraction(1, 9)
        assert w.forward_law(2).prob(comp_state((1, 1, 0))) == Fraction(2, 9)


class TestClosedFormKernel:
    def test_unit_vector_special_case(self):
        # K(e_1, (3,2)) = d * y_1 / n = 2 * 3 / 5
        assert closed_form_kernel((1, 0), (3, 2)) == Fraction(6, 5)

    def test_root(self):
        assert closed_form_kernel((0, 0, 0), (2, 1, 0)) == 1

    def test_interior_case(self):
        assert closed_form_kernel((1, 1), (3, 2)) == Fraction(6, 5)

    def test_dominance_failure_is_zero(self):
        assert closed_form_kernel((2, 0), (1, 3)) == 0
        assert closed_form_kernel((1, 1), (1, 0)) == 0

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_matches_dp_kernel(self, d):
        w = uniform_walk(d, level_budget=5)
        for m in range(5):
            for x in w.enumerate_level(m):
                for n in range(m, 6):
                    for y in w.enumerate_level(n):
                        assert closed_form_kernel(x, y) == w.martin_kernel(x, y)

    def test_exact_below_limit_float_above(self):
        small = closed_form_kernel((1, 0), (30, 32))
        large = closed_form_kernel((1, 0), (32, 33))
        assert isinstance(small, Fraction)
        assert isinstance(large, float)
        assert sum((30, 32)) < EXACT_KERNEL_LIMIT <= sum((32, 33))

    def test_float_path_relative_error(self):
        # independent integer oracle: d^m * prod falling factorials
        def exact(x, y):
            d, m, n = len(x), sum(x), sum(y)
            num = d**m
            for xi, yi in zip(x, y):
                for t in range(xi):
                    num *= yi - t
            den = 1
            for t in range(m):
                den *= n - t
            return Fraction(num, den)

        for n in (10**3, 10**5, 10**6):
            y = rounded_ray_point(n, (0.3, 0.7))
            for x in ((1, 0), (2, 1), (0, 3)):
                approx = closed_form_kernel(x, y)
                truth = exact(x, y)
                assert abs(approx - truth) <= 1e-9 * truth


class TestBoundaryKernel:
    def test_uniform_alpha_is_constant_one(self):
        alpha = (Fraction(1, 3),) * 3
        for c in compositions(3, 4):
            assert boundary_kernel(c, alpha) == 1

    def test_values(self):
        alpha = (Fraction(7, 10), Fraction(3, 10))
        assert boundary_kernel((1, 0), alpha) == Fraction(7, 5)
        assert boundary_kernel((2, 0), alpha) == Fraction(49, 25)

    def test_zero_coordinate_convention(self):
        alpha = (Fraction(1), Fraction(0))
        assert boundary_kernel((0, 0), alpha) == 1
        assert boundary_kernel((3, 0), alpha) == 8
        assert boundary_kernel((2, 1), alpha) == 0

    def test_kernel_limit_along_ray(self):
        alpha = (0.7, 0.3)
        target = float(boundary_kernel((2, 0), alpha))
        assert target == pytest.approx(1.96)
        errors = [
            abs(float(closed_form_kernel((2, 0), rounded_ray_point(n, alpha))) - target)
            for n in (10**3, 10**4, 10**5)
        ]
        assert errors[-1] <= 1e-3
        assert errors[0] >= errors[1] >= errors[2]

    def test_harmonic_for_rational_alpha(self):
        w = uniform_walk(2, level_budget=8)
        for alpha in [(Fraction(1, 2), Fraction(1, 2)), (Fraction(2, 7), Fraction(5, 7))]:
            report = is_harmonic(w, boundary_harmonic(alpha), 8)
            assert report.ok, str(report)

    def test_unnormalized_form_fails(self):
        from martinwalk.harmonic import HarmonicFn

        w = uniform_walk(2, level_budget=5)
        alpha = (Fraction(7, 10), Fraction(3, 10))
        plain = HarmonicFn(
            lambda s: alpha[0] ** s.payload[0] * alpha[1] ** s.payload[1],
            name="plain",
        )
        assert not is_harmonic(w, plain, 4).ok


class TestAlphaWalk:
    def test_uniform_alpha_equals_uniform_walk(self):
        w = uniform_walk(3, level_budget=5)
        a = alpha_walk((Fraction(1, 3),) * 3, level_budget=5)
        assert w.cylinder_law(4).atoms == a.cylinder_law(4).atoms

    def test_degenerate_single_path(self):
        a = alpha_walk((Fraction(1), Fraction(0), Fraction(0)), level_budget=8)
        law = a.forward_law(6)
        assert law.prob(comp_state((6, 0, 0))) == 1
        assert len(law) == 1

    def test_matches_h_transform_exactly(self):
        alpha = (Fraction(7, 10), Fraction(3, 10))
        base = uniform_walk(2, level_budget=6)
        walk = alpha_walk(alpha, level_budget=6)
        lifted = h_transform(base, boundary_harmonic(alpha))
        assert walk.cylinder_law(6).atoms == lifted.cylinder_law(6).atoms


class TestPolyaCotransition:
    def test_root_case(self):
        assert polya_cotransition((0, 0, 0), 2) == 1

    def test_paper_value(self):
        assert polya_cotransition((3, 1), 1) == Fraction(4, 5)

    def test_cross_check_with_dp(self):
        for chain in (uniform_walk(2, level_budget=6), alpha_walk((Fraction(2, 5), Fraction(3, 5)), level_budget=6)):
            for n in range(5):
                for x in chain.enumerate_level(n):
                    for y, _ in chain.successors(x):
                        j = 1 + [b - a for a, b in zip(x.payload, y.payload)].index(1)
                        assert chain.cotransition(y, x) == polya_cotransition(x.payload, j)

    def test_second_direction(self):
        assert polya_cotransition((1, 1), 2) == Fraction(2, 3)

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            polya_cotransition((1, 1), 3)


class TestBoundaryLimit:
    def test_final_ratio(self):
        path = [comp_state((k, 0)) for k in range(101)]
        est = boundary_limit(path)
        assert est.point == (1.0, 0.0)

    def test_direct_arithmetic(self):
        est = boundary_limit([comp_state((70, 30))])
        assert est.point == (0.7, 0.3)

    def test_concentration_many_seeds(self):
        walk = alpha_walk((0.7, 0.3), level_budget=4)
        for seed in range(30):
            path = walk.sample_path(10_000, seed=seed)
            est = boundary_limit(path)
            assert abs(est.point[0] - 0.7) <= 0.02
            assert est.oscillation <= 0.05

    def test_uniform_walk_concentration(self):
        walk = uniform_walk(2, level_budget=4)
        for seed in range(10):
            est = boundary_limit(walk.sample_path(10_000, seed=seed))
            assert abs(est.point[0] - 0.5) <= 0.02

    def test_empty_path(self):
        with pytest.raises(ValueError):
            boundary_limit([])


class TestConvergenceCheck:
    def test_constant_direction_converges(self):
        states = [(n, 0) for n in range(1, 40)]
        ok, diags = dm_convergence_check(states, probes=[(1, 0)])
        assert ok
        assert diags[0].final_value == pytest.approx(2.0)

    def test_alternating_diverges(self):
        # kernel at probe e_1 alternates between 2 and 0
        states = [(n, 0) if n % 2 else (0, n) for n in range(1, 30)]
        ok, diags = dm_convergence_check(states, probes=[(1, 0)])
        assert not ok
        assert diags[0].oscillation == pytest.approx(2.0)

    def test_ray_converges(self):
        states = [rounded_ray_point(n, (0.6, 0.4)) for n in (10, 100, 1000, 10_000, 100_000)]
        ok, _ = dm_convergence_check(states, probes=[(1, 0), (1, 1), (2, 0)], tol=1e-1)
        assert ok

    def test_eventually_constant_converges(self):
        states = [(1, 0), (1, 1), (2, 1)] + [(2, 2)] * 10
        ok, diags = dm_convergence_check(states, probes=[(1, 0), (0, 1)])
        assert ok
        assert all(d.oscillation == 0.0 for d in diags)

    def test_sampled_path_stabilizes(self):
        # kernels along a sampled trajectory settle once the direction does
        walk = alpha_walk((0.6, 0.4), level_budget=4)
        path = walk.sample_path(20_000, seed=8)
        checkpoints = [path[k] for k in (100, 400, 1000, 4000, 10_000, 20_000)]
        probes = [(1, 0), (0, 1), (1, 1)]
        ok, diags = dm_convergence_check(checkpoints, probes, tol=0.05)
        assert ok, diags

    def test_levels_must_increase(self):
        with pytest.raises(ValueError):
            dm_convergence_check([(2, 0), (1, 0)], probes=[(1, 0)])
