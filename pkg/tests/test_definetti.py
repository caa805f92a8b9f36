"""Exchangeable sources, counting chains, directing-measure recovery, and the
binary-expansion lift."""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martinwalk import (
    BudgetExceededError,
    HarmonicFn,
    MarkovSource,
    MixtureSource,
    PolyaUrnSource,
    binary_digits,
    boundary_kernel,
    comp_state,
    counting_chain,
    counting_chain_law,
    counting_chain_path,
    counting_h_recovery,
    definetti_identity_check,
    definetti_identity_mc,
    dirichlet_moment,
    estimate_directing_measure,
    exchangeability_report,
    ks_distance_uniform,
    lift_point_masses,
    lift_sequence,
    lift_source_law,
    projection_consistency_check,
    reconstruct_real,
    source_cylinder_law,
    verify_counting_cotransitions,
    verify_counting_markov,
)
from martinwalk.definetti import cylinder_exchangeability_report

MIX = MixtureSource(
    atoms=((Fraction(1, 5), Fraction(4, 5)), (Fraction(3, 5), Fraction(2, 5))),
    weights=(Fraction(1, 2), Fraction(1, 2)),
)
POLYA = PolyaUrnSource((1, 1))
CONTROL = MarkovSource(
    initial=(Fraction(1, 2), Fraction(1, 2)),
    rows=((Fraction(2, 3), Fraction(1, 3)), (Fraction(1, 6), Fraction(5, 6))),
)


class TestSourceCylinderLaw:
    def test_single_atom_is_product_law(self):
        src = MixtureSource(atoms=((Fraction(1, 4), Fraction(3, 4)),), weights=(Fraction(1),))
        law = source_cylinder_law(src, 3)
        assert law.atoms[(1, 2, 1)] == Fraction(1, 4) * Fraction(3, 4) * Fraction(1, 4)

    def test_two_atom_value(self):
        # 1/2 * (1/5)^2 + 1/2 * (3/5)^2 = 1/5
        assert MIX.word_probability((1, 1)) == Fraction(1, 5)

    def test_polya_value_matches_beta_moment(self):
        assert POLYA.word_probability((1, 1)) == Fraction(1, 3)
        assert dirichlet_moment((1, 1), (2, 0)) == Fraction(1, 3)

    def test_total_mass(self):
        for src in (MIX, POLYA, CONTROL):
            assert source_cylinder_law(src, 4).total() == 1

    def test_atom_budget(self):
        with pytest.raises(BudgetExceededError):
            source_cylinder_law(MIX, 30)

    def test_out_of_alphabet(self):
        with pytest.raises(ValueError):
            MIX.word_probability((1, 3))


class TestExchangeability:
    def test_sources_are_exchangeable(self):
        for src in (MIX, POLYA):
            for n in (3, 5, 6):
                report = exchangeability_report(src, n)
                assert report.ok, str(report)

    def test_explicit_permutations(self):
        law = source_cylinder_law(POLYA, 4)
        for word in itertools.product((1, 2), repeat=4):
            for perm in itertools.permutations(range(4)):
                permuted = tuple(word[perm[i]] for i in range(4))
                assert law.atoms.get(word, 0) == law.atoms.get(permuted, 0)

    def test_markov_control_not_exchangeable(self):
        assert not exchangeability_report(CONTROL, 3).ok


class TestCountingPath:
    def test_empty(self):
        assert [s.payload for s in counting_chain_path((), 2)] == [(0, 0)]

    def test_example_path(self):
        path = counting_chain_path((1, 1, 2), 2)
        assert [s.payload for s in path] == [(0, 0), (1, 0), (2, 0), (2, 1)]

    def test_single_symbol(self):
        path = counting_chain_path((2, 2, 2), 3)
        assert [s.payload for s in path] == [(0, 0, 0), (0, 1, 0), (0, 2, 0), (0, 3, 0)]

    def test_out_of_alphabet(self):
        with pytest.raises(ValueError):
            counting_chain_path((1, 0), 2)


class TestCountingChainLaw:
    def test_single_atom_mass_on_one_ray(self):
        src = MixtureSource(atoms=((Fraction(1), Fraction(0)),), weights=(Fraction(1),))
        law = counting_chain_law(src, 4)
        ray = tuple(comp_state((k, 0)) for k in range(1, 5))
        assert law.atoms == {ray: Fraction(1)}

    def test_polya_level_two(self):
        law = counting_chain_law(POLYA, 2)
        mass = law.marginal(2)
        assert mass[comp_state((1, 1))] == Fraction(1, 3)

    def test_two_delta_mixture(self):
        src = MixtureSource(
            atoms=((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1))),
            weights=(Fraction(1, 2), Fraction(1, 2)),
        )
        law = counting_chain_law(src, 2)
        assert law.marginal(2)[comp_state((2, 0))] == Fraction(1, 2)


class TestLemma:
    def test_mixture_counting_is_markov(self):
        report = verify_counting_markov(MIX, 6)
        assert report.ok, str(report)

    def test_polya_counting_is_markov_with_urn_transitions(self):
        assert verify_counting_markov(POLYA, 6).ok
        chain = counting_chain(POLYA, 6)
        for k in range(5):
            for y in chain.enumerate_level(k):
                for target, p in chain.successors(y):
                    j = [b - a for a, b in zip(y.payload, target.payload)].index(1)
                    assert p == Fraction(y.payload[j] + 1, k + 2)

    def test_cotransitions_match_closed_form(self):
        for src in (MIX, POLYA):
            report = verify_counting_cotransitions(src, 6)
            assert report.ok, str(report)

    def test_polya_specific_cotransition(self):
        law = counting_chain_law(POLYA, 2)
        pair = law.pair_marginal(1)
        joint = pair[(comp_state((1, 0)), comp_state((1, 1)))]
        assert joint / law.marginal(2)[comp_state((1, 1))] == Fraction(1, 2)

    def test_negative_control_fails_both(self):
        assert not verify_counting_markov(CONTROL, 6).ok
        assert not verify_counting_cotransitions(CONTROL, 6).ok

    def test_dead_symbol_note(self):
        src = MixtureSource(atoms=((Fraction(1), Fraction(0)),), weights=(Fraction(1),))
        report = verify_counting_markov(src, 4)
        assert report.ok
        assert any("never occur" in note for note in report.notes)


class TestHRecovery:
    def test_single_atom_recovers_boundary_kernel(self):
        mu = (Fraction(3, 10), Fraction(7, 10))
        src = MixtureSource(atoms=(mu,), weights=(Fraction(1),))
        h = counting_h_recovery(src, 5)
        for n in range(5):
            for c in itertools.product(range(n + 1), repeat=2):
                if sum(c) == n:
                    assert h(comp_state(c)) == boundary_kernel(c, mu)

    def test_uniform_atom_recovers_constant(self):
        src = MixtureSource(atoms=((Fraction(1, 2), Fraction(1, 2)),), weights=(Fraction(1),))
        h = counting_h_recovery(src, 5)
        for k in range(5):
            assert h(comp_state((k, 0))) == 1

    def test_mixture_recovers_mixture_of_kernels(self):
        h = counting_h_recovery(MIX, 6)
        expected = HarmonicFn.mixture(
            [(w, HarmonicFn(lambda s, a=a: boundary_kernel(s, a))) for w, a in MIX.directing_atoms()]
        )
        for n in range(6):
            for c in itertools.product(range(n + 1), repeat=2):
                if sum(c) == n:
                    assert h(comp_state(c)) == expected(comp_state(c))

    def test_polya_recovers_dirichlet_mixture(self):
        h = counting_h_recovery(POLYA, 6)
        for n in range(6):
            for k in range(n + 1):
                c = (k, n - k)
                assert h(comp_state(c)) == Fraction(2) ** n * dirichlet_moment((1, 1), c)


class TestDirectingEstimate:
    def test_single_atom_concentrates(self):
        src = MixtureSource(atoms=((Fraction(7, 10), Fraction(3, 10)),), weights=(Fraction(1),))
        est = estimate_directing_measure(src, horizon=10_000, replicates=200, seed=3)
        assert np.all(np.abs(est.samples[:, 0] - 0.7) <= 0.02)

    def test_mixture_clusters(self):
        est = estimate_directing_measure(MIX, horizon=10_000, replicates=400, seed=5)
        clusters = est.cluster_summary(MIX.atoms)
        for summary in clusters:
            assert max(abs(m - a) for m, a in zip(summary.mean, summary.atom)) <= 0.02
            assert abs(summary.weight - 0.5) <= 0.08

    def test_polya_uniform_directing(self):
        est = estimate_directing_measure(POLYA, horizon=5_000, replicates=500, seed=9)
        assert ks_distance_uniform(est.samples[:, 0]) <= 0.08

    def test_worker_invariance(self):
        a = estimate_directing_measure(POLYA, horizon=500, replicates=300, seed=1, workers=1)
        b = estimate_directing_measure(POLYA, horizon=500, replicates=300, seed=1, workers=4)
        assert np.array_equal(a.samples, b.samples)

    def test_moments(self):
        est = estimate_directing_measure(POLYA, horizon=2_000, replicates=500, seed=2)
        means, seconds = est.coordinate_moments()
        assert means[0] == pytest.approx(0.5, abs=0.05)
        assert seconds[0] == pytest.approx(1 / 3, abs=0.05)


class TestDefinettiIdentity:
    def test_single_atom_product_identity(self):
        src = MixtureSource(atoms=((Fraction(1, 4), Fraction(3, 4)),), weights=(Fraction(1),))
        assert definetti_identity_check(src, 3).ok

    def test_polya_closed_form(self):
        report = definetti_identity_check(POLYA, 2)
        assert report.ok, str(report)
        assert POLYA.word_probability((1, 1)) == Fraction(1, 3)

    def test_mixture_exact(self):
        assert definetti_identity_check(MIX, 3).ok

    def test_explicit_atoms(self):
        report = definetti_identity_check(MIX, 2, directing=MIX.directing_atoms())
        assert report.ok

    def test_monte_carlo_mode(self):
        est = estimate_directing_measure(MIX, horizon=10_000, replicates=2_000, seed=11)
        results = definetti_identity_mc(MIX, est, 3)
        assert len(results) == 8
        assert all(r.within(3.0) for r in results), "\n".join(map(str, results))


class TestBinaryDigits:
    def test_zero(self):
        assert binary_digits(0, 6) == (0, 0, 0, 0, 0, 0)

    def test_dyadic(self):
        assert binary_digits(0.625, 4) == (1, 0, 1, 0)

    def test_third(self):
        assert binary_digits(Fraction(1, 3), 4) == (0, 1, 0, 1)

    def test_domain(self):
        with pytest.raises(ValueError):
            binary_digits(1.0, 3)
        with pytest.raises(ValueError):
            binary_digits(-0.1, 3)

    def test_reconstruct_values(self):
        assert reconstruct_real((0, 0, 0)) == 0
        assert reconstruct_real((1, 0, 1)) == Fraction(5, 8)

    def test_reconstruct_validates(self):
        with pytest.raises(ValueError):
            reconstruct_real((1, 2, 0))

    def test_roundtrip_grid(self):
        depth = 30
        bound = Fraction(1, 2**depth)
        for i in range(0, 10_000, 37):
            x = Fraction(i, 10_000)
            assert abs(x - reconstruct_real(binary_digits(x, depth))) < bound

    @given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_floats(self, x):
        depth = 40
        back = reconstruct_real(binary_digits(x, depth))
        assert abs(Fraction(x) - back) < Fraction(1, 2**depth)


class TestLift:
    def test_first_bits(self):
        assert lift_sequence((0.625, 0.3), 1) == ((1,), (0,))

    def test_constant_sequence(self):
        assert lift_sequence((0.25,) * 3, 2) == ((0, 1),) * 3

    def test_depth_two(self):
        assert lift_sequence((0.625,), 2) == ((1, 0),)

    def test_point_mass_projection(self):
        deep = lift_point_masses({Fraction(5, 8): Fraction(1)}, 3)
        shallow = lift_point_masses({Fraction(5, 8): Fraction(1)}, 2)
        assert deep == {(1, 0, 1): Fraction(1)}
        assert shallow == {(1, 0): Fraction(1)}
        assert projection_consistency_check(deep, shallow).ok

    def test_uniform_projection(self):
        deep = {digits: Fraction(1, 8) for digits in itertools.product((0, 1), repeat=3)}
        shallow = {digits: Fraction(1, 4) for digits in itertools.product((0, 1), repeat=2)}
        assert projection_consistency_check(deep, shallow).ok

    def test_perturbed_projection_fails(self):
        deep = {digits: Fraction(1, 8) for digits in itertools.product((0, 1), repeat=3)}
        shallow = {
            (0, 0): Fraction(3, 8),
            (0, 1): Fraction(1, 8),
            (1, 0): Fraction(1, 4),
            (1, 1): Fraction(1, 4),
        }
        report = projection_consistency_check(deep, shallow)
        assert not report.ok

    def test_malformed_distribution(self):
        from martinwalk import NonStochasticError

        with pytest.raises(NonStochasticError):
            projection_consistency_check({(0, 0): Fraction(1, 2)}, {(0,): Fraction(1)})

    def test_lifted_law_is_exchangeable(self):
        points = (Fraction(5, 8), Fraction(1, 4))
        src = MixtureSource(
            atoms=((Fraction(1, 4), Fraction(3, 4)), (Fraction(2, 3), Fraction(1, 3))),
            weights=(Fraction(1, 2), Fraction(1, 2)),
        )
        for depth in (1, 2, 3):
            law = lift_source_law(src, points, depth, 3)
            assert law.total() == 1
            report = cylinder_exchangeability_report(law)
            assert report.ok, str(report)

    def test_lift_merges_colliding_points(self):
        # both points share the first digit 0, so at depth 1 the law collapses
        points = (Fraction(1, 4), Fraction(3, 8))
        src = MixtureSource(
            atoms=((Fraction(1, 2), Fraction(1, 2)),), weights=(Fraction(1),)
        )
        law = lift_source_law(src, points, 1, 2)
        assert law.atoms == {((0,), (0,)): Fraction(1)}


class TestKSDistance:
    def test_perfect_grid(self):
        xs = (np.arange(100) + 0.5) / 100
        assert ks_distance_uniform(xs) == pytest.approx(0.005)

    def test_degenerate_sample(self):
        assert ks_distance_uniform([0.5] * 10) == pytest.approx(0.5)
