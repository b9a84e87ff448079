from fractions import Fraction

import pytest

from app.core.errors import WalkPreconditionError
from app.models.coloring import coloring_from_classes, mono_coloring, random_coloring, residue_coloring
from app.models.ground import IntegerInterval, PrimeField
from app.models.templates import builtin_template
from app.services.cover import cover_decomposition
from app.services.search import find_instances
from app.services.structure import ThickTestFamily
from app.services.trace_check import check_success, check_trace
from app.services.walker import (
    DensityMean, DensityMode, DerivedTuple, WalkFailure, WalkParams, WalkStage, bergelson_search,
    build_derived_coloring, compute_qj, density, q_bound, walk_claim_thick, walk_outcomes, walk_theorem_m2,
)

QUAD = builtin_template("quad")


def quadruple_is_an_instance(coloring, result):
    """Re-verify through the search engine instead of the walker's own gate"""
    found = {i.assignment: c for i, c in find_instances(coloring, QUAD)}
    return found.get((result.x, result.y)) == result.color


class TestDensity:
    def test_extremes(self):
        field = PrimeField(7)
        mean = DensityMean(field)
        assert density(field.elements, mean) == 1
        assert density(set(), mean) == 0
        assert mean.mode is DensityMode.EXACT_UNIFORM

    def test_shift_invariance(self):
        field = PrimeField(7)
        mean = DensityMean(field)
        A = {1, 2, 5}
        assert density(A, mean) == density({(a + 3) % 7 for a in A}, mean) == Fraction(3, 7)

    def test_interval_mode(self):
        interval = IntegerInterval(1, 5)
        mean = DensityMean(interval)
        assert mean.mode is DensityMode.INTERVAL_APPROX
        assert mean.members(mean.shifted(mean.mask({2, 3}), 1)) == {1, 2}


class TestBergelsonSearch:
    def test_full_set(self):
        field = PrimeField(11)
        y, common = bergelson_search(field.elements, [1, 3], range(1, 11), Fraction(9, 10), DensityMean(field))
        assert y == 1
        assert common == set(field.elements)

    def test_small_set_never_qualifies(self):
        field = PrimeField(11)
        assert bergelson_search({1, 2, 3, 4}, [1], range(1, 11), Fraction(4, 11), DensityMean(field)) is None

    def test_against_direct_scan(self):
        field = PrimeField(11)
        A = set(range(6))
        expected = None
        for y in range(1, 11):
            common = {x for x in A if (x + y) % 11 in A}
            if Fraction(len(common), 11) > Fraction(4, 11):
                expected = (y, common)
                break
        assert bergelson_search(A, [1], range(1, 11), Fraction(4, 11), DensityMean(field)) == expected

    def test_candidate_list_order_is_kept(self):
        field = PrimeField(11)
        y, _ = bergelson_search(field.elements, [1], [7, 2, 0], Fraction(1, 2), DensityMean(field))
        assert y == 7

    def test_too_many_shifts(self):
        field = PrimeField(11)
        with pytest.raises(WalkPreconditionError):
            bergelson_search({1}, [1, 2], [1], Fraction(0), DensityMean(field), s=1)


class TestDerivedColoring:
    def test_monochrome(self):
        coloring = mono_coloring(PrimeField(5))
        derived = build_derived_coloring(coloring, cover_decomposition(coloring, 2))
        assert derived.K == 1

    def test_residue_tuples(self):
        coloring = residue_coloring(PrimeField(7))
        derived = build_derived_coloring(coloring, cover_decomposition(coloring, 2))
        assert derived.tuple_of[1] == DerivedTuple(0, ((0, 1), (1, 3)))
        assert derived.tuple_of[3] == DerivedTuple(0, ((0, 3), (1, 1)))
        assert derived.K == 2
        assert set(derived.tuple_of) == set(range(1, 7))
        again = build_derived_coloring(coloring, cover_decomposition(coloring, 2))
        assert again.tuple_of == derived.tuple_of


class TestShiftSets:
    def test_first_step(self):
        assert compute_qj(1, [2, 3], [], PrimeField(7)) == (4, 5)

    def test_second_step(self):
        field = PrimeField(11)
        assert compute_qj(2, [1], [3], field) == (3, 4)
        assert compute_qj(2, [1], [3], field, strict=True) == (3,)

    def test_third_step_against_direct_evaluation(self):
        p, F, ys = 11, [1, 2], [3, 5]
        expected = set()
        for i in range(1, 4):
            numerator, before = 1, 1
            for y in ys[i - 1:2]:
                numerator = numerator * y % p
            for y in ys[:i - 1]:
                before = before * y % p
            for f in F:
                expected.add(numerator * pow(f * before, p - 2, p) % p)
        assert set(compute_qj(3, F, ys, PrimeField(p))) == expected

    def test_bad_requests(self):
        with pytest.raises(WalkPreconditionError):
            compute_qj(0, [1], [], PrimeField(7))
        with pytest.raises(WalkPreconditionError):
            compute_qj(3, [1], [2], PrimeField(7))

    def test_bound(self):
        assert q_bound(6, 2) == 10
        assert q_bound(1, 3) == 3
        field = PrimeField(101)
        for j in range(1, 6):
            assert len(compute_qj(j, [1, 2], [3, 5, 7, 11], field)) <= q_bound(6, 2)


class TestTheoremWalk:
    def test_monochrome_succeeds(self):
        coloring = mono_coloring(PrimeField(11))
        result = walk_theorem_m2(coloring, WalkParams(N=3), width=2)
        assert result.ok
        assert result.y == 1
        assert result.color == 0
        assert result.xs == list(range(1, 10))
        assert check_success(coloring, result) == []

    def test_walk_needs_two_steps(self):
        with pytest.raises(WalkPreconditionError):
            WalkParams(N=1).validate()
        with pytest.raises(WalkPreconditionError):
            walk_theorem_m2(mono_coloring(PrimeField(11)), WalkParams(N=1), width=2)

    def test_bad_params(self):
        with pytest.raises(WalkPreconditionError):
            WalkParams(alpha_floor=Fraction(0)).validate()
        with pytest.raises(WalkPreconditionError):
            walk_theorem_m2(mono_coloring(PrimeField(11)), WalkParams(s=0), width=2)
        with pytest.raises(WalkPreconditionError):
            walk_theorem_m2(mono_coloring(IntegerInterval(1, 10)), WalkParams(), width=2)

    @staticmethod
    def walk_random_colorings(p, N, seeds):
        field = PrimeField(p)
        results = []
        for seed in seeds:
            coloring = random_coloring(field, 3, seed)
            result = walk_theorem_m2(coloring, WalkParams(N=N, seed=seed), width=2)
            results.append(result)
            if not result.ok:
                assert result.stage is not None
                continue
            assert check_success(coloring, result) == [], f"seed={seed}"
            assert quadruple_is_an_instance(coloring, result)
            i, j = result.trace.pair
            assert 1 <= i < j <= result.trace.N
        outcomes = walk_outcomes(results)
        print(f"fp:{p} N={N}: {outcomes}")
        assert sum(outcomes.values()) == len(seeds)
        return outcomes

    def test_outcome_tally(self):
        success = walk_theorem_m2(mono_coloring(PrimeField(11)), WalkParams(N=3), width=2)
        failure = WalkFailure(WalkStage.DENSITY, 2, "best density below the threshold")
        assert walk_outcomes([success, failure, failure]) == {"Success": 1, "DensityFailure": 2}
        assert walk_outcomes([]) == {}

    @pytest.mark.parametrize("p", [53, 101])
    def test_random_colorings_are_sound(self, p):
        self.walk_random_colorings(p, WalkParams().N, range(50))

    @pytest.mark.parametrize("N", [2, 3])
    def test_short_walks_succeed(self, N):
        outcomes = self.walk_random_colorings(101, N, range(30))
        assert outcomes.get("Success", 0) > 0

    def test_deterministic(self):
        coloring = random_coloring(PrimeField(53), 3, 17)
        first = walk_theorem_m2(coloring, WalkParams(seed=1), width=2)
        second = walk_theorem_m2(coloring, WalkParams(seed=1), width=2)
        assert first.ok == second.ok
        if first.trace is not None:
            assert [s.y for s in first.trace.steps] == [s.y for s in second.trace.steps]
            assert first.trace.pair == second.trace.pair

    def test_tampered_trace_is_caught(self):
        coloring = mono_coloring(PrimeField(11))
        result = walk_theorem_m2(coloring, WalkParams(N=3), width=2)
        result.trace.steps[0].density = Fraction(1, 2)
        assert any("density" in problem for problem in check_trace(coloring, result.trace))


class TestTwoClassWalk:
    def test_one_element_minority(self):
        field = PrimeField(53)
        coloring = coloring_from_classes(field, [[e for e in field.elements if e != 7], [7]])
        singletons = ThickTestFamily(tuple(frozenset({g}) for g in field.nonzero_elements))
        result = walk_claim_thick(coloring, WalkParams(), family=singletons)
        assert result.ok
        assert result.color == 0
        assert result.trace.branch == "first"
        assert check_success(coloring, result) == []

    def test_random_two_colorings(self):
        field = PrimeField(53)
        successes = 0
        for seed in range(20):
            coloring = random_coloring(field, 2, seed)
            try:
                result = walk_claim_thick(coloring, WalkParams(seed=seed))
            except WalkPreconditionError:
                continue
            if result.ok:
                successes += 1
                assert check_success(coloring, result) == []
                assert quadruple_is_an_instance(coloring, result)
        assert successes > 0

    def test_needs_two_thick_colors(self):
        with pytest.raises(WalkPreconditionError):
            walk_claim_thick(mono_coloring(PrimeField(11)), WalkParams())
        # residues miss every pair {residue, non-residue}
        with pytest.raises(WalkPreconditionError):
            walk_claim_thick(residue_coloring(PrimeField(11)), WalkParams())
