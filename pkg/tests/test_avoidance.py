import pytest

from app.core.errors import BudgetExceeded, ConfigError, SolverError
from app.models.ground import IntegerInterval, PrimeField
from app.models.templates import builtin_template
from app.services.avoidance import (
    ExternalSolver, Method, Verdict, avoidance_search, field_threshold, threshold_scan,
)
from app.services.search import is_avoiding
from tests.conftest import brute_force_avoidable

QUAD = builtin_template("quad")
SCHUR = builtin_template("schur")
MOREIRA = builtin_template("moreira")


def oracle_threshold(lo, max_n, n, template):
    for N in range(lo, max_n + 1):
        if not brute_force_avoidable(IntegerInterval(lo, N), n, template):
            return N
    return None


class TestAvoidanceSearch:
    def test_schur_on_four(self):
        result = avoidance_search(IntegerInterval(1, 4), 2, SCHUR, Method.EXHAUSTIVE)
        assert result.verdict is Verdict.AVOIDING
        assert result.coloring.colors == (0, 1, 1, 0)
        assert [sorted(c) for c in result.coloring.classes] == [[1, 4], [2, 3]]

    def test_schur_on_five_is_forced(self):
        for method in (Method.EXHAUSTIVE, Method.SAT):
            result = avoidance_search(IntegerInterval(1, 5), 2, SCHUR, method)
            assert result.verdict is Verdict.FORCED
            assert result.coloring is None

    @pytest.mark.parametrize("template", [SCHUR, MOREIRA, QUAD], ids=["schur", "moreira", "quad"])
    @pytest.mark.parametrize("method", [Method.EXHAUSTIVE, Method.SAT])
    def test_oracle_equivalence(self, template, method):
        largest = 12 if template is QUAD else 10
        for N in range(1, largest + 1):
            ground = IntegerInterval(1, N)
            result = avoidance_search(ground, 2, template, method)
            assert result.avoiding == brute_force_avoidable(ground, 2, template), f"N={N}"
            if result.avoiding:
                assert is_avoiding(result.coloring, template)
                assert result.coloring.colors[0] == 0

    def test_parallel_exhaustive_matches_serial(self):
        ground = IntegerInterval(1, 10)
        serial = avoidance_search(ground, 2, MOREIRA, Method.EXHAUSTIVE, workers=1)
        parallel = avoidance_search(ground, 2, MOREIRA, Method.EXHAUSTIVE, workers=3)
        assert serial.verdict == parallel.verdict
        assert serial.coloring == parallel.coloring

    def test_single_color(self):
        assert avoidance_search(IntegerInterval(1, 1), 1, QUAD).verdict is Verdict.AVOIDING
        assert avoidance_search(IntegerInterval(1, 2), 1, QUAD).verdict is Verdict.FORCED

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            avoidance_search(IntegerInterval(1, 100), 2, QUAD, Method.EXHAUSTIVE, budget=64)

    def test_three_colors(self):
        result = avoidance_search(IntegerInterval(1, 13), 3, SCHUR, Method.SAT)
        assert result.avoiding
        assert is_avoiding(result.coloring, SCHUR)

    def test_graham_range_is_forced(self):
        result = avoidance_search(IntegerInterval(1, 252), 2, QUAD, Method.SAT)
        assert result.verdict is Verdict.FORCED

    def test_hindman_range_is_forced(self):
        result = avoidance_search(IntegerInterval(2, 990), 2, QUAD, Method.SAT)
        assert result.verdict is Verdict.FORCED


class TestExternalSolver:
    def test_model_file(self, tmp_path):
        cnf, model = tmp_path / "f.cnf", tmp_path / "model.txt"
        model.write_text("s SATISFIABLE\nv 1 -2 -3 4 -5 6 7 -8 0\n")
        result = avoidance_search(IntegerInterval(1, 4), 2, SCHUR, Method.SAT_EXTERNAL,
                                  external=ExternalSolver(str(cnf), str(model)))
        assert result.avoiding
        assert result.coloring.colors == (0, 1, 1, 0)
        assert not result.externally_certified
        # the exported formula carries the symmetry-breaking unit
        assert cnf.read_text().splitlines()[-1] == "1 0"

    def test_unsat_is_externally_certified(self, tmp_path):
        model = tmp_path / "model.txt"
        model.write_text("s UNSATISFIABLE\n")
        result = avoidance_search(IntegerInterval(1, 5), 2, SCHUR, Method.SAT_EXTERNAL,
                                  external=ExternalSolver(str(tmp_path / "f.cnf"), str(model)))
        assert result.verdict is Verdict.FORCED
        assert result.externally_certified

    def test_bad_model_rejected(self, tmp_path):
        model = tmp_path / "model.txt"
        # 1, 2 and 3 all in color 0
        model.write_text("s SATISFIABLE\nv 1 -2 3 -4 5 -6 -7 8 0\n")
        with pytest.raises(SolverError):
            avoidance_search(IntegerInterval(1, 4), 2, SCHUR, Method.SAT_EXTERNAL,
                             external=ExternalSolver(str(tmp_path / "f.cnf"), str(model)))

    def test_needs_output_path(self):
        with pytest.raises(ConfigError):
            avoidance_search(IntegerInterval(1, 4), 2, SCHUR, Method.SAT_EXTERNAL)


class TestThresholds:
    def test_schur_scan_matches_oracle(self):
        expected = oracle_threshold(1, 8, 2, SCHUR)
        assert expected == 5
        for bisect in (True, False):
            scan = threshold_scan(1, 8, 2, SCHUR, Method.EXHAUSTIVE, bisect=bisect)
            assert scan.minimal_forced == expected
            assert [row.verdict for row in scan.rows] == [
                Verdict.AVOIDING if N < expected else Verdict.FORCED for N in range(1, 9)
            ]

    def test_bisection_marks_inferred_rows(self):
        scan = threshold_scan(1, 8, 2, SCHUR, Method.SAT, bisect=True)
        evaluated = {row.N for row in scan.rows if not row.inferred}
        assert {4, 5} <= evaluated
        assert any(row.inferred for row in scan.rows)

    def test_monotone_table(self):
        scan = threshold_scan(1, 12, 2, MOREIRA, Method.SAT, bisect=False)
        verdicts = [row.verdict for row in scan.rows]
        first = verdicts.index(Verdict.FORCED) if Verdict.FORCED in verdicts else len(verdicts)
        assert all(v is Verdict.FORCED for v in verdicts[first:])

    def test_one_color_quad(self):
        scan = threshold_scan(1, 6, 1, QUAD)
        assert scan.minimal_forced == 2

    def test_empty_range(self):
        with pytest.raises(ConfigError):
            threshold_scan(5, 3, 2, SCHUR)


class TestFieldThreshold:
    def test_one_color_is_forced(self):
        scan = field_threshold(1, QUAD, [2, 3, 5, 7])
        assert all(row.verdict is Verdict.FORCED for row in scan.rows)
        assert scan.minimal_forced == 2
        assert scan.empirical

    def test_two_colors_on_f2(self):
        scan = field_threshold(2, QUAD, [2])
        expected = brute_force_avoidable(PrimeField(2), 2, QUAD)
        assert (scan.rows[0].verdict is Verdict.AVOIDING) == expected

    def test_small_primes_against_oracle(self):
        primes = [2, 3, 5, 7, 11]
        scan = field_threshold(2, QUAD, primes)
        for row in scan.rows:
            assert row.result.avoiding == brute_force_avoidable(PrimeField(row.N), 2, QUAD), f"p={row.N}"

    def test_primes_must_ascend(self):
        with pytest.raises(ConfigError):
            field_threshold(2, QUAD, [5, 3])
