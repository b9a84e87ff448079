import itertools

import numpy as np
import pytest

from app.core.errors import BudgetExceeded, ConfigError, SolverError
from app.models.coloring import coloring_from_classes, mono_coloring, random_coloring, residue_coloring
from app.models.ground import IntegerInterval, PrimeField
from app.models.templates import builtin_template
from app.services.cnf import color_var, decode_var, encode_cnf, parse_solver_output, to_dimacs, write_dimacs
from app.services.dpll import solve_cnf
from app.services.search import count_monochromatic, find_instances, instance_value_sets, is_avoiding

QUAD = builtin_template("quad")
SCHUR = builtin_template("schur")


def satisfies(model, clauses):
    return all(any(model[abs(l)] == (l > 0) for l in clause) for clause in clauses)


class TestFindInstances:
    def test_monochrome_interval(self):
        ground = IntegerInterval(1, 6)
        found = find_instances(mono_coloring(ground), QUAD)
        assert any(i.assignment == (2, 3) and i.term_values == (2, 3, 6, 5) for i, _ in found)
        assert all(color == 0 for _, color in found)

    def test_red_block(self):
        ground = IntegerInterval(1, 10)
        red = [2, 3, 5, 6]
        coloring = coloring_from_classes(ground, [red, [e for e in ground.elements if e not in red]])
        found = {i.assignment: c for i, c in find_instances(coloring, QUAD)}
        assert found[(2, 3)] == 0

    def test_pattern_cannot_fit(self):
        ground = IntegerInterval(9, 10)
        assert find_instances(mono_coloring(ground), QUAD) == []

    def test_lexicographic_order_and_limit(self):
        ground = IntegerInterval(1, 8)
        everything = find_instances(mono_coloring(ground), QUAD)
        assignments = [i.assignment for i, _ in everything]
        assert assignments == sorted(assignments)
        assert find_instances(mono_coloring(ground), QUAD, limit=3) == everything[:3]


class TestCounting:
    @pytest.mark.parametrize("p", [5, 7, 11, 101])
    def test_monochrome_field(self, p):
        counts = count_monochromatic(mono_coloring(PrimeField(p)), QUAD)
        assert counts.total == (p - 1) ** 2
        assert counts.per_color == ((p - 1) ** 2,)

    def test_residue_coloring_of_f7(self):
        field = PrimeField(7)
        coloring = residue_coloring(field)
        residues = {x * x % 7 for x in range(7)}
        expected = [0, 0]
        for x, y in itertools.product(range(1, 7), repeat=2):
            colors = {v in residues for v in (x, y, x * y % 7, (x + y) % 7)}
            if len(colors) == 1:
                expected[0 if colors.pop() else 1] += 1
        counts = count_monochromatic(coloring, QUAD)
        assert list(counts.per_color) == expected
        assert counts.total == sum(expected)

    def test_random_colorings_of_f101(self):
        p = 101
        field = PrimeField(p)
        totals = []
        for seed in range(100):
            coloring = random_coloring(field, 2, seed)
            colors = coloring.colors
            brute = 0
            for x in range(1, p):
                for y in range(1, p):
                    c = colors[x]
                    if colors[y] == c and colors[x * y % p] == c and colors[(x + y) % p] == c:
                        brute += 1
            counts = count_monochromatic(coloring, QUAD)
            assert counts.total == brute
            totals.append(brute)
        assert min(totals) > 0

    def test_count_matches_find(self):
        rng = np.random.default_rng(3)
        ground = IntegerInterval(1, 30)
        for seed in rng.integers(0, 10_000, size=10):
            coloring = random_coloring(ground, 3, int(seed))
            for template in (QUAD, SCHUR, builtin_template("moreira")):
                assert count_monochromatic(coloring, template).total == len(find_instances(coloring, template))

    def test_avoiding_coloring(self):
        ground = IntegerInterval(1, 4)
        coloring = coloring_from_classes(ground, [[1, 4], [2, 3]])
        assert is_avoiding(coloring, SCHUR)


class TestCnfEncoding:
    def test_schur_on_two_elements(self):
        ground = IntegerInterval(1, 2)
        assert instance_value_sets(SCHUR, ground) == ((0, 1),)
        formula = encode_cnf(ground, 2, SCHUR)
        assert formula.num_vars == 4
        assert formula.clauses == ((1, 2), (-1, -2), (3, 4), (-3, -4), (-1, -3), (-2, -4))
        assert to_dimacs(formula) == "p cnf 4 6\n1 2 0\n-1 -2 0\n3 4 0\n-3 -4 0\n-1 -3 0\n-2 -4 0\n"

    def test_variable_numbering(self):
        assert color_var(0, 0, 3) == 1
        assert color_var(4, 2, 3) == 15
        assert decode_var(15, 3) == (4, 2)

    def test_byte_identical_export(self, tmp_path):
        ground = IntegerInterval(1, 20)
        first, second = tmp_path / "a.cnf", tmp_path / "b.cnf"
        write_dimacs(encode_cnf(ground, 2, QUAD), str(first))
        write_dimacs(encode_cnf(IntegerInterval(1, 20), 2, builtin_template("quad")), str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_degenerate_formula(self):
        formula = encode_cnf(IntegerInterval(9, 10), 2, QUAD)
        assert formula.degenerate
        assert formula.instance_sets == 0
        assert len(formula.clauses) == 4

    def test_needs_two_colors(self):
        with pytest.raises(ConfigError):
            encode_cnf(IntegerInterval(1, 4), 1, SCHUR)


class TestSolverOutput:
    def test_satisfiable(self):
        output = parse_solver_output("c comment\ns SATISFIABLE\nv 1 -2 3\nv -4 0\n")
        assert output.satisfiable
        assert output.model == {1: True, 2: False, 3: True, 4: False}

    def test_unsatisfiable(self):
        assert not parse_solver_output("s UNSATISFIABLE\n").satisfiable

    @pytest.mark.parametrize("text", ["", "v 1 2 0\n", "s MAYBE\n", "s SATISFIABLE\n", "s SATISFIABLE\nv 1 x 0\n"])
    def test_malformed(self, text):
        with pytest.raises(SolverError):
            parse_solver_output(text)


class TestDpll:
    def test_small_satisfiable(self):
        clauses = [(1, 2), (-1,), (2, 3, -4), (-3, 4)]
        result = solve_cnf(4, clauses)
        assert result.satisfiable
        assert satisfies(result.model, clauses)

    def test_contradiction(self):
        assert not solve_cnf(1, [(1,), (-1,)]).satisfiable
        assert not solve_cnf(1, [()]).satisfiable

    def test_pigeonhole(self):
        # three pigeons, two holes
        var = lambda i, h: i * 2 + h + 1
        clauses = [(var(i, 0), var(i, 1)) for i in range(3)]
        clauses += [(-var(i, h), -var(j, h)) for h in range(2) for i in range(3) for j in range(i + 1, 3)]
        result = solve_cnf(6, clauses)
        assert not result.satisfiable
        assert result.stats.conflicts > 0
        with pytest.raises(BudgetExceeded):
            solve_cnf(6, clauses, max_decisions=0)

    def test_random_3sat_against_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            num_vars = 8
            clauses = []
            for _ in range(int(rng.integers(20, 45))):
                picked = rng.choice(np.arange(1, num_vars + 1), size=3, replace=False)
                signs = rng.choice([-1, 1], size=3)
                clauses.append(tuple(int(v * s) for v, s in zip(picked, signs)))
            brute = any(
                satisfies({v + 1: bits[v] for v in range(num_vars)}, clauses)
                for bits in itertools.product([False, True], repeat=num_vars)
            )
            result = solve_cnf(num_vars, clauses)
            assert result.satisfiable == brute
            if brute:
                assert satisfies(result.model, clauses)

    def test_schur_formula(self):
        formula = encode_cnf(IntegerInterval(1, 5), 2, SCHUR)
        assert not solve_cnf(formula.num_vars, formula.clauses).satisfiable
        formula = encode_cnf(IntegerInterval(1, 4), 2, SCHUR)
        assert solve_cnf(formula.num_vars, formula.clauses).satisfiable
