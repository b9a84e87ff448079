from dataclasses import replace
from fractions import Fraction
from math import gcd

import numpy as np
import pytest

from app.core.errors import ConfigError, TemplateError
from app.models.coloring import MAX_COLORS, Coloring, load_coloring, residue_coloring
from app.models.ground import IntegerInterval, PrimeField, RationalGrid, parse_element, parse_ground
from app.models.templates import (
    CoefficientFn, Instance, PatternTemplate, Rejected, builtin_template, general_template, instantiate,
    load_template_library, resolve_template,
)
from app.models.terms import (
    Add, Const, Mul, OutOfGround, Rejection, Var, eval_term, normalize, parse_term,
)

x0, x1, x2 = Var(0), Var(1), Var(2)


def term_keys(template):
    return {normalize(t) for t in template.terms}


class TestGroundSets:
    def test_parse_specs(self):
        assert parse_ground("int:1..10") == IntegerInterval(1, 10)
        assert parse_ground("fp:7") == PrimeField(7)
        assert parse_ground("qgrid:3/2") == RationalGrid(3, 2)
        with pytest.raises(ConfigError):
            parse_ground("nat:1..4")

    def test_invalid_arenas(self):
        with pytest.raises(ConfigError):
            PrimeField(8)
        with pytest.raises(ConfigError):
            IntegerInterval(5, 4)
        with pytest.raises(ConfigError):
            RationalGrid(0, 3)

    def test_enumeration_is_deterministic(self):
        for spec in ("int:-3..5", "fp:11", "qgrid:3/3"):
            assert parse_ground(spec).elements == parse_ground(spec).elements

    def test_rational_grid_elements(self):
        grid = RationalGrid(2, 2)
        assert grid.elements == (-2, -1, Fraction(-1, 2), 0, Fraction(1, 2), 1, 2)
        assert type(grid.elements[0]) is int
        assert grid.contains(Fraction(2, 2))
        assert not grid.contains(Fraction(1, 3))

    def test_prime_field_arithmetic(self):
        field = PrimeField(5)
        assert field.mul(3, 4) == 2
        assert field.add(3, 4) == 2
        assert field.const(Fraction(1, 2)) == 3
        assert field.const(Fraction(1, 5)) is None
        assert field.inverse(2) == 3
        assert field.nonzero_elements == (1, 2, 3, 4)

    def test_interval_membership(self):
        interval = IntegerInterval(1, 10)
        assert interval.contains(Fraction(3, 1))
        assert not interval.contains(Fraction(1, 2))
        assert not interval.contains(11)

    def test_rational_canonical_form(self):
        rng = np.random.default_rng(7)
        grid = RationalGrid(50, 50)
        for _ in range(200):
            a, c = (int(v) for v in rng.integers(-50, 51, size=2))
            b, d = (int(v) for v in rng.integers(1, 51, size=2))
            p, q = Fraction(a, b), Fraction(c, d)
            for value, naive in ((grid.add(p, q), (a * d + c * b, b * d)), (grid.mul(p, q), (a * c, b * d))):
                value = Fraction(value)
                assert value.denominator > 0
                assert gcd(abs(value.numerator), value.denominator) == 1
                assert value * naive[1] == naive[0]

    def test_parse_element(self):
        assert parse_element("3") == 3
        assert parse_element("4/2") == 2
        assert parse_element("-1/2") == Fraction(-1, 2)


class TestColoring:
    def test_classes(self):
        coloring = residue_coloring(PrimeField(7))
        assert coloring.classes == (frozenset({0, 1, 2, 4}), frozenset({3, 5, 6}))
        assert coloring[3] == 1

    @pytest.mark.parametrize("n", [0, MAX_COLORS + 1])
    def test_color_count_bounds(self, n):
        with pytest.raises(ConfigError) as e:
            Coloring(IntegerInterval(1, 3), n, (0, 0, 0))
        assert e.value.field == "colors"
        assert Coloring(IntegerInterval(1, 3), MAX_COLORS, (0, 63, 1)).n == MAX_COLORS

    def test_colors_in_range(self):
        with pytest.raises(ConfigError):
            Coloring(IntegerInterval(1, 3), 2, (0, 2, 1))
        with pytest.raises(ConfigError):
            Coloring(IntegerInterval(1, 3), 2, (0, 1))

    def test_file_source(self, tmp_path):
        path = tmp_path / "coloring.json"
        path.write_text('{"colors": [1, 0, 1]}')
        assert load_coloring(str(path), IntegerInterval(1, 3), 2).colors == (1, 0, 1)
        with pytest.raises(ConfigError):
            load_coloring(str(tmp_path / "absent.json"), IntegerInterval(1, 3), 2)


class TestTerms:
    def test_eval_examples(self):
        interval = IntegerInterval(1, 10)
        assert eval_term(Mul(x0, x1), (2, 3), interval) == 6
        assert eval_term(Add(x0, x1), (6, 7), interval) is OutOfGround
        assert eval_term(Mul(x0, x1), (3, 4), PrimeField(5)) == 2

    def test_intermediate_value_leaving_ground(self):
        # 4*6 = 24 leaves [1..10] even though 24 - 20 = 4 would not
        assert eval_term(Add(Mul(x0, x1), Const(-20)), (4, 6), IntegerInterval(1, 10)) is OutOfGround

    def test_constants_embed_in_fields(self):
        assert eval_term(Mul(Const(Fraction(1, 2)), x0), (4,), PrimeField(7)) == 2

    def test_prefix_round_trip(self):
        text = "(+ (* x0 x1) x0)"
        expr = parse_term(text)
        assert expr == Add(Mul(x0, x1), x0)
        assert str(expr) == text
        assert parse_term("(+ x0 x1 x2)") == Add(Add(x0, x1), x2)

    @pytest.mark.parametrize("text", ["", "(+ x0", "(- x0 x1)", "(+ x0)", "x0 x1", "(* x0 y)"])
    def test_parse_errors(self, text):
        with pytest.raises(TemplateError):
            parse_term(text)

    def test_normalization(self):
        assert normalize(Add(x0, x1)) == normalize(Add(x1, x0))
        assert normalize(Mul(Const(0), x0)) == ("c", Fraction(0))
        assert normalize(Add(Add(x0, Const(1)), Const(2))) == normalize(Add(x0, Const(3)))
        assert normalize(Mul(Const(1), x0)) == normalize(x0)
        assert normalize(Mul(x0, Mul(x1, x2))) == normalize(Mul(Mul(x2, x0), x1))
        assert normalize(Add(x0, x1)) != normalize(Mul(x0, x1))


class TestInstantiate:
    def test_quad_instance(self):
        result = instantiate(builtin_template("quad"), (2, 3), IntegerInterval(1, 10))
        assert result == Instance((2, 3), (2, 3, 6, 5))

    def test_zero_violation(self):
        result = instantiate(builtin_template("quad"), (0, 3), IntegerInterval(0, 10))
        assert result == Rejected(Rejection.ZERO_VIOLATION)

    def test_distinctness_violation(self):
        template = resolve_template("quad", distinct=True)
        result = instantiate(template, (2, 2), IntegerInterval(1, 10))
        assert result == Rejected(Rejection.DISTINCTNESS_VIOLATION)

    def test_out_of_ground(self):
        quad = builtin_template("quad")
        assert instantiate(quad, (6, 7), IntegerInterval(1, 10)) == Rejected(Rejection.OUT_OF_GROUND)
        assert instantiate(quad, (11, 1), IntegerInterval(1, 10)) == Rejected(Rejection.OUT_OF_GROUND)

    def test_wrong_arity(self):
        with pytest.raises(TemplateError):
            instantiate(builtin_template("quad"), (1, 2, 3), IntegerInterval(1, 10))

    def test_pure(self):
        quad = builtin_template("quad")
        field = PrimeField(7)
        assert instantiate(quad, (3, 5), field) == instantiate(quad, (3, 5), field)


class TestBuiltins:
    def test_shapes(self):
        quad = builtin_template("quad")
        assert [str(t) for t in quad.terms] == ["x0", "x1", "(* x0 x1)", "(+ x0 x1)"]
        assert quad.nonzero_vars == frozenset({0, 1})
        assert len(builtin_template("schur").terms) == 3
        assert len(builtin_template("moreira").terms) == 3

    def test_quad_ap(self):
        ap2 = builtin_template("quad_ap", 2)
        assert [str(t) for t in ap2.terms] == ["x0", "x1", "(* x0 x1)", "(+ x0 x1)", "(+ x0 (* 2 x1))"]
        assert ap2.label == "quad_ap(2)"
        assert term_keys(builtin_template("quad_ap", 1)) == term_keys(builtin_template("quad"))

    @pytest.mark.parametrize("name,k", [("quad_ap", None), ("quad_ap", 0), ("quad", 2), ("square", None)])
    def test_bad_parameters(self, name, k):
        with pytest.raises(TemplateError):
            builtin_template(name, k)

    def test_duplicate_terms_rejected(self):
        with pytest.raises(TemplateError):
            PatternTemplate(2, (Add(x0, x1), Add(x1, x0)), frozenset({0, 1}))

    def test_variable_out_of_range(self):
        with pytest.raises(TemplateError):
            PatternTemplate(2, (x0, x2), frozenset({0}))

    def test_dict_round_trip(self):
        ap3 = builtin_template("quad_ap", 3)
        again = PatternTemplate.from_dict(ap3.to_dict(), name="copy")
        assert again == ap3


class TestGeneralTemplate:
    def test_three_variable_family(self):
        H = [Const(0), Const(1), CoefficientFn(x0), CoefficientFn(x1), CoefficientFn(Mul(x0, x1))]
        template = general_template(H, 2)
        keys = term_keys(template)
        expected = [
            Add(x0, x1), Add(x0, x2), Add(Add(x0, x1), x2), Add(x0, Mul(x1, x2)),
            Add(Mul(x0, x1), x2), Add(Mul(x0, x1), Mul(x1, x2)), Mul(Mul(x0, x1), x2),
        ]
        assert {normalize(t) for t in expected} <= keys
        assert len(template.terms) == 13
        assert template.nonzero_vars == frozenset({0, 1, 2})

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_constants_give_quad_ap(self, k):
        template = general_template([Const(i) for i in range(1, k + 1)], 1)
        assert term_keys(template) == term_keys(builtin_template("quad_ap", k))

    def test_zero_coefficient_collapses(self):
        template = general_template([Const(0)], 1)
        assert term_keys(template) == {normalize(x0), normalize(x1), normalize(Mul(x0, x1))}

    def test_arity_mismatch(self):
        with pytest.raises(TemplateError):
            general_template([CoefficientFn(x2, arity=1)], 2)

    def test_empty_family(self):
        with pytest.raises(TemplateError):
            general_template([], 1)


class TestLibrary:
    def test_shipped_patterns(self):
        library = load_template_library()
        assert term_keys(library["quad_ap2"]) == term_keys(builtin_template("quad_ap", 2))
        assert library["quad_distinct"].distinct
        assert len(library["triple_sums"].terms) == 13
        assert {"quad_square", "quad_square_plus", "quad_double_square", "product_square_sum"} <= set(library)

    def test_resolve(self):
        assert resolve_template("QUAD") == builtin_template("quad")
        assert resolve_template("quad_ap", 2) == builtin_template("quad_ap", 2)
        assert resolve_template("quad_square").num_vars == 2
        with pytest.raises(TemplateError):
            resolve_template("no_such_pattern")

    def test_template_file(self, tmp_path):
        path = tmp_path / "pattern.yaml"
        path.write_text('numVars: 2\nterms: ["x0", "(* x0 x0)", "(+ x0 x1)"]\nnonzeroVars: [0, 1]\n')
        template = resolve_template("ignored", template_file=str(path))
        assert template.label == "pattern"
        assert len(template.terms) == 3

    def test_distinct_flag_applies(self):
        assert replace(builtin_template("quad"), distinct=True) == resolve_template("quad", distinct=True)
