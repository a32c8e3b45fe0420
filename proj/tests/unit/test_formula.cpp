#include "doctest.h"

#include "distreg/error.hpp"
#include "distreg/family.hpp"
#include "distreg/formula.hpp"

using namespace distreg;

TEST_SUITE("formula") {
    TEST_CASE("SwissLabor formula with a transform") {
        FormulaSet fs = parse_formula_set({"participation ~ income + age + I(age^2)"}, *binomial_family());
        REQUIRE(fs.params.size() == 1);
        CHECK(fs.response == "participation");
        CHECK(fs.params[0].parameter == "pi");
        const auto& t = fs.params[0].terms;
        REQUIRE(t.size() == 4);
        CHECK(t[0].kind == TermKind::intercept);
        CHECK(t[1].kind == TermKind::linear);
        CHECK(t[1].variables[0] == "income");
        CHECK(t[2].variables[0] == "age");
        CHECK(t[3].kind == TermKind::transform);
        CHECK(t[3].variables[0] == "age");
        CHECK(t[3].label == "I(age^2)");
    }

    TEST_CASE("mcycle location-scale formulas") {
        FormulaSet fs = parse_formula_set({"accel ~ s(times, k = 20)", "sigma ~ s(times, k = 20)"}, *gaussian_family());
        REQUIRE(fs.params.size() == 2);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(fs.params[k].parameter == (k == 0 ? "mu" : "sigma"));
            REQUIRE(fs.params[k].terms.size() == 2);
            CHECK(fs.params[k].terms[0].kind == TermKind::intercept);
            CHECK(fs.params[k].terms[1].kind == TermKind::smooth);
            CHECK(fs.params[k].terms[1].options.k == 20);
        }
    }

    TEST_CASE("intercept-only and unlisted parameters") {
        FormulaSet fs = parse_formula_set({"y ~ 1"}, *gaussian_family());
        REQUIRE(fs.params.size() == 2);
        for (const auto& p : fs.params) {
            REQUIRE(p.terms.size() == 1);
            CHECK(p.terms[0].kind == TermKind::intercept);
        }
    }

    TEST_CASE("positional binding of unnamed formulas") {
        FormulaSet fs = parse_formula_set({"y ~ x", "~ z"}, *gaussian_family());
        CHECK(fs.params[1].terms.back().variables[0] == "z");
    }

    TEST_CASE("render round-trips") {
        const std::vector<std::vector<std::string>> cases = {
            {"y ~ a + b + I((a-1)*2) + poly(b, 3)", "sigma ~ s(a, k = 7, degree = 2) - 1"},
            {"y ~ s(a) + s2(b, bs = \"gc\")", "sigma ~ s(a, k = 20)"},
        };
        for (const auto& texts : cases) {
            FormulaSet fs = parse_formula_set(texts, *gaussian_family());
            FormulaSet back = parse_formula_set(fs.render(), *gaussian_family());
            CHECK(back == fs);
        }
    }

    TEST_CASE("default smooth options are omitted when rendering") {
        FormulaSet fs = parse_formula_set({"y ~ s(a, k = 20)"}, *gaussian_family());
        CHECK(fs.params[0].terms[1].render() == "s(a, k = 20)");
    }

    TEST_CASE("errors") {
        CHECK_THROWS_AS(parse_formula_set({"num ~ x1 + s(x2) + te(lon, lat)"}, *gaussian_family()), FormulaError);
        CHECK_THROWS_AS(parse_formula_set({"~ x"}, *gaussian_family()), FormulaError);
        CHECK_THROWS_AS(parse_formula_set({"y ~ x ~ z"}, *gaussian_family()), FormulaError);
        CHECK_THROWS_AS(parse_formula_set({"y ~ s(x, bs = \"tp\")"}, *gaussian_family()), FormulaError);
        CHECK_THROWS_AS(parse_formula_set({"y ~ I(a * b)"}, *gaussian_family()), FormulaError);
        CHECK_THROWS_AS(parse_formula_set({"y ~ x", "sigma ~ z", "nu ~ w"}, *gaussian_family()), FormulaError);
    }

    TEST_CASE("eval_transform") {
        auto eval = [](const std::string& term, const std::vector<double>& x, const std::string& var) {
            DataTable t;
            t.add_numeric(var, x);
            FormulaSet fs = parse_formula_set({"y ~ " + term}, *gaussian_family());
            return eval_transform(fs.params[0].terms[1], t);
        };
        Eigen::VectorXd a = eval("I(age^2)", {2, 3}, "age");
        CHECK(a[0] == 4.0);
        CHECK(a[1] == 9.0);
        Eigen::VectorXd b = eval("I(x)", {1, 2, 3}, "x");
        CHECK(b == Eigen::Vector3d(1, 2, 3));
        Eigen::VectorXd c = eval("I((x-1)*2)", {1, 2}, "x");
        CHECK(c[0] == 0.0);
        CHECK(c[1] == 2.0);
    }
}
