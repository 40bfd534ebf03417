#include <doctest.h>

#include "pctl/formula.hpp"
#include "support/gen.hpp"

using namespace pctl;

TEST_CASE("parse desugars derived operators") {
    CHECK(to_string(parse_formula("F a")) == "(true U a)");
    CHECK(to_string(parse_formula("G a")) == "!(true U !a)");
    CHECK(parse_formula("F G a") == eventually(always(atom("a"))));
    CHECK(parse_formula("a | b") == disj(atom("a"), atom("b")));
    CHECK(parse_formula("a -> b") == implies(atom("a"), atom("b")));
    CHECK(parse_formula("false") == f_false());
    CHECK(parse_formula("a R b") == release(atom("a"), atom("b")));
    CHECK(parse_formula("a W b") == weak_until(atom("a"), atom("b")));
}

TEST_CASE("parse builds probability operators") {
    const Formula f = parse("P>=0.3 F G a");
    REQUIRE(f.is(Kind::Prob));
    CHECK(f.cmp() == Cmp::Ge);
    CHECK(f.bound() == Bound::from_double(0.3));
    CHECK(f.sub() == eventually(always(atom("a"))));
    CHECK(parse("P<0.5 X a").cmp() == Cmp::Lt);
    CHECK(parse("P<=1 a").bound().is_one());
}

TEST_CASE("top-level proper path formulas are rejected") {
    CHECK_THROWS_AS(parse("F a"), ParseError);
    CHECK_NOTHROW(parse_formula("F a"));
    CHECK_NOTHROW(parse("a & P>0.1 X b"));
}

TEST_CASE("parse errors carry a position") {
    try {
        parse_formula("a & & b");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 4);
    }
    CHECK_THROWS_AS(parse_formula("P>=1.5 a"), ParseError);
    CHECK_THROWS_AS(parse_formula("(a & b"), ParseError);
    CHECK_THROWS_AS(parse_formula(""), ParseError);
}

TEST_CASE("bounds are exact decimals") {
    CHECK(Bound::from_double(0.3).one_minus() == Bound::from_double(0.7));
    CHECK(Bound::from_double(0.1).one_minus().one_minus() == Bound::from_double(0.1));
    CHECK(Bound::from_double(0).is_zero());
    CHECK(Bound::from_double(0.25).str() == "0.25");
}

TEST_CASE("comparator algebra") {
    for (Cmp c : {Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge}) {
        CHECK(complement(complement(c)) == c);
        CHECK(flip(flip(c)) == c);
        CHECK(is_lower(complement(c)) != is_lower(c));
        for (double x : {0.0, 0.3, 0.5, 1.0}) CHECK(compare(x, complement(c), 0.5) == !compare(x, c, 0.5));
    }
}

TEST_CASE("state and path classification") {
    CHECK(is_state_formula(parse_formula("a & P>0.2 X b")));
    CHECK(is_proper_path(parse_formula("X a")));
    CHECK_FALSE(is_proper_path(parse_formula("!a")));
    CHECK(is_classical(parse_formula("!(a & b)")));
    CHECK_FALSE(is_classical(parse_formula("P>0.2 a")));
    CHECK(temporal_depth(parse_formula("F G a")) == 2);
    CHECK(prob_count(parse_formula("P>0.2 (a U P<0.3 X b)")) == 2);
}

TEST_CASE("classical evaluation") {
    CHECK(classical_eval({"a"}, parse_formula("a & !b")));
    CHECK_FALSE(classical_eval({"a", "b"}, parse_formula("a & !b")));
    CHECK(classical_eval({}, parse_formula("a -> b")));
    CHECK_THROWS_AS(classical_eval({}, parse_formula("X a")), std::invalid_argument);
}

TEST_CASE("rewrites of trivial bounds and nested P") {
    CHECK(rewrite_p(parse("P>=0 X a")) == f_true());
    CHECK(rewrite_p(parse("P>1 X a")) == f_false());
    CHECK(rewrite_p(parse("P<0 X a")) == f_false());
    CHECK(rewrite_p(parse("P<=1 X a")) == f_true());
    CHECK_FALSE(rewrite_p(parse("P>=0.5 X a")).has_value());
}

TEST_CASE("negation is pushed through P") {
    CHECK(push_negation(parse("!P>=0.3 X a")) == parse("P<0.3 X a"));
    CHECK(push_negation(parse("P>=0.3 !X a")) == parse("P<=0.7 X a"));
    CHECK_FALSE(push_negation(parse("P>=0.3 X a")).has_value());
}

TEST_CASE("formula sets are canonical") {
    const Formula a = atom("a"), b = atom("b");
    FormulaSet s1{a, b, a};
    FormulaSet s2{b, a};
    CHECK(s1 == s2);
    CHECK(s1.size() == 2);
    CHECK(s1.hash() == s2.hash());
    CHECK(s1.without(a) == FormulaSet{b});
    CHECK(FormulaSet{a}.with({b}) == s2);
}

TEST_CASE("closure is closed under negation and bounds the subset count") {
    const Formula f = parse("P>=0.3 F G a");
    const auto cl = closure(f);
    for (const Formula& g : cl) {
        const Formula n = g.is(Kind::Not) ? g.sub() : neg(g);
        CHECK(std::find(cl.begin(), cl.end(), n) != cl.end());
    }
    CHECK(closure_bound(f) == (cl.size() >= 64 ? UINT64_MAX : (std::uint64_t{1} << cl.size())));
}

TEST_CASE("printing round-trips through the parser (property)") {
    testgen::Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        testgen::FormulaGen gen(rng, {3, 2, {"a", "b", "c"}});
        const Formula f = gen.state();
        const std::string text = to_string(f);
        CAPTURE(text);
        CHECK(parse(text) == f);
        CHECK(parse_formula(text).hash() == f.hash());
    }
}

TEST_CASE("canonical order is a strict total order (property)") {
    testgen::Rng rng(12);
    std::vector<Formula> fs;
    for (int i = 0; i < 60; ++i) {
        testgen::FormulaGen gen(rng);
        fs.push_back(gen.path(3));
    }
    for (const auto& x : fs)
        for (const auto& y : fs) {
            const int c = canonical_compare(x, y);
            CHECK(c == -canonical_compare(y, x));
            CHECK((c == 0) == (x == y));
            for (const auto& z : fs)
                if (c < 0 && canonical_compare(y, z) < 0) CHECK(canonical_compare(x, z) < 0);
        }
}
