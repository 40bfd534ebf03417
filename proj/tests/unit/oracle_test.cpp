#include <doctest.h>

#include <cmath>

#include "pctl/oracle.hpp"
#include "support/gen.hpp"

using namespace pctl;
using namespace pctl::oracle;

namespace {

const std::string kData = PCTL_TEST_DATA_DIR;

// Random chain with real-valued weights over `n` states and random labels.
MarkovChain random_chain(testgen::Rng& rng, std::size_t n) {
    MarkovChain c;
    std::uniform_real_distribution<double> w(0.05, 1.0);
    for (std::size_t s = 0; s < n; ++s) {
        c.pairs.push_back(Pair{0, static_cast<StateId>(s)});
        c.index[c.pairs.back()] = s;
        std::set<std::string> ls;
        if (testgen::coin(rng)) ls.insert("a");
        if (testgen::coin(rng)) ls.insert("b");
        c.labels.push_back(ls);
    }
    c.trans.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> ws(n, 0.0);
        double total = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            if (t == s || testgen::coin(rng, 0.4)) total += ws[t] = w(rng);
        for (std::size_t t = 0; t < n; ++t)
            if (ws[t] > 0) c.trans[s].emplace_back(t, ws[t] / total);
    }
    return c;
}

std::vector<std::vector<bool>> reachability(const MarkovChain& c) {
    const std::size_t n = c.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t s = 0; s < n; ++s) {
        r[s][s] = true;
        for (const auto& [t, p] : c.trans[s]) r[s][t] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = true;
    return r;
}

// Bounded until by iteration: long enough that the remainder is below 1e-9 on these chains.
std::vector<double> until_by_iteration(const MarkovChain& c, const StatePred& a, const StatePred& b) {
    std::vector<double> x(c.size(), 0.0), y(c.size());
    for (int it = 0; it < 20000; ++it) {
        for (std::size_t s = 0; s < c.size(); ++s) {
            if (b[s]) y[s] = 1.0;
            else if (!a[s]) y[s] = 0.0;
            else {
                y[s] = 0.0;
                for (const auto& [t, p] : c.trans[s]) y[s] += p * x[t];
            }
        }
        std::swap(x, y);
    }
    return x;
}

}  // namespace

TEST_CASE("gamble beta chain reaches the a-loop with probability one half") {
    const Model m = load_model(kData + "/gamble.json");
    const Policy p = load_policy(kData + "/beta1.json", m.mdp, m.skeleton);
    const MarkovChain c = induced_chain(m.mdp, p);
    const StatePred a = predicate(c, atom("a"));
    CHECK(exact_fg(c, 0, a) == doctest::Approx(0.5).epsilon(1e-12));
    const Verdict v = path_probability(c, 0, parse_formula("F G a"));
    CHECK(v.method == Method::Exact);
    CHECK(v.probability == doctest::Approx(0.5));
    CHECK(check_state_formula(c, 0, parse("P>=0.3 F G a")));
    CHECK_FALSE(check_state_formula(c, 0, parse("P>=0.6 F G a")));
    Options strict;
    strict.exact_tol = 0.0;
    CHECK(check_state_formula(c, 0, parse("P>=0.5 F G a"), strict));
    CHECK_FALSE(check_state_formula(c, 0, parse("P>0.5 F G a"), strict));
    CHECK(check_state_formula(c, 0, parse("!P>0.5 F G a"), strict));
    // The default slack leans towards the formula holding, on either side of a negation.
    CHECK(check_state_formula(c, 0, parse("P>0.5 F G a")));
    CHECK(check_state_formula(c, 0, parse("!P>=0.5 F G a")));
}

TEST_CASE("FG is zero when no bottom SCC satisfies the predicate") {
    const Model m = load_model(kData + "/gamble.json");
    const Policy p = load_policy(kData + "/beta1.json", m.mdp, m.skeleton);
    const MarkovChain c = induced_chain(m.mdp, p);
    for (double v : fg_vector(c, StatePred(c.size(), false))) CHECK(v == 0.0);
}

TEST_CASE("bottom SCCs match brute-force reachability (property)") {
    testgen::Rng rng(41);
    for (int i = 0; i < 100; ++i) {
        const MarkovChain c = random_chain(rng, 1 + testgen::pick(rng, 7));
        const auto r = reachability(c);
        std::size_t count = 0;
        const auto b = bottom_sccs(c, &count);
        for (std::size_t s = 0; s < c.size(); ++s) {
            bool bottom = true;
            for (std::size_t t = 0; t < c.size(); ++t)
                if (r[s][t] && !r[t][s]) bottom = false;
            CHECK((b[s] >= 0) == bottom);
            for (std::size_t t = 0; t < c.size(); ++t)
                if (b[s] >= 0 && b[t] >= 0) CHECK((b[s] == b[t]) == (r[s][t] && r[t][s]));
        }
    }
}

TEST_CASE("exact until agrees with value iteration (property)") {
    testgen::Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        const MarkovChain c = random_chain(rng, 1 + testgen::pick(rng, 6));
        const StatePred a = predicate(c, atom("a")), b = predicate(c, atom("b"));
        const auto exact = until_vector(c, a, b);
        const auto iter = until_by_iteration(c, a, b);
        for (std::size_t s = 0; s < c.size(); ++s) {
            CHECK(exact[s] == doctest::Approx(iter[s]).epsilon(1e-7));
            CHECK(exact_until(c, s, a, b) == doctest::Approx(exact[s]));
        }
    }
}

TEST_CASE("flat product method agrees with Monte Carlo (property)") {
    testgen::Rng rng(43);
    const std::vector<std::string> shapes{
        "X a & (a U b)", "!(a U b) & F G a", "X !b | G F a", "(a W b)", "(a R b)", "F G !a -> X b", "!(X a) & !(b U a)",
    };
    for (int i = 0; i < 35; ++i) {
        const MarkovChain c = random_chain(rng, 1 + testgen::pick(rng, 4));
        const Formula psi = parse_formula(shapes[i % shapes.size()]);
        const auto flat = flat_vector(c, psi);
        if (!flat) continue;  // product too large
        const Verdict mc = mc_estimate(c, 0, psi, 20000, 2000, 5 + i, Pessimism::Discard);
        CAPTURE(to_string(psi));
        CHECK(std::abs(mc.probability - (*flat)[0]) <= mc.ci + 1e-3);
        for (double v : *flat) CHECK((v >= -1e-12 && v <= 1 + 1e-12));
    }
}

TEST_CASE("Monte Carlo bounds bracket the estimate") {
    testgen::Rng rng(44);
    const MarkovChain c = random_chain(rng, 4);
    const Formula psi = parse_formula("F b");
    for (Pessimism p : {Pessimism::Pessimistic, Pessimism::Optimistic, Pessimism::Discard}) {
        const Verdict v = mc_estimate(c, 0, psi, 5000, 50, 3, p);
        CHECK(v.lower <= v.probability + 1e-12);
        CHECK(v.probability <= v.upper + 1e-12);
        CHECK(v.samples == 5000);
        CHECK(v.method == Method::MonteCarlo);
    }
}

TEST_CASE("nested P operators are resolved before the outer one") {
    const Model m = load_model(kData + "/gamble.json");
    const Policy p = load_policy(kData + "/beta1.json", m.mdp, m.skeleton);
    const MarkovChain c = induced_chain(m.mdp, p);
    // P>=1 G a holds exactly on s2, which is reached with probability 1/2.
    const Evaluation e = evaluate(c, parse("P>=0.5 F P>=1 G a"));
    CHECK(e.exact);
    CHECK(e.truth[0] == Truth::True);
    Options strict;
    strict.exact_tol = 0.0;
    CHECK(evaluate(c, parse("P>0.5 F P>=1 G a"), strict).truth[0] == Truth::False);
}
