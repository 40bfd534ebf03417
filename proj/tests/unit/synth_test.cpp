#include <doctest.h>

#include <cmath>

#include "pctl/synth.hpp"
#include "support/gen.hpp"

using namespace pctl;
using nlohmann::json;

namespace {

const std::string kData = PCTL_TEST_DATA_DIR;

double beta(const Model& m, const Policy& p) { return p.act.at(Pair{0, 0}).at(*m.mdp.find_action("beta")); }

// s2 carries a and every action at s0, s1, s2 reaches s2 again, so F G !a has probability 0.
Model revisit_model() {
    return model_from_json(json::parse(R"({
      "states": [{"name": "s0", "labels": []}, {"name": "s1", "labels": []}, {"name": "s2", "labels": ["a"]}],
      "initial": "s0", "actions": ["act0", "act1"],
      "enabled": {"s0": ["act0", "act1"], "s1": ["act0"], "s2": ["act0", "act1"]},
      "trans": {"s0": {"act0": {"s0": 0.75, "s2": 0.25}, "act1": {"s0": 0.25, "s1": 0.25, "s2": 0.5}},
                "s1": {"act0": {"s0": 0.5, "s2": 0.5}},
                "s2": {"act0": {"s0": 0.25, "s1": 0.25, "s2": 0.5}, "act1": {"s1": 0.5, "s2": 0.5}}},
      "modes": ["m0"], "start": {"s0": "m0", "s1": "m0", "s2": "m0"},
      "delta": {"m0": {"s0": "m0", "s1": "m0", "s2": "m0"}}
    })"));
}

}  // namespace

TEST_CASE("gamble: P>=0.3 F G a is synthesized and verified") {
    const Model m = load_model(kData + "/gamble.json");
    for (bool det : {false, true}) {
        SynthOptions o;
        o.deterministic = det;
        o.verify = true;
        const SynthesisResult r = synthesize(m.mdp, m.skeleton, parse("P>=0.3 F G a"), o);
        REQUIRE(r.success);
        CHECK(beta(m, r.policy) >= o.solve.eps_strict);
        if (det) CHECK(beta(m, r.policy) == doctest::Approx(1.0));
        CHECK(r.verified == std::optional<bool>(true));
        CHECK(policy_domain(r.program).count(Pair{0, 0}) == 1);
    }
}

TEST_CASE("gamble: P>=0.6 F G a fails in both modes") {
    const Model m = load_model(kData + "/gamble.json");
    for (bool det : {false, true}) {
        SynthOptions o;
        o.deterministic = det;
        const SynthesisResult r = synthesize(m.mdp, m.skeleton, parse("P>=0.6 F G a"), o);
        CHECK_FALSE(r.success);
        CHECK(r.reason == FailureReason::AllChoicesUnsat);
        CHECK(r.log.size() <= (std::size_t{1} << r.distinct_choices));
    }
}

TEST_CASE("loops of No-Loop leaves that never leave are pinned to zero") {
    const Model m = revisit_model();
    const SynthesisResult r = synthesize(m.mdp, m.skeleton, parse("P>0.3 F G !a"));
    CHECK_FALSE(r.success);
    CHECK(synthesize(m.mdp, m.skeleton, parse("P<=0.3 F G !a")).success);
}

TEST_CASE("recurrent loops under a uniform policy") {
    const Model m = revisit_model();
    const auto f = build_alternative(m.mdp, m.skeleton, parse("P>0.3 F G !a"), {});
    const auto reports = analyse(*f);
    std::vector<double> values(f->program().vars().size(), 0.0);
    for (VarId v = 0; v < values.size(); ++v) {
        const VarInfo& info = f->program().var(v);
        if (info.kind == VarInfo::Kind::Action)
            values[v] = 1.0 / static_cast<double>(m.mdp.enabled[info.pair.state].size());
    }
    const auto loops = recurrent_loops(*f, reports, values);
    REQUIRE_FALSE(loops.empty());
    for (const auto& loop : loops) {
        CHECK_FALSE(loop.yes_loop);
        CHECK(loop.nodes.size() >= 2);
        for (const auto& root : reports[loop.tree].roots)
            CHECK(std::find(loop.nodes.begin(), loop.nodes.end(), root.node) == loop.nodes.end());
    }

    // On gamble every loop is a forced BSCC, so nothing is left free.
    const Model gamble = load_model(kData + "/gamble.json");
    const auto g = build_alternative(gamble.mdp, gamble.skeleton, parse("P>=0.3 F G a"), {});
    std::vector<double> half(g->program().vars().size(), 0.5);
    CHECK(recurrent_loops(*g, analyse(*g), half).empty());
}

TEST_CASE("completed policies fall back to uniform outside the domain") {
    const Model m = load_model(kData + "/gamble.json");
    ConstraintProgram g;
    const VarId a1 = g.add_var(VarInfo::action_var(Pair{0, 0}, *m.mdp.find_action("alpha1")));
    const VarId b = g.add_var(VarInfo::action_var(Pair{0, 0}, *m.mdp.find_action("beta")));
    std::vector<double> values(2);
    values[a1] = 0.2;
    values[b] = 0.6;
    const Policy p = complete_policy(m.mdp, m.skeleton, g, values);
    CHECK(beta(m, p) == doctest::Approx(0.75));
    CHECK(p.act.at(Pair{0, 0}).at(*m.mdp.find_action("alpha1")) == doctest::Approx(0.25));
    CHECK(p.act.at(Pair{0, 1}).at(*m.mdp.find_action("alpha2")) == doctest::Approx(1.0));
    CHECK_NOTHROW(p.validate(m.mdp));
}

TEST_CASE("alternative count respects the decision bound and results are reproducible (property)") {
    testgen::Rng rng(71);
    for (int i = 0; i < 40; ++i) {
        const Model m = testgen::random_model(rng);
        testgen::FormulaGen gen(rng);
        const Formula phi = gen.state();
        SynthOptions o;
        o.node_budget = 200000;
        o.deterministic = i % 2 == 0;
        const SynthesisResult r1 = synthesize(m.mdp, m.skeleton, phi, o);
        const SynthesisResult r2 = synthesize(m.mdp, m.skeleton, phi, o);
        CAPTURE(to_string(phi));
        CHECK(r1.success == r2.success);
        CHECK(r1.reason == r2.reason);
        CHECK(r1.log.size() == r2.log.size());
        if (r1.distinct_choices < 63) CHECK(r1.log.size() <= (std::size_t{1} << r1.distinct_choices));
        if (r1.success) {
            CHECK(r1.policy.act == r2.policy.act);
            CHECK_NOTHROW(r1.policy.validate(m.mdp));
        }
    }
}
