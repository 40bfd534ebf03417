#include <doctest.h>

#include "pctl/model.hpp"
#include "support/gen.hpp"

using namespace pctl;
using nlohmann::json;

namespace {

const std::string kData = PCTL_TEST_DATA_DIR;

json gamble_json() {
    return json::parse(R"({
      "states": [{"name": "s1", "labels": []}, {"name": "s2", "labels": ["a"]}, {"name": "s3", "labels": []}],
      "initial": "s1",
      "actions": ["alpha1", "beta", "alpha2", "alpha3"],
      "enabled": {"s1": ["alpha1", "beta"], "s2": ["alpha2"], "s3": ["alpha3"]},
      "trans": {"s1": {"alpha1": {"s1": 1.0}, "beta": {"s2": 0.5, "s3": 0.5}},
                "s2": {"alpha2": {"s2": 1.0}}, "s3": {"alpha3": {"s3": 1.0}}},
      "modes": ["m"],
      "start": {"s1": "m", "s2": "m", "s3": "m"},
      "delta": {"m": {"s1": "m", "s2": "m", "s3": "m"}}
    })");
}

}  // namespace

TEST_CASE("gamble model loads") {
    const Model m = load_model(kData + "/gamble.json");
    CHECK(m.mdp.num_states() == 3);
    CHECK(m.mdp.num_actions() == 4);
    CHECK(m.mdp.initial == 0);
    CHECK(m.mdp.labels[1].count("a") == 1);
    CHECK(succ(m.mdp, 0, *m.mdp.find_action("beta")) == std::vector<StateId>{1, 2});
    CHECK_THROWS_AS(succ(m.mdp, 1, *m.mdp.find_action("beta")), ModelError);
    CHECK(m.skeleton.num_modes() == 1);
}

TEST_CASE("malformed models are rejected") {
    json j = gamble_json();
    j["trans"]["s1"]["beta"]["s2"] = 0.4;
    CHECK_THROWS_AS(model_from_json(j), ModelError);

    j = gamble_json();
    j["initial"] = "nowhere";
    CHECK_THROWS_AS(model_from_json(j), ModelError);

    j = gamble_json();
    j["enabled"]["s2"] = json::array();
    CHECK_THROWS_AS(model_from_json(j), ModelError);

    j = gamble_json();
    j["delta"]["m"]["s1"] = "ghost";
    CHECK_THROWS_AS(model_from_json(j), ModelError);

    j = gamble_json();
    j["trans"]["s1"]["beta"]["s2"] = -0.5;
    j["trans"]["s1"]["beta"]["s3"] = 1.5;
    CHECK_THROWS_AS(model_from_json(j), ModelError);
}

TEST_CASE("model JSON round trip (property)") {
    testgen::Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        const Model m = testgen::random_model(rng);
        const json j = model_to_json(m);
        const Model back = model_from_json(j);
        CHECK(model_to_json(back) == j);
        CHECK(back.mdp.enabled == m.mdp.enabled);
        CHECK(back.skeleton.delta == m.skeleton.delta);
    }
}

TEST_CASE("policy JSON round trip and validation") {
    const Model m = load_model(kData + "/gamble.json");
    const Policy p = load_policy(kData + "/beta1.json", m.mdp, m.skeleton);
    CHECK(p.act.at(Pair{0, 0}).at(*m.mdp.find_action("beta")) == doctest::Approx(1.0));
    const Policy back = policy_from_json(policy_to_json(p, m.mdp), m.mdp, m.skeleton);
    CHECK(back.act == p.act);

    json bad = policy_to_json(p, m.mdp);
    bad["act"]["m"]["s1"] = json{{"alpha2", 1.0}};
    CHECK_THROWS_AS(policy_from_json(bad, m.mdp, m.skeleton), ModelError);
}

TEST_CASE("induced chain of the beta policy") {
    const Model m = load_model(kData + "/gamble.json");
    const Policy p = load_policy(kData + "/beta1.json", m.mdp, m.skeleton);
    const MarkovChain c = induced_chain(m.mdp, p);
    CHECK(c.size() == 3);
    CHECK(c.pairs[0] == Pair{0, 0});
    double total = 0.0;
    for (const auto& [t, pr] : c.trans[0]) total += pr;
    CHECK(total == doctest::Approx(1.0));
    CHECK(c.trans[0].size() == 2);
}

TEST_CASE("induced chains are stochastic and reachable (property)") {
    testgen::Rng rng(22);
    for (int i = 0; i < 100; ++i) {
        const Model m = testgen::random_model(rng);
        const Policy p = testgen::random_policy(rng, m);
        const MarkovChain c = induced_chain(m.mdp, p);
        REQUIRE(c.size() >= 1);
        std::vector<bool> seen(c.size(), false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            double total = 0.0;
            for (const auto& [t, pr] : c.trans[v]) {
                total += pr;
                CHECK(pr > 0.0);
                if (!seen[t]) seen[t] = true, stack.push_back(t);
            }
            CHECK(total == doctest::Approx(1.0));
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
        for (std::size_t v = 0; v < c.size(); ++v) CHECK(c.index.at(c.pairs[v]) == v);
    }
}
