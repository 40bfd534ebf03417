#include <doctest.h>

#include "pctl/analysis.hpp"
#include "pctl/synth.hpp"
#include "pctl/tableau.hpp"
#include "support/gen.hpp"

using namespace pctl;

namespace {

const std::string kData = PCTL_TEST_DATA_DIR;

struct Branch {
    std::vector<FormulaSet> sets;
    std::vector<BranchEntry> entries;

    void add(Pair p, FormulaSet s, bool candidate) {
        sets.push_back(std::move(s));
        entries.push_back(BranchEntry{p, nullptr, candidate});
    }
    const std::vector<BranchEntry>& view() {
        for (std::size_t i = 0; i < sets.size(); ++i) entries[i].set = &sets[i];
        return entries;
    }
};

const Formula kFa = parse_formula("F a");
const Formula kXFa = next(kFa);
const Formula kA = atom("a");

}  // namespace

TEST_CASE("yes-blocking needs every X-eventuality fulfilled since the ancestor") {
    Branch b;
    b.add({0, 0}, {kXFa}, true);
    b.add({0, 1}, {kA}, false);
    b.add({0, 0}, {kXFa}, false);
    CHECK(yes_blocker(b.view()) == std::optional<std::size_t>(0));

    Branch c;
    c.add({0, 0}, {kXFa}, true);
    c.add({0, 1}, {kFa}, false);
    c.add({0, 0}, {kXFa}, false);
    CHECK_FALSE(yes_blocker(c.view()).has_value());

    Branch d;  // not a candidate
    d.add({0, 0}, {kXFa}, false);
    d.add({0, 1}, {kA}, false);
    d.add({0, 0}, {kXFa}, false);
    CHECK_FALSE(yes_blocker(d.view()).has_value());
}

TEST_CASE("sets without X-eventualities yes-block at the first repetition") {
    const Formula xga = next(always(kA));
    Branch b;
    b.add({0, 2}, {xga}, true);
    b.add({0, 2}, {xga}, false);
    CHECK(yes_blocker(b.view()) == std::optional<std::size_t>(0));
}

TEST_CASE("no-blocking at the third copy when nothing new was fulfilled") {
    Branch b;
    b.add({0, 0}, {kXFa}, true);
    b.add({0, 0}, {kXFa}, true);
    b.add({0, 0}, {kXFa}, false);
    CHECK(no_blocker(b.view()) == std::optional<std::size_t>(0));
    CHECK_FALSE(yes_blocker(b.view()).has_value());

    // Something fulfilled between the second and third copy but not between the first two.
    Branch c;
    c.add({0, 0}, {kXFa}, true);
    c.add({0, 0}, {kXFa}, true);
    c.add({0, 1}, {kA}, false);
    c.add({0, 0}, {kXFa}, false);
    CHECK_FALSE(no_blocker(c.view()).has_value());
}

TEST_CASE("idle blocking fires at the second copy only when nothing was fulfilled") {
    Branch b;
    b.add({0, 0}, {kXFa}, true);
    b.add({0, 1}, {kFa}, false);
    b.add({0, 0}, {kXFa}, false);
    CHECK(idle_blocker(b.view()) == std::optional<std::size_t>(0));

    Branch c;
    c.add({0, 0}, {kXFa}, true);
    c.add({0, 1}, {kA}, false);
    c.add({0, 0}, {kXFa}, false);
    CHECK_FALSE(idle_blocker(c.view()).has_value());
}

TEST_CASE("decision scripts") {
    CHECK(parse_script("LR r,l") == std::vector<Side>{Side::Left, Side::Right, Side::Right, Side::Left});
    CHECK_THROWS_AS(parse_script("LX"), std::invalid_argument);
}

TEST_CASE("gamble trail and tree shape") {
    const Model m = load_model(kData + "/gamble.json");
    const auto f = build_alternative(m.mdp, m.skeleton, parse("P>=0.3 F G a"), {});
    CHECK_FALSE(f->conflict());
    CHECK(f->trees().size() == 2);
    CHECK(f->prob_choices() == 1);
    CHECK(f->action_choices() == 4);
    REQUIRE(f->trail().size() == 5);
    CHECK(f->trail()[0].key.kind == ChoiceKey::Kind::Prob);
    CHECK(f->trail()[0].taken == Side::Left);
    const TableauNode& root = f->node(f->trees()[0].root);
    CHECK(root.pair == Pair{0, 0});
    CHECK(root.set == FormulaSet{parse("P>=0.3 F G a")});
}

TEST_CASE("G a under the alpha2 loop closes with a Yes-Loop that is forced to one") {
    Model m = load_model(kData + "/gamble.json");
    m.mdp.initial = 1;
    // X keeps the body positive, so the sub-derivation carries G a itself.
    const auto f = build_alternative(m.mdp, m.skeleton, parse("P>=1 X G a"), {});
    const auto reports = analyse(*f);
    bool found = false;
    for (const auto& tr : f->trees()) {
        if (tr.formula != parse_formula("X G a")) continue;
        found = true;
        bool yes = false;
        for (NodeId id : tr.nodes) yes |= f->node(id).status == NodeStatus::LeafYesLoop;
        CHECK(yes);
        REQUIRE(reports[tr.id].roots.size() == 1);
        CHECK(reports[tr.id].roots[0].chi == 1);
    }
    CHECK(found);
}

TEST_CASE("the node budget is enforced") {
    const Model m = load_model(kData + "/gamble.json");
    TableauOptions o;
    o.node_budget = 10;
    Forest f(m.mdp, m.skeleton, o);
    PrefixPolicy p;
    CHECK_THROWS_AS(f.build(parse("P>=0.3 F G a"), p), BudgetExceeded);
}

TEST_CASE("rule invariants on random forests (property)") {
    testgen::Rng rng(51);
    int built = 0;
    for (int i = 0; i < 150; ++i) {
        const Model m = testgen::random_model(rng);
        testgen::FormulaGen gen(rng);
        const Formula phi = gen.state();
        for (bool det : {false, true}) {
            SynthOptions so;
            so.deterministic = det;
            so.node_budget = 200000;
            std::shared_ptr<Forest> f;
            try {
                f = build_alternative(m.mdp, m.skeleton, phi, {}, so);
            } catch (const BudgetExceeded&) {
                continue;
            }
            ++built;
            CAPTURE(to_string(phi));
            if (det) CHECK(f->program().max_degree() <= 1);
            for (const auto& n : f->nodes()) {
                CHECK_FALSE(n.status == NodeStatus::Open);
                if (n.is_leaf()) CHECK(n.children.empty());
                if (n.backlink) {
                    const TableauNode& t = f->node(*n.backlink);
                    CHECK(t.pair == n.pair);
                    CHECK(t.set == n.set);
                    CHECK(t.rule == Rule::X);
                    CHECK(t.tree == n.tree);
                }
                const bool has_plus = std::any_of(n.children.begin(), n.children.end(),
                                                  [](const auto& c) { return c.second == EdgeKind::Plus; });
                const bool has_x = std::any_of(n.children.begin(), n.children.end(),
                                               [](const auto& c) { return c.second == EdgeKind::X; });
                CHECK_FALSE((has_plus && has_x));
                if (has_x) CHECK(n.poised());
                if (n.children.empty() && !n.backlink) continue;
                // Exactly one equation defines the node's variable through its children.
                const Polynomial self = Polynomial::var(n.var);
                int defining = 0;
                for (const Constraint& c : n.emitted) {
                    if (c.rel != Rel::Eq || !(c.lhs == self)) continue;
                    ++defining;
                    const auto vars = c.rhs.variables();
                    for (const auto& [cid, kind] : n.children) CHECK(vars.count(f->node(cid).var) == 1);
                }
                CHECK(defining == 1);
            }
        }
    }
    CHECK(built > 200);
}
