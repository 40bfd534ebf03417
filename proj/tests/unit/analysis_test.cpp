#include <doctest.h>

#include "pctl/analysis.hpp"
#include "pctl/synth.hpp"
#include "support/gen.hpp"

using namespace pctl;

namespace {

TreeView::Node inner(NodeId id, std::vector<std::pair<NodeId, EdgeKind>> ch, bool poised = false) {
    return TreeView::Node{id, std::move(ch), NodeStatus::Inner, poised, std::nullopt};
}
TreeView::Node leaf(NodeId id, NodeStatus s, std::optional<NodeId> back = std::nullopt) {
    return TreeView::Node{id, {}, s, false, back};
}

constexpr auto P = EdgeKind::Plus;
constexpr auto X = EdgeKind::X;

}  // namespace

TEST_CASE("SCCs match brute-force mutual reachability (property)") {
    testgen::Rng rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(testgen::pick(rng, 12));
        std::vector<std::vector<int>> adj(n);
        std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
        for (int v = 0; v < n; ++v) {
            r[v][v] = true;
            for (int w = 0; w < n; ++w)
                if (testgen::coin(rng, 0.2)) adj[v].push_back(w), r[v][w] = true;
        }
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (r[i][k] && r[k][j]) r[i][j] = true;
        std::vector<bool> bottom;
        const auto comp = scc_components(adj, &bottom);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) CHECK((comp[i] == comp[j]) == (r[i][j] && r[j][i]));
            bool is_bottom = true;
            for (int j = 0; j < n; ++j)
                if (r[i][j] && !r[j][i]) is_bottom = false;
            CHECK(bottom[comp[i]] == is_bottom);
        }
    }
}

TEST_CASE("a single Yes-Loop cycle is a BSCC forced to one") {
    TreeView t;
    t.root = 0;
    t.nodes = {inner(0, {{1, X}}, true), leaf(1, NodeStatus::LeafYesLoop, 0)};
    const BsccReport r = bscc_roots(t);
    CHECK(r.zero_deadend_nodes.empty());
    CHECK(r.ambiguity.at(0));
    CHECK(r.roots == std::vector<BsccRoot>{{0, 1}});
}

TEST_CASE("a No-Loop cycle is forced to zero") {
    TreeView t;
    t.root = 0;
    t.nodes = {inner(0, {{1, X}}, true), inner(1, {{2, P}, {3, P}}), leaf(2, NodeStatus::LeafCross),
               leaf(3, NodeStatus::LeafNoLoop, 0)};
    const BsccReport r = bscc_roots(t);
    CHECK(r.zero_deadend_nodes == std::set<NodeId>{2});
    CHECK(r.roots == std::vector<BsccRoot>{{0, 0}});
}

TEST_CASE("check leaves and X-successor 0-deadends make a node unambiguous") {
    TreeView t;
    t.root = 0;
    t.nodes = {inner(0, {{1, X}, {2, X}}, true), leaf(1, NodeStatus::LeafYesLoop, 0), leaf(2, NodeStatus::LeafCross)};
    CHECK_FALSE(is_ambiguous(t, 0));
    CHECK(bscc_roots(t).roots.empty());

    TreeView c;
    c.root = 0;
    c.nodes = {inner(0, {{1, P}, {2, P}}), leaf(1, NodeStatus::LeafCheck), leaf(2, NodeStatus::LeafCross)};
    CHECK_FALSE(is_ambiguous(c, 0));
    CHECK(zero_deadends(c) == std::set<NodeId>{2});
}

TEST_CASE("0-deadends need X-free subtrees with only crossed leaves") {
    TreeView t;
    t.root = 0;
    t.nodes = {inner(0, {{1, P}, {2, P}}), inner(1, {{3, P}, {4, P}}), inner(2, {{5, X}}, true),
               leaf(3, NodeStatus::LeafCross), leaf(4, NodeStatus::LeafCross), leaf(5, NodeStatus::LeafCross)};
    CHECK(zero_deadends(t) == std::set<NodeId>{1, 3, 4, 5});
}

TEST_CASE("report invariants on random forests (property)") {
    testgen::Rng rng(62);
    for (int i = 0; i < 120; ++i) {
        const Model m = testgen::random_model(rng);
        testgen::FormulaGen gen(rng);
        const Formula phi = gen.state();
        SynthOptions so;
        so.node_budget = 200000;
        std::shared_ptr<Forest> f;
        try {
            f = build_alternative(m.mdp, m.skeleton, phi, {}, so);
        } catch (const BudgetExceeded&) {
            continue;
        }
        const auto reports = analyse(*f);
        REQUIRE(reports.size() == f->trees().size());
        for (const auto& tr : f->trees()) {
            const TreeView v = view_of(*f, tr.id);
            const BsccReport& r = reports[tr.id];
            CHECK(r.zero_deadend_nodes == zero_deadends(v));
            for (const auto& root : r.roots) {
                const TableauNode& n = f->node(root.node);
                CHECK(n.poised());
                CHECK(r.ambiguity.at(root.node));
                CHECK(is_ambiguous(v, root.node));
                // χ = 1 exactly when the subtree holds a Yes-Loop leaf.
                bool yes = false;
                std::vector<NodeId> stack{root.node};
                while (!stack.empty()) {
                    const TableauNode& w = f->node(stack.back());
                    stack.pop_back();
                    yes |= w.status == NodeStatus::LeafYesLoop;
                    for (const auto& [c, k] : w.children) stack.push_back(c);
                }
                CHECK(root.chi == (yes ? 1 : 0));
            }
            for (NodeId z : r.zero_deadend_nodes) {
                const TableauNode& n = f->node(z);
                for (const auto& [c, k] : n.children) {
                    CHECK(k == EdgeKind::Plus);
                    CHECK(r.zero_deadend_nodes.count(c) == 1);
                }
                if (n.children.empty()) CHECK(n.status == NodeStatus::LeafCross);
            }
        }
        const ConstraintProgram g = gamma(*f);
        std::size_t forced = 0;
        for (const auto& r : reports) forced += r.roots.size();
        CHECK(g.constraints().size() <= f->program().constraints().size() + forced);
    }
}

TEST_CASE("DOT output names every tree") {
    const Model m = load_model(std::string(PCTL_TEST_DATA_DIR) + "/gamble.json");
    const auto f = build_alternative(m.mdp, m.skeleton, parse("P>=0.3 F G a"), {});
    const auto reports = analyse(*f);
    const std::string dot = to_dot(*f, &reports);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("cluster_t0") != std::string::npos);
    CHECK(dot.find("cluster_t1") != std::string::npos);
}
