// pctl/analysis.hpp: 0-deadends, ambiguity, BSCC roots and the Force/Gamma
// operators over finished tableau trees.

#ifndef PCTL_ANALYSIS_HPP
#define PCTL_ANALYSIS_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pctl/program.hpp"
#include "pctl/tableau.hpp"

namespace pctl {

// Shape of one tree, detached from the forest so hand-made trees can be analysed.
struct TreeView {
    struct Node {
        NodeId id = 0;
        std::vector<std::pair<NodeId, EdgeKind>> children;
        NodeStatus status = NodeStatus::Inner;
        bool poised = false;
        std::optional<NodeId> backlink;
    };
    NodeId root = 0;
    std::vector<Node> nodes;

    const Node& at(NodeId id) const;
};

TreeView view_of(const Forest& forest, TreeId tree);

struct BsccRoot {
    NodeId node = 0;
    int chi = 0;
    friend bool operator==(const BsccRoot&, const BsccRoot&) = default;
};

struct BsccReport {
    std::vector<BsccRoot> roots;
    std::set<NodeId> zero_deadend_nodes;
    std::map<NodeId, bool> ambiguity;  // poised nodes only
    friend bool operator==(const BsccReport&, const BsccReport&) = default;
};

// 0(T): every node in a maximal X-link-free subtree whose leaves are all ✗.
std::set<NodeId> zero_deadends(const TreeView& t);
bool is_ambiguous(const TreeView& t, NodeId u);
bool is_ambiguous(const TreeView& t, NodeId u, const std::set<NodeId>& zero);
BsccReport bscc_roots(const TreeView& t);

// Strongly connected components of a directed graph (iterative Tarjan).
// Returns the component index per vertex; `bottom` marks components without
// outgoing edges.
std::vector<int> scc_components(const std::vector<std::vector<int>>& adj, std::vector<bool>* bottom = nullptr);

// x_u ≐ χ for every BSCC root of the tree.
std::vector<Constraint> force(const Forest& forest, TreeId tree, const BsccReport& report);

// Γ_final: every emitted constraint of every tree plus Force of every tree.
ConstraintProgram gamma(const Forest& forest);
std::vector<BsccReport> analyse(const Forest& forest);

// ── Recurrence ──────────────────────────────────────────────────────────────
// A strongly connected loop component outside every forced BSCC whose node
// equations, evaluated at fixed action values, have spectral radius 1. Its
// variables are then not determined by the equations alone.

struct RecurrentLoop {
    TreeId tree = 0;
    std::vector<NodeId> nodes;  // ascending
    bool yes_loop = false;      // contains a Yes-Loop leaf
    friend bool operator==(const RecurrentLoop&, const RecurrentLoop&) = default;
};

// `values` is indexed by VarId of the forest's program.
std::vector<RecurrentLoop> recurrent_loops(const Forest& forest, const std::vector<BsccReport>& reports,
                                           const std::vector<double>& values);

// Graphviz rendering of the forest; BSCC roots are highlighted when reports are given.
std::string to_dot(const Forest& forest, const std::vector<BsccReport>* reports = nullptr);

}  // namespace pctl

#endif  // PCTL_ANALYSIS_HPP
