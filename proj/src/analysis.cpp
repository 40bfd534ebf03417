#include "pctl/analysis.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace pctl {

const TreeView::Node& TreeView::at(NodeId id) const {
    for (const auto& n : nodes)
        if (n.id == id) return n;
    throw std::out_of_range("TreeView: unknown node " + std::to_string(id));
}

TreeView view_of(const Forest& forest, TreeId tree) {
    const auto& tr = forest.trees().at(tree);
    TreeView v;
    v.root = tr.root;
    v.nodes.reserve(tr.nodes.size());
    for (NodeId id : tr.nodes) {
        const auto& n = forest.node(id);
        v.nodes.push_back(TreeView::Node{id, n.children, n.status, n.poised(), n.backlink});
    }
    return v;
}

// ── SCC ─────────────────────────────────────────────────────────────────────

std::vector<int> scc_components(const std::vector<std::vector<int>>& adj, std::vector<bool>* bottom) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    std::vector<std::pair<int, std::size_t>> call;  // vertex, next edge
    int counter = 0, ncomp = 0;

    for (int s = 0; s < n; ++s) {
        if (index[s] >= 0) continue;
        call.emplace_back(s, 0);
        while (!call.empty()) {
            auto& [v, e] = call.back();
            if (e == 0 && index[v] < 0) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            if (e < adj[v].size()) {
                const int w = adj[v][e++];
                if (index[w] < 0) call.emplace_back(w, 0);
                else if (on_stack[w]) low[v] = std::min(low[v], index[w]);
                continue;
            }
            if (low[v] == index[v]) {
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = ncomp;
                } while (w != v);
                ++ncomp;
            }
            const int done = v;
            call.pop_back();
            if (!call.empty()) {
                const int parent = call.back().first;
                low[parent] = std::min(low[parent], low[done]);
            }
        }
    }
    if (bottom) {
        bottom->assign(ncomp, true);
        for (int v = 0; v < n; ++v)
            for (int w : adj[v])
                if (comp[w] != comp[v]) (*bottom)[comp[v]] = false;
    }
    return comp;
}

// ── Per-tree analysis ───────────────────────────────────────────────────────

namespace {

struct Indexed {
    const TreeView& t;
    std::unordered_map<NodeId, int> pos;
    std::vector<int> order;  // preorder positions
    std::vector<int> pre, post;

    explicit Indexed(const TreeView& tv) : t(tv) {
        for (std::size_t i = 0; i < t.nodes.size(); ++i) pos.emplace(t.nodes[i].id, static_cast<int>(i));
        const int n = static_cast<int>(t.nodes.size());
        pre.assign(n, -1);
        post.assign(n, -1);
        int clock = 0;
        std::vector<std::pair<int, std::size_t>> st{{pos.at(t.root), 0}};
        pre[st.back().first] = clock++;
        order.push_back(st.back().first);
        while (!st.empty()) {
            auto& [v, e] = st.back();
            const auto& ch = t.nodes[v].children;
            if (e < ch.size()) {
                const int c = pos.at(ch[e++].first);
                pre[c] = clock++;
                order.push_back(c);
                st.emplace_back(c, 0);
            } else {
                post[v] = clock;
                st.pop_back();
            }
        }
    }

    bool in_subtree(int u, int x) const { return pre[u] <= pre[x] && pre[x] < post[u]; }
};

// Bottom-up flags in reverse preorder (children before parents).
std::vector<char> deadend_flags(const Indexed& ix) {
    std::vector<char> dead(ix.t.nodes.size(), 0);
    for (auto it = ix.order.rbegin(); it != ix.order.rend(); ++it) {
        const auto& n = ix.t.nodes[*it];
        if (n.children.empty()) {
            dead[*it] = n.status == NodeStatus::LeafCross;
            continue;
        }
        bool d = true;
        for (const auto& [c, kind] : n.children)
            if (kind == EdgeKind::X || !dead[ix.pos.at(c)]) d = false;
        dead[*it] = d;
    }
    return dead;
}

std::set<NodeId> to_ids(const Indexed& ix, const std::vector<char>& flags) {
    std::set<NodeId> out;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) out.insert(ix.t.nodes[i].id);
    return out;
}

// Per-node: Subtree contains a ✓ leaf / an X-edge into a 0-deadend / a Yes-Loop leaf.
struct SubtreeFlags {
    std::vector<char> check, x_zero, yes;
};

SubtreeFlags subtree_flags(const Indexed& ix, const std::vector<char>& dead) {
    const std::size_t n = ix.t.nodes.size();
    SubtreeFlags f{std::vector<char>(n, 0), std::vector<char>(n, 0), std::vector<char>(n, 0)};
    for (auto it = ix.order.rbegin(); it != ix.order.rend(); ++it) {
        const int v = *it;
        const auto& node = ix.t.nodes[v];
        f.check[v] = node.status == NodeStatus::LeafCheck;
        f.yes[v] = node.status == NodeStatus::LeafYesLoop;
        for (const auto& [cid, kind] : node.children) {
            const int c = ix.pos.at(cid);
            f.check[v] |= f.check[c];
            f.yes[v] |= f.yes[c];
            f.x_zero[v] |= f.x_zero[c];
            if (kind == EdgeKind::X && dead[c]) f.x_zero[v] = 1;
        }
    }
    return f;
}

}  // namespace

std::set<NodeId> zero_deadends(const TreeView& t) {
    Indexed ix(t);
    return to_ids(ix, deadend_flags(ix));
}

bool is_ambiguous(const TreeView& t, NodeId u) {
    Indexed ix(t);
    const auto flags = subtree_flags(ix, deadend_flags(ix));
    const int v = ix.pos.at(u);
    return !flags.check[v] && !flags.x_zero[v];
}

bool is_ambiguous(const TreeView& t, NodeId u, const std::set<NodeId>& zero) {
    Indexed ix(t);
    std::vector<char> dead(t.nodes.size(), 0);
    for (NodeId z : zero) dead[ix.pos.at(z)] = 1;
    const auto flags = subtree_flags(ix, dead);
    const int v = ix.pos.at(u);
    return !flags.check[v] && !flags.x_zero[v];
}

BsccReport bscc_roots(const TreeView& t) {
    Indexed ix(t);
    const auto dead = deadend_flags(ix);
    const auto flags = subtree_flags(ix, dead);
    const int n = static_cast<int>(t.nodes.size());

    // Tree edges plus backlinks, restricted to nodes outside 0(T).
    std::vector<std::vector<int>> adj(n);
    for (int v = 0; v < n; ++v) {
        if (dead[v]) continue;
        for (const auto& [cid, kind] : t.nodes[v].children) {
            const int c = ix.pos.at(cid);
            if (!dead[c]) adj[v].push_back(c);
        }
        if (auto b = t.nodes[v].backlink) {
            const int c = ix.pos.at(*b);
            if (!dead[c]) adj[v].push_back(c);
        }
    }
    std::vector<bool> bottom;
    const auto comp = scc_components(adj, &bottom);

    // |M(u)| = live nodes in Subtree(u).
    std::vector<int> live(n, 0);
    for (auto it = ix.order.rbegin(); it != ix.order.rend(); ++it) {
        const int v = *it;
        live[v] = dead[v] ? 0 : 1;
        for (const auto& ch : t.nodes[v].children) live[v] += live[ix.pos.at(ch.first)];
    }
    std::vector<std::vector<int>> members(bottom.size());
    for (int v = 0; v < n; ++v)
        if (!dead[v]) members[comp[v]].push_back(v);

    BsccReport r;
    r.zero_deadend_nodes = to_ids(ix, dead);
    for (int v : ix.order) {
        const auto& node = t.nodes[v];
        if (!node.poised) continue;
        const bool amb = !flags.check[v] && !flags.x_zero[v];
        r.ambiguity[node.id] = amb;
        if (!amb || dead[v] || !bottom[comp[v]]) continue;
        const auto& mem = members[comp[v]];
        if (static_cast<int>(mem.size()) != live[v]) continue;
        if (!std::all_of(mem.begin(), mem.end(), [&](int x) { return ix.in_subtree(v, x); })) continue;
        r.roots.push_back(BsccRoot{node.id, flags.yes[v] ? 1 : 0});
    }
    std::sort(r.roots.begin(), r.roots.end(), [](const BsccRoot& a, const BsccRoot& b) { return a.node < b.node; });
    return r;
}

// ── Force and Gamma ─────────────────────────────────────────────────────────

std::vector<Constraint> force(const Forest& forest, TreeId, const BsccReport& report) {
    std::vector<Constraint> out;
    for (const auto& root : report.roots)
        out.push_back(Constraint{Polynomial::var(forest.node(root.node).var), Rel::Eq,
                                 Polynomial(static_cast<double>(root.chi))});
    return out;
}

std::vector<BsccReport> analyse(const Forest& forest) {
    std::vector<BsccReport> out;
    for (const auto& tr : forest.trees()) out.push_back(bscc_roots(view_of(forest, tr.id)));
    return out;
}

ConstraintProgram gamma(const Forest& forest) {
    ConstraintProgram p = forest.program();
    const auto reports = analyse(forest);
    for (const auto& tr : forest.trees())
        for (auto& c : force(forest, tr.id, reports[tr.id])) p.add(std::move(c));
    return p;
}

// ── Recurrence ──────────────────────────────────────────────────────────────

namespace {

using SparseRows = std::vector<std::vector<std::pair<int, double>>>;

// Power iteration on (I+M)/2 with Collatz–Wielandt bounds; M non-negative and irreducible.
bool spectral_radius_one(const SparseRows& m) {
    constexpr int kMaxIterations = 5000;
    constexpr double kTol = 1e-7;
    const std::size_t n = m.size();
    std::vector<double> v(n, 1.0), w(n, 0.0);
    double lo = 0.0, hi = 0.0;
    for (int it = 0; it < kMaxIterations; ++it) {
        lo = std::numeric_limits<double>::infinity();
        hi = 0.0;
        double top = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (const auto& [j, c] : m[i]) acc += c * v[j];
            w[i] = 0.5 * (v[i] + acc);
            lo = std::min(lo, w[i] / v[i]);
            hi = std::max(hi, w[i] / v[i]);
            top = std::max(top, w[i]);
        }
        if (2.0 * lo - 1.0 >= 1.0 - kTol) return true;
        if (2.0 * hi - 1.0 < 1.0 - kTol) return false;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / top;
    }
    return lo + hi - 1.0 >= 1.0 - kTol;
}

}  // namespace

std::vector<RecurrentLoop> recurrent_loops(const Forest& forest, const std::vector<BsccReport>& reports,
                                           const std::vector<double>& values) {
    std::vector<RecurrentLoop> out;
    for (const auto& tr : forest.trees()) {
        const BsccReport& rep = reports.at(tr.id);
        std::unordered_map<NodeId, int> pos;
        std::vector<NodeId> live;
        for (NodeId id : tr.nodes)
            if (!rep.zero_deadend_nodes.count(id)) {
                pos.emplace(id, static_cast<int>(live.size()));
                live.push_back(id);
            }
        std::vector<std::vector<int>> adj(live.size());
        for (std::size_t i = 0; i < live.size(); ++i) {
            const TableauNode& n = forest.node(live[i]);
            for (const auto& [c, kind] : n.children)
                if (auto it = pos.find(c); it != pos.end()) adj[i].push_back(it->second);
            if (n.backlink)
                if (auto it = pos.find(*n.backlink); it != pos.end()) adj[i].push_back(it->second);
        }
        const auto comp = scc_components(adj);
        std::map<int, std::vector<int>> members;
        for (std::size_t i = 0; i < live.size(); ++i) members[comp[i]].push_back(static_cast<int>(i));
        std::set<int> forced;
        for (const auto& r : rep.roots) forced.insert(comp[pos.at(r.node)]);

        for (const auto& [c, mem] : members) {
            if (mem.size() < 2 || forced.count(c)) continue;
            std::unordered_map<VarId, int> local;
            for (std::size_t k = 0; k < mem.size(); ++k) local.emplace(forest.node(live[mem[k]]).var, static_cast<int>(k));
            SparseRows m(mem.size());
            bool yes = false;
            for (std::size_t k = 0; k < mem.size(); ++k) {
                const TableauNode& n = forest.node(live[mem[k]]);
                yes |= n.status == NodeStatus::LeafYesLoop;
                const Polynomial self = Polynomial::var(n.var);
                for (const Constraint& e : n.emitted) {
                    if (e.rel != Rel::Eq || !(e.lhs == self)) continue;
                    for (const Term& t : e.rhs.terms())
                        for (std::size_t i = 0; i < t.vars.size(); ++i) {
                            auto it = local.find(t.vars[i]);
                            if (it == local.end()) continue;
                            double coef = t.coef;
                            for (std::size_t j = 0; j < t.vars.size(); ++j)
                                if (j != i) coef *= values.at(t.vars[j]);
                            m[k].emplace_back(it->second, coef);
                        }
                }
            }
            if (!spectral_radius_one(m)) continue;
            RecurrentLoop loop{tr.id, {}, yes};
            for (int i : mem) loop.nodes.push_back(live[i]);
            std::sort(loop.nodes.begin(), loop.nodes.end());
            out.push_back(std::move(loop));
        }
    }
    return out;
}

// ── DOT ─────────────────────────────────────────────────────────────────────

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

const char* status_color(NodeStatus s) {
    switch (s) {
        case NodeStatus::LeafCross: return "#f4cccc";
        case NodeStatus::LeafCheck: return "#d9ead3";
        case NodeStatus::LeafYesLoop: return "#cfe2f3";
        case NodeStatus::LeafNoLoop: return "#fff2cc";
        default: return "white";
    }
}

}  // namespace

std::string to_dot(const Forest& forest, const std::vector<BsccReport>* reports) {
    const auto& mdp = forest.mdp();
    const auto& sk = forest.skeleton();
    std::ostringstream o;
    o << "digraph tableau {\n  node [shape=box, style=filled, fontname=\"monospace\"];\n";
    for (const auto& tr : forest.trees()) {
        std::map<NodeId, int> chi;
        if (reports && tr.id < reports->size())
            for (const auto& r : (*reports)[tr.id].roots) chi[r.node] = r.chi;
        o << "  subgraph cluster_t" << tr.id << " {\n    label=\"T" << tr.id << ": " << escape(to_string(tr.formula))
          << "\";\n";
        for (NodeId id : tr.nodes) {
            const auto& n = forest.node(id);
            std::string label = forest.node_label(id) + " <" + sk.modes[n.pair.mode] + "," + mdp.states[n.pair.state] +
                                ">\\n" + escape(n.set.str()) + "\\n" + rule_name(n.rule);
            if (n.pivot.valid()) label += " " + escape(to_string(n.pivot));
            if (n.action) label += " " + escape(mdp.actions[*n.action]);
            if (n.choice) label += n.choice->taken == Side::Left ? " [L]" : " [R]";
            std::string color = status_color(n.status);
            std::string extra;
            if (auto it = chi.find(id); it != chi.end()) {
                label += "\\nBSCC root, chi=" + std::to_string(it->second);
                color = "#b4a7d6";
                extra = ", penwidth=3";
            }
            o << "    n" << id << " [label=\"" << label << "\", fillcolor=\"" << color << "\"" << extra << "];\n";
        }
        o << "  }\n";
        for (NodeId id : tr.nodes) {
            const auto& n = forest.node(id);
            for (const auto& [c, kind] : n.children)
                o << "  n" << id << " -> n" << c << " [label=\"" << rule_name(n.rule)
                  << (kind == EdgeKind::X ? " X" : " +") << "\"" << (kind == EdgeKind::X ? ", style=bold" : "")
                  << "];\n";
            if (n.backlink) o << "  n" << id << " -> n" << *n.backlink << " [style=dashed, constraint=false];\n";
            if (n.merged)
                o << "  n" << id << " -> n" << forest.trees()[*n.merged].root
                  << " [style=dotted, label=\"sub\", constraint=false];\n";
        }
    }
    o << "}\n";
    return o.str();
}

}  // namespace pctl
