#include "pctl/tableau.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace pctl {

namespace {

Rel to_rel(Cmp c) {
    switch (c) {
        case Cmp::Lt: return Rel::Lt;
        case Cmp::Le: return Rel::Le;
        case Cmp::Gt: return Rel::Gt;
        case Cmp::Ge: return Rel::Ge;
    }
    return Rel::Eq;
}

// Preference classes; lower fires first.
int rank(Rule r) {
    switch (r) {
        case Rule::Top: case Rule::Cross: return 0;
        case Rule::NegNeg: case Rule::NegP: case Rule::PNeg: return 1;
        case Rule::And: case Rule::NegAnd: return 2;
        case Rule::PTrivial: return 3;
        case Rule::PStatePos: case Rule::PStateNeg: return 4;
        case Rule::P: return 5;
        case Rule::U: case Rule::NegU: case Rule::NegX: return 6;
        default: return 99;
    }
}

// Rule that a non-poised formula admits at a state; None for X formulas.
Rule rule_for(const Formula& f, const std::set<std::string>& labels) {
    if (is_classical(f)) return classical_eval(labels, f) ? Rule::Top : Rule::Cross;
    switch (f.kind()) {
        case Kind::Not:
            switch (f.sub().kind()) {
                case Kind::Not: return Rule::NegNeg;
                case Kind::Prob: return Rule::NegP;
                case Kind::And: return Rule::NegAnd;
                case Kind::Next: return Rule::NegX;
                case Kind::Until: return Rule::NegU;
                default: return Rule::None;
            }
        case Kind::And: return Rule::And;
        case Kind::Prob:
            if (f.sub().is(Kind::Not)) return Rule::PNeg;
            if (rewrite_p(f)) return Rule::PTrivial;
            if (is_state_formula(f.sub())) return is_lower(f.cmp()) ? Rule::PStatePos : Rule::PStateNeg;
            return Rule::P;
        case Kind::Until: return Rule::U;
        default: return Rule::None;
    }
}

bool is_x_eventuality(const Formula& f) { return f.is(Kind::Next) && f.sub().is(Kind::Until); }

bool fulfilled(const std::vector<BranchEntry>& br, std::size_t from, std::size_t to, const Formula& target) {
    for (std::size_t j = from; j <= to && j < br.size(); ++j)
        if (br[j].set->contains(target)) return true;
    return false;
}

bool indistinguishable(const BranchEntry& a, const BranchEntry& b) { return a.pair == b.pair && *a.set == *b.set; }

}  // namespace

const char* rule_name(Rule r) {
    switch (r) {
        case Rule::Top: return "top";
        case Rule::Cross: return "cross";
        case Rule::Check: return "check";
        case Rule::NegNeg: return "negneg";
        case Rule::NegP: return "negP";
        case Rule::PNeg: return "Pneg";
        case Rule::And: return "and";
        case Rule::NegAnd: return "negand";
        case Rule::PTrivial: return "P-trivial";
        case Rule::PStatePos: return "P-state+";
        case Rule::PStateNeg: return "P-state-";
        case Rule::P: return "P";
        case Rule::PTop: return "Ptop";
        case Rule::PCross: return "Pcross";
        case Rule::U: return "U";
        case Rule::NegU: return "negU";
        case Rule::NegX: return "negX";
        case Rule::A: return "A";
        case Rule::Prescribed: return "prescribed";
        case Rule::YesLoop: return "yes-loop";
        case Rule::NoLoop: return "no-loop";
        case Rule::X: return "X";
        case Rule::None: return "none";
    }
    return "?";
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

bool TableauNode::poised() const {
    if (set.empty()) return false;
    return std::all_of(set.begin(), set.end(), [](const Formula& f) { return f.is(Kind::Next); });
}

// ── Choice keys ─────────────────────────────────────────────────────────────

bool operator<(const ChoiceKey& a, const ChoiceKey& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.pair != b.pair) return a.pair < b.pair;
    if (a.kind == ChoiceKey::Kind::Action) return a.action < b.action;
    if (int c = canonical_compare(a.body, b.body); c != 0) return c < 0;
    return std::tie(a.cmp, a.z) < std::tie(b.cmp, b.z);
}

std::string ChoiceKey::str(const Mdp& mdp) const {
    std::string where = "m" + std::to_string(pair.mode) + "," + mdp.states.at(pair.state);
    if (kind == Kind::Action) return "A[" + where + "] " + mdp.actions.at(action);
    return "P[" + where + "] " + to_string(body) + " " + to_string(cmp) + " " + z.str();
}

std::vector<Side> parse_script(const std::string& script) {
    std::vector<Side> out;
    for (char c : script) {
        if (c == 'L' || c == 'l') out.push_back(Side::Left);
        else if (c == 'R' || c == 'r') out.push_back(Side::Right);
        else if (c == ' ' || c == ',') continue;
        else throw std::invalid_argument(std::string("script: unexpected character '") + c + "'");
    }
    return out;
}

// ── Blocking ────────────────────────────────────────────────────────────────

std::optional<std::size_t> yes_blocker(const std::vector<BranchEntry>& br) {
    if (br.size() < 2) return std::nullopt;
    const std::size_t w = br.size() - 1;
    for (std::size_t i = w; i-- > 0;) {
        if (!br[i].candidate || !indistinguishable(br[i], br[w])) continue;
        bool ok = true;
        for (const Formula& f : *br[i].set)
            if (is_x_eventuality(f) && !fulfilled(br, i + 1, w, f.sub().rhs())) {
                ok = false;
                break;
            }
        if (ok) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> no_blocker(const std::vector<BranchEntry>& br) {
    if (br.size() < 3) return std::nullopt;
    const std::size_t w = br.size() - 1;
    for (std::size_t v = w; v-- > 0;) {
        if (!br[v].candidate || !indistinguishable(br[v], br[w])) continue;
        for (std::size_t u = v; u-- > 0;) {
            if (!br[u].candidate || !indistinguishable(br[u], br[w])) continue;
            bool ok = true;
            for (const Formula& f : *br[u].set) {
                if (!is_x_eventuality(f)) continue;
                const Formula& target = f.sub().rhs();
                if (fulfilled(br, v + 1, w, target) && !fulfilled(br, u + 1, v, target)) {
                    ok = false;
                    break;
                }
            }
            if (ok) return u;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> idle_blocker(const std::vector<BranchEntry>& br) {
    if (br.size() < 2) return std::nullopt;
    const std::size_t w = br.size() - 1;
    for (std::size_t v = w; v-- > 0;) {
        if (!br[v].candidate || !indistinguishable(br[v], br[w])) continue;
        const bool idle = std::none_of(br[v].set->begin(), br[v].set->end(), [&](const Formula& f) {
            return is_x_eventuality(f) && fulfilled(br, v + 1, w, f.sub().rhs());
        });
        if (idle) return v;
    }
    return std::nullopt;
}

// ── Forest ──────────────────────────────────────────────────────────────────

Forest::Forest(const Mdp& mdp, const PolicySkeleton& skeleton, TableauOptions opts)
    : mdp_(mdp), skeleton_(skeleton), opts_(std::move(opts)) {}

void Forest::build(const Formula& phi, ChoicePolicy& policy) {
    if (!nodes_.empty()) throw std::logic_error("Forest::build called twice");
    policy_ = &policy;
    derive(skeleton_.initial_pair(mdp_), phi, true);
    policy_ = nullptr;
}

std::size_t Forest::action_choices() const {
    return std::count_if(trail_.begin(), trail_.end(),
                         [](const ChoiceRecord& r) { return r.key.kind == ChoiceKey::Kind::Action; });
}

std::size_t Forest::prob_choices() const { return trail_.size() - action_choices(); }

VarId Forest::action_var(Pair p, ActionId a) { return program_.add_var(VarInfo::action_var(p, a)); }

std::string Forest::node_label(NodeId id) const { return "u" + std::to_string(id); }

TreeId Forest::derive(Pair pair, const Formula& f, bool initial) {
    const auto t = static_cast<TreeId>(trees_.size());
    trees_.push_back(TableauTree{t, 0, pair, f, {}});
    const NodeId root = add_node(t, std::nullopt, pair, FormulaSet{f}, EdgeKind::Plus);
    trees_[t].root = root;
    if (initial) program_.add(Polynomial::var(nodes_[root].var), Rel::Eq, 1.0);

    std::vector<NodeId> stack{root};
    while (!stack.empty() && !aborted_) {
        const NodeId u = stack.back();
        stack.pop_back();
        expand(u);
        const auto& ch = nodes_[u].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(it->first);
    }
    return t;
}

NodeId Forest::add_node(TreeId tree, std::optional<NodeId> parent, Pair pair, FormulaSet set, EdgeKind edge) {
    if (nodes_.size() >= opts_.node_budget)
        throw BudgetExceeded("tableau node budget of " + std::to_string(opts_.node_budget) + " exhausted");
    const auto id = static_cast<NodeId>(nodes_.size());
    TableauNode n;
    n.id = id;
    n.tree = tree;
    n.pair = pair;
    n.parent = parent;
    n.depth = parent ? nodes_[*parent].depth + 1 : 0;
    n.var = program_.add_var(VarInfo::formula(id, pair, fnv1a(set.str())));
    n.set = std::move(set);
    nodes_.push_back(std::move(n));
    trees_[tree].nodes.push_back(id);
    if (parent) nodes_[*parent].children.emplace_back(id, edge);
    return id;
}

void Forest::emit(NodeId u, Polynomial lhs, Rel rel, Polynomial rhs) {
    Constraint c{std::move(lhs), rel, std::move(rhs)};
    nodes_[u].emitted.push_back(c);
    program_.add(std::move(c));
}

void Forest::gamma_one(NodeId u, Rule rule, const Formula& pivot, FormulaSet child) {
    nodes_[u].status = NodeStatus::Inner;
    nodes_[u].rule = rule;
    nodes_[u].pivot = pivot;
    const NodeId c = add_node(nodes_[u].tree, u, nodes_[u].pair, std::move(child), EdgeKind::Plus);
    emit(u, Polynomial::var(nodes_[u].var), Rel::Eq, Polynomial::var(nodes_[c].var));
}

void Forest::leaf(NodeId u, Rule rule, NodeStatus status, const Formula& pivot) {
    nodes_[u].status = status;
    nodes_[u].rule = rule;
    nodes_[u].pivot = pivot;
}

void Forest::flag_conflict() {
    conflict_ = true;
    if (opts_.stop_on_conflict) {
        aborted_ = true;
        complete_ = false;
    }
}

Side Forest::decide(NodeId u, const ChoiceKey& key, Side preferred) {
    ChoiceRecord rec{key, preferred};
    if (auto it = memo_.find(key); it != memo_.end()) {
        rec.taken = it->second;
    } else {
        if (opts_.preference)
            if (auto p = opts_.preference(key)) preferred = *p;
        rec.taken = policy_->choose(key, preferred);
        memo_.emplace(key, rec.taken);
        trail_.push_back(rec);
    }
    nodes_[u].choice = rec;
    return rec.taken;
}

// ── Γ lookups ───────────────────────────────────────────────────────────────

const std::vector<GammaKey>& Forest::tree_keys(TreeId t) const {
    if (auto it = tree_keys_.find(t); it != tree_keys_.end()) return it->second;
    std::vector<GammaKey> keys;
    for (NodeId n : trees_[t].nodes) {
        const auto& node = nodes_[n];
        keys.insert(keys.end(), node.keys.begin(), node.keys.end());
        if (node.merged) {
            const auto& sub = tree_keys(*node.merged);
            keys.insert(keys.end(), sub.begin(), sub.end());
        }
    }
    return tree_keys_.emplace(t, std::move(keys)).first->second;
}

template <class Pred>
const GammaKey* Forest::find_key(NodeId u, Pred&& pred) const {
    for (auto v = nodes_[u].parent; v; v = nodes_[*v].parent) {
        const auto& node = nodes_[*v];
        for (const auto& k : node.keys)
            if (pred(k)) return &k;
        if (node.merged)
            for (const auto& k : tree_keys(*node.merged))
                if (pred(k)) return &k;
    }
    return nullptr;
}

std::optional<bool> Forest::lookup_action(NodeId u, Pair p, ActionId a) const {
    const GammaKey* k = find_key(u, [&](const GammaKey& g) {
        return g.kind == GammaKey::Kind::Action && g.pair == p && g.action == a;
    });
    return k ? std::optional<bool>(k->value) : std::nullopt;
}

std::optional<bool> Forest::lookup_prob(NodeId u, Pair p, const Formula& body, Cmp cmp, Bound z) const {
    const GammaKey* k = find_key(u, [&](const GammaKey& g) {
        return g.kind == GammaKey::Kind::Prob && g.pair == p && g.cmp == cmp && g.z == z && g.body == body;
    });
    return k ? std::optional<bool>(k->value) : std::nullopt;
}

bool Forest::lookup_prescribed(NodeId u, Pair p) const {
    return find_key(u, [&](const GammaKey& g) { return g.kind == GammaKey::Kind::Prescribed && g.pair == p; }) !=
           nullptr;
}

// ── Rules ───────────────────────────────────────────────────────────────────

void Forest::expand(NodeId u) {
    const Pair p = nodes_[u].pair;
    const FormulaSet set = nodes_[u].set;
    if (set.empty()) {
        leaf(u, Rule::Check, NodeStatus::LeafCheck, Formula{});
        emit(u, Polynomial::var(nodes_[u].var), Rel::Eq, 1.0);
        return;
    }

    Rule best = Rule::None;
    Formula pivot;
    for (const Formula& f : set) {  // canonical order, so the first hit per rank wins
        const Rule r = rule_for(f, mdp_.labels[p.state]);
        if (r != Rule::None && (best == Rule::None || rank(r) < rank(best))) {
            best = r;
            pivot = f;
        }
    }
    if (best == Rule::None) return apply_poised(u);
    const FormulaSet rest = set.without(pivot);
    switch (best) {
        case Rule::Top: gamma_one(u, best, pivot, rest); return;
        case Rule::Cross:
            leaf(u, best, NodeStatus::LeafCross, pivot);
            emit(u, Polynomial::var(nodes_[u].var), Rel::Eq, 0.0);
            return;
        case Rule::NegNeg: gamma_one(u, best, pivot, rest.with({pivot.sub().sub()})); return;
        case Rule::NegP:
        case Rule::PNeg: gamma_one(u, best, pivot, rest.with({*push_negation(pivot)})); return;
        case Rule::And: gamma_one(u, best, pivot, rest.with({pivot.lhs(), pivot.rhs()})); return;
        case Rule::PTrivial: gamma_one(u, best, pivot, rest.with({*rewrite_p(pivot)})); return;
        case Rule::PStatePos: gamma_one(u, best, pivot, rest.with({pivot.sub()})); return;
        case Rule::PStateNeg: gamma_one(u, best, pivot, rest.with({neg(pivot.sub())})); return;
        case Rule::NegX: gamma_one(u, best, pivot, rest.with({next(neg(pivot.sub().sub()))})); return;
        case Rule::P: apply_prob(u, pivot); return;
        default: break;
    }

    // Two-way disjoint unions: NegAnd, U, NegU.
    FormulaSet left, right;
    if (best == Rule::NegAnd) {
        const Formula& g = pivot.sub().lhs();
        const Formula& h = pivot.sub().rhs();
        left = rest.with({neg(g)});
        right = rest.with({g, neg(h)});
    } else if (best == Rule::U) {
        left = rest.with({pivot.rhs()});
        right = rest.with({pivot.lhs(), neg(pivot.rhs()), next(pivot)});
    } else {
        const Formula& ut = pivot.sub();
        left = rest.with({neg(ut.lhs()), neg(ut.rhs())});
        right = rest.with({ut.lhs(), neg(ut.rhs()), next(pivot)});
    }
    nodes_[u].status = NodeStatus::Inner;
    nodes_[u].rule = best;
    nodes_[u].pivot = pivot;
    const TreeId t = nodes_[u].tree;
    const NodeId c1 = add_node(t, u, p, std::move(left), EdgeKind::Plus);
    const NodeId c2 = add_node(t, u, p, std::move(right), EdgeKind::Plus);
    emit(u, Polynomial::var(nodes_[u].var), Rel::Eq,
         Polynomial::var(nodes_[c1].var) + Polynomial::var(nodes_[c2].var));
}

void Forest::apply_prob(NodeId u, const Formula& f) {
    const Pair p = nodes_[u].pair;
    const Cmp cn = is_lower(f.cmp()) ? f.cmp() : complement(f.cmp());
    const Bound z = f.bound();
    const Formula& body = f.sub();
    const bool left_holds = is_lower(f.cmp());

    if (auto known = lookup_prob(u, p, body, cn, z)) {
        if (*known == left_holds) {
            gamma_one(u, Rule::PTop, f, nodes_[u].set.without(f));
        } else {
            leaf(u, Rule::PCross, NodeStatus::LeafCross, f);
            emit(u, Polynomial::var(nodes_[u].var), Rel::Eq, 0.0);
        }
        return;
    }

    ChoiceKey key{ChoiceKey::Kind::Prob, p, 0, body, cn, z};
    const bool holds = decide(u, key, left_holds ? Side::Left : Side::Right) == Side::Left;

    TreeId j;
    if (auto it = sub_memo_.find({p, body}); it != sub_memo_.end()) {
        j = it->second;
    } else {
        j = derive(p, body, false);
        sub_memo_.emplace(std::make_pair(p, body), j);
    }
    const VarId xj = nodes_[trees_[j].root].var;
    emit(u, Polynomial::var(xj), to_rel(holds ? cn : complement(cn)), z.value());

    nodes_[u].keys.push_back(GammaKey{GammaKey::Kind::Prob, p, 0, body, cn, z, holds});
    nodes_[u].merged = j;
    gamma_one(u, Rule::P, f, nodes_[u].set);
}

void Forest::apply_poised(NodeId u) {
    const Pair p = nodes_[u].pair;
    const VarId xu = nodes_[u].var;

    for (ActionId a : mdp_.enabled[p.state]) {
        if (lookup_action(u, p, a)) continue;
        const bool prescribed = decide(u, ChoiceKey{ChoiceKey::Kind::Action, p, a, {}, Cmp::Ge, {}}, Side::Right) ==
                                Side::Right;
        const VarId xa = action_var(p, a);
        if (!prescribed) emit(u, Polynomial::var(xa), Rel::Eq, 0.0);
        else if (opts_.deterministic) emit(u, Polynomial::var(xa), Rel::Eq, 1.0);
        else emit(u, Polynomial::var(xa), Rel::Gt, 0.0);
        nodes_[u].keys.push_back(GammaKey{GammaKey::Kind::Action, p, a, {}, Cmp::Ge, {}, prescribed});
        nodes_[u].action = a;
        gamma_one(u, Rule::A, Formula{}, nodes_[u].set);
        return;
    }

    if (!lookup_prescribed(u, p)) {
        Polynomial sum;
        std::size_t count = 0;
        for (ActionId a : mdp_.enabled[p.state])
            if (*lookup_action(u, p, a)) {
                sum += Polynomial::var(action_var(p, a));
                ++count;
            }
        emit(u, sum, Rel::Eq, 1.0);
        nodes_[u].keys.push_back(GammaKey{GammaKey::Kind::Prescribed, p, 0, {}, Cmp::Ge, {}, true});
        gamma_one(u, Rule::Prescribed, Formula{}, nodes_[u].set);
        if (count == 0 || (opts_.deterministic && count > 1)) flag_conflict();
        return;
    }

    // Loop checks against X-expanded ancestors of the same tree.
    std::vector<NodeId> path;
    for (std::optional<NodeId> v = u; v; v = nodes_[*v].parent) path.push_back(*v);
    std::reverse(path.begin(), path.end());
    std::vector<BranchEntry> branch;
    branch.reserve(path.size());
    for (NodeId v : path)
        branch.push_back(BranchEntry{nodes_[v].pair, &nodes_[v].set, v != u && nodes_[v].rule == Rule::X});

    auto loop = [&](Rule rule, NodeStatus status, NodeId target) {
        leaf(u, rule, status, Formula{});
        nodes_[u].backlink = target;
        emit(u, Polynomial::var(xu), Rel::Eq, Polynomial::var(nodes_[target].var));
    };
    if (auto v = yes_blocker(branch)) return loop(Rule::YesLoop, NodeStatus::LeafYesLoop, path[*v]);
    if (auto v = no_blocker(branch)) return loop(Rule::NoLoop, NodeStatus::LeafNoLoop, path[*v]);
    if (opts_.prune_idle)
        if (auto v = idle_blocker(branch)) return loop(Rule::NoLoop, NodeStatus::LeafNoLoop, path[*v]);
    apply_x(u);
}

void Forest::apply_x(NodeId u) {
    const Pair p = nodes_[u].pair;
    const ModeId m2 = skeleton_.delta[p.mode][p.state];

    std::vector<ActionId> prescribed;
    for (ActionId a : mdp_.enabled[p.state])
        if (*lookup_action(u, p, a)) prescribed.push_back(a);
    std::set<StateId> targets;
    for (ActionId a : prescribed)
        for (StateId t : succ(mdp_, p.state, a)) targets.insert(t);

    nodes_[u].rule = Rule::X;
    const VarId xu = nodes_[u].var;
    if (targets.empty()) {
        nodes_[u].status = NodeStatus::LeafCross;
        emit(u, Polynomial::var(xu), Rel::Eq, 0.0);
        return;
    }
    nodes_[u].status = NodeStatus::Inner;

    FormulaSet next_set;
    for (const Formula& f : nodes_[u].set) next_set.insert(f.sub());
    std::map<StateId, VarId> child_var;
    for (StateId t : targets) {
        const NodeId c = add_node(nodes_[u].tree, u, Pair{m2, t}, next_set, EdgeKind::X);
        child_var[t] = nodes_[c].var;
    }

    Polynomial rhs;
    for (ActionId a : prescribed) {
        const VarId xa = action_var(p, a);
        for (const auto& tr : mdp_.dist(p.state, a)) {
            if (tr.prob <= 0.0) continue;
            const VarId xc = child_var.at(tr.target);
            if (opts_.deterministic) rhs += Polynomial::var(xc, tr.prob);
            else rhs += Polynomial::monomial(tr.prob, {xa, xc});
        }
    }
    emit(u, Polynomial::var(xu), Rel::Eq, rhs);
}

}  // namespace pctl
