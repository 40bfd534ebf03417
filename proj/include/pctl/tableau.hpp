// pctl/tableau.hpp: the sequent calculus: node store, inference rules,
// blocking and recursive P sub-derivations.
//
// Don't-know rules (A and P) are resolved on the fly by a ChoicePolicy, so the
// stored trees are already in chosen form: every don't-know node keeps the
// single selected child.

#ifndef PCTL_TABLEAU_HPP
#define PCTL_TABLEAU_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pctl/formula.hpp"
#include "pctl/model.hpp"
#include "pctl/program.hpp"

namespace pctl {

using NodeId = std::uint32_t;
using TreeId = std::uint32_t;

// Listed in decreasing order of preference.
enum class Rule : std::uint8_t {
    Top, Cross, Check, NegNeg, NegP, PNeg,
    And, NegAnd,
    PTrivial, PStatePos, PStateNeg,
    P, PTop, PCross,
    U, NegU, NegX,
    A, Prescribed, YesLoop, NoLoop, X,
    None
};
const char* rule_name(Rule r);

enum class EdgeKind : std::uint8_t { Plus, X };
enum class NodeStatus : std::uint8_t { Open, Inner, LeafCross, LeafCheck, LeafYesLoop, LeafNoLoop };
enum class Side : std::uint8_t { Left, Right };

inline Side other(Side s) { return s == Side::Left ? Side::Right : Side::Left; }

// Identity of a don't-know decision. P keys are normalized to the lower-bound
// side (≥ or >), so P≥z ψ and P<z ψ share one key; Left then means the
// normalized relation holds.
struct ChoiceKey {
    enum class Kind : std::uint8_t { Action, Prob };
    Kind kind = Kind::Action;
    Pair pair{};
    ActionId action = 0;  // Action
    Formula body;         // Prob
    Cmp cmp = Cmp::Ge;    // Prob: Ge or Gt
    Bound z{};            // Prob

    std::string str(const Mdp& mdp) const;
    friend bool operator<(const ChoiceKey& a, const ChoiceKey& b);
    friend bool operator==(const ChoiceKey& a, const ChoiceKey& b) { return !(a < b) && !(b < a); }
};

struct ChoiceRecord {
    ChoiceKey key;
    Side taken = Side::Left;
};

// Constraint facts a node adds to the Γ of its descendants.
struct GammaKey {
    enum class Kind : std::uint8_t { Action, Prob, Prescribed };
    Kind kind = Kind::Action;
    Pair pair{};
    ActionId action = 0;
    Formula body;
    Cmp cmp = Cmp::Ge;
    Bound z{};
    bool value = false;  // Action: prescribed (> 0); Prob: normalized relation holds
};

struct TableauNode {
    NodeId id = 0;
    TreeId tree = 0;
    Pair pair{};
    FormulaSet set;
    std::optional<NodeId> parent;
    std::vector<std::pair<NodeId, EdgeKind>> children;
    NodeStatus status = NodeStatus::Open;
    Rule rule = Rule::None;
    Formula pivot;                    // principal formula, when the rule has one
    std::optional<ActionId> action;   // A rule
    std::optional<NodeId> backlink;   // loop leaves
    std::optional<ChoiceRecord> choice;
    std::optional<TreeId> merged;     // P rule: sub-derivation whose Γ′ joins the branch
    std::vector<GammaKey> keys;
    std::vector<Constraint> emitted;  // constraints this node's rule added
    VarId var = 0;
    std::uint32_t depth = 0;

    bool poised() const;
    bool is_leaf() const { return status != NodeStatus::Open && status != NodeStatus::Inner; }
};

struct TableauTree {
    TreeId id = 0;
    NodeId root = 0;
    Pair pair{};
    Formula formula;
    std::vector<NodeId> nodes;
};

// Decides don't-know branchings; consulted once per key and forest build.
class ChoicePolicy {
public:
    virtual ~ChoicePolicy() = default;
    virtual Side choose(const ChoiceKey& key, Side preferred) = 0;
};

// Follows a fixed prefix of sides, then takes the preferred side.
class PrefixPolicy : public ChoicePolicy {
public:
    explicit PrefixPolicy(std::vector<Side> prefix = {}) : prefix_(std::move(prefix)) {}
    Side choose(const ChoiceKey&, Side preferred) override {
        return pos_ < prefix_.size() ? prefix_[pos_++] : (++pos_, preferred);
    }

private:
    std::vector<Side> prefix_;
    std::size_t pos_ = 0;
};

// "LRRL..." scripts: 'L'/'R' per decision, preferred side afterwards.
std::vector<Side> parse_script(const std::string& script);

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TableauOptions {
    bool deterministic = false;
    std::size_t node_budget = 1'000'000;
    bool stop_on_conflict = false;
    // No-Loop already at the second copy of a sequent when nothing was fulfilled in between.
    bool prune_idle = true;
    // Preferred side for first-time decisions. When unset or returning
    // nullopt: Right for A (prescribe first), the formula's own side for P.
    std::function<std::optional<Side>(const ChoiceKey&)> preference;
};

// One entry per node on a branch, root first. `candidate` marks nodes that
// may serve as blocking ancestors.
struct BranchEntry {
    Pair pair{};
    const FormulaSet* set = nullptr;
    bool candidate = false;
};

// Index of the yes-blocking ancestor of the last entry, if any.
std::optional<std::size_t> yes_blocker(const std::vector<BranchEntry>& branch);
// Index of the no-blocking ancestor u of the last entry, if any.
std::optional<std::size_t> no_blocker(const std::vector<BranchEntry>& branch);
// Index of an indistinguishable ancestor v of the last entry such that no
// X-eventuality of v is fulfilled after v on the branch.
std::optional<std::size_t> idle_blocker(const std::vector<BranchEntry>& branch);

class Forest {
public:
    Forest(const Mdp& mdp, const PolicySkeleton& skeleton, TableauOptions opts = {});

    // Builds T0 for φ and every sub-derivation it requires.
    void build(const Formula& phi, ChoicePolicy& policy);

    const Mdp& mdp() const { return mdp_; }
    const PolicySkeleton& skeleton() const { return skeleton_; }
    const TableauOptions& options() const { return opts_; }
    const std::vector<TableauNode>& nodes() const { return nodes_; }
    const TableauNode& node(NodeId id) const { return nodes_.at(id); }
    const std::vector<TableauTree>& trees() const { return trees_; }
    // Γ_init plus every constraint emitted by any rule in any tree.
    const ConstraintProgram& program() const { return program_; }
    // First-time decisions in the order they were taken.
    const std::vector<ChoiceRecord>& trail() const { return trail_; }
    std::size_t action_choices() const;
    std::size_t prob_choices() const;
    // An empty prescribed set or, in deterministic mode, more than one
    // prescribed action was met; Γ_final is then inconsistent.
    bool conflict() const { return conflict_; }
    // False if the build stopped early at a conflict.
    bool complete() const { return complete_; }

    VarId action_var(Pair p, ActionId a);
    std::string node_label(NodeId id) const;

private:
    TreeId derive(Pair pair, const Formula& f, bool initial);
    void expand(NodeId u);
    NodeId add_node(TreeId tree, std::optional<NodeId> parent, Pair pair, FormulaSet set, EdgeKind edge);
    void emit(NodeId u, Polynomial lhs, Rel rel, Polynomial rhs);
    void gamma_one(NodeId u, Rule rule, const Formula& pivot, FormulaSet child);
    void leaf(NodeId u, Rule rule, NodeStatus status, const Formula& pivot);
    Side decide(NodeId u, const ChoiceKey& key, Side preferred);

    std::optional<bool> lookup_action(NodeId u, Pair p, ActionId a) const;
    std::optional<bool> lookup_prob(NodeId u, Pair p, const Formula& body, Cmp cmp, Bound z) const;
    bool lookup_prescribed(NodeId u, Pair p) const;
    template <class Pred>
    const GammaKey* find_key(NodeId u, Pred&& pred) const;
    const std::vector<GammaKey>& tree_keys(TreeId t) const;

    void apply_poised(NodeId u);
    void apply_prob(NodeId u, const Formula& f);
    void apply_x(NodeId u);
    void flag_conflict();

    const Mdp& mdp_;
    const PolicySkeleton& skeleton_;
    TableauOptions opts_;
    ChoicePolicy* policy_ = nullptr;
    std::vector<TableauNode> nodes_;
    std::vector<TableauTree> trees_;
    ConstraintProgram program_;
    std::vector<ChoiceRecord> trail_;
    std::map<ChoiceKey, Side> memo_;
    std::map<std::pair<Pair, Formula>, TreeId> sub_memo_;
    mutable std::map<TreeId, std::vector<GammaKey>> tree_keys_;
    bool conflict_ = false;
    bool complete_ = true;
    bool aborted_ = false;
};

std::uint64_t fnv1a(const std::string& s);

}  // namespace pctl

#endif  // PCTL_TABLEAU_HPP
