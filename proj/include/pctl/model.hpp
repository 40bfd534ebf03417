// pctl/model.hpp: MDPs, finite-memory policies and induced Markov chains.
//
// States, actions and modes are interned to dense ids when a model is loaded.

#ifndef PCTL_MODEL_HPP
#define PCTL_MODEL_HPP

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pctl {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ModeId = std::uint32_t;

struct Pair {
    ModeId mode = 0;
    StateId state = 0;
    friend auto operator<=>(const Pair&, const Pair&) = default;
};

struct Transition {
    StateId target = 0;
    double prob = 0.0;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kStochasticTol = 1e-9;

// ── Mdp ─────────────────────────────────────────────────────────────────────

struct Mdp {
    std::vector<std::string> states;
    std::vector<std::set<std::string>> labels;
    std::vector<std::string> actions;
    StateId initial = 0;
    std::vector<std::vector<ActionId>> enabled;             // per state, ascending
    std::vector<std::vector<std::vector<Transition>>> trans;  // [state][action], by target

    std::size_t num_states() const { return states.size(); }
    std::size_t num_actions() const { return actions.size(); }
    bool is_enabled(StateId s, ActionId a) const;
    const std::vector<Transition>& dist(StateId s, ActionId a) const;

    std::optional<StateId> find_state(const std::string& name) const;
    std::optional<ActionId> find_action(const std::string& name) const;

    // Throws ModelError on any violated invariant.
    void validate() const;
};

// Successor states with non-zero probability, ascending. Throws if disabled.
std::vector<StateId> succ(const Mdp& mdp, StateId s, ActionId a);

// ── Policies ────────────────────────────────────────────────────────────────

struct PolicySkeleton {
    std::vector<std::string> modes;
    std::vector<ModeId> start;               // per state
    std::vector<std::vector<ModeId>> delta;  // [mode][state]

    static PolicySkeleton single_mode(std::size_t num_states, std::string name = "m");
    std::size_t num_modes() const { return modes.size(); }
    Pair initial_pair(const Mdp& mdp) const { return Pair{start[mdp.initial], mdp.initial}; }
    std::optional<ModeId> find_mode(const std::string& name) const;
    void validate(const Mdp& mdp) const;
};

using ActionDist = std::map<ActionId, double>;

struct Policy {
    PolicySkeleton skeleton;
    std::map<Pair, ActionDist> act;  // may be partial

    void validate(const Mdp& mdp) const;
};

// ── Markov chain ────────────────────────────────────────────────────────────

struct MarkovChain {
    std::vector<Pair> pairs;  // index 0 is the initial pair
    std::vector<std::vector<std::pair<std::size_t, double>>> trans;
    std::vector<std::set<std::string>> labels;
    std::map<Pair, std::size_t> index;

    std::size_t size() const { return pairs.size(); }
    std::size_t initial() const { return 0; }
};

// Restricted to pairs reachable from the skeleton's initial pair.
MarkovChain induced_chain(const Mdp& mdp, const Policy& policy);
// Same, rooted at `start` instead.
MarkovChain induced_chain(const Mdp& mdp, const Policy& policy, Pair start);

// ── JSON ────────────────────────────────────────────────────────────────────

struct Model {
    Mdp mdp;
    PolicySkeleton skeleton;
};

Model model_from_json(const nlohmann::json& j);
Model load_model(const std::string& path);
nlohmann::json model_to_json(const Model& m);

Policy policy_from_json(const nlohmann::json& j, const Mdp& mdp, const PolicySkeleton& sk);
Policy load_policy(const std::string& path, const Mdp& mdp, const PolicySkeleton& sk);
nlohmann::json policy_to_json(const Policy& p, const Mdp& mdp);

}  // namespace pctl

#endif  // PCTL_MODEL_HPP
