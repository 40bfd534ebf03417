#include "pctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

namespace pctl {

namespace {

const std::vector<Transition> kNoTransitions;

template <typename Names>
std::optional<std::uint32_t> find_name(const Names& names, const std::string& n) {
    auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - names.begin());
}

void check_unique(const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw ModelError(std::string("empty ") + what + " name");
        if (!seen.insert(n).second) throw ModelError(std::string("duplicate ") + what + " '" + n + "'");
    }
}

}  // namespace

// ── Mdp ─────────────────────────────────────────────────────────────────────

bool Mdp::is_enabled(StateId s, ActionId a) const {
    const auto& e = enabled.at(s);
    return std::binary_search(e.begin(), e.end(), a);
}

const std::vector<Transition>& Mdp::dist(StateId s, ActionId a) const {
    if (s >= trans.size() || a >= trans[s].size()) return kNoTransitions;
    return trans[s][a];
}

std::optional<StateId> Mdp::find_state(const std::string& name) const { return find_name(states, name); }
std::optional<ActionId> Mdp::find_action(const std::string& name) const { return find_name(actions, name); }

void Mdp::validate() const {
    if (states.empty()) throw ModelError("model has no states");
    check_unique(states, "state");
    check_unique(actions, "action");
    if (labels.size() != states.size() || enabled.size() != states.size() || trans.size() != states.size())
        throw ModelError("inconsistent per-state tables");
    if (initial >= states.size()) throw ModelError("initial state out of range");
    for (StateId s = 0; s < states.size(); ++s) {
        if (enabled[s].empty()) throw ModelError("state '" + states[s] + "' has no enabled action");
        if (!std::is_sorted(enabled[s].begin(), enabled[s].end()))
            throw ModelError("enabled actions not sorted");
        if (trans[s].size() != actions.size()) throw ModelError("transition table has wrong width");
        for (ActionId a = 0; a < actions.size(); ++a) {
            const auto& d = trans[s][a];
            if (!is_enabled(s, a)) {
                if (!d.empty())
                    throw ModelError("transitions for disabled action '" + actions[a] + "' at '" + states[s] + "'");
                continue;
            }
            double sum = 0.0;
            for (const auto& t : d) {
                if (t.target >= states.size()) throw ModelError("transition target out of range");
                if (!(t.prob >= 0.0 && t.prob <= 1.0))
                    throw ModelError("probability outside [0,1] at '" + states[s] + "'");
                sum += t.prob;
            }
            if (std::abs(sum - 1.0) > kStochasticTol)
                throw ModelError("distribution of '" + actions[a] + "' at '" + states[s] +
                                 "' sums to " + std::to_string(sum));
        }
    }
}

std::vector<StateId> succ(const Mdp& mdp, StateId s, ActionId a) {
    if (s >= mdp.num_states() || a >= mdp.num_actions() || !mdp.is_enabled(s, a))
        throw ModelError("succ: action not enabled");
    std::vector<StateId> out;
    for (const auto& t : mdp.dist(s, a))
        if (t.prob > 0.0) out.push_back(t.target);
    return out;
}

// ── Policies ────────────────────────────────────────────────────────────────

PolicySkeleton PolicySkeleton::single_mode(std::size_t num_states, std::string name) {
    PolicySkeleton sk;
    sk.modes = {std::move(name)};
    sk.start.assign(num_states, 0);
    sk.delta.assign(1, std::vector<ModeId>(num_states, 0));
    return sk;
}

std::optional<ModeId> PolicySkeleton::find_mode(const std::string& name) const { return find_name(modes, name); }

void PolicySkeleton::validate(const Mdp& mdp) const {
    if (modes.empty()) throw ModelError("skeleton has no modes");
    check_unique(modes, "mode");
    if (start.size() != mdp.num_states()) throw ModelError("start is not total");
    if (delta.size() != modes.size()) throw ModelError("delta is not total");
    for (ModeId m : start)
        if (m >= modes.size()) throw ModelError("start mode out of range");
    for (const auto& row : delta) {
        if (row.size() != mdp.num_states()) throw ModelError("delta is not total");
        for (ModeId m : row)
            if (m >= modes.size()) throw ModelError("delta mode out of range");
    }
}

void Policy::validate(const Mdp& mdp) const {
    skeleton.validate(mdp);
    for (const auto& [pair, d] : act) {
        if (pair.mode >= skeleton.num_modes() || pair.state >= mdp.num_states())
            throw ModelError("policy pair out of range");
        double sum = 0.0;
        for (const auto& [a, p] : d) {
            if (!(p >= 0.0 && p <= 1.0)) throw ModelError("policy probability outside [0,1]");
            if (p > 0.0 && !mdp.is_enabled(pair.state, a))
                throw ModelError("policy uses disabled action '" + mdp.actions.at(a) + "' at '" +
                                 mdp.states[pair.state] + "'");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kStochasticTol)
            throw ModelError("policy distribution at '" + mdp.states[pair.state] + "' sums to " +
                             std::to_string(sum));
    }
}

// ── Induced chain ───────────────────────────────────────────────────────────

MarkovChain induced_chain(const Mdp& mdp, const Policy& policy) {
    return induced_chain(mdp, policy, policy.skeleton.initial_pair(mdp));
}

MarkovChain induced_chain(const Mdp& mdp, const Policy& policy, Pair start) {
    const auto& sk = policy.skeleton;
    MarkovChain mc;
    std::deque<std::size_t> work;
    auto intern = [&](Pair p) {
        auto [it, fresh] = mc.index.emplace(p, mc.pairs.size());
        if (fresh) {
            mc.pairs.push_back(p);
            mc.labels.push_back(mdp.labels[p.state]);
            mc.trans.emplace_back();
            work.push_back(it->second);
        }
        return it->second;
    };
    intern(start);
    while (!work.empty()) {
        std::size_t i = work.front();
        work.pop_front();
        const Pair p = mc.pairs[i];
        auto it = policy.act.find(p);
        if (it == policy.act.end())
            throw ModelError("policy undefined on reachable pair (" + sk.modes[p.mode] + ", " +
                             mdp.states[p.state] + ")");
        const ModeId m2 = sk.delta[p.mode][p.state];
        std::map<StateId, double> row;
        for (const auto& [a, w] : it->second) {
            if (w <= 0.0) continue;
            if (!mdp.is_enabled(p.state, a)) throw ModelError("policy uses disabled action");
            for (const auto& t : mdp.dist(p.state, a))
                if (t.prob > 0.0) row[t.target] += w * t.prob;
        }
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& [t, q] : row) out.emplace_back(intern(Pair{m2, t}), q);
        mc.trans[i] = std::move(out);
    }
    return mc;
}

// ── JSON ────────────────────────────────────────────────────────────────────

namespace {

using nlohmann::json;

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ModelError(std::string("missing field '") + key + "'");
    return j.at(key);
}

StateId state_of(const Mdp& mdp, const std::string& n) {
    auto s = mdp.find_state(n);
    if (!s) throw ModelError("unknown state '" + n + "'");
    return *s;
}

ActionId action_of(const Mdp& mdp, const std::string& n) {
    auto a = mdp.find_action(n);
    if (!a) throw ModelError("unknown action '" + n + "'");
    return *a;
}

ModeId mode_of(const PolicySkeleton& sk, const std::string& n) {
    auto m = sk.find_mode(n);
    if (!m) throw ModelError("unknown mode '" + n + "'");
    return *m;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ModelError("malformed JSON in '" + path + "': " + e.what());
    }
}

}  // namespace

Model model_from_json(const json& j) {
    try {
        Model model;
        Mdp& mdp = model.mdp;
        for (const auto& st : field(j, "states")) {
            mdp.states.push_back(field(st, "name").get<std::string>());
            std::set<std::string> ls;
            if (st.contains("labels"))
                for (const auto& l : st.at("labels")) ls.insert(l.get<std::string>());
            mdp.labels.push_back(std::move(ls));
        }
        check_unique(mdp.states, "state");
        for (const auto& a : field(j, "actions")) mdp.actions.push_back(a.get<std::string>());
        check_unique(mdp.actions, "action");
        mdp.initial = state_of(mdp, field(j, "initial").get<std::string>());

        const std::size_t n = mdp.num_states();
        mdp.enabled.assign(n, {});
        mdp.trans.assign(n, std::vector<std::vector<Transition>>(mdp.num_actions()));
        for (const auto& [sn, acts] : field(j, "enabled").items()) {
            StateId s = state_of(mdp, sn);
            for (const auto& an : acts) mdp.enabled[s].push_back(action_of(mdp, an.get<std::string>()));
            std::sort(mdp.enabled[s].begin(), mdp.enabled[s].end());
            mdp.enabled[s].erase(std::unique(mdp.enabled[s].begin(), mdp.enabled[s].end()), mdp.enabled[s].end());
        }
        for (const auto& [sn, per_action] : field(j, "trans").items()) {
            StateId s = state_of(mdp, sn);
            for (const auto& [an, d] : per_action.items()) {
                ActionId a = action_of(mdp, an);
                std::map<StateId, double> row;
                for (const auto& [tn, p] : d.items()) row[state_of(mdp, tn)] += p.get<double>();
                for (const auto& [t, p] : row) mdp.trans[s][a].push_back(Transition{t, p});
            }
        }
        for (StateId s = 0; s < n; ++s)
            for (ActionId a : mdp.enabled[s])
                if (mdp.trans[s][a].empty())
                    throw ModelError("no distribution for enabled action '" + mdp.actions[a] + "' at '" +
                                     mdp.states[s] + "'");
        mdp.validate();

        PolicySkeleton& sk = model.skeleton;
        if (!j.contains("modes")) {
            sk = PolicySkeleton::single_mode(n);
        } else {
            for (const auto& m : j.at("modes")) sk.modes.push_back(m.get<std::string>());
            check_unique(sk.modes, "mode");
            if (sk.modes.empty()) throw ModelError("empty mode list");
            sk.start.assign(n, 0);
            sk.delta.assign(sk.modes.size(), std::vector<ModeId>(n, 0));
            std::vector<bool> seen_start(n, false);
            for (const auto& [sn, mn] : field(j, "start").items()) {
                StateId s = state_of(mdp, sn);
                sk.start[s] = mode_of(sk, mn.get<std::string>());
                seen_start[s] = true;
            }
            if (std::find(seen_start.begin(), seen_start.end(), false) != seen_start.end())
                throw ModelError("start is not total");
            std::vector<std::vector<bool>> seen(sk.modes.size(), std::vector<bool>(n, false));
            for (const auto& [mn, row] : field(j, "delta").items()) {
                ModeId m = mode_of(sk, mn);
                for (const auto& [sn, tn] : row.items()) {
                    StateId s = state_of(mdp, sn);
                    sk.delta[m][s] = mode_of(sk, tn.get<std::string>());
                    seen[m][s] = true;
                }
            }
            for (const auto& row : seen)
                if (std::find(row.begin(), row.end(), false) != row.end())
                    throw ModelError("delta is not total");
        }
        sk.validate(mdp);
        return model;
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed model: ") + e.what());
    }
}

Model load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

json model_to_json(const Model& model) {
    const Mdp& mdp = model.mdp;
    json j;
    j["states"] = json::array();
    for (StateId s = 0; s < mdp.num_states(); ++s)
        j["states"].push_back({{"name", mdp.states[s]}, {"labels", mdp.labels[s]}});
    j["initial"] = mdp.states[mdp.initial];
    j["actions"] = mdp.actions;
    j["enabled"] = json::object();
    j["trans"] = json::object();
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        json names = json::array();
        for (ActionId a : mdp.enabled[s]) {
            names.push_back(mdp.actions[a]);
            json d = json::object();
            for (const auto& t : mdp.trans[s][a]) d[mdp.states[t.target]] = t.prob;
            j["trans"][mdp.states[s]][mdp.actions[a]] = d;
        }
        j["enabled"][mdp.states[s]] = names;
    }
    const PolicySkeleton& sk = model.skeleton;
    j["modes"] = sk.modes;
    for (StateId s = 0; s < mdp.num_states(); ++s) j["start"][mdp.states[s]] = sk.modes[sk.start[s]];
    for (ModeId m = 0; m < sk.num_modes(); ++m)
        for (StateId s = 0; s < mdp.num_states(); ++s)
            j["delta"][sk.modes[m]][mdp.states[s]] = sk.modes[sk.delta[m][s]];
    return j;
}

Policy policy_from_json(const json& j, const Mdp& mdp, const PolicySkeleton& sk) {
    try {
        Policy p;
        p.skeleton = sk;
        for (const auto& [mn, per_state] : field(j, "act").items()) {
            ModeId m = mode_of(sk, mn);
            for (const auto& [sn, d] : per_state.items()) {
                ActionDist dist;
                for (const auto& [an, w] : d.items()) dist[action_of(mdp, an)] = w.get<double>();
                p.act[Pair{m, state_of(mdp, sn)}] = std::move(dist);
            }
        }
        p.validate(mdp);
        return p;
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed policy: ") + e.what());
    }
}

Policy load_policy(const std::string& path, const Mdp& mdp, const PolicySkeleton& sk) {
    return policy_from_json(read_json_file(path), mdp, sk);
}

json policy_to_json(const Policy& p, const Mdp& mdp) {
    json act = json::object();
    for (const auto& [pair, d] : p.act) {
        json dist = json::object();
        for (const auto& [a, w] : d) dist[mdp.actions[a]] = w;
        act[p.skeleton.modes[pair.mode]][mdp.states[pair.state]] = dist;
    }
    return json{{"act", act}};
}

}  // namespace pctl
