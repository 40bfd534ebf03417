#include "pctl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pctl {

const char* to_string(FailureReason r) {
    switch (r) {
        case FailureReason::AllChoicesUnsat: return "AllChoicesUnsat";
        case FailureReason::Budget: return "Budget";
        case FailureReason::Unknown: return "Unknown";
    }
    return "?";
}

namespace {

Policy uniform_policy(const Mdp& mdp, const PolicySkeleton& sk) {
    Policy p{sk, {}};
    for (ModeId m = 0; m < sk.num_modes(); ++m)
        for (StateId s = 0; s < mdp.num_states(); ++s) {
            auto& d = p.act[Pair{m, s}];
            for (ActionId a : mdp.enabled[s]) d[a] = 1.0 / static_cast<double>(mdp.enabled[s].size());
        }
    return p;
}

// Oracle-backed answers to P decisions under a fixed policy, cached per start pair.
class ProbPredictor {
public:
    ProbPredictor(const Mdp& mdp, Policy policy, oracle::Options opts)
        : mdp_(mdp), policy_(std::move(policy)), opts_(opts) {}

    std::optional<Side> side(const ChoiceKey& key) {
        auto it = chains_.find(key.pair);
        if (it == chains_.end()) {
            try {
                it = chains_.emplace(key.pair, induced_chain(mdp_, policy_, key.pair)).first;
            } catch (const ModelError&) {
                return std::nullopt;
            }
        }
        const double v = oracle::path_probability(it->second, 0, key.body, opts_).probability;
        const double z = key.z.value();
        const bool holds = key.cmp == Cmp::Ge ? v >= z - 1e-9 : v > z + 1e-9;
        return holds ? Side::Left : Side::Right;
    }

    const Policy& policy() const { return policy_; }

private:
    const Mdp& mdp_;
    Policy policy_;
    oracle::Options opts_;
    std::map<Pair, MarkovChain> chains_;
};

TableauOptions tableau_options(const Mdp& mdp, const PolicySkeleton& sk, const SynthOptions& opts) {
    TableauOptions t;
    t.deterministic = opts.deterministic;
    t.node_budget = opts.node_budget;
    if (opts.reference) {
        auto pred = std::make_shared<ProbPredictor>(mdp, *opts.reference, opts.oracle);
        t.preference = [pred](const ChoiceKey& k) -> std::optional<Side> {
            if (k.kind == ChoiceKey::Kind::Prob) return pred->side(k);
            const auto& act = pred->policy().act;
            auto it = act.find(k.pair);
            if (it == act.end()) return std::nullopt;
            auto a = it->second.find(k.action);
            return a != it->second.end() && a->second > 0.0 ? Side::Right : Side::Left;
        };
    } else if (opts.guided) {
        auto pred = std::make_shared<ProbPredictor>(mdp, uniform_policy(mdp, sk), opts.oracle);
        t.preference = [pred](const ChoiceKey& k) -> std::optional<Side> {
            if (k.kind == ChoiceKey::Kind::Prob) return pred->side(k);
            return std::nullopt;
        };
    }
    return t;
}

SolveResult unknown(std::string reason) {
    SolveResult r;
    r.reason = std::move(reason);
    return r;
}

// Pins every recurrent loop without a Yes-Loop leaf to zero and solves again
// until the solution leaves no such loop nonzero. A recurrent loop with a
// Yes-Loop leaf has no value that can be pinned soundly.
SolveResult settle_recurrence(const Forest& forest, const std::vector<BsccReport>& reports,
                              ConstraintProgram& program, const SolveOptions& so, SolveResult sol) {
    constexpr int kMaxRounds = 8;
    constexpr double kZeroTol = 1e-7;
    std::vector<RecurrentLoop> pinned;
    for (int round = 0; sol.status == SolveStatus::Solution; ++round) {
        const auto loops = recurrent_loops(forest, reports, sol.values);
        for (const auto& p : pinned)
            if (std::find(loops.begin(), loops.end(), p) == loops.end())
                return unknown("a loop pinned to zero is not recurrent under the solution");
        bool added = false;
        for (const auto& l : loops) {
            if (std::find(pinned.begin(), pinned.end(), l) != pinned.end()) continue;
            if (l.yes_loop) return unknown("recurrent loop with a Yes-Loop leaf outside every forced BSCC");
            const bool nonzero = std::any_of(l.nodes.begin(), l.nodes.end(), [&](NodeId v) {
                return std::abs(sol.values.at(forest.node(v).var)) > kZeroTol;
            });
            if (!nonzero) continue;
            for (NodeId v : l.nodes) program.add(Polynomial::var(forest.node(v).var), Rel::Eq, 0.0);
            pinned.push_back(l);
            added = true;
        }
        if (!added) return sol;
        if (round == kMaxRounds) return unknown("recurrent loops did not settle");
        sol = solve(program, so);
    }
    return sol;
}

}  // namespace

std::set<Pair> policy_domain(const ConstraintProgram& gamma) {
    std::set<Pair> out;
    for (const auto& v : gamma.vars())
        if (v.kind == VarInfo::Kind::Action) out.insert(v.pair);
    return out;
}

Policy complete_policy(const Mdp& mdp, const PolicySkeleton& skeleton, const ConstraintProgram& gamma,
                       const std::vector<double>& values) {
    Policy p = uniform_policy(mdp, skeleton);
    std::map<Pair, ActionDist> raw;
    for (VarId id = 0; id < gamma.vars().size(); ++id) {
        const auto& v = gamma.var(id);
        if (v.kind != VarInfo::Kind::Action) continue;
        raw[v.pair][v.action] = id < values.size() ? std::clamp(values[id], 0.0, 1.0) : 0.0;
    }
    for (auto& [pair, dist] : raw) {
        double sum = 0.0;
        for (const auto& [a, w] : dist) sum += w;
        if (sum <= 0.0) continue;  // keep the uniform fallback
        ActionDist out;
        for (ActionId a : mdp.enabled[pair.state]) {
            auto it = dist.find(a);
            out[a] = it == dist.end() ? 0.0 : it->second / sum;
        }
        p.act[pair] = std::move(out);
    }
    return p;
}

std::shared_ptr<Forest> build_alternative(const Mdp& mdp, const PolicySkeleton& skeleton, const Formula& phi,
                                          const std::vector<Side>& prefix, const SynthOptions& opts) {
    auto forest = std::make_shared<Forest>(mdp, skeleton, tableau_options(mdp, skeleton, opts));
    PrefixPolicy policy(prefix);
    forest->build(phi, policy);
    return forest;
}

SynthesisResult synthesize(const Mdp& mdp, const PolicySkeleton& skeleton, const Formula& phi,
                           const SynthOptions& opts) {
    SynthesisResult res;
    TableauOptions topts = tableau_options(mdp, skeleton, opts);
    topts.stop_on_conflict = true;

    std::vector<Side> prefix;
    std::vector<bool> flipped;
    std::set<ChoiceKey> keys;
    bool saw_unknown = false;

    while (true) {
        if (res.log.size() >= opts.max_alternatives) {
            res.reason = FailureReason::Budget;
            res.message = "alternative budget of " + std::to_string(opts.max_alternatives) + " exhausted";
            break;
        }
        auto forest = std::make_shared<Forest>(mdp, skeleton, topts);
        PrefixPolicy policy(prefix);
        try {
            forest->build(phi, policy);
        } catch (const BudgetExceeded& e) {
            res.reason = FailureReason::Budget;
            res.message = e.what();
            res.forest = forest;
            break;
        }
        const auto& trail = forest->trail();
        for (const auto& r : trail) keys.insert(r.key);
        flipped.resize(trail.size(), false);

        AlternativeLog entry{trail, forest->conflict(), std::nullopt, forest->nodes().size(), 0};
        res.forest = forest;
        if (!forest->conflict()) {
            res.reports = analyse(*forest);
            res.program = gamma(*forest);
            entry.constraints = res.program.constraints().size();
            entry.max_degree = res.program.max_degree();
            SolveOptions so = opts.solve;
            if (opts.reference) {
                for (VarId id = 0; id < res.program.vars().size(); ++id) {
                    const auto& v = res.program.var(id);
                    if (v.kind != VarInfo::Kind::Action) continue;
                    double w = 0.0;
                    if (auto it = opts.reference->act.find(v.pair); it != opts.reference->act.end())
                        if (auto a = it->second.find(v.action); a != it->second.end()) w = a->second;
                    so.hint[id] = w;
                }
            }
            res.solution = settle_recurrence(*forest, res.reports, res.program, so, solve(res.program, so));
            entry.status = res.solution.status;
            res.log.push_back(entry);
            if (res.solution.status == SolveStatus::Solution) {
                res.success = true;
                res.policy = complete_policy(mdp, skeleton, res.program, res.solution.values);
                if (opts.verify) {
                    const MarkovChain chain = induced_chain(mdp, res.policy);
                    res.verified = oracle::check_state_formula(chain, chain.initial(), phi, opts.oracle);
                }
                break;
            }
            if (res.solution.status == SolveStatus::Unknown) saw_unknown = true;
        } else {
            res.log.push_back(entry);
        }

        // Flip the deepest decision that still has an unexplored side.
        std::size_t i = trail.size();
        while (i > 0 && flipped[i - 1]) --i;
        if (i == 0) {
            res.reason = saw_unknown ? FailureReason::Unknown : FailureReason::AllChoicesUnsat;
            res.message = saw_unknown ? "the solver could not decide every alternative"
                                      : "every Choose alternative is unsatisfiable";
            break;
        }
        prefix.clear();
        for (std::size_t k = 0; k + 1 < i; ++k) prefix.push_back(trail[k].taken);
        prefix.push_back(other(trail[i - 1].taken));
        flipped.resize(i);
        flipped[i - 1] = true;
    }
    res.distinct_choices = keys.size();
    return res;
}

}  // namespace pctl
