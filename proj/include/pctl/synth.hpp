// pctl/synth.hpp: the synthesis driver: builds a forest per Choose
// alternative, solves Γ_final and completes the policy.

#ifndef PCTL_SYNTH_HPP
#define PCTL_SYNTH_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pctl/analysis.hpp"
#include "pctl/formula.hpp"
#include "pctl/model.hpp"
#include "pctl/oracle.hpp"
#include "pctl/program.hpp"
#include "pctl/tableau.hpp"

namespace pctl {

enum class FailureReason : std::uint8_t { AllChoicesUnsat, Budget, Unknown };
const char* to_string(FailureReason r);

struct SynthOptions {
    bool deterministic = false;
    bool guided = false;   // order P decisions by an oracle estimate under the uniform policy
    bool verify = false;   // check the completed policy with the oracle
    SolveOptions solve;
    std::size_t max_alternatives = 4096;
    std::size_t node_budget = 1'000'000;
    oracle::Options oracle;
    // Drive decisions from a known policy and seed the solver with its action
    // values; the search still falls back to the other alternatives.
    const Policy* reference = nullptr;
};

struct AlternativeLog {
    std::vector<ChoiceRecord> trail;
    bool conflict = false;
    std::optional<SolveStatus> status;  // unset when pruned by a conflict
    std::size_t nodes = 0;
    std::size_t constraints = 0;
    std::size_t max_degree = 0;
};

struct SynthesisResult {
    bool success = false;
    FailureReason reason = FailureReason::AllChoicesUnsat;
    std::string message;
    Policy policy;
    SolveResult solution;
    ConstraintProgram program;       // Γ_final of the successful (or last) alternative
    std::shared_ptr<Forest> forest;  // forest of the successful (or last) alternative
    std::vector<BsccReport> reports;
    std::vector<AlternativeLog> log;
    std::size_t distinct_choices = 0;  // distinct decision keys met over all alternatives
    std::optional<bool> verified;
};

SynthesisResult synthesize(const Mdp& mdp, const PolicySkeleton& skeleton, const Formula& phi,
                           const SynthOptions& opts = {});

// Builds one alternative from a fixed sequence of decisions (preferred sides afterwards).
std::shared_ptr<Forest> build_alternative(const Mdp& mdp, const PolicySkeleton& skeleton, const Formula& phi,
                                          const std::vector<Side>& prefix, const SynthOptions& opts = {});

// Pairs whose action variables occur in Γ.
std::set<Pair> policy_domain(const ConstraintProgram& gamma);

// act(m,s,α) := σ(x^α) renormalized on the policy domain; uniform over enabled
// actions everywhere else.
Policy complete_policy(const Mdp& mdp, const PolicySkeleton& skeleton, const ConstraintProgram& gamma,
                       const std::vector<double>& values);

}  // namespace pctl

#endif  // PCTL_SYNTH_HPP
