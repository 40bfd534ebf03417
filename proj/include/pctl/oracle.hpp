// pctl/oracle.hpp: independent probability oracle for finite Markov chains.
//
// Deliberately self-contained: it has its own SCC decomposition and its own
// formula evaluation and shares nothing with the tableau engine.

#ifndef PCTL_ORACLE_HPP
#define PCTL_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "pctl/formula.hpp"
#include "pctl/model.hpp"

namespace pctl::oracle {

using StatePred = std::vector<bool>;  // indexed by chain state

enum class Method : std::uint8_t { Exact, MonteCarlo };
// How runs still undecided at the horizon enter the point estimate.
enum class Pessimism : std::uint8_t { Pessimistic, Optimistic, Discard };
enum class Truth : std::uint8_t { False, True, Unknown };

struct Verdict {
    double probability = 0.0;
    double ci = 0.0;          // 99% half-width; 0 for exact verdicts
    Method method = Method::Exact;
    double lower = 0.0;       // decided-true fraction
    double upper = 0.0;       // 1 − decided-false fraction
    std::size_t samples = 0;
    std::size_t undecided = 0;
    Pessimism pessimism = Pessimism::Pessimistic;
};

struct Options {
    std::size_t samples = 100000;
    std::size_t horizon = 0;  // 0 = max(1000, 10·|chain|)
    std::uint64_t seed = 1;
    Pessimism pessimism = Pessimism::Pessimistic;
    double exact_tol = 1e-9;  // slack towards the formula holding; flips sign under ¬
    bool recheck = true;      // undecided MC comparisons are retried with 4× samples
};

// Bottom SCCs of the chain graph; returns per-state BSCC index or −1.
std::vector<int> bottom_sccs(const MarkovChain& c, std::size_t* count = nullptr);

std::vector<double> until_vector(const MarkovChain& c, const StatePred& a, const StatePred& b);
double exact_until(const MarkovChain& c, std::size_t from, const StatePred& a, const StatePred& b);
std::vector<double> fg_vector(const MarkovChain& c, const StatePred& pred);
double exact_fg(const MarkovChain& c, std::size_t from, const StatePred& pred);

// Truth of a classical formula per chain state.
StatePred predicate(const MarkovChain& c, const Formula& f);

// Exact per-state probabilities for the supported pattern library; ψ must be
// free of P operators.
std::optional<std::vector<double>> exact_vector(const MarkovChain& c, const Formula& psi);

// Exact method for ¬/∧ combinations of p, X p, p U q and F G p with classical
// p, q, via a product of the chain with the status of every until leaf.
std::optional<std::vector<double>> flat_vector(const MarkovChain& c, const Formula& psi);

Verdict mc_estimate(const MarkovChain& c, std::size_t from, const Formula& psi, std::size_t samples,
                    std::size_t horizon, std::uint64_t seed, Pessimism pessimism = Pessimism::Pessimistic);

// Probability of path formula ψ (nested P resolved first) from `from`.
Verdict path_probability(const MarkovChain& c, std::size_t from, const Formula& psi, const Options& opts = {});

struct Evaluation {
    std::vector<Truth> truth;  // per chain state
    bool exact = true;         // every P operator was decided by an exact method
};

Evaluation evaluate(const MarkovChain& c, const Formula& phi, const Options& opts = {});

// Best-effort boolean verdict (falls back to the point estimate when MC stays undecided).
bool check_state_formula(const MarkovChain& c, std::size_t from, const Formula& phi, const Options& opts = {});

}  // namespace pctl::oracle

#endif  // PCTL_ORACLE_HPP
