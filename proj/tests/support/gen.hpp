// Random instance generators shared by the property tests and the acceptance suite.

#ifndef PCTL_TEST_GEN_HPP
#define PCTL_TEST_GEN_HPP

#include <random>
#include <string>
#include <vector>

#include "pctl/formula.hpp"
#include "pctl/model.hpp"

namespace pctl::testgen {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

struct ModelShape {
    std::size_t max_states = 4;
    std::size_t max_actions = 2;  // per state
    std::size_t max_modes = 2;
    std::vector<std::string> atoms{"a", "b"};
};

// Distribution over `k` targets with probabilities in multiples of 1/4.
inline std::vector<double> quarters(Rng& rng, std::size_t k) {
    std::vector<double> w(k, 0.0);
    for (int q = 0; q < 4; ++q) w[pick(rng, k)] += 0.25;
    return w;
}

inline Model random_model(Rng& rng, const ModelShape& shape = {}) {
    Model m;
    Mdp& mdp = m.mdp;
    const std::size_t n = 1 + pick(rng, shape.max_states);
    for (std::size_t s = 0; s < n; ++s) {
        mdp.states.push_back("s" + std::to_string(s));
        std::set<std::string> ls;
        for (const auto& a : shape.atoms)
            if (coin(rng)) ls.insert(a);
        mdp.labels.push_back(ls);
    }
    for (std::size_t a = 0; a < shape.max_actions; ++a) mdp.actions.push_back("act" + std::to_string(a));
    mdp.initial = 0;
    mdp.enabled.assign(n, {});
    mdp.trans.assign(n, std::vector<std::vector<Transition>>(mdp.num_actions()));
    for (StateId s = 0; s < n; ++s) {
        const std::size_t k = 1 + pick(rng, shape.max_actions);
        for (ActionId a = 0; a < k; ++a) {
            mdp.enabled[s].push_back(a);
            const auto w = quarters(rng, n);
            for (StateId t = 0; t < n; ++t)
                if (w[t] > 0) mdp.trans[s][a].push_back(Transition{t, w[t]});
        }
    }
    mdp.validate();

    PolicySkeleton& sk = m.skeleton;
    const std::size_t modes = 1 + pick(rng, shape.max_modes);
    for (std::size_t i = 0; i < modes; ++i) sk.modes.push_back("m" + std::to_string(i));
    sk.start.resize(n);
    for (auto& st : sk.start) st = static_cast<ModeId>(pick(rng, modes));
    sk.delta.assign(modes, std::vector<ModeId>(n, 0));
    for (auto& row : sk.delta)
        for (auto& d : row) d = static_cast<ModeId>(pick(rng, modes));
    sk.validate(mdp);
    return m;
}

// Random act with supports of one or two actions, weights in multiples of 1/4.
inline Policy random_policy(Rng& rng, const Model& m) {
    Policy p{m.skeleton, {}};
    for (ModeId md = 0; md < m.skeleton.num_modes(); ++md)
        for (StateId s = 0; s < m.mdp.num_states(); ++s) {
            const auto& en = m.mdp.enabled[s];
            ActionDist d;
            const auto w = quarters(rng, en.size());
            for (std::size_t i = 0; i < en.size(); ++i) d[en[i]] = w[i];
            p.act[Pair{md, s}] = d;
        }
    return p;
}

inline Bound random_bound(Rng& rng) { return Bound::from_double(0.1 * static_cast<double>(1 + pick(rng, 9))); }

inline Cmp random_cmp(Rng& rng) {
    static constexpr Cmp all[] = {Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge};
    return all[pick(rng, 4)];
}

struct FormulaShape {
    std::size_t max_temporal = 2;
    std::size_t max_nested_p = 1;
    std::vector<std::string> atoms{"a", "b"};
};

class FormulaGen {
public:
    FormulaGen(Rng& rng, FormulaShape shape = {}) : rng_(rng), shape_(std::move(shape)) {}

    // P∼z ψ, occasionally combined with an atom.
    Formula state() {
        temporal_ = shape_.max_temporal;
        nested_ = shape_.max_nested_p;
        Formula f = prob(random_cmp(rng_), random_bound(rng_), path(3));
        if (coin(rng_, 0.15)) f = conj(literal(), f);
        else if (coin(rng_, 0.1)) f = neg(f);
        return f;
    }

    Formula path(int depth) {
        const std::size_t choice = pick(rng_, 10);
        if (depth <= 0 || choice < 2) return literal();
        if (choice < 5 && temporal_ > 0) {
            --temporal_;
            switch (pick(rng_, 4)) {
                case 0: return next(path(depth - 1));
                case 1: return eventually(path(depth - 1));
                case 2: return always(path(depth - 1));
                default: {
                    Formula l = path(depth - 1);
                    return until(l, path(depth - 1));
                }
            }
        }
        if (choice == 5 && nested_ > 0) {
            --nested_;
            return prob(random_cmp(rng_), random_bound(rng_), path(depth - 1));
        }
        if (choice == 6) return neg(path(depth - 1));
        if (choice == 7) {
            Formula l = path(depth - 1);
            return conj(l, path(depth - 1));
        }
        if (choice == 8) {
            Formula l = path(depth - 1);
            return disj(l, path(depth - 1));
        }
        return literal();
    }

    Formula literal() {
        if (coin(rng_, 0.1)) return f_true();
        Formula a = atom(shape_.atoms[pick(rng_, shape_.atoms.size())]);
        return coin(rng_, 0.3) ? neg(a) : a;
    }

private:
    Rng& rng_;
    FormulaShape shape_;
    std::size_t temporal_ = 0;
    std::size_t nested_ = 0;
};

}  // namespace pctl::testgen

#endif  // PCTL_TEST_GEN_HPP
