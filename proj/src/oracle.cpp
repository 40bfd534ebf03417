// Independent oracle: exact linear-equation methods for a pattern library and
// Monte Carlo estimation for everything else.

#include "pctl/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace pctl::oracle {

namespace {

constexpr double kZ99 = 2.5758293035489;

bool is_pred(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom: return true;
        case Kind::Not: return is_pred(f.sub());
        case Kind::And: return is_pred(f.lhs()) && is_pred(f.rhs());
        default: return false;
    }
}

bool holds_at(const std::set<std::string>& labels, const Formula& f) {
    switch (f.kind()) {
        case Kind::True: return true;
        case Kind::Atom: return labels.count(f.name()) > 0;
        case Kind::Not: return !holds_at(labels, f.sub());
        case Kind::And: return holds_at(labels, f.lhs()) && holds_at(labels, f.rhs());
        default: throw std::invalid_argument("not a state predicate: " + to_string(f));
    }
}

bool has_prob(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom: return false;
        case Kind::Prob: return true;
        case Kind::Not:
        case Kind::Next: return has_prob(f.sub());
        case Kind::And:
        case Kind::Until: return has_prob(f.lhs()) || has_prob(f.rhs());
    }
    return false;
}

Truth t_not(Truth a) {
    if (a == Truth::Unknown) return a;
    return a == Truth::True ? Truth::False : Truth::True;
}

Truth t_and(Truth a, Truth b) {
    if (a == Truth::False || b == Truth::False) return Truth::False;
    if (a == Truth::True && b == Truth::True) return Truth::True;
    return Truth::Unknown;
}

Truth t_or(Truth a, Truth b) { return t_not(t_and(t_not(a), t_not(b))); }

double wilson_half_width(double p, std::size_t n) {
    if (n == 0) return 1.0;
    double nn = static_cast<double>(n);
    double z2 = kZ99 * kZ99;
    return kZ99 / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
}

}  // namespace

// ── Graph analysis ──────────────────────────────────────────────────────────

std::vector<int> bottom_sccs(const MarkovChain& c, std::size_t* count) {
    const std::size_t n = c.size();
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    int counter = 0, ncomp = 0;
    // Iterative Tarjan with an explicit call stack of (node, next edge).
    std::vector<std::pair<std::size_t, std::size_t>> call;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        call.emplace_back(root, 0);
        while (!call.empty()) {
            auto& [v, e] = call.back();
            if (e == 0 && index[v] < 0) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            if (e < c.trans[v].size()) {
                std::size_t w = c.trans[v][e].first;
                ++e;
                if (c.trans[v][e - 1].second <= 0.0) continue;
                if (index[w] < 0) {
                    call.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                for (;;) {
                    std::size_t w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if (w == v) break;
                }
                ++ncomp;
            }
            std::size_t done = v;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        }
    }
    std::vector<bool> bottom(static_cast<std::size_t>(ncomp), true);
    for (std::size_t v = 0; v < n; ++v)
        for (const auto& [w, p] : c.trans[v])
            if (p > 0.0 && comp[w] != comp[v]) bottom[static_cast<std::size_t>(comp[v])] = false;
    std::vector<int> renum(static_cast<std::size_t>(ncomp), -1);
    int nb = 0;
    for (int k = 0; k < ncomp; ++k)
        if (bottom[static_cast<std::size_t>(k)]) renum[static_cast<std::size_t>(k)] = nb++;
    std::vector<int> out(n);
    for (std::size_t v = 0; v < n; ++v) out[v] = renum[static_cast<std::size_t>(comp[v])];
    if (count) *count = static_cast<std::size_t>(nb);
    return out;
}

// ── Exact methods ───────────────────────────────────────────────────────────

std::vector<double> until_vector(const MarkovChain& c, const StatePred& a, const StatePred& b) {
    const std::size_t n = c.size();
    // States that can reach b through a-states.
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t v = 0; v < n; ++v)
        for (const auto& [w, p] : c.trans[v])
            if (p > 0.0) pred[w].push_back(v);
    std::vector<bool> can(n, false);
    std::vector<std::size_t> work;
    for (std::size_t v = 0; v < n; ++v)
        if (b[v]) {
            can[v] = true;
            work.push_back(v);
        }
    while (!work.empty()) {
        std::size_t w = work.back();
        work.pop_back();
        for (std::size_t v : pred[w]) {
            if (!can[v] && a[v] && !b[v]) {
                can[v] = true;
                work.push_back(v);
            }
        }
    }
    std::vector<double> x(n, 0.0);
    std::vector<long> unk(n, -1);
    std::vector<std::size_t> ids;
    for (std::size_t v = 0; v < n; ++v) {
        if (b[v]) x[v] = 1.0;
        else if (can[v]) {
            unk[v] = static_cast<long>(ids.size());
            ids.push_back(v);
        }
    }
    if (ids.empty()) return x;
    auto m = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd a_mat = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        std::size_t v = ids[static_cast<std::size_t>(i)];
        for (const auto& [w, p] : c.trans[v]) {
            if (b[w]) rhs(i) += p;
            else if (unk[w] >= 0) a_mat(i, unk[w]) -= p;
        }
    }
    Eigen::VectorXd sol = a_mat.partialPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i) x[ids[static_cast<std::size_t>(i)]] = std::clamp(sol(i), 0.0, 1.0);
    return x;
}

double exact_until(const MarkovChain& c, std::size_t from, const StatePred& a, const StatePred& b) {
    return until_vector(c, a, b).at(from);
}

std::vector<double> fg_vector(const MarkovChain& c, const StatePred& pred) {
    std::size_t nb = 0;
    auto bs = bottom_sccs(c, &nb);
    std::vector<bool> good(nb, true);
    for (std::size_t v = 0; v < c.size(); ++v)
        if (bs[v] >= 0 && !pred[v]) good[static_cast<std::size_t>(bs[v])] = false;
    StatePred target(c.size(), false), all(c.size(), true);
    for (std::size_t v = 0; v < c.size(); ++v) target[v] = bs[v] >= 0 && good[static_cast<std::size_t>(bs[v])];
    return until_vector(c, all, target);
}

double exact_fg(const MarkovChain& c, std::size_t from, const StatePred& pred) { return fg_vector(c, pred).at(from); }

StatePred predicate(const MarkovChain& c, const Formula& f) {
    StatePred out(c.size());
    for (std::size_t v = 0; v < c.size(); ++v) out[v] = holds_at(c.labels[v], f);
    return out;
}

// ── Flat Boolean combinations ───────────────────────────────────────────────
//
// ψ built with ¬ and ∧ from leaves p, X p, p U q and F G p (p, q classical).
// Each run is tracked in a product of the chain with the status of every
// until leaf; statuses only ever resolve, so they are constant on a bottom SCC
// of the product, where a still-pending until is false and F G p holds iff p
// holds on the whole component.

namespace {

enum class LeafKind : std::uint8_t { Pred, Next, Until, FG };
enum class Status : std::uint8_t { Pending, True, False };

struct Leaf {
    LeafKind kind;
    StatePred a, b;  // Pred/Next/FG use a; Until uses a U b
};

struct FlatExpr {
    enum class Op : std::uint8_t { Leaf, Not, And } op;
    int leaf = -1, l = -1, r = -1;
};

constexpr std::size_t kMaxProduct = 400;

std::optional<std::vector<double>> pattern_vector(const MarkovChain& c, const Formula& psi);

class FlatProduct {
public:
    explicit FlatProduct(const MarkovChain& c) : c_(c) {}

    bool parse(const Formula& f) {
        root_ = build(f);
        return root_ >= 0;
    }

    std::optional<std::vector<double>> run() {
        for (std::size_t i = 0; i < leaves_.size(); ++i)
            if (leaves_[i].kind == LeafKind::Until) untils_.push_back(i);
        const std::size_t n = c_.size();
        // Start points: (t, statuses after entering t) for every one-step move.
        for (std::size_t s = 0; s < n; ++s)
            for (const auto& [t, p] : c_.trans[s])
                if (p > 0.0 && !intern(t, step(initial(s), t))) return std::nullopt;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto [v, st] = nodes_[i];
            for (const auto& [t, p] : c_.trans[v]) {
                if (p <= 0.0) continue;
                auto j = intern(t, step(st, t));
                if (!j) return std::nullopt;
                prod_.trans[i].emplace_back(*j, p);
            }
        }
        std::size_t nb = 0;
        const auto bs = bottom_sccs(prod_, &nb);
        std::vector<std::vector<std::size_t>> members(nb);
        for (std::size_t i = 0; i < bs.size(); ++i)
            if (bs[i] >= 0) members[static_cast<std::size_t>(bs[i])].push_back(i);

        std::vector<double> out(n, 0.0);
        const StatePred all(prod_.size(), true);
        for (std::size_t s = 0; s < n; ++s) {
            StatePred good(prod_.size(), false);
            double acc = 0.0;
            for (const auto& [t, p] : c_.trans[s]) {
                if (p <= 0.0) continue;
                std::fill(good.begin(), good.end(), false);
                for (std::size_t k = 0; k < nb; ++k)
                    if (eval(root_, s, t, members[k]))
                        for (std::size_t i : members[k]) good[i] = true;
                const auto reach = until_vector(prod_, all, good);
                acc += p * reach[*find(t, step(initial(s), t))];
            }
            out[s] = std::clamp(acc, 0.0, 1.0);
        }
        return out;
    }

private:
    using Statuses = std::vector<Status>;

    int build(const Formula& f) {
        if (is_pred(f)) return leaf(LeafKind::Pred, predicate(c_, f), {});
        switch (f.kind()) {
            case Kind::Not: {
                int x = build(f.sub());
                if (x < 0) return -1;
                exprs_.push_back({FlatExpr::Op::Not, -1, x, -1});
                return static_cast<int>(exprs_.size() - 1);
            }
            case Kind::And: {
                int x = build(f.lhs());
                int y = x < 0 ? -1 : build(f.rhs());
                if (y < 0) return -1;
                exprs_.push_back({FlatExpr::Op::And, -1, x, y});
                return static_cast<int>(exprs_.size() - 1);
            }
            case Kind::Next:
                if (!is_pred(f.sub())) return -1;
                return leaf(LeafKind::Next, predicate(c_, f.sub()), {});
            case Kind::Until: {
                if (is_pred(f.lhs()) && is_pred(f.rhs()))
                    return leaf(LeafKind::Until, predicate(c_, f.lhs()), predicate(c_, f.rhs()));
                const Formula& r = f.rhs();
                if (f.lhs().is(Kind::True) && r.is(Kind::Not) && r.sub().is(Kind::Until) &&
                    r.sub().lhs().is(Kind::True) && is_pred(r.sub().rhs())) {
                    auto q = predicate(c_, r.sub().rhs());
                    q.flip();
                    return leaf(LeafKind::FG, q, {});
                }
                return -1;
            }
            default: return -1;
        }
    }

    int leaf(LeafKind k, StatePred a, StatePred b) {
        leaves_.push_back({k, std::move(a), std::move(b)});
        exprs_.push_back({FlatExpr::Op::Leaf, static_cast<int>(leaves_.size() - 1), -1, -1});
        return static_cast<int>(exprs_.size() - 1);
    }

    Status enter(const Leaf& l, std::size_t v) const {
        if (l.b[v]) return Status::True;
        return l.a[v] ? Status::Pending : Status::False;
    }

    Statuses initial(std::size_t s) const {
        Statuses st;
        for (std::size_t i : untils_) st.push_back(enter(leaves_[i], s));
        return st;
    }

    Statuses step(Statuses st, std::size_t t) const {
        for (std::size_t k = 0; k < untils_.size(); ++k)
            if (st[k] == Status::Pending) st[k] = enter(leaves_[untils_[k]], t);
        return st;
    }

    std::optional<std::size_t> find(std::size_t v, const Statuses& st) const {
        auto it = index_.find({v, st});
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::size_t> intern(std::size_t v, const Statuses& st) {
        if (auto i = find(v, st)) return i;
        if (nodes_.size() >= kMaxProduct) return std::nullopt;
        index_.emplace(std::make_pair(v, st), nodes_.size());
        nodes_.emplace_back(v, st);
        prod_.pairs.emplace_back();
        prod_.trans.emplace_back();
        prod_.labels.emplace_back();
        return nodes_.size() - 1;
    }

    // Truth of expression e for runs starting at s, moving to t, and ending in
    // the product bottom SCC `ms`.
    bool eval(int e, std::size_t s, std::size_t t, const std::vector<std::size_t>& ms) const {
        const FlatExpr& x = exprs_[static_cast<std::size_t>(e)];
        switch (x.op) {
            case FlatExpr::Op::Not: return !eval(x.l, s, t, ms);
            case FlatExpr::Op::And: return eval(x.l, s, t, ms) && eval(x.r, s, t, ms);
            case FlatExpr::Op::Leaf: break;
        }
        const Leaf& l = leaves_[static_cast<std::size_t>(x.leaf)];
        switch (l.kind) {
            case LeafKind::Pred: return l.a[s];
            case LeafKind::Next: return l.a[t];
            case LeafKind::FG:
                return std::all_of(ms.begin(), ms.end(), [&](std::size_t i) { return l.a[nodes_[i].first]; });
            case LeafKind::Until: {
                const auto k = static_cast<std::size_t>(
                    std::find(untils_.begin(), untils_.end(), static_cast<std::size_t>(x.leaf)) - untils_.begin());
                return nodes_[ms.front()].second[k] == Status::True;
            }
        }
        return false;
    }

    const MarkovChain& c_;
    std::vector<Leaf> leaves_;
    std::vector<FlatExpr> exprs_;
    int root_ = -1;
    std::vector<std::size_t> untils_;
    std::vector<std::pair<std::size_t, Statuses>> nodes_;
    std::map<std::pair<std::size_t, Statuses>, std::size_t> index_;
    MarkovChain prod_;
};

}  // namespace

std::optional<std::vector<double>> flat_vector(const MarkovChain& c, const Formula& psi) {
    FlatProduct fp(c);
    if (!fp.parse(psi)) return std::nullopt;
    return fp.run();
}

std::optional<std::vector<double>> exact_vector(const MarkovChain& c, const Formula& psi) {
    if (auto v = pattern_vector(c, psi)) return v;
    return flat_vector(c, psi);
}

namespace {

std::optional<std::vector<double>> pattern_vector(const MarkovChain& c, const Formula& psi) {
    const std::size_t n = c.size();
    if (is_pred(psi)) {
        auto p = predicate(c, psi);
        std::vector<double> out(n);
        for (std::size_t v = 0; v < n; ++v) out[v] = p[v] ? 1.0 : 0.0;
        return out;
    }
    switch (psi.kind()) {
        case Kind::Not: {
            auto v = exact_vector(c, psi.sub());
            if (!v) return std::nullopt;
            for (auto& x : *v) x = 1.0 - x;
            return v;
        }
        case Kind::And: {
            const Formula *p = nullptr, *q = nullptr;
            if (is_pred(psi.lhs())) { p = &psi.lhs(); q = &psi.rhs(); }
            else if (is_pred(psi.rhs())) { p = &psi.rhs(); q = &psi.lhs(); }
            else return std::nullopt;
            auto v = exact_vector(c, *q);
            if (!v) return std::nullopt;
            auto mask = predicate(c, *p);
            for (std::size_t s = 0; s < n; ++s)
                if (!mask[s]) (*v)[s] = 0.0;
            return v;
        }
        case Kind::Next: {
            auto v = exact_vector(c, psi.sub());
            if (!v) return std::nullopt;
            std::vector<double> out(n, 0.0);
            for (std::size_t s = 0; s < n; ++s)
                for (const auto& [t, p] : c.trans[s]) out[s] += p * (*v)[t];
            for (auto& x : out) x = std::clamp(x, 0.0, 1.0);
            return out;
        }
        case Kind::Until: {
            if (is_pred(psi.lhs()) && is_pred(psi.rhs()))
                return until_vector(c, predicate(c, psi.lhs()), predicate(c, psi.rhs()));
            // true U ¬(true U q) is F G ¬q.
            const Formula& r = psi.rhs();
            if (psi.lhs().is(Kind::True) && r.is(Kind::Not) && r.sub().is(Kind::Until) &&
                r.sub().lhs().is(Kind::True) && is_pred(r.sub().rhs())) {
                auto q = predicate(c, r.sub().rhs());
                for (std::size_t s = 0; s < n; ++s) q[s] = !q[s];
                return fg_vector(c, q);
            }
            return std::nullopt;
        }
        default: return std::nullopt;
    }
}

}  // namespace

// ── Monte Carlo ─────────────────────────────────────────────────────────────

namespace {

// Almost-sure status of a subformula at every position of a run that stays
// inside one BSCC.
enum class Tail : std::uint8_t { AllTrue, AllFalse, InfOften, Mixed };

struct FlatNode {
    Kind kind;
    int a = -1, b = -1;
    StatePred pred;  // for predicate nodes
    bool is_pred = false;
};

class McEvaluator {
public:
    McEvaluator(const MarkovChain& c, const Formula& psi, std::size_t horizon, std::uint64_t seed)
        : c_(c), horizon_(horizon), rng_(seed) {
        root_ = flatten(psi);
        bscc_ = bottom_sccs(c, &nbscc_);
        tails_.assign(nbscc_, std::vector<Tail>(nodes_.size(), Tail::Mixed));
        for (std::size_t b = 0; b < nbscc_; ++b)
            for (std::size_t k = 0; k < nodes_.size(); ++k) tails_[b][k] = tail(b, static_cast<int>(k));
        cdf_.resize(c.size());
        for (std::size_t s = 0; s < c.size(); ++s) {
            double acc = 0.0;
            for (const auto& [t, p] : c.trans[s]) {
                acc += p;
                cdf_[s].push_back(acc);
            }
        }
    }

    Truth sample(std::size_t from) {
        path_.assign(1, from);
        memo_.clear();
        return eval(root_, 0);
    }

private:
    int flatten(const Formula& f) {
        FlatNode n;
        n.kind = f.kind();
        if (is_pred(f)) {
            n.is_pred = true;
            n.pred = predicate(c_, f);
        } else {
            switch (f.kind()) {
                case Kind::Not:
                case Kind::Next: n.a = flatten(f.sub()); break;
                case Kind::And:
                case Kind::Until:
                    n.a = flatten(f.lhs());
                    n.b = flatten(f.rhs());
                    break;
                default: throw std::invalid_argument("unresolved P operator in path formula");
            }
        }
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size() - 1);
    }

    Tail tail(std::size_t b, int k) const {
        const FlatNode& n = nodes_[static_cast<std::size_t>(k)];
        if (n.is_pred) {
            bool any = false, all = true;
            for (std::size_t s = 0; s < c_.size(); ++s) {
                if (bscc_[s] != static_cast<int>(b)) continue;
                any = any || n.pred[s];
                all = all && n.pred[s];
            }
            return all ? Tail::AllTrue : any ? Tail::InfOften : Tail::AllFalse;
        }
        auto ta = [&] { return tails_[b][static_cast<std::size_t>(n.a)]; };
        auto tb = [&] { return tails_[b][static_cast<std::size_t>(n.b)]; };
        switch (n.kind) {
            case Kind::Not:
                if (ta() == Tail::AllTrue) return Tail::AllFalse;
                if (ta() == Tail::AllFalse) return Tail::AllTrue;
                return ta();
            case Kind::Next: return ta();
            case Kind::And:
                if (ta() == Tail::AllFalse || tb() == Tail::AllFalse) return Tail::AllFalse;
                if (ta() == Tail::AllTrue) return tb();
                if (tb() == Tail::AllTrue) return ta();
                return Tail::Mixed;
            case Kind::Until:
                if (tb() == Tail::AllTrue || tb() == Tail::AllFalse) return tb();
                if (tb() == Tail::InfOften) {
                    if (ta() == Tail::AllTrue) return Tail::AllTrue;
                    if (ta() == Tail::AllFalse) return Tail::InfOften;
                }
                return Tail::Mixed;
            default: return Tail::Mixed;
        }
    }

    std::size_t state_at(std::size_t j) {
        while (path_.size() <= j) {
            std::size_t s = path_.back();
            double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
            const auto& cd = cdf_[s];
            auto it = std::upper_bound(cd.begin(), cd.end(), u);
            std::size_t k = it == cd.end() ? cd.size() - 1 : static_cast<std::size_t>(it - cd.begin());
            path_.push_back(c_.trans[s][k].first);
        }
        return path_[j];
    }

    std::optional<Truth> tail_value(int k, std::size_t j) {
        std::size_t s = state_at(j);
        if (bscc_[s] < 0) return std::nullopt;
        Tail t = tails_[static_cast<std::size_t>(bscc_[s])][static_cast<std::size_t>(k)];
        if (t == Tail::AllTrue) return Truth::True;
        if (t == Tail::AllFalse) return Truth::False;
        return std::nullopt;
    }

    Truth eval(int k, std::size_t j) {
        if (j >= horizon_) return Truth::Unknown;
        std::uint64_t key = (static_cast<std::uint64_t>(k) << 40) | j;
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        Truth r = compute(k, j);
        memo_.emplace(key, r);
        return r;
    }

    Truth compute(int k, std::size_t j) {
        const FlatNode& n = nodes_[static_cast<std::size_t>(k)];
        if (n.is_pred) return n.pred[state_at(j)] ? Truth::True : Truth::False;
        if (auto t = tail_value(k, j)) return *t;
        switch (n.kind) {
            case Kind::Not: return t_not(eval(n.a, j));
            case Kind::And: {
                Truth l = eval(n.a, j);
                if (l == Truth::False) return l;
                return t_and(l, eval(n.b, j));
            }
            case Kind::Next: return eval(n.a, j + 1);
            case Kind::Until: {
                Truth res = Truth::False, prefix = Truth::True;
                for (std::size_t i = j; i < horizon_; ++i) {
                    if (i > j)
                        if (auto t = tail_value(k, i)) return t_or(res, t_and(prefix, *t));
                    res = t_or(res, t_and(prefix, eval(n.b, i)));
                    if (res == Truth::True) return res;
                    prefix = t_and(prefix, eval(n.a, i));
                    if (prefix == Truth::False) return res;
                }
                return t_or(res, t_and(prefix, Truth::Unknown));
            }
            default: return Truth::Unknown;
        }
    }

    const MarkovChain& c_;
    std::size_t horizon_;
    std::mt19937_64 rng_;
    std::vector<FlatNode> nodes_;
    int root_ = 0;
    std::vector<int> bscc_;
    std::size_t nbscc_ = 0;
    std::vector<std::vector<Tail>> tails_;
    std::vector<std::vector<double>> cdf_;
    std::vector<std::size_t> path_;
    std::unordered_map<std::uint64_t, Truth> memo_;
};

std::size_t default_horizon(const MarkovChain& c, std::size_t h) {
    return h ? h : std::max<std::size_t>(1000, 10 * c.size());
}

// The exact-comparison slack favours the formula being true, so it changes
// sign below a negation.
Options negated(const Options& opts) {
    Options o = opts;
    o.exact_tol = -opts.exact_tol;
    return o;
}

// Replaces every P subformula of ψ by a fresh atom labelled per state.
Formula resolve(MarkovChain& c, const Formula& f, const Options& opts, bool& exact, int& fresh) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom: return f;
        case Kind::Not: return neg(resolve(c, f.sub(), negated(opts), exact, fresh));
        case Kind::Next: return next(resolve(c, f.sub(), opts, exact, fresh));
        case Kind::And: {
            Formula a = resolve(c, f.lhs(), opts, exact, fresh);
            return conj(a, resolve(c, f.rhs(), opts, exact, fresh));
        }
        case Kind::Until: {
            Formula a = resolve(c, f.lhs(), opts, exact, fresh);
            return until(a, resolve(c, f.rhs(), opts, exact, fresh));
        }
        case Kind::Prob: {
            Evaluation ev = evaluate(c, f, opts);
            exact = exact && ev.exact;
            std::string name = "__oracle_p" + std::to_string(fresh++);
            for (std::size_t s = 0; s < c.size(); ++s) {
                bool t = ev.truth[s] == Truth::True;
                if (ev.truth[s] == Truth::Unknown) t = check_state_formula(c, s, f, opts);
                if (t) c.labels[s].insert(name);
            }
            return atom(name);
        }
    }
    return f;
}

Truth compare_exact(double v, Cmp cmp, double z, double tol) {
    bool ok = false;
    switch (cmp) {
        case Cmp::Ge: ok = v >= z - tol; break;
        case Cmp::Gt: ok = v > z - tol; break;
        case Cmp::Le: ok = v <= z + tol; break;
        case Cmp::Lt: ok = v < z + tol; break;
    }
    return ok ? Truth::True : Truth::False;
}

// Decided only if the whole bracket widened by the CI lies on one side.
Truth compare_mc(const Verdict& v, Cmp cmp, double z) {
    double lo = v.lower - v.ci, hi = v.upper + v.ci;
    switch (cmp) {
        case Cmp::Ge: return lo >= z ? Truth::True : hi < z ? Truth::False : Truth::Unknown;
        case Cmp::Gt: return lo > z ? Truth::True : hi <= z ? Truth::False : Truth::Unknown;
        case Cmp::Le: return hi <= z ? Truth::True : lo > z ? Truth::False : Truth::Unknown;
        case Cmp::Lt: return hi < z ? Truth::True : lo >= z ? Truth::False : Truth::Unknown;
    }
    return Truth::Unknown;
}

}  // namespace

Verdict mc_estimate(const MarkovChain& c, std::size_t from, const Formula& psi, std::size_t samples,
                    std::size_t horizon, std::uint64_t seed, Pessimism pessimism) {
    McEvaluator ev(c, psi, default_horizon(c, horizon), seed);
    std::size_t yes = 0, no = 0, und = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        switch (ev.sample(from)) {
            case Truth::True: ++yes; break;
            case Truth::False: ++no; break;
            case Truth::Unknown: ++und; break;
        }
    }
    Verdict v;
    v.method = Method::MonteCarlo;
    v.samples = samples;
    v.undecided = und;
    v.pessimism = pessimism;
    double n = static_cast<double>(std::max<std::size_t>(samples, 1));
    v.lower = static_cast<double>(yes) / n;
    v.upper = 1.0 - static_cast<double>(no) / n;
    switch (pessimism) {
        case Pessimism::Pessimistic: v.probability = v.lower; break;
        case Pessimism::Optimistic: v.probability = v.upper; break;
        case Pessimism::Discard:
            v.probability = yes + no ? static_cast<double>(yes) / static_cast<double>(yes + no) : 0.0;
            break;
    }
    v.ci = std::max(wilson_half_width(v.lower, samples), wilson_half_width(v.upper, samples));
    return v;
}

Verdict path_probability(const MarkovChain& c, std::size_t from, const Formula& psi, const Options& opts) {
    MarkovChain work = c;
    bool exact = true;
    int fresh = 0;
    Formula r = has_prob(psi) ? resolve(work, psi, opts, exact, fresh) : psi;
    if (exact) {
        if (auto v = exact_vector(work, r)) {
            Verdict out;
            out.probability = out.lower = out.upper = (*v)[from];
            out.method = Method::Exact;
            return out;
        }
    }
    return mc_estimate(work, from, r, opts.samples, opts.horizon, opts.seed + from, opts.pessimism);
}

Evaluation evaluate(const MarkovChain& c, const Formula& phi, const Options& opts) {
    Evaluation out;
    const std::size_t n = c.size();
    switch (phi.kind()) {
        case Kind::True: out.truth.assign(n, Truth::True); return out;
        case Kind::Atom: {
            for (std::size_t s = 0; s < n; ++s)
                out.truth.push_back(c.labels[s].count(phi.name()) ? Truth::True : Truth::False);
            return out;
        }
        case Kind::Not: {
            out = evaluate(c, phi.sub(), negated(opts));
            for (auto& t : out.truth) t = t_not(t);
            return out;
        }
        case Kind::And: {
            Evaluation a = evaluate(c, phi.lhs(), opts), b = evaluate(c, phi.rhs(), opts);
            out.exact = a.exact && b.exact;
            for (std::size_t s = 0; s < n; ++s) out.truth.push_back(t_and(a.truth[s], b.truth[s]));
            return out;
        }
        case Kind::Prob: break;
        default: throw std::invalid_argument("not a state formula: " + to_string(phi));
    }
    MarkovChain work = c;
    bool exact = true;
    int fresh = 0;
    Formula body = has_prob(phi.sub()) ? resolve(work, phi.sub(), opts, exact, fresh) : phi.sub();
    double z = phi.bound().value();
    std::optional<std::vector<double>> vec;
    if (exact) vec = exact_vector(work, body);
    out.exact = vec.has_value();
    for (std::size_t s = 0; s < n; ++s) {
        if (vec) {
            out.truth.push_back(compare_exact((*vec)[s], phi.cmp(), z, opts.exact_tol));
            continue;
        }
        Verdict v = mc_estimate(work, s, body, opts.samples, opts.horizon, opts.seed + s, opts.pessimism);
        out.truth.push_back(compare_mc(v, phi.cmp(), z));
    }
    return out;
}

bool check_state_formula(const MarkovChain& c, std::size_t from, const Formula& phi, const Options& opts) {
    Evaluation ev = evaluate(c, phi, opts);
    Truth t = ev.truth.at(from);
    if (t != Truth::Unknown) return t == Truth::True;
    if (opts.recheck) {
        Options more = opts;
        more.samples *= 4;
        more.recheck = false;
        t = evaluate(c, phi, more).truth.at(from);
        if (t != Truth::Unknown) return t == Truth::True;
    }
    // Still undecided: fall back to point estimates.
    switch (phi.kind()) {
        case Kind::Not: return !check_state_formula(c, from, phi.sub(), negated(opts));
        case Kind::And:
            return check_state_formula(c, from, phi.lhs(), opts) && check_state_formula(c, from, phi.rhs(), opts);
        case Kind::Prob: {
            Verdict v = path_probability(c, from, phi.sub(), opts);
            return compare(v.probability, phi.cmp(), phi.bound().value());
        }
        default: return false;
    }
}

}  // namespace pctl::oracle
