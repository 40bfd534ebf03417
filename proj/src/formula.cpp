#include "pctl/formula.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace pctl {

// ── Comparator ──────────────────────────────────────────────────────────────

Cmp complement(Cmp c) {
    switch (c) {
        case Cmp::Lt: return Cmp::Ge;
        case Cmp::Le: return Cmp::Gt;
        case Cmp::Gt: return Cmp::Le;
        case Cmp::Ge: return Cmp::Lt;
    }
    return c;
}

Cmp flip(Cmp c) {
    switch (c) {
        case Cmp::Lt: return Cmp::Gt;
        case Cmp::Le: return Cmp::Ge;
        case Cmp::Gt: return Cmp::Lt;
        case Cmp::Ge: return Cmp::Le;
    }
    return c;
}

bool is_lower(Cmp c) { return c == Cmp::Gt || c == Cmp::Ge; }

const char* to_string(Cmp c) {
    switch (c) {
        case Cmp::Lt: return "<";
        case Cmp::Le: return "<=";
        case Cmp::Gt: return ">";
        case Cmp::Ge: return ">=";
    }
    return "?";
}

bool compare(double lhs, Cmp c, double rhs) {
    switch (c) {
        case Cmp::Lt: return lhs < rhs;
        case Cmp::Le: return lhs <= rhs;
        case Cmp::Gt: return lhs > rhs;
        case Cmp::Ge: return lhs >= rhs;
    }
    return false;
}

// ── Bound ───────────────────────────────────────────────────────────────────

Bound Bound::from_double(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("bound outside [0,1]");
    return Bound{static_cast<std::int64_t>(std::llround(v * kScale))};
}

std::string Bound::str() const {
    std::string s = std::to_string(units / kScale);
    std::int64_t frac = units % kScale;
    if (frac == 0) return s;
    std::string digits = std::to_string(frac);
    digits.insert(0, 9 - digits.size(), '0');
    while (digits.back() == '0') digits.pop_back();
    return s + "." + digits;
}

// ── Nodes ───────────────────────────────────────────────────────────────────

struct FormulaNode {
    Kind kind = Kind::True;
    Cmp cmp = Cmp::Ge;
    Bound bound{};
    std::string name;
    Formula a, b;
    std::size_t hash = 0;
};

namespace {

std::size_t mix(std::size_t h, std::size_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

const std::string& empty_name() {
    static const std::string s;
    return s;
}

}  // namespace

Formula make_node(FormulaNode&& n) {
    std::size_t h = mix(0, static_cast<std::size_t>(n.kind));
    if (n.kind == Kind::Atom) h = mix(h, std::hash<std::string>{}(n.name));
    if (n.kind == Kind::Prob) {
        h = mix(h, static_cast<std::size_t>(n.cmp));
        h = mix(h, static_cast<std::size_t>(n.bound.units));
    }
    if (n.a.valid()) h = mix(h, n.a.hash());
    if (n.b.valid()) h = mix(h, n.b.hash());
    n.hash = h;
    return Formula(std::make_shared<const FormulaNode>(std::move(n)));
}

Kind Formula::kind() const { return node_->kind; }
const std::string& Formula::name() const { return node_ ? node_->name : empty_name(); }
Cmp Formula::cmp() const { return node_->cmp; }
Bound Formula::bound() const { return node_->bound; }
const Formula& Formula::sub() const { return node_->a; }
const Formula& Formula::lhs() const { return node_->a; }
const Formula& Formula::rhs() const { return node_->b; }
std::size_t Formula::hash() const { return node_ ? node_->hash : 0; }

int canonical_compare(const Formula& x, const Formula& y) {
    if (x.same_node(y)) return 0;
    if (x.kind() != y.kind()) return x.kind() < y.kind() ? -1 : 1;
    switch (x.kind()) {
        case Kind::True:
            return 0;
        case Kind::Atom:
            return x.name().compare(y.name()) < 0 ? -1 : (x.name() == y.name() ? 0 : 1);
        case Kind::Not:
        case Kind::Next:
            return canonical_compare(x.sub(), y.sub());
        case Kind::Prob:
            if (x.cmp() != y.cmp()) return x.cmp() < y.cmp() ? -1 : 1;
            if (x.bound() != y.bound()) return x.bound() < y.bound() ? -1 : 1;
            return canonical_compare(x.sub(), y.sub());
        case Kind::And:
        case Kind::Until: {
            int c = canonical_compare(x.lhs(), y.lhs());
            return c != 0 ? c : canonical_compare(x.rhs(), y.rhs());
        }
    }
    return 0;
}

bool operator==(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_ || a.hash() != b.hash()) return false;
    return canonical_compare(a, b) == 0;
}

bool operator<(const Formula& a, const Formula& b) { return canonical_compare(a, b) < 0; }

// ── Constructors ────────────────────────────────────────────────────────────

Formula f_true() {
    static const Formula t = make_node(FormulaNode{});
    return t;
}

Formula f_false() { return neg(f_true()); }

Formula atom(std::string name) {
    FormulaNode n;
    n.kind = Kind::Atom;
    n.name = std::move(name);
    return make_node(std::move(n));
}

Formula neg(Formula f) {
    FormulaNode n;
    n.kind = Kind::Not;
    n.a = std::move(f);
    return make_node(std::move(n));
}

Formula conj(Formula a, Formula b) {
    FormulaNode n;
    n.kind = Kind::And;
    n.a = std::move(a);
    n.b = std::move(b);
    return make_node(std::move(n));
}

Formula disj(Formula a, Formula b) { return neg(conj(neg(std::move(a)), neg(std::move(b)))); }

Formula implies(Formula a, Formula b) { return neg(conj(std::move(a), neg(std::move(b)))); }

Formula prob(Cmp c, Bound z, Formula body) {
    if (z.units < 0 || z.units > Bound::kScale) throw std::invalid_argument("bound outside [0,1]");
    FormulaNode n;
    n.kind = Kind::Prob;
    n.cmp = c;
    n.bound = z;
    n.a = std::move(body);
    return make_node(std::move(n));
}

Formula next(Formula f) {
    FormulaNode n;
    n.kind = Kind::Next;
    n.a = std::move(f);
    return make_node(std::move(n));
}

Formula until(Formula a, Formula b) {
    FormulaNode n;
    n.kind = Kind::Until;
    n.a = std::move(a);
    n.b = std::move(b);
    return make_node(std::move(n));
}

Formula eventually(Formula f) { return until(f_true(), std::move(f)); }
Formula always(Formula f) { return neg(eventually(neg(std::move(f)))); }
Formula release(Formula a, Formula b) { return neg(until(neg(std::move(a)), neg(std::move(b)))); }
Formula weak_until(Formula a, Formula b) { return disj(until(a, std::move(b)), always(a)); }

// ── Predicates ──────────────────────────────────────────────────────────────

bool is_state_formula(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom:
        case Kind::Prob:
            return true;
        case Kind::Not:
            return is_state_formula(f.sub());
        case Kind::And:
            return is_state_formula(f.lhs()) && is_state_formula(f.rhs());
        case Kind::Next:
        case Kind::Until:
            return false;
    }
    return false;
}

bool is_proper_path(const Formula& f) { return !is_state_formula(f); }

bool is_classical(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom:
            return true;
        case Kind::Not:
            return is_classical(f.sub());
        case Kind::And:
            return is_classical(f.lhs()) && is_classical(f.rhs());
        default:
            return false;
    }
}

std::size_t temporal_depth(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom:
            return 0;
        case Kind::Not:
        case Kind::Prob:
            return temporal_depth(f.sub());
        case Kind::Next:
            return 1 + temporal_depth(f.sub());
        case Kind::And:
            return temporal_depth(f.lhs()) + temporal_depth(f.rhs());
        case Kind::Until:
            return 1 + temporal_depth(f.lhs()) + temporal_depth(f.rhs());
    }
    return 0;
}

std::size_t prob_count(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom:
            return 0;
        case Kind::Not:
        case Kind::Next:
            return prob_count(f.sub());
        case Kind::Prob:
            return 1 + prob_count(f.sub());
        case Kind::And:
        case Kind::Until:
            return prob_count(f.lhs()) + prob_count(f.rhs());
    }
    return 0;
}

bool classical_eval(const std::set<std::string>& labels, const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
            return true;
        case Kind::Atom:
            return labels.count(f.name()) > 0;
        case Kind::Not:
            return !classical_eval(labels, f.sub());
        case Kind::And:
            return classical_eval(labels, f.lhs()) && classical_eval(labels, f.rhs());
        default:
            throw std::invalid_argument("classical_eval: not a classical formula: " + to_string(f));
    }
}

// ── Printing ────────────────────────────────────────────────────────────────
// Binary nodes are always parenthesized, so unary chains read back unchanged.

std::string to_string(const Formula& f) {
    switch (f.kind()) {
        case Kind::True:
            return "true";
        case Kind::Atom:
            return f.name();
        case Kind::Not:
            return "!" + to_string(f.sub());
        case Kind::Next:
            return "X " + to_string(f.sub());
        case Kind::Prob:
            return std::string("P") + to_string(f.cmp()) + f.bound().str() + " " + to_string(f.sub());
        case Kind::And:
            return "(" + to_string(f.lhs()) + " & " + to_string(f.rhs()) + ")";
        case Kind::Until:
            return "(" + to_string(f.lhs()) + " U " + to_string(f.rhs()) + ")";
    }
    return "?";
}

// ── FormulaSet ──────────────────────────────────────────────────────────────

FormulaSet::FormulaSet(std::initializer_list<Formula> fs) {
    for (const auto& f : fs) insert(f);
}

bool FormulaSet::insert(const Formula& f) {
    auto it = std::lower_bound(items_.begin(), items_.end(), f);
    if (it != items_.end() && *it == f) return false;
    items_.insert(it, f);
    return true;
}

bool FormulaSet::erase(const Formula& f) {
    auto it = std::lower_bound(items_.begin(), items_.end(), f);
    if (it == items_.end() || !(*it == f)) return false;
    items_.erase(it);
    return true;
}

bool FormulaSet::contains(const Formula& f) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), f);
    return it != items_.end() && *it == f;
}

FormulaSet FormulaSet::without(const Formula& f) const {
    FormulaSet r = *this;
    r.erase(f);
    return r;
}

FormulaSet FormulaSet::with(std::initializer_list<Formula> fs) const {
    FormulaSet r = *this;
    for (const auto& f : fs) r.insert(f);
    return r;
}

std::size_t FormulaSet::hash() const {
    std::size_t h = items_.size();
    for (const auto& f : items_) h = mix(h, f.hash());
    return h;
}

std::string FormulaSet::str() const {
    std::string s = "{";
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (i) s += ", ";
        s += to_string(items_[i]);
    }
    return s + "}";
}

bool operator<(const FormulaSet& a, const FormulaSet& b) {
    return std::lexicographical_compare(a.items_.begin(), a.items_.end(), b.items_.begin(),
                                        b.items_.end());
}

// ── Rewrites ────────────────────────────────────────────────────────────────

std::optional<Formula> rewrite_p(const Formula& f) {
    if (!f.is(Kind::Prob)) return std::nullopt;
    const Cmp c = f.cmp();
    const Bound u = f.bound();
    if (c == Cmp::Ge && u.is_zero()) return f_true();
    if (c == Cmp::Gt && u.is_one()) return f_false();
    if (c == Cmp::Le && u.is_one()) return f_true();
    if (c == Cmp::Lt && u.is_zero()) return f_false();
    const Formula& body = f.sub();
    if (!body.is(Kind::Prob)) return std::nullopt;
    switch (c) {
        case Cmp::Ge:
        case Cmp::Gt:
            return body;
        case Cmp::Le:
            return prob(Cmp::Ge, u.one_minus(), prob(complement(body.cmp()), body.bound(), body.sub()));
        case Cmp::Lt:
            return prob(Cmp::Gt, u.one_minus(), prob(complement(body.cmp()), body.bound(), body.sub()));
    }
    return std::nullopt;
}

std::optional<Formula> push_negation(const Formula& f) {
    if (f.is(Kind::Not) && f.sub().is(Kind::Prob)) {
        const Formula& p = f.sub();
        return prob(complement(p.cmp()), p.bound(), p.sub());
    }
    if (f.is(Kind::Prob) && f.sub().is(Kind::Not)) {
        return prob(flip(f.cmp()), f.bound().one_minus(), f.sub().sub());
    }
    return std::nullopt;
}

// ── Closure ─────────────────────────────────────────────────────────────────

namespace {

// Formulas one inference step can introduce when `f` is the pivot.
std::vector<Formula> successors(const Formula& f) {
    std::vector<Formula> out;
    switch (f.kind()) {
        case Kind::True:
        case Kind::Atom:
            break;
        case Kind::And:
            out = {f.lhs(), f.rhs()};
            break;
        case Kind::Next:
            out = {f.sub()};
            break;
        case Kind::Until:
            out = {f.rhs(), f.lhs(), neg(f.rhs()), next(f)};
            break;
        case Kind::Prob: {
            if (auto r = rewrite_p(f)) out.push_back(*r);
            if (auto r = push_negation(f)) out.push_back(*r);
            const Formula& body = f.sub();
            if (is_state_formula(body)) out.push_back(is_lower(f.cmp()) ? body : neg(body));
            out.push_back(body);
            break;
        }
        case Kind::Not: {
            const Formula& g = f.sub();
            switch (g.kind()) {
                case Kind::Not:
                    out = {g.sub()};
                    break;
                case Kind::Prob:
                    out = {*push_negation(f)};
                    break;
                case Kind::And:
                    out = {neg(g.lhs()), g.lhs(), neg(g.rhs())};
                    break;
                case Kind::Until:
                    out = {neg(g.lhs()), neg(g.rhs()), g.lhs(), next(f)};
                    break;
                case Kind::Next:
                    out = {next(neg(g.sub()))};
                    break;
                default:
                    break;
            }
            break;
        }
    }
    return out;
}

}  // namespace

std::vector<Formula> closure(const Formula& f) {
    std::set<Formula> seen{f};
    std::vector<Formula> work{f};
    while (!work.empty()) {
        Formula g = work.back();
        work.pop_back();
        for (auto& h : successors(g)) {
            if (seen.insert(h).second) work.push_back(h);
        }
    }
    std::vector<Formula> base(seen.begin(), seen.end());
    for (const auto& g : base) {
        if (g.is(Kind::True)) continue;
        seen.insert(g.is(Kind::Not) ? g.sub() : neg(g));
    }
    return {seen.begin(), seen.end()};
}

std::uint64_t closure_bound(const Formula& f) {
    const std::size_t n = closure(f).size();
    if (n >= 64) return UINT64_MAX;
    return std::uint64_t{1} << n;
}

}  // namespace pctl
