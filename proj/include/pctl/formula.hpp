// pctl/formula.hpp: PCTL* abstract syntax, parsing and the rewrite library.
//
// State and path formulas share one immutable node type. A path formula is
// "proper" when it is not also a state formula. Derived operators (F, G, R,
// W, |, ->, false) never reach the AST; the parser desugars them.

#ifndef PCTL_FORMULA_HPP
#define PCTL_FORMULA_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pctl {

// ── Comparator ──────────────────────────────────────────────────────────────

enum class Cmp : std::uint8_t { Lt, Le, Gt, Ge };

Cmp complement(Cmp c);  // < ↦ ≥, ≤ ↦ >, > ↦ ≤, ≥ ↦ <
Cmp flip(Cmp c);        // < ↦ >, ≤ ↦ ≥, > ↦ <, ≥ ↦ ≤
bool is_lower(Cmp c);   // > or ≥
const char* to_string(Cmp c);
bool compare(double lhs, Cmp c, double rhs);

// ── Bound ───────────────────────────────────────────────────────────────────
// Exact decimal in [0,1] with nine fractional digits, so 1−z stays exact.

struct Bound {
    static constexpr std::int64_t kScale = 1'000'000'000;
    std::int64_t units = 0;

    static Bound from_double(double v);
    double value() const { return static_cast<double>(units) / kScale; }
    Bound one_minus() const { return Bound{kScale - units}; }
    bool is_zero() const { return units == 0; }
    bool is_one() const { return units == kScale; }
    std::string str() const;

    friend bool operator==(Bound a, Bound b) { return a.units == b.units; }
    friend auto operator<=>(Bound a, Bound b) { return a.units <=> b.units; }
};

// ── Formula ─────────────────────────────────────────────────────────────────
// Kind order doubles as the constructor rank of the canonical order.

enum class Kind : std::uint8_t { True, Atom, Not, And, Prob, Next, Until };

struct FormulaNode;

class Formula {
public:
    Formula() = default;

    Kind kind() const;
    const std::string& name() const;  // Atom
    Cmp cmp() const;                  // Prob
    Bound bound() const;              // Prob
    const Formula& sub() const;       // Not, Next, Prob body
    const Formula& lhs() const;       // And, Until
    const Formula& rhs() const;       // And, Until
    std::size_t hash() const;
    bool valid() const { return node_ != nullptr; }
    bool same_node(const Formula& o) const { return node_ == o.node_; }

    bool is(Kind k) const { return kind() == k; }

    friend bool operator==(const Formula& a, const Formula& b);
    friend bool operator<(const Formula& a, const Formula& b);

private:
    explicit Formula(std::shared_ptr<const FormulaNode> n) : node_(std::move(n)) {}
    std::shared_ptr<const FormulaNode> node_;

    friend Formula make_node(FormulaNode&&);
};

// Three-way canonical comparison: rank, then children, then atom name.
int canonical_compare(const Formula& a, const Formula& b);

Formula f_true();
Formula f_false();  // ¬true
Formula atom(std::string name);
Formula neg(Formula f);
Formula conj(Formula a, Formula b);
Formula disj(Formula a, Formula b);     // ¬(¬a ∧ ¬b)
Formula implies(Formula a, Formula b);  // ¬(a ∧ ¬b)
Formula prob(Cmp c, Bound z, Formula body);
Formula next(Formula f);
Formula until(Formula a, Formula b);
Formula eventually(Formula f);               // true U f
Formula always(Formula f);                   // ¬(true U ¬f)
Formula release(Formula a, Formula b);       // ¬(¬a U ¬b)
Formula weak_until(Formula a, Formula b);    // (a U b) ∨ G a

bool is_state_formula(const Formula& f);
bool is_proper_path(const Formula& f);
bool is_classical(const Formula& f);
std::size_t temporal_depth(const Formula& f);   // count of X and U nodes
std::size_t prob_count(const Formula& f);

// Precondition: is_classical(f). Throws std::invalid_argument otherwise.
bool classical_eval(const std::set<std::string>& labels, const Formula& f);

std::string to_string(const Formula& f);

// ── FormulaSet ──────────────────────────────────────────────────────────────

class FormulaSet {
public:
    FormulaSet() = default;
    FormulaSet(std::initializer_list<Formula> fs);

    bool insert(const Formula& f);
    bool erase(const Formula& f);
    bool contains(const Formula& f) const;
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }
    const std::vector<Formula>& items() const { return items_; }

    FormulaSet without(const Formula& f) const;
    FormulaSet with(std::initializer_list<Formula> fs) const;

    std::size_t hash() const;
    std::string str() const;

    friend bool operator==(const FormulaSet& a, const FormulaSet& b) { return a.items_ == b.items_; }
    friend bool operator<(const FormulaSet& a, const FormulaSet& b);

private:
    std::vector<Formula> items_;  // sorted by canonical order, unique
};

// ── Parsing ─────────────────────────────────────────────────────────────────

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t pos);
    std::size_t position() const { return pos_; }
private:
    std::size_t pos_;
};

// Any formula of the grammar (state or path).
Formula parse_formula(const std::string& text);
// Rejects proper path formulas at the top level.
Formula parse(const std::string& text);

// ── Rewrites ────────────────────────────────────────────────────────────────

// Single-step rewrite of trivial bounds and directly nested P operators.
std::optional<Formula> rewrite_p(const Formula& f);
// ¬P∼z ψ ↦ P∼̄z ψ and P∼z ¬ψ ↦ P[∼]1−z ψ.
std::optional<Formula> push_negation(const Formula& f);

// Every formula the calculus can produce from {f}, closed under negation.
std::vector<Formula> closure(const Formula& f);
// 2^|closure(f)|, saturating at UINT64_MAX.
std::uint64_t closure_bound(const Formula& f);

}  // namespace pctl

template <>
struct std::hash<pctl::Formula> {
    std::size_t operator()(const pctl::Formula& f) const noexcept { return f.hash(); }
};

#endif  // PCTL_FORMULA_HPP
