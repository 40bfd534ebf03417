// pctl/program.hpp: polynomial constraint programs over [0,1]-bounded variables.
//
// The solver runs an exact rational presolve, then either an exact linear
// feasibility check or a multi-start projected Levenberg–Marquardt search.
// When the search finds nothing, a parametric refuter may still prove Unsat.

#ifndef PCTL_PROGRAM_HPP
#define PCTL_PROGRAM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pctl/model.hpp"

namespace pctl {

using VarId = std::uint32_t;

struct VarInfo {
    enum class Kind : std::uint8_t { Formula, Action, Free };
    Kind kind = Kind::Free;
    std::uint32_t node = 0;     // Formula
    Pair pair{};                // Formula, Action
    ActionId action = 0;        // Action
    std::uint64_t set_hash = 0; // Formula
    std::string name;

    static VarInfo formula(std::uint32_t node, Pair p, std::uint64_t set_hash);
    static VarInfo action_var(Pair p, ActionId a);
    static VarInfo free(std::string name);
    // Inverse of the naming scheme; unrecognised names become Free.
    static VarInfo from_name(const std::string& name);
};

// ── Polynomial ──────────────────────────────────────────────────────────────

struct Term {
    double coef = 0.0;
    std::vector<VarId> vars;  // sorted monomial, repeats allowed; empty = constant
    friend bool operator==(const Term&, const Term&) = default;
};

class Polynomial {
public:
    Polynomial() = default;
    Polynomial(double c);  // NOLINT: implicit constant
    static Polynomial var(VarId v, double coef = 1.0);
    static Polynomial monomial(double coef, std::vector<VarId> vars);

    Polynomial& operator+=(const Polynomial& o);
    Polynomial& operator-=(const Polynomial& o);
    Polynomial operator*(const Polynomial& o) const;
    Polynomial scaled(double k) const;
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }

    const std::vector<Term>& terms() const { return terms_; }
    std::size_t degree() const;
    bool is_constant() const { return degree() == 0; }
    double constant() const;
    double eval(const std::vector<double>& x) const;
    std::set<VarId> variables() const;

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    void normalize();
    std::vector<Term> terms_;  // sorted by monomial, no zero coefficients
};

enum class Rel : std::uint8_t { Eq, Lt, Le, Gt, Ge };
const char* to_string(Rel r);

struct Constraint {
    Polynomial lhs;
    Rel rel = Rel::Eq;
    Polynomial rhs;
    std::size_t degree() const { return std::max(lhs.degree(), rhs.degree()); }
    friend bool operator==(const Constraint&, const Constraint&) = default;
};

// ── Program ─────────────────────────────────────────────────────────────────

class ConstraintProgram {
public:
    // Interns by name; the first VarInfo registered for a name wins.
    VarId add_var(const VarInfo& info);
    std::optional<VarId> find(const std::string& name) const;
    // Structurally identical constraints are stored once. Returns false on a duplicate.
    bool add(Constraint c);
    void add(Polynomial lhs, Rel rel, Polynomial rhs) { add(Constraint{std::move(lhs), rel, std::move(rhs)}); }
    void merge(const ConstraintProgram& other);

    const std::vector<VarInfo>& vars() const { return vars_; }
    const VarInfo& var(VarId v) const { return vars_.at(v); }
    const std::vector<Constraint>& constraints() const { return constraints_; }
    std::size_t max_degree() const;

    friend bool operator==(const ConstraintProgram& a, const ConstraintProgram& b) {
        return a.constraints_ == b.constraints_ && names_equal(a, b);
    }

private:
    static bool names_equal(const ConstraintProgram& a, const ConstraintProgram& b);
    std::vector<VarInfo> vars_;
    std::unordered_map<std::string, VarId> by_name_;
    std::vector<Constraint> constraints_;
    std::set<std::string> keys_;
};

// ── Checking and solving ────────────────────────────────────────────────────

struct ResidualReport {
    std::vector<double> violations;  // per constraint, ≥ 0
    double bound_violation = 0.0;    // worst distance outside [0,1]
    double max = 0.0;
};

ResidualReport check(const ConstraintProgram& p, const std::vector<double>& x, double eps_strict = 1e-6);

struct SolveOptions {
    double tol = 1e-8;
    double eps_strict = 1e-6;
    int restarts = 64;
    int max_iterations = 300;
    std::uint64_t seed = 1;
    std::map<VarId, double> hint;  // starting point of the first restart
};

enum class SolveStatus : std::uint8_t { Solution, Unsat, Unknown };
const char* to_string(SolveStatus s);

struct SolveResult {
    SolveStatus status = SolveStatus::Unknown;
    std::vector<double> values;  // indexed by VarId when status == Solution
    double residual = 0.0;
    bool linear = false;         // residual system after presolve was affine
    std::string reason;
};

SolveResult solve(const ConstraintProgram& p, const SolveOptions& opts = {});

// Exact Gauss–Jordan on A x = b with coefficients given as doubles (converted
// exactly). Returns nullopt if inconsistent; otherwise one solution with free
// variables set to zero.
std::optional<std::vector<double>> gauss_solve(const std::vector<std::vector<double>>& a,
                                               const std::vector<double>& b);

// ── Export ──────────────────────────────────────────────────────────────────

enum class ExportFormat : std::uint8_t { SmtLib, Human };

std::string export_program(const ConstraintProgram& p, ExportFormat fmt);
ConstraintProgram import_program(const std::string& text, ExportFormat fmt);
std::string format_number(double v);

}  // namespace pctl

#endif  // PCTL_PROGRAM_HPP
