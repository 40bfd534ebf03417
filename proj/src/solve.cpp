// Constraint solving: exact presolve, exact linear feasibility, and a
// multi-start projected Levenberg–Marquardt search for degree-2 systems,
// backed by a parametric refutation step when the search finds nothing.

#include <gmpxx.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "pctl/program.hpp"

namespace pctl {

namespace {

// ── Rational polynomials ────────────────────────────────────────────────────

using Mono = std::vector<VarId>;  // sorted, repeats allowed

struct QPoly {
    std::map<Mono, mpq_class> t;

    static QPoly from(const Polynomial& p) {
        QPoly q;
        for (const auto& term : p.terms()) q.t[term.vars] += mpq_class(term.coef);
        q.prune();
        return q;
    }

    void prune() {
        for (auto it = t.begin(); it != t.end();) it = (it->second == 0) ? t.erase(it) : std::next(it);
    }

    std::size_t degree() const {
        std::size_t d = 0;
        for (const auto& [m, c] : t) d = std::max(d, m.size());
        return d;
    }

    mpq_class constant() const {
        auto it = t.find(Mono{});
        return it == t.end() ? mpq_class(0) : it->second;
    }

    void add(const QPoly& o, const mpq_class& k) {
        for (const auto& [m, c] : o.t) t[m] += k * c;
        prune();
    }

    QPoly times(const QPoly& o) const {
        QPoly r;
        for (const auto& [ma, ca] : t) {
            for (const auto& [mb, cb] : o.t) {
                Mono m = ma;
                m.insert(m.end(), mb.begin(), mb.end());
                std::sort(m.begin(), m.end());
                r.t[m] += ca * cb;
            }
        }
        r.prune();
        return r;
    }

    // Replaces every occurrence of x by e.
    QPoly substitute(VarId x, const QPoly& e) const {
        QPoly r;
        for (const auto& [m, c] : t) {
            auto k = std::count(m.begin(), m.end(), x);
            if (k == 0) {
                r.t[m] += c;
                continue;
            }
            QPoly part;
            Mono rest;
            for (VarId v : m)
                if (v != x) rest.push_back(v);
            part.t[rest] = c;
            for (long i = 0; i < k; ++i) part = part.times(e);
            for (const auto& [pm, pc] : part.t) r.t[pm] += pc;
        }
        r.prune();
        return r;
    }

    std::set<VarId> vars() const {
        std::set<VarId> out;
        for (const auto& [m, c] : t) out.insert(m.begin(), m.end());
        return out;
    }

    // Coefficient of x if x occurs only in the linear monomial {x}.
    std::optional<mpq_class> linear_only(VarId x) const {
        std::optional<mpq_class> coef;
        for (const auto& [m, c] : t) {
            if (std::find(m.begin(), m.end(), x) == m.end()) continue;
            if (m.size() != 1) return std::nullopt;
            coef = c;
        }
        return coef;
    }

    bool appears_nonlinearly(VarId x) const {
        for (const auto& [m, c] : t)
            if (m.size() > 1 && std::find(m.begin(), m.end(), x) != m.end()) return true;
        return false;
    }

    double eval(const std::vector<double>& x) const {
        double s = 0.0;
        for (const auto& [m, c] : t) {
            double v = c.get_d();
            for (VarId id : m) v *= x[id];
            s += v;
        }
        return s;
    }
};

// Normalized row: p = 0, p ≥ 0 or p ≥ ε (strict).
enum class RowKind : std::uint8_t { Eq, Ge, Gt };

struct Row {
    QPoly p;
    RowKind kind = RowKind::Eq;
    bool alive = true;
};

enum class VarState : std::uint8_t { Active, Fixed, Eliminated };

struct Elimination {
    VarId var;
    QPoly expr;
};

// ── Presolve ────────────────────────────────────────────────────────────────

class Presolver {
public:
    Presolver(const ConstraintProgram& prog, const mpq_class& eps)
        : prog_(prog), eps_(eps), n_(prog.vars().size()),
          state_(n_, VarState::Active), value_(n_), lo_(n_, mpq_class(0)), hi_(n_, mpq_class(1)),
          occ_(n_) {
        for (const auto& c : prog.constraints()) {
            QPoly l = QPoly::from(c.lhs), r = QPoly::from(c.rhs);
            Row row;
            switch (c.rel) {
                case Rel::Eq: row.kind = RowKind::Eq; row.p = l; row.p.add(r, -1); break;
                case Rel::Ge: row.kind = RowKind::Ge; row.p = l; row.p.add(r, -1); break;
                case Rel::Gt: row.kind = RowKind::Gt; row.p = l; row.p.add(r, -1); break;
                case Rel::Le: row.kind = RowKind::Ge; row.p = r; row.p.add(l, -1); break;
                case Rel::Lt: row.kind = RowKind::Gt; row.p = r; row.p.add(l, -1); break;
            }
            add_row(std::move(row));
        }
    }

    // Returns false on a proven contradiction.
    bool run() {
        while (!dirty_.empty()) {
            std::size_t r = *dirty_.begin();
            dirty_.erase(dirty_.begin());
            if (!rows_[r].alive) continue;
            if (!process(r)) return false;
        }
        drop_duplicates();
        return true;
    }

    std::string reason;

    const std::vector<Row>& rows() const { return rows_; }
    const std::vector<VarState>& state() const { return state_; }
    const std::vector<mpq_class>& lo() const { return lo_; }
    const std::vector<mpq_class>& hi() const { return hi_; }
    const std::vector<mpq_class>& value() const { return value_; }
    const std::vector<Elimination>& eliminations() const { return elim_; }

private:
    void add_row(Row row) {
        std::size_t id = rows_.size();
        for (VarId v : row.p.vars()) occ_[v].insert(id);
        rows_.push_back(std::move(row));
        dirty_.insert(id);
    }

    // Substitution leaves many rows equal up to a constant factor; keep one of each.
    void drop_duplicates() {
        std::map<std::pair<RowKind, std::map<Mono, mpq_class>>, std::size_t> seen;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            if (!rows_[r].alive || rows_[r].p.t.empty()) continue;
            const mpq_class lead = rows_[r].p.t.begin()->second;
            const mpq_class scale = rows_[r].kind == RowKind::Eq ? lead : mpq_class(abs(lead));
            std::map<Mono, mpq_class> norm;
            for (const auto& [m, c] : rows_[r].p.t) norm[m] = c / scale;
            if (!seen.emplace(std::make_pair(rows_[r].kind, std::move(norm)), r).second) kill_row(r);
        }
    }

    void kill_row(std::size_t r) {
        rows_[r].alive = false;
        for (VarId v : rows_[r].p.vars()) occ_[v].erase(r);
    }

    void replace_everywhere(VarId x, const QPoly& e, std::size_t skip_row) {
        auto rows = occ_[x];
        for (std::size_t r : rows) {
            if (r == skip_row || !rows_[r].alive) continue;
            for (VarId v : rows_[r].p.vars()) occ_[v].erase(r);
            rows_[r].p = rows_[r].p.substitute(x, e);
            for (VarId v : rows_[r].p.vars()) occ_[v].insert(r);
            dirty_.insert(r);
        }
        occ_[x].clear();
    }

    bool fix(VarId x, const mpq_class& v, std::size_t skip_row) {
        if (v < lo_[x] || v > hi_[x]) {
            reason = "variable " + prog_.var(x).name + " forced outside its bounds";
            return false;
        }
        state_[x] = VarState::Fixed;
        value_[x] = v;
        QPoly e;
        if (v != 0) e.t[Mono{}] = v;
        replace_everywhere(x, e, skip_row);
        return true;
    }

    bool holds(const mpq_class& c, RowKind k) const {
        switch (k) {
            case RowKind::Eq: return c == 0;
            case RowKind::Ge: return c >= 0;
            case RowKind::Gt: return c >= eps_;
        }
        return false;
    }

    bool tighten(VarId x, const mpq_class& lo, const mpq_class& hi) {
        if (lo > lo_[x]) lo_[x] = lo;
        if (hi < hi_[x]) hi_[x] = hi;
        if (lo_[x] > hi_[x]) {
            reason = "empty range for " + prog_.var(x).name;
            return false;
        }
        if (lo_[x] == hi_[x]) return fix(x, lo_[x], SIZE_MAX);
        return true;
    }

    bool rank_better(VarId a, VarId b) const {
        auto pri = [&](VarId v) { return prog_.var(v).kind == VarInfo::Kind::Formula ? 1 : 0; };
        if (pri(a) != pri(b)) return pri(a) > pri(b);
        return a > b;
    }

    bool process(std::size_t r) {
        Row& row = rows_[r];
        if (row.p.degree() == 0) {
            mpq_class c = row.p.constant();
            kill_row(r);
            if (!holds(c, row.kind)) {
                reason = "constant constraint violated";
                return false;
            }
            return true;
        }
        // v·q = 0 or v·q ≥ 0 with v bounded away from zero: drop the factor v.
        if (row.kind != RowKind::Gt && row.p.constant() == 0) {
            for (VarId v : row.p.vars()) {
                if (lo_[v] <= 0) continue;
                bool common = true;
                for (const auto& [m, c] : row.p.t)
                    if (std::find(m.begin(), m.end(), v) == m.end()) common = false;
                if (!common) continue;
                QPoly q;
                for (const auto& [m, c] : row.p.t) {
                    Mono rest = m;
                    rest.erase(std::find(rest.begin(), rest.end(), v));
                    q.t[rest] += c;
                }
                q.prune();
                Row divided{std::move(q), row.kind, true};
                kill_row(r);
                add_row(std::move(divided));
                return true;
            }
        }
        auto vars = row.p.vars();
        if (row.kind != RowKind::Eq) {
            // Single-variable linear inequality becomes a bound.
            if (vars.size() == 1 && row.p.degree() == 1) {
                VarId x = *vars.begin();
                mpq_class c = row.p.t.at(Mono{x});
                mpq_class k = (row.kind == RowKind::Gt ? eps_ : mpq_class(0)) - row.p.constant();
                mpq_class b = k / c;
                kill_row(r);
                return c > 0 ? tighten(x, b, hi_[x]) : tighten(x, lo_[x], b);
            }
            return true;
        }
        // Equality: pick a variable that can be isolated.
        std::optional<VarId> best;
        int best_class = 3;
        for (VarId x : vars) {
            auto c = row.p.linear_only(x);
            if (!c) continue;
            QPoly rest = row.p;
            rest.t.erase(Mono{x});
            std::size_t d = rest.degree();
            int cls = d == 0 ? 0 : d == 1 ? 1 : 2;
            if (cls == 2) {
                bool ok = true;
                for (std::size_t o : occ_[x])
                    if (o != r && rows_[o].p.appears_nonlinearly(x)) ok = false;
                if (!ok) continue;
            }
            if (!best || cls < best_class || (cls == best_class && rank_better(x, *best))) {
                best = x;
                best_class = cls;
            }
        }
        if (!best) return true;
        VarId x = *best;
        mpq_class c = row.p.t.at(Mono{x});
        QPoly e = row.p;
        e.t.erase(Mono{x});
        QPoly neg;
        neg.add(e, mpq_class(-1) / c);
        kill_row(r);
        if (best_class == 0) return fix(x, neg.constant(), r);
        state_[x] = VarState::Eliminated;
        elim_.push_back(Elimination{x, neg});
        replace_everywhere(x, neg, r);
        // Keep the eliminated variable's range as constraints on its definition.
        if (neg.t.size() == 1 && neg.t.begin()->first.size() == 1 && neg.t.begin()->second == 1) {
            VarId y = neg.t.begin()->first[0];
            return tighten(y, lo_[x], hi_[x]);
        }
        Row low;
        low.kind = RowKind::Ge;
        low.p = neg;
        low.p.t[Mono{}] -= lo_[x];
        low.p.prune();
        Row high;
        high.kind = RowKind::Ge;
        high.p.t[Mono{}] = hi_[x];
        high.p.add(neg, -1);
        add_row(std::move(low));
        add_row(std::move(high));
        return true;
    }

    const ConstraintProgram& prog_;
    mpq_class eps_;
    std::size_t n_;
    std::vector<Row> rows_;
    std::vector<VarState> state_;
    std::vector<mpq_class> value_;
    std::vector<mpq_class> lo_, hi_;
    std::vector<std::set<std::size_t>> occ_;
    std::set<std::size_t> dirty_;
    std::vector<Elimination> elim_;
};

// ── Exact linear algebra ────────────────────────────────────────────────────

using QMatrix = std::vector<std::vector<mpq_class>>;

// Reduced row echelon form in place on [A | b]. Returns pivot columns, or
// nullopt if a row 0 = c ≠ 0 appears.
std::optional<std::vector<std::size_t>> rref(QMatrix& m, std::size_t ncols) {
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < ncols && row < m.size(); ++col) {
        std::size_t sel = row;
        while (sel < m.size() && m[sel][col] == 0) ++sel;
        if (sel == m.size()) continue;
        std::swap(m[row], m[sel]);
        mpq_class inv = 1 / m[row][col];
        for (auto& v : m[row]) v *= inv;
        for (std::size_t r = 0; r < m.size(); ++r) {
            if (r == row || m[r][col] == 0) continue;
            mpq_class f = m[r][col];
            for (std::size_t k = col; k <= ncols; ++k) m[r][k] -= f * m[row][k];
        }
        pivots.push_back(col);
        ++row;
    }
    for (std::size_t r = row; r < m.size(); ++r)
        if (m[r][ncols] != 0) return std::nullopt;
    return pivots;
}

// Phase-one simplex with Bland's rule: finds z ≥ 0 with A z = b.
std::optional<std::vector<mpq_class>> simplex_feasible(QMatrix a, std::vector<mpq_class> b) {
    std::size_t m = a.size();
    std::size_t n = m == 0 ? 0 : a[0].size();
    for (std::size_t i = 0; i < m; ++i) {
        if (b[i] < 0) {
            for (auto& v : a[i]) v = -v;
            b[i] = -b[i];
        }
    }
    std::size_t cols = n + m;
    QMatrix t(m, std::vector<mpq_class>(cols + 1));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) t[i][j] = a[i][j];
        t[i][n + i] = 1;
        t[i][cols] = b[i];
    }
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;
    // Reduced costs of minimizing the sum of artificials.
    std::vector<mpq_class> cost(cols + 1);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j <= cols; ++j)
            if (j < n || j == cols) cost[j] -= t[i][j];
    for (;;) {
        std::size_t enter = cols;
        for (std::size_t j = 0; j < cols; ++j) {
            if (cost[j] < 0) {
                enter = j;
                break;
            }
        }
        if (enter == cols) break;
        std::size_t leave = m;
        mpq_class best;
        for (std::size_t i = 0; i < m; ++i) {
            if (t[i][enter] <= 0) continue;
            mpq_class ratio = t[i][cols] / t[i][enter];
            if (leave == m || ratio < best || (ratio == best && basis[i] < basis[leave])) {
                leave = i;
                best = ratio;
            }
        }
        if (leave == m) break;  // unbounded direction cannot occur in phase one
        mpq_class inv = 1 / t[leave][enter];
        for (auto& v : t[leave]) v *= inv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == leave || t[i][enter] == 0) continue;
            mpq_class f = t[i][enter];
            for (std::size_t j = 0; j <= cols; ++j) t[i][j] -= f * t[leave][j];
        }
        if (cost[enter] != 0) {
            mpq_class f = cost[enter];
            for (std::size_t j = 0; j <= cols; ++j) cost[j] -= f * t[leave][j];
        }
        basis[leave] = enter;
    }
    if (cost[cols] != 0) return std::nullopt;  // minimum sum of artificials > 0
    std::vector<mpq_class> z(n);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) z[basis[i]] = t[i][cols];
    return z;
}

// Feasibility of rows (all degree ≤ 1) over the box [lo, hi] of the active
// variables. Writes a rational point into `out` on success.
enum class LinearOutcome : std::uint8_t { Feasible, Infeasible };

LinearOutcome solve_linear(const std::vector<Row>& rows, const std::vector<VarId>& active,
                           const std::vector<mpq_class>& lo, const std::vector<mpq_class>& hi,
                           const mpq_class& eps, const std::map<VarId, double>& hint,
                           std::map<VarId, mpq_class>& out, std::string& reason) {
    std::map<VarId, std::size_t> col;
    for (std::size_t i = 0; i < active.size(); ++i) col[active[i]] = i;
    std::size_t n = active.size();

    // Equalities by Gauss–Jordan; pivot variables become affine in free ones.
    QMatrix eq;
    for (const auto& r : rows) {
        if (!r.alive || r.kind != RowKind::Eq) continue;
        std::vector<mpq_class> line(n + 1);
        for (const auto& [m, c] : r.p.t) {
            if (m.empty()) line[n] = -c;
            else line[col.at(m[0])] += c;
        }
        eq.push_back(std::move(line));
    }
    auto piv = rref(eq, n);
    if (!piv) {
        reason = "linear equalities inconsistent";
        return LinearOutcome::Infeasible;
    }
    std::vector<bool> is_pivot(n, false);
    for (auto p : *piv) is_pivot[p] = true;
    std::vector<std::size_t> free_cols;
    for (std::size_t j = 0; j < n; ++j)
        if (!is_pivot[j]) free_cols.push_back(j);
    std::map<std::size_t, std::size_t> free_index;
    for (std::size_t k = 0; k < free_cols.size(); ++k) free_index[free_cols[k]] = k;
    std::size_t nf = free_cols.size();

    // Every variable as an affine function of the free ones: coef[nf] = constant.
    std::vector<std::vector<mpq_class>> affine(n, std::vector<mpq_class>(nf + 1));
    for (std::size_t k = 0; k < nf; ++k) affine[free_cols[k]][k] = 1;
    for (std::size_t r = 0; r < piv->size(); ++r) {
        std::size_t p = (*piv)[r];
        affine[p][nf] = eq[r][n];
        for (std::size_t k = 0; k < nf; ++k) affine[p][k] = -eq[r][free_cols[k]];
    }

    // Inequalities g·y ≥ h over free variables y.
    struct Ineq {
        std::vector<mpq_class> g;
        mpq_class h;
    };
    std::vector<Ineq> ineqs;
    auto add_ineq = [&](std::vector<mpq_class> g, mpq_class h) { ineqs.push_back({std::move(g), std::move(h)}); };
    for (const auto& r : rows) {
        if (!r.alive || r.kind == RowKind::Eq) continue;
        std::vector<mpq_class> g(nf);
        mpq_class c = 0;
        for (const auto& [m, k] : r.p.t) {
            if (m.empty()) {
                c += k;
                continue;
            }
            const auto& a = affine[col.at(m[0])];
            for (std::size_t j = 0; j < nf; ++j) g[j] += k * a[j];
            c += k * a[nf];
        }
        add_ineq(std::move(g), (r.kind == RowKind::Gt ? eps : mpq_class(0)) - c);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!is_pivot[j]) continue;
        std::vector<mpq_class> g(affine[j].begin(), affine[j].begin() + static_cast<long>(nf));
        add_ineq(g, lo[active[j]] - affine[j][nf]);
        std::vector<mpq_class> ng(nf);
        for (std::size_t k = 0; k < nf; ++k) ng[k] = -g[k];
        add_ineq(ng, affine[j][nf] - hi[active[j]]);
    }

    std::vector<mpq_class> flo(nf), fhi(nf);
    for (std::size_t k = 0; k < nf; ++k) {
        flo[k] = lo[active[free_cols[k]]];
        fhi[k] = hi[active[free_cols[k]]];
    }
    // Interval pruning: drop rows implied by the box, fail on impossible ones.
    std::vector<Ineq> kept;
    for (auto& in : ineqs) {
        mpq_class mn = 0, mx = 0;
        for (std::size_t k = 0; k < nf; ++k) {
            if (in.g[k] > 0) {
                mn += in.g[k] * flo[k];
                mx += in.g[k] * fhi[k];
            } else {
                mn += in.g[k] * fhi[k];
                mx += in.g[k] * flo[k];
            }
        }
        if (mx < in.h) {
            reason = "linear inequality unsatisfiable over the variable box";
            return LinearOutcome::Infeasible;
        }
        if (mn < in.h) kept.push_back(std::move(in));
    }

    auto emit = [&](const std::vector<mpq_class>& y) {
        for (std::size_t j = 0; j < n; ++j) {
            mpq_class v = affine[j][nf];
            for (std::size_t k = 0; k < nf; ++k) v += affine[j][k] * y[k];
            out[active[j]] = v;
        }
    };

    // Try the hint (or box midpoint) first.
    std::vector<mpq_class> y0(nf);
    for (std::size_t k = 0; k < nf; ++k) {
        VarId v = active[free_cols[k]];
        auto h = hint.find(v);
        y0[k] = h != hint.end() ? mpq_class(h->second) : mpq_class((flo[k] + fhi[k]) / 2);
        if (y0[k] < flo[k]) y0[k] = flo[k];
        if (y0[k] > fhi[k]) y0[k] = fhi[k];
    }
    bool ok = true;
    for (const auto& in : kept) {
        mpq_class s = 0;
        for (std::size_t k = 0; k < nf; ++k) s += in.g[k] * y0[k];
        if (s < in.h) {
            ok = false;
            break;
        }
    }
    if (ok) {
        emit(y0);
        return LinearOutcome::Feasible;
    }

    // Standard form over z = y − lo ∈ [0, hi − lo]:
    //   g·z − s = h − g·lo  and  z + t = hi − lo.
    std::size_t m = kept.size() + nf;
    std::size_t cols = nf + kept.size() + nf;
    QMatrix a(m, std::vector<mpq_class>(cols));
    std::vector<mpq_class> b(m);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        mpq_class rhs = kept[i].h;
        for (std::size_t k = 0; k < nf; ++k) {
            a[i][k] = kept[i].g[k];
            rhs -= kept[i].g[k] * flo[k];
        }
        a[i][nf + i] = -1;
        b[i] = rhs;
    }
    for (std::size_t k = 0; k < nf; ++k) {
        std::size_t i = kept.size() + k;
        a[i][k] = 1;
        a[i][nf + kept.size() + k] = 1;
        b[i] = fhi[k] - flo[k];
    }
    auto z = simplex_feasible(std::move(a), std::move(b));
    if (!z) {
        reason = "linear inequalities infeasible";
        return LinearOutcome::Infeasible;
    }
    std::vector<mpq_class> y(nf);
    for (std::size_t k = 0; k < nf; ++k) y[k] = flo[k] + (*z)[k];
    emit(y);
    return LinearOutcome::Feasible;
}

// ── Nonlinear search ────────────────────────────────────────────────────────

struct DTerm {
    double coef;
    std::vector<std::size_t> idx;  // dense indices
};

struct DRow {
    std::vector<DTerm> terms;
    RowKind kind;
};

class NonlinearSystem {
public:
    NonlinearSystem(std::vector<DRow> rows, std::vector<double> lo, std::vector<double> hi, double eps)
        : rows_(std::move(rows)), lo_(std::move(lo)), hi_(std::move(hi)), eps_(eps) {}

    std::size_t size() const { return lo_.size(); }

    double value(const DRow& r, const std::vector<double>& y) const {
        double s = 0.0;
        for (const auto& t : r.terms) {
            double v = t.coef;
            for (auto i : t.idx) v *= y[i];
            s += v;
        }
        return s;
    }

    double residual(const DRow& r, const std::vector<double>& y) const {
        double p = value(r, y);
        switch (r.kind) {
            case RowKind::Eq: return p;
            case RowKind::Ge: return std::min(0.0, p);
            case RowKind::Gt: return std::min(0.0, p - eps_);
        }
        return 0.0;
    }

    double max_residual(const std::vector<double>& y) const {
        double m = 0.0;
        for (const auto& r : rows_) m = std::max(m, std::abs(residual(r, y)));
        return m;
    }

    double cost(const std::vector<double>& y) const {
        double c = 0.0;
        for (const auto& r : rows_) {
            double v = residual(r, y);
            c += v * v;
        }
        return 0.5 * c;
    }

    void clamp(std::vector<double>& y) const {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], lo_[i], hi_[i]);
    }

    // Gradient of row r's polynomial.
    void gradient(const DRow& r, const std::vector<double>& y, Eigen::Ref<Eigen::RowVectorXd> g) const {
        g.setZero();
        for (const auto& t : r.terms) {
            for (std::size_t k = 0; k < t.idx.size(); ++k) {
                double v = t.coef;
                for (std::size_t j = 0; j < t.idx.size(); ++j)
                    if (j != k) v *= y[t.idx[j]];
                g(static_cast<Eigen::Index>(t.idx[k])) += v;
            }
        }
    }

    // Solves the equalities for the variables not in `fixed` by one
    // Gauss–Newton step (exact when they enter linearly).
    void inner_solve(std::vector<double>& y, const std::vector<bool>& fixed) const {
        std::vector<std::size_t> inner;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (!fixed[i]) inner.push_back(i);
        if (inner.empty()) return;
        std::vector<const DRow*> eqs;
        for (const auto& r : rows_)
            if (r.kind == RowKind::Eq) eqs.push_back(&r);
        if (eqs.empty()) return;
        auto ni = static_cast<Eigen::Index>(inner.size());
        Eigen::MatrixXd j(static_cast<Eigen::Index>(eqs.size()), ni);
        Eigen::VectorXd r(static_cast<Eigen::Index>(eqs.size()));
        Eigen::RowVectorXd g(static_cast<Eigen::Index>(y.size()));
        for (std::size_t e = 0; e < eqs.size(); ++e) {
            gradient(*eqs[e], y, g);
            for (Eigen::Index k = 0; k < ni; ++k) j(static_cast<Eigen::Index>(e), k) = g(static_cast<Eigen::Index>(inner[static_cast<std::size_t>(k)]));
            r(static_cast<Eigen::Index>(e)) = value(*eqs[e], y);
        }
        Eigen::VectorXd d = j.completeOrthogonalDecomposition().solve(-r);
        for (Eigen::Index k = 0; k < ni; ++k) y[inner[static_cast<std::size_t>(k)]] += d(k);
        clamp(y);
    }

    // Projected Levenberg–Marquardt on the hinge residuals; `frozen`
    // variables do not move. Returns the final max residual.
    double minimize(std::vector<double>& y, const std::vector<bool>& frozen, int max_iter, double target) const {
        const auto n = static_cast<Eigen::Index>(y.size());
        double lambda = 1e-3;
        double c = cost(y);
        Eigen::RowVectorXd g(n);
        for (int it = 0; it < max_iter; ++it) {
            if (max_residual(y) <= target) break;
            std::vector<std::pair<const DRow*, double>> act;
            for (const auto& r : rows_) {
                double v = residual(r, y);
                if (v != 0.0) act.emplace_back(&r, v);
            }
            Eigen::MatrixXd j(static_cast<Eigen::Index>(act.size()), n);
            Eigen::VectorXd rv(static_cast<Eigen::Index>(act.size()));
            for (std::size_t k = 0; k < act.size(); ++k) {
                gradient(*act[k].first, y, g);
                j.row(static_cast<Eigen::Index>(k)) = g;
                rv(static_cast<Eigen::Index>(k)) = act[k].second;
            }
            Eigen::VectorXd grad = j.transpose() * rv;
            std::vector<Eigen::Index> freev;
            for (Eigen::Index i = 0; i < n; ++i) {
                auto iu = static_cast<std::size_t>(i);
                if (frozen[iu]) continue;
                if (y[iu] <= lo_[iu] && grad(i) > 0) continue;
                if (y[iu] >= hi_[iu] && grad(i) < 0) continue;
                freev.push_back(i);
            }
            if (freev.empty()) break;
            auto nf = static_cast<Eigen::Index>(freev.size());
            Eigen::MatrixXd jf(j.rows(), nf);
            Eigen::VectorXd gf(nf);
            for (Eigen::Index k = 0; k < nf; ++k) {
                jf.col(k) = j.col(freev[static_cast<std::size_t>(k)]);
                gf(k) = grad(freev[static_cast<std::size_t>(k)]);
            }
            Eigen::MatrixXd a = jf.transpose() * jf;
            bool improved = false;
            while (lambda < 1e12) {
                Eigen::MatrixXd damped = a;
                for (Eigen::Index k = 0; k < nf; ++k) damped(k, k) += lambda * std::max(a(k, k), 1e-6);
                Eigen::VectorXd d = damped.ldlt().solve(-gf);
                std::vector<double> cand = y;
                for (Eigen::Index k = 0; k < nf; ++k) cand[static_cast<std::size_t>(freev[static_cast<std::size_t>(k)])] += d(k);
                clamp(cand);
                double cc = cost(cand);
                if (cc < c) {
                    y = std::move(cand);
                    c = cc;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    improved = true;
                    break;
                }
                lambda *= 4.0;
            }
            if (!improved) break;
        }
        return max_residual(y);
    }

    const std::vector<double>& lo() const { return lo_; }
    const std::vector<double>& hi() const { return hi_; }

private:
    std::vector<DRow> rows_;
    std::vector<double> lo_, hi_;
    double eps_;
};

// ── Parametric refutation ───────────────────────────────────────────────────
// Action variables act as parameters; every other variable occurs at most once
// per monomial, so each row is linear in the unknowns with polynomial
// coefficients. Fraction-free elimination with sign-definite pivots preserves
// the solution set over the box, and interval bounds on the remaining rows
// can then prove infeasibility.

struct Interval {
    mpq_class lo, hi;
};

class Refuter {
public:
    Refuter(const ConstraintProgram& prog, const std::vector<mpq_class>& lo, const std::vector<mpq_class>& hi)
        : prog_(prog), lo_(lo), hi_(hi) {}

    bool is_param(VarId v) const { return prog_.var(v).kind == VarInfo::Kind::Action; }

    Interval range(const QPoly& p, const std::map<VarId, Interval>& box) const {
        work_ += p.t.size();
        Interval r{0, 0};
        for (const auto& [m, c] : p.t) {
            mpq_class mlo = 1, mhi = 1;
            for (VarId v : m) {
                auto it = box.find(v);
                const mpq_class& a = it == box.end() ? lo_[v] : it->second.lo;
                const mpq_class& b = it == box.end() ? hi_[v] : it->second.hi;
                mlo *= a;
                mhi *= b;
            }
            if (c > 0) {
                r.lo += c * mlo;
                r.hi += c * mhi;
            } else {
                r.lo += c * mhi;
                r.hi += c * mlo;
            }
        }
        return r;
    }

    // Coefficient of unknown x in p, or nullopt if x meets another unknown.
    std::optional<QPoly> coefficient(const QPoly& p, VarId x) const {
        work_ += p.t.size();
        QPoly q;
        for (const auto& [m, c] : p.t) {
            if (std::count(m.begin(), m.end(), x) == 0) continue;
            Mono rest;
            bool first = true;
            for (VarId v : m) {
                if (v == x && first) {
                    first = false;
                    continue;
                }
                if (!is_param(v)) return std::nullopt;
                rest.push_back(v);
            }
            q.t[rest] += c;
        }
        q.prune();
        return q;
    }

    static QPoly without(const QPoly& p, VarId x) {
        QPoly r;
        for (const auto& [m, c] : p.t)
            if (std::find(m.begin(), m.end(), x) == m.end()) r.t[m] = c;
        return r;
    }

    bool infeasible_row(const Row& r, const std::map<VarId, Interval>& box) const {
        const Interval i = range(r.p, box);
        return r.kind == RowKind::Eq ? (i.lo > 0 || i.hi < 0) : i.hi < 0;
    }

    // True when the rows are proven jointly infeasible.
    bool run(std::vector<Row> rows) {
        constexpr std::size_t kMaxTerms = 4000;
        std::set<VarId> unknowns;
        for (const auto& r : rows)
            for (VarId v : r.p.vars())
                if (!is_param(v)) unknowns.insert(v);

        for (;;) {
            if (work_ > kMaxWork) return false;
            for (const auto& r : rows)
                if (infeasible_row(r, {})) return true;
            // Pick the pivot with the smallest coefficient, constant ones first.
            std::optional<std::tuple<std::size_t, VarId, QPoly>> best;
            for (VarId x : unknowns) {
                bool usable = true;
                for (const auto& r : rows)
                    if (r.p.vars().count(x) && !coefficient(r.p, x)) usable = false;
                if (!usable) continue;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (rows[i].kind != RowKind::Eq || !rows[i].p.vars().count(x)) continue;
                    QPoly c = *coefficient(rows[i].p, x);
                    const Interval ci = range(c, {});
                    if (ci.lo <= 0 && ci.hi >= 0) continue;
                    if (!best || c.t.size() < std::get<2>(*best).t.size()) best.emplace(i, x, std::move(c));
                }
            }
            if (!best) break;
            auto [i, x, p] = std::move(*best);
            unknowns.erase(x);
            Row piv = rows[i];
            if (range(p, {}).hi < 0) {
                QPoly np, nr;
                np.add(p, -1);
                nr.add(piv.p, -1);
                p = np;
                piv.p = nr;
            }
            const QPoly rest_i = without(piv.p, x);
            std::vector<Row> next;
            for (std::size_t j = 0; j < rows.size(); ++j) {
                if (j == i) continue;
                if (!rows[j].p.vars().count(x)) {
                    next.push_back(std::move(rows[j]));
                    continue;
                }
                const QPoly q = *coefficient(rows[j].p, x);
                work_ += p.t.size() * rows[j].p.t.size() + q.t.size() * rest_i.t.size();
                if (work_ > kMaxWork) return false;
                Row out{p.times(without(rows[j].p, x)), rows[j].kind, true};
                out.p.add(q.times(rest_i), -1);
                if (out.p.t.size() > kMaxTerms) return false;
                if (!out.p.t.empty() || out.kind != RowKind::Eq) next.push_back(std::move(out));
            }
            rows = std::move(next);
        }
        return bisect(rows);
    }

private:
    // Splits the parameter box until every cell violates some parameter-only row.
    bool bisect(const std::vector<Row>& rows) const {
        std::vector<const Row*> param_rows;
        std::set<VarId> params;
        for (const auto& r : rows) {
            auto vs = r.p.vars();
            if (std::all_of(vs.begin(), vs.end(), [&](VarId v) { return is_param(v); })) {
                param_rows.push_back(&r);
                params.insert(vs.begin(), vs.end());
            }
        }
        if (param_rows.empty() || params.size() > 6) return false;
        std::map<VarId, Interval> root;
        for (VarId v : params) root[v] = Interval{lo_[v], hi_[v]};
        std::vector<std::pair<std::map<VarId, Interval>, int>> work{{root, 0}};
        std::size_t budget = 20000;
        while (!work.empty()) {
            if (budget-- == 0 || work_ > kMaxWork) return false;
            auto [box, depth] = std::move(work.back());
            work.pop_back();
            if (std::any_of(param_rows.begin(), param_rows.end(),
                            [&](const Row* r) { return infeasible_row(*r, box); }))
                continue;
            if (depth >= 24) return false;
            VarId widest = box.begin()->first;
            for (const auto& [v, iv] : box)
                if (iv.hi - iv.lo > box[widest].hi - box[widest].lo) widest = v;
            const mpq_class mid = (box[widest].lo + box[widest].hi) / 2;
            auto left = box, right = box;
            left[widest].hi = mid;
            right[widest].lo = mid;
            work.emplace_back(std::move(left), depth + 1);
            work.emplace_back(std::move(right), depth + 1);
        }
        return true;
    }

    // Rough count of rational term operations; the refuter gives up beyond it.
    static constexpr std::size_t kMaxWork = 2'000'000;

    const ConstraintProgram& prog_;
    const std::vector<mpq_class>& lo_;
    const std::vector<mpq_class>& hi_;
    mutable std::size_t work_ = 0;
};

std::vector<double> map_back(const Presolver& ps, std::size_t n, const std::vector<double>& active_values,
                             const std::vector<VarId>& active) {
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (ps.state()[i] == VarState::Fixed) x[i] = ps.value()[i].get_d();
    for (std::size_t k = 0; k < active.size(); ++k) x[active[k]] = active_values[k];
    const auto& el = ps.eliminations();
    for (auto it = el.rbegin(); it != el.rend(); ++it) x[it->var] = it->expr.eval(x);
    return x;
}

std::vector<double> map_back_exact(const Presolver& ps, std::size_t n, const std::map<VarId, mpq_class>& vals) {
    std::vector<mpq_class> x(n);
    for (std::size_t i = 0; i < n; ++i)
        if (ps.state()[i] == VarState::Fixed) x[i] = ps.value()[i];
    for (const auto& [v, q] : vals) x[v] = q;
    const auto& el = ps.eliminations();
    for (auto it = el.rbegin(); it != el.rend(); ++it) {
        mpq_class s = 0;
        for (const auto& [m, c] : it->expr.t) {
            mpq_class t = c;
            for (VarId id : m) t *= x[id];
            s += t;
        }
        x[it->var] = s;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i].get_d();
    return out;
}

}  // namespace

std::optional<std::vector<double>> gauss_solve(const std::vector<std::vector<double>>& a,
                                               const std::vector<double>& b) {
    std::size_t n = a.empty() ? 0 : a[0].size();
    QMatrix m(a.size(), std::vector<mpq_class>(n + 1));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != n) throw std::invalid_argument("ragged matrix");
        for (std::size_t j = 0; j < n; ++j) m[i][j] = mpq_class(a[i][j]);
        m[i][n] = mpq_class(b.at(i));
    }
    auto piv = rref(m, n);
    if (!piv) return std::nullopt;
    std::vector<double> x(n, 0.0);
    for (std::size_t r = 0; r < piv->size(); ++r) x[(*piv)[r]] = m[r][n].get_d();
    return x;
}

SolveResult solve(const ConstraintProgram& p, const SolveOptions& opts) {
    SolveResult res;
    const std::size_t n = p.vars().size();
    mpq_class eps(opts.eps_strict);
    Presolver ps(p, eps);
    if (!ps.run()) {
        res.status = SolveStatus::Unsat;
        res.reason = "presolve: " + ps.reason;
        res.linear = true;
        return res;
    }
    std::vector<VarId> active;
    for (VarId v = 0; v < n; ++v)
        if (ps.state()[v] == VarState::Active) active.push_back(v);
    std::size_t deg = 0;
    for (const auto& r : ps.rows())
        if (r.alive) deg = std::max(deg, r.p.degree());

    auto finish = [&](std::vector<double> x) {
        auto rep = check(p, x, opts.eps_strict);
        res.values = std::move(x);
        res.residual = rep.max;
        return rep.max <= opts.tol;
    };

    if (deg <= 1) {
        res.linear = true;
        std::map<VarId, mpq_class> vals;
        std::string reason;
        if (solve_linear(ps.rows(), active, ps.lo(), ps.hi(), eps, opts.hint, vals, reason) ==
            LinearOutcome::Infeasible) {
            res.status = SolveStatus::Unsat;
            res.reason = reason;
            return res;
        }
        if (finish(map_back_exact(ps, n, vals))) {
            res.status = SolveStatus::Solution;
        } else {
            res.status = SolveStatus::Unknown;
            res.reason = "rounding of the exact solution exceeded the tolerance";
        }
        return res;
    }

    // Dense nonlinear system over the active variables.
    std::map<VarId, std::size_t> index;
    for (std::size_t k = 0; k < active.size(); ++k) index[active[k]] = k;
    std::vector<DRow> rows;
    for (const auto& r : ps.rows()) {
        if (!r.alive) continue;
        DRow d;
        d.kind = r.kind;
        for (const auto& [m, c] : r.p.t) {
            DTerm t{c.get_d(), {}};
            for (VarId v : m) t.idx.push_back(index.at(v));
            d.terms.push_back(std::move(t));
        }
        rows.push_back(std::move(d));
    }
    std::vector<double> lo(active.size()), hi(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
        lo[k] = ps.lo()[active[k]].get_d();
        hi[k] = ps.hi()[active[k]].get_d();
    }
    NonlinearSystem sys(std::move(rows), lo, hi, opts.eps_strict);
    std::vector<bool> outer(active.size(), false), none(active.size(), false), hinted(active.size(), false);
    for (std::size_t k = 0; k < active.size(); ++k) {
        outer[k] = p.var(active[k]).kind == VarInfo::Kind::Action;
        hinted[k] = opts.hint.count(active[k]) > 0;
    }
    const double target = opts.tol * 1e-3;
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        std::vector<double> y(active.size());
        if (r == 0) {
            for (std::size_t k = 0; k < active.size(); ++k) {
                auto h = opts.hint.find(active[k]);
                y[k] = h != opts.hint.end() ? h->second : 0.5 * (lo[k] + hi[k]);
            }
        } else {
            std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(r));
            for (std::size_t k = 0; k < active.size(); ++k)
                y[k] = std::uniform_real_distribution<double>(lo[k], hi[k])(rng);
        }
        sys.clamp(y);
        std::vector<bool> fixed = outer;
        if (r == 0)
            for (std::size_t k = 0; k < active.size(); ++k) fixed[k] = fixed[k] || hinted[k];
        sys.inner_solve(y, fixed);
        if (r == 0 && std::count(hinted.begin(), hinted.end(), true) > 0) {
            std::vector<double> yf = y;
            if (sys.minimize(yf, hinted, opts.max_iterations, target) <= opts.tol &&
                finish(map_back(ps, n, yf, active))) {
                res.status = SolveStatus::Solution;
                return res;
            }
        }
        if (sys.minimize(y, none, opts.max_iterations, target) <= opts.tol && finish(map_back(ps, n, y, active))) {
            res.status = SolveStatus::Solution;
            return res;
        }
    }
    // The search found nothing; try to prove that nothing exists.
    {
        std::vector<Row> live;
        for (const auto& r : ps.rows()) {
            if (!r.alive) continue;
            Row c = r;
            if (c.kind == RowKind::Gt) {
                c.kind = RowKind::Ge;
                c.p.t[Mono{}] -= eps;
                c.p.prune();
            }
            live.push_back(std::move(c));
        }
        if (Refuter(p, ps.lo(), ps.hi()).run(std::move(live))) {
            res.status = SolveStatus::Unsat;
            res.reason = "parametric elimination: constraints infeasible over the action box";
            return res;
        }
    }

    res.status = SolveStatus::Unknown;
    res.values.clear();
    res.reason = "nonlinear search exhausted " + std::to_string(std::max(1, opts.restarts)) + " restarts";
    return res;
}

}  // namespace pctl
