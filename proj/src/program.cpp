// Polynomials, the constraint store, residual checks and the text formats.

#include "pctl/program.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pctl {

// ── VarInfo ─────────────────────────────────────────────────────────────────

VarInfo VarInfo::formula(std::uint32_t node, Pair p, std::uint64_t set_hash) {
    VarInfo v;
    v.kind = Kind::Formula;
    v.node = node;
    v.pair = p;
    v.set_hash = set_hash;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(set_hash));
    v.name = "x_" + std::to_string(node) + "_" + std::to_string(p.mode) + "_" +
             std::to_string(p.state) + "__" + hex;
    return v;
}

VarInfo VarInfo::action_var(Pair p, ActionId a) {
    VarInfo v;
    v.kind = Kind::Action;
    v.pair = p;
    v.action = a;
    v.name = "a_" + std::to_string(p.mode) + "_" + std::to_string(p.state) + "_" + std::to_string(a);
    return v;
}

VarInfo VarInfo::free(std::string name) {
    VarInfo v;
    v.name = std::move(name);
    return v;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::optional<std::uint64_t> to_uint(const std::string& s, int base = 10) {
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

VarInfo VarInfo::from_name(const std::string& name) {
    auto parts = split(name, '_');
    if (parts.size() == 6 && parts[0] == "x" && parts[4].empty() && parts[5].size() == 16) {
        auto node = to_uint(parts[1]), m = to_uint(parts[2]), s = to_uint(parts[3]);
        auto h = to_uint(parts[5], 16);
        if (node && m && s && h) {
            VarInfo v = formula(static_cast<std::uint32_t>(*node),
                                Pair{static_cast<ModeId>(*m), static_cast<StateId>(*s)}, *h);
            if (v.name == name) return v;
        }
    }
    if (parts.size() == 4 && parts[0] == "a") {
        auto m = to_uint(parts[1]), s = to_uint(parts[2]), a = to_uint(parts[3]);
        if (m && s && a) {
            VarInfo v = action_var(Pair{static_cast<ModeId>(*m), static_cast<StateId>(*s)},
                                   static_cast<ActionId>(*a));
            if (v.name == name) return v;
        }
    }
    return free(name);
}

// ── Polynomial ──────────────────────────────────────────────────────────────

Polynomial::Polynomial(double c) {
    if (c != 0.0) terms_.push_back(Term{c, {}});
}

Polynomial Polynomial::var(VarId v, double coef) { return monomial(coef, {v}); }

Polynomial Polynomial::monomial(double coef, std::vector<VarId> vars) {
    Polynomial p;
    std::sort(vars.begin(), vars.end());
    p.terms_.push_back(Term{coef, std::move(vars)});
    p.normalize();
    return p;
}

void Polynomial::normalize() {
    std::stable_sort(terms_.begin(), terms_.end(),
                     [](const Term& a, const Term& b) { return a.vars < b.vars; });
    std::vector<Term> out;
    for (auto& t : terms_) {
        if (!out.empty() && out.back().vars == t.vars)
            out.back().coef += t.coef;
        else
            out.push_back(std::move(t));
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    terms_ = std::move(out);
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    normalize();
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) { return *this += o.scaled(-1.0); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial r;
    for (const auto& a : terms_) {
        for (const auto& b : o.terms_) {
            Term t{a.coef * b.coef, a.vars};
            t.vars.insert(t.vars.end(), b.vars.begin(), b.vars.end());
            std::sort(t.vars.begin(), t.vars.end());
            r.terms_.push_back(std::move(t));
        }
    }
    r.normalize();
    return r;
}

Polynomial Polynomial::scaled(double k) const {
    Polynomial r = *this;
    for (auto& t : r.terms_) t.coef *= k;
    r.normalize();
    return r;
}

std::size_t Polynomial::degree() const {
    std::size_t d = 0;
    for (const auto& t : terms_) d = std::max(d, t.vars.size());
    return d;
}

double Polynomial::constant() const {
    for (const auto& t : terms_)
        if (t.vars.empty()) return t.coef;
    return 0.0;
}

double Polynomial::eval(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& t : terms_) {
        double v = t.coef;
        for (VarId id : t.vars) v *= x.at(id);
        s += v;
    }
    return s;
}

std::set<VarId> Polynomial::variables() const {
    std::set<VarId> out;
    for (const auto& t : terms_) out.insert(t.vars.begin(), t.vars.end());
    return out;
}

const char* to_string(Rel r) {
    switch (r) {
        case Rel::Eq: return "=";
        case Rel::Lt: return "<";
        case Rel::Le: return "<=";
        case Rel::Gt: return ">";
        case Rel::Ge: return ">=";
    }
    return "?";
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Solution: return "solution";
        case SolveStatus::Unsat: return "unsat";
        case SolveStatus::Unknown: return "unknown";
    }
    return "?";
}

// ── Text rendering ──────────────────────────────────────────────────────────

std::string format_number(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite coefficient");
    char buf[512];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    std::string s(buf, p);
    if (s.find('.') == std::string::npos) s += ".0";
    return s;
}

namespace {

std::string human_poly(const Polynomial& p, const ConstraintProgram& prog) {
    if (p.terms().empty()) return "0.0";
    std::string out;
    bool first = true;
    for (const auto& t : p.terms()) {
        double c = t.coef;
        bool neg = c < 0;
        double a = neg ? -c : c;
        if (first)
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        first = false;
        std::string body;
        if (t.vars.empty() || a != 1.0) body = format_number(a);
        for (VarId v : t.vars) {
            if (!body.empty()) body += "*";
            body += prog.var(v).name;
        }
        out += body;
    }
    return out;
}

std::string smt_number(double c) {
    return c < 0 ? "(- " + format_number(-c) + ")" : format_number(c);
}

std::string smt_term(const Term& t, const ConstraintProgram& prog) {
    if (t.vars.empty()) return smt_number(t.coef);
    if (t.coef == 1.0 && t.vars.size() == 1) return prog.var(t.vars[0]).name;
    std::string s = "(*";
    if (t.coef != 1.0) s += " " + smt_number(t.coef);
    for (VarId v : t.vars) s += " " + prog.var(v).name;
    return s + ")";
}

std::string smt_poly(const Polynomial& p, const ConstraintProgram& prog) {
    if (p.terms().empty()) return "0.0";
    if (p.terms().size() == 1) return smt_term(p.terms()[0], prog);
    std::string s = "(+";
    for (const auto& t : p.terms()) s += " " + smt_term(t, prog);
    return s + ")";
}

std::string human_constraint(const Constraint& c, const ConstraintProgram& prog) {
    return human_poly(c.lhs, prog) + " " + to_string(c.rel) + " " + human_poly(c.rhs, prog);
}

// Dedup key: variables by id, coefficients in round-trip form.
std::string constraint_key(const Constraint& c) {
    std::string k;
    auto poly = [&](const Polynomial& p) {
        for (const auto& t : p.terms()) {
            k += format_number(t.coef);
            for (VarId v : t.vars) k += "*" + std::to_string(v);
            k += ";";
        }
    };
    poly(c.lhs);
    k += to_string(c.rel);
    poly(c.rhs);
    return k;
}

}  // namespace

// ── ConstraintProgram ───────────────────────────────────────────────────────

VarId ConstraintProgram::add_var(const VarInfo& info) {
    auto it = by_name_.find(info.name);
    if (it != by_name_.end()) return it->second;
    auto id = static_cast<VarId>(vars_.size());
    vars_.push_back(info);
    by_name_.emplace(info.name, id);
    return id;
}

std::optional<VarId> ConstraintProgram::find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

bool ConstraintProgram::add(Constraint c) {
    for (VarId v : c.lhs.variables())
        if (v >= vars_.size()) throw std::out_of_range("constraint references unknown variable");
    for (VarId v : c.rhs.variables())
        if (v >= vars_.size()) throw std::out_of_range("constraint references unknown variable");
    if (!keys_.insert(constraint_key(c)).second) return false;
    constraints_.push_back(std::move(c));
    return true;
}

void ConstraintProgram::merge(const ConstraintProgram& other) {
    std::vector<VarId> remap(other.vars_.size());
    for (std::size_t i = 0; i < other.vars_.size(); ++i) remap[i] = add_var(other.vars_[i]);
    auto map_poly = [&](const Polynomial& p) {
        Polynomial r;
        for (const auto& t : p.terms()) {
            std::vector<VarId> vs;
            for (VarId v : t.vars) vs.push_back(remap[v]);
            r += Polynomial::monomial(t.coef, vs);
        }
        return r;
    };
    for (const auto& c : other.constraints_) add(Constraint{map_poly(c.lhs), c.rel, map_poly(c.rhs)});
}

std::size_t ConstraintProgram::max_degree() const {
    std::size_t d = 0;
    for (const auto& c : constraints_) d = std::max(d, c.degree());
    return d;
}

bool ConstraintProgram::names_equal(const ConstraintProgram& a, const ConstraintProgram& b) {
    if (a.vars_.size() != b.vars_.size()) return false;
    for (std::size_t i = 0; i < a.vars_.size(); ++i)
        if (a.vars_[i].name != b.vars_[i].name) return false;
    return true;
}

// ── check ───────────────────────────────────────────────────────────────────

ResidualReport check(const ConstraintProgram& p, const std::vector<double>& x, double eps_strict) {
    if (x.size() != p.vars().size()) throw std::invalid_argument("assignment size mismatch");
    ResidualReport r;
    for (double v : x) r.bound_violation = std::max({r.bound_violation, -v, v - 1.0});
    r.max = r.bound_violation;
    for (const auto& c : p.constraints()) {
        double d = c.lhs.eval(x) - c.rhs.eval(x);
        double viol = 0.0;
        switch (c.rel) {
            case Rel::Eq: viol = std::abs(d); break;
            case Rel::Ge: viol = std::max(0.0, -d); break;
            case Rel::Le: viol = std::max(0.0, d); break;
            case Rel::Gt: viol = std::max(0.0, eps_strict - d); break;
            case Rel::Lt: viol = std::max(0.0, eps_strict + d); break;
        }
        r.violations.push_back(viol);
        r.max = std::max(r.max, viol);
    }
    return r;
}

// ── Export ──────────────────────────────────────────────────────────────────

std::string export_program(const ConstraintProgram& p, ExportFormat fmt) {
    std::ostringstream os;
    const std::string counts = std::to_string(p.vars().size()) + " variables, " +
                               std::to_string(p.constraints().size()) + " constraints";
    if (fmt == ExportFormat::SmtLib) {
        os << "; pctl constraint program: " << counts << "\n";
        os << "(set-logic QF_NRA)\n";
        for (const auto& v : p.vars())
            os << "(declare-const " << v.name << " Real) (assert (<= 0.0 " << v.name << " 1.0))\n";
        for (const auto& c : p.constraints()) {
            std::string op = c.rel == Rel::Eq ? "=" : to_string(c.rel);
            os << "(assert (" << op << " " << smt_poly(c.lhs, p) << " " << smt_poly(c.rhs, p) << "))\n";
        }
    } else {
        os << "# pctl constraint program: " << counts << "\n";
        for (const auto& v : p.vars()) os << "var " << v.name << "\n";
        for (const auto& c : p.constraints()) os << human_constraint(c, p) << "\n";
    }
    return os.str();
}

// ── Import ──────────────────────────────────────────────────────────────────

namespace {

[[noreturn]] void import_error(std::size_t line, const std::string& msg) {
    throw std::runtime_error("program import, line " + std::to_string(line) + ": " + msg);
}

double parse_number(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) import_error(line, "bad number '" + s + "'");
    return v;
}

bool is_number_start(char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; }

VarId lookup(const ConstraintProgram& prog, const std::string& name, std::size_t line) {
    auto v = prog.find(name);
    if (!v) import_error(line, "undeclared variable '" + name + "'");
    return *v;
}

// S-expressions for the SMT-LIB subset we emit.
struct SExpr {
    std::string atom;
    std::vector<SExpr> list;
    bool is_list = false;
};

class SExprReader {
public:
    SExprReader(const std::string& s, std::size_t line) : s_(s), line_(line) {}

    std::vector<SExpr> all() {
        std::vector<SExpr> out;
        for (skip(); i_ < s_.size(); skip()) out.push_back(read());
        return out;
    }

private:
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }

    SExpr read() {
        skip();
        if (i_ >= s_.size()) import_error(line_, "unexpected end of line");
        SExpr e;
        if (s_[i_] == '(') {
            ++i_;
            e.is_list = true;
            for (skip(); i_ < s_.size() && s_[i_] != ')'; skip()) e.list.push_back(read());
            if (i_ >= s_.size()) import_error(line_, "unbalanced parentheses");
            ++i_;
            return e;
        }
        if (s_[i_] == ')') import_error(line_, "unexpected ')'");
        std::size_t st = i_;
        while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != '(' &&
               s_[i_] != ')')
            ++i_;
        e.atom = s_.substr(st, i_ - st);
        return e;
    }

    const std::string& s_;
    std::size_t line_;
    std::size_t i_ = 0;
};

Polynomial smt_to_poly(const SExpr& e, const ConstraintProgram& prog, std::size_t line) {
    if (!e.is_list) {
        if (is_number_start(e.atom[0])) return Polynomial(parse_number(e.atom, line));
        return Polynomial::var(lookup(prog, e.atom, line));
    }
    if (e.list.empty() || e.list[0].is_list) import_error(line, "malformed term");
    const std::string& op = e.list[0].atom;
    std::vector<Polynomial> args;
    for (std::size_t k = 1; k < e.list.size(); ++k) args.push_back(smt_to_poly(e.list[k], prog, line));
    if (args.empty()) import_error(line, "operator without arguments");
    if (op == "+") {
        Polynomial r;
        for (auto& a : args) r += a;
        return r;
    }
    if (op == "*") {
        Polynomial r = args[0];
        for (std::size_t k = 1; k < args.size(); ++k) r = r * args[k];
        return r;
    }
    if (op == "-") {
        if (args.size() == 1) return args[0].scaled(-1.0);
        Polynomial r = args[0];
        for (std::size_t k = 1; k < args.size(); ++k) r -= args[k];
        return r;
    }
    import_error(line, "unsupported operator '" + op + "'");
}

std::optional<Rel> rel_from(const std::string& s) {
    if (s == "=") return Rel::Eq;
    if (s == "<") return Rel::Lt;
    if (s == "<=") return Rel::Le;
    if (s == ">") return Rel::Gt;
    if (s == ">=") return Rel::Ge;
    return std::nullopt;
}

void import_smt_line(const std::string& text, std::size_t line, ConstraintProgram& prog) {
    auto exprs = SExprReader(text, line).all();
    for (std::size_t k = 0; k < exprs.size(); ++k) {
        const SExpr& e = exprs[k];
        if (!e.is_list || e.list.empty() || e.list[0].is_list) import_error(line, "expected command");
        const std::string& cmd = e.list[0].atom;
        if (cmd == "set-logic" || cmd == "check-sat") continue;
        if (cmd == "declare-const") {
            if (e.list.size() != 3 || e.list[1].is_list) import_error(line, "malformed declare-const");
            prog.add_var(VarInfo::from_name(e.list[1].atom));
            // The bound assertion that follows on the same line is implicit.
            if (k + 1 < exprs.size()) ++k;
            continue;
        }
        if (cmd != "assert" || e.list.size() != 2 || !e.list[1].is_list || e.list[1].list.size() != 3)
            import_error(line, "expected binary assertion");
        const SExpr& body = e.list[1];
        auto rel = body.list[0].is_list ? std::nullopt : rel_from(body.list[0].atom);
        if (!rel) import_error(line, "unknown relation");
        prog.add(smt_to_poly(body.list[1], prog, line), *rel, smt_to_poly(body.list[2], prog, line));
    }
}

// Human format: sums of '*'-joined factors separated by ' + ' / ' - '.
Polynomial human_to_poly(const std::string& s, const ConstraintProgram& prog, std::size_t line) {
    std::istringstream is(s);
    std::vector<std::string> toks;
    for (std::string t; is >> t;) toks.push_back(t);
    if (toks.empty()) import_error(line, "empty side");
    Polynomial r;
    double sign = 1.0;
    bool expect_term = true;
    for (auto tok : toks) {
        if (!expect_term) {
            if (tok == "+") sign = 1.0;
            else if (tok == "-") sign = -1.0;
            else import_error(line, "expected '+' or '-'");
            expect_term = true;
            continue;
        }
        if (tok[0] == '-') {
            sign = -sign;
            tok = tok.substr(1);
        }
        double coef = sign;
        std::vector<VarId> vars;
        for (const auto& f : split(tok, '*')) {
            if (f.empty()) import_error(line, "empty factor");
            if (is_number_start(f[0])) coef *= parse_number(f, line);
            else vars.push_back(lookup(prog, f, line));
        }
        r += Polynomial::monomial(coef, vars);
        sign = 1.0;
        expect_term = false;
    }
    if (expect_term) import_error(line, "dangling operator");
    return r;
}

void import_human_line(const std::string& text, std::size_t line, ConstraintProgram& prog) {
    if (text.rfind("var ", 0) == 0) {
        std::string name = text.substr(4);
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
        if (name.empty()) import_error(line, "missing variable name");
        prog.add_var(VarInfo::from_name(name));
        return;
    }
    static const char* const ops[] = {" <= ", " >= ", " = ", " < ", " > "};
    for (const char* op : ops) {
        auto pos = text.find(op);
        if (pos == std::string::npos) continue;
        std::string sym(op + 1);
        sym.pop_back();
        prog.add(human_to_poly(text.substr(0, pos), prog, line), *rel_from(sym),
                 human_to_poly(text.substr(pos + std::string(op).size()), prog, line));
        return;
    }
    import_error(line, "no relation found");
}

}  // namespace

ConstraintProgram import_program(const std::string& text, ExportFormat fmt) {
    ConstraintProgram prog;
    std::istringstream is(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(is, line);) {
        ++line_no;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        char c = line[first];
        if (fmt == ExportFormat::SmtLib) {
            if (c == ';') continue;
            import_smt_line(line, line_no, prog);
        } else {
            if (c == '#') continue;
            import_human_line(line.substr(first), line_no, prog);
        }
    }
    return prog;
}

}  // namespace pctl
