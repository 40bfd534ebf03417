// pctlsynth: command-line front end: synth, verify, export, trace.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pctl/analysis.hpp"
#include "pctl/formula.hpp"
#include "pctl/model.hpp"
#include "pctl/oracle.hpp"
#include "pctl/program.hpp"
#include "pctl/synth.hpp"
#include "pctl/tableau.hpp"

namespace {

using namespace pctl;

constexpr int kExitOk = 0;
constexpr int kExitFalse = 1;
constexpr int kExitInput = 2;
constexpr int kExitUnsat = 10;
constexpr int kExitUnknown = 11;
constexpr int kExitBudget = 12;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string model;
    std::string formula;
    std::string script;
    bool deterministic = false;
    bool guided = false;
    std::string emit_dot;
    std::string export_path;
    bool verbose = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

// "@file" reads the formula from a file.
Formula load_formula(const std::string& arg) {
    const std::string text = !arg.empty() && arg[0] == '@' ? read_file(arg.substr(1)) : arg;
    return parse(text);
}

ExportFormat format_for(const std::string& path) {
    const bool smt = path.size() >= 5 && path.substr(path.size() - 5) == ".smt2";
    return smt ? ExportFormat::SmtLib : ExportFormat::Human;
}

std::string trail_string(const std::vector<ChoiceRecord>& trail, const Mdp& mdp) {
    std::string s;
    for (const auto& r : trail) s += (r.taken == Side::Left ? "L" : "R");
    std::string out = s.empty() ? "(no decisions)" : s;
    for (const auto& r : trail) out += "\n    " + std::string(r.taken == Side::Left ? "L " : "R ") + r.key.str(mdp);
    return out;
}

int run_synth(const Common& c, const SynthOptions& opts, const std::string& output) {
    const Model model = load_model(c.model);
    const Formula phi = load_formula(c.formula);
    const SynthesisResult res = synthesize(model.mdp, model.skeleton, phi, opts);

    std::cerr << "alternatives: " << res.log.size() << "\n";
    if (c.verbose)
        for (std::size_t i = 0; i < res.log.size(); ++i) {
            const auto& e = res.log[i];
            std::string s;
            for (const auto& r : e.trail) s += (r.taken == Side::Left ? "L" : "R");
            std::cerr << "  #" << i << " " << (s.empty() ? "-" : s) << " nodes=" << e.nodes << " "
                      << (e.status ? to_string(*e.status) : "pruned (conflict)") << "\n";
        }
    if (res.forest) {
        std::cerr << "nodes: " << res.forest->nodes().size() << ", trees: " << res.forest->trees().size() << "\n";
        std::cerr << "trail: " << trail_string(res.forest->trail(), model.mdp) << "\n";
    }
    if (!c.export_path.empty() && !res.program.constraints().empty())
        write_file(c.export_path, export_program(res.program, format_for(c.export_path)));
    if (!c.emit_dot.empty() && res.forest) write_file(c.emit_dot, to_dot(*res.forest, &res.reports));

    if (!res.success) {
        std::cerr << "result: Failure(" << to_string(res.reason) << "): " << res.message << "\n";
        switch (res.reason) {
            case FailureReason::AllChoicesUnsat: return kExitUnsat;
            case FailureReason::Unknown: return kExitUnknown;
            case FailureReason::Budget: return kExitBudget;
        }
    }
    std::cerr << "result: Success (residual " << res.solution.residual << ")\n";
    write_file(output, policy_to_json(res.policy, model.mdp).dump(2) + "\n");
    if (res.verified) {
        std::cerr << "verification: " << (*res.verified ? "holds" : "VIOLATED") << "\n";
        if (!*res.verified) return kExitFalse;
    }
    return kExitOk;
}

int run_verify(const std::string& model_path, const std::string& policy_path, const std::string& formula,
               const oracle::Options& oo) {
    const Model model = load_model(model_path);
    const Policy policy = load_policy(policy_path, model.mdp, model.skeleton);
    const Formula phi = load_formula(formula);
    const MarkovChain chain = induced_chain(model.mdp, policy);
    if (phi.is(Kind::Prob)) {
        const auto v = oracle::path_probability(chain, chain.initial(), phi.sub(), oo);
        std::cout << "probability: " << v.probability;
        if (v.method == oracle::Method::MonteCarlo) std::cout << " +- " << v.ci << " (monte carlo)";
        else std::cout << " (exact)";
        std::cout << "\n";
    }
    const bool holds = oracle::check_state_formula(chain, chain.initial(), phi, oo);
    std::cout << "verdict: " << (holds ? "holds" : "violated") << "\n";
    return holds ? kExitOk : kExitFalse;
}

std::shared_ptr<Forest> scripted_forest(const Common& c, Model& model) {
    model = load_model(c.model);
    const Formula phi = load_formula(c.formula);
    SynthOptions opts;
    opts.deterministic = c.deterministic;
    opts.guided = c.guided;
    return build_alternative(model.mdp, model.skeleton, phi, parse_script(c.script), opts);
}

int run_export(const Common& c, const std::string& output) {
    Model model;
    auto forest = scripted_forest(c, model);
    write_file(output, export_program(gamma(*forest), format_for(output)));
    std::cerr << "trail: " << trail_string(forest->trail(), model.mdp) << "\n";
    if (forest->conflict()) std::cerr << "note: this alternative contains an inconsistent Prescribed constraint\n";
    return kExitOk;
}

int run_trace(const Common& c, const std::string& output) {
    Model model;
    auto forest = scripted_forest(c, model);
    const auto reports = analyse(*forest);
    write_file(output, to_dot(*forest, &reports));
    if (!c.export_path.empty()) write_file(c.export_path, export_program(gamma(*forest), format_for(c.export_path)));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Policy synthesis for MDPs under PCTL* specifications"};
    app.require_subcommand(1);

    Common common;
    SynthOptions sopts;
    oracle::Options oopts;
    std::string output = "-";
    std::string policy_path;
    std::uint64_t seed = 1;

    auto add_model = [&](CLI::App* sub) {
        sub->add_option("--model", common.model, "model JSON file")->required();
        sub->add_option("--formula", common.formula, "PCTL* state formula, or @file")->required();
    };
    auto add_samples = [&](CLI::App* sub) {
        sub->add_option("--samples", oopts.samples, "Monte Carlo samples for the oracle");
        sub->add_option("--horizon", oopts.horizon, "Monte Carlo path horizon (0 = automatic)");
    };

    auto* synth = app.add_subcommand("synth", "synthesize a policy");
    add_model(synth);
    synth->add_flag("--deterministic", sopts.deterministic, "restrict to deterministic policies");
    synth->add_option("--seed", seed, "random seed for the solver and the oracle");
    synth->add_option("--tol", sopts.solve.tol, "solver tolerance");
    synth->add_option("--eps-strict", sopts.solve.eps_strict, "margin for strict inequalities");
    synth->add_option("--restarts", sopts.solve.restarts, "nonlinear solver restarts");
    synth->add_option("--max-alternatives", sopts.max_alternatives, "bound on Choose alternatives");
    synth->add_flag("--verify", sopts.verify, "verify the policy with the oracle");
    synth->add_flag("--guided", sopts.guided, "order P decisions by an oracle estimate");
    synth->add_option("--export-program", common.export_path, "write Γ_final (.smt2 selects SMT-LIB)");
    synth->add_option("--emit-dot", common.emit_dot, "write the tableau forest as DOT");
    synth->add_flag("-v,--verbose", common.verbose, "list every explored alternative");
    synth->add_option("-o,--output", output, "policy JSON destination (default stdout)");
    add_samples(synth);

    auto* verify = app.add_subcommand("verify", "check a policy with the oracle");
    verify->add_option("--model", common.model, "model JSON file")->required();
    verify->add_option("--policy", policy_path, "policy JSON file")->required();
    verify->add_option("--formula", common.formula, "PCTL* state formula, or @file")->required();
    verify->add_option("--seed", seed, "Monte Carlo seed");
    add_samples(verify);

    auto* exp = app.add_subcommand("export", "export the constraint program of one Choose alternative");
    add_model(exp);
    exp->add_option("--script", common.script, "decisions as a string of L/R");
    exp->add_flag("--deterministic", common.deterministic, "restrict to deterministic policies");
    exp->add_flag("--guided", common.guided, "order P decisions by an oracle estimate");
    exp->add_option("-o,--output,--export-program", output, "destination (.smt2 selects SMT-LIB)");

    auto* trace = app.add_subcommand("trace", "emit the tableau forest of one Choose alternative as DOT");
    add_model(trace);
    trace->add_option("--script", common.script, "decisions as a string of L/R");
    trace->add_flag("--deterministic", common.deterministic, "restrict to deterministic policies");
    trace->add_flag("--guided", common.guided, "order P decisions by an oracle estimate");
    trace->add_option("-o,--output,--emit-dot", output, "DOT destination");
    trace->add_option("--export-program", common.export_path, "also write Γ_final");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    sopts.solve.seed = seed;
    oopts.seed = seed;
    sopts.oracle = oopts;
    try {
        if (*synth) return run_synth(common, sopts, output);
        if (*verify) return run_verify(common.model, policy_path, common.formula, oopts);
        if (*exp) return run_export(common, output);
        if (*trace) return run_trace(common, output);
    } catch (const ParseError& e) {
        std::cerr << "formula " << e.what() << "\n";
        return kExitInput;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget: " << e.what() << "\n";
        return kExitBudget;
    }
    return kExitInput;
}
