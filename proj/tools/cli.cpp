#include "cli.hpp"

#include "bondflow/causality.hpp"
#include "bondflow/dsl.hpp"
#include "bondflow/lti.hpp"
#include "bondflow/models.hpp"
#include "bondflow/ode.hpp"
#include "bondflow/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace bondflow::cli {

namespace {

struct UsageError {
    std::string message;
};

struct Options {
    std::string input;
    std::string output;
    double dt = 1e-3;
    double t_end = 1.0;
    int record_every = 1;
    std::vector<std::string> sets;
    int input_index = 0;
    int output_index = 0;
    bool plain = false;
    std::string model;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError{"cannot open '" + path + "'"};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to -o when given, else to `out`.
void write_output(const Options& opt, std::ostream& out, const std::string& text) {
    if (opt.output.empty()) {
        out << text;
        return;
    }
    std::ofstream file(opt.output, std::ios::binary);
    if (!file) throw UsageError{"cannot write '" + opt.output + "'"};
    file << text;
    if (!file) throw UsageError{"cannot write '" + opt.output + "'"};
}

// Parses and prints syntax errors and validation diagnostics. Returns the
// graph only when it has no errors.
std::optional<BondGraph> load_graph(const Options& opt, std::ostream& err) {
    ParseResult r = parse(read_file(opt.input));
    for (const auto& e : r.errors) err << opt.input << ":" << e.text() << "\n";
    for (const auto& d : r.diagnostics) err << opt.input << ": " << to_string(d) << "\n";
    if (!r.ok()) return std::nullopt;
    return std::move(*r.graph);
}

std::map<std::string, double> parse_sets(const std::vector<std::string>& sets) {
    std::map<std::string, double> out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError{"--set expects name=value, got '" + s + "'"};
        const std::string name = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size() || value.empty()) throw UsageError{"--set " + name + ": '" + value + "' is not a number"};
        out[name] = v;
    }
    return out;
}

void bind_sets(const OdeSystem& sys, const std::vector<std::string>& sets, SimConfig& cfg) {
    for (const auto& [name, value] : parse_sets(sets)) {
        const bool known = std::any_of(sys.inputs().begin(), sys.inputs().end(),
                                       [&](const InputSlot& s) { return s.source == name; });
        if (!known) throw UsageError{"--set: '" + name + "' is not an external source of the model"};
        cfg.inputs[name] = [value](double) { return value; };
    }
}

void print_causal(const CausalAssignment& a, std::ostream& out) {
    for (const auto& d : a.diagnostics()) {
        out << to_string(d.issue) << " " << d.location << ": " << d.message << "\n";
    }
}

int cmd_check(const Options& opt, std::ostream& out, std::ostream& err) {
    const auto g = load_graph(opt, err);
    if (!g) return kExitDiagnostics;
    const CausalAssignment a = assign(*g);
    print_causal(a, out);
    int states = 0;
    for (const auto& [id, cls] : a.storage_class()) {
        if (cls != StorageClass::Integral) continue;
        const auto idx = *g->element_index(id);
        for (auto b : g->bonds_at(idx)) states += g->bonds()[b].dimension;
    }
    const auto differential = a.count(StorageClass::Differential);
    int code = a.has_conflicts() || differential > 0 ? kExitDiagnostics : kExitOk;
    if (code == kExitOk) {
        try {
            derive(*g, a);
        } catch (const CompileError& e) {
            err << "error: " << e.what() << "\n";
            code = kExitDiagnostics;
        }
    }
    out << "states: " << states << ", differential: " << differential << "\n";
    return code;
}

std::optional<OdeSystem> compile_graph(const Options& opt, std::ostream& err) {
    const auto g = load_graph(opt, err);
    if (!g) return std::nullopt;
    try {
        return compile(*g);
    } catch (const CompileError& e) {
        err << "error: " << e.what() << "\n";
        return std::nullopt;
    }
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
    const auto sys = compile_graph(opt, err);
    if (!sys) return kExitDiagnostics;
    SimConfig cfg;
    cfg.dt = opt.dt;
    cfg.t_end = opt.t_end;
    cfg.record_every = opt.record_every;
    bind_sets(*sys, opt.sets, cfg);
    Trajectory tr;
    try {
        tr = simulate(*sys, cfg);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDiagnostics;
    }
    std::ostringstream csv;
    write_csv(csv, tr);
    write_output(opt, out, csv.str());
    const EnergyBalance b = energy_report(tr);
    std::ostream& summary = opt.output.empty() ? err : out;
    summary << "E_supplied: " << format_fixed17(b.supplied) << "\n"
            << "E_stored_delta: " << format_fixed17(b.stored_delta) << "\n"
            << "E_dissipated: " << format_fixed17(b.dissipated) << "\n"
            << "residual: " << format_fixed17(b.residual) << "\n";
    return kExitOk;
}

int cmd_linearize(const Options& opt, std::ostream& out, std::ostream& err) {
    const auto sys = compile_graph(opt, err);
    if (!sys) return kExitDiagnostics;
    std::vector<Probe> outputs;
    for (const auto& p : sys->graph().probes()) {
        if (p.quantity != Quantity::Power) outputs.push_back(p);
    }
    OperatingPoint op;
    if (!opt.sets.empty()) {
        SimConfig cfg;
        bind_sets(*sys, opt.sets, cfg);
        Eigen::VectorXd u = sys->default_inputs(0.0);
        for (const auto& slot : sys->inputs()) {
            const auto it = cfg.inputs.find(slot.source);
            if (it != cfg.inputs.end()) u.segment(slot.offset, slot.size).setConstant(it->second(0.0));
        }
        op.u = u;
    }
    StateSpace ss;
    try {
        ss = extract(*sys, outputs, op);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDiagnostics;
    }
    std::ostringstream text;
    write_state_space(text, ss);
    if (ss.B.cols() > 0 && ss.C.rows() > 0) {
        if (opt.input_index < 0 || opt.input_index >= ss.B.cols()) {
            throw UsageError{"--input out of range (model has " + std::to_string(ss.B.cols()) + " inputs)"};
        }
        if (opt.output_index < 0 || opt.output_index >= ss.C.rows()) {
            throw UsageError{"--output out of range (model has " + std::to_string(ss.C.rows()) + " outputs)"};
        }
        const TransferFunction tf = transfer_function(ss, opt.input_index, opt.output_index);
        text << "# transfer function " << ss.input_labels[static_cast<std::size_t>(opt.input_index)] << " -> "
             << ss.output_labels[static_cast<std::size_t>(opt.output_index)] << "\n";
        text << "num";
        for (double c : tf.numerator) text << ' ' << format_fixed17(c);
        text << "\nden";
        for (double c : tf.denominator) text << ' ' << format_fixed17(c);
        text << "\n";
    }
    write_output(opt, out, text.str());
    return kExitOk;
}

int cmd_render(const Options& opt, std::ostream& out, std::ostream& err) {
    const auto g = load_graph(opt, err);
    if (!g) return kExitDiagnostics;
    std::optional<CausalAssignment> a;
    if (!opt.plain) a = assign(*g);
    write_output(opt, out, emit_dot(*g, a ? &*a : nullptr));
    return kExitOk;
}

int cmd_models(const Options& opt, std::ostream& out) {
    if (opt.model.empty()) {
        for (const auto& m : corpus()) out << m.name << "\t" << m.description << "\n";
        return kExitOk;
    }
    const auto g = corpus_model(opt.model);
    if (!g) throw UsageError{"unknown model '" + opt.model + "'"};
    write_output(opt, out, emit(*g));
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"bondflow: bond-graph modeling, simulation and linearization", "bondflow"};
    app.require_subcommand(1);
    Options opt;

    auto positive = CLI::PositiveNumber;
    auto* check = app.add_subcommand("check", "validate a model and assign causality");
    check->add_option("file", opt.input, "model file (.bg)")->required();

    auto* sim = app.add_subcommand("simulate", "integrate a model and write a CSV trajectory");
    sim->add_option("file", opt.input, "model file (.bg)")->required();
    sim->add_option("--dt", opt.dt, "step size [s]")->check(positive);
    sim->add_option("--t-end", opt.t_end, "end time [s]")->check(positive);
    sim->add_option("--record-every", opt.record_every, "record every n-th step")->check(CLI::PositiveNumber);
    sim->add_option("-o", opt.output, "CSV output path (default: stdout)");
    sim->add_option("--set", opt.sets, "override an external source: name=value");

    auto* lin = app.add_subcommand("linearize", "write the state-space model and a transfer function");
    lin->add_option("file", opt.input, "model file (.bg)")->required();
    lin->add_option("--input", opt.input_index, "input index for the transfer function")->check(CLI::NonNegativeNumber);
    lin->add_option("--output", opt.output_index, "output index for the transfer function")
        ->check(CLI::NonNegativeNumber);
    lin->add_option("--set", opt.sets, "operating-point value of an external source: name=value");
    lin->add_option("-o", opt.output, "output path (default: stdout)");

    auto* render = app.add_subcommand("render", "write a DOT rendering");
    render->add_option("file", opt.input, "model file (.bg)")->required();
    render->add_flag("--no-causality", opt.plain, "omit causal stroke markers");
    render->add_option("-o", opt.output, "output path (default: stdout)");

    auto* models = app.add_subcommand("models", "list corpus models or write one as .bg text");
    models->add_option("name", opt.model, "model to write");
    models->add_option("-o", opt.output, "output path (default: stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        std::string usage = "run 'bondflow --help' for usage";
        err << usage << "\n";
        return kExitUsage;
    }

    try {
        if (check->parsed()) return cmd_check(opt, out, err);
        if (sim->parsed()) return cmd_simulate(opt, out, err);
        if (lin->parsed()) return cmd_linearize(opt, out, err);
        if (render->parsed()) return cmd_render(opt, out, err);
        if (models->parsed()) return cmd_models(opt, out);
    } catch (const UsageError& e) {
        err << "error: " << e.message << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDiagnostics;
    }
    return kExitUsage;
}

}  // namespace bondflow::cli
