#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef BONDFLOW_TEST_CORPUS_DIR
#define BONDFLOW_TEST_CORPUS_DIR "corpus"
#endif

namespace bondflow::fixtures {

std::string corpus_path(std::string_view name) {
    return std::string(BONDFLOW_TEST_CORPUS_DIR) + "/" + std::string(name) + ".bg";
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

BondGraph lc_oscillator(double L, double C, double p0, double q0) {
    std::ostringstream s;
    s << "model lc\n"
      << "element I L { k = " << format_number(L) << ", init = " << format_number(p0) << " }\n"
      << "element C Cap { k = " << format_number(C) << ", init = " << format_number(q0) << " }\n"
      << "element 1 j\n"
      << "bond b1 j -> L\n"
      << "bond b2 j -> Cap\n";
    return load(s.str());
}

BondGraph rl_step(double E, double R, double L) {
    std::ostringstream s;
    s << "model rl\n"
      << "element SE src { value = " << format_number(E) << " }\n"
      << "element 1 j\n"
      << "element R res { k = " << format_number(R) << " }\n"
      << "element I ind { k = " << format_number(L) << " }\n"
      << "bond b1 src -> j\n"
      << "bond b2 j -> res\n"
      << "bond b3 j -> ind\n";
    return load(s.str());
}

BondGraph se_r_chain(double E, double R) {
    std::ostringstream s;
    s << "model ohm\n"
      << "element SE src { value = " << format_number(E) << " }\n"
      << "element 1 j\n"
      << "element R load { k = " << format_number(R) << " }\n"
      << "bond b1 src -> j\n"
      << "bond b2 j -> load\n";
    return load(s.str());
}

BondGraph se_i_r_chain() {
    return load(
        "model sir\n"
        "element SE src { value = 1 }\n"
        "element 1 j\n"
        "element I m { k = 2 }\n"
        "element R d { k = 3 }\n"
        "bond b1 src -> j\n"
        "bond b2 j -> m\n"
        "bond b3 j -> d\n");
}

BondGraph two_inertias() {
    return load(
        "model two_inertias\n"
        "element SE T { value = 1 }\n"
        "element 1 j\n"
        "element I J1 { k = 1 }\n"
        "element I J2 { k = 2 }\n"
        "bond b1 T -> j\n"
        "bond b2 j -> J1\n"
        "bond b3 j -> J2\n");
}

BondGraph r_ring() {
    return load(
        "model ring\n"
        "element 0 n\n"
        "element R r1 { k = 1 }\n"
        "element R r2 { k = 2 }\n"
        "element R r3 { k = 3 }\n"
        "bond b1 n -> r1\n"
        "bond b2 n -> r2\n"
        "bond b3 n -> r3\n");
}

BondGraph resistive_loop() {
    return load(
        "model loop\n"
        "element SE src { value = 1 }\n"
        "element 1 ja\n"
        "element R r1 { k = 1 }\n"
        "element 0 jb\n"
        "element R r2 { k = 2 }\n"
        "element R r3 { k = 3 }\n"
        "bond b1 src -> ja\n"
        "bond b2 ja -> r1\n"
        "bond b3 ja -> jb\n"
        "bond b4 jb -> r2\n"
        "bond b5 jb -> r3\n");
}

BondGraph integrator(double K) {
    std::ostringstream s;
    s << "model integ\n"
      << "element SE u { value = 1 }\n"
      << "element 1 j\n"
      << "element I m { k = " << format_number(K) << " }\n"
      << "bond b1 u -> j\n"
      << "bond b2 j -> m\n";
    return load(s.str());
}

BondGraph two_port_fixture(ElementKind kind, bool zero_side, const Eigen::MatrixXd& K, const Eigen::MatrixXd& storage) {
    const int n = static_cast<int>(K.rows());
    BondGraph g("two_port");
    std::vector<Expr> src;
    for (int i = 0; i < n; ++i) src.push_back(Expr::literal(1.0 + i));
    // The source kind is picked so the storage ends up in integral causality:
    // an effort source pushes effort through a TF and flow through a GY.
    const bool flow_source = (kind == ElementKind::Transformer) == zero_side;
    g.add(flow_source ? ElementKind::SourceFlow : ElementKind::SourceEffort, "src", Parameter::column(src));
    g.add(ElementKind::Junction1, "j1");
    g.add(kind, "x", Parameter::from(K));
    g.add(zero_side ? ElementKind::Junction0 : ElementKind::Junction1, "j2");
    g.add(zero_side ? ElementKind::StorageC : ElementKind::StorageI, "s", Parameter::from(storage));
    g.connect("b1", {"src", 0}, {"j1", 0}, n);
    g.connect("b2", {"j1", 0}, {"x", 1}, n);
    g.connect("b3", {"x", 2}, {"j2", 0}, n);
    g.connect("b4", {"j2", 0}, {"s", 0}, n);
    return g;
}

BondGraph filter_constant(double R_f, double L_F, double C_F, double m_ch, double i_out, double u_in) {
    std::ostringstream s;
    s << "model filter\n"
      << "element SE u_in { value = " << format_number(u_in) << " }\n"
      << "element 1 mesh\n"
      << "element R R_f { k = " << format_number(R_f) << " }\n"
      << "element I L_F { k = " << format_number(L_F) << " }\n"
      << "element 0 node\n"
      << "element C C_F { k = " << format_number(C_F) << " }\n"
      << "element TF chopper { k = " << format_number(m_ch) << " }\n"
      << "element 1 out\n"
      << "element SF load { value = " << format_number(i_out) << " }\n"
      << "bond b1 u_in -> mesh\n"
      << "bond b2 mesh -> R_f\n"
      << "bond b3 mesh -> L_F\n"
      << "bond b4 mesh -> node\n"
      << "bond b5 node -> C_F\n"
      << "bond b6 node -> chopper.2\n"
      << "bond b7 chopper.1 -> out\n"
      << "bond b8 out -> load\n"
      << "probe C_F effort\n";
    return load(s.str());
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int pick(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p = 0.5) {
    return std::bernoulli_distribution(p)(rng);
}

// Positive literal with a short, exactly representable-ish text.
double positive(std::mt19937_64& rng) {
    return std::round(uniform(rng, 0.1, 20.0) * 1000.0) / 1000.0;
}

}  // namespace

BondGraph random_graph(std::mt19937_64& rng, int index, bool well_posed) {
    BondGraph g("rand_" + std::to_string(index));
    std::vector<std::string> names;
    if (coin(rng)) {
        g.add_constant({"a", Expr::literal(positive(rng))});
        g.add_constant({"b", Expr::parse("a * 2 + 1")});
        names = {"a", "b"};
    }
    if (coin(rng)) {
        g.add_signal({"drive", SignalKind::Expression, {}, Expr::parse("1 + 0.5 * sin(3 * t)")});
        names.push_back("drive");
    }

    const int nj = pick(rng, 1, 4);
    std::vector<std::string> junctions;
    std::vector<int> degree(static_cast<std::size_t>(nj), 0);
    int bond_no = 0;
    auto next_bond = [&] { return "b" + std::to_string(++bond_no); };
    auto connect = [&](const PortRef& a, const PortRef& b) -> Bond& {
        Bond& bond = coin(rng) ? g.connect(next_bond(), a, b) : g.connect(next_bond(), b, a);
        const int s = well_posed ? 5 : pick(rng, 0, 5);
        if (s == 0) bond.stroke = StrokeEnd::AtHead;
        if (s == 1) bond.stroke = StrokeEnd::AtTail;
        if (coin(rng, 0.15)) bond.label = "bond " + bond.id;
        return bond;
    };

    for (int i = 0; i < nj; ++i) {
        const std::string id = "j" + std::to_string(i + 1);
        g.add(coin(rng) ? ElementKind::Junction0 : ElementKind::Junction1, id);
        junctions.push_back(id);
        if (i > 0) {
            const int other = pick(rng, 0, i - 1);
            connect({id, 0}, {junctions[static_cast<std::size_t>(other)], 0});
            ++degree[static_cast<std::size_t>(i)];
            ++degree[static_cast<std::size_t>(other)];
        }
    }

    int element_no = 0;
    const int ntwo = nj > 1 ? pick(rng, 0, 2) : 0;
    for (int i = 0; i < ntwo; ++i) {
        const int a = pick(rng, 0, nj - 1);
        int b = pick(rng, 0, nj - 2);
        if (b >= a) ++b;
        const std::string id = "tp" + std::to_string(++element_no);
        const bool gy = coin(rng);
        Element& el = g.add(gy ? ElementKind::Gyrator : ElementKind::Transformer, id,
                            Parameter::scalar(positive(rng)));
        if (!well_posed && coin(rng, 0.3)) el.causality = gy ? CausalityMode::Outer : CausalityMode::Right;
        connect({junctions[static_cast<std::size_t>(a)], 0}, {id, 1});
        connect({id, 2}, {junctions[static_cast<std::size_t>(b)], 0});
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(b)];
    }

    const ElementKind one_ports[] = {ElementKind::SourceEffort, ElementKind::SourceFlow, ElementKind::Resistor,
                                     ElementKind::StorageI, ElementKind::StorageC};
    std::vector<std::string> storages;
    bool have_source = false;
    for (int i = 0; i < nj; ++i) {
        const int extra = std::max(0, 2 - degree[static_cast<std::size_t>(i)]) + pick(rng, 0, 2);
        for (int k = 0; k < extra; ++k) {
            ElementKind kind = one_ports[pick(rng, 0, 4)];
            if (well_posed) {
                // One scalar source in total.
                if (is_source(kind) && have_source) kind = ElementKind::Resistor;
                have_source = have_source || is_source(kind);
            }
            const std::string id = std::string(to_symbol(kind)) + "_" + std::to_string(++element_no);
            Parameter p = Parameter::scalar(positive(rng));
            if (!names.empty() && coin(rng, 0.3)) {
                p = Parameter::scalar(Expr::parse(random_expression(rng, names, 2)));
            }
            if (coin(rng, 0.2)) p.unit = "SI";
            Element& el = g.add(kind, id, p);
            if (is_storage(kind)) {
                storages.push_back(id);
                if (coin(rng)) el.initial = Parameter::scalar(uniform(rng, -1.0, 1.0));
                if (!well_posed && coin(rng, 0.2)) el.causality = CausalityMode::Integral;
                if (coin(rng, 0.3)) el.outputs = {Quantity::Power};
                if (coin(rng, 0.2)) el.outputs.push_back(kind == ElementKind::StorageI ? Quantity::Momentum
                                                                                      : Quantity::Displacement);
            }
            if (!well_posed && kind == ElementKind::Resistor && coin(rng, 0.2)) el.causality = CausalityMode::Flow;
            if (coin(rng, 0.1)) el.label = "element " + id;
            connect({junctions[static_cast<std::size_t>(i)], 0}, {id, 0});
        }
    }

    // A separate vector component.
    if (coin(rng, 0.4)) {
        const int dim = pick(rng, 2, 3);
        std::vector<Expr> v;
        for (int i = 0; i < dim; ++i) v.push_back(Expr::literal(positive(rng)));
        g.add(ElementKind::SourceEffort, "vsrc", Parameter::column(v));
        g.add(ElementKind::Junction1, "vj");
        std::vector<Expr> m;
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) m.push_back(Expr::literal(r == c ? positive(rng) : 0.25));
        }
        g.add(ElementKind::StorageI, "vmass", Parameter::matrix(dim, dim, m));
        g.connect(next_bond(), {"vsrc", 0}, {"vj", 0}, dim);
        g.connect(next_bond(), {"vj", 0}, {"vmass", 0}, dim);
        storages.push_back("vmass");
    }

    for (const auto& b : g.bonds()) {
        if (g.bonds().size() > 12) break;
        if (b.dimension == 1 && coin(rng, 0.25)) g.add_probe({{b.id, 0}, Quantity::Flow});
    }
    if (!storages.empty() && coin(rng)) {
        const std::string& s = storages[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(storages.size()) - 1))];
        g.add_probe({{s, 0}, g.find_element(s)->kind == ElementKind::StorageI ? Quantity::Momentum
                                                                           : Quantity::Displacement});
    }
    if (coin(rng, 0.3)) {
        const Bond& b = g.bonds().front();
        g.add_signal({"sense", SignalKind::Flow, {b.id, 0}, Expr()});
    }
    return g;
}

std::string random_expression(std::mt19937_64& rng, const std::vector<std::string>& names, int depth) {
    auto leaf = [&]() -> std::string {
        if (!names.empty() && coin(rng, 0.6)) return names[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(names.size()) - 1))];
        return format_number(std::round(uniform(rng, 0.0, 10.0) * 100.0) / 100.0);
    };
    if (depth <= 0) return leaf();
    const std::string a = random_expression(rng, names, depth - 1);
    const std::string b = random_expression(rng, names, depth - 1);
    switch (pick(rng, 0, 13)) {
        case 0: return a + " + " + b;
        case 1: return a + " - " + b;
        case 2: return a + " * " + b;
        case 3: return "(" + a + ") / (1 + abs(" + b + "))";
        case 4: return "-" + a;
        case 5: return "sin(" + a + ")";
        case 6: return "cos(" + a + ")";
        case 7: return "exp(min(" + a + ", 5))";
        case 8: return "sqrt(abs(" + a + "))";
        case 9: return "max(" + a + ", " + b + ")";
        case 10: return "min(" + a + ", " + b + ")";
        case 11: return "pow(abs(" + a + ") + 0.5, 1.5)";
        case 12: return "(" + a + " - " + b + ") * " + leaf();
        default: return "+" + leaf();
    }
}

namespace {

class Reference {
public:
    Reference(std::string_view s, const std::map<std::string, double>& env) : s_(s), env_(env) {}

    double run() {
        const double v = expr();
        skip();
        if (i_ != s_.size()) throw std::runtime_error("trailing input");
        return v;
    }

private:
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool eat(char c) {
        skip();
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }
    double expr() {
        double v = term();
        for (;;) {
            if (eat('+')) v += term();
            else if (eat('-')) v -= term();
            else return v;
        }
    }
    double term() {
        double v = unary();
        for (;;) {
            if (eat('*')) v *= unary();
            else if (eat('/')) v /= unary();
            else return v;
        }
    }
    double unary() {
        if (eat('-')) return -unary();
        if (eat('+')) return unary();
        return primary();
    }
    double primary() {
        skip();
        if (eat('(')) {
            const double v = expr();
            if (!eat(')')) throw std::runtime_error("missing )");
            return v;
        }
        if (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.')) {
            std::size_t used = 0;
            const double v = std::stod(std::string(s_.substr(i_)), &used);
            i_ += used;
            return v;
        }
        std::string name;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) name += s_[i_++];
        if (name.empty()) throw std::runtime_error("unexpected character");
        if (eat('(')) {
            std::vector<double> args{expr()};
            while (eat(',')) args.push_back(expr());
            if (!eat(')')) throw std::runtime_error("missing )");
            if (name == "sin") return std::sin(args.at(0));
            if (name == "cos") return std::cos(args.at(0));
            if (name == "exp") return std::exp(args.at(0));
            if (name == "sqrt") return std::sqrt(args.at(0));
            if (name == "abs") return std::fabs(args.at(0));
            if (name == "min") return std::min(args.at(0), args.at(1));
            if (name == "max") return std::max(args.at(0), args.at(1));
            if (name == "pow") return std::pow(args.at(0), args.at(1));
            throw std::runtime_error("unknown function " + name);
        }
        return env_.at(name);
    }

    std::string_view s_;
    const std::map<std::string, double>& env_;
    std::size_t i_ = 0;
};

}  // namespace

double reference_eval(std::string_view text, const std::map<std::string, double>& env) {
    return Reference(text, env).run();
}

double rel_diff(double a, double b, double floor) {
    const double scale = std::max({std::fabs(a), std::fabs(b), floor});
    return std::fabs(a - b) / scale;
}

std::vector<double> junction_power_sums(const OdeSystem& sys, const Evaluation& ev, std::vector<double>* scale) {
    const BondGraph& g = sys.graph();
    std::vector<double> sums;
    if (scale) scale->clear();
    for (std::size_t e = 0; e < g.elements().size(); ++e) {
        const Element& el = g.elements()[e];
        if (!is_junction(el.kind)) continue;
        double sum = 0.0;
        double largest = 0.0;
        for (std::size_t b : g.bonds_at(e)) {
            const int off = sys.bond_offset(b);
            const int n = sys.bond_dimension(b);
            const double p = ev.efforts.segment(off, n).dot(ev.flows.segment(off, n));
            sum += g.bonds()[b].head.element == el.id ? p : -p;
            largest = std::max(largest, std::fabs(p));
        }
        sums.push_back(sum);
        if (scale) scale->push_back(largest);
    }
    return sums;
}

Eigen::VectorXd random_state(const OdeSystem& sys, std::mt19937_64& rng) {
    Eigen::VectorXd x(sys.state_dimension());
    for (const auto& s : sys.states()) {
        for (int k = 0; k < s.size; ++k) {
            x[s.offset + k] = s.auxiliary ? uniform(rng, 0.0, 1e-3) : uniform(rng, -1.0, 1.0);
        }
    }
    return x;
}

Eigen::VectorXd random_inputs(const OdeSystem& sys, std::mt19937_64& rng) {
    Eigen::VectorXd u(sys.input_dimension());
    for (int i = 0; i < u.size(); ++i) u[i] = uniform(rng, -10.0, 10.0);
    return u;
}

bool junction_rules_hold(const BondGraph& g, const CausalAssignment& a, std::string* failure) {
    for (std::size_t e = 0; e < g.elements().size(); ++e) {
        const Element& el = g.elements()[e];
        if (!is_junction(el.kind)) continue;
        int stroked = 0;
        int total = 0;
        for (std::size_t b : g.bonds_at(e)) {
            const Bond& bond = g.bonds()[b];
            const Element* other = g.find_element(bond.head.element == el.id ? bond.tail.element : bond.head.element);
            if (other && is_activated(other->kind)) continue;
            ++total;
            if (a.strokes()[b] == end_of(bond, el.id)) ++stroked;
        }
        const bool ok = el.kind == ElementKind::Junction0 ? stroked == 1 : stroked == total - 1;
        if (!ok) {
            if (failure) *failure = el.id;
            return false;
        }
    }
    return true;
}

Eigen::VectorXd bond_effort(const OdeSystem& sys, const Evaluation& ev, std::string_view bond) {
    const std::size_t b = sys.graph().bond_index(bond).value();
    return ev.efforts.segment(sys.bond_offset(b), sys.bond_dimension(b));
}

Eigen::VectorXd bond_flow(const OdeSystem& sys, const Evaluation& ev, std::string_view bond) {
    const std::size_t b = sys.graph().bond_index(bond).value();
    return ev.flows.segment(sys.bond_offset(b), sys.bond_dimension(b));
}

BondGraph with_effort_tap(BondGraph g, std::string_view junction) {
    const std::string id = "tap_" + std::string(junction);
    g.add(ElementKind::ActivatedBondEffort, id);
    g.connect("tap_bond_" + std::string(junction), {std::string(junction), 0}, {id, 0});
    return g;
}

}  // namespace bondflow::fixtures
