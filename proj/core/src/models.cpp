#include "bondflow/models.hpp"

namespace bondflow {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid parameter: ") + what);
}

Parameter k(double v) { return Parameter::scalar(v); }
Parameter k(const std::string& expr) { return Parameter::scalar(Expr::parse(expr)); }

}  // namespace

void LiftParams::check() const {
    require(J_M > 0, "J_M must be positive");
    require(rigid ? J_D >= 0 : J_D > 0, "J_D must be positive");
    require(rigid ? m_L >= 0 : m_L > 0, "m_L must be positive");
    require(K_FM > 0 && K_FG > 0, "friction coefficients must be positive");
    require(rigid || (K_DS > 0 && K_SS > 0 && K_DR > 0 && K_SR > 0), "shaft and rope parameters must be positive");
    require(i_G > 0 && r_DR > 0, "gear ratio and drum radius must be positive");
    require(F_g >= 0, "F_g must be non-negative");
}

void SolenoidParams::check() const {
    require(n > 0 && R > 0 && m > 0 && K_fric > 0, "n, R, m and K_fric must be positive");
    require(A > 0 && l_m > 0 && mu_0 > 0 && mu_r > 0, "magnetic parameters must be positive");
    require(x_0 > 0, "x_0 must be positive");
    require(F_g >= 0, "F_g must be non-negative");
}

void FilterChopperParams::check() const {
    require(C_F > 0 && L_F > 0 && R_f > 0, "C_F, L_F and R_f must be positive");
}

BondGraph lift_a_load(const LiftParams& p) {
    p.check();
    BondGraph g(p.rigid ? "lift_a_load_rigid" : "lift_a_load");
    int next = 0;
    auto bond = [&](PortRef tail, PortRef head) { g.connect("b" + std::to_string(++next), tail, head); };

    g.add(ElementKind::SourceEffort, "T_M", k(p.T_M)).parameter->unit = "N m";
    g.add(ElementKind::Junction1, "j_motor");
    g.add(ElementKind::StorageI, "J_M", k(p.J_M)).parameter->unit = "kg m^2";
    g.add(ElementKind::Resistor, "K_FM", k(p.K_FM));
    bond({"T_M"}, {"j_motor"});
    bond({"j_motor"}, {"J_M"});
    bond({"j_motor"}, {"K_FM"});

    // Elastic coupling: 0-junction splits off the relative speed, which a
    // 1-junction shares between spring and damper.
    auto coupling = [&](const std::string& from, const std::string& to, const std::string& tag, double compliance,
                        double damping) {
        const std::string node = "n_" + tag;
        const std::string rel = "j_" + tag + "_rel";
        g.add(ElementKind::Junction0, node);
        g.add(ElementKind::Junction1, rel);
        g.add(ElementKind::StorageC, tag == "shaft" ? "K_SS" : "K_SR", k(compliance));
        g.add(ElementKind::Resistor, tag == "shaft" ? "K_DS" : "K_DR", k(damping));
        g.add(ElementKind::Junction1, to);
        bond({from}, {node});
        bond({node}, {rel});
        bond({rel}, {tag == "shaft" ? "K_SS" : "K_SR"});
        bond({rel}, {tag == "shaft" ? "K_DS" : "K_DR"});
        bond({node}, {to});
    };

    std::string motor_side = "j_motor";
    if (!p.rigid) {
        coupling("j_motor", "j_gear", "shaft", p.K_SS, p.K_DS);
        motor_side = "j_gear";
    }
    g.add(ElementKind::Transformer, "gear", k(1.0 / p.i_G));
    bond({motor_side}, {"gear", 1});
    g.add(ElementKind::Junction1, "j_drum");
    bond({"gear", 2}, {"j_drum"});
    if (!p.rigid || p.J_D > 0) {
        g.add(ElementKind::StorageI, "J_D", k(p.J_D)).parameter->unit = "kg m^2";
        bond({"j_drum"}, {"J_D"});
    }
    g.add(ElementKind::Resistor, "K_FG", k(p.K_FG));
    bond({"j_drum"}, {"K_FG"});
    g.add(ElementKind::Transformer, "drum", k(p.r_DR));
    bond({"j_drum"}, {"drum", 1});

    std::string load_side = "j_load";
    if (!p.rigid) {
        g.add(ElementKind::Junction1, "j_rope");
        bond({"drum", 2}, {"j_rope"});
        coupling("j_rope", "j_load", "rope", p.K_SR, p.K_DR);
    } else {
        g.add(ElementKind::Junction1, "j_load");
        bond({"drum", 2}, {"j_load"});
    }
    if (!p.rigid || p.m_L > 0) {
        g.add(ElementKind::StorageI, "m_L", k(p.m_L)).parameter->unit = "kg";
        bond({load_side}, {"m_L"});
    }
    g.add(ElementKind::SourceEffort, "F_g", k(p.F_g)).parameter->unit = "N";
    bond({load_side}, {"F_g"});
    if (g.find_element("m_L")) g.add_probe({{"m_L"}, Quantity::Momentum});
    return g;
}

BondGraph solenoid(const SolenoidParams& p) {
    p.check();
    BondGraph g("solenoid");
    g.add_constant({"n", Expr::literal(p.n)});
    g.add_constant({"mu_0", Expr::literal(p.mu_0)});
    g.add_constant({"mu_r", Expr::literal(p.mu_r)});
    g.add_constant({"A", Expr::literal(p.A)});
    g.add_constant({"l_m", Expr::literal(p.l_m)});
    g.add_constant({"x_0", Expr::literal(p.x_0)});
    // Position from the armature's displacement output, current measured on
    // the coil bond.
    g.add_signal({"s", SignalKind::Displacement, {"armature"}, {}});
    g.add_signal({"x", SignalKind::Expression, {}, Expr::parse("x_0 + s")});
    g.add_signal({"i", SignalKind::Flow, {"b3"}, {}});

    g.add(ElementKind::SourceEffort, "u", k(p.u)).parameter->unit = "V";
    g.add(ElementKind::Junction1, "j_coil");
    g.add(ElementKind::Resistor, "R", k(p.R)).parameter->unit = "ohm";
    g.add(ElementKind::Gyrator, "turns", k("n"));
    g.add(ElementKind::Junction0, "n_flux");
    // Stacked state q = [flux, gap]; efforts = [magnetomotive force, force
    // needed to open the gap]. Reluctance R(x) = (x + l_m/mu_r) / (mu_0 A).
    Element& field = g.add(ElementKind::StorageCField, "coil",
                           Parameter::matrix(2, 2,
                                             {Expr::parse("(x + l_m / mu_r) / (mu_0 * A)"), Expr::literal(0.0),
                                              Expr::parse("n * i / (2 * (x + l_m / mu_r))"), Expr::literal(0.0)}));
    field.initial = Parameter::column({Expr::literal(0.0), Expr::parse("x_0")});
    g.add(ElementKind::Junction1, "j_arm");
    g.add(ElementKind::StorageI, "armature", k(p.m)).parameter->unit = "kg";
    g.add(ElementKind::Resistor, "K_fric", k(p.K_fric));
    g.add(ElementKind::SourceEffort, "F_g", k(p.F_g)).parameter->unit = "N";

    g.connect("b1", {"u"}, {"j_coil"});
    g.connect("b2", {"j_coil"}, {"R"});
    g.connect("b3", {"j_coil"}, {"turns", 1});
    g.connect("b4", {"turns", 2}, {"n_flux"});
    g.connect("b5", {"n_flux"}, {"coil", 1});
    g.connect("b6", {"j_arm"}, {"coil", 2});
    g.connect("b7", {"j_arm"}, {"armature"});
    g.connect("b8", {"j_arm"}, {"K_fric"});
    g.connect("b9", {"F_g"}, {"j_arm"});
    g.add_probe({{"b3"}, Quantity::Flow});
    g.add_probe({{"coil", 2}, Quantity::Displacement});
    return g;
}

BondGraph filter_chopper(const FilterChopperParams& p) {
    p.check();
    BondGraph g("filter_chopper");
    g.add_signal({"m_ch", SignalKind::Expression, {}, p.m_ch});
    g.add_signal({"i_out", SignalKind::Expression, {}, p.i_out});
    g.add(ElementKind::SourceEffort, "u_in", k(p.u_in)).parameter->unit = "V";
    g.add(ElementKind::Junction1, "mesh");
    g.add(ElementKind::Resistor, "R_f", k(p.R_f)).parameter->unit = "ohm";
    g.add(ElementKind::StorageI, "L_F", k(p.L_F)).parameter->unit = "H";
    g.add(ElementKind::Junction0, "node");
    g.add(ElementKind::StorageC, "C_F", k(p.C_F)).parameter->unit = "F";
    // Ideal mean-value chopper: port 2 faces the filter, port 1 the load, so
    // u_out = m_ch u_C and i_ch = m_ch i_out without inverting m_ch.
    g.add(ElementKind::Transformer, "chopper", Parameter::scalar(Expr::parse("m_ch")));
    g.add(ElementKind::Junction1, "out");
    g.add(ElementKind::SourceFlow, "load", Parameter::scalar(Expr::parse("i_out"))).parameter->unit = "A";

    g.connect("b1", {"u_in"}, {"mesh"});
    g.connect("b2", {"mesh"}, {"R_f"});
    g.connect("b3", {"mesh"}, {"L_F"});
    g.connect("b4", {"mesh"}, {"node"});
    g.connect("b5", {"node"}, {"C_F"});
    g.connect("b6", {"node"}, {"chopper", 2});
    g.connect("b7", {"chopper", 1}, {"out"});
    g.connect("b8", {"out"}, {"load"});
    g.add_probe({{"C_F"}, Quantity::Effort});
    g.add_probe({{"load"}, Quantity::Power});
    return g;
}

const std::vector<CorpusModel>& corpus() {
    static const std::vector<CorpusModel> models = {
        {"lift_a_load", "hoist: torque source, elastic shaft, gear, drum, elastic rope, load",
         [] { return lift_a_load(); }},
        {"solenoid", "solenoid actuator with a modulated capacitive field", [] { return solenoid(); }},
        {"filter_chopper", "LC input filter feeding a mean-value chopper", [] { return filter_chopper(); }},
    };
    return models;
}

std::optional<BondGraph> corpus_model(std::string_view name) {
    for (const auto& m : corpus()) {
        if (m.name == name) return m.build();
    }
    return std::nullopt;
}

}  // namespace bondflow
