#include "bondflow/graph.hpp"

#include <algorithm>
#include <array>

namespace bondflow {

namespace {

struct KindInfo {
    ElementKind kind;
    std::string_view symbol;
};

constexpr std::array<KindInfo, kElementKindCount> kKinds{{
    {ElementKind::SourceEffort, "SE"},
    {ElementKind::SourceFlow, "SF"},
    {ElementKind::Resistor, "R"},
    {ElementKind::StorageI, "I"},
    {ElementKind::StorageC, "C"},
    {ElementKind::Transformer, "TF"},
    {ElementKind::Gyrator, "GY"},
    {ElementKind::Junction0, "0"},
    {ElementKind::Junction1, "1"},
    {ElementKind::ResistorField, "RF"},
    {ElementKind::StorageCField, "CF"},
    {ElementKind::StorageIField, "IF"},
    {ElementKind::ActivatedBondEffort, "ABe"},
    {ElementKind::ActivatedBondFlow, "ABf"},
}};

}  // namespace

std::string_view to_symbol(ElementKind kind) {
    return kKinds[static_cast<std::size_t>(kind)].symbol;
}

std::optional<ElementKind> kind_from_symbol(std::string_view symbol) {
    for (const auto& k : kKinds) {
        if (k.symbol == symbol) return k.kind;
    }
    if (symbol == "DF") return ElementKind::SourceEffort;
    if (symbol == "DE") return ElementKind::SourceFlow;
    if (symbol.size() > 1 && symbol.front() == 'M') {
        const auto base = kind_from_symbol(symbol.substr(1));
        if (base && (is_source(*base) || *base == ElementKind::Resistor || is_two_port(*base) ||
                     is_field(*base))) {
            return base;
        }
    }
    return std::nullopt;
}

int port_count(ElementKind kind) {
    if (is_junction(kind)) return 0;
    if (is_two_port(kind) || is_field(kind)) return 2;
    return 1;
}

bool is_junction(ElementKind k) { return k == ElementKind::Junction0 || k == ElementKind::Junction1; }
bool is_source(ElementKind k) { return k == ElementKind::SourceEffort || k == ElementKind::SourceFlow; }
bool is_storage(ElementKind k) {
    return k == ElementKind::StorageI || k == ElementKind::StorageC || k == ElementKind::StorageIField ||
           k == ElementKind::StorageCField;
}
bool is_field(ElementKind k) {
    return k == ElementKind::ResistorField || k == ElementKind::StorageCField || k == ElementKind::StorageIField;
}
bool is_two_port(ElementKind k) { return k == ElementKind::Transformer || k == ElementKind::Gyrator; }
bool is_activated(ElementKind k) {
    return k == ElementKind::ActivatedBondEffort || k == ElementKind::ActivatedBondFlow;
}
bool is_one_port(ElementKind k) { return port_count(k) == 1; }

std::string_view to_string(Quantity q) {
    switch (q) {
        case Quantity::Effort: return "effort";
        case Quantity::Flow: return "flow";
        case Quantity::Power: return "power";
        case Quantity::Momentum: return "momentum";
        case Quantity::Displacement: return "displacement";
    }
    return "?";
}

std::optional<Quantity> quantity_from_string(std::string_view s) {
    for (auto q : {Quantity::Effort, Quantity::Flow, Quantity::Power, Quantity::Momentum, Quantity::Displacement}) {
        if (to_string(q) == s) return q;
    }
    return std::nullopt;
}

std::string_view to_string(CausalityMode mode) {
    switch (mode) {
        case CausalityMode::Auto: return "auto";
        case CausalityMode::Effort: return "effort";
        case CausalityMode::Flow: return "flow";
        case CausalityMode::Integral: return "integral";
        case CausalityMode::Differential: return "differential";
        case CausalityMode::Left: return "left";
        case CausalityMode::Right: return "right";
        case CausalityMode::Outer: return "outer";
        case CausalityMode::Inner: return "inner";
    }
    return "?";
}

std::optional<CausalityMode> causality_mode_from_string(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(CausalityMode::Inner); ++i) {
        const auto m = static_cast<CausalityMode>(i);
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

bool causality_mode_allowed(ElementKind kind, CausalityMode mode) {
    switch (mode) {
        case CausalityMode::Auto: return true;
        case CausalityMode::Effort:
        case CausalityMode::Flow: return kind == ElementKind::Resistor;
        case CausalityMode::Integral:
        case CausalityMode::Differential: return kind == ElementKind::StorageI || kind == ElementKind::StorageC;
        case CausalityMode::Left:
        case CausalityMode::Right: return kind == ElementKind::Transformer;
        case CausalityMode::Outer:
        case CausalityMode::Inner: return kind == ElementKind::Gyrator;
    }
    return false;
}

Parameter Parameter::scalar(double value) { return scalar(Expr::literal(value)); }

Parameter Parameter::scalar(Expr value) {
    Parameter p;
    p.entries.push_back(std::move(value));
    return p;
}

Parameter Parameter::column(std::vector<Expr> values) {
    Parameter p;
    p.rows = static_cast<int>(values.size());
    p.cols = 1;
    p.entries = std::move(values);
    return p;
}

Parameter Parameter::matrix(int rows, int cols, std::vector<Expr> row_major) {
    if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != row_major.size()) {
        throw Error("matrix parameter: entry count does not match shape");
    }
    Parameter p;
    p.rows = rows;
    p.cols = cols;
    p.entries = std::move(row_major);
    return p;
}

Parameter Parameter::from(const Eigen::MatrixXd& value) {
    std::vector<Expr> entries;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) entries.push_back(Expr::literal(value(r, c)));
    }
    return matrix(static_cast<int>(value.rows()), static_cast<int>(value.cols()), std::move(entries));
}

std::string Probe::name() const {
    std::string s = target.element;
    if (target.port != 0) s += "." + std::to_string(target.port);
    s += ".";
    s += to_string(quantity);
    return s;
}

std::string to_string(const Diagnostic& d) {
    std::string s = d.severity == Severity::Error ? "error" : "warning";
    s += " [" + d.rule + "]";
    if (!d.subject.empty()) s += " " + d.subject;
    s += ": " + d.message;
    return s;
}

bool has_errors(std::span<const Diagnostic> diagnostics) {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

BondGraph::BondGraph(std::string name) : name_(std::move(name)) {}

Element& BondGraph::add_element(Element element) {
    element_lookup_.try_emplace(element.id, elements_.size());
    elements_.push_back(std::move(element));
    return elements_.back();
}

Bond& BondGraph::add_bond(Bond bond) {
    bond_lookup_.try_emplace(bond.id, bonds_.size());
    bonds_.push_back(std::move(bond));
    return bonds_.back();
}

void BondGraph::add_signal(Signal signal) { signals_.push_back(std::move(signal)); }
void BondGraph::add_constant(Constant constant) { constants_.push_back(std::move(constant)); }
void BondGraph::add_probe(Probe probe) { probes_.push_back(std::move(probe)); }

Element& BondGraph::add(ElementKind kind, std::string id) {
    Element e;
    e.id = std::move(id);
    e.kind = kind;
    return add_element(std::move(e));
}

Element& BondGraph::add(ElementKind kind, std::string id, Parameter parameter) {
    Element& e = add(kind, std::move(id));
    e.parameter = std::move(parameter);
    return e;
}

Bond& BondGraph::connect(std::string id, PortRef tail, PortRef head, int dimension) {
    Bond b;
    b.id = std::move(id);
    b.tail = std::move(tail);
    b.head = std::move(head);
    b.dimension = dimension;
    return add_bond(std::move(b));
}

std::optional<std::size_t> BondGraph::element_index(std::string_view id) const {
    const auto it = element_lookup_.find(std::string(id));
    if (it == element_lookup_.end() || it->second >= elements_.size() || elements_[it->second].id != id) {
        // ids may have been edited through mutable_elements()
        for (std::size_t i = 0; i < elements_.size(); ++i) {
            if (elements_[i].id == id) return i;
        }
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> BondGraph::bond_index(std::string_view id) const {
    const auto it = bond_lookup_.find(std::string(id));
    if (it == bond_lookup_.end() || it->second >= bonds_.size() || bonds_[it->second].id != id) {
        for (std::size_t i = 0; i < bonds_.size(); ++i) {
            if (bonds_[i].id == id) return i;
        }
        return std::nullopt;
    }
    return it->second;
}

const Element* BondGraph::find_element(std::string_view id) const {
    const auto i = element_index(id);
    return i ? &elements_[*i] : nullptr;
}

const Bond* BondGraph::find_bond(std::string_view id) const {
    const auto i = bond_index(id);
    return i ? &bonds_[*i] : nullptr;
}

const Signal* BondGraph::find_signal(std::string_view name) const {
    for (const auto& s : signals_) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

const Constant* BondGraph::find_constant(std::string_view name) const {
    for (const auto& c : constants_) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::vector<std::size_t> BondGraph::bonds_at(std::size_t element) const {
    std::vector<std::size_t> out;
    const std::string& id = elements_[element].id;
    for (std::size_t i = 0; i < bonds_.size(); ++i) {
        if (bonds_[i].tail.element == id || bonds_[i].head.element == id) out.push_back(i);
    }
    return out;
}

std::optional<std::size_t> BondGraph::bond_at_port(std::size_t element, int port) const {
    const std::string& id = elements_[element].id;
    const bool one_port = is_one_port(elements_[element].kind);
    auto matches = [&](const PortRef& ref) {
        if (ref.element != id) return false;
        if (one_port) return port <= 1 && ref.port <= 1;
        return ref.port == port;
    };
    for (std::size_t i = 0; i < bonds_.size(); ++i) {
        if (matches(bonds_[i].tail) || matches(bonds_[i].head)) return i;
    }
    return std::nullopt;
}

bool BondGraph::is_modulated(const Expr& expr) const {
    return std::any_of(expr.names().begin(), expr.names().end(),
                       [&](const std::string& n) { return n == "t" || find_signal(n) != nullptr; });
}

bool BondGraph::is_modulated(const Parameter& parameter) const {
    return std::any_of(parameter.entries.begin(), parameter.entries.end(),
                       [&](const Expr& e) { return is_modulated(e); });
}

std::map<std::string, double, std::less<>> BondGraph::constant_values() const {
    std::map<std::string, double, std::less<>> values;
    for (const auto& c : constants_) {
        std::vector<double> args;
        for (const auto& n : c.value.names()) {
            const auto it = values.find(n);
            if (it == values.end()) {
                throw Error("param '" + c.name + "' references '" + n + "', which is not an earlier param");
            }
            args.push_back(it->second);
        }
        values[c.name] = c.value.evaluate(args);
    }
    return values;
}

Eigen::MatrixXd BondGraph::constant_value(const Parameter& parameter) const {
    const auto constants = constant_values();
    Eigen::MatrixXd m(parameter.rows, parameter.cols);
    for (int r = 0; r < parameter.rows; ++r) {
        for (int c = 0; c < parameter.cols; ++c) {
            const Expr& e = parameter.at(r, c);
            std::vector<double> args;
            for (const auto& n : e.names()) {
                const auto it = constants.find(n);
                if (it == constants.end()) throw Error("parameter entry '" + e.text() + "' is not constant");
                args.push_back(it->second);
            }
            m(r, c) = e.evaluate(args);
        }
    }
    return m;
}

double bond_power(std::span<const double> effort, std::span<const double> flow) {
    if (effort.size() != flow.size()) {
        throw Error("bond_power: effort has dimension " + std::to_string(effort.size()) + ", flow has " +
                    std::to_string(flow.size()));
    }
    double p = 0.0;
    for (std::size_t i = 0; i < effort.size(); ++i) p += effort[i] * flow[i];
    return p;
}

}  // namespace bondflow
