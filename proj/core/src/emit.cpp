#include "bondflow/dsl.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace bondflow {

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string parameter_text(const Parameter& p) {
    if (p.is_scalar()) return p.entries.front().text();
    std::string s = "[";
    if (p.is_column()) {
        for (int r = 0; r < p.rows; ++r) s += (r ? ", " : "") + p.at(r, 0).text();
        return s + "]";
    }
    for (int r = 0; r < p.rows; ++r) {
        s += r ? ", [" : "[";
        for (int c = 0; c < p.cols; ++c) s += (c ? ", " : "") + p.at(r, c).text();
        s += "]";
    }
    return s + "]";
}

std::string port_text(const PortRef& ref) {
    return ref.port == 0 ? ref.element : ref.element + "." + std::to_string(ref.port);
}

std::string kind_text(const BondGraph& g, const Element& el) {
    std::string sym(to_symbol(el.kind));
    const bool can_modulate = is_source(el.kind) || el.kind == ElementKind::Resistor || is_two_port(el.kind) ||
                              is_field(el.kind);
    if (can_modulate && el.parameter && g.is_modulated(*el.parameter)) return "M" + sym;
    return sym;
}

}  // namespace

std::string emit(const BondGraph& g) {
    std::ostringstream out;
    out << "model " << g.name() << "\n";
    if (!g.constants().empty()) out << "\n";
    for (const auto& c : g.constants()) out << "param " << c.name << " = " << c.value.text() << "\n";
    if (!g.signals().empty()) out << "\n";
    for (const auto& s : g.signals()) {
        out << "signal " << s.name << " = ";
        switch (s.kind) {
            case SignalKind::Effort: out << "effort(" << port_text(s.target) << ")"; break;
            case SignalKind::Flow: out << "flow(" << port_text(s.target) << ")"; break;
            case SignalKind::Momentum: out << "momentum(" << port_text(s.target) << ")"; break;
            case SignalKind::Displacement: out << "displacement(" << port_text(s.target) << ")"; break;
            case SignalKind::Expression: out << s.expression.text(); break;
        }
        out << "\n";
    }
    if (!g.elements().empty()) out << "\n";
    for (const auto& el : g.elements()) {
        out << "element " << kind_text(g, el) << " " << el.id;
        std::vector<std::string> attrs;
        if (el.parameter) {
            attrs.push_back(std::string(is_source(el.kind) ? "value" : "k") + " = " + parameter_text(*el.parameter));
            if (!el.parameter->unit.empty()) attrs.push_back("unit = " + quote(el.parameter->unit));
        }
        if (el.initial) attrs.push_back("init = " + parameter_text(*el.initial));
        if (el.causality != CausalityMode::Auto) attrs.push_back("causality = " + std::string(to_string(el.causality)));
        if (!el.outputs.empty()) {
            std::string s = "out = [";
            for (std::size_t i = 0; i < el.outputs.size(); ++i) s += (i ? ", " : "") + std::string(to_string(el.outputs[i]));
            attrs.push_back(s + "]");
        }
        if (!el.label.empty()) attrs.push_back("label = " + quote(el.label));
        if (!attrs.empty()) {
            out << " { ";
            for (std::size_t i = 0; i < attrs.size(); ++i) out << (i ? ", " : "") << attrs[i];
            out << " }";
        }
        out << "\n";
    }
    if (!g.bonds().empty()) out << "\n";
    for (const auto& b : g.bonds()) {
        out << "bond " << b.id << " " << port_text(b.tail) << " -> " << port_text(b.head);
        if (b.dimension != 1) out << " dim " << b.dimension;
        if (b.stroke == StrokeEnd::AtHead) out << " causal head";
        if (b.stroke == StrokeEnd::AtTail) out << " causal tail";
        if (!b.label.empty()) out << " { label = " << quote(b.label) << " }";
        out << "\n";
    }
    if (!g.probes().empty()) out << "\n";
    for (const auto& p : g.probes()) out << "probe " << port_text(p.target) << " " << to_string(p.quantity) << "\n";
    return out.str();
}

std::string emit_dot(const BondGraph& g, const CausalAssignment* assignment) {
    auto id = [](const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') out.push_back('\\');
            out.push_back(c);
        }
        return out + "\"";
    };
    std::ostringstream out;
    out << "digraph " << id(g.name()) << " {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=plaintext];\n";
    for (const auto& el : g.elements()) {
        const std::string label =
            is_junction(el.kind) ? std::string(to_symbol(el.kind)) : std::string(to_symbol(el.kind)) + ":" + el.id;
        out << "  " << id(el.id) << " [label=" << id(label) << "];\n";
    }
    for (std::size_t i = 0; i < g.bonds().size(); ++i) {
        const Bond& b = g.bonds()[i];
        std::string label = b.id;
        if (b.dimension != 1) label += "[" + std::to_string(b.dimension) + "]";
        if (assignment && i < assignment->strokes().size()) {
            const StrokeEnd s = assignment->strokes()[i];
            if (s == StrokeEnd::AtHead) label += "|H";
            if (s == StrokeEnd::AtTail) label += "|T";
        }
        out << "  " << id(b.tail.element) << " -> " << id(b.head.element) << " [label=" << id(label)
            << ", arrowhead=lnormal];\n";
    }
    out << "}\n";
    return out.str();
}

namespace {

template <typename T, typename Key>
bool compare_keyed(const std::vector<T>& a, const std::vector<T>& b, Key key, const char* what,
                   std::string* difference) {
    if (a.size() != b.size()) {
        if (difference) *difference = std::string(what) + " count differs";
        return false;
    }
    std::map<std::string, const T*> index;
    for (const auto& x : a) index[key(x)] = &x;
    for (const auto& y : b) {
        const auto it = index.find(key(y));
        if (it == index.end()) {
            if (difference) *difference = std::string(what) + " '" + key(y) + "' missing";
            return false;
        }
        if (!(*it->second == y)) {
            if (difference) *difference = std::string(what) + " '" + key(y) + "' differs";
            return false;
        }
    }
    return true;
}

}  // namespace

bool equivalent(const BondGraph& a, const BondGraph& b, std::string* difference) {
    if (a.name() != b.name()) {
        if (difference) *difference = "model name differs";
        return false;
    }
    if (!compare_keyed(a.elements(), b.elements(), [](const Element& e) { return e.id; }, "element", difference)) {
        return false;
    }
    if (!compare_keyed(a.bonds(), b.bonds(), [](const Bond& x) { return x.id; }, "bond", difference)) return false;
    if (!compare_keyed(a.signals(), b.signals(), [](const Signal& s) { return s.name; }, "signal", difference)) {
        return false;
    }
    if (a.constants() != b.constants()) {
        if (difference) *difference = "params differ";
        return false;
    }
    auto probes_a = a.probes();
    auto probes_b = b.probes();
    auto by_name = [](const Probe& x, const Probe& y) { return x.name() < y.name(); };
    std::sort(probes_a.begin(), probes_a.end(), by_name);
    std::sort(probes_b.begin(), probes_b.end(), by_name);
    if (probes_a != probes_b) {
        if (difference) *difference = "probes differ";
        return false;
    }
    return true;
}

}  // namespace bondflow
