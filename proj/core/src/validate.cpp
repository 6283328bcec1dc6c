#include "bondflow/graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>

namespace bondflow {

namespace {

class Validator {
public:
    explicit Validator(const BondGraph& g) : g_(g) {
        // Incidence by element id, so checks stay linear in graph size.
        for (std::size_t b = 0; b < g.bonds().size(); ++b) {
            const Bond& bond = g.bonds()[b];
            incidence_[bond.tail.element].push_back(b);
            if (bond.head.element != bond.tail.element) incidence_[bond.head.element].push_back(b);
        }
    }

    std::vector<Diagnostic> run() {
        check_ids();
        check_bonds();
        check_elements();
        check_constants();
        check_signals();
        check_expressions();
        check_probes();
        return std::move(out_);
    }

private:
    std::vector<std::size_t> bonds_at(std::size_t element) const {
        const auto it = incidence_.find(g_.elements()[element].id);
        return it == incidence_.end() ? std::vector<std::size_t>{} : it->second;
    }

    // Same matching as BondGraph::bond_at_port, over the incident bonds only.
    std::optional<std::size_t> bond_at_port(std::size_t element, int port) const {
        const Element& e = g_.elements()[element];
        const bool one_port = is_one_port(e.kind);
        auto matches = [&](const PortRef& ref) {
            if (ref.element != e.id) return false;
            if (one_port) return port <= 1 && ref.port <= 1;
            return ref.port == port;
        };
        for (auto b : bonds_at(element)) {
            if (matches(g_.bonds()[b].tail) || matches(g_.bonds()[b].head)) return b;
        }
        return std::nullopt;
    }

    void error(std::string_view rule, std::string subject, std::string message) {
        out_.push_back({Severity::Error, std::string(rule), std::move(subject), std::move(message)});
    }
    void warning(std::string_view rule, std::string subject, std::string message) {
        out_.push_back({Severity::Warning, std::string(rule), std::move(subject), std::move(message)});
    }

    void check_ids() {
        std::set<std::string> seen;
        for (const auto& e : g_.elements()) {
            if (e.id.empty()) error(rules::kDuplicateId, e.id, "element id must not be empty");
            if (!seen.insert(e.id).second) error(rules::kDuplicateId, e.id, "duplicate element id '" + e.id + "'");
        }
        std::set<std::string> bonds;
        for (const auto& b : g_.bonds()) {
            if (!bonds.insert(b.id).second) error(rules::kDuplicateId, b.id, "duplicate bond id '" + b.id + "'");
        }
        std::set<std::string> names;
        auto name = [&](const std::string& n, std::string_view what) {
            if (n == "t") error(rules::kDuplicateId, n, std::string(what) + " may not be named 't'");
            if (!names.insert(n).second) error(rules::kDuplicateId, n, "duplicate name '" + n + "'");
        };
        for (const auto& c : g_.constants()) name(c.name, "param");
        for (const auto& s : g_.signals()) name(s.name, "signal");
    }

    // Dimension of the bond on an element port, or 0 if unconnected.
    int port_dimension(std::size_t element, int port) const {
        const auto b = bond_at_port(element, port);
        return b ? g_.bonds()[*b].dimension : 0;
    }

    void check_endpoint(const Bond& b, const PortRef& ref, std::string_view end) {
        const auto idx = g_.element_index(ref.element);
        if (!idx) {
            error(rules::kUnknownElement, b.id,
                  "bond " + std::string(end) + " names unknown element '" + ref.element + "'");
            return;
        }
        const Element& e = g_.elements()[*idx];
        const int ports = port_count(e.kind);
        if (ports == 2 && ref.port != 1 && ref.port != 2) {
            error(rules::kPort, b.id, "element '" + e.id + "' (" + std::string(to_symbol(e.kind)) +
                                          ") needs an explicit port .1 or .2");
        } else if (ports == 1 && ref.port > 1) {
            error(rules::kPort, b.id, "element '" + e.id + "' has a single port");
        } else if (ports == 0 && ref.port != 0) {
            error(rules::kPort, b.id, "junction '" + e.id + "' ports are not numbered");
        }
    }

    void check_bonds() {
        std::map<std::pair<std::string, int>, std::string> occupied;
        for (const auto& b : g_.bonds()) {
            if (b.dimension < 1) error(rules::kDimension, b.id, "bond dimension must be positive");
            check_endpoint(b, b.tail, "tail");
            check_endpoint(b, b.head, "head");
            const Element* tail = g_.find_element(b.tail.element);
            const Element* head = g_.find_element(b.head.element);
            if (!tail || !head) continue;
            if (tail == head) {
                error(rules::kPort, b.id, "bond connects element '" + tail->id + "' to itself");
                continue;
            }
            if (!is_junction(tail->kind) && !is_junction(head->kind)) {
                error(rules::kJunctionRule, b.id,
                      std::string(kJunctionRuleMessage) + " ('" + tail->id + "' -> '" + head->id + "')");
            }
            for (const auto* ref : {&b.tail, &b.head}) {
                const Element* e = g_.find_element(ref->element);
                if (is_junction(e->kind)) continue;
                const int port = is_one_port(e->kind) ? 0 : ref->port;
                const auto [it, fresh] = occupied.try_emplace({e->id, port}, b.id);
                if (!fresh) {
                    error(rules::kPort, b.id,
                          "port of '" + e->id + "' already used by bond '" + it->second + "'");
                }
            }
        }
    }

    void check_shape(const Element& e, const Parameter& p, int dim, bool allow_column, std::string_view what) {
        const std::string subject = e.id;
        if (p.is_scalar()) return;  // broadcast as k * I (or a constant vector)
        if (allow_column && p.is_column() && p.rows == dim) return;
        if (!allow_column && p.is_square() && p.rows == dim) return;
        error(rules::kParameterMismatch, subject,
              "parameter mismatch: " + std::string(what) + " of '" + e.id + "' is " + std::to_string(p.rows) +
                  "x" + std::to_string(p.cols) + " but the bond dimension is " + std::to_string(dim));
    }

    void check_elements() {
        for (std::size_t i = 0; i < g_.elements().size(); ++i) {
            const Element& e = g_.elements()[i];
            if (!causality_mode_allowed(e.kind, e.causality)) {
                error(rules::kCausalityOverride, e.id,
                      "causality '" + std::string(to_string(e.causality)) + "' does not apply to " +
                          std::string(to_symbol(e.kind)));
            }
            for (Quantity q : e.outputs) {
                const bool ok = q == Quantity::Power ||
                                ((q == Quantity::Momentum || q == Quantity::Displacement) && is_storage(e.kind));
                if (!ok) {
                    error(rules::kOutput, e.id,
                          "output '" + std::string(to_string(q)) + "' is not available on " +
                              std::string(to_symbol(e.kind)));
                }
            }
            check_connectivity(i, e);
            check_parameters(i, e);
        }
    }

    void check_connectivity(std::size_t i, const Element& e) {
        const auto attached = bonds_at(i);
        if (is_junction(e.kind)) {
            if (attached.size() < 2) {
                error(rules::kUnconnected, e.id, "junction '" + e.id + "' needs at least two bonds");
            }
            int dim = -1;
            for (auto b : attached) {
                const int d = g_.bonds()[b].dimension;
                if (dim < 0) dim = d;
                if (d != dim) {
                    error(rules::kParameterMismatch, e.id,
                          "parameter mismatch: bonds on junction '" + e.id + "' differ in dimension");
                    break;
                }
            }
            return;
        }
        if (port_count(e.kind) == 1) {
            if (attached.empty()) error(rules::kUnconnected, e.id, "element '" + e.id + "' is not bonded");
            return;
        }
        for (int port : {1, 2}) {
            if (!bond_at_port(i, port)) {
                error(rules::kUnconnected, e.id, "port " + std::to_string(port) + " of '" + e.id + "' is not bonded");
            }
        }
    }

    void check_parameters(std::size_t i, const Element& e) {
        const bool needs_parameter = !is_junction(e.kind) && !is_activated(e.kind);
        if (needs_parameter && !e.parameter) {
            error(rules::kMissingParameter, e.id, "element '" + e.id + "' needs a parameter");
        }
        if (!needs_parameter && e.parameter) {
            error(rules::kParameterMismatch, e.id, "element '" + e.id + "' takes no parameter");
        }
        if (e.initial && !is_storage(e.kind)) {
            error(rules::kParameterMismatch, e.id, "only storages take initial values");
        }
        if (!e.parameter) return;
        const Parameter& p = *e.parameter;
        if (static_cast<std::size_t>(p.rows) * static_cast<std::size_t>(p.cols) != p.entries.size() ||
            p.rows < 1 || p.cols < 1) {
            error(rules::kParameterMismatch, e.id, "malformed parameter shape");
            return;
        }
        if (is_field(e.kind)) {
            const int d1 = port_dimension(i, 1);
            const int d2 = port_dimension(i, 2);
            if (d1 > 0 && d2 > 0) {
                const int n = d1 + d2;
                if (!p.is_square() || p.rows != n) {
                    error(rules::kParameterMismatch, e.id,
                          "parameter mismatch: field '" + e.id + "' needs a " + std::to_string(n) + "x" +
                              std::to_string(n) + " matrix over its stacked ports");
                }
                if (e.initial && !(e.initial->is_scalar() || (e.initial->is_column() && e.initial->rows == n))) {
                    error(rules::kParameterMismatch, e.id, "parameter mismatch: initial value of '" + e.id + "'");
                }
            }
            return;
        }
        if (is_two_port(e.kind)) {
            const int d1 = port_dimension(i, 1);
            const int d2 = port_dimension(i, 2);
            if (d1 > 0 && d2 > 0 && d1 != d2) {
                error(rules::kParameterMismatch, e.id,
                      "parameter mismatch: ports of '" + e.id + "' have different dimensions");
            }
            if (d1 > 0) check_shape(e, p, d1, false, "parameter");
            return;
        }
        const auto attached = bonds_at(i);
        if (attached.empty()) return;
        const int dim = g_.bonds()[attached.front()].dimension;
        check_shape(e, p, dim, is_source(e.kind), is_source(e.kind) ? "value" : "parameter");
        if (e.initial) check_shape(e, *e.initial, dim, true, "initial value");
        if ((e.kind == ElementKind::Resistor || e.kind == ElementKind::StorageI || e.kind == ElementKind::StorageC) &&
            p.is_scalar() && !g_.is_modulated(p)) {
            try {
                const double v = g_.constant_value(p)(0, 0);
                if (!(v > 0.0)) {
                    warning(rules::kNonPositive, e.id,
                            "parameter of '" + e.id + "' is " + format_number(v) + "; expected > 0");
                }
            } catch (const Error&) {
                // unresolved names are reported by check_expressions
            }
        }
    }

    void check_constants() {
        std::set<std::string> earlier;
        for (const auto& c : g_.constants()) {
            for (const auto& n : c.value.names()) {
                if (!earlier.count(n)) {
                    error(rules::kConstant, c.name,
                          "param '" + c.name + "' may only reference earlier params, not '" + n + "'");
                }
            }
            earlier.insert(c.name);
        }
    }

    void check_signals() {
        for (const auto& s : g_.signals()) {
            switch (s.kind) {
                case SignalKind::Effort:
                case SignalKind::Flow: {
                    const Bond* b = g_.find_bond(s.target.element);
                    if (!b) {
                        error(rules::kSignalSource, s.name, "signal '" + s.name + "' reads unknown bond '" +
                                                                s.target.element + "'");
                    } else if (b->dimension != 1) {
                        error(rules::kSignalSource, s.name, "signal '" + s.name + "' reads a vector bond");
                    }
                    break;
                }
                case SignalKind::Momentum:
                case SignalKind::Displacement: {
                    const auto idx = g_.element_index(s.target.element);
                    if (!idx || !is_storage(g_.elements()[*idx].kind)) {
                        error(rules::kSignalSource, s.name,
                              "momentum/displacement signals must reference a storage element, not '" +
                                  s.target.element + "'");
                        break;
                    }
                    const Element& e = g_.elements()[*idx];
                    if (is_field(e.kind)) {
                        if (s.target.port != 1 && s.target.port != 2) {
                            error(rules::kSignalSource, s.name, "field signal needs a port .1 or .2");
                        } else if (port_dimension(*idx, s.target.port) > 1) {
                            error(rules::kSignalSource, s.name, "signal '" + s.name + "' reads a vector port");
                        }
                    } else if (s.target.port > 1) {
                        error(rules::kSignalSource, s.name, "element '" + e.id + "' has a single port");
                    } else if (port_dimension(*idx, 0) > 1) {
                        error(rules::kSignalSource, s.name, "signal '" + s.name + "' reads a vector bond");
                    }
                    break;
                }
                case SignalKind::Expression: break;
            }
        }
        // cycles among expression signals
        std::map<std::string, int> state;  // 0 new, 1 active, 2 done
        std::function<bool(const Signal&)> visit = [&](const Signal& s) -> bool {
            int& st = state[s.name];
            if (st == 1) return false;
            if (st == 2) return true;
            st = 1;
            if (s.kind == SignalKind::Expression) {
                for (const auto& n : s.expression.names()) {
                    const Signal* dep = g_.find_signal(n);
                    if (dep && !visit(*dep)) {
                        st = 2;
                        return false;
                    }
                }
            }
            st = 2;
            return true;
        };
        for (const auto& s : g_.signals()) {
            state.clear();
            if (!visit(s)) error(rules::kSignalCycle, s.name, "signal '" + s.name + "' depends on itself");
        }
    }

    void check_names(const Expr& e, const std::string& subject) {
        for (const auto& n : e.names()) {
            if (n == "t" || g_.find_signal(n) || g_.find_constant(n)) continue;
            error(rules::kUndeclaredName, subject, "'" + n + "' is not a declared signal or param");
        }
    }

    void check_expressions() {
        for (const auto& e : g_.elements()) {
            for (const auto* p : {e.parameter ? &*e.parameter : nullptr, e.initial ? &*e.initial : nullptr}) {
                if (!p) continue;
                for (const auto& x : p->entries) check_names(x, e.id);
            }
            if (e.initial && g_.is_modulated(*e.initial)) {
                error(rules::kConstant, e.id, "initial value of '" + e.id + "' must be constant");
            }
        }
        for (const auto& s : g_.signals()) {
            if (s.kind == SignalKind::Expression) check_names(s.expression, s.name);
        }
    }

    void check_probes() {
        for (const auto& p : g_.probes()) {
            const std::string name = p.name();
            if (const Bond* b = g_.find_bond(p.target.element)) {
                (void)b;
                if (p.target.port != 0 || p.quantity == Quantity::Momentum || p.quantity == Quantity::Displacement) {
                    error(rules::kProbe, name, "bond probes take effort, flow or power");
                }
                continue;
            }
            const auto idx = g_.element_index(p.target.element);
            if (!idx) {
                error(rules::kProbe, name, "probe target '" + p.target.element + "' does not exist");
                continue;
            }
            const Element& e = g_.elements()[*idx];
            if ((p.quantity == Quantity::Momentum || p.quantity == Quantity::Displacement) && !is_storage(e.kind)) {
                error(rules::kProbe, name, "only storages expose momentum and displacement");
            }
            if ((p.quantity == Quantity::Effort || p.quantity == Quantity::Flow) && port_count(e.kind) != 1 &&
                p.target.port != 1 && p.target.port != 2) {
                error(rules::kProbe, name, "effort/flow probes on '" + e.id + "' need a port");
            }
        }
    }

    const BondGraph& g_;
    std::vector<Diagnostic> out_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> incidence_;
};

}  // namespace

std::vector<Diagnostic> validate(const BondGraph& graph) { return Validator(graph).run(); }

}  // namespace bondflow
