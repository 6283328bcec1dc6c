#include "ode_data.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>

namespace bondflow {

CompileError::CompileError(Kind kind, const std::string& message, std::vector<std::string> subjects)
    : Error(message), kind_(kind), subjects_(std::move(subjects)) {}

EvalError::EvalError(std::string element, double time, const std::string& message)
    : Error(message + " (element '" + element + "', t=" + format_number(time) + ")"),
      element_(std::move(element)),
      time_(time) {}

std::string StateSlot::label() const {
    return std::string(kind == StateKind::Momentum ? "p." : "q.") + element;
}

namespace detail {

void refresh_constant(ParamRuntime& p) {
    p.invertible = false;
    p.inverse.resize(0, 0);
    if (!p.present || p.modulated || p.value.rows() != p.value.cols()) return;
    if (p.value.size() == 1) {
        const double k = p.value(0, 0);
        if (k != 0.0 && std::isfinite(1.0 / k)) {
            p.invertible = true;
            p.inverse = Eigen::MatrixXd::Constant(1, 1, 1.0 / k);
        }
        return;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(p.value);
    if (lu.isInvertible()) {
        p.invertible = true;
        p.inverse = lu.inverse();
    }
}

namespace {

struct Attachment {
    std::size_t bond;
    StrokeEnd end;
    int port;
};

class Compiler {
public:
    Compiler(const BondGraph& g, const CausalAssignment& a) : a_(a) {
        data_ = std::make_shared<SystemData>();
        data_->graph = g;
    }

    std::shared_ptr<const SystemData> run() {
        check_assignment();
        layout_bonds();
        build_attachments();
        build_params();
        build_states();
        build_signals();
        build_inputs();
        for (std::size_t e = 0; e < g().elements().size(); ++e) build_element(e);
        sort_schedule();
        build_power_terms();
        build_energy();
        return data_;
    }

private:
    const BondGraph& g() const { return data_->graph; }
    SystemData& d() { return *data_; }

    void check_assignment() {
        std::vector<std::string> messages;
        for (const auto& diag : a_.diagnostics()) {
            if (diag.issue == CausalIssue::Conflict) messages.push_back(diag.message);
        }
        if (!messages.empty()) {
            std::string text = "causality conflict:";
            std::vector<std::string> locations;
            for (const auto& diag : a_.diagnostics()) {
                if (diag.issue != CausalIssue::Conflict) continue;
                text += "\n  " + diag.message;
                locations.push_back(diag.location);
            }
            throw CompileError(CompileError::Kind::CausalConflict, text, locations);
        }
        std::vector<std::string> differential;
        std::string text = "derivative causality is not supported:";
        for (const auto& diag : a_.diagnostics()) {
            if (diag.issue != CausalIssue::DerivativeCausality) continue;
            differential.push_back(diag.location);
            text += "\n  " + diag.message;
            for (const auto& step : diag.chain) text += "\n    " + step.text();
        }
        if (!differential.empty()) {
            throw CompileError(CompileError::Kind::DifferentialCausality, text, differential);
        }
        if (a_.strokes().size() != g().bonds().size()) {
            throw CompileError(CompileError::Kind::Invalid, "assignment does not belong to this graph");
        }
        for (std::size_t b = 0; b < g().bonds().size(); ++b) {
            if (a_.strokes()[b] == StrokeEnd::Unassigned) {
                throw CompileError(CompileError::Kind::Invalid, "bond '" + g().bonds()[b].id + "' has no stroke",
                                   {g().bonds()[b].id});
            }
        }
    }

    void layout_bonds() {
        int offset = 0;
        for (const auto& b : g().bonds()) {
            d().bond_offset.push_back(offset);
            d().bond_dim.push_back(b.dimension);
            offset += b.dimension;
        }
        d().bond_size = offset;
    }

    VarRef effort(std::size_t b) const {
        return {data_->bond_offset[b], data_->bond_dim[b], static_cast<int>(2 * b)};
    }
    VarRef flow(std::size_t b) const {
        return {data_->bond_size + data_->bond_offset[b], data_->bond_dim[b], static_cast<int>(2 * b + 1)};
    }
    std::string var_name(int var) const {
        return std::string(var % 2 == 0 ? "e." : "f.") + g().bonds()[static_cast<std::size_t>(var / 2)].id;
    }

    void build_attachments() {
        attachments_.resize(g().elements().size());
        for (std::size_t b = 0; b < g().bonds().size(); ++b) {
            const Bond& bond = g().bonds()[b];
            for (const PortRef* ref : {&bond.tail, &bond.head}) {
                const auto e = g().element_index(ref->element);
                if (!e) throw CompileError(CompileError::Kind::Invalid, "bond '" + bond.id + "' has a dangling end");
                attachments_[*e].push_back({b, ref == &bond.head ? StrokeEnd::AtHead : StrokeEnd::AtTail, ref->port});
            }
        }
        for (auto& list : attachments_) {
            std::stable_sort(list.begin(), list.end(), [](const auto& x, const auto& y) { return x.port < y.port; });
        }
    }

    bool receives(const Attachment& at) const { return a_.strokes()[at.bond] == at.end; }
    static double head_sign(const Attachment& at) { return at.end == StrokeEnd::AtHead ? 1.0 : -1.0; }

    BoundExpr bind(const Expr& expr) {
        BoundExpr out{expr, {}};
        for (const auto& name : expr.names()) {
            Binding bnd;
            if (name == "t") {
                bnd.kind = Binding::Kind::Time;
            } else if (auto it = constants_.find(name); it != constants_.end()) {
                bnd.value = it->second;
            } else {
                bnd.kind = Binding::Kind::Signal;
                bnd.signal = signal_index(name);
            }
            out.bindings.push_back(bnd);
        }
        return out;
    }

    int signal_index(const std::string& name) const {
        const auto& sigs = g().signals();
        for (std::size_t i = 0; i < sigs.size(); ++i) {
            if (sigs[i].name == name) return static_cast<int>(i);
        }
        throw CompileError(CompileError::Kind::Invalid, "undeclared name '" + name + "'");
    }

    void build_params() {
        try {
            constants_ = g().constant_values();
        } catch (const Error& err) {
            throw CompileError(CompileError::Kind::Invalid, err.what());
        }
        d().params.resize(g().elements().size());
        d().param_used.assign(g().elements().size(), false);
        for (std::size_t e = 0; e < g().elements().size(); ++e) {
            const Element& el = g().elements()[e];
            ParamRuntime& p = d().params[e];
            if (!el.parameter) continue;
            p.present = true;
            p.rows = el.parameter->rows;
            p.cols = el.parameter->cols;
            p.modulated = g().is_modulated(*el.parameter);
            if (p.modulated) {
                for (const auto& entry : el.parameter->entries) p.entries.push_back(bind(entry));
            } else {
                try {
                    p.value = g().constant_value(*el.parameter);
                } catch (const Error& err) {
                    throw CompileError(CompileError::Kind::Invalid,
                                       "parameter of '" + el.id + "': " + std::string(err.what()));
                }
            }
            refresh_constant(p);
        }
    }

    int element_size(std::size_t e) const {
        int n = 0;
        for (const auto& at : attachments_[e]) n += data_->bond_dim[at.bond];
        return n;
    }

    static bool native(ElementKind kind, StateKind sk) {
        const bool inertial = kind == ElementKind::StorageI || kind == ElementKind::StorageIField;
        return inertial == (sk == StateKind::Momentum);
    }

    void add_state(std::size_t e, StateKind kind, bool auxiliary) {
        const Element& el = g().elements()[e];
        StateSlot slot;
        slot.element = el.id;
        slot.kind = kind;
        slot.auxiliary = auxiliary;
        slot.offset = d().state_dim;
        slot.size = element_size(e);
        slot.initial = Eigen::VectorXd::Zero(slot.size);
        if (!auxiliary && el.initial) {
            Eigen::MatrixXd init;
            try {
                init = g().constant_value(*el.initial);
            } catch (const Error& err) {
                throw CompileError(CompileError::Kind::Invalid,
                                   "initial value of '" + el.id + "': " + std::string(err.what()));
            }
            if (init.size() == 1) {
                slot.initial.setConstant(init(0, 0));
            } else if (init.size() == slot.size) {
                slot.initial = Eigen::Map<const Eigen::VectorXd>(init.data(), init.size());
            } else {
                throw CompileError(CompileError::Kind::Invalid, "initial value of '" + el.id + "' has wrong size");
            }
        }
        d().state_dim += slot.size;
        if (!auxiliary) d().storage_states += slot.size;
        d().states.push_back(std::move(slot));
    }

    void build_states() {
        for (std::size_t e = 0; e < g().elements().size(); ++e) {
            const ElementKind k = g().elements()[e].kind;
            if (!is_storage(k)) continue;
            const bool inertial = k == ElementKind::StorageI || k == ElementKind::StorageIField;
            add_state(e, inertial ? StateKind::Momentum : StateKind::Displacement, false);
        }
        std::set<std::pair<std::size_t, StateKind>> needed;
        auto need = [&](std::string_view id, Quantity q) {
            if (q != Quantity::Momentum && q != Quantity::Displacement) return;
            const auto e = g().element_index(id);
            if (!e || !is_storage(g().elements()[*e].kind)) return;
            const StateKind sk = q == Quantity::Momentum ? StateKind::Momentum : StateKind::Displacement;
            if (!native(g().elements()[*e].kind, sk)) needed.insert({*e, sk});
        };
        for (const auto& el : g().elements()) {
            for (auto q : el.outputs) need(el.id, q);
        }
        for (const auto& pr : g().probes()) need(pr.target.element, pr.quantity);
        for (const auto& s : g().signals()) {
            if (s.kind == SignalKind::Momentum) need(s.target.element, Quantity::Momentum);
            if (s.kind == SignalKind::Displacement) need(s.target.element, Quantity::Displacement);
        }
        for (const auto& [e, sk] : needed) add_state(e, sk, true);
    }

    int port_start(std::size_t e, int port) const {
        int offset = 0;
        for (const auto& at : attachments_[e]) {
            if (at.port == port) return offset;
            offset += data_->bond_dim[at.bond];
        }
        return 0;
    }

    void build_signals() {
        for (const auto& s : g().signals()) {
            SignalRuntime rt;
            rt.kind = s.kind;
            switch (s.kind) {
                case SignalKind::Effort:
                case SignalKind::Flow: {
                    const auto b = g().bond_index(s.target.element);
                    if (!b) throw CompileError(CompileError::Kind::Invalid, "signal '" + s.name + "' names no bond");
                    rt.var_offset = s.kind == SignalKind::Effort ? effort(*b).offset : flow(*b).offset;
                    break;
                }
                case SignalKind::Momentum:
                case SignalKind::Displacement: {
                    const auto e = g().element_index(s.target.element);
                    const StateKind sk = s.kind == SignalKind::Momentum ? StateKind::Momentum : StateKind::Displacement;
                    int base = -1;
                    for (const auto& slot : d().states) {
                        if (slot.element == s.target.element && slot.kind == sk) base = slot.offset;
                    }
                    if (!e || base < 0) {
                        throw CompileError(CompileError::Kind::Invalid, "signal '" + s.name + "' has no state");
                    }
                    rt.state_offset = base + (s.target.port > 0 ? port_start(*e, s.target.port) : 0);
                    break;
                }
                case SignalKind::Expression: rt.expr = bind(s.expression); break;
            }
            d().signals.push_back(std::move(rt));
        }
    }

    // Var ids the value of a signal depends on.
    void signal_reads(int signal, std::set<int>& out) const {
        const Signal& s = g().signals()[static_cast<std::size_t>(signal)];
        switch (s.kind) {
            case SignalKind::Effort:
            case SignalKind::Flow: {
                const auto b = *g().bond_index(s.target.element);
                out.insert(static_cast<int>(2 * b + (s.kind == SignalKind::Flow ? 1 : 0)));
                break;
            }
            case SignalKind::Expression:
                for (const auto& bnd : data_->signals[static_cast<std::size_t>(signal)].expr.bindings) {
                    if (bnd.kind == Binding::Kind::Signal) signal_reads(bnd.signal, out);
                }
                break;
            default: break;
        }
    }

    bool time_only(const BoundExpr& expr) const {
        for (const auto& bnd : expr.bindings) {
            if (bnd.kind != Binding::Kind::Signal) continue;
            const auto& rt = data_->signals[static_cast<std::size_t>(bnd.signal)];
            if (rt.kind != SignalKind::Expression || !time_only(rt.expr)) return false;
        }
        return true;
    }

    void build_inputs() {
        for (std::size_t e = 0; e < g().elements().size(); ++e) {
            const Element& el = g().elements()[e];
            if (!is_source(el.kind) || attachments_[e].empty()) continue;
            const ParamRuntime& p = d().params[e];
            bool input = true;
            for (const auto& entry : p.entries) input = input && time_only(entry);
            if (!input) continue;
            const int size = d().bond_dim[attachments_[e][0].bond];
            d().inputs.push_back({el.id, d().input_dim, size});
            d().input_element.push_back(static_cast<int>(e));
            d().input_dim += size;
        }
    }

    // `rows` limits the modulation dependencies to a block of parameter rows.
    void add(std::size_t e, std::variant<SourceOp, ZeroOp, LinearOp, SumOp, FieldOp> op, std::vector<int> outs,
             std::vector<int> reads, std::string relation, bool uses_param,
             std::optional<std::pair<int, int>> rows = std::nullopt) {
        if (uses_param) {
            d().param_used[e] = true;
            std::set<int> extra;
            const ParamRuntime& p = d().params[e];
            for (std::size_t i = 0; i < p.entries.size(); ++i) {
                const int row = static_cast<int>(i) / p.cols;
                if (rows && p.entries.size() > 1 && (row < rows->first || row >= rows->second)) continue;
                for (const auto& bnd : p.entries[i].bindings) {
                    if (bnd.kind == Binding::Kind::Signal) signal_reads(bnd.signal, extra);
                }
            }
            reads.insert(reads.end(), extra.begin(), extra.end());
        }
        computations_.push_back({e, std::move(op), std::move(outs), std::move(reads), std::move(relation)});
    }

    static std::string sign_text(double s) { return s < 0 ? "-" : ""; }

    void add_linear(std::size_t e, VarRef out, VarRef in, MatrixUse use, double sign, const std::string& in_name) {
        static const char* forms[] = {"", "K * ", "K' * ", "K^-1 * ", "K'^-1 * "};
        LinearOp op{out, in, false, use, sign};
        const std::string rel =
            var_name(out.var) + " = " + sign_text(sign) + forms[static_cast<int>(use)] + in_name;
        add(e, op, {out.var}, {in.var}, rel, use != MatrixUse::Identity);
    }

    const StateSlot& native_state(std::size_t e) const {
        for (const auto& slot : data_->states) {
            if (!slot.auxiliary && slot.element == g().elements()[e].id) return slot;
        }
        throw CompileError(CompileError::Kind::Invalid, "no state for '" + g().elements()[e].id + "'");
    }

    const Attachment* port(std::size_t e, int p) const {
        for (const auto& at : attachments_[e]) {
            if (at.port == p) return &at;
        }
        return nullptr;
    }

    bool is_activated_bond(std::size_t b) const {
        const Bond& bond = g().bonds()[b];
        for (const PortRef* ref : {&bond.tail, &bond.head}) {
            const auto e = g().element_index(ref->element);
            if (e && is_activated(g().elements()[*e].kind)) return true;
        }
        return false;
    }

    void build_element(std::size_t e) {
        const Element& el = g().elements()[e];
        const auto& att = attachments_[e];
        if (att.empty()) return;
        switch (el.kind) {
            case ElementKind::SourceEffort:
            case ElementKind::SourceFlow: {
                const bool effort_source = el.kind == ElementKind::SourceEffort;
                const VarRef out = effort_source ? effort(att[0].bond) : flow(att[0].bond);
                int input = -1;
                for (std::size_t i = 0; i < d().inputs.size(); ++i) {
                    if (d().input_element[i] == static_cast<int>(e)) input = d().inputs[i].offset;
                }
                add(e, SourceOp{out, input}, {out.var}, {},
                    var_name(out.var) + (input >= 0 ? " = u." + el.id : " = K"), input < 0);
                break;
            }
            case ElementKind::Resistor: {
                const double s = head_sign(att[0]);
                const VarRef eb = effort(att[0].bond);
                const VarRef fb = flow(att[0].bond);
                if (receives(att[0])) {
                    add_linear(e, fb, eb, MatrixUse::Inverse, s, var_name(eb.var));
                } else {
                    add_linear(e, eb, fb, MatrixUse::Direct, s, var_name(fb.var));
                }
                break;
            }
            case ElementKind::StorageI:
            case ElementKind::StorageC: {
                const StateSlot& slot = native_state(e);
                const bool inertial = el.kind == ElementKind::StorageI;
                const VarRef out = inertial ? flow(att[0].bond) : effort(att[0].bond);
                const double s = inertial ? head_sign(att[0]) : 1.0;
                LinearOp op{out, {slot.offset, slot.size, -1}, true, MatrixUse::Inverse, s};
                add(e, op, {out.var}, {}, var_name(out.var) + " = " + sign_text(s) + "K^-1 * " + slot.label(), true);
                const VarRef src = inertial ? effort(att[0].bond) : flow(att[0].bond);
                d().derivatives.push_back({slot.offset, src, inertial ? 1.0 : head_sign(att[0])});
                break;
            }
            case ElementKind::Transformer:
            case ElementKind::Gyrator: build_two_port(e); break;
            case ElementKind::Junction0:
            case ElementKind::Junction1: build_junction(e); break;
            case ElementKind::ActivatedBondEffort:
            case ElementKind::ActivatedBondFlow: {
                const VarRef out = el.kind == ElementKind::ActivatedBondEffort ? flow(att[0].bond) : effort(att[0].bond);
                add(e, ZeroOp{out}, {out.var}, {}, var_name(out.var) + " = 0", false);
                break;
            }
            case ElementKind::ResistorField:
            case ElementKind::StorageCField:
            case ElementKind::StorageIField: build_field(e); break;
        }
    }

    void build_two_port(std::size_t e) {
        const Element& el = g().elements()[e];
        const Attachment* p1 = port(e, 1);
        const Attachment* p2 = port(e, 2);
        if (!p1 || !p2) throw CompileError(CompileError::Kind::Invalid, "'" + el.id + "' needs two ports");
        const double s1 = head_sign(*p1);   // port 1 counts inward
        const double s2 = -head_sign(*p2);  // port 2 counts outward
        const VarRef e1 = effort(p1->bond), f1 = flow(p1->bond);
        const VarRef e2 = effort(p2->bond), f2 = flow(p2->bond);
        if (el.kind == ElementKind::Transformer) {
            if (!receives(*p1)) {
                // Left: flow in on port 1, effort in on port 2.
                add_linear(e, e1, e2, MatrixUse::Transpose, 1.0, var_name(e2.var));
                add_linear(e, f2, f1, MatrixUse::Direct, s1 * s2, var_name(f1.var));
            } else {
                add_linear(e, f1, f2, MatrixUse::Inverse, s1 * s2, var_name(f2.var));
                add_linear(e, e2, e1, MatrixUse::InverseTranspose, 1.0, var_name(e1.var));
            }
        } else {
            if (!receives(*p1)) {
                // Outer: flows in on both ports.
                add_linear(e, e2, f1, MatrixUse::Direct, s1, var_name(f1.var));
                add_linear(e, e1, f2, MatrixUse::Transpose, s2, var_name(f2.var));
            } else {
                add_linear(e, f1, e2, MatrixUse::Inverse, s1, var_name(e2.var));
                add_linear(e, f2, e1, MatrixUse::InverseTranspose, s2, var_name(e1.var));
            }
        }
    }

    void build_junction(std::size_t e) {
        const Element& el = g().elements()[e];
        const bool one = el.kind == ElementKind::Junction1;
        std::vector<const Attachment*> regular;
        std::vector<const Attachment*> activated;
        for (const auto& at : attachments_[e]) (is_activated_bond(at.bond) ? activated : regular).push_back(&at);
        // The determining bond: junction gives effort (1) / receives effort (0).
        const Attachment* strong = nullptr;
        for (const auto* at : regular) {
            if (receives(*at) != one) strong = at;
        }
        if (!strong) {
            throw CompileError(CompileError::Kind::CausalConflict, "junction '" + el.id + "' has no determining bond",
                               {el.id});
        }
        auto common = [&](std::size_t b) { return one ? flow(b) : effort(b); };
        auto summed = [&](std::size_t b) { return one ? effort(b) : flow(b); };

        SumOp sum;
        sum.out = summed(strong->bond);
        std::vector<int> reads;
        std::string rel = var_name(sum.out.var) + " =";
        const double ss = head_sign(*strong);
        for (const auto* at : regular) {
            if (at == strong) continue;
            const VarRef in = summed(at->bond);
            const double coeff = -ss * head_sign(*at);
            sum.terms.emplace_back(in, coeff);
            reads.push_back(in.var);
            rel += (coeff < 0 ? " - " : " + ") + var_name(in.var);
        }
        if (sum.terms.empty()) rel += " 0";
        add(e, sum, {sum.out.var}, reads, rel, false);
        for (const auto* at : regular) {
            if (at == strong) continue;
            add_linear(e, common(at->bond), common(strong->bond), MatrixUse::Identity, 1.0,
                       var_name(common(strong->bond).var));
        }
        for (const auto* at : activated) {
            // The junction supplies the variable the tap reads.
            const bool tap_reads_effort = receives(*at) == false;
            const VarRef out = tap_reads_effort ? effort(at->bond) : flow(at->bond);
            const VarRef in = tap_reads_effort ? effort(strong->bond) : flow(strong->bond);
            add_linear(e, out, in, MatrixUse::Identity, 1.0, var_name(in.var));
        }
    }

    void build_field(std::size_t e) {
        const Element& el = g().elements()[e];
        const Attachment* p[2] = {port(e, 1), port(e, 2)};
        if (!p[0] || !p[1]) throw CompileError(CompileError::Kind::Invalid, "'" + el.id + "' needs two ports");
        FieldOp base;
        for (int k = 0; k < 2; ++k) {
            base.effort[k] = effort(p[k]->bond);
            base.flow[k] = flow(p[k]->bond);
            base.sigma[k] = head_sign(*p[k]);
            base.gives_effort[k] = !receives(*p[k]);
        }
        if (el.kind == ElementKind::ResistorField) {
            base.mode = FieldOp::Mode::Resistive;
        } else {
            const StateSlot& slot = native_state(e);
            base.state_offset = slot.offset;
            const bool inertial = el.kind == ElementKind::StorageIField;
            base.mode = inertial ? FieldOp::Mode::InertialState : FieldOp::Mode::CapacitiveState;
            int offset = slot.offset;
            for (int k = 0; k < 2; ++k) {
                const VarRef src = inertial ? base.effort[k] : base.flow[k];
                d().derivatives.push_back({offset, src, inertial ? 1.0 : base.sigma[k]});
                offset += src.size;
            }
        }
        for (int k = 0; k < 2; ++k) {
            FieldOp op = base;
            op.port = k;
            const VarRef out = base.gives_effort[k] ? base.effort[k] : base.flow[k];
            std::vector<int> reads;
            std::string rel = var_name(out.var) + " = field(";
            if (base.mode == FieldOp::Mode::Resistive) {
                for (int j = 0; j < 2; ++j) {
                    const VarRef in = base.gives_effort[j] ? base.flow[j] : base.effort[j];
                    reads.push_back(in.var);
                    rel += (j ? ", " : "") + var_name(in.var);
                }
                add(e, op, {out.var}, reads, rel + ")", true);
            } else {
                rel += native_state(e).label();
                const int first = k == 0 ? 0 : base.effort[0].size;
                add(e, op, {out.var}, reads, rel + ")", true, std::make_pair(first, first + out.size));
            }
        }
    }

    void sort_schedule() {
        const int nvars = static_cast<int>(2 * g().bonds().size());
        std::vector<int> producer(static_cast<std::size_t>(nvars), -1);
        for (std::size_t c = 0; c < computations_.size(); ++c) {
            for (int v : computations_[c].outs) {
                if (producer[static_cast<std::size_t>(v)] >= 0) {
                    throw CompileError(CompileError::Kind::CausalConflict, var_name(v) + " is computed twice",
                                       {g().bonds()[static_cast<std::size_t>(v / 2)].id});
                }
                producer[static_cast<std::size_t>(v)] = static_cast<int>(c);
            }
        }
        for (int v = 0; v < nvars; ++v) {
            if (producer[static_cast<std::size_t>(v)] < 0) {
                throw CompileError(CompileError::Kind::CausalConflict, var_name(v) + " is never computed",
                                   {g().bonds()[static_cast<std::size_t>(v / 2)].id});
            }
        }
        const std::size_t n = computations_.size();
        std::vector<std::vector<std::size_t>> users(n);
        std::vector<int> pending(n, 0);
        for (std::size_t c = 0; c < n; ++c) {
            std::set<int> deps;
            for (int v : computations_[c].reads) deps.insert(producer[static_cast<std::size_t>(v)]);
            for (int p : deps) {
                users[static_cast<std::size_t>(p)].push_back(c);
                ++pending[c];
            }
        }
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t c = 0; c < n; ++c) {
            if (pending[c] == 0) ready.push(c);
        }
        std::vector<bool> done(n, false);
        while (!ready.empty()) {
            const std::size_t c = ready.top();
            ready.pop();
            done[c] = true;
            d().order.push_back(computations_[c]);
            for (auto u : users[c]) {
                if (--pending[u] == 0) ready.push(u);
            }
        }
        if (d().order.size() != n) report_loop(producer, done);
        for (const auto& comp : d().order) {
            ScheduleStep step;
            step.element = g().elements()[comp.element].id;
            step.relation = comp.relation;
            for (int v : comp.outs) step.outputs.push_back(var_name(v));
            for (int v : comp.reads) step.reads.push_back(var_name(v));
            d().steps.push_back(std::move(step));
        }
    }

    [[noreturn]] void report_loop(const std::vector<int>& producer, const std::vector<bool>& done) {
        // Walk backwards through unresolved dependencies until a computation repeats.
        std::size_t start = 0;
        while (done[start]) ++start;
        std::vector<std::size_t> path;
        std::vector<int> via;
        std::vector<int> seen_at(computations_.size(), -1);
        std::size_t c = start;
        while (seen_at[c] < 0) {
            seen_at[c] = static_cast<int>(path.size());
            path.push_back(c);
            int next_var = -1;
            for (int v : computations_[c].reads) {
                const int p = producer[static_cast<std::size_t>(v)];
                if (!done[static_cast<std::size_t>(p)]) {
                    next_var = v;
                    break;
                }
            }
            via.push_back(next_var);
            c = static_cast<std::size_t>(producer[static_cast<std::size_t>(next_var)]);
        }
        std::vector<std::string> bonds;
        std::string chain;
        for (std::size_t i = static_cast<std::size_t>(seen_at[c]); i < path.size(); ++i) {
            const std::string& id = g().bonds()[static_cast<std::size_t>(via[i] / 2)].id;
            if (std::find(bonds.begin(), bonds.end(), id) == bonds.end()) bonds.push_back(id);
            chain += (chain.empty() ? "" : " <- ") + var_name(via[i]);
        }
        std::string list;
        for (const auto& b : bonds) list += (list.empty() ? "" : ", ") + b;
        throw CompileError(CompileError::Kind::AlgebraicLoop,
                           "algebraic loop through bonds " + list + " (" + chain + ")", bonds);
    }

    void build_power_terms() {
        d().element_ports.resize(g().elements().size());
        for (std::size_t e = 0; e < g().elements().size(); ++e) {
            for (const auto& at : attachments_[e]) d().element_ports[e].push_back({at.bond, head_sign(at)});
        }
    }

    void build_energy() {
        for (std::size_t e = 0; e < g().elements().size(); ++e) {
            const ElementKind k = g().elements()[e].kind;
            if (!is_storage(k)) continue;
            const StateSlot& slot = native_state(e);
            const ParamRuntime& p = d().params[e];
            StorageEnergy se;
            se.element = e;
            se.state_offset = slot.offset;
            se.size = slot.size;
            const bool field = is_field(k);
            if (p.modulated) {
                se.modulated = true;
            } else {
                const Eigen::MatrixXd& w = field ? p.value : p.inverse;
                if ((!field && !p.invertible) || w.size() == 0) {
                    se.modulated = true;
                } else if (w.size() == 1) {
                    se.weight = Eigen::MatrixXd::Identity(slot.size, slot.size) * w(0, 0);
                } else {
                    se.weight = w;
                }
            }
            d().energy.push_back(std::move(se));
        }
    }

    const CausalAssignment& a_;
    std::shared_ptr<SystemData> data_;
    std::vector<std::vector<Attachment>> attachments_;
    std::map<std::string, double, std::less<>> constants_;
    std::vector<Computation> computations_;
};

}  // namespace
}  // namespace detail

OdeSystem derive(const BondGraph& graph, const CausalAssignment& assignment) {
    return OdeSystem(detail::Compiler(graph, assignment).run());
}

OdeSystem compile(const BondGraph& graph) {
    const auto diags = validate(graph);
    if (has_errors(diags)) {
        std::string text = "graph is invalid:";
        std::vector<std::string> subjects;
        for (const auto& dg : diags) {
            if (dg.severity != Severity::Error) continue;
            text += "\n  " + to_string(dg);
            subjects.push_back(dg.subject);
        }
        throw CompileError(CompileError::Kind::Invalid, text, subjects);
    }
    return derive(graph, assign(graph));
}

}  // namespace bondflow
