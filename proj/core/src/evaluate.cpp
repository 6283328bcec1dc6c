#include "ode_data.hpp"

#include <cmath>

namespace bondflow {

using detail::BoundExpr;
using detail::Binding;
using detail::MatrixUse;
using detail::ParamRuntime;
using detail::SystemData;
using detail::VarRef;

namespace {

struct Context {
    const SystemData& data;
    double t;
    const Eigen::VectorXd& x;
    const Eigen::VectorXd& u;
    Eigen::VectorXd& vars;
    std::vector<std::optional<Eigen::MatrixXd>>* capture = nullptr;
};

double eval_expr(const Context& ctx, const BoundExpr& expr);

double signal_value(const Context& ctx, int index) {
    const auto& s = ctx.data.signals[static_cast<std::size_t>(index)];
    switch (s.kind) {
        case SignalKind::Effort:
        case SignalKind::Flow: return ctx.vars[s.var_offset];
        case SignalKind::Momentum:
        case SignalKind::Displacement: return ctx.x[s.state_offset];
        case SignalKind::Expression: return eval_expr(ctx, s.expr);
    }
    return 0.0;
}

double eval_expr(const Context& ctx, const BoundExpr& expr) {
    double stack_values[16];
    std::vector<double> heap;
    const std::size_t n = expr.bindings.size();
    double* values = stack_values;
    if (n > 16) {
        heap.resize(n);
        values = heap.data();
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Binding& b = expr.bindings[i];
        switch (b.kind) {
            case Binding::Kind::Value: values[i] = b.value; break;
            case Binding::Kind::Time: values[i] = ctx.t; break;
            case Binding::Kind::Signal: values[i] = signal_value(ctx, b.signal); break;
        }
    }
    return expr.expr.evaluate(std::span<const double>(values, n));
}

const std::string& element_id(const Context& ctx, std::size_t e) { return ctx.data.graph.elements()[e].id; }

// Rows outside [row_begin, row_end) are left at zero unless values are
// being captured for freezing.
Eigen::MatrixXd param_value(const Context& ctx, std::size_t e, int row_begin = 0, int row_end = -1) {
    const ParamRuntime& p = ctx.data.params[e];
    if (!p.modulated) return p.value;
    if (row_end < 0 || ctx.capture || p.rows * p.cols == 1) {
        row_begin = 0;
        row_end = p.rows;
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p.rows, p.cols);
    try {
        for (int r = row_begin; r < row_end; ++r) {
            for (int c = 0; c < p.cols; ++c) {
                m(r, c) = eval_expr(ctx, p.entries[static_cast<std::size_t>(r * p.cols + c)]);
            }
        }
    } catch (const ExprEvalError& err) {
        throw EvalError(element_id(ctx, e), ctx.t, err.what());
    }
    if (!m.allFinite()) throw EvalError(element_id(ctx, e), ctx.t, "parameter is not finite");
    if (ctx.capture) (*ctx.capture)[e] = m;
    return m;
}

Eigen::VectorXd apply(const Context& ctx, std::size_t e, MatrixUse use, const Eigen::VectorXd& in) {
    if (use == MatrixUse::Identity) return in;
    const ParamRuntime& p = ctx.data.params[e];
    const bool inverse = use == MatrixUse::Inverse || use == MatrixUse::InverseTranspose;
    const bool transpose = use == MatrixUse::Transpose || use == MatrixUse::InverseTranspose;
    if (!p.modulated) {
        const Eigen::MatrixXd& k = inverse ? p.inverse : p.value;
        if (inverse && !p.invertible) throw EvalError(element_id(ctx, e), ctx.t, "singular parameter is inverted");
        if (k.size() == 1) return k(0, 0) * in;
        return transpose ? Eigen::VectorXd(k.transpose() * in) : Eigen::VectorXd(k * in);
    }
    const Eigen::MatrixXd k = param_value(ctx, e);
    if (k.size() == 1) {
        const double v = k(0, 0);
        if (!inverse) return v * in;
        if (v == 0.0 || !std::isfinite(1.0 / v)) {
            throw EvalError(element_id(ctx, e), ctx.t, "singular parameter is inverted");
        }
        return in / v;
    }
    if (!inverse) return transpose ? Eigen::VectorXd(k.transpose() * in) : Eigen::VectorXd(k * in);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(transpose ? Eigen::MatrixXd(k.transpose()) : k);
    if (!lu.isInvertible()) throw EvalError(element_id(ctx, e), ctx.t, "singular parameter is inverted");
    return lu.solve(in);
}

Eigen::MatrixXd field_matrix(const Context& ctx, std::size_t e, int n, int row_begin = 0, int row_end = -1) {
    Eigen::MatrixXd k = param_value(ctx, e, row_begin, row_end);
    if (k.size() == 1 && n > 1) return Eigen::MatrixXd::Identity(n, n) * k(0, 0);
    return k;
}

void run_field(const Context& ctx, std::size_t e, const detail::FieldOp& op) {
    const int n0 = op.effort[0].size;
    const int n = n0 + op.effort[1].size;
    auto start = [&](int port) { return port == 0 ? 0 : n0; };
    const VarRef& out_ref = op.gives_effort[op.port] ? op.effort[op.port] : op.flow[op.port];
    Eigen::VectorXd result;
    if (op.mode != detail::FieldOp::Mode::Resistive) {
        const Eigen::MatrixXd k = field_matrix(ctx, e, n, start(op.port), start(op.port) + out_ref.size);
        const Eigen::VectorXd local = k * ctx.x.segment(op.state_offset, n);
        result = local.segment(start(op.port), out_ref.size);
        if (op.mode == detail::FieldOp::Mode::InertialState) result *= op.sigma[op.port];
    } else {
        // e = K f with f known on effort-giving ports (F) and e known on the others (E).
        const Eigen::MatrixXd k = field_matrix(ctx, e, n);
        std::vector<int> fi, ei;
        Eigen::VectorXd known_f(n), known_e(n);
        for (int p = 0; p < 2; ++p) {
            for (int i = 0; i < op.effort[p].size; ++i) {
                const int idx = start(p) + i;
                if (op.gives_effort[p]) {
                    fi.push_back(idx);
                    known_f[idx] = op.sigma[p] * ctx.vars[op.flow[p].offset + i];
                } else {
                    ei.push_back(idx);
                    known_e[idx] = ctx.vars[op.effort[p].offset + i];
                }
            }
        }
        auto block = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
            Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t c = 0; c < cols.size(); ++c) m(static_cast<int>(r), static_cast<int>(c)) = k(rows[r], cols[c]);
            }
            return m;
        };
        auto gather = [](const Eigen::VectorXd& v, const std::vector<int>& idx) {
            Eigen::VectorXd out(static_cast<int>(idx.size()));
            for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = v[idx[i]];
            return out;
        };
        const Eigen::VectorXd fF = gather(known_f, fi);
        Eigen::VectorXd fE(static_cast<int>(ei.size()));
        if (!ei.empty()) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(block(ei, ei));
            if (!lu.isInvertible()) throw EvalError(element_id(ctx, e), ctx.t, "singular field block is inverted");
            Eigen::VectorXd rhs = gather(known_e, ei);
            if (!fi.empty()) rhs -= block(ei, fi) * fF;
            fE = lu.solve(rhs);
        }
        Eigen::VectorXd local(n);
        if (op.gives_effort[op.port]) {
            Eigen::VectorXd eF = Eigen::VectorXd::Zero(static_cast<int>(fi.size()));
            if (!fi.empty()) eF = block(fi, fi) * fF;
            if (!ei.empty() && !fi.empty()) eF += block(fi, ei) * fE;
            for (std::size_t i = 0; i < fi.size(); ++i) local[fi[i]] = eF[static_cast<int>(i)];
            result = local.segment(start(op.port), out_ref.size);
        } else {
            for (std::size_t i = 0; i < ei.size(); ++i) local[ei[i]] = fE[static_cast<int>(i)];
            result = op.sigma[op.port] * local.segment(start(op.port), out_ref.size);
        }
    }
    ctx.vars.segment(out_ref.offset, out_ref.size) = result;
}

void run_schedule(const Context& ctx) {
    const SystemData& data = ctx.data;
    for (const auto& comp : data.order) {
        const std::size_t e = comp.element;
        if (const auto* op = std::get_if<detail::SourceOp>(&comp.op)) {
            if (op->input >= 0) {
                ctx.vars.segment(op->out.offset, op->out.size) = ctx.u.segment(op->input, op->out.size);
            } else {
                const Eigen::MatrixXd k = param_value(ctx, e);
                if (k.size() == 1) {
                    ctx.vars.segment(op->out.offset, op->out.size).setConstant(k(0, 0));
                } else {
                    ctx.vars.segment(op->out.offset, op->out.size) =
                        Eigen::Map<const Eigen::VectorXd>(k.data(), k.size());
                }
            }
        } else if (const auto* op = std::get_if<detail::ZeroOp>(&comp.op)) {
            ctx.vars.segment(op->out.offset, op->out.size).setZero();
        } else if (const auto* op = std::get_if<detail::LinearOp>(&comp.op)) {
            const Eigen::VectorXd in = op->from_state ? Eigen::VectorXd(ctx.x.segment(op->in.offset, op->in.size))
                                                      : Eigen::VectorXd(ctx.vars.segment(op->in.offset, op->in.size));
            ctx.vars.segment(op->out.offset, op->out.size) = op->sign * apply(ctx, e, op->use, in);
        } else if (const auto* op = std::get_if<detail::SumOp>(&comp.op)) {
            auto out = ctx.vars.segment(op->out.offset, op->out.size);
            out.setZero();
            for (const auto& [ref, coeff] : op->terms) out += coeff * ctx.vars.segment(ref.offset, ref.size);
        } else if (const auto* op = std::get_if<detail::FieldOp>(&comp.op)) {
            run_field(ctx, e, *op);
        }
    }
}

void check_sizes(const SystemData& data, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    if (x.size() != data.state_dim) {
        throw Error("state vector has size " + std::to_string(x.size()) + ", expected " +
                    std::to_string(data.state_dim));
    }
    if (u.size() != data.input_dim) {
        throw Error("input vector has size " + std::to_string(u.size()) + ", expected " +
                    std::to_string(data.input_dim));
    }
}

void finish(const SystemData& data, const Eigen::VectorXd& vars, Evaluation& out) {
    const int n = data.bond_size;
    out.efforts = vars.head(n);
    out.flows = vars.tail(n);
    out.state_derivative.setZero(data.state_dim);
    for (const auto& term : data.derivatives) {
        out.state_derivative.segment(term.state_offset, term.source.size) +=
            term.sign * vars.segment(term.source.offset, term.source.size);
    }
    out.element_power.setZero(static_cast<int>(data.element_ports.size()));
    for (std::size_t e = 0; e < data.element_ports.size(); ++e) {
        double p = 0.0;
        for (const auto& term : data.element_ports[e]) {
            const int off = data.bond_offset[term.bond];
            const int dim = data.bond_dim[term.bond];
            p += term.sign * out.efforts.segment(off, dim).dot(out.flows.segment(off, dim));
        }
        out.element_power[static_cast<int>(e)] = p;
    }
}

}  // namespace

const BondGraph& OdeSystem::graph() const { return data_->graph; }
const std::vector<StateSlot>& OdeSystem::states() const { return data_->states; }
int OdeSystem::state_dimension() const { return data_->state_dim; }
int OdeSystem::storage_state_count() const { return data_->storage_states; }
const std::vector<InputSlot>& OdeSystem::inputs() const { return data_->inputs; }
int OdeSystem::input_dimension() const { return data_->input_dim; }
const std::vector<ScheduleStep>& OdeSystem::schedule() const { return data_->steps; }
int OdeSystem::bond_offset(std::size_t bond) const { return data_->bond_offset.at(bond); }
int OdeSystem::bond_dimension(std::size_t bond) const { return data_->bond_dim.at(bond); }
int OdeSystem::bond_vector_size() const { return data_->bond_size; }
const std::vector<StorageEnergy>& OdeSystem::storage_energy() const { return data_->energy; }

Eigen::VectorXd OdeSystem::initial_state() const {
    Eigen::VectorXd x(data_->state_dim);
    for (const auto& slot : data_->states) x.segment(slot.offset, slot.size) = slot.initial;
    return x;
}

Eigen::VectorXd OdeSystem::default_inputs(double t) const {
    Eigen::VectorXd u(data_->input_dim);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(data_->state_dim);
    Eigen::VectorXd vars = Eigen::VectorXd::Zero(2 * data_->bond_size);
    const Context ctx{*data_, t, x, u, vars};
    for (std::size_t i = 0; i < data_->inputs.size(); ++i) {
        const auto& slot = data_->inputs[i];
        const Eigen::MatrixXd k = param_value(ctx, static_cast<std::size_t>(data_->input_element[i]));
        if (k.size() == 1) {
            u.segment(slot.offset, slot.size).setConstant(k(0, 0));
        } else {
            u.segment(slot.offset, slot.size) = Eigen::Map<const Eigen::VectorXd>(k.data(), k.size());
        }
    }
    return u;
}

void OdeSystem::evaluate(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Evaluation& out) const {
    check_sizes(*data_, x, u);
    Eigen::VectorXd vars = Eigen::VectorXd::Zero(2 * data_->bond_size);
    run_schedule(Context{*data_, t, x, u, vars});
    finish(*data_, vars, out);
}

Evaluation OdeSystem::evaluate(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    Evaluation out;
    evaluate(t, x, u, out);
    return out;
}

Eigen::VectorXd OdeSystem::derivative(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    check_sizes(*data_, x, u);
    Eigen::VectorXd vars = Eigen::VectorXd::Zero(2 * data_->bond_size);
    run_schedule(Context{*data_, t, x, u, vars});
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(data_->state_dim);
    for (const auto& term : data_->derivatives) {
        dx.segment(term.state_offset, term.source.size) += term.sign * vars.segment(term.source.offset, term.source.size);
    }
    return dx;
}

bool OdeSystem::has_modulation() const {
    for (std::size_t e = 0; e < data_->params.size(); ++e) {
        if (data_->param_used[e] && data_->params[e].modulated) return true;
    }
    return false;
}

OdeSystem OdeSystem::frozen(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    check_sizes(*data_, x, u);
    std::vector<std::optional<Eigen::MatrixXd>> captured(data_->params.size());
    Eigen::VectorXd vars = Eigen::VectorXd::Zero(2 * data_->bond_size);
    Context ctx{*data_, t, x, u, vars, &captured};
    run_schedule(ctx);
    auto copy = std::make_shared<SystemData>(*data_);
    for (std::size_t e = 0; e < captured.size(); ++e) {
        if (!captured[e]) continue;
        auto& p = copy->params[e];
        p.modulated = false;
        p.entries.clear();
        p.value = *captured[e];
        detail::refresh_constant(p);
        if (p.inverse.size() == 0 && p.value.rows() == p.value.cols()) {
            // Keep the error at evaluation time, with the element id.
            p.invertible = false;
        }
    }
    return OdeSystem(copy);
}

std::optional<int> OdeSystem::state_offset(std::string_view element, StateKind kind) const {
    for (const auto& slot : data_->states) {
        if (slot.element == element && slot.kind == kind) return slot.offset;
    }
    return std::nullopt;
}

namespace {

struct ProbeTarget {
    enum class Kind : std::uint8_t { BondEffort, BondFlow, ElementEffort, ElementFlow, Power, State } kind;
    std::size_t index = 0;  // bond or element
    int offset = 0;
    int size = 1;
    double sign = 1.0;
};

ProbeTarget resolve(const SystemData& data, const OdeSystem& sys, const Probe& probe) {
    const BondGraph& g = data.graph;
    if (auto b = g.bond_index(probe.target.element); b && probe.target.port == 0) {
        switch (probe.quantity) {
            case Quantity::Effort: return {ProbeTarget::Kind::BondEffort, *b, data.bond_offset[*b], data.bond_dim[*b]};
            case Quantity::Flow:
                return {ProbeTarget::Kind::BondFlow, *b, data.bond_size + data.bond_offset[*b], data.bond_dim[*b]};
            case Quantity::Power: return {ProbeTarget::Kind::Power, *b, 0, 1};
            default: throw Error("probe '" + probe.name() + "': bonds carry only effort, flow and power");
        }
    }
    const auto e = g.element_index(probe.target.element);
    if (!e) throw Error("probe '" + probe.name() + "' names nothing");
    const Element& el = g.elements()[*e];
    if (probe.quantity == Quantity::Power) return {ProbeTarget::Kind::Power, *e, -1, 1};
    // Port range in stacked element order.
    const auto& ports = data.element_ports[*e];
    std::vector<std::pair<int, std::size_t>> by_port;
    for (const auto& term : ports) {
        const Bond& bond = g.bonds()[term.bond];
        const int port = bond.head.element == el.id ? bond.head.port : bond.tail.port;
        by_port.emplace_back(port, term.bond);
    }
    std::sort(by_port.begin(), by_port.end());
    int start = 0;
    int size = 0;
    std::size_t bond = 0;
    bool found = false;
    for (const auto& [port, bnd] : by_port) {
        if (probe.target.port == 0 || port == probe.target.port) {
            if (!found) {
                bond = bnd;
                found = true;
            }
            size += data.bond_dim[bnd];
        } else if (!found) {
            start += data.bond_dim[bnd];
        }
    }
    if (!found) throw Error("probe '" + probe.name() + "' names an unconnected port");
    if (probe.quantity == Quantity::Momentum || probe.quantity == Quantity::Displacement) {
        const auto off = sys.state_offset(el.id, probe.quantity == Quantity::Momentum ? StateKind::Momentum
                                                                                     : StateKind::Displacement);
        if (!off) throw Error("probe '" + probe.name() + "' has no integrated state");
        return {ProbeTarget::Kind::State, *e, *off + start, size};
    }
    if (by_port.size() > 1 && probe.target.port == 0 && !is_field(el.kind)) {
        throw Error("probe '" + probe.name() + "' must name a port");
    }
    const Bond& b = g.bonds()[bond];
    const double sign = b.head.element == el.id ? 1.0 : -1.0;
    if (probe.quantity == Quantity::Effort) return {ProbeTarget::Kind::ElementEffort, *e, start, size, sign};
    return {ProbeTarget::Kind::ElementFlow, *e, start, size, sign};
}

}  // namespace

int OdeSystem::probe_dimension(const Probe& probe) const { return resolve(*data_, *this, probe).size; }

Eigen::VectorXd OdeSystem::probe_value(const Probe& probe, const Evaluation& ev, const Eigen::VectorXd& x) const {
    const ProbeTarget target = resolve(*data_, *this, probe);
    const BondGraph& g = data_->graph;
    switch (target.kind) {
        case ProbeTarget::Kind::BondEffort:
            return ev.efforts.segment(data_->bond_offset[target.index], target.size);
        case ProbeTarget::Kind::BondFlow: return ev.flows.segment(data_->bond_offset[target.index], target.size);
        case ProbeTarget::Kind::Power: {
            Eigen::VectorXd v(1);
            if (target.offset < 0) {
                v[0] = ev.element_power[static_cast<int>(target.index)];
            } else {
                const int off = data_->bond_offset[target.index];
                const int dim = data_->bond_dim[target.index];
                v[0] = ev.efforts.segment(off, dim).dot(ev.flows.segment(off, dim));
            }
            return v;
        }
        case ProbeTarget::Kind::State: return x.segment(target.offset, target.size);
        case ProbeTarget::Kind::ElementEffort:
        case ProbeTarget::Kind::ElementFlow: {
            // Element-local values, stacked over the requested ports.
            Eigen::VectorXd v(target.size);
            const Element& el = g.elements()[target.index];
            std::vector<std::pair<int, std::size_t>> by_port;
            for (const auto& term : data_->element_ports[target.index]) {
                const Bond& bond = g.bonds()[term.bond];
                by_port.emplace_back(bond.head.element == el.id ? bond.head.port : bond.tail.port, term.bond);
            }
            std::sort(by_port.begin(), by_port.end());
            int filled = 0;
            for (const auto& [port, bnd] : by_port) {
                if (probe.target.port != 0 && port != probe.target.port) continue;
                const int off = data_->bond_offset[bnd];
                const int dim = data_->bond_dim[bnd];
                const Bond& bond = g.bonds()[bnd];
                double sign = bond.head.element == el.id ? 1.0 : -1.0;
                if (is_two_port(el.kind) && port == 2) sign = -sign;
                if (target.kind == ProbeTarget::Kind::ElementEffort) {
                    v.segment(filled, dim) = ev.efforts.segment(off, dim);
                } else {
                    v.segment(filled, dim) = sign * ev.flows.segment(off, dim);
                }
                filled += dim;
            }
            return v;
        }
    }
    return {};
}

}  // namespace bondflow
