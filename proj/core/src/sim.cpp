#include "bondflow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace bondflow {

void SimConfig::check() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error("t_end must be non-negative");
    if (record_every < 1) throw Error("record_every must be at least 1");
}

std::string format_fixed17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

class Inputs {
public:
    Inputs(const OdeSystem& sys, const SimConfig& cfg) : sys_(sys) {
        for (const auto& [id, fn] : cfg.inputs) {
            bool found = false;
            for (std::size_t i = 0; i < sys.inputs().size(); ++i) {
                if (sys.inputs()[i].source == id) {
                    overrides_.emplace_back(i, fn);
                    found = true;
                }
            }
            if (!found) throw Error("'" + id + "' is not an input source of the model");
        }
    }

    Eigen::VectorXd at(double t) const {
        Eigen::VectorXd u = sys_.default_inputs(t);
        for (const auto& [i, fn] : overrides_) {
            const auto& slot = sys_.inputs()[i];
            u.segment(slot.offset, slot.size).setConstant(fn(t));
        }
        return u;
    }

private:
    const OdeSystem& sys_;
    std::vector<std::pair<std::size_t, std::function<double(double)>>> overrides_;
};

double stored_energy(const OdeSystem& sys, const Eigen::VectorXd& x) {
    double e = 0.0;
    for (const auto& s : sys.storage_energy()) {
        if (s.modulated) continue;
        const Eigen::VectorXd v = x.segment(s.state_offset, s.size);
        e += 0.5 * v.dot(s.weight * v);
    }
    return e;
}

}  // namespace

Trajectory simulate(const OdeSystem& system, const SimConfig& config) {
    config.check();
    const Inputs inputs(system, config);
    const BondGraph& g = system.graph();

    Trajectory tr;
    for (const auto& b : g.bonds()) {
        tr.bond_ids.push_back(b.id);
        tr.bond_dims.push_back(b.dimension);
    }
    for (std::size_t e = 0; e < g.elements().size(); ++e) {
        const Element& el = g.elements()[e];
        tr.element_ids.push_back(el.id);
        tr.element_kinds.push_back(el.kind);
        bool probed = std::find(el.outputs.begin(), el.outputs.end(), Quantity::Power) != el.outputs.end();
        for (const auto& p : g.probes()) {
            probed = probed || (p.target.element == el.id && p.quantity == Quantity::Power);
        }
        if (probed) tr.probed_elements.push_back(e);
    }
    tr.modulated_storage.assign(g.elements().size(), false);
    for (const auto& s : system.storage_energy()) tr.modulated_storage[s.element] = s.modulated;
    const auto& modulated_storage = tr.modulated_storage;

    const double dt = config.dt;
    long long steps = static_cast<long long>(std::ceil(config.t_end / dt - 1e-9));
    if (steps < 0) steps = 0;
    const long long samples = steps / config.record_every + 1 + (steps % config.record_every != 0 ? 1 : 0);

    const int n = system.state_dimension();
    const int nb = system.bond_vector_size();
    const int ne = static_cast<int>(g.elements().size());
    tr.states.resize(samples, n);
    tr.efforts.resize(samples, nb);
    tr.flows.resize(samples, nb);
    tr.power.resize(samples, ne);
    tr.times.reserve(static_cast<std::size_t>(samples));

    Eigen::VectorXd x = system.initial_state();
    Eigen::VectorXd comp = Eigen::VectorXd::Zero(n);  // Kahan compensation
    const double e0 = stored_energy(system, x);
    double supplied = 0.0, dissipated = 0.0, modulated_stored = 0.0;
    double last_t = 0.0, last_supply = 0.0, last_diss = 0.0, last_mod = 0.0;
    Evaluation ev;

    auto record = [&](double t) {
        if (!x.allFinite()) throw Error("non-finite state at t=" + format_number(t));
        system.evaluate(t, x, inputs.at(t), ev);
        double p_supply = 0.0, p_diss = 0.0, p_mod = 0.0;
        for (int e = 0; e < ne; ++e) {
            const ElementKind k = g.elements()[static_cast<std::size_t>(e)].kind;
            const double p = ev.element_power[e];
            if (is_source(k)) p_supply -= p;
            if (k == ElementKind::Resistor || k == ElementKind::ResistorField) p_diss += p;
            if (modulated_storage[static_cast<std::size_t>(e)]) p_mod += p;
        }
        const auto row = static_cast<Eigen::Index>(tr.times.size());
        if (row > 0) {
            const double h = t - last_t;
            supplied += 0.5 * h * (p_supply + last_supply);
            dissipated += 0.5 * h * (p_diss + last_diss);
            modulated_stored += 0.5 * h * (p_mod + last_mod);
        }
        last_t = t;
        last_supply = p_supply;
        last_diss = p_diss;
        last_mod = p_mod;
        tr.times.push_back(t);
        tr.states.row(row) = x.transpose();
        tr.efforts.row(row) = ev.efforts.transpose();
        tr.flows.row(row) = ev.flows.transpose();
        tr.power.row(row) = ev.element_power.transpose();
        tr.supplied.push_back(supplied);
        tr.dissipated.push_back(dissipated);
        tr.stored_closed_form.push_back(stored_energy(system, x) - e0);
        tr.stored.push_back(tr.stored_closed_form.back() + modulated_stored);
    };

    record(0.0);
    for (long long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double t_next = k + 1 == steps ? config.t_end : static_cast<double>(k + 1) * dt;
        const double h = t_next - t;
        const Eigen::VectorXd u0 = inputs.at(t);
        const Eigen::VectorXd uh = inputs.at(t + 0.5 * h);
        const Eigen::VectorXd u1 = inputs.at(t_next);
        const Eigen::VectorXd k1 = system.derivative(t, x, u0);
        const Eigen::VectorXd k2 = system.derivative(t + 0.5 * h, x + 0.5 * h * k1, uh);
        const Eigen::VectorXd k3 = system.derivative(t + 0.5 * h, x + 0.5 * h * k2, uh);
        const Eigen::VectorXd k4 = system.derivative(t_next, x + h * k3, u1);
        const Eigen::VectorXd incr = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp;
        const Eigen::VectorXd sum = x + incr;
        comp = (sum - x) - incr;
        x = sum;
        if ((k + 1) % config.record_every == 0 || k + 1 == steps) record(t_next);
    }
    return tr;
}

namespace {

// Slope at t[0] of the parabola through three samples.
double end_slope(double t0, double t1, double t2, double p0, double p1, double p2) {
    const double h1 = t1 - t0;
    const double h2 = t2 - t0;
    return (p1 * h2 * h2 - p2 * h1 * h1 - p0 * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h2 - h1));
}

double integrate(const std::vector<double>& t, const std::vector<double>& p) {
    const std::size_t n = t.size();
    double sum = 0.0;
    for (std::size_t i = 1; i < n; ++i) sum += 0.5 * (t[i] - t[i - 1]) * (p[i] + p[i - 1]);
    if (n < 3) return sum;
    const double ha = t[1] - t[0];
    const double hb = t[n - 1] - t[n - 2];
    const double da = end_slope(t[0], t[1], t[2], p[0], p[1], p[2]);
    const double db = end_slope(t[n - 1], t[n - 2], t[n - 3], p[n - 1], p[n - 2], p[n - 3]);
    return sum + (ha * ha * da - hb * hb * db) / 12.0;
}

}  // namespace

EnergyBalance energy_report(const Trajectory& tr) {
    EnergyBalance b;
    if (tr.times.empty()) return b;
    const std::size_t n = tr.times.size();
    std::vector<double> supply(n, 0.0), diss(n, 0.0), mod(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        for (std::size_t e = 0; e < tr.element_kinds.size(); ++e) {
            const ElementKind k = tr.element_kinds[e];
            const double p = tr.power(row, static_cast<Eigen::Index>(e));
            if (is_source(k)) supply[r] -= p;
            if (k == ElementKind::Resistor || k == ElementKind::ResistorField) diss[r] += p;
            if (tr.modulated_storage[e]) mod[r] += p;
        }
    }
    b.supplied = integrate(tr.times, supply);
    b.dissipated = integrate(tr.times, diss);
    b.stored_delta = tr.stored_closed_form.back() + integrate(tr.times, mod);
    b.residual = b.supplied - b.stored_delta - b.dissipated;
    return b;
}

void write_csv(std::ostream& out, const Trajectory& tr) {
    out << 't';
    for (std::size_t b = 0; b < tr.bond_ids.size(); ++b) {
        for (const char* q : {"e.", "f."}) {
            if (tr.bond_dims[b] == 1) {
                out << ',' << q << tr.bond_ids[b];
            } else {
                for (int k = 0; k < tr.bond_dims[b]; ++k) out << ',' << q << tr.bond_ids[b] << '[' << k << ']';
            }
        }
    }
    for (auto e : tr.probed_elements) out << ",P." << tr.element_ids[e];
    out << '\n';
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        out << format_fixed17(tr.times[r]);
        int offset = 0;
        for (std::size_t b = 0; b < tr.bond_ids.size(); ++b) {
            for (const Eigen::MatrixXd* m : {&tr.efforts, &tr.flows}) {
                for (int k = 0; k < tr.bond_dims[b]; ++k) out << ',' << format_fixed17((*m)(row, offset + k));
            }
            offset += tr.bond_dims[b];
        }
        for (auto e : tr.probed_elements) out << ',' << format_fixed17(tr.power(row, static_cast<Eigen::Index>(e)));
        out << '\n';
    }
}

}  // namespace bondflow
