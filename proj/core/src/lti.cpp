#include "bondflow/lti.hpp"
#include "bondflow/sim.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace bondflow {

namespace {

std::vector<std::string> component_labels(const std::string& base, int size) {
    if (size == 1) return {base};
    std::vector<std::string> out;
    for (int k = 0; k < size; ++k) out.push_back(base + "[" + std::to_string(k) + "]");
    return out;
}

}  // namespace

StateSpace extract(const OdeSystem& system, std::span<const Probe> outputs, const OperatingPoint& op) {
    for (const auto& p : outputs) {
        if (p.quantity == Quantity::Power) throw Error("probe '" + p.name() + "' is not linear in the state");
    }
    StateSpace ss;
    const OdeSystem* sys = &system;
    std::optional<OdeSystem> frozen;
    if (system.has_modulation()) {
        const Eigen::VectorXd x0 = op.x ? *op.x : system.initial_state();
        const Eigen::VectorXd u0 = op.u ? *op.u : system.default_inputs(op.t);
        frozen.emplace(system.frozen(op.t, x0, u0));
        sys = &*frozen;
        ss.frozen_at = op.t;
    }
    const int n = sys->state_dimension();
    const int m = sys->input_dimension();
    int p = 0;
    for (const auto& probe : outputs) p += sys->probe_dimension(probe);

    auto run = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& dx, Eigen::VectorXd& y) {
        const Evaluation ev = sys->evaluate(op.t, x, u);
        dx = ev.state_derivative;
        y.resize(p);
        int row = 0;
        for (const auto& probe : outputs) {
            const Eigen::VectorXd v = sys->probe_value(probe, ev, x);
            y.segment(row, v.size()) = v;
            row += static_cast<int>(v.size());
        }
    };
    const Eigen::VectorXd zx = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd zu = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dx0, y0, dx, y;
    run(zx, zu, dx0, y0);
    ss.A.resize(n, n);
    ss.C.resize(p, n);
    for (int j = 0; j < n; ++j) {
        run(Eigen::VectorXd::Unit(n, j), zu, dx, y);
        ss.A.col(j) = dx - dx0;
        ss.C.col(j) = y - y0;
    }
    ss.B.resize(n, m);
    ss.D.resize(p, m);
    for (int j = 0; j < m; ++j) {
        run(zx, Eigen::VectorXd::Unit(m, j), dx, y);
        ss.B.col(j) = dx - dx0;
        ss.D.col(j) = y - y0;
    }
    if (!ss.A.allFinite() || !ss.B.allFinite() || !ss.C.allFinite() || !ss.D.allFinite()) {
        throw Error("state-space extraction produced non-finite entries");
    }
    for (const auto& slot : sys->states()) {
        for (auto& l : component_labels(slot.label(), slot.size)) ss.state_labels.push_back(l);
    }
    for (const auto& in : sys->inputs()) {
        for (auto& l : component_labels(in.source, in.size)) ss.input_labels.push_back(l);
    }
    for (const auto& probe : outputs) {
        for (auto& l : component_labels(probe.name(), sys->probe_dimension(probe))) ss.output_labels.push_back(l);
    }
    return ss;
}

std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& A) {
    const auto n = A.rows();
    std::vector<double> c(static_cast<std::size_t>(n + 1), 0.0);
    c[0] = 1.0;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        M = A * M + c[static_cast<std::size_t>(k - 1)] * Eigen::MatrixXd::Identity(n, n);
        c[static_cast<std::size_t>(k)] = -(A * M).trace() / static_cast<double>(k);
    }
    return c;
}

TransferFunction transfer_function(const StateSpace& ss, int input, int output) {
    const auto n = ss.A.rows();
    if (input < 0 || input >= ss.B.cols() || output < 0 || output >= ss.C.rows()) {
        if (!(n == 0 && input >= 0 && input < ss.D.cols() && output >= 0 && output < ss.D.rows())) {
            throw Error("transfer_function: input/output index out of range");
        }
    }
    if (n > 64) throw Error("transfer_function: state dimension above 64");
    TransferFunction tf;
    tf.denominator = characteristic_polynomial(ss.A);
    const double d = ss.D(output, input);
    // adj(sI - A) = sum_k M_k s^(n-k); M_1 = I, M_k = A M_(k-1) + c_(k-1) I.
    tf.numerator.assign(static_cast<std::size_t>(n + 1), 0.0);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        M = ss.A * M + tf.denominator[static_cast<std::size_t>(k - 1)] * Eigen::MatrixXd::Identity(n, n);
        tf.numerator[static_cast<std::size_t>(k)] = ss.C.row(output) * M * ss.B.col(input);
    }
    for (std::size_t i = 0; i < tf.numerator.size(); ++i) tf.numerator[i] += d * tf.denominator[i];
    return tf;
}

namespace {

void write_matrix(std::ostream& out, char name, const Eigen::MatrixXd& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_fixed17(m(r, c));
        out << '\n';
    }
}

void write_labels(std::ostream& out, const char* what, const std::vector<std::string>& labels) {
    out << "# " << what << ':';
    for (const auto& l : labels) out << ' ' << l;
    out << '\n';
}

}  // namespace

void write_state_space(std::ostream& out, const StateSpace& ss) {
    write_labels(out, "states", ss.state_labels);
    write_labels(out, "inputs", ss.input_labels);
    write_labels(out, "outputs", ss.output_labels);
    if (ss.frozen_at) out << "# frozen at t=" << format_fixed17(*ss.frozen_at) << '\n';
    write_matrix(out, 'A', ss.A);
    write_matrix(out, 'B', ss.B);
    write_matrix(out, 'C', ss.C);
    write_matrix(out, 'D', ss.D);
}

StateSpace read_state_space(std::istream& in) {
    StateSpace ss;
    std::string line;
    auto next = [&]() -> bool {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                std::istringstream ls(line.substr(1));
                std::string key;
                ls >> key;
                std::vector<std::string>* target = key == "states:"    ? &ss.state_labels
                                                   : key == "inputs:"  ? &ss.input_labels
                                                   : key == "outputs:" ? &ss.output_labels
                                                                       : nullptr;
                for (std::string w; target && ls >> w;) target->push_back(w);
                continue;
            }
            return true;
        }
        return false;
    };
    for (char name : {'A', 'B', 'C', 'D'}) {
        if (!next()) throw Error(std::string("state-space text: missing matrix ") + name);
        std::istringstream hs(line);
        char got = 0;
        long rows = -1, cols = -1;
        hs >> got >> rows >> cols;
        if (got != name || rows < 0 || cols < 0) throw Error("state-space text: bad header '" + line + "'");
        Eigen::MatrixXd m(rows, cols);
        for (long r = 0; r < rows; ++r) {
            if (!next()) throw Error(std::string("state-space text: truncated matrix ") + name);
            std::istringstream rs(line);
            for (long c = 0; c < cols; ++c) {
                std::string tok;
                if (!(rs >> tok)) throw Error(std::string("state-space text: short row in ") + name);
                m(r, c) = std::stod(tok);
            }
        }
        (name == 'A' ? ss.A : name == 'B' ? ss.B : name == 'C' ? ss.C : ss.D) = m;
    }
    return ss;
}

}  // namespace bondflow
