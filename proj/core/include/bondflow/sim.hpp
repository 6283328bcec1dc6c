#pragma once

// Fixed-step RK4 integration with trajectory recording and energy accounting.

#include "bondflow/ode.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace bondflow {

struct SimConfig {
    double t_end = 1.0;
    double dt = 1e-3;
    int record_every = 1;
    /// Overrides for input sources, keyed by source id. The function value
    /// is broadcast over vector bonds. Unbound sources use their declared value.
    std::map<std::string, std::function<double(double)>, std::less<>> inputs;

    /// Throws Error when dt <= 0, t_end < 0 or record_every < 1.
    void check() const;
};

struct Trajectory {
    std::vector<std::string> bond_ids;
    std::vector<int> bond_dims;
    std::vector<std::string> element_ids;
    std::vector<ElementKind> element_kinds;
    /// Elements whose power is exported (power probes and `out = [power]`).
    std::vector<std::size_t> probed_elements;

    std::vector<double> times;
    Eigen::MatrixXd states;   // one row per recorded sample
    Eigen::MatrixXd efforts;  // bonds stacked
    Eigen::MatrixXd flows;
    Eigen::MatrixXd power;    // absorbed power per element

    /// Storages whose energy has no closed form (modulated parameters).
    std::vector<bool> modulated_storage;

    // Cumulative energies at each sample (trapezoid rule on the grid).
    std::vector<double> supplied;
    std::vector<double> stored;  // change of stored energy since t = 0
    std::vector<double> dissipated;
    std::vector<double> stored_closed_form;  // part of `stored` computed from states

    std::size_t size() const { return times.size(); }
};

struct EnergyBalance {
    double supplied = 0.0;
    double stored_delta = 0.0;
    double dissipated = 0.0;
    double residual = 0.0;
};

/// Throws EvalError (with time stamp) on runtime singularities and Error on
/// a non-finite state.
Trajectory simulate(const OdeSystem& system, const SimConfig& config);

/// Final energies. Power integrals use the trapezoid rule with Gregory end
/// corrections, which removes the O(h^2) endpoint error term.
EnergyBalance energy_report(const Trajectory& trajectory);

/// Header `t,e.<bond>,f.<bond>,...,P.<element>`; vector bonds expand to
/// `e.<bond>[k]` columns.
void write_csv(std::ostream& out, const Trajectory& trajectory);

/// 17 significant digits.
std::string format_fixed17(double value);

}  // namespace bondflow
