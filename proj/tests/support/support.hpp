#pragma once

// Shared fixtures and oracles for the test binaries.

#include "bondflow/dsl.hpp"
#include "bondflow/graph.hpp"
#include "bondflow/ode.hpp"

#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace bondflow::fixtures {

std::string corpus_path(std::string_view name);
std::string read_text(const std::string& path);

// Small hand-checkable graphs.
BondGraph lc_oscillator(double L = 1.0, double C = 1.0, double p0 = 1.0, double q0 = 0.0);
BondGraph rl_step(double E = 1.0, double R = 1.0, double L = 1.0);
BondGraph se_r_chain(double E, double R);
BondGraph se_i_r_chain();
BondGraph two_inertias();
BondGraph r_ring();
BondGraph resistive_loop();
BondGraph integrator(double K = 1.0);

/// SE -> 1 -> (TF|GY) -> junction -> storage, for 2-port checks. With
/// `zero_side` the far junction is a 0-junction holding a C storage,
/// otherwise a 1-junction holding an I storage; the two variants put the
/// 2-port into its two causal forms. The source is SE or SF, whichever keeps
/// the storage integral.
BondGraph two_port_fixture(ElementKind kind, bool zero_side, const Eigen::MatrixXd& K, const Eigen::MatrixXd& storage);

/// Filter model with m_ch and i_out pinned to constants.
BondGraph filter_constant(double R_f, double L_F, double C_F, double m_ch = 0.0, double i_out = 0.0, double u_in = 1.0);

/// Structurally valid random graph (validation passes, causality not
/// guaranteed). Exercises every DSL feature the emitter produces. With
/// `well_posed` there are no causal overrides and at most one scalar source,
/// so most results compile.
BondGraph random_graph(std::mt19937_64& rng, int index, bool well_posed = false);

/// Random expression over `names` that never divides by zero and never
/// takes the root of a negative number.
std::string random_expression(std::mt19937_64& rng, const std::vector<std::string>& names, int depth);

/// Independent recursive-descent evaluator for the modulation language.
double reference_eval(std::string_view text, const std::map<std::string, double>& env);

/// |a - b| / max(|a|, |b|, floor)
double rel_diff(double a, double b, double floor = 1e-300);

/// Signed power into each junction computed from bond orientation.
std::vector<double> junction_power_sums(const OdeSystem& sys, const Evaluation& ev, std::vector<double>* scale);

/// Random state with entries in [-1, 1], kept in a physically valid region
/// for the solenoid air gap.
Eigen::VectorXd random_state(const OdeSystem& sys, std::mt19937_64& rng);
Eigen::VectorXd random_inputs(const OdeSystem& sys, std::mt19937_64& rng);

/// True when every junction satisfies its stroke-count rule.
bool junction_rules_hold(const BondGraph& g, const CausalAssignment& a, std::string* failure = nullptr);

/// Slices of an Evaluation belonging to one bond.
Eigen::VectorXd bond_effort(const OdeSystem& sys, const Evaluation& ev, std::string_view bond);
Eigen::VectorXd bond_flow(const OdeSystem& sys, const Evaluation& ev, std::string_view bond);

/// Attaches an effort-measuring activated bond to `junction`.
BondGraph with_effort_tap(BondGraph g, std::string_view junction);

}  // namespace bondflow::fixtures
