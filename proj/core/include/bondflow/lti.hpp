#pragma once

// Exact state-space extraction and transfer functions.

#include "bondflow/ode.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bondflow {

struct StateSpace {
    Eigen::MatrixXd A, B, C, D;
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;
    /// Modulated parameters were frozen at this time.
    std::optional<double> frozen_at;
};

struct OperatingPoint {
    double t = 0.0;
    std::optional<Eigen::VectorXd> x;  // defaults to the initial state
    std::optional<Eigen::VectorXd> u;  // defaults to the declared inputs at t
};

/// Reads (A, B, C, D) off the affine schedule with unit basis vectors.
/// Modulated parameters are frozen at the operating point first. Power
/// probes are rejected since they are not linear in the state.
StateSpace extract(const OdeSystem& system, std::span<const Probe> outputs, const OperatingPoint& op = {});

struct TransferFunction {
    std::vector<double> numerator;    // descending powers of s
    std::vector<double> denominator;  // monic characteristic polynomial of A
};

/// C (sI - A)^-1 B + D for one input/output pair (Faddeev-LeVerrier).
TransferFunction transfer_function(const StateSpace& ss, int input, int output);

/// Characteristic polynomial coefficients of A, descending, leading 1.
std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& A);

/// `A n n` then n rows, likewise B, C, D; 17 significant digits.
void write_state_space(std::ostream& out, const StateSpace& ss);
/// Inverse of write_state_space (labels are kept from `#` lines).
StateSpace read_state_space(std::istream& in);

}  // namespace bondflow
