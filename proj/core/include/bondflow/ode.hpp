#pragma once

// Compiled ODE system: state layout, topologically sorted computation
// schedule over bond variables, and the evaluation entry points.

#include "bondflow/causality.hpp"
#include "bondflow/graph.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bondflow {

class CompileError : public Error {
public:
    enum class Kind : std::uint8_t { AlgebraicLoop, DifferentialCausality, CausalConflict, Invalid };

    CompileError(Kind kind, const std::string& message, std::vector<std::string> subjects = {});

    Kind kind() const { return kind_; }
    /// Cycle bond ids for AlgebraicLoop, storage ids for DifferentialCausality.
    const std::vector<std::string>& subjects() const { return subjects_; }

private:
    Kind kind_;
    std::vector<std::string> subjects_;
};

/// Singular parameter or failed expression evaluation at run time.
class EvalError : public Error {
public:
    EvalError(std::string element, double time, const std::string& message);
    const std::string& element() const { return element_; }
    double time() const { return time_; }

private:
    std::string element_;
    double time_;
};

enum class StateKind : std::uint8_t { Momentum, Displacement };

struct StateSlot {
    std::string element;
    StateKind kind = StateKind::Momentum;
    bool auxiliary = false;  // integral kept only for probes/signals
    int offset = 0;
    int size = 1;
    Eigen::VectorXd initial;

    /// "p.<id>" / "q.<id>"
    std::string label() const;
};

struct InputSlot {
    std::string source;
    int offset = 0;
    int size = 1;
};

/// One primitive computation of the schedule, described for diagnostics.
struct ScheduleStep {
    std::string element;
    std::string relation;                // e.g. "f.b2 = 1/K * p"
    std::vector<std::string> outputs;    // "e.<bond>" / "f.<bond>"
    std::vector<std::string> reads;
};

struct Evaluation {
    Eigen::VectorXd state_derivative;
    Eigen::VectorXd efforts;        // bonds stacked in declaration order
    Eigen::VectorXd flows;
    Eigen::VectorXd element_power;  // absorbed, per element in declaration order
};

/// Energy bookkeeping for one storage with a constant parameter.
struct StorageEnergy {
    std::size_t element = 0;
    int state_offset = 0;
    int size = 1;
    bool modulated = false;
    /// Stored energy is 1/2 x' W x.
    Eigen::MatrixXd weight;
};

namespace detail {
struct SystemData;
}

class OdeSystem {
public:
    const BondGraph& graph() const;

    const std::vector<StateSlot>& states() const;
    /// Total scalar state count, including auxiliary integrals.
    int state_dimension() const;
    /// Scalar states belonging to storages (excluding auxiliary integrals).
    int storage_state_count() const;

    const std::vector<InputSlot>& inputs() const;
    int input_dimension() const;

    const std::vector<ScheduleStep>& schedule() const;

    int bond_offset(std::size_t bond) const;
    int bond_dimension(std::size_t bond) const;
    int bond_vector_size() const;

    Eigen::VectorXd initial_state() const;
    /// Input values from each input source's declared value at time t.
    Eigen::VectorXd default_inputs(double t) const;

    Evaluation evaluate(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
    void evaluate(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Evaluation& out) const;
    Eigen::VectorXd derivative(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

    /// True when some scheduled parameter depends on time or signals.
    bool has_modulation() const;
    /// Copy with every modulated parameter replaced by its value at (t, x, u).
    OdeSystem frozen(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

    /// Scalar size of a probe's value. Throws Error for unresolvable probes.
    int probe_dimension(const Probe& probe) const;
    Eigen::VectorXd probe_value(const Probe& probe, const Evaluation& ev, const Eigen::VectorXd& x) const;

    const std::vector<StorageEnergy>& storage_energy() const;

    /// Offset of a state slot, or nullopt when the quantity is not integrated.
    std::optional<int> state_offset(std::string_view element, StateKind kind) const;

private:
    friend OdeSystem derive(const BondGraph& graph, const CausalAssignment& assignment);
    explicit OdeSystem(std::shared_ptr<const detail::SystemData> data) : data_(std::move(data)) {}
    std::shared_ptr<const detail::SystemData> data_;
};

/// Throws CompileError on conflicts, derivative causality or algebraic loops.
OdeSystem derive(const BondGraph& graph, const CausalAssignment& assignment);

/// validate + assign + derive; throws CompileError when validation fails.
OdeSystem compile(const BondGraph& graph);

}  // namespace bondflow
