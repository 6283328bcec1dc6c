#pragma once

#include "bondflow/ode.hpp"

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bondflow::detail {

// Slice of the variable buffer. Efforts occupy [0, N), flows [N, 2N).
struct VarRef {
    int offset = 0;
    int size = 1;
    int var = -1;  // 2 * bond + (flow ? 1 : 0)
};

enum class MatrixUse : std::uint8_t { Identity, Direct, Transpose, Inverse, InverseTranspose };

struct Binding {
    enum class Kind : std::uint8_t { Value, Time, Signal };
    Kind kind = Kind::Value;
    double value = 0.0;
    int signal = -1;
};

struct BoundExpr {
    Expr expr;
    std::vector<Binding> bindings;
};

struct SignalRuntime {
    SignalKind kind = SignalKind::Expression;
    int var_offset = -1;    // Effort / Flow
    int state_offset = -1;  // Momentum / Displacement
    BoundExpr expr;         // Expression
};

struct ParamRuntime {
    bool present = false;
    bool modulated = false;
    int rows = 1;
    int cols = 1;
    Eigen::MatrixXd value;
    std::vector<BoundExpr> entries;  // row-major, modulated only
    // Constant parameters: cached inverse when invertible.
    bool invertible = false;
    Eigen::MatrixXd inverse;
};

struct SourceOp {
    VarRef out;
    int input = -1;  // offset into u, or -1 to evaluate the parameter
};

struct ZeroOp {
    VarRef out;
};

struct LinearOp {
    VarRef out;
    VarRef in;
    bool from_state = false;
    MatrixUse use = MatrixUse::Identity;
    double sign = 1.0;
};

struct SumOp {
    VarRef out;
    std::vector<std::pair<VarRef, double>> terms;
};

// Field relation producing the variables of one port. Ports are stacked
// [port 1; port 2] in the local (inward) convention.
struct FieldOp {
    enum class Mode : std::uint8_t { CapacitiveState, InertialState, Resistive };
    Mode mode = Mode::Resistive;
    int port = 0;  // 0 or 1: the port whose variable this op produces
    VarRef effort[2];
    VarRef flow[2];
    double sigma[2] = {1.0, 1.0};
    bool gives_effort[2] = {false, false};
    int state_offset = -1;
};

struct Computation {
    std::size_t element = 0;
    std::variant<SourceOp, ZeroOp, LinearOp, SumOp, FieldOp> op;
    std::vector<int> outs;   // var ids
    std::vector<int> reads;  // var ids, including modulation signals
    std::string relation;
};

struct DerivativeTerm {
    int state_offset = 0;
    VarRef source;
    double sign = 1.0;
};

struct PowerTerm {
    std::size_t bond = 0;
    double sign = 1.0;
};

struct SystemData {
    BondGraph graph;
    std::vector<int> bond_offset;
    std::vector<int> bond_dim;
    int bond_size = 0;

    std::vector<StateSlot> states;
    int state_dim = 0;
    int storage_states = 0;

    std::vector<InputSlot> inputs;
    std::vector<int> input_element;  // element index per input
    int input_dim = 0;

    std::vector<ParamRuntime> params;  // per element
    std::vector<bool> param_used;      // evaluated by the schedule
    std::vector<SignalRuntime> signals;

    std::vector<Computation> order;
    std::vector<ScheduleStep> steps;
    std::vector<DerivativeTerm> derivatives;
    std::vector<std::vector<PowerTerm>> element_ports;
    std::vector<StorageEnergy> energy;
};

void refresh_constant(ParamRuntime& p);

}  // namespace bondflow::detail
