#pragma once

// Bond-graph data model: elements, bonds, modulation signals and probes.
//
// Sign conventions used throughout the library:
//   * A bond's half arrow points tail -> head; P = e . f is positive in that
//     direction.
//   * The causal stroke sits at the end that *receives effort*; the element
//     at the other end receives flow.
//   * Element-local flow is the bond flow taken positive into the element
//     (flipped when the element is the bond's tail). Two-ports are the
//     exception: port 1 counts inward, port 2 outward, so e1.f1 = e2.f2.

#include "bondflow/error.hpp"
#include "bondflow/expr.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bondflow {

enum class ElementKind : std::uint8_t {
    SourceEffort,
    SourceFlow,
    Resistor,
    StorageI,
    StorageC,
    Transformer,
    Gyrator,
    Junction0,
    Junction1,
    ResistorField,
    StorageCField,
    StorageIField,
    ActivatedBondEffort,
    ActivatedBondFlow,
};

inline constexpr std::size_t kElementKindCount = 14;

/// Canonical DSL symbol: SE, SF, R, I, C, TF, GY, 0, 1, RF, CF, IF, ABe, ABf.
std::string_view to_symbol(ElementKind kind);

/// Accepts canonical symbols plus the M-prefixed modulated spellings
/// (MSE, MSF, MR, MTF, MGY, MRF, MCF, MIF) and the destination aliases DF
/// (effort source seen as flow destination) and DE.
std::optional<ElementKind> kind_from_symbol(std::string_view symbol);

/// 1 for one-ports, 2 for TF/GY/fields, 0 for junctions (any number >= 2).
int port_count(ElementKind kind);

bool is_junction(ElementKind kind);
bool is_source(ElementKind kind);
bool is_storage(ElementKind kind);
bool is_field(ElementKind kind);
bool is_two_port(ElementKind kind);
bool is_activated(ElementKind kind);
bool is_one_port(ElementKind kind);

enum class Quantity : std::uint8_t { Effort, Flow, Power, Momentum, Displacement };

std::string_view to_string(Quantity q);
std::optional<Quantity> quantity_from_string(std::string_view s);

enum class StrokeEnd : std::uint8_t { Unassigned, AtHead, AtTail };

/// Per-element causality switch-over. Which values apply depends on the kind:
/// R takes Effort/Flow (the variable it receives), storages Integral or
/// Differential, TF Left/Right, GY Outer/Inner.
enum class CausalityMode : std::uint8_t {
    Auto, Effort, Flow, Integral, Differential, Left, Right, Outer, Inner,
};

std::string_view to_string(CausalityMode mode);
std::optional<CausalityMode> causality_mode_from_string(std::string_view s);
bool causality_mode_allowed(ElementKind kind, CausalityMode mode);

/// Scalar, vector (rows x 1) or matrix parameter whose entries are
/// expressions. An entry is constant when it references only `param`
/// constants; otherwise the parameter is modulated.
struct Parameter {
    int rows = 1;
    int cols = 1;
    std::vector<Expr> entries;  // row-major
    std::string unit;

    static Parameter scalar(double value);
    static Parameter scalar(Expr value);
    static Parameter column(std::vector<Expr> values);
    static Parameter matrix(int rows, int cols, std::vector<Expr> row_major);
    static Parameter from(const Eigen::MatrixXd& value);

    bool is_scalar() const { return rows == 1 && cols == 1; }
    bool is_column() const { return cols == 1; }
    bool is_square() const { return rows == cols; }

    const Expr& at(int r, int c) const { return entries[static_cast<std::size_t>(r * cols + c)]; }

    friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Element end of a bond. Port 0 addresses one-ports and junctions; two-ports
/// and fields use ports 1 and 2.
struct PortRef {
    std::string element;
    int port = 0;

    friend bool operator==(const PortRef&, const PortRef&) = default;
};

struct Bond {
    std::string id;
    PortRef tail;
    PortRef head;
    int dimension = 1;
    /// User-fixed stroke; Unassigned leaves the choice to causality assignment.
    StrokeEnd stroke = StrokeEnd::Unassigned;
    std::string label;

    friend bool operator==(const Bond&, const Bond&) = default;
};

struct Element {
    std::string id;
    ElementKind kind = ElementKind::Junction1;
    std::optional<Parameter> parameter;  // k (value for sources)
    std::optional<Parameter> initial;    // initial momentum / displacement
    CausalityMode causality = CausalityMode::Auto;
    std::vector<Quantity> outputs;       // extra outputs: power, momentum, displacement
    std::string label;

    friend bool operator==(const Element&, const Element&) = default;
};

enum class SignalKind : std::uint8_t { Effort, Flow, Momentum, Displacement, Expression };

/// Named scalar available to modulation expressions.
struct Signal {
    std::string name;
    SignalKind kind = SignalKind::Expression;
    PortRef target;      // bond (Effort/Flow) or storage element (Momentum/Displacement)
    Expr expression;     // Expression kind only

    friend bool operator==(const Signal&, const Signal&) = default;
};

/// `param name = expr` : a named constant.
struct Constant {
    std::string name;
    Expr value;

    friend bool operator==(const Constant&, const Constant&) = default;
};

struct Probe {
    PortRef target;  // bond id or element id
    Quantity quantity = Quantity::Effort;

    /// "<target>[.port].<quantity>"
    std::string name() const;

    friend bool operator==(const Probe&, const Probe&) = default;
};

enum class Severity : std::uint8_t { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string rule;
    std::string subject;
    std::string message;

    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

std::string to_string(const Diagnostic& d);
bool has_errors(std::span<const Diagnostic> diagnostics);

class BondGraph {
public:
    explicit BondGraph(std::string name = "model");

    const std::string& name() const { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    Element& add_element(Element element);
    Bond& add_bond(Bond bond);
    void add_signal(Signal signal);
    void add_constant(Constant constant);
    void add_probe(Probe probe);

    // Construction helpers used by the model builders.
    Element& add(ElementKind kind, std::string id);
    Element& add(ElementKind kind, std::string id, Parameter parameter);
    Bond& connect(std::string id, PortRef tail, PortRef head, int dimension = 1);

    const std::vector<Element>& elements() const { return elements_; }
    const std::vector<Bond>& bonds() const { return bonds_; }
    const std::vector<Signal>& signals() const { return signals_; }
    const std::vector<Constant>& constants() const { return constants_; }
    const std::vector<Probe>& probes() const { return probes_; }

    std::vector<Element>& mutable_elements() { return elements_; }
    std::vector<Bond>& mutable_bonds() { return bonds_; }

    std::optional<std::size_t> element_index(std::string_view id) const;
    std::optional<std::size_t> bond_index(std::string_view id) const;
    const Element* find_element(std::string_view id) const;
    const Bond* find_bond(std::string_view id) const;
    const Signal* find_signal(std::string_view name) const;
    const Constant* find_constant(std::string_view name) const;

    /// Bond indices touching an element, in declaration order.
    std::vector<std::size_t> bonds_at(std::size_t element) const;

    /// Bond attached to a given port of an element (port 0 for one-ports).
    std::optional<std::size_t> bond_at_port(std::size_t element, int port) const;

    /// True when some entry references `t` or a declared signal.
    bool is_modulated(const Parameter& parameter) const;
    bool is_modulated(const Expr& expr) const;

    /// `param` constants evaluated in declaration order. Throws Error when a
    /// constant references anything but earlier constants.
    std::map<std::string, double, std::less<>> constant_values() const;

    /// Value of a parameter built from constants only.
    Eigen::MatrixXd constant_value(const Parameter& parameter) const;

private:
    std::string name_;
    std::vector<Element> elements_;
    std::vector<Bond> bonds_;
    std::vector<Signal> signals_;
    std::vector<Constant> constants_;
    std::vector<Probe> probes_;
    std::unordered_map<std::string, std::size_t> element_lookup_;
    std::unordered_map<std::string, std::size_t> bond_lookup_;
};

/// Structural checks independent of causality. Empty result iff the graph
/// satisfies every structural invariant; warnings never block later stages.
std::vector<Diagnostic> validate(const BondGraph& graph);

/// e . f; throws Error on dimension mismatch.
double bond_power(std::span<const double> effort, std::span<const double> flow);

/// Names of the validation rules, shared with tests and the CLI.
namespace rules {
inline constexpr std::string_view kDuplicateId = "duplicate-id";
inline constexpr std::string_view kUnknownElement = "unknown-element";
inline constexpr std::string_view kPort = "port";
inline constexpr std::string_view kUnconnected = "unconnected-port";
inline constexpr std::string_view kJunctionRule = "junction-rule";
inline constexpr std::string_view kParameterMismatch = "parameter-mismatch";
inline constexpr std::string_view kMissingParameter = "missing-parameter";
inline constexpr std::string_view kUndeclaredName = "undeclared-name";
inline constexpr std::string_view kSignalSource = "signal-source";
inline constexpr std::string_view kSignalCycle = "signal-cycle";
inline constexpr std::string_view kCausalityOverride = "causality-override";
inline constexpr std::string_view kProbe = "probe-target";
inline constexpr std::string_view kOutput = "invalid-output";
inline constexpr std::string_view kNonPositive = "nonpositive-parameter";
inline constexpr std::string_view kConstant = "param-not-constant";
inline constexpr std::string_view kDimension = "dimension";
}  // namespace rules

inline constexpr std::string_view kJunctionRuleMessage = "non-junction elements must connect through nodes";

}  // namespace bondflow
