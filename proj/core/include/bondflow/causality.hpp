#pragma once

// Causality assignment by sequential constraint propagation:
//   1. sources, user overrides and per-element causality switches,
//   2. propagate through junctions and two-ports to a fixpoint,
//   3. storages in id order get integral causality (falling back to
//      derivative causality when propagation would conflict),
//   4. remaining bonds are completed smallest-id-first with the stroke at
//      the head, each noted as under-determined,
//   5. activated bonds last; they never count toward junction rules.

#include "bondflow/graph.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace bondflow {

enum class StorageClass : std::uint8_t { Integral, Differential };

enum class CausalRule : std::uint8_t {
    SourceEffort,
    SourceFlow,
    UserOverride,
    JunctionRule,
    TwoPortRule,
    IntegralPreference,
    DifferentialFallback,
    ArbitraryCompletion,
    ActivatedBond,
};

/// Short human-readable phrase, e.g. "source imposes effort".
std::string_view describe(CausalRule rule);

struct DerivationStep {
    CausalRule rule = CausalRule::ArbitraryCompletion;
    std::string element;  // element applying the rule (empty for bond overrides)
    std::string bond;     // bond whose stroke this step fixed

    std::string text() const;
    friend bool operator==(const DerivationStep&, const DerivationStep&) = default;
};

enum class CausalIssue : std::uint8_t { Conflict, DerivativeCausality, UnderDetermined };

std::string_view to_string(CausalIssue issue);

struct CausalDiagnostic {
    CausalIssue issue = CausalIssue::Conflict;
    std::string location;  // bond or element id
    std::string message;
    std::vector<DerivationStep> chain;

    friend bool operator==(const CausalDiagnostic&, const CausalDiagnostic&) = default;
};

class CausalAssignment {
public:
    /// Stroke of every bond, indexed like BondGraph::bonds().
    const std::vector<StrokeEnd>& strokes() const { return strokes_; }
    StrokeEnd stroke(std::string_view bond) const;

    const std::map<std::string, StorageClass>& storage_class() const { return storage_class_; }
    const std::vector<CausalDiagnostic>& diagnostics() const { return diagnostics_; }

    std::size_t count(CausalIssue issue) const;
    std::size_t count(StorageClass cls) const;
    bool has_conflicts() const { return count(CausalIssue::Conflict) > 0; }

    /// Ordered constraint applications that fixed a bond's stroke, oldest
    /// first. Throws Error for an unknown bond id.
    std::vector<DerivationStep> explain(std::string_view bond) const;

    friend bool operator==(const CausalAssignment&, const CausalAssignment&) = default;

private:
    friend class CausalityAssigner;

    struct Record {
        int sequence = -1;
        DerivationStep step;
        std::vector<std::size_t> triggers;

        friend bool operator==(const Record&, const Record&) = default;
    };

    std::vector<std::string> bond_ids_;
    std::vector<StrokeEnd> strokes_;
    std::vector<Record> records_;
    std::map<std::string, StorageClass> storage_class_;
    std::vector<CausalDiagnostic> diagnostics_;
};

/// Requires a graph without validation errors.
CausalAssignment assign(const BondGraph& graph);

inline std::vector<DerivationStep> explain(const CausalAssignment& assignment, std::string_view bond) {
    return assignment.explain(bond);
}

/// End of `bond` that touches `element`.
StrokeEnd end_of(const Bond& bond, std::string_view element);

/// True when the element at `end` of the bond receives effort under `stroke`.
inline bool receives_effort(StrokeEnd stroke, StrokeEnd end) { return stroke == end; }

}  // namespace bondflow
