#include "bondflow/causality.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace bondflow {

std::string_view describe(CausalRule rule) {
    switch (rule) {
        case CausalRule::SourceEffort: return "source imposes effort";
        case CausalRule::SourceFlow: return "source imposes flow";
        case CausalRule::UserOverride: return "user override";
        case CausalRule::JunctionRule: return "junction rule";
        case CausalRule::TwoPortRule: return "2-port rule";
        case CausalRule::IntegralPreference: return "integral preference";
        case CausalRule::DifferentialFallback: return "derivative causality forced";
        case CausalRule::ArbitraryCompletion: return "arbitrary completion";
        case CausalRule::ActivatedBond: return "activated bond";
    }
    return "?";
}

std::string DerivationStep::text() const {
    std::string s(describe(rule));
    if (!element.empty()) s += " at '" + element + "'";
    s += " fixes bond '" + bond + "'";
    return s;
}

std::string_view to_string(CausalIssue issue) {
    switch (issue) {
        case CausalIssue::Conflict: return "conflict";
        case CausalIssue::DerivativeCausality: return "derivative-causality";
        case CausalIssue::UnderDetermined: return "under-determined";
    }
    return "?";
}

StrokeEnd end_of(const Bond& bond, std::string_view element) {
    return bond.head.element == element ? StrokeEnd::AtHead : StrokeEnd::AtTail;
}

StrokeEnd CausalAssignment::stroke(std::string_view bond) const {
    for (std::size_t i = 0; i < bond_ids_.size(); ++i) {
        if (bond_ids_[i] == bond) return strokes_[i];
    }
    throw Error("unknown bond '" + std::string(bond) + "'");
}

std::size_t CausalAssignment::count(CausalIssue issue) const {
    return static_cast<std::size_t>(std::count_if(diagnostics_.begin(), diagnostics_.end(),
                                                  [&](const CausalDiagnostic& d) { return d.issue == issue; }));
}

std::size_t CausalAssignment::count(StorageClass cls) const {
    return static_cast<std::size_t>(std::count_if(storage_class_.begin(), storage_class_.end(),
                                                  [&](const auto& kv) { return kv.second == cls; }));
}

std::vector<DerivationStep> CausalAssignment::explain(std::string_view bond) const {
    std::size_t idx = bond_ids_.size();
    for (std::size_t i = 0; i < bond_ids_.size(); ++i) {
        if (bond_ids_[i] == bond) idx = i;
    }
    if (idx == bond_ids_.size()) throw Error("unknown bond '" + std::string(bond) + "'");
    std::set<std::size_t> seen;
    std::vector<std::size_t> stack{idx};
    while (!stack.empty()) {
        const std::size_t b = stack.back();
        stack.pop_back();
        if (!seen.insert(b).second || records_[b].sequence < 0) continue;
        for (auto t : records_[b].triggers) stack.push_back(t);
    }
    std::vector<std::size_t> order;
    for (auto b : seen) {
        if (records_[b].sequence >= 0) order.push_back(b);
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return records_[a].sequence < records_[b].sequence; });
    std::vector<DerivationStep> steps;
    for (auto b : order) steps.push_back(records_[b].step);
    return steps;
}

class CausalityAssigner {
public:
    explicit CausalityAssigner(const BondGraph& g) : g_(g) {
        const std::size_t nb = g.bonds().size();
        out_.bond_ids_.reserve(nb);
        for (const auto& b : g.bonds()) out_.bond_ids_.push_back(b.id);
        state_.strokes.assign(nb, StrokeEnd::Unassigned);
        state_.records.assign(nb, {});
        activated_bond_.assign(nb, false);
        attachments_.resize(g.elements().size());
        for (std::size_t b = 0; b < nb; ++b) {
            const Bond& bond = g.bonds()[b];
            for (const PortRef* ref : {&bond.tail, &bond.head}) {
                const auto e = g.element_index(ref->element);
                if (!e) continue;
                attachments_[*e].push_back({b, ref == &bond.head ? StrokeEnd::AtHead : StrokeEnd::AtTail, ref->port});
                if (is_activated(g.elements()[*e].kind)) activated_bond_[b] = true;
            }
        }
        for (auto& list : attachments_) {
            std::stable_sort(list.begin(), list.end(),
                             [](const Attachment& a, const Attachment& b) { return a.port < b.port; });
        }
    }

    CausalAssignment run() {
        apply_hard_constraints();
        propagate();
        assign_storages();
        complete();
        assign_activated();
        check_junctions();
        classify();
        out_.strokes_ = state_.strokes;
        out_.records_ = state_.records;
        out_.diagnostics_ = state_.diagnostics;
        out_.diagnostics_.insert(out_.diagnostics_.end(), storage_diagnostics_.begin(), storage_diagnostics_.end());
        return std::move(out_);
    }

private:
    struct Attachment {
        std::size_t bond;
        StrokeEnd end;
        int port;
    };

    struct State {
        std::vector<StrokeEnd> strokes;
        std::vector<CausalAssignment::Record> records;
        std::vector<CausalDiagnostic> diagnostics;
        std::set<std::string> conflict_keys;
        int sequence = 0;
    };

    static StrokeEnd opposite(StrokeEnd e) { return e == StrokeEnd::AtHead ? StrokeEnd::AtTail : StrokeEnd::AtHead; }

    bool assigned(const Attachment& a) const { return state_.strokes[a.bond] != StrokeEnd::Unassigned; }
    bool receives(const Attachment& a) const { return state_.strokes[a.bond] == a.end; }

    const std::string& element_id(std::size_t e) const { return g_.elements()[e].id; }
    const std::string& bond_id(std::size_t b) const { return g_.bonds()[b].id; }

    std::size_t conflict_count() const {
        return static_cast<std::size_t>(std::count_if(state_.diagnostics.begin(), state_.diagnostics.end(),
                                                      [](const auto& d) { return d.issue == CausalIssue::Conflict; }));
    }

    void conflict(const std::string& key, const std::string& location, std::string message,
                  std::vector<DerivationStep> chain = {}) {
        if (!state_.conflict_keys.insert(key).second) return;
        state_.diagnostics.push_back({CausalIssue::Conflict, location, std::move(message), std::move(chain)});
    }

    bool set_stroke(std::size_t bond, StrokeEnd want, CausalRule rule, const std::string& element,
                    std::vector<std::size_t> triggers) {
        StrokeEnd& s = state_.strokes[bond];
        if (s == StrokeEnd::Unassigned) {
            s = want;
            state_.records[bond] = {state_.sequence++, {rule, element, bond_id(bond)}, std::move(triggers)};
            changed_ = true;
            return true;
        }
        if (s == want) return true;
        const auto& prior = state_.records[bond].step;
        conflict("bond:" + bond_id(bond) + ":" + element, bond_id(bond),
                 "bond '" + bond_id(bond) + "': " + std::string(describe(rule)) +
                     (element.empty() ? "" : " at '" + element + "'") + " contradicts " +
                     std::string(describe(prior.rule)) + (prior.element.empty() ? "" : " at '" + prior.element + "'"),
                 {prior, {rule, element, bond_id(bond)}});
        return false;
    }

    // Element at attachment `a` receives effort (true) or flow (false).
    bool set(std::size_t element, const Attachment& a, bool effort_in, CausalRule rule,
             std::vector<std::size_t> triggers = {}) {
        return set_stroke(a.bond, effort_in ? a.end : opposite(a.end), rule, element_id(element), std::move(triggers));
    }

    const Attachment* port_attachment(std::size_t e, int port) const {
        for (const auto& a : attachments_[e]) {
            if (a.port == port) return &a;
        }
        return nullptr;
    }

    void apply_hard_constraints() {
        for (std::size_t b = 0; b < g_.bonds().size(); ++b) {
            const StrokeEnd s = g_.bonds()[b].stroke;
            if (s != StrokeEnd::Unassigned) set_stroke(b, s, CausalRule::UserOverride, "", {});
        }
        for (std::size_t e = 0; e < g_.elements().size(); ++e) {
            const Element& el = g_.elements()[e];
            const auto& att = attachments_[e];
            if (att.empty()) continue;
            switch (el.kind) {
                case ElementKind::SourceEffort: set(e, att[0], false, CausalRule::SourceEffort); break;
                case ElementKind::SourceFlow: set(e, att[0], true, CausalRule::SourceFlow); break;
                case ElementKind::Resistor:
                    if (el.causality == CausalityMode::Effort) set(e, att[0], true, CausalRule::UserOverride);
                    if (el.causality == CausalityMode::Flow) set(e, att[0], false, CausalRule::UserOverride);
                    break;
                case ElementKind::StorageI:
                case ElementKind::StorageC: {
                    if (el.causality == CausalityMode::Auto) break;
                    const bool integral = el.causality == CausalityMode::Integral;
                    const bool prefers_effort = el.kind == ElementKind::StorageI;
                    set(e, att[0], integral == prefers_effort, CausalRule::UserOverride);
                    break;
                }
                case ElementKind::Transformer: {
                    const auto* p1 = port_attachment(e, 1);
                    const auto* p2 = port_attachment(e, 2);
                    if (!p1 || !p2 || el.causality == CausalityMode::Auto) break;
                    const bool left = el.causality == CausalityMode::Left;
                    set(e, *p1, !left, CausalRule::UserOverride);
                    set(e, *p2, left, CausalRule::UserOverride);
                    break;
                }
                case ElementKind::Gyrator: {
                    const auto* p1 = port_attachment(e, 1);
                    const auto* p2 = port_attachment(e, 2);
                    if (!p1 || !p2 || el.causality == CausalityMode::Auto) break;
                    const bool inner = el.causality == CausalityMode::Inner;
                    set(e, *p1, inner, CausalRule::UserOverride);
                    set(e, *p2, inner, CausalRule::UserOverride);
                    break;
                }
                default: break;
            }
        }
    }

    void propagate() {
        do {
            changed_ = false;
            for (std::size_t e = 0; e < g_.elements().size(); ++e) apply_rule(e);
        } while (changed_);
    }

    std::vector<std::size_t> bonds_of(const std::vector<const Attachment*>& list) const {
        std::vector<std::size_t> out;
        for (const auto* a : list) out.push_back(a->bond);
        return out;
    }

    void apply_rule(std::size_t e) {
        const Element& el = g_.elements()[e];
        if (is_junction(el.kind)) {
            apply_junction(e, el.kind == ElementKind::Junction1);
        } else if (is_two_port(el.kind)) {
            const auto* p1 = port_attachment(e, 1);
            const auto* p2 = port_attachment(e, 2);
            if (!p1 || !p2) return;
            const bool same = el.kind == ElementKind::Gyrator;
            if (assigned(*p1) && !assigned(*p2)) {
                set(e, *p2, same ? receives(*p1) : !receives(*p1), CausalRule::TwoPortRule, {p1->bond});
            } else if (assigned(*p2) && !assigned(*p1)) {
                set(e, *p1, same ? receives(*p2) : !receives(*p2), CausalRule::TwoPortRule, {p2->bond});
            } else if (assigned(*p1) && assigned(*p2) && (receives(*p1) == receives(*p2)) != same) {
                conflict("element:" + el.id, el.id,
                         std::string(to_symbol(el.kind)) + " '" + el.id + "' needs " +
                             (same ? "the same" : "opposite") + " causality on both ports");
            }
        }
    }

    // Junction1: exactly one bond without stroke at the junction side (the
    // junction gives effort there). Junction0: exactly one bond with stroke at
    // the junction side.
    void apply_junction(std::size_t e, bool one_junction) {
        std::vector<const Attachment*> distinct, common, open;
        for (const auto& a : attachments_[e]) {
            if (activated_bond_[a.bond]) continue;
            if (!assigned(a)) {
                open.push_back(&a);
            } else if (receives(a) != one_junction) {
                distinct.push_back(&a);  // the single determining bond
            } else {
                common.push_back(&a);
            }
        }
        const std::string& id = element_id(e);
        const std::string what = one_junction ? "1-junction '" + id + "' needs exactly one bond without a stroke at its side"
                                              : "0-junction '" + id + "' needs exactly one bond with a stroke at its side";
        if (distinct.size() > 1) {
            conflict("element:" + id, id, what);
        } else if (distinct.size() == 1) {
            for (const auto* a : open) set(e, *a, one_junction, CausalRule::JunctionRule, {distinct[0]->bond});
        } else if (open.size() == 1) {
            set(e, *open[0], !one_junction, CausalRule::JunctionRule, bonds_of(common));
        } else if (open.empty() && !common.empty()) {
            conflict("element:" + id, id, what);
        }
    }

    // Bonds already fixed at the junctions next to `bond`: the context a
    // choice was made in.
    std::vector<std::size_t> context(std::size_t bond) const {
        std::vector<std::size_t> out;
        const Bond& b = g_.bonds()[bond];
        for (const PortRef* ref : {&b.tail, &b.head}) {
            const auto e = g_.element_index(ref->element);
            if (!e || !is_junction(g_.elements()[*e].kind)) continue;
            for (const auto& a : attachments_[*e]) {
                if (a.bond != bond && assigned(a) && !activated_bond_[a.bond]) out.push_back(a.bond);
            }
        }
        return out;
    }

    void assign_storages() {
        struct Candidate {
            std::size_t element;
            Attachment attachment;
            bool prefers_effort;
        };
        std::vector<Candidate> candidates;
        std::vector<std::size_t> order(g_.elements().size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return element_id(a) < element_id(b); });
        for (auto e : order) {
            const ElementKind k = g_.elements()[e].kind;
            if (!is_storage(k)) continue;
            const bool prefers_effort = k == ElementKind::StorageI || k == ElementKind::StorageIField;
            for (const auto& a : attachments_[e]) candidates.push_back({e, a, prefers_effort});
        }
        for (const auto& c : candidates) {
            if (assigned(c.attachment)) continue;
            const State saved = state_;
            const std::size_t before = conflict_count();
            set(c.element, c.attachment, c.prefers_effort, CausalRule::IntegralPreference, context(c.attachment.bond));
            propagate();
            if (conflict_count() > before) {
                state_ = saved;
                set(c.element, c.attachment, !c.prefers_effort, CausalRule::DifferentialFallback,
                    context(c.attachment.bond));
                propagate();
            }
        }
    }

    void complete() {
        for (;;) {
            std::size_t pick = g_.bonds().size();
            for (std::size_t b = 0; b < g_.bonds().size(); ++b) {
                if (state_.strokes[b] != StrokeEnd::Unassigned || activated_bond_[b]) continue;
                if (pick == g_.bonds().size() || bond_id(b) < bond_id(pick)) pick = b;
            }
            if (pick == g_.bonds().size()) return;
            const State saved = state_;
            const std::size_t before = conflict_count();
            const auto ctx = context(pick);
            set_stroke(pick, StrokeEnd::AtHead, CausalRule::ArbitraryCompletion, "", ctx);
            propagate();
            if (conflict_count() > before) {
                state_ = saved;
                set_stroke(pick, StrokeEnd::AtTail, CausalRule::ArbitraryCompletion, "", ctx);
                propagate();
            }
            state_.diagnostics.push_back({CausalIssue::UnderDetermined, bond_id(pick),
                                          "bond '" + bond_id(pick) +
                                              "' is not fixed by sources or storages; stroke placed by arbitrary completion",
                                          {}});
        }
    }

    void assign_activated() {
        for (std::size_t e = 0; e < g_.elements().size(); ++e) {
            const ElementKind k = g_.elements()[e].kind;
            if (!is_activated(k) || attachments_[e].empty()) continue;
            // Fixed by the element kind alone, so the trace has no antecedents.
            set(e, attachments_[e][0], k == ElementKind::ActivatedBondEffort, CausalRule::ActivatedBond, {});
        }
    }

    void check_junctions() {
        for (std::size_t e = 0; e < g_.elements().size(); ++e) {
            if (is_junction(g_.elements()[e].kind)) apply_junction(e, g_.elements()[e].kind == ElementKind::Junction1);
            else if (is_two_port(g_.elements()[e].kind)) apply_rule(e);
        }
    }

    void classify() {
        for (std::size_t e = 0; e < g_.elements().size(); ++e) {
            const Element& el = g_.elements()[e];
            if (!is_storage(el.kind)) continue;
            const bool prefers_effort = el.kind == ElementKind::StorageI || el.kind == ElementKind::StorageIField;
            bool integral = true;
            const Attachment* forced = nullptr;
            for (const auto& a : attachments_[e]) {
                if (receives(a) != prefers_effort) {
                    integral = false;
                    if (!forced) forced = &a;
                }
            }
            out_.storage_class_[el.id] = integral ? StorageClass::Integral : StorageClass::Differential;
            if (integral || !forced) continue;

            out_.records_ = state_.records;
            out_.strokes_ = state_.strokes;
            const auto chain = out_.explain(bond_id(forced->bond));
            std::vector<std::string> partners;
            for (const auto& step : chain) {
                if (step.rule != CausalRule::IntegralPreference || step.element == el.id) continue;
                if (std::find(partners.begin(), partners.end(), step.element) == partners.end()) {
                    partners.push_back(step.element);
                }
            }
            std::string message = "storage '" + el.id + "' is forced into derivative causality (" +
                                  (prefers_effort ? "e = K * df/dt" : "f = K * de/dt") + ")";
            if (!partners.empty()) {
                std::string list;
                for (const auto& p : partners) list += (list.empty() ? "'" : ", '") + p + "'";
                message += " by " + list +
                           "; its motion is not independent: subsume the storages into one fictive parameter "
                           "(merge the parameters of '" + el.id + "' with " + list + ")";
            } else {
                message += "; remove the forcing constraint or merge its parameter into a neighbouring storage";
            }
            storage_diagnostics_.push_back({CausalIssue::DerivativeCausality, el.id, message, chain});
        }
    }

    const BondGraph& g_;
    CausalAssignment out_;
    State state_;
    std::vector<std::vector<Attachment>> attachments_;
    std::vector<bool> activated_bond_;
    std::vector<CausalDiagnostic> storage_diagnostics_;
    bool changed_ = false;
};

CausalAssignment assign(const BondGraph& graph) {
    const auto diags = validate(graph);
    if (has_errors(diags)) throw Error("assign: graph has validation errors");
    return CausalityAssigner(graph).run();
}

}  // namespace bondflow
