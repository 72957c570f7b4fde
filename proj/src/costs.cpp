#include "arqopt/costs.hpp"

#include <cmath>
#include <stdexcept>

namespace arqopt {

const char* cost_kind_name(CostKind kind) {
    switch (kind) {
        case CostKind::throughput: return "throughput";
        case CostKind::energy: return "energy";
        case CostKind::success_slot: return "success_slot";
        case CostKind::service_start: return "service_start";
        case CostKind::queue_len: return "queue_len";
        case CostKind::arrival: return "arrival";
        case CostKind::unit: return "unit";
    }
    return "?";
}

std::optional<CostKind> cost_kind_from_name(const std::string& name) {
    for (CostKind k : {CostKind::throughput, CostKind::energy, CostKind::success_slot,
                       CostKind::service_start, CostKind::queue_len, CostKind::arrival,
                       CostKind::unit}) {
        if (name == cost_kind_name(k)) return k;
    }
    return std::nullopt;
}

CostFunction::CostFunction(std::string id, std::vector<double> expected)
    : id_(std::move(id)), expected_(std::move(expected)) {}

CostFunction::CostFunction(std::string id, std::vector<double> expected,
                           std::vector<double> realized_by_outcome, int source_count)
    : id_(std::move(id)),
      outcome_dependent_(true),
      mask_bits_(source_count),
      expected_(std::move(expected)),
      realized_(std::move(realized_by_outcome)) {
    if (source_count > 12) {
        throw std::invalid_argument("outcome-dependent costs support at most 12 sources");
    }
}

double CostFunction::inner(std::span<const double> omega) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < expected_.size(); ++i) acc += expected_[i] * omega[i];
    return acc;
}

std::string builtin_cost_id(CostKind kind, std::optional<int> source) {
    if (kind == CostKind::unit) return "unit";
    if (!source) return std::string(cost_kind_name(kind)) + "_total";
    return std::string(cost_kind_name(kind)) + "_" + std::to_string(*source);
}

namespace {

// Realized value of one source's cost for a given (pair, outcome).
double realized_source_cost(CostKind kind, int s, const Model& model, int pair, Outcome y) {
    const int xi = model.pair_state(pair);
    const int ai = model.pair_action(pair);
    const SourceState& xs = model.state(xi).source[s];
    const SourceAction& us = model.legal_actions(xi)[ai].source[s];
    const double alpha = model.config().sources[s].arrival_prob;
    switch (kind) {
        case CostKind::throughput:
            return model.success_probs(xi, ai)[s];  // 0 when idle
        case CostKind::energy:
            return us.transmit ? 1.0 : 0.0;
        case CostKind::success_slot:
            return y.success(s) ? 1.0 : 0.0;
        case CostKind::service_start:
            return (!xs.empty() && xs.service == 1) ? 1.0 : 0.0;
        case CostKind::queue_len:
            return xs.queue;
        case CostKind::arrival: {
            // expected admitted arrivals given (x, y, u): alpha unless the
            // buffer is full and the head is not removed this slot
            const bool removed = !xs.empty() && (y.success(s) || us.drop);
            const bool room = xs.queue - (removed ? 1 : 0) < model.buffer_size();
            return room ? alpha : 0.0;
        }
        case CostKind::unit:
            return 1.0;
    }
    return 0.0;
}

bool kind_outcome_dependent(CostKind kind) {
    return kind == CostKind::success_slot || kind == CostKind::arrival;
}

}  // namespace

CostFunction builtin_cost(CostKind kind, std::optional<int> source, const Model& model) {
    const int S = model.source_count();
    if (source && (*source < 1 || *source > S)) {
        throw std::invalid_argument("builtin cost: source index " + std::to_string(*source) +
                                    " out of range 1.." + std::to_string(S));
    }
    std::vector<int> srcs;
    if (kind == CostKind::unit) {
        // no per-source decomposition
    } else if (source) {
        srcs = {*source - 1};
    } else {
        for (int s = 0; s < S; ++s) srcs.push_back(s);
    }

    const int n = model.pair_count();
    const std::string id = builtin_cost_id(kind, source);

    if (kind == CostKind::unit) {
        return CostFunction(id, std::vector<double>(n, 1.0));
    }

    if (!kind_outcome_dependent(kind)) {
        std::vector<double> expected(n, 0.0);
        for (int pi = 0; pi < n; ++pi) {
            for (int s : srcs) expected[pi] += realized_source_cost(kind, s, model, pi, Outcome{});
        }
        return CostFunction(id, std::move(expected));
    }

    // outcome-dependent: build the realized table and reduce it to expected form
    std::vector<double> realized(static_cast<std::size_t>(n) << S, 0.0);
    std::vector<double> expected(n, 0.0);
    for (int pi = 0; pi < n; ++pi) {
        const int xi = model.pair_state(pi);
        const int ai = model.pair_action(pi);
        for (const Outcome y : model.consistent_outcomes(xi, ai)) {
            double z = 0.0;
            for (int s : srcs) z += realized_source_cost(kind, s, model, pi, y);
            realized[(static_cast<std::size_t>(pi) << S) + y.success_mask] = z;
            expected[pi] += z * model.outcome_prob(xi, ai, y);
        }
    }
    return CostFunction(id, std::move(expected), std::move(realized), S);
}

Event::Event(std::string id, StatePred state, OutcomePred outcome, ActionPred action)
    : id_(std::move(id)), state_(std::move(state)), outcome_(std::move(outcome)),
      action_(std::move(action)) {
    if (!state_ || !outcome_ || !action_) {
        throw std::invalid_argument("event '" + id_ + "': all three predicates required");
    }
}

Event Event::all(std::string id) {
    return Event(std::move(id), [](const NetworkState&) { return true; },
                 [](Outcome) { return true; }, [](const JointAction&) { return true; });
}

Event Event::service_start(std::string id, int source) {
    const int s = source - 1;
    return Event(std::move(id),
                 [s](const NetworkState& x) {
                     return !x.source[s].empty() && x.source[s].service == 1;
                 },
                 [](Outcome) { return true; }, [](const JointAction&) { return true; });
}

Event Event::transmit(std::string id, int source) {
    const int s = source - 1;
    return Event(std::move(id), [](const NetworkState&) { return true; },
                 [](Outcome) { return true; },
                 [s](const JointAction& u) { return u.source[s].transmit; });
}

Event Event::simultaneous_tx(std::string id, int count) {
    return Event(std::move(id), [](const NetworkState&) { return true; },
                 [](Outcome) { return true; }, [count](const JointAction& u) {
                     return __builtin_popcount(u.tx_mask) >= count;
                 });
}

CostFunction event_cost(const Event& event, const Model& model) {
    const int S = model.source_count();
    const int n = model.pair_count();

    bool any_state = false, any_action = false, any_outcome = false;
    for (int xi = 0; xi < model.state_count() && !any_state; ++xi) {
        any_state = event.state_member(model.state(xi));
    }
    for (std::uint32_t m = 0; m < (1u << S) && !any_outcome; ++m) {
        any_outcome = event.outcome_member(Outcome{m});
    }
    for (int xi = 0; xi < model.state_count() && !any_action; ++xi) {
        for (const JointAction& u : model.legal_actions(xi)) {
            if (event.action_member(u)) {
                any_action = true;
                break;
            }
        }
    }
    if (!any_state || !any_outcome || !any_action) {
        throw std::invalid_argument("event '" + event.id() + "': empty " +
                                    (!any_state ? "state" : !any_outcome ? "outcome" : "action") +
                                    " set");
    }

    std::vector<double> realized(static_cast<std::size_t>(n) << S, 0.0);
    std::vector<double> expected(n, 0.0);
    for (int pi = 0; pi < n; ++pi) {
        const int xi = model.pair_state(pi);
        const int ai = model.pair_action(pi);
        if (!event.state_member(model.state(xi)) ||
            !event.action_member(model.legal_actions(xi)[ai])) {
            continue;
        }
        for (const Outcome y : model.consistent_outcomes(xi, ai)) {
            if (!event.outcome_member(y)) continue;
            realized[(static_cast<std::size_t>(pi) << S) + y.success_mask] = 1.0;
            expected[pi] += model.outcome_prob(xi, ai, y);
        }
    }
    return CostFunction("event_" + event.id(), std::move(expected), std::move(realized), S);
}

void CostSet::add(CostFunction cost) {
    const std::string id = cost.id();
    if (!costs_.emplace(id, std::move(cost)).second) {
        throw std::invalid_argument("cost '" + id + "' already defined");
    }
}

const CostFunction& CostSet::at(const std::string& id) const {
    auto it = costs_.find(id);
    if (it == costs_.end()) throw std::invalid_argument("unknown cost id '" + id + "'");
    return it->second;
}

std::string CostSet::ensure_builtin(CostKind kind, std::optional<int> source) {
    std::string id = builtin_cost_id(kind, source);
    if (!contains(id)) add(builtin_cost(kind, source, *model_));
    return id;
}

void CostSet::ensure_event(const Event& event) {
    if (!contains("event_" + event.id())) add(event_cost(event, *model_));
}

double metric_value(const Metric& metric, std::span<const double> omega, const CostSet& costs,
                    double denominator_tol) {
    const double num = costs.at(metric.numerator).inner(omega);
    const double den = costs.at(metric.denominator).inner(omega);
    if (den <= denominator_tol) {
        throw MetricUndefined("metric '" + metric.id + "': denominator '" + metric.denominator +
                              "' has non-positive time average (" + std::to_string(den) + ")");
    }
    return metric.beta * num / den + metric.lambda;
}

}  // namespace arqopt
