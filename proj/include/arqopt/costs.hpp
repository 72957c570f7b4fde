#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arqopt/model.hpp"

namespace arqopt {

/// Symbolic cost kinds (the numbered cost functions of the underlying model,
/// named to avoid index drift):
///   throughput    - expected deliveries of the source this slot, rho_s(x,u)
///   energy        - 1 if the source transmits
///   success_slot  - 1 if the source's transmission succeeded (y(s) = 1)
///   service_start - 1 if the source's head packet is in its first service slot
///   queue_len     - the source's queue length
///   arrival       - expected admitted arrivals this slot: alpha_s unless the
///                   buffer is full and the head is not removed
///   unit          - constant 1 (constant denominator for plain time averages)
enum class CostKind {
    throughput,
    energy,
    success_slot,
    service_start,
    queue_len,
    arrival,
    unit,
};

const char* cost_kind_name(CostKind kind);
std::optional<CostKind> cost_kind_from_name(const std::string& name);

/**
 * A cost over (state, outcome, action), bound to a model.
 *
 * Stored in two forms: the expected form c(x,u) = sum_y z(x,y,u) P(y|x,u),
 * one value per (state, action) pair, which is what the optimization
 * consumes; and the realized form z(x,y,u) used by the simulator. Costs that
 * do not depend on the outcome share storage for both.
 */
class CostFunction {
public:
    CostFunction(std::string id, std::vector<double> expected);
    CostFunction(std::string id, std::vector<double> expected,
                 std::vector<double> realized_by_outcome, int source_count);

    const std::string& id() const { return id_; }
    bool outcome_dependent() const { return outcome_dependent_; }

    double expected(int pair) const { return expected_[pair]; }
    const std::vector<double>& expected_values() const { return expected_; }

    double realized(int pair, Outcome y) const {
        if (!outcome_dependent_) return expected_[pair];
        return realized_[(static_cast<std::size_t>(pair) << mask_bits_) + y.success_mask];
    }

    /// z^T omega
    double inner(std::span<const double> omega) const;

private:
    std::string id_;
    bool outcome_dependent_ = false;
    int mask_bits_ = 0;
    std::vector<double> expected_;
    std::vector<double> realized_;  // pair-major, indexed by success mask
};

/// Canonical id of a builtin cost: "<kind>_<source>" (1-based) or
/// "<kind>_total" for the sum over sources; plain "unit" for the constant.
std::string builtin_cost_id(CostKind kind, std::optional<int> source);

/// Builtin cost of one source (1-based), or the sum over all sources when
/// source is nullopt. Throws on unknown source index.
CostFunction builtin_cost(CostKind kind, std::optional<int> source, const Model& model);

/**
 * An event: a product subset of state x outcome x action space, given as
 * membership predicates over the decomposed per-source variables. Used both
 * to build sampling (indicator) costs and by the simulator's renewal
 * statistics.
 */
class Event {
public:
    using StatePred = std::function<bool(const NetworkState&)>;
    using OutcomePred = std::function<bool(Outcome)>;
    using ActionPred = std::function<bool(const JointAction&)>;

    Event(std::string id, StatePred state, OutcomePred outcome, ActionPred action);

    static Event all(std::string id);
    /// Head packet of `source` (1-based) is in its first service slot.
    static Event service_start(std::string id, int source);
    /// `source` (1-based) transmits.
    static Event transmit(std::string id, int source);
    /// At least `count` sources transmit simultaneously.
    static Event simultaneous_tx(std::string id, int count = 2);

    const std::string& id() const { return id_; }
    bool state_member(const NetworkState& x) const { return state_(x); }
    bool outcome_member(Outcome y) const { return outcome_(y); }
    bool action_member(const JointAction& u) const { return action_(u); }

private:
    std::string id_;
    StatePred state_;
    OutcomePred outcome_;
    ActionPred action_;
};

/// Indicator cost of the event: z(x,y,u) = 1 iff (x,y,u) is in the event set.
/// Its time average is the event's steady-state probability. Throws if any of
/// the three component sets is empty on the given model.
CostFunction event_cost(const Event& event, const Model& model);

/// A ratio-of-time-averages metric: beta * (num.omega / den.omega) + lambda,
/// optionally constrained to be <= bound.
struct Metric {
    std::string id;
    std::string numerator;
    std::string denominator;
    double beta = 1.0;
    double lambda = 0.0;
    std::optional<double> bound;
};

/// Thrown when a metric's denominator time-average is not positive.
class MetricUndefined : public std::runtime_error {
public:
    explicit MetricUndefined(const std::string& what) : std::runtime_error(what) {}
};

/// Named costs bound to one model.
class CostSet {
public:
    explicit CostSet(const Model& model) : model_(&model) {}

    const Model& model() const { return *model_; }

    void add(CostFunction cost);  // throws on duplicate id
    bool contains(const std::string& id) const { return costs_.count(id) > 0; }
    const CostFunction& at(const std::string& id) const;  // throws naming the id

    /// Registers the builtin if absent; returns its canonical id.
    std::string ensure_builtin(CostKind kind, std::optional<int> source);
    /// Registers the event cost if absent.
    void ensure_event(const Event& event);

    const std::map<std::string, CostFunction>& all() const { return costs_; }

private:
    const Model* model_;
    std::map<std::string, CostFunction> costs_;
};

/// beta * (num.omega / den.omega) + lambda; throws MetricUndefined when the
/// denominator inner product is below tolerance.
double metric_value(const Metric& metric, std::span<const double> omega, const CostSet& costs,
                    double denominator_tol = 1e-12);

}  // namespace arqopt
