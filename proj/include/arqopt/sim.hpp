#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "arqopt/costs.hpp"
#include "arqopt/lfp.hpp"
#include "arqopt/model.hpp"

namespace arqopt {

struct SimConfig {
    std::uint64_t slots = 1000000;
    std::uint64_t seed = 1;
    std::uint64_t burn_in = 10000;  // slots discarded before accumulation
    int batches = 20;               // batch-means groups for standard errors

    void validate() const;  // slots > burn_in, batches >= 2
};

/// Ratio estimate with a batch-means standard error.
struct RatioEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int batches = 0;
};

/// Per-source counters over the accumulation window.
struct SourceCounters {
    std::uint64_t transmissions = 0;
    std::uint64_t successes = 0;
    std::uint64_t drops_failed = 0;      // removals with drop flag and no success
    std::uint64_t removals = 0;
    std::uint64_t services_started = 0;  // slots with head service == 1
    std::uint64_t arrivals_admitted = 0;
    std::uint64_t arrivals_blocked = 0;
    std::uint64_t queue_len_sum = 0;
    // tagged-packet delay (admission slot to removal slot, both in window)
    std::uint64_t departed_packets = 0;
    std::uint64_t sojourn_sum = 0;
};

/**
 * Sample-path accumulation of time averages. Holds per-pair visit counts,
 * per-batch realized sums of every tracked cost, and per-source counters.
 * Bit-for-bit reproducible given (model, policy, costs, config).
 */
class MetricsAccumulator {
public:
    std::uint64_t slots() const { return slots_; }
    int batches() const { return static_cast<int>(batch_slots_.size()); }

    const std::vector<std::uint64_t>& pair_visits() const { return pair_visits_; }
    double pair_frequency(int pair) const {
        return static_cast<double>(pair_visits_[pair]) / static_cast<double>(slots_);
    }

    /// Time average of a tracked cost's realized values.
    double time_average(const std::string& cost_id) const;
    /// Per-batch sums of a tracked cost.
    const std::vector<double>& batch_sums(const std::string& cost_id) const;

    const std::vector<SourceCounters>& counters() const { return counters_; }
    int start_queue_total(int source) const { return start_queue_[source]; }
    int end_queue_total(int source) const { return end_queue_[source]; }

    /// Mean tagged-packet sojourn with a batch-means standard error
    /// (batched by departure slot).
    RatioEstimate mean_sojourn(int source) const;

private:
    friend MetricsAccumulator simulate(const Model&, const Policy&, const CostSet&,
                                       const SimConfig&);
    std::uint64_t slots_ = 0;
    std::vector<std::uint64_t> batch_slots_;
    std::vector<std::uint64_t> pair_visits_;
    std::map<std::string, std::vector<double>> cost_batch_sums_;
    std::vector<SourceCounters> counters_;
    std::vector<int> start_queue_;
    std::vector<int> end_queue_;
    std::vector<std::vector<double>> sojourn_batch_sums_;    // [source][batch]
    std::vector<std::vector<double>> sojourn_batch_counts_;  // [source][batch]
};

/// One simulated slot, as seen by trace consumers.
struct SlotRecord {
    std::uint64_t slot = 0;
    int state = 0;
    int action = 0;
    int pair = 0;
    Outcome outcome;
    std::uint32_t arrival_mask = 0;   // arrivals drawn
    std::uint32_t removed_mask = 0;
    std::uint32_t admitted_mask = 0;  // arrivals drawn and accepted
};

/// Slot-by-slot execution of the chain under a policy, starting from the
/// all-empty state. Stream layout: three independent substreams are derived
/// from the seed by consecutive SplitMix64 outputs and drive, in order, the
/// action draw (one per slot), the transmission outcomes (transmitting
/// sources in index order) and the arrivals (all sources in index order).
void simulate_path(const Model& model, const Policy& policy, const SimConfig& config,
                   const std::function<void(const SlotRecord&)>& visitor);

/// Simulate and accumulate every cost in `costs` plus the standard counters.
MetricsAccumulator simulate(const Model& model, const Policy& policy, const CostSet& costs,
                            const SimConfig& config);

/// Ratio of accumulated sums with a batch-means standard error over the
/// per-batch ratios. Throws MetricUndefined on a non-positive denominator.
RatioEstimate empirical_metric(const MetricsAccumulator& acc, const Metric& metric);

/// Renewal statistics of event phi per renewal interval of event psi.
struct RenewalStats {
    std::uint64_t psi_count = 0;         // occurrences of the renewal event
    std::uint64_t phi_count = 0;         // occurrences of the counted event
    std::uint64_t complete_intervals = 0;
    double phi_in_complete_intervals = 0.0;
    double mean_occurrences = 0.0;  // mean V_phi over complete intervals
    double occurrences_se = 0.0;
    double mean_interval = 0.0;     // mean interval length (slots)
    double interval_se = 0.0;
    double psi_frequency = 0.0;     // empirical pi(psi)
    double frequency_ratio = 0.0;   // empirical pi(phi) / pi(psi)
};

/// Counts phi occurrences inside complete psi-renewal intervals; trailing
/// incomplete intervals are discarded. Throws when no complete interval was
/// observed.
RenewalStats renewal_counts(const Model& model, const Policy& policy, const Event& phi,
                            const Event& psi, const SimConfig& config);

}  // namespace arqopt
