#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace arqopt {

struct SourceConfig {
    double arrival_prob = 0.0;  // probability a new packet arrives in a slot
};

/**
 * Success probabilities of simultaneous transmissions.
 *
 * The success probability of a transmitting source depends on the set of
 * sources transmitting in the same slot. Two storage forms:
 *   - compact: per source, indexed by the number of interferers (other
 *     transmitting sources); suitable for symmetric interference.
 *   - table: per source, indexed by the full transmitter-set bitmask;
 *     needed for asymmetric networks.
 * A source that is not transmitting has success probability 0 by convention.
 *
 * When `monotone` is set (the default), construction of a Model verifies
 * that adding an interferer never increases any source's success
 * probability.
 */
class InterferenceModel {
public:
    InterferenceModel() = default;

    /// Same interferer-count profile for every source.
    /// success_by_interferers[k] = success probability with k interferers.
    static InterferenceModel symmetric(std::vector<double> success_by_interferers,
                                       bool monotone = true);

    /// Per-source interferer-count profiles; outer index is the 0-based source.
    static InterferenceModel per_source(std::vector<std::vector<double>> success_by_interferers,
                                        bool monotone = true);

    /// Full table: success_by_mask[s][mask] = success probability of source s
    /// when the transmitter set is `mask` (bit s' set = source s' transmits).
    /// Entries with bit s unset are ignored. Missing entries (NaN) are a
    /// configuration error, detected when the model is built.
    static InterferenceModel table(std::vector<std::vector<double>> success_by_mask,
                                   bool monotone = true);

    /// Success probability of `source` (0-based) given transmitter set `mask`.
    /// Returns 0 when the source itself is not transmitting.
    double success_prob(int source, std::uint32_t mask) const;

    bool monotone() const { return monotone_; }

    /// Range, completeness and (if declared) monotonicity checks.
    /// Throws std::invalid_argument describing the offending entry.
    void validate(int source_count) const;

private:
    bool compact_ = true;
    bool monotone_ = true;
    bool shared_ = false;                           // compact profile shared by all sources
    std::vector<std::vector<double>> by_count_;     // [source][interferers]
    std::vector<std::vector<double>> by_mask_;      // [source][mask]
};

struct NetworkConfig {
    int buffer_size = 1;       // B, packets
    int max_service_time = 1;  // F, slots (= maximum transmissions of a packet)
    std::vector<SourceConfig> sources;
    InterferenceModel interference;

    int source_count() const { return static_cast<int>(sources.size()); }
    void validate() const;  // throws std::invalid_argument
};

/// Per-source state: empty buffer, or `queue` packets with the head packet
/// in service for `service` slots. queue == 0 encodes the empty state
/// (service is 0 then as well).
struct SourceState {
    int queue = 0;
    int service = 0;
    bool empty() const { return queue == 0; }
    bool operator==(const SourceState&) const = default;
};

/// Per-source action: transmit the head packet and/or drop it at the end of
/// the slot. Empty sources are forced to (transmit=0, drop=0); a source whose
/// head reached service == F is forced to drop.
struct SourceAction {
    bool transmit = false;
    bool drop = false;
    bool operator==(const SourceAction&) const = default;
};

struct NetworkState {
    std::vector<SourceState> source;
    bool operator==(const NetworkState&) const = default;
};

struct JointAction {
    std::vector<SourceAction> source;
    std::uint32_t tx_mask = 0;    // bit s = source s transmits
    std::uint32_t drop_mask = 0;  // bit s = source s drops
};

/// Transmission outcome of a slot: bit s = source s delivered its packet.
/// Consistent outcomes have success_mask a subset of the action's tx_mask.
struct Outcome {
    std::uint32_t success_mask = 0;
    bool success(int source) const { return (success_mask >> source) & 1u; }
};

/// Detail of one source's slot update, used by the simulator's accounting.
struct SourceStep {
    SourceState next;
    bool removed = false;   // head packet left the buffer (delivery or drop)
    bool admitted = false;  // an arriving packet was accepted
};

/**
 * The finite slotted-network model: enumerated state and action spaces plus
 * exact transition probabilities.
 *
 * Slot semantics, applied independently per source:
 *   1. an action (transmit/drop flags) is chosen for the slot-start state;
 *   2. if transmitting, the outcome is success with probability given by the
 *      interference model for the transmitting set;
 *   3. the head packet is removed iff it succeeded or the drop flag is set;
 *   4. an arrival (probability alpha_s) is admitted iff the post-removal
 *      queue is below B, and lost otherwise;
 *   5. the next head (if any) carries service+1 if it survived, or starts at
 *      service=1 if it became head this slot. A packet admitted to an empty
 *      buffer starts service next slot at service=1.
 *
 * Indexing (stable, relied on by file formats):
 *   - per-source local states: 0 = empty, then 1 + (queue-1)*F + (service-1),
 *     i.e. service varies fastest;
 *   - joint states: mixed radix over local states with source 0 most
 *     significant (state 0 = all sources empty);
 *   - per-source actions in (transmit, drop) binary order: (0,0), (0,1),
 *     (1,0), (1,1), restricted to the legal set;
 *   - joint actions: product order with source 0 most significant;
 *   - (state, action) pairs: states in index order, each state's legal
 *     actions in action order.
 *
 * Immutable after construction; safe to share across threads.
 */
class Model {
public:
    explicit Model(NetworkConfig config);

    const NetworkConfig& config() const { return config_; }
    int source_count() const { return num_sources_; }
    int buffer_size() const { return config_.buffer_size; }
    int max_service_time() const { return config_.max_service_time; }

    int local_state_count() const { return local_count_; }
    int state_count() const { return static_cast<int>(states_.size()); }
    int pair_count() const { return pair_count_; }

    const NetworkState& state(int state_index) const { return states_[state_index]; }
    int state_index(const NetworkState& x) const;

    int local_index(SourceState x) const;
    SourceState local_state(int local_index) const;

    const std::vector<JointAction>& legal_actions(int state_index) const {
        return actions_[state_index];
    }

    int pair_index(int state_index, int action_index) const {
        return pair_offset_[state_index] + action_index;
    }
    int pair_state(int pair_index) const { return pair_state_[pair_index]; }
    int pair_action(int pair_index) const { return pair_action_[pair_index]; }

    /// rho_s(x,u) for every source; 0 for non-transmitting sources.
    const std::vector<double>& success_probs(int state_index, int action_index) const;

    /// All outcomes consistent with the action (success_mask subsets of tx_mask).
    std::vector<Outcome> consistent_outcomes(int state_index, int action_index) const;

    /// P(y | x, u). Throws std::invalid_argument if y claims a success for a
    /// non-transmitting source.
    double outcome_prob(int state_index, int action_index, Outcome y) const;

    /// Distribution of the next state given the realized outcome, marginalized
    /// over arrivals. Sparse, sorted by state index, sums to 1.
    std::vector<std::pair<int, double>> next_state_dist(int state_index, int action_index,
                                                         Outcome y) const;

    /// P(x' | x, u), marginalized over outcomes and arrivals.
    double transition_prob(int next_state, int state_index, int action_index) const;

    /// Full sparse transition row of a (state, action) pair, sorted by state index.
    const std::vector<std::pair<int, double>>& transition_row(int pair_index) const {
        return rows_[pair_index];
    }

    /// One-slot update of a single source given realized success and arrival.
    SourceState advance_source(SourceState x, SourceAction u, bool success, bool arrival) const;

    /// As advance_source, also reporting removal/admission for counters.
    SourceStep advance_source_detail(SourceState x, SourceAction u, bool success,
                                     bool arrival) const;

    /// Human-readable labels used in CSV output: per-source "-" (empty) or
    /// "b:f", joined by "|"; actions as "..", ".D", "T.", "TD" joined by "|".
    std::string state_label(int state_index) const;
    std::string action_label(int state_index, int action_index) const;

private:
    NetworkConfig config_;
    int num_sources_ = 0;
    int local_count_ = 0;
    std::vector<long long> radix_;  // radix_[s] = local_count^(S-1-s)

    std::vector<NetworkState> states_;
    std::vector<std::vector<JointAction>> actions_;
    std::vector<int> pair_offset_;
    std::vector<int> pair_state_;
    std::vector<int> pair_action_;
    int pair_count_ = 0;

    std::vector<std::vector<double>> rho_;                        // per pair
    std::vector<std::vector<std::pair<int, double>>> rows_;       // per pair

    void enumerate_states();
    void enumerate_actions();
    void precompute_transitions();
};

}  // namespace arqopt
