#include "arqopt/sim.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

namespace arqopt {

void SimConfig::validate() const {
    if (slots == 0 || slots <= burn_in) {
        throw std::invalid_argument("sim: slots must exceed burn_in");
    }
    if (batches < 2) throw std::invalid_argument("sim: at least 2 batches required");
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// uniform in [0, 1) from the top 53 bits; identical across platforms
double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void simulate_path(const Model& model, const Policy& policy, const SimConfig& config,
                   const std::function<void(const SlotRecord&)>& visitor) {
    config.validate();
    if (static_cast<int>(policy.action_probs.size()) != model.state_count()) {
        throw std::invalid_argument("sim: policy does not cover the state space");
    }
    const int S = model.source_count();

    std::uint64_t seed_state = config.seed;
    std::mt19937_64 action_rng(splitmix64(seed_state));
    std::mt19937_64 outcome_rng(splitmix64(seed_state));
    std::mt19937_64 arrival_rng(splitmix64(seed_state));

    int state = 0;  // all sources empty
    SlotRecord rec;
    std::vector<SourceState> next(S);
    for (std::uint64_t slot = 0; slot < config.slots; ++slot) {
        const int action = policy.sample(state, u01(action_rng));
        const int pair = model.pair_index(state, action);
        const JointAction& u = model.legal_actions(state)[action];
        const auto& rho = model.success_probs(state, action);

        std::uint32_t success_mask = 0;
        for (int s = 0; s < S; ++s) {
            if ((u.tx_mask >> s) & 1u) {
                if (u01(outcome_rng) < rho[s]) success_mask |= 1u << s;
            }
        }
        std::uint32_t arrival_mask = 0;
        for (int s = 0; s < S; ++s) {
            if (u01(arrival_rng) < model.config().sources[s].arrival_prob) {
                arrival_mask |= 1u << s;
            }
        }

        rec.slot = slot;
        rec.state = state;
        rec.action = action;
        rec.pair = pair;
        rec.outcome = Outcome{success_mask};
        rec.arrival_mask = arrival_mask;
        rec.removed_mask = 0;
        rec.admitted_mask = 0;

        const NetworkState& x = model.state(state);
        for (int s = 0; s < S; ++s) {
            const SourceStep step = model.advance_source_detail(
                x.source[s], u.source[s], (success_mask >> s) & 1u, (arrival_mask >> s) & 1u);
            next[s] = step.next;
            if (step.removed) rec.removed_mask |= 1u << s;
            if (step.admitted) rec.admitted_mask |= 1u << s;
        }
        visitor(rec);

        long long idx = 0;
        long long radix = 1;
        for (int s = S - 1; s >= 0; --s) {
            idx += static_cast<long long>(model.local_index(next[s])) * radix;
            radix *= model.local_state_count();
        }
        state = static_cast<int>(idx);
    }
}

MetricsAccumulator simulate(const Model& model, const Policy& policy, const CostSet& costs,
                            const SimConfig& config) {
    config.validate();
    const int S = model.source_count();
    const std::uint64_t window = config.slots - config.burn_in;
    const int n_batches = config.batches;

    MetricsAccumulator acc;
    acc.slots_ = window;
    acc.pair_visits_.assign(model.pair_count(), 0);
    acc.counters_.assign(S, SourceCounters{});
    acc.start_queue_.assign(S, 0);
    acc.end_queue_.assign(S, 0);
    acc.batch_slots_.assign(n_batches, 0);
    acc.sojourn_batch_sums_.assign(S, std::vector<double>(n_batches, 0.0));
    acc.sojourn_batch_counts_.assign(S, std::vector<double>(n_batches, 0.0));

    std::vector<const CostFunction*> tracked;
    std::vector<std::vector<double>*> sums;
    for (const auto& [id, cost] : costs.all()) {
        tracked.push_back(&cost);
        sums.push_back(&acc.cost_batch_sums_[id]);
        sums.back()->assign(n_batches, 0.0);
    }

    std::vector<std::deque<std::uint64_t>> tags(S);  // admission slots, FIFO
    std::vector<int> last_queue(S, 0);

    simulate_path(model, policy, config, [&](const SlotRecord& rec) {
        const bool in_window = rec.slot >= config.burn_in;
        const int batch = in_window ? static_cast<int>((rec.slot - config.burn_in) * n_batches /
                                                       window)
                                    : 0;
        const NetworkState& x = model.state(rec.state);
        const JointAction& u = model.legal_actions(rec.state)[rec.action];

        if (in_window) {
            if (rec.slot == config.burn_in) {
                for (int s = 0; s < S; ++s) acc.start_queue_[s] = x.source[s].queue;
            }
            acc.batch_slots_[batch] += 1;
            acc.pair_visits_[rec.pair] += 1;
            for (std::size_t k = 0; k < tracked.size(); ++k) {
                (*sums[k])[batch] += tracked[k]->realized(rec.pair, rec.outcome);
            }
            for (int s = 0; s < S; ++s) {
                SourceCounters& c = acc.counters_[s];
                const bool tx = (u.tx_mask >> s) & 1u;
                const bool success = rec.outcome.success(s);
                const bool removed = (rec.removed_mask >> s) & 1u;
                const bool admitted = (rec.admitted_mask >> s) & 1u;
                c.transmissions += tx;
                c.successes += success;
                c.removals += removed;
                c.drops_failed += removed && !success;
                c.services_started += !x.source[s].empty() && x.source[s].service == 1;
                c.queue_len_sum += x.source[s].queue;
                c.arrivals_admitted += admitted;
                c.arrivals_blocked += ((rec.arrival_mask >> s) & 1u) && !admitted;
            }
        }
        for (int s = 0; s < S; ++s) {
            const bool removed = (rec.removed_mask >> s) & 1u;
            const bool admitted = (rec.admitted_mask >> s) & 1u;
            if (removed && !tags[s].empty()) {
                const std::uint64_t admitted_slot = tags[s].front();
                tags[s].pop_front();
                if (in_window && admitted_slot >= config.burn_in) {
                    SourceCounters& c = acc.counters_[s];
                    c.departed_packets += 1;
                    c.sojourn_sum += rec.slot - admitted_slot;
                    acc.sojourn_batch_sums_[s][batch] +=
                        static_cast<double>(rec.slot - admitted_slot);
                    acc.sojourn_batch_counts_[s][batch] += 1.0;
                }
            }
            if (admitted) tags[s].push_back(rec.slot);
            last_queue[s] = static_cast<int>(tags[s].size());
        }
    });
    for (int s = 0; s < S; ++s) acc.end_queue_[s] = last_queue[s];
    return acc;
}

double MetricsAccumulator::time_average(const std::string& cost_id) const {
    const auto& sums = batch_sums(cost_id);
    double total = 0.0;
    for (double v : sums) total += v;
    return total / static_cast<double>(slots_);
}

const std::vector<double>& MetricsAccumulator::batch_sums(const std::string& cost_id) const {
    auto it = cost_batch_sums_.find(cost_id);
    if (it == cost_batch_sums_.end()) {
        throw std::invalid_argument("cost '" + cost_id + "' was not tracked");
    }
    return it->second;
}

namespace {

RatioEstimate batch_ratio_estimate(const std::vector<double>& num,
                                   const std::vector<double>& den) {
    double num_total = 0.0, den_total = 0.0;
    for (double v : num) num_total += v;
    for (double v : den) den_total += v;

    RatioEstimate est;
    est.value = num_total / den_total;

    std::vector<double> ratios;
    for (std::size_t b = 0; b < num.size(); ++b) {
        if (den[b] > 0.0) ratios.push_back(num[b] / den[b]);
    }
    est.batches = static_cast<int>(ratios.size());
    if (est.batches >= 2) {
        double mean = 0.0;
        for (double r : ratios) mean += r;
        mean /= est.batches;
        double var = 0.0;
        for (double r : ratios) var += (r - mean) * (r - mean);
        var /= (est.batches - 1);
        est.std_error = std::sqrt(var / est.batches);
    }
    return est;
}

}  // namespace

RatioEstimate empirical_metric(const MetricsAccumulator& acc, const Metric& metric) {
    const auto& num = acc.batch_sums(metric.numerator);
    const auto& den = acc.batch_sums(metric.denominator);
    double den_total = 0.0;
    for (double v : den) den_total += v;
    if (den_total <= 0.0) {
        throw MetricUndefined("metric '" + metric.id + "': denominator '" + metric.denominator +
                              "' accumulated no mass");
    }
    RatioEstimate est = batch_ratio_estimate(num, den);
    est.value = metric.beta * est.value + metric.lambda;
    est.std_error = std::fabs(metric.beta) * est.std_error;
    return est;
}

RatioEstimate MetricsAccumulator::mean_sojourn(int source) const {
    const auto& sums = sojourn_batch_sums_[source];
    const auto& counts = sojourn_batch_counts_[source];
    double total_count = 0.0;
    for (double c : counts) total_count += c;
    if (total_count <= 0.0) {
        throw MetricUndefined("no tagged packets departed for source " +
                              std::to_string(source + 1));
    }
    return batch_ratio_estimate(sums, counts);
}

RenewalStats renewal_counts(const Model& model, const Policy& policy, const Event& phi,
                            const Event& psi, const SimConfig& config) {
    RenewalStats st;
    bool interval_open = false;
    std::uint64_t interval_start = 0;
    std::uint64_t phi_in_interval = 0;

    double v_sum = 0.0, v_sumsq = 0.0;
    double tau_sum = 0.0, tau_sumsq = 0.0;
    std::uint64_t window = config.slots - config.burn_in;

    simulate_path(model, policy, config, [&](const SlotRecord& rec) {
        if (rec.slot < config.burn_in) return;
        const NetworkState& x = model.state(rec.state);
        const JointAction& u = model.legal_actions(rec.state)[rec.action];
        const bool phi_hit = phi.state_member(x) && phi.action_member(u) &&
                             phi.outcome_member(rec.outcome);
        const bool psi_hit = psi.state_member(x) && psi.action_member(u) &&
                             psi.outcome_member(rec.outcome);
        if (phi_hit) st.phi_count += 1;
        if (psi_hit) {
            st.psi_count += 1;
            if (interval_open) {
                const double tau = static_cast<double>(rec.slot - interval_start);
                const double v = static_cast<double>(phi_in_interval);
                st.complete_intervals += 1;
                st.phi_in_complete_intervals += v;
                v_sum += v;
                v_sumsq += v * v;
                tau_sum += tau;
                tau_sumsq += tau * tau;
            }
            interval_open = true;
            interval_start = rec.slot;
            phi_in_interval = 0;
        }
        if (interval_open && phi_hit) phi_in_interval += 1;
    });

    if (st.complete_intervals == 0) {
        throw std::runtime_error("renewal: no complete interval of event '" + psi.id() +
                                 "' observed");
    }
    const double k = static_cast<double>(st.complete_intervals);
    st.mean_occurrences = v_sum / k;
    st.mean_interval = tau_sum / k;
    if (st.complete_intervals >= 2) {
        const double v_var = (v_sumsq - v_sum * v_sum / k) / (k - 1.0);
        const double t_var = (tau_sumsq - tau_sum * tau_sum / k) / (k - 1.0);
        st.occurrences_se = std::sqrt(std::max(0.0, v_var) / k);
        st.interval_se = std::sqrt(std::max(0.0, t_var) / k);
    }
    st.psi_frequency = static_cast<double>(st.psi_count) / static_cast<double>(window);
    st.frequency_ratio = static_cast<double>(st.phi_count) / static_cast<double>(st.psi_count);
    return st;
}

}  // namespace arqopt
