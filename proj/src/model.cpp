#include "arqopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace arqopt {

namespace {

bool is_prob(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

int popcount(std::uint32_t m) { return __builtin_popcount(m); }

}  // namespace

InterferenceModel InterferenceModel::symmetric(std::vector<double> success_by_interferers,
                                               bool monotone) {
    InterferenceModel im;
    im.compact_ = true;
    im.shared_ = true;
    im.monotone_ = monotone;
    im.by_count_.push_back(std::move(success_by_interferers));
    return im;
}

InterferenceModel InterferenceModel::per_source(
    std::vector<std::vector<double>> success_by_interferers, bool monotone) {
    InterferenceModel im;
    im.compact_ = true;
    im.shared_ = false;
    im.monotone_ = monotone;
    im.by_count_ = std::move(success_by_interferers);
    return im;
}

InterferenceModel InterferenceModel::table(std::vector<std::vector<double>> success_by_mask,
                                           bool monotone) {
    InterferenceModel im;
    im.compact_ = false;
    im.monotone_ = monotone;
    im.by_mask_ = std::move(success_by_mask);
    return im;
}

double InterferenceModel::success_prob(int source, std::uint32_t mask) const {
    if (!((mask >> source) & 1u)) return 0.0;
    if (compact_) {
        const auto& row = by_count_[shared_ ? 0 : source];
        const int interferers = popcount(mask) - 1;
        if (interferers >= static_cast<int>(row.size())) {
            throw std::invalid_argument("interference model: no entry for source " +
                                        std::to_string(source + 1) + " with " +
                                        std::to_string(interferers) + " interferers");
        }
        return row[interferers];
    }
    if (source >= static_cast<int>(by_mask_.size()) ||
        mask >= by_mask_[source].size() || std::isnan(by_mask_[source][mask])) {
        throw std::invalid_argument("interference model: missing table entry for source " +
                                    std::to_string(source + 1) + ", transmitter mask " +
                                    std::to_string(mask));
    }
    return by_mask_[source][mask];
}

void InterferenceModel::validate(int source_count) const {
    const std::uint32_t full = (source_count >= 32) ? ~0u : ((1u << source_count) - 1u);
    if (source_count >= 32) throw std::invalid_argument("interference model: too many sources");
    for (int s = 0; s < source_count; ++s) {
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (!((mask >> s) & 1u)) continue;
            const double p = success_prob(s, mask);  // throws on missing entries
            if (!is_prob(p)) {
                throw std::invalid_argument("interference model: success probability out of "
                                            "[0,1] for source " + std::to_string(s + 1));
            }
        }
        if (monotone_) {
            // adding an interferer must not increase the success probability
            for (std::uint32_t mask = 0; mask <= full; ++mask) {
                if (!((mask >> s) & 1u)) continue;
                for (int t = 0; t < source_count; ++t) {
                    if (t == s || ((mask >> t) & 1u)) continue;
                    const std::uint32_t larger = mask | (1u << t);
                    if (success_prob(s, larger) > success_prob(s, mask) + 1e-12) {
                        throw std::invalid_argument(
                            "interference model declared monotone, but source " +
                            std::to_string(s + 1) + " gains success probability when source " +
                            std::to_string(t + 1) + " joins the transmitter set");
                    }
                }
            }
        }
    }
}

void NetworkConfig::validate() const {
    if (sources.empty()) throw std::invalid_argument("config: at least one source required");
    if (buffer_size < 1) throw std::invalid_argument("config: buffer_size must be >= 1");
    if (max_service_time < 1)
        throw std::invalid_argument("config: max_service_time must be >= 1");
    for (std::size_t s = 0; s < sources.size(); ++s) {
        if (!is_prob(sources[s].arrival_prob)) {
            throw std::invalid_argument("config: arrival_prob of source " +
                                        std::to_string(s + 1) + " must be in [0,1]");
        }
    }
    interference.validate(source_count());
}

Model::Model(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
    num_sources_ = config_.source_count();
    local_count_ = 1 + config_.max_service_time * config_.buffer_size;

    long long total = 1;
    radix_.assign(num_sources_, 1);
    for (int s = num_sources_ - 1; s >= 0; --s) {
        radix_[s] = total;
        total *= local_count_;
        if (total > 200000) {
            throw std::invalid_argument("config: state space too large (" +
                                        std::to_string(total) + "+ states)");
        }
    }

    enumerate_states();
    enumerate_actions();
    precompute_transitions();
}

int Model::local_index(SourceState x) const {
    if (x.empty()) return 0;
    return 1 + (x.queue - 1) * config_.max_service_time + (x.service - 1);
}

SourceState Model::local_state(int local) const {
    if (local == 0) return {};
    const int F = config_.max_service_time;
    return SourceState{(local - 1) / F + 1, (local - 1) % F + 1};
}

void Model::enumerate_states() {
    long long total = 1;
    for (int s = 0; s < num_sources_; ++s) total *= local_count_;
    states_.reserve(total);
    for (long long xi = 0; xi < total; ++xi) {
        NetworkState x;
        x.source.resize(num_sources_);
        for (int s = 0; s < num_sources_; ++s) {
            x.source[s] = local_state(static_cast<int>((xi / radix_[s]) % local_count_));
        }
        states_.push_back(std::move(x));
    }
}

int Model::state_index(const NetworkState& x) const {
    if (static_cast<int>(x.source.size()) != num_sources_)
        throw std::invalid_argument("state has wrong source count");
    long long idx = 0;
    for (int s = 0; s < num_sources_; ++s) {
        const SourceState& xs = x.source[s];
        if (xs.queue < 0 || xs.queue > config_.buffer_size ||
            (xs.queue == 0) != (xs.service == 0) ||
            (xs.queue > 0 && (xs.service < 1 || xs.service > config_.max_service_time))) {
            throw std::invalid_argument("invalid source state");
        }
        idx += static_cast<long long>(local_index(xs)) * radix_[s];
    }
    return static_cast<int>(idx);
}

namespace {

std::vector<SourceAction> legal_source_actions(SourceState x, int max_service_time) {
    if (x.empty()) return {{false, false}};
    if (x.service == max_service_time) return {{false, true}, {true, true}};
    return {{false, false}, {false, true}, {true, false}, {true, true}};
}

}  // namespace

void Model::enumerate_actions() {
    actions_.resize(states_.size());
    pair_offset_.resize(states_.size() + 1, 0);
    for (std::size_t xi = 0; xi < states_.size(); ++xi) {
        std::vector<std::vector<SourceAction>> per_source(num_sources_);
        long long combos = 1;
        for (int s = 0; s < num_sources_; ++s) {
            per_source[s] = legal_source_actions(states_[xi].source[s], config_.max_service_time);
            combos *= per_source[s].size();
        }
        auto& list = actions_[xi];
        list.reserve(combos);
        for (long long ai = 0; ai < combos; ++ai) {
            JointAction u;
            u.source.resize(num_sources_);
            long long rest = ai;
            // source 0 most significant
            for (int s = num_sources_ - 1; s >= 0; --s) {
                const auto& opts = per_source[s];
                u.source[s] = opts[rest % opts.size()];
                rest /= opts.size();
            }
            for (int s = 0; s < num_sources_; ++s) {
                if (u.source[s].transmit) u.tx_mask |= 1u << s;
                if (u.source[s].drop) u.drop_mask |= 1u << s;
            }
            list.push_back(std::move(u));
        }
        pair_offset_[xi + 1] = pair_offset_[xi] + static_cast<int>(list.size());
    }
    pair_count_ = pair_offset_.back();
    pair_state_.resize(pair_count_);
    pair_action_.resize(pair_count_);
    for (std::size_t xi = 0; xi < states_.size(); ++xi) {
        for (std::size_t ai = 0; ai < actions_[xi].size(); ++ai) {
            pair_state_[pair_offset_[xi] + ai] = static_cast<int>(xi);
            pair_action_[pair_offset_[xi] + ai] = static_cast<int>(ai);
        }
    }
}

const std::vector<double>& Model::success_probs(int state_index, int action_index) const {
    return rho_[pair_index(state_index, action_index)];
}

std::vector<Outcome> Model::consistent_outcomes(int state_index, int action_index) const {
    const std::uint32_t tx = actions_[state_index][action_index].tx_mask;
    std::vector<Outcome> out;
    std::uint32_t m = tx;
    for (;;) {
        out.push_back(Outcome{m});
        if (m == 0) break;
        m = (m - 1) & tx;
    }
    std::reverse(out.begin(), out.end());  // ascending mask order
    return out;
}

double Model::outcome_prob(int state_index, int action_index, Outcome y) const {
    const JointAction& u = actions_[state_index][action_index];
    if (y.success_mask & ~u.tx_mask) {
        throw std::invalid_argument("outcome claims success for a non-transmitting source");
    }
    const auto& rho = rho_[pair_index(state_index, action_index)];
    double p = 1.0;
    for (int s = 0; s < num_sources_; ++s) {
        if (!((u.tx_mask >> s) & 1u)) continue;
        p *= y.success(s) ? rho[s] : 1.0 - rho[s];
    }
    return p;
}

SourceState Model::advance_source(SourceState x, SourceAction u, bool success,
                                  bool arrival) const {
    return advance_source_detail(x, u, success, arrival).next;
}

SourceStep Model::advance_source_detail(SourceState x, SourceAction u, bool success,
                                        bool arrival) const {
    SourceStep step;
    if (x.empty()) {
        step.admitted = arrival;
        if (arrival) step.next = SourceState{1, 1};
        return step;
    }
    step.removed = success || u.drop;
    int queue = x.queue - (step.removed ? 1 : 0);
    if (arrival && queue < config_.buffer_size) {
        ++queue;
        step.admitted = true;
    }
    if (queue == 0) return step;  // next stays empty
    step.next = SourceState{queue, step.removed ? 1 : x.service + 1};
    return step;
}

std::vector<std::pair<int, double>> Model::next_state_dist(int state_index, int action_index,
                                                           Outcome y) const {
    const NetworkState& x = states_[state_index];
    const JointAction& u = actions_[state_index][action_index];
    if (y.success_mask & ~u.tx_mask) {
        throw std::invalid_argument("outcome claims success for a non-transmitting source");
    }
    std::map<long long, double> acc;
    acc[0] = 1.0;
    for (int s = 0; s < num_sources_; ++s) {
        const double alpha = config_.sources[s].arrival_prob;
        std::map<int, double> local;
        for (int arr = 0; arr < 2; ++arr) {
            const double pa = arr ? alpha : 1.0 - alpha;
            if (pa == 0.0) continue;
            const SourceState nxt = advance_source(x.source[s], u.source[s], y.success(s), arr);
            local[local_index(nxt)] += pa;
        }
        std::map<long long, double> next_acc;
        for (const auto& [idx, p] : acc) {
            for (const auto& [loc, pl] : local) {
                next_acc[idx + loc * radix_[s]] += p * pl;
            }
        }
        acc = std::move(next_acc);
    }
    std::vector<std::pair<int, double>> out;
    out.reserve(acc.size());
    for (const auto& [idx, p] : acc) out.emplace_back(static_cast<int>(idx), p);
    return out;
}

void Model::precompute_transitions() {
    rho_.resize(pair_count_);
    rows_.resize(pair_count_);
    for (int pi = 0; pi < pair_count_; ++pi) {
        const int xi = pair_state_[pi];
        const int ai = pair_action_[pi];
        const NetworkState& x = states_[xi];
        const JointAction& u = actions_[xi][ai];

        auto& rho = rho_[pi];
        rho.assign(num_sources_, 0.0);
        for (int s = 0; s < num_sources_; ++s) {
            if ((u.tx_mask >> s) & 1u) {
                rho[s] = config_.interference.success_prob(s, u.tx_mask);
            }
        }

        // per-source marginal over (outcome, arrival), then product across sources
        std::map<long long, double> acc;
        acc[0] = 1.0;
        for (int s = 0; s < num_sources_; ++s) {
            const double alpha = config_.sources[s].arrival_prob;
            std::map<int, double> local;
            for (int succ = 0; succ < 2; ++succ) {
                double py;
                if ((u.tx_mask >> s) & 1u) {
                    py = succ ? rho[s] : 1.0 - rho[s];
                } else {
                    py = succ ? 0.0 : 1.0;
                }
                if (py == 0.0) continue;
                for (int arr = 0; arr < 2; ++arr) {
                    const double pa = arr ? alpha : 1.0 - alpha;
                    if (pa == 0.0) continue;
                    const SourceState nxt = advance_source(x.source[s], u.source[s], succ, arr);
                    local[local_index(nxt)] += py * pa;
                }
            }
            std::map<long long, double> next_acc;
            for (const auto& [idx, p] : acc) {
                for (const auto& [loc, pl] : local) {
                    next_acc[idx + loc * radix_[s]] += p * pl;
                }
            }
            acc = std::move(next_acc);
        }
        auto& row = rows_[pi];
        row.reserve(acc.size());
        for (const auto& [idx, p] : acc) row.emplace_back(static_cast<int>(idx), p);
    }
}

double Model::transition_prob(int next_state, int state_index, int action_index) const {
    const auto& row = rows_[pair_index(state_index, action_index)];
    auto it = std::lower_bound(row.begin(), row.end(), next_state,
                               [](const auto& e, int v) { return e.first < v; });
    if (it == row.end() || it->first != next_state) return 0.0;
    return it->second;
}

std::string Model::state_label(int state_index) const {
    std::ostringstream os;
    const NetworkState& x = states_[state_index];
    for (int s = 0; s < num_sources_; ++s) {
        if (s) os << '|';
        if (x.source[s].empty()) {
            os << '-';
        } else {
            os << x.source[s].queue << ':' << x.source[s].service;
        }
    }
    return os.str();
}

std::string Model::action_label(int state_index, int action_index) const {
    std::ostringstream os;
    const JointAction& u = actions_[state_index][action_index];
    for (int s = 0; s < num_sources_; ++s) {
        if (s) os << '|';
        os << (u.source[s].transmit ? 'T' : '.') << (u.source[s].drop ? 'D' : '.');
    }
    return os.str();
}

}  // namespace arqopt
