#include "arqopt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace arqopt {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw std::invalid_argument("scenario: " + path + ": " + message);
}

const json& require(const json& j, const std::string& path, const char* key) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing required field");
    return *it;
}

double number_in(const json& j, const std::string& path, double lo, double hi) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!(v >= lo && v <= hi)) {
        fail(path, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
    }
    return v;
}

int integer_in(const json& j, const std::string& path, long long lo, long long hi) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    const long long v = j.get<long long>();
    if (v < lo || v > hi) fail(path, "value out of range");
    return static_cast<int>(v);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(keys.begin(), keys.end(),
                         [&](const char* k) { return key == k; }) == keys.end()) {
            fail(path + "." + key, "unknown field");
        }
    }
}

CostSpec parse_cost_spec(const json& j, const std::string& path, int source_count) {
    check_keys(j, path, {"kind", "source"});
    CostSpec spec;
    const json& kind = require(j, path, "kind");
    if (!kind.is_string()) fail(path + ".kind", "expected a string");
    const auto parsed = cost_kind_from_name(kind.get<std::string>());
    if (!parsed) fail(path + ".kind", "unknown cost kind '" + kind.get<std::string>() + "'");
    spec.kind = *parsed;
    if (j.contains("source")) {
        spec.source = integer_in(j["source"], path + ".source", 1, source_count);
    }
    return spec;
}

json cost_spec_json(const CostSpec& spec) {
    json j{{"kind", cost_kind_name(spec.kind)}};
    if (spec.source) j["source"] = *spec.source;
    return j;
}

std::vector<double> parse_sweep_values(const json& j, const std::string& path) {
    std::vector<double> values;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            values.push_back(number_in(j[i], path + "[" + std::to_string(i) + "]", -1e18, 1e18));
        }
    } else if (j.is_object()) {
        check_keys(j, path, {"from", "to", "count"});
        const double from = number_in(require(j, path, "from"), path + ".from", -1e18, 1e18);
        const double to = number_in(require(j, path, "to"), path + ".to", -1e18, 1e18);
        const int count = integer_in(require(j, path, "count"), path + ".count", 1, 100000);
        for (int i = 0; i < count; ++i) {
            values.push_back(count == 1 ? from : from + (to - from) * i / (count - 1));
        }
    } else {
        fail(path, "expected an array of values or {from, to, count}");
    }
    if (values.empty()) fail(path, "sweep grid is empty");
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < values.size(); ++i) {
        inc = inc && values[i] > values[i - 1];
        dec = dec && values[i] < values[i - 1];
    }
    if (values.size() > 1 && !inc && !dec) fail(path, "sweep grid must be strictly monotone");
    return values;
}

InterferenceModel parse_interference(const json& j, const std::string& path, int S) {
    check_keys(j, path, {"failure_probs", "failure_probs_per_source", "table", "monotone"});
    bool monotone = true;
    if (j.contains("monotone")) {
        if (!j["monotone"].is_boolean()) fail(path + ".monotone", "expected a boolean");
        monotone = j["monotone"].get<bool>();
    }
    const int forms = j.contains("failure_probs") + j.contains("failure_probs_per_source") +
                      j.contains("table");
    if (forms != 1) {
        fail(path, "exactly one of failure_probs, failure_probs_per_source, table required");
    }
    // failure probabilities in the file, success probabilities internally
    if (j.contains("failure_probs")) {
        const json& arr = j["failure_probs"];
        if (!arr.is_array() || arr.empty()) {
            fail(path + ".failure_probs", "expected a nonempty array");
        }
        std::vector<double> success;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            success.push_back(1.0 - number_in(arr[i], path + ".failure_probs[" +
                                                           std::to_string(i) + "]", 0.0, 1.0));
        }
        return InterferenceModel::symmetric(std::move(success), monotone);
    }
    if (j.contains("failure_probs_per_source")) {
        const json& outer = j["failure_probs_per_source"];
        if (!outer.is_array() || static_cast<int>(outer.size()) != S) {
            fail(path + ".failure_probs_per_source", "expected one array per source");
        }
        std::vector<std::vector<double>> success(S);
        for (int s = 0; s < S; ++s) {
            const std::string spath =
                path + ".failure_probs_per_source[" + std::to_string(s) + "]";
            if (!outer[s].is_array() || outer[s].empty()) fail(spath, "expected a nonempty array");
            for (std::size_t i = 0; i < outer[s].size(); ++i) {
                success[s].push_back(
                    1.0 - number_in(outer[s][i], spath + "[" + std::to_string(i) + "]", 0.0, 1.0));
            }
        }
        return InterferenceModel::per_source(std::move(success), monotone);
    }
    const json& table = j["table"];
    if (!table.is_array()) fail(path + ".table", "expected an array of entries");
    std::vector<std::vector<double>> by_mask(
        S, std::vector<double>(std::size_t{1} << S, std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t i = 0; i < table.size(); ++i) {
        const std::string epath = path + ".table[" + std::to_string(i) + "]";
        check_keys(table[i], epath, {"source", "transmitters", "failure_prob"});
        const int source = integer_in(require(table[i], epath, "source"), epath + ".source", 1, S);
        const json& tx = require(table[i], epath, "transmitters");
        if (!tx.is_array() || tx.empty()) fail(epath + ".transmitters", "expected a nonempty array");
        std::uint32_t mask = 0;
        for (std::size_t k = 0; k < tx.size(); ++k) {
            mask |= 1u << (integer_in(tx[k], epath + ".transmitters[" + std::to_string(k) + "]", 1,
                                      S) -
                           1);
        }
        if (!((mask >> (source - 1)) & 1u)) {
            fail(epath, "source must belong to its transmitter set");
        }
        const double failure =
            number_in(require(table[i], epath, "failure_prob"), epath + ".failure_prob", 0.0, 1.0);
        by_mask[source - 1][mask] = 1.0 - failure;
    }
    return InterferenceModel::table(std::move(by_mask), monotone);
}

}  // namespace

Metric ConstraintSpec::metric(double bound_value) const {
    Metric m;
    m.id = name;
    if (type == "min_throughput") {
        m.numerator = builtin_cost_id(CostKind::throughput, source);
        m.denominator = builtin_cost_id(CostKind::unit, std::nullopt);
        m.beta = -1.0;
        m.bound = -bound_value;
    } else if (type == "max_delay") {
        m.numerator = builtin_cost_id(CostKind::queue_len, source);
        m.denominator = builtin_cost_id(CostKind::arrival, source);
        m.beta = 1.0;
        m.bound = bound_value;
    } else if (type == "min_delivery_prob") {
        m.numerator = builtin_cost_id(CostKind::success_slot, source);
        m.denominator = builtin_cost_id(CostKind::service_start, source);
        m.beta = -1.0;
        m.bound = -bound_value;
    } else if (type == "ratio") {
        m.numerator = numerator.id();
        m.denominator = denominator.id();
        m.beta = beta;
        m.lambda = lambda;
        m.bound = bound_value;
    } else {
        throw std::invalid_argument("constraint '" + name + "': unknown type '" + type + "'");
    }
    return m;
}

Metric Scenario::objective_metric() const {
    Metric m;
    m.id = "objective";
    m.numerator = objective_num.id();
    m.denominator = objective_den.id();
    m.beta = objective_beta;
    m.lambda = objective_lambda;
    return m;
}

const ConstraintSpec& Scenario::constraint(const std::string& cname) const {
    for (const ConstraintSpec& c : constraints) {
        if (c.name == cname) return c;
    }
    throw std::invalid_argument("scenario: unknown constraint '" + cname + "'");
}

Scenario scenario_from_json(const json& j) {
    check_keys(j, "$",
               {"version", "name", "network", "objective", "constraints", "sweep", "sim",
                "symmetrize"});
    Scenario s;
    if (j.contains("version")) s.version = integer_in(j["version"], "$.version", 1, 1);
    if (j.contains("name")) {
        if (!j["name"].is_string()) fail("$.name", "expected a string");
        s.name = j["name"].get<std::string>();
    }

    const json& net = require(j, "$", "network");
    check_keys(net, "$.network", {"buffer_size", "max_service_time", "sources", "interference"});
    s.network.buffer_size =
        integer_in(require(net, "$.network", "buffer_size"), "$.network.buffer_size", 1, 1000);
    s.network.max_service_time = integer_in(require(net, "$.network", "max_service_time"),
                                            "$.network.max_service_time", 1, 1000);
    const json& sources = require(net, "$.network", "sources");
    if (!sources.is_array() || sources.empty()) {
        fail("$.network.sources", "expected a nonempty array");
    }
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::string spath = "$.network.sources[" + std::to_string(i) + "]";
        check_keys(sources[i], spath, {"arrival_prob"});
        SourceConfig sc;
        sc.arrival_prob =
            number_in(require(sources[i], spath, "arrival_prob"), spath + ".arrival_prob", 0, 1);
        s.network.sources.push_back(sc);
    }
    const int S = s.network.source_count();
    s.network.interference =
        parse_interference(require(net, "$.network", "interference"), "$.network.interference", S);

    const json& obj = require(j, "$", "objective");
    check_keys(obj, "$.objective", {"numerator", "denominator", "beta", "lambda"});
    s.objective_num = parse_cost_spec(require(obj, "$.objective", "numerator"),
                                      "$.objective.numerator", S);
    s.objective_den = parse_cost_spec(require(obj, "$.objective", "denominator"),
                                      "$.objective.denominator", S);
    if (obj.contains("beta")) s.objective_beta = number_in(obj["beta"], "$.objective.beta", -1e18, 1e18);
    if (obj.contains("lambda")) {
        s.objective_lambda = number_in(obj["lambda"], "$.objective.lambda", -1e18, 1e18);
    }

    if (j.contains("constraints")) {
        const json& cons = j["constraints"];
        if (!cons.is_array()) fail("$.constraints", "expected an array");
        std::set<std::string> names;
        for (std::size_t i = 0; i < cons.size(); ++i) {
            const std::string cpath = "$.constraints[" + std::to_string(i) + "]";
            check_keys(cons[i], cpath,
                       {"name", "type", "source", "value", "numerator", "denominator", "beta",
                        "lambda"});
            ConstraintSpec c;
            const json& name = require(cons[i], cpath, "name");
            if (!name.is_string()) fail(cpath + ".name", "expected a string");
            c.name = name.get<std::string>();
            if (!names.insert(c.name).second) fail(cpath + ".name", "duplicate constraint name");
            const json& type = require(cons[i], cpath, "type");
            if (!type.is_string()) fail(cpath + ".type", "expected a string");
            c.type = type.get<std::string>();
            if (cons[i].contains("source")) {
                c.source = integer_in(cons[i]["source"], cpath + ".source", 1, S);
            }
            c.value = number_in(require(cons[i], cpath, "value"), cpath + ".value", -1e18, 1e18);
            if (c.type == "ratio") {
                c.numerator = parse_cost_spec(require(cons[i], cpath, "numerator"),
                                               cpath + ".numerator", S);
                c.denominator = parse_cost_spec(require(cons[i], cpath, "denominator"),
                                                 cpath + ".denominator", S);
                if (cons[i].contains("beta")) {
                    c.beta = number_in(cons[i]["beta"], cpath + ".beta", -1e18, 1e18);
                }
                if (cons[i].contains("lambda")) {
                    c.lambda = number_in(cons[i]["lambda"], cpath + ".lambda", -1e18, 1e18);
                }
            } else if (c.type != "min_throughput" && c.type != "max_delay" &&
                       c.type != "min_delivery_prob") {
                fail(cpath + ".type", "unknown constraint type '" + c.type + "'");
            }
            s.constraints.push_back(std::move(c));
        }
    }

    if (j.contains("sweep")) {
        const json& sweep = j["sweep"];
        if (!sweep.is_array()) fail("$.sweep", "expected an array of axes");
        if (sweep.size() > 2) fail("$.sweep", "at most two sweep axes supported");
        for (std::size_t i = 0; i < sweep.size(); ++i) {
            const std::string apath = "$.sweep[" + std::to_string(i) + "]";
            check_keys(sweep[i], apath, {"constraint", "values"});
            SweepAxis axis;
            const json& cname = require(sweep[i], apath, "constraint");
            if (!cname.is_string()) fail(apath + ".constraint", "expected a string");
            axis.constraint = cname.get<std::string>();
            bool known = false;
            for (const ConstraintSpec& c : s.constraints) known = known || c.name == axis.constraint;
            if (!known) fail(apath + ".constraint", "references unknown constraint");
            axis.values = parse_sweep_values(require(sweep[i], apath, "values"), apath + ".values");
            s.sweep.push_back(std::move(axis));
        }
    }

    if (j.contains("sim")) {
        const json& sim = j["sim"];
        check_keys(sim, "$.sim", {"slots", "burn_in", "seed", "batches"});
        if (sim.contains("slots")) {
            s.sim.slots = static_cast<std::uint64_t>(
                integer_in(sim["slots"], "$.sim.slots", 1, 2000000000));
        }
        if (sim.contains("burn_in")) {
            s.sim.burn_in = static_cast<std::uint64_t>(
                integer_in(sim["burn_in"], "$.sim.burn_in", 0, 2000000000));
        }
        if (sim.contains("seed")) {
            s.sim.seed =
                static_cast<std::uint64_t>(integer_in(sim["seed"], "$.sim.seed", 0, 2000000000));
        }
        if (sim.contains("batches")) {
            s.sim.batches = integer_in(sim["batches"], "$.sim.batches", 2, 10000);
        }
    }
    s.sim.validate();

    if (j.contains("symmetrize")) {
        if (!j["symmetrize"].is_boolean()) fail("$.symmetrize", "expected a boolean");
        s.symmetrize = j["symmetrize"].get<bool>();
    }

    s.network.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("scenario: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("scenario: " + path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

nlohmann::json to_json(const Scenario& s) {
    json net;
    net["buffer_size"] = s.network.buffer_size;
    net["max_service_time"] = s.network.max_service_time;
    for (const SourceConfig& sc : s.network.sources) {
        net["sources"].push_back({{"arrival_prob", sc.arrival_prob}});
    }
    // interference is emitted in the per-source compact or table form it
    // validates to; re-derive failure probabilities via lookups
    const int S = s.network.source_count();
    json inter;
    inter["monotone"] = s.network.interference.monotone();
    bool compact_ok = true;
    std::vector<std::vector<double>> per_source(S);
    for (int src = 0; src < S && compact_ok; ++src) {
        for (int k = 0; k < S; ++k) {
            // representative mask: source plus the k lowest other sources
            std::uint32_t mask = 1u << src;
            int added = 0;
            for (int t = 0; t < S && added < k; ++t) {
                if (t != src) {
                    mask |= 1u << t;
                    ++added;
                }
            }
            per_source[src].push_back(1.0 - s.network.interference.success_prob(src, mask));
        }
        // confirm the value only depends on the interferer count
        for (std::uint32_t mask = 0; mask < (1u << S); ++mask) {
            if (!((mask >> src) & 1u)) continue;
            const int k = __builtin_popcount(mask) - 1;
            if (std::fabs((1.0 - s.network.interference.success_prob(src, mask)) -
                          per_source[src][k]) > 1e-15) {
                compact_ok = false;
                break;
            }
        }
    }
    if (compact_ok) {
        inter["failure_probs_per_source"] = per_source;
    } else {
        json table = json::array();
        for (int src = 0; src < S; ++src) {
            for (std::uint32_t mask = 0; mask < (1u << S); ++mask) {
                if (!((mask >> src) & 1u)) continue;
                json tx = json::array();
                for (int t = 0; t < S; ++t) {
                    if ((mask >> t) & 1u) tx.push_back(t + 1);
                }
                table.push_back({{"source", src + 1},
                                 {"transmitters", tx},
                                 {"failure_prob",
                                  1.0 - s.network.interference.success_prob(src, mask)}});
            }
        }
        inter["table"] = table;
    }
    net["interference"] = inter;

    json out;
    out["version"] = s.version;
    out["name"] = s.name;
    out["network"] = net;
    out["objective"] = {{"numerator", cost_spec_json(s.objective_num)},
                        {"denominator", cost_spec_json(s.objective_den)},
                        {"beta", s.objective_beta},
                        {"lambda", s.objective_lambda}};
    out["constraints"] = json::array();
    for (const ConstraintSpec& c : s.constraints) {
        json cj{{"name", c.name}, {"type", c.type}, {"value", c.value}};
        if (c.source) cj["source"] = *c.source;
        if (c.type == "ratio") {
            cj["numerator"] = cost_spec_json(c.numerator);
            cj["denominator"] = cost_spec_json(c.denominator);
            cj["beta"] = c.beta;
            cj["lambda"] = c.lambda;
        }
        out["constraints"].push_back(cj);
    }
    out["sweep"] = json::array();
    for (const SweepAxis& axis : s.sweep) {
        out["sweep"].push_back({{"constraint", axis.constraint}, {"values", axis.values}});
    }
    out["sim"] = {{"slots", s.sim.slots},
                  {"burn_in", s.sim.burn_in},
                  {"seed", s.sim.seed},
                  {"batches", s.sim.batches}};
    out["symmetrize"] = s.symmetrize;
    return out;
}

namespace {

// pair permutation under reversal of the source labels
std::vector<int> source_reversal_permutation(const Model& model) {
    const int S = model.source_count();
    std::vector<int> perm(model.pair_count(), -1);
    for (int p = 0; p < model.pair_count(); ++p) {
        const int x = model.pair_state(p);
        const int a = model.pair_action(p);
        NetworkState rx;
        rx.source.assign(model.state(x).source.rbegin(), model.state(x).source.rend());
        const int xr = model.state_index(rx);
        const JointAction& u = model.legal_actions(x)[a];
        const auto& actions = model.legal_actions(xr);
        int ar = -1;
        for (std::size_t k = 0; k < actions.size(); ++k) {
            bool match = true;
            for (int sidx = 0; sidx < S; ++sidx) {
                match = match && actions[k].source[sidx] == u.source[S - 1 - sidx];
            }
            if (match) {
                ar = static_cast<int>(k);
                break;
            }
        }
        perm[p] = model.pair_index(xr, ar);
    }
    return perm;
}

void verify_model_symmetry(const Model& model, const std::vector<int>& perm) {
    for (int p = 0; p < model.pair_count(); ++p) {
        const auto& row = model.transition_row(p);
        const auto& prow = model.transition_row(perm[p]);
        if (row.size() != prow.size()) {
            throw std::runtime_error("symmetrize: model is not source-permutation invariant");
        }
        for (const auto& [xn, prob] : row) {
            NetworkState rx;
            rx.source.assign(model.state(xn).source.rbegin(), model.state(xn).source.rend());
            const double mirrored = [&] {
                const int target = model.state_index(rx);
                for (const auto& [xm, pm] : prow) {
                    if (xm == target) return pm;
                }
                return 0.0;
            }();
            if (std::fabs(mirrored - prob) > 1e-12) {
                throw std::runtime_error("symmetrize: model is not source-permutation invariant");
            }
        }
    }
}

}  // namespace

BoundScenario::BoundScenario(Scenario s)
    : scenario(std::move(s)), model(scenario.network), costs(model) {
    // register every cost the scenario can reference
    const int S = model.source_count();
    auto ensure_spec = [&](const CostSpec& spec) { costs.ensure_builtin(spec.kind, spec.source); };
    ensure_spec(scenario.objective_num);
    ensure_spec(scenario.objective_den);
    costs.ensure_builtin(CostKind::unit, std::nullopt);
    for (const ConstraintSpec& c : scenario.constraints) {
        if (c.type == "min_throughput") {
            costs.ensure_builtin(CostKind::throughput, c.source);
        } else if (c.type == "max_delay") {
            costs.ensure_builtin(CostKind::queue_len, c.source);
            costs.ensure_builtin(CostKind::arrival, c.source);
        } else if (c.type == "min_delivery_prob") {
            costs.ensure_builtin(CostKind::success_slot, c.source);
            costs.ensure_builtin(CostKind::service_start, c.source);
        } else {
            costs.ensure_builtin(c.numerator.kind, c.numerator.source);
            costs.ensure_builtin(c.denominator.kind, c.denominator.source);
        }
    }

    // standard report metrics
    auto plain = [&](CostKind kind, std::optional<int> source, const std::string& id) {
        Metric m;
        m.id = id;
        m.numerator = costs.ensure_builtin(kind, source);
        m.denominator = costs.ensure_builtin(CostKind::unit, std::nullopt);
        report_metrics.push_back(m);
    };
    auto ratio = [&](CostKind num, CostKind den, std::optional<int> source,
                     const std::string& id) {
        Metric m;
        m.id = id;
        m.numerator = costs.ensure_builtin(num, source);
        m.denominator = costs.ensure_builtin(den, source);
        report_metrics.push_back(m);
    };
    for (int n = 1; n <= S; ++n) {
        const std::string suffix = "_" + std::to_string(n);
        plain(CostKind::throughput, n, "throughput" + suffix);
        plain(CostKind::energy, n, "energy" + suffix);
        ratio(CostKind::queue_len, CostKind::arrival, n, "delay" + suffix);
        ratio(CostKind::success_slot, CostKind::service_start, n, "delivery" + suffix);
    }
    plain(CostKind::throughput, std::nullopt, "throughput_total");
    plain(CostKind::energy, std::nullopt, "energy_total");
    if (S >= 2) {
        costs.ensure_event(Event::simultaneous_tx("simul", 2));
        Metric m;
        m.id = "p_simul";
        m.numerator = "event_simul";
        m.denominator = costs.ensure_builtin(CostKind::unit, std::nullopt);
        report_metrics.push_back(m);
    }

    // reject metric-id collisions between constraints and report metrics
    std::set<std::string> ids{"objective"};
    for (const ConstraintSpec& c : scenario.constraints) {
        if (!ids.insert(c.name).second) {
            throw std::invalid_argument("duplicate metric id '" + c.name + "'");
        }
    }
    for (const Metric& m : report_metrics) {
        if (!ids.insert(m.id).second) {
            throw std::invalid_argument("constraint name '" + m.id +
                                        "' collides with a report metric");
        }
    }
}

std::vector<std::vector<double>> sweep_grid(const Scenario& s) {
    std::vector<std::vector<double>> grid;
    if (s.sweep.empty()) {
        grid.push_back({});
    } else if (s.sweep.size() == 1) {
        for (double v : s.sweep[0].values) grid.push_back({v});
    } else {
        for (double a : s.sweep[0].values) {
            for (double b : s.sweep[1].values) grid.push_back({a, b});
        }
    }
    return grid;
}

PointSolution solve_point(const BoundScenario& bound, const std::vector<double>& sweep_values,
                          const RunOptions& options) {
    const Scenario& sc = bound.scenario;
    if (sweep_values.size() != sc.sweep.size()) {
        throw std::invalid_argument("solve_point: expected " + std::to_string(sc.sweep.size()) +
                                    " sweep values");
    }

    PointSolution out;
    out.row.sweep_values = sweep_values;

    std::vector<Metric> constraint_metrics;
    for (const ConstraintSpec& c : sc.constraints) {
        double value = c.value;
        for (std::size_t ax = 0; ax < sc.sweep.size(); ++ax) {
            if (sc.sweep[ax].constraint == c.name) value = sweep_values[ax];
        }
        constraint_metrics.push_back(c.metric(value));
    }

    out.metrics.push_back(sc.objective_metric());
    for (const Metric& m : constraint_metrics) out.metrics.push_back(m);
    for (const Metric& m : bound.report_metrics) out.metrics.push_back(m);

    const LfpProblem problem =
        assemble(bound.model, bound.costs, sc.objective_metric(), constraint_metrics);
    out.lfp = solve_lfp(problem, options.lp);
    out.row.status = lp::lp_status_name(out.lfp.status);
    if (out.lfp.status != lp::LpStatus::optimal) return out;

    if (sc.symmetrize) {
        const auto perm = source_reversal_permutation(bound.model);
        verify_model_symmetry(bound.model, perm);
        OccupancyMeasure sym;
        sym.omega.resize(out.lfp.omega.omega.size());
        for (std::size_t p = 0; p < sym.omega.size(); ++p) {
            sym.omega[p] = 0.5 * (out.lfp.omega.omega[p] + out.lfp.omega.omega[perm[p]]);
        }
        const double before = metric_value(sc.objective_metric(), out.lfp.omega.omega, bound.costs);
        const double after = metric_value(sc.objective_metric(), sym.omega, bound.costs);
        if (std::fabs(before - after) > 1e-8) {
            throw std::runtime_error("symmetrize: mirrored occupancy changes the objective; "
                                     "the scenario is not symmetric");
        }
        out.lfp.omega = std::move(sym);
        out.lfp.policy = extract_policy(bound.model, out.lfp.omega);
        out.lfp.objective = after;
    }

    const MetricReport rep =
        predicted_metrics(out.lfp.omega, bound.costs, out.metrics, 1e-6);
    out.row.predicted = rep.values;
    out.row.feasible = rep.feasible();
    out.row.objective = out.lfp.objective;
    out.row.randomized_states = out.lfp.policy.randomization_count();

    if (options.with_sim && out.row.feasible) {
        SimConfig sim_cfg = sc.sim;
        if (options.seed) sim_cfg.seed = *options.seed;
        if (options.slots) sim_cfg.slots = *options.slots;
        const MetricsAccumulator acc = simulate(bound.model, out.lfp.policy, bound.costs, sim_cfg);
        for (const Metric& m : out.metrics) {
            out.row.simulated[m.id] = empirical_metric(acc, m);
        }
        double tv = 0.0;
        for (int p = 0; p < bound.model.pair_count(); ++p) {
            tv += std::fabs(acc.pair_frequency(p) - out.lfp.omega.omega[p]);
        }
        out.row.tv_distance = 0.5 * tv;
    }
    return out;
}

std::vector<ResultRow> run_sweep(const BoundScenario& bound, const RunOptions& options) {
    std::vector<ResultRow> rows;
    const auto grid = sweep_grid(bound.scenario);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        RunOptions point_options = options;
        if (!point_options.seed) point_options.seed = bound.scenario.sim.seed + i;
        try {
            rows.push_back(solve_point(bound, grid[i], point_options).row);
        } catch (const std::exception& e) {
            ResultRow row;
            row.sweep_values = grid[i];
            row.status = std::string("error: ") + e.what();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace {

void write_double(std::ostream& os, double v) {
    if (std::isnan(v)) {
        os << "nan";
    } else {
        os << v;
    }
}

}  // namespace

void write_results_csv(std::ostream& os, const BoundScenario& bound,
                       const std::vector<ResultRow>& rows) {
    os << std::setprecision(15);
    std::vector<std::string> metric_ids{"objective"};
    for (const ConstraintSpec& c : bound.scenario.constraints) metric_ids.push_back(c.name);
    for (const Metric& m : bound.report_metrics) metric_ids.push_back(m.id);

    for (std::size_t ax = 0; ax < bound.scenario.sweep.size(); ++ax) {
        os << "sweep_" << bound.scenario.sweep[ax].constraint << ',';
    }
    os << "status,feasible,randomized_states,tv_distance";
    for (const std::string& id : metric_ids) os << ",pred_" << id;
    for (const std::string& id : metric_ids) os << ",sim_" << id << ",se_" << id;
    os << '\n';

    for (const ResultRow& row : rows) {
        for (double v : row.sweep_values) os << v << ',';
        // statuses may contain commas in error messages; quote them
        os << '"' << row.status << '"' << ',' << (row.feasible ? 1 : 0) << ','
           << row.randomized_states << ',';
        write_double(os, row.tv_distance);
        for (const std::string& id : metric_ids) {
            os << ',';
            auto it = row.predicted.find(id);
            write_double(os, it == row.predicted.end()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : it->second);
        }
        for (const std::string& id : metric_ids) {
            auto it = row.simulated.find(id);
            if (it == row.simulated.end()) {
                os << ",nan,nan";
            } else {
                os << ',';
                write_double(os, it->second.value);
                os << ',';
                write_double(os, it->second.std_error);
            }
        }
        os << '\n';
    }
}

void dump_policy_map(std::ostream& os, const Model& model, const Policy& policy) {
    if (model.source_count() != 2) {
        throw std::invalid_argument("policy map requires a two-source model");
    }
    os << std::setprecision(15);
    os << "x1_local,x1,x2_local,x2,tx_prob_1,tx_prob_2,tx_prob_both\n";
    const int L = model.local_state_count();
    for (int l1 = 0; l1 < L; ++l1) {
        for (int l2 = 0; l2 < L; ++l2) {
            NetworkState x;
            x.source = {model.local_state(l1), model.local_state(l2)};
            const int xi = model.state_index(x);
            const auto& probs = policy.action_probs[xi];
            const auto& actions = model.legal_actions(xi);
            double tx1 = 0.0, tx2 = 0.0, both = 0.0;
            for (std::size_t a = 0; a < probs.size(); ++a) {
                if (actions[a].source[0].transmit) tx1 += probs[a];
                if (actions[a].source[1].transmit) tx2 += probs[a];
                if (actions[a].source[0].transmit && actions[a].source[1].transmit) {
                    both += probs[a];
                }
            }
            const auto label = [&](SourceState ss) {
                if (ss.empty()) return std::string("-");
                return std::to_string(ss.queue) + ":" + std::to_string(ss.service);
            };
            os << l1 << ',' << label(model.local_state(l1)) << ',' << l2 << ','
               << label(model.local_state(l2)) << ',' << tx1 << ',' << tx2 << ',' << both << '\n';
        }
    }
}

double mean_transmit_prob(const Model& model, const Policy& policy, int source,
                          const std::function<bool(SourceState, SourceState)>& filter) {
    if (model.source_count() != 2) {
        throw std::invalid_argument("mean_transmit_prob requires a two-source model");
    }
    const int s = source - 1;
    double total = 0.0;
    int count = 0;
    for (int xi = 0; xi < model.state_count(); ++xi) {
        const NetworkState& x = model.state(xi);
        if (!filter(x.source[0], x.source[1])) continue;
        const auto& probs = policy.action_probs[xi];
        const auto& actions = model.legal_actions(xi);
        double tx = 0.0;
        for (std::size_t a = 0; a < probs.size(); ++a) {
            if (actions[a].source[s].transmit) tx += probs[a];
        }
        total += tx;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("mean_transmit_prob: empty state selection");
    return total / count;
}

}  // namespace arqopt
