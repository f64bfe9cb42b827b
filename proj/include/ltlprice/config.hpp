#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ltlprice/harness.hpp"

#ifndef LTLPRICE_DATA_DIR
#define LTLPRICE_DATA_DIR "data"
#endif

namespace ltl {

inline std::string default_topology_path() { return std::string(LTLPRICE_DATA_DIR) + "/topology_ga_fl.json"; }
inline std::string default_demand_path() { return std::string(LTLPRICE_DATA_DIR) + "/od_flows_ga_fl.csv"; }

/// Everything a `run` needs. `jobs` and `out` do not influence results and
/// are left out of the resolved echo.
struct RunConfig {
    std::string topology = default_topology_path();
    std::string demand = default_demand_path();  // empty: synthesize gravity flows
    double synth_total_annual_tons = 200.75e6;
    double synth_jitter = 0.0;
    ExperimentConfig experiment;
    std::uint64_t seed = 42;
    bool dispatch_log = false;
    int jobs = 1;
    std::string out = "results";

    RunConfig() { experiment.scenario = ScenarioSpec::preset(1); }
};

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(std::string prefix) : prefix_(std::move(prefix)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw IoError("config: " + path(key) + ": " + what);
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    void check_keys(const nlohmann::json& obj, std::set<std::string> allowed) const {
        if (!obj.is_object()) throw IoError("config: " + (prefix_.empty() ? std::string("<root>") : prefix_) + ": expected an object");
        for (const auto& [k, v] : obj.items())
            if (!allowed.count(k)) fail(k, "unknown key");
    }

    template <typename T>
    void read(const nlohmann::json& obj, const std::string& key, T& into) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.is_number_integer() && !v.is_number_unsigned()) fail(key, "expected a non-negative integer");
        } else {
            if (!v.is_number()) fail(key, "expected a number");
        }
        into = v.get<T>();
    }

    void read_rate(const nlohmann::json& obj, const std::string& key, RateRange& into) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (v.is_number()) {
            into = RateRange::fixed(v.get<double>());
        } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
            into = {v[0].get<double>(), v[1].get<double>()};
        } else {
            fail(key, "expected a number or [low, high]");
        }
        try {
            into.validate(key.c_str());
        } catch (const DomainError& e) {
            fail(key, e.what());
        }
    }

private:
    std::string prefix_;
};

inline nlohmann::json rate_to_json(const RateRange& r) {
    if (r.is_fixed()) return r.low;
    return nlohmann::json::array({r.low, r.high});
}

} // namespace detail

inline void apply_scenario_json(const nlohmann::json& j, ScenarioSpec& s) {
    detail::ConfigReader r("scenario");
    if (j.is_number_integer()) {
        s = ScenarioSpec::preset(j.get<int>());
        return;
    }
    r.check_keys(j, {"id", "ltl_flow_fraction", "volume_upper_bound", "truck_mile_cost", "transload_cost",
                     "n_historical", "n_testing"});
    if (j.contains("id")) {
        int id = 0;
        r.read(j, "id", id);
        if (id >= 1 && id <= 3) s = ScenarioSpec::preset(id);
        s.id = id;
    }
    r.read(j, "ltl_flow_fraction", s.ltl_flow_fraction);
    r.read(j, "volume_upper_bound", s.volume_upper_bound);
    r.read_rate(j, "truck_mile_cost", s.costs.truck_mile);
    r.read_rate(j, "transload_cost", s.costs.transload);
    r.read(j, "n_historical", s.n_historical);
    r.read(j, "n_testing", s.n_testing);
}

/// Applies a config document over `cfg`. A summary.json is accepted too: its
/// "config" echo is used.
inline void apply_config_json(const nlohmann::json& doc, RunConfig& cfg) {
    const nlohmann::json& j = (doc.is_object() && doc.contains("config") && doc.contains("kpis")) ? doc.at("config") : doc;
    detail::ConfigReader root("");
    root.check_keys(j, {"topology", "demand", "synthesis", "scenario", "robustness", "planner", "demand_model",
                        "pricing", "seed", "dispatch_log", "jobs", "out"});
    root.read(j, "topology", cfg.topology);
    if (j.contains("demand")) {
        if (j.at("demand").is_null()) cfg.demand.clear();
        else root.read(j, "demand", cfg.demand);
    }
    if (j.contains("synthesis")) {
        detail::ConfigReader r("synthesis");
        r.check_keys(j.at("synthesis"), {"total_annual_tons", "jitter"});
        r.read(j.at("synthesis"), "total_annual_tons", cfg.synth_total_annual_tons);
        r.read(j.at("synthesis"), "jitter", cfg.synth_jitter);
    }
    auto& e = cfg.experiment;
    if (j.contains("scenario")) apply_scenario_json(j.at("scenario"), e.scenario);
    if (j.contains("robustness")) {
        detail::ConfigReader r("robustness");
        const auto& o = j.at("robustness");
        r.check_keys(o, {"confidence", "weight_historical", "weight_realtime", "bucket_hours"});
        r.read(o, "confidence", e.robustness.confidence);
        r.read(o, "weight_historical", e.robustness.weight_historical);
        r.read(o, "weight_realtime", e.robustness.weight_realtime);
        r.read(o, "bucket_hours", e.robustness.bucket_hours);
    }
    if (j.contains("planner")) {
        detail::ConfigReader r("planner");
        const auto& o = j.at("planner");
        r.check_keys(o, {"truck_capacity", "fill_threshold", "urgency_slack_hours"});
        r.read(o, "truck_capacity", e.planner.truck_capacity);
        r.read(o, "fill_threshold", e.planner.fill_threshold);
        r.read(o, "urgency_slack_hours", e.planner.urgency_slack_hours);
        e.demand.truck_capacity = e.planner.truck_capacity;
    }
    if (j.contains("demand_model")) {
        detail::ConfigReader r("demand_model");
        const auto& o = j.at("demand_model");
        r.check_keys(o, {"horizon_hours", "min_demand_fraction", "min_request_pounds", "window_margin_hours",
                         "max_window_hours"});
        r.read(o, "horizon_hours", e.demand.horizon_hours);
        r.read(o, "min_demand_fraction", e.demand.min_demand_fraction);
        r.read(o, "min_request_pounds", e.demand.min_request_pounds);
        r.read(o, "window_margin_hours", e.demand.window_margin_hours);
        r.read(o, "max_window_hours", e.demand.max_window_hours);
    }
    if (j.contains("pricing")) {
        detail::ConfigReader r("pricing");
        const auto& o = j.at("pricing");
        r.check_keys(o, {"fallback_margin", "baseline_markup", "histogram_bin_width", "compare_baseline"});
        r.read(o, "fallback_margin", e.fallback_margin);
        r.read(o, "baseline_markup", e.baseline_markup);
        r.read(o, "histogram_bin_width", e.histogram_bin_width);
        r.read(o, "compare_baseline", e.compare_baseline);
    }
    root.read(j, "seed", cfg.seed);
    root.read(j, "dispatch_log", cfg.dispatch_log);
    root.read(j, "jobs", cfg.jobs);
    root.read(j, "out", cfg.out);
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse config file '" + path + "': " + e.what());
    }
    apply_config_json(doc, base);
    return base;
}

/// Fully materialized configuration, minus `jobs` and `out`.
inline nlohmann::json resolved_config_json(const RunConfig& cfg) {
    const auto& e = cfg.experiment;
    const auto& s = e.scenario;
    nlohmann::json j;
    j["topology"] = cfg.topology;
    j["demand"] = cfg.demand.empty() ? nlohmann::json(nullptr) : nlohmann::json(cfg.demand);
    j["synthesis"] = {{"total_annual_tons", cfg.synth_total_annual_tons}, {"jitter", cfg.synth_jitter}};
    j["scenario"] = {{"id", s.id},
                     {"ltl_flow_fraction", s.ltl_flow_fraction},
                     {"volume_upper_bound", s.volume_upper_bound},
                     {"truck_mile_cost", detail::rate_to_json(s.costs.truck_mile)},
                     {"transload_cost", detail::rate_to_json(s.costs.transload)},
                     {"n_historical", s.n_historical},
                     {"n_testing", s.n_testing}};
    j["robustness"] = {{"confidence", e.robustness.confidence},
                       {"weight_historical", e.robustness.weight_historical},
                       {"weight_realtime", e.robustness.weight_realtime},
                       {"bucket_hours", e.robustness.bucket_hours}};
    j["planner"] = {{"truck_capacity", e.planner.truck_capacity},
                    {"fill_threshold", e.planner.fill_threshold},
                    {"urgency_slack_hours", e.planner.urgency_slack_hours}};
    j["demand_model"] = {{"horizon_hours", e.demand.horizon_hours},
                         {"min_demand_fraction", e.demand.min_demand_fraction},
                         {"min_request_pounds", e.demand.min_request_pounds},
                         {"window_margin_hours", e.demand.window_margin_hours},
                         {"max_window_hours", e.demand.max_window_hours}};
    j["pricing"] = {{"fallback_margin", e.fallback_margin},
                    {"baseline_markup", e.baseline_markup},
                    {"histogram_bin_width", e.histogram_bin_width},
                    {"compare_baseline", e.compare_baseline}};
    j["seed"] = cfg.seed;
    j["dispatch_log"] = cfg.dispatch_log;
    return j;
}

} // namespace ltl
