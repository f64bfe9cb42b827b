#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ltlprice/harness.hpp"

namespace ltl {

// kpis.csv: one row per testing case.
inline std::string kpis_csv(const ScenarioResult& r) {
    std::string out = "case_id,total_deviation,per_pound_deviation,avg_price_per_pound,n_requests,n_infeasible\n";
    for (const auto& c : r.testing)
        out += fmt::format("{},{},{},{},{},{}\n", c.id, c.kpis.total_deviation, c.kpis.per_pound_deviation,
                           c.kpis.avg_price_per_pound, c.requests.size(), c.n_infeasible());
    return out;
}

// dispatch log: one row per manifest entry.
inline std::string dispatch_log_csv(const Case& c) {
    std::string out = "depart_hour,from,to,truck_id,request_id,pounds,leg_cost_share\n";
    for (const auto& d : c.dispatches) {
        const auto shares = leg_shares(d, c.costs);
        for (std::size_t i = 0; i < d.manifest.size(); ++i)
            out += fmt::format("{},{},{},{},{},{},{}\n", d.depart_hour, d.from, d.to, d.truck_id,
                               d.manifest[i].request_id, d.manifest[i].pounds, shares[i]);
    }
    return out;
}

inline nlohmann::json quartiles_json(const Quartiles& q) {
    return {{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
}

inline nlohmann::json summary_json(const ScenarioResult& r, const nlohmann::json& config_echo) {
    nlohmann::json j;
    j["config"] = config_echo;
    j["seed"] = r.master_seed;
    j["scenario"] = r.scenario.id;
    j["kpis"] = {{"total_deviation", quartiles_json(r.kpis.total_deviation)},
                 {"per_pound_deviation", quartiles_json(r.kpis.per_pound_deviation)},
                 {"avg_price_per_pound", quartiles_json(r.kpis.avg_price_per_pound)}};
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : r.histogram.bins) bins.push_back({{"low", b.low}, {"high", b.high}, {"count", b.count}});
    j["histogram"] = {{"bin_width", r.histogram.bin_width},
                      {"total", r.histogram.total},
                      {"nonnegative", r.histogram.nonnegative},
                      {"nonnegative_share", r.histogram.nonnegative_share()},
                      {"bins", bins}};
    const std::size_t n = r.n_requests();
    j["cases"] = {{"n_historical", r.scenario.n_historical},
                  {"n_testing", r.scenario.n_testing},
                  {"historical_observations", r.historical_observations},
                  {"historical_mean_per_pound", r.historical_mean_per_pound},
                  {"n_requests", n},
                  {"n_infeasible", r.n_infeasible()},
                  {"on_time_share", n ? 1.0 - static_cast<double>(r.n_infeasible()) / n : 1.0},
                  {"max_conservation_error", r.max_conservation_error()}};
    if (r.baseline) {
        nlohmann::json cases = nlohmann::json::array();
        for (const auto& c : r.baseline->cases)
            cases.push_back({{"case_id", c.case_id},
                             {"dynamic_profit", c.dynamic_profit},
                             {"baseline_profit", c.baseline_profit},
                             {"difference", c.difference}});
        j["baseline"] = {{"rate_per_pound", r.baseline->rate},
                         {"dynamic_profit", r.baseline->dynamic_profit},
                         {"baseline_profit", r.baseline->baseline_profit},
                         {"difference", r.baseline->dynamic_profit - r.baseline->baseline_profit},
                         {"cases", cases}};
    }
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + p.string() + "'");
}

/// Writes kpis.csv, summary.json, historical_pool.csv and, when asked,
/// one dispatch log per testing case.
inline void write_results(const ScenarioResult& r, const nlohmann::json& config_echo, const std::string& dir,
                          bool dispatch_logs) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    const std::filesystem::path base(dir);
    write_text(base / "kpis.csv", kpis_csv(r));
    write_text(base / "summary.json", summary_json(r, config_echo).dump(2) + "\n");
    write_text(base / "historical_pool.csv", r.historical_pool_csv);
    if (dispatch_logs)
        for (const auto& c : r.testing) write_text(base / fmt::format("dispatch_case_{}.csv", c.id), dispatch_log_csv(c));
}

inline nlohmann::json read_summary(const std::string& dir) {
    const auto path = std::filesystem::path(dir) / "summary.json";
    std::ifstream in(path);
    if (!in) throw IoError("no summary.json in '" + dir + "'");
    try {
        nlohmann::json j;
        in >> j;
        if (!j.contains("kpis") || !j.contains("histogram")) throw IoError("summary.json lacks kpis/histogram");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt summary.json in '" + dir + "': " + e.what());
    }
}

/// KPI quartile table, plus the baseline comparison when present.
inline void print_report(const nlohmann::json& s, std::ostream& out) {
    try {
        out << fmt::format("Scenario {} (seed {})\n", s.at("scenario").get<int>(), s.at("seed").get<std::uint64_t>());
        out << fmt::format("{:<24}{:>16}{:>16}{:>16}\n", "KPIs", "Lower Quartile", "Median", "Upper Quartile");
        const std::pair<const char*, const char*> rows[] = {{"total_deviation", "Total Deviation"},
                                                            {"per_pound_deviation", "Per Pound Deviation"},
                                                            {"avg_price_per_pound", "Average Price Per Pound"}};
        for (const auto& [key, label] : rows) {
            const auto& q = s.at("kpis").at(key);
            if (std::string(key) == "total_deviation")
                out << fmt::format("{:<24}{:>16.0f}{:>16.0f}{:>16.0f}\n", label, q.at("q1").get<double>(),
                                   q.at("median").get<double>(), q.at("q3").get<double>());
            else
                out << fmt::format("{:<24}{:>16.4f}{:>16.4f}{:>16.4f}\n", label, q.at("q1").get<double>(),
                                   q.at("median").get<double>(), q.at("q3").get<double>());
        }
        const auto& h = s.at("histogram");
        out << fmt::format("pricing errors: {} requests, nonnegative share {:.3f}\n", h.at("total").get<std::size_t>(),
                           h.at("nonnegative_share").get<double>());
        if (s.contains("cases"))
            out << fmt::format("on-time share {:.4f} ({} infeasible of {})\n", s["cases"].at("on_time_share").get<double>(),
                               s["cases"].at("n_infeasible").get<std::size_t>(),
                               s["cases"].at("n_requests").get<std::size_t>());
        if (s.contains("baseline")) {
            const auto& b = s.at("baseline");
            out << fmt::format("fixed-price baseline at ${:.4f}/lb\n", b.at("rate_per_pound").get<double>());
            out << fmt::format("{:<10}{:>18}{:>18}{:>18}\n", "case", "dynamic profit", "fixed profit", "difference");
            for (const auto& c : b.at("cases"))
                out << fmt::format("{:<10}{:>18.2f}{:>18.2f}{:>18.2f}\n", c.at("case_id").get<std::size_t>(),
                                   c.at("dynamic_profit").get<double>(), c.at("baseline_profit").get<double>(),
                                   c.at("difference").get<double>());
            out << fmt::format("{:<10}{:>18.2f}{:>18.2f}{:>18.2f}\n", "total", b.at("dynamic_profit").get<double>(),
                               b.at("baseline_profit").get<double>(), b.at("difference").get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("corrupt summary: ") + e.what());
    }
}

// pricing_errors.csv: bin_low,bin_high,count
inline std::string pricing_errors_csv(const nlohmann::json& s) {
    std::string out = "bin_low,bin_high,count\n";
    try {
        for (const auto& b : s.at("histogram").at("bins"))
            out += fmt::format("{},{},{}\n", b.at("low").get<double>(), b.at("high").get<double>(),
                               b.at("count").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("corrupt histogram: ") + e.what());
    }
    return out;
}

} // namespace ltl
