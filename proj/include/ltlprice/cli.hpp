#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ltlprice/config.hpp"
#include "ltlprice/report.hpp"

namespace ltl::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kDomainFailure = 1;
inline constexpr int kIoFailure = 2;

/// Prints "<hubs> hubs, <arcs> arcs, max arc <h>h" on success. Violations go to
/// `err` as one JSON document.
inline int cmd_validate(const std::string& topology, std::ostream& out, std::ostream& err) {
    Network net;
    try {
        net = read_network(topology);
    } catch (const Error& e) {
        err << e.what() << "\n";
        return e.exit_code();
    }
    const auto violations = validate_relay_constraint(net);
    const auto unreachable = unreachable_hubs(net);
    if (violations.empty() && unreachable.empty() && net.hub_count() > 0) {
        out << fmt::format("{} hubs, {} arcs, max arc {}h\n", net.hub_count(), net.arcs().size(), net.max_arc_hours());
        return kOk;
    }
    nlohmann::json report;
    report["violations"] = nlohmann::json::array();
    for (const auto& v : violations)
        report["violations"].push_back({{"kind", "relay_limit"},
                                        {"arc", v.arc_index},
                                        {"from", v.from},
                                        {"to", v.to},
                                        {"hours", v.hours},
                                        {"limit", kMaxRelayHours}});
    for (const auto& h : unreachable) report["violations"].push_back({{"kind", "unreachable_hub"}, {"hub", h}});
    if (net.hub_count() == 0) report["violations"].push_back({{"kind", "no_hubs"}});
    err << report.dump() << "\n";
    return kDomainFailure;
}

struct LoadedInputs {
    Network network;
    std::vector<OdFlow> flows;
};

inline LoadedInputs load_inputs(const RunConfig& cfg) {
    LoadedInputs in;
    in.network = load_network(cfg.topology);
    if (!cfg.demand.empty()) {
        in.flows = ingest_od_flows(cfg.demand, in.network);
    } else {
        Rng rng(derive_seed(cfg.seed, 3, 0));
        in.flows = synthesize_od_flows(in.network, cfg.synth_total_annual_tons, rng, cfg.synth_jitter);
    }
    return in;
}

/// Runs one scenario and writes the result files into cfg.out.
inline ScenarioResult run_to_directory(const RunConfig& cfg) {
    try {
        cfg.experiment.validate();
    } catch (const DomainError& e) {
        throw IoError(std::string("config: ") + e.what());
    }
    const LoadedInputs in = load_inputs(cfg);
    const Simulator sim(in.network, in.flows, cfg.experiment);
    ScenarioResult r = run_scenario(sim, cfg.seed, cfg.jobs);
    write_results(r, resolved_config_json(cfg), cfg.out, cfg.dispatch_log);
    return r;
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        const ScenarioResult r = run_to_directory(cfg);
        const auto summary = read_summary(cfg.out);
        print_report(summary, out);
        out << fmt::format("results written to {}\n", cfg.out);
        if (r.max_conservation_error() > 1e-6) {
            err << fmt::format("cost conservation violated: {}\n", r.max_conservation_error());
            return kDomainFailure;
        }
        return kOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "case failure: " << e.what() << "\n";
        return kDomainFailure;
    }
}

/// Prints the quartile table and writes pricing_errors.csv next to summary.json.
inline int cmd_report(const std::string& dir, std::ostream& out, std::ostream& err) {
    try {
        const auto summary = read_summary(dir);
        print_report(summary, out);
        write_text(std::filesystem::path(dir) / "pricing_errors.csv", pricing_errors_csv(summary));
        return kOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return e.exit_code();
    }
}

} // namespace ltl::cli
