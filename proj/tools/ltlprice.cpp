#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ltlprice/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Relay-network LTL simulator with robust dynamic pricing"};
    app.require_subcommand(1);

    std::string topology = ltl::default_topology_path();
    auto* validate = app.add_subcommand("validate", "Check a topology file against the relay constraint");
    validate->add_option("topology", topology, "Topology JSON")->capture_default_str();

    std::string config_path;
    std::optional<int> scenario;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out_dir;
    std::optional<std::string> topology_override;
    std::optional<std::string> demand_override;
    bool desk_scale = false;
    bool full_scale = false;
    bool compare_baseline = false;
    bool no_baseline = false;
    bool dispatch_log = false;
    auto* run = app.add_subcommand("run", "Run a scenario: historical phase, testing cases, KPIs");
    run->add_option("--config", config_path, "JSON config (a previous summary.json also works)");
    run->add_option("--scenario", scenario, "Scenario preset")->check(CLI::Range(1, 3));
    run->add_option("--seed", seed, "Master seed (default 42)");
    run->add_option("--jobs", jobs, "Parallel case workers (default 1)")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory (default results)");
    run->add_option("--topology", topology_override, "Topology JSON (default: bundled GA/FL network)");
    run->add_option("--demand", demand_override, "OD flow CSV; pass an empty string to synthesize gravity flows");
    auto* desk = run->add_flag("--desk-scale", desk_scale, "20 historical / 10 testing cases (the default)");
    run->add_flag("--full-scale", full_scale, "100 historical / 30 testing cases")->excludes(desk);
    auto* cmp = run->add_flag("--compare-baseline", compare_baseline, "Compare against fixed per-pound pricing (on by default)");
    run->add_flag("--no-baseline", no_baseline, "Skip the fixed-price comparison")->excludes(cmp);
    run->add_flag("--dispatch-log", dispatch_log, "Write per-case dispatch logs");

    std::string result_dir = "results";
    auto* report = app.add_subcommand("report", "Print KPI quartiles and write pricing_errors.csv");
    report->add_option("dir", result_dir, "Result directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ltl::cli::kIoFailure;
    }

    if (*validate) return ltl::cli::cmd_validate(topology, std::cout, std::cerr);
    if (*report) return ltl::cli::cmd_report(result_dir, std::cout, std::cerr);

    ltl::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = ltl::load_run_config(config_path);
        if (scenario) {
            const auto keep = cfg.experiment.scenario;
            cfg.experiment.scenario = ltl::ScenarioSpec::preset(*scenario);
            if (!config_path.empty()) {
                cfg.experiment.scenario.n_historical = keep.n_historical;
                cfg.experiment.scenario.n_testing = keep.n_testing;
            }
        }
    } catch (const ltl::Error& e) {
        std::cerr << e.what() << "\n";
        return ltl::cli::kIoFailure;
    }
    if (desk_scale) cfg.experiment.scenario.n_historical = 20, cfg.experiment.scenario.n_testing = 10;
    if (full_scale) cfg.experiment.scenario.n_historical = 100, cfg.experiment.scenario.n_testing = 30;
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (out_dir) cfg.out = *out_dir;
    if (topology_override) cfg.topology = *topology_override;
    if (demand_override) cfg.demand = *demand_override;
    if (compare_baseline) cfg.experiment.compare_baseline = true;
    if (no_baseline) cfg.experiment.compare_baseline = false;
    if (dispatch_log) cfg.dispatch_log = true;
    return ltl::cli::cmd_run(cfg, std::cout, std::cerr);
}
