#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "ltlprice/demand.hpp"
#include "ltlprice/network.hpp"
#include "ltlprice/planning.hpp"
#include "ltlprice/pricing.hpp"

namespace ltl {

enum class CaseRole { historical, testing };

inline const char* to_string(CaseRole r) { return r == CaseRole::historical ? "historical" : "testing"; }

struct ExperimentConfig {
    ScenarioSpec scenario;
    DemandOptions demand;
    PlannerOptions planner;
    RobustnessConfig robustness;
    double fallback_margin = 3.0;
    double baseline_markup = 1.3;
    double histogram_bin_width = 0.02;
    bool compare_baseline = true;

    void validate() const {
        scenario.validate();
        planner.validate();
        robustness.validate();
        if (demand.truck_capacity != planner.truck_capacity)
            throw DomainError("demand and planner truck capacities differ");
        if (!(fallback_margin > 0.0)) throw DomainError("fallback_margin must be > 0");
        if (!(baseline_markup > 0.0)) throw DomainError("baseline_markup must be > 0");
        if (!(histogram_bin_width > 0.0)) throw DomainError("histogram_bin_width must be > 0");
    }
};

/// Case-level KPIs over feasible requests. Undefined when no feasible weight.
struct CaseKPIs {
    bool defined = false;
    double total_deviation = 0.0;
    double per_pound_deviation = 0.0;
    double avg_price_per_pound = 0.0;
    double total_pounds = 0.0;
    double total_price = 0.0;
    double total_cost = 0.0;
    double profit = 0.0;
    std::vector<double> pricing_errors; // (p_k - c_k) / v_k
};

struct Case {
    std::size_t id = 0;
    CaseRole role = CaseRole::testing;
    std::uint64_t seed = 0;
    ArcCostTable costs;
    std::vector<ShipmentRequest> requests;
    std::vector<ShipmentState> states;       // index-aligned with requests
    std::vector<double> realized_cost;       // index-aligned with requests
    std::vector<Quote> quotes;               // testing only, index-aligned with requests
    std::vector<OutcomeRecord> outcomes;     // testing only, in delivery order
    std::vector<TruckDispatch> dispatches;
    CostPool observations;                   // historical: this case's contribution
    double allocated_total = 0.0;
    double dispatched_leg_cost = 0.0;
    double transload_charges = 0.0;
    CaseKPIs kpis;

    std::size_t n_infeasible() const {
        return static_cast<std::size_t>(
            std::count_if(states.begin(), states.end(), [](const ShipmentState& s) { return !s.feasible; }));
    }
    double conservation_error() const { return std::abs(allocated_total - (dispatched_leg_cost + transload_charges)); }
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Rethrows the first failure.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Everything a scenario run shares across cases: topology, flows, config,
/// the time-expanded graph and the cold-start estimator. Immutable.
class Simulator {
public:
    Simulator(const Network& net, std::vector<OdFlow> flows, ExperimentConfig cfg)
        : net_(&net), flows_(std::move(flows)), cfg_(std::move(cfg)),
          graph_(net, graph_horizon(net, cfg_.demand)),
          fallback_(net, {cfg_.scenario.costs.truck_mile.midpoint(), cfg_.scenario.costs.transload.midpoint()},
                    cfg_.planner.truck_capacity, cfg_.fallback_margin),
          planner_(cfg_.planner) {
        cfg_.validate();
    }

    const Network& network() const { return *net_; }
    const ExperimentConfig& config() const { return cfg_; }
    const std::vector<OdFlow>& flows() const { return flows_; }
    const TimeExpandedGraph& graph() const { return graph_; }

    /// Simulates one 48 h world. Testing cases quote every request on release
    /// against `historical` plus a case-local real-time pool; historical cases
    /// only log realized costs.
    Case run_case(CaseRole role, std::size_t id, std::uint64_t seed, const CostPool* historical = nullptr) const {
        if (role == CaseRole::testing && historical == nullptr)
            throw std::invalid_argument("testing case needs a historical pool");
        Case c;
        c.id = id;
        c.role = role;
        c.seed = seed;
        Rng cost_rng(derive_seed(seed, 1, 0));
        Rng demand_rng(derive_seed(seed, 2, 0));
        c.costs = sample_arc_costs(*net_, cfg_.scenario.costs, cost_rng);
        c.requests = spawn_requests(flows_, cfg_.scenario, *net_, cfg_.demand, demand_rng);
        c.states = initial_states(c.requests, *net_);
        c.realized_cost.assign(c.requests.size(), 0.0);
        if (role == CaseRole::testing) c.quotes.resize(c.requests.size());

        const auto& rb = cfg_.robustness;
        CostPool realtime;
        std::map<int, std::vector<std::size_t>> deliveries;
        std::size_t delivered = 0;
        std::size_t released = 0;
        std::size_t next_truck = 0;
        auto fallback = std::cref(fallback_);

        for (int now = 0; delivered < c.requests.size() || released < c.requests.size(); ++now) {
            if (now > graph_.horizon()) throw std::logic_error("simulation ran past the time-expanded horizon");

            // Step 5 for requests reaching their destination this hour.
            if (auto it = deliveries.find(now); it != deliveries.end()) {
                std::sort(it->second.begin(), it->second.end());
                for (auto i : it->second) {
                    const double cost = c.realized_cost[i];
                    if (role == CaseRole::testing) {
                        c.outcomes.push_back(record_outcome(c.quotes[i], cost, realtime, rb));
                    } else {
                        c.observations.add(group_key(c.requests[i], rb.bucket_hours),
                                           {cost / c.requests[i].pounds, rb.weight_historical, Provenance::historical});
                    }
                    ++delivered;
                }
                deliveries.erase(it);
            }

            // Step 3: quote on arrival.
            for (; released < c.requests.size() && c.requests[released].release_hour == now; ++released)
                if (role == CaseRole::testing)
                    c.quotes[released] = quote(c.requests[released], *historical, realtime, rb, fallback);

            // Step 4: route and consolidate.
            auto trucks = planner_.plan_instance(c.requests, c.states, now, graph_, c.costs, next_truck);
            for (auto& d : trucks) {
                const auto shares = leg_shares(d, c.costs);
                for (std::size_t m = 0; m < d.manifest.size(); ++m) {
                    const std::size_t i = d.manifest[m].request_id;
                    c.realized_cost[i] += shares[m];
                    if (d.from != c.requests[i].origin)
                        c.realized_cost[i] +=
                            c.costs.per_pound_transload[net_->index(d.from)] * c.requests[i].pounds;
                    if (c.states[i].delivered && c.states[i].arrival_hour == d.arrive_hour)
                        deliveries[d.arrive_hour].push_back(i);
                }
                c.dispatches.push_back(std::move(d));
            }
        }

        const CostAllocation alloc = allocate_costs(c.dispatches, c.costs, *net_);
        c.allocated_total = alloc.allocated_total();
        c.dispatched_leg_cost = alloc.dispatched_leg_cost;
        c.transload_charges = alloc.transload_charges;
        for (std::size_t i = 0; i < c.requests.size(); ++i) {
            const double batch = alloc.cost(c.requests[i].id);
            if (std::abs(batch - c.realized_cost[i]) > 1e-6 * std::max(1.0, batch))
                throw std::logic_error(fmt::format("case {}: request {} cost {} != allocated {}", id, i,
                                                   c.realized_cost[i], batch));
        }
        if (role == CaseRole::testing) c.kpis = compute_kpis(c);
        return c;
    }

    static CaseKPIs compute_kpis(const Case& c) {
        CaseKPIs k;
        for (std::size_t i = 0; i < c.requests.size(); ++i) {
            if (!c.states[i].feasible) continue;
            const double v = c.requests[i].pounds;
            const double p = c.quotes.at(i).total_price;
            const double cost = c.realized_cost[i];
            k.total_deviation += std::abs(p - cost);
            k.total_pounds += v;
            k.total_price += p;
            k.total_cost += cost;
            k.pricing_errors.push_back((p - cost) / v);
        }
        k.profit = k.total_price - k.total_cost;
        k.defined = k.total_pounds > 0.0;
        if (k.defined) {
            k.per_pound_deviation = k.total_deviation / k.total_pounds;
            k.avg_price_per_pound = k.total_price / k.total_pounds;
        }
        return k;
    }

private:
    static int graph_horizon(const Network& net, const DemandOptions& d) {
        int longest = 0;
        for (std::size_t s = 0; s < net.hub_count(); ++s)
            for (const auto& p : shortest_paths_from(net, s, [](const Arc& a) { return static_cast<double>(hop_hours(a.hours)); }))
                if (!p.hubs.empty()) {
                    int t = 0;
                    for (auto a : p.arcs) t += hop_hours(net.arcs()[a].hours);
                    longest = std::max(longest, t);
                }
        return d.horizon_hours + static_cast<int>(std::ceil(d.max_window_hours)) + longest;
    }

    const Network* net_;
    std::vector<OdFlow> flows_;
    ExperimentConfig cfg_;
    TimeExpandedGraph graph_;
    FallbackEstimator fallback_;
    GreedyConsolidationPlanner planner_;
};

inline CaseKPIs compute_kpis(const Case& c) { return Simulator::compute_kpis(c); }

inline std::uint64_t historical_seed(std::uint64_t master, std::size_t i) { return derive_seed(master, 1, i); }
inline std::uint64_t testing_seed(std::uint64_t master, std::size_t i) { return derive_seed(master, 2, i); }

struct HistoricalPhase {
    CostPool pool;
    std::vector<Case> cases;
};

/// Historical pool built from n_historical cases, merged in case order.
inline HistoricalPhase run_historical_phase(const Simulator& sim, std::uint64_t master_seed, int jobs = 1) {
    const auto n = static_cast<std::size_t>(sim.config().scenario.n_historical);
    HistoricalPhase out;
    out.cases.resize(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        out.cases[i] = sim.run_case(CaseRole::historical, i, historical_seed(master_seed, i));
    });
    for (const auto& c : out.cases) out.pool.merge(c.observations);
    return out;
}

inline Case run_testing_case(const Simulator& sim, const CostPool& historical, std::size_t id, std::uint64_t seed) {
    return sim.run_case(CaseRole::testing, id, seed, &historical);
}

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Linear-interpolation quantile at position p * (n - 1) of the sorted values.
inline double quantile_r7(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("quantile of an empty list");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline Quartiles quartiles(const std::vector<double>& values) {
    return {quantile_r7(values, 0.25), quantile_r7(values, 0.5), quantile_r7(values, 0.75)};
}

struct HistogramBin {
    double low;
    double high;
    std::size_t count;
};

struct ErrorHistogram {
    double bin_width = 0.02;
    std::vector<HistogramBin> bins; // nonempty bins, ascending
    std::size_t total = 0;
    std::size_t nonnegative = 0;

    double nonnegative_share() const { return total ? static_cast<double>(nonnegative) / total : 0.0; }
};

inline ErrorHistogram histogram_of(std::span<const double> errors, double width) {
    ErrorHistogram h;
    h.bin_width = width;
    std::map<long long, std::size_t> counts;
    for (double e : errors) {
        counts[static_cast<long long>(std::floor(e / width + 1e-12))]++;
        ++h.total;
        if (e >= 0.0) ++h.nonnegative;
    }
    for (const auto& [b, n] : counts)
        h.bins.push_back({static_cast<double>(b) * width, static_cast<double>(b + 1) * width, n});
    return h;
}

/// Per-pound pricing errors of every feasible request across `cases`.
inline ErrorHistogram pricing_error_histogram(std::span<const Case> cases, double width = 0.02) {
    std::vector<double> all;
    for (const auto& c : cases) all.insert(all.end(), c.kpis.pricing_errors.begin(), c.kpis.pricing_errors.end());
    return histogram_of(all, width);
}

struct BaselineCase {
    std::size_t case_id;
    double dynamic_profit;
    double baseline_profit;
    double difference; // dynamic - baseline
    CaseKPIs baseline;
};

struct BaselineComparison {
    double rate = 0.0; // $/lb
    std::vector<BaselineCase> cases;
    double dynamic_profit = 0.0;
    double baseline_profit = 0.0;
};

/// Re-prices the same testing cases at a flat per-pound rate. Requests and
/// realized costs are taken from the cases, so both strategies are compared on
/// identical streams.
inline BaselineComparison run_fixed_price_baseline(std::span<const Case> cases, double rate) {
    BaselineComparison out;
    out.rate = rate;
    for (const auto& c : cases) {
        Case flat;
        flat.requests = c.requests;
        flat.states = c.states;
        flat.realized_cost = c.realized_cost;
        flat.quotes = c.quotes;
        for (std::size_t i = 0; i < flat.quotes.size(); ++i) {
            flat.quotes[i].per_pound_price = rate;
            flat.quotes[i].total_price = rate * c.requests[i].pounds;
        }
        BaselineCase bc{c.id, c.kpis.profit, 0.0, 0.0, compute_kpis(flat)};
        bc.baseline_profit = bc.baseline.profit;
        bc.difference = bc.dynamic_profit - bc.baseline_profit;
        out.dynamic_profit += bc.dynamic_profit;
        out.baseline_profit += bc.baseline_profit;
        out.cases.push_back(std::move(bc));
    }
    return out;
}

struct KpiSummary {
    Quartiles total_deviation;
    Quartiles per_pound_deviation;
    Quartiles avg_price_per_pound;
};

inline KpiSummary summarize(std::span<const Case> cases) {
    std::vector<double> td, ppd, app;
    for (const auto& c : cases) {
        if (!c.kpis.defined) continue;
        td.push_back(c.kpis.total_deviation);
        ppd.push_back(c.kpis.per_pound_deviation);
        app.push_back(c.kpis.avg_price_per_pound);
    }
    if (td.empty()) throw DomainError("no testing case has defined KPIs");
    return {quartiles(td), quartiles(ppd), quartiles(app)};
}

struct ScenarioResult {
    ScenarioSpec scenario;
    std::uint64_t master_seed = 0;
    std::size_t historical_observations = 0;
    double historical_mean_per_pound = 0.0;
    double historical_conservation_error = 0.0;
    std::string historical_pool_csv;
    std::vector<Case> testing;
    KpiSummary kpis;
    ErrorHistogram histogram;
    std::optional<BaselineComparison> baseline;

    std::size_t n_requests() const {
        std::size_t n = 0;
        for (const auto& c : testing) n += c.requests.size();
        return n;
    }
    std::size_t n_infeasible() const {
        std::size_t n = 0;
        for (const auto& c : testing) n += c.n_infeasible();
        return n;
    }
    double max_conservation_error() const {
        double e = historical_conservation_error;
        for (const auto& c : testing) e = std::max(e, c.conservation_error());
        return e;
    }
};

/// Historical phase, testing cases, KPI quartiles, histogram and optional
/// fixed-price comparison. Output does not depend on `jobs`.
inline ScenarioResult run_scenario(const Simulator& sim, std::uint64_t master_seed, int jobs = 1) {
    const auto& cfg = sim.config();
    ScenarioResult r;
    r.scenario = cfg.scenario;
    r.master_seed = master_seed;

    HistoricalPhase hist = run_historical_phase(sim, master_seed, jobs);
    r.historical_observations = hist.pool.size();
    r.historical_mean_per_pound = hist.pool.global_mean();
    r.historical_pool_csv = hist.pool.to_csv();
    for (const auto& c : hist.cases)
        r.historical_conservation_error = std::max(r.historical_conservation_error, c.conservation_error());

    const auto n = static_cast<std::size_t>(cfg.scenario.n_testing);
    r.testing.resize(n);
    const CostPool& frozen = hist.pool;
    parallel_for(n, jobs, [&](std::size_t i) {
        r.testing[i] = run_testing_case(sim, frozen, i, testing_seed(master_seed, i));
    });

    r.kpis = summarize(r.testing);
    r.histogram = pricing_error_histogram(r.testing, cfg.histogram_bin_width);
    if (cfg.compare_baseline)
        r.baseline = run_fixed_price_baseline(r.testing, r.historical_mean_per_pound * cfg.baseline_markup);
    return r;
}

} // namespace ltl
