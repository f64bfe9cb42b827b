#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "ltlprice/common.hpp"
#include "ltlprice/network.hpp"

namespace ltl {

struct OdFlow {
    HubId origin;
    HubId destination;
    double annual_tons = 0.0;
};

/// One experimental setup: share of the ingested flow handled, the request
/// size cap, the cost regime and the case counts.
struct ScenarioSpec {
    int id = 1;
    double ltl_flow_fraction = 0.01;
    double volume_upper_bound = 1.0 / 3.0; // fraction of a truckload
    CostModel costs;
    int n_historical = 20;
    int n_testing = 10;

    void validate() const {
        if (!(ltl_flow_fraction > 0.0 && ltl_flow_fraction <= 1.0))
            throw DomainError(fmt::format("ltl_flow_fraction must be in (0,1], got {}", ltl_flow_fraction));
        if (!(volume_upper_bound > 0.0 && volume_upper_bound <= 1.0))
            throw DomainError(fmt::format("volume_upper_bound must be in (0,1], got {}", volume_upper_bound));
        if (n_historical <= 0 || n_testing <= 0) throw DomainError("case counts must be > 0");
        costs.truck_mile.validate("per-truck-mile cost");
        costs.transload.validate("per-pound transload cost");
    }

    /// Presets 1-3 at desk scale (20 historical / 10 testing cases).
    static ScenarioSpec preset(int id) {
        ScenarioSpec s;
        s.id = id;
        switch (id) {
        case 1:
            break;
        case 2:
            s.costs = {{1.0, 3.0}, {0.02, 0.06}};
            break;
        case 3:
            s.ltl_flow_fraction = 0.05;
            s.volume_upper_bound = 1.0;
            s.costs = {{1.0, 3.0}, {0.02, 0.06}};
            break;
        default:
            throw DomainError(fmt::format("unknown scenario preset {}", id));
        }
        return s;
    }
};

struct ShipmentRequest {
    std::uint32_t id = 0;
    HubId origin;
    HubId destination;
    int release_hour = 0;
    double deadline = 0.0; // hours since horizon start
    double pounds = 0.0;

    double window() const { return deadline - release_hour; }

    friend bool operator==(const ShipmentRequest&, const ShipmentRequest&) = default;
};

struct DemandOptions {
    int horizon_hours = 48;
    double truck_capacity = 40000.0;
    double min_demand_fraction = 0.05;   // of truck capacity
    double min_request_pounds = 500.0;   // truncated remainders below this are dropped
    double window_margin_hours = 4.0;    // added to the shortest travel time
    double max_window_hours = 24.0;
};

inline std::vector<OdFlow> parse_od_flows(std::istream& in, const Network& net) {
    std::vector<OdFlow> flows;
    std::string line;
    if (!std::getline(in, line)) return flows;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "origin,destination,annual_tons")
        throw IoError("OD flow CSV header must be 'origin,destination,annual_tons', got '" + line + "'");
    for (int row = 2; std::getline(in, line); ++row) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 3) throw IoError(fmt::format("OD flow row {}: expected 3 fields, got {}", row, cells.size()));
        OdFlow f{cells[0], cells[1], 0.0};
        try {
            std::size_t used = 0;
            f.annual_tons = std::stod(cells[2], &used);
            if (used != cells[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw IoError(fmt::format("OD flow row {}: malformed tonnage '{}'", row, cells[2]));
        }
        if (!net.contains(f.origin)) throw DomainError(fmt::format("OD flow row {}: unknown hub '{}'", row, f.origin));
        if (!net.contains(f.destination))
            throw DomainError(fmt::format("OD flow row {}: unknown hub '{}'", row, f.destination));
        if (f.origin == f.destination) throw DomainError(fmt::format("OD flow row {}: origin equals destination", row));
        if (!(f.annual_tons >= 0.0) || !std::isfinite(f.annual_tons))
            throw DomainError(fmt::format("OD flow row {}: tonnage must be >= 0", row));
        flows.push_back(std::move(f));
    }
    return flows;
}

inline std::vector<OdFlow> ingest_od_flows(const std::string& path, const Network& net) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OD flow file '" + path + "'");
    return parse_od_flows(in, net);
}

/// Gravity flows: w_o * w_d / miles(o,d), scaled to `total_annual_tons`.
/// With jitter > 0 each pair is additionally scaled by U[1 - jitter, 1 + jitter].
inline std::vector<OdFlow> synthesize_od_flows(const Network& net, double total_annual_tons, Rng& rng,
                                               double jitter = 0.0) {
    if (!(total_annual_tons > 0.0)) throw DomainError("total_annual_tons must be > 0");
    if (jitter < 0.0 || jitter >= 1.0) throw DomainError("jitter must be in [0,1)");
    const auto paths = all_shortest_time_paths(net);
    std::vector<OdFlow> flows;
    double sum = 0.0;
    for (std::size_t o = 0; o < net.hub_count(); ++o)
        for (std::size_t d = 0; d < net.hub_count(); ++d) {
            if (o == d) continue;
            double g = net.hubs()[o].weight * net.hubs()[d].weight / paths[o][d].miles;
            if (jitter > 0.0) g *= rng.uniform(1.0 - jitter, 1.0 + jitter);
            flows.push_back({net.id(o), net.id(d), g});
            sum += g;
        }
    for (auto& f : flows) f.annual_tons *= total_annual_tons / sum;
    return flows;
}

/// Pounds to be moved for one OD pair over the horizon.
inline double horizon_target_pounds(const OdFlow& flow, const ScenarioSpec& spec, const DemandOptions& opt) {
    return flow.annual_tons * (opt.horizon_hours / kHoursPerYear) * spec.ltl_flow_fraction * kPoundsPerTon;
}

/// Generates the horizon's requests. Result is ordered by release hour and
/// then generation order; ids are assigned in that order.
inline std::vector<ShipmentRequest> spawn_requests(const std::vector<OdFlow>& flows, const ScenarioSpec& spec,
                                                   const Network& net, const DemandOptions& opt, Rng& rng) {
    const auto paths = all_shortest_time_paths(net);
    const double cap = opt.truck_capacity;
    const double lo = opt.min_demand_fraction;
    const double hi = spec.volume_upper_bound;
    if (!(lo < hi)) throw DomainError("min_demand_fraction must be below volume_upper_bound");

    std::vector<ShipmentRequest> out;
    for (const auto& f : flows) {
        const double target = horizon_target_pounds(f, spec, opt);
        if (target <= 0.0) continue;
        const double shortest = paths[net.index(f.origin)][net.index(f.destination)].hours;
        const double min_window = shortest + opt.window_margin_hours;
        if (min_window > opt.max_window_hours)
            throw DomainError(fmt::format("OD pair {}->{}: shortest time {} h + {} h exceeds the {} h window",
                                          f.origin, f.destination, shortest, opt.window_margin_hours,
                                          opt.max_window_hours));
        const int last_release = opt.horizon_hours - static_cast<int>(std::ceil(min_window));
        if (last_release <= 0)
            throw DomainError(fmt::format("OD pair {}->{}: no release hour leaves a feasible window", f.origin,
                                          f.destination));
        double consumed = 0.0;
        while (consumed < target) {
            // (lo, hi] of capacity
            double pounds = cap * (hi - (hi - lo) * rng.uniform01());
            if (consumed + pounds >= target) {
                pounds = target - consumed;
                consumed = target;
                if (pounds < opt.min_request_pounds) break;
            } else {
                consumed += pounds;
            }
            ShipmentRequest r;
            r.origin = f.origin;
            r.destination = f.destination;
            r.pounds = pounds;
            r.release_hour = static_cast<int>(rng.uniform_int(0, last_release));
            r.deadline = r.release_hour + rng.uniform(min_window, opt.max_window_hours);
            out.push_back(std::move(r));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ShipmentRequest& a, const ShipmentRequest& b) { return a.release_hour < b.release_hour; });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<std::uint32_t>(i);
    return out;
}

} // namespace ltl
