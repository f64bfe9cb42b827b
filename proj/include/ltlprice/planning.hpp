#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "ltlprice/demand.hpp"
#include "ltlprice/network.hpp"

namespace ltl {

/// Whole hours needed to traverse an arc. Departures happen on the hour.
inline int hop_hours(double hours) { return static_cast<int>(std::ceil(hours - 1e-9)); }

struct TimeExpandedNode {
    std::size_t hub;
    int hour;

    friend bool operator==(const TimeExpandedNode&, const TimeExpandedNode&) = default;
};

struct TimeExpandedArc {
    std::size_t from;                // node index
    std::size_t to;                  // node index
    std::optional<std::size_t> arc;  // network arc; empty for waiting arcs
};

/// Hub x hour nodes over [0, horizon], movement arcs for every traversable
/// direction that fits the horizon, and one-hour waiting arcs. Also carries the
/// integer-hour routing table the planners work from.
///
/// Node index = hub * (horizon + 1) + hour. Arcs are listed node by node in
/// index order: waiting arc first, then moves in neighbour-id order.
class TimeExpandedGraph {
public:
    TimeExpandedGraph(const Network& net, int horizon) : net_(&net), horizon_(horizon) {
        if (horizon < 0) throw DomainError("horizon must be >= 0");
        const std::size_t n = net.hub_count();
        nodes_.reserve(n * static_cast<std::size_t>(horizon + 1));
        for (std::size_t h = 0; h < n; ++h)
            for (int t = 0; t <= horizon; ++t) nodes_.push_back({h, t});
        for (std::size_t h = 0; h < n; ++h)
            for (int t = 0; t <= horizon; ++t) {
                if (t < horizon) arcs_.push_back({node(h, t), node(h, t + 1), std::nullopt}), ++waiting_;
                for (const auto& e : net.neighbors(h)) {
                    const int arrive = t + hop_hours(net.arcs()[e.arc].hours);
                    if (arrive <= horizon) arcs_.push_back({node(h, t), node(e.to, arrive), e.arc});
                }
            }

        direction_arc_.assign(n, std::vector<std::size_t>(n, npos));
        for (std::size_t h = 0; h < n; ++h)
            for (const auto& e : net.neighbors(h)) direction_arc_[h][e.to] = e.arc;

        remaining_.assign(n, std::vector<int>(n, -1));
        next_hop_.assign(n, std::vector<std::size_t>(n, npos));
        for (std::size_t s = 0; s < n; ++s) {
            auto paths = shortest_paths_from(net, s, [](const Arc& a) { return static_cast<double>(hop_hours(a.hours)); });
            for (std::size_t d = 0; d < n; ++d) {
                if (paths[d].hubs.empty()) continue;
                int total = 0;
                for (auto a : paths[d].arcs) total += hop_hours(net.arcs()[a].hours);
                remaining_[s][d] = total;
                next_hop_[s][d] = paths[d].hubs.size() > 1 ? net.index(paths[d].hubs[1]) : s;
            }
        }
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    const Network& network() const { return *net_; }
    int horizon() const { return horizon_; }
    const std::vector<TimeExpandedNode>& nodes() const { return nodes_; }
    const std::vector<TimeExpandedArc>& arcs() const { return arcs_; }
    std::size_t waiting_arc_count() const { return waiting_; }
    std::size_t movement_arc_count() const { return arcs_.size() - waiting_; }

    std::size_t node(std::size_t hub, int hour) const {
        return hub * static_cast<std::size_t>(horizon_ + 1) + static_cast<std::size_t>(hour);
    }

    /// Whole hours from `hub` to `dest` along the integer-hour shortest route.
    int remaining_hours(std::size_t hub, std::size_t dest) const { return remaining_.at(hub).at(dest); }

    std::size_t next_hop(std::size_t hub, std::size_t dest) const { return next_hop_.at(hub).at(dest); }

    /// Network arc used to move from `from` to the adjacent hub `to`.
    std::size_t arc_between(std::size_t from, std::size_t to) const {
        const std::size_t a = direction_arc_.at(from).at(to);
        if (a == npos) throw DomainError(fmt::format("no arc {} -> {}", net_->id(from), net_->id(to)));
        return a;
    }

    int hop(std::size_t from, std::size_t to) const { return hop_hours(net_->arcs()[arc_between(from, to)].hours); }

private:
    const Network* net_;
    int horizon_;
    std::vector<TimeExpandedNode> nodes_;
    std::vector<TimeExpandedArc> arcs_;
    std::size_t waiting_ = 0;
    std::vector<std::vector<std::size_t>> direction_arc_;
    std::vector<std::vector<int>> remaining_;
    std::vector<std::vector<std::size_t>> next_hop_;
};

inline TimeExpandedGraph build_time_expanded_graph(const Network& net, int horizon) {
    return TimeExpandedGraph(net, horizon);
}

struct ManifestEntry {
    std::uint32_t request_id;
    double pounds;
};

struct TruckDispatch {
    std::size_t truck_id = 0;
    std::size_t arc = 0;
    HubId from;
    HubId to;
    int depart_hour = 0;
    int arrive_hour = 0;
    double miles = 0.0;
    double leg_cost = 0.0; // miles x per-truck-mile rate
    std::vector<ManifestEntry> manifest;

    double load() const {
        double s = 0.0;
        for (const auto& m : manifest) s += m.pounds;
        return s;
    }
};

/// Where a request is and what has happened to it so far. Index-aligned with
/// the request list handed to the planner.
struct ShipmentState {
    std::size_t hub = 0;
    int ready_hour = 0; // hour the request is available at `hub`
    bool delivered = false;
    bool feasible = true;
    int arrival_hour = -1;
    std::vector<TimeExpandedNode> itinerary;  // departure and arrival nodes, in order
    std::vector<std::size_t> legs;            // truck ids
};

inline std::vector<ShipmentState> initial_states(std::span<const ShipmentRequest> requests, const Network& net) {
    std::vector<ShipmentState> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        ShipmentState s;
        s.hub = net.index(r.origin);
        s.ready_hour = r.release_hour;
        if (r.origin == r.destination) throw DomainError(fmt::format("request {} has origin == destination", r.id));
        out.push_back(std::move(s));
    }
    return out;
}

struct PlannerOptions {
    double truck_capacity = 40000.0;
    double fill_threshold = 0.8;  // fraction of capacity that releases a truck
    int urgency_slack_hours = 1;  // a truck leaves if any onboard request has slack <= this

    void validate() const {
        if (!(truck_capacity > 0.0)) throw DomainError("truck_capacity must be > 0");
        if (!(fill_threshold >= 0.0 && fill_threshold <= 1.0)) throw DomainError("fill_threshold must be in [0,1]");
        if (urgency_slack_hours < 0) throw DomainError("urgency_slack_hours must be >= 0");
    }
};

/// Planner interface: called once per hourly instance with every request,
/// mutates the states of the ones it moves and returns the trucks it sends.
class Planner {
public:
    virtual ~Planner() = default;
    virtual std::vector<TruckDispatch> plan_instance(std::span<const ShipmentRequest> requests,
                                                     std::vector<ShipmentState>& states, int now,
                                                     const TimeExpandedGraph& graph, const ArcCostTable& costs,
                                                     std::size_t& next_truck_id) const = 0;
};

/// Hours a request can still wait at its current hub and make its deadline.
inline int slack_hours(const ShipmentRequest& req, const ShipmentState& s, int now, const TimeExpandedGraph& g) {
    const int latest = static_cast<int>(std::floor(req.deadline + 1e-9));
    return latest - now - g.remaining_hours(s.hub, g.network().index(req.destination));
}

/// Greedy consolidation. Each ready request heads for the next hub on its
/// shortest integer-hour route. Requests sharing (hub, next hub) are sorted by
/// slack and packed first-fit; a truck leaves when it is at least
/// `fill_threshold` full or carries a request with slack <= urgency_slack_hours.
/// Everything else waits for the next instance and is repacked then.
class GreedyConsolidationPlanner final : public Planner {
public:
    explicit GreedyConsolidationPlanner(PlannerOptions opt = {}) : opt_(opt) { opt_.validate(); }

    const PlannerOptions& options() const { return opt_; }

    std::vector<TruckDispatch> plan_instance(std::span<const ShipmentRequest> requests,
                                             std::vector<ShipmentState>& states, int now,
                                             const TimeExpandedGraph& graph, const ArcCostTable& costs,
                                             std::size_t& next_truck_id) const override {
        const Network& net = graph.network();
        struct Candidate {
            std::size_t index;
            int slack;
        };
        std::map<std::pair<std::size_t, std::size_t>, std::vector<Candidate>> lanes;
        for (std::size_t i = 0; i < requests.size(); ++i) {
            ShipmentState& s = states[i];
            if (s.delivered || requests[i].release_hour > now || s.ready_hour > now) continue;
            const int slack = slack_hours(requests[i], s, now, graph);
            if (slack < 0) s.feasible = false;
            const std::size_t next = graph.next_hop(s.hub, net.index(requests[i].destination));
            lanes[{s.hub, next}].push_back({i, slack});
        }

        std::vector<TruckDispatch> out;
        for (auto& [lane, cands] : lanes) {
            std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
                if (a.slack != b.slack) return a.slack < b.slack;
                return requests[a.index].id < requests[b.index].id;
            });
            struct Truck {
                double load = 0.0;
                int min_slack = 0;
                std::vector<std::size_t> members;
            };
            std::vector<Truck> trucks;
            for (const auto& c : cands) {
                const double w = requests[c.index].pounds;
                if (w > opt_.truck_capacity)
                    throw DomainError(fmt::format("request {} exceeds truck capacity", requests[c.index].id));
                auto it = std::find_if(trucks.begin(), trucks.end(),
                                       [&](const Truck& t) { return t.load + w <= opt_.truck_capacity + 1e-9; });
                if (it == trucks.end()) {
                    trucks.push_back({0.0, c.slack, {}});
                    it = std::prev(trucks.end());
                }
                it->load += w;
                it->min_slack = std::min(it->min_slack, c.slack);
                it->members.push_back(c.index);
            }

            const auto [from, to] = lane;
            const std::size_t arc = graph.arc_between(from, to);
            const int arrive = now + graph.hop(from, to);
            for (const auto& t : trucks) {
                const bool full = t.load >= opt_.fill_threshold * opt_.truck_capacity - 1e-9;
                const bool urgent = t.min_slack <= opt_.urgency_slack_hours;
                if (!full && !urgent) continue;
                if (arrive > graph.horizon())
                    throw std::logic_error(fmt::format("dispatch at hour {} runs past horizon {}", now, graph.horizon()));
                TruckDispatch d;
                d.truck_id = next_truck_id++;
                d.arc = arc;
                d.from = net.id(from);
                d.to = net.id(to);
                d.depart_hour = now;
                d.arrive_hour = arrive;
                d.miles = net.arcs()[arc].miles;
                d.leg_cost = d.miles * costs.per_truck_mile.at(arc);
                for (auto idx : t.members) {
                    const ShipmentRequest& r = requests[idx];
                    ShipmentState& s = states[idx];
                    d.manifest.push_back({r.id, r.pounds});
                    s.itinerary.push_back({from, now});
                    s.itinerary.push_back({to, arrive});
                    s.legs.push_back(d.truck_id);
                    s.hub = to;
                    s.ready_hour = arrive;
                    if (to == net.index(r.destination)) {
                        s.delivered = true;
                        s.arrival_hour = arrive;
                        if (arrive > r.deadline + 1e-9) s.feasible = false;
                    }
                }
                out.push_back(std::move(d));
            }
        }
        return out;
    }

private:
    PlannerOptions opt_;
};

/// Per-request share of one truck leg, pro rata by weight. Index-aligned with
/// the manifest.
inline std::vector<double> leg_shares(const TruckDispatch& d, const ArcCostTable& costs) {
    const double leg = d.miles * costs.per_truck_mile.at(d.arc);
    const double total = d.load();
    std::vector<double> out;
    out.reserve(d.manifest.size());
    for (const auto& m : d.manifest) out.push_back(leg * (m.pounds / total));
    return out;
}

struct CostAllocation {
    std::unordered_map<std::uint32_t, double> leg_cost;   // per request
    std::unordered_map<std::uint32_t, double> transload;  // per request
    double dispatched_leg_cost = 0.0;                     // sum over trucks
    double transload_charges = 0.0;                       // sum over transfers

    double cost(std::uint32_t request) const {
        double c = 0.0;
        if (auto it = leg_cost.find(request); it != leg_cost.end()) c += it->second;
        if (auto it = transload.find(request); it != transload.end()) c += it->second;
        return c;
    }

    double allocated_total() const {
        double s = 0.0;
        for (const auto& [id, c] : leg_cost) s += c;
        for (const auto& [id, c] : transload) s += c;
        return s;
    }
};

/// Realized cost per request: weight-proportional leg shares plus a per-pound
/// transload charge at every hub where the request changes trucks.
inline CostAllocation allocate_costs(std::span<const TruckDispatch> dispatches, const ArcCostTable& costs,
                                     const Network& net) {
    CostAllocation out;
    struct Leg {
        int depart;
        HubId from;
        double pounds;
    };
    std::map<std::uint32_t, std::vector<Leg>> by_request;
    for (const auto& d : dispatches) {
        out.dispatched_leg_cost += d.miles * costs.per_truck_mile.at(d.arc);
        const auto shares = leg_shares(d, costs);
        for (std::size_t i = 0; i < d.manifest.size(); ++i) {
            out.leg_cost[d.manifest[i].request_id] += shares[i];
            by_request[d.manifest[i].request_id].push_back({d.depart_hour, d.from, d.manifest[i].pounds});
        }
    }
    for (auto& [id, legs] : by_request) {
        std::sort(legs.begin(), legs.end(), [](const Leg& a, const Leg& b) { return a.depart < b.depart; });
        double charge = 0.0;
        for (std::size_t i = 1; i < legs.size(); ++i)
            charge += costs.per_pound_transload.at(net.index(legs[i].from)) * legs[i].pounds;
        out.transload[id] = charge;
        out.transload_charges += charge;
    }
    return out;
}

} // namespace ltl
