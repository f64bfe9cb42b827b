#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ltlprice/common.hpp"

namespace ltl {

/// Relay limit in hours. Arcs at exactly the limit are admitted.
inline constexpr double kMaxRelayHours = 5.5;

struct Hub {
    HubId id;
    std::string name;
    std::string zone;
    double weight = 1.0; // gravity weight used when synthesizing OD flows
    std::optional<double> lat;
    std::optional<double> lon;
};

struct Arc {
    HubId from;
    HubId to;
    double miles = 0.0;
    double hours = 0.0;
};

/// One traversable direction of an arc.
struct Adjacency {
    std::size_t to;   // hub index
    std::size_t arc;  // index into Network::arcs()
};

/// Hubs plus relay arcs. Construction checks the structural invariants
/// (unique ids, known endpoints, no self loops, positive lengths). The relay
/// limit and connectivity are checked separately so that they can be reported
/// as data, see validate_relay_constraint() and require_valid().
///
/// Arcs are traversable both ways. When the file lists both directions of a
/// link explicitly, each direction uses its own arc; otherwise the single
/// stored arc serves both.
class Network {
public:
    Network() = default;

    Network(std::vector<Hub> hubs, std::vector<Arc> arcs) : hubs_(std::move(hubs)), arcs_(std::move(arcs)) {
        for (std::size_t i = 0; i < hubs_.size(); ++i) {
            if (hubs_[i].id.empty()) throw DomainError(fmt::format("hub #{} has an empty id", i));
            if (!index_.emplace(hubs_[i].id, i).second)
                throw DomainError(fmt::format("duplicate hub id '{}'", hubs_[i].id));
            if (!(hubs_[i].weight > 0.0))
                throw DomainError(fmt::format("hub '{}' has non-positive weight", hubs_[i].id));
        }
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> directed;
        for (std::size_t a = 0; a < arcs_.size(); ++a) {
            const Arc& arc = arcs_[a];
            const auto label = fmt::format("arc #{} {}-{}", a, arc.from, arc.to);
            if (!contains(arc.from)) throw DomainError(label + ": unknown hub '" + arc.from + "'");
            if (!contains(arc.to)) throw DomainError(label + ": unknown hub '" + arc.to + "'");
            if (arc.from == arc.to) throw DomainError(label + ": self loop");
            if (!(arc.miles > 0.0)) throw DomainError(label + ": miles must be > 0");
            if (!(arc.hours > 0.0)) throw DomainError(label + ": hours must be > 0");
            if (!directed.emplace(std::pair{index(arc.from), index(arc.to)}, a).second)
                throw DomainError(label + ": duplicate arc for this direction");
        }
        adjacency_.resize(hubs_.size());
        for (std::size_t a = 0; a < arcs_.size(); ++a) {
            const std::size_t u = index(arcs_[a].from);
            const std::size_t v = index(arcs_[a].to);
            adjacency_[u].push_back({v, a});
            if (!directed.count({v, u})) adjacency_[v].push_back({u, a});
        }
        for (auto& adj : adjacency_)
            std::sort(adj.begin(), adj.end(), [&](const Adjacency& x, const Adjacency& y) {
                return hubs_[x.to].id < hubs_[y.to].id;
            });
    }

    const std::vector<Hub>& hubs() const { return hubs_; }
    const std::vector<Arc>& arcs() const { return arcs_; }
    std::size_t hub_count() const { return hubs_.size(); }

    bool contains(const HubId& id) const { return index_.count(id) != 0; }

    std::size_t index(const HubId& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw DomainError("unknown hub id '" + id + "'");
        return it->second;
    }

    const HubId& id(std::size_t hub) const { return hubs_.at(hub).id; }

    /// Outgoing directions from `hub`, ordered by neighbour id.
    const std::vector<Adjacency>& neighbors(std::size_t hub) const { return adjacency_.at(hub); }

    double max_arc_hours() const {
        double m = 0.0;
        for (const auto& a : arcs_) m = std::max(m, a.hours);
        return m;
    }

private:
    std::vector<Hub> hubs_;
    std::vector<Arc> arcs_;
    std::map<HubId, std::size_t> index_;
    std::vector<std::vector<Adjacency>> adjacency_;
};

struct RelayViolation {
    std::size_t arc_index;
    HubId from;
    HubId to;
    double hours;
};

inline std::vector<RelayViolation> validate_relay_constraint(const Network& net, double limit = kMaxRelayHours) {
    std::vector<RelayViolation> out;
    for (std::size_t a = 0; a < net.arcs().size(); ++a) {
        const Arc& arc = net.arcs()[a];
        if (arc.hours > limit) out.push_back({a, arc.from, arc.to, arc.hours});
    }
    return out;
}

/// Hubs not reachable from the first hub.
inline std::vector<HubId> unreachable_hubs(const Network& net) {
    std::vector<HubId> out;
    if (net.hub_count() == 0) return out;
    std::vector<bool> seen(net.hub_count(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (const auto& e : net.neighbors(u))
            if (!seen[e.to]) {
                seen[e.to] = true;
                stack.push_back(e.to);
            }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) out.push_back(net.id(i));
    return out;
}

inline std::string describe(const RelayViolation& v, double limit = kMaxRelayHours) {
    return fmt::format("arc #{} {}-{}: {} h exceeds relay limit {} h", v.arc_index, v.from, v.to, v.hours, limit);
}

/// Throws DomainError naming the first offending arc or hub.
inline void require_valid(const Network& net, double limit = kMaxRelayHours) {
    if (net.hub_count() == 0) throw DomainError("network has no hubs");
    if (auto v = validate_relay_constraint(net, limit); !v.empty()) throw DomainError(describe(v.front(), limit));
    if (auto u = unreachable_hubs(net); !u.empty())
        throw DomainError(fmt::format("network is disconnected: hub '{}' is unreachable", u.front()));
}

inline Network network_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("hubs") || !doc.contains("arcs"))
        throw IoError("topology must be an object with 'hubs' and 'arcs'");
    std::vector<Hub> hubs;
    std::vector<Arc> arcs;
    try {
        for (const auto& h : doc.at("hubs")) {
            Hub hub;
            hub.id = h.at("id").get<std::string>();
            hub.name = h.value("name", hub.id);
            hub.zone = h.value("zone", std::string{});
            hub.weight = h.value("weight", 1.0);
            if (h.contains("lat")) hub.lat = h.at("lat").get<double>();
            if (h.contains("lon")) hub.lon = h.at("lon").get<double>();
            hubs.push_back(std::move(hub));
        }
        for (const auto& a : doc.at("arcs"))
            arcs.push_back({a.at("from").get<std::string>(), a.at("to").get<std::string>(), a.at("miles").get<double>(),
                            a.at("hours").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("topology schema error: ") + e.what());
    }
    return Network(std::move(hubs), std::move(arcs));
}

inline nlohmann::json network_to_json(const Network& net) {
    nlohmann::json doc;
    doc["hubs"] = nlohmann::json::array();
    for (const auto& h : net.hubs()) {
        nlohmann::json j{{"id", h.id}, {"name", h.name}, {"zone", h.zone}, {"weight", h.weight}};
        if (h.lat) j["lat"] = *h.lat;
        if (h.lon) j["lon"] = *h.lon;
        doc["hubs"].push_back(std::move(j));
    }
    doc["arcs"] = nlohmann::json::array();
    for (const auto& a : net.arcs())
        doc["arcs"].push_back({{"from", a.from}, {"to", a.to}, {"miles", a.miles}, {"hours", a.hours}});
    return doc;
}

/// Parses a topology file and checks structure only (no relay/connectivity check).
inline Network read_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open topology file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse topology file '" + path + "': " + e.what());
    }
    return network_from_json(doc);
}

inline Network load_network(const std::string& path, double limit = kMaxRelayHours) {
    Network net = read_network(path);
    require_valid(net, limit);
    return net;
}

struct Path {
    std::vector<HubId> hubs;
    std::vector<std::size_t> arcs;
    double hours = 0.0;
    double miles = 0.0;

    std::size_t intermediate_hubs() const { return hubs.size() < 2 ? 0 : hubs.size() - 2; }
};

namespace detail {

struct Label {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> hubs;
    std::vector<std::size_t> arcs;
};

// Order on (cost, hop count, hub-id sequence). Costs within 1e-9 tie.
inline bool better(const Network& net, double cost, const std::vector<std::size_t>& path, const Label& than) {
    if (than.hubs.empty()) return true;
    if (cost < than.cost - 1e-9) return true;
    if (cost > than.cost + 1e-9) return false;
    if (path.size() != than.hubs.size()) return path.size() < than.hubs.size();
    return std::lexicographical_compare(path.begin(), path.end(), than.hubs.begin(), than.hubs.end(),
                                        [&](std::size_t a, std::size_t b) { return net.id(a) < net.id(b); });
}

} // namespace detail

/// Single-source shortest paths under a per-arc cost, with deterministic
/// tie-breaking (fewer hops, then lexicographic hub-id sequence).
/// Returns one Path per hub index; unreachable hubs get an empty path.
template <typename ArcCost>
std::vector<Path> shortest_paths_from(const Network& net, std::size_t source, ArcCost&& arc_cost) {
    const std::size_t n = net.hub_count();
    std::vector<detail::Label> best(n);
    std::vector<bool> done(n, false);
    best.at(source) = {0.0, {source}, {}};
    for (std::size_t round = 0; round < n; ++round) {
        std::size_t u = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i] || best[i].hubs.empty()) continue;
            if (u == n || detail::better(net, best[i].cost, best[i].hubs, best[u])) u = i;
        }
        if (u == n) break;
        done[u] = true;
        for (const auto& e : net.neighbors(u)) {
            if (done[e.to]) continue;
            const double c = best[u].cost + arc_cost(net.arcs()[e.arc]);
            auto hubs = best[u].hubs;
            hubs.push_back(e.to);
            if (detail::better(net, c, hubs, best[e.to])) {
                auto arcs = best[u].arcs;
                arcs.push_back(e.arc);
                best[e.to] = {c, std::move(hubs), std::move(arcs)};
            }
        }
    }
    std::vector<Path> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (best[i].hubs.empty()) continue;
        Path& p = out[i];
        for (auto h : best[i].hubs) p.hubs.push_back(net.id(h));
        p.arcs = best[i].arcs;
        for (auto a : p.arcs) {
            p.hours += net.arcs()[a].hours;
            p.miles += net.arcs()[a].miles;
        }
    }
    return out;
}

/// Minimum travel-time path from `o` to `d`.
inline Path shortest_time_path(const Network& net, const HubId& o, const HubId& d) {
    const std::size_t src = net.index(o);
    const std::size_t dst = net.index(d);
    auto paths = shortest_paths_from(net, src, [](const Arc& a) { return a.hours; });
    if (paths[dst].hubs.empty()) throw DomainError("hub '" + d + "' is unreachable from '" + o + "'");
    return std::move(paths[dst]);
}

/// All-pairs shortest-time paths, indexed [origin][destination].
inline std::vector<std::vector<Path>> all_shortest_time_paths(const Network& net) {
    std::vector<std::vector<Path>> out;
    for (std::size_t s = 0; s < net.hub_count(); ++s)
        out.push_back(shortest_paths_from(net, s, [](const Arc& a) { return a.hours; }));
    return out;
}

/// A rate that is either fixed or drawn uniformly per case.
struct RateRange {
    double low = 0.0;
    double high = 0.0;

    static RateRange fixed(double v) { return {v, v}; }
    bool is_fixed() const { return low == high; }
    double midpoint() const { return 0.5 * (low + high); }

    void validate(const char* what) const {
        if (!(low > 0.0)) throw DomainError(fmt::format("{}: lower bound must be > 0 (got {})", what, low));
        if (low > high) throw DomainError(fmt::format("{}: low {} exceeds high {}", what, low, high));
    }
};

struct CostModel {
    RateRange truck_mile = RateRange::fixed(2.0);
    RateRange transload = RateRange::fixed(0.04);
};

/// Per-case rates: dollars per truck-mile for each arc, dollars per pound
/// transloaded for each hub.
struct ArcCostTable {
    std::vector<double> per_truck_mile;
    std::vector<double> per_pound_transload;
};

inline ArcCostTable sample_arc_costs(const Network& net, const CostModel& model, Rng& rng) {
    model.truck_mile.validate("per-truck-mile cost");
    model.transload.validate("per-pound transload cost");
    auto draw = [&](const RateRange& r) { return r.is_fixed() ? r.low : rng.uniform(r.low, r.high); };
    ArcCostTable t;
    t.per_truck_mile.reserve(net.arcs().size());
    for (std::size_t a = 0; a < net.arcs().size(); ++a) t.per_truck_mile.push_back(draw(model.truck_mile));
    t.per_pound_transload.reserve(net.hub_count());
    for (std::size_t h = 0; h < net.hub_count(); ++h) t.per_pound_transload.push_back(draw(model.transload));
    return t;
}

} // namespace ltl
