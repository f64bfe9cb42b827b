#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ltlprice/common.hpp"
#include "ltlprice/demand.hpp"
#include "ltlprice/network.hpp"

namespace ltl {

enum class Provenance { historical, realtime };

inline const char* to_string(Provenance p) { return p == Provenance::historical ? "historical" : "realtime"; }

/// A realized cost in dollars per pound and its confidence weight.
struct CostObservation {
    double per_pound_cost = 0.0;
    double weight = 1.0;
    Provenance provenance = Provenance::historical;
};

/// Requests are "similar" when origin and destination match and their window
/// durations fall into the same bucket.
struct GroupKey {
    HubId origin;
    HubId destination;
    int window_bucket = 0;

    auto operator<=>(const GroupKey&) const = default;
};

inline GroupKey group_key(const ShipmentRequest& req, double bucket_hours) {
    const int bucket = static_cast<int>(std::floor(req.window() / bucket_hours));
    return {req.origin, req.destination, std::max(bucket, 0)};
}

// Weighted statistics over a nonempty group.

inline void require_nonempty(std::span<const CostObservation> obs) {
    if (obs.empty()) throw DomainError("empty request group");
}

inline double weighted_mean(std::span<const CostObservation> obs) {
    require_nonempty(obs);
    double sw = 0.0, swc = 0.0;
    for (const auto& o : obs) {
        sw += o.weight;
        swc += o.weight * o.per_pound_cost;
    }
    return swc / sw;
}

/// Biased (no Bessel correction) weighted variance about `mean`.
inline double weighted_variance(std::span<const CostObservation> obs, double mean) {
    require_nonempty(obs);
    double sw = 0.0, acc = 0.0;
    for (const auto& o : obs) {
        const double d = o.per_pound_cost - mean;
        sw += o.weight;
        acc += o.weight * d * d;
    }
    return acc / sw;
}

/// (sum w)^2 / sum w^2
inline double effective_sample_size(std::span<const CostObservation> obs) {
    require_nonempty(obs);
    double sw = 0.0, sw2 = 0.0;
    for (const auto& o : obs) {
        sw += o.weight;
        sw2 += o.weight * o.weight;
    }
    return sw * sw / sw2;
}

inline double standard_error(double variance, double n_eff) { return std::sqrt(variance / n_eff); }

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Acklam's rational approximation (relative error ~1.15e-9).
inline double acklam_quantile(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace detail

/// One-sided standard normal quantile: z such that P(Z <= z) = confidence.
inline double z_from_confidence(double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0))
        throw DomainError(fmt::format("confidence must be in (0,1), got {}", confidence));
    if (confidence == 0.5) return 0.0;
    double x = detail::acklam_quantile(confidence);
    // Halley refinement against erfc.
    for (int i = 0; i < 2; ++i) {
        const double e = detail::normal_cdf(x) - confidence;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

struct RobustnessConfig {
    double confidence = 0.9;
    double weight_historical = 1.0;
    double weight_realtime = 2.0;
    double bucket_hours = 6.0;

    double z() const { return z_from_confidence(confidence); }
    double weight(Provenance p) const { return p == Provenance::historical ? weight_historical : weight_realtime; }

    void validate() const {
        (void)z();
        if (!(weight_historical > 0.0) || !(weight_realtime > 0.0)) throw DomainError("confidence weights must be > 0");
        if (!(bucket_hours > 0.0)) throw DomainError("bucket_hours must be > 0");
    }
};

/// Observations keyed by request group.
class CostPool {
public:
    using Groups = std::map<GroupKey, std::vector<CostObservation>>;

    void add(const GroupKey& key, const CostObservation& obs) {
        groups_[key].push_back(obs);
        ++size_;
    }

    std::span<const CostObservation> find(const GroupKey& key) const {
        auto it = groups_.find(key);
        if (it == groups_.end()) return {};
        return it->second;
    }

    std::size_t group_size(const GroupKey& key) const { return find(key).size(); }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    const Groups& groups() const { return groups_; }
    void clear() {
        groups_.clear();
        size_ = 0;
    }

    /// Appends every observation of `other`, group by group in key order.
    void merge(const CostPool& other) {
        for (const auto& [key, obs] : other.groups_)
            for (const auto& o : obs) add(key, o);
    }

    /// Weighted mean per-pound cost over the whole pool.
    double global_mean() const {
        double sw = 0.0, swc = 0.0;
        for (const auto& [key, obs] : groups_)
            for (const auto& o : obs) {
                sw += o.weight;
                swc += o.weight * o.per_pound_cost;
            }
        return sw > 0.0 ? swc / sw : 0.0;
    }

    // CSV: origin,destination,window_bucket,per_pound_cost,weight,provenance
    void write_csv(std::ostream& out) const {
        out << "origin,destination,window_bucket,per_pound_cost,weight,provenance\n";
        for (const auto& [key, obs] : groups_)
            for (const auto& o : obs)
                out << fmt::format("{},{},{},{},{},{}\n", key.origin, key.destination, key.window_bucket,
                                   o.per_pound_cost, o.weight, to_string(o.provenance));
    }

    std::string to_csv() const {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }

    static CostPool read_csv(std::istream& in) {
        CostPool pool;
        std::string line;
        if (!std::getline(in, line)) return pool;
        if (line != "origin,destination,window_bucket,per_pound_cost,weight,provenance")
            throw IoError("unexpected cost pool header '" + line + "'");
        for (int row = 2; std::getline(in, line); ++row) {
            if (line.empty()) continue;
            std::vector<std::string> c;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) c.push_back(cell);
            if (c.size() != 6) throw IoError(fmt::format("cost pool row {}: expected 6 fields", row));
            try {
                GroupKey key{c[0], c[1], std::stoi(c[2])};
                CostObservation o{std::stod(c[3]), std::stod(c[4]),
                                  c[5] == "realtime" ? Provenance::realtime : Provenance::historical};
                if (c[5] != "realtime" && c[5] != "historical") throw std::invalid_argument(c[5]);
                if (!(o.per_pound_cost > 0.0) || !(o.weight > 0.0)) throw std::invalid_argument("non-positive");
                pool.add(key, o);
            } catch (const std::exception&) {
                throw IoError(fmt::format("cost pool row {}: malformed", row));
            }
        }
        return pool;
    }

    static CostPool load_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open cost pool '" + path + "'");
        return read_csv(in);
    }

private:
    Groups groups_;
    std::size_t size_ = 0;
};

struct Quote {
    std::uint32_t request_id = 0;
    GroupKey key;
    double pounds = 0.0;
    std::size_t observations = 0;
    double weighted_mean = 0.0;
    double weighted_variance = 0.0;
    double effective_n = 0.0;
    double standard_error = 0.0;
    double z = 0.0;
    double per_pound_price = 0.0;
    double total_price = 0.0;
    bool fallback_used = false;
};

/// Cold-start price when a request has no similar observations: the cost of
/// hauling it alone over the shortest-time route, scaled by a load-factor margin,
/// plus transloading at each intermediate hub.
class FallbackEstimator {
public:
    struct Rates {
        double truck_mile = 2.0;
        double transload = 0.04;
    };

    FallbackEstimator(const Network& net, Rates expected, double truck_capacity, double load_factor_margin = 3.0)
        : paths_(all_shortest_time_paths(net)), net_(&net), rates_(expected), capacity_(truck_capacity),
          margin_(load_factor_margin) {}

    double operator()(const ShipmentRequest& req) const {
        const Path& p = paths_[net_->index(req.origin)][net_->index(req.destination)];
        return p.miles * rates_.truck_mile / capacity_ * margin_ +
               rates_.transload * static_cast<double>(p.intermediate_hubs());
    }

private:
    std::vector<std::vector<Path>> paths_;
    const Network* net_;
    Rates rates_;
    double capacity_;
    double margin_;
};

inline double fallback_estimate(const ShipmentRequest& req, const Network& net, FallbackEstimator::Rates expected,
                                double truck_capacity, double load_factor_margin = 3.0) {
    return FallbackEstimator(net, expected, truck_capacity, load_factor_margin)(req);
}

/// Robust quote from the union of the request's historical and real-time groups.
inline Quote quote(const ShipmentRequest& req, const CostPool& historical, const CostPool& realtime,
                   const RobustnessConfig& cfg, const std::function<double(const ShipmentRequest&)>& fallback) {
    Quote q;
    q.request_id = req.id;
    q.key = group_key(req, cfg.bucket_hours);
    q.pounds = req.pounds;
    q.z = cfg.z();

    std::vector<CostObservation> group;
    for (const CostPool* pool : {&historical, &realtime})
        for (auto o : pool->find(q.key)) {
            o.weight = cfg.weight(o.provenance);
            group.push_back(o);
        }
    q.observations = group.size();
    if (group.empty()) {
        q.fallback_used = true;
        q.weighted_mean = fallback(req);
        q.per_pound_price = q.weighted_mean;
    } else {
        q.weighted_mean = weighted_mean(group);
        q.weighted_variance = weighted_variance(group, q.weighted_mean);
        q.effective_n = effective_sample_size(group);
        q.standard_error = standard_error(q.weighted_variance, q.effective_n);
        q.per_pound_price = q.weighted_mean + q.z * q.standard_error;
    }
    q.total_price = q.per_pound_price * req.pounds;
    return q;
}

struct OutcomeRecord {
    std::uint32_t request_id = 0;
    double pounds = 0.0;
    double quoted_price = 0.0;
    double realized_cost = 0.0;
    double deviation = 0.0;
    double per_pound_realized = 0.0;
};

/// Logs the realized cost of a fulfilled request and feeds it back into the
/// real-time pool.
inline OutcomeRecord record_outcome(const Quote& q, double realized_cost, CostPool& realtime,
                                    const RobustnessConfig& cfg) {
    if (!(realized_cost > 0.0)) throw DomainError("realized cost must be > 0");
    OutcomeRecord r;
    r.request_id = q.request_id;
    r.pounds = q.pounds;
    r.quoted_price = q.total_price;
    r.realized_cost = realized_cost;
    r.deviation = std::abs(q.total_price - realized_cost);
    r.per_pound_realized = realized_cost / q.pounds;
    realtime.add(q.key, {r.per_pound_realized, cfg.weight_realtime, Provenance::realtime});
    return r;
}

} // namespace ltl
