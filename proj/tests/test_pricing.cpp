#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ltlprice/pricing.hpp"
#include "oracles.hpp"

using namespace ltl;

namespace {

ShipmentRequest request(const HubId& o, const HubId& d, int release, double window, double pounds = 10000.0,
                        std::uint32_t id = 0) {
    return {id, o, d, release, release + window, pounds};
}

double no_fallback(const ShipmentRequest&) {
    ADD_FAILURE() << "fallback should not be used";
    return 0.0;
}

} // namespace

TEST(GroupKey, Buckets) {
    const auto k = group_key(request("A", "B", 0, 10.0), 6.0);
    EXPECT_EQ(k, (GroupKey{"A", "B", 1}));
    EXPECT_EQ(group_key(request("A", "B", 3, 10.0), 6.0), group_key(request("A", "B", 7, 11.0), 6.0));
    EXPECT_NE(group_key(request("A", "B", 0, 10.0), 6.0), group_key(request("A", "C", 0, 10.0), 6.0));
}

TEST(WeightedStats, HandValues) {
    const auto eq = oracle::observations({0.5, 0.5, 0.5}, {0.3, 2.0, 7.0});
    EXPECT_DOUBLE_EQ(weighted_mean(eq), 0.5);
    EXPECT_EQ(weighted_variance(eq, weighted_mean(eq)), 0.0);

    const auto even = oracle::observations({0.4, 0.6}, {1, 1});
    EXPECT_DOUBLE_EQ(weighted_mean(even), 0.5);
    EXPECT_NEAR(weighted_variance(even, 0.5), 0.01, 1e-15);

    const auto skew = oracle::observations({0.4, 0.6}, {1, 3});
    EXPECT_NEAR(weighted_mean(skew), 0.55, 1e-15);
    EXPECT_NEAR(weighted_variance(skew, 0.55), 0.0075, 1e-15);
    EXPECT_NEAR(effective_sample_size(skew), 1.6, 1e-15);

    EXPECT_DOUBLE_EQ(effective_sample_size(oracle::observations({1, 2, 3, 4}, {1, 1, 1, 1})), 4.0);
    EXPECT_DOUBLE_EQ(effective_sample_size(oracle::observations({1}, {5})), 1.0);

    EXPECT_EQ(standard_error(0.0, 3.0), 0.0);
    EXPECT_NEAR(standard_error(0.0075, 1.6), 0.06846531968814576, 1e-12);
    EXPECT_NEAR(standard_error(0.04, 4.0), 0.10, 1e-15);

    EXPECT_THROW(weighted_mean({}), DomainError);
    EXPECT_THROW(effective_sample_size({}), DomainError);
}

TEST(WeightedStats, MatchNaiveOracleOnRandomGroups) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 51));
        std::vector<double> c(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = rng.uniform(0.01, 2.0);
            w[i] = rng.uniform(0.1, 10.0);
        }
        const auto obs = oracle::observations(c, w);
        const auto ref = oracle::naive_stats(c, w);
        const double m = weighted_mean(obs);
        const double v = weighted_variance(obs, m);
        const double ne = effective_sample_size(obs);
        ASSERT_LE(oracle::rel_err(m, ref.mean), 1e-9);
        ASSERT_LE(oracle::rel_err(ne, ref.n_eff), 1e-9);
        if (n > 1) {
            ASSERT_LE(oracle::rel_err(v, ref.variance), 1e-9);
            ASSERT_LE(oracle::rel_err(standard_error(v, ne), ref.se), 1e-9);
        }
        ASSERT_GE(ne, 1.0 - 1e-12);
        ASSERT_LE(ne, static_cast<double>(n) + 1e-9);
    }
}

TEST(WeightedStats, EqualWeightsReduceToPlainStatistics) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 40));
        const double w = rng.uniform(0.1, 10.0);
        std::vector<double> c(n);
        double sum = 0.0;
        for (auto& x : c) sum += (x = rng.uniform(0.1, 1.0));
        const double mean = sum / n;
        double var = 0.0;
        for (double x : c) var += (x - mean) * (x - mean);
        var /= n;
        const auto obs = oracle::observations(c, std::vector<double>(n, w));
        EXPECT_NEAR(weighted_mean(obs), mean, 1e-12);
        EXPECT_NEAR(weighted_variance(obs, weighted_mean(obs)), var, 1e-12);
        EXPECT_NEAR(effective_sample_size(obs), static_cast<double>(n), 1e-12);
    }
}

TEST(ZFromConfidence, ReferenceTable) {
    for (const auto& [p, z] : oracle::normal_quantile_table()) EXPECT_NEAR(z_from_confidence(p), z, 1e-6) << p;
    EXPECT_EQ(z_from_confidence(0.5), 0.0);
    EXPECT_NEAR(z_from_confidence(0.1), -1.2815515655446004, 1e-9);
    EXPECT_NEAR(z_from_confidence(1e-6), -4.753424308822899, 1e-8);
    EXPECT_THROW(z_from_confidence(0.0), DomainError);
    EXPECT_THROW(z_from_confidence(1.0), DomainError);
    EXPECT_THROW(z_from_confidence(1.5), DomainError);
}

TEST(Quote, SingletonGroup) {
    CostPool hist, rt;
    const auto req = request("A", "B", 0, 10.0, 8000.0);
    hist.add(group_key(req, 6.0), {0.55, 1.0, Provenance::historical});
    const Quote q = quote(req, hist, rt, RobustnessConfig{}, no_fallback);
    EXPECT_EQ(q.standard_error, 0.0);
    EXPECT_DOUBLE_EQ(q.per_pound_price, 0.55);
    EXPECT_DOUBLE_EQ(q.total_price, 0.55 * 8000.0);
    EXPECT_FALSE(q.fallback_used);
    EXPECT_EQ(q.observations, 1u);
}

TEST(Quote, ComposesWeightedStatistics) {
    CostPool hist, rt;
    const auto req = request("A", "B", 0, 10.0, 1000.0);
    hist.add(group_key(req, 6.0), {0.40, 1.0, Provenance::historical});
    rt.add(group_key(req, 6.0), {0.60, 1.0, Provenance::realtime}); // stored weight ignored; cfg decides
    RobustnessConfig cfg;
    cfg.weight_realtime = 3.0;
    const Quote q = quote(req, hist, rt, cfg, no_fallback);
    EXPECT_NEAR(q.weighted_mean, 0.55, 1e-15);
    EXPECT_NEAR(q.weighted_variance, 0.0075, 1e-15);
    EXPECT_NEAR(q.effective_n, 1.6, 1e-15);
    EXPECT_NEAR(q.z, 1.281552, 1e-6);
    EXPECT_NEAR(q.per_pound_price, 0.6377418376318548, 1e-9);
    EXPECT_NEAR(q.total_price, 637.7418376318548, 1e-6);

    cfg.confidence = 0.5;
    EXPECT_DOUBLE_EQ(quote(req, hist, rt, cfg, no_fallback).per_pound_price, 0.55);
}

TEST(Quote, EmptyGroupUsesFallback) {
    CostPool hist, rt;
    const auto req = request("A", "B", 0, 10.0, 1000.0);
    hist.add({"A", "C", 1}, {0.4, 1.0, Provenance::historical});
    const Quote q = quote(req, hist, rt, RobustnessConfig{}, [](const ShipmentRequest&) { return 0.07; });
    EXPECT_TRUE(q.fallback_used);
    EXPECT_EQ(q.per_pound_price, 0.07);
    EXPECT_EQ(q.total_price, 70.0);
    EXPECT_EQ(q.observations, 0u);
}

TEST(Quote, Properties) {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        CostPool hist, rt;
        const auto req = request("A", "B", 0, 12.0, rng.uniform(500, 40000));
        const auto key = group_key(req, 6.0);
        const auto n = rng.uniform_int(1, 30);
        for (int i = 0; i < n; ++i)
            (rng.uniform01() < 0.5 ? hist : rt)
                .add(key, {rng.uniform(0.01, 1.0), 1.0, rng.uniform01() < 0.5 ? Provenance::historical : Provenance::realtime});

        RobustnessConfig lo, hi;
        lo.confidence = rng.uniform(0.5, 0.95);
        hi.confidence = rng.uniform(lo.confidence, 0.999);
        const Quote ql = quote(req, hist, rt, lo, no_fallback);
        const Quote qh = quote(req, hist, rt, hi, no_fallback);
        EXPECT_LE(ql.per_pound_price, qh.per_pound_price + 1e-15);          // monotone in z
        EXPECT_GE(ql.total_price, ql.weighted_mean * req.pounds - 1e-9);    // z >= 0
        EXPECT_GE(ql.weighted_variance, 0.0);
        EXPECT_GE(ql.effective_n, 1.0 - 1e-12);
        EXPECT_LE(ql.effective_n, static_cast<double>(ql.observations) + 1e-9);
        EXPECT_NEAR(ql.per_pound_price, ql.weighted_mean + ql.z * ql.standard_error, 1e-15);

        // Scale equivariance.
        const double lambda = rng.uniform(0.1, 10.0);
        CostPool hs, rs;
        for (const auto& [k, obs] : hist.groups())
            for (auto o : obs) hs.add(k, {o.per_pound_cost * lambda, o.weight, o.provenance});
        for (const auto& [k, obs] : rt.groups())
            for (auto o : obs) rs.add(k, {o.per_pound_cost * lambda, o.weight, o.provenance});
        const Quote qs = quote(req, hs, rs, lo, no_fallback);
        EXPECT_NEAR(qs.weighted_mean, lambda * ql.weighted_mean, 1e-12 * lambda);
        EXPECT_NEAR(std::sqrt(qs.weighted_variance), lambda * std::sqrt(ql.weighted_variance), 1e-12 * lambda);
        EXPECT_NEAR(qs.standard_error, lambda * ql.standard_error, 1e-12 * lambda);
        EXPECT_NEAR(qs.per_pound_price, lambda * ql.per_pound_price, 1e-12 * lambda);
    }
}

TEST(Quote, ScaleByPowerOfTwoIsExact) {
    CostPool a, b, rt;
    const auto req = request("A", "B", 0, 12.0);
    const auto key = group_key(req, 6.0);
    for (double c : {0.31, 0.47, 0.52, 0.29}) {
        a.add(key, {c, 1.0, Provenance::historical});
        b.add(key, {c * 4.0, 1.0, Provenance::historical});
    }
    const Quote qa = quote(req, a, rt, {}, no_fallback);
    const Quote qb = quote(req, b, rt, {}, no_fallback);
    EXPECT_EQ(qb.weighted_mean, 4.0 * qa.weighted_mean);
    EXPECT_EQ(qb.standard_error, 4.0 * qa.standard_error);
    EXPECT_EQ(qb.per_pound_price, 4.0 * qa.per_pound_price);
}

TEST(FallbackEstimate, DirectArcAndTransload) {
    const Network direct({{"A", "", "", 1.0, {}, {}}, {"B", "", "", 1.0, {}, {}}}, {{"A", "B", 200, 4.0}});
    EXPECT_NEAR(fallback_estimate(request("A", "B", 0, 12), direct, {2.0, 0.04}, 40000.0), 0.03, 1e-15);

    const Network two_leg({{"A", "", "", 1.0, {}, {}}, {"B", "", "", 1.0, {}, {}}, {"C", "", "", 1.0, {}, {}}},
                          {{"A", "B", 100, 2.0}, {"B", "C", 100, 2.0}});
    EXPECT_NEAR(fallback_estimate(request("A", "C", 0, 12), two_leg, {2.0, 0.04}, 40000.0), 0.03 + 0.04, 1e-15);
}

TEST(RecordOutcome, DeviationAndAppend) {
    CostPool rt;
    const auto req = request("A", "B", 0, 12.0, 10000.0);
    Quote q;
    q.request_id = 4;
    q.key = group_key(req, 6.0);
    q.pounds = req.pounds;
    q.total_price = 600.0;
    for (int i = 0; i < 7; ++i) rt.add(q.key, {0.05, 2.0, Provenance::realtime});

    const auto r = record_outcome(q, 550.0, rt, RobustnessConfig{});
    EXPECT_EQ(r.deviation, 50.0);
    EXPECT_EQ(r.per_pound_realized, 0.055);
    EXPECT_EQ(rt.group_size(q.key), 8u);
    EXPECT_EQ(rt.find(q.key).back().provenance, Provenance::realtime);
    EXPECT_EQ(rt.find(q.key).back().weight, 2.0);

    EXPECT_EQ(record_outcome(q, 600.0, rt, RobustnessConfig{}).deviation, 0.0);
    EXPECT_THROW(record_outcome(q, 0.0, rt, RobustnessConfig{}), DomainError);
}

TEST(CostPool, CsvRoundTripPreservesEveryObservation) {
    CostPool pool;
    Rng rng(9);
    for (int i = 0; i < 200; ++i)
        pool.add({i % 2 ? "A" : "B", "C", static_cast<int>(i % 4)},
                 {rng.uniform(0.01, 1.0), i % 3 ? 1.0 : 2.0, i % 3 ? Provenance::historical : Provenance::realtime});
    std::istringstream in(pool.to_csv());
    const CostPool back = CostPool::read_csv(in);
    EXPECT_EQ(back.to_csv(), pool.to_csv());
    EXPECT_EQ(back.size(), 200u);

    std::istringstream bad("origin,destination,window_bucket,per_pound_cost,weight,provenance\nA,B,1,-0.2,1,historical\n");
    EXPECT_THROW(CostPool::read_csv(bad), IoError);
}

TEST(Calibration, NinetyPercentCoverageOfExpectedCost) {
    // Groups of i.i.d. normal per-pound costs; the quote should sit above the
    // expected cost at roughly the configured rate.
    std::mt19937_64 gen(11);
    std::normal_distribution<double> noise(0.0, 1.0);
    RobustnessConfig cfg;
    const double mu = 0.5, sigma = 0.08;
    int covered = 0;
    const int trials = 5000;
    Rng rng(12);
    for (int t = 0; t < trials; ++t) {
        CostPool hist, rt;
        const auto req = request("A", "B", 0, 12.0);
        const auto key = group_key(req, cfg.bucket_hours);
        const auto n = rng.uniform_int(10, 51);
        for (int i = 0; i < n; ++i) {
            const auto prov = rng.uniform01() < 0.7 ? Provenance::historical : Provenance::realtime;
            (prov == Provenance::historical ? hist : rt).add(key, {mu + sigma * noise(gen), 1.0, prov});
        }
        covered += quote(req, hist, rt, cfg, no_fallback).per_pound_price >= mu;
    }
    EXPECT_GE(static_cast<double>(covered) / trials, 0.85);
}
