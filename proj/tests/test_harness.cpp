#include <gtest/gtest.h>

#include <map>

#include "ltlprice/config.hpp"
#include "ltlprice/harness.hpp"
#include "oracles.hpp"

using namespace ltl;

namespace {

Network tiny_net() {
    return Network({{"A", "", "", 1.0, {}, {}}, {"B", "", "", 1.0, {}, {}}, {"C", "", "", 1.0, {}, {}}},
                   {{"A", "B", 150, 3.0}, {"B", "C", 200, 4.0}});
}

std::vector<OdFlow> tiny_flows() {
    return {{"A", "B", 4.0e7}, {"B", "A", 3.0e7}, {"A", "C", 4.0e7}, {"C", "A", 2.0e7}, {"B", "C", 3.0e7}};
}

ExperimentConfig tiny_config(int scenario, int n_hist = 2, int n_test = 3) {
    ExperimentConfig cfg;
    cfg.scenario = ScenarioSpec::preset(scenario);
    cfg.scenario.n_historical = n_hist;
    cfg.scenario.n_testing = n_test;
    return cfg;
}

Case hand_case(const std::vector<double>& pounds, const std::vector<double>& prices, const std::vector<double>& costs) {
    Case c;
    for (std::size_t i = 0; i < pounds.size(); ++i) {
        c.requests.push_back({static_cast<std::uint32_t>(i), "A", "B", 0, 10.0, pounds[i]});
        c.states.push_back({});
        Quote q;
        q.total_price = prices[i];
        c.quotes.push_back(q);
        c.realized_cost.push_back(costs[i]);
    }
    return c;
}

} // namespace

TEST(Kpis, SingleRequest) {
    const auto k = compute_kpis(hand_case({10000}, {600}, {550}));
    EXPECT_TRUE(k.defined);
    EXPECT_DOUBLE_EQ(k.total_deviation, 50.0);
    EXPECT_DOUBLE_EQ(k.per_pound_deviation, 0.005);
    EXPECT_DOUBLE_EQ(k.avg_price_per_pound, 0.06);
    ASSERT_EQ(k.pricing_errors.size(), 1u);
    EXPECT_DOUBLE_EQ(k.pricing_errors[0], 0.005);
    EXPECT_DOUBLE_EQ(k.profit, 50.0);
}

TEST(Kpis, TwoRequestsAndInfeasibleExcluded) {
    auto c = hand_case({100, 300, 1000}, {20, 0, 5}, {10, 30, 900});
    c.states[2].feasible = false;
    const auto k = compute_kpis(c);
    EXPECT_DOUBLE_EQ(k.total_deviation, 40.0);
    EXPECT_DOUBLE_EQ(k.per_pound_deviation, 0.1);
    EXPECT_DOUBLE_EQ(k.total_pounds, 400.0);
    EXPECT_EQ(k.pricing_errors.size(), 2u);
    EXPECT_EQ(c.n_infeasible(), 1u);

    c.states[0].feasible = c.states[1].feasible = false;
    EXPECT_FALSE(compute_kpis(c).defined);
}

TEST(Quartiles, LinearInterpolation) {
    const auto q = quartiles({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(q.q1, 1.75);
    EXPECT_DOUBLE_EQ(q.median, 2.5);
    EXPECT_DOUBLE_EQ(q.q3, 3.25);
    const auto r = quartiles({3, 1, 2});
    EXPECT_DOUBLE_EQ(r.q1, 1.5);
    EXPECT_DOUBLE_EQ(r.median, 2.0);
    EXPECT_DOUBLE_EQ(r.q3, 2.5);
    EXPECT_DOUBLE_EQ(quartiles({7}).median, 7.0);
    EXPECT_THROW(quartiles({}), DomainError);
}

TEST(Quartiles, OrderedOnRandomLists) {
    Rng rng(4);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> v(static_cast<std::size_t>(rng.uniform_int(1, 40)));
        for (auto& x : v) x = rng.uniform(-5, 5);
        const auto q = quartiles(v);
        EXPECT_LE(q.q1, q.median);
        EXPECT_LE(q.median, q.q3);
        EXPECT_GE(q.q1, *std::min_element(v.begin(), v.end()));
        EXPECT_LE(q.q3, *std::max_element(v.begin(), v.end()));
    }
}

TEST(Histogram, BinsAndNonnegativeShare) {
    const std::vector<double> e{-0.01, 0.03, 0.05};
    const auto h = histogram_of(e, 0.02);
    EXPECT_EQ(h.total, 3u);
    EXPECT_EQ(h.nonnegative, 2u);
    EXPECT_NEAR(h.nonnegative_share(), 2.0 / 3.0, 1e-15);
    ASSERT_EQ(h.bins.size(), 3u);
    EXPECT_NEAR(h.bins[0].low, -0.02, 1e-15);
    EXPECT_NEAR(h.bins[1].low, 0.02, 1e-15);
    EXPECT_NEAR(h.bins[2].low, 0.04, 1e-15);
    const std::vector<double> edge{0.0, 0.02};
    EXPECT_EQ(histogram_of(edge, 0.02).bins.size(), 2u);
}

TEST(Baseline, SignFollowsFlatRate) {
    auto c = hand_case({1000, 1000}, {60, 40}, {50, 50});
    c.kpis = compute_kpis(c);
    const std::vector<Case> cases{c};
    const auto high = run_fixed_price_baseline(cases, 0.08);
    EXPECT_DOUBLE_EQ(high.baseline_profit, 60.0);
    EXPECT_DOUBLE_EQ(high.dynamic_profit, 0.0);
    ASSERT_EQ(high.cases.size(), 1u);
    EXPECT_DOUBLE_EQ(high.cases[0].difference, -60.0);
    const auto low = run_fixed_price_baseline(cases, 0.04);
    EXPECT_DOUBLE_EQ(low.baseline_profit, -20.0);
    EXPECT_DOUBLE_EQ(low.cases[0].difference, 20.0);
    EXPECT_EQ(low.cases[0].baseline.total_cost, c.kpis.total_cost);
}

TEST(HistoricalPhase, AccumulatesBothCases) {
    const Network net = tiny_net();
    const Simulator sim(net, tiny_flows(), tiny_config(1));
    const auto phase = run_historical_phase(sim, 7);
    ASSERT_EQ(phase.cases.size(), 2u);
    std::size_t sum = 0;
    for (const auto& c : phase.cases) {
        EXPECT_GT(c.observations.size(), 0u);
        EXPECT_EQ(c.observations.size(), c.requests.size());
        EXPECT_TRUE(c.quotes.empty());
        sum += c.observations.size();
    }
    EXPECT_EQ(phase.pool.size(), sum);
    EXPECT_EQ(run_historical_phase(sim, 7).pool.to_csv(), phase.pool.to_csv());
    EXPECT_EQ(run_historical_phase(sim, 7, 4).pool.to_csv(), phase.pool.to_csv());
    EXPECT_NE(run_historical_phase(sim, 8).pool.to_csv(), phase.pool.to_csv());
}

TEST(HistoricalPhase, FixedCostsGiveEqualCostForIdenticalPaths) {
    // Single-arc network: every request rides the same leg, so under fixed
    // costs a request's cost depends only on how full its truck was. Requests
    // that rode alone must all cost the same per pound times pounds.
    const Network net({{"A", "", "", 1.0, {}, {}}, {"B", "", "", 1.0, {}, {}}}, {{"A", "B", 200, 4.0}});
    const Simulator sim(net, {{"A", "B", 4.0e7}}, tiny_config(1, 1, 1));
    const Case c = sim.run_case(CaseRole::historical, 0, 3);
    for (const auto& d : c.dispatches) {
        ASSERT_DOUBLE_EQ(d.leg_cost, 400.0);
        double per_pound = -1.0;
        for (const auto& m : d.manifest) {
            const double pp = c.realized_cost[m.request_id] / m.pounds;
            if (per_pound < 0) per_pound = pp;
            EXPECT_NEAR(pp, per_pound, 1e-12); // same truck, same per-pound cost
        }
    }
}

TEST(TestingCase, LeavesHistoricalPoolUntouched) {
    const Network net = tiny_net();
    const Simulator sim(net, tiny_flows(), tiny_config(2));
    const auto phase = run_historical_phase(sim, 11);
    const std::string before = phase.pool.to_csv();
    const Case c = run_testing_case(sim, phase.pool, 0, testing_seed(11, 0));
    EXPECT_EQ(phase.pool.to_csv(), before);
    EXPECT_EQ(c.outcomes.size(), c.requests.size());
    EXPECT_EQ(c.quotes.size(), c.requests.size());
    for (const auto& o : c.outcomes) EXPECT_GE(o.deviation, 0.0);
    EXPECT_THROW(sim.run_case(CaseRole::testing, 0, 1), std::invalid_argument);
}

TEST(TestingCase, KpiIdentities) {
    const Network net = tiny_net();
    const Simulator sim(net, tiny_flows(), tiny_config(2));
    const auto phase = run_historical_phase(sim, 5);
    for (std::size_t i = 0; i < 3; ++i) {
        const Case c = run_testing_case(sim, phase.pool, i, testing_seed(5, i));
        const auto& k = c.kpis;
        ASSERT_TRUE(k.defined);
        EXPECT_LE(oracle::rel_err(k.per_pound_deviation * k.total_pounds, k.total_deviation), 1e-9);
        EXPECT_LE(oracle::rel_err(k.avg_price_per_pound * k.total_pounds, k.total_price), 1e-9);
        EXPECT_GE(k.per_pound_deviation, 0.0);
        EXPECT_LE(c.conservation_error(), 1e-6);
        double realized = 0.0;
        for (double x : c.realized_cost) realized += x;
        EXPECT_NEAR(realized, c.allocated_total, 1e-6);
    }
}

TEST(RunScenario, DeterministicAcrossJobs) {
    const Network net = tiny_net();
    const Simulator sim(net, tiny_flows(), tiny_config(2, 3, 4));
    const auto a = run_scenario(sim, 99, 1);
    const auto b = run_scenario(sim, 99, 3);
    EXPECT_EQ(a.historical_pool_csv, b.historical_pool_csv);
    ASSERT_EQ(a.testing.size(), b.testing.size());
    for (std::size_t i = 0; i < a.testing.size(); ++i) {
        EXPECT_EQ(a.testing[i].requests, b.testing[i].requests);
        EXPECT_EQ(a.testing[i].realized_cost, b.testing[i].realized_cost);
        EXPECT_EQ(a.testing[i].kpis.total_deviation, b.testing[i].kpis.total_deviation);
    }
    EXPECT_LE(a.kpis.per_pound_deviation.q1, a.kpis.per_pound_deviation.median);
    EXPECT_LE(a.kpis.per_pound_deviation.median, a.kpis.per_pound_deviation.q3);
    ASSERT_TRUE(a.baseline.has_value());
    EXPECT_EQ(a.baseline->cases.size(), 4u);
    EXPECT_DOUBLE_EQ(a.baseline->rate, a.historical_mean_per_pound * 1.3);
}

TEST(RunScenario, PairedSeedsShareRequestStreamsAcrossScenarios) {
    const Network net = tiny_net();
    const Simulator s1(net, tiny_flows(), tiny_config(1));
    const Simulator s2(net, tiny_flows(), tiny_config(2));
    const Case a = s1.run_case(CaseRole::historical, 0, 1234);
    const Case b = s2.run_case(CaseRole::historical, 0, 1234);
    EXPECT_EQ(a.requests, b.requests);
}

TEST(ParallelFor, RethrowsAndCoversEveryIndex) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) { if (i == 7) throw DomainError("x"); }), DomainError);
}
