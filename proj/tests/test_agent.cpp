#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>

#include "coopbandit/agent.hpp"
#include "coopbandit/graph.hpp"
#include "coopbandit/rng.hpp"

using namespace coopbandit;

namespace {

AgentState solo_agent(std::size_t arms, Round d, const LearningRate& rate)
{
    return make_agent(0, {{0, 1.0}}, arms, d, rate);
}

MessagePtr make_message(Round t, Vertex from, std::vector<double> p, std::optional<Arm> arm,
                        std::vector<ObservedLoss> observed, const FeedbackGraphView& view)
{
    auto m = std::make_shared<FeedbackMessage>();
    m->origin_round = t;
    m->origin_agent = from;
    m->observation_mass = view.observation_mass(p);
    m->play_distribution = std::move(p);
    m->was_active = arm.has_value();
    m->played_arm = arm.value_or(0);
    m->observed_losses = std::move(observed);
    return m;
}

// b from the product form, written out independently of the learner.
double product_b(Arm i, const std::vector<double>& q, const std::vector<std::vector<double>>& p, const Graph& feed,
                 std::size_t f)
{
    const auto ni = neighborhood(feed, i, f);
    double miss = 1.0;
    for (std::size_t u = 0; u < q.size(); ++u) {
        double s = 0.0;
        for (Arm j : ni) {
            s += p[u][j];
        }
        miss *= 1.0 - q[u] * s;
    }
    return 1.0 - miss;
}

} // namespace

TEST(PlayDistribution, UniformDuringWarmup)
{
    AgentState s = solo_agent(4, 2, LearningRate::fixed(0.5));
    s.cumulative_estimates = {5.0, 0.0, 1.0, 2.0};
    for (Round t = 1; t <= 3; ++t) {
        EXPECT_EQ(play_distribution(s, t), std::vector<double>(4, 0.25));
    }
    EXPECT_THROW(play_distribution(s, 4), std::logic_error);
    s.finalized_through = 1;
    EXPECT_NE(play_distribution(s, 4), std::vector<double>(4, 0.25));
}

TEST(PlayDistribution, ZeroEstimatesGiveUniform)
{
    AgentState s = solo_agent(5, 0, LearningRate::fixed(3.0));
    s.finalized_through = 9;
    EXPECT_EQ(play_distribution(s, 10), std::vector<double>(5, 0.2));
}

TEST(PlayDistribution, ExponentialWeights)
{
    AgentState s = solo_agent(2, 0, LearningRate::fixed(1.0));
    s.cumulative_estimates = {0.0, std::log(2.0)};
    s.finalized_through = 4;
    const auto p = play_distribution(s, 5);
    EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(PlayDistribution, ShiftInvarianceAndPositivity)
{
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        AgentState s = solo_agent(7, 1, LearningRate::fixed(0.1 + rng.uniform()));
        s.finalized_through = 100;
        for (auto& x : s.cumulative_estimates) {
            x = 50.0 * rng.uniform();
        }
        const auto p = play_distribution(s, 50);
        double total = 0.0;
        for (double x : p) {
            EXPECT_GT(x, 0.0);
            total += x;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
        AgentState shifted = s;
        const double c = 17.0 * rng.uniform();
        for (auto& x : shifted.cumulative_estimates) {
            x -= c;
        }
        const auto q = play_distribution(shifted, 50);
        for (std::size_t i = 0; i < 7; ++i) {
            EXPECT_NEAR(p[i], q[i], 1e-12);
        }
    }
}

TEST(PlayDistribution, HugeGapsStayPositive)
{
    AgentState s = solo_agent(3, 0, LearningRate::fixed(1.0));
    s.cumulative_estimates = {0.0, 1e6, 1e300};
    s.finalized_through = 1;
    const auto p = play_distribution(s, 2);
    EXPECT_GT(p[1], 0.0);
    EXPECT_GT(p[2], 0.0);
    EXPECT_NEAR(p[0], 1.0, 1e-12);
}

TEST(SampleArm, InverseCdf)
{
    const std::vector<double> p{0.25, 0.5, 0.25};
    EXPECT_EQ(sample_arm(p, 0.0), 0u);
    EXPECT_EQ(sample_arm(p, 0.2499), 0u);
    EXPECT_EQ(sample_arm(p, 0.25), 1u);
    EXPECT_EQ(sample_arm(p, 0.7499), 1u);
    EXPECT_EQ(sample_arm(p, 0.75), 2u);
    EXPECT_EQ(sample_arm(p, 0.9999999), 2u);
    // Rounding can leave the cumulative sum just below u.
    EXPECT_EQ(sample_arm(std::vector<double>{0.5, 0.5 - 1e-16, 0.0}, 1.0 - 1e-17), 1u);
}

TEST(ComputeB, Examples)
{
    const FeedbackGraphView clique(gen_clique(4), 1);
    const std::map<Vertex, std::vector<double>> one{{0, {0.1, 0.2, 0.3, 0.4}}};
    for (Arm i = 0; i < 4; ++i) {
        EXPECT_EQ(compute_b(i, {{0, 1.0}}, one, clique), 1.0);
    }
    const FeedbackGraphView edgeless(gen_edgeless(4), 0);
    for (Arm i = 0; i < 4; ++i) {
        EXPECT_EQ(compute_b(i, {{0, 1.0}}, one, edgeless), one.at(0)[i]);
    }
    const FeedbackGraphView e2(gen_edgeless(2), 0);
    const std::map<Vertex, std::vector<double>> two{{0, {0.5, 0.5}}, {1, {0.5, 0.5}}};
    EXPECT_DOUBLE_EQ(compute_b(0, {{0, 0.5}, {1, 0.5}}, two, e2), 0.4375);
    EXPECT_THROW(compute_b(0, {{0, 0.5}, {2, 0.5}}, two, e2), std::runtime_error);
}

TEST(ComputeB, MatchesProductFormula)
{
    Rng rng(8);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t na = 1 + rng.below(4);
        const std::size_t k = 1 + rng.below(6);
        const std::size_t f = rng.below(3);
        const Graph feed = gen_erdos_renyi(k, rng.uniform(), rng);
        const FeedbackGraphView view(feed, f);
        std::vector<double> q(na);
        std::vector<NeighborInfo> known;
        std::vector<std::vector<double>> p(na, std::vector<double>(k));
        std::map<Vertex, std::vector<double>> dist;
        for (Vertex u = 0; u < na; ++u) {
            q[u] = rng.uniform();
            known.push_back({u, q[u]});
            double z = 0.0;
            for (auto& x : p[u]) {
                x = rng.uniform() + 1e-3;
                z += x;
            }
            for (auto& x : p[u]) {
                x /= z;
            }
            dist[u] = p[u];
        }
        for (Arm i = 0; i < k; ++i) {
            EXPECT_NEAR(compute_b(i, known, dist, view), product_b(i, q, p, feed, f), 1e-12);
        }
    }
}

TEST(ComputeIndicator, BoundaryOfFeedbackRadius)
{
    // Path 0-1-2-3 with f = 2.
    Graph path(4);
    path.add_edge(0, 1);
    path.add_edge(1, 2);
    path.add_edge(2, 3);
    const FeedbackGraphView view(path, 2);
    const std::vector<NeighborEvent> none{{false, 0}, {false, 2}};
    EXPECT_FALSE(compute_B(0, none, view));
    const std::vector<NeighborEvent> self{{true, 1}};
    EXPECT_TRUE(compute_B(1, self, view));
    const std::vector<NeighborEvent> at_f{{false, 0}, {true, 2}};
    EXPECT_TRUE(compute_B(0, at_f, view));
    const std::vector<NeighborEvent> beyond{{true, 3}};
    EXPECT_FALSE(compute_B(0, beyond, view));
}

TEST(ComputeIndicator, MonteCarloFrequencyMatchesB)
{
    // Three agents, K = 4 arms on a path, f = 1; frequency of B over 2e5
    // independent resamples against b.
    Graph path(4);
    path.add_edge(0, 1);
    path.add_edge(1, 2);
    path.add_edge(2, 3);
    const FeedbackGraphView view(path, 1);
    const std::vector<NeighborInfo> known{{0, 0.3}, {1, 0.5}, {2, 0.9}};
    const std::map<Vertex, std::vector<double>> dist{
        {0, {0.7, 0.1, 0.1, 0.1}}, {1, {0.25, 0.25, 0.25, 0.25}}, {2, {0.05, 0.05, 0.1, 0.8}}};
    Rng rng(stream_key(1, "calibration"));
    const int n = 200000;
    std::vector<int> hits(4, 0);
    std::vector<NeighborEvent> events(3);
    for (int rep = 0; rep < n; ++rep) {
        for (std::size_t u = 0; u < 3; ++u) {
            events[u].active = rng.bernoulli(known[u].q);
            events[u].arm = sample_arm(dist.at(u), rng.uniform());
        }
        for (Arm i = 0; i < 4; ++i) {
            hits[i] += compute_B(i, events, view) ? 1 : 0;
        }
    }
    for (Arm i = 0; i < 4; ++i) {
        const double b = compute_b(i, known, dist, view);
        const double se = std::sqrt(b * (1.0 - b) / n);
        EXPECT_NEAR(static_cast<double>(hits[i]) / n, b, 4 * se) << "arm " << i;
    }
}

TEST(EstimateLoss, Examples)
{
    EXPECT_EQ(estimate_loss(0.9, false, 0.3), 0.0);
    EXPECT_EQ(estimate_loss(1.0, true, 0.5), 2.0);
    EXPECT_THROW(estimate_loss(1.0, true, 0.0), std::invalid_argument);
    EXPECT_THROW(estimate_loss(1.0, false, -1.0), std::invalid_argument);
}

TEST(TunedEta, Examples)
{
    EXPECT_NEAR(tuned_eta(2, 100, 1.0, 1.0, 0), std::sqrt(std::log(2.0) / 200.0), 1e-15);
    EXPECT_NEAR(tuned_eta(2, 100, 1.0, 1.0, 0), 0.05887, 5e-6);
    EXPECT_DOUBLE_EQ(tuned_eta(10, 5000, 3.0, 2.0, 2), tuned_eta(10, 5000, 12.0, 8.0, 2));
    EXPECT_GT(tuned_eta(10, 100, 3.0, 2.0, 2), tuned_eta(10, 200, 3.0, 2.0, 2));
    EXPECT_GT(tuned_eta(10, 100, 3.0, 2.0, 2), tuned_eta(10, 100, 4.0, 2.0, 2));
    EXPECT_GT(tuned_eta(10, 100, 3.0, 2.0, 2), tuned_eta(10, 100, 3.0, 2.0, 3));
    EXPECT_THROW(tuned_eta(1, 100, 1.0, 1.0, 0), std::invalid_argument);
}

TEST(Doubling, InitialPhase)
{
    // ln 20 = 2.9957, log2 of that = 1.583.
    EXPECT_EQ(initial_phase(20), 2);
    EXPECT_NEAR(phase_eta(20, 2), 0.8654, 5e-5);
    EXPECT_EQ(initial_phase(2), 0);  // log2 ln 2 = -0.53
    EXPECT_EQ(initial_phase(3), 1);  // log2 ln 3 = 0.136
    const AgentState s = solo_agent(20, 0, LearningRate::doubling_trick(false));
    EXPECT_EQ(s.doubling.phase, 2);
    EXPECT_DOUBLE_EQ(s.eta, std::sqrt(std::log(20.0) / 4.0));
}

TEST(Doubling, NoIncrementDuringFirstDRoundsOfPhase)
{
    AgentState s = solo_agent(2, 3, LearningRate::doubling_trick(false));
    const std::vector<double> b{0.5, 0.5};
    const std::vector<double> p{0.5, 0.5};
    for (Round t = 1; t <= 4; ++t) {
        doubling_step(s, t, b, p);
        EXPECT_EQ(s.doubling.accumulated, 0.0) << "round " << t;
    }
    // r_0 = 0: the first positive increment (d + 2 = 5) overflows 2^0.
    doubling_step(s, 5, b, p);
    EXPECT_EQ(s.doubling.phase, 1);
    EXPECT_EQ(s.doubling.phase_start, 5);
    for (Round t = 6; t <= 8; ++t) {
        doubling_step(s, t, b, p);
        EXPECT_EQ(s.doubling.accumulated, 0.0);
    }
    AgentState fixed = solo_agent(2, 0, LearningRate::fixed(1.0));
    EXPECT_THROW(doubling_step(fixed, 1, b, p), std::logic_error);
}

TEST(Doubling, ResetClearsEstimatesOnlyInResetMode)
{
    for (bool reset : {false, true}) {
        AgentState s = solo_agent(2, 0, LearningRate::doubling_trick(reset));
        s.cumulative_estimates = {3.0, 4.0};
        const std::vector<double> b{0.1, 0.1};
        const std::vector<double> p{0.5, 0.5};
        doubling_step(s, 1, b, p);
        doubling_step(s, 2, b, p);  // X = 10 > 2^0
        EXPECT_EQ(s.doubling.phase, 1);
        EXPECT_DOUBLE_EQ(s.eta, std::sqrt(std::log(2.0) / 2.0));
        if (reset) {
            EXPECT_EQ(s.cumulative_estimates, (std::vector<double>{0.0, 0.0}));
        } else {
            EXPECT_EQ(s.cumulative_estimates, (std::vector<double>{3.0, 4.0}));
        }
    }
}

TEST(Doubling, PhaseLengthsInSingleAgentReduction)
{
    // One agent, q = 1, edgeless F, n = f = 0: b = p, so every round after
    // the first of a phase adds exactly K and phase r lasts ceil(2^r / K)
    // rounds (K = 3 never divides 2^r).
    const std::size_t k = 3;
    const FeedbackGraphView view(gen_edgeless(k), 0);
    AgentState s = solo_agent(k, 0, LearningRate::doubling_trick(false));
    const int r0 = s.doubling.phase;
    for (Round t = 1; t <= 400; ++t) {
        s.now = t;
        const auto p = play_distribution(s, t);
        const Arm arm = sample_arm(p, counter_uniform(1, 0, static_cast<std::uint64_t>(t)));
        receive(s, make_message(t, 0, p, arm, {{0.5, t, arm}}, view));
        finalize_round(s, t, view);
    }
    const auto& starts = s.doubling.phase_starts;
    ASSERT_GE(starts.size(), 5u);
    for (std::size_t idx = 0; idx + 1 < starts.size(); ++idx) {
        const double len = std::ldexp(1.0, r0 + static_cast<int>(idx)) / static_cast<double>(k);
        EXPECT_EQ(starts[idx + 1] - starts[idx], static_cast<Round>(std::ceil(len))) << "phase " << idx;
    }
}

TEST(Receive, RejectsProtocolViolations)
{
    const FeedbackGraphView view(gen_edgeless(2), 0);
    AgentState s = make_agent(1, {{1, 1.0}, {2, 0.5}}, 2, 1, LearningRate::fixed(1.0));
    s.now = 3;
    EXPECT_THROW(receive(s, make_message(3, 0, {0.5, 0.5}, std::nullopt, {}, view)), std::logic_error);
    EXPECT_THROW(receive(s, make_message(4, 2, {0.5, 0.5}, std::nullopt, {}, view)), std::logic_error);
    receive(s, make_message(3, 2, {0.5, 0.5}, std::nullopt, {}, view));
    EXPECT_THROW(receive(s, make_message(3, 2, {0.5, 0.5}, std::nullopt, {}, view)), std::logic_error);
    s.finalized_through = 2;
    EXPECT_THROW(receive(s, make_message(3, 1, {0.5, 0.5}, 0, {{1.0, 2, 0}}, view)), std::logic_error);
}

TEST(MakeAgent, Validation)
{
    EXPECT_THROW(make_agent(0, {{1, 1.0}}, 2, 0, LearningRate::fixed(1.0)), std::invalid_argument);
    EXPECT_THROW(make_agent(0, {{0, 1.0}}, 2, 0, LearningRate::fixed(0.0)), std::invalid_argument);
    EXPECT_THROW(make_agent(0, {{0, 1.0}}, 0, 0, LearningRate::fixed(1.0)), std::invalid_argument);
    const auto s = make_agent(2, {{5, 0.1}, {2, 0.4}, {0, 0.3}}, 2, 0, LearningRate::fixed(1.0));
    EXPECT_EQ(s.known_neighbor_q.front().agent, 0u);
    EXPECT_EQ(s.own_q(), 0.4);
    EXPECT_EQ(s.slot_of(5), 2u);
    EXPECT_EQ(s.slot_of(3), static_cast<std::size_t>(-1));
}

TEST(ValidateMessage, Invariants)
{
    FeedbackMessage m;
    m.origin_round = 5;
    m.play_distribution = {0.5, 0.5};
    EXPECT_NO_THROW(validate_message(m));
    m.observed_losses = {{0.5, 6, 0}};
    EXPECT_THROW(validate_message(m), std::invalid_argument);
    m.observed_losses = {{1.5, 5, 0}};
    EXPECT_THROW(validate_message(m), std::invalid_argument);
    m.observed_losses.clear();
    m.play_distribution = {0.5, 0.6};
    EXPECT_THROW(validate_message(m), std::invalid_argument);
}

TEST(FinalizeRound, Errors)
{
    const FeedbackGraphView view(gen_edgeless(2), 1);
    AgentState s = solo_agent(2, 2, LearningRate::fixed(1.0));
    s.now = 3;
    receive(s, make_message(1, 0, {0.5, 0.5}, std::nullopt, {}, view));
    EXPECT_THROW(finalize_round(s, 2, view), std::logic_error);
    EXPECT_NO_THROW(finalize_round(s, 1, view));
    EXPECT_THROW(finalize_round(s, 1, view), std::logic_error);
    s.now = 3;
    EXPECT_THROW(finalize_round(s, 2, view), std::logic_error);  // needs now >= 4
    s.now = 4;
    EXPECT_THROW(finalize_round(s, 2, view), std::runtime_error);  // no message
}

TEST(FinalizeRound, MissingLossIsDetected)
{
    const FeedbackGraphView view(gen_edgeless(2), 0);
    AgentState s = solo_agent(2, 0, LearningRate::fixed(1.0));
    s.now = 1;
    receive(s, make_message(1, 0, {0.5, 0.5}, 1, {}, view));
    EXPECT_THROW(finalize_round(s, 1, view), std::logic_error);
}

TEST(FinalizeRound, NothingObservedOnlyMarksRound)
{
    const FeedbackGraphView view(gen_edgeless(2), 0);
    AgentState s = solo_agent(2, 0, LearningRate::fixed(1.0));
    s.cumulative_estimates = {0.25, 0.5};
    s.now = 1;
    receive(s, make_message(1, 0, {0.5, 0.5}, std::nullopt, {}, view));
    finalize_round(s, 1, view);
    EXPECT_EQ(s.cumulative_estimates, (std::vector<double>{0.25, 0.5}));
    EXPECT_EQ(s.finalized_through, 1);
    EXPECT_TRUE(s.inbox.empty());
}

TEST(FinalizeRound, Exp3Update)
{
    const FeedbackGraphView view(gen_edgeless(3), 0);
    AgentState s = solo_agent(3, 0, LearningRate::fixed(1.0));
    s.now = 1;
    receive(s, make_message(1, 0, {0.2, 0.3, 0.5}, 1, {{0.6, 1, 1}}, view));
    finalize_round(s, 1, view);
    EXPECT_EQ(s.cumulative_estimates[0], 0.0);
    EXPECT_EQ(s.cumulative_estimates[1], 0.6 / 0.3);
    EXPECT_EQ(s.cumulative_estimates[2], 0.0);
}

TEST(FinalizeRound, ZeroActivationAgentSkipsEstimation)
{
    const FeedbackGraphView view(gen_edgeless(2), 0);
    AgentState s = make_agent(0, {{0, 0.0}}, 2, 0, LearningRate::fixed(1.0));
    s.now = 1;
    receive(s, make_message(1, 0, {0.5, 0.5}, std::nullopt, {}, view));
    finalize_round(s, 1, view);
    EXPECT_EQ(s.cumulative_estimates, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(s.clamp_hits, 0u);
}

TEST(FinalizeRound, MatchesRecomputedSum)
{
    // Agent 0 with neighbors 1 and 2 on a 4-arm path (f = 1). Messages for
    // 30 rounds; the cumulative estimates must equal the per-round estimates
    // recomputed from compute_b, compute_B and estimate_loss.
    Graph path(4);
    path.add_edge(0, 1);
    path.add_edge(1, 2);
    path.add_edge(2, 3);
    const FeedbackGraphView view(path, 1);
    const std::vector<NeighborInfo> known{{0, 0.6}, {1, 0.4}, {2, 1.0}};
    AgentState s = make_agent(0, known, 4, 0, LearningRate::fixed(0.1));
    Rng rng(12);
    std::vector<double> expected(4, 0.0);
    for (Round t = 1; t <= 30; ++t) {
        s.now = t;
        std::vector<double> losses(4);
        for (auto& x : losses) {
            x = rng.uniform();
        }
        std::map<Vertex, std::vector<double>> dist;
        std::vector<NeighborEvent> events;
        for (const auto& nb : known) {
            std::vector<double> p(4);
            double z = 0.0;
            for (auto& x : p) {
                x = 0.1 + rng.uniform();
                z += x;
            }
            for (auto& x : p) {
                x /= z;
            }
            const bool active = rng.bernoulli(nb.q);
            const Arm arm = sample_arm(p, rng.uniform());
            std::vector<ObservedLoss> seen;
            if (active) {
                for (Arm j : view.reach(arm)) {
                    seen.push_back({losses[j], t, j});
                }
            }
            dist[nb.agent] = p;
            events.push_back({active, arm});
            receive(s, make_message(t, nb.agent, p, active ? std::optional<Arm>(arm) : std::nullopt, seen, view));
        }
        for (Arm i = 0; i < 4; ++i) {
            const bool hit = compute_B(i, events, view);
            expected[i] += estimate_loss(losses[i], hit, compute_b(i, known, dist, view));
        }
        finalize_round(s, t, view);
        for (Arm i = 0; i < 4; ++i) {
            EXPECT_NEAR(s.cumulative_estimates[i], expected[i], 1e-12 * (1.0 + expected[i]));
        }
    }
    EXPECT_EQ(s.clamp_hits, 0u);
}
