#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopbandit/agent.hpp"
#include "coopbandit/format.hpp"
#include "coopbandit/graph.hpp"
#include "coopbandit/independence.hpp"
#include "coopbandit/rng.hpp"
#include "coopbandit/simulator.hpp"

// Numerical checks of the graph-theoretic inequalities behind the regret
// bound, evaluated exactly on small instances.

namespace coopbandit {

inline constexpr double kInequalityTolerance = 1e-9;

/// 1 / (1 - e^{-1}) = e / (e - 1).
inline constexpr double kBoundConstant = std::numbers::e / (std::numbers::e - 1.0);

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;

    double violation() const noexcept { return lhs - rhs; }
};

inline BoundCheck make_check(double lhs, double rhs) { return {lhs, rhs, lhs <= rhs + kInequalityTolerance}; }

/// Communication graph, feedback graph, delays, activation probabilities in
/// (0, 1] and one play distribution per agent (p[v][i]).
struct LemmaInstance {
    Graph net{1};
    Graph feed{1};
    std::size_t n = 0;
    std::size_t f = 0;
    std::vector<double> q{1.0};
    std::vector<std::vector<double>> p{{1.0}};

    void validate() const
    {
        if (q.size() != net.vertex_count() || p.size() != net.vertex_count()) {
            throw std::invalid_argument("LemmaInstance: q and p need one entry per agent");
        }
        for (double x : q) {
            if (!(x > 0.0 && x <= 1.0)) {
                throw std::invalid_argument("LemmaInstance: q entries must lie in (0, 1]");
            }
        }
        for (const auto& row : p) {
            if (row.size() != feed.vertex_count()) {
                throw std::invalid_argument("LemmaInstance: p rows need one entry per arm");
            }
            double s = 0.0;
            for (double x : row) {
                if (!(x >= 0.0)) {
                    throw std::invalid_argument("LemmaInstance: negative probability");
                }
                s += x;
            }
            if (std::abs(s - 1.0) > 1e-12) {
                throw std::invalid_argument("LemmaInstance: p row sums to " + format_double(s));
            }
        }
    }
};

/// sum_v sum_i q(v) p(i,v) / b(i,v) against (alpha(N^n ⊠ F^f) + Q) / (1 - e^{-1}),
/// with b(i,v) = 1 - prod_{u in N_n(v)} (1 - q(u) sum_{j in N_f(i)} p(j,u)).
inline BoundCheck lemma1_check(const LemmaInstance& inst, std::size_t exact_limit = kDefaultExactLimit)
{
    inst.validate();
    const Graph net_pow = power(inst.net, inst.n);
    const Graph feed_pow = power(inst.feed, inst.f);
    const AlphaResult alpha = independence_number(strong_product(net_pow, feed_pow), exact_limit);
    if (!alpha.exact) {
        throw std::runtime_error("lemma1_check: exact independence number of the product unavailable");
    }
    const std::size_t na = inst.net.vertex_count();
    const std::size_t k = inst.feed.vertex_count();
    double lhs = 0.0;
    double mass = 0.0;
    for (Vertex v = 0; v < na; ++v) {
        mass += inst.q[v];
        const auto nv = neighborhood(net_pow, v, 1);
        for (Arm i = 0; i < k; ++i) {
            const auto ni = neighborhood(feed_pow, i, 1);
            double miss = 1.0;
            for (Vertex u : nv) {
                double s = 0.0;
                for (Arm j : ni) {
                    s += inst.p[u][j];
                }
                miss *= 1.0 - inst.q[u] * s;
            }
            lhs += inst.q[v] * inst.p[v][i] / (1.0 - miss);
        }
    }
    return make_check(lhs, kBoundConstant * (static_cast<double>(alpha.lower) + mass));
}

/// sum_i p(i) / P(i) against alpha(g^d), P(i) = sum of p over N_d(i).
/// Terms with p(i) = 0 contribute nothing.
inline BoundCheck lemma3_check(const Graph& g, std::size_t dpow, const std::vector<double>& p,
                               std::size_t exact_limit = kDefaultExactLimit)
{
    if (p.size() != g.vertex_count()) {
        throw std::invalid_argument("lemma3_check: one weight per vertex required");
    }
    const Graph gp = power(g, dpow);
    double lhs = 0.0;
    for (Vertex i = 0; i < g.vertex_count(); ++i) {
        if (!(p[i] >= 0.0)) {
            throw std::invalid_argument("lemma3_check: negative weight");
        }
        if (p[i] == 0.0) {
            continue;
        }
        double big = 0.0;
        for (Vertex j : neighborhood(gp, i, 1)) {
            big += p[j];
        }
        if (!(big > 0.0)) {
            throw std::invalid_argument("lemma3_check: P(" + std::to_string(i) + ") = 0");
        }
        lhs += p[i] / big;
    }
    const AlphaResult alpha = independence_number(gp, exact_limit);
    if (!alpha.exact) {
        throw std::runtime_error("lemma3_check: exact independence number unavailable");
    }
    return make_check(lhs, static_cast<double>(alpha.lower));
}

/// sum_v c(v) / C(v) against (alpha(g^d) + sum_v c(v)) / (1 - e^{-1}), with
/// C(v) = 1 - prod_{w in N_d(v)} (1 - c(w)).
inline BoundCheck lemma4_check(const Graph& g, std::size_t dpow, const std::vector<double>& c,
                               std::size_t exact_limit = kDefaultExactLimit)
{
    if (c.size() != g.vertex_count()) {
        throw std::invalid_argument("lemma4_check: one value per vertex required");
    }
    const Graph gp = power(g, dpow);
    double lhs = 0.0;
    double total = 0.0;
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        if (!(c[v] >= 0.0 && c[v] <= 1.0)) {
            throw std::invalid_argument("lemma4_check: c values must lie in [0, 1]");
        }
        total += c[v];
        if (c[v] == 0.0) {
            continue;
        }
        double miss = 1.0;
        for (Vertex w : neighborhood(gp, v, 1)) {
            miss *= 1.0 - c[w];
        }
        const double big = 1.0 - miss;
        if (!(big > 0.0)) {
            throw std::invalid_argument("lemma4_check: C(" + std::to_string(v) + ") = 0");
        }
        lhs += c[v] / big;
    }
    const AlphaResult alpha = independence_number(gp, exact_limit);
    if (!alpha.exact) {
        throw std::runtime_error("lemma4_check: exact independence number unavailable");
    }
    return make_check(lhs, kBoundConstant * (static_cast<double>(alpha.lower) + total));
}

/// Two-graph form. w[i][v] with i in g1 (the graph summed over) and v in g2
/// (the graph multiplied over):
///   sum_{i,v} w(i,v) / (1 - prod_{u in N(v)} (1 - sum_{j in N(i)} w(j,u)))
/// against e/(e-1) (alpha(g1 ⊠ g2) + sum w).
inline BoundCheck lemma6_check(const Graph& g1, const Graph& g2, const std::vector<std::vector<double>>& w,
                               std::size_t exact_limit = kDefaultExactLimit)
{
    const std::size_t n1 = g1.vertex_count();
    const std::size_t n2 = g2.vertex_count();
    if (w.size() != n1) {
        throw std::invalid_argument("lemma6_check: w needs one row per vertex of g1");
    }
    double total = 0.0;
    for (const auto& row : w) {
        if (row.size() != n2) {
            throw std::invalid_argument("lemma6_check: w needs one column per vertex of g2");
        }
        for (double x : row) {
            if (!(x >= 0.0)) {
                throw std::invalid_argument("lemma6_check: w must be nonnegative");
            }
            total += x;
        }
    }
    // s[i][u] = sum_{j in N(i)} w(j, u)
    std::vector<std::vector<double>> s(n1, std::vector<double>(n2, 0.0));
    for (Vertex i = 0; i < n1; ++i) {
        const auto ni = neighborhood(g1, i, 1);
        for (Vertex u = 0; u < n2; ++u) {
            for (Vertex j : ni) {
                s[i][u] += w[j][u];
            }
            if (1.0 - s[i][u] < 0.0) {
                throw std::invalid_argument("lemma6_check: hypothesis violated at (i, u) = (" + std::to_string(i)
                                            + ", " + std::to_string(u) + "): neighborhood sum exceeds 1");
            }
        }
    }
    double lhs = 0.0;
    for (Vertex i = 0; i < n1; ++i) {
        for (Vertex v = 0; v < n2; ++v) {
            double miss = 1.0;
            for (Vertex u : neighborhood(g2, v, 1)) {
                miss *= 1.0 - s[i][u];
            }
            const double den = 1.0 - miss;
            if (!(den > 0.0)) {
                throw std::invalid_argument("lemma6_check: hypothesis violated at (i, v) = (" + std::to_string(i)
                                            + ", " + std::to_string(v) + "): zero denominator");
            }
            lhs += w[i][v] / den;
        }
    }
    const AlphaResult alpha = independence_number(strong_product(g1, g2), exact_limit);
    if (!alpha.exact) {
        throw std::runtime_error("lemma6_check: exact independence number of the product unavailable");
    }
    return make_check(lhs, kBoundConstant * (static_cast<double>(alpha.lower) + total));
}

/// A lemma instance plus one round of losses.
struct UnbiasednessInstance {
    LemmaInstance setup;
    std::vector<double> losses;
};

inline constexpr std::size_t kMaxEnumeratedOutcomes = std::size_t{1} << 20;

/// Exact expectation of the loss estimate of every (arm, agent) over all
/// activation sets and action draws; returns max |E[estimate] - loss|.
/// Uses the learner's own compute_B, compute_b and estimate_loss.
inline double unbiasedness_oracle(const UnbiasednessInstance& inst)
{
    const LemmaInstance& s = inst.setup;
    s.validate();
    const std::size_t na = s.net.vertex_count();
    const std::size_t k = s.feed.vertex_count();
    if (inst.losses.size() != k) {
        throw std::invalid_argument("unbiasedness_oracle: one loss per arm required");
    }
    double outcomes = 1.0;
    for (std::size_t v = 0; v < na; ++v) {
        outcomes *= static_cast<double>(k + 1);
    }
    if (na > 20 || outcomes > static_cast<double>(kMaxEnumeratedOutcomes)) {
        throw std::invalid_argument("unbiasedness_oracle: instance too large to enumerate");
    }

    const FeedbackGraphView view(s.feed, s.f);
    const DistanceMatrix dist = all_pairs_distances(s.net);
    std::vector<std::vector<NeighborInfo>> known(na);
    for (Vertex v = 0; v < na; ++v) {
        for (Vertex u = 0; u < na; ++u) {
            if (dist.within(v, u, s.n)) {
                known[v].push_back({u, s.q[u]});
            }
        }
    }
    std::map<Vertex, std::vector<double>> all_distributions;
    for (Vertex u = 0; u < na; ++u) {
        all_distributions[u] = s.p[u];
    }
    std::vector<std::vector<double>> b(na, std::vector<double>(k));
    for (Vertex v = 0; v < na; ++v) {
        for (Arm i = 0; i < k; ++i) {
            b[v][i] = compute_b(i, known[v], all_distributions, view);
        }
    }

    std::vector<std::vector<double>> expectation(na, std::vector<double>(k, 0.0));
    std::vector<NeighborEvent> events(na);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << na); ++mask) {
        double p_active = 1.0;
        std::vector<Vertex> act;
        for (Vertex v = 0; v < na; ++v) {
            const bool on = ((mask >> v) & 1U) != 0;
            p_active *= on ? s.q[v] : 1.0 - s.q[v];
            if (on) {
                act.push_back(v);
            }
        }
        if (p_active == 0.0) {
            continue;
        }
        std::vector<Arm> draw(act.size(), 0);
        while (true) {
            double prob = p_active;
            for (Vertex v = 0; v < na; ++v) {
                events[v] = {};
            }
            for (std::size_t a = 0; a < act.size(); ++a) {
                prob *= s.p[act[a]][draw[a]];
                events[act[a]] = {true, draw[a]};
            }
            if (prob > 0.0) {
                for (Vertex v = 0; v < na; ++v) {
                    std::vector<NeighborEvent> local;
                    for (const auto& nb : known[v]) {
                        local.push_back(events[nb.agent]);
                    }
                    for (Arm i = 0; i < k; ++i) {
                        const bool hit = compute_B(i, local, view);
                        expectation[v][i] += prob * estimate_loss(inst.losses[i], hit, b[v][i]);
                    }
                }
            }
            std::size_t pos = 0;
            while (pos < draw.size() && ++draw[pos] == k) {
                draw[pos++] = 0;
            }
            if (pos == draw.size()) {
                break;
            }
        }
    }
    double worst = 0.0;
    for (Vertex v = 0; v < na; ++v) {
        for (Arm i = 0; i < k; ++i) {
            worst = std::max(worst, std::abs(expectation[v][i] - inst.losses[i]));
        }
    }
    return worst;
}

/// Upper bound on R_T / Q for a fixed learning rate:
/// d + ln K / eta + eta T ((alpha / Q + 1) / (1 - e^{-1}) + d).
inline double theorem1_bound(std::size_t arms, Round horizon, double mass, std::size_t delay, double eta,
                             double alpha_product)
{
    if (arms < 2) {
        throw std::invalid_argument("theorem1_bound: need at least two arms");
    }
    const double d = static_cast<double>(delay);
    return d + std::log(static_cast<double>(arms)) / eta
           + eta * static_cast<double>(horizon) * (kBoundConstant * (alpha_product / mass + 1.0) + d);
}

inline double theorem1_bound(const SimConfig& config, double eta, double alpha_product)
{
    return theorem1_bound(config.arms(), config.horizon, config.total_mass(), config.total_delay(), eta,
                          alpha_product);
}

// Random instance generators ------------------------------------------------

namespace detail {

inline Graph random_graph(std::size_t nv, Rng& rng)
{
    const double p = rng.uniform();
    return gen_erdos_renyi(nv, p, rng);
}

/// Probability vector with entries in (0, 1].
inline std::vector<double> random_distribution(std::size_t k, Rng& rng)
{
    std::vector<double> p(k);
    double total = 0.0;
    for (auto& x : p) {
        x = 0.05 + rng.uniform();
        total += x;
    }
    for (auto& x : p) {
        x /= total;
    }
    return p;
}

} // namespace detail

/// |A|, |K| in 1..8 (products up to 64 vertices), n, f in {0, 1, 2}.
inline LemmaInstance random_lemma1_instance(Rng& rng)
{
    LemmaInstance inst;
    const std::size_t na = 1 + rng.below(8);
    const std::size_t k = 1 + rng.below(8);
    inst.net = detail::random_graph(na, rng);
    inst.feed = detail::random_graph(k, rng);
    inst.n = rng.below(3);
    inst.f = rng.below(3);
    inst.q.resize(na);
    inst.p.clear();
    for (Vertex v = 0; v < na; ++v) {
        inst.q[v] = rng.bernoulli(0.2) ? 1.0 : 1.0 - rng.uniform();
        inst.p.push_back(detail::random_distribution(k, rng));
    }
    return inst;
}

struct WeightedGraphInstance {
    Graph g{1};
    std::size_t dpow = 1;
    std::vector<double> weights;
};

/// Up to 12 vertices, d in 0..3; about a quarter of the weights are zero.
inline WeightedGraphInstance random_lemma3_instance(Rng& rng)
{
    WeightedGraphInstance inst;
    const std::size_t nv = 1 + rng.below(12);
    inst.g = detail::random_graph(nv, rng);
    inst.dpow = rng.below(4);
    inst.weights.resize(nv);
    for (auto& x : inst.weights) {
        x = rng.bernoulli(0.25) ? 0.0 : rng.uniform() * 10.0;
    }
    return inst;
}

/// Up to 12 vertices, d in 0..3; c values in [0, 1] with zeros and ones.
inline WeightedGraphInstance random_lemma4_instance(Rng& rng)
{
    WeightedGraphInstance inst;
    const std::size_t nv = 1 + rng.below(12);
    inst.g = detail::random_graph(nv, rng);
    inst.dpow = rng.below(4);
    inst.weights.resize(nv);
    for (auto& x : inst.weights) {
        const double r = rng.uniform();
        x = r < 0.15 ? 0.0 : (r < 0.25 ? 1.0 : rng.uniform());
    }
    return inst;
}

struct ProductWeightInstance {
    Graph g1{1};
    Graph g2{1};
    std::vector<std::vector<double>> w;
};

/// Graphs of up to 8 vertices each. Each column w(., u) is rescaled so that
/// its largest g1-neighborhood sum is at most 1 (exactly 1 for some draws);
/// draws with a zero denominator are rejected.
inline ProductWeightInstance random_lemma6_instance(Rng& rng)
{
    while (true) {
        ProductWeightInstance inst;
        const std::size_t n1 = 1 + rng.below(8);
        const std::size_t n2 = 1 + rng.below(8);
        inst.g1 = detail::random_graph(n1, rng);
        inst.g2 = detail::random_graph(n2, rng);
        inst.w.assign(n1, std::vector<double>(n2, 0.0));
        for (auto& row : inst.w) {
            for (auto& x : row) {
                x = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
            }
        }
        for (Vertex u = 0; u < n2; ++u) {
            double largest = 0.0;
            for (Vertex i = 0; i < n1; ++i) {
                double s = 0.0;
                for (Vertex j : neighborhood(inst.g1, i, 1)) {
                    s += inst.w[j][u];
                }
                largest = std::max(largest, s);
            }
            if (largest > 0.0) {
                const double target = rng.bernoulli(0.3) ? 1.0 : rng.uniform() * std::min(1.0, largest);
                if (largest > 1.0 || target == 1.0) {
                    const double scale = target / largest;
                    for (Vertex i = 0; i < n1; ++i) {
                        inst.w[i][u] *= scale;
                    }
                }
            }
        }
        bool feasible = true;
        for (Vertex i = 0; i < n1 && feasible; ++i) {
            const auto ni = neighborhood(inst.g1, i, 1);
            for (Vertex u = 0; u < n2 && feasible; ++u) {
                double s = 0.0;
                for (Vertex j : ni) {
                    s += inst.w[j][u];
                }
                feasible = s <= 1.0;
            }
            for (Vertex v = 0; v < n2 && feasible; ++v) {
                double miss = 1.0;
                for (Vertex u : neighborhood(inst.g2, v, 1)) {
                    double s = 0.0;
                    for (Vertex j : ni) {
                        s += inst.w[j][u];
                    }
                    miss *= 1.0 - s;
                }
                feasible = 1.0 - miss > 0.0;
            }
        }
        if (feasible) {
            return inst;
        }
    }
}

/// Twenty enumerable instances cycling through A in {1,2,3}, K in {2,3},
/// n, f in {0,1} and q in {0.3, 0.5, 1}, on random graphs and distributions.
inline std::vector<UnbiasednessInstance> unbiasedness_battery(std::uint64_t seed)
{
    Rng rng(stream_key(seed, "unbiasedness-battery"));
    const std::size_t agent_counts[] = {1, 2, 3};
    const std::size_t arm_counts[] = {2, 3};
    const double qs[] = {0.3, 0.5, 1.0};
    std::vector<UnbiasednessInstance> out;
    for (std::size_t idx = 0; idx < 20; ++idx) {
        UnbiasednessInstance inst;
        const std::size_t na = agent_counts[idx % 3];
        const std::size_t k = arm_counts[(idx / 3) % 2];
        inst.setup.n = idx % 2;
        inst.setup.f = (idx / 2) % 2;
        // Alternate dense and sparse graphs so both delays matter.
        inst.setup.net = gen_erdos_renyi(na, idx % 4 < 2 ? 0.8 : 0.3, rng);
        inst.setup.feed = gen_erdos_renyi(k, idx % 5 < 3 ? 0.6 : 0.2, rng);
        inst.setup.q.clear();
        inst.setup.p.clear();
        for (Vertex v = 0; v < na; ++v) {
            inst.setup.q.push_back(qs[(idx + v) % 3]);
            inst.setup.p.push_back(detail::random_distribution(k, rng));
        }
        for (Arm i = 0; i < k; ++i) {
            inst.losses.push_back(rng.uniform());
        }
        out.push_back(std::move(inst));
    }
    return out;
}

// Suites and reporting ------------------------------------------------------

struct SuiteResult {
    std::string check;
    std::size_t instances = 0;
    std::size_t failures = 0;
    /// Largest lhs - rhs seen (bias for the unbiasedness check).
    double max_violation = -std::numeric_limits<double>::infinity();
    double seconds = 0.0;
};

namespace detail {

template <class Body>
SuiteResult run_suite(std::string name, std::size_t instances, Body&& body)
{
    SuiteResult r;
    r.check = std::move(name);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < instances; ++k) {
        const BoundCheck c = body(k);
        ++r.instances;
        r.failures += c.holds ? 0 : 1;
        r.max_violation = std::max(r.max_violation, c.violation());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

} // namespace detail

inline constexpr double kUnbiasednessTolerance = 1e-12;

/// Runs the four lemma suites (`instances` random instances each) and the
/// unbiasedness battery.
inline std::vector<SuiteResult> run_verification(std::uint64_t seed, std::size_t instances = 200)
{
    std::vector<SuiteResult> out;
    {
        Rng rng(stream_key(seed, "lemma1"));
        out.push_back(detail::run_suite("lemma1", instances, [&](std::size_t) {
            return lemma1_check(random_lemma1_instance(rng));
        }));
    }
    {
        Rng rng(stream_key(seed, "lemma3"));
        out.push_back(detail::run_suite("lemma3", instances, [&](std::size_t) {
            const auto inst = random_lemma3_instance(rng);
            return lemma3_check(inst.g, inst.dpow, inst.weights);
        }));
    }
    {
        Rng rng(stream_key(seed, "lemma4"));
        out.push_back(detail::run_suite("lemma4", instances, [&](std::size_t) {
            const auto inst = random_lemma4_instance(rng);
            return lemma4_check(inst.g, inst.dpow, inst.weights);
        }));
    }
    {
        Rng rng(stream_key(seed, "lemma6"));
        out.push_back(detail::run_suite("lemma6", instances, [&](std::size_t) {
            const auto inst = random_lemma6_instance(rng);
            return lemma6_check(inst.g1, inst.g2, inst.w);
        }));
    }
    {
        const auto battery = unbiasedness_battery(seed);
        out.push_back(detail::run_suite("unbiasedness", battery.size(), [&](std::size_t k) {
            const double bias = unbiasedness_oracle(battery[k]);
            return BoundCheck{bias, 0.0, bias < kUnbiasednessTolerance};
        }));
    }
    return out;
}

inline void write_verification_csv(std::ostream& out, const std::vector<SuiteResult>& results)
{
    out << "check,instances,failures,max_violation\n";
    for (const auto& r : results) {
        out << r.check << ',' << r.instances << ',' << r.failures << ',' << format_double(r.max_violation) << '\n';
    }
}

inline void write_verification_summary(std::ostream& out, const std::vector<SuiteResult>& results)
{
    for (const auto& r : results) {
        out << (r.failures == 0 ? "PASS " : "FAIL ") << r.check << ": " << r.instances << " instances, " << r.failures
            << " failures, max violation " << format_double(r.max_violation) << " ("
            << format_double(std::round(r.seconds * 1000.0) / 1000.0) << " s)\n";
    }
}

} // namespace coopbandit
