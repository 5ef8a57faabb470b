#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coopbandit/agent.hpp"
#include "coopbandit/environment.hpp"
#include "coopbandit/format.hpp"
#include "coopbandit/graph.hpp"
#include "coopbandit/independence.hpp"

namespace coopbandit {

struct EtaPolicy {
    enum class Kind { fixed, tuned, doubling };

    Kind kind = Kind::doubling;
    double value = 0.0;
    bool reset = false;

    static EtaPolicy fixed(double eta) { return {Kind::fixed, eta, false}; }
    static EtaPolicy tuned() { return {Kind::tuned, 0.0, false}; }
    static EtaPolicy doubling(bool reset = false) { return {Kind::doubling, 0.0, reset}; }

    /// "fixed:<v>", "tuned", "doubling" or "doubling-reset".
    static EtaPolicy parse(std::string_view text)
    {
        if (text == "tuned") {
            return tuned();
        }
        if (text == "doubling") {
            return doubling(false);
        }
        if (text == "doubling-reset") {
            return doubling(true);
        }
        if (text.starts_with("fixed:")) {
            const std::string v(text.substr(6));
            std::size_t used = 0;
            double eta = 0.0;
            try {
                eta = std::stod(v, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != v.size() || !(eta > 0.0)) {
                throw std::invalid_argument("eta policy: bad fixed learning rate \"" + v + "\"");
            }
            return fixed(eta);
        }
        throw std::invalid_argument("eta policy: expected fixed:<v>, tuned, doubling or doubling-reset, got \""
                                    + std::string(text) + "\"");
    }

    std::string to_string() const
    {
        switch (kind) {
        case Kind::fixed:
            return "fixed:" + format_double(value);
        case Kind::tuned:
            return "tuned";
        case Kind::doubling:
            return reset ? "doubling-reset" : "doubling";
        }
        return "?";
    }

    friend bool operator==(const EtaPolicy&, const EtaPolicy&) = default;
};

struct SimConfig {
    Graph net{1};
    Graph feed{2};
    std::size_t n_delay = 0;
    std::size_t f_delay = 0;
    std::vector<double> q{1.0};
    Round horizon = 1;
    EtaPolicy eta = EtaPolicy::doubling();
    std::uint64_t seed = 0;
    std::size_t repetitions = 1;
    std::size_t exact_limit = kDefaultExactLimit;

    /// d = n + f
    std::size_t total_delay() const noexcept { return n_delay + f_delay; }
    std::size_t agents() const noexcept { return net.vertex_count(); }
    std::size_t arms() const noexcept { return feed.vertex_count(); }

    double total_mass() const
    {
        double s = 0.0;
        for (double x : q) {
            s += x;
        }
        return s;
    }

    void validate() const
    {
        if (q.size() != net.vertex_count()) {
            throw std::invalid_argument("SimConfig: " + std::to_string(q.size()) + " activation probabilities for "
                                        + std::to_string(net.vertex_count()) + " agents");
        }
        ActivationSchedule::validate_probabilities(q);
        if (horizon < 1) {
            throw std::invalid_argument("SimConfig: horizon must be at least 1");
        }
        if (repetitions < 1) {
            throw std::invalid_argument("SimConfig: repetitions must be at least 1");
        }
        if (eta.kind == EtaPolicy::Kind::fixed && !(eta.value > 0.0)) {
            throw std::invalid_argument("SimConfig: fixed learning rate must be positive");
        }
        if (eta.kind != EtaPolicy::Kind::fixed && arms() < 2) {
            throw std::invalid_argument("SimConfig: tuned and doubling learning rates need at least two arms");
        }
    }
};

/// Bracket on alpha(N^n ⊠ F^f).
inline AlphaResult product_independence(const SimConfig& config)
{
    const Graph product = strong_product(power(config.net, config.n_delay), power(config.feed, config.f_delay));
    return independence_number(product, config.exact_limit);
}

/// The learning rate agents start with. Tuned rates need the exact
/// independence number of N^n ⊠ F^f.
inline LearningRate resolve_learning_rate(const SimConfig& config)
{
    switch (config.eta.kind) {
    case EtaPolicy::Kind::fixed:
        return LearningRate::fixed(config.eta.value);
    case EtaPolicy::Kind::doubling:
        return LearningRate::doubling_trick(config.eta.reset);
    case EtaPolicy::Kind::tuned: {
        const AlphaResult alpha = product_independence(config);
        if (!alpha.exact) {
            throw std::runtime_error("tuned learning rate: exact alpha(N^n x F^f) unavailable for "
                                     + std::to_string(config.agents() * config.arms())
                                     + " product vertices (exact limit " + std::to_string(config.exact_limit) + ")");
        }
        return LearningRate::fixed(tuned_eta(config.arms(), config.horizon, static_cast<double>(alpha.lower),
                                             config.total_mass(), config.total_delay()));
    }
    }
    throw std::logic_error("unknown eta policy");
}

/// Per-round regret accounting for one run.
struct RegretTrace {
    Round horizon = 0;
    std::size_t agents = 0;
    std::size_t arms = 0;
    /// |A_t| for t = 1..T (index t - 1).
    std::vector<std::size_t> active;
    /// Total loss charged to active agents through round t.
    std::vector<double> incurred_cum;
    /// max_i (incurred_cum - comparator_cum(i)) through round t.
    std::vector<double> regret_cum;
    /// sum_t |A_t| l_t(i), final totals per arm.
    std::vector<double> comparator;
    /// Total loss charged to each agent.
    std::vector<double> charged;
    std::size_t clamp_hits = 0;
    std::size_t messages_sent = 0;

    double incurred_total() const { return incurred_cum.empty() ? 0.0 : incurred_cum.back(); }
    double final_regret() const { return regret_cum.empty() ? 0.0 : regret_cum.back(); }
};

struct RegretSummary {
    double regret = 0.0;
    double average = 0.0;
};

/// R_T = max_i (incurred - comparator_i) on the realized run, and R_T / Q.
inline RegretSummary compute_regret(const RegretTrace& trace, double mass)
{
    if (!(mass > 0.0)) {
        throw std::invalid_argument("compute_regret: Q must be positive");
    }
    if (trace.comparator.empty()) {
        throw std::invalid_argument("compute_regret: empty trace");
    }
    const double best_comparator = *std::min_element(trace.comparator.begin(), trace.comparator.end());
    RegretSummary s;
    s.regret = trace.incurred_total() - best_comparator;
    s.average = s.regret / mass;
    return s;
}

/// One agent's play, reported to RunOptions::on_play.
struct PlayRecord {
    Round round = 0;
    Vertex agent = 0;
    std::span<const double> distribution;
    std::optional<Arm> arm;
};

/// Information reads checked in audit mode.
struct AuditRecord {
    enum class Kind { play, message, observation };
    Kind kind = Kind::play;
    Vertex agent = 0;
    /// Round in which the information was used or delivered.
    Round read_round = 0;
    /// Round in which it was generated.
    Round generation_round = 0;
};

struct RunOptions {
    /// Check information causality and delay exactness while running;
    /// violations throw std::logic_error.
    bool audit = false;
    std::vector<AuditRecord>* audit_log = nullptr;
    std::function<void(const PlayRecord&)> on_play;
};

namespace detail {

struct PendingObservation {
    ObservedLoss loss;
    Arm played = 0;
};

inline void audit_fail(const std::string& what) { throw std::logic_error("audit: " + what); }

} // namespace detail

/// Runs the five-step protocol for t = 1..T. Arm draws of agent v at round
/// t use counter_uniform(algorithm_key, v, t).
inline RegretTrace run_simulation(const SimConfig& config, const LossTable& losses,
                                  const ActivationSchedule& activations, std::uint64_t algorithm_key,
                                  const RunOptions& options = {})
{
    config.validate();
    const std::size_t na = config.agents();
    const std::size_t k = config.arms();
    const Round horizon = config.horizon;
    if (losses.rounds() != horizon || losses.arms() != k) {
        throw std::invalid_argument("run_simulation: loss table is " + std::to_string(losses.rounds()) + " x "
                                    + std::to_string(losses.arms()) + ", expected " + std::to_string(horizon) + " x "
                                    + std::to_string(k));
    }
    if (activations.rounds() != horizon || activations.agents() != na) {
        throw std::invalid_argument("run_simulation: activation schedule dimensions do not match the config");
    }
    if (activations.q() != config.q) {
        throw std::invalid_argument("run_simulation: activation schedule drawn from different probabilities");
    }

    const std::size_t n = config.n_delay;
    const std::size_t f = config.f_delay;
    const Round d = static_cast<Round>(config.total_delay());
    const LearningRate rate = resolve_learning_rate(config);
    const FeedbackGraphView view(config.feed, f);
    const DistanceMatrix net_dist = all_pairs_distances(config.net);

    std::vector<AgentState> agents;
    std::vector<std::vector<Vertex>> reach(na);
    agents.reserve(na);
    for (Vertex v = 0; v < na; ++v) {
        std::vector<NeighborInfo> known;
        for (Vertex u = 0; u < na; ++u) {
            if (net_dist.within(v, u, n)) {
                known.push_back({u, config.q[u]});
                reach[v].push_back(u);
            }
        }
        agents.push_back(make_agent(v, std::move(known), k, d, rate));
    }

    // observations[v][t mod (f+1)]: losses v observes at round t.
    std::vector<std::vector<std::vector<detail::PendingObservation>>> observations(
        na, std::vector<std::vector<detail::PendingObservation>>(f + 1));
    // in_flight[v][t mod (n+1)]: messages delivered to v at the end of t.
    std::vector<std::vector<std::vector<MessagePtr>>> in_flight(na, std::vector<std::vector<MessagePtr>>(n + 1));

    RegretTrace trace;
    trace.horizon = horizon;
    trace.agents = na;
    trace.arms = k;
    trace.active.reserve(static_cast<std::size_t>(horizon));
    trace.incurred_cum.reserve(static_cast<std::size_t>(horizon));
    trace.regret_cum.reserve(static_cast<std::size_t>(horizon));
    trace.comparator.assign(k, 0.0);
    trace.charged.assign(na, 0.0);

    auto record = [&](AuditRecord::Kind kind, Vertex v, Round read, Round generated) {
        if (options.audit_log != nullptr) {
            options.audit_log->push_back({kind, v, read, generated});
        }
    };

    double incurred = 0.0;
    std::vector<std::vector<double>> dist(na);
    std::vector<std::optional<Arm>> played(na);

    for (Round t = 1; t <= horizon; ++t) {
        std::size_t active_count = 0;
        for (Vertex v = 0; v < na; ++v) {
            AgentState& a = agents[v];
            a.now = t;
            dist[v] = play_distribution(a, t);
            if (options.audit) {
                if (a.information_horizon > 0 && a.information_horizon > t - d - 1) {
                    detail::audit_fail("agent " + std::to_string(v) + " played round " + std::to_string(t)
                                       + " using information from round " + std::to_string(a.information_horizon));
                }
                record(AuditRecord::Kind::play, v, t, a.information_horizon);
            }
            played[v].reset();
            if (activations.is_active(t, v)) {
                ++active_count;
                const Arm arm = sample_arm(dist[v], counter_uniform(algorithm_key, v, static_cast<std::uint64_t>(t)));
                played[v] = arm;
                const double loss = losses.loss(t, arm);
                incurred += loss;
                trace.charged[v] += loss;
                for (Arm j : view.reach(arm)) {
                    const auto delay = view.distance(arm, j);
                    observations[v][static_cast<std::size_t>(t + delay) % (f + 1)].push_back(
                        {{losses.loss(t, j), t, j}, arm});
                }
            }
            if (options.on_play) {
                options.on_play({t, v, dist[v], played[v]});
            }
        }

        for (Vertex v = 0; v < na; ++v) {
            auto msg = std::make_shared<FeedbackMessage>();
            msg->origin_round = t;
            msg->origin_agent = v;
            auto& bucket = observations[v][static_cast<std::size_t>(t) % (f + 1)];
            msg->observed_losses.reserve(bucket.size());
            for (const auto& o : bucket) {
                if (options.audit) {
                    if (o.loss.round + static_cast<Round>(view.distance(o.played, o.loss.arm)) != t) {
                        detail::audit_fail("loss of arm " + std::to_string(o.loss.arm) + " from round "
                                           + std::to_string(o.loss.round) + " observed at round " + std::to_string(t));
                    }
                    record(AuditRecord::Kind::observation, v, t, o.loss.round);
                }
                msg->observed_losses.push_back(o.loss);
            }
            bucket.clear();
            msg->was_active = played[v].has_value();
            msg->played_arm = played[v].value_or(0);
            msg->observation_mass = view.observation_mass(dist[v]);
            msg->play_distribution = std::move(dist[v]);
            MessagePtr shared = std::move(msg);
            for (Vertex u : reach[v]) {
                in_flight[u][static_cast<std::size_t>(t + net_dist(v, u)) % (n + 1)].push_back(shared);
            }
            ++trace.messages_sent;
        }

        for (Vertex v = 0; v < na; ++v) {
            auto& bucket = in_flight[v][static_cast<std::size_t>(t) % (n + 1)];
            for (const auto& m : bucket) {
                if (options.audit) {
                    if (m->origin_round + static_cast<Round>(net_dist(m->origin_agent, v)) != t) {
                        detail::audit_fail("message from agent " + std::to_string(m->origin_agent) + " sent at round "
                                           + std::to_string(m->origin_round) + " delivered to " + std::to_string(v)
                                           + " at round " + std::to_string(t));
                    }
                    record(AuditRecord::Kind::message, v, t, m->origin_round);
                }
                receive(agents[v], m);
            }
            bucket.clear();
            if (t - d >= 1) {
                finalize_round(agents[v], t - d, view);
            }
        }

        for (Arm i = 0; i < k; ++i) {
            trace.comparator[i] += static_cast<double>(active_count) * losses.loss(t, i);
        }
        const double best = *std::min_element(trace.comparator.begin(), trace.comparator.end());
        trace.active.push_back(active_count);
        trace.incurred_cum.push_back(incurred);
        trace.regret_cum.push_back(incurred - best);
    }
    for (const auto& a : agents) {
        trace.clamp_hits += a.clamp_hits;
    }
    return trace;
}

/// Same run with the communication graph replaced by the edgeless graph:
/// every agent learns alone on the shared feedback graph.
inline RegretTrace run_baseline(const SimConfig& config, const LossTable& losses, const ActivationSchedule& activations,
                                std::uint64_t algorithm_key, const RunOptions& options = {})
{
    SimConfig isolated = config;
    isolated.net = gen_edgeless(config.agents());
    return run_simulation(isolated, losses, activations, algorithm_key, options);
}

inline constexpr std::string_view kTraceHeader = "rep,t,active,incurred_cum,regret_cum,avg_regret_cum";

/// Rows "rep,t,active,incurred_cum,regret_cum,avg_regret_cum" for t = 1..T.
inline void write_trace_rows(std::ostream& out, std::size_t rep, const RegretTrace& trace, double mass)
{
    if (!(mass > 0.0)) {
        throw std::invalid_argument("write_trace_rows: Q must be positive");
    }
    for (std::size_t idx = 0; idx < trace.active.size(); ++idx) {
        out << rep << ',' << (idx + 1) << ',' << trace.active[idx] << ',' << format_double(trace.incurred_cum[idx])
            << ',' << format_double(trace.regret_cum[idx]) << ',' << format_double(trace.regret_cum[idx] / mass)
            << '\n';
    }
}

} // namespace coopbandit
