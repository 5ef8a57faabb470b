#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopbandit/environment.hpp"
#include "coopbandit/format.hpp"
#include "coopbandit/graph.hpp"

// Local learner run by every agent.
//
// An agent sees the network only through the messages it receives and the
// activation probabilities of its n-hop neighbors (known_neighbor_q). Nothing
// in this header takes the communication graph, the global probability
// vector, or another agent's state.

namespace coopbandit {

/// Feedback-graph knowledge shared by all agents: closed f-neighborhoods of
/// the arms and the feedback distances used for delayed observations.
class FeedbackGraphView {
public:
    FeedbackGraphView(const Graph& feed, std::size_t f)
        : arms_(feed.vertex_count()), delay_(f), dist_(all_pairs_distances(feed)), reach_(arms_)
    {
        for (Arm i = 0; i < arms_; ++i) {
            for (Arm j = 0; j < arms_; ++j) {
                if (dist_.within(i, j, f)) {
                    reach_[i].push_back(j);
                }
            }
        }
    }

    std::size_t arms() const noexcept { return arms_; }
    std::size_t delay() const noexcept { return delay_; }

    /// N_f(i): arms within feedback distance f of i, sorted; contains i.
    const std::vector<Arm>& reach(Arm i) const { return reach_.at(i); }

    DistanceMatrix::Distance distance(Arm i, Arm j) const { return dist_(i, j); }
    bool within(Arm i, Arm j) const { return dist_.within(i, j, delay_); }

    /// mass[i] = sum of p[j] over j in N_f(i): the probability that an agent
    /// playing from p reveals the loss of arm i.
    std::vector<double> observation_mass(std::span<const double> p) const
    {
        std::vector<double> mass(arms_, 0.0);
        for (Arm i = 0; i < arms_; ++i) {
            double s = 0.0;
            for (Arm j : reach_[i]) {
                s += p[j];
            }
            mass[i] = s;
        }
        return mass;
    }

private:
    std::size_t arms_;
    std::size_t delay_;
    DistanceMatrix dist_;
    std::vector<std::vector<Arm>> reach_;
};

/// Timestamped loss observation (value, round it was generated, arm).
struct ObservedLoss {
    double value = 0.0;
    Round round = 0;
    Arm arm = 0;
};

/// Broadcast payload (t, v, L_t(v), p_t(., v)).
struct FeedbackMessage {
    Round origin_round = 0;
    Vertex origin_agent = 0;
    std::vector<ObservedLoss> observed_losses;
    std::vector<double> play_distribution;
    bool was_active = false;
    Arm played_arm = 0;
    /// observation_mass(play_distribution), computed once by the sender.
    std::vector<double> observation_mass;
};

using MessagePtr = std::shared_ptr<const FeedbackMessage>;

inline void validate_message(const FeedbackMessage& m)
{
    double total = 0.0;
    for (double x : m.play_distribution) {
        if (!(x >= 0.0)) {
            throw std::invalid_argument("FeedbackMessage: negative probability");
        }
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("FeedbackMessage: play distribution sums to " + format_double(total));
    }
    for (const auto& o : m.observed_losses) {
        if (!(o.value >= 0.0 && o.value <= 1.0)) {
            throw std::invalid_argument("FeedbackMessage: observed loss outside [0, 1]");
        }
        if (o.round > m.origin_round) {
            throw std::invalid_argument("FeedbackMessage: loss round after origin round");
        }
    }
}

struct NeighborInfo {
    Vertex agent = 0;
    double q = 0.0;
};

/// Local doubling-trick bookkeeping.
struct DoublingState {
    bool enabled = false;
    bool reset_on_phase_end = false;
    int phase = 0;
    Round phase_start = 1;
    double accumulated = 0.0;
    /// First round of every phase so far, the current one last.
    std::vector<Round> phase_starts{1};
};

/// Everything an agent has learned about a single round s, gathered until
/// the round is finalized at s + d.
struct RoundRecord {
    /// Message with origin round s from each known neighbor (slot order).
    std::vector<MessagePtr> messages;
    /// Loss of each arm at round s, if someone in range observed it.
    std::vector<double> losses;
    std::vector<std::uint8_t> observed;
};

struct AgentState {
    Vertex agent_id = 0;
    /// Running sums of loss estimates over finalized rounds.
    std::vector<double> cumulative_estimates;
    double eta = 0.0;
    /// N_n(agent_id) with activation probabilities, sorted by agent; includes self.
    std::vector<NeighborInfo> known_neighbor_q;
    /// d = n + f
    Round total_delay = 0;
    std::map<Round, RoundRecord> inbox;
    DoublingState doubling;
    Round finalized_through = 0;
    Round now = 0;
    /// Latest generation round of any information folded into the estimates.
    Round information_horizon = 0;
    /// Times b fell below kMinObservationProbability and was clamped.
    std::size_t clamp_hits = 0;

    std::size_t arms() const noexcept { return cumulative_estimates.size(); }

    /// Slot of `agent` in known_neighbor_q, or npos.
    std::size_t slot_of(Vertex agent) const noexcept
    {
        auto it = std::lower_bound(known_neighbor_q.begin(), known_neighbor_q.end(), agent,
                                   [](const NeighborInfo& a, Vertex x) { return a.agent < x; });
        if (it == known_neighbor_q.end() || it->agent != agent) {
            return static_cast<std::size_t>(-1);
        }
        return static_cast<std::size_t>(it - known_neighbor_q.begin());
    }

    double own_q() const { return known_neighbor_q.at(slot_of(agent_id)).q; }
};

inline constexpr double kMinObservationProbability = 1e-300;

/// Tuned learning rate
/// sqrt(ln K / (T (alpha(N^n ⊠ F^f) / Q + d + 1))).
inline double tuned_eta(std::size_t arms, Round horizon, double alpha_product, double mass, std::size_t delay)
{
    if (arms < 2) {
        throw std::invalid_argument("tuned_eta: need at least two arms");
    }
    if (!(horizon > 0 && alpha_product > 0.0 && mass > 0.0)) {
        throw std::invalid_argument("tuned_eta: T, alpha and Q must be positive");
    }
    return std::sqrt(std::log(static_cast<double>(arms))
                     / (static_cast<double>(horizon) * (alpha_product / mass + static_cast<double>(delay) + 1.0)));
}

/// r_0 = ceil(log2 ln K).
inline int initial_phase(std::size_t arms)
{
    if (arms < 2) {
        throw std::invalid_argument("doubling trick: need at least two arms");
    }
    return static_cast<int>(std::ceil(std::log2(std::log(static_cast<double>(arms)))));
}

/// eta_r = sqrt(ln K / 2^r).
inline double phase_eta(std::size_t arms, int phase)
{
    return std::sqrt(std::log(static_cast<double>(arms)) / std::ldexp(1.0, phase));
}

/// How an agent sets its learning rate.
struct LearningRate {
    double fixed_eta = 0.0;
    bool doubling = false;
    bool reset_on_phase_end = false;

    static LearningRate fixed(double eta) { return {eta, false, false}; }
    static LearningRate doubling_trick(bool reset) { return {0.0, true, reset}; }
};

inline AgentState make_agent(Vertex id, std::vector<NeighborInfo> known_neighbor_q, std::size_t arms, Round total_delay,
                             const LearningRate& rate)
{
    if (arms < 1) {
        throw std::invalid_argument("make_agent: need at least one arm");
    }
    std::sort(known_neighbor_q.begin(), known_neighbor_q.end(),
              [](const NeighborInfo& a, const NeighborInfo& b) { return a.agent < b.agent; });
    AgentState s;
    s.agent_id = id;
    s.known_neighbor_q = std::move(known_neighbor_q);
    if (s.slot_of(id) == static_cast<std::size_t>(-1)) {
        throw std::invalid_argument("make_agent: an agent is always its own neighbor");
    }
    s.cumulative_estimates.assign(arms, 0.0);
    s.total_delay = total_delay;
    if (rate.doubling) {
        s.doubling.enabled = true;
        s.doubling.reset_on_phase_end = rate.reset_on_phase_end;
        s.doubling.phase = initial_phase(arms);
        s.eta = phase_eta(arms, s.doubling.phase);
    } else {
        if (!(rate.fixed_eta > 0.0)) {
            throw std::invalid_argument("make_agent: learning rate must be positive");
        }
        s.eta = rate.fixed_eta;
    }
    return s;
}

/// p_t(., v). Uniform for t <= d + 1; afterwards p_t(i) is proportional to
/// exp(-eta * L(i)), L the cumulative estimates through round t - d - 1.
inline std::vector<double> play_distribution(const AgentState& state, Round t)
{
    const std::size_t k = state.arms();
    if (t <= state.total_delay + 1) {
        return std::vector<double>(k, 1.0 / static_cast<double>(k));
    }
    if (state.finalized_through < t - state.total_delay - 1) {
        throw std::logic_error("play_distribution: round " + std::to_string(t - state.total_delay - 1)
                               + " not finalized yet");
    }
    const auto& cum = state.cumulative_estimates;
    const double lowest = *std::min_element(cum.begin(), cum.end());
    std::vector<double> p(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        // Weights are relative to the best arm, so the largest is exactly 1.
        // The floor keeps every probability strictly positive.
        p[i] = std::max(std::exp(-state.eta * (cum[i] - lowest)), std::numeric_limits<double>::min());
        total += p[i];
    }
    for (auto& x : p) {
        x /= total;
    }
    return p;
}

/// Inverse-CDF draw from p with u in [0, 1).
inline Arm sample_arm(std::span<const double> p, double u)
{
    double acc = 0.0;
    for (Arm i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) {
            return i;
        }
    }
    for (Arm i = p.size(); i-- > 0;) {
        if (p[i] > 0.0) {
            return i;
        }
    }
    throw std::invalid_argument("sample_arm: empty distribution");
}

/// b = 1 - prod_u (1 - q(u) mass_u(i)), evaluated as the union probability
/// b <- b + (1 - b) x_u, which avoids cancellation when the masses are small
/// and gives b = x exactly for a single neighbor.
inline double union_probability(std::span<const double> xs)
{
    double b = 0.0;
    for (double x : xs) {
        b += (1.0 - b) * x;
    }
    return b;
}

/// b_s(i, v) from the play distributions of every agent in N_n(v).
/// `distributions` must hold an entry for each known neighbor.
inline double compute_b(Arm i, const std::vector<NeighborInfo>& known_neighbor_q,
                        const std::map<Vertex, std::vector<double>>& distributions, const FeedbackGraphView& feed)
{
    std::vector<double> xs;
    xs.reserve(known_neighbor_q.size());
    for (const auto& nb : known_neighbor_q) {
        auto it = distributions.find(nb.agent);
        if (it == distributions.end()) {
            throw std::runtime_error("compute_b: missing play distribution of neighbor " + std::to_string(nb.agent));
        }
        double mass = 0.0;
        for (Arm j : feed.reach(i)) {
            mass += it->second.at(j);
        }
        xs.push_back(nb.q * mass);
    }
    return union_probability(xs);
}

/// Whether some agent in N_n(v) was active and played within N_f(i).
struct NeighborEvent {
    bool active = false;
    Arm arm = 0;
};

/// B_s(i, v).
inline bool compute_B(Arm i, std::span<const NeighborEvent> events, const FeedbackGraphView& feed)
{
    for (const auto& e : events) {
        if (e.active && feed.within(i, e.arm)) {
            return true;
        }
    }
    return false;
}

/// l * B / b. The loss is ignored when B is false.
inline double estimate_loss(double loss, bool observed, double b)
{
    if (!(b > 0.0)) {
        throw std::invalid_argument("estimate_loss: observation probability must be positive");
    }
    return observed ? loss / b : 0.0;
}

/// Adds X_{r,t}(v) = [t > min T_r + d] (d + sum_i p_t(i)/b_t(i)) to the
/// current phase. If the phase total would exceed 2^r, phase r ends at t - 1,
/// phase r + 1 starts at t with eta = sqrt(ln K / 2^(r+1)), and in reset mode
/// the cumulative estimates are cleared.
inline void doubling_step(AgentState& state, Round t, std::span<const double> b_values,
                          std::span<const double> p_values)
{
    auto& ph = state.doubling;
    if (!ph.enabled) {
        throw std::logic_error("doubling_step: doubling trick not enabled");
    }
    double x = 0.0;
    if (t > ph.phase_start + state.total_delay) {
        x = static_cast<double>(state.total_delay);
        for (std::size_t i = 0; i < p_values.size(); ++i) {
            x += p_values[i] / b_values[i];
        }
    }
    if (ph.accumulated + x > std::ldexp(1.0, ph.phase)) {
        ++ph.phase;
        ph.phase_start = t;
        ph.phase_starts.push_back(t);
        // X_{r+1,t} is zero: t is the first round of the new phase.
        ph.accumulated = 0.0;
        state.eta = phase_eta(state.arms(), ph.phase);
        if (ph.reset_on_phase_end) {
            std::fill(state.cumulative_estimates.begin(), state.cumulative_estimates.end(), 0.0);
        }
    } else {
        ph.accumulated += x;
    }
}

/// Files a message into the inbox. Losses it carries are filed under the
/// round they were generated.
inline void receive(AgentState& state, const MessagePtr& msg)
{
    const std::size_t slot = state.slot_of(msg->origin_agent);
    if (slot == static_cast<std::size_t>(-1)) {
        throw std::logic_error("receive: agent " + std::to_string(state.agent_id) + " got a message from "
                               + std::to_string(msg->origin_agent) + ", which is not within n hops");
    }
    if (msg->origin_round > state.now) {
        throw std::logic_error("receive: message from the future");
    }
    auto record_for = [&](Round s) -> RoundRecord& {
        if (s <= state.finalized_through) {
            throw std::logic_error("receive: information about round " + std::to_string(s)
                                   + " arrived after it was finalized");
        }
        auto [it, inserted] = state.inbox.try_emplace(s);
        if (inserted) {
            it->second.messages.resize(state.known_neighbor_q.size());
            it->second.losses.assign(state.arms(), 0.0);
            it->second.observed.assign(state.arms(), 0);
        }
        return it->second;
    };
    RoundRecord& rec = record_for(msg->origin_round);
    if (rec.messages[slot]) {
        throw std::logic_error("receive: duplicate message");
    }
    rec.messages[slot] = msg;
    for (const auto& o : msg->observed_losses) {
        RoundRecord& r = record_for(o.round);
        r.losses.at(o.arm) = o.value;
        r.observed[o.arm] = 1;
    }
}

/// Folds the estimates of round s into the cumulative sums. Requires that
/// all information about s is in (now >= s + d) and that rounds are
/// finalized in order, each exactly once. Agents with q(v) = 0 only mark
/// the round.
inline void finalize_round(AgentState& state, Round s, const FeedbackGraphView& feed)
{
    if (s != state.finalized_through + 1) {
        throw std::logic_error("finalize_round: round " + std::to_string(s) + " finalized out of order or twice");
    }
    if (state.now < s + state.total_delay) {
        throw std::logic_error("finalize_round: round " + std::to_string(s) + " finalized before round "
                               + std::to_string(s + state.total_delay));
    }
    auto it = state.inbox.find(s);
    if (state.own_q() <= 0.0) {
        if (it != state.inbox.end()) {
            state.inbox.erase(it);
        }
        state.finalized_through = s;
        return;
    }
    if (it == state.inbox.end()) {
        throw std::runtime_error("finalize_round: no messages for round " + std::to_string(s));
    }
    const RoundRecord& rec = it->second;
    const std::size_t k = state.arms();
    const std::size_t slots = state.known_neighbor_q.size();
    for (std::size_t u = 0; u < slots; ++u) {
        if (!rec.messages[u]) {
            throw std::runtime_error("finalize_round: missing message from agent "
                                     + std::to_string(state.known_neighbor_q[u].agent) + " for round "
                                     + std::to_string(s));
        }
    }

    std::vector<std::uint8_t> hit(k, 0);
    for (std::size_t u = 0; u < slots; ++u) {
        const auto& m = *rec.messages[u];
        if (m.was_active) {
            for (Arm j : feed.reach(m.played_arm)) {
                hit[j] = 1;
            }
        }
    }

    std::vector<double> b(k);
    std::vector<double> estimate(k, 0.0);
    for (Arm i = 0; i < k; ++i) {
        double bi = 0.0;
        for (std::size_t u = 0; u < slots; ++u) {
            bi += (1.0 - bi) * (state.known_neighbor_q[u].q * rec.messages[u]->observation_mass[i]);
        }
        if (bi < kMinObservationProbability) {
            bi = kMinObservationProbability;
            ++state.clamp_hits;
        }
        b[i] = bi;
        if (hit[i] && !rec.observed[i]) {
            throw std::logic_error("finalize_round: arm " + std::to_string(i) + " was revealed in round "
                                   + std::to_string(s) + " but its loss never arrived");
        }
        estimate[i] = estimate_loss(rec.losses[i], hit[i] != 0, bi);
    }

    if (state.doubling.enabled) {
        const auto& own = rec.messages[state.slot_of(state.agent_id)]->play_distribution;
        doubling_step(state, s, b, own);
    }
    for (Arm i = 0; i < k; ++i) {
        state.cumulative_estimates[i] += estimate[i];
    }
    state.information_horizon = s;
    state.finalized_through = s;
    state.inbox.erase(it);
}

} // namespace coopbandit
