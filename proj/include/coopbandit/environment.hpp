#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopbandit/format.hpp"
#include "coopbandit/graph.hpp"
#include "coopbandit/independence.hpp"
#include "coopbandit/rng.hpp"

namespace coopbandit {

using Arm = std::size_t;
/// Rounds are numbered 1..T.
using Round = std::int64_t;

/// Oblivious loss sequence: T rounds by K arms, every entry in [0, 1].
class LossTable {
public:
    LossTable(Round rounds, std::size_t arms) : rounds_(rounds), arms_(arms)
    {
        if (rounds < 1 || arms < 1) {
            throw std::invalid_argument("LossTable: need at least one round and one arm");
        }
        values_.assign(static_cast<std::size_t>(rounds) * arms, 0.0);
    }

    Round rounds() const noexcept { return rounds_; }
    std::size_t arms() const noexcept { return arms_; }

    double loss(Round t, Arm i) const { return values_[index(t, i)]; }

    void set(Round t, Arm i, double value)
    {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw std::invalid_argument("LossTable: loss " + format_double(value) + " outside [0, 1]");
        }
        values_[index(t, i)] = value;
    }

    /// Arm with the smallest mean parameter, when the table was drawn from a
    /// known stochastic model.
    std::optional<Arm> optimal_arm;

    friend bool operator==(const LossTable& a, const LossTable& b)
    {
        return a.rounds_ == b.rounds_ && a.arms_ == b.arms_ && a.values_ == b.values_;
    }

private:
    std::size_t index(Round t, Arm i) const
    {
        if (t < 1 || t > rounds_ || i >= arms_) {
            throw std::out_of_range("LossTable: (round " + std::to_string(t) + ", arm " + std::to_string(i)
                                    + ") out of range");
        }
        return static_cast<std::size_t>(t - 1) * arms_ + i;
    }

    Round rounds_;
    std::size_t arms_;
    std::vector<double> values_;
};

/// Realized activations A_1..A_T together with the probabilities they were
/// drawn from.
class ActivationSchedule {
public:
    ActivationSchedule(std::vector<double> q, Round rounds) : q_(std::move(q)), rounds_(rounds)
    {
        if (rounds < 1) {
            throw std::invalid_argument("ActivationSchedule: need at least one round");
        }
        validate_probabilities(q_);
        mass_ = 0.0;
        for (double x : q_) {
            mass_ += x;
        }
        active_.assign(static_cast<std::size_t>(rounds) * q_.size(), 0);
    }

    static void validate_probabilities(const std::vector<double>& q)
    {
        if (q.empty()) {
            throw std::invalid_argument("activation probabilities: no agents");
        }
        double total = 0.0;
        for (double x : q) {
            if (!(x >= 0.0 && x <= 1.0)) {
                throw std::invalid_argument("activation probability " + format_double(x) + " outside [0, 1]");
            }
            total += x;
        }
        if (!(total > 0.0)) {
            throw std::invalid_argument("activation probabilities: total mass Q must be positive");
        }
    }

    Round rounds() const noexcept { return rounds_; }
    std::size_t agents() const noexcept { return q_.size(); }
    const std::vector<double>& q() const noexcept { return q_; }
    /// Q = sum of q(v).
    double total_mass() const noexcept { return mass_; }

    bool is_active(Round t, Vertex v) const { return active_[index(t, v)] != 0; }
    void set_active(Round t, Vertex v, bool on) { active_[index(t, v)] = on ? 1 : 0; }

    std::vector<Vertex> active_set(Round t) const
    {
        std::vector<Vertex> out;
        for (Vertex v = 0; v < q_.size(); ++v) {
            if (is_active(t, v)) {
                out.push_back(v);
            }
        }
        return out;
    }

    std::size_t active_count(Round t) const
    {
        std::size_t c = 0;
        for (Vertex v = 0; v < q_.size(); ++v) {
            c += is_active(t, v) ? 1 : 0;
        }
        return c;
    }

    friend bool operator==(const ActivationSchedule& a, const ActivationSchedule& b)
    {
        return a.q_ == b.q_ && a.rounds_ == b.rounds_ && a.active_ == b.active_;
    }

private:
    std::size_t index(Round t, Vertex v) const
    {
        if (t < 1 || t > rounds_ || v >= q_.size()) {
            throw std::out_of_range("ActivationSchedule: (round " + std::to_string(t) + ", agent "
                                    + std::to_string(v) + ") out of range");
        }
        return static_cast<std::size_t>(t - 1) * q_.size() + v;
    }

    std::vector<double> q_;
    Round rounds_;
    double mass_ = 0.0;
    std::vector<std::uint8_t> active_;
};

/// Independent Bernoulli losses, arm i having mean means[i]. Draws are taken
/// round by round, arm by arm, from rng.
inline LossTable bernoulli_losses(const std::vector<double>& means, Round rounds, Rng& rng)
{
    LossTable table(rounds, means.size());
    for (double m : means) {
        if (!(m >= 0.0 && m <= 1.0)) {
            throw std::invalid_argument("bernoulli_losses: mean " + format_double(m) + " outside [0, 1]");
        }
    }
    for (Round t = 1; t <= rounds; ++t) {
        for (Arm i = 0; i < means.size(); ++i) {
            table.set(t, i, rng.bernoulli(means[i]) ? 1.0 : 0.0);
        }
    }
    return table;
}

/// Mean loss of the optimal arm in the stochastic benchmark: 1/2 - sqrt(K/T).
inline double optimal_arm_mean(std::size_t arms, Round rounds)
{
    return 0.5 - std::sqrt(static_cast<double>(arms) / static_cast<double>(rounds));
}

/// Stochastic benchmark: every arm is Bernoulli(1/2) except one optimal arm,
/// chosen uniformly with the first draw of rng, which is
/// Bernoulli(1/2 - sqrt(K/T)). Requires 4K <= T so that mean stays >= 0.
inline LossTable stochastic_bernoulli_losses(std::size_t arms, Round rounds, Rng& rng)
{
    if (arms < 2) {
        throw std::invalid_argument("stochastic_bernoulli_losses: need at least two arms");
    }
    if (rounds < 1 || 4 * static_cast<Round>(arms) > rounds) {
        throw std::invalid_argument("stochastic_bernoulli_losses: need 4K <= T so that 1/2 - sqrt(K/T) >= 0 (K="
                                    + std::to_string(arms) + ", T=" + std::to_string(rounds) + ")");
    }
    const Arm best = rng.below(arms);
    std::vector<double> means(arms, 0.5);
    means[best] = optimal_arm_mean(arms, rounds);
    LossTable table = bernoulli_losses(means, rounds, rng);
    table.optimal_arm = best;
    return table;
}

/// Every agent v joins A_t independently with probability q[v]. Draws are
/// taken round by round, agent by agent.
inline ActivationSchedule sample_activations(const std::vector<double>& q, Round rounds, Rng& rng)
{
    ActivationSchedule schedule(q, rounds);
    for (Round t = 1; t <= rounds; ++t) {
        for (Vertex v = 0; v < q.size(); ++v) {
            schedule.set_active(t, v, rng.bernoulli(q[v]));
        }
    }
    return schedule;
}

/// Hard activation profile: mass Q spread uniformly over a maximum independent
/// set of net^n, zero elsewhere. No two supported agents can exchange
/// messages within n hops.
inline std::vector<double> lower_bound_instance(const Graph& net, std::size_t n, double mass,
                                                std::size_t exact_limit = kDefaultExactLimit)
{
    const AlphaResult alpha = independence_number(power(net, n), exact_limit);
    if (!alpha.exact) {
        throw std::runtime_error("lower_bound_instance: exact independence number of the network power is not "
                                 "available within the exact limit");
    }
    const double a = static_cast<double>(alpha.lower);
    if (!(mass > 0.0 && mass <= a)) {
        throw std::invalid_argument("lower_bound_instance: Q must lie in (0, alpha_n(N)] = (0, "
                                    + std::to_string(alpha.lower) + "]");
    }
    std::vector<double> q(net.vertex_count(), 0.0);
    for (Vertex v : alpha.witness) {
        q[v] = mass / a;
    }
    return q;
}

// CSV loss files: one row per round, K comma-separated values in [0, 1], no
// header.

inline LossTable read_loss_table(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos) {
                throw std::runtime_error("loss file line " + std::to_string(line_no) + ": bad value \"" + cell + "\"");
            }
            if (!(x >= 0.0 && x <= 1.0)) {
                throw std::runtime_error("loss file line " + std::to_string(line_no) + ": value outside [0, 1]");
            }
            row.push_back(x);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error("loss file line " + std::to_string(line_no) + ": expected "
                                     + std::to_string(rows.front().size()) + " values");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) {
        throw std::runtime_error("loss file: no data");
    }
    LossTable table(static_cast<Round>(rows.size()), rows.front().size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (Arm i = 0; i < rows[t].size(); ++i) {
            table.set(static_cast<Round>(t + 1), i, rows[t][i]);
        }
    }
    return table;
}

inline void write_loss_table(std::ostream& out, const LossTable& table)
{
    for (Round t = 1; t <= table.rounds(); ++t) {
        for (Arm i = 0; i < table.arms(); ++i) {
            if (i > 0) {
                out << ',';
            }
            out << format_double(table.loss(t, i));
        }
        out << '\n';
    }
}

} // namespace coopbandit
