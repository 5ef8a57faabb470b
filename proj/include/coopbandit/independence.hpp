#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "coopbandit/bitset.hpp"
#include "coopbandit/graph.hpp"

namespace coopbandit {

inline constexpr std::size_t kDefaultExactLimit = 64;

/// Bracket on the independence number. `witness` is always an independent
/// set of size `lower`; when `exact` holds, lower == upper == alpha.
struct AlphaResult {
    std::size_t lower = 0;
    std::size_t upper = 0;
    bool exact = false;
    std::vector<Vertex> witness;
};

/// True iff no two distinct members of s are adjacent in g.
inline bool is_independent_set(const Graph& g, std::span<const Vertex> s)
{
    for (Vertex v : s) {
        g.check_vertex(v);
    }
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = a + 1; b < s.size(); ++b) {
            if (g.has_edge(s[a], s[b])) {
                return false;
            }
        }
    }
    return true;
}

/// Repeatedly take a minimum-degree vertex of the remaining graph and delete
/// its closed neighborhood.
inline std::vector<Vertex> greedy_independent_set(const Graph& g)
{
    const std::size_t n = g.vertex_count();
    Bitset alive(n);
    alive.set_all();
    std::vector<Vertex> chosen;
    while (alive.any()) {
        Vertex best = Bitset::npos;
        std::size_t best_deg = n + 1;
        for (Vertex v = alive.first(); v != Bitset::npos; v = alive.next(v)) {
            Bitset nb = g.row(v);
            nb &= alive;
            const std::size_t deg = nb.count();
            if (deg < best_deg) {
                best_deg = deg;
                best = v;
            }
        }
        chosen.push_back(best);
        alive.reset(best);
        alive.subtract(g.row(best));
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

/// Number of cliques in a greedy clique cover; an upper bound on alpha.
inline std::size_t greedy_clique_cover_size(const Graph& g)
{
    const std::size_t n = g.vertex_count();
    std::vector<Vertex> order(n);
    std::iota(order.begin(), order.end(), Vertex{0});
    std::stable_sort(order.begin(), order.end(), [&](Vertex a, Vertex b) { return g.degree(a) > g.degree(b); });
    // common[c]: vertices adjacent to every member of clique c
    std::vector<Bitset> common;
    for (Vertex v : order) {
        bool placed = false;
        for (auto& c : common) {
            if (c.test(v)) {
                c &= g.row(v);
                placed = true;
                break;
            }
        }
        if (!placed) {
            common.push_back(g.row(v));
        }
    }
    return common.size();
}

namespace detail {

// Maximum independent set as maximum clique in the complement, searched with
// bitset branch-and-bound. Candidates are greedily partitioned into cliques
// of g (colour classes of the complement); the number of classes bounds how
// many more vertices can be added, which prunes the search.
class MaxIndependentSet {
public:
    explicit MaxIndependentSet(const Graph& g) : n_(g.vertex_count())
    {
        // Low-degree vertices first: they are the likeliest members.
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), Vertex{0});
        std::stable_sort(order_.begin(), order_.end(), [&](Vertex a, Vertex b) { return g.degree(a) < g.degree(b); });
        rank_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            rank_[order_[i]] = i;
        }
        adj_.assign(n_, Bitset(n_));
        non_adj_.assign(n_, Bitset(n_));
        for (std::size_t i = 0; i < n_; ++i) {
            const Vertex v = order_[i];
            for (Vertex w : g.neighbors(v)) {
                adj_[i].set(rank_[w]);
            }
            non_adj_[i].set_all();
            non_adj_[i].subtract(adj_[i]);
            non_adj_[i].reset(i);
        }
    }

    std::vector<Vertex> solve(std::vector<Vertex> initial)
    {
        best_.clear();
        for (Vertex v : initial) {
            best_.push_back(rank_[v]);
        }
        Bitset all(n_);
        all.set_all();
        expand(all);
        std::vector<Vertex> out;
        for (Vertex i : best_) {
            out.push_back(order_[i]);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    void expand(Bitset candidates)
    {
        std::vector<Vertex> vertices;
        std::vector<std::size_t> bounds;
        {
            Bitset uncoloured = candidates;
            std::size_t colour = 0;
            while (uncoloured.any()) {
                ++colour;
                Bitset q = uncoloured;
                for (Vertex v = q.first(); v != Bitset::npos; v = q.first()) {
                    q.reset(v);
                    uncoloured.reset(v);
                    vertices.push_back(v);
                    bounds.push_back(colour);
                    q &= adj_[v];
                }
            }
        }
        for (std::size_t k = vertices.size(); k-- > 0;) {
            if (current_.size() + bounds[k] <= best_.size()) {
                return;
            }
            const Vertex v = vertices[k];
            current_.push_back(v);
            Bitset next = candidates;
            next &= non_adj_[v];
            if (next.any()) {
                expand(std::move(next));
            } else if (current_.size() > best_.size()) {
                best_ = current_;
            }
            current_.pop_back();
            candidates.reset(v);
        }
    }

    std::size_t n_;
    std::vector<Vertex> order_;
    std::vector<Vertex> rank_;
    std::vector<Bitset> adj_;
    std::vector<Bitset> non_adj_;
    std::vector<Vertex> current_;
    std::vector<Vertex> best_;
};

} // namespace detail

/// Independence number of g. Exact branch-and-bound when g has at most
/// exact_limit vertices; otherwise a greedy independent set and a greedy
/// clique-cover bound with exact = false.
inline AlphaResult independence_number(const Graph& g, std::size_t exact_limit = kDefaultExactLimit)
{
    AlphaResult r;
    auto greedy = greedy_independent_set(g);
    if (g.vertex_count() <= exact_limit) {
        r.witness = detail::MaxIndependentSet(g).solve(std::move(greedy));
        r.lower = r.upper = r.witness.size();
        r.exact = true;
        return r;
    }
    r.witness = std::move(greedy);
    r.lower = r.witness.size();
    r.upper = greedy_clique_cover_size(g);
    r.exact = r.lower == r.upper;
    return r;
}

} // namespace coopbandit
