#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coopbandit/bitset.hpp"
#include "coopbandit/rng.hpp"

namespace coopbandit {

using Vertex = std::size_t;

/// Largest vertex count any generator or product will build.
inline constexpr std::size_t kDefaultVertexLimit = std::size_t{1} << 14;

/// Undirected graph on vertices 0..n-1 with implicit self-loops.
///
/// Only proper edges are stored. Every vertex is considered adjacent to
/// itself: closed neighborhoods, powers, products and independent sets all
/// follow that convention.
class Graph {
public:
    explicit Graph(std::size_t vertex_count) : rows_(vertex_count, Bitset(vertex_count)), lists_(vertex_count)
    {
        if (vertex_count == 0) {
            throw std::invalid_argument("Graph: vertex_count must be at least 1");
        }
    }

    std::size_t vertex_count() const noexcept { return lists_.size(); }

    std::size_t edge_count() const noexcept
    {
        std::size_t twice = 0;
        for (const auto& l : lists_) {
            twice += l.size();
        }
        return twice / 2;
    }

    /// Adds the proper edge {u, v}. Self-loops are rejected since they are
    /// always present implicitly. Returns false if the edge already existed.
    bool add_edge(Vertex u, Vertex v)
    {
        check_vertex(u);
        check_vertex(v);
        if (u == v) {
            throw std::invalid_argument("Graph::add_edge: self-loops are implicit and cannot be added");
        }
        if (rows_[u].test(v)) {
            return false;
        }
        rows_[u].set(v);
        rows_[v].set(u);
        lists_[u].insert(std::upper_bound(lists_[u].begin(), lists_[u].end(), v), v);
        lists_[v].insert(std::upper_bound(lists_[v].begin(), lists_[v].end(), u), u);
        return true;
    }

    /// True iff {u, v} is a proper edge.
    bool has_edge(Vertex u, Vertex v) const
    {
        check_vertex(u);
        check_vertex(v);
        return u != v && rows_[u].test(v);
    }

    /// Closed adjacency: u == v or {u, v} is an edge.
    bool adjacent(Vertex u, Vertex v) const { return u == v || has_edge(u, v); }

    /// Proper neighbors of v in increasing order.
    const std::vector<Vertex>& neighbors(Vertex v) const
    {
        check_vertex(v);
        return lists_[v];
    }

    std::size_t degree(Vertex v) const { return neighbors(v).size(); }

    /// Proper-neighbor bitset of v.
    const Bitset& row(Vertex v) const
    {
        check_vertex(v);
        return rows_[v];
    }

    void check_vertex(Vertex v) const
    {
        if (v >= lists_.size()) {
            throw std::out_of_range("Graph: vertex " + std::to_string(v) + " out of range [0, "
                                    + std::to_string(lists_.size()) + ")");
        }
    }

    friend bool operator==(const Graph& a, const Graph& b) { return a.lists_ == b.lists_; }

private:
    std::vector<Bitset> rows_;
    std::vector<std::vector<Vertex>> lists_;
};

/// All-pairs shortest-path lengths (hop counts). Unreachable pairs hold
/// `infinity`.
class DistanceMatrix {
public:
    using Distance = std::uint32_t;
    static constexpr Distance infinity = std::numeric_limits<Distance>::max();

    explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, infinity) {}

    std::size_t size() const noexcept { return n_; }

    Distance operator()(Vertex u, Vertex v) const { return d_.at(u * n_ + v); }
    Distance& at(Vertex u, Vertex v) { return d_.at(u * n_ + v); }

    bool reachable(Vertex u, Vertex v) const { return (*this)(u, v) != infinity; }

    /// True iff the distance is finite and at most m.
    bool within(Vertex u, Vertex v, std::size_t m) const
    {
        const Distance x = (*this)(u, v);
        return x != infinity && x <= m;
    }

private:
    std::size_t n_;
    std::vector<Distance> d_;
};

namespace detail {

// BFS from source, stopping at depth max_depth. Writes into dist (size n,
// initialised to infinity by the caller).
inline void bfs(const Graph& g, Vertex source, std::size_t max_depth, std::vector<DistanceMatrix::Distance>& dist)
{
    dist[source] = 0;
    std::deque<Vertex> frontier{source};
    while (!frontier.empty()) {
        const Vertex u = frontier.front();
        frontier.pop_front();
        if (dist[u] >= max_depth) {
            continue;
        }
        for (Vertex w : g.neighbors(u)) {
            if (dist[w] == DistanceMatrix::infinity) {
                dist[w] = dist[u] + 1;
                frontier.push_back(w);
            }
        }
    }
}

} // namespace detail

inline DistanceMatrix all_pairs_distances(const Graph& g)
{
    const std::size_t n = g.vertex_count();
    DistanceMatrix dm(n);
    std::vector<DistanceMatrix::Distance> dist(n);
    for (Vertex s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), DistanceMatrix::infinity);
        detail::bfs(g, s, std::numeric_limits<std::size_t>::max(), dist);
        for (Vertex t = 0; t < n; ++t) {
            dm.at(s, t) = dist[t];
        }
    }
    return dm;
}

/// {u : dist(u, v) <= m}, sorted. Always contains v.
inline std::vector<Vertex> neighborhood(const Graph& g, Vertex v, std::size_t m)
{
    g.check_vertex(v);
    std::vector<DistanceMatrix::Distance> dist(g.vertex_count(), DistanceMatrix::infinity);
    detail::bfs(g, v, m, dist);
    std::vector<Vertex> out;
    for (Vertex u = 0; u < g.vertex_count(); ++u) {
        if (dist[u] != DistanceMatrix::infinity) {
            out.push_back(u);
        }
    }
    return out;
}

/// m-th power: u ~ v iff dist(u, v) <= m. power(g, 0) is edgeless.
inline Graph power(const Graph& g, std::size_t m)
{
    const std::size_t n = g.vertex_count();
    Graph out(n);
    if (m == 0) {
        return out;
    }
    std::vector<DistanceMatrix::Distance> dist(n);
    for (Vertex s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), DistanceMatrix::infinity);
        detail::bfs(g, s, m, dist);
        for (Vertex t = s + 1; t < n; ++t) {
            if (dist[t] != DistanceMatrix::infinity) {
                out.add_edge(s, t);
            }
        }
    }
    return out;
}

/// Flat index of the pair (a, b) in a product whose second factor has
/// `second_count` vertices. Pairs are laid out row-major: a * second_count + b.
constexpr std::size_t product_index(Vertex a, Vertex b, std::size_t second_count) noexcept
{
    return a * second_count + b;
}

/// Inverse of product_index.
constexpr std::pair<Vertex, Vertex> product_pair(std::size_t index, std::size_t second_count) noexcept
{
    return {index / second_count, index % second_count};
}

/// Strong product g1 ⊠ g2. Vertex (a, b) has flat index product_index(a, b,
/// |V2|); (a, b) ~ (c, e) iff a, c are closed-adjacent in g1 and b, e are
/// closed-adjacent in g2.
inline Graph strong_product(const Graph& g1, const Graph& g2, std::size_t vertex_limit = kDefaultVertexLimit)
{
    const std::size_t n1 = g1.vertex_count();
    const std::size_t n2 = g2.vertex_count();
    if (n1 > vertex_limit / n2) {
        throw std::length_error("strong_product: " + std::to_string(n1) + " x " + std::to_string(n2)
                                + " vertices exceeds the limit of " + std::to_string(vertex_limit));
    }
    Graph out(n1 * n2);
    auto closed = [](const Graph& g, Vertex v) {
        std::vector<Vertex> c = g.neighbors(v);
        c.insert(std::upper_bound(c.begin(), c.end(), v), v);
        return c;
    };
    for (Vertex a = 0; a < n1; ++a) {
        const auto na = closed(g1, a);
        for (Vertex b = 0; b < n2; ++b) {
            const auto nb = closed(g2, b);
            const std::size_t x = product_index(a, b, n2);
            for (Vertex c : na) {
                for (Vertex e : nb) {
                    const std::size_t y = product_index(c, e, n2);
                    if (y > x) {
                        out.add_edge(x, y);
                    }
                }
            }
        }
    }
    return out;
}

// Generators -----------------------------------------------------------------

inline Graph gen_edgeless(std::size_t nv) { return Graph(nv); }

inline Graph gen_clique(std::size_t nv)
{
    Graph g(nv);
    for (Vertex u = 0; u < nv; ++u) {
        for (Vertex v = u + 1; v < nv; ++v) {
            g.add_edge(u, v);
        }
    }
    return g;
}

/// Cycle 0-1-...-(nv-1)-0. For nv < 3 this degenerates to a path.
inline Graph gen_cycle(std::size_t nv)
{
    Graph g(nv);
    for (Vertex u = 0; u + 1 < nv; ++u) {
        g.add_edge(u, u + 1);
    }
    if (nv >= 3) {
        g.add_edge(nv - 1, 0);
    }
    return g;
}

/// G(nv, p): every unordered pair {u < v} is visited in lexicographic order
/// and kept with probability p.
inline Graph gen_erdos_renyi(std::size_t nv, double p, Rng& rng)
{
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("gen_erdos_renyi: p must lie in [0, 1]");
    }
    Graph g(nv);
    for (Vertex u = 0; u < nv; ++u) {
        for (Vertex v = u + 1; v < nv; ++v) {
            if (rng.bernoulli(p)) {
                g.add_edge(u, v);
            }
        }
    }
    return g;
}

/// G_1 = C5; G_k replaces every vertex of G_{k-1} by a copy of C5 and every
/// edge by a complete bipartite K_{5,5} between the two copies. Vertex
/// (v, c) of G_k, with v in G_{k-1} and c in C5, has index 5 v + c, so the
/// base-5 digits of an index read from the outermost level to the innermost.
inline Graph gen_iterated_c5(std::size_t k, std::size_t vertex_limit = kDefaultVertexLimit)
{
    if (k == 0) {
        throw std::invalid_argument("gen_iterated_c5: k must be at least 1");
    }
    std::size_t count = 5;
    for (std::size_t level = 1; level < k; ++level) {
        if (count > vertex_limit / 5) {
            throw std::length_error("gen_iterated_c5: 5^" + std::to_string(k) + " vertices exceeds the limit");
        }
        count *= 5;
    }
    if (count > vertex_limit) {
        throw std::length_error("gen_iterated_c5: 5^" + std::to_string(k) + " vertices exceeds the limit");
    }
    const Graph c5 = gen_cycle(5);
    Graph g = c5;
    for (std::size_t level = 1; level < k; ++level) {
        const std::size_t prev = g.vertex_count();
        Graph next(prev * 5);
        for (Vertex v = 0; v < prev; ++v) {
            for (Vertex c = 0; c < 5; ++c) {
                for (Vertex c2 : c5.neighbors(c)) {
                    if (c2 > c) {
                        next.add_edge(5 * v + c, 5 * v + c2);
                    }
                }
            }
            for (Vertex w : g.neighbors(v)) {
                if (w <= v) {
                    continue;
                }
                for (Vertex c = 0; c < 5; ++c) {
                    for (Vertex c2 = 0; c2 < 5; ++c2) {
                        next.add_edge(5 * v + c, 5 * w + c2);
                    }
                }
            }
        }
        g = std::move(next);
    }
    return g;
}

/// Independent set of size 5 in C5 ⊠ C5 (0-indexed pairs).
inline constexpr std::pair<Vertex, Vertex> kC5SquareWitness[5] = {{0, 0}, {1, 2}, {2, 4}, {3, 1}, {4, 3}};

/// Independent set of size 5^k in G_k ⊠ G_k (flat product indices), obtained
/// by applying the C5 ⊠ C5 witness digit by digit.
inline std::vector<std::size_t> iterated_c5_product_witness(std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("iterated_c5_product_witness: k must be at least 1");
    }
    std::vector<std::pair<Vertex, Vertex>> pairs{{0, 0}};
    std::size_t side = 1;
    for (std::size_t level = 0; level < k; ++level) {
        std::vector<std::pair<Vertex, Vertex>> next;
        next.reserve(pairs.size() * 5);
        for (const auto& [x, y] : pairs) {
            for (const auto& [a, b] : kC5SquareWitness) {
                next.emplace_back(5 * x + a, 5 * y + b);
            }
        }
        pairs = std::move(next);
        side *= 5;
    }
    std::vector<std::size_t> out;
    out.reserve(pairs.size());
    for (const auto& [x, y] : pairs) {
        out.push_back(product_index(x, y, side));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Text format ----------------------------------------------------------------
//
//   <vertex_count>
//   u v
//   ...
//
// one line per proper edge, 0-indexed, whitespace separated. Self-loops are
// never listed.

inline Graph read_graph(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("graph file line " + std::to_string(line_no) + ": " + what);
    };
    auto next_content_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                return true;
            }
        }
        return false;
    };

    if (!next_content_line()) {
        throw std::runtime_error("graph file: missing vertex count");
    }
    long long n = 0;
    {
        std::istringstream ls(line);
        std::string extra;
        if (!(ls >> n) || (ls >> extra) || n < 1) {
            fail("expected a positive vertex count");
        }
    }
    Graph g(static_cast<std::size_t>(n));
    while (next_content_line()) {
        std::istringstream ls(line);
        long long u = 0;
        long long v = 0;
        std::string extra;
        if (!(ls >> u >> v) || (ls >> extra)) {
            fail("expected \"u v\"");
        }
        if (u < 0 || v < 0 || u >= n || v >= n) {
            fail("vertex index out of range");
        }
        if (u == v) {
            fail("self-loops must not be listed");
        }
        if (!g.add_edge(static_cast<Vertex>(u), static_cast<Vertex>(v))) {
            fail("duplicate edge " + std::to_string(u) + " " + std::to_string(v));
        }
    }
    return g;
}

inline void write_graph(std::ostream& out, const Graph& g)
{
    out << g.vertex_count() << '\n';
    for (Vertex u = 0; u < g.vertex_count(); ++u) {
        for (Vertex v : g.neighbors(u)) {
            if (v > u) {
                out << u << ' ' << v << '\n';
            }
        }
    }
}

} // namespace coopbandit
