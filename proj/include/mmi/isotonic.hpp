#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "mmi/error.hpp"
#include "mmi/linalg.hpp"

namespace mmi {

// Points with identical projections are merged into groups; strict relations
// live between groups, so the edge set is a DAG whenever it is consistent.
struct PartialOrder {
    using Edge = std::pair<std::size_t, std::size_t>;  // first precedes second

    std::size_t n = 0;
    std::vector<std::size_t> groupOf;              // point -> group
    std::vector<std::vector<std::size_t>> groups;  // group -> member points, ascending
    std::vector<Edge> edges;                       // group-level, sorted and unique; the order is their closure

    std::size_t group_count() const { return groups.size(); }

    // Singleton groups with the given point-level relations.
    static PartialOrder from_point_edges(std::size_t n, std::vector<Edge> edges) {
        PartialOrder po;
        po.n = n;
        po.groupOf.resize(n);
        po.groups.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            po.groupOf[i] = i;
            po.groups[i] = {i};
        }
        for (const auto& [a, b] : edges)
            require(a < n && b < n, "invalid-order", "edge endpoint out of range");
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        po.edges = std::move(edges);
        return po;
    }

    static PartialOrder chain(std::size_t n) {
        std::vector<Edge> e;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
        return from_point_edges(n, std::move(e));
    }

    // True when F is constant on groups and nondecreasing along every edge.
    bool respected_by(const Vector& f) const {
        for (const auto& g : groups)
            for (std::size_t i : g)
                if (f(static_cast<Eigen::Index>(i)) != f(static_cast<Eigen::Index>(g.front()))) return false;
        for (const auto& [a, b] : edges)
            if (f(static_cast<Eigen::Index>(groups[a].front())) > f(static_cast<Eigen::Index>(groups[b].front())))
                return false;
        return true;
    }
};

inline void require_nonnegative(const Matrix& m) {
    if ((m.array() < 0.0).any()) throw Error("nonnegativity-violated", "index matrix has a negative entry");
}

// Order on samples induced by componentwise comparison of M(I)ᵀXᵢ. Ties are
// exact equality so that the relation stays transitive. The edges are the
// covering pairs only.
inline PartialOrder induced_order(const Matrix& m, const IndexSet& rows, const Matrix& x) {
    require_nonnegative(m);
    for (std::size_t r : rows) require(r < static_cast<std::size_t>(m.rows()), "invalid-index-set", "row out of range");
    require(x.cols() == m.rows(), "dimension-mismatch", "X and M disagree on d");
    const Matrix p = project_rows(x, m, rows);
    const auto n = static_cast<std::size_t>(x.rows());
    const Eigen::Index k = p.cols();

    auto row_less = [&](std::size_t a, std::size_t b) {
        for (Eigen::Index c = 0; c < k; ++c) {
            const double pa = p(static_cast<Eigen::Index>(a), c), pb = p(static_cast<Eigen::Index>(b), c);
            if (pa != pb) return pa < pb;
        }
        return false;
    };
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), row_less);

    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (pos == 0 || row_less(idx[pos - 1], idx[pos])) groups.emplace_back();
        groups.back().push_back(idx[pos]);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

    PartialOrder po;
    po.n = n;
    po.groupOf.resize(n);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t i : groups[g]) po.groupOf[i] = g;
    po.groups = std::move(groups);

    // Only covering pairs become edges; the rest follow by transitivity. Groups
    // are visited in lexicographic order, which extends dominance, so every
    // intermediate group is seen before the pairs it makes redundant.
    const std::size_t gcount = po.groups.size();
    std::vector<std::size_t> lex(gcount);
    std::iota(lex.begin(), lex.end(), std::size_t{0});
    std::sort(lex.begin(), lex.end(),
              [&](std::size_t a, std::size_t b) { return row_less(po.groups[a].front(), po.groups[b].front()); });
    const std::size_t words = (gcount + 63) / 64;
    std::vector<std::uint64_t> reach(gcount * words, 0);  // groups above each group, as a bitset
    for (std::size_t t = gcount; t-- > 0;) {
        const std::size_t a = lex[t];
        const auto ra = static_cast<Eigen::Index>(po.groups[a].front());
        std::uint64_t* above = &reach[a * words];
        for (std::size_t u = t + 1; u < gcount; ++u) {
            const std::size_t b = lex[u];
            if (above[b / 64] >> (b % 64) & 1U) continue;
            const auto rb = static_cast<Eigen::Index>(po.groups[b].front());
            bool le = true;
            for (Eigen::Index c = 0; c < k && le; ++c) le = p(ra, c) <= p(rb, c);
            if (!le) continue;
            po.edges.emplace_back(a, b);
            above[b / 64] |= std::uint64_t{1} << (b % 64);
            const std::uint64_t* next = &reach[b * words];
            for (std::size_t i = 0; i < words; ++i) above[i] |= next[i];
        }
    }
    std::sort(po.edges.begin(), po.edges.end());
    return po;
}

namespace detail {

// Dinic max-flow on real capacities; used only for its minimum cut.
class MaxFlow {
public:
    explicit MaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), next_(nodes) {}

    void add_edge(std::size_t from, std::size_t to, double cap) {
        adj_[from].push_back(edges_.size());
        edges_.push_back({to, cap});
        adj_[to].push_back(edges_.size());
        edges_.push_back({from, 0.0});
    }

    double run(std::size_t s, std::size_t t, double eps) {
        double total = 0.0;
        while (bfs(s, t, eps)) {
            std::fill(next_.begin(), next_.end(), 0);
            while (true) {
                const double pushed = dfs(s, t, std::numeric_limits<double>::infinity(), eps);
                if (pushed <= eps) break;
                total += pushed;
            }
        }
        return total;
    }

    // Nodes reachable from s through edges with residual capacity above eps.
    std::vector<char> source_side(std::size_t s, double eps) const {
        std::vector<char> seen(adj_.size(), 0);
        std::deque<std::size_t> queue{s};
        seen[s] = 1;
        while (!queue.empty()) {
            const std::size_t v = queue.front();
            queue.pop_front();
            for (std::size_t e : adj_[v]) {
                if (edges_[e].cap > eps && !seen[edges_[e].to]) {
                    seen[edges_[e].to] = 1;
                    queue.push_back(edges_[e].to);
                }
            }
        }
        return seen;
    }

private:
    struct Arc {
        std::size_t to;
        double cap;  // residual
    };

    bool bfs(std::size_t s, std::size_t t, double eps) {
        std::fill(level_.begin(), level_.end(), -1);
        std::deque<std::size_t> queue{s};
        level_[s] = 0;
        while (!queue.empty()) {
            const std::size_t v = queue.front();
            queue.pop_front();
            for (std::size_t e : adj_[v]) {
                if (edges_[e].cap > eps && level_[edges_[e].to] < 0) {
                    level_[edges_[e].to] = level_[v] + 1;
                    queue.push_back(edges_[e].to);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(std::size_t v, std::size_t t, double limit, double eps) {
        if (v == t) return limit;
        for (std::size_t& i = next_[v]; i < adj_[v].size(); ++i) {
            Arc& arc = edges_[adj_[v][i]];
            if (arc.cap <= eps || level_[arc.to] != level_[v] + 1) continue;
            const double got = dfs(arc.to, t, std::min(limit, arc.cap), eps);
            if (got > eps) {
                arc.cap -= got;
                edges_[adj_[v][i] ^ 1].cap += got;
                return got;
            }
        }
        return 0.0;
    }

    std::vector<Arc> edges_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<int> level_;
    std::vector<std::size_t> next_;
};

struct GroupGraph {
    std::vector<std::vector<std::size_t>> succ;
    std::vector<std::vector<std::size_t>> pred;
    std::vector<std::size_t> topo;  // a topological order of the groups
};

// Keeps only the covering relations. Induced orders list every comparable
// pair, which is quadratic in the group count; the cover has the same
// transitive closure and is usually far smaller, which is what the cut
// problems and the projection pay for.
inline void transitive_reduction(GroupGraph& gg) {
    const std::size_t g = gg.topo.size();
    const std::size_t words = (g + 63) / 64;
    std::vector<std::size_t> pos(g);
    for (std::size_t i = 0; i < g; ++i) pos[gg.topo[i]] = i;
    std::vector<std::uint64_t> reach(g * words, 0);  // descendants of each group, as a bitset
    for (auto& p : gg.pred) p.clear();
    for (std::size_t t = g; t-- > 0;) {
        const std::size_t v = gg.topo[t];
        std::vector<std::size_t>& succ = gg.succ[v];
        std::sort(succ.begin(), succ.end(), [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
        std::uint64_t* rv = &reach[v * words];
        std::vector<std::size_t> kept;
        for (std::size_t w : succ) {
            if (rv[w / 64] >> (w % 64) & 1U) continue;
            kept.push_back(w);
            rv[w / 64] |= std::uint64_t{1} << (w % 64);
            const std::uint64_t* rw = &reach[w * words];
            for (std::size_t i = 0; i < words; ++i) rv[i] |= rw[i];
        }
        succ = std::move(kept);
    }
    for (std::size_t v = 0; v < g; ++v)
        for (std::size_t w : gg.succ[v]) gg.pred[w].push_back(v);
}

inline GroupGraph group_graph(const PartialOrder& order) {
    const std::size_t g = order.group_count();
    GroupGraph gg;
    gg.succ.resize(g);
    gg.pred.resize(g);
    for (const auto& [a, b] : order.edges) {
        require(a < g && b < g, "invalid-order", "edge references a missing group");
        if (a == b) throw Error("inconsistent-order", "a group precedes itself");
        gg.succ[a].push_back(b);
        gg.pred[b].push_back(a);
    }
    std::vector<std::size_t> indeg(g);
    for (std::size_t v = 0; v < g; ++v) indeg[v] = gg.pred[v].size();
    std::deque<std::size_t> ready;
    for (std::size_t v = 0; v < g; ++v)
        if (indeg[v] == 0) ready.push_back(v);
    while (!ready.empty()) {
        const std::size_t v = ready.front();
        ready.pop_front();
        gg.topo.push_back(v);
        for (std::size_t w : gg.succ[v])
            if (--indeg[w] == 0) ready.push_back(w);
    }
    if (gg.topo.size() != g) throw Error("inconsistent-order", "strict relations contain a cycle");
    transitive_reduction(gg);
    return gg;
}

// Weighted pool-adjacent-violators along a total order of groups.
inline std::vector<double> pava(const std::vector<std::size_t>& chain, const std::vector<double>& mean,
                                const std::vector<double>& weight) {
    struct Block {
        double wsum, wy;
        std::size_t len;
    };
    std::vector<Block> blocks;
    for (std::size_t g : chain) {
        blocks.push_back({weight[g], weight[g] * mean[g], 1});
        while (blocks.size() >= 2) {
            const Block& hi = blocks[blocks.size() - 1];
            const Block& lo = blocks[blocks.size() - 2];
            if (lo.wy / lo.wsum <= hi.wy / hi.wsum) break;
            const Block merged{lo.wsum + hi.wsum, lo.wy + hi.wy, lo.len + hi.len};
            blocks.pop_back();
            blocks.back() = merged;
        }
    }
    std::vector<double> value(mean.size());
    std::size_t pos = 0;
    for (const Block& blk : blocks)
        for (std::size_t i = 0; i < blk.len; ++i) value[chain[pos++]] = blk.wy / blk.wsum;
    return value;
}

// Recursive partitioning: split a block at its weighted mean by the maximum
// weight upper set (a closure problem solved by min cut); the pieces are then
// independent. Exact for least squares on any DAG.
inline std::vector<double> partition_isotonic(const GroupGraph& gg, const std::vector<double>& mean,
                                              const std::vector<double>& weight) {
    const std::size_t g = mean.size();
    std::vector<double> value(g);
    std::vector<long> local(g, -1);
    std::vector<std::vector<std::size_t>> stack;
    stack.emplace_back(g);
    std::iota(stack.back().begin(), stack.back().end(), std::size_t{0});

    while (!stack.empty()) {
        std::vector<std::size_t> block = std::move(stack.back());
        stack.pop_back();
        double wsum = 0.0, wy = 0.0;
        for (std::size_t v : block) {
            wsum += weight[v];
            wy += weight[v] * mean[v];
        }
        const double m = wy / wsum;
        if (block.size() == 1) {
            value[block[0]] = m;
            continue;
        }

        const std::size_t nb = block.size(), src = nb, snk = nb + 1;
        for (std::size_t i = 0; i < nb; ++i) local[block[i]] = static_cast<long>(i);
        MaxFlow flow(nb + 2);
        double scale = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
            const double w = weight[block[i]] * (mean[block[i]] - m);
            scale += std::abs(w);
            if (w > 0.0) flow.add_edge(src, i, w);
            else if (w < 0.0) flow.add_edge(i, snk, -w);
            for (std::size_t h : gg.succ[block[i]])
                if (local[h] >= 0) flow.add_edge(i, static_cast<std::size_t>(local[h]), std::numeric_limits<double>::infinity());
        }
        const double eps = 1e-14 * std::max(scale, 1e-300);
        std::vector<char> upper;
        if (scale > 0.0) {
            flow.run(src, snk, eps);
            upper = flow.source_side(src, eps);
        }
        for (std::size_t v : block) local[v] = -1;

        std::vector<std::size_t> lo, hi;
        for (std::size_t i = 0; i < nb; ++i) (!upper.empty() && upper[i] ? hi : lo).push_back(block[i]);
        if (lo.empty() || hi.empty()) {
            for (std::size_t v : block) value[v] = m;
            continue;
        }
        stack.push_back(std::move(lo));
        stack.push_back(std::move(hi));
    }
    return value;
}

inline Vector expand_groups(const PartialOrder& order, const std::vector<double>& value) {
    Vector f(static_cast<Eigen::Index>(order.n));
    for (std::size_t i = 0; i < order.n; ++i) f(static_cast<Eigen::Index>(i)) = value[order.groupOf[i]];
    return f;
}

}  // namespace detail

// Least-squares isotonic regression on the order without the box.
inline Vector isotonic_projection(const PartialOrder& order, const Vector& y) {
    require(static_cast<std::size_t>(y.size()) == order.n, "dimension-mismatch", "Y length differs from order size");
    const detail::GroupGraph gg = detail::group_graph(order);
    const std::size_t g = order.group_count();
    std::vector<double> mean(g, 0.0), weight(g, 0.0);
    for (std::size_t v = 0; v < g; ++v) {
        for (std::size_t i : order.groups[v]) mean[v] += y(static_cast<Eigen::Index>(i));
        weight[v] = static_cast<double>(order.groups[v].size());
        mean[v] /= weight[v];
    }

    std::vector<double> value;
    // After reduction a total order is a single path.
    bool total = true;
    for (std::size_t i = 0; i + 1 < g && total; ++i)
        total = gg.succ[gg.topo[i]].size() == 1 && gg.succ[gg.topo[i]][0] == gg.topo[i + 1];
    if (total) value = detail::pava(gg.topo, mean, weight);
    else value = detail::partition_isotonic(gg, mean, weight);

    // Rounding in block means can leave violations of order 1e-16; a single
    // pass in topological order removes them without moving any value by more.
    for (std::size_t v : gg.topo)
        for (std::size_t p : gg.pred[v]) value[v] = std::max(value[v], value[p]);
    return detail::expand_groups(order, value);
}

// Exact minimizer of Σ(Yᵢ − Fᵢ)² over order-monotone F in [0, b]ⁿ: clipping the
// unconstrained projection at constant levels keeps both feasibility and
// optimality.
inline Vector isotonic_fit(const PartialOrder& order, const Vector& y, double b) {
    require(b > 0.0, "invalid-bound", "b must be positive");
    return isotonic_projection(order, y).cwiseMax(0.0).cwiseMin(b);
}

// Exhaustive search over grid-valued monotone assignments; a test oracle.
inline Vector brute_force_fit(const PartialOrder& order, const Vector& y, double b, std::size_t gridSteps) {
    require(order.n <= 8, "size-guard", "brute force is limited to n <= 8");
    require(gridSteps >= 2 && gridSteps <= 21, "size-guard", "gridSteps must lie in [2, 21]");
    require(static_cast<std::size_t>(y.size()) == order.n, "dimension-mismatch", "Y length differs from order size");
    const detail::GroupGraph gg = detail::group_graph(order);
    const std::size_t g = order.group_count();
    const double step = b / static_cast<double>(gridSteps - 1);

    auto cost = [&](std::size_t grp, std::size_t level) {
        double c = 0.0;
        for (std::size_t i : order.groups[grp]) {
            const double e = y(static_cast<Eigen::Index>(i)) - step * static_cast<double>(level);
            c += e * e;
        }
        return c;
    };
    std::vector<double> floor_cost(g + 1, 0.0);  // admissible bound for the unassigned suffix
    for (std::size_t pos = g; pos-- > 0;) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < gridSteps; ++l) best = std::min(best, cost(gg.topo[pos], l));
        floor_cost[pos] = floor_cost[pos + 1] + best;
    }

    std::vector<std::size_t> level(g, 0), best_level(g, 0);
    double best = std::numeric_limits<double>::infinity();
    auto search = [&](auto&& self, std::size_t pos, double acc) -> void {
        if (acc + floor_cost[pos] >= best) return;
        if (pos == g) {
            best = acc;
            best_level = level;
            return;
        }
        const std::size_t grp = gg.topo[pos];
        std::size_t lo = 0;
        for (std::size_t p : gg.pred[grp]) lo = std::max(lo, level[p]);
        for (std::size_t l = lo; l < gridSteps; ++l) {
            level[grp] = l;
            self(self, pos + 1, acc + cost(grp, l));
        }
    };
    search(search, 0, 0.0);

    std::vector<double> value(g);
    for (std::size_t v = 0; v < g; ++v) value[v] = step * static_cast<double>(best_level[v]);
    return detail::expand_groups(order, value);
}

inline double squared_error(const Vector& y, const Vector& f) { return (y - f).squaredNorm(); }

struct SearchOptions {
    std::size_t enumerationBudget = 1000000;  // max number of index sets visited
};

struct SparseIsoResult {
    IndexSet I;
    Vector F;
    double objective = 0.0;
    Matrix anchors;  // n×k projections M(I)ᵀXᵢ paired with F
};

inline IndexSet nonzero_rows(const Matrix& m) {
    IndexSet rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        if ((m.row(r).array() != 0.0).any()) rows.push_back(static_cast<std::size_t>(r));
    return rows;
}

inline IndexSet intersect(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// Shared driver for the sparse fits: enumerate size-s index sets in
// lexicographic order, score each through `fit` (cached by the part of I that
// touches nonzero rows of M), keep the first strict minimum, and stop once the
// I-independent floor `lower` is reached.
template <class FitForSet>
std::pair<IndexSet, Vector> search_index_sets(std::size_t d, std::size_t s, const Matrix& m, const Vector& y,
                                              double lower, const SearchOptions& opts, FitForSet&& fit) {
    require(s <= d, "invalid-sparsity", "s must not exceed d");
    if (binomial_capped(d, s, opts.enumerationBudget + 1) > opts.enumerationBudget)
        throw Error("enumeration-budget", "C(d, s) exceeds the enumeration budget");
    const IndexSet nz = nonzero_rows(m);
    std::map<IndexSet, std::pair<double, Vector>> cache;
    IndexSet best_set;
    Vector best_f;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for_each_subset(d, s, [&](const IndexSet& set) {
        const IndexSet eff = intersect(set, nz);
        auto it = cache.find(eff);
        if (it == cache.end()) {
            Vector f = fit(eff);
            const double obj = squared_error(y, f);
            it = cache.emplace(eff, std::make_pair(obj, std::move(f))).first;
        }
        const double obj = it->second.first;
        if (!found || obj < best - 1e-12 * std::max(1.0, best)) {
            found = true;
            best = obj;
            best_set = set;
            best_f = it->second.second;
        }
        return best > lower + 1e-12 * std::max(1.0, lower);
    });
    return {best_set, best_f};
}

// Σ(Yᵢ − clip(Yᵢ))²: no fit in [0, b]ⁿ can do better, whatever the order.
inline double clip_floor(const Vector& y, double b) { return (y - y.cwiseMax(0.0).cwiseMin(b)).squaredNorm(); }

inline SparseIsoResult sparse_isotonic(const Matrix& x, const Vector& y, const Matrix& m, std::size_t s, double b,
                                       const SearchOptions& opts = {}) {
    require_nonnegative(m);
    require(x.rows() == y.size() && x.cols() == m.rows(), "dimension-mismatch", "X, Y and M disagree in shape");
    require(b > 0.0, "invalid-bound", "b must be positive");
    auto [set, f] = search_index_sets(static_cast<std::size_t>(m.rows()), s, m, y, clip_floor(y, b), opts,
                                      [&](const IndexSet& eff) { return isotonic_fit(induced_order(m, eff, x), y, b); });
    SparseIsoResult res;
    res.I = std::move(set);
    res.F = std::move(f);
    res.objective = squared_error(y, res.F);
    res.anchors = project_rows(x, m, res.I);
    return res;
}

// f̂(z) = max{Fᵢ : aᵢ ⪯ z}, and 0 when no anchor is dominated.
class StepInterpolant {
public:
    StepInterpolant() = default;
    StepInterpolant(Matrix anchors, Vector values) : anchors_(std::move(anchors)), values_(std::move(values)) {
        require(anchors_.rows() == values_.size(), "dimension-mismatch", "one value per anchor required");
    }

    double operator()(const Vector& z) const {
        require(z.size() == anchors_.cols(), "dimension-mismatch", "query has wrong length");
        double best = 0.0;
        for (Eigen::Index i = 0; i < anchors_.rows(); ++i) {
            if (values_(i) <= best) continue;
            bool dominated = true;
            for (Eigen::Index c = 0; c < anchors_.cols() && dominated; ++c) dominated = anchors_(i, c) <= z(c);
            if (dominated) best = values_(i);
        }
        return best;
    }

    const Matrix& anchors() const { return anchors_; }
    const Vector& values() const { return values_; }

private:
    Matrix anchors_;  // n×k
    Vector values_;
};

}  // namespace mmi
