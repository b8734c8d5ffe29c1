#pragma once

#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "gvq/core.hpp"
#include "gvq/gnns.hpp"
#include "gvq/kmeans.hpp"

namespace gvq {

/// Exact nearest neighbor by full scan; the accounting baseline every
/// speedup is measured against. dist_evals is exactly n.
inline SearchOutcome linear_nn(const VectorStore& store, std::span<const float> q) {
    const std::uint32_t n = store.size();
    if (n == 0)
        throw ParameterError("linear_nn: empty store");
    DistanceMeter meter;
    meter.begin_query();
    std::pair<double, std::uint32_t> best{std::numeric_limits<double>::infinity(), kInvalidId};
    for (std::uint32_t id = 0; id < n; ++id) {
        const double d = distance(meter, store, id, q);
        if (d < best.first) // scanning ascending ids keeps the lower id on ties
            best = {d, id};
    }
    SearchOutcome out;
    out.results.emplace_back(best.second, best.first);
    out.dist_evals = meter.evaluations();
    return out;
}

// ---------------------------------------------------------------------------
// Randomized KD-tree forest with best-bin-first search.

struct KdForest {
    struct Node {
        std::int32_t split_dim = -1; // -1: leaf
        float threshold = 0.0f;
        std::uint32_t left = kInvalidId;  // child index; for a leaf, the point id
        std::uint32_t right = kInvalidId;
    };
    std::uint32_t num_trees = 0;
    std::uint32_t num_points = 0;
    std::vector<std::vector<Node>> trees; // node 0 is each tree's root
};

namespace detail {

class KdTreeBuilder {
  public:
    KdTreeBuilder(const VectorStore& store, Rng& rng) : store_(store), rng_(rng) {}

    std::vector<KdForest::Node> build() {
        std::vector<std::uint32_t> ids(store_.size());
        std::iota(ids.begin(), ids.end(), 0u);
        nodes_.clear();
        build_node(ids.begin(), ids.end());
        return std::move(nodes_);
    }

  private:
    using Iter = std::vector<std::uint32_t>::iterator;

    std::uint32_t build_node(Iter first, Iter last) {
        const std::uint32_t index = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        const std::size_t count = static_cast<std::size_t>(last - first);
        if (count == 1) {
            nodes_[index].split_dim = -1;
            nodes_[index].left = *first;
            return index;
        }

        // Mean and variance per dimension over this node's points; split on a
        // random pick among the top-5 variance dimensions at the mean.
        const std::uint32_t d = store_.dim();
        std::vector<double> mean(d, 0.0), sq(d, 0.0);
        for (Iter it = first; it != last; ++it) {
            const float* p = store_[*it].data();
            for (std::uint32_t j = 0; j < d; ++j) {
                mean[j] += p[j];
                sq[j] += static_cast<double>(p[j]) * p[j];
            }
        }
        std::vector<std::pair<double, std::uint32_t>> variance(d);
        for (std::uint32_t j = 0; j < d; ++j) {
            mean[j] /= static_cast<double>(count);
            variance[j] = {sq[j] / static_cast<double>(count) - mean[j] * mean[j], j};
        }
        const std::uint32_t top = std::min<std::uint32_t>(5, d);
        std::partial_sort(variance.begin(), variance.begin() + top, variance.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first)
                                  return a.first > b.first;
                              return a.second < b.second;
                          });
        const std::uint32_t dim = variance[rng_.bounded(top)].second;
        const float threshold = static_cast<float>(mean[dim]);

        Iter mid = std::stable_partition(first, last, [&](std::uint32_t id) {
            return store_[id][dim] < threshold;
        });
        if (mid == first || mid == last)
            mid = first + static_cast<std::ptrdiff_t>(count / 2); // constant-dim fallback

        nodes_[index].split_dim = static_cast<std::int32_t>(dim);
        nodes_[index].threshold = threshold;
        const std::uint32_t left = build_node(first, mid);
        const std::uint32_t right = build_node(mid, last);
        nodes_[index].left = left;
        nodes_[index].right = right;
        return index;
    }

    const VectorStore& store_;
    Rng& rng_;
    std::vector<KdForest::Node> nodes_;
};

} // namespace detail

inline KdForest kd_build(const VectorStore& store, std::uint32_t trees, std::uint64_t seed) {
    if (store.empty())
        throw ParameterError("kd_build: empty store");
    if (trees == 0)
        throw ParameterError("kd_build: need at least one tree");
    KdForest forest;
    forest.num_trees = trees;
    forest.num_points = store.size();
    Rng root(seed);
    forest.trees.reserve(trees);
    for (std::uint32_t t = 0; t < trees; ++t) {
        Rng tree_rng = root.derive(t);
        forest.trees.push_back(detail::KdTreeBuilder(store, tree_rng).build());
    }
    return forest;
}

/// Best-bin-first forest search: descend every tree to a leaf, then keep
/// expanding the pending branch with the smallest accumulated boundary
/// distance until `checks` distinct leaf points have been evaluated. Only
/// leaf-point evaluations are charged; split comparisons are scalar.
inline SearchOutcome kd_search(const KdForest& forest, const VectorStore& store,
                               std::span<const float> q, std::uint32_t checks) {
    if (forest.num_points != store.size())
        throw ContractError("kd_search: forest/store size mismatch");
    if (checks == 0)
        throw ParameterError("kd_search: checks must be positive");
    if (q.size() != store.dim())
        throw ContractError("kd_search: query dimension mismatch");

    DistanceMeter meter;
    meter.begin_query();
    struct Pending {
        double bound;
        std::uint64_t order;
        std::uint32_t tree;
        std::uint32_t node;
        bool operator>(const Pending& o) const {
            if (bound != o.bound)
                return bound > o.bound;
            return order > o.order; // FIFO on equal bounds
        }
    };
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
    std::uint64_t order = 0;
    std::uint32_t checked = 0;
    std::pair<double, std::uint32_t> best{std::numeric_limits<double>::infinity(), kInvalidId};

    auto descend = [&](std::uint32_t tree, std::uint32_t node, double bound) {
        const auto& nodes = forest.trees[tree];
        while (nodes[node].split_dim >= 0) {
            const auto& nd = nodes[node];
            const double diff =
                static_cast<double>(q[static_cast<std::uint32_t>(nd.split_dim)]) - nd.threshold;
            const std::uint32_t near = diff < 0.0 ? nd.left : nd.right;
            const std::uint32_t far = diff < 0.0 ? nd.right : nd.left;
            queue.push({bound + diff * diff, order++, tree, far});
            node = near;
        }
        const std::uint32_t point = nodes[node].left;
        const auto [d, fresh] = meter.measure(store, point, q);
        if (fresh)
            ++checked;
        if (std::pair<double, std::uint32_t>{d, point} < best)
            best = {d, point};
    };

    for (std::uint32_t t = 0; t < forest.num_trees; ++t)
        descend(t, 0, 0.0);
    while (checked < checks && !queue.empty()) {
        const Pending p = queue.top();
        queue.pop();
        descend(p.tree, p.node, p.bound);
    }

    SearchOutcome out;
    out.results.emplace_back(best.second, best.first);
    out.dist_evals = meter.evaluations();
    return out;
}

// ---------------------------------------------------------------------------
// Hierarchical k-means tree with priority search.

struct HkmTree {
    struct Node {
        std::uint32_t centroid = kInvalidId;      // id into `centroids`
        std::vector<std::uint32_t> children;      // node indices; empty for a leaf
        std::vector<std::uint32_t> points;        // leaf point ids
    };
    std::uint32_t branching = 0;
    std::uint32_t num_points = 0;
    VectorStore centroids; // one row per node, mean of the node's subtree
    std::vector<Node> nodes; // node 0 is the root
};

namespace detail {

inline std::vector<float> subtree_mean(const VectorStore& store,
                                       std::span<const std::uint32_t> ids) {
    const std::uint32_t d = store.dim();
    std::vector<double> acc(d, 0.0);
    for (const std::uint32_t id : ids) {
        const float* p = store[id].data();
        for (std::uint32_t j = 0; j < d; ++j)
            acc[j] += p[j];
    }
    std::vector<float> mean(d);
    for (std::uint32_t j = 0; j < d; ++j)
        mean[j] = static_cast<float>(acc[j] / static_cast<double>(ids.size()));
    return mean;
}

class HkmBuilder {
  public:
    HkmBuilder(const VectorStore& store, std::uint32_t branching, std::uint32_t iterations,
               std::uint64_t seed)
        : store_(store), branching_(branching), iterations_(iterations), root_rng_(seed) {}

    HkmTree build() {
        tree_.branching = branching_;
        tree_.num_points = store_.size();
        tree_.centroids = VectorStore(store_.dim());
        std::vector<std::uint32_t> ids(store_.size());
        std::iota(ids.begin(), ids.end(), 0u);
        build_node(std::move(ids));
        return std::move(tree_);
    }

  private:
    std::uint32_t build_node(std::vector<std::uint32_t> ids) {
        const std::uint32_t index = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        tree_.centroids.append(subtree_mean(store_, ids));
        tree_.nodes[index].centroid = index;

        if (ids.size() <= branching_) {
            tree_.nodes[index].points = std::move(ids);
            return index;
        }

        // Local k-means over this node's points.
        VectorStore subset(store_.dim());
        subset.reserve(static_cast<std::uint32_t>(ids.size()));
        for (const std::uint32_t id : ids)
            subset.append(store_[id]);
        KMeansConfig cfg;
        cfg.clusters = branching_;
        cfg.max_iters = iterations_;
        cfg.seed = root_rng_.derive(next_stream_++).seed();
        const KMeansResult km = kmeans(subset, cfg);

        std::vector<std::vector<std::uint32_t>> groups(branching_);
        for (std::size_t i = 0; i < ids.size(); ++i)
            groups[km.assignments[i]].push_back(ids[i]);

        std::size_t largest = 0;
        for (const auto& g : groups)
            largest = std::max(largest, g.size());
        if (largest == ids.size()) {
            // Clustering made no progress (duplicate-heavy data): force an
            // even chunk split so the recursion terminates.
            groups.assign(branching_, {});
            const std::size_t chunk = (ids.size() + branching_ - 1) / branching_;
            for (std::size_t i = 0; i < ids.size(); ++i)
                groups[i / chunk].push_back(ids[i]);
        }

        std::vector<std::uint32_t> children;
        for (auto& g : groups) {
            if (g.empty())
                continue;
            children.push_back(build_node(std::move(g)));
        }
        tree_.nodes[index].children = std::move(children);
        return index;
    }

    const VectorStore& store_;
    std::uint32_t branching_;
    std::uint32_t iterations_;
    Rng root_rng_;
    std::uint64_t next_stream_ = 0;
    HkmTree tree_;
};

} // namespace detail

inline HkmTree hkm_build(const VectorStore& store, std::uint32_t branching,
                         std::uint32_t iterations, std::uint64_t seed) {
    if (store.empty())
        throw ParameterError("hkm_build: empty store");
    if (branching < 2)
        throw ParameterError("hkm_build: branching must be at least 2");
    if (iterations == 0)
        throw ParameterError("hkm_build: iterations must be positive");
    return detail::HkmBuilder(store, branching, iterations, seed).build();
}

/// Priority search: greedy root-to-leaf descent on child-centroid distances,
/// unvisited siblings queued by centroid distance, popped until `checks`
/// leaf points are evaluated. Centroid evaluations are d-dimensional
/// distances and are charged to dist_evals alongside leaf points.
inline SearchOutcome hkm_search(const HkmTree& tree, const VectorStore& store,
                                std::span<const float> q, std::uint32_t checks) {
    if (tree.num_points != store.size())
        throw ContractError("hkm_search: tree/store size mismatch");
    if (checks == 0)
        throw ParameterError("hkm_search: checks must be positive");
    if (q.size() != store.dim())
        throw ContractError("hkm_search: query dimension mismatch");

    DistanceMeter meter;
    meter.begin_query();
    std::uint64_t centroid_evals = 0;

    struct Pending {
        double dist;
        std::uint64_t order;
        std::uint32_t node;
        bool operator>(const Pending& o) const {
            if (dist != o.dist)
                return dist > o.dist;
            return order > o.order;
        }
    };
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
    std::uint64_t order = 0;
    std::uint32_t checked = 0;
    std::pair<double, std::uint32_t> best{std::numeric_limits<double>::infinity(), kInvalidId};
    queue.push({0.0, order++, 0});

    while (checked < checks && !queue.empty()) {
        std::uint32_t node = queue.top().node;
        queue.pop();
        std::vector<std::pair<double, std::uint32_t>> child_dists;
        while (!tree.nodes[node].children.empty()) {
            child_dists.clear();
            for (const std::uint32_t child : tree.nodes[node].children) {
                child_dists.emplace_back(l2(tree.centroids[tree.nodes[child].centroid], q),
                                         child);
                ++centroid_evals;
            }
            const auto nearest = *std::min_element(child_dists.begin(), child_dists.end());
            for (const auto& [d, child] : child_dists) {
                if (child != nearest.second)
                    queue.push({d, order++, child});
            }
            node = nearest.second;
        }
        for (const std::uint32_t point : tree.nodes[node].points) {
            if (checked >= checks)
                break;
            const auto [d, fresh] = meter.measure(store, point, q);
            if (fresh)
                ++checked;
            if (std::pair<double, std::uint32_t>{d, point} < best)
                best = {d, point};
        }
    }

    SearchOutcome out;
    out.results.emplace_back(best.second, best.first);
    out.dist_evals = meter.evaluations() + centroid_evals;
    return out;
}

} // namespace gvq
