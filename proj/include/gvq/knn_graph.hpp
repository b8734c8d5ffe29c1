#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gvq/core.hpp"
#include "gvq/parallel.hpp"

namespace gvq {

/// Anything GNNS can walk: node count, per-node degree, and neighbor lists
/// sorted by ascending distance.
template <class G>
concept NeighborGraph = requires(const G& g, std::uint32_t i) {
    { g.size() } -> std::convertible_to<std::uint32_t>;
    { g.degree() } -> std::convertible_to<std::uint32_t>;
    { g.neighbors(i) } -> std::convertible_to<std::span<const std::uint32_t>>;
};

/// Directed k-NN graph: node i links to its k nearest nodes, lists sorted by
/// ascending distance (ties by lower id). Distances are persisted alongside
/// the ids so the structure can be audited without the vectors.
class KnnGraph {
  public:
    KnnGraph() = default;

    std::uint32_t size() const { return n_; }    // node count
    std::uint32_t degree() const { return k_; }  // neighbors per node

    std::span<const std::uint32_t> neighbors(std::uint32_t i) const {
        return {ids_.data() + static_cast<std::size_t>(i) * k_, k_};
    }
    std::span<const float> neighbor_dists(std::uint32_t i) const {
        return {dists_.data() + static_cast<std::size_t>(i) * k_, k_};
    }

    bool operator==(const KnnGraph&) const = default;

    // Graph container: "GKG1", u32 k, u64 n, n rows of k * (u32 id, f32 dist).
    void save(const std::filesystem::path& path) const {
        detail::Writer w(path);
        w.magic("GKG1");
        w.u32(k_);
        w.u64(n_);
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            w.u32(ids_[i]);
            w.f32(dists_[i]);
        }
    }

    static KnnGraph load(const std::filesystem::path& path) {
        detail::Reader r(path);
        return load_from(r);
    }

    static KnnGraph load_from(detail::Reader& r) {
        r.magic("GKG1");
        KnnGraph g;
        g.k_ = r.u32();
        const std::uint64_t n = r.u64();
        if (n > std::numeric_limits<std::uint32_t>::max())
            throw FormatError("GKG1: node count exceeds supported range");
        g.n_ = static_cast<std::uint32_t>(n);
        if (g.k_ == 0 || (g.n_ > 0 && g.k_ >= g.n_))
            throw FormatError("GKG1: invalid degree");
        const std::size_t total = static_cast<std::size_t>(g.n_) * g.k_;
        g.ids_.resize(total);
        g.dists_.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            g.ids_[i] = r.u32();
            g.dists_[i] = r.f32();
        }
        for (std::uint32_t node = 0; node < g.n_; ++node) {
            auto ids = g.neighbors(node);
            auto ds = g.neighbor_dists(node);
            for (std::uint32_t j = 0; j < g.k_; ++j) {
                if (ids[j] >= g.n_ || ids[j] == node)
                    throw FormatError("GKG1: bad neighbor id");
                if (j > 0 && ds[j] < ds[j - 1])
                    throw FormatError("GKG1: neighbor distances not sorted");
            }
        }
        return g;
    }

    void save_to(detail::Writer& w) const { // embedded block form, same layout
        w.magic("GKG1");
        w.u32(k_);
        w.u64(n_);
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            w.u32(ids_[i]);
            w.f32(dists_[i]);
        }
    }

  private:
    std::uint32_t k_ = 0;
    std::uint32_t n_ = 0;
    std::vector<std::uint32_t> ids_;   // n*k, row-major
    std::vector<float> dists_;         // matching distances

    friend KnnGraph build_brute_force(const VectorStore&, std::uint32_t);
    friend class KnnGraphBuilder;
};

/// Incremental row-filling access for builders (vocabulary embeds one).
class KnnGraphBuilder {
  public:
    KnnGraphBuilder(std::uint32_t n, std::uint32_t k) {
        g_.n_ = n;
        g_.k_ = k;
        g_.ids_.resize(static_cast<std::size_t>(n) * k);
        g_.dists_.resize(static_cast<std::size_t>(n) * k);
    }
    void set_row(std::uint32_t node, std::span<const std::uint32_t> ids,
                 std::span<const float> dists) {
        std::copy(ids.begin(), ids.end(), g_.ids_.begin() + static_cast<std::size_t>(node) * g_.k_);
        std::copy(dists.begin(), dists.end(),
                  g_.dists_.begin() + static_cast<std::size_t>(node) * g_.k_);
    }
    KnnGraph finish() { return std::move(g_); }

  private:
    KnnGraph g_;
};

/// Exact k-NN graph by full pairwise scan, O(d n^2). Per-node rows are
/// independent and built in parallel; ties break toward the lower id.
inline KnnGraph build_brute_force(const VectorStore& store, std::uint32_t k) {
    const std::uint32_t n = store.size();
    if (n < 2)
        throw ParameterError("build_brute_force: need at least two vectors");
    if (k == 0 || k >= n)
        throw ParameterError("build_brute_force: require 1 <= k <= n-1");

    KnnGraphBuilder builder(n, k);
    parallel_for(0, n, [&](std::size_t i) {
        const std::uint32_t node = static_cast<std::uint32_t>(i);
        std::vector<std::pair<double, std::uint32_t>> row;
        row.reserve(n - 1);
        const std::span<const float> self = store[node];
        for (std::uint32_t j = 0; j < n; ++j) {
            if (j == node)
                continue;
            row.emplace_back(squared_l2(self.data(), store[j].data(), store.dim()), j);
        }
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        std::vector<std::uint32_t> ids(k);
        std::vector<float> dists(k);
        for (std::uint32_t j = 0; j < k; ++j) {
            ids[j] = row[j].second;
            dists[j] = static_cast<float>(std::sqrt(row[j].first));
        }
        builder.set_row(node, ids, dists);
    });
    return builder.finish();
}

/// Prefix view exposing only the first e neighbors per node: the runtime
/// E-NN graph, no copy.
class GraphView {
  public:
    GraphView(const KnnGraph& g, std::uint32_t e) : g_(&g), e_(e) {
        if (e == 0 || e > g.degree())
            throw ParameterError("truncate: require 1 <= e <= k");
    }

    std::uint32_t size() const { return g_->size(); }
    std::uint32_t degree() const { return e_; }
    std::span<const std::uint32_t> neighbors(std::uint32_t i) const {
        return g_->neighbors(i).first(e_);
    }
    std::span<const float> neighbor_dists(std::uint32_t i) const {
        return g_->neighbor_dists(i).first(e_);
    }
    const KnnGraph& base() const { return *g_; }

  private:
    const KnnGraph* g_;
    std::uint32_t e_;
};

inline GraphView truncate(const KnnGraph& g, std::uint32_t e) { return GraphView(g, e); }

static_assert(NeighborGraph<KnnGraph>);
static_assert(NeighborGraph<GraphView>);

} // namespace gvq
