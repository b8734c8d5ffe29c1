#pragma once

#include <cstdint>
#include <vector>

#include "gvq/core.hpp"
#include "gvq/kmeans.hpp"
#include "gvq/knn_graph.hpp"

namespace gvq {

struct VocabularyMeta {
    std::uint32_t clusters = 0;
    std::uint32_t dim = 0;
    std::uint32_t graph_k = 0;
    std::uint64_t seed = 0;
    double objective = 0.0;

    bool operator==(const VocabularyMeta&) const = default;
};

/// Visual vocabulary: the cluster centroids (words) plus the exact k-NN
/// graph over them that GNNS searches.
struct Vocabulary {
    VectorStore words;
    KnnGraph graph;
    VocabularyMeta meta;

    bool operator==(const Vocabulary&) const = default;
};

struct VocabularyBuildStats {
    std::uint64_t kmeans_dist_evals = 0;
    std::uint64_t graph_dist_evals = 0; // centroid-centroid, symmetric halves once
    std::uint32_t kmeans_iterations = 0;
};

namespace detail {

// Exact k-NN graph over the final centroids, each unordered pair evaluated
// once: n(n-1)/2 distance computations, charged to the clustering run's last
// iteration. Per-row bounded heaps keep the k smallest by (distance, id).
inline KnnGraph centroid_graph_symmetric(const VectorStore& words, std::uint32_t k,
                                         std::uint64_t& dist_evals) {
    const std::uint32_t n = words.size();
    using Entry = std::pair<double, std::uint32_t>;
    std::vector<std::vector<Entry>> heaps(n);
    for (auto& h : heaps)
        h.reserve(k + 1);

    auto offer = [&](std::uint32_t row, double dsq, std::uint32_t id) {
        auto& h = heaps[row];
        const Entry e{dsq, id};
        if (h.size() < k) {
            h.push_back(e);
            std::push_heap(h.begin(), h.end());
        } else if (e < h.front()) {
            std::pop_heap(h.begin(), h.end());
            h.back() = e;
            std::push_heap(h.begin(), h.end());
        }
    };

    const std::uint32_t d = words.dim();
    for (std::uint32_t i = 0; i < n; ++i) {
        const float* a = words[i].data();
        for (std::uint32_t j = i + 1; j < n; ++j) {
            const double dsq = squared_l2(a, words[j].data(), d);
            ++dist_evals;
            offer(i, dsq, j);
            offer(j, dsq, i);
        }
    }

    KnnGraphBuilder builder(n, k);
    std::vector<std::uint32_t> ids(k);
    std::vector<float> dists(k);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::sort(heaps[i].begin(), heaps[i].end());
        for (std::uint32_t j = 0; j < k; ++j) {
            ids[j] = heaps[i][j].second;
            dists[j] = static_cast<float>(std::sqrt(heaps[i][j].first));
        }
        builder.set_row(i, ids, dists);
    }
    return builder.finish();
}

} // namespace detail

/// k-means vocabulary with the k-NN graph extracted in the final iteration.
/// The emitted graph equals build_brute_force over the resulting centroids.
inline Vocabulary build_vocabulary(const VectorStore& train, const KMeansConfig& cfg,
                                   std::uint32_t graph_k,
                                   VocabularyBuildStats* stats = nullptr) {
    if (cfg.clusters < 2)
        throw ParameterError("build_vocabulary: need at least two clusters");
    if (graph_k == 0 || graph_k > cfg.clusters - 1)
        throw ParameterError("build_vocabulary: require 1 <= graph_k <= clusters-1");

    KMeansResult km = kmeans(train, cfg);
    std::uint64_t graph_evals = 0;
    KnnGraph graph = detail::centroid_graph_symmetric(km.centroids, graph_k, graph_evals);

    if (stats) {
        stats->kmeans_dist_evals = km.dist_evals;
        stats->graph_dist_evals = graph_evals;
        stats->kmeans_iterations = km.iterations;
    }

    Vocabulary vocab;
    vocab.meta = {cfg.clusters, train.dim(), graph_k, cfg.seed, km.objective};
    vocab.words = std::move(km.centroids);
    vocab.graph = std::move(graph);
    return vocab;
}

// Vocabulary container: "GVC1" header and meta, then an embedded GVQ1 words
// block and a GKG1 graph block.
inline void save_vocabulary(const Vocabulary& v, const std::filesystem::path& path) {
    detail::Writer w(path);
    w.magic("GVC1");
    w.u32(v.meta.clusters);
    w.u32(v.meta.dim);
    w.u32(v.meta.graph_k);
    w.u64(v.meta.seed);
    w.f64(v.meta.objective);
    w.magic("GVQ1");
    w.u32(v.words.dim());
    w.u64(v.words.size());
    w.f32_array(v.words.raw(), static_cast<std::size_t>(v.words.size()) * v.words.dim());
    v.graph.save_to(w);
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.magic("GVC1");
    Vocabulary v;
    v.meta.clusters = r.u32();
    v.meta.dim = r.u32();
    v.meta.graph_k = r.u32();
    v.meta.seed = r.u64();
    v.meta.objective = r.f64();

    r.magic("GVQ1");
    const std::uint32_t dim = r.u32();
    const std::uint64_t count = r.u64();
    if (dim == 0 || count > std::numeric_limits<std::uint32_t>::max())
        throw FormatError("GVC1: bad words block header");
    std::vector<float> data(static_cast<std::size_t>(count) * dim);
    r.f32_array(data.data(), data.size());
    v.words = VectorStore(dim, std::move(data));

    v.graph = KnnGraph::load_from(r);

    if (v.graph.size() != v.words.size())
        throw IntegrityError("GVC1: graph node count does not match word count");
    if (v.words.size() != v.meta.clusters || v.words.dim() != v.meta.dim ||
        v.graph.degree() != v.meta.graph_k)
        throw IntegrityError("GVC1: meta does not match embedded blocks");
    return v;
}

} // namespace gvq
