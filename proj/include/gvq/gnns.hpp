#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gvq/core.hpp"
#include "gvq/knn_graph.hpp"

namespace gvq {

/// Search budget for one GNNS query. greedy_steps absent means the walk runs
/// until it reaches a node no examined neighbor improves on (local-minimum
/// termination); present means exactly that many moves per restart.
struct GnnsParams {
    std::uint32_t num_results = 1;              // how many neighbors to return
    std::uint32_t restarts = 1;                 // independent walks per query
    std::optional<std::uint32_t> greedy_steps;  // fixed move budget, per walk
    std::uint32_t expansions = 1;               // neighbors examined per step, <= graph degree
    std::uint64_t seed = 0;
    bool record_trace = false;                  // keep the visited-node path (diagnostics)
};

struct SearchOutcome {
    std::vector<std::pair<std::uint32_t, double>> results; // (id, distance) ascending
    std::uint64_t dist_evals = 0;
    std::uint32_t hops = 0;             // greedy moves, summed over restarts
    std::uint32_t start_id = kInvalidId; // start of the first walk
    std::vector<std::uint32_t> trace;    // visited nodes in order, when recorded
};

/// One vector-quantized feature: the assigned word and the work it cost.
struct QuantizationResult {
    std::uint32_t word = kInvalidId;
    double distance = 0.0;
    std::uint64_t dist_evals = 0;
    std::uint32_t hops = 0;
};

/// Hill-climbing nearest-neighbor search on a k-NN graph. Each step
/// evaluates the first `expansions` neighbors of the current node and moves
/// to the closest; every evaluated node joins the candidate pool, and the
/// best `num_results` of the pool are returned. The first restart begins at
/// `start` when given, all others at a uniformly random node.
template <NeighborGraph G>
SearchOutcome search(const G& graph, const VectorStore& store, std::span<const float> q,
                     const GnnsParams& params, std::optional<std::uint32_t> start, Rng& rng) {
    const std::uint32_t n = graph.size();
    if (n == 0)
        throw ParameterError("gnns::search: empty graph");
    if (store.size() != n)
        throw ContractError("gnns::search: store/graph size mismatch");
    if (params.expansions == 0 || params.expansions > graph.degree())
        throw ParameterError("gnns::search: require 1 <= expansions <= graph degree");
    if (params.num_results == 0 || params.restarts == 0)
        throw ParameterError("gnns::search: num_results and restarts must be positive");
    if (params.greedy_steps && *params.greedy_steps == 0)
        throw ParameterError("gnns::search: greedy_steps must be positive when set");
    if (start && *start >= n)
        throw ParameterError("gnns::search: start id out of range");

    DistanceMeter meter;
    meter.begin_query();
    SearchOutcome out;
    std::vector<std::pair<double, std::uint32_t>> pool; // (distance, id), unique ids

    auto evaluate = [&](std::uint32_t id) {
        const auto [d, fresh] = meter.measure(store, id, q);
        if (fresh)
            pool.emplace_back(d, id);
        return d;
    };

    // Best of the first `expansions` neighbors, ties to the lower id.
    auto best_neighbor = [&](std::uint32_t node) {
        std::pair<double, std::uint32_t> best{std::numeric_limits<double>::infinity(),
                                              kInvalidId};
        const auto nbrs = graph.neighbors(node).first(params.expansions);
        for (const std::uint32_t id : nbrs) {
            const std::pair<double, std::uint32_t> cand{evaluate(id), id};
            if (cand < best)
                best = cand;
        }
        return best;
    };

    for (std::uint32_t r = 0; r < params.restarts; ++r) {
        std::uint32_t cur = (r == 0 && start) ? *start : uniform_node(rng, n);
        if (r == 0)
            out.start_id = cur;
        if (params.record_trace)
            out.trace.push_back(cur);
        double cur_dist = evaluate(cur);

        if (params.greedy_steps) {
            for (std::uint32_t t = 0; t < *params.greedy_steps; ++t) {
                const auto [d, id] = best_neighbor(cur);
                cur = id;
                cur_dist = d;
                ++out.hops;
                if (params.record_trace)
                    out.trace.push_back(cur);
            }
        } else {
            for (;;) {
                const auto [d, id] = best_neighbor(cur);
                if (d < cur_dist) {
                    cur = id;
                    cur_dist = d;
                    ++out.hops;
                    if (params.record_trace)
                        out.trace.push_back(cur);
                } else {
                    break; // no examined neighbor strictly closer: local minimum
                }
            }
        }
    }

    std::sort(pool.begin(), pool.end());
    const std::uint32_t take =
        std::min<std::uint32_t>(params.num_results, static_cast<std::uint32_t>(pool.size()));
    out.results.reserve(take);
    for (std::uint32_t i = 0; i < take; ++i)
        out.results.emplace_back(pool[i].second, pool[i].first);
    out.dist_evals = meter.evaluations();
    return out;
}

template <NeighborGraph G>
SearchOutcome search(const G& graph, const VectorStore& store, std::span<const float> q,
                     const GnnsParams& params, std::optional<std::uint32_t> start = {}) {
    Rng rng(params.seed);
    return search(graph, store, q, params, start, rng);
}

/// Assign one feature to its visual word (a num_results=1 search). A hint
/// warm-starts the walk from the previous frame's word with a single
/// restart; without one the start is random.
template <NeighborGraph G>
QuantizationResult quantize(const VectorStore& words, const G& graph, std::span<const float> q,
                            std::optional<std::uint32_t> hint, GnnsParams params, Rng& rng) {
    params.num_results = 1;
    if (hint)
        params.restarts = 1;
    const SearchOutcome out = search(graph, words, q, params, hint, rng);
    return {out.results[0].first, out.results[0].second, out.dist_evals, out.hops};
}

} // namespace gvq
