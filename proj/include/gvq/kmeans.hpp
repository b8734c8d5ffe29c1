#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "gvq/core.hpp"
#include "gvq/parallel.hpp"

namespace gvq {

struct KMeansConfig {
    std::uint32_t clusters = 0;
    std::uint32_t max_iters = 100;
    double tol = 1e-4; // relative objective-decrease stopping threshold
    std::uint64_t seed = 0;
};

struct KMeansResult {
    VectorStore centroids;
    std::vector<std::uint32_t> assignments;
    double objective = 0.0;                  // sum of squared distances, final
    std::vector<double> objective_history;   // one entry per assignment pass
    std::uint32_t iterations = 0;
    std::uint64_t dist_evals = 0;
};

namespace detail {

struct Assignment {
    std::vector<std::uint32_t> labels;
    std::vector<double> best_sq; // squared distance to assigned centroid
    double objective = 0.0;
};

inline Assignment assign_points(const VectorStore& points, const VectorStore& centroids,
                                std::uint64_t& dist_evals) {
    const std::uint32_t n = points.size();
    const std::uint32_t c = centroids.size();
    Assignment out;
    out.labels.resize(n);
    out.best_sq.resize(n);
    parallel_for(0, n, [&](std::size_t i) {
        const float* p = points[static_cast<std::uint32_t>(i)].data();
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_id = 0;
        for (std::uint32_t j = 0; j < c; ++j) {
            const double d = squared_l2(p, centroids[j].data(), points.dim());
            if (d < best) { // ties keep the lower centroid id
                best = d;
                best_id = j;
            }
        }
        out.labels[i] = best_id;
        out.best_sq[i] = best;
    });
    dist_evals += static_cast<std::uint64_t>(n) * c;
    double obj = 0.0;
    for (std::uint32_t i = 0; i < n; ++i)
        obj += out.best_sq[i];
    out.objective = obj;
    return out;
}

inline VectorStore kmeanspp_seed(const VectorStore& points, std::uint32_t c, Rng& rng,
                                 std::uint64_t& dist_evals) {
    const std::uint32_t n = points.size();
    const std::uint32_t d = points.dim();
    VectorStore centroids(d);
    centroids.reserve(c);
    std::vector<bool> chosen(n, false);

    const std::uint32_t first = uniform_node(rng, n);
    centroids.append(points[first]);
    chosen[first] = true;

    std::vector<double> min_sq(n);
    for (std::uint32_t i = 0; i < n; ++i)
        min_sq[i] = squared_l2(points[i].data(), points[first].data(), d);
    dist_evals += n;

    for (std::uint32_t round = 1; round < c; ++round) {
        double total = 0.0;
        for (double v : min_sq)
            total += v;
        std::uint32_t pick = kInvalidId;
        if (total > 0.0) {
            const double r = rng.uniform01() * total;
            double acc = 0.0;
            for (std::uint32_t i = 0; i < n; ++i) {
                acc += min_sq[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == kInvalidId) { // r landed on the tail of rounding error
                for (std::uint32_t i = n; i-- > 0;) {
                    if (min_sq[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        }
        if (pick == kInvalidId) { // all residuals zero: duplicate-heavy data
            for (std::uint32_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.append(points[pick]);
        chosen[pick] = true;
        const std::uint32_t cid = centroids.size() - 1;
        for (std::uint32_t i = 0; i < n; ++i) {
            const double dsq = squared_l2(points[i].data(), points[cid].data(), d);
            if (dsq < min_sq[i])
                min_sq[i] = dsq;
        }
        dist_evals += n;
    }
    return centroids;
}

// Lloyd update. Empty clusters are reseeded from the point currently farthest
// from its assigned centroid (distinct point per empty cluster, ties to the
// lower point id). Reseeding never raises the assignment objective: the moved
// centroid has no members.
inline VectorStore update_centroids(const VectorStore& points, const Assignment& a,
                                    const VectorStore& prev) {
    const std::uint32_t n = points.size();
    const std::uint32_t c = prev.size();
    const std::uint32_t d = points.dim();
    std::vector<double> sums(static_cast<std::size_t>(c) * d, 0.0);
    std::vector<std::uint32_t> counts(c, 0);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t label = a.labels[i];
        const float* p = points[i].data();
        double* s = sums.data() + static_cast<std::size_t>(label) * d;
        for (std::uint32_t j = 0; j < d; ++j)
            s[j] += p[j];
        ++counts[label];
    }

    VectorStore next(d);
    next.reserve(c);
    std::vector<float> row(d);
    std::vector<bool> used_for_reseed(n, false);
    for (std::uint32_t cid = 0; cid < c; ++cid) {
        if (counts[cid] > 0) {
            const double* s = sums.data() + static_cast<std::size_t>(cid) * d;
            for (std::uint32_t j = 0; j < d; ++j)
                row[j] = static_cast<float>(s[j] / counts[cid]);
            next.append(row);
        } else {
            std::uint32_t far_id = kInvalidId;
            double far_sq = -1.0;
            for (std::uint32_t i = 0; i < n; ++i) {
                if (!used_for_reseed[i] && a.best_sq[i] > far_sq) {
                    far_sq = a.best_sq[i];
                    far_id = i;
                }
            }
            used_for_reseed[far_id] = true;
            next.append(points[far_id]);
        }
    }
    return next;
}

inline bool has_empty_cluster(const Assignment& a, std::uint32_t c) {
    std::vector<bool> seen(c, false);
    for (std::uint32_t label : a.labels)
        seen[label] = true;
    for (std::uint32_t cid = 0; cid < c; ++cid)
        if (!seen[cid])
            return true;
    return false;
}

} // namespace detail

/// Lloyd k-means with k-means++ seeding. Deterministic given the seed.
/// Stops when the relative objective decrease falls below tol (with no empty
/// clusters) or at max_iters; a bounded number of extra rounds then clears
/// any remaining empty clusters.
inline KMeansResult kmeans(const VectorStore& train, const KMeansConfig& cfg) {
    const std::uint32_t n = train.size();
    if (n == 0)
        throw ParameterError("kmeans: empty training set");
    if (cfg.clusters == 0 || cfg.clusters > n)
        throw ParameterError("kmeans: require 1 <= clusters <= n");
    if (cfg.max_iters == 0)
        throw ParameterError("kmeans: max_iters must be positive");
    if (cfg.tol < 0.0)
        throw ParameterError("kmeans: tol must be non-negative");

    KMeansResult out;
    Rng rng(cfg.seed);
    VectorStore centroids = detail::kmeanspp_seed(train, cfg.clusters, rng, out.dist_evals);
    detail::Assignment cur = detail::assign_points(train, centroids, out.dist_evals);
    out.objective_history.push_back(cur.objective);

    for (std::uint32_t iter = 1; iter <= cfg.max_iters; ++iter) {
        out.iterations = iter;
        centroids = detail::update_centroids(train, cur, centroids);
        detail::Assignment next = detail::assign_points(train, centroids, out.dist_evals);
        out.objective_history.push_back(next.objective);
        const double decrease = cur.objective - next.objective;
        const bool converged =
            cur.objective <= 0.0 || decrease <= cfg.tol * cur.objective;
        cur = std::move(next);
        if (converged && !detail::has_empty_cluster(cur, cfg.clusters))
            break;
    }

    // Converged or out of budget; make sure no cluster is left empty.
    for (std::uint32_t guard = 0;
         guard < cfg.clusters && detail::has_empty_cluster(cur, cfg.clusters); ++guard) {
        centroids = detail::update_centroids(train, cur, centroids);
        cur = detail::assign_points(train, centroids, out.dist_evals);
        out.objective_history.push_back(cur.objective);
        ++out.iterations;
    }

    out.centroids = std::move(centroids);
    out.assignments = std::move(cur.labels);
    out.objective = cur.objective;
    return out;
}

} // namespace gvq
