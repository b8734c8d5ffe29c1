#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gvq/baselines.hpp"
#include "gvq/bow.hpp"
#include "gvq/gnns.hpp"
#include "gvq/parallel.hpp"
#include "gvq/sequence.hpp"
#include "gvq/vocabulary.hpp"

namespace gvq {

enum class Method { Linear, Gnns, Sgnns, Kd, Hkm };
enum class HintSource { None, Truth, Ratio };
enum class FeatureSubset { All, MatchedOnly };

inline std::string method_name(Method m) {
    switch (m) {
    case Method::Linear: return "linear";
    case Method::Gnns: return "gnns";
    case Method::Sgnns: return "sgnns";
    case Method::Kd: return "kd";
    case Method::Hkm: return "hkm";
    }
    return "?";
}
inline std::optional<Method> parse_method(const std::string& s) {
    if (s == "linear") return Method::Linear;
    if (s == "gnns") return Method::Gnns;
    if (s == "sgnns") return Method::Sgnns;
    if (s == "kd") return Method::Kd;
    if (s == "hkm") return Method::Hkm;
    return std::nullopt;
}
inline std::string hint_source_name(HintSource h) {
    switch (h) {
    case HintSource::None: return "none";
    case HintSource::Truth: return "truth";
    case HintSource::Ratio: return "ratio";
    }
    return "?";
}
inline std::optional<HintSource> parse_hint_source(const std::string& s) {
    if (s == "none") return HintSource::None;
    if (s == "truth") return HintSource::Truth;
    if (s == "ratio") return HintSource::Ratio;
    return std::nullopt;
}

struct GnnsBenchParams {
    std::uint32_t expansions = 0; // 0: use the full graph degree
    std::uint32_t restarts = 1;
    std::optional<std::uint32_t> greedy_steps;
};
struct KdBenchParams {
    std::uint32_t trees = 1;
    std::uint32_t checks = 32;
};
struct HkmBenchParams {
    std::uint32_t branching = 8;
    std::uint32_t iterations = 3;
    std::uint32_t checks = 32;
};

/// One benchmarked search configuration. Only the block matching `method`
/// is meaningful.
struct MethodSpec {
    Method method = Method::Gnns;
    GnnsBenchParams gnns{};
    KdBenchParams kd{};
    HkmBenchParams hkm{};
};

/// Everything shared across methods for one evaluation: the query stream in
/// frame order, the linear-scan oracle, and the link structure that defines
/// hints and the matched-feature subset.
struct BenchInput {
    const Vocabulary* vocab = nullptr;
    const SequenceDataset* dataset = nullptr;
    HintSource hint_source = HintSource::None;
    double match_ratio = 0.8;
    std::vector<FrameLinks> links;                    // per frame
    std::vector<std::vector<std::uint32_t>> oracle;   // true word per feature
    std::vector<std::vector<bool>> matched;           // in the matched subset
    std::uint64_t total_queries = 0;
    std::uint64_t matched_queries = 0;

    static BenchInput prepare(const Vocabulary& vocab, const SequenceDataset& dataset,
                              HintSource hints, double match_ratio = 0.8);
};

namespace detail {

// Oracle assignment, independent of every search path: plain full scan over
// squared distances, first-lowest id on ties.
inline std::uint32_t exact_word(const VectorStore& words, std::span<const float> q) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_id = 0;
    for (std::uint32_t j = 0; j < words.size(); ++j) {
        const double d = squared_l2(words[j].data(), q.data(), q.size());
        if (d < best) {
            best = d;
            best_id = j;
        }
    }
    return best_id;
}

} // namespace detail

inline BenchInput BenchInput::prepare(const Vocabulary& vocab, const SequenceDataset& dataset,
                                      HintSource hints, double match_ratio) {
    if (dataset.frames.empty())
        throw ParameterError("bench: empty dataset");
    if (dataset.dim() != vocab.words.dim())
        throw ContractError("bench: dataset/vocabulary dimension mismatch");

    BenchInput in;
    in.vocab = &vocab;
    in.dataset = &dataset;
    in.hint_source = hints;
    in.match_ratio = match_ratio;

    const std::size_t frames = dataset.frames.size();
    if (hints == HintSource::Ratio) {
        in.links.resize(frames);
        for (std::size_t t = 1; t < frames; ++t)
            in.links[t] = match_frames(dataset.frames[t - 1], dataset.frames[t], match_ratio);
    } else {
        // Ground-truth links also define the matched subset for unhinted runs.
        in.links = dataset.truth_links;
        in.links.resize(frames);
    }

    in.oracle.resize(frames);
    in.matched.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const VectorStore& frame = dataset.frames[t];
        in.oracle[t].resize(frame.size());
        parallel_for(0, frame.size(), [&](std::size_t i) {
            in.oracle[t][i] =
                detail::exact_word(vocab.words, frame[static_cast<std::uint32_t>(i)]);
        });
        in.matched[t].assign(frame.size(), false);
        for (const auto& [c, p] : in.links[t])
            in.matched[t][c] = true;
        in.total_queries += frame.size();
    }
    for (std::size_t t = 0; t < frames; ++t)
        for (const bool m : in.matched[t])
            in.matched_queries += m ? 1 : 0;
    return in;
}

struct QueryStat {
    std::uint32_t word = kInvalidId;
    std::uint64_t evals = 0;
    std::uint32_t hops = 0;
};

/// Run one method over the whole stream; one QueryStat per feature in frame
/// order. Per-query randomness derives from (seed, global query index), so
/// results do not depend on execution order.
inline std::vector<std::vector<QueryStat>> run_method(const BenchInput& in,
                                                      const MethodSpec& spec,
                                                      std::uint64_t seed) {
    const Vocabulary& vocab = *in.vocab;
    const SequenceDataset& ds = *in.dataset;
    const std::uint32_t n = vocab.words.size();
    std::vector<std::vector<QueryStat>> stats(ds.frames.size());
    for (std::size_t t = 0; t < ds.frames.size(); ++t)
        stats[t].resize(ds.frames[t].size());

    const Rng root(seed);
    std::uint64_t global_base = 0;

    switch (spec.method) {
    case Method::Linear: {
        for (std::size_t t = 0; t < ds.frames.size(); ++t) {
            const VectorStore& frame = ds.frames[t];
            parallel_for(0, frame.size(), [&](std::size_t i) {
                const SearchOutcome out =
                    linear_nn(vocab.words, frame[static_cast<std::uint32_t>(i)]);
                stats[t][i] = {out.results[0].first, out.dist_evals, out.hops};
            });
        }
        break;
    }
    case Method::Kd: {
        const KdForest forest = kd_build(vocab.words, spec.kd.trees, seed);
        for (std::size_t t = 0; t < ds.frames.size(); ++t) {
            const VectorStore& frame = ds.frames[t];
            parallel_for(0, frame.size(), [&](std::size_t i) {
                const SearchOutcome out = kd_search(
                    forest, vocab.words, frame[static_cast<std::uint32_t>(i)], spec.kd.checks);
                stats[t][i] = {out.results[0].first, out.dist_evals, out.hops};
            });
        }
        break;
    }
    case Method::Hkm: {
        const HkmTree tree =
            hkm_build(vocab.words, spec.hkm.branching, spec.hkm.iterations, seed);
        for (std::size_t t = 0; t < ds.frames.size(); ++t) {
            const VectorStore& frame = ds.frames[t];
            parallel_for(0, frame.size(), [&](std::size_t i) {
                const SearchOutcome out = hkm_search(
                    tree, vocab.words, frame[static_cast<std::uint32_t>(i)], spec.hkm.checks);
                stats[t][i] = {out.results[0].first, out.dist_evals, out.hops};
            });
        }
        break;
    }
    case Method::Gnns:
    case Method::Sgnns: {
        GnnsParams params;
        params.expansions =
            spec.gnns.expansions == 0 ? vocab.graph.degree() : spec.gnns.expansions;
        params.restarts = spec.gnns.restarts;
        params.greedy_steps = spec.gnns.greedy_steps;
        const bool sequential = spec.method == Method::Sgnns;
        std::vector<std::uint32_t> prev_words;
        for (std::size_t t = 0; t < ds.frames.size(); ++t) {
            const VectorStore& frame = ds.frames[t];
            std::vector<std::optional<std::uint32_t>> hints;
            if (sequential && t > 0 && in.hint_source != HintSource::None)
                hints = propagate_hints(in.links[t], prev_words, frame.size());
            parallel_for(0, frame.size(), [&](std::size_t i) {
                Rng rng = root.derive(global_base + i);
                const std::optional<std::uint32_t> hint =
                    hints.empty() ? std::nullopt : hints[i];
                const QuantizationResult qr = quantize(
                    vocab.words, vocab.graph, frame[static_cast<std::uint32_t>(i)], hint,
                    params, rng);
                stats[t][i] = {qr.word, qr.dist_evals, qr.hops};
            });
            if (sequential) {
                prev_words.resize(frame.size());
                for (std::uint32_t i = 0; i < frame.size(); ++i)
                    prev_words[i] = stats[t][i].word;
            }
            global_base += frame.size();
        }
        break;
    }
    }
    return stats;
}

/// Fraction of queries whose returned word matches the oracle word.
inline double measure_accuracy(std::span<const std::uint32_t> results,
                               std::span<const std::uint32_t> oracle) {
    if (results.size() != oracle.size())
        throw ContractError("measure_accuracy: length mismatch");
    if (results.empty())
        throw ParameterError("measure_accuracy: no queries");
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < results.size(); ++i)
        hits += results[i] == oracle[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

/// Speedup over linear search: vocabulary size over mean distance
/// evaluations per query.
inline double measure_speedup(std::span<const std::uint64_t> evals, std::uint32_t n) {
    if (evals.empty())
        throw ParameterError("measure_speedup: no queries");
    std::uint64_t total = 0;
    for (const std::uint64_t e : evals)
        total += e;
    if (total == 0)
        throw ContractError("measure_speedup: zero evaluations recorded");
    return static_cast<double>(n) * static_cast<double>(evals.size()) /
           static_cast<double>(total);
}

/// Fraction of linked feature pairs assigned the same word; absent without
/// links.
inline std::optional<double>
shared_word_fraction(const std::vector<FrameLinks>& links,
                     const std::vector<std::vector<std::uint32_t>>& words_per_frame) {
    std::uint64_t pairs = 0, shared = 0;
    for (std::size_t t = 1; t < links.size() && t < words_per_frame.size(); ++t) {
        for (const auto& [c, p] : links[t]) {
            ++pairs;
            shared += words_per_frame[t][c] == words_per_frame[t - 1][p] ? 1 : 0;
        }
    }
    if (pairs == 0)
        return std::nullopt;
    return static_cast<double>(shared) / static_cast<double>(pairs);
}

inline constexpr std::uint32_t kEvalsHistBuckets = 20;
inline constexpr std::uint32_t kMaxHopBucket = 32;

struct SubsetStats {
    std::uint64_t queries = 0;
    std::uint64_t total_evals = 0;
    double accuracy = 0.0;
    double mean_evals = 0.0;
    double speedup = 0.0;
    std::vector<std::uint64_t> hops_hist;  // index = hop count, last bucket clamps
    std::vector<std::uint64_t> evals_hist; // linear buckets over [0, n]
};

struct MethodReport {
    MethodSpec spec;
    SubsetStats all;
    SubsetStats matched;
    std::optional<double> shared_words;
    double timing_ms = 0.0;
};

struct BenchReport {
    std::uint32_t vocab_words = 0;
    std::uint32_t dim = 0;
    std::uint32_t graph_k = 0;
    std::uint64_t frames = 0;
    std::uint64_t queries = 0;
    std::uint64_t matched_queries = 0;
    HintSource hint_source = HintSource::None;
    double match_ratio = 0.8;
    std::vector<std::uint64_t> seeds;
    std::vector<MethodReport> methods;
    double timing_ms_total = 0.0;
};

namespace detail {

inline void accumulate_subset(SubsetStats& s, const BenchInput& in,
                              const std::vector<std::vector<QueryStat>>& run, bool matched_only,
                              std::uint64_t& hits) {
    const std::uint32_t n = in.vocab->words.size();
    s.hops_hist.resize(kMaxHopBucket + 1, 0);
    s.evals_hist.resize(kEvalsHistBuckets, 0);
    for (std::size_t t = 0; t < run.size(); ++t) {
        for (std::size_t i = 0; i < run[t].size(); ++i) {
            if (matched_only && !in.matched[t][i])
                continue;
            const QueryStat& q = run[t][i];
            ++s.queries;
            s.total_evals += q.evals;
            hits += q.word == in.oracle[t][i] ? 1 : 0;
            s.hops_hist[std::min<std::uint32_t>(q.hops, kMaxHopBucket)] += 1;
            const std::uint64_t bucket =
                std::min<std::uint64_t>(kEvalsHistBuckets - 1,
                                        q.evals * kEvalsHistBuckets / std::max<std::uint32_t>(n, 1));
            s.evals_hist[bucket] += 1;
        }
    }
}

inline void finalize_subset(SubsetStats& s, std::uint64_t hits, std::uint32_t n) {
    if (s.queries == 0)
        return;
    s.accuracy = static_cast<double>(hits) / static_cast<double>(s.queries);
    s.mean_evals = static_cast<double>(s.total_evals) / static_cast<double>(s.queries);
    s.speedup = static_cast<double>(n) / s.mean_evals;
}

} // namespace detail

/// One method over the shared input, pooled across seeds.
inline MethodReport run_experiment(const BenchInput& in, const MethodSpec& spec,
                                   std::span<const std::uint64_t> seeds) {
    if (seeds.empty())
        throw ParameterError("run_experiment: need at least one seed");
    const auto t0 = std::chrono::steady_clock::now();
    MethodReport report;
    report.spec = spec;
    const std::uint32_t n = in.vocab->words.size();
    std::uint64_t hits_all = 0, hits_matched = 0;
    std::uint64_t shared_pairs = 0, shared_hits = 0;
    for (const std::uint64_t seed : seeds) {
        const auto run = run_method(in, spec, seed);
        detail::accumulate_subset(report.all, in, run, false, hits_all);
        detail::accumulate_subset(report.matched, in, run, true, hits_matched);
        std::vector<std::vector<std::uint32_t>> words(run.size());
        for (std::size_t t = 0; t < run.size(); ++t) {
            words[t].resize(run[t].size());
            for (std::size_t i = 0; i < run[t].size(); ++i)
                words[t][i] = run[t][i].word;
        }
        for (std::size_t t = 1; t < in.links.size(); ++t) {
            for (const auto& [c, p] : in.links[t]) {
                ++shared_pairs;
                shared_hits += words[t][c] == words[t - 1][p] ? 1 : 0;
            }
        }
    }
    detail::finalize_subset(report.all, hits_all, n);
    detail::finalize_subset(report.matched, hits_matched, n);
    if (shared_pairs > 0)
        report.shared_words =
            static_cast<double>(shared_hits) / static_cast<double>(shared_pairs);
    report.timing_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

struct BenchConfig {
    std::vector<MethodSpec> methods;
    HintSource hint_source = HintSource::Truth;
    double match_ratio = 0.8;
    std::vector<std::uint64_t> seeds = {1};
};

inline BenchReport run_bench(const Vocabulary& vocab, const SequenceDataset& dataset,
                             const BenchConfig& cfg) {
    if (cfg.methods.empty())
        throw ParameterError("run_bench: no methods configured");
    const auto t0 = std::chrono::steady_clock::now();
    const BenchInput in = BenchInput::prepare(vocab, dataset, cfg.hint_source, cfg.match_ratio);
    BenchReport report;
    report.vocab_words = vocab.words.size();
    report.dim = vocab.words.dim();
    report.graph_k = vocab.graph.degree();
    report.frames = dataset.frames.size();
    report.queries = in.total_queries;
    report.matched_queries = in.matched_queries;
    report.hint_source = cfg.hint_source;
    report.match_ratio = cfg.match_ratio;
    report.seeds = cfg.seeds;
    for (const MethodSpec& spec : cfg.methods)
        report.methods.push_back(run_experiment(in, spec, cfg.seeds));
    report.timing_ms_total =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Accuracy/speedup frontier over a parameter grid, sorted by accuracy.
struct SweepPoint {
    MethodSpec spec;
    double accuracy = 0.0;
    double speedup = 0.0;
};

inline std::vector<SweepPoint> sweep(const BenchInput& in,
                                     std::span<const MethodSpec> grid,
                                     std::span<const std::uint64_t> seeds,
                                     FeatureSubset subset = FeatureSubset::All) {
    std::vector<SweepPoint> frontier;
    frontier.reserve(grid.size());
    for (const MethodSpec& spec : grid) {
        const MethodReport r = run_experiment(in, spec, seeds);
        const SubsetStats& s = subset == FeatureSubset::All ? r.all : r.matched;
        frontier.push_back({spec, s.accuracy, s.speedup});
    }
    std::stable_sort(frontier.begin(), frontier.end(),
                     [](const SweepPoint& a, const SweepPoint& b) {
                         return a.accuracy < b.accuracy;
                     });
    return frontier;
}

// ---------------------------------------------------------------------------
// Report serialization. Everything except the timing fields is deterministic
// for a fixed config and seed set.

namespace detail {

inline nlohmann::ordered_json spec_to_json(const MethodSpec& spec) {
    nlohmann::ordered_json j;
    j["method"] = method_name(spec.method);
    switch (spec.method) {
    case Method::Gnns:
    case Method::Sgnns:
        j["expansions"] = spec.gnns.expansions;
        j["restarts"] = spec.gnns.restarts;
        if (spec.gnns.greedy_steps)
            j["greedy_steps"] = *spec.gnns.greedy_steps;
        break;
    case Method::Kd:
        j["trees"] = spec.kd.trees;
        j["checks"] = spec.kd.checks;
        break;
    case Method::Hkm:
        j["branching"] = spec.hkm.branching;
        j["iterations"] = spec.hkm.iterations;
        j["checks"] = spec.hkm.checks;
        break;
    case Method::Linear:
        break;
    }
    return j;
}

inline nlohmann::ordered_json subset_to_json(const SubsetStats& s) {
    nlohmann::ordered_json j;
    j["queries"] = s.queries;
    j["accuracy"] = s.accuracy;
    j["mean_evals"] = s.mean_evals;
    j["speedup"] = s.speedup;
    j["total_evals"] = s.total_evals;
    j["hops_hist"] = s.hops_hist;
    j["evals_hist"] = s.evals_hist;
    return j;
}

} // namespace detail

inline nlohmann::ordered_json report_to_json(const BenchReport& r) {
    nlohmann::ordered_json j;
    j["report_version"] = 1;
    j["vocabulary"] = {{"words", r.vocab_words}, {"dim", r.dim}, {"graph_k", r.graph_k}};
    j["dataset"] = {{"frames", r.frames},
                    {"queries", r.queries},
                    {"matched_queries", r.matched_queries}};
    j["hint_source"] = hint_source_name(r.hint_source);
    j["match_ratio"] = r.match_ratio;
    j["seeds"] = r.seeds;
    j["accuracy_averaging"] = "per-feature";
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const MethodReport& m : r.methods) {
        nlohmann::ordered_json jm;
        jm["params"] = detail::spec_to_json(m.spec);
        jm["all"] = detail::subset_to_json(m.all);
        jm["matched"] = detail::subset_to_json(m.matched);
        if (m.shared_words)
            jm["shared_word_fraction"] = *m.shared_words;
        jm["timing_ms"] = m.timing_ms;
        methods.push_back(std::move(jm));
    }
    j["methods"] = std::move(methods);
    j["timing_ms_total"] = r.timing_ms_total;
    return j;
}

/// Paper-style aligned table: one row per method, accuracy and speedup for
/// the all-features and matched-features columns.
inline std::string render_table(const BenchReport& r) {
    std::ostringstream out;
    auto label = [](Method m) -> std::string {
        switch (m) {
        case Method::Linear: return "Linear";
        case Method::Kd: return "KD";
        case Method::Hkm: return "HKM";
        case Method::Gnns: return "GNNS";
        case Method::Sgnns: return "SGNNS";
        }
        return "?";
    };
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %21s %21s\n", "",
                  "VQ of all features", "VQ of matched features");
    out << line;
    std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %10s\n", "Method", "Accuracy",
                  "Speedup", "Accuracy", "Speedup");
    out << line;
    for (const MethodReport& m : r.methods) {
        std::snprintf(line, sizeof(line), "%-8s %10.4f %10.4f %10.4f %10.4f\n",
                      label(m.spec.method).c_str(), m.all.accuracy, m.all.speedup,
                      m.matched.accuracy, m.matched.speedup);
        out << line;
    }
    return out.str();
}

} // namespace gvq
