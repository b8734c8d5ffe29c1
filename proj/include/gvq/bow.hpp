#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gvq/core.hpp"
#include "gvq/gnns.hpp"

namespace gvq {

/// Sparse visual-word histogram: (word id, weight) pairs with strictly
/// increasing ids, positive weights, and a cached L2 norm.
struct BowVector {
    std::vector<std::pair<std::uint32_t, double>> entries;
    double norm = 0.0;

    static double compute_norm(const std::vector<std::pair<std::uint32_t, double>>& e) {
        double sq = 0.0;
        for (const auto& [w, v] : e)
            sq += v * v;
        return std::sqrt(sq);
    }
};

template <class Q>
concept WordAssigner = requires(Q q, std::span<const float> f, std::optional<std::uint32_t> h) {
    { q(f, h) } -> std::convertible_to<QuantizationResult>;
};

/// Quantize an image's features into a term-frequency vector. tf is the word
/// count divided by the feature count, so vectors from images of different
/// sizes are comparable. Per-feature diagnostics are returned for the bench.
template <WordAssigner Q>
std::pair<BowVector, std::vector<QuantizationResult>>
quantize_image(const VectorStore& features, Q&& quantizer,
               std::span<const std::optional<std::uint32_t>> hints = {}) {
    if (!hints.empty() && hints.size() != features.size())
        throw ContractError("quantize_image: hints length mismatch");
    std::vector<QuantizationResult> per_feature;
    per_feature.reserve(features.size());
    std::map<std::uint32_t, std::uint32_t> counts;
    for (std::uint32_t i = 0; i < features.size(); ++i) {
        const std::optional<std::uint32_t> hint = hints.empty() ? std::nullopt : hints[i];
        const QuantizationResult qr = quantizer(features[i], hint);
        counts[qr.word] += 1;
        per_feature.push_back(qr);
    }
    BowVector v;
    v.entries.reserve(counts.size());
    for (const auto& [word, count] : counts)
        v.entries.emplace_back(word,
                               static_cast<double>(count) / static_cast<double>(features.size()));
    v.norm = BowVector::compute_norm(v.entries);
    return {std::move(v), std::move(per_feature)};
}

/// Per-word inverse document frequency: ln(doc_count / doc_freq), zero for
/// words never indexed.
struct IdfModel {
    std::vector<double> idf;

    double operator[](std::uint32_t word) const {
        return word < idf.size() ? idf[word] : 0.0;
    }
};

inline BowVector apply_idf(const BowVector& v, const IdfModel& model) {
    BowVector out;
    out.entries.reserve(v.entries.size());
    for (const auto& [word, tf] : v.entries) {
        const double w = tf * model[word];
        if (w > 0.0)
            out.entries.emplace_back(word, w);
    }
    out.norm = BowVector::compute_norm(out.entries);
    return out;
}

/// Word-to-image postings. Postings stay sorted by image id whatever the
/// insertion order, so query results are insertion-order independent.
/// Single writer, concurrent readers between mutations.
class InvertedIndex {
  public:
    void add(std::uint32_t image_id, const BowVector& v) {
        if (norms_.contains(image_id))
            throw ParameterError("InvertedIndex::add: duplicate image id");
        for (const auto& [word, weight] : v.entries) {
            if (word >= postings_.size())
                postings_.resize(word + 1);
            auto& list = postings_[word];
            const auto pos = std::lower_bound(
                list.begin(), list.end(), image_id,
                [](const auto& entry, std::uint32_t id) { return entry.first < id; });
            list.insert(pos, {image_id, weight});
        }
        norms_[image_id] = v.norm;
        ++doc_count_;
    }

    std::uint32_t doc_count() const { return doc_count_; }
    std::uint32_t doc_freq(std::uint32_t word) const {
        return word < postings_.size() ? static_cast<std::uint32_t>(postings_[word].size()) : 0;
    }
    std::span<const std::pair<std::uint32_t, double>> postings(std::uint32_t word) const {
        static const std::vector<std::pair<std::uint32_t, double>> empty;
        return word < postings_.size() ? std::span{postings_[word]} : std::span{empty};
    }

    IdfModel idf() const {
        IdfModel model;
        model.idf.resize(postings_.size(), 0.0);
        if (doc_count_ == 0)
            return model;
        for (std::uint32_t w = 0; w < postings_.size(); ++w) {
            const auto df = postings_[w].size();
            if (df > 0)
                model.idf[w] = std::log(static_cast<double>(doc_count_) /
                                        static_cast<double>(df));
        }
        return model;
    }

    /// Cosine-similarity retrieval touching only the postings of words
    /// present in the query. Ties rank the lower image id first.
    std::vector<std::pair<std::uint32_t, double>> query(const BowVector& v,
                                                        std::uint32_t topn) const {
        if (doc_count_ == 0)
            throw ParameterError("InvertedIndex::query: empty index");
        if (topn == 0 || v.entries.empty() || v.norm == 0.0)
            return {};
        std::unordered_map<std::uint32_t, double> dots;
        for (const auto& [word, qw] : v.entries) {
            for (const auto& [image, iw] : postings(word))
                dots[image] += qw * iw;
        }
        std::vector<std::pair<std::uint32_t, double>> scored;
        scored.reserve(dots.size());
        for (const auto& [image, dot] : dots) {
            const double norm = norms_.at(image);
            if (norm > 0.0)
                scored.emplace_back(image, dot / (v.norm * norm));
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second)
                return a.second > b.second;
            return a.first < b.first;
        });
        if (scored.size() > topn)
            scored.resize(topn);
        return scored;
    }

  private:
    std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
    std::unordered_map<std::uint32_t, double> norms_;
    std::uint32_t doc_count_ = 0;
};

inline void index_add(InvertedIndex& index, std::uint32_t image_id, const BowVector& v) {
    index.add(image_id, v);
}

inline std::vector<std::pair<std::uint32_t, double>>
query(const InvertedIndex& index, const BowVector& v, std::uint32_t topn) {
    return index.query(v, topn);
}

} // namespace gvq
