#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gvq/core.hpp"

namespace gvq {

using FrameLinks = std::vector<std::pair<std::uint32_t, std::uint32_t>>; // (curr, prev)

/// Generator settings for a temporally coherent frame stream. Each frame
/// carries a Binomial(frame_size, overlap) subset of the previous frame's
/// features with per-component Gaussian noise; the rest are fresh draws from
/// the world model (noisy copies of vocabulary words plus a uniform
/// background fraction).
struct SequenceConfig {
    std::uint32_t frames = 1;
    std::uint32_t frame_size = 316;
    double overlap = 0.0;        // p: expected carried fraction
    double carry_sigma = 0.0;    // noise on carried features
    double anchor_fraction = 0.7; // fresh features anchored near words
    double anchor_sigma = 0.05;   // spread around the anchor word
    std::uint32_t dim = 0;        // required when no vocabulary is given
    std::uint64_t seed = 0;
};

struct SequenceDataset {
    std::vector<VectorStore> frames;
    std::vector<FrameLinks> truth_links; // per frame; frame 0 has none

    std::uint32_t dim() const { return frames.empty() ? 0 : frames.front().dim(); }
    std::uint64_t total_features() const {
        std::uint64_t n = 0;
        for (const auto& f : frames)
            n += f.size();
        return n;
    }

    void save(const std::filesystem::path& dir) const;
    static SequenceDataset load(const std::filesystem::path& dir);
};

namespace detail {

class WorldModel {
  public:
    WorldModel(const SequenceConfig& cfg, const VectorStore* vocab) : cfg_(cfg), vocab_(vocab) {
        if (vocab_ && !vocab_->empty()) {
            dim_ = vocab_->dim();
            lo_.assign(dim_, std::numeric_limits<float>::infinity());
            hi_.assign(dim_, -std::numeric_limits<float>::infinity());
            for (std::uint32_t i = 0; i < vocab_->size(); ++i) {
                const float* p = (*vocab_)[i].data();
                for (std::uint32_t j = 0; j < dim_; ++j) {
                    lo_[j] = std::min(lo_[j], p[j]);
                    hi_[j] = std::max(hi_[j], p[j]);
                }
            }
        } else {
            vocab_ = nullptr;
            if (cfg.dim == 0)
                throw ParameterError("sequence: dim required when no vocabulary is given");
            dim_ = cfg.dim;
            lo_.assign(dim_, 0.0f);
            hi_.assign(dim_, 1.0f);
        }
    }

    std::uint32_t dim() const { return dim_; }

    void fresh(Rng& rng, std::vector<float>& out) const {
        out.resize(dim_);
        if (vocab_ && rng.uniform01() < cfg_.anchor_fraction) {
            const std::uint32_t w = uniform_node(rng, vocab_->size());
            const float* word = (*vocab_)[w].data();
            for (std::uint32_t j = 0; j < dim_; ++j)
                out[j] = word[j] + static_cast<float>(cfg_.anchor_sigma * rng.gaussian());
        } else {
            for (std::uint32_t j = 0; j < dim_; ++j)
                out[j] = lo_[j] + static_cast<float>(rng.uniform01()) * (hi_[j] - lo_[j]);
        }
    }

  private:
    const SequenceConfig& cfg_;
    const VectorStore* vocab_;
    std::uint32_t dim_ = 0;
    std::vector<float> lo_, hi_;
};

} // namespace detail

/// Deterministic synthetic sequence with ground-truth correspondence links.
inline SequenceDataset generate(const SequenceConfig& cfg, const VectorStore* vocab = nullptr) {
    if (cfg.frames == 0 || cfg.frame_size == 0)
        throw ParameterError("sequence: frames and frame_size must be positive");
    if (cfg.overlap < 0.0 || cfg.overlap > 1.0)
        throw ParameterError("sequence: overlap must be in [0, 1]");
    if (cfg.carry_sigma < 0.0 || cfg.anchor_sigma < 0.0)
        throw ParameterError("sequence: sigma must be non-negative");
    if (cfg.anchor_fraction < 0.0 || cfg.anchor_fraction > 1.0)
        throw ParameterError("sequence: anchor_fraction must be in [0, 1]");

    detail::WorldModel world(cfg, vocab);
    Rng rng(cfg.seed);
    SequenceDataset ds;
    ds.frames.reserve(cfg.frames);
    ds.truth_links.resize(cfg.frames);

    std::vector<float> scratch;
    for (std::uint32_t t = 0; t < cfg.frames; ++t) {
        VectorStore frame(world.dim());
        frame.reserve(cfg.frame_size);
        if (t > 0) {
            const VectorStore& prev = ds.frames[t - 1];
            // Carried features first, in previous-frame order: with overlap 1
            // and zero noise the frame repeats exactly and links are identity.
            for (std::uint32_t i = 0; i < prev.size() && frame.size() < cfg.frame_size; ++i) {
                if (rng.uniform01() >= cfg.overlap)
                    continue;
                const float* p = prev[i].data();
                scratch.resize(world.dim());
                for (std::uint32_t j = 0; j < world.dim(); ++j)
                    scratch[j] = p[j] + static_cast<float>(cfg.carry_sigma * rng.gaussian());
                ds.truth_links[t].emplace_back(frame.size(), i);
                frame.append(scratch);
            }
        }
        while (frame.size() < cfg.frame_size) {
            world.fresh(rng, scratch);
            frame.append(scratch);
        }
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

/// Distance-ratio matching between consecutive frames with a mutual-best
/// filter. These evaluations model keyframe detection work and are never
/// charged to quantization meters.
inline FrameLinks match_frames(const VectorStore& prev, const VectorStore& curr, double ratio) {
    if (ratio <= 0.0 || ratio >= 1.0)
        throw ParameterError("match_frames: ratio must be in (0, 1)");
    FrameLinks links;
    if (prev.empty() || curr.empty())
        return links;
    if (prev.dim() != curr.dim())
        throw ContractError("match_frames: frame dimension mismatch");
    const std::uint32_t d = prev.dim();

    // Nearest prev feature for each curr feature (plus the runner-up for the
    // ratio test) and nearest curr feature for each prev feature.
    std::vector<std::uint32_t> best_in_prev(curr.size());
    std::vector<bool> passes_ratio(curr.size());
    std::vector<std::uint32_t> best_in_curr(prev.size(), kInvalidId);
    std::vector<double> best_in_curr_d(prev.size(), std::numeric_limits<double>::infinity());

    for (std::uint32_t c = 0; c < curr.size(); ++c) {
        const float* fc = curr[c].data();
        double d1 = std::numeric_limits<double>::infinity();
        double d2 = std::numeric_limits<double>::infinity();
        std::uint32_t n1 = kInvalidId;
        for (std::uint32_t p = 0; p < prev.size(); ++p) {
            const double dsq = squared_l2(fc, prev[p].data(), d);
            if (dsq < d1) {
                d2 = d1;
                d1 = dsq;
                n1 = p;
            } else if (dsq < d2) {
                d2 = dsq;
            }
            if (dsq < best_in_curr_d[p]) {
                best_in_curr_d[p] = dsq;
                best_in_curr[p] = c;
            }
        }
        best_in_prev[c] = n1;
        // squared form of d1/d2 < ratio; a zero runner-up distance cannot be
        // disambiguated and fails the test
        passes_ratio[c] = d2 == std::numeric_limits<double>::infinity()
                              ? true
                              : (d2 > 0.0 && d1 < ratio * ratio * d2);
    }

    for (std::uint32_t c = 0; c < curr.size(); ++c) {
        const std::uint32_t p = best_in_prev[c];
        if (passes_ratio[c] && best_in_curr[p] == c)
            links.emplace_back(c, p);
    }
    return links;
}

/// Carry each linked feature's previous word forward as the warm-start hint.
inline std::vector<std::optional<std::uint32_t>>
propagate_hints(const FrameLinks& links, std::span<const std::uint32_t> prev_words,
                std::uint32_t curr_size) {
    std::vector<std::optional<std::uint32_t>> hints(curr_size);
    for (const auto& [c, p] : links) {
        if (c >= curr_size || p >= prev_words.size())
            throw ContractError("propagate_hints: link index out of range");
        hints[c] = prev_words[p];
    }
    return hints;
}

// ---------------------------------------------------------------------------
// On-disk form: one GVQ1 block per frame plus a JSON sidecar with the links.

inline void SequenceDataset::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json sidecar;
    sidecar["format"] = "gvq-sequence";
    sidecar["version"] = 1;
    sidecar["dim"] = dim();
    nlohmann::ordered_json frame_names = nlohmann::ordered_json::array();
    for (std::uint32_t t = 0; t < frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05u.gvq", t);
        frames[t].save(dir / name);
        frame_names.push_back(name);
    }
    sidecar["frames"] = std::move(frame_names);
    nlohmann::ordered_json links = nlohmann::ordered_json::array();
    for (const auto& frame_links : truth_links) {
        nlohmann::ordered_json one = nlohmann::ordered_json::array();
        for (const auto& [c, p] : frame_links)
            one.push_back({c, p});
        links.push_back(std::move(one));
    }
    sidecar["truth_links"] = std::move(links);
    std::ofstream out(dir / "dataset.json");
    if (!out)
        throw IoError("cannot write dataset sidecar in " + dir.string());
    out << sidecar.dump(2) << '\n';
}

inline SequenceDataset SequenceDataset::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in)
        throw IoError("cannot open dataset sidecar in " + dir.string());
    nlohmann::json sidecar;
    try {
        in >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset sidecar: ") + e.what());
    }
    if (sidecar.value("format", "") != "gvq-sequence" || sidecar.value("version", 0) != 1)
        throw FormatError("dataset sidecar: unknown format or version");

    SequenceDataset ds;
    for (const auto& name : sidecar.at("frames"))
        ds.frames.push_back(VectorStore::load(dir / name.get<std::string>()));
    for (const auto& frame_links : sidecar.at("truth_links")) {
        FrameLinks links;
        for (const auto& pair : frame_links)
            links.emplace_back(pair.at(0).get<std::uint32_t>(), pair.at(1).get<std::uint32_t>());
        ds.truth_links.push_back(std::move(links));
    }
    if (ds.truth_links.size() != ds.frames.size())
        throw IntegrityError("dataset sidecar: link table does not match frame count");
    for (std::size_t t = 0; t < ds.frames.size(); ++t) {
        for (const auto& [c, p] : ds.truth_links[t]) {
            if (t == 0 || c >= ds.frames[t].size() || p >= ds.frames[t - 1].size())
                throw IntegrityError("dataset sidecar: link index out of range");
        }
    }
    return ds;
}

} // namespace gvq
