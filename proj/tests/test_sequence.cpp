#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "gvq/gnns.hpp"
#include "gvq/sequence.hpp"

using namespace gvq;

namespace {

VectorStore random_store(std::uint32_t n, std::uint32_t dim, std::uint64_t seed) {
    Rng rng(seed);
    VectorStore s(dim);
    s.reserve(n);
    std::vector<float> row(dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (auto& v : row)
            v = static_cast<float>(rng.uniform01());
        s.append(row);
    }
    return s;
}

} // namespace

TEST_CASE("overlap 0 produces no links", "[sequence]") {
    SequenceConfig cfg;
    cfg.frames = 5;
    cfg.frame_size = 20;
    cfg.overlap = 0.0;
    cfg.dim = 4;
    cfg.seed = 3;
    const SequenceDataset ds = generate(cfg);
    for (const auto& links : ds.truth_links)
        CHECK(links.empty());
}

TEST_CASE("overlap 1 with zero noise repeats frame 0 with identity links", "[sequence]") {
    SequenceConfig cfg;
    cfg.frames = 4;
    cfg.frame_size = 15;
    cfg.overlap = 1.0;
    cfg.carry_sigma = 0.0;
    cfg.dim = 6;
    cfg.seed = 8;
    const SequenceDataset ds = generate(cfg);
    for (std::uint32_t t = 1; t < cfg.frames; ++t) {
        CHECK(ds.frames[t] == ds.frames[0]);
        REQUIRE(ds.truth_links[t].size() == cfg.frame_size);
        for (std::uint32_t i = 0; i < cfg.frame_size; ++i) {
            CHECK(ds.truth_links[t][i].first == i);
            CHECK(ds.truth_links[t][i].second == i);
        }
    }
}

TEST_CASE("carried count matches the binomial expectation", "[sequence]") {
    // 316 features at p = 0.13: mean carried per frame near 41.1
    double total = 0.0;
    std::uint64_t frames = 0;
    for (const std::uint64_t seed : {11ull, 22ull, 33ull}) {
        SequenceConfig cfg;
        cfg.frames = 400;
        cfg.frame_size = 316;
        cfg.overlap = 0.13;
        cfg.carry_sigma = 0.01;
        cfg.dim = 8;
        cfg.seed = seed;
        const SequenceDataset ds = generate(cfg);
        for (std::uint32_t t = 1; t < cfg.frames; ++t) {
            total += static_cast<double>(ds.truth_links[t].size());
            ++frames;
        }
    }
    const double mean = total / static_cast<double>(frames);
    CHECK(mean == Catch::Approx(316.0 * 0.13).margin(2.0));
}

TEST_CASE("generation is deterministic and anchored to the vocabulary", "[sequence]") {
    const VectorStore words = random_store(50, 8, 5);
    SequenceConfig cfg;
    cfg.frames = 6;
    cfg.frame_size = 30;
    cfg.overlap = 0.4;
    cfg.carry_sigma = 0.02;
    cfg.anchor_sigma = 0.01;
    cfg.seed = 77;
    const SequenceDataset a = generate(cfg, &words);
    const SequenceDataset b = generate(cfg, &words);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
        CHECK(a.frames[t] == b.frames[t]);
        CHECK(a.truth_links[t] == b.truth_links[t]);
    }
    CHECK(a.dim() == words.dim());
}

TEST_CASE("config validation", "[sequence]") {
    SequenceConfig cfg;
    cfg.frames = 2;
    cfg.frame_size = 4;
    cfg.overlap = 1.5;
    cfg.dim = 2;
    CHECK_THROWS_AS(generate(cfg), ParameterError);
    cfg.overlap = 0.5;
    cfg.carry_sigma = -1.0;
    CHECK_THROWS_AS(generate(cfg), ParameterError);
    cfg.carry_sigma = 0.0;
    cfg.dim = 0;
    CHECK_THROWS_AS(generate(cfg), ParameterError); // no vocabulary, no dim
}

TEST_CASE("matching identical frames yields identity links", "[sequence]") {
    const VectorStore frame = random_store(40, 8, 9);
    const FrameLinks links = match_frames(frame, frame, 0.8);
    REQUIRE(links.size() == frame.size());
    for (const auto& [c, p] : links)
        CHECK(c == p);
}

TEST_CASE("ratio test rejects indistinguishable features", "[sequence]") {
    // every prev feature identical: first and second distances tie
    VectorStore prev(2);
    const std::vector<float> same{1.0f, 2.0f};
    for (int i = 0; i < 10; ++i)
        prev.append(same);
    const VectorStore curr = random_store(10, 2, 4);
    CHECK(match_frames(prev, curr, 0.8).empty());
}

TEST_CASE("matching recovers truth links under small noise", "[sequence]") {
    // descriptor-like dimensionality: the ratio test relies on non-matches
    // concentrating far away, which low-dimensional data does not give
    SequenceConfig cfg;
    cfg.frames = 100;
    cfg.frame_size = 60;
    cfg.overlap = 0.3;
    cfg.carry_sigma = 0.01;
    cfg.dim = 128;
    cfg.seed = 15;
    const SequenceDataset ds = generate(cfg);
    std::uint64_t truth_total = 0, recovered = 0, spurious = 0;
    for (std::uint32_t t = 1; t < cfg.frames; ++t) {
        const FrameLinks got = match_frames(ds.frames[t - 1], ds.frames[t], 0.8);
        std::set<std::pair<std::uint32_t, std::uint32_t>> truth(ds.truth_links[t].begin(),
                                                                ds.truth_links[t].end());
        truth_total += truth.size();
        for (const auto& link : got) {
            if (truth.contains(link))
                ++recovered;
            else
                ++spurious;
        }
    }
    CHECK(static_cast<double>(recovered) >= 0.95 * static_cast<double>(truth_total));
    CHECK(static_cast<double>(spurious) <=
          0.01 * static_cast<double>(recovered + spurious) + 1.0);
}

TEST_CASE("mutual-best pairs are symmetric under frame swap", "[sequence]") {
    // with ratio near 1 the filter reduces to mutual nearest neighbors,
    // which is symmetric by construction
    const VectorStore a = random_store(50, 6, 10);
    const VectorStore b = random_store(50, 6, 20);
    const FrameLinks ab = match_frames(a, b, 0.999999);
    const FrameLinks ba = match_frames(b, a, 0.999999);
    std::set<std::pair<std::uint32_t, std::uint32_t>> ab_set(ab.begin(), ab.end());
    std::set<std::pair<std::uint32_t, std::uint32_t>> ba_swapped;
    for (const auto& [c, p] : ba)
        ba_swapped.insert({p, c});
    CHECK(ab_set == ba_swapped);
}

TEST_CASE("empty previous frame yields no links", "[sequence]") {
    VectorStore prev(4);
    const VectorStore curr = random_store(5, 4, 2);
    CHECK(match_frames(prev, curr, 0.8).empty());
    CHECK_THROWS_AS(match_frames(curr, curr, 1.0), ParameterError);
}

TEST_CASE("hint propagation", "[sequence]") {
    std::vector<std::uint32_t> prev_words{7, 9, 13};

    SECTION("no links, no hints") {
        const auto hints = propagate_hints({}, prev_words, 4);
        for (const auto& h : hints)
            CHECK_FALSE(h.has_value());
    }
    SECTION("links carry the previous word") {
        FrameLinks links{{0, 2}, {3, 0}};
        const auto hints = propagate_hints(links, prev_words, 4);
        REQUIRE(hints[0].has_value());
        CHECK(*hints[0] == 13);
        CHECK_FALSE(hints[1].has_value());
        CHECK_FALSE(hints[2].has_value());
        REQUIRE(hints[3].has_value());
        CHECK(*hints[3] == 7);
    }
    SECTION("bad link indices are contract errors") {
        FrameLinks links{{9, 0}};
        CHECK_THROWS_AS(propagate_hints(links, prev_words, 4), ContractError);
    }
}

TEST_CASE("sgnns with zero carry noise proves local minimality in one expansion",
          "[sequence]") {
    const VectorStore words = random_store(400, 12, 3);
    const KnnGraph graph = build_brute_force(words, 20);
    SequenceConfig cfg;
    cfg.frames = 2;
    cfg.frame_size = 50;
    cfg.overlap = 1.0;
    cfg.carry_sigma = 0.0;
    cfg.anchor_sigma = 0.05;
    cfg.seed = 6;
    const SequenceDataset ds = generate(cfg, &words);

    GnnsParams params;
    params.expansions = 20;
    // quantize frame 0, propagate, and re-quantize the identical frame 1
    std::vector<std::uint32_t> frame0_words(cfg.frame_size);
    for (std::uint32_t i = 0; i < cfg.frame_size; ++i) {
        Rng rng = Rng(41).derive(i);
        frame0_words[i] =
            quantize(words, graph, ds.frames[0][i], std::nullopt, params, rng).word;
    }
    const auto hints = propagate_hints(ds.truth_links[1], frame0_words, cfg.frame_size);
    for (std::uint32_t i = 0; i < cfg.frame_size; ++i) {
        REQUIRE(hints[i].has_value());
        Rng rng = Rng(42).derive(i);
        const QuantizationResult qr =
            quantize(words, graph, ds.frames[1][i], hints[i], params, rng);
        CHECK(qr.word == *hints[i]);
        CHECK(qr.hops == 0);
        CHECK(qr.dist_evals <= params.expansions + 1);
    }
}

TEST_CASE("dataset directory round trip", "[sequence]") {
    const VectorStore words = random_store(30, 5, 50);
    SequenceConfig cfg;
    cfg.frames = 4;
    cfg.frame_size = 12;
    cfg.overlap = 0.5;
    cfg.carry_sigma = 0.02;
    cfg.seed = 12;
    const SequenceDataset ds = generate(cfg, &words);
    const auto dir = std::filesystem::temp_directory_path() / "gvq_seq_roundtrip";
    std::filesystem::remove_all(dir);
    ds.save(dir);
    const SequenceDataset loaded = SequenceDataset::load(dir);
    REQUIRE(loaded.frames.size() == ds.frames.size());
    for (std::size_t t = 0; t < ds.frames.size(); ++t) {
        CHECK(loaded.frames[t] == ds.frames[t]);
        CHECK(loaded.truth_links[t] == ds.truth_links[t]);
    }
    std::filesystem::remove_all(dir);
}
