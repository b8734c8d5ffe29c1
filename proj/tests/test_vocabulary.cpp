#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gvq/vocabulary.hpp"

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

TEST_CASE("kmeans separates two 1-d blobs", "[vocabulary]") {
    VectorStore s(1, {0.0f, 0.1f, 10.0f, 10.1f});
    KMeansConfig cfg;
    cfg.clusters = 2;
    cfg.seed = 5;
    const KMeansResult r = kmeans(s, cfg);
    std::vector<float> centers{r.centroids[0][0], r.centroids[1][0]};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == Catch::Approx(0.05).margin(1e-6));
    CHECK(centers[1] == Catch::Approx(10.05).margin(1e-6));
    CHECK(r.assignments[0] == r.assignments[1]);
    CHECK(r.assignments[2] == r.assignments[3]);
    CHECK(r.assignments[0] != r.assignments[2]);
}

TEST_CASE("kmeans with C = n puts every point in its own cluster", "[vocabulary]") {
    const VectorStore s = random_store(20, 4, 9);
    KMeansConfig cfg;
    cfg.clusters = 20;
    cfg.seed = 3;
    const KMeansResult r = kmeans(s, cfg);
    CHECK(r.objective == 0.0);
    std::vector<bool> used(20, false);
    for (const std::uint32_t a : r.assignments) {
        CHECK_FALSE(used[a]);
        used[a] = true;
    }
}

TEST_CASE("kmeans with one cluster returns the global mean", "[vocabulary]") {
    const VectorStore s = random_store(50, 3, 13);
    KMeansConfig cfg;
    cfg.clusters = 1;
    cfg.seed = 1;
    const KMeansResult r = kmeans(s, cfg);
    for (std::uint32_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::uint32_t i = 0; i < s.size(); ++i)
            mean += s[i][j];
        mean /= s.size();
        CHECK(r.centroids[0][j] == Catch::Approx(mean).margin(1e-5));
    }
}

TEST_CASE("kmeans objective is non-increasing and assignments reach a fixed point",
          "[vocabulary]") {
    const VectorStore s = random_store(300, 8, 21);
    KMeansConfig cfg;
    cfg.clusters = 12;
    cfg.seed = 8;
    const KMeansResult r = kmeans(s, cfg);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] * (1.0 + 1e-12));

    // reassigning against the returned centroids changes nothing
    for (std::uint32_t i = 0; i < s.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_id = 0;
        for (std::uint32_t c = 0; c < r.centroids.size(); ++c) {
            const double d = squared_l2(s[i], r.centroids[c]);
            if (d < best) {
                best = d;
                best_id = c;
            }
        }
        CHECK(best_id == r.assignments[i]);
    }
}

TEST_CASE("kmeans parameter errors", "[vocabulary]") {
    const VectorStore s = random_store(10, 2, 2);
    KMeansConfig cfg;
    cfg.clusters = 11;
    CHECK_THROWS_AS(kmeans(s, cfg), ParameterError);
    cfg.clusters = 0;
    CHECK_THROWS_AS(kmeans(s, cfg), ParameterError);
}

TEST_CASE("embedded graph equals the brute-force graph", "[vocabulary]") {
    const VectorStore train = random_store(600, 16, 55);
    KMeansConfig cfg;
    cfg.clusters = 150;
    cfg.seed = 42;
    VocabularyBuildStats stats;
    const Vocabulary vocab = build_vocabulary(train, cfg, 12, &stats);
    const KnnGraph oracle = build_brute_force(vocab.words, 12);
    CHECK(vocab.graph == oracle);
    // symmetric pass: each unordered centroid pair evaluated exactly once
    CHECK(stats.graph_dist_evals == 150ull * 149ull / 2);
    CHECK(vocab.meta.clusters == 150);
    CHECK(vocab.meta.graph_k == 12);
}

TEST_CASE("embedded graph on three collinear centroids", "[vocabulary]") {
    // training points in three tight 1-d blobs at 0, 1, 3
    VectorStore s(1, {-0.01f, 0.01f, 0.99f, 1.01f, 2.99f, 3.01f});
    KMeansConfig cfg;
    cfg.clusters = 3;
    cfg.seed = 1; // converges to the three blobs (some seeds hit a merge/split optimum)
    const Vocabulary vocab = build_vocabulary(s, cfg, 1);
    // identify centroid ids by position
    std::vector<std::pair<float, std::uint32_t>> order;
    for (std::uint32_t c = 0; c < 3; ++c)
        order.emplace_back(vocab.words[c][0], c);
    std::sort(order.begin(), order.end());
    const std::uint32_t at0 = order[0].second, at1 = order[1].second, at3 = order[2].second;
    CHECK(vocab.graph.neighbors(at0)[0] == at1);
    CHECK(vocab.graph.neighbors(at1)[0] == at0);
    CHECK(vocab.graph.neighbors(at3)[0] == at1);
}

TEST_CASE("build_vocabulary parameter errors", "[vocabulary]") {
    const VectorStore train = random_store(50, 4, 3);
    KMeansConfig cfg;
    cfg.clusters = 10;
    CHECK_THROWS_AS(build_vocabulary(train, cfg, 10), ParameterError); // k > C-1
    CHECK_THROWS_AS(build_vocabulary(train, cfg, 0), ParameterError);
}

TEST_CASE("vocabulary file round trip is bit exact", "[vocabulary]") {
    const VectorStore train = random_store(200, 8, 67);
    KMeansConfig cfg;
    cfg.clusters = 40;
    cfg.seed = 19;
    const Vocabulary vocab = build_vocabulary(train, cfg, 6);
    const auto path = std::filesystem::temp_directory_path() / "gvq_vocab_roundtrip.gvc";
    save_vocabulary(vocab, path);
    const Vocabulary loaded = load_vocabulary(path);
    CHECK(loaded == vocab);

    SECTION("corrupt header") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(1);
        f.write("!", 1);
        f.close();
        CHECK_THROWS_AS(load_vocabulary(path), FormatError);
    }
    SECTION("meta/block mismatch is an integrity error") {
        // bump the stored cluster count in the meta block
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const std::uint32_t wrong = 41;
        f.write(reinterpret_cast<const char*>(&wrong), 4);
        f.close();
        CHECK_THROWS_AS(load_vocabulary(path), IntegrityError);
    }
    std::filesystem::remove(path);
}
