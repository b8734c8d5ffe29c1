#include <catch2/catch_amalgamated.hpp>

#include "gvq/bench.hpp"

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

// Small shared world: a 400-word vocabulary and a short overlapping stream.
struct World {
    Vocabulary vocab;
    SequenceDataset dataset;
};

const World& world() {
    static const World w = [] {
        World out;
        KMeansConfig cfg;
        cfg.clusters = 400;
        cfg.max_iters = 10;
        cfg.seed = 5;
        out.vocab = build_vocabulary(random_store(1600, 16, 2), cfg, 40);
        SequenceConfig seq;
        seq.frames = 30;
        seq.frame_size = 40;
        seq.overlap = 0.3;
        seq.carry_sigma = 0.02;
        seq.anchor_sigma = 0.06;
        seq.seed = 9;
        out.dataset = generate(seq, &out.vocab.words);
        return out;
    }();
    return w;
}

nlohmann::ordered_json strip_timing(nlohmann::ordered_json j) {
    j.erase("timing_ms_total");
    for (auto& m : j.at("methods"))
        m.erase("timing_ms");
    return j;
}

} // namespace

TEST_CASE("measure_accuracy basics", "[bench]") {
    const std::vector<std::uint32_t> oracle{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(measure_accuracy(oracle, oracle) == 1.0);
    std::vector<std::uint32_t> wrong(10, 99);
    CHECK(measure_accuracy(wrong, oracle) == 0.0);
    std::vector<std::uint32_t> half = oracle;
    for (int i = 0; i < 5; ++i)
        half[i] = 99;
    CHECK(measure_accuracy(half, oracle) == 0.5);
    const std::vector<std::uint32_t> shorter{1, 2};
    CHECK_THROWS_AS(measure_accuracy(shorter, oracle), ContractError);
}

TEST_CASE("measure_speedup basics", "[bench]") {
    const std::uint32_t n = 5000;
    std::vector<std::uint64_t> linear_evals(20, n);
    CHECK(measure_speedup(linear_evals, n) == 1.0);
    std::vector<std::uint64_t> fast(20, n / 10);
    CHECK(measure_speedup(fast, n) == 10.0);
    CHECK_THROWS_AS(measure_speedup({}, n), ParameterError);
}

TEST_CASE("shared word fraction trivial cases", "[bench]") {
    std::vector<FrameLinks> links(2);
    links[1] = {{0, 0}, {1, 1}};
    std::vector<std::vector<std::uint32_t>> same{{4, 7}, {4, 7}};
    CHECK(shared_word_fraction(links, same) == 1.0);
    std::vector<std::vector<std::uint32_t>> diff{{4, 7}, {5, 8}};
    CHECK(shared_word_fraction(links, diff) == 0.0);
    std::vector<FrameLinks> none(2);
    CHECK_FALSE(shared_word_fraction(none, same).has_value());
}

TEST_CASE("linear method: speedup exactly one, self-consistent report", "[bench]") {
    const World& w = world();
    const BenchInput in = BenchInput::prepare(w.vocab, w.dataset, HintSource::Truth);
    MethodSpec spec;
    spec.method = Method::Linear;
    const std::vector<std::uint64_t> seeds{1};
    const MethodReport r = run_experiment(in, spec, seeds);
    CHECK(r.all.accuracy == 1.0);
    CHECK(r.all.speedup == 1.0);
    CHECK(r.all.mean_evals == static_cast<double>(w.vocab.words.size()));
    // report self-consistency: speedup * mean_evals = n within 0.1%
    CHECK(r.all.speedup * r.all.mean_evals ==
          Catch::Approx(static_cast<double>(w.vocab.words.size())).epsilon(0.001));
}

TEST_CASE("every method respects the memoization cap and self-consistency", "[bench]") {
    const World& w = world();
    const BenchInput in = BenchInput::prepare(w.vocab, w.dataset, HintSource::Truth);
    const std::vector<std::uint64_t> seeds{3};
    std::vector<MethodSpec> specs;
    {
        MethodSpec gnns;
        gnns.method = Method::Gnns;
        gnns.gnns.expansions = 20;
        specs.push_back(gnns);
        MethodSpec sgnns = gnns;
        sgnns.method = Method::Sgnns;
        specs.push_back(sgnns);
        MethodSpec kd;
        kd.method = Method::Kd;
        kd.kd = {2, 40};
        specs.push_back(kd);
        MethodSpec hkm;
        hkm.method = Method::Hkm;
        hkm.hkm = {8, 3, 40};
        specs.push_back(hkm);
    }
    const std::uint32_t n = w.vocab.words.size();
    for (const auto& spec : specs) {
        const auto run = run_method(in, spec, 3);
        for (const auto& frame : run)
            for (const auto& q : frame)
                if (spec.method != Method::Hkm) // hkm also charges internal centroids
                    CHECK(q.evals <= n);
        const MethodReport r = run_experiment(in, spec, seeds);
        CHECK(r.all.speedup * r.all.mean_evals ==
              Catch::Approx(static_cast<double>(n)).epsilon(0.001));
        CHECK(r.all.accuracy >= 0.0);
        CHECK(r.all.accuracy <= 1.0);
    }
}

TEST_CASE("sgnns equals gnns when hints are absent", "[bench]") {
    const World& w = world();
    const BenchInput in = BenchInput::prepare(w.vocab, w.dataset, HintSource::None);
    MethodSpec gnns;
    gnns.method = Method::Gnns;
    gnns.gnns.expansions = 15;
    MethodSpec sgnns = gnns;
    sgnns.method = Method::Sgnns;
    const auto a = run_method(in, gnns, 77);
    const auto b = run_method(in, sgnns, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].size(); ++i) {
            CHECK(a[t][i].word == b[t][i].word);
            CHECK(a[t][i].evals == b[t][i].evals);
            CHECK(a[t][i].hops == b[t][i].hops);
        }
    }
}

TEST_CASE("hinted sgnns beats gnns on evaluations at high overlap", "[bench]") {
    const World& w = world();
    // matched features hinted from truth links
    const BenchInput in = BenchInput::prepare(w.vocab, w.dataset, HintSource::Truth);
    MethodSpec gnns;
    gnns.method = Method::Gnns;
    gnns.gnns.expansions = 40;
    MethodSpec sgnns = gnns;
    sgnns.method = Method::Sgnns;
    const std::vector<std::uint64_t> seeds{5};
    const MethodReport rg = run_experiment(in, gnns, seeds);
    const MethodReport rs = run_experiment(in, sgnns, seeds);
    // the matched subset is where the warm start pays off
    CHECK(rs.matched.mean_evals < rg.matched.mean_evals);
    CHECK(rs.matched.speedup > rg.matched.speedup);
}

TEST_CASE("bench report JSON is deterministic apart from timing", "[bench]") {
    const World& w = world();
    BenchConfig cfg;
    MethodSpec gnns;
    gnns.method = Method::Gnns;
    gnns.gnns.expansions = 20;
    MethodSpec kd;
    kd.method = Method::Kd;
    kd.kd = {1, 30};
    cfg.methods = {kd, gnns};
    cfg.hint_source = HintSource::Truth;
    cfg.seeds = {11, 12};
    const BenchReport a = run_bench(w.vocab, w.dataset, cfg);
    const BenchReport b = run_bench(w.vocab, w.dataset, cfg);
    CHECK(strip_timing(report_to_json(a)).dump() == strip_timing(report_to_json(b)).dump());
    // and the table renders
    const std::string table = render_table(a);
    CHECK(table.find("KD") != std::string::npos);
    CHECK(table.find("GNNS") != std::string::npos);
}

TEST_CASE("sweep: accuracy grows with expansions, frontier sorted", "[bench]") {
    const World& w = world();
    const BenchInput in = BenchInput::prepare(w.vocab, w.dataset, HintSource::None);
    std::vector<MethodSpec> grid;
    for (const std::uint32_t e : {5u, 15u, 40u}) {
        MethodSpec spec;
        spec.method = Method::Gnns;
        spec.gnns.expansions = e;
        grid.push_back(spec);
    }
    const std::vector<std::uint64_t> seeds{21};
    const auto frontier = sweep(in, grid, seeds);
    REQUIRE(frontier.size() == 3);
    for (std::size_t i = 1; i < frontier.size(); ++i)
        CHECK(frontier[i].accuracy >= frontier[i - 1].accuracy);
    // monotone in expansions within binomial noise over >= 1000 queries
    const double queries = static_cast<double>(w.dataset.total_features());
    REQUIRE(queries >= 1000.0);
    const double sigma3 = 3.0 * std::sqrt(2.0 * 0.25 / queries);
    auto acc_of = [&](std::uint32_t e) {
        for (const auto& p : frontier)
            if (p.spec.gnns.expansions == e)
                return p.accuracy;
        FAIL("grid point missing");
        return 0.0;
    };
    CHECK(acc_of(15) >= acc_of(5) - sigma3);
    CHECK(acc_of(40) >= acc_of(15) - sigma3);
}

TEST_CASE("grid of one point equals run_experiment", "[bench]") {
    const World& w = world();
    const BenchInput in = BenchInput::prepare(w.vocab, w.dataset, HintSource::None);
    MethodSpec spec;
    spec.method = Method::Hkm;
    spec.hkm = {8, 3, 25};
    const std::vector<std::uint64_t> seeds{2};
    const auto frontier = sweep(in, std::vector<MethodSpec>{spec}, seeds);
    const MethodReport direct = run_experiment(in, spec, seeds);
    REQUIRE(frontier.size() == 1);
    CHECK(frontier[0].accuracy == direct.all.accuracy);
    CHECK(frontier[0].speedup == direct.all.speedup);
}

TEST_CASE("cross-method fairness: shared oracle and stream", "[bench]") {
    const World& w = world();
    const BenchInput a = BenchInput::prepare(w.vocab, w.dataset, HintSource::Truth);
    const BenchInput b = BenchInput::prepare(w.vocab, w.dataset, HintSource::Truth);
    CHECK(a.oracle == b.oracle);
    CHECK(a.total_queries == b.total_queries);
    CHECK(a.matched_queries == b.matched_queries);
}
