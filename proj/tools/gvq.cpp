// gvq: build vocabularies, generate sequential datasets, quantize features,
// and reproduce the speedup-at-fixed-accuracy benchmark tables.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gvq/gvq.hpp"

namespace {

using nlohmann::ordered_json;

std::vector<std::uint32_t> parse_u32_list(const std::string& csv) {
    std::vector<std::uint32_t> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string tok = csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!tok.empty())
            out.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

int cmd_build_vocab(const std::string& train_path, std::uint32_t clusters,
                    std::uint32_t graph_k, std::uint64_t seed, std::uint32_t max_iters,
                    double tol, const std::string& out_path) {
    const gvq::VectorStore train = gvq::VectorStore::load(train_path);
    gvq::KMeansConfig cfg;
    cfg.clusters = clusters;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    cfg.seed = seed;
    gvq::VocabularyBuildStats stats;
    const gvq::Vocabulary vocab = gvq::build_vocabulary(train, cfg, graph_k, &stats);
    gvq::save_vocabulary(vocab, out_path);
    std::cout << "vocabulary: " << vocab.words.size() << " words, dim " << vocab.words.dim()
              << ", graph k " << vocab.graph.degree() << "\n"
              << "k-means: " << stats.kmeans_iterations << " iterations, objective "
              << vocab.meta.objective << ", " << stats.kmeans_dist_evals << " distance evals\n"
              << "graph: " << stats.graph_dist_evals
              << " extra centroid-centroid distance evals in the final iteration\n"
              << "wrote " << out_path << "\n";
    return 0;
}

int cmd_gen_seq(const gvq::SequenceConfig& cfg, const std::string& vocab_path,
                const std::string& out_dir) {
    std::optional<gvq::Vocabulary> vocab;
    if (!vocab_path.empty())
        vocab = gvq::load_vocabulary(vocab_path);
    const gvq::SequenceDataset ds = gvq::generate(cfg, vocab ? &vocab->words : nullptr);
    ds.save(out_dir);
    std::uint64_t linked = 0;
    for (const auto& links : ds.truth_links)
        linked += links.size();
    std::cout << "dataset: " << ds.frames.size() << " frames x " << cfg.frame_size
              << " features, dim " << ds.dim() << ", " << linked << " truth links\n"
              << "wrote " << out_dir << "\n";
    return 0;
}

// Shared method-parameter flags for quantize/bench/sweep.
struct MethodFlags {
    std::uint32_t expansions = 0;
    std::uint32_t restarts = 1;
    std::uint32_t greedy_steps = 0; // 0: local-minimum termination
    std::uint32_t kd_trees = 1;
    std::uint32_t kd_checks = 200;
    std::uint32_t hkm_branching = 8;
    std::uint32_t hkm_iterations = 3;
    std::uint32_t hkm_checks = 40;

    void add_to(CLI::App* app) {
        app->add_option("--expansions", expansions,
                        "GNNS expansions per step (default: graph degree)");
        app->add_option("--restarts", restarts, "GNNS random restarts");
        app->add_option("--greedy-steps", greedy_steps,
                        "GNNS fixed greedy moves (0 = stop at local minimum)");
        app->add_option("--kd-trees", kd_trees, "KD forest size");
        app->add_option("--kd-checks", kd_checks, "KD leaf-point budget");
        app->add_option("--hkm-branching", hkm_branching, "HKM branching factor");
        app->add_option("--hkm-iterations", hkm_iterations, "HKM k-means iterations per split");
        app->add_option("--hkm-checks", hkm_checks, "HKM leaf-point budget");
    }

    gvq::MethodSpec spec(gvq::Method m) const {
        gvq::MethodSpec s;
        s.method = m;
        s.gnns.expansions = expansions;
        s.gnns.restarts = restarts;
        if (greedy_steps > 0)
            s.gnns.greedy_steps = greedy_steps;
        s.kd = {kd_trees, kd_checks};
        s.hkm = {hkm_branching, hkm_iterations, hkm_checks};
        return s;
    }
};

int cmd_quantize(const std::string& vocab_path, const std::string& features_path,
                 const std::string& method_name, const MethodFlags& flags,
                 const std::string& hint_source_name, double match_ratio, std::uint64_t seed,
                 const std::string& out_path) {
    const auto method = gvq::parse_method(method_name);
    if (!method)
        throw gvq::ParameterError("unknown method: " + method_name);
    const auto hint_source = gvq::parse_hint_source(hint_source_name);
    if (!hint_source)
        throw gvq::ParameterError("unknown hint source: " + hint_source_name);
    const gvq::Vocabulary vocab = gvq::load_vocabulary(vocab_path);

    gvq::SequenceDataset ds;
    if (std::filesystem::is_directory(features_path)) {
        ds = gvq::SequenceDataset::load(features_path);
    } else {
        ds.frames.push_back(gvq::VectorStore::load(features_path));
        ds.truth_links.resize(1);
    }

    const gvq::BenchInput input = gvq::BenchInput::prepare(vocab, ds, *hint_source, match_ratio);
    const auto run = gvq::run_method(input, flags.spec(*method), seed);

    std::ofstream out(out_path);
    if (!out)
        throw gvq::IoError("cannot write " + out_path);
    for (std::size_t t = 0; t < run.size(); ++t) {
        std::map<std::uint32_t, std::uint32_t> counts;
        std::uint64_t evals = 0;
        for (const auto& q : run[t]) {
            counts[q.word] += 1;
            evals += q.evals;
        }
        ordered_json rec;
        rec["image_id"] = t;
        ordered_json words = ordered_json::array();
        for (const auto& [word, count] : counts)
            words.push_back({word, static_cast<double>(count) /
                                       static_cast<double>(run[t].size())});
        rec["words"] = std::move(words);
        rec["evals_total"] = evals;
        rec["evals_per_feature"] =
            static_cast<double>(evals) / static_cast<double>(run[t].size());
        out << rec.dump() << '\n';
    }
    std::cout << "quantized " << run.size() << " image(s) with " << method_name << ", wrote "
              << out_path << "\n";
    return 0;
}

gvq::BenchConfig make_bench_config(const std::string& methods_csv, const MethodFlags& flags,
                                   const std::string& hint_source_name, double match_ratio,
                                   const std::vector<std::uint64_t>& seeds) {
    const auto hint_source = gvq::parse_hint_source(hint_source_name);
    if (!hint_source)
        throw gvq::ParameterError("unknown hint source: " + hint_source_name);
    gvq::BenchConfig cfg;
    cfg.hint_source = *hint_source;
    cfg.match_ratio = match_ratio;
    if (!seeds.empty())
        cfg.seeds = seeds;
    std::size_t pos = 0;
    while (pos <= methods_csv.size()) {
        const std::size_t comma = methods_csv.find(',', pos);
        const std::string tok =
            methods_csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!tok.empty()) {
            const auto method = gvq::parse_method(tok);
            if (!method)
                throw gvq::ParameterError("unknown method: " + tok);
            cfg.methods.push_back(flags.spec(*method));
        }
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (cfg.methods.empty())
        throw gvq::ParameterError("no methods given");
    return cfg;
}

int cmd_bench(const std::string& vocab_path, const std::string& dataset_path,
              const gvq::BenchConfig& cfg, const std::string& out_path,
              const std::string& table_path) {
    const gvq::Vocabulary vocab = gvq::load_vocabulary(vocab_path);
    const gvq::SequenceDataset ds = gvq::SequenceDataset::load(dataset_path);
    const gvq::BenchReport report = gvq::run_bench(vocab, ds, cfg);
    const ordered_json j = gvq::report_to_json(report);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out)
            throw gvq::IoError("cannot write " + out_path);
        out << j.dump(2) << '\n';
    }
    const std::string table = gvq::render_table(report);
    if (table_path.empty() || table_path == "-") {
        std::cout << table;
    } else {
        std::ofstream out(table_path);
        if (!out)
            throw gvq::IoError("cannot write " + table_path);
        out << table;
    }
    if (!out_path.empty())
        std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& vocab_path, const std::string& dataset_path,
              const std::string& method_name, const MethodFlags& flags,
              const std::string& grid_csv, const std::string& hint_source_name,
              double match_ratio, const std::vector<std::uint64_t>& seeds,
              const std::string& subset_name, const std::string& out_path) {
    const auto method = gvq::parse_method(method_name);
    if (!method)
        throw gvq::ParameterError("unknown method: " + method_name);
    const auto hint_source = gvq::parse_hint_source(hint_source_name);
    if (!hint_source)
        throw gvq::ParameterError("unknown hint source: " + hint_source_name);
    gvq::FeatureSubset subset;
    if (subset_name == "all")
        subset = gvq::FeatureSubset::All;
    else if (subset_name == "matched")
        subset = gvq::FeatureSubset::MatchedOnly;
    else
        throw gvq::ParameterError("unknown subset: " + subset_name);

    const std::vector<std::uint32_t> grid_values = parse_u32_list(grid_csv);
    if (grid_values.empty())
        throw gvq::ParameterError("empty sweep grid");

    std::vector<gvq::MethodSpec> grid;
    for (const std::uint32_t v : grid_values) {
        gvq::MethodSpec spec = flags.spec(*method);
        switch (*method) {
        case gvq::Method::Gnns:
        case gvq::Method::Sgnns:
            spec.gnns.expansions = v;
            break;
        case gvq::Method::Kd:
            spec.kd.checks = v;
            break;
        case gvq::Method::Hkm:
            spec.hkm.checks = v;
            break;
        case gvq::Method::Linear:
            throw gvq::ParameterError("linear search has nothing to sweep");
        }
        grid.push_back(spec);
    }

    const gvq::Vocabulary vocab = gvq::load_vocabulary(vocab_path);
    const gvq::SequenceDataset ds = gvq::SequenceDataset::load(dataset_path);
    const gvq::BenchInput input =
        gvq::BenchInput::prepare(vocab, ds, *hint_source, match_ratio);
    std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector<std::uint64_t>{1} : seeds;
    const auto frontier = gvq::sweep(input, grid, seed_list, subset);

    ordered_json j;
    j["report_version"] = 1;
    j["method"] = method_name;
    j["subset"] = subset_name;
    ordered_json points = ordered_json::array();
    for (const auto& p : frontier) {
        ordered_json jp;
        jp["params"] = gvq::detail::spec_to_json(p.spec);
        jp["accuracy"] = p.accuracy;
        jp["speedup"] = p.speedup;
        points.push_back(std::move(jp));
    }
    j["frontier"] = std::move(points);
    if (out_path.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        std::ofstream out(out_path);
        if (!out)
            throw gvq::IoError("cannot write " + out_path);
        out << j.dump(2) << '\n';
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in)
        throw gvq::IoError("cannot open " + in_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw gvq::FormatError(std::string("report: ") + e.what());
    }
    if (j.value("report_version", 0) != 1)
        throw gvq::FormatError("report: unsupported report_version");

    std::ostringstream table;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %21s %21s\n", "", "VQ of all features",
                  "VQ of matched features");
    table << line;
    std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %10s\n", "Method", "Accuracy",
                  "Speedup", "Accuracy", "Speedup");
    table << line;
    for (const auto& m : j.at("methods")) {
        std::string name = m.at("params").at("method").get<std::string>();
        for (auto& ch : name)
            ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        std::snprintf(line, sizeof(line), "%-8s %10.4f %10.4f %10.4f %10.4f\n", name.c_str(),
                      m.at("all").at("accuracy").get<double>(),
                      m.at("all").at("speedup").get<double>(),
                      m.at("matched").at("accuracy").get<double>(),
                      m.at("matched").at("speedup").get<double>());
        table << line;
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << table.str();
    } else {
        std::ofstream out(out_path);
        if (!out)
            throw gvq::IoError("cannot write " + out_path);
        out << table.str();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-based vector quantization toolkit"};
    app.require_subcommand(1);
    app.footer("Set GVQ_THREADS to cap worker threads.");

    // build-vocab
    auto* build = app.add_subcommand("build-vocab",
                                     "k-means vocabulary with embedded k-NN graph");
    std::string train_path, vocab_out;
    std::uint32_t clusters = 0, graph_k = 0, max_iters = 100;
    double tol = 1e-4;
    std::uint64_t seed = 1;
    build->add_option("--train", train_path, "training vectors (GVQ1)")->required();
    build->add_option("--clusters", clusters, "vocabulary size C")->required();
    build->add_option("--graph-k", graph_k, "k-NN graph degree")->required();
    build->add_option("--seed", seed, "clustering seed");
    build->add_option("--max-iters", max_iters, "k-means iteration budget");
    build->add_option("--tol", tol, "relative objective-decrease stop threshold");
    build->add_option("--out", vocab_out, "output vocabulary (GVC1)")->required();

    // gen-seq
    auto* gen = app.add_subcommand("gen-seq", "synthetic sequential dataset");
    gvq::SequenceConfig seq_cfg;
    std::string gen_vocab, gen_out;
    gen->add_option("--frames", seq_cfg.frames, "number of frames")->required();
    gen->add_option("--size", seq_cfg.frame_size, "features per frame")->required();
    gen->add_option("--overlap", seq_cfg.overlap, "carried-feature fraction p")->required();
    gen->add_option("--sigma", seq_cfg.carry_sigma, "noise on carried features")->required();
    gen->add_option("--vocab", gen_vocab, "vocabulary anchoring fresh features (GVC1)");
    gen->add_option("--dim", seq_cfg.dim, "feature dimension (when no vocabulary)");
    gen->add_option("--anchor-fraction", seq_cfg.anchor_fraction,
                    "fresh features anchored near words");
    gen->add_option("--anchor-sigma", seq_cfg.anchor_sigma, "spread around anchor words");
    gen->add_option("--seed", seq_cfg.seed, "generator seed");
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    // quantize
    auto* quant = app.add_subcommand("quantize", "assign features to visual words");
    std::string q_vocab, q_features, q_method = "gnns", q_hints = "none", q_out;
    double q_ratio = 0.8;
    std::uint64_t q_seed = 1;
    MethodFlags q_flags;
    quant->add_option("--vocab", q_vocab, "vocabulary (GVC1)")->required();
    quant->add_option("--features", q_features, "GVQ1 file (one image) or dataset directory")
        ->required();
    quant->add_option("--method", q_method, "linear|gnns|sgnns|kd|hkm");
    quant->add_option("--hint-source", q_hints, "none|truth|ratio (sgnns)");
    quant->add_option("--match-ratio", q_ratio, "distance-ratio test threshold");
    quant->add_option("--seed", q_seed, "method seed");
    q_flags.add_to(quant);
    quant->add_option("--out", q_out, "output JSONL")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "paper-style method comparison table");
    std::string b_vocab, b_dataset, b_methods = "kd,hkm,gnns,sgnns", b_hints = "truth";
    std::string b_out, b_table;
    double b_ratio = 0.8;
    std::vector<std::uint64_t> b_seeds;
    MethodFlags b_flags;
    bench->add_option("--vocab", b_vocab, "vocabulary (GVC1)")->required();
    bench->add_option("--dataset", b_dataset, "dataset directory")->required();
    bench->add_option("--methods", b_methods, "comma list of methods");
    bench->add_option("--hint-source", b_hints, "none|truth|ratio");
    bench->add_option("--match-ratio", b_ratio, "distance-ratio test threshold");
    bench->add_option("--seed", b_seeds, "method seed(s)");
    b_flags.add_to(bench);
    bench->add_option("--out", b_out, "report JSON path");
    bench->add_option("--table", b_table, "table path ('-' for stdout)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "accuracy/speedup frontier over a grid");
    std::string s_vocab, s_dataset, s_method, s_grid, s_hints = "truth", s_subset = "all", s_out;
    double s_ratio = 0.8;
    std::vector<std::uint64_t> s_seeds;
    MethodFlags s_flags;
    sw->add_option("--vocab", s_vocab, "vocabulary (GVC1)")->required();
    sw->add_option("--dataset", s_dataset, "dataset directory")->required();
    sw->add_option("--method", s_method, "gnns|sgnns|kd|hkm")->required();
    sw->add_option("--grid", s_grid,
                   "comma list: expansions (gnns/sgnns) or checks (kd/hkm)")
        ->required();
    sw->add_option("--hint-source", s_hints, "none|truth|ratio");
    sw->add_option("--match-ratio", s_ratio, "distance-ratio test threshold");
    sw->add_option("--seed", s_seeds, "method seed(s)");
    sw->add_option("--subset", s_subset, "all|matched");
    s_flags.add_to(sw);
    sw->add_option("--out", s_out, "frontier JSON path (default stdout)");

    // report
    auto* rep = app.add_subcommand("report", "render a report JSON as a table");
    std::string r_in, r_out;
    rep->add_option("--in", r_in, "report JSON")->required();
    rep->add_option("--out", r_out, "table path ('-' for stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed())
            return cmd_build_vocab(train_path, clusters, graph_k, seed, max_iters, tol,
                                   vocab_out);
        if (gen->parsed())
            return cmd_gen_seq(seq_cfg, gen_vocab, gen_out);
        if (quant->parsed())
            return cmd_quantize(q_vocab, q_features, q_method, q_flags, q_hints, q_ratio,
                                q_seed, q_out);
        if (bench->parsed())
            return cmd_bench(b_vocab, b_dataset,
                             make_bench_config(b_methods, b_flags, b_hints, b_ratio, b_seeds),
                             b_out, b_table);
        if (sw->parsed())
            return cmd_sweep(s_vocab, s_dataset, s_method, s_flags, s_grid, s_hints, s_ratio,
                             s_seeds, s_subset, s_out);
        if (rep->parsed())
            return cmd_report(r_in, r_out);
    } catch (const gvq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
