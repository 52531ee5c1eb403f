// Command-line front end: generate | draw | train | eval | bench.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coregd/coregd.hpp"

namespace fs = std::filesystem;
using namespace coregd;

namespace {

struct GenerateArgs {
    std::string kind = "delaunay";
    int n = 50;
    int n_min = 0;
    int n_max = 0;
    int rows = 0;
    int cols = 0;
    int count = 1;
    std::string out;
};

struct DrawArgs {
    std::string graph;
    std::string method = "model";
    std::string checkpoint;
    std::string config;
    std::string out;
    std::string svg;
    int sgd_iterations = 60;
    int pivots = 50;
};

struct TrainArgs {
    std::string config;
    std::string out;
    std::string log;
};

struct EvalArgs {
    std::string data;
    std::string checkpoint;
    bool baselines = true;
    int sgd_iterations = 60;
    int pivots = 50;
};

struct BenchArgs {
    std::vector<int> sizes{1000, 2000, 4000};
    std::string checkpoint;
    int rounds = 0;
    int repeats = 5;
    bool hierarchy = true;
};

std::unique_ptr<Model> load_or_init(const std::string& checkpoint, const std::string& config, std::uint64_t seed) {
    if (!checkpoint.empty()) return load_checkpoint(checkpoint);
    EngineConfig cfg;
    if (!config.empty()) cfg = parse_run_config(read_text_file(config)).engine;
    return std::make_unique<Model>(cfg, seed);
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text_file(path, text);
}

int run_generate(const GenerateArgs& a, std::uint64_t seed) {
    if (a.count < 1) throw InputError("--count must be >= 1");
    GenerateParams p;
    p.kind = parse_graph_kind(a.kind);
    p.rows = a.rows;
    p.cols = a.cols;
    const bool ranged = a.n_min > 0 && a.n_max > 0;
    if (ranged && a.n_min > a.n_max) throw InputError("--n-min exceeds --n-max");
    Rng rng(derive_seed(seed, 77));
    if (a.count > 1 || fs::is_directory(a.out)) fs::create_directories(a.out);
    for (int i = 0; i < a.count; ++i) {
        p.n = ranged ? a.n_min + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(a.n_max - a.n_min + 1)))
                     : a.n;
        Graph g = generate(p, derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::string text = write_edge_list(g);
        if (a.count == 1 && !fs::is_directory(a.out)) {
            write_or_print(a.out, text);
        } else {
            char name[32];
            std::snprintf(name, sizeof name, "graph_%05d.txt", i);
            write_text_file(fs::path(a.out) / name, text);
        }
    }
    return 0;
}

Layout draw_with(const std::string& method, const Graph& g, const DistanceMatrix& dist, const Model* model,
                 std::uint64_t seed, int sgd_iterations, int pivots) {
    if (method == "model") return core_gd_forward(g, *model, seed);
    if (method == "sgd") {
        SgdSchedule s;
        s.iterations = sgd_iterations;
        return stress_sgd(g, dist, s, seed);
    }
    if (method == "pivotmds") return pivot_mds(g, std::min<int>(pivots, g.num_nodes()), 2, seed);
    throw InputError("unknown method '" + method + "' (model, sgd, pivotmds)");
}

int run_draw(const DrawArgs& a, std::uint64_t seed) {
    Graph g = read_graph_file(a.graph);
    if (!is_connected(g)) throw DisconnectedGraphError("input graph is disconnected");
    auto dist = all_pairs_distances(g);
    std::unique_ptr<Model> model;
    std::string hash = "-";
    if (a.method == "model") {
        model = load_or_init(a.checkpoint, a.config, seed);
        hash = config_hash(model->config());
    }
    Layout layout = draw_with(a.method, g, dist, model.get(), seed, a.sgd_iterations, a.pivots);
    LayoutMeta meta;
    meta.report = scale_invariant_stress(layout, dist);
    meta.config_hash = hash;
    meta.seed = seed;
    meta.method = a.method;
    write_or_print(a.out, layout_to_json(g, layout, meta));
    if (!a.svg.empty()) write_text_file(a.svg, layout_to_svg(g, layout));
    std::fprintf(stderr, "scale_invariant_stress %.6f normalized %.6f\n", meta.report.scale_invariant_stress,
                 meta.report.normalized_stress);
    return 0;
}

std::vector<Graph> load_dir(const std::string& dir) {
    std::vector<Graph> out;
    for (const auto& path : list_graph_files(dir)) out.push_back(read_graph_file(path));
    if (out.empty()) throw InputError("no graph files in '" + dir + "'");
    return out;
}

int run_train(const TrainArgs& a, std::uint64_t seed, bool seed_given) {
    RunConfig cfg = parse_run_config(read_text_file(a.config));
    if (seed_given) {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if (cfg.train_data.empty()) throw InputError("config has no data.train directory");
    auto train = load_dir(cfg.train_data);
    std::vector<Graph> validation;
    if (!cfg.validation_data.empty()) validation = load_dir(cfg.validation_data);

    Model model(cfg.engine, derive_seed(cfg.seed, 5));
    std::string log = "config " + run_config_to_json(cfg).dump() + "\n";
    log += "seed " + std::to_string(cfg.seed) + "\n";
    auto result = train_loop(model, train, validation, cfg.train, [&](const EpochRecord& r) {
        char line[160];
        std::snprintf(line, sizeof line, "epoch %d train %.6f validation %.6f lr %.6g buffer %zu\n", r.epoch,
                      r.train_loss, r.validation, r.lr, r.buffer_size);
        log += line;
        std::fputs(line, stderr);
    });
    save_checkpoint(model, a.out);
    log += "best_epoch " + std::to_string(result.best_epoch) + "\n";
    log += "checkpoint " + a.out + "\n";
    if (!a.log.empty()) write_text_file(a.log, log);
    return 0;
}

int run_eval(const EvalArgs& a, std::uint64_t seed) {
    std::vector<Graph> graphs;
    for (const auto& path : list_graph_files(a.data)) graphs.push_back(read_graph_file(path));
    if (graphs.empty()) throw InputError("no graph files in '" + a.data + "'");
    std::vector<DistanceMatrix> dists;
    for (const auto& g : graphs) dists.push_back(all_pairs_distances(g));

    std::vector<std::string> methods;
    std::unique_ptr<Model> model;
    if (!a.checkpoint.empty()) {
        model = load_checkpoint(a.checkpoint);
        methods.push_back("model");
    }
    if (a.baselines) {
        methods.push_back("pivotmds");
        methods.push_back("sgd");
    }
    std::printf("%-10s %8s %26s %22s\n", "method", "graphs", "mean_scale_invariant_stress", "mean_normalized_stress");
    for (const auto& m : methods) {
        std::vector<StressReport> reports;
        for (std::size_t i = 0; i < graphs.size(); ++i) {
            Layout l = draw_with(m, graphs[i], dists[i], model.get(), derive_seed(seed, i), a.sgd_iterations, a.pivots);
            reports.push_back(scale_invariant_stress(l, dists[i]));
        }
        auto dm = dataset_metrics(reports);
        std::printf("%-10s %8zu %26.6f %22.6f\n", m.c_str(), graphs.size(), dm.mean_scale_invariant_stress,
                    dm.mean_normalized_stress);
    }
    return 0;
}

int run_bench(const BenchArgs& a, std::uint64_t seed) {
    if (a.repeats < 1) throw InputError("--repeats must be >= 1");
    auto model = load_or_init(a.checkpoint, "", seed);
    ForwardOptions opts;
    opts.rounds = a.rounds;
    opts.use_hierarchy = a.hierarchy;
    std::printf("%8s %8s %12s\n", "n", "edges", "median_s");
    for (int n : a.sizes) {
        Graph g = make_delaunay(n, derive_seed(seed, static_cast<std::uint64_t>(n)));
        std::vector<double> times;
        for (int r = 0; r < a.repeats; ++r) {
            auto t0 = std::chrono::steady_clock::now();
            Layout l = core_gd_forward(g, *model, seed, opts);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            if (!l.finite()) throw DegenerateLayoutError("non-finite layout");
        }
        std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
        std::printf("%8d %8zu %12.4f\n", n, static_cast<std::size_t>(g.num_edges()), times[times.size() / 2]);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned multilevel graph layout"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;

    GenerateArgs gen;
    auto* generate_cmd = app.add_subcommand("generate", "write synthetic graphs as edge lists");
    generate_cmd->add_option("--kind", gen.kind, "path | cycle | grid | delaunay")->capture_default_str();
    generate_cmd->add_option("--n", gen.n, "node count")->capture_default_str();
    generate_cmd->add_option("--n-min", gen.n_min, "lower node count (uniform range)");
    generate_cmd->add_option("--n-max", gen.n_max, "upper node count (uniform range)");
    generate_cmd->add_option("--rows", gen.rows, "grid rows");
    generate_cmd->add_option("--cols", gen.cols, "grid columns");
    generate_cmd->add_option("--count", gen.count, "number of graphs")->capture_default_str();
    generate_cmd->add_option("--out", gen.out, "output file, or directory when --count > 1")->required();
    generate_cmd->add_option("--seed", seed, "random seed");

    DrawArgs draw;
    auto* draw_cmd = app.add_subcommand("draw", "lay out one graph");
    draw_cmd->add_option("--graph", draw.graph, "edge list or .mtx file")->required()->check(CLI::ExistingFile);
    draw_cmd->add_option("--method", draw.method, "model | sgd | pivotmds")->capture_default_str();
    draw_cmd->add_option("--checkpoint", draw.checkpoint, "trained model");
    draw_cmd->add_option("--config", draw.config, "run config (engine section) for an untrained model");
    draw_cmd->add_option("--out", draw.out, "layout JSON path ('-' for stdout)")->capture_default_str();
    draw_cmd->add_option("--svg", draw.svg, "also write an SVG drawing");
    draw_cmd->add_option("--sgd-iterations", draw.sgd_iterations)->capture_default_str();
    draw_cmd->add_option("--pivots", draw.pivots)->capture_default_str();
    draw_cmd->add_option("--seed", seed, "random seed");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
    train_cmd->add_option("--config", train.config, "run config JSON")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train.out, "checkpoint path")->required();
    train_cmd->add_option("--log", train.log, "run log path");
    auto* seed_opt = train_cmd->add_option("--seed", seed, "overrides the config seed");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "dataset metrics for a checkpoint and the baselines");
    eval_cmd->add_option("--data", eval.data, "directory of graph files")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained model");
    eval_cmd->add_flag("!--no-baselines", eval.baselines, "skip PivotMDS and SGD");
    eval_cmd->add_option("--sgd-iterations", eval.sgd_iterations)->capture_default_str();
    eval_cmd->add_option("--pivots", eval.pivots)->capture_default_str();
    eval_cmd->add_option("--seed", seed, "random seed");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "wall time of the forward pass on Delaunay graphs");
    bench_cmd->add_option("--sizes", bench.sizes, "node counts")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--checkpoint", bench.checkpoint, "trained model");
    bench_cmd->add_option("--rounds", bench.rounds, "rounds per level (0 = model default)");
    bench_cmd->add_option("--repeats", bench.repeats)->capture_default_str();
    bench_cmd->add_flag("!--no-hierarchy", bench.hierarchy, "single-level execution");
    bench_cmd->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate_cmd) return run_generate(gen, seed);
        if (*draw_cmd) return run_draw(draw, seed);
        if (*train_cmd) return run_train(train, seed, seed_opt->count() > 0);
        if (*eval_cmd) return run_eval(eval, seed);
        if (*bench_cmd) return run_bench(bench, seed);
    } catch (const std::exception& e) {
        std::cerr << "coregd: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
