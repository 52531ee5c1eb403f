#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "support.hpp"

using namespace coregd;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("coregd_io_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

/// Runs a shell command; returns exit status and captured stdout.
std::pair<int, std::string> run(const std::string& cmd) {
    std::string out;
    FILE* pipe = ::popen((cmd + " 2>/dev/null").c_str(), "r");
    if (!pipe) return {-1, out};
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), got);
    int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

const std::string kCli = COREGD_CLI_PATH;

} // namespace

TEST(EdgeList, ParsesPath) {
    Graph g = parse_edge_list("0 1\n1 2");
    EXPECT_EQ(g.num_nodes(), 3);
    EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(EdgeList, DuplicatesAndCommentsAndHeader) {
    EXPECT_EQ(parse_edge_list("0 1\n1 0\n").num_edges(), 1);
    Graph g = parse_edge_list("# nodes: 5\n0 1 # trailing\n\n  3\t4\n");
    EXPECT_EQ(g.num_nodes(), 5);
    EXPECT_EQ(g.num_edges(), 2);
    EXPECT_EQ(parse_edge_list(write_edge_list(g)).edges(), g.edges());
}

TEST(EdgeList, Errors) {
    EXPECT_NE(error_of([] { parse_edge_list("# only a comment\n"); }).find("empty"), std::string::npos);
    EXPECT_EQ(error_of([] { parse_edge_list("0 1\n1 x\n"); }), "line 2: expected two integer node ids");
    EXPECT_EQ(error_of([] { parse_edge_list("0 1\n\n1 2 3\n"); }), "line 3: expected two integer node ids");
    EXPECT_EQ(error_of([] { parse_edge_list("0 -1\n"); }), "line 1: negative node id");
    EXPECT_THROW(parse_edge_list("# nodes: 2\n0 5\n"), InputError);
}

TEST(MatrixMarket, SymmetricPattern) {
    Graph g = parse_matrix_market("%%MatrixMarket matrix coordinate pattern symmetric\n% c\n3 3 2\n2 1\n3 2\n");
    EXPECT_EQ(g.num_nodes(), 3);
    EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(MatrixMarket, DiagonalDroppedAndGeneralSymmetrized) {
    Graph g = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n3 3 4\n1 2 0.5\n2 1 0.5\n2 2 9\n2 3 1\n");
    EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(MatrixMarket, Errors) {
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n3 4 0\n"), InputError);
    EXPECT_NE(error_of([] { parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n"); })
                  .find("unsupported"),
              std::string::npos);
    EXPECT_EQ(error_of([] { parse_matrix_market("%%MatrixMarket matrix coordinate real general\n3 3 1\n4 1 1\n"); }),
              "line 3: entry out of range");
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n3 3 2\n1 2 1\n"), InputError);
    EXPECT_THROW(parse_matrix_market("not a header\n"), InputError);
}

TEST(LayoutJson, RoundTrip) {
    Graph g = make_delaunay(25, 1);
    Rng rng(2);
    Layout l(testing_support::random_points(25, 2, rng));
    LayoutMeta meta;
    meta.report = scale_invariant_stress(l, all_pairs_distances(g));
    meta.config_hash = config_hash(EngineConfig{});
    meta.seed = 99;
    meta.method = "model";
    std::string text = layout_to_json(g, l, meta);
    auto doc = parse_layout_json(text);
    EXPECT_EQ(doc.layout.coords, l.coords);
    EXPECT_EQ(doc.edges, g.edges());
    EXPECT_EQ(doc.meta.seed, 99u);
    EXPECT_EQ(doc.meta.config_hash, meta.config_hash);
    EXPECT_EQ(doc.meta.report.scale_invariant_stress, meta.report.scale_invariant_stress);
    EXPECT_EQ(doc.meta.report.alpha, meta.report.alpha);
    EXPECT_EQ(layout_to_json(g, doc.layout, doc.meta), text);
}

TEST(LayoutJson, RejectsBadInput) {
    Graph g = make_path(3);
    LayoutMeta meta;
    RowMatrix bad = RowMatrix::Zero(3, 2);
    bad(1, 0) = std::nan("");
    EXPECT_THROW(layout_to_json(g, Layout(bad), meta), InputError);
    EXPECT_THROW(layout_to_json(g, Layout(RowMatrix::Zero(2, 2)), meta), InputError);
    EXPECT_THROW(parse_layout_json("{\"nodes\": [[0, 0]]}"), InputError);
    EXPECT_THROW(parse_layout_json("{"), InputError);
}

TEST(Svg, PathOfTwo) {
    Graph g = make_path(2);
    RowMatrix p(2, 2);
    p << 0, 0, 1, 1;
    std::string svg = layout_to_svg(g, Layout(p));
    EXPECT_EQ(count_of(svg, "<circle"), 2u);
    EXPECT_EQ(count_of(svg, "<line"), 1u);
    EXPECT_EQ(svg, layout_to_svg(g, Layout(p)));
    // Affine placement: corners of the unit box land on the margins.
    EXPECT_NE(svg.find("cx=\"20.000\" cy=\"20.000\""), std::string::npos);
    EXPECT_NE(svg.find("cx=\"780.000\" cy=\"780.000\""), std::string::npos);
    EXPECT_THROW(layout_to_svg(g, Layout(RowMatrix::Zero(2, 1))), InputError);
}

TEST(RunConfig, DefaultsAndOverrides) {
    RunConfig c = parse_run_config("{}");
    EngineConfig e;
    TrainConfig t;
    EXPECT_EQ(engine_to_json(c.engine), engine_to_json(e));
    EXPECT_EQ(train_to_json(c.train), train_to_json(t));
    RunConfig o = parse_run_config(
        R"({"engine": {"hidden": 16, "rewiring": {"method": "delaunay"}}, "train": {"lr": 0.001}, "seed": 4,
            "data": {"train": "a", "validation": "b"}})");
    EXPECT_EQ(o.engine.hidden, 16);
    EXPECT_EQ(o.engine.rewiring.method, RewiringMethod::delaunay);
    EXPECT_DOUBLE_EQ(o.train.lr, 1e-3);
    EXPECT_EQ(o.train.seed, 4u);
    EXPECT_EQ(o.train_data, "a");
    RunConfig back = parse_run_config(run_config_to_json(o).dump());
    EXPECT_EQ(run_config_to_json(back), run_config_to_json(o));
}

TEST(RunConfig, RejectsUnknownAndOutOfRange) {
    EXPECT_EQ(error_of([] { parse_run_config(R"({"engine": {"hiden": 3}})"); }), "config: unknown key 'engine.hiden'");
    EXPECT_THROW(parse_run_config(R"({"extra": 1})"), InputError);
    EXPECT_THROW(parse_run_config(R"({"engine": {"features": {"n_lapp": 2}}})"), InputError);
    EXPECT_THROW(parse_run_config(R"({"engine": {"hidden": 0}})"), InputError);
    EXPECT_THROW(parse_run_config(R"({"train": {"lr": -1}})"), InputError);
    EXPECT_THROW(parse_run_config(R"({"train": {"lr": "fast"}})"), InputError);
    EXPECT_THROW(parse_run_config("[1, 2"), InputError);
}

TEST(RunConfig, HashTracksEngineConfig) {
    EngineConfig a;
    EngineConfig b;
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.hidden = 32;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Checkpoint, RoundTripKeepsOutputs) {
    EngineConfig cfg;
    cfg.hidden = 12;
    Model model(cfg, 3);
    auto copy = model_from_checkpoint(checkpoint_to_json(model));
    EXPECT_EQ(engine_to_json(copy->config()), engine_to_json(cfg));
    Graph g = make_delaunay(70, 4);
    EXPECT_EQ(core_gd_forward(g, model, 5).coords, core_gd_forward(g, *copy, 5).coords);
    EXPECT_EQ(checkpoint_to_json(*copy), checkpoint_to_json(model));
}

TEST(Checkpoint, RejectsCorruption) {
    EngineConfig cfg;
    cfg.hidden = 4;
    Model model(cfg, 3);
    auto doc = json::parse(checkpoint_to_json(model));
    auto bad_format = doc;
    bad_format["format"] = "other";
    EXPECT_THROW(model_from_checkpoint(bad_format.dump()), InputError);
    auto bad_shape = doc;
    bad_shape["params"][0]["values"].erase(0);
    EXPECT_THROW(model_from_checkpoint(bad_shape.dump()), InputError);
    auto missing = doc;
    missing["params"].erase(0);
    EXPECT_THROW(model_from_checkpoint(missing.dump()), InputError);
    EXPECT_THROW(model_from_checkpoint("nope"), InputError);
}

TEST(GraphFiles, DirectoryListingAndExtensions) {
    TempDir dir("files");
    write_text_file(dir.path / "b.txt", "0 1\n");
    write_text_file(dir.path / "a.mtx", "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n");
    write_text_file(dir.path / "notes.md", "ignored");
    auto files = list_graph_files(dir.path);
    ASSERT_EQ(files.size(), 2u);
    EXPECT_EQ(files[0].filename(), "a.mtx");
    EXPECT_EQ(read_graph_file(files[0]).num_edges(), 1);
    write_text_file(dir.path / "c.txt", "0 1\nbad\n");
    EXPECT_EQ(error_of([&] { read_graph_file(dir.path / "c.txt"); }),
              (dir.path / "c.txt").string() + ": line 2: expected two integer node ids");
    EXPECT_THROW(list_graph_files(dir.path / "missing"), InputError);
}

TEST(Cli, DrawPathWithSgd) {
    TempDir dir("draw");
    write_text_file(dir.path / "p3.txt", "0 1\n1 2\n");
    std::string base = kCli + " draw --graph " + (dir.path / "p3.txt").string() +
                       " --method sgd --sgd-iterations 500 --seed 3 --svg " + (dir.path / "p3.svg").string();
    auto [code, out] = run(base + " --out -");
    ASSERT_EQ(code, 0);
    auto doc = parse_layout_json(out);
    EXPECT_LT(doc.meta.report.scale_invariant_stress, 1e-4);
    auto dist = all_pairs_distances(make_path(3));
    EXPECT_NEAR(scale_invariant_stress(doc.layout, dist).scale_invariant_stress,
                doc.meta.report.scale_invariant_stress, 1e-12);
    std::string svg = read_text_file(dir.path / "p3.svg");
    EXPECT_EQ(count_of(svg, "<circle"), 3u);
    EXPECT_EQ(count_of(svg, "<line"), 2u);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    TempDir dir("repeat");
    ASSERT_EQ(run(kCli + " generate --kind delaunay --n-min 30 --n-max 60 --count 3 --seed 5 --out " +
                  (dir.path / "data").string())
                  .first,
              0);
    auto files = list_graph_files(dir.path / "data");
    ASSERT_EQ(files.size(), 3u);
    std::string draw = kCli + " draw --graph " + files[0].string() + " --seed 8 --out -";
    auto first = run(draw);
    auto second = run(draw);
    ASSERT_EQ(first.first, 0);
    EXPECT_EQ(first.second, second.second);
    std::string eval = kCli + " eval --data " + (dir.path / "data").string() + " --seed 2";
    auto e1 = run(eval);
    auto e2 = run(eval);
    ASSERT_EQ(e1.first, 0);
    EXPECT_EQ(e1.second, e2.second);
    EXPECT_NE(e1.second.find("mean_normalized_stress"), std::string::npos);
    EXPECT_EQ(count_of(e1.second, "\n"), 3u);
}

TEST(Cli, BenchEmitsOneRowPerSize) {
    auto [code, out] = run(kCli + " bench --sizes 100,200,400 --repeats 1 --seed 1");
    ASSERT_EQ(code, 0);
    EXPECT_EQ(count_of(out, "\n"), 4u);
}

TEST(Cli, TrainWritesCheckpointAndLog) {
    TempDir dir("train");
    ASSERT_EQ(run(kCli + " generate --kind delaunay --n-min 20 --n-max 30 --count 4 --seed 1 --out " +
                  (dir.path / "data").string())
                  .first,
              0);
    json cfg = {{"engine", {{"hidden", 8}}},
                {"train", {{"epochs", 2}, {"batch_size", 2}, {"buffer_capacity", 8}}},
                {"data", {{"train", (dir.path / "data").string()}, {"validation", (dir.path / "data").string()}}},
                {"seed", 3}};
    write_text_file(dir.path / "run.json", cfg.dump());
    auto [code, out] = run(kCli + " train --config " + (dir.path / "run.json").string() + " --out " +
                           (dir.path / "model.json").string() + " --log " + (dir.path / "run.log").string());
    ASSERT_EQ(code, 0);
    auto model = load_checkpoint(dir.path / "model.json");
    EXPECT_EQ(model->config().hidden, 8);
    std::string log = read_text_file(dir.path / "run.log");
    EXPECT_EQ(log.rfind("config {", 0), 0u);
    EXPECT_EQ(count_of(log, "\nepoch "), 2u);
}

TEST(Cli, ErrorsExitNonzero) {
    TempDir dir("errors");
    write_text_file(dir.path / "split.txt", "0 1\n2 3\n");
    EXPECT_NE(run(kCli + " draw --graph " + (dir.path / "split.txt").string() + " --method sgd").first, 0);
    write_text_file(dir.path / "bad.json", R"({"engine": {"bogus": 1}})");
    EXPECT_NE(run(kCli + " train --config " + (dir.path / "bad.json").string() + " --out x").first, 0);
    EXPECT_NE(run(kCli + " frobnicate").first, 0);
}
