#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coregd/engine.hpp"
#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/layout.hpp"
#include "coregd/metrics.hpp"
#include "coregd/training.hpp"

namespace coregd {

using json = nlohmann::json;

namespace detail {

inline std::string line_error(std::size_t line, const std::string& what) {
    return "line " + std::to_string(line) + ": " + what;
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline bool parse_long(const std::string& tok, long long& out) {
    if (tok.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stoll(tok, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == tok.size();
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace detail

/**
 * Whitespace-separated "u v" pairs, 0-based. '#' starts a comment. A comment of
 * the form "# nodes: N" fixes the node count (otherwise max index + 1).
 */
inline Graph parse_edge_list(std::string_view text) {
    std::vector<Edge> edges;
    long long header_nodes = -1;
    long long max_index = -1;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            auto toks = detail::split_ws(line.substr(hash + 1));
            if (toks.size() == 2 && detail::lower(toks[0]) == "nodes:") {
                long long n = 0;
                if (!detail::parse_long(toks[1], n) || n < 1)
                    throw InputError(detail::line_error(lineno, "bad node-count directive"));
                header_nodes = n;
            }
            line.resize(hash);
        }
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        long long u = 0, v = 0;
        if (toks.size() != 2 || !detail::parse_long(toks[0], u) || !detail::parse_long(toks[1], v))
            throw InputError(detail::line_error(lineno, "expected two integer node ids"));
        if (u < 0 || v < 0) throw InputError(detail::line_error(lineno, "negative node id"));
        if (u >= DistanceMatrix::kMaxNodes * 50LL || v >= DistanceMatrix::kMaxNodes * 50LL)
            throw InputError(detail::line_error(lineno, "node id too large"));
        max_index = std::max({max_index, u, v});
        edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    if (header_nodes < 0 && max_index < 0) throw InputError("edge list defines an empty graph");
    long long n = header_nodes >= 0 ? header_nodes : max_index + 1;
    if (max_index >= n) throw InputError("edge list references node " + std::to_string(max_index) + " beyond the declared count");
    return build_graph(static_cast<NodeId>(n), edges);
}

/// Matrix Market coordinate format; the nonzero pattern becomes an undirected graph.
inline Graph parse_matrix_market(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw InputError("empty Matrix Market input");
    ++lineno;
    auto header = detail::split_ws(line);
    if (header.size() < 5 || detail::lower(header[0]) != "%%matrixmarket" || detail::lower(header[1]) != "matrix")
        throw InputError(detail::line_error(lineno, "missing %%MatrixMarket matrix header"));
    const std::string format = detail::lower(header[2]);
    if (format == "array") throw InputError("unsupported Matrix Market format 'array'");
    if (format != "coordinate") throw InputError("unsupported Matrix Market format '" + header[2] + "'");

    bool have_size = false;
    long long rows = 0, cols = 0, nnz = 0, seen = 0;
    std::vector<Edge> edges;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0][0] == '%') continue;
        if (!have_size) {
            if (toks.size() != 3 || !detail::parse_long(toks[0], rows) || !detail::parse_long(toks[1], cols) ||
                !detail::parse_long(toks[2], nnz) || rows < 1 || cols < 1 || nnz < 0)
                throw InputError(detail::line_error(lineno, "bad size line"));
            if (rows != cols) throw InputError("Matrix Market matrix is not square");
            have_size = true;
            continue;
        }
        long long i = 0, j = 0;
        if (toks.size() < 2 || !detail::parse_long(toks[0], i) || !detail::parse_long(toks[1], j))
            throw InputError(detail::line_error(lineno, "bad entry"));
        if (i < 1 || i > rows || j < 1 || j > cols) throw InputError(detail::line_error(lineno, "entry out of range"));
        ++seen;
        edges.emplace_back(static_cast<NodeId>(i - 1), static_cast<NodeId>(j - 1));
    }
    if (!have_size) throw InputError("Matrix Market input has no size line");
    if (seen != nnz)
        throw InputError("Matrix Market declares " + std::to_string(nnz) + " entries but has " + std::to_string(seen));
    return build_graph(static_cast<NodeId>(rows), edges);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

/// .mtx files are Matrix Market; anything else is an edge list.
inline Graph read_graph_file(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    try {
        if (path.extension() == ".mtx") return parse_matrix_market(text);
        return parse_edge_list(text);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

inline std::string write_edge_list(const Graph& g) {
    std::string out = "# nodes: " + std::to_string(g.num_nodes()) + "\n";
    for (const auto& [u, v] : g.edges()) out += std::to_string(u) + " " + std::to_string(v) + "\n";
    return out;
}

/// Graph files of a directory (.txt, .edges, .el, .mtx) in lexicographic order.
inline std::vector<std::filesystem::path> list_graph_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension();
        if (ext == ".txt" || ext == ".edges" || ext == ".el" || ext == ".mtx") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// 64-bit FNV-1a as 16 lowercase hex digits.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct LayoutMeta {
    StressReport report;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string method;
};

struct LayoutDocument {
    Layout layout;
    std::vector<Edge> edges;
    LayoutMeta meta;
};

inline std::string layout_to_json(const Graph& g, const Layout& layout, const LayoutMeta& meta) {
    if (layout.size() != g.num_nodes()) throw InputError("layout size does not match graph");
    if (!layout.finite()) throw InputError("layout has non-finite coordinates");
    json nodes = json::array();
    for (NodeId v = 0; v < layout.size(); ++v) {
        json row = json::array();
        for (int k = 0; k < layout.dim(); ++k) row.push_back(layout.coords(v, k));
        nodes.push_back(std::move(row));
    }
    json edges = json::array();
    for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
    json doc;
    doc["nodes"] = std::move(nodes);
    doc["edges"] = std::move(edges);
    doc["meta"] = {{"raw_stress", meta.report.raw_stress},
                   {"alpha", meta.report.alpha},
                   {"scale_invariant_stress", meta.report.scale_invariant_stress},
                   {"normalized_stress", meta.report.normalized_stress},
                   {"config_hash", meta.config_hash},
                   {"seed", meta.seed},
                   {"method", meta.method}};
    return doc.dump(1) + "\n";
}

inline LayoutDocument parse_layout_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("layout JSON: ") + e.what());
    }
    LayoutDocument out;
    try {
        const auto& nodes = doc.at("nodes");
        const std::size_t n = nodes.size();
        const std::size_t d = n == 0 ? 0 : nodes.at(0).size();
        RowMatrix coords(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < n; ++i) {
            if (nodes[i].size() != d) throw InputError("layout JSON: ragged node coordinates");
            for (std::size_t k = 0; k < d; ++k)
                coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = nodes[i][k].get<double>();
        }
        out.layout = Layout(std::move(coords));
        for (const auto& e : doc.at("edges")) out.edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
        const auto& m = doc.at("meta");
        out.meta.report.raw_stress = m.at("raw_stress").get<double>();
        out.meta.report.alpha = m.at("alpha").get<double>();
        out.meta.report.scale_invariant_stress = m.at("scale_invariant_stress").get<double>();
        out.meta.report.normalized_stress = m.at("normalized_stress").get<double>();
        out.meta.config_hash = m.at("config_hash").get<std::string>();
        out.meta.seed = m.at("seed").get<std::uint64_t>();
        out.meta.method = m.value("method", std::string());
    } catch (const json::exception& e) {
        throw InputError(std::string("layout JSON: ") + e.what());
    }
    return out;
}

/// Edges as lines under nodes as circles; coordinates mapped uniformly into a square viewport.
inline std::string layout_to_svg(const Graph& g, const Layout& layout, int size = 800, double node_radius = 3.0) {
    if (layout.size() != g.num_nodes()) throw InputError("layout size does not match graph");
    if (layout.dim() < 2) throw InputError("SVG output needs at least two coordinates");
    if (!layout.finite()) throw InputError("layout has non-finite coordinates");
    RowMatrix xy = layout.coords.leftCols(2);
    Layout boxed = fit_unit_box(Layout(std::move(xy)));
    const double margin = 20.0;
    const double span = size - 2.0 * margin;
    auto px = [&](NodeId v, int k) { return margin + boxed.coords(v, k) * span; };

    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n", size,
                  size, size, size);
    out += buf;
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g stroke=\"#555\" stroke-width=\"1\">\n";
    for (const auto& [u, v] : g.edges()) {
        std::snprintf(buf, sizeof buf, "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\"/>\n", px(u, 0), px(u, 1),
                      px(v, 0), px(v, 1));
        out += buf;
    }
    out += "</g>\n<g fill=\"#1f77b4\">\n";
    for (NodeId v = 0; v < layout.size(); ++v) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.1f\"/>\n", px(v, 0), px(v, 1), node_radius);
        out += buf;
    }
    out += "</g>\n</svg>\n";
    return out;
}

// ---------------------------------------------------------------- run config

struct RunConfig {
    EngineConfig engine;
    TrainConfig train;
    std::string train_data;
    std::string validation_data;
    std::uint64_t seed = 0;
};

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw InputError("config: '" + where + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw InputError("config: unknown key '" + where + (where.empty() ? "" : ".") + key + "'");
    }
}

template <class T>
void read_key(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("config: bad value for '" + where + "." + key + "'");
    }
}

} // namespace detail

inline json engine_to_json(const EngineConfig& c) {
    return {{"hidden", c.hidden},
            {"out_dim", c.out_dim},
            {"rounds_mean", c.rounds_mean},
            {"rounds_std", c.rounds_std},
            {"inference_rounds", c.inference_rounds},
            {"conv", to_string(c.conv)},
            {"distinct_conv_e_layers", c.distinct_conv_e_layers},
            {"use_hierarchy", c.use_hierarchy},
            {"rewiring", {{"method", to_string(c.rewiring.method)}, {"k", c.rewiring.k}, {"radius", c.rewiring.radius}}},
            {"coarsen", {{"rho", c.coarsen.rho}, {"n_min", c.coarsen.n_min}, {"noise_sigma", c.coarsen.noise_sigma}}},
            {"features",
             {{"n_lap", c.features.n_lap},
              {"n_beacons", c.features.n_beacons},
              {"enc_per_beacon", c.features.enc_per_beacon},
              {"n_random", c.features.n_random},
              {"exclude_trivial_eigenvector", c.features.exclude_trivial_eigenvector}}}};
}

inline EngineConfig engine_from_json(const json& j) {
    EngineConfig c;
    detail::reject_unknown(j,
                           {"hidden", "out_dim", "rounds_mean", "rounds_std", "inference_rounds", "conv",
                            "distinct_conv_e_layers", "use_hierarchy", "rewiring", "coarsen", "features"},
                           "engine");
    detail::read_key(j, "hidden", c.hidden, "engine");
    detail::read_key(j, "out_dim", c.out_dim, "engine");
    detail::read_key(j, "rounds_mean", c.rounds_mean, "engine");
    detail::read_key(j, "rounds_std", c.rounds_std, "engine");
    detail::read_key(j, "inference_rounds", c.inference_rounds, "engine");
    detail::read_key(j, "distinct_conv_e_layers", c.distinct_conv_e_layers, "engine");
    detail::read_key(j, "use_hierarchy", c.use_hierarchy, "engine");
    if (j.contains("conv")) {
        std::string s;
        detail::read_key(j, "conv", s, "engine");
        c.conv = parse_conv_kind(s);
    }
    if (j.contains("rewiring")) {
        const auto& r = j.at("rewiring");
        detail::reject_unknown(r, {"method", "k", "radius"}, "engine.rewiring");
        if (r.contains("method")) {
            std::string s;
            detail::read_key(r, "method", s, "engine.rewiring");
            c.rewiring.method = parse_rewiring_method(s);
        }
        detail::read_key(r, "k", c.rewiring.k, "engine.rewiring");
        detail::read_key(r, "radius", c.rewiring.radius, "engine.rewiring");
    }
    if (j.contains("coarsen")) {
        const auto& r = j.at("coarsen");
        detail::reject_unknown(r, {"rho", "n_min", "noise_sigma"}, "engine.coarsen");
        detail::read_key(r, "rho", c.coarsen.rho, "engine.coarsen");
        detail::read_key(r, "n_min", c.coarsen.n_min, "engine.coarsen");
        detail::read_key(r, "noise_sigma", c.coarsen.noise_sigma, "engine.coarsen");
    }
    if (j.contains("features")) {
        const auto& r = j.at("features");
        detail::reject_unknown(r, {"n_lap", "n_beacons", "enc_per_beacon", "n_random", "exclude_trivial_eigenvector"},
                               "engine.features");
        detail::read_key(r, "n_lap", c.features.n_lap, "engine.features");
        detail::read_key(r, "n_beacons", c.features.n_beacons, "engine.features");
        detail::read_key(r, "enc_per_beacon", c.features.enc_per_beacon, "engine.features");
        detail::read_key(r, "n_random", c.features.n_random, "engine.features");
        detail::read_key(r, "exclude_trivial_eigenvector", c.features.exclude_trivial_eigenvector, "engine.features");
    }
    c.validate();
    return c;
}

inline json train_to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"lr", c.lr},
            {"rounds_mean", c.rounds_mean},
            {"sigma_pre", c.sigma_pre},
            {"sigma_post", c.sigma_post},
            {"p_uncoarsen", c.p_uncoarsen},
            {"replace_prob_fresh", c.replace_prob_fresh},
            {"replace_prob_replay", c.replace_prob_replay},
            {"buffer_capacity", c.buffer_capacity},
            {"plateau_patience", c.plateau_patience},
            {"plateau_threshold", c.plateau_threshold},
            {"plateau_factor", c.plateau_factor},
            {"max_seconds", c.max_seconds},
            {"grad_clip", c.grad_clip}};
}

inline TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    detail::reject_unknown(j,
                           {"batch_size", "epochs", "lr", "rounds_mean", "sigma_pre", "sigma_post", "p_uncoarsen",
                            "replace_prob_fresh", "replace_prob_replay", "buffer_capacity", "plateau_patience",
                            "plateau_threshold", "plateau_factor", "max_seconds", "grad_clip"},
                           "train");
    detail::read_key(j, "batch_size", c.batch_size, "train");
    detail::read_key(j, "epochs", c.epochs, "train");
    detail::read_key(j, "lr", c.lr, "train");
    detail::read_key(j, "rounds_mean", c.rounds_mean, "train");
    detail::read_key(j, "sigma_pre", c.sigma_pre, "train");
    detail::read_key(j, "sigma_post", c.sigma_post, "train");
    detail::read_key(j, "p_uncoarsen", c.p_uncoarsen, "train");
    detail::read_key(j, "replace_prob_fresh", c.replace_prob_fresh, "train");
    detail::read_key(j, "replace_prob_replay", c.replace_prob_replay, "train");
    detail::read_key(j, "buffer_capacity", c.buffer_capacity, "train");
    detail::read_key(j, "plateau_patience", c.plateau_patience, "train");
    detail::read_key(j, "plateau_threshold", c.plateau_threshold, "train");
    detail::read_key(j, "plateau_factor", c.plateau_factor, "train");
    detail::read_key(j, "max_seconds", c.max_seconds, "train");
    detail::read_key(j, "grad_clip", c.grad_clip, "train");
    c.validate();
    return c;
}

inline json run_config_to_json(const RunConfig& c) {
    return {{"engine", engine_to_json(c.engine)},
            {"train", train_to_json(c.train)},
            {"data", {{"train", c.train_data}, {"validation", c.validation_data}}},
            {"seed", c.seed}};
}

/// Parses and validates a run configuration; missing keys keep their defaults.
inline RunConfig parse_run_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    detail::reject_unknown(j, {"engine", "train", "data", "seed"}, "");
    RunConfig c;
    if (j.contains("engine")) c.engine = engine_from_json(j.at("engine"));
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::reject_unknown(d, {"train", "validation"}, "data");
        detail::read_key(d, "train", c.train_data, "data");
        detail::read_key(d, "validation", c.validation_data, "data");
    }
    detail::read_key(j, "seed", c.seed, "config");
    c.train.seed = c.seed;
    return c;
}

inline std::string config_hash(const EngineConfig& c) { return fnv1a_hex(engine_to_json(c).dump()); }

// ---------------------------------------------------------------- checkpoints

inline constexpr const char* kCheckpointFormat = "coregd-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline std::string checkpoint_to_json(const Model& model) {
    json params = json::array();
    for (const auto& e : model.params().entries()) {
        const auto& v = e.param.value();
        std::vector<double> values(v.data(), v.data() + v.size());
        params.push_back({{"name", e.name}, {"shape", {v.rows(), v.cols()}}, {"values", std::move(values)}});
    }
    json doc = {{"format", kCheckpointFormat},
                {"version", kCheckpointVersion},
                {"config", engine_to_json(model.config())},
                {"params", std::move(params)}};
    return doc.dump() + "\n";
}

inline std::unique_ptr<Model> model_from_checkpoint(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kCheckpointFormat) throw InputError("checkpoint: unknown format");
        if (doc.at("version").get<int>() != kCheckpointVersion) throw InputError("checkpoint: unsupported version");
        auto model = std::make_unique<Model>(engine_from_json(doc.at("config")));
        const auto& params = doc.at("params");
        if (params.size() != model->params().size()) throw InputError("checkpoint: parameter count mismatch");
        for (const auto& p : params) {
            auto& t = model->params().get(p.at("name").get<std::string>());
            auto rows = p.at("shape").at(0).get<Eigen::Index>();
            auto cols = p.at("shape").at(1).get<Eigen::Index>();
            auto values = p.at("values").get<std::vector<double>>();
            if (rows != t.rows() || cols != t.cols() || static_cast<Eigen::Index>(values.size()) != rows * cols)
                throw InputError("checkpoint: shape mismatch for '" + p.at("name").get<std::string>() + "'");
            std::copy(values.begin(), values.end(), t.mutable_value().data());
        }
        return model;
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    write_text_file(path, checkpoint_to_json(model));
}

inline std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
    return model_from_checkpoint(read_text_file(path));
}

} // namespace coregd
