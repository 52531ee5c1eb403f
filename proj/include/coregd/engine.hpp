#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coregd/autodiff.hpp"
#include "coregd/coarsening.hpp"
#include "coregd/error.hpp"
#include "coregd/features.hpp"
#include "coregd/graph.hpp"
#include "coregd/layout.hpp"
#include "coregd/nn.hpp"
#include "coregd/random.hpp"
#include "coregd/rewiring.hpp"

namespace coregd {

using ad::Tensor;

enum class ConvKind { gru, gin };

inline std::string to_string(ConvKind k) { return k == ConvKind::gru ? "gru" : "gin"; }
inline ConvKind parse_conv_kind(const std::string& s) {
    if (s == "gru") return ConvKind::gru;
    if (s == "gin") return ConvKind::gin;
    throw InputError("unknown convolution '" + s + "'");
}

struct EngineConfig {
    int hidden = 64;
    int out_dim = 2;
    int rounds_mean = 5;
    double rounds_std = 1.0;
    /// Rounds per level at inference; 0 means rounds_mean.
    int inference_rounds = 0;
    ConvKind conv = ConvKind::gru;
    /// Use two separate parameter sets for the two convolutions on the input topology.
    bool distinct_conv_e_layers = false;
    bool use_hierarchy = true;
    RewiringConfig rewiring;
    CoarsenConfig coarsen;
    FeatureConfig features;

    [[nodiscard]] int rounds_for_inference() const { return inference_rounds > 0 ? inference_rounds : rounds_mean; }

    void validate() const {
        if (hidden < 1) throw InputError("hidden width must be >= 1");
        if (out_dim < 1) throw InputError("output dimension must be >= 1");
        if (rounds_mean < 1) throw InputError("rounds_mean must be >= 1");
        if (!(rounds_std >= 0.0)) throw InputError("rounds_std must be >= 0");
        if (inference_rounds < 0) throw InputError("inference_rounds must be >= 0");
        if (rewiring.method == RewiringMethod::delaunay && out_dim != 2)
            throw InputError("Delaunay rewiring needs out_dim = 2");
        rewiring.validate();
        coarsen.validate();
        features.validate();
    }
};

/// Directed message edges (src -> dst) over n nodes, ready for aggregation.
struct MessageEdges {
    NodeId n = 0;
    std::shared_ptr<const std::vector<NodeId>> src;
    std::shared_ptr<const std::vector<NodeId>> dst;
    Tensor in_degree; // n x 1

    [[nodiscard]] std::size_t size() const { return src->size(); }
};

inline MessageEdges make_message_edges(NodeId n, std::vector<NodeId> src, std::vector<NodeId> dst) {
    if (src.size() != dst.size()) throw InputError("edge source and target lists differ in length");
    ad::Matrix deg = ad::Matrix::Zero(n, 1);
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] < 0 || src[i] >= n || dst[i] < 0 || dst[i] >= n)
            throw InputError("edge index out of range");
        deg(dst[i], 0) += 1.0;
    }
    MessageEdges e;
    e.n = n;
    e.src = std::make_shared<const std::vector<NodeId>>(std::move(src));
    e.dst = std::make_shared<const std::vector<NodeId>>(std::move(dst));
    e.in_degree = Tensor::constant(std::move(deg));
    return e;
}

inline MessageEdges make_message_edges(const Graph& g) {
    auto [src, dst] = g.directed_edges();
    return make_message_edges(g.num_nodes(), std::move(src), std::move(dst));
}

inline MessageEdges make_message_edges(NodeId n, const RewiredEdges& edges) {
    return make_message_edges(n, edges.src, edges.dst);
}

/// Parameters of one graph convolution (GRU-style or GIN-style).
struct ConvParams {
    ConvKind kind = ConvKind::gru;
    nn::Mlp message;   // 2H -> H -> H, applied to (h_target || h_source)
    nn::GruCell gru;   // gru kind
    nn::Mlp update;    // gin kind: H -> H -> H
    Tensor epsilon;    // gin kind: 1 x 1
};

inline ConvParams make_conv(nn::ParamStore& store, const std::string& prefix, ConvKind kind, Eigen::Index hidden, Rng& rng) {
    ConvParams p;
    p.kind = kind;
    p.message = nn::make_mlp(store, prefix + ".message", {2 * hidden, hidden, hidden}, rng);
    if (kind == ConvKind::gru) {
        p.gru = nn::make_gru(store, prefix + ".gru", hidden, rng);
    } else {
        p.update = nn::make_mlp(store, prefix + ".update", {hidden, hidden, hidden}, rng);
        p.epsilon = store.add(prefix + ".epsilon", ad::Matrix::Zero(1, 1));
    }
    return p;
}

/**
 * sum over edges (w -> v) of message(h_v || h_w), collected at v.
 *
 * For the two-layer ReLU message network the first affine map is split into
 * target and source halves evaluated per node, and the second (linear) layer
 * is applied after aggregation: sum_w (a_w W2 + b2) = (sum_w a_w) W2 + deg(v) b2.
 * Other shapes take the per-edge route.
 */
inline Tensor aggregate_messages(const nn::Mlp& message, const Tensor& h, const MessageEdges& edges) {
    const Eigen::Index hidden = h.cols();
    if (h.rows() != edges.n) throw ShapeError("embedding rows do not match edge set");
    const bool fused = message.layers.size() == 2 && message.activation == nn::Activation::relu &&
                       message.layers[0].weight.rows() == 2 * hidden;
    if (edges.size() == 0) {
        Eigen::Index out = message.layers.back().weight.cols();
        return Tensor::constant(ad::Matrix::Zero(edges.n, out));
    }
    if (!fused) {
        Tensor pairs = ad::concat({ad::row_gather(h, edges.dst), ad::row_gather(h, edges.src)}, 1);
        return ad::row_scatter_add(message(pairs), edges.dst, edges.n);
    }
    const auto& first = message.layers[0];
    const auto& second = message.layers[1];
    Tensor target_part = ad::matmul(h, ad::slice_rows(first.weight, 0, hidden));
    Tensor source_part = ad::matmul(h, ad::slice_rows(first.weight, hidden, hidden));
    Tensor pre = ad::add(ad::add(ad::row_gather(target_part, edges.dst), ad::row_gather(source_part, edges.src)), first.bias);
    Tensor summed = ad::row_scatter_add(ad::relu(pre), edges.dst, edges.n);
    return ad::add(ad::matmul(summed, second.weight), ad::matmul(edges.in_degree, second.bias));
}

/// GRU convolution: h'_v = GRU(sum_w message(h_v || h_w), h_v).
inline Tensor conv_step(const MessageEdges& edges, const Tensor& h, const ConvParams& params) {
    if (params.kind == ConvKind::gin) {
        Tensor agg = aggregate_messages(params.message, h, edges);
        Tensor self_term = ad::add(h, ad::scale_by(h, params.epsilon));
        return params.update(ad::add(self_term, agg));
    }
    return params.gru(aggregate_messages(params.message, h, edges), h);
}

/// GIN convolution: h'_v = update((1 + eps) h_v + sum_w message(h_v || h_w)).
inline Tensor gin_conv_step(const MessageEdges& edges, const Tensor& h, const ConvParams& params) {
    if (params.kind != ConvKind::gin) throw InputError("gin_conv_step needs GIN parameters");
    return conv_step(edges, h, params);
}

/// Learned state: encoder, convolutions on the input and rewired topologies, decoder.
class Model {
public:
    explicit Model(const EngineConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        const Eigen::Index h = cfg_.hidden;
        encoder_ = nn::make_mlp(store_, "encoder", {cfg_.features.width(), h, h}, rng);
        conv_e_ = make_conv(store_, "conv_e", cfg_.conv, h, rng);
        if (cfg_.distinct_conv_e_layers) conv_e2_ = make_conv(store_, "conv_e2", cfg_.conv, h, rng);
        conv_r_ = make_conv(store_, "conv_r", cfg_.conv, h, rng);
        decoder_ = nn::make_mlp(store_, "decoder", {h, h, static_cast<Eigen::Index>(cfg_.out_dim)}, rng);
    }

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    [[nodiscard]] const EngineConfig& config() const { return cfg_; }
    [[nodiscard]] nn::ParamStore& params() { return store_; }
    [[nodiscard]] const nn::ParamStore& params() const { return store_; }
    [[nodiscard]] const nn::Mlp& encoder() const { return encoder_; }
    [[nodiscard]] const nn::Mlp& decoder() const { return decoder_; }
    [[nodiscard]] const ConvParams& conv_e() const { return conv_e_; }
    [[nodiscard]] const ConvParams& conv_e_second() const { return cfg_.distinct_conv_e_layers ? conv_e2_ : conv_e_; }
    [[nodiscard]] const ConvParams& conv_r() const { return conv_r_; }

    [[nodiscard]] Tensor encode(const Tensor& features) const { return encoder_(features); }

    /// Decoder followed by a sigmoid: coordinates in (0, 1).
    [[nodiscard]] Tensor decode(const Tensor& h) const { return ad::sigmoid(decoder_(h)); }

    /// Two convolutions on the input topology.
    [[nodiscard]] Tensor conv_E(const MessageEdges& edges, const Tensor& h) const {
        return conv_step(edges, conv_step(edges, h, conv_e_), conv_e_second());
    }

    [[nodiscard]] Tensor conv_E(const Graph& g, const Tensor& h) const { return conv_E(make_message_edges(g), h); }

private:
    EngineConfig cfg_;
    nn::ParamStore store_;
    nn::Mlp encoder_;
    ConvParams conv_e_;
    ConvParams conv_e2_;
    ConvParams conv_r_;
    nn::Mlp decoder_;
};

inline Layout decode_layout(const Model& model, const Tensor& h) {
    ad::NoGradGuard guard;
    return Layout(model.decode(h).value());
}

/// Called after every round with (round index starting at 1, embeddings after the rewired convolution).
using RoundObserver = std::function<void(int, const Tensor&)>;

/**
 * r rounds of: convolve on the input topology, decode positions, rebuild the
 * rewired edge set from them, convolve on the rewired edges. A final
 * convolution on the input topology closes the sequence. With the "none"
 * rewiring method the rewired branch is skipped.
 */
inline Tensor layout_optimization(const MessageEdges& topology, const Tensor& h, int rounds, const Model& model,
                                  const RewiringConfig& rewiring, const RoundObserver& observer = {}) {
    if (rounds < 0) throw InputError("round count must be >= 0");
    Tensor state = h;
    for (int i = 0; i < rounds; ++i) {
        state = model.conv_E(topology, state);
        if (rewiring.method != RewiringMethod::none) {
            ad::Matrix positions;
            {
                ad::NoGradGuard guard;
                positions = model.decode(state).value();
            }
            auto rewired = make_message_edges(topology.n, rewire(positions, rewiring));
            state = conv_step(rewired, state, model.conv_r());
        }
        if (observer) observer(i + 1, state);
    }
    return model.conv_E(topology, state);
}

inline Tensor layout_optimization(const Graph& g, const Tensor& h, int rounds, const Model& model,
                                  const RewiringConfig& rewiring, const RoundObserver& observer = {}) {
    return layout_optimization(make_message_edges(g), h, rounds, model, rewiring, observer);
}

struct ForwardOptions {
    /// Rounds per level; 0 uses the model's inference default.
    int rounds = 0;
    std::optional<bool> use_hierarchy;
};

namespace detail {
inline constexpr std::uint64_t kFeatureStream = 100;
inline constexpr std::uint64_t kLiftStream = 200;
} // namespace detail

/// Encoded initial features for g (the coarsest graph of a hierarchy).
inline Tensor initial_embeddings(const Model& model, const Graph& g, std::uint64_t seed) {
    RowMatrix features = assemble_initial_features(g, model.config().features, seed);
    return model.encode(Tensor::constant(std::move(features)));
}

/**
 * Hierarchical forward pass returning final-level embeddings. Respects the
 * caller's gradient mode, so it doubles as the differentiable pipeline.
 */
inline Tensor forward_embeddings(const Model& model, const Graph& g, const Hierarchy& hierarchy, std::uint64_t seed,
                                 int rounds) {
    const auto& cfg = model.config();
    Tensor h = initial_embeddings(model, hierarchy.coarsest(), derive_seed(seed, detail::kFeatureStream));
    for (std::size_t l = 0; l + 1 < hierarchy.levels(); ++l) {
        h = layout_optimization(hierarchy.graphs[l], h, rounds, model, cfg.rewiring);
        const auto& parent = hierarchy.parents[l];
        Tensor lifted = ad::row_gather(h, parent);
        RowMatrix noise = gaussian_noise(lifted.rows(), lifted.cols(), cfg.coarsen.noise_sigma,
                                         derive_seed(seed, detail::kLiftStream + l));
        h = ad::add(lifted, Tensor::constant(std::move(noise)));
    }
    (void)g;
    return layout_optimization(hierarchy.finest(), h, rounds, model, cfg.rewiring);
}

inline Hierarchy hierarchy_for(const Graph& g, const EngineConfig& cfg, std::optional<bool> use_hierarchy = {}) {
    bool hier = use_hierarchy.value_or(cfg.use_hierarchy);
    return hier ? build_hierarchy(g, cfg.coarsen) : single_level_hierarchy(g);
}

/// Full inference: hierarchy, features on the coarsest level, per-level optimization and lift, decode.
inline Layout core_gd_forward(const Graph& g, const Model& model, std::uint64_t seed, const ForwardOptions& opts = {}) {
    if (!is_connected(g)) throw DisconnectedGraphError("layout engine needs a connected graph");
    ad::NoGradGuard guard;
    Hierarchy hierarchy = hierarchy_for(g, model.config(), opts.use_hierarchy);
    int rounds = opts.rounds > 0 ? opts.rounds : model.config().rounds_for_inference();
    Tensor h = forward_embeddings(model, g, hierarchy, seed, rounds);
    return Layout(model.decode(h).value());
}

} // namespace coregd
