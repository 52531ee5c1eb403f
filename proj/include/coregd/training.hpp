#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "coregd/autodiff.hpp"
#include "coregd/coarsening.hpp"
#include "coregd/engine.hpp"
#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/metrics.hpp"
#include "coregd/nn.hpp"
#include "coregd/random.hpp"

namespace coregd {

/// Floor for the scale denominator so collapsed layouts give a finite loss.
inline constexpr double kScaleDenominatorFloor = 1e-12;

/**
 * Differentiable scale-invariant stress of positions (n x d) against graph
 * distances, over ordered pairs. With A = sum D/d and B = sum D^2/d^2 over
 * unordered pairs, alpha = A / max(B, floor) and S = 2 sum (alpha D - d)^2 / d^2.
 */
inline Tensor stress_loss(const Tensor& positions, const DistanceMatrix& dist) {
    const NodeId n = static_cast<NodeId>(positions.rows());
    if (n != dist.size()) throw InputError("position rows and distance matrix sizes differ");
    const ad::Matrix& p = positions.value();
    if (!p.allFinite()) throw InputError("positions are not finite");

    CompensatedSum num, den;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            double d = dist(u, v);
            double e = (p.row(u) - p.row(v)).norm();
            num.add(e / d);
            den.add(e * e / (d * d));
        }
    const double a_sum = num.value();
    const double b_raw = den.value();
    const bool floored = !(b_raw > kScaleDenominatorFloor);
    const double b_sum = floored ? kScaleDenominatorFloor : b_raw;
    const double alpha = a_sum / b_sum;

    CompensatedSum total;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            double d = dist(u, v);
            double diff = alpha * (p.row(u) - p.row(v)).norm() - d;
            total.add(diff * diff / (d * d));
        }
    ad::Matrix value = ad::Matrix::Constant(1, 1, 2.0 * total.value());

    return ad::make_result(std::move(value), {positions}, [dist, alpha, a_sum, b_sum, floored](ad::Node& self) {
        ad::Node* pp = self.parents[0].get();
        const ad::Matrix& pos = pp->value;
        const NodeId m = static_cast<NodeId>(pos.rows());
        const double upstream = self.grad(0, 0);

        double ds_dalpha = 0.0;
        for (NodeId u = 0; u < m; ++u)
            for (NodeId v = u + 1; v < m; ++v) {
                double d = dist(u, v);
                double e = (pos.row(u) - pos.row(v)).norm();
                ds_dalpha += 4.0 * (alpha * e - d) * e / (d * d);
            }

        ad::Matrix g = ad::Matrix::Zero(pos.rows(), pos.cols());
        for (NodeId u = 0; u < m; ++u)
            for (NodeId v = u + 1; v < m; ++v) {
                auto delta = (pos.row(u) - pos.row(v)).eval();
                double e = delta.norm();
                if (e == 0.0) continue;
                double d = dist(u, v);
                double w = 1.0 / (d * d);
                double dalpha_de = w * d / b_sum;
                if (!floored) dalpha_de -= a_sum * 2.0 * w * e / (b_sum * b_sum);
                double ds_de = 4.0 * w * (alpha * e - d) * alpha + ds_dalpha * dalpha_de;
                auto step = (upstream * ds_de / e) * delta;
                g.row(u) += step;
                g.row(v) -= step;
            }
        pp->accumulate(g);
    });
}

/// Round count: round(N(mean, std)) clamped to >= 1.
inline int sample_rounds(int mean, double std, Rng& rng) {
    if (mean < 1) throw InputError("rounds mean must be >= 1");
    if (std <= 0.0) return mean;
    double draw = static_cast<double>(mean) + std * standard_normal(rng);
    return std::max(1, static_cast<int>(std::lround(draw)));
}

/// A training graph with its hierarchy and per-level distances and message edges.
struct PreparedGraph {
    Graph graph;
    Hierarchy hierarchy;
    std::vector<DistanceMatrix> distances;
    std::vector<MessageEdges> edges;

    [[nodiscard]] std::size_t levels() const { return hierarchy.levels(); }
};

inline PreparedGraph prepare_graph(const Graph& g, const EngineConfig& cfg) {
    if (!is_connected(g)) throw DisconnectedGraphError("training graphs must be connected");
    PreparedGraph p;
    p.graph = g;
    p.hierarchy = hierarchy_for(g, cfg);
    for (const auto& level : p.hierarchy.graphs) {
        p.distances.push_back(all_pairs_distances(level));
        p.edges.push_back(make_message_edges(level));
    }
    return p;
}

/// One unit of work: a graph at a hierarchy level with its current latent embeddings.
struct TrainItem {
    std::size_t graph = 0;
    std::size_t level = 0;
    Tensor h;
};

/// Stored latent states; replacement picks uniformly random slots once full.
class ReplayBuffer {
public:
    struct Entry {
        std::size_t graph;
        std::size_t level;
        ad::Matrix h;
    };

    explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {}

    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] const Entry& operator[](std::size_t i) const { return entries_.at(i); }

    /// With probability p stores the item (appending while below capacity). Returns whether it was stored.
    bool offer(const TrainItem& item, double p) {
        if (capacity_ == 0) return false;
        if (uniform01(rng_) >= p) return false;
        Entry e{item.graph, item.level, item.h.value()};
        if (entries_.size() < capacity_)
            entries_.push_back(std::move(e));
        else
            entries_[uniform_below(rng_, entries_.size())] = std::move(e);
        return true;
    }

    /// `count` entries drawn uniformly without replacement (all of them when fewer are stored).
    std::vector<TrainItem> sample(std::size_t count) {
        std::vector<std::size_t> idx(entries_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        count = std::min(count, idx.size());
        for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_below(rng_, idx.size() - i)]);
        std::vector<TrainItem> out;
        for (std::size_t i = 0; i < count; ++i) {
            const auto& e = entries_[idx[i]];
            out.push_back({e.graph, e.level, Tensor::constant(e.h)});
        }
        return out;
    }

private:
    std::size_t capacity_;
    Rng rng_;
    std::vector<Entry> entries_;
};

struct TrainConfig {
    int batch_size = 16;
    int epochs = 200;
    double lr = 2e-4;
    int rounds_mean = 5;
    double sigma_pre = 1.0;
    double sigma_post = 1.0;
    double p_uncoarsen = 0.5;
    double replace_prob_fresh = 0.5;
    double replace_prob_replay = 1.0;
    std::size_t buffer_capacity = 4096;
    int plateau_patience = 12;
    double plateau_threshold = 2.0;
    double plateau_factor = 0.7;
    /// Stop after this many seconds of wall time (0 = no limit).
    double max_seconds = 0.0;
    /// Joint gradient-norm cap per batch (0 = off).
    double grad_clip = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw InputError("batch_size must be >= 1");
        if (epochs < 0) throw InputError("epochs must be >= 0");
        if (!(lr > 0.0)) throw InputError("learning rate must be > 0");
        if (rounds_mean < 1) throw InputError("rounds_mean must be >= 1");
        if (!(sigma_pre >= 0.0) || !(sigma_post >= 0.0)) throw InputError("round deviations must be >= 0");
        for (double p : {p_uncoarsen, replace_prob_fresh, replace_prob_replay})
            if (!(p >= 0.0 && p <= 1.0)) throw InputError("probabilities must lie in [0, 1]");
        if (plateau_patience < 1) throw InputError("plateau patience must be >= 1");
        if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw InputError("plateau factor must lie in (0, 1)");
        if (!(max_seconds >= 0.0)) throw InputError("max_seconds must be >= 0");
        if (!(grad_clip >= 0.0)) throw InputError("grad_clip must be >= 0");
    }
};

/// Mean over items of stress_loss(decode(h)) / n^2.
inline Tensor batch_loss(const Model& model, const std::vector<PreparedGraph>& data, const std::vector<TrainItem>& items) {
    if (items.empty()) throw InputError("empty batch");
    Tensor total;
    for (const auto& item : items) {
        const auto& dist = data.at(item.graph).distances.at(item.level);
        const double n = static_cast<double>(dist.size());
        Tensor term = ad::scale(stress_loss(model.decode(item.h), dist), 1.0 / (n * n));
        total = total.defined() ? ad::add(total, term) : term;
    }
    return ad::scale(total, 1.0 / static_cast<double>(items.size()));
}

/// Fresh item: features on the coarsest level of graph i, encoded on the live tape.
inline TrainItem fresh_item(const Model& model, const std::vector<PreparedGraph>& data, std::size_t i, std::uint64_t seed) {
    return {i, 0, initial_embeddings(model, data.at(i).hierarchy.coarsest(), seed)};
}

/// Optimizer state carried across batches.
struct TrainState {
    std::int64_t step = 0;
    double lr = 2e-4;
};

/**
 * With probability p_uncoarsen the whole batch runs r_pre rounds, lifts one
 * level where possible and runs r_post rounds; otherwise r_post rounds in
 * place. Round counts are shared by the batch. Then one Adam step on the batch
 * loss, and every item is offered to the buffer. Items are updated in place
 * with detached embeddings.
 */
inline double train_batch(std::vector<TrainItem>& batch, Model& model, const std::vector<PreparedGraph>& data,
                          ReplayBuffer& buffer, const TrainConfig& cfg, TrainState& state, Rng& rng, bool replay) {
    const auto& ecfg = model.config();
    const bool uncoarsen = uniform01(rng) < cfg.p_uncoarsen;
    const int r_pre = uncoarsen ? sample_rounds(cfg.rounds_mean, cfg.sigma_pre, rng) : 0;
    const int r_post = sample_rounds(cfg.rounds_mean, cfg.sigma_post, rng);
    for (auto& item : batch) {
        const auto& pg = data.at(item.graph);
        if (uncoarsen) {
            item.h = layout_optimization(pg.edges[item.level], item.h, r_pre, model, ecfg.rewiring);
            if (item.level + 1 < pg.levels()) {
                const auto& parent = pg.hierarchy.parents[item.level];
                Tensor lifted = ad::row_gather(item.h, parent);
                RowMatrix noise = gaussian_noise(lifted.rows(), lifted.cols(), ecfg.coarsen.noise_sigma, rng());
                item.h = ad::add(lifted, Tensor::constant(std::move(noise)));
                ++item.level;
            }
        }
        item.h = layout_optimization(pg.edges[item.level], item.h, r_post, model, ecfg.rewiring);
    }

    Tensor loss = batch_loss(model, data, batch);
    model.params().zero_grad();
    loss.backward();
    if (cfg.grad_clip > 0.0) nn::clip_grad_norm(model.params(), cfg.grad_clip);
    nn::adam_step(model.params(), state.lr, ++state.step);

    const double p = replay ? cfg.replace_prob_replay : cfg.replace_prob_fresh;
    for (auto& item : batch) {
        item.h = item.h.detach();
        buffer.offer(item, p);
    }
    return loss.item();
}

/// Mean scale-invariant stress of inference layouts; an all-coincident layout scores n(n - 1).
inline double evaluate_model(const Model& model, const std::vector<Graph>& graphs, std::uint64_t seed) {
    if (graphs.empty()) throw InputError("evaluation set is empty");
    CompensatedSum acc;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        Layout layout = core_gd_forward(graphs[i], model, derive_seed(seed, i));
        auto dist = all_pairs_distances(graphs[i]);
        try {
            acc.add(scale_invariant_stress(layout, dist).scale_invariant_stress);
        } catch (const DegenerateLayoutError&) {
            double n = static_cast<double>(graphs[i].num_nodes());
            acc.add(n * (n - 1.0));
        }
    }
    return acc.value() / static_cast<double>(graphs.size());
}

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double validation = 0.0;
    double lr = 0.0;
    std::size_t buffer_size = 0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_validation = std::numeric_limits<double>::infinity();
    bool stopped_on_time = false;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/**
 * Interleaves fresh batches (features recomputed every epoch) with replay
 * batches. The plateau scheduler follows the validation score (the training
 * loss when no validation graphs are given). The model ends holding the
 * parameters of the best epoch.
 */
inline TrainResult train_loop(Model& model, const std::vector<Graph>& train, const std::vector<Graph>& validation,
                              const TrainConfig& cfg, const EpochObserver& observer = {}) {
    cfg.validate();
    if (train.empty()) throw InputError("training set is empty");
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };

    std::vector<PreparedGraph> data;
    data.reserve(train.size());
    for (const auto& g : train) data.push_back(prepare_graph(g, model.config()));

    Rng rng(derive_seed(cfg.seed, 1));
    ReplayBuffer buffer(cfg.buffer_capacity, derive_seed(cfg.seed, 2));
    nn::PlateauScheduler scheduler(cfg.lr, cfg.plateau_patience, cfg.plateau_threshold, cfg.plateau_factor);
    TrainState state;
    state.lr = cfg.lr;

    std::vector<ad::Matrix> best;
    auto snapshot = [&] {
        best.clear();
        for (const auto& e : model.params().entries()) best.push_back(e.param.value());
    };

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        CompensatedSum loss_sum;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TrainItem> batch;
            for (std::size_t j = start; j < stop; ++j) {
                std::uint64_t fseed = derive_seed(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)), order[j]);
                batch.push_back(fresh_item(model, data, order[j], fseed));
            }
            loss_sum.add(train_batch(batch, model, data, buffer, cfg, state, rng, false));
            ++batches;
            if (!buffer.empty()) {
                auto replay = buffer.sample(static_cast<std::size_t>(cfg.batch_size));
                loss_sum.add(train_batch(replay, model, data, buffer, cfg, state, rng, true));
                ++batches;
            }
            if (cfg.max_seconds > 0.0 && elapsed() > cfg.max_seconds) break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum.value() / std::max(1, batches);
        rec.validation = validation.empty() ? rec.train_loss : evaluate_model(model, validation, derive_seed(cfg.seed, 3));
        state.lr = scheduler.step(rec.validation);
        rec.lr = state.lr;
        rec.buffer_size = buffer.size();
        rec.seconds = elapsed();
        if (rec.validation < result.best_validation) {
            result.best_validation = rec.validation;
            result.best_epoch = epoch;
            snapshot();
        }
        result.history.push_back(rec);
        if (observer) observer(rec);
        if (cfg.max_seconds > 0.0 && rec.seconds > cfg.max_seconds) {
            result.stopped_on_time = true;
            break;
        }
    }

    if (!best.empty()) {
        auto& entries = model.params().entries();
        for (std::size_t i = 0; i < entries.size(); ++i) entries[i].param.mutable_value() = best[i];
    }
    return result;
}

} // namespace coregd
