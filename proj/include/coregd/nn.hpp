#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coregd/autodiff.hpp"
#include "coregd/error.hpp"
#include "coregd/random.hpp"

namespace coregd::nn {

using ad::Matrix;
using ad::Tensor;

/// Named parameters in insertion order, each with its Adam moments. References from add() stay valid.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor param;
        Matrix m;
        Matrix v;
    };

    Tensor& add(const std::string& name, Matrix init) {
        if (index_.count(name)) throw InputError("duplicate parameter name '" + name + "'");
        index_[name] = entries_.size();
        Matrix zeros = Matrix::Zero(init.rows(), init.cols());
        entries_.push_back({name, Tensor::parameter(std::move(init)), zeros, zeros});
        return entries_.back().param;
    }

    [[nodiscard]] bool contains(const std::string& name) const { return index_.count(name) != 0; }
    [[nodiscard]] const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
        return entries_[it->second].param;
    }
    Tensor& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
        return entries_[it->second].param;
    }

    [[nodiscard]] std::deque<Entry>& entries() { return entries_; }
    [[nodiscard]] const std::deque<Entry>& entries() const { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

    [[nodiscard]] std::size_t scalar_count() const {
        std::size_t total = 0;
        for (const auto& e : entries_) total += static_cast<std::size_t>(e.param.value().size());
        return total;
    }

    void zero_grad() {
        for (auto& e : entries_) e.param.zero_grad();
    }

    /// Copies parameter values (not moments) from another store with identical names and shapes.
    void copy_values_from(const ParamStore& other) {
        for (auto& e : entries_) {
            const Tensor& src = other.get(e.name);
            if (src.rows() != e.param.rows() || src.cols() != e.param.cols())
                throw ShapeError("parameter '" + e.name + "' shape differs");
            e.param.mutable_value() = src.value();
        }
    }

    void reset_moments() {
        for (auto& e : entries_) {
            e.m.setZero();
            e.v.setZero();
        }
    }

private:
    std::deque<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
    return w;
}

struct Linear {
    Tensor weight; // in x out
    Tensor bias;   // 1 x out

    [[nodiscard]] Tensor operator()(const Tensor& x) const { return ad::add(ad::matmul(x, weight), bias); }
};

inline Linear make_linear(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out, Rng& rng) {
    Linear l;
    l.weight = store.add(prefix + ".weight", xavier_uniform(in, out, rng));
    l.bias = store.add(prefix + ".bias", Matrix::Zero(1, out));
    return l;
}

enum class Activation { relu, tanh, none };

/// Affine layers with an activation between them; the last layer is linear.
struct Mlp {
    std::vector<Linear> layers;
    Activation activation = Activation::relu;

    [[nodiscard]] Tensor operator()(const Tensor& x) const { return mlp_forward(*this, x); }

    friend Tensor mlp_forward(const Mlp& mlp, const Tensor& x) {
        Tensor h = x;
        for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
            if (h.cols() != mlp.layers[i].weight.rows()) throw ShapeError("mlp: input width mismatch");
            h = mlp.layers[i](h);
            if (i + 1 < mlp.layers.size()) {
                if (mlp.activation == Activation::relu) h = ad::relu(h);
                if (mlp.activation == Activation::tanh) h = ad::tanh(h);
            }
        }
        return h;
    }
};

/// widths = {in, hidden..., out}.
inline Mlp make_mlp(ParamStore& store, const std::string& prefix, const std::vector<Eigen::Index>& widths, Rng& rng,
                    Activation act = Activation::relu) {
    if (widths.size() < 2) throw InputError("an MLP needs at least input and output widths");
    Mlp mlp;
    mlp.activation = act;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        mlp.layers.push_back(make_linear(store, prefix + ".l" + std::to_string(i), widths[i], widths[i + 1], rng));
    return mlp;
}

/**
 * Gated recurrent unit with message input m and state h:
 *   z = sig(m Wz + h Uz + bz), r = sig(m Wr + h Ur + br),
 *   c = tanh(m Wh + (r * h) Uh + bh), h' = (1 - z) * h + z * c.
 * Input weights are packed column-wise as [z | r | h].
 */
struct GruCell {
    Tensor w_input;     // H x 3H
    Tensor w_hidden_zr; // H x 2H
    Tensor w_hidden_c;  // H x H
    Tensor bias;        // 1 x 3H

    [[nodiscard]] Eigen::Index width() const { return w_hidden_c.rows(); }

    [[nodiscard]] Tensor operator()(const Tensor& m, const Tensor& h) const { return gru_cell(*this, m, h); }

    friend Tensor gru_cell(const GruCell& cell, const Tensor& m, const Tensor& h) {
        const Eigen::Index hw = cell.width();
        if (m.rows() != h.rows()) throw ShapeError("gru: message and state row counts differ");
        if (m.cols() != hw || h.cols() != hw) throw ShapeError("gru: width mismatch");
        Tensor gi = ad::add(ad::matmul(m, cell.w_input), cell.bias);
        Tensor gh = ad::matmul(h, cell.w_hidden_zr);
        Tensor z = ad::sigmoid(ad::add(ad::slice_cols(gi, 0, hw), ad::slice_cols(gh, 0, hw)));
        Tensor r = ad::sigmoid(ad::add(ad::slice_cols(gi, hw, hw), ad::slice_cols(gh, hw, hw)));
        Tensor c = ad::tanh(ad::add(ad::slice_cols(gi, 2 * hw, hw), ad::matmul(ad::mul(r, h), cell.w_hidden_c)));
        return ad::add(h, ad::mul(z, ad::sub(c, h)));
    }
};

inline GruCell make_gru(ParamStore& store, const std::string& prefix, Eigen::Index width, Rng& rng) {
    GruCell g;
    Matrix w_in(width, 3 * width);
    for (int k = 0; k < 3; ++k) w_in.middleCols(k * width, width) = xavier_uniform(width, width, rng);
    g.w_input = store.add(prefix + ".w_input", std::move(w_in));
    Matrix w_zr(width, 2 * width);
    for (int k = 0; k < 2; ++k) w_zr.middleCols(k * width, width) = xavier_uniform(width, width, rng);
    g.w_hidden_zr = store.add(prefix + ".w_hidden_zr", std::move(w_zr));
    g.w_hidden_c = store.add(prefix + ".w_hidden_c", xavier_uniform(width, width, rng));
    g.bias = store.add(prefix + ".bias", Matrix::Zero(1, 3 * width));
    return g;
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update of every parameter that holds a gradient; t >= 1.
inline void adam_step(ParamStore& store, double lr, std::int64_t t, const AdamConfig& cfg = {}) {
    if (t < 1) throw InputError("Adam step counter starts at 1");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& e : store.entries()) {
        if (!e.param.has_grad()) continue;
        const Matrix& g = e.param.grad();
        e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * g;
        e.v = cfg.beta2 * e.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        Matrix& w = e.param.mutable_value();
        w.array() -= lr * (e.m.array() / c1) / ((e.v.array() / c2).sqrt() + cfg.eps);
    }
}

/// Rescales all gradients so their joint L2 norm is at most max_norm; returns the norm before clipping.
inline double clip_grad_norm(ParamStore& store, double max_norm) {
    double sq = 0.0;
    for (auto& e : store.entries())
        if (e.param.has_grad()) sq += e.param.grad().squaredNorm();
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm)
        for (auto& e : store.entries())
            if (e.param.has_grad()) e.param.mutable_grad() *= max_norm / norm;
    return norm;
}

enum class ThresholdMode { relative, absolute };

/**
 * Reduce-on-plateau learning-rate schedule (minimizing).
 *
 * An epoch improves when loss < best * (1 - threshold / 100) in relative mode
 * (threshold given in percent) or loss < best - threshold in absolute mode.
 * After `patience` consecutive epochs without improvement the rate is
 * multiplied by `factor` and the counter restarts.
 */
class PlateauScheduler {
public:
    PlateauScheduler(double lr, int patience = 12, double threshold = 2.0, double factor = 0.7,
                     ThresholdMode mode = ThresholdMode::relative, double min_lr = 0.0)
        : lr_(lr), patience_(patience), threshold_(threshold), factor_(factor), mode_(mode), min_lr_(min_lr) {}

    double step(double loss) {
        if (improves(loss)) {
            best_ = loss;
            bad_epochs_ = 0;
        } else if (++bad_epochs_ >= patience_) {
            lr_ = std::max(min_lr_, lr_ * factor_);
            bad_epochs_ = 0;
        }
        return lr_;
    }

    [[nodiscard]] double lr() const { return lr_; }
    [[nodiscard]] double best() const { return best_; }
    [[nodiscard]] int bad_epochs() const { return bad_epochs_; }

private:
    [[nodiscard]] bool improves(double loss) const {
        if (mode_ == ThresholdMode::relative) return loss < best_ * (1.0 - threshold_ / 100.0);
        return loss < best_ - threshold_;
    }

    double lr_;
    int patience_;
    double threshold_;
    double factor_;
    ThresholdMode mode_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

} // namespace coregd::nn
