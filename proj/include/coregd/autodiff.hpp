#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/layout.hpp"

/**
 * Reverse-mode automatic differentiation over dense row-major matrices.
 *
 * Every Tensor is a 2-D matrix (scalars are 1x1). Operations on inputs that
 * require gradients record a backward closure on the result node; calling
 * backward() on a 1x1 result walks the recorded graph in reverse topological
 * order and accumulates gradients into every node that requires them. The
 * graph lives as long as the result tensor does. detach() cuts history.
 */
namespace coregd::ad {

using Matrix = RowMatrix;

namespace detail {
inline thread_local bool grad_enabled = true;
} // namespace detail

/// Disables recording in the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
    ~NoGradGuard() { detail::grad_enabled = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_enabled; }

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    template <class Expr>
    void accumulate(const Eigen::MatrixBase<Expr>& g) {
        if (grad.size() == 0)
            grad = g;
        else
            grad += g;
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Matrix value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
    static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
    static Tensor scalar(double v) { return Tensor(Matrix::Constant(1, 1, v), false); }

    [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
    [[nodiscard]] const Matrix& value() const { return node_->value; }
    /// Mutable access for optimizers and checkpoint loading.
    [[nodiscard]] Matrix& mutable_value() { return node_->value; }
    [[nodiscard]] const Matrix& grad() const { return node_->grad; }
    [[nodiscard]] Matrix& mutable_grad() { return node_->grad; }
    [[nodiscard]] bool has_grad() const { return node_->grad.size() != 0; }
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    [[nodiscard]] Eigen::Index rows() const { return node_->value.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return node_->value.cols(); }
    [[nodiscard]] double item() const {
        if (rows() != 1 || cols() != 1) throw ShapeError("item() needs a 1x1 tensor");
        return node_->value(0, 0);
    }

    void zero_grad() { node_->grad.resize(0, 0); }

    /// Same value, no history, no gradient.
    [[nodiscard]] Tensor detach() const { return Tensor(node_->value, false); }

    /// Back-propagates from this 1x1 tensor.
    void backward() const;

    [[nodiscard]] Node* node() const { return node_.get(); }
    [[nodiscard]] const std::shared_ptr<Node>& shared() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/**
 * Builds a result node. `backward` receives the result node (its grad is set)
 * and must accumulate into the parents that require gradients.
 */
inline Tensor make_result(Matrix value, std::initializer_list<Tensor> inputs, std::function<void(Node&)> backward) {
    Tensor out(std::move(value), false);
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (!any) return out;
    Node* node = out.node();
    node->requires_grad = true;
    for (const auto& t : inputs) node->parents.push_back(t.shared());
    node->backward = std::move(backward);
    return out;
}

inline void Tensor::backward() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("backward() needs a 1x1 tensor");
    if (!requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward || node->grad.size() == 0) continue;
        node->backward(*node);
        node->grad.resize(0, 0);
    }
}

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

inline Node* parent(Node& self, std::size_t i) { return self.parents[i].get(); }

} // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.rows()));
    Matrix value = a.value() * b.value();
    return make_result(std::move(value), {a, b}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        Node* pb = detail::parent(self, 1);
        if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
        if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
    });
}

/// a + b; b may be a 1 x cols row that broadcasts over the rows of a.
inline Tensor add(const Tensor& a, const Tensor& b) {
    if (b.rows() == 1 && a.rows() != 1) {
        if (a.cols() != b.cols()) throw ShapeError("add: broadcast column mismatch");
        Matrix value = a.value().rowwise() + b.value().row(0);
        return make_result(std::move(value), {a, b}, [](Node& self) {
            Node* pa = detail::parent(self, 0);
            Node* pb = detail::parent(self, 1);
            if (pa->requires_grad) pa->accumulate(self.grad);
            if (pb->requires_grad) pb->accumulate(self.grad.colwise().sum());
        });
    }
    detail::require_same_shape(a, b, "add");
    Matrix value = a.value() + b.value();
    return make_result(std::move(value), {a, b}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        Node* pb = detail::parent(self, 1);
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(self.grad);
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    Matrix value = a.value() - b.value();
    return make_result(std::move(value), {a, b}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        Node* pb = detail::parent(self, 1);
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(-self.grad);
    });
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    Matrix value = a.value().cwiseProduct(b.value());
    return make_result(std::move(value), {a, b}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        Node* pb = detail::parent(self, 1);
        if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
        if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
    });
}

inline Tensor scale(const Tensor& a, double s) {
    Matrix value = a.value() * s;
    return make_result(std::move(value), {a}, [s](Node& self) { detail::parent(self, 0)->accumulate(self.grad * s); });
}

/// Multiplies every entry of `a` by the scalar tensor `s` (1x1).
inline Tensor scale_by(const Tensor& a, const Tensor& s) {
    if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale_by: scalar must be 1x1");
    Matrix value = a.value() * s.value()(0, 0);
    return make_result(std::move(value), {a, s}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        Node* ps = detail::parent(self, 1);
        if (pa->requires_grad) pa->accumulate(self.grad * ps->value(0, 0));
        if (ps->requires_grad) ps->accumulate(Matrix::Constant(1, 1, self.grad.cwiseProduct(pa->value).sum()));
    });
}

inline Tensor sigmoid(const Tensor& a) {
    Matrix value = a.value().unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    return make_result(std::move(value), {a}, [](Node& self) {
        detail::parent(self, 0)->accumulate(
            self.grad.cwiseProduct(self.value.unaryExpr([](double y) { return y * (1.0 - y); })));
    });
}

inline Tensor tanh(const Tensor& a) {
    Matrix value = a.value().array().tanh().matrix();
    return make_result(std::move(value), {a}, [](Node& self) {
        detail::parent(self, 0)->accumulate(
            self.grad.cwiseProduct(self.value.unaryExpr([](double y) { return 1.0 - y * y; })));
    });
}

inline Tensor relu(const Tensor& a) {
    Matrix value = a.value().cwiseMax(0.0);
    return make_result(std::move(value), {a}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        pa->accumulate(self.grad.cwiseProduct(pa->value.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; })));
    });
}

inline Tensor sum(const Tensor& a) {
    Matrix value = Matrix::Constant(1, 1, a.value().sum());
    return make_result(std::move(value), {a}, [](Node& self) {
        Node* pa = detail::parent(self, 0);
        pa->accumulate(Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0)));
    });
}

inline Tensor mean(const Tensor& a) {
    const auto count = static_cast<double>(a.value().size());
    if (count == 0) throw ShapeError("mean of an empty tensor");
    Matrix value = Matrix::Constant(1, 1, a.value().sum() / count);
    return make_result(std::move(value), {a}, [count](Node& self) {
        Node* pa = detail::parent(self, 0);
        pa->accumulate(Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0) / count));
    });
}

/// Concatenation along rows (axis 0) or columns (axis 1).
inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of nothing");
    Eigen::Index rows = 0, cols = 0;
    for (const auto& p : parts) {
        if (axis == 0) {
            if (p.cols() != parts[0].cols()) throw ShapeError("concat: column mismatch");
            rows += p.rows();
            cols = p.cols();
        } else {
            if (p.rows() != parts[0].rows()) throw ShapeError("concat: row mismatch");
            cols += p.cols();
            rows = p.rows();
        }
    }
    Matrix value(rows, cols);
    std::vector<Eigen::Index> offsets;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        offsets.push_back(at);
        if (axis == 0) {
            value.middleRows(at, p.rows()) = p.value();
            at += p.rows();
        } else {
            value.middleCols(at, p.cols()) = p.value();
            at += p.cols();
        }
    }
    Tensor out(std::move(value), false);
    if (!grad_enabled()) return out;
    bool any = std::any_of(parts.begin(), parts.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (!any) return out;
    Node* node = out.node();
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.shared());
    node->backward = [offsets, axis](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            Node* p = self.parents[i].get();
            if (!p->requires_grad) continue;
            if (axis == 0)
                p->accumulate(self.grad.middleRows(offsets[i], p->value.rows()));
            else
                p->accumulate(self.grad.middleCols(offsets[i], p->value.cols()));
        }
    };
    return out;
}

inline Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols out of range");
    Matrix value = a.value().middleCols(start, count);
    return make_result(std::move(value), {a}, [start, count](Node& self) {
        Node* pa = detail::parent(self, 0);
        Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
        g.middleCols(start, count) = self.grad;
        pa->accumulate(g);
    });
}

inline Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows out of range");
    Matrix value = a.value().middleRows(start, count);
    return make_result(std::move(value), {a}, [start, count](Node& self) {
        Node* pa = detail::parent(self, 0);
        Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
        g.middleRows(start, count) = self.grad;
        pa->accumulate(g);
    });
}

/// out.row(i) = a.row(index[i]).
inline Tensor row_gather(const Tensor& a, std::shared_ptr<const std::vector<NodeId>> index) {
    Matrix value(static_cast<Eigen::Index>(index->size()), a.cols());
    for (std::size_t i = 0; i < index->size(); ++i) {
        NodeId r = (*index)[i];
        if (r < 0 || r >= a.rows()) throw ShapeError("row_gather index out of range");
        value.row(static_cast<Eigen::Index>(i)) = a.value().row(r);
    }
    return make_result(std::move(value), {a}, [index](Node& self) {
        Node* pa = detail::parent(self, 0);
        Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
        for (std::size_t i = 0; i < index->size(); ++i) g.row((*index)[i]) += self.grad.row(static_cast<Eigen::Index>(i));
        pa->accumulate(g);
    });
}

inline Tensor row_gather(const Tensor& a, const std::vector<NodeId>& index) {
    return row_gather(a, std::make_shared<const std::vector<NodeId>>(index));
}

/// out (n_rows x cols) with out.row(index[i]) += a.row(i).
inline Tensor row_scatter_add(const Tensor& a, std::shared_ptr<const std::vector<NodeId>> index, Eigen::Index n_rows) {
    if (static_cast<Eigen::Index>(index->size()) != a.rows()) throw ShapeError("row_scatter_add: index length mismatch");
    Matrix value = Matrix::Zero(n_rows, a.cols());
    for (std::size_t i = 0; i < index->size(); ++i) {
        NodeId r = (*index)[i];
        if (r < 0 || r >= n_rows) throw ShapeError("row_scatter_add index out of range");
        value.row(r) += a.value().row(static_cast<Eigen::Index>(i));
    }
    return make_result(std::move(value), {a}, [index](Node& self) {
        Node* pa = detail::parent(self, 0);
        Matrix g(pa->value.rows(), pa->value.cols());
        for (std::size_t i = 0; i < index->size(); ++i) g.row(static_cast<Eigen::Index>(i)) = self.grad.row((*index)[i]);
        pa->accumulate(g);
    });
}

inline Tensor row_scatter_add(const Tensor& a, const std::vector<NodeId>& index, Eigen::Index n_rows) {
    return row_scatter_add(a, std::make_shared<const std::vector<NodeId>>(index), n_rows);
}

} // namespace coregd::ad
