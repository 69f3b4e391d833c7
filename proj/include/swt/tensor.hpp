#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "swt/errors.hpp"
#include "swt/rng.hpp"

namespace swt {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << s[i] << (i + 1 < s.size() ? "x" : "");
    os << ']';
    return os.str();
}

namespace autograd {

inline int& nograd_depth() {
    thread_local int depth = 0;
    return depth;
}

inline bool enabled() { return nograd_depth() == 0; }

// Scoped switch that stops ops from recording the graph.
struct NoGradGuard {
    NoGradGuard() { ++nograd_depth(); }
    ~NoGradGuard() { --nograd_depth(); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

}  // namespace autograd

template <typename S>
struct TensorNode {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // allocated on demand during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;

    std::vector<S>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), S(0));
        return grad;
    }
};

// Dense n-dimensional tensor with reverse-mode autodiff. Value handle over a
// shared node; the graph hangs off the node's parent links and is consumed by
// a single backward() call from a scalar.
template <typename S>
class TensorT {
  public:
    using Scalar = S;
    using Node = TensorNode<S>;

    TensorT() = default;

    static TensorT zeros(Shape shape) { return full(std::move(shape), S(0)); }

    static TensorT full(Shape shape, S value) {
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->data.assign(static_cast<size_t>(shape_numel(t.n_->shape)), value);
        return t;
    }

    static TensorT from_vector(Shape shape, std::vector<S> data) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw DimensionError("from_vector: shape " + shape_str(shape) + " does not match data length " +
                                 std::to_string(data.size()));
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->data = std::move(data);
        return t;
    }

    static TensorT scalar_value(S v) { return from_vector({1}, {v}); }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(n_->data.size()); }

    std::vector<S>& values() { return n_->data; }
    const std::vector<S>& values() const { return n_->data; }

    S item() const {
        if (size() != 1) throw DimensionError("item: tensor " + shape_str(shape()) + " is not scalar");
        return n_->data[0];
    }

    S operator()(int i) const { return n_->data[static_cast<size_t>(i)]; }
    S operator()(int i, int j) const { return n_->data[static_cast<size_t>(i) * dim(1) + j]; }
    S operator()(int i, int j, int k) const {
        return n_->data[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
    }

    void set_requires_grad(bool rg) { n_->requires_grad = rg; }
    bool requires_grad() const { return n_ && n_->requires_grad; }

    bool has_grad() const { return n_ && !n_->grad.empty(); }
    const std::vector<S>& grad() const { return n_->grad; }
    void clear_grad() {
        if (n_) {
            n_->grad.clear();
            n_->grad.shrink_to_fit();
        }
    }

    // Copy of the values without any graph history.
    TensorT detach() const {
        TensorT t = from_vector(n_->shape, n_->data);
        return t;
    }

    std::shared_ptr<Node> node() const { return n_; }

    // Reverse-mode sweep from a scalar. Gradients sum across fan-out;
    // intermediate grads are dropped as soon as they have been propagated.
    void backward() const {
        if (size() != 1) throw DimensionError("backward: root must be scalar, got " + shape_str(shape()));
        std::vector<Node*> order = topo_order();
        n_->ensure_grad()[0] = S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (node->backward && !node->grad.empty()) node->backward(*node);
            if (!node->parents.empty()) {
                node->grad.clear();
                node->grad.shrink_to_fit();
            }
        }
    }

    // Internal: used by op implementations.
    static TensorT make_op(Shape shape, std::vector<S> data, std::vector<TensorT> parents,
                           std::function<void(Node&)> backward) {
        TensorT t = from_vector(std::move(shape), std::move(data));
        bool record = autograd::enabled();
        bool any_grad = false;
        for (const auto& p : parents) any_grad = any_grad || p.requires_grad();
        if (record && any_grad) {
            t.n_->requires_grad = true;
            t.n_->parents.reserve(parents.size());
            for (auto& p : parents) t.n_->parents.push_back(p.n_);
            t.n_->backward = std::move(backward);
        }
        return t;
    }

  private:
    std::vector<Node*> topo_order() const {
        std::vector<Node*> order;
        std::unordered_set<Node*> visited;
        // iterative post-order DFS; graphs can be tens of thousands of nodes deep
        std::vector<std::pair<Node*, size_t>> stack;
        stack.emplace_back(n_.get(), 0);
        visited.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node* child = node->parents[next++].get();
                if (visited.insert(child).second) stack.emplace_back(child, 0);
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<Node> n_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

namespace detail {

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b)
        throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                             " do not match");
}

constexpr int64_t kParallelFlops = 1 << 16;  // matmul work below this stays serial

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "add");
    std::vector<S> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return TensorT<S>::make_op(a.shape(), std::move(out), {a, b}, [](TensorNode<S>& self) {
        for (int p = 0; p < 2; ++p) {
            auto& parent = *self.parents[p];
            if (!parent.requires_grad) continue;
            auto& g = parent.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "sub");
    std::vector<S> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return TensorT<S>::make_op(a.shape(), std::move(out), {a, b}, [](TensorNode<S>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "mul");
    std::vector<S> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return TensorT<S>::make_op(a.shape(), std::move(out), {a, b}, [](TensorNode<S>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
        }
    });
}

template <typename S>
TensorT<S> div(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "div");
    std::vector<S> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
    return TensorT<S>::make_op(a.shape(), std::move(out), {a, b}, [](TensorNode<S>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i)
                g[i] -= self.grad[i] * pa.data[i] / (pb.data[i] * pb.data[i]);
        }
    });
}

template <typename S>
TensorT<S> operator+(const TensorT<S>& a, const TensorT<S>& b) { return add(a, b); }
template <typename S>
TensorT<S> operator-(const TensorT<S>& a, const TensorT<S>& b) { return sub(a, b); }
template <typename S>
TensorT<S> operator*(const TensorT<S>& a, const TensorT<S>& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// scalar ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& a, S c) {
    std::vector<S> out(a.values());
    for (auto& v : out) v += c;
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <typename S>
TensorT<S> mul_scalar(const TensorT<S>& a, S c) {
    std::vector<S> out(a.values());
    for (auto& v : out) v *= c;
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [c](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
    });
}

// c - a
template <typename S>
TensorT<S> rsub_scalar(S c, const TensorT<S>& a) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = c - v;
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
}

template <typename S>
TensorT<S> neg(const TensorT<S>& a) { return mul_scalar(a, S(-1)); }

// ---------------------------------------------------------------------------
// elementwise unary ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> relu(const TensorT<S>& a) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = v > S(0) ? v : S(0);
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& x = self.parents[0]->data;
        for (size_t i = 0; i < g.size(); ++i)
            if (x[i] > S(0)) g[i] += self.grad[i];
    });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& a) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = S(1) / (S(1) + std::exp(-v));
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) {
            S y = self.data[i];
            g[i] += self.grad[i] * y * (S(1) - y);
        }
    });
}

// tanh-approximation GELU; the backward matches this exact forward
template <typename S>
TensorT<S> gelu(const TensorT<S>& a) {
    const S k = S(std::sqrt(2.0 / 3.14159265358979323846));
    std::vector<S> out(a.values());
    for (auto& v : out) {
        S cube = S(0.044715) * v * v * v;
        v = S(0.5) * v * (S(1) + std::tanh(k * (v + cube)));
    }
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [k](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& x = self.parents[0]->data;
        for (size_t i = 0; i < g.size(); ++i) {
            S v = x[i];
            S cube = S(0.044715) * v * v * v;
            S targ = k * (v + cube);
            S t = std::tanh(targ);
            S sech2 = S(1) - t * t;
            S local = S(0.5) * (S(1) + t) + v * S(0.5) * sech2 * k * (S(1) + S(3) * S(0.044715) * v * v);
            g[i] += self.grad[i] * local;
        }
    });
}

template <typename S>
TensorT<S> abs(const TensorT<S>& a) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = std::abs(v);
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& x = self.parents[0]->data;
        for (size_t i = 0; i < g.size(); ++i) {
            if (x[i] > S(0)) g[i] += self.grad[i];
            else if (x[i] < S(0)) g[i] -= self.grad[i];
        }
    });
}

// caller is responsible for keeping inputs strictly positive
template <typename S>
TensorT<S> log(const TensorT<S>& a) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = std::log(v);
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& x = self.parents[0]->data;
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / x[i];
    });
}

template <typename S>
TensorT<S> sqrt(const TensorT<S>& a) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = std::sqrt(v);
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * S(0.5) / self.data[i];
    });
}

template <typename S>
TensorT<S> clamp(const TensorT<S>& a, S lo, S hi) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = std::min(std::max(v, lo), hi);
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [lo, hi](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& x = self.parents[0]->data;
        for (size_t i = 0; i < g.size(); ++i)
            if (x[i] >= lo && x[i] <= hi) g[i] += self.grad[i];
    });
}

template <typename S>
TensorT<S> clamp_min(const TensorT<S>& a, S lo) {
    std::vector<S> out(a.values());
    for (auto& v : out) v = std::max(v, lo);
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [lo](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& x = self.parents[0]->data;
        for (size_t i = 0; i < g.size(); ++i)
            if (x[i] >= lo) g[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// matmul and row/column broadcast helpers (2-D)
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                             " are not compatible");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<S> out(static_cast<size_t>(m) * n, S(0));
    const S* ad = a.values().data();
    const S* bd = b.values().data();
    S* od = out.data();
    const int64_t work = static_cast<int64_t>(m) * n * k;
#ifdef _OPENMP
#pragma omp parallel for if (work > detail::kParallelFlops) schedule(static)
#endif
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const S aik = ad[static_cast<size_t>(i) * k + kk];
            const S* brow = bd + static_cast<size_t>(kk) * n;
            S* orow = od + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    (void)work;
    return TensorT<S>::make_op({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode<S>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const S* g = self.grad.data();
        if (pa.requires_grad) {
            S* da = pa.ensure_grad().data();
            const S* bd = pb.data.data();
            const int64_t work = static_cast<int64_t>(m) * n * k;
#ifdef _OPENMP
#pragma omp parallel for if (work > detail::kParallelFlops) schedule(static)
#endif
            for (int i = 0; i < m; ++i) {
                const S* grow = g + static_cast<size_t>(i) * n;
                S* darow = da + static_cast<size_t>(i) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const S* brow = bd + static_cast<size_t>(kk) * n;
                    S acc = S(0);
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    darow[kk] += acc;
                }
            }
            (void)work;
        }
        if (pb.requires_grad) {
            S* db = pb.ensure_grad().data();
            const S* ad = pa.data.data();
            const int64_t work = static_cast<int64_t>(m) * n * k;
#ifdef _OPENMP
#pragma omp parallel for if (work > detail::kParallelFlops) schedule(static)
#endif
            for (int kk = 0; kk < k; ++kk) {
                S* dbrow = db + static_cast<size_t>(kk) * n;
                for (int i = 0; i < m; ++i) {
                    const S aik = ad[static_cast<size_t>(i) * k + kk];
                    const S* grow = g + static_cast<size_t>(i) * n;
                    for (int j = 0; j < n; ++j) dbrow[j] += aik * grow[j];
                }
            }
            (void)work;
        }
    });
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
    if (a.ndim() != 2) throw DimensionError("transpose: expected 2-D, got " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<S> out(static_cast<size_t>(m) * n);
    const auto& av = a.values();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = av[static_cast<size_t>(i) * n + j];
    return TensorT<S>::make_op({n, m}, std::move(out), {a}, [m, n](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                g[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(j) * m + i];
    });
}

// x[n,m] + v[m] broadcast over rows
template <typename S>
TensorT<S> add_row_vector(const TensorT<S>& x, const TensorT<S>& v) {
    if (x.ndim() != 2 || v.ndim() != 1 || x.dim(1) != v.dim(0))
        throw DimensionError("add_row_vector: shapes " + shape_str(x.shape()) + " and " +
                             shape_str(v.shape()) + " are not compatible");
    const int n = x.dim(0), m = x.dim(1);
    std::vector<S> out(x.values());
    const auto& vv = v.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] += vv[static_cast<size_t>(j)];
    return TensorT<S>::make_op(x.shape(), std::move(out), {x, v}, [n, m](TensorNode<S>& self) {
        auto& px = *self.parents[0];
        auto& pv = *self.parents[1];
        if (px.requires_grad) {
            auto& g = px.ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pv.requires_grad) {
            auto& g = pv.ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) g[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i) * m + j];
        }
    });
}

// scale row i of x[n,m] by s[i]
template <typename S>
TensorT<S> mul_rows(const TensorT<S>& x, const TensorT<S>& s) {
    if (x.ndim() != 2 || s.ndim() != 1 || x.dim(0) != s.dim(0))
        throw DimensionError("mul_rows: shapes " + shape_str(x.shape()) + " and " + shape_str(s.shape()) +
                             " are not compatible");
    const int n = x.dim(0), m = x.dim(1);
    std::vector<S> out(x.values());
    const auto& sv = s.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] *= sv[static_cast<size_t>(i)];
    return TensorT<S>::make_op(x.shape(), std::move(out), {x, s}, [n, m](TensorNode<S>& self) {
        auto& px = *self.parents[0];
        auto& ps = *self.parents[1];
        if (px.requires_grad) {
            auto& g = px.ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    g[static_cast<size_t>(i) * m + j] += self.grad[static_cast<size_t>(i) * m + j] * ps.data[static_cast<size_t>(i)];
        }
        if (ps.requires_grad) {
            auto& g = ps.ensure_grad();
            for (int i = 0; i < n; ++i) {
                S acc = S(0);
                for (int j = 0; j < m; ++j)
                    acc += self.grad[static_cast<size_t>(i) * m + j] * px.data[static_cast<size_t>(i) * m + j];
                g[static_cast<size_t>(i)] += acc;
            }
        }
    });
}

// divide row i of x[n,m] by s[i]
template <typename S>
TensorT<S> div_rows(const TensorT<S>& x, const TensorT<S>& s) {
    if (x.ndim() != 2 || s.ndim() != 1 || x.dim(0) != s.dim(0))
        throw DimensionError("div_rows: shapes " + shape_str(x.shape()) + " and " + shape_str(s.shape()) +
                             " are not compatible");
    const int n = x.dim(0), m = x.dim(1);
    std::vector<S> out(x.values());
    const auto& sv = s.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] /= sv[static_cast<size_t>(i)];
    return TensorT<S>::make_op(x.shape(), std::move(out), {x, s}, [n, m](TensorNode<S>& self) {
        auto& px = *self.parents[0];
        auto& ps = *self.parents[1];
        if (px.requires_grad) {
            auto& g = px.ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    g[static_cast<size_t>(i) * m + j] += self.grad[static_cast<size_t>(i) * m + j] / ps.data[static_cast<size_t>(i)];
        }
        if (ps.requires_grad) {
            auto& g = ps.ensure_grad();
            for (int i = 0; i < n; ++i) {
                S acc = S(0);
                for (int j = 0; j < m; ++j)
                    acc += self.grad[static_cast<size_t>(i) * m + j] * self.data[static_cast<size_t>(i) * m + j];
                g[static_cast<size_t>(i)] -= acc / ps.data[static_cast<size_t>(i)];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
    if (shape_numel(shape) != a.size())
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    std::vector<S> out(a.values());
    return TensorT<S>::make_op(std::move(shape), std::move(out), {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

// out.flat[e] = x.flat[idx[e]]; indices may repeat, backward scatter-adds
template <typename S>
TensorT<S> gather(const TensorT<S>& x, std::vector<int32_t> idx, Shape out_shape) {
    if (shape_numel(out_shape) != static_cast<int64_t>(idx.size()))
        throw DimensionError("gather: index count " + std::to_string(idx.size()) + " does not match shape " +
                             shape_str(out_shape));
    const auto& xv = x.values();
    std::vector<S> out(idx.size());
    for (size_t e = 0; e < idx.size(); ++e) out[e] = xv[static_cast<size_t>(idx[e])];
    return TensorT<S>::make_op(std::move(out_shape), std::move(out), {x},
                               [idx = std::move(idx)](TensorNode<S>& self) {
                                   auto& g = self.parents[0]->ensure_grad();
                                   for (size_t e = 0; e < idx.size(); ++e)
                                       g[static_cast<size_t>(idx[e])] += self.grad[e];
                               });
}

// permute rows of a 2-D tensor: out row r = x row perm[r]
template <typename S>
TensorT<S> permute_rows(const TensorT<S>& x, const std::vector<int32_t>& perm) {
    const int m = x.dim(1);
    std::vector<int32_t> idx(perm.size() * static_cast<size_t>(m));
    size_t e = 0;
    for (int32_t r : perm)
        for (int j = 0; j < m; ++j) idx[e++] = r * m + j;
    return gather(x, std::move(idx), {static_cast<int>(perm.size()), m});
}

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& x, int begin, int count) {
    std::vector<int32_t> perm(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) perm[static_cast<size_t>(i)] = begin + i;
    return permute_rows(x, perm);
}

// slice along the last dimension of a 2-D tensor
template <typename S>
TensorT<S> slice_cols(const TensorT<S>& x, int begin, int count) {
    const int n = x.dim(0), m = x.dim(1);
    std::vector<int32_t> idx(static_cast<size_t>(n) * count);
    size_t e = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < count; ++j) idx[e++] = i * m + begin + j;
    return gather(x, std::move(idx), {n, count});
}

template <typename S>
TensorT<S> concat(const std::vector<TensorT<S>>& ts, int axis) {
    if (ts.empty()) throw DimensionError("concat: no inputs");
    const Shape& s0 = ts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(s0.size()))
        throw DimensionError("concat: axis out of range for " + shape_str(s0));
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s0[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s0.size(); ++i) inner *= s0[i];
    int total_axis = 0;
    for (const auto& t : ts) {
        const Shape& s = t.shape();
        if (s.size() != s0.size()) throw DimensionError("concat: rank mismatch");
        for (size_t i = 0; i < s.size(); ++i)
            if (i != static_cast<size_t>(axis) && s[i] != s0[i])
                throw DimensionError("concat: shapes " + shape_str(s0) + " and " + shape_str(s) +
                                     " differ off-axis");
        total_axis += s[static_cast<size_t>(axis)];
    }
    Shape out_shape = s0;
    out_shape[static_cast<size_t>(axis)] = total_axis;
    std::vector<S> out(static_cast<size_t>(outer) * total_axis * inner);
    std::vector<int> axis_sizes;
    int64_t off = 0;
    for (const auto& t : ts) {
        const int a = t.dim(axis);
        axis_sizes.push_back(a);
        const auto& tv = t.values();
        for (int64_t o = 0; o < outer; ++o)
            std::copy(tv.begin() + o * a * inner, tv.begin() + (o + 1) * a * inner,
                      out.begin() + (o * total_axis + off) * inner);
        off += a;
    }
    return TensorT<S>::make_op(std::move(out_shape), std::move(out), ts,
                               [outer, inner, total_axis, axis_sizes](TensorNode<S>& self) {
                                   int64_t off = 0;
                                   for (size_t p = 0; p < self.parents.size(); ++p) {
                                       const int a = axis_sizes[p];
                                       auto& parent = *self.parents[p];
                                       if (parent.requires_grad) {
                                           auto& g = parent.ensure_grad();
                                           for (int64_t o = 0; o < outer; ++o)
                                               for (int64_t i = 0; i < a * inner; ++i)
                                                   g[static_cast<size_t>(o * a * inner + i)] +=
                                                       self.grad[static_cast<size_t>((o * total_axis + off) * inner + i)];
                                       }
                                       off += a;
                                   }
                               });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> sum_all(const TensorT<S>& a) {
    S acc = S(0);
    for (S v : a.values()) acc += v;
    return TensorT<S>::make_op({1}, {acc}, {a}, [](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& a) {
    const S inv = S(1) / static_cast<S>(a.size());
    S acc = S(0);
    for (S v : a.values()) acc += v;
    return TensorT<S>::make_op({1}, {acc * inv}, {a}, [inv](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0] * inv;
    });
}

namespace detail {
template <typename S>
void reduce_extents(const TensorT<S>& a, int axis, int64_t& outer, int64_t& mid, int64_t& inner) {
    const Shape& s = a.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw DimensionError("reduction: axis out of range for " + shape_str(s));
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    mid = s[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}
template <typename S>
Shape drop_axis(const TensorT<S>& a, int axis) {
    Shape out;
    for (int i = 0; i < a.ndim(); ++i)
        if (i != axis) out.push_back(a.dim(i));
    if (out.empty()) out.push_back(1);
    return out;
}
}  // namespace detail

template <typename S>
TensorT<S> sum_axis(const TensorT<S>& a, int axis) {
    int64_t outer, mid, inner;
    detail::reduce_extents(a, axis, outer, mid, inner);
    std::vector<S> out(static_cast<size_t>(outer * inner), S(0));
    const auto& av = a.values();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t m = 0; m < mid; ++m)
            for (int64_t i = 0; i < inner; ++i)
                out[static_cast<size_t>(o * inner + i)] += av[static_cast<size_t>((o * mid + m) * inner + i)];
    return TensorT<S>::make_op(detail::drop_axis(a, axis), std::move(out), {a},
                               [outer, mid, inner](TensorNode<S>& self) {
                                   auto& g = self.parents[0]->ensure_grad();
                                   for (int64_t o = 0; o < outer; ++o)
                                       for (int64_t m = 0; m < mid; ++m)
                                           for (int64_t i = 0; i < inner; ++i)
                                               g[static_cast<size_t>((o * mid + m) * inner + i)] +=
                                                   self.grad[static_cast<size_t>(o * inner + i)];
                               });
}

template <typename S>
TensorT<S> mean_axis(const TensorT<S>& a, int axis) {
    const S inv = S(1) / static_cast<S>(a.dim(axis));
    return mul_scalar(sum_axis(a, axis), inv);
}

// max over one axis; gradient routes to the first maximal element
template <typename S>
TensorT<S> max_axis(const TensorT<S>& a, int axis) {
    int64_t outer, mid, inner;
    detail::reduce_extents(a, axis, outer, mid, inner);
    std::vector<S> out(static_cast<size_t>(outer * inner));
    std::vector<int32_t> arg(out.size());
    const auto& av = a.values();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
            S best = av[static_cast<size_t>(o * mid * inner + i)];
            int32_t bm = 0;
            for (int64_t m = 1; m < mid; ++m) {
                S v = av[static_cast<size_t>((o * mid + m) * inner + i)];
                if (v > best) {
                    best = v;
                    bm = static_cast<int32_t>(m);
                }
            }
            out[static_cast<size_t>(o * inner + i)] = best;
            arg[static_cast<size_t>(o * inner + i)] = bm;
        }
    return TensorT<S>::make_op(detail::drop_axis(a, axis), std::move(out), {a},
                               [outer, mid, inner, arg = std::move(arg)](TensorNode<S>& self) {
                                   auto& g = self.parents[0]->ensure_grad();
                                   for (int64_t o = 0; o < outer; ++o)
                                       for (int64_t i = 0; i < inner; ++i) {
                                           const int64_t m = arg[static_cast<size_t>(o * inner + i)];
                                           g[static_cast<size_t>((o * mid + m) * inner + i)] +=
                                               self.grad[static_cast<size_t>(o * inner + i)];
                                       }
                               });
}

// ---------------------------------------------------------------------------
// softmax / layer norm
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> softmax(const TensorT<S>& a, int axis) {
    int64_t outer, mid, inner;
    detail::reduce_extents(a, axis, outer, mid, inner);
    std::vector<S> out(a.values());
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
            S* line = out.data() + o * mid * inner + i;
            S mx = line[0];
            for (int64_t m = 1; m < mid; ++m) mx = std::max(mx, line[m * inner]);
            S sum = S(0);
            for (int64_t m = 0; m < mid; ++m) {
                line[m * inner] = std::exp(line[m * inner] - mx);
                sum += line[m * inner];
            }
            const S inv = S(1) / sum;
            for (int64_t m = 0; m < mid; ++m) line[m * inner] *= inv;
        }
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [outer, mid, inner](TensorNode<S>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
                const S* y = self.data.data() + o * mid * inner + i;
                const S* gy = self.grad.data() + o * mid * inner + i;
                S dot = S(0);
                for (int64_t m = 0; m < mid; ++m) dot += gy[m * inner] * y[m * inner];
                S* gx = g.data() + o * mid * inner + i;
                for (int64_t m = 0; m < mid; ++m) gx[m * inner] += y[m * inner] * (gy[m * inner] - dot);
            }
    });
}

// normalization over the last axis of a 2-D tensor, with affine gamma/beta
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                      S eps = S(1e-5)) {
    if (x.ndim() != 2 || gamma.ndim() != 1 || beta.ndim() != 1 || gamma.dim(0) != x.dim(1) ||
        beta.dim(0) != x.dim(1))
        throw DimensionError("layer_norm: shapes " + shape_str(x.shape()) + ", " + shape_str(gamma.shape()) +
                             ", " + shape_str(beta.shape()) + " are not compatible");
    const int n = x.dim(0), d = x.dim(1);
    std::vector<S> out(static_cast<size_t>(n) * d);
    std::vector<S> xhat(out.size());
    std::vector<S> rstd(static_cast<size_t>(n));
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    for (int i = 0; i < n; ++i) {
        const S* row = xv.data() + static_cast<size_t>(i) * d;
        S mean = S(0);
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<S>(d);
        S var = S(0);
        for (int j = 0; j < d; ++j) {
            S diff = row[j] - mean;
            var += diff * diff;
        }
        var /= static_cast<S>(d);
        const S rs = S(1) / std::sqrt(var + eps);
        rstd[static_cast<size_t>(i)] = rs;
        for (int j = 0; j < d; ++j) {
            S h = (row[j] - mean) * rs;
            xhat[static_cast<size_t>(i) * d + j] = h;
            out[static_cast<size_t>(i) * d + j] = h * gv[static_cast<size_t>(j)] + bv[static_cast<size_t>(j)];
        }
    }
    return TensorT<S>::make_op(
        x.shape(), std::move(out), {x, gamma, beta},
        [n, d, xhat = std::move(xhat), rstd = std::move(rstd)](TensorNode<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const auto& gv = pg.data;
            for (int i = 0; i < n; ++i) {
                const S* go = self.grad.data() + static_cast<size_t>(i) * d;
                const S* h = xhat.data() + static_cast<size_t>(i) * d;
                if (pg.requires_grad) {
                    auto& gg = pg.ensure_grad();
                    for (int j = 0; j < d; ++j) gg[static_cast<size_t>(j)] += go[j] * h[j];
                }
                if (pb.requires_grad) {
                    auto& gb = pb.ensure_grad();
                    for (int j = 0; j < d; ++j) gb[static_cast<size_t>(j)] += go[j];
                }
                if (px.requires_grad) {
                    auto& gx = px.ensure_grad();
                    S mean_gh = S(0), mean_ghh = S(0);
                    for (int j = 0; j < d; ++j) {
                        const S gh = go[j] * gv[static_cast<size_t>(j)];
                        mean_gh += gh;
                        mean_ghh += gh * h[j];
                    }
                    mean_gh /= static_cast<S>(d);
                    mean_ghh /= static_cast<S>(d);
                    const S rs = rstd[static_cast<size_t>(i)];
                    for (int j = 0; j < d; ++j) {
                        const S gh = go[j] * gv[static_cast<size_t>(j)];
                        gx[static_cast<size_t>(i) * d + j] += rs * (gh - mean_gh - h[j] * mean_ghh);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// convolution / interpolation (built from gather + matmul so the backward
// comes from the primitives)
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& bias, int stride,
                  int groups = 1) {
    if (x.ndim() != 3 || w.ndim() != 4)
        throw DimensionError("conv2d: expected x[C,H,W] and w[Co,Ci,kh,kw], got " + shape_str(x.shape()) +
                             " and " + shape_str(w.shape()));
    const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int cout = w.dim(0), cig = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (cig * groups != cin || cout % groups != 0)
        throw DimensionError("conv2d: channel mismatch between x " + shape_str(x.shape()) + " and w " +
                             shape_str(w.shape()));
    if (kh > h || kw > wd) throw ConfigError("conv2d: kernel larger than input");
    if (stride < 1 || (h - kh) % stride != 0 || (wd - kw) % stride != 0)
        throw ConfigError("conv2d: stride " + std::to_string(stride) + " does not divide geometry " +
                          shape_str(x.shape()) + " with kernel " + std::to_string(kh) + "x" +
                          std::to_string(kw));
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != cout))
        throw DimensionError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                             std::to_string(cout) + " output channels");

    if (groups > 1) {
        std::vector<TensorT<S>> outs;
        const int cpg_in = cin / groups, cpg_out = cout / groups;
        auto x2 = reshape(x, {cin, h * wd});
        auto wmatg = reshape(w, {cout, cig * kh * kw});
        for (int g = 0; g < groups; ++g) {
            auto xg = reshape(slice_rows(x2, g * cpg_in, cpg_in), {cpg_in, h, wd});
            auto wg = reshape(slice_rows(wmatg, g * cpg_out, cpg_out), {cpg_out, cig, kh, kw});
            TensorT<S> bg;
            if (bias.defined()) {
                std::vector<int32_t> bidx(static_cast<size_t>(cpg_out));
                for (int i = 0; i < cpg_out; ++i) bidx[static_cast<size_t>(i)] = g * cpg_out + i;
                bg = gather(bias, std::move(bidx), {cpg_out});
            }
            outs.push_back(conv2d(xg, wg, bg, stride, 1));
        }
        return concat(outs, 0);
    }

    const int ho = (h - kh) / stride + 1;
    const int wo = (wd - kw) / stride + 1;
    const int k = cin * kh * kw;
    std::vector<int32_t> idx(static_cast<size_t>(ho) * wo * k);
    size_t e = 0;
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
            for (int ci = 0; ci < cin; ++ci)
                for (int dy = 0; dy < kh; ++dy)
                    for (int dx = 0; dx < kw; ++dx)
                        idx[e++] = static_cast<int32_t>((ci * h + oy * stride + dy) * wd + ox * stride + dx);
    auto cols = gather(x, std::move(idx), {ho * wo, k});
    auto wmat = transpose(reshape(w, {cout, k}));
    auto out_mat = matmul(cols, wmat);  // [ho*wo, cout]
    if (bias.defined()) out_mat = add_row_vector(out_mat, bias);
    return reshape(transpose(out_mat), {cout, ho, wo});
}

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, int stride, int groups = 1) {
    return conv2d(x, w, TensorT<S>(), stride, groups);
}

// half-pixel-center bilinear resize of a [C,H,W] tensor
template <typename S>
TensorT<S> bilinear_resize(const TensorT<S>& x, int out_h, int out_w) {
    if (x.ndim() != 3) throw DimensionError("bilinear_resize: expected [C,H,W], got " + shape_str(x.shape()));
    if (out_h < 1 || out_w < 1) throw ConfigError("bilinear_resize: output size must be positive");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const size_t plane = static_cast<size_t>(out_h) * out_w;
    std::vector<int32_t> i00(plane * c), i01(plane * c), i10(plane * c), i11(plane * c);
    std::vector<S> w00(plane * c), w01(plane * c), w10(plane * c), w11(plane * c);
    for (int oy = 0; oy < out_h; ++oy) {
        double sy = (oy + 0.5) * static_cast<double>(h) / out_h - 0.5;
        sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double sx = (ox + 0.5) * static_cast<double>(w) / out_w - 0.5;
            sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            for (int ci = 0; ci < c; ++ci) {
                const size_t e = static_cast<size_t>(ci) * plane + static_cast<size_t>(oy) * out_w + ox;
                i00[e] = static_cast<int32_t>((ci * h + y0) * w + x0);
                i01[e] = static_cast<int32_t>((ci * h + y0) * w + x1);
                i10[e] = static_cast<int32_t>((ci * h + y1) * w + x0);
                i11[e] = static_cast<int32_t>((ci * h + y1) * w + x1);
                w00[e] = static_cast<S>((1 - fy) * (1 - fx));
                w01[e] = static_cast<S>((1 - fy) * fx);
                w10[e] = static_cast<S>(fy * (1 - fx));
                w11[e] = static_cast<S>(fy * fx);
            }
        }
    }
    const Shape os{c, out_h, out_w};
    auto term = [&](std::vector<int32_t>& iv, std::vector<S>& wv) {
        return mul(gather(x, std::move(iv), os), TensorT<S>::from_vector(os, std::move(wv)));
    };
    return add(add(term(i00, w00), term(i01, w01)), add(term(i10, w10), term(i11, w11)));
}

// ---------------------------------------------------------------------------
// composite helpers
// ---------------------------------------------------------------------------

// L2-normalizes each row of x[n,d]; rows with norm below `guard` become
// exactly zero and pass no gradient (the cosine zero-vector convention).
template <typename S>
TensorT<S> row_l2_normalize(const TensorT<S>& x, double guard = 1e-8) {
    const int n = x.dim(0);
    const S g2 = static_cast<S>(guard * guard);
    auto n2 = sum_axis(mul(x, x), 1);
    auto norm = swt::sqrt(clamp_min(n2, g2));
    std::vector<S> mask(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) mask[static_cast<size_t>(i)] = n2.values()[static_cast<size_t>(i)] >= g2 ? S(1) : S(0);
    return mul_rows(div_rows(x, norm), TensorT<S>::from_vector({n}, std::move(mask)));
}

template <typename S>
bool all_finite(const TensorT<S>& t) {
    for (S v : t.values())
        if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// finite-difference gradient checking (run with S = double)
// ---------------------------------------------------------------------------

struct GradCheckReport {
    std::string op_name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

template <typename F>
GradCheckReport grad_check(const std::string& op_name, F&& f, TensorT<double> x, double tol = 1e-4) {
    x.set_requires_grad(true);
    x.clear_grad();
    auto loss = f(x);
    if (loss.size() != 1) throw DimensionError("grad_check: " + op_name + " must produce a scalar");
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss in " + op_name);
    loss.backward();
    std::vector<double> analytic = x.grad();
    for (double v : analytic)
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite gradient in " + op_name);

    GradCheckReport rep{op_name, 0.0, tol, false};
    autograd::NoGradGuard ng;
    auto& xv = x.values();
    for (size_t i = 0; i < xv.size(); ++i) {
        const double orig = xv[i];
        const double eps = 1e-5 * std::max(1.0, std::abs(orig));
        xv[i] = orig + eps;
        const double fp = f(x).item();
        xv[i] = orig - eps;
        const double fm = f(x).item();
        xv[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite perturbed value in " + op_name);
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        rep.max_rel_error = std::max(rep.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    }
    rep.passed = rep.max_rel_error <= tol;
    return rep;
}

// Checks a loss against central differences at selected parameter entries.
template <typename LossFn>
GradCheckReport grad_check_params(const std::string& op_name, LossFn&& loss_fn,
                                  const std::vector<std::pair<TensorT<double>*, size_t>>& entries,
                                  double tol = 1e-3) {
    for (auto& [p, idx] : entries) p->clear_grad();
    auto loss = loss_fn();
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss in " + op_name);
    loss.backward();
    GradCheckReport rep{op_name, 0.0, tol, false};
    std::vector<double> analytic;
    analytic.reserve(entries.size());
    for (auto& [p, idx] : entries)
        analytic.push_back(p->has_grad() ? p->grad()[idx] : 0.0);

    autograd::NoGradGuard ng;
    for (size_t e = 0; e < entries.size(); ++e) {
        auto* p = entries[e].first;
        const size_t idx = entries[e].second;
        const double orig = p->values()[idx];
        const double eps = 1e-5 * std::max(1.0, std::abs(orig));
        p->values()[idx] = orig + eps;
        const double fp = loss_fn().item();
        p->values()[idx] = orig - eps;
        const double fm = loss_fn().item();
        p->values()[idx] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite perturbed value in " + op_name);
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[e]), std::abs(numeric), 1e-8});
        rep.max_rel_error = std::max(rep.max_rel_error, std::abs(analytic[e] - numeric) / denom);
    }
    rep.passed = rep.max_rel_error <= tol;
    return rep;
}

// random init helpers

template <typename S>
TensorT<S> rand_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<S> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<S>(rng.uniform(lo, hi));
    return TensorT<S>::from_vector(std::move(shape), std::move(data));
}

template <typename S>
TensorT<S> rand_normal(Shape shape, Rng& rng, double stddev = 1.0) {
    std::vector<S> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<S>(rng.normal() * stddev);
    return TensorT<S>::from_vector(std::move(shape), std::move(data));
}

template <typename S>
TensorT<S> rand_trunc_normal(Shape shape, Rng& rng, double stddev) {
    std::vector<S> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<S>(rng.trunc_normal(stddev));
    return TensorT<S>::from_vector(std::move(shape), std::move(data));
}

}  // namespace swt
