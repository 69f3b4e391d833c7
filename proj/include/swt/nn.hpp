#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swt/tensor.hpp"

namespace swt {

template <typename S>
using ParamList = std::vector<std::pair<std::string, TensorT<S>*>>;

namespace init {
inline constexpr double kProjStddev = 0.02;  // truncated normal for all projections
}

template <typename S>
TensorT<S> make_param(Shape shape, Rng& rng, double stddev = init::kProjStddev) {
    auto t = rand_trunc_normal<S>(std::move(shape), rng, stddev);
    t.set_requires_grad(true);
    return t;
}

template <typename S>
TensorT<S> make_zero_param(Shape shape) {
    auto t = TensorT<S>::zeros(std::move(shape));
    t.set_requires_grad(true);
    return t;
}

template <typename S>
TensorT<S> make_const_param(Shape shape, S value) {
    auto t = TensorT<S>::full(std::move(shape), value);
    t.set_requires_grad(true);
    return t;
}

template <typename S>
struct LinearT {
    TensorT<S> weight;  // [in, out]
    TensorT<S> bias;    // [out]; undefined when the layer has no bias

    static LinearT init(int in, int out, Rng& rng, bool with_bias = true) {
        LinearT l;
        l.weight = make_param<S>({in, out}, rng);
        if (with_bias) l.bias = make_zero_param<S>({out});
        return l;
    }

    TensorT<S> forward(const TensorT<S>& x) const {
        auto y = matmul(x, weight);
        return bias.defined() ? add_row_vector(y, bias) : y;
    }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        out.emplace_back(prefix + ".weight", &weight);
        if (bias.defined()) out.emplace_back(prefix + ".bias", &bias);
    }
};

template <typename S>
struct LayerNormT {
    TensorT<S> gamma, beta;

    static LayerNormT init(int dim) {
        LayerNormT ln;
        ln.gamma = make_const_param<S>({dim}, S(1));
        ln.beta = make_zero_param<S>({dim});
        return ln;
    }

    TensorT<S> forward(const TensorT<S>& x) const { return layer_norm(x, gamma, beta); }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        out.emplace_back(prefix + ".gamma", &gamma);
        out.emplace_back(prefix + ".beta", &beta);
    }
};

}  // namespace swt
