#pragma once

#include <string>

#include "swt/encoder.hpp"
#include "swt/nn.hpp"
#include "swt/tensor.hpp"

namespace swt {

// Per-class spatial maps. When `normalized` is set every value is in [0,1]
// and each channel either peaks at ~1 or is identically zero.
template <typename S>
struct ActivationMapsT {
    int num_classes = 0;  // C, or C+1 once a background channel is attached
    int side = 0;
    TensorT<S> values;  // [num_classes, side, side]
    bool normalized = false;
};

using ActivationMaps = ActivationMapsT<float>;

template <typename S>
struct ClassScoresT {
    TensorT<S> logits;  // [C]
    TensorT<S> scores;  // [C], sigmoid(logits)
};

inline constexpr double kCamNormEps = 1e-5;

// 1x1 convolution (no bias) turning final-stage tokens into C raw maps.
template <typename S>
struct CamHeadT {
    int in_dim = 0;
    int num_classes = 0;
    TensorT<S> conv_w;  // [C, 8D, 1, 1]

    static CamHeadT init(int in_dim, int num_classes, Rng& rng) {
        CamHeadT h;
        h.in_dim = in_dim;
        h.num_classes = num_classes;
        h.conv_w = make_param<S>({num_classes, in_dim, 1, 1}, rng);
        return h;
    }

    ActivationMapsT<S> compute_fout(const TokenGridT<S>& t_out) const {
        if (t_out.channels != in_dim)
            throw ConfigError("compute_fout: token grid has " + std::to_string(t_out.channels) +
                              " channels, head expects " + std::to_string(in_dim));
        return {num_classes, t_out.height, conv2d(t_out.values, conv_w, 1), false};
    }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        out.emplace_back(prefix + ".conv.weight", &conv_w);
    }
};

// logits are the spatial mean of each raw map; scores their sigmoid
template <typename S>
ClassScoresT<S> class_scores(const ActivationMapsT<S>& f_out) {
    auto flat = reshape(f_out.values, {f_out.num_classes, f_out.side * f_out.side});
    auto logits = mean_axis(flat, 1);
    return {logits, sigmoid(logits)};
}

// relu followed by per-channel spatial max-normalization: x / (max(x) + eps).
// All-negative channels come out identically zero.
template <typename S>
ActivationMapsT<S> normalize_cam(const ActivationMapsT<S>& f_out) {
    auto flat = relu(reshape(f_out.values, {f_out.num_classes, f_out.side * f_out.side}));
    auto denom = add_scalar(max_axis(flat, 1), static_cast<S>(kCamNormEps));
    auto out = reshape(div_rows(flat, denom), {f_out.num_classes, f_out.side, f_out.side});
    return {f_out.num_classes, f_out.side, out, true};
}

// bilinear upsampling of normalized maps to image resolution
template <typename S>
ActivationMapsT<S> upsample_cam(const ActivationMapsT<S>& c_out, int h, int w) {
    if (h != w) throw ConfigError("upsample_cam: maps are square, got " + std::to_string(h) + "x" +
                                  std::to_string(w));
    return {c_out.num_classes, h, bilinear_resize(c_out.values, h, w), c_out.normalized};
}

}  // namespace swt
