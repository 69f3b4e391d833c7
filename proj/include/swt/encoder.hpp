#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "swt/config.hpp"
#include "swt/nn.hpp"
#include "swt/tensor.hpp"

namespace swt {

// Spatially arranged patch tokens. `values` is laid out [channels, height, width];
// block internals operate on the equivalent [height*width, channels] matrix.
template <typename S>
struct TokenGridT {
    int channels = 0;
    int height = 0;
    int width = 0;
    TensorT<S> values;
};

using TokenGrid = TokenGridT<float>;

// [C, side, side] -> [side*side, C] token matrix
template <typename S>
TensorT<S> tokens_from_grid(const TensorT<S>& grid) {
    const int c = grid.dim(0), hw = grid.dim(1) * grid.dim(2);
    std::vector<int32_t> idx(static_cast<size_t>(hw) * c);
    size_t e = 0;
    for (int t = 0; t < hw; ++t)
        for (int ci = 0; ci < c; ++ci) idx[e++] = ci * hw + t;
    return gather(grid, std::move(idx), {hw, c});
}

// [T, C] token matrix -> [C, side, side]
template <typename S>
TensorT<S> grid_from_tokens(const TensorT<S>& tokens, int side) {
    const int hw = tokens.dim(0), c = tokens.dim(1);
    std::vector<int32_t> idx(static_cast<size_t>(hw) * c);
    size_t e = 0;
    for (int ci = 0; ci < c; ++ci)
        for (int t = 0; t < hw; ++t) idx[e++] = t * c + ci;
    return gather(tokens, std::move(idx), {c, side, side});
}

namespace winutil {

// row permutation for a cyclic shift by (-shift, -shift):
// out(y, x) = in((y + shift) % side, (x + shift) % side)
inline std::vector<int32_t> roll_perm(int side, int shift) {
    std::vector<int32_t> perm(static_cast<size_t>(side) * side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            perm[static_cast<size_t>(y) * side + x] =
                static_cast<int32_t>(((y + shift) % side) * side + (x + shift) % side);
    return perm;
}

inline std::vector<int32_t> inverse_perm(const std::vector<int32_t>& perm) {
    std::vector<int32_t> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int32_t>(i);
    return inv;
}

// groups tokens so each window occupies a contiguous row range
inline std::vector<int32_t> partition_perm(int side, int window) {
    std::vector<int32_t> perm;
    perm.reserve(static_cast<size_t>(side) * side);
    for (int wy = 0; wy < side / window; ++wy)
        for (int wx = 0; wx < side / window; ++wx)
            for (int iy = 0; iy < window; ++iy)
                for (int ix = 0; ix < window; ++ix)
                    perm.push_back(static_cast<int32_t>((wy * window + iy) * side + wx * window + ix));
    return perm;
}

// Additive attention masks for shifted windows. In rolled coordinates, rows
// and columns beyond side-shift wrapped around from the opposite border;
// token pairs from different wrap regions must not attend. One [t, t] mask
// per window, 0 for allowed pairs and -100 for blocked ones.
template <typename S>
std::vector<std::vector<S>> shift_masks(int side, int window, int shift) {
    const int nw = side / window;
    const int t = window * window;
    std::vector<std::vector<S>> masks(static_cast<size_t>(nw) * nw);
    for (int wy = 0; wy < nw; ++wy)
        for (int wx = 0; wx < nw; ++wx) {
            std::vector<int> group(static_cast<size_t>(t));
            for (int iy = 0; iy < window; ++iy)
                for (int ix = 0; ix < window; ++ix) {
                    const int y = wy * window + iy, x = wx * window + ix;
                    group[static_cast<size_t>(iy) * window + ix] =
                        (y >= side - shift ? 2 : 0) + (x >= side - shift ? 1 : 0);
                }
            std::vector<S> m(static_cast<size_t>(t) * t, S(0));
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j)
                    if (group[static_cast<size_t>(i)] != group[static_cast<size_t>(j)])
                        m[static_cast<size_t>(i) * t + j] = S(-100);
            masks[static_cast<size_t>(wy) * nw + wx] = std::move(m);
        }
    return masks;
}

// relative-position index into a [(2w-1)^2, heads] bias table
inline std::vector<int32_t> relpos_index(int window, int heads, int head) {
    const int t = window * window;
    std::vector<int32_t> idx(static_cast<size_t>(t) * t);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) {
            const int dy = i / window - j / window + window - 1;
            const int dx = i % window - j % window + window - 1;
            idx[static_cast<size_t>(i) * t + j] =
                static_cast<int32_t>((dy * (2 * window - 1) + dx) * heads + head);
        }
    return idx;
}

}  // namespace winutil

// One Swin block: windowed multi-head self-attention (optionally shifted)
// with pre-norm residuals and an MLP.
template <typename S>
struct SwinBlockT {
    int dim = 0;
    int heads = 0;
    int window = 0;
    int shift = 0;

    LayerNormT<S> ln1, ln2;
    TensorT<S> wqkv, bqkv;  // [C, 3C], [3C]
    LinearT<S> proj;        // C -> C
    LinearT<S> fc1, fc2;    // C -> 4C -> C
    TensorT<S> relpos;      // [(2w-1)^2, heads], zero-initialized

    static SwinBlockT init(int dim, int heads, int window, int shift, Rng& rng) {
        SwinBlockT b;
        b.dim = dim;
        b.heads = heads;
        b.window = window;
        b.shift = shift;
        b.ln1 = LayerNormT<S>::init(dim);
        b.ln2 = LayerNormT<S>::init(dim);
        b.wqkv = make_param<S>({dim, 3 * dim}, rng);
        b.bqkv = make_zero_param<S>({3 * dim});
        b.proj = LinearT<S>::init(dim, dim, rng);
        b.fc1 = LinearT<S>::init(dim, 4 * dim, rng);
        b.fc2 = LinearT<S>::init(4 * dim, dim, rng);
        b.relpos = make_zero_param<S>({(2 * window - 1) * (2 * window - 1), heads});
        return b;
    }

    // Attention core on already-normalized tokens; returns pre-projection
    // attended tokens [T, C]. When probs_out is given, the per-window,
    // per-head attention matrices are appended to it (window-major order).
    TensorT<S> attend(const TensorT<S>& normed, int side,
                      std::vector<TensorT<S>>* probs_out = nullptr) const {
        if (side % window != 0)
            throw ConfigError("window_attention: grid side " + std::to_string(side) +
                              " is not divisible by window " + std::to_string(window));
        const int c = dim;
        const int hd = c / heads;
        const int t = window * window;
        const int nw = (side / window) * (side / window);
        const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(hd)));

        auto x = normed;
        if (shift > 0) x = permute_rows(x, winutil::roll_perm(side, shift));
        const auto part_perm = winutil::partition_perm(side, window);
        x = permute_rows(x, part_perm);

        auto qkv = add_row_vector(matmul(x, wqkv), bqkv);  // [T, 3C]

        std::vector<std::vector<S>> masks;
        if (shift > 0) masks = winutil::shift_masks<S>(side, window, shift);

        std::vector<TensorT<S>> window_outs;
        window_outs.reserve(static_cast<size_t>(nw));
        for (int w = 0; w < nw; ++w) {
            auto rows = slice_rows(qkv, w * t, t);  // [t, 3C]
            std::vector<TensorT<S>> head_outs;
            head_outs.reserve(static_cast<size_t>(heads));
            for (int h = 0; h < heads; ++h) {
                auto q = slice_cols(rows, h * hd, hd);
                auto k = slice_cols(rows, c + h * hd, hd);
                auto v = slice_cols(rows, 2 * c + h * hd, hd);
                auto logits = mul_scalar(matmul(q, transpose(k)), scale);
                logits = add(logits, gather(relpos, winutil::relpos_index(window, heads, h), {t, t}));
                if (shift > 0)
                    logits = add(logits, TensorT<S>::from_vector({t, t}, masks[static_cast<size_t>(w)]));
                auto probs = softmax(logits, 1);
                if (probs_out) probs_out->push_back(probs);
                head_outs.push_back(matmul(probs, v));
            }
            window_outs.push_back(heads == 1 ? head_outs[0] : concat(head_outs, 1));
        }
        auto out = nw == 1 ? window_outs[0] : concat(window_outs, 0);

        out = permute_rows(out, winutil::inverse_perm(part_perm));
        if (shift > 0) out = permute_rows(out, winutil::inverse_perm(winutil::roll_perm(side, shift)));
        return out;
    }

    TensorT<S> forward(const TensorT<S>& tokens, int side) const {
        auto x = add(tokens, proj.forward(attend(ln1.forward(tokens), side)));
        return add(x, fc2.forward(gelu(fc1.forward(ln2.forward(x)))));
    }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        ln1.collect_params(prefix + ".ln1", out);
        out.emplace_back(prefix + ".qkv.weight", &wqkv);
        out.emplace_back(prefix + ".qkv.bias", &bqkv);
        out.emplace_back(prefix + ".relpos", &relpos);
        proj.collect_params(prefix + ".proj", out);
        ln2.collect_params(prefix + ".ln2", out);
        fc1.collect_params(prefix + ".mlp.fc1", out);
        fc2.collect_params(prefix + ".mlp.fc2", out);
    }
};

// Concatenates each 2x2 token neighborhood (4C), normalizes, and projects to 2C.
template <typename S>
struct PatchMergeT {
    int in_dim = 0;
    LayerNormT<S> norm;     // over 4C
    TensorT<S> reduction;   // [4C, 2C], no bias

    static PatchMergeT init(int in_dim, Rng& rng) {
        PatchMergeT m;
        m.in_dim = in_dim;
        m.norm = LayerNormT<S>::init(4 * in_dim);
        m.reduction = make_param<S>({4 * in_dim, 2 * in_dim}, rng);
        return m;
    }

    // tokens [side^2, C] -> [(side/2)^2, 2C]
    TensorT<S> forward(const TensorT<S>& tokens, int side) const {
        if (side % 2 != 0)
            throw ConfigError("patch_merge: odd grid side " + std::to_string(side));
        const int c = tokens.dim(1);
        const int half = side / 2;
        std::vector<int32_t> idx(static_cast<size_t>(half) * half * 4 * c);
        size_t e = 0;
        for (int y = 0; y < half; ++y)
            for (int x = 0; x < half; ++x) {
                // neighborhood order: top-left, top-right, bottom-left, bottom-right
                const int rows[4] = {(2 * y) * side + 2 * x, (2 * y) * side + 2 * x + 1,
                                     (2 * y + 1) * side + 2 * x, (2 * y + 1) * side + 2 * x + 1};
                for (int q = 0; q < 4; ++q)
                    for (int ci = 0; ci < c; ++ci) idx[e++] = static_cast<int32_t>(rows[q] * c + ci);
            }
        auto merged = gather(tokens, std::move(idx), {half * half, 4 * c});
        return matmul(norm.forward(merged), reduction);
    }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        norm.collect_params(prefix + ".norm", out);
        out.emplace_back(prefix + ".reduction", &reduction);
    }
};

// Strided-convolution patch embedding followed by layer normalization.
template <typename S>
struct PatchEmbedT {
    int patch = 0;
    TensorT<S> proj_w;  // [D, 3, p, p]
    TensorT<S> proj_b;  // [D]
    LayerNormT<S> norm;

    static PatchEmbedT init(int patch, int embed_dim, Rng& rng) {
        PatchEmbedT pe;
        pe.patch = patch;
        pe.proj_w = make_param<S>({embed_dim, 3, patch, patch}, rng);
        pe.proj_b = make_zero_param<S>({embed_dim});
        pe.norm = LayerNormT<S>::init(embed_dim);
        return pe;
    }

    // image [3, H, W] -> tokens [(H/p)^2, D]
    TensorT<S> forward_tokens(const TensorT<S>& image) const {
        auto grid = conv2d(image, proj_w, proj_b, patch);
        return norm.forward(tokens_from_grid(grid));
    }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        out.emplace_back(prefix + ".proj.weight", &proj_w);
        out.emplace_back(prefix + ".proj.bias", &proj_b);
        norm.collect_params(prefix + ".norm", out);
    }
};

// Four-stage hierarchical encoder. Stage k emits a TokenGrid with
// channels D*2^(k-1) and side N/2^(k-1); the final stage satisfies
// channels = 8D and side = P = N/8.
template <typename S>
struct SwinEncoderT {
    struct Stage {
        std::optional<PatchMergeT<S>> merge;  // absent for stage 1
        std::vector<SwinBlockT<S>> blocks;
    };

    ModelConfig cfg;
    PatchEmbedT<S> embed;
    std::array<Stage, 4> stages;

    static SwinEncoderT init(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        SwinEncoderT enc;
        enc.cfg = cfg;
        enc.embed = PatchEmbedT<S>::init(cfg.patch_size, cfg.embed_dim, rng);
        for (int k = 0; k < 4; ++k) {
            auto& stage = enc.stages[static_cast<size_t>(k)];
            if (k > 0) stage.merge = PatchMergeT<S>::init(cfg.stage_dim(k - 1), rng);
            for (int b = 0; b < cfg.depths[static_cast<size_t>(k)]; ++b) {
                const int shift = b % 2 == 0 ? 0 : cfg.window_size / 2;
                stage.blocks.push_back(
                    SwinBlockT<S>::init(cfg.stage_dim(k), cfg.heads[static_cast<size_t>(k)],
                                        cfg.window_size, shift, rng));
            }
        }
        return enc;
    }

    std::array<TokenGridT<S>, 4> encode(const TensorT<S>& image) const {
        if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.image_size ||
            image.dim(2) != cfg.image_size)
            throw ConfigError("encode: image " + shape_str(image.shape()) + " does not match config size " +
                              std::to_string(cfg.image_size));
        std::array<TokenGridT<S>, 4> outs;
        auto tokens = embed.forward_tokens(image);
        int side = cfg.token_side();
        for (int k = 0; k < 4; ++k) {
            const auto& stage = stages[static_cast<size_t>(k)];
            if (stage.merge) {
                tokens = stage.merge->forward(tokens, side);
                side /= 2;
            }
            for (const auto& block : stage.blocks) tokens = block.forward(tokens, side);
            outs[static_cast<size_t>(k)] =
                TokenGridT<S>{cfg.stage_dim(k), side, side, grid_from_tokens(tokens, side)};
        }
        return outs;
    }

    void collect_params(const std::string& prefix, ParamList<S>& out) {
        embed.collect_params(prefix + ".embed", out);
        for (int k = 0; k < 4; ++k) {
            auto& stage = stages[static_cast<size_t>(k)];
            const std::string sp = prefix + ".stage" + std::to_string(k + 1);
            if (stage.merge) stage.merge->collect_params(sp + ".merge", out);
            for (size_t b = 0; b < stage.blocks.size(); ++b)
                stage.blocks[b].collect_params(sp + ".block" + std::to_string(b), out);
        }
    }
};

}  // namespace swt
