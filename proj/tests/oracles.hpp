#pragma once

// Independent reference implementations used by the test suites. Everything
// here is plain scalar loops on std::vector<double>, deliberately sharing no
// code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// c[m,n] = a[m,k] * b[k,n], triple loop
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, int m,
                                  int k, int n) {
    std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int kk = 0; kk < k; ++kk)
                c[static_cast<size_t>(i) * n + j] +=
                    a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(kk) * n + j];
    return c;
}

// per-pixel half-pixel-center bilinear interpolation of one channel
inline std::vector<double> bilinear(const std::vector<double>& src, int h, int w, int oh, int ow) {
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        double sy = (oy + 0.5) * static_cast<double>(h) / oh - 0.5;
        sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, h - 1);
        double fy = sy - y0;
        for (int ox = 0; ox < ow; ++ox) {
            double sx = (ox + 0.5) * static_cast<double>(w) / ow - 0.5;
            sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, w - 1);
            double fx = sx - x0;
            double v = (1 - fy) * (1 - fx) * src[static_cast<size_t>(y0) * w + x0] +
                       (1 - fy) * fx * src[static_cast<size_t>(y0) * w + x1] +
                       fy * (1 - fx) * src[static_cast<size_t>(y1) * w + x0] +
                       fy * fx * src[static_cast<size_t>(y1) * w + x1];
            out[static_cast<size_t>(oy) * ow + ox] = v;
        }
    }
    return out;
}

// cosine similarity with the zero-vector-maps-to-zero convention
inline double cosine(const std::vector<double>& a, const std::vector<double>& b, double guard = 1e-8) {
    double na = 0, nb = 0, dot = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
        dot += a[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < guard || nb < guard) return 0.0;
    return dot / (na * nb);
}

// pairwise |cosine| over rows of tokens[n, d]
inline std::vector<double> affinity(const std::vector<double>& tokens, int n, int d) {
    std::vector<double> s(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::vector<double> a(tokens.begin() + static_cast<size_t>(i) * d,
                                  tokens.begin() + static_cast<size_t>(i + 1) * d);
            std::vector<double> b(tokens.begin() + static_cast<size_t>(j) * d,
                                  tokens.begin() + static_cast<size_t>(j + 1) * d);
            s[static_cast<size_t>(i) * n + j] = std::abs(cosine(a, b));
        }
    return s;
}

// exhaustive seed scoring: Z(c,i) = sum_j S(i,j) M(c,j) / sum_j S(i,j),
// assignment = argmax_c Z with ties to the last (background) class
inline std::vector<int> locate_seeds(const std::vector<double>& s, const std::vector<double>& m,
                                     int classes, int tokens) {
    std::vector<int> assign(static_cast<size_t>(tokens));
    for (int i = 0; i < tokens; ++i) {
        double mass = 0;
        for (int j = 0; j < tokens; ++j) mass += s[static_cast<size_t>(i) * tokens + j];
        int best = classes - 1;
        double best_z = -1;
        for (int c = 0; c < classes; ++c) {
            double z = 0;
            for (int j = 0; j < tokens; ++j)
                z += s[static_cast<size_t>(i) * tokens + j] * m[static_cast<size_t>(c) * tokens + j];
            z = mass > 0 ? z / mass : 0;
            if (z > best_z + 1e-12 || (std::abs(z - best_z) <= 1e-12 && c == classes - 1)) {
                best_z = std::max(best_z, z);
                best = c;
            }
        }
        assign[static_cast<size_t>(i)] = best;
    }
    return assign;
}

// brute-force multi-head attention inside one window.
// tokens[t, c] for the window, qkv weights/bias laid out [c, 3c] / [3c],
// relpos bias table [(2*win-1)^2, heads], mask[t, t] additive.
struct WindowAttentionRef {
    int win = 0;
    int heads = 0;
    std::vector<double> wqkv, bqkv;    // [c][3c], [3c]
    std::vector<double> relpos_table;  // [(2w-1)^2][heads]

    // returns pre-projection attended tokens [t, c]
    std::vector<double> run(const std::vector<double>& x, int t, int c,
                            const std::vector<double>& mask) const {
        const int hd = c / heads;
        // qkv[t][3c]
        std::vector<double> qkv(static_cast<size_t>(t) * 3 * c, 0.0);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < 3 * c; ++j) {
                double acc = bqkv[static_cast<size_t>(j)];
                for (int kk = 0; kk < c; ++kk)
                    acc += x[static_cast<size_t>(i) * c + kk] * wqkv[static_cast<size_t>(kk) * 3 * c + j];
                qkv[static_cast<size_t>(i) * 3 * c + j] = acc;
            }
        std::vector<double> out(static_cast<size_t>(t) * c, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < t; ++i) {
                // logits over j
                std::vector<double> logits(static_cast<size_t>(t));
                for (int j = 0; j < t; ++j) {
                    double dot = 0;
                    for (int e = 0; e < hd; ++e)
                        dot += qkv[static_cast<size_t>(i) * 3 * c + h * hd + e] *
                               qkv[static_cast<size_t>(j) * 3 * c + c + h * hd + e];
                    const int iy = i / win, ix = i % win, jy = j / win, jx = j % win;
                    const int rel = (iy - jy + win - 1) * (2 * win - 1) + (ix - jx + win - 1);
                    logits[static_cast<size_t>(j)] = dot * scale +
                                                     relpos_table[static_cast<size_t>(rel) * heads + h] +
                                                     (mask.empty() ? 0.0 : mask[static_cast<size_t>(i) * t + j]);
                }
                double mx = *std::max_element(logits.begin(), logits.end());
                double sum = 0;
                for (auto& v : logits) {
                    v = std::exp(v - mx);
                    sum += v;
                }
                for (auto& v : logits) v /= sum;
                for (int j = 0; j < t; ++j)
                    for (int e = 0; e < hd; ++e)
                        out[static_cast<size_t>(i) * c + h * hd + e] +=
                            logits[static_cast<size_t>(j)] *
                            qkv[static_cast<size_t>(j) * 3 * c + 2 * c + h * hd + e];
            }
        }
        return out;
    }
};

}  // namespace oracle
