#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ddswitch/core.hpp"
#include "ddswitch/rng.hpp"

namespace ddswitch::nn {

/**
 * Layer stack of the waveform classifier:
 *
 *   conv3x3(in -> c1) -> ReLU -> maxpool 2x2 -> conv3x3(c1 -> c2) -> ReLU
 *   -> residual_blocks x [conv3x3 -> ReLU -> conv3x3, + skip, ReLU]
 *   -> global average pool -> dense(c2 -> 2) -> softmax
 *
 * All convolutions are stride 1 with zero padding 1.
 */
struct ArchConfig {
    std::size_t in_channels = 1;
    std::size_t height = 10;
    std::size_t width = 135;
    std::size_t conv1_channels = 8;
    std::size_t conv2_channels = 16;
    std::size_t residual_blocks = 1;

    std::size_t pooled_height() const { return height / 2; }
    std::size_t pooled_width() const { return width / 2; }

    void validate() const {
        if (in_channels == 0 || conv1_channels == 0 || conv2_channels == 0) {
            throw InvalidDimension("ArchConfig: channel counts must be >= 1");
        }
        if (height < 2 || width < 2) throw InvalidDimension("ArchConfig: input must be at least 2 x 2");
    }

    bool operator==(const ArchConfig&) const = default;
};

inline constexpr std::size_t kClasses = 2;

struct ConvSlot {
    std::size_t weight = 0;  // [out][in][3][3]
    std::size_t bias = 0;
    std::size_t in = 0;
    std::size_t out = 0;
};

/// Offsets of every parameter group inside the flat parameter vector.
struct ParamLayout {
    ConvSlot conv1;
    ConvSlot conv2;
    std::vector<std::array<ConvSlot, 2>> residual;
    std::size_t dense_weight = 0;  // [kClasses][c2]
    std::size_t dense_bias = 0;
    std::size_t total = 0;

    explicit ParamLayout(const ArchConfig& a) {
        a.validate();
        auto conv = [&](std::size_t in, std::size_t out) {
            ConvSlot s{total, total + out * in * 9, in, out};
            total += out * in * 9 + out;
            return s;
        };
        conv1 = conv(a.in_channels, a.conv1_channels);
        conv2 = conv(a.conv1_channels, a.conv2_channels);
        for (std::size_t r = 0; r < a.residual_blocks; ++r) {
            auto first = conv(a.conv2_channels, a.conv2_channels);
            auto second = conv(a.conv2_channels, a.conv2_channels);
            residual.push_back({first, second});
        }
        dense_weight = total;
        total += kClasses * a.conv2_channels;
        dense_bias = total;
        total += kClasses;
    }
};

template <typename T>
struct Model {
    ArchConfig arch;
    std::uint64_t init_seed = 0;
    std::vector<T> params;

    template <typename U>
    Model<U> cast() const {
        Model<U> m;
        m.arch = arch;
        m.init_seed = init_seed;
        m.params.assign(params.begin(), params.end());
        return m;
    }

    bool operator==(const Model&) const = default;
};

enum class InitMode { FanInUniform, Zero };

/// Fan-in scaled uniform weights (He for conv layers, LeCun for the dense head), zero biases.
template <typename T = float>
Model<T> init_model(const ArchConfig& arch, std::uint64_t seed, InitMode mode = InitMode::FanInUniform) {
    const ParamLayout layout(arch);
    Model<T> m;
    m.arch = arch;
    m.init_seed = seed;
    m.params.assign(layout.total, T(0));
    if (mode == InitMode::Zero) return m;
    Rng rng(seed);
    auto fill_conv = [&](const ConvSlot& s) {
        const double limit = std::sqrt(6.0 / static_cast<double>(s.in * 9));
        for (std::size_t i = s.weight; i < s.bias; ++i) m.params[i] = static_cast<T>(rng.uniform(-limit, limit));
    };
    fill_conv(layout.conv1);
    fill_conv(layout.conv2);
    for (const auto& block : layout.residual) {
        fill_conv(block[0]);
        fill_conv(block[1]);
    }
    const double limit = std::sqrt(3.0 / static_cast<double>(arch.conv2_channels));
    for (std::size_t i = layout.dense_weight; i < layout.dense_bias; ++i) {
        m.params[i] = static_cast<T>(rng.uniform(-limit, limit));
    }
    return m;
}

namespace detail {

/// out[o] = bias[o] + sum_i w[o][i] (*) in[i]; planes are h x w, zero padded.
template <typename T>
void conv3x3_forward(std::span<const T> in, std::span<T> out, const T* weight, const T* bias, std::size_t cin,
                     std::size_t cout, std::size_t h, std::size_t w) {
    const std::size_t plane = h * w;
    for (std::size_t o = 0; o < cout; ++o) {
        T* dst = out.data() + o * plane;
        std::fill(dst, dst + plane, bias[o]);
        for (std::size_t i = 0; i < cin; ++i) {
            const T* src = in.data() + i * plane;
            const T* k = weight + (o * cin + i) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const T wv = k[ky * 3 + kx];
                    // output row y reads input row y + ky - 1, column x reads x + kx - 1
                    const std::size_t y0 = ky == 0 ? 1 : 0;
                    const std::size_t y1 = ky == 2 ? h - 1 : h;
                    const std::size_t x0 = kx == 0 ? 1 : 0;
                    const std::size_t x1 = kx == 2 ? w - 1 : w;
                    for (std::size_t y = y0; y < y1; ++y) {
                        T* drow = dst + y * w;
                        const T* srow = src + (y + ky - 1) * w + kx - 1;
                        for (std::size_t x = x0; x < x1; ++x) drow[x] += wv * srow[x];
                    }
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients and (optionally) the input gradient.
template <typename T>
void conv3x3_backward(std::span<const T> in, std::span<const T> dout, std::span<T> din, const T* weight, T* dweight,
                      T* dbias, std::size_t cin, std::size_t cout, std::size_t h, std::size_t w) {
    const std::size_t plane = h * w;
    const bool want_input = !din.empty();
    for (std::size_t o = 0; o < cout; ++o) {
        const T* g = dout.data() + o * plane;
        T acc = 0;
        for (std::size_t p = 0; p < plane; ++p) acc += g[p];
        dbias[o] += acc;
        for (std::size_t i = 0; i < cin; ++i) {
            const T* src = in.data() + i * plane;
            T* dsrc = want_input ? din.data() + i * plane : nullptr;
            const T* k = weight + (o * cin + i) * 9;
            T* dk = dweight + (o * cin + i) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const T wv = k[ky * 3 + kx];
                    const std::size_t y0 = ky == 0 ? 1 : 0;
                    const std::size_t y1 = ky == 2 ? h - 1 : h;
                    const std::size_t x0 = kx == 0 ? 1 : 0;
                    const std::size_t x1 = kx == 2 ? w - 1 : w;
                    T dw = 0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const T* grow = g + y * w;
                        const std::size_t off = (y + ky - 1) * w + kx - 1;
                        const T* srow = src + off;
                        for (std::size_t x = x0; x < x1; ++x) dw += grow[x] * srow[x];
                        if (want_input) {
                            T* drow = dsrc + off;
                            for (std::size_t x = x0; x < x1; ++x) drow[x] += wv * grow[x];
                        }
                    }
                    dk[ky * 3 + kx] += dw;
                }
            }
        }
    }
}

template <typename T>
void relu_inplace(std::span<T> v) {
    for (T& x : v) x = x > T(0) ? x : T(0);
}

/// Zeroes gradient entries where the forward activation was clipped.
template <typename T>
void relu_backward(std::span<const T> activated, std::span<T> grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(activated[i] > T(0))) grad[i] = T(0);
    }
}

}  // namespace detail

/// Activations kept from the forward pass for backpropagation. Reusable across calls.
template <typename T>
struct Workspace {
    std::vector<T> input;     // cin x H x W
    std::vector<T> act1;      // c1 x H x W, post-ReLU
    std::vector<T> pooled;    // c1 x H/2 x W/2
    std::vector<std::uint32_t> pool_arg;
    std::vector<T> act2;      // c2 x h x w, post-ReLU (input of the first residual block)
    std::vector<std::vector<T>> res_mid;  // post-ReLU middle activation per block
    std::vector<std::vector<T>> res_out;  // post-ReLU output per block
    std::vector<T> pooled_features;       // c2
    std::array<T, kClasses> logits{};
    std::array<T, kClasses> probs{};

    // scratch for the backward pass
    std::vector<T> g_a, g_b, g_c, g_pool, g_act1;
};

template <typename T>
std::span<const T> block_output(const Workspace<T>& ws) {
    return ws.res_out.empty() ? std::span<const T>(ws.act2) : std::span<const T>(ws.res_out.back());
}

/// Forward pass; `input` holds cin planes of H x W. Returns the class probabilities.
template <typename T, typename In>
const std::array<T, kClasses>& forward(const Model<T>& model, std::span<const In> input, Workspace<T>& ws) {
    const ArchConfig& a = model.arch;
    const ParamLayout layout(a);
    if (model.params.size() != layout.total) throw InvalidDimension("forward: parameter count does not match architecture");
    const std::size_t H = a.height, W = a.width, h = a.pooled_height(), w = a.pooled_width();
    if (input.size() != a.in_channels * H * W) throw InvalidDimension("forward: input does not match architecture");
    const T* p = model.params.data();
    const std::size_t c1 = a.conv1_channels, c2 = a.conv2_channels;

    ws.input.assign(input.begin(), input.end());
    ws.act1.resize(c1 * H * W);
    detail::conv3x3_forward<T>(ws.input, ws.act1, p + layout.conv1.weight, p + layout.conv1.bias, a.in_channels, c1, H, W);
    detail::relu_inplace<T>(ws.act1);

    ws.pooled.resize(c1 * h * w);
    ws.pool_arg.resize(c1 * h * w);
    for (std::size_t c = 0; c < c1; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                std::size_t best = c * H * W + (2 * y) * W + 2 * x;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = c * H * W + (2 * y + dy) * W + 2 * x + dx;
                        if (ws.act1[idx] > ws.act1[best]) best = idx;
                    }
                }
                ws.pooled[c * h * w + y * w + x] = ws.act1[best];
                ws.pool_arg[c * h * w + y * w + x] = static_cast<std::uint32_t>(best);
            }
        }
    }

    ws.act2.resize(c2 * h * w);
    detail::conv3x3_forward<T>(ws.pooled, ws.act2, p + layout.conv2.weight, p + layout.conv2.bias, c1, c2, h, w);
    detail::relu_inplace<T>(ws.act2);

    ws.res_mid.resize(layout.residual.size());
    ws.res_out.resize(layout.residual.size());
    for (std::size_t r = 0; r < layout.residual.size(); ++r) {
        const auto& blk = layout.residual[r];
        std::span<const T> x_in = r == 0 ? std::span<const T>(ws.act2) : std::span<const T>(ws.res_out[r - 1]);
        ws.res_mid[r].resize(c2 * h * w);
        ws.res_out[r].resize(c2 * h * w);
        detail::conv3x3_forward<T>(x_in, ws.res_mid[r], p + blk[0].weight, p + blk[0].bias, c2, c2, h, w);
        detail::relu_inplace<T>(ws.res_mid[r]);
        detail::conv3x3_forward<T>(ws.res_mid[r], ws.res_out[r], p + blk[1].weight, p + blk[1].bias, c2, c2, h, w);
        for (std::size_t i = 0; i < x_in.size(); ++i) ws.res_out[r][i] += x_in[i];
        detail::relu_inplace<T>(ws.res_out[r]);
    }

    const std::span<const T> top = block_output(ws);
    ws.pooled_features.assign(c2, T(0));
    const T inv_area = T(1) / static_cast<T>(h * w);
    for (std::size_t c = 0; c < c2; ++c) {
        T acc = 0;
        for (std::size_t i = 0; i < h * w; ++i) acc += top[c * h * w + i];
        ws.pooled_features[c] = acc * inv_area;
    }

    for (std::size_t k = 0; k < kClasses; ++k) {
        T z = p[layout.dense_bias + k];
        for (std::size_t c = 0; c < c2; ++c) z += p[layout.dense_weight + k * c2 + c] * ws.pooled_features[c];
        ws.logits[k] = z;
    }
    const T zmax = std::max(ws.logits[0], ws.logits[1]);
    T denom = 0;
    for (std::size_t k = 0; k < kClasses; ++k) {
        ws.probs[k] = std::exp(ws.logits[k] - zmax);
        denom += ws.probs[k];
    }
    for (auto& pr : ws.probs) pr /= denom;
    return ws.probs;
}

/// Cross-entropy of the last forward pass against `label`.
template <typename T>
T cross_entropy(const Workspace<T>& ws, std::size_t label) {
    return -std::log(std::max(ws.probs[label], std::numeric_limits<T>::min()));
}

/// Backpropagates the cross-entropy of the last forward pass, adding `scale` * dLoss/dparams into `grad`.
template <typename T>
void backward(const Model<T>& model, Workspace<T>& ws, std::size_t label, std::span<T> grad, T scale = T(1)) {
    const ArchConfig& a = model.arch;
    const ParamLayout layout(a);
    if (grad.size() != layout.total) throw InvalidDimension("backward: gradient buffer has the wrong size");
    const std::size_t H = a.height, W = a.width, h = a.pooled_height(), w = a.pooled_width();
    const std::size_t c1 = a.conv1_channels, c2 = a.conv2_channels;
    const T* p = model.params.data();
    T* g = grad.data();

    std::array<T, kClasses> dz{};
    for (std::size_t k = 0; k < kClasses; ++k) dz[k] = scale * (ws.probs[k] - (k == label ? T(1) : T(0)));

    ws.g_a.assign(c2 * h * w, T(0));
    const T inv_area = T(1) / static_cast<T>(h * w);
    for (std::size_t k = 0; k < kClasses; ++k) {
        g[layout.dense_bias + k] += dz[k];
        for (std::size_t c = 0; c < c2; ++c) g[layout.dense_weight + k * c2 + c] += dz[k] * ws.pooled_features[c];
    }
    for (std::size_t c = 0; c < c2; ++c) {
        T d = 0;
        for (std::size_t k = 0; k < kClasses; ++k) d += dz[k] * p[layout.dense_weight + k * c2 + c];
        d *= inv_area;
        std::fill(ws.g_a.begin() + static_cast<std::ptrdiff_t>(c * h * w),
                  ws.g_a.begin() + static_cast<std::ptrdiff_t>((c + 1) * h * w), d);
    }

    // g_a: gradient w.r.t. the current block output (post-ReLU)
    for (std::size_t r = layout.residual.size(); r-- > 0;) {
        const auto& blk = layout.residual[r];
        std::span<const T> x_in = r == 0 ? std::span<const T>(ws.act2) : std::span<const T>(ws.res_out[r - 1]);
        detail::relu_backward<T>(ws.res_out[r], ws.g_a);
        // g_a is now the gradient at (conv2 output + skip)
        ws.g_b.assign(c2 * h * w, T(0));
        detail::conv3x3_backward<T>(ws.res_mid[r], ws.g_a, ws.g_b, p + blk[1].weight, g + blk[1].weight, g + blk[1].bias,
                                    c2, c2, h, w);
        detail::relu_backward<T>(ws.res_mid[r], ws.g_b);
        ws.g_c.assign(ws.g_a.begin(), ws.g_a.end());  // skip path
        detail::conv3x3_backward<T>(x_in, ws.g_b, ws.g_c, p + blk[0].weight, g + blk[0].weight, g + blk[0].bias, c2, c2,
                                    h, w);
        std::swap(ws.g_a, ws.g_c);
    }

    detail::relu_backward<T>(ws.act2, ws.g_a);
    ws.g_pool.assign(c1 * h * w, T(0));
    detail::conv3x3_backward<T>(ws.pooled, ws.g_a, ws.g_pool, p + layout.conv2.weight, g + layout.conv2.weight,
                                g + layout.conv2.bias, c1, c2, h, w);

    ws.g_act1.assign(c1 * H * W, T(0));
    for (std::size_t i = 0; i < ws.g_pool.size(); ++i) ws.g_act1[ws.pool_arg[i]] += ws.g_pool[i];
    detail::relu_backward<T>(ws.act1, ws.g_act1);
    detail::conv3x3_backward<T>(ws.input, ws.g_act1, std::span<T>{}, p + layout.conv1.weight, g + layout.conv1.weight,
                                g + layout.conv1.bias, a.in_channels, c1, H, W);
}

}  // namespace ddswitch::nn
