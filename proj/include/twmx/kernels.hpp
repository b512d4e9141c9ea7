#pragma once

#include "twmx/tensor.hpp"

#include <optional>
#include <vector>

namespace twmx {

struct Pair {
    int64_t h = 1;
    int64_t w = 1;
    friend bool operator==(const Pair&, const Pair&) = default;
};

struct ConvSpec {
    Pair kernel{1, 1};
    Pair stride{1, 1};
    Pair dilation{1, 1};
    int64_t groups = 1;
    Pair padding{0, 0};
    bool has_bias = false;

    /// Square kernel with "same-like" padding: d*(k-1)/2 per axis, so odd
    /// kernels keep the spatial size at stride 1.
    static ConvSpec same(int64_t k, int64_t stride = 1, int64_t dilation = 1, int64_t groups = 1,
                         bool bias = false);

    int64_t out_h(int64_t in_h) const { return (in_h + 2 * padding.h - dilation.h * (kernel.h - 1) - 1) / stride.h + 1; }
    int64_t out_w(int64_t in_w) const { return (in_w + 2 * padding.w - dilation.w * (kernel.w - 1) - 1) / stride.w + 1; }

    // Transposed-convolution output size (no dilation).
    int64_t up_h(int64_t in_h) const { return (in_h - 1) * stride.h - 2 * padding.h + kernel.h; }
    int64_t up_w(int64_t in_w) const { return (in_w - 1) * stride.w - 2 * padding.w + kernel.w; }
};

/// Convolution weights laid out as (out_channels, in_channels / groups, kh, kw)
/// in the tensor's (n, c, h, w) slots. Transposed convolutions reuse the
/// layout of their adjoint convolution: (in_channels, out_channels, kh, kw).
struct ConvWeights {
    Tensor weights;
    std::optional<std::vector<float>> bias;

    int64_t rows() const { return weights.n(); }
    int64_t cols() const { return weights.c(); }
};

enum class Activation { None, Relu, Prelu };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct BnActParams {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> mean;
    std::vector<float> var;
    float eps = 1e-5f;
    Activation act = Activation::None;
    std::vector<float> slope; // PReLU only

    int64_t channels() const { return static_cast<int64_t>(gamma.size()); }

    /// gamma 1, beta 0, mean 0, var 1 - eps: the normalization is an exact identity.
    static BnActParams identity(int64_t channels, Activation act, float prelu_slope = 0.25f);
};

/// Validates spec, weight shape, and input against each other; returns the output shape.
Shape conv2d_output_shape(const Shape& in, const ConvWeights& w, const ConvSpec& spec);
Shape transposed_conv2d_output_shape(const Shape& in, const ConvWeights& w, const ConvSpec& spec);

Tensor conv2d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec);
Tensor transposed_conv2d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec);

/// x2 bilinear resize with half-pixel centers and edge clamping.
Tensor bilinear_upsample_x2(const Tensor& x);

/// General bilinear resize with the same sampling convention; used to bring
/// arbitrary input images to the network resolution.
Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w);

/// Average pooling; the divisor is always the full window (padding counted).
Tensor avg_pool(const Tensor& x, Pair kernel = {3, 3}, Pair stride = {2, 2}, Pair padding = {1, 1});

Tensor channel_shuffle(const Tensor& x, int64_t groups);

Tensor bn_act(const Tensor& x, const BnActParams& p);

} // namespace twmx
