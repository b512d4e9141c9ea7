#include "twmx/kernels.hpp"

#include "twmx/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace twmx {

namespace {

// Output pixels per accumulation tile; keeps the tile resident in L1.
constexpr int64_t kTilePixels = 2048;

std::string dims(int64_t a, int64_t b) { return std::to_string(a) + "x" + std::to_string(b); }

void check_spec(const ConvSpec& spec) {
    if (spec.kernel.h < 1 || spec.kernel.w < 1 || spec.stride.h < 1 || spec.stride.w < 1 ||
        spec.dilation.h < 1 || spec.dilation.w < 1 || spec.groups < 1 || spec.padding.h < 0 ||
        spec.padding.w < 0)
        fail_shape("invalid conv spec: kernel " + dims(spec.kernel.h, spec.kernel.w) + ", stride " +
                   dims(spec.stride.h, spec.stride.w) + ", dilation " + dims(spec.dilation.h, spec.dilation.w) +
                   ", groups " + std::to_string(spec.groups));
}

void check_bias(const ConvWeights& w, const ConvSpec& spec, int64_t out_channels) {
    if (spec.has_bias != w.bias.has_value())
        fail_shape(spec.has_bias ? "conv spec expects a bias vector" : "conv spec has no bias but weights carry one");
    if (w.bias && static_cast<int64_t>(w.bias->size()) != out_channels)
        fail_shape("bias length " + std::to_string(w.bias->size()) + " != out channels " +
                   std::to_string(out_channels));
}

// Half-open range of output indices o with 0 <= o*stride + offset < limit.
std::pair<int64_t, int64_t> valid_range(int64_t offset, int64_t stride, int64_t limit, int64_t out) {
    int64_t lo = 0;
    if (offset < 0) lo = (-offset + stride - 1) / stride;
    int64_t hi = 0;
    if (limit - 1 - offset >= 0) hi = (limit - 1 - offset) / stride + 1;
    hi = std::min(hi, out);
    return {std::min(lo, hi), hi};
}

} // namespace

ConvSpec ConvSpec::same(int64_t k, int64_t stride, int64_t dilation, int64_t groups, bool bias) {
    ConvSpec s;
    s.kernel = {k, k};
    s.stride = {stride, stride};
    s.dilation = {dilation, dilation};
    s.groups = groups;
    s.padding = {dilation * (k - 1) / 2, dilation * (k - 1) / 2};
    s.has_bias = bias;
    return s;
}

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Prelu: return "prelu";
    }
    return "none";
}

Activation parse_activation(const std::string& name) {
    if (name == "none") return Activation::None;
    if (name == "relu") return Activation::Relu;
    if (name == "prelu") return Activation::Prelu;
    fail_shape("unknown activation '" + name + "'");
}

BnActParams BnActParams::identity(int64_t channels, Activation act, float prelu_slope) {
    BnActParams p;
    const auto c = static_cast<size_t>(channels);
    p.gamma.assign(c, 1.0f);
    p.beta.assign(c, 0.0f);
    p.mean.assign(c, 0.0f);
    p.var.assign(c, 1.0f - p.eps);
    p.act = act;
    if (act == Activation::Prelu) p.slope.assign(c, prelu_slope);
    return p;
}

Shape conv2d_output_shape(const Shape& in, const ConvWeights& w, const ConvSpec& spec) {
    check_spec(spec);
    const Shape& ws = w.weights.shape();
    const int64_t out_channels = ws.n;
    if (ws.h != spec.kernel.h || ws.w != spec.kernel.w)
        fail_shape("weight kernel " + dims(ws.h, ws.w) + " != spec kernel " + dims(spec.kernel.h, spec.kernel.w));
    if (in.c % spec.groups != 0 || out_channels % spec.groups != 0)
        fail_shape("channels " + std::to_string(in.c) + "->" + std::to_string(out_channels) +
                   " not divisible by groups " + std::to_string(spec.groups));
    if (ws.c != in.c / spec.groups)
        fail_shape("weight shape " + ws.str() + " expects " + std::to_string(ws.c * spec.groups) +
                   " input channels, got " + std::to_string(in.c));
    check_bias(w, spec, out_channels);
    const int64_t oh = spec.out_h(in.h);
    const int64_t ow = spec.out_w(in.w);
    if (oh < 1 || ow < 1)
        fail_shape("kernel larger than padded input: input " + dims(in.h, in.w) + ", effective kernel " +
                   dims(spec.dilation.h * (spec.kernel.h - 1) + 1, spec.dilation.w * (spec.kernel.w - 1) + 1));
    return Shape{in.n, out_channels, oh, ow};
}

Tensor conv2d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec) {
    const Shape os = conv2d_output_shape(x.shape(), w, spec);
    Tensor out(os);
    const int64_t in_h = x.h(), in_w = x.w();
    const int64_t out_h = os.h, out_w = os.w;
    const int64_t out_per_group = os.c / spec.groups;
    const int64_t in_per_group = x.c() / spec.groups;
    const int64_t kh = spec.kernel.h, kw = spec.kernel.w;
    const int64_t rows_per_tile = std::max<int64_t>(1, kTilePixels / out_w);
    const float* wdata = w.weights.raw();

    parallel_for(os.n * os.c, [&](int64_t job) {
        const int64_t n = job / os.c;
        const int64_t o = job % os.c;
        const int64_t group = o / out_per_group;
        float* dst = out.plane(n, o);
        const float b = w.bias ? (*w.bias)[static_cast<size_t>(o)] : 0.0f;
        std::fill(dst, dst + out_h * out_w, b);
        const float* wrow = wdata + o * in_per_group * kh * kw;

        for (int64_t y0 = 0; y0 < out_h; y0 += rows_per_tile) {
            const int64_t y1 = std::min(out_h, y0 + rows_per_tile);
            for (int64_t ci = 0; ci < in_per_group; ++ci) {
                const float* src = x.plane(n, group * in_per_group + ci);
                for (int64_t ky = 0; ky < kh; ++ky) {
                    const int64_t y_off = ky * spec.dilation.h - spec.padding.h;
                    auto [ylo, yhi] = valid_range(y_off, spec.stride.h, in_h, out_h);
                    ylo = std::max(ylo, y0);
                    yhi = std::min(yhi, y1);
                    for (int64_t kx = 0; kx < kw; ++kx) {
                        const float wv = wrow[(ci * kh + ky) * kw + kx];
                        const int64_t x_off = kx * spec.dilation.w - spec.padding.w;
                        const auto [xlo, xhi] = valid_range(x_off, spec.stride.w, in_w, out_w);
                        for (int64_t oy = ylo; oy < yhi; ++oy) {
                            const float* srow = src + (oy * spec.stride.h + y_off) * in_w;
                            float* drow = dst + oy * out_w;
                            if (spec.stride.w == 1) {
                                const float* shifted = srow + (xlo + x_off);
                                float* d = drow + xlo;
                                const int64_t len = xhi - xlo;
                                for (int64_t i = 0; i < len; ++i) d[i] += wv * shifted[i];
                            } else {
                                const int64_t sw = spec.stride.w;
                                for (int64_t ox = xlo; ox < xhi; ++ox) drow[ox] += wv * srow[ox * sw + x_off];
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

Shape transposed_conv2d_output_shape(const Shape& in, const ConvWeights& w, const ConvSpec& spec) {
    check_spec(spec);
    if (spec.dilation.h != 1 || spec.dilation.w != 1)
        fail_shape("transposed_conv2d supports dilation 1 only, got " + dims(spec.dilation.h, spec.dilation.w));
    if (spec.groups != 1) fail_shape("transposed_conv2d supports groups 1 only, got " + std::to_string(spec.groups));
    const Shape& ws = w.weights.shape();
    if (ws.h != spec.kernel.h || ws.w != spec.kernel.w)
        fail_shape("weight kernel " + dims(ws.h, ws.w) + " != spec kernel " + dims(spec.kernel.h, spec.kernel.w));
    if (ws.n != in.c)
        fail_shape("transposed weight shape " + ws.str() + " expects " + std::to_string(ws.n) +
                   " input channels, got " + std::to_string(in.c));
    check_bias(w, spec, ws.c);
    const int64_t oh = spec.up_h(in.h);
    const int64_t ow = spec.up_w(in.w);
    if (oh < 1 || ow < 1) fail_shape("transposed_conv2d output would be empty");
    return Shape{in.n, ws.c, oh, ow};
}

Tensor transposed_conv2d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec) {
    const Shape os = transposed_conv2d_output_shape(x.shape(), w, spec);
    Tensor out(os);
    const int64_t in_h = x.h(), in_w = x.w();
    const int64_t kh = spec.kernel.h, kw = spec.kernel.w;
    const int64_t out_channels = os.c;
    const float* wdata = w.weights.raw();

    parallel_for(os.n * os.c, [&](int64_t job) {
        const int64_t n = job / os.c;
        const int64_t o = job % os.c;
        float* dst = out.plane(n, o);
        const float b = w.bias ? (*w.bias)[static_cast<size_t>(o)] : 0.0f;
        std::fill(dst, dst + os.h * os.w, b);
        for (int64_t ci = 0; ci < x.c(); ++ci) {
            const float* src = x.plane(n, ci);
            const float* wk = wdata + (ci * out_channels + o) * kh * kw;
            for (int64_t ky = 0; ky < kh; ++ky) {
                for (int64_t kx = 0; kx < kw; ++kx) {
                    const float wv = wk[ky * kw + kx];
                    for (int64_t iy = 0; iy < in_h; ++iy) {
                        const int64_t oy = iy * spec.stride.h - spec.padding.h + ky;
                        if (oy < 0 || oy >= os.h) continue;
                        const float* srow = src + iy * in_w;
                        float* drow = dst + oy * os.w;
                        for (int64_t ix = 0; ix < in_w; ++ix) {
                            const int64_t ox = ix * spec.stride.w - spec.padding.w + kx;
                            if (ox < 0 || ox >= os.w) continue;
                            drow[ox] += wv * srow[ix];
                        }
                    }
                }
            }
        }
    });
    return out;
}

namespace {

struct Tap {
    int64_t i0;
    int64_t i1;
    float frac;
};

std::vector<Tap> taps(int64_t in, int64_t out) {
    std::vector<Tap> result(static_cast<size_t>(out));
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (int64_t t = 0; t < out; ++t) {
        double s = (static_cast<double>(t) + 0.5) * ratio - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        const auto i0 = static_cast<int64_t>(std::floor(s));
        const int64_t i1 = std::min(i0 + 1, in - 1);
        result[static_cast<size_t>(t)] = Tap{i0, i1, static_cast<float>(s - static_cast<double>(i0))};
    }
    return result;
}

} // namespace

Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
    if (x.empty()) fail_shape("bilinear resize of empty tensor " + x.shape().str());
    if (out_h < 1 || out_w < 1) fail_shape("bilinear resize to empty size " + dims(out_h, out_w));
    Tensor out(Shape{x.n(), x.c(), out_h, out_w});
    const auto ty = taps(x.h(), out_h);
    const auto tx = taps(x.w(), out_w);
    const int64_t in_w = x.w();
    parallel_for(x.n() * x.c(), [&](int64_t job) {
        const float* src = x.plane(job / x.c(), job % x.c());
        float* dst = out.plane(job / x.c(), job % x.c());
        for (int64_t oy = 0; oy < out_h; ++oy) {
            const Tap& vy = ty[static_cast<size_t>(oy)];
            const float* r0 = src + vy.i0 * in_w;
            const float* r1 = src + vy.i1 * in_w;
            for (int64_t ox = 0; ox < out_w; ++ox) {
                const Tap& vx = tx[static_cast<size_t>(ox)];
                const float top = std::lerp(r0[vx.i0], r0[vx.i1], vx.frac);
                const float bottom = std::lerp(r1[vx.i0], r1[vx.i1], vx.frac);
                dst[oy * out_w + ox] = std::lerp(top, bottom, vy.frac);
            }
        }
    });
    return out;
}

Tensor bilinear_upsample_x2(const Tensor& x) { return bilinear_resize(x, 2 * x.h(), 2 * x.w()); }

Tensor avg_pool(const Tensor& x, Pair kernel, Pair stride, Pair padding) {
    const int64_t out_h = (x.h() + 2 * padding.h - kernel.h) / stride.h + 1;
    const int64_t out_w = (x.w() + 2 * padding.w - kernel.w) / stride.w + 1;
    if (x.empty() || out_h < 1 || out_w < 1)
        fail_shape("avg_pool output empty for input " + x.shape().str());
    Tensor out(Shape{x.n(), x.c(), out_h, out_w});
    const float inv = 1.0f / static_cast<float>(kernel.h * kernel.w);
    parallel_for(x.n() * x.c(), [&](int64_t job) {
        const float* src = x.plane(job / x.c(), job % x.c());
        float* dst = out.plane(job / x.c(), job % x.c());
        for (int64_t oy = 0; oy < out_h; ++oy) {
            for (int64_t ox = 0; ox < out_w; ++ox) {
                float sum = 0.0f;
                for (int64_t ky = 0; ky < kernel.h; ++ky) {
                    const int64_t iy = oy * stride.h - padding.h + ky;
                    if (iy < 0 || iy >= x.h()) continue;
                    for (int64_t kx = 0; kx < kernel.w; ++kx) {
                        const int64_t ix = ox * stride.w - padding.w + kx;
                        if (ix < 0 || ix >= x.w()) continue;
                        sum += src[iy * x.w() + ix];
                    }
                }
                dst[oy * out_w + ox] = sum * inv;
            }
        }
    });
    return out;
}

Tensor channel_shuffle(const Tensor& x, int64_t groups) {
    if (groups < 1 || x.c() % groups != 0)
        fail_shape("channel_shuffle: " + std::to_string(x.c()) + " channels not divisible by " +
                   std::to_string(groups) + " groups");
    Tensor out(x.shape());
    const int64_t per_group = x.c() / groups;
    const auto bytes = static_cast<size_t>(x.h() * x.w()) * sizeof(float);
    for (int64_t n = 0; n < x.n(); ++n) {
        for (int64_t i = 0; i < groups; ++i) {
            for (int64_t j = 0; j < per_group; ++j) {
                if (bytes > 0) std::memcpy(out.plane(n, j * groups + i), x.plane(n, i * per_group + j), bytes);
            }
        }
    }
    return out;
}

Tensor bn_act(const Tensor& x, const BnActParams& p) {
    const auto c = static_cast<size_t>(x.c());
    if (p.gamma.size() != c || p.beta.size() != c || p.mean.size() != c || p.var.size() != c)
        fail_shape("bn_act: parameter length " + std::to_string(p.gamma.size()) + " != channels " +
                   std::to_string(c));
    if (p.act == Activation::Prelu && p.slope.size() != c)
        fail_shape("bn_act: prelu slope length " + std::to_string(p.slope.size()) + " != channels " +
                   std::to_string(c));
    if (!(p.eps > 0.0f)) fail_shape("bn_act: eps must be positive");
    for (size_t ch = 0; ch < c; ++ch)
        if (p.var[ch] < 0.0f) fail_shape("bn_act: negative variance in channel " + std::to_string(ch));

    Tensor out(x.shape());
    const int64_t plane = x.h() * x.w();
    parallel_for(x.n() * x.c(), [&](int64_t job) {
        const auto ch = static_cast<size_t>(job % x.c());
        const double inv_std = 1.0 / std::sqrt(static_cast<double>(p.var[ch]) + static_cast<double>(p.eps));
        const auto scale = static_cast<float>(static_cast<double>(p.gamma[ch]) * inv_std);
        const auto shift = static_cast<float>(static_cast<double>(p.beta[ch]) -
                                              static_cast<double>(p.mean[ch]) * static_cast<double>(scale));
        const float* src = x.plane(job / x.c(), static_cast<int64_t>(ch));
        float* dst = out.plane(job / x.c(), static_cast<int64_t>(ch));
        for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
        if (p.act == Activation::Relu) {
            for (int64_t i = 0; i < plane; ++i) dst[i] = dst[i] > 0.0f ? dst[i] : 0.0f;
        } else if (p.act == Activation::Prelu) {
            const float a = p.slope[ch];
            for (int64_t i = 0; i < plane; ++i) dst[i] = dst[i] > 0.0f ? dst[i] : a * dst[i];
        }
    });
    return out;
}

} // namespace twmx
