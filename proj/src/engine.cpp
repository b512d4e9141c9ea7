#include "twmx/engine.hpp"

#include "twmx/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace twmx {

namespace {

template <typename Fn>
auto with_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), "layer '" + path + "': " + e.what());
    }
}

} // namespace

Tensor spatial_softmax(const Tensor& logits) {
    Tensor out(logits.shape());
    const int64_t plane = logits.h() * logits.w();
    parallel_for(logits.n() * logits.c(), [&](int64_t job) {
        const float* src = logits.plane(job / logits.c(), job % logits.c());
        float* dst = out.plane(job / logits.c(), job % logits.c());
        const float peak = *std::max_element(src, src + plane);
        double total = 0.0;
        for (int64_t i = 0; i < plane; ++i) {
            const double e = std::exp(static_cast<double>(src[i]) - static_cast<double>(peak));
            dst[i] = static_cast<float>(e);
            total += e;
        }
        const double inv = 1.0 / total;
        for (int64_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(static_cast<double>(dst[i]) * inv);
    });
    return out;
}

Tensor class_attend(const Tensor& x, const Tensor& logits) {
    if (logits.n() != x.n() || logits.h() != x.h() || logits.w() != x.w())
        fail_shape("class_attend: logits " + logits.shape().str() + " incompatible with features " + x.shape().str());
    const Tensor attn = spatial_softmax(logits);
    const int64_t maps = logits.c();
    const int64_t channels = x.c();
    const int64_t plane = x.h() * x.w();
    Tensor out(x.shape());

    for (int64_t n = 0; n < x.n(); ++n) {
        // centers[j * C + c]
        std::vector<float> centers(static_cast<size_t>(maps * channels));
        parallel_for(maps * channels, [&](int64_t job) {
            const float* a = attn.plane(n, job / channels);
            const float* f = x.plane(n, job % channels);
            double sum = 0.0;
            for (int64_t i = 0; i < plane; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(f[i]);
            centers[static_cast<size_t>(job)] = static_cast<float>(sum);
        });
        parallel_for(channels, [&](int64_t c) {
            float* dst = out.plane(n, c);
            std::fill(dst, dst + plane, 0.0f);
            for (int64_t j = 0; j < maps; ++j) {
                const float cj = centers[static_cast<size_t>(j * channels + c)];
                const float* a = attn.plane(n, j);
                for (int64_t i = 0; i < plane; ++i) dst[i] += a[i] * cj;
            }
        });
    }
    return out;
}

Tensor Executor::record(const std::string& path, Tensor t) const {
    if (trace_) trace_(path, t.shape());
    return t;
}

Tensor Executor::conv(const Tensor& x, const std::string& path, const ConvSpec& spec, int64_t out_channels) {
    return with_path(path, [&] {
        const ConvWeights& w = store_.conv(path);
        if (w.rows() != out_channels)
            fail_shape("weights produce " + std::to_string(w.rows()) + " channels, expected " +
                       std::to_string(out_channels));
        return record(path, conv2d(x, w, spec));
    });
}

Tensor Executor::conv_transpose(const Tensor& x, const std::string& path, const ConvSpec& spec, int64_t out_channels) {
    return with_path(path, [&] {
        const ConvWeights& w = store_.conv(path);
        if (w.cols() != out_channels)
            fail_shape("weights produce " + std::to_string(w.cols()) + " channels, expected " +
                       std::to_string(out_channels));
        return record(path, transposed_conv2d(x, w, spec));
    });
}

Tensor Executor::bn_act(const Tensor& x, const std::string& path, Activation act) {
    return with_path(path, [&] {
        const BnActParams& p = store_.norm(path);
        if (p.act != act)
            fail_shape(std::string("activation ") + activation_name(p.act) + " != expected " + activation_name(act));
        return record(path, twmx::bn_act(x, p));
    });
}

Tensor Executor::shuffle(const Tensor& x, int64_t groups, const std::string& path) {
    return with_path(path, [&] { return record(path, channel_shuffle(x, groups)); });
}

Tensor Executor::avg_pool(const Tensor& x, const std::string& path) {
    return with_path(path, [&] { return record(path, twmx::avg_pool(x)); });
}

Tensor Executor::add(const Tensor& a, const Tensor& b, const std::string& path) {
    return with_path(path, [&] { return record(path, twmx::add(a, b)); });
}

Tensor Executor::concat(const std::vector<Tensor>& parts, const std::string& path) {
    return with_path(path, [&] { return record(path, concat_channels(std::span<const Tensor>(parts))); });
}

Tensor Executor::upsample(const Tensor& x, const std::string& path) {
    return with_path(path, [&] { return record(path, bilinear_upsample_x2(x)); });
}

Tensor Executor::attend(const Tensor& x, const Tensor& logits, const std::string& path) {
    return with_path(path, [&] { return record(path, class_attend(x, logits)); });
}

Shape Tracer::row(const std::string& path, const char* op, int64_t params, int64_t buffers, int64_t flops, Shape out) {
    rows_.push_back(ComplexityRow{path, op, params, buffers, flops, out});
    return out;
}

Shape Tracer::conv(const Shape& x, const std::string& path, const ConvSpec& spec, int64_t out_channels) {
    return with_path(path, [&] {
        ConvWeights probe{Tensor(Shape{out_channels, x.c / std::max<int64_t>(1, spec.groups), spec.kernel.h, spec.kernel.w}),
                          spec.has_bias ? std::optional(std::vector<float>(static_cast<size_t>(out_channels))) : std::nullopt};
        const Shape out = conv2d_output_shape(x, probe, spec);
        layers_.push_back(LayerDecl{path, LayerKind::Conv, spec, x.c, out_channels, Activation::None});
        const int64_t macs_per_out = spec.kernel.h * spec.kernel.w * (x.c / spec.groups);
        const int64_t params = macs_per_out * out_channels + (spec.has_bias ? out_channels : 0);
        const int64_t flops = 2 * macs_per_out * out.numel() + (spec.has_bias ? out.numel() : 0);
        return row(path, "conv", params, 0, flops, out);
    });
}

Shape Tracer::conv_transpose(const Shape& x, const std::string& path, const ConvSpec& spec, int64_t out_channels) {
    return with_path(path, [&] {
        ConvWeights probe{Tensor(Shape{x.c, out_channels, spec.kernel.h, spec.kernel.w}),
                          spec.has_bias ? std::optional(std::vector<float>(static_cast<size_t>(out_channels))) : std::nullopt};
        const Shape out = transposed_conv2d_output_shape(x, probe, spec);
        layers_.push_back(LayerDecl{path, LayerKind::ConvTranspose, spec, x.c, out_channels, Activation::None});
        const int64_t params = spec.kernel.h * spec.kernel.w * x.c * out_channels + (spec.has_bias ? out_channels : 0);
        // Every input element scatters one kh x kw stamp per output channel.
        const int64_t flops = 2 * spec.kernel.h * spec.kernel.w * x.c * out_channels * x.n * x.h * x.w +
                              (spec.has_bias ? out.numel() : 0);
        return row(path, "conv_transpose", params, 0, flops, out);
    });
}

Shape Tracer::bn_act(const Shape& x, const std::string& path, Activation act) {
    layers_.push_back(LayerDecl{path, LayerKind::BnAct, ConvSpec{}, x.c, x.c, act});
    const int64_t params = 2 * x.c + (act == Activation::Prelu ? x.c : 0);
    int64_t flops = 0;
    if (options_.flops_include_bn) flops = 2 * x.numel() + (act == Activation::None ? 0 : x.numel());
    return row(path, "bn_act", params, 2 * x.c, flops, x);
}

Shape Tracer::shuffle(const Shape& x, int64_t groups, const std::string& path) {
    if (groups < 1 || x.c % groups != 0)
        fail_shape("layer '" + path + "': " + std::to_string(x.c) + " channels not divisible by " +
                   std::to_string(groups) + " groups");
    return row(path, "shuffle", 0, 0, 0, x);
}

Shape Tracer::avg_pool(const Shape& x, const std::string& path) {
    const Shape out{x.n, x.c, (x.h + 2 - 3) / 2 + 1, (x.w + 2 - 3) / 2 + 1};
    if (out.h < 1 || out.w < 1) fail_shape("layer '" + path + "': pooling output empty for " + x.str());
    return row(path, "avg_pool", 0, 0, 9 * out.numel(), out);
}

Shape Tracer::add(const Shape& a, const Shape& b, const std::string& path) {
    if (a != b) fail_shape("layer '" + path + "': elementwise shape mismatch: " + a.str() + " vs " + b.str());
    return row(path, "add", 0, 0, a.numel(), a);
}

Shape Tracer::concat(const std::vector<Shape>& parts, const std::string& path) {
    if (parts.empty()) fail_shape("layer '" + path + "': concat of empty list");
    Shape out = parts.front();
    out.c = 0;
    for (const Shape& p : parts) {
        if (p.n != out.n || p.h != out.h || p.w != out.w)
            fail_shape("layer '" + path + "': concat " + p.str() + " incompatible with " + parts.front().str());
        out.c += p.c;
    }
    return row(path, "concat", 0, 0, 0, out);
}

Shape Tracer::upsample(const Shape& x, const std::string& path) {
    const Shape out{x.n, x.c, 2 * x.h, 2 * x.w};
    return row(path, "bilinear_x2", 0, 0, kBilinearFlopsPerOutput * out.numel(), out);
}

Shape Tracer::attend(const Shape& x, const Shape& logits, const std::string& path) {
    if (logits.n != x.n || logits.h != x.h || logits.w != x.w)
        fail_shape("layer '" + path + "': attention maps " + logits.str() + " incompatible with " + x.str());
    const int64_t spatial = x.n * x.h * x.w;
    const int64_t flops = kSoftmaxFlopsPerElement * logits.c * spatial // softmax
                          + 2 * logits.c * x.c * spatial                // centers
                          + 2 * logits.c * x.c * spatial;               // recomposition
    return row(path, "class_attend", 0, 0, flops, x);
}

} // namespace twmx
