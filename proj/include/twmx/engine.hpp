#pragma once

// Two interchangeable engines drive the block templates in blocks.hpp:
//   Executor - evaluates on tensors with weights from a WeightStore.
//   Tracer   - propagates shapes only, declaring layers and counting
//              parameters/FLOPs as it goes.
// Both see the exact same op sequence, so analyzer shapes and executed shapes
// cannot drift apart silently.

#include "twmx/kernels.hpp"
#include "twmx/weights.hpp"

#include <functional>
#include <string>
#include <vector>

namespace twmx {

/// Spatial softmax per attention map, class centers, and recomposition:
///   A_j = softmax_{h,w}(logits_j),  c_j = sum_{h,w} A_j x,  R = sum_j A_j c_j.
Tensor class_attend(const Tensor& x, const Tensor& logits);

/// Per-map softmax over spatial positions (used by class_attend).
Tensor spatial_softmax(const Tensor& logits);

class Executor {
public:
    using Value = Tensor;
    using TraceFn = std::function<void(const std::string& path, const Shape& shape)>;

    explicit Executor(const WeightStore& store, TraceFn trace = {}) : store_(store), trace_(std::move(trace)) {}

    Tensor conv(const Tensor& x, const std::string& path, const ConvSpec& spec, int64_t out_channels);
    Tensor conv_transpose(const Tensor& x, const std::string& path, const ConvSpec& spec, int64_t out_channels);
    Tensor bn_act(const Tensor& x, const std::string& path, Activation act);
    Tensor shuffle(const Tensor& x, int64_t groups, const std::string& path);
    Tensor avg_pool(const Tensor& x, const std::string& path);
    Tensor add(const Tensor& a, const Tensor& b, const std::string& path);
    Tensor concat(const std::vector<Tensor>& parts, const std::string& path);
    Tensor upsample(const Tensor& x, const std::string& path);
    Tensor attend(const Tensor& x, const Tensor& logits, const std::string& path);

private:
    Tensor record(const std::string& path, Tensor t) const;

    const WeightStore& store_;
    TraceFn trace_;
};

struct ComplexityRow {
    std::string path;
    std::string op;
    int64_t params = 0;  // learnable parameters
    int64_t buffers = 0; // running statistics (not learnable)
    int64_t flops = 0;
    Shape output;
};

struct TraceOptions {
    bool flops_include_bn = false;
};

// FLOPs per output element of the non-convolution ops.
inline constexpr int64_t kBilinearFlopsPerOutput = 11;
inline constexpr int64_t kSoftmaxFlopsPerElement = 3;

class Tracer {
public:
    using Value = Shape;

    explicit Tracer(TraceOptions options = {}) : options_(options) {}

    Shape conv(const Shape& x, const std::string& path, const ConvSpec& spec, int64_t out_channels);
    Shape conv_transpose(const Shape& x, const std::string& path, const ConvSpec& spec, int64_t out_channels);
    Shape bn_act(const Shape& x, const std::string& path, Activation act);
    Shape shuffle(const Shape& x, int64_t groups, const std::string& path);
    Shape avg_pool(const Shape& x, const std::string& path);
    Shape add(const Shape& a, const Shape& b, const std::string& path);
    Shape concat(const std::vector<Shape>& parts, const std::string& path);
    Shape upsample(const Shape& x, const std::string& path);
    Shape attend(const Shape& x, const Shape& logits, const std::string& path);

    const std::vector<LayerDecl>& layers() const noexcept { return layers_; }
    const std::vector<ComplexityRow>& rows() const noexcept { return rows_; }

private:
    Shape row(const std::string& path, const char* op, int64_t params, int64_t buffers, int64_t flops, Shape out);

    TraceOptions options_;
    std::vector<LayerDecl> layers_;
    std::vector<ComplexityRow> rows_;
};

} // namespace twmx
