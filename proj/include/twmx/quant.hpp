#pragma once

#include "twmx/weights.hpp"

#include <string>
#include <vector>

namespace twmx {

inline constexpr int kQMin = -128;
inline constexpr int kQMax = 127;
inline constexpr double kMinScale = 1e-12;

/// Per-tensor affine signed 8-bit grid: value = scale * (q - zero_point).
struct QuantParams {
    double scale = 1.0;
    int zero_point = 0;

    void validate() const;
};

/// Symmetric calibration: scale = max|t| / 127 (floored at 1e-12), zero point 0.
QuantParams calibrate(const Tensor& t);

/// Quantize then dequantize with round-half-to-even and saturation.
Tensor quant_dequant(const Tensor& t, const QuantParams& p);
float quant_dequant(float v, const QuantParams& p);

struct QuantReportRow {
    std::string tensor;
    QuantParams params;
    double max_abs_error = 0.0;
};

/// Calibrates and replaces `t` with its quant-dequant image in place.
QuantReportRow quantize_tensor(const std::string& name, Tensor& t);

struct QuantizedStore {
    WeightStore weights;
    std::vector<QuantReportRow> report;

    /// tensor,scale,max_abs_error
    std::string report_csv() const;
    /// Bytes of the conv weights at 32-bit versus 8-bit storage (+ one scale and zero point each).
    int64_t float_bytes = 0;
    int64_t int8_bytes = 0;
};

/// Replaces every convolution weight tensor with its quant-dequant image
/// under its own calibration. Biases and normalization stay in full precision.
QuantizedStore quantize_model(const WeightStore& weights);

} // namespace twmx
