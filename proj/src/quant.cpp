#include "twmx/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace twmx {

namespace {

// Round half to even without depending on the current rounding mode.
double round_half_even(double v) {
    const double floor_v = std::floor(v);
    const double diff = v - floor_v;
    if (diff < 0.5) return floor_v;
    if (diff > 0.5) return floor_v + 1.0;
    return std::fmod(floor_v, 2.0) == 0.0 ? floor_v : floor_v + 1.0;
}

} // namespace

void QuantParams::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) fail_shape("quantization scale must be positive and finite");
    if (zero_point < kQMin || zero_point > kQMax) fail_shape("zero point outside [-128, 127]");
}

QuantParams calibrate(const Tensor& t) {
    if (t.empty()) fail_shape("cannot calibrate an empty tensor");
    double peak = 0.0;
    for (float v : t.data()) {
        if (!std::isfinite(v)) throw Error(ErrorKind::Decode, "cannot calibrate a tensor with non-finite values");
        peak = std::max(peak, std::fabs(static_cast<double>(v)));
    }
    return QuantParams{std::max(peak / static_cast<double>(kQMax), kMinScale), 0};
}

float quant_dequant(float v, const QuantParams& p) {
    const double q = std::clamp(round_half_even(static_cast<double>(v) / p.scale) + p.zero_point,
                                static_cast<double>(kQMin), static_cast<double>(kQMax));
    return static_cast<float>(p.scale * (q - p.zero_point));
}

Tensor quant_dequant(const Tensor& t, const QuantParams& p) {
    p.validate();
    Tensor out(t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) out.data()[i] = quant_dequant(t.data()[i], p);
    return out;
}

QuantReportRow quantize_tensor(const std::string& name, Tensor& t) {
    const QuantParams p = calibrate(t);
    Tensor q = quant_dequant(t, p);
    double worst = 0.0;
    for (int64_t i = 0; i < q.numel(); ++i)
        worst = std::max(worst, std::fabs(static_cast<double>(q.data()[i]) - static_cast<double>(t.data()[i])));
    t = std::move(q);
    return QuantReportRow{name, p, worst};
}

QuantizedStore quantize_model(const WeightStore& weights) {
    QuantizedStore result;
    result.weights = weights;
    for (auto& [path, w] : result.weights.convs()) {
        result.float_bytes += 4 * w.weights.numel();
        result.int8_bytes += w.weights.numel() + 8;
        result.report.push_back(quantize_tensor(path + ".weight", w.weights));
    }
    return result;
}

std::string QuantizedStore::report_csv() const {
    std::ostringstream out;
    out << "tensor,scale,max_abs_error\n";
    char buf[64];
    for (const QuantReportRow& r : report) {
        out << r.tensor << ',';
        std::snprintf(buf, sizeof buf, "%.9g", r.params.scale);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.9g", r.max_abs_error);
        out << buf << '\n';
    }
    return out.str();
}

} // namespace twmx
