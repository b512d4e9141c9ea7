#pragma once

#include "twmx/model.hpp"

#include <string>
#include <vector>

namespace twmx {

/// Per-op parameter and FLOP accounting at a declared input shape.
///
/// Conventions (2 FLOPs per multiply-accumulate):
///   conv            2*kh*kw*(Cin/g)*Cout*Hout*Wout (+1 per output if biased)
///   conv transpose  2*kh*kw*Cin*Cout*Hin*Win
///   add             one per element
///   avg pool 3x3    9 per output element
///   bilinear x2     11 per output element
///   attention       3 per softmax element + 4*k*C per spatial position
///   bn + act        excluded unless flops_include_bn (then 2, +1 with activation)
/// Parameters count learnable values (conv weights/bias, gamma, beta, PReLU
/// slopes); running mean/var are reported as buffers.
struct ComplexityReport {
    std::string variant;
    Shape input;
    bool flops_include_bn = false;
    std::vector<ComplexityRow> rows;
    int64_t total_params = 0;
    int64_t total_buffers = 0;
    int64_t total_flops = 0;

    std::string to_csv() const;
    std::string to_json() const;
};

ComplexityReport analyze(const ModelConfig& config, const Shape& input, TraceOptions options = {});
ComplexityReport count_params(const ModelConfig& config);
ComplexityReport count_flops(const ModelConfig& config, const Shape& input, TraceOptions options = {});

/// Parameters held by the grouped 1x1 convolutions of every EPM Unit.
int64_t grouped_conv_params(const ComplexityReport& report);

struct GroupSweepRow {
    int64_t groups = 0;
    int64_t total_params = 0;
    int64_t grouped_params = 0;
    int64_t total_flops = 0;
};

/// Re-analyzes the config with the group cap overridden to each value.
std::vector<GroupSweepRow> group_sweep(const ModelConfig& config, const std::vector<int64_t>& groups,
                                       const Shape& input);

struct ClassCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t tn = 0;
};

struct MetricReport {
    int64_t num_classes = 0;
    std::vector<ClassCounts> counts;
    std::vector<double> iou;
    double miou = 0.0;
    double pixel_accuracy = 0.0;
    double balanced_accuracy = 0.0;
    int64_t pixels = 0;

    std::string to_json() const;
};

/// Additive confusion accumulator; shards can be merged in any order.
class ConfusionAccumulator {
public:
    explicit ConfusionAccumulator(int64_t num_classes);

    void add(const Tensor& pred, const Tensor& gt);
    void merge(const ConfusionAccumulator& other);
    MetricReport report() const;

private:
    int64_t num_classes_;
    std::vector<int64_t> matrix_; // [gt * K + pred]
};

/// Class absent from both masks: IoU and recall are 1 (counted in the means).
MetricReport seg_metrics(const Tensor& pred_mask, const Tensor& gt_mask, int64_t num_classes);

} // namespace twmx
