#include "twmx/analysis.hpp"

#include "json.hpp"

#include <cmath>
#include <sstream>

namespace twmx {

using nlohmann::json;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_epm_grouped_conv(const ComplexityRow& row) {
    return row.op == "conv" && row.path.rfind("encoder.stage", 0) == 0 &&
           (ends_with(row.path, ".project") || ends_with(row.path, ".expand"));
}

double ratio(int64_t num, int64_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

long double exact_ratio(int64_t num, int64_t den) {
    return den == 0 ? 1.0L : static_cast<long double>(num) / static_cast<long double>(den);
}

} // namespace

ComplexityReport analyze(const ModelConfig& config, const Shape& input, TraceOptions options) {
    config.validate();
    if (input.c != 3 || input.n < 1 || input.h % 8 != 0 || input.w % 8 != 0 || input.h < 8 || input.w < 8)
        fail_shape("analyze: input must be (n, 3, h, w) with h, w positive multiples of 8, got " + input.str());
    Tracer tracer(options);
    run_network(tracer, config, input);
    ComplexityReport report;
    report.variant = config.variant;
    report.input = input;
    report.flops_include_bn = options.flops_include_bn;
    report.rows = tracer.rows();
    for (const ComplexityRow& r : report.rows) {
        report.total_params += r.params;
        report.total_buffers += r.buffers;
        report.total_flops += r.flops;
    }
    return report;
}

ComplexityReport count_params(const ModelConfig& config) {
    return analyze(config, Shape{1, 3, kInputHeight, kInputWidth});
}

ComplexityReport count_flops(const ModelConfig& config, const Shape& input, TraceOptions options) {
    return analyze(config, input, options);
}

int64_t grouped_conv_params(const ComplexityReport& report) {
    int64_t total = 0;
    for (const ComplexityRow& r : report.rows)
        if (is_epm_grouped_conv(r)) total += r.params;
    return total;
}

std::vector<GroupSweepRow> group_sweep(const ModelConfig& config, const std::vector<int64_t>& groups,
                                       const Shape& input) {
    std::vector<GroupSweepRow> rows;
    for (int64_t g : groups) {
        if (g < 1) fail_shape("group sweep values must be positive, got " + std::to_string(g));
        ModelConfig c = config;
        c.group_override = g;
        const ComplexityReport r = analyze(c, input);
        rows.push_back(GroupSweepRow{g, r.total_params, grouped_conv_params(r), r.total_flops});
    }
    return rows;
}

std::string ComplexityReport::to_csv() const {
    std::ostringstream out;
    out << "layer,params,flops\n";
    for (const ComplexityRow& r : rows) out << r.path << ',' << r.params << ',' << r.flops << '\n';
    out << "total," << total_params << ',' << total_flops << '\n';
    return out.str();
}

std::string ComplexityReport::to_json() const {
    json j;
    j["variant"] = variant;
    j["input_shape"] = {input.n, input.c, input.h, input.w};
    j["flops_include_bn"] = flops_include_bn;
    j["total_params"] = total_params;
    j["total_buffers"] = total_buffers;
    j["total_flops"] = total_flops;
    json layers = json::array();
    for (const ComplexityRow& r : rows) {
        layers.push_back({{"layer", r.path},
                          {"op", r.op},
                          {"params", r.params},
                          {"buffers", r.buffers},
                          {"flops", r.flops},
                          {"output_shape", {r.output.n, r.output.c, r.output.h, r.output.w}}});
    }
    j["layers"] = std::move(layers);
    return j.dump(2) + "\n";
}

ConfusionAccumulator::ConfusionAccumulator(int64_t num_classes) : num_classes_(num_classes) {
    if (num_classes < 1) throw Error(ErrorKind::Usage, "num_classes must be positive");
    matrix_.assign(static_cast<size_t>(num_classes * num_classes), 0);
}

void ConfusionAccumulator::add(const Tensor& pred, const Tensor& gt) {
    if (pred.shape() != gt.shape())
        fail_shape("mask shape mismatch: " + pred.shape().str() + " vs " + gt.shape().str());
    auto label = [&](float v, const char* which) {
        const float r = std::nearbyint(v);
        if (r != v || r < 0.0f || r >= static_cast<float>(num_classes_))
            fail_shape(std::string(which) + " label " + std::to_string(v) + " outside [0, " +
                       std::to_string(num_classes_) + ")");
        return static_cast<int64_t>(r);
    };
    const auto p = pred.data();
    const auto g = gt.data();
    // Validate first so a bad label leaves the accumulator untouched.
    std::vector<int64_t> cells(p.size());
    for (size_t i = 0; i < p.size(); ++i) cells[i] = label(g[i], "ground-truth") * num_classes_ + label(p[i], "predicted");
    for (int64_t cell : cells) ++matrix_[static_cast<size_t>(cell)];
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
    if (other.num_classes_ != num_classes_) throw Error(ErrorKind::Usage, "cannot merge accumulators of different class counts");
    for (size_t i = 0; i < matrix_.size(); ++i) matrix_[i] += other.matrix_[i];
}

MetricReport ConfusionAccumulator::report() const {
    const int64_t k = num_classes_;
    MetricReport r;
    r.num_classes = k;
    int64_t total = 0;
    int64_t correct = 0;
    for (int64_t g = 0; g < k; ++g) {
        for (int64_t p = 0; p < k; ++p) {
            total += matrix_[static_cast<size_t>(g * k + p)];
            if (g == p) correct += matrix_[static_cast<size_t>(g * k + p)];
        }
    }
    r.pixels = total;
    // Means are accumulated in extended precision and rounded once.
    long double iou_sum = 0.0L;
    long double recall_sum = 0.0L;
    for (int64_t c = 0; c < k; ++c) {
        ClassCounts cc;
        for (int64_t o = 0; o < k; ++o) {
            const int64_t v = matrix_[static_cast<size_t>(c * k + o)];
            if (o == c)
                cc.tp = v;
            else
                cc.fn += v;
            if (o != c) cc.fp += matrix_[static_cast<size_t>(o * k + c)];
        }
        cc.tn = total - cc.tp - cc.fp - cc.fn;
        r.counts.push_back(cc);
        r.iou.push_back(ratio(cc.tp, cc.tp + cc.fp + cc.fn));
        iou_sum += exact_ratio(cc.tp, cc.tp + cc.fp + cc.fn);
        recall_sum += exact_ratio(cc.tp, cc.tp + cc.fn);
    }
    r.miou = static_cast<double>(iou_sum / static_cast<long double>(k));
    r.balanced_accuracy = static_cast<double>(recall_sum / static_cast<long double>(k));
    r.pixel_accuracy = ratio(correct, total);
    return r;
}

MetricReport seg_metrics(const Tensor& pred_mask, const Tensor& gt_mask, int64_t num_classes) {
    ConfusionAccumulator acc(num_classes);
    acc.add(pred_mask, gt_mask);
    return acc.report();
}

std::string MetricReport::to_json() const {
    json j;
    j["num_classes"] = num_classes;
    j["pixels"] = pixels;
    j["miou"] = miou;
    j["pixel_accuracy"] = pixel_accuracy;
    j["balanced_accuracy"] = balanced_accuracy;
    j["absent_class_iou"] = "1 (class absent from both masks counts as perfectly predicted)";
    json classes = json::array();
    for (size_t c = 0; c < counts.size(); ++c) {
        classes.push_back({{"class", c},
                           {"iou", iou[c]},
                           {"tp", counts[c].tp},
                           {"fp", counts[c].fp},
                           {"fn", counts[c].fn},
                           {"tn", counts[c].tn}});
    }
    j["classes"] = std::move(classes);
    return j.dump(2) + "\n";
}

} // namespace twmx
