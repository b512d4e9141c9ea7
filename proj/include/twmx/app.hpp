#pragma once

#include "twmx/analysis.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace twmx {

/// "384x640" -> {384, 640}.
std::pair<int64_t, int64_t> parse_hw(const std::string& text);
/// "1,4,16" -> {1, 4, 16}; every entry must be a positive integer.
std::vector<int64_t> parse_batch_list(const std::string& text);

struct AnalyzeOptions {
    std::string config;
    std::string input_shape = "384x640";
    bool flops_include_bn = false;
    bool json = false;
};
void run_analyze(const AnalyzeOptions& opt, std::ostream& out);

struct InferOptions {
    std::string config;
    std::string weights;
    std::string input;
    std::string out_drivable;
    std::string out_lane;
    std::string overlay;
};
void run_inference(const InferOptions& opt, std::ostream& out);

struct BenchOptions {
    std::string config;
    std::vector<int64_t> batches{1, 4, 16};
    int64_t runs = 500;
    int64_t warmup = 10;
    int64_t height = kInputHeight;
    int64_t width = kInputWidth;
};

struct BenchRow {
    int64_t batch = 0;
    double mean_fps = 0.0;
    double std_fps = 0.0;
};

std::vector<BenchRow> run_bench(const BenchOptions& opt);
std::string bench_csv(const std::vector<BenchRow>& rows);

struct GradcheckRow {
    std::string loss;
    std::string task;
    int64_t maps = 0;
    double max_rel_error = 0.0;
};

/// Focal and Tversky gradients for both task presets on `maps` random 8x8
/// probability maps.
std::vector<GradcheckRow> run_gradcheck(uint64_t seed, int64_t maps = 50);
inline constexpr double kGradcheckTolerance = 1e-3;

struct QuantizeOptions {
    std::string weights;
    std::string out;
    std::string report;
};
/// Quantizes every ".weight" tensor of a raw weight file; returns the report CSV.
std::string run_quantize(const QuantizeOptions& opt);

/// Pairs same-named .pgm masks in two directories and aggregates a
/// two-class confusion over all pairs.
MetricReport run_eval(const std::string& pred_dir, const std::string& gt_dir);

} // namespace twmx
