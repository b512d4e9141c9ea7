#include "twmx/app.hpp"

#include "twmx/io.hpp"
#include "twmx/losses.hpp"
#include "twmx/quant.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace twmx {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail_usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }

int64_t parse_positive(const std::string& token, const std::string& context) {
    if (token.empty() || token.size() > 9 || !std::all_of(token.begin(), token.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
        fail_usage("invalid " + context + " '" + token + "'");
    const int64_t v = std::stoll(token);
    if (v < 1) fail_usage(context + " must be positive, got '" + token + "'");
    return v;
}

double foreground_fraction(const Tensor& mask) {
    double fg = 0.0;
    for (float v : mask.data()) fg += v;
    return fg / static_cast<double>(mask.numel());
}

std::set<std::string> list_masks(const std::string& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::NotFound, "not a directory: '" + dir + "'");
    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") names.insert(entry.path().filename().string());
    return names;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

std::pair<int64_t, int64_t> parse_hw(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) fail_usage("expected HxW, got '" + text + "'");
    return {parse_positive(text.substr(0, x), "height"), parse_positive(text.substr(x + 1), "width")};
}

std::vector<int64_t> parse_batch_list(const std::string& text) {
    std::vector<int64_t> out;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) out.push_back(parse_positive(token, "batch size"));
    if (out.empty() || text.back() == ',') fail_usage("invalid batch list '" + text + "'");
    return out;
}

void run_analyze(const AnalyzeOptions& opt, std::ostream& out) {
    const ModelConfig config = load_config(opt.config);
    const auto [h, w] = parse_hw(opt.input_shape);
    const ComplexityReport report = analyze(config, Shape{1, 3, h, w}, TraceOptions{opt.flops_include_bn});
    out << (opt.json ? report.to_json() + "\n" : report.to_csv());
}

void run_inference(const InferOptions& opt, std::ostream& out) {
    const ModelGraph graph = build_model(load_config(opt.config));
    const WeightStore weights = load_weights(opt.weights, graph.layers);
    Tensor image = load_image(opt.input);
    if (image.h() != kInputHeight || image.w() != kInputWidth) image = bilinear_resize(image, kInputHeight, kInputWidth);
    const ModelOutputs result = forward(graph, weights, image);
    const Tensor drivable = argmax_mask(result.drivable);
    const Tensor lane = argmax_mask(result.lane);
    write_file_atomic(opt.out_drivable, encode_pgm_mask(drivable));
    write_file_atomic(opt.out_lane, encode_pgm_mask(lane));
    if (!opt.overlay.empty()) write_file_atomic(opt.overlay, encode_overlay_ppm(image, drivable, lane));
    out << "drivable_fraction=" << fmt(foreground_fraction(drivable)) << '\n';
    out << "lane_fraction=" << fmt(foreground_fraction(lane)) << '\n';
}

std::vector<BenchRow> run_bench(const BenchOptions& opt) {
    if (opt.runs < 2) fail_usage("bench needs at least 2 runs");
    if (opt.warmup < 0) fail_usage("warmup must be non-negative");
    if (opt.batches.empty()) fail_usage("empty batch list");
    const ModelGraph graph = build_model(load_config(opt.config));
    const WeightStore weights = random_init(graph.config, 0);
    std::vector<BenchRow> rows;
    for (int64_t batch : opt.batches) {
        if (batch < 1) fail_usage("batch sizes must be positive");
        Tensor input(Shape{batch, 3, opt.height, opt.width});
        std::mt19937_64 rng(static_cast<uint64_t>(batch));
        std::uniform_real_distribution<float> dist(0.0f, 1.0f);
        for (float& v : input.data()) v = dist(rng);

        for (int64_t i = 0; i < opt.warmup; ++i) forward(graph, weights, input);
        std::vector<double> seconds;
        for (int64_t i = 0; i < opt.runs; ++i) {
            const auto start = std::chrono::steady_clock::now();
            forward(graph, weights, input);
            seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        double mean_s = 0.0;
        for (double s : seconds) mean_s += s;
        mean_s /= static_cast<double>(seconds.size());
        double mean_fps = 0.0;
        for (double s : seconds) mean_fps += static_cast<double>(batch) / s;
        mean_fps /= static_cast<double>(seconds.size());
        double var = 0.0;
        for (double s : seconds) var += std::pow(static_cast<double>(batch) / s - mean_fps, 2);
        var /= static_cast<double>(seconds.size() - 1);
        rows.push_back(BenchRow{batch, static_cast<double>(batch) / mean_s, std::sqrt(var)});
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "batch,mean_fps,std_fps\n";
    for (const BenchRow& r : rows) out += std::to_string(r.batch) + "," + fmt(r.mean_fps) + "," + fmt(r.std_fps) + "\n";
    return out;
}

std::vector<GradcheckRow> run_gradcheck(uint64_t seed, int64_t maps) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> prob(0.02, 0.98);
    std::bernoulli_distribution label(0.3);
    std::vector<ProbMap> samples;
    for (int64_t m = 0; m < maps; ++m) {
        ProbMap pm{Tensor(Shape{1, 1, 8, 8}), Tensor(Shape{1, 1, 8, 8})};
        for (float& p : pm.prob.data()) p = static_cast<float>(prob(rng));
        for (float& g : pm.target.data()) g = label(rng) ? 1.0f : 0.0f;
        samples.push_back(std::move(pm));
    }
    const std::pair<std::string, LossParams> tasks[] = {{"drivable", LossParams::drivable()}, {"lane", LossParams::lane()}};
    const std::pair<std::string, LossFn> losses[] = {{"focal", focal_loss}, {"tversky", tversky_loss}};
    std::vector<GradcheckRow> rows;
    for (const auto& [loss_name, fn] : losses) {
        for (const auto& [task_name, params] : tasks) {
            GradcheckRow row{loss_name, task_name, maps, 0.0};
            for (const ProbMap& pm : samples) row.max_rel_error = std::max(row.max_rel_error, grad_check(fn, pm, params));
            rows.push_back(row);
        }
    }
    return rows;
}

std::string run_quantize(const QuantizeOptions& opt) {
    std::map<std::string, Tensor> tensors = read_weight_file(opt.weights);
    QuantizedStore summary;
    for (auto& [name, t] : tensors)
        if (name.size() > 7 && name.ends_with(".weight") && !t.empty()) summary.report.push_back(quantize_tensor(name, t));
    write_weight_file(opt.out, tensors);
    const std::string csv = summary.report_csv();
    if (!opt.report.empty()) write_file_atomic(opt.report, csv);
    return csv;
}

MetricReport run_eval(const std::string& pred_dir, const std::string& gt_dir) {
    const std::set<std::string> pred = list_masks(pred_dir);
    const std::set<std::string> gt = list_masks(gt_dir);
    std::vector<std::string> unpaired;
    std::set_symmetric_difference(pred.begin(), pred.end(), gt.begin(), gt.end(), std::back_inserter(unpaired));
    if (!unpaired.empty() || pred.empty()) {
        std::string msg = pred.empty() && gt.empty() ? "no .pgm masks found" : "unpaired masks:";
        for (const std::string& name : unpaired) msg += " " + name;
        fail_shape(msg);
    }
    ConfusionAccumulator acc(2);
    for (const std::string& name : pred) {
        const Tensor p = load_pgm_mask((fs::path(pred_dir) / name).string());
        const Tensor g = load_pgm_mask((fs::path(gt_dir) / name).string());
        if (p.shape() != g.shape()) fail_shape("size mismatch for '" + name + "': " + p.shape().str() + " vs " + g.shape().str());
        acc.add(p, g);
    }
    return acc.report();
}

} // namespace twmx
