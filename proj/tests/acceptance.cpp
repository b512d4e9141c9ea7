// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "analysis_fixtures.hpp"
#include "kernel_suite.hpp"

#include "twmx/app.hpp"
#include "twmx/io.hpp"
#include "twmx/losses.hpp"
#include "twmx/quant.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <unistd.h>

using namespace twmx;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome kernel_oracles() {
    const auto t0 = Clock::now();
    const oracle::SuiteResult r = oracle::run_kernel_suite(2024, 100);
    const double t = seconds_since(t0);
    const bool ok = r.min_cases() >= 100 && r.max_error() <= 1e-5 && t < 60.0;
    return {ok, std::to_string(r.cases.size()) + " operators, >= " + std::to_string(r.min_cases()) +
                    " cases each, max abs error " + fmt("%.3g", r.max_error()) + ", " + fmt("%.2f", t) + " s"};
}

Outcome shape_contract() {
    const auto t0 = Clock::now();
    const ModelGraph g = build_model(load_config(std::string(TWMX_CONFIG_DIR) + "/base.json"));
    const WeightStore w = random_init(g.config, 1);
    std::mt19937_64 rng(3);
    const Tensor image = oracle::random_tensor(rng, Shape{1, 3, 384, 640}, 0, 1);
    const ModelOutputs out = forward(g, w, image);
    const double t = seconds_since(t0);
    const bool ok = out.encoder.shape() == Shape{1, g.config.stage_widths[1], 48, 80} &&
                    out.drivable.shape() == Shape{1, 2, 384, 640} && out.lane.shape() == Shape{1, 2, 384, 640} && t < 5.0;
    return {ok, "encoder " + out.encoder.shape().str() + ", logits " + out.drivable.shape().str() + " and " +
                    out.lane.shape().str() + ", " + fmt("%.2f", t) + " s"};
}

Outcome complexity() {
    const struct {
        const char* name;
        double params, flops;
    } table[] = {{"tiny", 0.10e6, 1.08e9}, {"base", 0.43e6, 3.95e9}, {"large", 1.50e6, 14.25e9}};
    bool ok = true;
    std::string detail;
    for (const auto& row : table) {
        const ComplexityReport r = analyze(load_config(std::string(TWMX_CONFIG_DIR) + "/" + row.name + ".json"),
                                           Shape{1, 3, kInputHeight, kInputWidth});
        const double dp = static_cast<double>(r.total_params) / row.params - 1.0;
        const double df = static_cast<double>(r.total_flops) / row.flops - 1.0;
        ok = ok && std::fabs(dp) <= 0.2 && std::fabs(df) <= 0.2;
        detail += std::string(row.name) + " " + fmt("%.4fM", r.total_params / 1e6) + " (" + fmt("%+.1f%%", 100 * dp) + ") " +
                  fmt("%.3fG", r.total_flops / 1e9) + " (" + fmt("%+.1f%%", 100 * df) + "); ";
    }
    int exact = 0;
    const auto fx = fixtures::analyzer_fixtures();
    for (const auto& f : fx) exact += f.exact() ? 1 : 0;
    ok = ok && fx.size() >= 10 && exact == static_cast<int>(fx.size());
    detail += std::to_string(exact) + "/" + std::to_string(fx.size()) + " single-layer fixtures exact";
    return {ok, detail};
}

Outcome gradients() {
    const auto t0 = Clock::now();
    std::vector<GradcheckRow> rows = run_gradcheck(77, 50);
    double focal = 0.0, tversky = 0.0;
    for (const GradcheckRow& r : rows) (r.loss == "focal" ? focal : tversky) = std::max(r.loss == "focal" ? focal : tversky, r.max_rel_error);
    const double t = seconds_since(t0);
    return {focal < 1e-3 && tversky < 1e-3 && t < 30.0,
            "50 maps 8x8 per loss and task, focal " + fmt("%.3g", focal) + ", tversky " + fmt("%.3g", tversky) + ", " +
                fmt("%.2f", t) + " s"};
}

Outcome loss_values() {
    const ProbMap tv{Tensor(Shape{1, 1, 1, 4}, {1, 1, 1, 0}), Tensor(Shape{1, 1, 1, 4}, {1, 1, 0, 1})};
    const double tversky = tversky_loss(tv, LossParams::drivable()).value;
    const ProbMap fc{Tensor(Shape{1, 1, 1, 1}, {0.5f}), Tensor(Shape{1, 1, 1, 1}, {1})};
    const double focal = focal_loss(fc, LossParams::drivable()).value;
    const double focal_err = std::fabs(focal - 0.25 * 0.25 * std::log(2.0));
    const ProbMap perfect_d{Tensor(Shape{1, 1, 2, 2}, {1, 0, 0, 1}), Tensor(Shape{1, 1, 2, 2}, {1, 0, 0, 1})};
    const ProbMap perfect_l{Tensor(Shape{1, 1, 2, 2}, {0, 0, 1, 0}), Tensor(Shape{1, 1, 2, 2}, {0, 0, 1, 0})};
    const double total = total_loss(perfect_d, perfect_l, LossParams::drivable(), LossParams::lane());
    return {tversky == 0.25 && focal_err <= 1e-9 && total <= 1e-5,
            "tversky " + fmt("%.17g", tversky) + ", focal error " + fmt("%.3g", focal_err) + ", perfect total " +
                fmt("%.3g", total)};
}

Outcome hff() {
    std::mt19937_64 rng(5);
    const WeightStore none;
    double worst = 0.0;
    for (int k : {2, 3, 4}) {
        Executor e(none);
        std::vector<Tensor> branches;
        for (int i = 0; i < k; ++i) branches.push_back(oracle::random_tensor(rng, Shape{2, 4, 5, 6}));
        const Tensor merged = hff_merge(e, branches, "m");
        for (int i = 0; i < k; ++i) {
            const Tensor group = slice_channels(merged, 4 * i, 4 * i + 4);
            for (int64_t p = 0; p < group.numel(); ++p) {
                double want = 0.0;
                for (int j = 0; j <= i; ++j) want += branches[static_cast<size_t>(j)].data()[p];
                worst = std::max(worst, std::fabs(group.data()[p] - want));
            }
        }
    }
    return {worst <= 1e-6, "K = 2, 3, 4, max deviation " + fmt("%.3g", worst)};
}

Outcome shuffle_algebra() {
    std::mt19937_64 rng(6);
    bool inverse = true;
    for (const auto [c, g] : {std::pair<int64_t, int64_t>{4, 2}, {12, 3}, {32, 8}}) {
        const Tensor x = oracle::random_tensor(rng, Shape{2, c, 3, 4});
        inverse = inverse && channel_shuffle(channel_shuffle(x, g), c / g).bit_equal(x);
    }
    const auto sweep = group_sweep(load_config(std::string(TWMX_CONFIG_DIR) + "/base.json"), {1, 2, 4, 8, 16, 32},
                                   Shape{1, 3, kInputHeight, kInputWidth});
    bool monotone = true;
    std::string counts;
    for (size_t i = 0; i < sweep.size(); ++i) {
        if (i > 0) monotone = monotone && sweep[i].grouped_params <= sweep[i - 1].grouped_params;
        counts += (i ? "," : "") + std::to_string(sweep[i].grouped_params);
    }
    return {inverse && monotone, std::string("inverse ") + (inverse ? "bitwise" : "broken") +
                                     ", grouped-conv params for g = 1..32: " + counts};
}

Outcome quant_bounds() {
    std::mt19937_64 rng(8);
    bool bound = true, idem = true;
    for (int i = 0; i < 100; ++i) {
        const float span = std::uniform_real_distribution<float>(1e-3f, 10.0f)(rng);
        const Tensor t = oracle::random_tensor(rng, Shape{1, 4, 6, 6}, -span, span);
        const QuantParams p = calibrate(t);
        const Tensor q = quant_dequant(t, p);
        for (int64_t j = 0; j < t.numel(); ++j)
            bound = bound && std::fabs(static_cast<double>(q.data()[j]) - t.data()[j]) <= p.scale / 2;
        idem = idem && quant_dequant(q, p).bit_equal(q);
    }
    const WeightStore zeros = zero_weights(build_model(ModelConfig::tiny()).layers);
    const bool zero_ok = quantize_model(zeros).weights.bit_equal(zeros);
    return {bound && idem && zero_ok, std::string("error bound ") + (bound ? "held" : "violated") + ", idempotence " +
                                          (idem ? "bitwise" : "broken") + ", zero store " + (zero_ok ? "unchanged" : "changed")};
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / ("twmx_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const ModelConfig c = load_config(std::string(TWMX_CONFIG_DIR) + "/tiny.json");
    std::mt19937_64 rng(9);
    const Tensor image = oracle::random_tensor(rng, Shape{1, 3, kInputHeight, kInputWidth}, 0, 1);
    auto pipeline = [&](const std::string& file) {
        const ModelGraph g = build_model(c);
        const WeightStore w = random_init(c, 7);
        const ModelOutputs before = forward(g, w, image);
        save_weights(w, (dir / file).string());
        const ModelOutputs after = forward(g, load_weights((dir / file).string(), g.layers), image);
        return std::pair{before, after};
    };
    const auto [a0, a1] = pipeline("a.bin");
    const auto [b0, b1] = pipeline("b.bin");
    const bool logits = a0.drivable.bit_equal(a1.drivable) && a0.lane.bit_equal(a1.lane) &&
                        a0.drivable.bit_equal(b0.drivable) && a0.lane.bit_equal(b0.lane) &&
                        b1.drivable.bit_equal(a1.drivable) && b1.lane.bit_equal(a1.lane);
    const bool files = read_file_bytes((dir / "a.bin").string()) == read_file_bytes((dir / "b.bin").string());
    fs::remove_all(dir);
    return {logits && files, std::string("logits ") + (logits ? "bitwise identical" : "differ") + ", weight files " +
                                 (files ? "byte identical" : "differ")};
}

Outcome bench_harness() {
    BenchOptions opt;
    opt.config = std::string(TWMX_CONFIG_DIR) + "/tiny.json";
    opt.batches = {1, 4, 16};
    opt.runs = 2;
    opt.warmup = 1;
    opt.height = 96;
    opt.width = 160;
    const std::string csv = bench_csv(run_bench(opt));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    bool ok = line == "batch,mean_fps,std_fps";
    std::vector<int64_t> batches;
    while (std::getline(in, line)) {
        int64_t batch = 0;
        double mean = 0.0, sd = -1.0;
        ok = ok && std::sscanf(line.c_str(), "%ld,%lf,%lf", &batch, &mean, &sd) == 3 && mean > 0.0 && sd >= 0.0;
        batches.push_back(batch);
    }
    ok = ok && batches == opt.batches;
    std::string flat = csv;
    for (char& ch : flat)
        if (ch == '\n') ch = ' ';
    return {ok, "96x160 input, runs 2: " + flat};
}

Outcome metrics() {
    const MetricReport r = seg_metrics(Tensor(Shape{1, 1, 2, 2}, {1, 0, 0, 0}), Tensor(Shape{1, 1, 2, 2}, {1, 1, 0, 0}), 2);
    const bool fixture = r.iou[0] == 2.0 / 3.0 && r.iou[1] == 0.5 && r.miou == 7.0 / 12.0;

    const fs::path dir = fs::temp_directory_path() / ("twmx_masks_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::mt19937_64 rng(10);
    std::bernoulli_distribution coin(0.3);
    for (int i = 0; i < 3; ++i) {
        Tensor m(Shape{1, 1, 12, 20});
        for (float& v : m.data()) v = coin(rng) ? 1.0f : 0.0f;
        write_file_atomic((dir / ("m" + std::to_string(i) + ".pgm")).string(), encode_pgm_mask(m));
    }
    const MetricReport self = run_eval(dir.string(), dir.string());
    fs::remove_all(dir);
    return {fixture && self.miou == 1.0, "IoU (" + fmt("%.17g", r.iou[0]) + ", " + fmt("%.17g", r.iou[1]) + "), mIoU " +
                                             fmt("%.17g", r.miou) + ", self-eval mIoU " + fmt("%.17g", self.miou)};
}

} // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"kernel oracle suite", kernel_oracles},
        {"shape contract", shape_contract},
        {"complexity calibration", complexity},
        {"gradient checks", gradients},
        {"loss values", loss_values},
        {"HFF identity", hff},
        {"shuffle algebra and group sweep", shuffle_algebra},
        {"quantization bounds", quant_bounds},
        {"determinism", determinism},
        {"bench harness", bench_harness},
        {"metrics", metrics},
    };
    int failures = 0;
    int index = 1;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index++, name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
    return failures == 0 ? 0 : 1;
}
