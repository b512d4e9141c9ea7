#include "twmx/app.hpp"
#include "twmx/io.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

int exit_code(twmx::ErrorKind kind) {
    switch (kind) {
    case twmx::ErrorKind::Usage: return 1;
    case twmx::ErrorKind::NotFound: return 2;
    case twmx::ErrorKind::Decode: return 3;
    case twmx::ErrorKind::Shape: return 4;
    }
    return 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"twmx: two-task road segmentation engine"};
    app.require_subcommand(1);

    twmx::AnalyzeOptions analyze;
    auto* cmd_analyze = app.add_subcommand("analyze", "per-layer parameter and FLOP report");
    cmd_analyze->add_option("--config", analyze.config)->required();
    cmd_analyze->add_option("--input-shape", analyze.input_shape, "HxW")->capture_default_str();
    cmd_analyze->add_flag("--flops-include-bn", analyze.flops_include_bn);
    cmd_analyze->add_flag("--json", analyze.json, "emit JSON instead of CSV");

    twmx::InferOptions infer;
    auto* cmd_infer = app.add_subcommand("infer", "segment one image");
    cmd_infer->add_option("--config", infer.config)->required();
    cmd_infer->add_option("--weights", infer.weights)->required();
    cmd_infer->add_option("--input", infer.input)->required();
    cmd_infer->add_option("--out-da", infer.out_drivable)->required();
    cmd_infer->add_option("--out-lane", infer.out_lane)->required();
    cmd_infer->add_option("--overlay", infer.overlay);

    twmx::BenchOptions bench;
    std::string batch_list = "1,4,16";
    std::string bench_shape = "384x640";
    auto* cmd_bench = app.add_subcommand("bench", "forward throughput per batch size");
    cmd_bench->add_option("--config", bench.config)->required();
    cmd_bench->add_option("--batch", batch_list)->capture_default_str();
    cmd_bench->add_option("--runs", bench.runs)->capture_default_str();
    cmd_bench->add_option("--warmup", bench.warmup)->capture_default_str();
    cmd_bench->add_option("--input-shape", bench_shape, "HxW")->capture_default_str();

    uint64_t seed = 0;
    auto* cmd_grad = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
    cmd_grad->add_option("--seed", seed)->capture_default_str();

    twmx::QuantizeOptions quant;
    auto* cmd_quant = app.add_subcommand("quantize", "int8 round-trip of conv weights");
    cmd_quant->add_option("--weights", quant.weights)->required();
    cmd_quant->add_option("--out", quant.out)->required();
    cmd_quant->add_option("--report", quant.report);

    std::string pred_dir, gt_dir;
    auto* cmd_eval = app.add_subcommand("eval", "IoU metrics over paired mask directories");
    cmd_eval->add_option("--pred", pred_dir)->required();
    cmd_eval->add_option("--gt", gt_dir)->required();

    std::string init_config, init_out;
    uint64_t init_seed = 0;
    auto* cmd_init = app.add_subcommand("init", "write seeded random weights for a config");
    cmd_init->add_option("--config", init_config)->required();
    cmd_init->add_option("--seed", init_seed)->capture_default_str();
    cmd_init->add_option("--out", init_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*cmd_analyze) {
            twmx::run_analyze(analyze, std::cout);
        } else if (*cmd_infer) {
            twmx::run_inference(infer, std::cout);
        } else if (*cmd_bench) {
            bench.batches = twmx::parse_batch_list(batch_list);
            std::tie(bench.height, bench.width) = twmx::parse_hw(bench_shape);
            std::cout << twmx::bench_csv(twmx::run_bench(bench));
        } else if (*cmd_grad) {
            bool ok = true;
            std::cout << "loss,task,maps,max_rel_error\n";
            for (const auto& row : twmx::run_gradcheck(seed)) {
                std::cout << row.loss << ',' << row.task << ',' << row.maps << ',' << row.max_rel_error << '\n';
                ok = ok && row.max_rel_error < twmx::kGradcheckTolerance;
            }
            if (!ok) {
                std::cerr << "error: gradient check above tolerance " << twmx::kGradcheckTolerance << '\n';
                return 4;
            }
        } else if (*cmd_quant) {
            const std::string csv = twmx::run_quantize(quant);
            if (quant.report.empty()) std::cout << csv;
        } else if (*cmd_init) {
            twmx::save_weights(twmx::random_init(twmx::load_config(init_config), init_seed), init_out);
        } else if (*cmd_eval) {
            std::cout << twmx::run_eval(pred_dir, gt_dir).to_json() << '\n';
        }
    } catch (const twmx::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
