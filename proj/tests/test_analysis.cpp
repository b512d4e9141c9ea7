#include "doctest.h"
#include "analysis_fixtures.hpp"
#include "oracles.hpp"

#include "twmx/analysis.hpp"

#include <numeric>

using namespace twmx;

namespace {

Tensor mask(std::vector<float> v) {
    const auto n = static_cast<int64_t>(v.size());
    return Tensor(Shape{1, 1, 1, n}, std::move(v));
}

} // namespace

TEST_SUITE("analysis") {

TEST_CASE("single-layer fixtures match closed forms") {
    for (const auto& f : fixtures::analyzer_fixtures()) {
        CAPTURE(f.name);
        CHECK(f.params == f.want_params);
        CHECK(f.flops == f.want_flops);
    }
}

TEST_CASE("totals are sums of rows") {
    const ComplexityReport r = analyze(ModelConfig::tiny(), Shape{1, 3, 384, 640});
    int64_t p = 0, f = 0, b = 0;
    for (const auto& row : r.rows) {
        CHECK(row.params >= 0);
        CHECK(row.flops >= 0);
        p += row.params;
        f += row.flops;
        b += row.buffers;
    }
    CHECK(p == r.total_params);
    CHECK(f == r.total_flops);
    CHECK(b == r.total_buffers);
    CHECK(count_params(ModelConfig::tiny()).total_params == r.total_params);
}

TEST_CASE("flops scale with batch and spatial size") {
    const ModelConfig c = ModelConfig::tiny();
    const int64_t f1 = count_flops(c, Shape{1, 3, 64, 96}).total_flops;
    CHECK(count_flops(c, Shape{3, 3, 64, 96}).total_flops == 3 * f1);
    CHECK(count_flops(c, Shape{1, 3, 128, 192}).total_flops == 4 * f1);
}

TEST_CASE("bn flag only adds flops") {
    const ModelConfig c = ModelConfig::base();
    const ComplexityReport off = analyze(c, Shape{1, 3, 384, 640});
    const ComplexityReport on = analyze(c, Shape{1, 3, 384, 640}, TraceOptions{true});
    CHECK(on.total_params == off.total_params);
    CHECK(on.total_flops > off.total_flops);
}

TEST_CASE("shipped presets near their budgets") {
    const struct {
        ModelConfig c;
        double params, flops;
    } targets[] = {{ModelConfig::tiny(), 0.10e6, 1.08e9}, {ModelConfig::base(), 0.43e6, 3.95e9}, {ModelConfig::large(), 1.50e6, 14.25e9}};
    for (const auto& t : targets) {
        const ComplexityReport r = analyze(t.c, Shape{1, 3, 384, 640});
        CAPTURE(t.c.variant);
        CHECK(std::fabs(static_cast<double>(r.total_params) / t.params - 1.0) <= 0.2);
        CHECK(std::fabs(static_cast<double>(r.total_flops) / t.flops - 1.0) <= 0.2);
    }
}

TEST_CASE("report formats") {
    const ComplexityReport r = analyze(ModelConfig::tiny(), Shape{1, 3, 64, 64});
    const std::string csv = r.to_csv();
    CHECK(csv.starts_with("layer,params,flops\n"));
    CHECK(csv.find("\ntotal," + std::to_string(r.total_params) + "," + std::to_string(r.total_flops) + "\n") != std::string::npos);
    CHECK(r.to_json().find("\"total_flops\"") != std::string::npos);
}

TEST_CASE("group sweep is non-increasing") {
    const auto rows = group_sweep(ModelConfig::base(), {1, 2, 4, 8, 16, 32}, Shape{1, 3, 384, 640});
    REQUIRE(rows.size() == 6);
    for (size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].grouped_params <= rows[i - 1].grouped_params);
        CHECK(rows[i].total_params <= rows[i - 1].total_params);
    }
    CHECK(rows.back().grouped_params < rows.front().grouped_params);
}

TEST_CASE("metrics hand cases") {
    const MetricReport r = seg_metrics(mask({1, 0, 0, 0}), mask({1, 1, 0, 0}), 2);
    CHECK(r.iou[0] == 2.0 / 3.0);
    CHECK(r.iou[1] == 0.5);
    CHECK(r.miou == 7.0 / 12.0);
    CHECK(r.pixel_accuracy == 0.75);
    CHECK(r.balanced_accuracy == (1.0 + 0.5) / 2.0);
    CHECK(r.counts[1].tp == 1);
    CHECK(r.counts[1].fn == 1);
    CHECK(r.counts[0].fp == 1);

    const MetricReport same = seg_metrics(mask({1, 0, 1, 1}), mask({1, 0, 1, 1}), 2);
    CHECK(same.miou == 1.0);
    CHECK(same.pixel_accuracy == 1.0);

    const MetricReport flip = seg_metrics(mask({0, 1, 0, 0}), mask({1, 0, 1, 1}), 2);
    CHECK(flip.iou[0] == 0.0);
    CHECK(flip.iou[1] == 0.0);

    const MetricReport absent = seg_metrics(mask({0, 0}), mask({0, 0}), 2);
    CHECK(absent.iou[1] == 1.0);
    CHECK(absent.miou == 1.0);
}

TEST_CASE("metrics are label-symmetric and mergeable") {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.4);
    Tensor p(Shape{1, 1, 8, 8}), g(Shape{1, 1, 8, 8});
    for (float& v : p.data()) v = coin(rng) ? 1.0f : 0.0f;
    for (float& v : g.data()) v = coin(rng) ? 1.0f : 0.0f;
    Tensor pf = p, gf = g;
    for (float& v : pf.data()) v = 1.0f - v;
    for (float& v : gf.data()) v = 1.0f - v;
    const MetricReport a = seg_metrics(p, g, 2), b = seg_metrics(pf, gf, 2);
    CHECK(a.iou[0] == b.iou[1]);
    CHECK(a.iou[1] == b.iou[0]);
    CHECK(std::fabs(a.miou - (a.iou[0] + a.iou[1]) / 2.0) <= 1e-12);

    ConfusionAccumulator whole(2), left(2), right(2);
    whole.add(p, g);
    whole.add(pf, g);
    right.add(pf, g);
    left.add(p, g);
    left.merge(right);
    CHECK(left.report().to_json() == whole.report().to_json());
}

TEST_CASE("metrics reject bad labels") {
    CHECK_THROWS_AS(seg_metrics(mask({0, 2}), mask({0, 1}), 2), Error);
    CHECK_THROWS_AS(seg_metrics(mask({0, 0.5f}), mask({0, 1}), 2), Error);
    CHECK_THROWS_AS(seg_metrics(mask({0, 1, 1}), mask({0, 1}), 2), Error);
}

}
