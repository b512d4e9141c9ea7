#include "doctest.h"
#include "oracles.hpp"

#include "twmx/model.hpp"
#include "twmx/quant.hpp"

using namespace twmx;

TEST_SUITE("quant") {

TEST_CASE("calibration formula") {
    const Tensor t(Shape{1, 1, 1, 4}, {-1.0f, 0.25f, 1.0f, -0.5f});
    const QuantParams p = calibrate(t);
    CHECK(p.scale == 1.0 / 127.0);
    CHECK(p.zero_point == 0);

    const Tensor c(Shape{1, 1, 2, 2}, 3.0f);
    CHECK(calibrate(c).scale == 3.0 / 127.0);

    const Tensor z(Shape{1, 1, 2, 2});
    CHECK(calibrate(z).scale == kMinScale);
    CHECK(quant_dequant(z, calibrate(z)).bit_equal(z));

    Tensor bad(Shape{1, 1, 1, 1}, {std::nanf("")});
    CHECK_THROWS_AS(calibrate(bad), Error);
    CHECK_THROWS_AS(calibrate(Tensor()), Error);
}

TEST_CASE("grid points are fixed") {
    const QuantParams p{0.03, 0};
    for (int q = kQMin; q <= kQMax; ++q) {
        const auto v = static_cast<float>(p.scale * q);
        CHECK(quant_dequant(v, p) == v);
    }
}

TEST_CASE("round half to even and saturation") {
    const QuantParams unit{1.0, 0};
    CHECK(quant_dequant(0.5f, unit) == 0.0f);
    CHECK(quant_dequant(1.5f, unit) == 2.0f);
    CHECK(quant_dequant(2.5f, unit) == 2.0f);
    CHECK(quant_dequant(-1.5f, unit) == -2.0f);
    CHECK(quant_dequant(-2.5f, unit) == -2.0f);
    CHECK(quant_dequant(300.0f, unit) == 127.0f);
    CHECK(quant_dequant(-300.0f, unit) == -128.0f);
    const QuantParams shifted{0.5, 10};
    CHECK(quant_dequant(70.0f, shifted) == 58.5f);
    CHECK_THROWS_AS(quant_dequant(Tensor(Shape{1, 1, 1, 1}), QuantParams{0.0, 0}), Error);
}

TEST_CASE("round trip error bound on random tensors") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const float span = std::uniform_real_distribution<float>(1e-3f, 10.0f)(rng);
        const Tensor t = oracle::random_tensor(rng, Shape{1, 3, 7, 5}, -span, span);
        const QuantParams p = calibrate(t);
        const Tensor q = quant_dequant(t, p);
        for (int64_t i = 0; i < t.numel(); ++i)
            CHECK(std::fabs(static_cast<double>(q.data()[i]) - t.data()[i]) <= p.scale / 2);
    }
}

TEST_CASE("idempotent and monotone") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor t = oracle::random_tensor(rng, Shape{1, 2, 6, 6}, -2, 2);
        const QuantParams p = calibrate(t);
        const Tensor once = quant_dequant(t, p);
        CHECK(quant_dequant(once, p).bit_equal(once));
    }
    const QuantParams p{0.017, 0};
    float prev = quant_dequant(-3.0f, p);
    for (float x = -3.0f; x <= 3.0f; x += 0.001f) {
        const float y = quant_dequant(x, p);
        CHECK(y >= prev);
        prev = y;
    }
}

TEST_CASE("model quantization") {
    const ModelConfig c = ModelConfig::tiny();
    const ModelGraph g = build_model(c);

    const WeightStore zeros = zero_weights(g.layers);
    CHECK(quantize_model(zeros).weights.bit_equal(zeros));

    const WeightStore w = random_init(c, 3);
    const QuantizedStore q = quantize_model(w);
    CHECK(q.report.size() == w.convs().size());
    for (const QuantReportRow& r : q.report) {
        CAPTURE(r.tensor);
        CHECK(r.max_abs_error <= r.params.scale / 2);
    }
    for (const auto& [path, p] : w.norms()) CHECK(q.weights.norm(path).gamma == p.gamma);
    CHECK(q.int8_bytes * 3 < q.float_bytes);
    CHECK(q.report_csv().starts_with("tensor,scale,max_abs_error\n"));

    std::mt19937_64 rng(4);
    const Tensor x = oracle::random_tensor(rng, Shape{1, 3, 32, 32}, 0, 1);
    const ModelOutputs a = forward(g, w, x), b = forward(g, q.weights, x);
    CHECK(!a.drivable.bit_equal(b.drivable));
    CHECK(all_finite(b.drivable));
}

}
