#include "doctest.h"
#include "oracles.hpp"

#include "twmx/model.hpp"

using namespace twmx;

namespace {

ModelConfig small_config() {
    ModelConfig c = ModelConfig::tiny();
    c.stage_widths = {16, 32};
    c.epm_repeats = {1, 1};
    return c;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("base config shapes at network resolution") {
    const ModelGraph g = build_model(ModelConfig::base());
    const WeightStore w = random_init(g.config, 1);
    std::mt19937_64 rng(2);
    const Tensor image = oracle::random_tensor(rng, Shape{1, 3, kInputHeight, kInputWidth}, 0, 1);
    std::vector<std::pair<std::string, Shape>> seen;
    const ModelOutputs out = forward(g, w, image, [&](const std::string& p, const Shape& s) { seen.emplace_back(p, s); });
    CHECK(out.encoder.shape() == Shape{1, g.config.stage_widths[1], 48, 80});
    CHECK(out.drivable.shape() == Shape{1, 2, 384, 640});
    CHECK(out.lane.shape() == Shape{1, 2, 384, 640});
    CHECK(all_finite(out.drivable));
    CHECK(all_finite(out.lane));

    auto shape_of = [&](const std::string& path) {
        for (const auto& [p, s] : seen)
            if (p == path) return s;
        return Shape{};
    };
    CHECK(shape_of("encoder.stem.bn") == Shape{1, 32, 192, 320});
    CHECK(shape_of("encoder.stage1.epm2.merge").h == 96);
    CHECK(shape_of("encoder.stage2.epm4.merge").w == 80);
    CHECK(shape_of("drivable.dbu1.fuse") == Shape{1, 8, 96, 160});
    CHECK(shape_of("lane.dbu2.fuse") == Shape{1, 4, 192, 320});
    CHECK(shape_of("lane.dbu3.fuse") == Shape{1, 4, 384, 640});
}

TEST_CASE("analyzer shapes equal executed shapes op by op") {
    const ModelConfig c = small_config();
    const Shape in{1, 3, 40, 56};
    Tracer t;
    run_network(t, c, in);
    const ModelGraph g = build_model(c);
    std::vector<std::pair<std::string, Shape>> seen;
    std::mt19937_64 rng(3);
    forward(g, random_init(c, 4), oracle::random_tensor(rng, in, 0, 1),
            [&](const std::string& p, const Shape& s) { seen.emplace_back(p, s); });
    REQUIRE(seen.size() == t.rows().size());
    for (size_t i = 0; i < seen.size(); ++i) {
        CAPTURE(seen[i].first);
        CHECK(seen[i].first == t.rows()[i].path);
        CHECK(seen[i].second == t.rows()[i].output);
    }
}

TEST_CASE("zero weights give zero logits and background masks") {
    const ModelGraph g = build_model(ModelConfig::tiny());
    const WeightStore w = zero_weights(g.layers);
    std::mt19937_64 rng(5);
    const ModelOutputs out = forward(g, w, oracle::random_tensor(rng, Shape{1, 3, 64, 96}, 0, 1));
    for (float v : out.drivable.data()) CHECK(v == 0.0f);
    for (float v : out.lane.data()) CHECK(v == 0.0f);
    const Tensor mask = argmax_mask(out.drivable);
    CHECK(mask.shape() == Shape{1, 1, 64, 96});
    for (float v : mask.data()) CHECK(v == 0.0f);
}

TEST_CASE("batch elements are independent") {
    const ModelConfig c = small_config();
    const ModelGraph g = build_model(c);
    const WeightStore w = random_init(c, 6);
    std::mt19937_64 rng(7);
    const Tensor a = oracle::random_tensor(rng, Shape{1, 3, 32, 48}, 0, 1);
    const Tensor b = oracle::random_tensor(rng, Shape{1, 3, 32, 48}, 0, 1);
    const std::vector<Tensor> parts{a, b};
    const ModelOutputs both = forward(g, w, concat_batch(parts));
    const ModelOutputs oa = forward(g, w, a), ob = forward(g, w, b);
    CHECK(max_abs_diff(slice_batch(both.drivable, 0, 1), oa.drivable) <= 1e-6f);
    CHECK(max_abs_diff(slice_batch(both.drivable, 1, 2), ob.drivable) <= 1e-6f);
    CHECK(max_abs_diff(slice_batch(both.lane, 0, 1), oa.lane) <= 1e-6f);
    CHECK(max_abs_diff(slice_batch(both.lane, 1, 2), ob.lane) <= 1e-6f);
}

TEST_CASE("forward is deterministic") {
    const ModelConfig c = small_config();
    const ModelGraph g = build_model(c);
    const WeightStore w = random_init(c, 8);
    std::mt19937_64 rng(9);
    const Tensor x = oracle::random_tensor(rng, Shape{2, 3, 24, 32}, 0, 1);
    const ModelOutputs o1 = forward(g, w, x), o2 = forward(g, w, x);
    CHECK(o1.drivable.bit_equal(o2.drivable));
    CHECK(o1.lane.bit_equal(o2.lane));
    CHECK(o1.encoder.bit_equal(o2.encoder));
}

TEST_CASE("layer enumeration is stable") {
    const ModelGraph a = build_model(ModelConfig::large());
    const ModelGraph b = build_model(ModelConfig::large());
    CHECK(a.layer_paths() == b.layer_paths());
    CHECK(!a.layers.empty());
}

TEST_CASE("random_init is reproducible and bounded") {
    const ModelConfig c = ModelConfig::tiny();
    const WeightStore a = random_init(c, 42), b = random_init(c, 42), d = random_init(c, 43);
    CHECK(a.bit_equal(b));
    CHECK(!a.bit_equal(d));
    const ModelGraph g = build_model(c);
    for (const LayerDecl& l : g.layers) {
        if (l.kind == LayerKind::BnAct) {
            const BnActParams& p = a.norm(l.path);
            for (float v : p.gamma) CHECK((v >= 0.5f && v <= 1.5f));
            for (float v : p.var) CHECK((v >= 0.5f && v <= 1.5f));
            for (float v : p.beta) CHECK(std::fabs(v) <= 0.1f);
            for (float v : p.mean) CHECK(std::fabs(v) <= 0.1f);
            continue;
        }
        const ConvWeights& w = a.conv(l.path);
        const double bound = conv_weight_bound(l);
        CHECK(bound == doctest::Approx(std::sqrt(3.0 / static_cast<double>(l.fan_in()))));
        for (float v : w.weights.data()) CHECK(std::fabs(v) <= bound);
        if (w.bias)
            for (float v : *w.bias) CHECK(std::fabs(v) <= conv_bias_bound(l));
    }
}

TEST_CASE("forward input contract") {
    const ModelConfig c = small_config();
    const ModelGraph g = build_model(c);
    const WeightStore w = random_init(c, 1);
    CHECK_THROWS_AS(forward(g, w, Tensor(Shape{1, 3, 30, 32})), Error);
    CHECK_THROWS_AS(forward(g, w, Tensor(Shape{1, 1, 32, 32})), Error);

    WeightStore missing = w;
    missing.convs().erase("lane.head");
    try {
        forward(g, missing, Tensor(Shape{1, 3, 16, 16}));
        FAIL("expected a missing-weight error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("lane.head") != std::string::npos);
    }
}

TEST_CASE("config JSON round trip and validation") {
    for (const std::string name : {"tiny", "base", "large"}) {
        const ModelConfig c = ModelConfig::preset(name);
        const ModelConfig back = parse_config(config_to_json(c));
        CHECK(config_to_json(back) == config_to_json(c));
        CHECK(build_model(back).layer_paths() == build_model(c).layer_paths());
    }
    CHECK_THROWS_AS(parse_config("{not json"), Error);
    ModelConfig bad = ModelConfig::tiny();
    bad.stage_widths = {30, 160};
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(ModelConfig::preset("huge"), Error);
}

TEST_CASE("group override changes grouped convs") {
    ModelConfig c = ModelConfig::tiny();
    c.group_override = 1;
    const ModelGraph g = build_model(c);
    const WeightStore w = random_init(c, 1);
    for (const LayerDecl& l : g.layers)
        if (l.path.ends_with(".project") && l.path.starts_with("encoder.stage")) CHECK(l.spec.groups == 1);
}

TEST_CASE("argmax ties break to background") {
    Tensor logits(Shape{1, 2, 1, 3}, {1, 2, 0, 1, 1, 5});
    const Tensor m = argmax_mask(logits);
    CHECK(m.data()[0] == 0.0f);
    CHECK(m.data()[1] == 0.0f);
    CHECK(m.data()[2] == 1.0f);
}

}
