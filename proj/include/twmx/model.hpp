#pragma once

#include "twmx/blocks.hpp"

#include <array>
#include <string>
#include <vector>

namespace twmx {

struct Activations {
    Activation encoder = Activation::Prelu;
    Activation decoder = Activation::Relu;
};

/// Declarative description of a network variant. JSON field names match the
/// member names.
struct ModelConfig {
    std::string variant = "custom";
    int64_t stem_channels = 16;
    std::array<int64_t, 2> stage_widths{32, 64};
    std::array<int64_t, 2> epm_repeats{2, 3};
    int64_t branch_count = 4;
    std::array<std::vector<int64_t>, 2> dilation_sets{std::vector<int64_t>{1, 2, 4, 8}, std::vector<int64_t>{1, 4, 8, 16}};
    int64_t group_override = 0; // 0: default rule (cap 8)
    std::array<int64_t, 3> decoder_channels{32, 16, 8};
    int64_t pcaa_maps = 2;
    Activations activations;

    int64_t group_cap() const { return group_override > 0 ? group_override : kDefaultGroupCap; }
    void validate() const;

    static ModelConfig tiny();
    static ModelConfig base();
    static ModelConfig large();
    static ModelConfig preset(const std::string& name);
};

ModelConfig load_config(const std::string& path);
ModelConfig parse_config(const std::string& json_text);
std::string config_to_json(const ModelConfig& config);

inline const std::array<std::string, 2> kTaskNames{"drivable", "lane"};

/// A built network: its configuration plus the ordered learnable-layer list.
struct ModelGraph {
    ModelConfig config;
    std::vector<LayerDecl> layers;

    std::vector<std::string> layer_paths() const;
};

struct ModelOutputs {
    Tensor encoder;  // shared feature after the attention block
    Tensor drivable; // (n, 2, h, w) logits
    Tensor lane;
};

/// Input resolution used by the analyzer and presets (height x width).
inline constexpr int64_t kInputHeight = 384;
inline constexpr int64_t kInputWidth = 640;

ModelGraph build_model(const ModelConfig& config);

/// Shared encoder followed by the two task decoders. `trace`, when set,
/// receives every op's output shape in execution order.
ModelOutputs forward(const ModelGraph& graph, const WeightStore& weights, const Tensor& image,
                     const Executor::TraceFn& trace = {});

/// Runs the full op sequence through an arbitrary engine. Returns
/// {encoder, drivable, lane}.
template <typename E>
std::array<typename E::Value, 3> run_network(E& e, const ModelConfig& c, const typename E::Value& image) {
    const Activation enc = c.activations.encoder;
    auto stem = e.conv(image, "encoder.stem.conv", ConvSpec::same(3, 2), c.stem_channels);
    stem = e.bn_act(stem, "encoder.stem.bn", enc);

    auto stage = [&](const typename E::Value& in, int64_t in_channels, int idx) {
        const std::string name = "encoder.stage" + std::to_string(idx + 1);
        EpmModuleSpec down{in_channels, c.stage_widths[idx], c.dilation_sets[idx], 2, c.group_cap(), enc};
        auto y = epm_module(e, in, down, name + ".down");
        EpmModuleSpec keep{c.stage_widths[idx], c.stage_widths[idx], c.dilation_sets[idx], 1, c.group_cap(), enc};
        for (int64_t r = 0; r < c.epm_repeats[idx]; ++r) y = epm_module(e, y, keep, name + ".epm" + std::to_string(r));
        return y;
    };
    const auto stage1 = stage(stem, c.stem_channels, 0);
    const auto stage2 = stage(stage1, c.stage_widths[0], 1);
    const auto encoded = pcaa_lite(e, stage2, PcaaLiteSpec{c.stage_widths[1], c.pcaa_maps}, "encoder.pcaa");

    auto decoder = [&](const std::string& task) {
        const Activation dec = c.activations.decoder;
        const auto& w = c.decoder_channels;
        auto y = dbu(e, encoded, &stage1, DbuSpec{c.stage_widths[1], c.stage_widths[0], w[0], dec}, task + ".dbu1");
        y = dbu(e, y, &stem, DbuSpec{w[0], c.stem_channels, w[1], dec}, task + ".dbu2");
        y = dbu(e, y, nullptr, DbuSpec{w[1], 0, w[2], dec}, task + ".dbu3");
        return e.conv(y, task + ".head", ConvSpec::same(1, 1, 1, 1, true), 2);
    };
    auto drivable = decoder(kTaskNames[0]);
    auto lane = decoder(kTaskNames[1]);
    return {encoded, drivable, lane};
}

/// Reproducible weights for every layer of the graph (see random_weights).
WeightStore random_init(const ModelConfig& config, uint64_t seed);

/// Per-pixel argmax over the two logit channels; ties go to class 0.
/// Returns an (n, 1, h, w) tensor of 0/1 labels.
Tensor argmax_mask(const Tensor& logits);

} // namespace twmx
