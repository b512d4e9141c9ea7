#include "twmx/model.hpp"

#include <fstream>
#include "json.hpp"
#include <sstream>

namespace twmx {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) fail_shape("config: " + what);
}

} // namespace

void ModelConfig::validate() const {
    require(stem_channels > 0, "stem_channels must be positive");
    require(stage_widths[0] > 0 && stage_widths[1] > 0, "stage_widths must be positive");
    require(epm_repeats[0] >= 0 && epm_repeats[1] >= 0, "epm_repeats must be non-negative");
    require(branch_count > 0, "branch_count must be positive");
    for (int i = 0; i < 2; ++i) {
        const std::string stage = "stage " + std::to_string(i + 1);
        require(static_cast<int64_t>(dilation_sets[i].size()) == branch_count,
                stage + " dilation set has " + std::to_string(dilation_sets[i].size()) + " rates, branch_count is " +
                    std::to_string(branch_count));
        for (int64_t d : dilation_sets[i]) require(d > 0, stage + " dilation rates must be positive");
        require(stage_widths[i] % branch_count == 0,
                stage + " width " + std::to_string(stage_widths[i]) + " not divisible by branch_count " +
                    std::to_string(branch_count));
    }
    require(group_override >= 0, "group_override must be >= 0");
    for (int64_t w : decoder_channels) require(w > 0, "decoder_channels must be positive");
    require(pcaa_maps >= 1, "pcaa_maps must be >= 1");
}

// Widths and repeats are calibrated so the analyzer lands near the published
// parameter/FLOP budgets at 640x384; see configs/*.json.
ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.variant = "tiny";
    c.stem_channels = 16;
    c.stage_widths = {32, 160};
    c.epm_repeats = {2, 8};
    c.decoder_channels = {8, 4, 4};
    return c;
}

ModelConfig ModelConfig::base() {
    ModelConfig c;
    c.variant = "base";
    c.stem_channels = 32;
    c.stage_widths = {64, 448};
    c.epm_repeats = {3, 5};
    c.decoder_channels = {8, 4, 4};
    return c;
}

ModelConfig ModelConfig::large() {
    ModelConfig c;
    c.variant = "large";
    c.stem_channels = 48;
    c.stage_widths = {192, 768};
    c.epm_repeats = {3, 8};
    c.decoder_channels = {16, 8, 8};
    return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
    if (name == "tiny") return tiny();
    if (name == "base") return base();
    if (name == "large") return large();
    throw Error(ErrorKind::Usage, "unknown preset '" + name + "'");
}

ModelConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Decode, std::string("config is not valid JSON: ") + e.what());
    }
    ModelConfig c;
    try {
        c.variant = j.value("variant", c.variant);
        c.stem_channels = j.at("stem_channels").get<int64_t>();
        c.stage_widths = j.at("stage_widths").get<std::array<int64_t, 2>>();
        c.epm_repeats = j.at("epm_repeats").get<std::array<int64_t, 2>>();
        c.branch_count = j.at("branch_count").get<int64_t>();
        c.dilation_sets = j.at("dilation_sets").get<std::array<std::vector<int64_t>, 2>>();
        c.group_override = j.value("group_override", int64_t{0});
        c.decoder_channels = j.at("decoder_channels").get<std::array<int64_t, 3>>();
        c.pcaa_maps = j.value("pcaa_maps", int64_t{2});
        if (j.contains("activations")) {
            const json& a = j.at("activations");
            c.activations.encoder = parse_activation(a.value("encoder", std::string("prelu")));
            c.activations.decoder = parse_activation(a.value("decoder", std::string("relu")));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Decode, std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

ModelConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string config_to_json(const ModelConfig& c) {
    json j;
    j["variant"] = c.variant;
    j["stem_channels"] = c.stem_channels;
    j["stage_widths"] = c.stage_widths;
    j["epm_repeats"] = c.epm_repeats;
    j["branch_count"] = c.branch_count;
    j["dilation_sets"] = c.dilation_sets;
    j["group_override"] = c.group_override;
    j["decoder_channels"] = c.decoder_channels;
    j["pcaa_maps"] = c.pcaa_maps;
    j["activations"] = {{"encoder", activation_name(c.activations.encoder)},
                        {"decoder", activation_name(c.activations.decoder)}};
    return j.dump(2) + "\n";
}

std::vector<std::string> ModelGraph::layer_paths() const {
    std::vector<std::string> paths;
    paths.reserve(layers.size());
    for (const LayerDecl& l : layers) paths.push_back(l.path);
    return paths;
}

ModelGraph build_model(const ModelConfig& config) {
    config.validate();
    Tracer tracer;
    run_network(tracer, config, Shape{1, 3, kInputHeight, kInputWidth});
    return ModelGraph{config, tracer.layers()};
}

ModelOutputs forward(const ModelGraph& graph, const WeightStore& weights, const Tensor& image,
                     const Executor::TraceFn& trace) {
    const Shape& s = image.shape();
    if (s.c != 3) fail_shape("forward: image must have 3 channels, got " + s.str());
    if (s.n < 1 || s.h < 8 || s.w < 8 || s.h % 8 != 0 || s.w % 8 != 0)
        fail_shape("forward: spatial size must be a positive multiple of 8, got " + s.str());
    Executor e(weights, trace);
    auto [encoded, drivable, lane] = run_network(e, graph.config, image);
    return ModelOutputs{std::move(encoded), std::move(drivable), std::move(lane)};
}

WeightStore random_init(const ModelConfig& config, uint64_t seed) {
    return random_weights(build_model(config).layers, seed);
}

Tensor argmax_mask(const Tensor& logits) {
    if (logits.c() != 2) fail_shape("argmax_mask expects 2 logit channels, got " + logits.shape().str());
    Tensor mask(Shape{logits.n(), 1, logits.h(), logits.w()});
    const int64_t plane = logits.h() * logits.w();
    for (int64_t n = 0; n < logits.n(); ++n) {
        const float* bg = logits.plane(n, 0);
        const float* fg = logits.plane(n, 1);
        float* dst = mask.plane(n, 0);
        for (int64_t i = 0; i < plane; ++i) dst[i] = fg[i] > bg[i] ? 1.0f : 0.0f;
    }
    return mask;
}

} // namespace twmx
