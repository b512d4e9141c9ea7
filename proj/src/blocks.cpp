#include "twmx/blocks.hpp"

namespace twmx {

int64_t group_rule(int64_t channels_a, int64_t channels_b, int64_t cap) {
    int64_t g = 1;
    while (g * 2 <= cap && channels_a % (g * 2) == 0 && channels_b % (g * 2) == 0) g *= 2;
    return g;
}

EpmUnitSpec EpmUnitSpec::make(int64_t in, int64_t out, int64_t dilation, int64_t stride, int64_t kernel,
                              int64_t group_cap, Activation act) {
    EpmUnitSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.dilation = dilation;
    s.stride = stride;
    s.kernel = kernel;
    s.g1 = group_rule(in, out, group_cap);
    s.g2 = group_rule(out, out, group_cap);
    s.act = act;
    return s;
}

void EpmUnitSpec::validate() const {
    if (in_channels < 1 || out_channels < 1) fail_shape("EPM unit: channel counts must be positive");
    if (stride != 1 && stride != 2) fail_shape("EPM unit: stride must be 1 or 2, got " + std::to_string(stride));
    if (kernel < 1 || kernel % 2 == 0) fail_shape("EPM unit: depthwise kernel must be odd, got " + std::to_string(kernel));
    if (dilation < 1) fail_shape("EPM unit: dilation must be positive");
    if (g1 < 1 || in_channels % g1 != 0 || out_channels % g1 != 0)
        fail_shape("EPM unit: g1=" + std::to_string(g1) + " does not divide " + std::to_string(in_channels) + " and " +
                   std::to_string(out_channels));
    if (g2 < 1 || out_channels % g2 != 0)
        fail_shape("EPM unit: g2=" + std::to_string(g2) + " does not divide " + std::to_string(out_channels));
}

EpmUnitSpec EpmModuleSpec::reducer() const {
    return EpmUnitSpec::make(in_channels, reduced_width(), 1, stride, 1, group_cap, act);
}

EpmUnitSpec EpmModuleSpec::branch(int64_t i) const {
    return EpmUnitSpec::make(reducer().output_channels(), reduced_width(), dilations.at(static_cast<size_t>(i)), 1, 3,
                             group_cap, act);
}

void EpmModuleSpec::validate() const {
    if (dilations.empty()) fail_shape("EPM module: empty dilation list");
    if (in_channels < 1 || out_channels < 1) fail_shape("EPM module: channel counts must be positive");
    if (out_channels % branch_count() != 0)
        fail_shape("EPM module: out_channels " + std::to_string(out_channels) + " not divisible by K=" +
                   std::to_string(branch_count()));
    if (stride != 1 && stride != 2) fail_shape("EPM module: stride must be 1 or 2");
    for (int64_t d : dilations)
        if (d < 1) fail_shape("EPM module: dilation rates must be positive");
}

void DbuSpec::validate() const {
    if (in_channels < 1 || out_channels < 1 || skip_channels < 0) fail_shape("DBU: invalid channel counts");
}

void PcaaLiteSpec::validate() const {
    if (channels < 1 || maps < 1) fail_shape("PCAA: channels and maps must be positive");
}

Tensor epm_unit(const Tensor& x, const EpmUnitSpec& spec, const WeightStore& weights, const std::string& prefix) {
    Executor e(weights);
    return epm_unit(e, x, spec, prefix);
}

Tensor epm_module(const Tensor& x, const EpmModuleSpec& spec, const WeightStore& weights, const std::string& prefix) {
    Executor e(weights);
    return epm_module(e, x, spec, prefix);
}

Tensor dbu(const Tensor& x, const std::optional<Tensor>& skip, const DbuSpec& spec, const WeightStore& weights,
           const std::string& prefix) {
    if (skip && (skip->h() != 2 * x.h() || skip->w() != 2 * x.w()))
        fail_shape("layer '" + prefix + "': skip spatial size " + skip->shape().str() + " must be twice " +
                   x.shape().str());
    Executor e(weights);
    return dbu(e, x, skip ? &*skip : nullptr, spec, prefix);
}

Tensor pcaa_lite(const Tensor& x, const PcaaLiteSpec& spec, const WeightStore& weights, const std::string& prefix) {
    if (x.c() != spec.channels)
        fail_shape("layer '" + prefix + "': input has " + std::to_string(x.c()) + " channels, spec " +
                   std::to_string(spec.channels));
    Executor e(weights);
    return pcaa_lite(e, x, spec, prefix);
}

std::vector<LayerDecl> declare_epm_unit(const Shape& in, const EpmUnitSpec& spec, const std::string& prefix) {
    Tracer t;
    epm_unit(t, in, spec, prefix);
    return t.layers();
}

std::vector<LayerDecl> declare_epm_module(const Shape& in, const EpmModuleSpec& spec, const std::string& prefix) {
    Tracer t;
    epm_module(t, in, spec, prefix);
    return t.layers();
}

std::vector<LayerDecl> declare_dbu(const Shape& in, const std::optional<Shape>& skip, const DbuSpec& spec,
                                   const std::string& prefix) {
    Tracer t;
    dbu(t, in, skip ? &*skip : nullptr, spec, prefix);
    return t.layers();
}

std::vector<LayerDecl> declare_pcaa_lite(const Shape& in, const PcaaLiteSpec& spec, const std::string& prefix) {
    Tracer t;
    pcaa_lite(t, in, spec, prefix);
    return t.layers();
}

} // namespace twmx
