#pragma once

#include "twmx/engine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace twmx {

/// Default cap on the group count of grouped 1x1 convolutions.
inline constexpr int64_t kDefaultGroupCap = 8;

/// Largest power of two <= cap that divides both channel counts.
int64_t group_rule(int64_t channels_a, int64_t channels_b, int64_t cap = kDefaultGroupCap);

/// EPM Unit: grouped 1x1 -> shuffle -> depthwise (dilated) -> grouped 1x1.
/// `out_channels` is the width of that pipeline. At stride 2 the pooled input
/// is concatenated behind it, so the unit emits out_channels + in_channels.
struct EpmUnitSpec {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    int64_t dilation = 1;
    int64_t stride = 1;
    int64_t kernel = 3; // depthwise kernel; reducers use 1
    int64_t g1 = 1;
    int64_t g2 = 1;
    Activation act = Activation::Prelu;

    static EpmUnitSpec make(int64_t in, int64_t out, int64_t dilation, int64_t stride, int64_t kernel = 3,
                            int64_t group_cap = kDefaultGroupCap, Activation act = Activation::Prelu);

    int64_t output_channels() const { return stride == 2 ? out_channels + in_channels : out_channels; }
    bool residual() const { return stride == 1 && in_channels == out_channels; }
    void validate() const;
};

/// Reduce-split-transform-merge module: a 1x1 EPM Unit reducer followed by K
/// dilated EPM Unit branches fused by hierarchical prefix sums.
struct EpmModuleSpec {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    std::vector<int64_t> dilations{1, 2, 4, 8};
    int64_t stride = 1;
    int64_t group_cap = kDefaultGroupCap;
    Activation act = Activation::Prelu;

    int64_t branch_count() const { return static_cast<int64_t>(dilations.size()); }
    int64_t reduced_width() const { return out_channels / branch_count(); }
    EpmUnitSpec reducer() const;
    EpmUnitSpec branch(int64_t i) const;
    bool residual() const { return stride == 1 && in_channels == out_channels; }
    void validate() const;
};

/// Dual Branch Upsampling; skip_channels == 0 selects the variant without skip.
struct DbuSpec {
    int64_t in_channels = 0;
    int64_t skip_channels = 0;
    int64_t out_channels = 0;
    Activation act = Activation::Relu;

    void validate() const;
};

struct PcaaLiteSpec {
    int64_t channels = 0;
    int64_t maps = 2;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Block bodies, generic over Executor / Tracer.

template <typename E>
typename E::Value epm_unit(E& e, const typename E::Value& x, const EpmUnitSpec& s, const std::string& prefix) {
    s.validate();
    const int64_t dilation = s.kernel == 1 ? 1 : s.dilation;
    auto y = e.conv(x, prefix + ".project", ConvSpec::same(1, 1, 1, s.g1), s.out_channels);
    y = e.bn_act(y, prefix + ".project_bn", s.act);
    y = e.shuffle(y, s.g1, prefix + ".shuffle");
    y = e.conv(y, prefix + ".depthwise", ConvSpec::same(s.kernel, s.stride, dilation, s.out_channels), s.out_channels);
    y = e.bn_act(y, prefix + ".depthwise_bn", s.act);
    y = e.conv(y, prefix + ".expand", ConvSpec::same(1, 1, 1, s.g2), s.out_channels);
    y = e.bn_act(y, prefix + ".expand_bn", Activation::None);
    if (s.stride == 2) {
        auto pooled = e.avg_pool(x, prefix + ".pool");
        return e.concat({y, pooled}, prefix + ".concat");
    }
    if (s.residual()) return e.add(y, x, prefix + ".residual");
    return y;
}

/// f_1 = b_1, f_i = f_{i-1} + b_i, output = concat(f_1 .. f_K). Accumulates left to right.
template <typename E>
typename E::Value hff_merge(E& e, const std::vector<typename E::Value>& branches, const std::string& prefix) {
    std::vector<typename E::Value> fused;
    fused.reserve(branches.size());
    for (size_t i = 0; i < branches.size(); ++i) {
        if (i == 0)
            fused.push_back(branches[0]);
        else
            fused.push_back(e.add(fused.back(), branches[i], prefix + ".hff" + std::to_string(i)));
    }
    return e.concat(fused, prefix + ".merge");
}

template <typename E>
typename E::Value epm_module(E& e, const typename E::Value& x, const EpmModuleSpec& s, const std::string& prefix) {
    s.validate();
    const auto reduced = epm_unit(e, x, s.reducer(), prefix + ".reduce");
    std::vector<typename E::Value> branches;
    branches.reserve(s.dilations.size());
    for (int64_t i = 0; i < s.branch_count(); ++i)
        branches.push_back(epm_unit(e, reduced, s.branch(i), prefix + ".branch" + std::to_string(i)));
    auto y = hff_merge(e, branches, prefix);
    if (s.residual()) y = e.add(y, x, prefix + ".residual");
    return y;
}

template <typename E>
typename E::Value dbu(E& e, const typename E::Value& x, const typename E::Value* skip, const DbuSpec& s,
                      const std::string& prefix) {
    s.validate();
    if ((skip != nullptr) != (s.skip_channels > 0))
        fail_shape("layer '" + prefix + "': skip input " + (skip ? "given" : "missing") + " but spec declares " +
                   std::to_string(s.skip_channels) + " skip channels");
    ConvSpec up;
    up.kernel = {2, 2};
    up.stride = {2, 2};
    auto fine = e.conv_transpose(x, prefix + ".fine.up", up, s.out_channels);
    fine = e.bn_act(fine, prefix + ".fine.up_bn", s.act);
    if (skip != nullptr) {
        auto joined = e.concat({fine, *skip}, prefix + ".fine.concat");
        fine = e.conv(joined, prefix + ".fine.refine", ConvSpec::same(3), s.out_channels);
        fine = e.bn_act(fine, prefix + ".fine.refine_bn", s.act);
    }
    auto coarse = e.conv(x, prefix + ".coarse.project", ConvSpec::same(1), s.out_channels);
    coarse = e.upsample(coarse, prefix + ".coarse.up");
    return e.add(fine, coarse, prefix + ".fuse");
}

template <typename E>
typename E::Value pcaa_lite(E& e, const typename E::Value& x, const PcaaLiteSpec& s, const std::string& prefix) {
    s.validate();
    const auto logits = e.conv(x, prefix + ".attention", ConvSpec::same(1), s.maps);
    const auto recomposed = e.attend(x, logits, prefix + ".attend");
    const auto projected = e.conv(recomposed, prefix + ".project", ConvSpec::same(1), s.channels);
    return e.add(x, projected, prefix + ".residual");
}

// ---------------------------------------------------------------------------
// Tensor entry points.

Tensor epm_unit(const Tensor& x, const EpmUnitSpec& spec, const WeightStore& weights, const std::string& prefix);
Tensor epm_module(const Tensor& x, const EpmModuleSpec& spec, const WeightStore& weights, const std::string& prefix);
Tensor dbu(const Tensor& x, const std::optional<Tensor>& skip, const DbuSpec& spec, const WeightStore& weights,
           const std::string& prefix);
Tensor pcaa_lite(const Tensor& x, const PcaaLiteSpec& spec, const WeightStore& weights, const std::string& prefix);

/// Layer declarations of a single block at the given input shape(s), e.g. to
/// build a WeightStore for it with random_weights().
std::vector<LayerDecl> declare_epm_unit(const Shape& in, const EpmUnitSpec& spec, const std::string& prefix);
std::vector<LayerDecl> declare_epm_module(const Shape& in, const EpmModuleSpec& spec, const std::string& prefix);
std::vector<LayerDecl> declare_dbu(const Shape& in, const std::optional<Shape>& skip, const DbuSpec& spec,
                                   const std::string& prefix);
std::vector<LayerDecl> declare_pcaa_lite(const Shape& in, const PcaaLiteSpec& spec, const std::string& prefix);

} // namespace twmx
