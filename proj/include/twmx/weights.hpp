#pragma once

#include "twmx/kernels.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace twmx {

enum class LayerKind { Conv, ConvTranspose, BnAct };

/// One learnable layer as declared by a block or the model builder.
struct LayerDecl {
    std::string path;
    LayerKind kind = LayerKind::Conv;
    ConvSpec spec;
    int64_t in_channels = 0;
    int64_t out_channels = 0; // BnAct: the normalized channel count
    Activation act = Activation::None;

    Shape weight_shape() const;
    int64_t fan_in() const;
};

/// Layer-path keyed storage for convolution and normalization parameters.
/// Keys are kept ordered so enumeration and serialization are stable.
class WeightStore {
public:
    void set_conv(const std::string& path, ConvWeights w) { convs_[path] = std::move(w); }
    void set_norm(const std::string& path, BnActParams p) { norms_[path] = std::move(p); }

    const ConvWeights& conv(const std::string& path) const;
    const BnActParams& norm(const std::string& path) const;
    ConvWeights& conv_mut(const std::string& path);
    BnActParams& norm_mut(const std::string& path);

    bool has_conv(const std::string& path) const { return convs_.contains(path); }
    bool has_norm(const std::string& path) const { return norms_.contains(path); }

    const std::map<std::string, ConvWeights>& convs() const noexcept { return convs_; }
    const std::map<std::string, BnActParams>& norms() const noexcept { return norms_; }
    std::map<std::string, ConvWeights>& convs() noexcept { return convs_; }
    std::map<std::string, BnActParams>& norms() noexcept { return norms_; }

    /// Flattened named tensors, e.g. "<path>.weight", "<path>.gamma". Each
    /// vector parameter becomes a rank-1 tensor stored as (len, 1, 1, 1).
    std::map<std::string, Tensor> flatten() const;

    /// Checks that every declared layer is present with the declared shape
    /// and that no undeclared entries exist. Throws naming the first problem.
    void validate(const std::vector<LayerDecl>& layers) const;

    bool bit_equal(const WeightStore& other) const;

private:
    std::map<std::string, ConvWeights> convs_;
    std::map<std::string, BnActParams> norms_;
};

/// Names and shapes of the flattened tensors a layer contributes.
std::vector<std::pair<std::string, Shape>> flat_entries(const LayerDecl& layer);

/// Rebuilds a store from flattened tensors, using the layer declarations for
/// structure. Throws on unknown names (orphans), missing names, or shape mismatches.
WeightStore unflatten(const std::map<std::string, Tensor>& tensors, const std::vector<LayerDecl>& layers);

/// Reproducible pseudo-random weights for the given layers. Conv weights are
/// uniform in +-sqrt(3 / fan_in), biases in +-1/sqrt(fan_in); normalization
/// gamma and var in [0.5, 1.5], beta and mean in [-0.1, 0.1], PReLU slope 0.25.
WeightStore random_weights(const std::vector<LayerDecl>& layers, uint64_t seed);

/// All-zero weights (normalization var 0, eps keeps it well defined).
WeightStore zero_weights(const std::vector<LayerDecl>& layers);

double conv_weight_bound(const LayerDecl& layer);
double conv_bias_bound(const LayerDecl& layer);

} // namespace twmx
