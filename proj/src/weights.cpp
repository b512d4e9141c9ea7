#include "twmx/weights.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <set>

namespace twmx {

namespace {

Shape vec_shape(int64_t len) { return Shape{len, 1, 1, 1}; }

std::vector<float> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor from_vec(const std::vector<float>& v) { return Tensor(vec_shape(static_cast<int64_t>(v.size())), v); }

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

// Uniform in [lo, hi) from the top 53 bits; independent of the standard
// library's distribution implementations.
class Uniform {
public:
    explicit Uniform(uint64_t seed) : rng_(seed) {}
    float operator()(double lo, double hi) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return static_cast<float>(lo + (hi - lo) * u);
    }

private:
    std::mt19937_64 rng_;
};

} // namespace

Shape LayerDecl::weight_shape() const {
    switch (kind) {
    case LayerKind::Conv: return Shape{out_channels, in_channels / spec.groups, spec.kernel.h, spec.kernel.w};
    case LayerKind::ConvTranspose: return Shape{in_channels, out_channels, spec.kernel.h, spec.kernel.w};
    case LayerKind::BnAct: return vec_shape(out_channels);
    }
    return {};
}

int64_t LayerDecl::fan_in() const {
    switch (kind) {
    case LayerKind::Conv: return (in_channels / spec.groups) * spec.kernel.h * spec.kernel.w;
    // Each output pixel of a stride-k, kernel-k transposed conv sees one tap per input channel.
    case LayerKind::ConvTranspose:
        return in_channels * std::max<int64_t>(1, (spec.kernel.h / spec.stride.h) * (spec.kernel.w / spec.stride.w));
    case LayerKind::BnAct: return 1;
    }
    return 1;
}

double conv_weight_bound(const LayerDecl& layer) { return std::sqrt(3.0 / static_cast<double>(layer.fan_in())); }
double conv_bias_bound(const LayerDecl& layer) { return 1.0 / std::sqrt(static_cast<double>(layer.fan_in())); }

const ConvWeights& WeightStore::conv(const std::string& path) const {
    auto it = convs_.find(path);
    if (it == convs_.end()) throw Error(ErrorKind::Shape, "missing weight entry '" + path + "'");
    return it->second;
}

const BnActParams& WeightStore::norm(const std::string& path) const {
    auto it = norms_.find(path);
    if (it == norms_.end()) throw Error(ErrorKind::Shape, "missing weight entry '" + path + "'");
    return it->second;
}

ConvWeights& WeightStore::conv_mut(const std::string& path) { return const_cast<ConvWeights&>(std::as_const(*this).conv(path)); }
BnActParams& WeightStore::norm_mut(const std::string& path) { return const_cast<BnActParams&>(std::as_const(*this).norm(path)); }

std::map<std::string, Tensor> WeightStore::flatten() const {
    std::map<std::string, Tensor> out;
    for (const auto& [path, w] : convs_) {
        out.emplace(path + ".weight", w.weights);
        if (w.bias) out.emplace(path + ".bias", from_vec(*w.bias));
    }
    for (const auto& [path, p] : norms_) {
        out.emplace(path + ".gamma", from_vec(p.gamma));
        out.emplace(path + ".beta", from_vec(p.beta));
        out.emplace(path + ".mean", from_vec(p.mean));
        out.emplace(path + ".var", from_vec(p.var));
        if (p.act == Activation::Prelu) out.emplace(path + ".slope", from_vec(p.slope));
    }
    return out;
}

std::vector<std::pair<std::string, Shape>> flat_entries(const LayerDecl& layer) {
    std::vector<std::pair<std::string, Shape>> out;
    if (layer.kind == LayerKind::BnAct) {
        const Shape s = vec_shape(layer.out_channels);
        for (const char* suffix : {".gamma", ".beta", ".mean", ".var"}) out.emplace_back(layer.path + suffix, s);
        if (layer.act == Activation::Prelu) out.emplace_back(layer.path + ".slope", s);
    } else {
        out.emplace_back(layer.path + ".weight", layer.weight_shape());
        if (layer.spec.has_bias) out.emplace_back(layer.path + ".bias", vec_shape(layer.out_channels));
    }
    return out;
}

void WeightStore::validate(const std::vector<LayerDecl>& layers) const {
    std::set<std::string> convs_seen;
    std::set<std::string> norms_seen;
    for (const LayerDecl& layer : layers) {
        if (layer.kind == LayerKind::BnAct) {
            const BnActParams& p = norm(layer.path);
            norms_seen.insert(layer.path);
            const auto c = static_cast<size_t>(layer.out_channels);
            if (p.gamma.size() != c || p.beta.size() != c || p.mean.size() != c || p.var.size() != c)
                fail_shape("layer '" + layer.path + "': normalization length mismatch, expected " + std::to_string(c));
            if (p.act != layer.act)
                fail_shape("layer '" + layer.path + "': activation " + activation_name(p.act) + " != declared " +
                           activation_name(layer.act));
            if (layer.act == Activation::Prelu && p.slope.size() != c)
                fail_shape("layer '" + layer.path + "': prelu slope length mismatch");
        } else {
            const ConvWeights& w = conv(layer.path);
            convs_seen.insert(layer.path);
            if (w.weights.shape() != layer.weight_shape())
                fail_shape("layer '" + layer.path + "': weight shape " + w.weights.shape().str() + " != declared " +
                           layer.weight_shape().str());
            if (w.bias.has_value() != layer.spec.has_bias)
                fail_shape("layer '" + layer.path + "': bias presence mismatch");
            if (w.bias && static_cast<int64_t>(w.bias->size()) != layer.out_channels)
                fail_shape("layer '" + layer.path + "': bias length mismatch");
        }
    }
    for (const auto& [path, _] : convs_)
        if (!convs_seen.contains(path)) fail_shape("undeclared weight entry '" + path + "'");
    for (const auto& [path, _] : norms_)
        if (!norms_seen.contains(path)) fail_shape("undeclared weight entry '" + path + "'");
}

bool WeightStore::bit_equal(const WeightStore& other) const {
    if (convs_.size() != other.convs_.size() || norms_.size() != other.norms_.size()) return false;
    for (const auto& [path, w] : convs_) {
        auto it = other.convs_.find(path);
        if (it == other.convs_.end() || !w.weights.bit_equal(it->second.weights)) return false;
        if (w.bias.has_value() != it->second.bias.has_value()) return false;
        if (w.bias && !same_bits(*w.bias, *it->second.bias)) return false;
    }
    for (const auto& [path, p] : norms_) {
        auto it = other.norms_.find(path);
        if (it == other.norms_.end()) return false;
        const BnActParams& q = it->second;
        if (p.act != q.act || p.eps != q.eps || !same_bits(p.gamma, q.gamma) || !same_bits(p.beta, q.beta) ||
            !same_bits(p.mean, q.mean) || !same_bits(p.var, q.var) || !same_bits(p.slope, q.slope))
            return false;
    }
    return true;
}

WeightStore unflatten(const std::map<std::string, Tensor>& tensors, const std::vector<LayerDecl>& layers) {
    std::set<std::string> used;
    auto take = [&](const std::string& name, const Shape& expected) -> const Tensor& {
        auto it = tensors.find(name);
        if (it == tensors.end()) fail_shape("missing tensor '" + name + "'");
        if (it->second.shape() != expected)
            fail_shape("tensor '" + name + "' has shape " + it->second.shape().str() + ", expected " + expected.str());
        used.insert(name);
        return it->second;
    };

    WeightStore store;
    for (const LayerDecl& layer : layers) {
        if (layer.kind == LayerKind::BnAct) {
            const Shape s = vec_shape(layer.out_channels);
            BnActParams p;
            p.gamma = to_vec(take(layer.path + ".gamma", s));
            p.beta = to_vec(take(layer.path + ".beta", s));
            p.mean = to_vec(take(layer.path + ".mean", s));
            p.var = to_vec(take(layer.path + ".var", s));
            p.act = layer.act;
            if (layer.act == Activation::Prelu) p.slope = to_vec(take(layer.path + ".slope", s));
            store.set_norm(layer.path, std::move(p));
        } else {
            ConvWeights w;
            w.weights = take(layer.path + ".weight", layer.weight_shape());
            if (layer.spec.has_bias) w.bias = to_vec(take(layer.path + ".bias", vec_shape(layer.out_channels)));
            store.set_conv(layer.path, std::move(w));
        }
    }
    for (const auto& [name, _] : tensors)
        if (!used.contains(name)) fail_shape("orphan tensor '" + name + "' is not declared by the config");
    return store;
}

WeightStore random_weights(const std::vector<LayerDecl>& layers, uint64_t seed) {
    Uniform uniform(seed);
    WeightStore store;
    for (const LayerDecl& layer : layers) {
        if (layer.kind == LayerKind::BnAct) {
            const auto c = static_cast<size_t>(layer.out_channels);
            BnActParams p;
            p.gamma.resize(c);
            p.beta.resize(c);
            p.mean.resize(c);
            p.var.resize(c);
            for (size_t i = 0; i < c; ++i) {
                p.gamma[i] = uniform(0.5, 1.5);
                p.beta[i] = uniform(-0.1, 0.1);
                p.mean[i] = uniform(-0.1, 0.1);
                p.var[i] = uniform(0.5, 1.5);
            }
            p.act = layer.act;
            if (layer.act == Activation::Prelu) p.slope.assign(c, 0.25f);
            store.set_norm(layer.path, std::move(p));
        } else {
            const double bound = conv_weight_bound(layer);
            Tensor weights(layer.weight_shape());
            for (float& v : weights.data()) v = uniform(-bound, bound);
            ConvWeights w{std::move(weights), std::nullopt};
            if (layer.spec.has_bias) {
                const double bias_bound = conv_bias_bound(layer);
                std::vector<float> bias(static_cast<size_t>(layer.out_channels));
                for (float& v : bias) v = uniform(-bias_bound, bias_bound);
                w.bias = std::move(bias);
            }
            store.set_conv(layer.path, std::move(w));
        }
    }
    return store;
}

WeightStore zero_weights(const std::vector<LayerDecl>& layers) {
    WeightStore store;
    for (const LayerDecl& layer : layers) {
        if (layer.kind == LayerKind::BnAct) {
            const auto c = static_cast<size_t>(layer.out_channels);
            BnActParams p;
            p.gamma.assign(c, 0.0f);
            p.beta.assign(c, 0.0f);
            p.mean.assign(c, 0.0f);
            p.var.assign(c, 0.0f);
            p.act = layer.act;
            if (layer.act == Activation::Prelu) p.slope.assign(c, 0.0f);
            store.set_norm(layer.path, std::move(p));
        } else {
            ConvWeights w{Tensor(layer.weight_shape()), std::nullopt};
            if (layer.spec.has_bias) w.bias = std::vector<float>(static_cast<size_t>(layer.out_channels), 0.0f);
            store.set_conv(layer.path, std::move(w));
        }
    }
    return store;
}

} // namespace twmx
