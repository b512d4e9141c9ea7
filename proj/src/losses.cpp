#include "twmx/losses.hpp"

#include <algorithm>
#include <cmath>

namespace twmx {

void ProbMap::validate() const {
    if (prob.shape() != target.shape())
        fail_shape("probability map " + prob.shape().str() + " and target " + target.shape().str() + " differ");
    if (prob.empty()) fail_shape("empty probability map");
    for (float p : prob.data()) {
        if (std::isnan(p)) throw Error(ErrorKind::Decode, "NaN in probability map");
        if (p < 0.0f || p > 1.0f) fail_shape("probability " + std::to_string(p) + " outside [0, 1]");
    }
    for (float g : target.data())
        if (g != 0.0f && g != 1.0f) fail_shape("target label " + std::to_string(g) + " is not 0 or 1");
}

LossResult focal_loss(const ProbMap& pm, const LossParams& params) {
    pm.validate();
    const double alpha = params.focal_alpha;
    const double gamma = params.focal_gamma;
    const auto count = static_cast<double>(pm.prob.numel());
    LossResult r{0.0, Tensor::zeros_like(pm.prob)};
    double sum = 0.0;
    for (int64_t i = 0; i < pm.prob.numel(); ++i) {
        const double raw = pm.prob.data()[i];
        const double p = std::clamp(raw, kProbClip, 1.0 - kProbClip);
        const bool fg = pm.target.data()[i] == 1.0f;
        const double pt = fg ? p : 1.0 - p;
        const double q = 1.0 - pt;
        const double log_pt = std::log(pt);
        sum += -alpha * std::pow(q, gamma) * log_pt;
        // d/dpt [-a q^g log pt] = a (g q^(g-1) log pt - q^g / pt)
        double dpt = -alpha * std::pow(q, gamma) / pt;
        if (gamma != 0.0) dpt += alpha * gamma * std::pow(q, gamma - 1.0) * log_pt;
        const bool clipped = raw < kProbClip || raw > 1.0 - kProbClip;
        const double dp = clipped ? 0.0 : (fg ? dpt : -dpt);
        r.grad.data()[i] = static_cast<float>(dp / count);
    }
    r.value = sum / count;
    return r;
}

LossResult tversky_loss(const ProbMap& pm, const LossParams& params) {
    pm.validate();
    const double a = params.tversky_alpha;
    const double b = params.tversky_beta;
    const double s = params.tversky_smooth;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (int64_t i = 0; i < pm.prob.numel(); ++i) {
        const double p = pm.prob.data()[i];
        const double g = pm.target.data()[i];
        tp += p * g;
        fp += p * (1.0 - g);
        fn += (1.0 - p) * g;
    }
    const double num = tp + s;
    const double den = tp + a * fp + b * fn + s;
    LossResult r{1.0 - num / den, Tensor::zeros_like(pm.prob)};
    for (int64_t i = 0; i < pm.prob.numel(); ++i) {
        const double g = pm.target.data()[i];
        const double dnum = g;
        const double dden = g + a * (1.0 - g) - b * g;
        r.grad.data()[i] = static_cast<float>(-(dnum * den - num * dden) / (den * den));
    }
    return r;
}

double task_loss(const ProbMap& pm, const LossParams& params) {
    return focal_loss(pm, params).value + tversky_loss(pm, params).value;
}

double total_loss(const ProbMap& drivable, const ProbMap& lane, const LossParams& drivable_params,
                  const LossParams& lane_params) {
    return task_loss(drivable, drivable_params) + task_loss(lane, lane_params);
}

Tensor foreground_probability(const Tensor& logits) {
    if (logits.c() != 2) fail_shape("foreground_probability expects 2 channels, got " + logits.shape().str());
    Tensor out(Shape{logits.n(), 1, logits.h(), logits.w()});
    const int64_t plane = logits.h() * logits.w();
    for (int64_t n = 0; n < logits.n(); ++n) {
        const float* bg = logits.plane(n, 0);
        const float* fg = logits.plane(n, 1);
        float* dst = out.plane(n, 0);
        for (int64_t i = 0; i < plane; ++i) {
            // sigmoid(fg - bg) == softmax channel 1
            const double d = static_cast<double>(fg[i]) - static_cast<double>(bg[i]);
            dst[i] = static_cast<float>(1.0 / (1.0 + std::exp(-d)));
        }
    }
    return out;
}

double grad_check(const LossFn& loss_fn, const ProbMap& pm, const LossParams& params, double h) {
    const LossResult analytic = loss_fn(pm, params);
    ProbMap probe = pm;
    double worst = 0.0;
    for (int64_t i = 0; i < pm.prob.numel(); ++i) {
        const double g = analytic.grad.data()[i];
        if (std::fabs(g) <= 1e-8) continue;
        const float centre = pm.prob.data()[i];
        const auto up = static_cast<float>(std::min(1.0, static_cast<double>(centre) + h));
        const auto down = static_cast<float>(std::max(0.0, static_cast<double>(centre) - h));
        probe.prob.data()[i] = up;
        const double f_up = loss_fn(probe, params).value;
        probe.prob.data()[i] = down;
        const double f_down = loss_fn(probe, params).value;
        probe.prob.data()[i] = centre;
        const double numeric = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
        const double scale = std::max(std::fabs(g), std::fabs(numeric));
        worst = std::max(worst, std::fabs(g - numeric) / scale);
    }
    return worst;
}

} // namespace twmx
