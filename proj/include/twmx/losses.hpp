#pragma once

#include "twmx/tensor.hpp"

#include <functional>

namespace twmx {

struct LossParams {
    double tversky_alpha = 0.5; // false-positive weight
    double tversky_beta = 0.5;  // false-negative weight
    double tversky_smooth = 1.0;
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;

    static LossParams drivable() { return {0.7, 0.3, 1.0, 0.25, 2.0}; }
    static LossParams lane() { return {0.9, 0.1, 1.0, 0.25, 2.0}; }
};

/// Foreground probabilities and 0/1 targets of identical shape.
struct ProbMap {
    Tensor prob;
    Tensor target;

    void validate() const;
};

struct LossResult {
    double value = 0.0;
    Tensor grad; // d value / d prob, same shape as prob
};

inline constexpr double kProbClip = 1e-7;

/// Mean over pixels of -alpha_t (1 - p_t)^gamma log p_t, where p_t is the
/// probability assigned to the true class and p is clipped to [1e-7, 1 - 1e-7].
LossResult focal_loss(const ProbMap& pm, const LossParams& params);

/// 1 - (TP + s) / (TP + alpha FP + beta FN + s) over soft foreground counts.
LossResult tversky_loss(const ProbMap& pm, const LossParams& params);

/// Focal + Tversky with one task's parameters.
double task_loss(const ProbMap& pm, const LossParams& params);

/// Sum of the two task losses, unit weights.
double total_loss(const ProbMap& drivable, const ProbMap& lane, const LossParams& drivable_params,
                  const LossParams& lane_params);

/// Softmax over the two logit channels, returning the class-1 probability as (n, 1, h, w).
Tensor foreground_probability(const Tensor& logits);

using LossFn = std::function<LossResult(const ProbMap&, const LossParams&)>;

/// Central-difference check of an analytic gradient. Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|) over coordinates whose
/// analytic gradient exceeds 1e-8 in magnitude. The numeric quotient divides
/// by the step actually realized in float storage.
double grad_check(const LossFn& loss_fn, const ProbMap& pm, const LossParams& params, double h = 1e-4);

} // namespace twmx
