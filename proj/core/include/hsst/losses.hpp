#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "hsst/common.hpp"
#include "hsst/model.hpp"

namespace hsst::losses {

using model::FeatureVector;

enum class Head { softmax, am_softmax, arc_softmax, triplet };

Head head_from_string(const std::string& s);
const char* to_string(Head h);

struct LossConfig {
    Head head = Head::softmax;
    double scale = 30.0;          // s in the scaled-cosine logits
    double margin = 0.35;         // AM default; 0.5 is the Arc default
    double triplet_margin = 0.3;

    void validate() const;
};

struct LossOutput {
    double value = 0.0;
    Eigen::VectorXd grad_feature;  // d value / d probe feature, prototypes constant
    double positive_logit = 0.0;
    double max_negative_logit = 0.0;
};

struct DiagnosticsReport {
    double mean_pos_cos = 0.0;
    double mean_neg_cos = 0.0;
    double feature_std = 0.0;
};

// out[j] = <feature, prototypes[j]>; all inputs unit-norm.
Eigen::VectorXd cosine_logits(const FeatureVector& feature,
                              std::span<const FeatureVector> prototypes);

// Margin applied to the positive cosine only. softmax: identity;
// am_softmax: cos - m; arc_softmax: cos(acos(clamp(cos)) + m).
double margin_adjust(double cos_theta, double m, Head kind);

// Derivative of margin_adjust w.r.t. cos_theta (guarded near |cos| = 1).
double margin_adjust_derivative(double cos_theta, double m, Head kind);

// Prototype-queue cross entropy: the positive logit is the margin-adjusted
// cosine against the paired gallery feature, negatives are raw cosines
// against the opposite-domain queue. Log-sum-exp uses max subtraction.
LossOutput proto_softmax_loss(const FeatureVector& probe_feature,
                              const FeatureVector& positive_prototype,
                              std::span<const FeatureVector> queue_prototypes,
                              const LossConfig& cfg);

// max(0, margin - cos(a,p) + max_j cos(a,n_j)); hardest negative.
LossOutput triplet_loss(const FeatureVector& anchor, const FeatureVector& positive,
                        std::span<const FeatureVector> negatives, double margin);

DiagnosticsReport diagnostics(std::span<const double> pos_cosines,
                              std::span<const double> neg_cosines,
                              std::span<const FeatureVector> features);

}  // namespace hsst::losses
