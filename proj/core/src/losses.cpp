#include "hsst/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hsst::losses {

Head head_from_string(const std::string& s) {
    if (s == "softmax") return Head::softmax;
    if (s == "am_softmax" || s == "am-softmax") return Head::am_softmax;
    if (s == "arc_softmax" || s == "arc-softmax") return Head::arc_softmax;
    if (s == "triplet") return Head::triplet;
    throw ConfigError("unknown loss head: " + s);
}

const char* to_string(Head h) {
    switch (h) {
        case Head::softmax: return "softmax";
        case Head::am_softmax: return "am_softmax";
        case Head::arc_softmax: return "arc_softmax";
        case Head::triplet: return "triplet";
    }
    return "?";
}

void LossConfig::validate() const {
    if (!(scale > 0.0)) throw ConfigError("loss.scale must be positive");
    if (margin < 0.0) throw ConfigError("loss.margin must be >= 0");
    if (head == Head::arc_softmax && margin >= std::numbers::pi / 2)
        throw ConfigError("arc_softmax margin must be < pi/2");
    if (triplet_margin < 0.0) throw ConfigError("loss.triplet_margin must be >= 0");
}

Eigen::VectorXd cosine_logits(const FeatureVector& feature,
                              std::span<const FeatureVector> prototypes) {
    if (prototypes.empty()) throw InputError("cosine_logits: empty prototype list");
    Eigen::VectorXd out(static_cast<Eigen::Index>(prototypes.size()));
    for (std::size_t j = 0; j < prototypes.size(); ++j) {
        if (prototypes[j].size() != feature.size())
            throw InputError("cosine_logits: prototype dimension mismatch");
        out[static_cast<Eigen::Index>(j)] = feature.dot(prototypes[j]);
    }
    return out;
}

double margin_adjust(double cos_theta, double m, Head kind) {
    switch (kind) {
        case Head::softmax:
        case Head::triplet:
            return cos_theta;
        case Head::am_softmax:
            return cos_theta - m;
        case Head::arc_softmax: {
            const double c = std::clamp(cos_theta, -1.0, 1.0);
            return std::cos(std::acos(c) + m);
        }
    }
    return cos_theta;
}

double margin_adjust_derivative(double cos_theta, double m, Head kind) {
    switch (kind) {
        case Head::softmax:
        case Head::triplet:
        case Head::am_softmax:
            return 1.0;
        case Head::arc_softmax: {
            const double c = std::clamp(cos_theta, -1.0, 1.0);
            const double sin_theta_sq = 1.0 - c * c;
            if (sin_theta_sq < 1e-12) return 1.0;  // boundary guard
            const double theta = std::acos(c);
            return std::sin(theta + m) / std::sqrt(sin_theta_sq);
        }
    }
    return 1.0;
}

LossOutput proto_softmax_loss(const FeatureVector& probe_feature,
                              const FeatureVector& positive_prototype,
                              std::span<const FeatureVector> queue_prototypes,
                              const LossConfig& cfg) {
    if (queue_prototypes.empty())
        throw InputError("proto_softmax_loss: empty prototype queue");
    cfg.validate();
    const double s = cfg.scale;
    const double pos_cos = probe_feature.dot(positive_prototype);
    const double adj = margin_adjust(pos_cos, cfg.margin, cfg.head);
    const Eigen::VectorXd neg_cos = cosine_logits(probe_feature, queue_prototypes);

    const Eigen::Index n = neg_cos.size();
    Eigen::VectorXd logits(n + 1);
    logits[0] = s * adj;
    logits.tail(n) = s * neg_cos;

    const double zmax = logits.maxCoeff();
    const Eigen::VectorXd ex = (logits.array() - zmax).exp();
    const double denom = ex.sum();
    const double value = -(logits[0] - zmax) + std::log(denom);

    // d value / d logits = softmax - onehot(0).
    const Eigen::VectorXd sigma = ex / denom;
    const double dadj = margin_adjust_derivative(pos_cos, cfg.margin, cfg.head);
    Eigen::VectorXd grad = s * (sigma[0] - 1.0) * dadj * positive_prototype;
    for (Eigen::Index j = 0; j < n; ++j)
        grad += s * sigma[j + 1] * queue_prototypes[static_cast<std::size_t>(j)];

    if (!std::isfinite(value) || !grad.allFinite())
        throw NumericError("proto_softmax_loss: non-finite result (pos_cos=" +
                           std::to_string(pos_cos) + ", s=" + std::to_string(s) + ")");

    LossOutput out;
    out.value = value;
    out.grad_feature = std::move(grad);
    out.positive_logit = logits[0];
    out.max_negative_logit = s * neg_cos.maxCoeff();
    return out;
}

LossOutput triplet_loss(const FeatureVector& anchor, const FeatureVector& positive,
                        std::span<const FeatureVector> negatives, double margin) {
    if (negatives.empty()) throw InputError("triplet_loss: empty negative list");
    const double pos_cos = anchor.dot(positive);
    Eigen::Index hardest = 0;
    double hard_cos = -2.0;
    for (std::size_t j = 0; j < negatives.size(); ++j) {
        const double c = anchor.dot(negatives[j]);
        if (c > hard_cos) {
            hard_cos = c;
            hardest = static_cast<Eigen::Index>(j);
        }
    }
    const double hinge = margin - pos_cos + hard_cos;

    LossOutput out;
    out.positive_logit = pos_cos;
    out.max_negative_logit = hard_cos;
    if (hinge > 0.0) {
        out.value = hinge;
        out.grad_feature = negatives[static_cast<std::size_t>(hardest)] - positive;
    } else {
        out.value = 0.0;
        out.grad_feature = Eigen::VectorXd::Zero(anchor.size());
    }
    return out;
}

DiagnosticsReport diagnostics(std::span<const double> pos_cosines,
                              std::span<const double> neg_cosines,
                              std::span<const FeatureVector> features) {
    if (pos_cosines.empty() || neg_cosines.empty() || features.empty())
        throw InputError("diagnostics: empty input");
    DiagnosticsReport r;
    for (double c : pos_cosines) r.mean_pos_cos += c;
    r.mean_pos_cos /= static_cast<double>(pos_cosines.size());
    for (double c : neg_cosines) r.mean_neg_cos += c;
    r.mean_neg_cos /= static_cast<double>(neg_cosines.size());

    // Mean per-dimension population std across the feature batch.
    const Eigen::Index d = features[0].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) mean += f;
    mean /= static_cast<double>(features.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) var += (f - mean).cwiseAbs2();
    var /= static_cast<double>(features.size());
    r.feature_std = var.cwiseSqrt().mean();
    return r;
}

}  // namespace hsst::losses
