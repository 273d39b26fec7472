#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hsst/data.hpp"
#include "hsst/model.hpp"

namespace hsst::eval {

struct EvalProtocol {
    std::vector<int> probe_samples;    // dataset sample indices
    std::vector<int> gallery_samples;
    int fold = 0;
    std::vector<double> far_targets = {0.01, 0.001};
};

struct FoldResult {
    int fold = 0;
    double rank1 = 0.0;
    std::map<double, double> vr_at_far;
    int probe_count = 0;
    int gallery_count = 0;
};

struct EvalReport {
    std::vector<FoldResult> per_fold;
    double rank1_mean = 0.0, rank1_std = 0.0;
    std::map<double, double> vr_mean, vr_std;
};

// Probe-net features for a list of dataset samples, order-aligned.
std::vector<model::FeatureVector> extract_embeddings(const model::NetworkParams& probe_params,
                                                     const data::Dataset& ds,
                                                     std::span<const int> sample_indices);

// Fraction of probes whose highest-cosine gallery image shares their identity.
// Ties break toward the lowest gallery index.
double rank1(std::span<const model::FeatureVector> probe_feats, std::span<const int> probe_ids,
             std::span<const model::FeatureVector> gallery_feats,
             std::span<const int> gallery_ids);

// Verification rate at the stated FAR. The threshold is the smallest observed
// impostor score t with (#impostors > t) / N <= far; returns (#genuine > t) / N.
// If even zero accepts exceed the requested FAR resolution, the max impostor
// score is used and *warning (when non-null) is set.
double vr_at_far(std::span<const double> genuine, std::span<const double> impostor, double far,
                 bool* warning = nullptr);

// Builds the NIR-probe / VIS-gallery protocol for one fold's test identities.
EvalProtocol make_protocol(const data::Dataset& ds, int fold, bool masked_probes,
                           std::vector<double> far_targets = {0.01, 0.001});

FoldResult evaluate_fold(const model::NetworkParams& probe_params, const data::Dataset& ds,
                         const EvalProtocol& protocol);

// Arithmetic mean and population std per metric.
EvalReport kfold_report(std::vector<FoldResult> per_fold);

void write_report_json(const std::string& path, const EvalReport& report);
void write_report_csv(const std::string& path, const EvalReport& report);
EvalReport read_report_json(const std::string& path);

}  // namespace hsst::eval
