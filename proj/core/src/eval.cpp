#include "hsst/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

namespace hsst::eval {

using nlohmann::json;

std::vector<model::FeatureVector> extract_embeddings(const model::NetworkParams& probe_params,
                                                     const data::Dataset& ds,
                                                     std::span<const int> sample_indices) {
    std::vector<model::FeatureVector> out;
    if (sample_indices.empty()) return out;
    out.reserve(sample_indices.size());
    // Batched to bound the forward cache footprint.
    constexpr std::size_t kChunk = 64;
    std::vector<Image> batch;
    for (std::size_t i = 0; i < sample_indices.size(); i += kChunk) {
        batch.clear();
        const std::size_t end = std::min(i + kChunk, sample_indices.size());
        for (std::size_t k = i; k < end; ++k) batch.push_back(ds.image(sample_indices[k]));
        auto feats = model::forward(probe_params, batch);
        for (auto& f : feats) out.push_back(std::move(f));
    }
    return out;
}

double rank1(std::span<const model::FeatureVector> probe_feats, std::span<const int> probe_ids,
             std::span<const model::FeatureVector> gallery_feats,
             std::span<const int> gallery_ids) {
    if (probe_feats.empty() || gallery_feats.empty())
        throw InputError("rank1: empty probe or gallery set");
    if (probe_feats.size() != probe_ids.size() || gallery_feats.size() != gallery_ids.size())
        throw InputError("rank1: feature/id count mismatch");

    int correct = 0;
    for (std::size_t p = 0; p < probe_feats.size(); ++p) {
        std::size_t best = 0;
        double best_cos = probe_feats[p].dot(gallery_feats[0]);
        for (std::size_t g = 1; g < gallery_feats.size(); ++g) {
            const double c = probe_feats[p].dot(gallery_feats[g]);
            if (c > best_cos) {
                best_cos = c;
                best = g;
            }
        }
        if (gallery_ids[best] == probe_ids[p]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probe_feats.size());
}

double vr_at_far(std::span<const double> genuine, std::span<const double> impostor, double far,
                 bool* warning) {
    if (genuine.empty() || impostor.empty())
        throw InputError("vr_at_far: empty score list");
    if (!(far > 0.0) || far > 1.0) throw InputError("vr_at_far: far must be in (0, 1]");
    if (warning) *warning = false;

    const double n_imp = static_cast<double>(impostor.size());
    std::vector<double> sorted(impostor.begin(), impostor.end());
    std::sort(sorted.begin(), sorted.end());

    // Smallest observed impostor score whose strict-accept count meets the FAR.
    // The max impostor score always qualifies (zero strict accepts), so the
    // loop terminates with a threshold even when far < 1/N.
    double threshold = sorted.back();
    for (double t : sorted) {
        const auto above =
            sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
        if (static_cast<double>(above) / n_imp <= far) {
            threshold = t;
            break;
        }
    }
    if (warning && far < 1.0 / n_imp) *warning = true;

    int accepted = 0;
    for (double g : genuine)
        if (g > threshold) ++accepted;
    return static_cast<double>(accepted) / static_cast<double>(genuine.size());
}

EvalProtocol make_protocol(const data::Dataset& ds, int fold, bool masked_probes,
                           std::vector<double> far_targets) {
    EvalProtocol p;
    p.fold = fold;
    p.far_targets = std::move(far_targets);
    for (int id : ds.test_ids(fold)) {
        for (int s : ds.samples_of(id, Domain::NIR, masked_probes)) p.probe_samples.push_back(s);
        for (int s : ds.samples_of(id, Domain::VIS, false)) p.gallery_samples.push_back(s);
    }
    if (p.probe_samples.empty() || p.gallery_samples.empty())
        throw InputError("make_protocol: fold has no probe or gallery samples");
    return p;
}

FoldResult evaluate_fold(const model::NetworkParams& probe_params, const data::Dataset& ds,
                         const EvalProtocol& protocol) {
    const auto probe_feats = extract_embeddings(probe_params, ds, protocol.probe_samples);
    const auto gallery_feats = extract_embeddings(probe_params, ds, protocol.gallery_samples);
    std::vector<int> probe_ids, gallery_ids;
    for (int s : protocol.probe_samples) probe_ids.push_back(ds.info(s).identity);
    for (int s : protocol.gallery_samples) gallery_ids.push_back(ds.info(s).identity);

    FoldResult r;
    r.fold = protocol.fold;
    r.probe_count = static_cast<int>(probe_ids.size());
    r.gallery_count = static_cast<int>(gallery_ids.size());
    r.rank1 = rank1(probe_feats, probe_ids, gallery_feats, gallery_ids);

    std::vector<double> genuine, impostor;
    for (std::size_t p = 0; p < probe_feats.size(); ++p)
        for (std::size_t g = 0; g < gallery_feats.size(); ++g) {
            const double c = probe_feats[p].dot(gallery_feats[g]);
            (probe_ids[p] == gallery_ids[g] ? genuine : impostor).push_back(c);
        }
    for (double far : protocol.far_targets)
        r.vr_at_far[far] = vr_at_far(genuine, impostor, far);
    return r;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return {mean, std::sqrt(var)};
}

}  // namespace

EvalReport kfold_report(std::vector<FoldResult> per_fold) {
    if (per_fold.empty()) throw InputError("kfold_report: no folds");
    EvalReport rep;
    std::vector<double> r1;
    for (const auto& f : per_fold) r1.push_back(f.rank1);
    std::tie(rep.rank1_mean, rep.rank1_std) = mean_std(r1);
    for (const auto& [far, _] : per_fold.front().vr_at_far) {
        std::vector<double> vs;
        for (const auto& f : per_fold) vs.push_back(f.vr_at_far.at(far));
        std::tie(rep.vr_mean[far], rep.vr_std[far]) = mean_std(vs);
    }
    rep.per_fold = std::move(per_fold);
    return rep;
}

void write_report_json(const std::string& path, const EvalReport& report) {
    json j;
    j["rank1"] = {{"mean", report.rank1_mean}, {"std", report.rank1_std}};
    json vr = json::object();
    for (const auto& [far, v] : report.vr_mean)
        vr[std::to_string(far)] = {{"mean", v}, {"std", report.vr_std.at(far)}};
    j["vr_at_far"] = std::move(vr);
    json folds = json::array();
    for (const auto& f : report.per_fold) {
        json jf{{"fold", f.fold},
                {"rank1", f.rank1},
                {"probe_count", f.probe_count},
                {"gallery_count", f.gallery_count}};
        json jvr = json::object();
        for (const auto& [far, v] : f.vr_at_far) jvr[std::to_string(far)] = v;
        jf["vr_at_far"] = std::move(jvr);
        folds.push_back(std::move(jf));
    }
    j["folds"] = std::move(folds);
    std::ofstream os(path);
    if (!os) throw InputError("cannot write report: " + path);
    os << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write report: " + path);
    os << "fold,rank1";
    for (const auto& [far, _] : report.vr_mean) os << ",vr_at_far_" << far;
    os << "\n";
    for (const auto& f : report.per_fold) {
        os << f.fold << "," << f.rank1;
        for (const auto& [far, _] : report.vr_mean) os << "," << f.vr_at_far.at(far);
        os << "\n";
    }
    os << "mean," << report.rank1_mean;
    for (const auto& [far, v] : report.vr_mean) os << "," << v;
    os << "\nstd," << report.rank1_std;
    for (const auto& [far, _] : report.vr_mean) os << "," << report.vr_std.at(far);
    os << "\n";
}

EvalReport read_report_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open report: " + path);
    json j;
    is >> j;
    std::vector<FoldResult> folds;
    for (const auto& jf : j.at("folds")) {
        FoldResult f;
        f.fold = jf.at("fold").get<int>();
        f.rank1 = jf.at("rank1").get<double>();
        f.probe_count = jf.at("probe_count").get<int>();
        f.gallery_count = jf.at("gallery_count").get<int>();
        for (const auto& [k, v] : jf.at("vr_at_far").items())
            f.vr_at_far[std::stod(k)] = v.get<double>();
        folds.push_back(std::move(f));
    }
    return kfold_report(std::move(folds));
}

}  // namespace hsst::eval
