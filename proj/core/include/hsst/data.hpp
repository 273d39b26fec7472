#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsst/common.hpp"
#include "hsst/image.hpp"

namespace hsst::data {

struct DataConfig {
    std::string root;
    int identities = 200;
    int vis_per_id = 4;
    int nir_per_id = 4;
    int folds = 5;
    int image_size = 48;
    std::uint64_t seed = 7;
    std::string mask_template = "surgical_medium";

    void validate() const;
};

struct SampleInfo {
    int identity = 0;
    Domain domain = Domain::VIS;
    bool masked = false;
    int index = 0;       // variation index within (identity, domain)
    std::string path;    // relative to the dataset root
};

struct DatasetManifest {
    DataConfig config;
    std::vector<std::vector<int>> folds;  // identity partition; fold k is test set k
    std::vector<SampleInfo> samples;
};

// Structured low-frequency canvas, deterministic per (seed, id, variation).
// Discriminative detail is concentrated in the lower half of the face so that
// mask occlusion removes real information.
Image gen_identity_canvas(std::uint64_t seed, int id, int variation, int size);

// VIS: identity. NIR: luminance collapse (R=G=B), gamma shift, seeded noise.
Image domain_transform(const Image& img, Domain domain, std::uint64_t noise_seed);

// Writes PNGs under <root>/<id>/<domain>_<masked|full>_<k>.png plus
// <root>/manifest.json. Fully deterministic per config.
DatasetManifest build_dataset(const DataConfig& cfg);

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Manifest plus decoded pixel data, resident in memory.
class Dataset {
public:
    static Dataset load(const std::string& manifest_path);

    const DatasetManifest& manifest() const { return manifest_; }
    int image_size() const { return manifest_.config.image_size; }
    int identity_count() const { return manifest_.config.identities; }

    const std::vector<int>& test_ids(int fold) const;
    std::vector<int> train_ids(int fold) const;

    // Sample indices for one (identity, domain, masked) cell; may be empty.
    const std::vector<int>& samples_of(int id, Domain d, bool masked) const;

    const SampleInfo& info(int sample_index) const { return manifest_.samples[sample_index]; }
    Image image(int sample_index) const;

private:
    DatasetManifest manifest_;
    std::vector<std::vector<float>> pixels_;       // per sample, HWC
    std::vector<std::vector<int>> by_cell_;        // [id * 3 + cell]
    static int cell_of(Domain d, bool masked);
};

}  // namespace hsst::data
