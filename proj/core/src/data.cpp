#include "hsst/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "hsst/masksynth.hpp"
#include "hsst/png_io.hpp"
#include "hsst/rng.hpp"

namespace hsst::data {

namespace fs = std::filesystem;
using nlohmann::json;

void DataConfig::validate() const {
    if (root.empty()) throw ConfigError("data.root must be set");
    if (identities <= 0 || vis_per_id <= 0 || nir_per_id <= 0)
        throw ConfigError("data: identities and per-identity counts must be positive");
    if (folds <= 0 || folds > identities)
        throw ConfigError("data.folds must be in [1, identities]");
    if (image_size <= 0 || image_size % 8 != 0)
        throw ConfigError("data.image_size must be a positive multiple of 8");
}

namespace {

struct WavePattern {
    // Three cosine components per channel.
    double amp[3][3];
    double fy[3], fx[3];
    double phase[3][3];
};

WavePattern draw_pattern(Rng& rng, double amp_lo, double amp_hi, int max_freq) {
    WavePattern p;
    for (int k = 0; k < 3; ++k) {
        p.fy[k] = 1.0 + rng.uniform_int(max_freq);
        p.fx[k] = 1.0 + rng.uniform_int(max_freq);
        for (int c = 0; c < 3; ++c) {
            p.amp[k][c] = rng.uniform(amp_lo, amp_hi);
            p.phase[k][c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }
    return p;
}

double eval_pattern(const WavePattern& p, double y, double x, int c, int size) {
    double v = 0.0;
    for (int k = 0; k < 3; ++k)
        v += p.amp[k][c] *
             std::cos(2.0 * std::numbers::pi * (p.fy[k] * y + p.fx[k] * x) / size +
                      p.phase[k][c]);
    return v;
}

// Smoothstep window ramping on over [y0, y1].
double lower_window(double y, double y0, double y1) {
    if (y <= y0) return 0.0;
    if (y >= y1) return 1.0;
    const double t = (y - y0) / (y1 - y0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Image gen_identity_canvas(std::uint64_t seed, int id, int variation, int size) {
    Rng id_rng = Rng(seed).fork(0x1D000000ull + static_cast<std::uint64_t>(id));
    const WavePattern global = draw_pattern(id_rng, 0.06, 0.13, 3);
    const WavePattern lower = draw_pattern(id_rng, 0.14, 0.26, 4);
    double offset[3];
    for (int c = 0; c < 3; ++c) offset[c] = id_rng.uniform(-0.10, 0.10);

    Rng var_rng = id_rng.fork(0x7A000000ull + static_cast<std::uint64_t>(variation));
    const int dy = static_cast<int>(var_rng.uniform_int(5)) - 2;
    const int dx = static_cast<int>(var_rng.uniform_int(5)) - 2;
    const double contrast = var_rng.uniform(0.9, 1.1);
    const double brightness = var_rng.uniform(-0.05, 0.05);

    const double y0 = 0.50 * size, y1 = 0.62 * size;
    Image img(size, size, 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double sy = y + dy, sx = x + dx;
            const double win = lower_window(sy, y0, y1);
            for (int c = 0; c < 3; ++c) {
                double v = 0.5 + offset[c] + eval_pattern(global, sy, sx, c, size) +
                           win * eval_pattern(lower, sy, sx, c, size);
                v = 0.5 + contrast * (v - 0.5) + brightness;
                img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    // Mild pixel jitter, independent of the shift so patterns stay aligned.
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) =
                    std::clamp(img.at(y, x, c) + 0.02 * var_rng.normal(), 0.0, 1.0);
    return img;
}

Image domain_transform(const Image& img, Domain domain, std::uint64_t noise_seed) {
    if (domain == Domain::VIS) return img;
    Rng rng(noise_seed == 0 ? 1 : noise_seed);
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double lum =
                (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
            const double v =
                std::clamp(std::pow(lum, 0.75) + 0.05 * rng.normal(), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = v;
        }
    return out;
}

namespace {

masksynth::MaskTemplate gray_template(const masksynth::MaskTemplate& tpl) {
    masksynth::MaskTemplate g = tpl;
    for (int y = 0; y < g.texture.height; ++y)
        for (int x = 0; x < g.texture.width; ++x) {
            const double lum = (g.texture.at(y, x, 0) + g.texture.at(y, x, 1) +
                                g.texture.at(y, x, 2)) /
                               3.0;
            for (int c = 0; c < 3; ++c) g.texture.at(y, x, c) = lum;
        }
    return g;
}

std::string sample_filename(Domain d, bool masked, int k) {
    return std::string(d == Domain::NIR ? "nir" : "vis") + "_" +
           (masked ? "masked" : "full") + "_" + std::to_string(k) + ".png";
}

std::string id_dir(int id) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%03d", id);
    return buf;
}

}  // namespace

DatasetManifest build_dataset(const DataConfig& cfg) {
    cfg.validate();
    const int size = cfg.image_size;
    fs::create_directories(cfg.root);

    const auto tpl = masksynth::make_template(cfg.mask_template, size, size);
    const auto tpl_gray = gray_template(tpl);
    const Image posmap = masksynth::identity_position_map(size, size);
    const auto validity = masksynth::full_validity(size, size);

    DatasetManifest m;
    m.config = cfg;

    // Identity partition into k folds, round-robin for determinism.
    m.folds.assign(cfg.folds, {});
    for (int id = 0; id < cfg.identities; ++id) m.folds[id % cfg.folds].push_back(id);

    for (int id = 0; id < cfg.identities; ++id) {
        const fs::path dir = fs::path(cfg.root) / id_dir(id);
        fs::create_directories(dir);
        for (int k = 0; k < cfg.vis_per_id; ++k) {
            const Image canvas = gen_identity_canvas(cfg.seed, id, k, size);
            const Image vis = domain_transform(canvas, Domain::VIS, 0);
            SampleInfo info{id, Domain::VIS, false, k,
                            id_dir(id) + "/" + sample_filename(Domain::VIS, false, k)};
            png_io::write_png((fs::path(cfg.root) / info.path).string(), vis);
            m.samples.push_back(std::move(info));
        }
        for (int k = 0; k < cfg.nir_per_id; ++k) {
            // Distinct variation indices keep NIR and VIS shots of one identity
            // from being pixel-aligned copies.
            const Image canvas = gen_identity_canvas(cfg.seed, id, cfg.vis_per_id + k, size);
            const std::uint64_t noise_seed =
                Rng(cfg.seed).fork(0x41B000ull + id * 1000ull + k).next_u64();
            const Image nir = domain_transform(canvas, Domain::NIR, noise_seed);
            SampleInfo full{id, Domain::NIR, false, k,
                            id_dir(id) + "/" + sample_filename(Domain::NIR, false, k)};
            png_io::write_png((fs::path(cfg.root) / full.path).string(), nir);
            m.samples.push_back(full);

            masksynth::UVAssets assets{nir, posmap, validity};
            const Image masked = masksynth::synthesize_masked(assets, tpl_gray, size, size);
            SampleInfo mk{id, Domain::NIR, true, k,
                          id_dir(id) + "/" + sample_filename(Domain::NIR, true, k)};
            png_io::write_png((fs::path(cfg.root) / mk.path).string(), masked);
            m.samples.push_back(std::move(mk));
        }
    }
    save_manifest((fs::path(cfg.root) / "manifest.json").string(), m);
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["identities"] = m.config.identities;
    j["vis_per_id"] = m.config.vis_per_id;
    j["nir_per_id"] = m.config.nir_per_id;
    j["fold_count"] = m.config.folds;
    j["image_size"] = m.config.image_size;
    j["seed"] = m.config.seed;
    j["mask_template"] = m.config.mask_template;
    j["folds"] = m.folds;
    json samples = json::array();
    for (const auto& s : m.samples) {
        samples.push_back({{"id", s.identity},
                           {"domain", to_string(s.domain)},
                           {"masked", s.masked},
                           {"index", s.index},
                           {"path", s.path}});
    }
    j["samples"] = std::move(samples);
    std::ofstream os(path);
    if (!os) throw InputError("cannot write manifest: " + path);
    os << j.dump(1) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open manifest: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw InputError("malformed manifest " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.config.root = fs::path(path).parent_path().string();
    m.config.identities = j.at("identities").get<int>();
    m.config.vis_per_id = j.at("vis_per_id").get<int>();
    m.config.nir_per_id = j.at("nir_per_id").get<int>();
    m.config.folds = j.at("fold_count").get<int>();
    m.config.image_size = j.at("image_size").get<int>();
    m.config.seed = j.at("seed").get<std::uint64_t>();
    m.config.mask_template = j.at("mask_template").get<std::string>();
    m.folds = j.at("folds").get<std::vector<std::vector<int>>>();
    for (const auto& s : j.at("samples")) {
        SampleInfo info;
        info.identity = s.at("id").get<int>();
        info.domain = domain_from_string(s.at("domain").get<std::string>());
        info.masked = s.at("masked").get<bool>();
        info.index = s.at("index").get<int>();
        info.path = s.at("path").get<std::string>();
        m.samples.push_back(std::move(info));
    }
    return m;
}

int Dataset::cell_of(Domain d, bool masked) {
    if (d == Domain::VIS) return masked ? 3 : 0;  // VIS-masked cell stays empty
    return masked ? 2 : 1;
}

Dataset Dataset::load(const std::string& manifest_path) {
    Dataset ds;
    ds.manifest_ = load_manifest(manifest_path);
    const auto& m = ds.manifest_;
    ds.pixels_.resize(m.samples.size());
    ds.by_cell_.assign(static_cast<std::size_t>(m.config.identities) * 4, {});
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        const SampleInfo& s = m.samples[i];
        const Image img =
            png_io::read_png((fs::path(m.config.root) / s.path).string());
        if (img.height != m.config.image_size || img.width != m.config.image_size)
            throw InputError("sample " + s.path + " has unexpected dimensions");
        ds.pixels_[i].assign(img.data.begin(), img.data.end());
        ds.by_cell_[static_cast<std::size_t>(s.identity) * 4 + cell_of(s.domain, s.masked)]
            .push_back(static_cast<int>(i));
    }
    return ds;
}

const std::vector<int>& Dataset::test_ids(int fold) const {
    if (fold < 0 || fold >= static_cast<int>(manifest_.folds.size()))
        throw InputError("fold index out of range: " + std::to_string(fold));
    return manifest_.folds[fold];
}

std::vector<int> Dataset::train_ids(int fold) const {
    const auto& test = test_ids(fold);
    std::vector<bool> is_test(manifest_.config.identities, false);
    for (int id : test) is_test[id] = true;
    std::vector<int> out;
    for (int id = 0; id < manifest_.config.identities; ++id)
        if (!is_test[id]) out.push_back(id);
    return out;
}

const std::vector<int>& Dataset::samples_of(int id, Domain d, bool masked) const {
    return by_cell_[static_cast<std::size_t>(id) * 4 + cell_of(d, masked)];
}

Image Dataset::image(int sample_index) const {
    const int size = manifest_.config.image_size;
    Image img(size, size, 3);
    const auto& px = pixels_[sample_index];
    std::copy(px.begin(), px.end(), img.data.begin());
    return img;
}

}  // namespace hsst::data
