#include "hsst/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "hsst/rng.hpp"

namespace hsst::model {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRowMat = Eigen::Map<RowMat>;
using MapConstRowMat = Eigen::Map<const RowMat>;

constexpr int kKernel = 3;
constexpr int kPad = 1;

int tensor_numel(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

Tensor make_tensor(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.values = Eigen::VectorXd::Zero(tensor_numel(t.shape));
    return t;
}

// Planar CHW copy of an interleaved image.
Eigen::VectorXd to_planar(const Image& img) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(img.channels) * img.height * img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out[(static_cast<Eigen::Index>(c) * img.height + y) * img.width + x] =
                    img.at(y, x, c);
    return out;
}

// 3x3 pad-1 stride-1 im2col: rows indexed by (ci, ky, kx), columns by (y, x).
Eigen::MatrixXd im2col(const Eigen::VectorXd& planar, int c, int h, int w) {
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(c * kKernel * kKernel,
                                                 static_cast<Eigen::Index>(h) * w);
    for (int ci = 0; ci < c; ++ci) {
        const double* plane = planar.data() + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < kKernel; ++ky) {
            for (int kx = 0; kx < kKernel; ++kx) {
                const int row = (ci * kKernel + ky) * kKernel + kx;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - kPad;
                    if (sy < 0 || sy >= h) continue;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + kx - kPad;
                        if (sx < 0 || sx >= w) continue;
                        cols(row, static_cast<Eigen::Index>(y) * w + x) = plane[sy * w + sx];
                    }
                }
            }
        }
    }
    return cols;
}

// Transpose of im2col: scatter-add column gradients back onto the input plane.
Eigen::VectorXd col2im(const Eigen::MatrixXd& dcols, int c, int h, int w) {
    Eigen::VectorXd din = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c) * h * w);
    for (int ci = 0; ci < c; ++ci) {
        double* plane = din.data() + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < kKernel; ++ky) {
            for (int kx = 0; kx < kKernel; ++kx) {
                const int row = (ci * kKernel + ky) * kKernel + kx;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - kPad;
                    if (sy < 0 || sy >= h) continue;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + kx - kPad;
                        if (sx < 0 || sx >= w) continue;
                        plane[sy * w + sx] += dcols(row, static_cast<Eigen::Index>(y) * w + x);
                    }
                }
            }
        }
    }
    return din;
}

Eigen::VectorXd avg_pool2(const Eigen::VectorXd& planar, int c, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    Eigen::VectorXd out(static_cast<Eigen::Index>(c) * oh * ow);
    for (int ci = 0; ci < c; ++ci) {
        const double* in = planar.data() + static_cast<std::size_t>(ci) * h * w;
        double* o = out.data() + static_cast<std::size_t>(ci) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                o[y * ow + x] = 0.25 * (in[(2 * y) * w + 2 * x] + in[(2 * y) * w + 2 * x + 1] +
                                        in[(2 * y + 1) * w + 2 * x] +
                                        in[(2 * y + 1) * w + 2 * x + 1]);
    }
    return out;
}

Eigen::VectorXd avg_unpool2(const Eigen::VectorXd& dout, int c, int h, int w) {
    // h, w are the pre-pool dims.
    const int oh = h / 2, ow = w / 2;
    Eigen::VectorXd din(static_cast<Eigen::Index>(c) * h * w);
    for (int ci = 0; ci < c; ++ci) {
        const double* d = dout.data() + static_cast<std::size_t>(ci) * oh * ow;
        double* o = din.data() + static_cast<std::size_t>(ci) * h * w;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double g = 0.25 * d[y * ow + x];
                o[(2 * y) * w + 2 * x] = g;
                o[(2 * y) * w + 2 * x + 1] = g;
                o[(2 * y + 1) * w + 2 * x] = g;
                o[(2 * y + 1) * w + 2 * x + 1] = g;
            }
    }
    return din;
}

void check_input(const ArchDescriptor& arch, const Image& img) {
    if (img.height != arch.input_size || img.width != arch.input_size ||
        img.channels != arch.input_channels) {
        throw InputError("forward: image dims " + std::to_string(img.height) + "x" +
                         std::to_string(img.width) + "x" + std::to_string(img.channels) +
                         " do not match architecture input " +
                         std::to_string(arch.input_size) + "x" +
                         std::to_string(arch.input_size) + "x" +
                         std::to_string(arch.input_channels));
    }
}

}  // namespace

void ArchDescriptor::validate() const {
    if (input_size <= 0 || input_channels <= 0 || embed_dim <= 0)
        throw ConfigError("architecture: all sizes must be positive");
    for (int c : conv_channels)
        if (c <= 0) throw ConfigError("architecture: conv channel counts must be positive");
    if (input_size % 8 != 0)
        throw ConfigError("architecture: input_size must be divisible by 8 (three 2x2 pools)");
}

Tensor& NetworkParams::find(const std::string& name) {
    for (auto& [n, t] : tensors)
        if (n == name) return t;
    throw InputError("no tensor named " + name);
}

const Tensor& NetworkParams::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw InputError("no tensor named " + name);
}

bool NetworkParams::all_finite() const {
    for (const auto& [n, t] : tensors)
        if (!t.values.allFinite()) return false;
    return true;
}

NetworkParams init_params(std::uint64_t seed, const ArchDescriptor& arch) {
    arch.validate();
    NetworkParams p;
    p.arch = arch;
    int in_c = arch.input_channels;
    for (int l = 0; l < 3; ++l) {
        const int out_c = arch.conv_channels[l];
        const std::string base = "conv" + std::to_string(l + 1);
        p.tensors.emplace_back(base + ".w", make_tensor({out_c, in_c, kKernel, kKernel}));
        p.tensors.emplace_back(base + ".b", make_tensor({out_c}));
        in_c = out_c;
    }
    p.tensors.emplace_back("fc.w", make_tensor({arch.embed_dim, arch.fc_input_dim()}));
    p.tensors.emplace_back("fc.b", make_tensor({arch.embed_dim}));

    Rng rng(seed ^ 0xC0FFEEull);
    for (auto& [name, t] : p.tensors) {
        if (name.ends_with(".b")) continue;  // biases start at zero
        const int fan_in = tensor_numel(t.shape) / t.shape[0];
        const double limit = std::sqrt(1.0 / fan_in);
        for (Eigen::Index i = 0; i < t.values.size(); ++i)
            t.values[i] = rng.uniform(-limit, limit);
    }
    return p;
}

ModelPair init_pair(std::uint64_t seed, const ArchDescriptor& arch, double ema_weight) {
    ModelPair pair;
    pair.probe = init_params(seed, arch);
    pair.gallery = pair.probe;
    pair.ema_weight = ema_weight;
    return pair;
}

GradientSet zeros_like(const NetworkParams& params) {
    GradientSet g;
    g.arch = params.arch;
    g.tensors.reserve(params.tensors.size());
    for (const auto& [name, t] : params.tensors)
        g.tensors.emplace_back(name, make_tensor(t.shape));
    return g;
}

std::vector<FeatureVector> forward(const NetworkParams& params,
                                   std::span<const Image> images) {
    ForwardCache cache;
    return forward(params, images, cache);
}

std::vector<FeatureVector> forward(const NetworkParams& params,
                                   std::span<const Image> images, ForwardCache& cache) {
    if (images.empty()) throw InputError("forward: empty batch");
    const ArchDescriptor& arch = params.arch;
    cache.images.assign(images.size(), ImageCache{});
    std::vector<FeatureVector> out;
    out.reserve(images.size());

    for (std::size_t i = 0; i < images.size(); ++i) {
        check_input(arch, images[i]);
        ImageCache& ic = cache.images[i];
        Eigen::VectorXd act = to_planar(images[i]);
        int h = arch.input_size, w = arch.input_size, c = arch.input_channels;
        for (int l = 0; l < 3; ++l) {
            LayerCache& lc = ic.layers[l];
            lc.in_h = h;
            lc.in_w = w;
            lc.in_c = c;
            lc.cols = im2col(act, c, h, w);
            const int out_c = arch.conv_channels[l];
            const Tensor& wt = params.tensors[2 * l].second;
            const Tensor& bt = params.tensors[2 * l + 1].second;
            MapConstRowMat wmat(wt.values.data(), out_c, c * kKernel * kKernel);
            Eigen::MatrixXd conv = wmat * lc.cols;
            conv.colwise() += Eigen::Map<const Eigen::VectorXd>(bt.values.data(), out_c);
            lc.relu_mask = (conv.array() > 0.0).cast<double>();
            conv = conv.cwiseProduct(lc.relu_mask);
            // conv rows are channels, columns are (y, x); reinterpret as planar.
            Eigen::VectorXd planar(static_cast<Eigen::Index>(out_c) * h * w);
            for (int oc = 0; oc < out_c; ++oc)
                Eigen::Map<Eigen::VectorXd>(planar.data() + static_cast<std::size_t>(oc) * h * w,
                                            static_cast<Eigen::Index>(h) * w) = conv.row(oc);
            act = avg_pool2(planar, out_c, h, w);
            c = out_c;
            h /= 2;
            w /= 2;
        }
        ic.fc_input = act;
        const Tensor& fw = params.find("fc.w");
        const Tensor& fb = params.find("fc.b");
        MapConstRowMat wmat(fw.values.data(), arch.embed_dim, arch.fc_input_dim());
        ic.embedding_raw = wmat * act + fb.values;
        out.push_back(l2_normalize(ic.embedding_raw));
    }
    return out;
}

GradientSet backward(const NetworkParams& params, const ForwardCache& cache,
                     std::span<const Eigen::VectorXd> dfeat) {
    if (dfeat.size() != cache.images.size())
        throw InputError("backward: gradient count does not match cached batch");
    const ArchDescriptor& arch = params.arch;
    GradientSet grads = zeros_like(params);

    const Tensor& fw = params.find("fc.w");
    MapConstRowMat fwmat(fw.values.data(), arch.embed_dim, arch.fc_input_dim());
    Tensor& gfw = grads.find("fc.w");
    MapRowMat gfwmat(gfw.values.data(), arch.embed_dim, arch.fc_input_dim());
    Tensor& gfb = grads.find("fc.b");

    for (std::size_t i = 0; i < cache.images.size(); ++i) {
        const ImageCache& ic = cache.images[i];
        // Through L2 normalization: d/dy (y/||y||)^T g = (g - u (u.g)) / ||y||.
        const double norm = ic.embedding_raw.norm();
        const Eigen::VectorXd u = ic.embedding_raw / norm;
        Eigen::VectorXd dy = (dfeat[i] - u * u.dot(dfeat[i])) / norm;

        gfwmat.noalias() += dy * ic.fc_input.transpose();
        gfb.values += dy;
        Eigen::VectorXd dact = fwmat.transpose() * dy;

        for (int l = 2; l >= 0; --l) {
            const LayerCache& lc = ic.layers[l];
            const int out_c = arch.conv_channels[l];
            const int h = lc.in_h, w = lc.in_w;
            Eigen::VectorXd dplanar = avg_unpool2(dact, out_c, h, w);
            Eigen::MatrixXd dconv(out_c, static_cast<Eigen::Index>(h) * w);
            for (int oc = 0; oc < out_c; ++oc)
                dconv.row(oc) = Eigen::Map<const Eigen::VectorXd>(
                    dplanar.data() + static_cast<std::size_t>(oc) * h * w,
                    static_cast<Eigen::Index>(h) * w);
            dconv = dconv.cwiseProduct(lc.relu_mask);

            const Tensor& wt = params.tensors[2 * l].second;
            Tensor& gw = grads.tensors[2 * l].second;
            Tensor& gb = grads.tensors[2 * l + 1].second;
            MapConstRowMat wmat(wt.values.data(), out_c, lc.in_c * kKernel * kKernel);
            MapRowMat gwmat(gw.values.data(), out_c, lc.in_c * kKernel * kKernel);
            gwmat.noalias() += dconv * lc.cols.transpose();
            gb.values += dconv.rowwise().sum();
            if (l > 0) {
                Eigen::MatrixXd dcols = wmat.transpose() * dconv;
                dact = col2im(dcols, lc.in_c, h, w);
            }
        }
    }
    return grads;
}

FeatureVector l2_normalize(const Eigen::VectorXd& v) {
    const double norm = v.norm();
    if (!(norm > 1e-15) || !std::isfinite(norm))
        throw InputError("l2_normalize: degenerate (zero or non-finite) vector");
    return v / norm;
}

void ema_update(ModelPair& pair) {
    const double a = pair.ema_weight;
    for (std::size_t i = 0; i < pair.gallery.tensors.size(); ++i) {
        auto& g = pair.gallery.tensors[i].second.values;
        const auto& p = pair.probe.tensors[i].second.values;
        g = a * g + (1.0 - a) * p;
    }
}

void sgd_step(NetworkParams& params, const GradientSet& grads, double lr, double momentum,
              double weight_decay, GradientSet* velocity) {
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        auto& p = params.tensors[i].second.values;
        Eigen::VectorXd g = grads.tensors[i].second.values;
        if (weight_decay > 0.0) g += weight_decay * p;
        if (momentum > 0.0 && velocity) {
            auto& v = velocity->tensors[i].second.values;
            v = momentum * v + g;
            p -= lr * v;
        } else {
            p -= lr * g;
        }
    }
    if (!params.all_finite()) throw NumericError("sgd_step: non-finite parameter");
}

namespace {

constexpr char kMagic[8] = {'H', 'S', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
void write_f32(std::ostream& os, float v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
float read_f32(std::istream& is) {
    float v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_params(std::ostream& os, const NetworkParams& p, const std::string& prefix) {
    for (const auto& [name, t] : p.tensors) {
        const std::string full = prefix + "/" + name;
        write_u32(os, static_cast<std::uint32_t>(full.size()));
        os.write(full.data(), static_cast<std::streamsize>(full.size()));
        write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
        for (Eigen::Index i = 0; i < t.values.size(); ++i)
            write_f32(os, static_cast<float>(t.values[i]));
    }
}

void read_params(std::istream& is, NetworkParams& p, const std::string& prefix) {
    for (auto& [name, t] : p.tensors) {
        const std::uint32_t len = read_u32(is);
        std::string full(len, '\0');
        is.read(full.data(), len);
        if (full != prefix + "/" + name)
            throw InputError("checkpoint: unexpected tensor name " + full);
        const std::uint32_t ndim = read_u32(is);
        if (ndim != t.shape.size()) throw InputError("checkpoint: rank mismatch for " + full);
        for (int d : t.shape)
            if (read_u32(is) != static_cast<std::uint32_t>(d))
                throw InputError("checkpoint: shape mismatch for " + full);
        for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values[i] = read_f32(is);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelPair& pair) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    write_u32(os, kVersion);
    const ArchDescriptor& a = pair.probe.arch;
    write_u32(os, static_cast<std::uint32_t>(a.input_size));
    write_u32(os, static_cast<std::uint32_t>(a.input_channels));
    for (int c : a.conv_channels) write_u32(os, static_cast<std::uint32_t>(c));
    write_u32(os, static_cast<std::uint32_t>(a.embed_dim));
    write_f32(os, static_cast<float>(pair.ema_weight));
    const char inference_net = 0;  // probe serves inference
    os.put(inference_net);
    write_params(os, pair.probe, "probe");
    write_params(os, pair.gallery, "gallery");
    if (!os) throw InputError("checkpoint write failed: " + path);
}

ModelPair load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw InputError("not a checkpoint file: " + path);
    if (read_u32(is) != kVersion) throw InputError("unsupported checkpoint version");
    ArchDescriptor a;
    a.input_size = static_cast<int>(read_u32(is));
    a.input_channels = static_cast<int>(read_u32(is));
    for (int l = 0; l < 3; ++l) a.conv_channels[l] = static_cast<int>(read_u32(is));
    a.embed_dim = static_cast<int>(read_u32(is));
    a.validate();
    const double ema = read_f32(is);
    is.get();  // inference-net flag, always probe

    ModelPair pair = init_pair(0, a, ema);
    read_params(is, pair.probe, "probe");
    read_params(is, pair.gallery, "gallery");
    if (!is) throw InputError("truncated checkpoint: " + path);
    return pair;
}

}  // namespace hsst::model
