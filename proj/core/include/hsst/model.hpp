#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsst/common.hpp"
#include "hsst/image.hpp"

namespace hsst::model {

// Embeddings carry a unit-norm contract (within 1e-6) once they leave
// forward() or l2_normalize().
using FeatureVector = Eigen::VectorXd;

// Three conv blocks (3x3 conv, ReLU, 2x2 average pool) followed by a fully
// connected projection to the embedding dimension. Input is square RGB;
// each pool halves the spatial size, so input_size must be divisible by 8.
struct ArchDescriptor {
    int input_size = 48;
    int input_channels = 3;
    std::array<int, 3> conv_channels = {8, 16, 32};
    int embed_dim = 64;

    bool operator==(const ArchDescriptor&) const = default;

    void validate() const;
    int spatial_after_pools() const { return input_size / 8; }
    int fc_input_dim() const {
        return conv_channels[2] * spatial_after_pools() * spatial_after_pools();
    }
};

struct Tensor {
    std::vector<int> shape;
    Eigen::VectorXd values;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// One network's parameters: ordered, named tensors. Two NetworkParams built
// from equal descriptors always have pairwise identical tensor shapes.
struct NetworkParams {
    ArchDescriptor arch;
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;
    bool all_finite() const;
};

// Same tensor layout as NetworkParams; used for gradients and optimizer state.
using GradientSet = NetworkParams;

struct ModelPair {
    NetworkParams probe;
    NetworkParams gallery;
    double ema_weight = 0.999;
};

// Per-image intermediate activations kept for backpropagation.
struct LayerCache {
    Eigen::MatrixXd cols;        // im2col of the conv input
    Eigen::MatrixXd relu_mask;   // 1 where pre-activation > 0
    int in_h = 0, in_w = 0;
    int in_c = 0;
};

struct ImageCache {
    std::array<LayerCache, 3> layers;
    Eigen::VectorXd fc_input;
    Eigen::VectorXd embedding_raw;  // pre-normalization fc output
};

struct ForwardCache {
    std::vector<ImageCache> images;
};

NetworkParams init_params(std::uint64_t seed, const ArchDescriptor& arch);

// Gallery starts as an exact copy of probe. Deterministic per seed.
ModelPair init_pair(std::uint64_t seed, const ArchDescriptor& arch,
                    double ema_weight = 0.999);

GradientSet zeros_like(const NetworkParams& params);

// Pure function of (params, images); outputs are L2-normalized.
std::vector<FeatureVector> forward(const NetworkParams& params,
                                   std::span<const Image> images);

std::vector<FeatureVector> forward(const NetworkParams& params,
                                   std::span<const Image> images,
                                   ForwardCache& cache);

// Gradient of sum_i <dfeat[i], normalized_embedding_i> w.r.t. params.
GradientSet backward(const NetworkParams& params, const ForwardCache& cache,
                     std::span<const Eigen::VectorXd> dfeat);

// v / ||v||; throws InputError on a (near-)zero vector instead of emitting NaN.
FeatureVector l2_normalize(const Eigen::VectorXd& v);

// gallery <- alpha * gallery + (1 - alpha) * probe, elementwise; probe untouched.
void ema_update(ModelPair& pair);

void sgd_step(NetworkParams& params, const GradientSet& grads, double lr,
              double momentum = 0.0, double weight_decay = 0.0,
              GradientSet* velocity = nullptr);

// Checkpoint container: magic "HSSTCKPT", version, architecture descriptor,
// ema weight, inference-net flag (always probe), then named little-endian
// float32 tensors for both sub-nets.
void save_checkpoint(const std::string& path, const ModelPair& pair);
ModelPair load_checkpoint(const std::string& path);

}  // namespace hsst::model
