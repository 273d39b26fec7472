#pragma once

#include <cstddef>
#include <vector>

#include "hsst/common.hpp"

namespace hsst {

// Dense H x W x C raster, row-major, channels interleaved, values in [0, 1]
// for color data (position maps reuse the container with unconstrained values).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_dims(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

}  // namespace hsst
