#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hsst/image.hpp"

namespace hsst::masksynth {

// UV-space description of one face: color texture, position map carrying
// (x, y, z) per UV texel (x/y in output-image pixels, larger z is nearer),
// and a binary validity raster marking texels that lie on the face.
struct UVAssets {
    Image texture;                    // Hu x Wu x 3 in [0,1]
    Image position;                   // Hu x Wu x 3
    std::vector<std::uint8_t> validity;  // Hu x Wu

    void validate(int out_h, int out_w) const;
};

// Mask texture with binary support; texture is zero wherever region is zero.
struct MaskTemplate {
    Image texture;                      // Hu x Wu x 3
    std::vector<std::uint8_t> region;   // Hu x Wu

    void validate() const;
};

// T_out[p] = template.texture[p] where region[p] = 1, else T_in[p].
Image composite(const Image& texture, const MaskTemplate& tpl);

// Splat every valid UV texel to round(x), round(y) with a z-buffer
// (round-half-away-from-zero; strictly larger z wins, first writer keeps ties).
Image render(const Image& texture, const Image& position,
             const std::vector<std::uint8_t>& validity, int out_h, int out_w,
             std::array<double, 3> background = {0.0, 0.0, 0.0});

Image synthesize_masked(const UVAssets& assets, const MaskTemplate& tpl, int out_h,
                        int out_w, std::array<double, 3> background = {0.0, 0.0, 0.0});

// P[u,v] = (v, u, 0), all texels valid: render becomes the identity on textures.
Image identity_position_map(int h, int w);
std::vector<std::uint8_t> full_validity(int h, int w);

// Procedural lower-face templates: "surgical_small", "surgical_medium",
// "surgical_large" (increasing coverage).
MaskTemplate make_template(const std::string& name, int h, int w);
std::vector<std::string> template_names();

// "UVA" raster container: magic "HSSTUVA1", little-endian u32 height, width,
// channels, then float32 row-major interleaved data. Position maps are stored
// as 4 channels (x, y, z, validity); templates as 4 channels (r, g, b, region).
void save_uva(const std::string& path, const Image& img);
Image load_uva(const std::string& path);

Image pack_position(const Image& position, const std::vector<std::uint8_t>& validity);
void unpack_position(const Image& packed, Image& position, std::vector<std::uint8_t>& validity);
Image pack_template(const MaskTemplate& tpl);
MaskTemplate unpack_template(const Image& packed);

}  // namespace hsst::masksynth
