#include "hsst/masksynth.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

namespace hsst::masksynth {

namespace {

std::size_t plane_size(const Image& img) {
    return static_cast<std::size_t>(img.height) * img.width;
}

double round_half_away(double v) { return std::round(v); }

}  // namespace

void UVAssets::validate(int out_h, int out_w) const {
    if (texture.channels != 3) throw ValidationError("UVAssets: texture must have 3 channels");
    if (position.height != texture.height || position.width != texture.width ||
        position.channels != 3)
        throw ValidationError("UVAssets: position map dims must match texture");
    if (validity.size() != plane_size(texture))
        throw ValidationError("UVAssets: validity raster size mismatch");
    for (int y = 0; y < position.height; ++y)
        for (int x = 0; x < position.width; ++x) {
            if (!validity[static_cast<std::size_t>(y) * position.width + x]) continue;
            const double px = position.at(y, x, 0);
            const double py = position.at(y, x, 1);
            if (px < 0.0 || px >= out_w || py < 0.0 || py >= out_h)
                throw ValidationError("UVAssets: valid texel maps outside the output raster");
        }
}

void MaskTemplate::validate() const {
    if (texture.channels != 3) throw ValidationError("MaskTemplate: texture must be RGB");
    if (region.size() != plane_size(texture))
        throw ValidationError("MaskTemplate: region raster size mismatch");
    for (int y = 0; y < texture.height; ++y)
        for (int x = 0; x < texture.width; ++x) {
            if (region[static_cast<std::size_t>(y) * texture.width + x]) continue;
            for (int c = 0; c < 3; ++c)
                if (texture.at(y, x, c) != 0.0)
                    throw ValidationError("MaskTemplate: texture support leaks outside region");
        }
}

Image composite(const Image& texture, const MaskTemplate& tpl) {
    if (!texture.same_dims(tpl.texture))
        throw InputError("composite: texture and template dims differ");
    tpl.validate();
    Image out = texture;
    for (int y = 0; y < texture.height; ++y)
        for (int x = 0; x < texture.width; ++x)
            if (tpl.region[static_cast<std::size_t>(y) * texture.width + x])
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = tpl.texture.at(y, x, c);
    return out;
}

Image render(const Image& texture, const Image& position,
             const std::vector<std::uint8_t>& validity, int out_h, int out_w,
             std::array<double, 3> background) {
    if (position.height != texture.height || position.width != texture.width)
        throw InputError("render: texture/position dims differ");
    if (validity.size() != plane_size(texture))
        throw InputError("render: validity raster size mismatch");

    Image out(out_h, out_w, 3);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = background[c];

    std::vector<double> zbuf(static_cast<std::size_t>(out_h) * out_w,
                             -std::numeric_limits<double>::infinity());
    for (int u = 0; u < texture.height; ++u)
        for (int v = 0; v < texture.width; ++v) {
            if (!validity[static_cast<std::size_t>(u) * texture.width + v]) continue;
            const double px = position.at(u, v, 0);
            const double py = position.at(u, v, 1);
            const double z = position.at(u, v, 2);
            const int xi = static_cast<int>(round_half_away(px));
            const int yi = static_cast<int>(round_half_away(py));
            if (xi < 0 || xi >= out_w || yi < 0 || yi >= out_h)
                throw ValidationError("render: valid texel outside output raster");
            double& zb = zbuf[static_cast<std::size_t>(yi) * out_w + xi];
            if (z > zb) {
                zb = z;
                for (int c = 0; c < 3; ++c) out.at(yi, xi, c) = texture.at(u, v, c);
            }
        }
    return out;
}

Image synthesize_masked(const UVAssets& assets, const MaskTemplate& tpl, int out_h,
                        int out_w, std::array<double, 3> background) {
    assets.validate(out_h, out_w);
    const Image masked = composite(assets.texture, tpl);
    return render(masked, assets.position, assets.validity, out_h, out_w, background);
}

Image identity_position_map(int h, int w) {
    Image p(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            p.at(y, x, 0) = x;
            p.at(y, x, 1) = y;
            p.at(y, x, 2) = 0.0;
        }
    return p;
}

std::vector<std::uint8_t> full_validity(int h, int w) {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 1);
}

namespace {

MaskTemplate lower_face_template(int h, int w, double coverage, double curve,
                                 std::array<double, 3> color) {
    MaskTemplate tpl;
    tpl.texture = Image(h, w, 3);
    tpl.region.assign(static_cast<std::size_t>(h) * w, 0);
    const double base_top = (1.0 - coverage) * h;
    for (int x = 0; x < w; ++x) {
        // Curved upper edge, higher at the center of the face.
        const double t = w > 1 ? static_cast<double>(x) / (w - 1) : 0.5;
        const double top = base_top - curve * h * std::sin(std::numbers::pi * t);
        for (int y = 0; y < h; ++y) {
            if (y < top) continue;
            tpl.region[static_cast<std::size_t>(y) * w + x] = 1;
            // Faint horizontal pleats.
            const double shade = 1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * y / 7.0);
            for (int c = 0; c < 3; ++c)
                tpl.texture.at(y, x, c) = std::min(1.0, color[c] * shade);
        }
    }
    return tpl;
}

}  // namespace

MaskTemplate make_template(const std::string& name, int h, int w) {
    if (name == "surgical_small")
        return lower_face_template(h, w, 0.32, 0.05, {0.63, 0.72, 0.83});
    if (name == "surgical_medium")
        return lower_face_template(h, w, 0.42, 0.06, {0.55, 0.66, 0.79});
    if (name == "surgical_large")
        return lower_face_template(h, w, 0.52, 0.07, {0.86, 0.87, 0.89});
    throw ConfigError("unknown mask template: " + name);
}

std::vector<std::string> template_names() {
    return {"surgical_small", "surgical_medium", "surgical_large"};
}

namespace {

constexpr char kUvaMagic[8] = {'H', 'S', 'S', 'T', 'U', 'V', 'A', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace

void save_uva(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open UVA file for writing: " + path);
    os.write(kUvaMagic, 8);
    write_u32(os, static_cast<std::uint32_t>(img.height));
    write_u32(os, static_cast<std::uint32_t>(img.width));
    write_u32(os, static_cast<std::uint32_t>(img.channels));
    for (double v : img.data) {
        const float f = static_cast<float>(v);
        os.write(reinterpret_cast<const char*>(&f), 4);
    }
    if (!os) throw InputError("UVA write failed: " + path);
}

Image load_uva(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open UVA file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kUvaMagic, 8) != 0)
        throw InputError("not a UVA file: " + path);
    const int h = static_cast<int>(read_u32(is));
    const int w = static_cast<int>(read_u32(is));
    const int c = static_cast<int>(read_u32(is));
    if (h <= 0 || w <= 0 || c <= 0) throw InputError("UVA file has invalid dims: " + path);
    Image img(h, w, c);
    for (double& v : img.data) {
        float f;
        is.read(reinterpret_cast<char*>(&f), 4);
        v = f;
    }
    if (!is) throw InputError("truncated UVA file: " + path);
    return img;
}

Image pack_position(const Image& position, const std::vector<std::uint8_t>& validity) {
    Image packed(position.height, position.width, 4);
    for (int y = 0; y < position.height; ++y)
        for (int x = 0; x < position.width; ++x) {
            for (int c = 0; c < 3; ++c) packed.at(y, x, c) = position.at(y, x, c);
            packed.at(y, x, 3) =
                validity[static_cast<std::size_t>(y) * position.width + x] ? 1.0 : 0.0;
        }
    return packed;
}

void unpack_position(const Image& packed, Image& position, std::vector<std::uint8_t>& validity) {
    if (packed.channels != 4) throw InputError("position UVA must have 4 channels (x,y,z,valid)");
    position = Image(packed.height, packed.width, 3);
    validity.assign(static_cast<std::size_t>(packed.height) * packed.width, 0);
    for (int y = 0; y < packed.height; ++y)
        for (int x = 0; x < packed.width; ++x) {
            for (int c = 0; c < 3; ++c) position.at(y, x, c) = packed.at(y, x, c);
            validity[static_cast<std::size_t>(y) * packed.width + x] =
                packed.at(y, x, 3) > 0.5 ? 1 : 0;
        }
}

Image pack_template(const MaskTemplate& tpl) {
    Image packed(tpl.texture.height, tpl.texture.width, 4);
    for (int y = 0; y < packed.height; ++y)
        for (int x = 0; x < packed.width; ++x) {
            for (int c = 0; c < 3; ++c) packed.at(y, x, c) = tpl.texture.at(y, x, c);
            packed.at(y, x, 3) =
                tpl.region[static_cast<std::size_t>(y) * packed.width + x] ? 1.0 : 0.0;
        }
    return packed;
}

MaskTemplate unpack_template(const Image& packed) {
    if (packed.channels != 4) throw InputError("template UVA must have 4 channels (r,g,b,region)");
    MaskTemplate tpl;
    tpl.texture = Image(packed.height, packed.width, 3);
    tpl.region.assign(static_cast<std::size_t>(packed.height) * packed.width, 0);
    for (int y = 0; y < packed.height; ++y)
        for (int x = 0; x < packed.width; ++x) {
            for (int c = 0; c < 3; ++c) tpl.texture.at(y, x, c) = packed.at(y, x, c);
            tpl.region[static_cast<std::size_t>(y) * packed.width + x] =
                packed.at(y, x, 3) > 0.5 ? 1 : 0;
        }
    tpl.validate();
    return tpl;
}

}  // namespace hsst::masksynth
