#include "safeaug/transforms/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

namespace safeaug {

namespace {

constexpr double kPi = 3.14159265358979323846;

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

int uniform_index(double u, int lo, int hi) {
    // u in [0,1) -> integer in [lo, hi] inclusive.
    const int span = hi - lo + 1;
    int k = lo + static_cast<int>(u * span);
    return std::min(k, hi);
}

float luminance(const Image& img, int y, int x) {
    if (img.channels() == 1) return img.at(y, x, 0);
    return 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
}

Image flip_horizontal(const Image& in) {
    Image out(in.height(), in.width(), in.channels());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x)
            for (int c = 0; c < in.channels(); ++c)
                out.at(y, x, c) = in.at(y, in.width() - 1 - x, c);
    return out;
}

Image flip_vertical(const Image& in) {
    Image out(in.height(), in.width(), in.channels());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x)
            for (int c = 0; c < in.channels(); ++c)
                out.at(y, x, c) = in.at(in.height() - 1 - y, x, c);
    return out;
}

Image transpose(const Image& in) {
    Image out(in.width(), in.height(), in.channels());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x)
            for (int c = 0; c < in.channels(); ++c)
                out.at(x, y, c) = in.at(y, x, c);
    return out;
}

// One counter-clockwise quarter turn: out(y, x) = in(x, H_out - 1 - y) with
// out shape (W, H).
Image rotate90_once(const Image& in) {
    Image out(in.width(), in.height(), in.channels());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < in.channels(); ++c)
                out.at(y, x, c) = in.at(x, in.width() - 1 - y, c);
    return out;
}

Image rotate90(const Image& in, int quarter_turns) {
    Image out = in;
    for (int i = 0; i < (quarter_turns % 4 + 4) % 4; ++i) out = rotate90_once(out);
    return out;
}

Image to_gray(const Image& in) {
    Image out(in.height(), in.width(), in.channels());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) {
            const float l = luminance(in, y, x);
            for (int c = 0; c < in.channels(); ++c) out.at(y, x, c) = l;
        }
    return out;
}

float sample_bilinear_reflect(const Image& in, double sy, double sx, int c) {
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const double fy = sy - y0;
    const double fx = sx - x0;
    const int y0r = reflect101(y0, in.height());
    const int y1r = reflect101(y0 + 1, in.height());
    const int x0r = reflect101(x0, in.width());
    const int x1r = reflect101(x0 + 1, in.width());
    const double v00 = in.at(y0r, x0r, c);
    const double v01 = in.at(y0r, x1r, c);
    const double v10 = in.at(y1r, x0r, c);
    const double v11 = in.at(y1r, x1r, c);
    const double top = v00 * (1.0 - fx) + v01 * fx;
    const double bot = v10 * (1.0 - fx) + v11 * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

Image shift_scale_rotate(const Image& in, double angle_deg, double scale, double dx_frac, double dy_frac,
                         bool nearest_mask = false) {
    const int h = in.height();
    const int w = in.width();
    Image out(h, w, in.channels());
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double theta = angle_deg * kPi / 180.0;
    const double a = scale * std::cos(theta);
    const double b = scale * std::sin(theta);
    const double det = scale * scale;
    const double tx = dx_frac * w;
    const double ty = dy_frac * h;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Invert the forward map (rotate+scale about centre, then shift).
            const double u = x - cx - tx;
            const double v = y - cy - ty;
            const double sx = cx + (a * u - b * v) / det;
            const double sy = cy + (b * u + a * v) / det;
            if (nearest_mask) {
                const int iy = static_cast<int>(std::lround(sy));
                const int ix = static_cast<int>(std::lround(sx));
                // Labels pulled from outside the source become ignore.
                out.at(y, x, 0) = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? in.at(iy, ix, 0) : 255.0f;
            } else {
                for (int c = 0; c < in.channels(); ++c) out.at(y, x, c) = sample_bilinear_reflect(in, sy, sx, c);
            }
        }
    }
    return out;
}

Image crop(const Image& in, int top, int left, int crop_h, int crop_w) {
    Image out(crop_h, crop_w, in.channels());
    for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x)
            for (int c = 0; c < in.channels(); ++c)
                out.at(y, x, c) = in.at(top + y, left + x, c);
    return out;
}

void require_crop_fits(const Image& image, int crop_h, int crop_w, const std::string& name) {
    if (crop_h < 1 || crop_w < 1 || crop_h > image.height() || crop_w > image.width()) {
        throw std::invalid_argument(name + ": crop " + std::to_string(crop_h) + "x" + std::to_string(crop_w) +
                                    " does not fit image " + std::to_string(image.height()) + "x" +
                                    std::to_string(image.width()));
    }
}

Image random_contrast(const Image& in, double alpha) {
    double mean = 0.0;
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) mean += luminance(in, y, x);
    mean /= static_cast<double>(in.height()) * in.width();
    Image out(in.height(), in.width(), in.channels());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out.data()[i] = static_cast<float>(std::clamp(alpha * in.data()[i] + (1.0 - alpha) * mean, 0.0, 1.0));
    }
    return out;
}

Image random_brightness(const Image& in, double factor) {
    Image out(in.height(), in.width(), in.channels());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out.data()[i] = static_cast<float>(std::clamp(factor * in.data()[i], 0.0, 1.0));
    }
    return out;
}

Image random_gamma(const Image& in, double gamma) {
    Image out(in.height(), in.width(), in.channels());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const float v = std::max(0.0f, in.data()[i]);
        out.data()[i] = static_cast<float>(std::pow(v, gamma));
    }
    return out;
}

Image box_blur(const Image& in, int ksize) {
    const int r = ksize / 2;
    Image out(in.height(), in.width(), in.channels());
    const double norm = 1.0 / (static_cast<double>(ksize) * ksize);
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            for (int c = 0; c < in.channels(); ++c) {
                double acc = 0.0;
                for (int ky = -r; ky <= r; ++ky) {
                    const int yy = reflect101(y + ky, in.height());
                    for (int kx = -r; kx <= r; ++kx) {
                        acc += in.at(yy, reflect101(x + kx, in.width()), c);
                    }
                }
                out.at(y, x, c) = static_cast<float>(acc * norm);
            }
        }
    }
    return out;
}

Image gauss_noise(const Image& in, double sigma_unit, std::uint64_t noise_seed) {
    Rng noise(noise_seed);
    Image out(in.height(), in.width(), in.channels());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in.data()[i] + noise.normal(0.0, sigma_unit);
        out.data()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

// Contrast-limited adaptive histogram equalisation on the 8-bit scale.
// 3-channel images are equalised on luminance and rescaled channel-wise.
Image clahe(const Image& in, double clip_limit, int grid) {
    const int h = in.height();
    const int w = in.width();
    // Pad to a multiple of the grid with reflect-101 indexing.
    const int th = (h + grid - 1) / grid;
    const int tw = (w + grid - 1) / grid;
    const int ph = th * grid;
    const int pw = tw * grid;

    std::vector<std::uint8_t> luma(static_cast<std::size_t>(ph) * pw);
    for (int y = 0; y < ph; ++y) {
        const int ys = reflect101(y, h);
        for (int x = 0; x < pw; ++x) {
            const int xs = reflect101(x, w);
            const float l = std::clamp(luminance(in, ys, xs), 0.0f, 1.0f);
            luma[static_cast<std::size_t>(y) * pw + x] = static_cast<std::uint8_t>(std::lround(l * 255.0f));
        }
    }

    // Per-tile clipped-histogram LUTs.
    const int tile_area = th * tw;
    std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(grid) * grid);
    for (int ty = 0; ty < grid; ++ty) {
        for (int tx = 0; tx < grid; ++tx) {
            std::array<int, 256> hist{};
            for (int y = ty * th; y < (ty + 1) * th; ++y)
                for (int x = tx * tw; x < (tx + 1) * tw; ++x) hist[luma[static_cast<std::size_t>(y) * pw + x]]++;
            const int limit = std::max(1, static_cast<int>(clip_limit * tile_area / 256.0));
            int excess = 0;
            for (int i = 0; i < 256; ++i) {
                if (hist[i] > limit) {
                    excess += hist[i] - limit;
                    hist[i] = limit;
                }
            }
            const int bonus = excess / 256;
            int residual = excess % 256;
            for (int i = 0; i < 256; ++i) hist[i] += bonus;
            for (int i = 0; residual > 0; ++i, --residual) hist[i] += 1;
            int cum = 0;
            auto& lut = luts[static_cast<std::size_t>(ty) * grid + tx];
            const double scale = 255.0 / tile_area;
            for (int i = 0; i < 256; ++i) {
                cum += hist[i];
                lut[i] = static_cast<std::uint8_t>(std::clamp(std::lround(cum * scale), 0L, 255L));
            }
        }
    }

    // Bilinear interpolation between neighbouring tile mappings.
    Image out(h, w, in.channels());
    for (int y = 0; y < h; ++y) {
        const double gy = (y + 0.5) / th - 0.5;
        int ty0 = static_cast<int>(std::floor(gy));
        const double fy = gy - ty0;
        const int ty1 = std::clamp(ty0 + 1, 0, grid - 1);
        ty0 = std::clamp(ty0, 0, grid - 1);
        for (int x = 0; x < w; ++x) {
            const double gx = (x + 0.5) / tw - 0.5;
            int tx0 = static_cast<int>(std::floor(gx));
            const double fx = gx - tx0;
            const int tx1 = std::clamp(tx0 + 1, 0, grid - 1);
            tx0 = std::clamp(tx0, 0, grid - 1);
            const int v = luma[static_cast<std::size_t>(y) * pw + x];
            const double m00 = luts[static_cast<std::size_t>(ty0) * grid + tx0][v];
            const double m01 = luts[static_cast<std::size_t>(ty0) * grid + tx1][v];
            const double m10 = luts[static_cast<std::size_t>(ty1) * grid + tx0][v];
            const double m11 = luts[static_cast<std::size_t>(ty1) * grid + tx1][v];
            const double mapped = (m00 * (1 - fx) + m01 * fx) * (1 - fy) + (m10 * (1 - fx) + m11 * fx) * fy;
            const double l_new = mapped / 255.0;
            const double l_old = v / 255.0;
            if (in.channels() == 1) {
                out.at(y, x, 0) = static_cast<float>(l_new);
            } else {
                const double ratio = (l_new + 1e-4) / (l_old + 1e-4);
                for (int c = 0; c < 3; ++c) {
                    out.at(y, x, c) = static_cast<float>(std::clamp(in.at(y, x, c) * ratio, 0.0, 1.0));
                }
            }
        }
    }
    return out;
}

}  // namespace

Image resize_bilinear(const Image& image, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) {
        throw std::invalid_argument("resize_bilinear: non-positive target size");
    }
    if (out_height == image.height() && out_width == image.width()) return image;
    Image out(out_height, out_width, image.channels());
    const double sy = static_cast<double>(image.height()) / out_height;
    const double sx = static_cast<double>(image.width()) / out_width;
    for (int y = 0; y < out_height; ++y) {
        double src_y = (y + 0.5) * sy - 0.5;
        src_y = std::clamp(src_y, 0.0, static_cast<double>(image.height() - 1));
        const int y0 = static_cast<int>(src_y);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double fy = src_y - y0;
        for (int x = 0; x < out_width; ++x) {
            double src_x = (x + 0.5) * sx - 0.5;
            src_x = std::clamp(src_x, 0.0, static_cast<double>(image.width() - 1));
            const int x0 = static_cast<int>(src_x);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double fx = src_x - x0;
            for (int c = 0; c < image.channels(); ++c) {
                const double top = image.at(y0, x0, c) * (1 - fx) + image.at(y0, x1, c) * fx;
                const double bot = image.at(y1, x0, c) * (1 - fx) + image.at(y1, x1, c) * fx;
                out.at(y, x, c) = static_cast<float>(top * (1 - fy) + bot * fy);
            }
        }
    }
    return out;
}

Image resize_nearest(const Image& image, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) {
        throw std::invalid_argument("resize_nearest: non-positive target size");
    }
    if (out_height == image.height() && out_width == image.width()) return image;
    Image out(out_height, out_width, image.channels());
    const double sy = static_cast<double>(image.height()) / out_height;
    const double sx = static_cast<double>(image.width()) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const int src_y = std::min(static_cast<int>(y * sy), image.height() - 1);
        for (int x = 0; x < out_width; ++x) {
            const int src_x = std::min(static_cast<int>(x * sx), image.width() - 1);
            for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(src_y, src_x, c);
        }
    }
    return out;
}

Image apply_transform_to_mask(const Image& mask, const AugmentationSpec& spec, const TransformDraw& draw) {
    if (mask.channels() != 1) throw std::invalid_argument("apply_transform_to_mask: mask must be 1-channel");
    const std::string& name = spec.name;
    if (!is_geometric(name)) return mask;

    if (name == "HorizontalFlip") return flip_horizontal(mask);
    if (name == "VerticalFlip") return flip_vertical(mask);
    if (name == "RandomRotate90") return rotate90(mask, uniform_index(draw.u0, 0, 3));
    if (name == "Transpose") return transpose(mask);

    if (name == "ShiftScaleRotate") {
        const double rot = spec.param_or("rotate_limit", 45.0);
        const double sc = spec.param_or("scale_limit", 0.1);
        const double sh = spec.param_or("shift_limit", 0.0625);
        const double angle = -rot + draw.u0 * 2.0 * rot;
        const double scale = 1.0 - sc + draw.u1 * 2.0 * sc;
        const double dx = -sh + draw.u2 * 2.0 * sh;
        const double dy = -sh + draw.u3 * 2.0 * sh;
        return shift_scale_rotate(mask, angle, scale, dx, dy, /*nearest_mask=*/true);
    }

    if (name == "RandomCrop" || name == "CenterCrop") {
        const int ch = static_cast<int>(spec.param("height"));
        const int cw = static_cast<int>(spec.param("width"));
        require_crop_fits(mask, ch, cw, name);
        const int top = name == "CenterCrop" ? (mask.height() - ch) / 2
                                             : uniform_index(draw.u0, 0, mask.height() - ch);
        const int left = name == "CenterCrop" ? (mask.width() - cw) / 2
                                              : uniform_index(draw.u1, 0, mask.width() - cw);
        return crop(mask, top, left, ch, cw);
    }

    if (name == "RandomSizedCrop") {
        const int out_h = static_cast<int>(spec.param("height"));
        const int out_w = static_cast<int>(spec.param("width"));
        int min_h = static_cast<int>(spec.param_or("min_height", out_h));
        int max_h = static_cast<int>(spec.param_or("max_height", mask.height()));
        min_h = std::min(min_h, mask.height());
        max_h = std::min(max_h, mask.height());
        if (min_h > max_h) std::swap(min_h, max_h);
        const int crop_h = uniform_index(draw.u0, min_h, max_h);
        const double w2h = static_cast<double>(out_w) / out_h;
        const int crop_w = std::min(std::max(1, static_cast<int>(std::lround(crop_h * w2h))), mask.width());
        require_crop_fits(mask, crop_h, crop_w, name);
        const int top = uniform_index(draw.u1, 0, mask.height() - crop_h);
        const int left = uniform_index(draw.u2, 0, mask.width() - crop_w);
        return resize_nearest(crop(mask, top, left, crop_h, crop_w), out_h, out_w);
    }

    throw std::invalid_argument("apply_transform_to_mask: unhandled transform '" + name + "'");
}

Image rotate_image(const Image& image, double angle_deg) {
    return shift_scale_rotate(image, angle_deg, 1.0, 0.0, 0.0);
}

Image rotate_mask(const Image& mask, double angle_deg) {
    if (mask.channels() != 1) throw std::invalid_argument("rotate_mask: mask must be 1-channel");
    return shift_scale_rotate(mask, angle_deg, 1.0, 0.0, 0.0, /*nearest_mask=*/true);
}

bool is_geometric(const std::string& name) {
    return name == "HorizontalFlip" || name == "VerticalFlip" || name == "RandomRotate90" ||
           name == "Transpose" || name == "ShiftScaleRotate" || name == "RandomCrop" ||
           name == "CenterCrop" || name == "RandomSizedCrop";
}

TransformDraw draw_transform_params(const AugmentationSpec& spec, Rng& rng) {
    (void)spec;
    // Every transform consumes the same number of draws, so the stream
    // position after a pipeline depends only on the subset length.
    TransformDraw d;
    d.u0 = rng.uniform();
    d.u1 = rng.uniform();
    d.u2 = rng.uniform();
    d.u3 = rng.uniform();
    d.noise_seed = rng.next_u64();
    return d;
}

Image apply_transform(const Image& image, const AugmentationSpec& spec, const TransformDraw& draw) {
    if (image.empty()) throw std::invalid_argument("apply_transform: empty image");
    const std::string& name = spec.name;

    if (name == "HorizontalFlip") return flip_horizontal(image);
    if (name == "VerticalFlip") return flip_vertical(image);
    if (name == "RandomRotate90") return rotate90(image, uniform_index(draw.u0, 0, 3));
    if (name == "Transpose") return transpose(image);
    if (name == "ToGray") return to_gray(image);

    if (name == "ShiftScaleRotate") {
        const double rot = spec.param_or("rotate_limit", 45.0);
        const double sc = spec.param_or("scale_limit", 0.1);
        const double sh = spec.param_or("shift_limit", 0.0625);
        const double angle = -rot + draw.u0 * 2.0 * rot;
        const double scale = 1.0 - sc + draw.u1 * 2.0 * sc;
        const double dx = -sh + draw.u2 * 2.0 * sh;
        const double dy = -sh + draw.u3 * 2.0 * sh;
        return shift_scale_rotate(image, angle, scale, dx, dy);
    }

    if (name == "RandomCrop") {
        const int ch = static_cast<int>(spec.param("height"));
        const int cw = static_cast<int>(spec.param("width"));
        require_crop_fits(image, ch, cw, name);
        const int top = uniform_index(draw.u0, 0, image.height() - ch);
        const int left = uniform_index(draw.u1, 0, image.width() - cw);
        return crop(image, top, left, ch, cw);
    }

    if (name == "CenterCrop") {
        const int ch = static_cast<int>(spec.param("height"));
        const int cw = static_cast<int>(spec.param("width"));
        require_crop_fits(image, ch, cw, name);
        return crop(image, (image.height() - ch) / 2, (image.width() - cw) / 2, ch, cw);
    }

    if (name == "RandomSizedCrop") {
        const int out_h = static_cast<int>(spec.param("height"));
        const int out_w = static_cast<int>(spec.param("width"));
        int min_h = static_cast<int>(spec.param_or("min_height", out_h));
        int max_h = static_cast<int>(spec.param_or("max_height", image.height()));
        min_h = std::min(min_h, image.height());
        max_h = std::min(max_h, image.height());
        if (min_h > max_h) std::swap(min_h, max_h);
        const int crop_h = uniform_index(draw.u0, min_h, max_h);
        const double w2h = static_cast<double>(out_w) / out_h;
        const int crop_w = std::min(std::max(1, static_cast<int>(std::lround(crop_h * w2h))), image.width());
        require_crop_fits(image, crop_h, crop_w, name);
        const int top = uniform_index(draw.u1, 0, image.height() - crop_h);
        const int left = uniform_index(draw.u2, 0, image.width() - crop_w);
        return resize_bilinear(crop(image, top, left, crop_h, crop_w), out_h, out_w);
    }

    if (name == "RandomContrast") {
        const double limit = spec.param_or("limit", 0.2);
        return random_contrast(image, 1.0 - limit + draw.u0 * 2.0 * limit);
    }

    if (name == "RandomBrightness") {
        const double limit = spec.param_or("limit", 0.2);
        return random_brightness(image, 1.0 - limit + draw.u0 * 2.0 * limit);
    }

    if (name == "RandomGamma") {
        const double lo = spec.param_or("gamma_lo", 0.8);
        const double hi = spec.param_or("gamma_hi", 1.2);
        return random_gamma(image, lo + draw.u0 * (hi - lo));
    }

    if (name == "CLAHE") {
        if (image.channels() != 1 && image.channels() != 3) {
            throw std::invalid_argument("CLAHE: requires 1 or 3 channels");
        }
        const double max_clip = spec.param_or("clip_limit", 4.0);
        const int grid = static_cast<int>(spec.param_or("tile_grid", 8.0));
        const double clip = 1.0 + draw.u0 * (max_clip - 1.0);
        return clahe(image, clip, grid);
    }

    if (name == "Blur") {
        const int kmin = static_cast<int>(spec.param_or("kernel_min", 3.0));
        const int kmax = static_cast<int>(spec.param_or("kernel_max", 7.0));
        // Odd kernels only so the anchor stays centred.
        const int steps = (kmax - kmin) / 2;
        const int ksize = kmin + 2 * uniform_index(draw.u0, 0, steps);
        return box_blur(image, ksize);
    }

    if (name == "GaussNoise") {
        const double vmin = spec.param_or("var_min", 10.0);
        const double vmax = spec.param_or("var_max", 50.0);
        const double var = vmin + draw.u0 * (vmax - vmin);
        return gauss_noise(image, std::sqrt(var) / 255.0, draw.noise_seed);
    }

    throw std::invalid_argument("apply_transform: unknown transform '" + name + "'");
}

Image apply_transform(const Image& image, const AugmentationSpec& spec, Rng& rng) {
    return apply_transform(image, spec, draw_transform_params(spec, rng));
}

Image apply_cutout(const Image& image, int size, Rng& rng, float fill) {
    if (size < 1) throw std::invalid_argument("apply_cutout: size must be positive");
    Image out = image;
    // The square is centred on a uniform pixel, then shifted to sit fully
    // inside the image whenever it fits; a size covering a whole dimension
    // fills that dimension completely.
    const int cy = static_cast<int>(rng.uniform_int(0, image.height() - 1));
    const int cx = static_cast<int>(rng.uniform_int(0, image.width() - 1));
    const int y0 = std::clamp(cy - size / 2, 0, std::max(0, image.height() - size));
    const int x0 = std::clamp(cx - size / 2, 0, std::max(0, image.width() - size));
    const int y1 = std::min(image.height(), y0 + size);
    const int x1 = std::min(image.width(), x0 + size);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = fill;
    return out;
}

Shape3 output_shape(const AugmentationSpec& spec, const Shape3& in) {
    const std::string& name = spec.name;
    if (name == "Transpose") return {in.width, in.height, in.channels};
    if (name == "RandomCrop" || name == "CenterCrop" || name == "RandomSizedCrop") {
        const int ch = static_cast<int>(spec.param("height"));
        const int cw = static_cast<int>(spec.param("width"));
        if ((name != "RandomSizedCrop") && (ch > in.height || cw > in.width)) {
            throw std::invalid_argument(name + ": crop target exceeds input shape");
        }
        return {ch, cw, in.channels};
    }
    if (name == "RandomRotate90") {
        // Quarter turns may swap H and W; shape is only static when H == W.
        if (in.height != in.width) {
            throw std::invalid_argument("RandomRotate90: output shape is draw-dependent for non-square input");
        }
        return in;
    }
    if (std::find(catalog_names().begin(), catalog_names().end(), name) == catalog_names().end()) {
        throw std::invalid_argument("output_shape: unknown transform '" + name + "'");
    }
    return in;
}

}  // namespace safeaug
