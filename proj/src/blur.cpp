#include "cobench/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace cobench {

namespace {

Kernel normalized(int size, std::vector<double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= total;
    return Kernel{size, std::move(weights)};
}

// Crops a square kernel to the smallest centred odd window holding every
// non-zero weight.
Kernel trim(const Kernel& k) {
    int r_needed = 0;
    for (int dy = -k.radius(); dy <= k.radius(); ++dy)
        for (int dx = -k.radius(); dx <= k.radius(); ++dx)
            if (k.at(dy, dx) != 0.0) r_needed = std::max({r_needed, std::abs(dy), std::abs(dx)});
    if (r_needed == k.radius()) return k;
    const int size = 2 * r_needed + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    for (int dy = -r_needed; dy <= r_needed; ++dy)
        for (int dx = -r_needed; dx <= r_needed; ++dx)
            w[static_cast<std::size_t>(dy + r_needed) * size + dx + r_needed] = k.at(dy, dx);
    return Kernel{size, std::move(w)};
}

void check_fits(const Image& image, const Kernel& k, const char* what) {
    if (k.size > image.min_side())
        throw ValidationError(std::string(what) + ": kernel size " + std::to_string(k.size) +
                              " exceeds image side " + std::to_string(image.min_side()));
}

} // namespace

Kernel disk_kernel(double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw ValidationError("defocus_blur: radius must be >= 0");
    const int r = static_cast<int>(std::floor(radius));
    const int size = 2 * r + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
    const double r2 = radius * radius;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= r2) w[static_cast<std::size_t>(dy + r) * size + dx + r] = 1.0;
    return normalized(size, std::move(w));
}

Kernel line_kernel(double length, double angle_degrees) {
    if (!(length >= 1.0) || !std::isfinite(length)) throw ValidationError("motion_blur: length must be >= 1");
    // Midpoint samples along a segment of `length` pixels, splatted to the
    // nearest pixel: a horizontal line of integer length L covers L pixels.
    const int n = static_cast<int>(std::ceil(4.0 * length));
    const int r = static_cast<int>(std::ceil(length / 2.0)) + 1;
    const int size = 2 * r + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
    const double theta = angle_degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    for (int k = 0; k < n; ++k) {
        const double t = -length / 2.0 + (k + 0.5) * length / n;
        const int ix = static_cast<int>(std::lround(t * cs));
        const int iy = static_cast<int>(std::lround(-t * sn));
        w[static_cast<std::size_t>(iy + r) * size + (ix + r)] += 1.0;
    }
    return trim(normalized(size, std::move(w)));
}

Kernel gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) return Kernel{};
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    const int size = 2 * r + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            w[static_cast<std::size_t>(dy + r) * size + dx + r] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    return normalized(size, std::move(w));
}

Image convolve(const Image& image, const Kernel& kernel) {
    const int H = image.height(), W = image.width(), C = image.channels(), R = kernel.radius();
    Image out(H, W, C);
    std::vector<double> acc(static_cast<std::size_t>(C));
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int dy = -R; dy <= R; ++dy) {
                const int sy = std::clamp(y + dy, 0, H - 1);
                for (int dx = -R; dx <= R; ++dx) {
                    const double w = kernel.at(dy, dx);
                    if (w == 0.0) continue;
                    const int sx = std::clamp(x + dx, 0, W - 1);
                    for (int c = 0; c < C; ++c) acc[c] += w * image.at(sy, sx, c);
                }
            }
            for (int c = 0; c < C; ++c) out.at(y, x, c) = static_cast<float>(acc[c]);
        }
    }
    return clamp01(std::move(out));
}

double sample_bilinear(const Image& image, double y, double x, int c) {
    const int H = image.height(), W = image.width();
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
    const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double wy = y - y0, wx = x - x0;
    const double top = (1.0 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
    const double bottom = (1.0 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
    return (1.0 - wy) * top + wy * bottom;
}

Image defocus_blur(const Image& image, double radius) {
    const Kernel k = disk_kernel(radius);
    check_fits(image, k, "defocus_blur");
    return convolve(image, k);
}

Image motion_blur(const Image& image, double length, double angle_degrees) {
    if (!std::isfinite(angle_degrees)) throw ValidationError("motion_blur: angle must be finite");
    const Kernel k = line_kernel(length, angle_degrees);
    check_fits(image, k, "motion_blur");
    return convolve(image, k);
}

Image zoom_blur(const Image& image, double z_max, int steps) {
    if (!(z_max >= 1.0) || !std::isfinite(z_max)) throw ValidationError("zoom_blur: z_max must be >= 1");
    if (steps < 1) throw ValidationError("zoom_blur: steps must be >= 1");
    const int H = image.height(), W = image.width(), C = image.channels();
    const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
    std::vector<double> acc(image.size(), 0.0);
    for (int s = 0; s < steps; ++s) {
        const double z = steps == 1 ? 1.0 : 1.0 + (z_max - 1.0) * s / (steps - 1);
        for (int y = 0; y < H; ++y) {
            const double sy = cy + (y - cy) / z;
            for (int x = 0; x < W; ++x) {
                const double sx = cx + (x - cx) / z;
                for (int c = 0; c < C; ++c) acc[image.index(y, x, c)] += sample_bilinear(image, sy, sx, c);
            }
        }
    }
    Image out(H, W, C);
    for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<float>(acc[i] / steps);
    return clamp01(std::move(out));
}

Image glass_blur(const Image& image, int d, int iterations, SeededRng& rng) {
    if (d < 0) throw ValidationError("glass_blur: d must be >= 0");
    if (iterations < 0) throw ValidationError("glass_blur: iterations must be >= 0");
    const int H = image.height(), W = image.width(), C = image.channels();
    Image out = image;
    for (int it = 0; it < iterations; ++it) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const int ty = std::clamp(y + static_cast<int>(rng.uniform_int(-d, d)), 0, H - 1);
                const int tx = std::clamp(x + static_cast<int>(rng.uniform_int(-d, d)), 0, W - 1);
                for (int c = 0; c < C; ++c) std::swap(out.at(y, x, c), out.at(ty, tx, c));
            }
        }
    }
    return clamp01(std::move(out));
}

} // namespace cobench
