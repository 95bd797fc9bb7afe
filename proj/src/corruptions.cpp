#include "cobench/corruptions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace cobench {

namespace {

int as_int(const std::map<std::string, double>& p, const char* name) {
    return static_cast<int>(std::lround(p.at(name)));
}

double range_checked(double v, double lo, double hi, const char* what) {
    if (!(v >= lo && v <= hi))
        throw ValidationError(std::string(what) + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                              "], got " + std::to_string(v));
    return v;
}

void gaussian_smooth(std::vector<double>& field, int H, int W, double sigma) {
    if (!(sigma > 0.0)) return;
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double total = 0.0;
    for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : k) v /= total;
    std::vector<double> tmp(field.size());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * field[y * W + std::clamp(x + i, 0, W - 1)];
            tmp[y * W + x] = acc;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[std::clamp(y + i, 0, H - 1) * W + x];
            field[y * W + x] = acc;
        }
}

// IJG reference luminance quantisation table.
constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,  14, 13, 16, 24, 40,  57,
    69, 56, 14, 17, 22,  29,  51,  87,  80, 62, 18, 22, 37,  56,  68,  109, 103, 77, 24, 35, 55, 64,
    81, 104, 113, 92, 49, 64,  78,  87,  103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99,
};

const std::array<double, 64>& dct_basis() {
    static const std::array<double, 64> basis = [] {
        std::array<double, 64> b{};
        for (int u = 0; u < 8; ++u)
            for (int x = 0; x < 8; ++x) {
                const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                b[u * 8 + x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
            }
        return b;
    }();
    return basis;
}

} // namespace

Image gaussian_noise(const Image& image, double sigma, SeededRng& rng) {
    if (!(sigma >= 0.0)) throw ValidationError("gaussian_noise: sigma must be >= 0");
    Image out = image;
    for (float& v : out.data()) v = static_cast<float>(v + rng.normal(0.0, sigma));
    return clamp01(std::move(out));
}

Image shot_noise(const Image& image, double scale, SeededRng& rng) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("shot_noise: scale must be > 0");
    Image out = image;
    for (float& v : out.data()) v = static_cast<float>(static_cast<double>(rng.poisson(v * scale)) / scale);
    return clamp01(std::move(out));
}

Image impulse_noise(const Image& image, double p, SeededRng& rng) {
    range_checked(p, 0.0, 1.0, "impulse_noise: p");
    Image out = image;
    for (float& v : out.data()) {
        const double u = rng.next_double();
        if (u < p / 2.0)
            v = 0.0f;
        else if (u < p)
            v = 1.0f;
    }
    return clamp01(std::move(out));
}

Image brightness(const Image& image, double beta) {
    if (!std::isfinite(beta)) throw ValidationError("brightness: beta must be finite");
    Image out = image;
    for (float& v : out.data()) v = static_cast<float>(v + beta);
    return clamp01(std::move(out));
}

Image contrast(const Image& image, double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("contrast: alpha must be >= 0");
    if (alpha == 1.0) return clamp01(image);
    const int C = image.channels();
    std::vector<double> mean(static_cast<std::size_t>(C), 0.0);
    const auto data = image.data();
    for (std::size_t i = 0; i < data.size(); ++i) mean[i % C] += data[i];
    for (double& m : mean) m /= static_cast<double>(data.size() / C);
    Image out = image;
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = static_cast<float>(mean[i % C] + alpha * (od[i] - mean[i % C]));
    return clamp01(std::move(out));
}

std::vector<double> plasma_field(int height, int width, double roughness, SeededRng& rng) {
    int n = 2;
    while (n < std::max(height, width)) n *= 2;
    const int stride = n + 1;
    std::vector<double> g(static_cast<std::size_t>(stride) * stride, 0.0);
    auto at = [&](int y, int x) -> double& { return g[static_cast<std::size_t>(y) * stride + x]; };
    double scale = 1.0;
    at(0, 0) = rng.uniform(-scale, scale);
    at(0, n) = rng.uniform(-scale, scale);
    at(n, 0) = rng.uniform(-scale, scale);
    at(n, n) = rng.uniform(-scale, scale);
    for (int step = n; step > 1; step /= 2) {
        const int half = step / 2;
        scale *= roughness;
        // Diamond step: centre of every square.
        for (int y = half; y < n; y += step)
            for (int x = half; x < n; x += step)
                at(y, x) = (at(y - half, x - half) + at(y - half, x + half) + at(y + half, x - half) +
                            at(y + half, x + half)) / 4.0 +
                           rng.uniform(-scale, scale);
        // Square step: edge midpoints, averaging whichever neighbours exist.
        for (int y = 0; y <= n; y += half)
            for (int x = (y / half) % 2 == 0 ? half : 0; x <= n; x += step) {
                double sum = 0.0;
                int count = 0;
                if (y >= half) sum += at(y - half, x), ++count;
                if (y + half <= n) sum += at(y + half, x), ++count;
                if (x >= half) sum += at(y, x - half), ++count;
                if (x + half <= n) sum += at(y, x + half), ++count;
                at(y, x) = sum / count + rng.uniform(-scale, scale);
            }
    }
    std::vector<double> field(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) field[static_cast<std::size_t>(y) * width + x] = at(y, x);
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    const double min = *lo, span = *hi - *lo;
    for (double& v : field) v = span > 0.0 ? (v - min) / span : 0.5;
    return field;
}

Image fog(const Image& image, double t, double roughness, SeededRng& rng) {
    range_checked(t, 0.0, 1.0, "fog: t");
    range_checked(roughness, 0.0, 1.0, "fog: roughness");
    const auto haze = plasma_field(image.height(), image.width(), roughness, rng);
    Image out = image;
    const int C = image.channels();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = static_cast<float>((1.0 - t) * od[i] + t * haze[i / C]);
    return clamp01(std::move(out));
}

Image pixelate(const Image& image, int factor) {
    if (factor < 1) throw ValidationError("pixelate: factor must be an integer >= 1");
    const int H = image.height(), W = image.width(), C = image.channels();
    Image out(H, W, C);
    std::vector<double> acc(static_cast<std::size_t>(C));
    for (int by = 0; by < H; by += factor) {
        for (int bx = 0; bx < W; bx += factor) {
            const int ey = std::min(by + factor, H), ex = std::min(bx + factor, W);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int y = by; y < ey; ++y)
                for (int x = bx; x < ex; ++x)
                    for (int c = 0; c < C; ++c) acc[c] += image.at(y, x, c);
            const double count = static_cast<double>((ey - by) * (ex - bx));
            for (int y = by; y < ey; ++y)
                for (int x = bx; x < ex; ++x)
                    for (int c = 0; c < C; ++c) out.at(y, x, c) = static_cast<float>(acc[c] / count);
        }
    }
    return clamp01(std::move(out));
}

Image jpeg_proxy(const Image& image, int quality) {
    if (quality < 1 || quality > 100) throw ValidationError("jpeg_proxy: quality must be in [1, 100]");
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<double, 64> q{};
    for (int i = 0; i < 64; ++i) q[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);

    const auto& basis = dct_basis();
    const int H = image.height(), W = image.width(), C = image.channels();
    Image out(H, W, C);
    double block[64], coef[64], tmp[64];
    for (int c = 0; c < C; ++c) {
        for (int by = 0; by < H; by += 8) {
            for (int bx = 0; bx < W; bx += 8) {
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        block[y * 8 + x] =
                            255.0 * image.at(std::min(by + y, H - 1), std::min(bx + x, W - 1), c) - 128.0;
                // Forward DCT: rows then columns.
                for (int y = 0; y < 8; ++y)
                    for (int u = 0; u < 8; ++u) {
                        double s = 0.0;
                        for (int x = 0; x < 8; ++x) s += basis[u * 8 + x] * block[y * 8 + x];
                        tmp[y * 8 + u] = s;
                    }
                for (int v = 0; v < 8; ++v)
                    for (int u = 0; u < 8; ++u) {
                        double s = 0.0;
                        for (int y = 0; y < 8; ++y) s += basis[v * 8 + y] * tmp[y * 8 + u];
                        coef[v * 8 + u] = std::round(s / q[v * 8 + u]) * q[v * 8 + u];
                    }
                // Inverse DCT.
                for (int y = 0; y < 8; ++y)
                    for (int u = 0; u < 8; ++u) {
                        double s = 0.0;
                        for (int v = 0; v < 8; ++v) s += basis[v * 8 + y] * coef[v * 8 + u];
                        tmp[y * 8 + u] = s;
                    }
                for (int y = 0; y < 8 && by + y < H; ++y)
                    for (int x = 0; x < 8 && bx + x < W; ++x) {
                        double s = 0.0;
                        for (int u = 0; u < 8; ++u) s += basis[u * 8 + x] * tmp[y * 8 + u];
                        out.at(by + y, bx + x, c) = static_cast<float>((s + 128.0) / 255.0);
                    }
            }
        }
    }
    return clamp01(std::move(out));
}

Image elastic(const Image& image, double amplitude, double smoothness, SeededRng& rng) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw ValidationError("elastic: amplitude must be >= 0");
    if (!(smoothness >= 0.0) || !std::isfinite(smoothness)) throw ValidationError("elastic: smoothness must be >= 0");
    const int H = image.height(), W = image.width(), C = image.channels();
    const std::size_t n = static_cast<std::size_t>(H) * W;
    std::vector<double> dx(n), dy(n);
    for (double& v : dx) v = rng.uniform(-1.0, 1.0);
    for (double& v : dy) v = rng.uniform(-1.0, 1.0);
    gaussian_smooth(dx, H, W, smoothness);
    gaussian_smooth(dy, H, W, smoothness);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, std::abs(dx[i]), std::abs(dy[i])});
    const double gain = peak > 0.0 ? amplitude / peak : 0.0;
    Image out(H, W, C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            const double sy = y + gain * dy[i], sx = x + gain * dx[i];
            for (int c = 0; c < C; ++c) out.at(y, x, c) = static_cast<float>(sample_bilinear(image, sy, sx, c));
        }
    return clamp01(std::move(out));
}

BorderDraw draw_border(SeededRng& rng, int t_min, int t_max) {
    BorderDraw d;
    d.fill = rng.uniform(0.0, 1.0);
    d.thickness = static_cast<int>(rng.uniform_int(t_min, t_max));
    return d;
}

ObstructionDraw draw_obstruction(SeededRng& rng, int height, int width, int e_min, int e_max) {
    ObstructionDraw d;
    d.edge = static_cast<int>(rng.uniform_int(e_min, e_max));
    d.top = static_cast<int>(rng.uniform_int(0, height - d.edge));
    d.left = static_cast<int>(rng.uniform_int(0, width - d.edge));
    d.fill = rng.uniform(0.0, 1.0);
    return d;
}

Image fill_border(const Image& image, int thickness, double fill) {
    if (thickness < 0) throw ValidationError("border: thickness must be >= 0");
    range_checked(fill, 0.0, 1.0, "border: fill");
    const int H = image.height(), W = image.width();
    Image out = image;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (y < thickness || y >= H - thickness || x < thickness || x >= W - thickness)
                for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = static_cast<float>(fill);
    return clamp01(std::move(out));
}

Image fill_square(const Image& image, int top, int left, int edge, double fill) {
    if (edge < 0 || top < 0 || left < 0 || top + edge > image.height() || left + edge > image.width())
        throw ValidationError("obstruction: square does not fit inside the image");
    range_checked(fill, 0.0, 1.0, "obstruction: fill");
    Image out = image;
    for (int y = top; y < top + edge; ++y)
        for (int x = left; x < left + edge; ++x)
            for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = static_cast<float>(fill);
    return clamp01(std::move(out));
}

Image border(const Image& image, SeededRng& rng, int t_min, int t_max) {
    if (t_min < 0 || t_max < t_min)
        throw ValidationError("border: need 0 <= t_min <= t_max, got " + std::to_string(t_min) + ".." +
                              std::to_string(t_max));
    if (image.min_side() <= 2 * t_max)
        throw ValidationError("border: image min side " + std::to_string(image.min_side()) +
                              " too small for thickness " + std::to_string(t_max));
    const BorderDraw d = draw_border(rng, t_min, t_max);
    return fill_border(image, d.thickness, d.fill);
}

Image obstruction(const Image& image, SeededRng& rng, int e_min, int e_max) {
    if (e_min < 1 || e_max < e_min)
        throw ValidationError("obstruction: need 1 <= e_min <= e_max, got " + std::to_string(e_min) + ".." +
                              std::to_string(e_max));
    if (image.min_side() < e_max)
        throw ValidationError("obstruction: image min side " + std::to_string(image.min_side()) +
                              " smaller than edge " + std::to_string(e_max));
    const ObstructionDraw d = draw_obstruction(rng, image.height(), image.width(), e_min, e_max);
    return fill_square(image, d.top, d.left, d.edge, d.fill);
}

Image apply(const CorruptionSpec& spec, const Image& image, SeededRng rng, const SeverityTable& table) {
    const auto p = table.resolve(spec, image.min_side());
    switch (spec.id) {
    case CorruptionId::gaussian_noise: return gaussian_noise(image, p.at("sigma"), rng);
    case CorruptionId::shot_noise: return shot_noise(image, p.at("scale"), rng);
    case CorruptionId::impulse_noise: return impulse_noise(image, p.at("p"), rng);
    case CorruptionId::defocus_blur: return defocus_blur(image, p.at("radius"));
    case CorruptionId::motion_blur: {
        const double angle_max = p.at("angle_max");
        if (!(angle_max >= 0.0)) throw ValidationError("motion_blur: angle_max must be >= 0");
        const double angle = rng.uniform(-angle_max, angle_max);
        return motion_blur(image, p.at("length"), angle);
    }
    case CorruptionId::zoom_blur: return zoom_blur(image, p.at("z_max"), as_int(p, "steps"));
    case CorruptionId::glass_blur: return glass_blur(image, as_int(p, "d"), as_int(p, "iterations"), rng);
    case CorruptionId::brightness: return brightness(image, p.at("beta"));
    case CorruptionId::contrast: return contrast(image, p.at("alpha"));
    case CorruptionId::fog: return fog(image, p.at("t"), p.at("roughness"), rng);
    case CorruptionId::pixelate: return pixelate(image, as_int(p, "factor"));
    case CorruptionId::jpeg_proxy: return jpeg_proxy(image, as_int(p, "quality"));
    case CorruptionId::elastic: return elastic(image, p.at("amplitude"), p.at("smoothness"), rng);
    case CorruptionId::border: return border(image, rng, as_int(p, "t_min"), as_int(p, "t_max"));
    case CorruptionId::obstruction: return obstruction(image, rng, as_int(p, "e_min"), as_int(p, "e_max"));
    }
    throw ConfigError("unhandled corruption id");
}

Image apply_with_policy(const CorruptionSpec& spec, const SeverityPolicy& policy, const Image& image, SeededRng rng,
                        const SeverityTable& table) {
    if (policy.mode == SeverityPolicy::Mode::fixed) return apply(spec, image, rng, table);
    CorruptionSpec drawn = spec;
    SeededRng severity_rng = rng.derive("severity");
    drawn.severity = static_cast<int>(severity_rng.uniform_int(1, 5));
    return apply(drawn, image, rng, table);
}

} // namespace cobench
