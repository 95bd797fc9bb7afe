#pragma once

#include "cobench/error.hpp"
#include "cobench/image.hpp"
#include "cobench/rng.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cobench {

enum class CorruptionId {
    gaussian_noise,
    shot_noise,
    impulse_noise,
    defocus_blur,
    motion_blur,
    zoom_blur,
    glass_blur,
    brightness,
    contrast,
    fog,
    pixelate,
    jpeg_proxy,
    elastic,
    border,
    obstruction,
};

std::span<const CorruptionId> all_corruption_ids();
std::string_view to_string(CorruptionId id);
std::optional<CorruptionId> parse_corruption_id(std::string_view name);
// Throws ConfigError listing the valid ids.
CorruptionId corruption_id_or_throw(std::string_view name);
std::string valid_corruption_ids();

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Pure description of one corruption: the severity picks a row of the
// severity table, `params` overrides individual entries (table units).
struct CorruptionSpec {
    CorruptionId id = CorruptionId::gaussian_noise;
    int severity = 3;
    std::map<std::string, double> params;

    std::string describe() const;
    friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

struct SeverityPolicy {
    enum class Mode { fixed, resample };
    Mode mode = Mode::fixed;
    int severity = 3;

    friend bool operator==(const SeverityPolicy&, const SeverityPolicy&) = default;
};

std::string_view to_string(SeverityPolicy::Mode mode);

// Severity -> parameter rows. The built-in table is compiled from
// data/severity_table.txt.
class SeverityTable {
public:
    struct Row {
        std::string param;
        bool spatial = false; // px224 unit
        std::array<double, 5> values{};
    };

    static const SeverityTable& builtin();
    static SeverityTable parse(std::string_view text);
    static SeverityTable load(const std::filesystem::path& path);

    const std::vector<Row>& rows(CorruptionId id) const;

    // Parameter values in image pixels for this spec and image size. Throws
    // ValidationError for an out-of-range severity or an unknown override.
    std::map<std::string, double> resolve(const CorruptionSpec& spec, int min_side) const;

    // Canonical text form; digest input for cache keys.
    std::string canonical() const;

private:
    std::map<CorruptionId, std::vector<Row>> rows_;
};

// Normalised convolution kernel, odd size, row-major, weights sum to 1.
struct Kernel {
    int size = 1;
    std::vector<double> weights{1.0};

    int radius() const noexcept { return size / 2; }
    double at(int dy, int dx) const noexcept {
        return weights[static_cast<std::size_t>(dy + radius()) * size + (dx + radius())];
    }
};

Kernel disk_kernel(double radius);
Kernel line_kernel(double length, double angle_degrees);
Kernel gaussian_kernel(double sigma);
// Correlation with edge replication, double accumulation, clamped output.
Image convolve(const Image& image, const Kernel& kernel);

// Bilinear sample with coordinates clamped to the image.
double sample_bilinear(const Image& image, double y, double x, int c);

Image gaussian_noise(const Image& image, double sigma, SeededRng& rng);
Image shot_noise(const Image& image, double scale, SeededRng& rng);
Image impulse_noise(const Image& image, double p, SeededRng& rng);

Image defocus_blur(const Image& image, double radius);
Image motion_blur(const Image& image, double length, double angle_degrees);
Image zoom_blur(const Image& image, double z_max, int steps);
Image glass_blur(const Image& image, int d, int iterations, SeededRng& rng);

Image brightness(const Image& image, double beta);
Image contrast(const Image& image, double alpha);
Image fog(const Image& image, double t, double roughness, SeededRng& rng);
// Midpoint-displacement haze in [0, 1].
std::vector<double> plasma_field(int height, int width, double roughness, SeededRng& rng);

Image pixelate(const Image& image, int factor);
Image jpeg_proxy(const Image& image, int quality);
Image elastic(const Image& image, double amplitude, double smoothness, SeededRng& rng);

struct BorderDraw {
    double fill = 0.0;
    int thickness = 0;
};
struct ObstructionDraw {
    int edge = 0;
    int top = 0;
    int left = 0;
    double fill = 0.0;
};

// Draw order: fill ~ U[0,1), thickness ~ U{t_min..t_max}.
BorderDraw draw_border(SeededRng& rng, int t_min, int t_max);
// Draw order: edge ~ U{e_min..e_max}, top, left (uniform over placements that
// keep the square inside), fill ~ U[0,1).
ObstructionDraw draw_obstruction(SeededRng& rng, int height, int width, int e_min, int e_max);

// Pixels closer than `thickness` to any edge take `fill` in every channel.
// A thickness of at least half the min side covers the whole image.
Image fill_border(const Image& image, int thickness, double fill);
Image fill_square(const Image& image, int top, int left, int edge, double fill);

Image border(const Image& image, SeededRng& rng, int t_min, int t_max);
Image obstruction(const Image& image, SeededRng& rng, int e_min, int e_max);

// Resolves the spec against the table and dispatches to the family above.
// `rng` should be a stream dedicated to this (image, spec) pair.
Image apply(const CorruptionSpec& spec, const Image& image, SeededRng rng,
            const SeverityTable& table = SeverityTable::builtin());

// Applies `spec` under a severity policy: fixed keeps spec.severity, resample
// draws a severity in 1..5 from rng.derive("severity").
Image apply_with_policy(const CorruptionSpec& spec, const SeverityPolicy& policy, const Image& image, SeededRng rng,
                        const SeverityTable& table = SeverityTable::builtin());

} // namespace cobench
