#include "cobench/dataset.hpp"

#include "cobench/digest.hpp"
#include "cobench/error.hpp"
#include "cobench/ppm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace cobench {

namespace {

constexpr std::array<std::string_view, kProcShapeCount> kShapeNames = {
    "disk", "square", "triangle", "cross", "ring", "bar", "L", "T", "X", "diamond",
};

bool in_triangle(double u, double v) {
    constexpr double ax = 0.0, ay = -0.95, bx = -0.82, by = 0.5, cx = 0.82, cy = 0.5;
    const double d1 = (u - bx) * (ay - by) - (ax - bx) * (v - by);
    const double d2 = (u - cx) * (by - cy) - (bx - cx) * (v - cy);
    const double d3 = (u - ax) * (cy - ay) - (cx - ax) * (v - ay);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

// Shape membership in local coordinates; every shape fits the unit disk.
bool inside(int shape, double u, double v) {
    const double au = std::abs(u), av = std::abs(v);
    switch (shape) {
    case 0: return u * u + v * v <= 0.81;
    case 1: return au <= 0.7 && av <= 0.7;
    case 2: return in_triangle(u, v);
    case 3: return (au <= 0.22 && av <= 0.9) || (av <= 0.22 && au <= 0.9);
    case 4: {
        const double r2 = u * u + v * v;
        return r2 >= 0.25 && r2 <= 0.81;
    }
    case 5: return au <= 0.95 && av <= 0.25;
    case 6: return (u >= -0.7 && u <= -0.3 && av <= 0.7) || (v >= 0.3 && v <= 0.7 && au <= 0.7);
    case 7: return (v >= -0.7 && v <= -0.3 && au <= 0.7) || (au <= 0.2 && av <= 0.7);
    case 8: return au <= 0.7 && av <= 0.7 && (std::abs(u - v) <= 0.26 || std::abs(u + v) <= 0.26);
    case 9: return au + av <= 1.0;
    default: return false;
    }
}

Image render_shape(int shape, int side, SeededRng rng) {
    const double radius = side * rng.uniform(0.28, 0.40);
    const double theta = rng.uniform(-15.0, 15.0) * std::numbers::pi / 180.0;
    const double jitter = side * 0.12;
    const double cx = side / 2.0 + rng.uniform(-jitter, jitter);
    const double cy = side / 2.0 + rng.uniform(-jitter, jitter);

    // Gray-level intensities with a slight per-channel tint; shape and
    // background differ by at least 0.35.
    const double bg_level = rng.uniform(0.0, 1.0);
    double fg_level = rng.uniform(0.0, 1.0);
    if (std::abs(fg_level - bg_level) < 0.35) fg_level = bg_level < 0.5 ? bg_level + 0.35 + 0.3 * fg_level
                                                                         : bg_level - 0.35 - 0.3 * fg_level;
    std::array<double, 3> bg{}, fg{};
    for (int c = 0; c < 3; ++c) {
        bg[c] = bg_level + rng.uniform(-0.05, 0.05);
        fg[c] = fg_level + rng.uniform(-0.05, 0.05);
    }
    const double noise = rng.uniform(0.01, 0.04);

    const double cs = std::cos(theta), sn = std::sin(theta);
    Image img(side, side, 3);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            int hits = 0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double px = x + 0.25 + 0.5 * sx - cx;
                    const double py = y + 0.25 + 0.5 * sy - cy;
                    const double u = (px * cs + py * sn) / radius;
                    const double v = (-px * sn + py * cs) / radius;
                    hits += inside(shape, u, v) ? 1 : 0;
                }
            const double alpha = hits / 4.0;
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<float>((1.0 - alpha) * bg[c] + alpha * fg[c] + rng.normal(0.0, noise));
        }
    }
    return clamp01(std::move(img));
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
    if (offset + 4 > bytes.size())
        throw ParseError(std::string("idx: truncated while reading ") + what, bytes.size());
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

} // namespace

std::string_view procshape_name(int cls) {
    if (cls < 0 || cls >= kProcShapeCount) throw ValidationError("procshapes: no shape class " + std::to_string(cls));
    return kShapeNames[static_cast<std::size_t>(cls)];
}

void Dataset::validate() const {
    if (images.size() != labels.size())
        throw ValidationError("dataset: " + std::to_string(images.size()) + " images but " +
                              std::to_string(labels.size()) + " labels");
    if (num_classes < 1) throw ValidationError("dataset: class count must be positive");
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(images.front()))
            throw ValidationError("dataset: image " + std::to_string(i) + " has a different shape");
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw ValidationError("dataset: label " + std::to_string(labels[i]) + " of image " + std::to_string(i) +
                                  " outside 0.." + std::to_string(num_classes - 1));
    }
}

std::string Dataset::digest() const {
    Sha256 h;
    h.update("cobench-dataset-v1");
    h.update_u64(images.size());
    const Image* first = images.empty() ? nullptr : &images.front();
    h.update_u32(first ? static_cast<std::uint32_t>(first->height()) : 0);
    h.update_u32(first ? static_cast<std::uint32_t>(first->width()) : 0);
    h.update_u32(first ? static_cast<std::uint32_t>(first->channels()) : 0);
    h.update_u32(static_cast<std::uint32_t>(num_classes));
    for (int label : labels) h.update_u32(static_cast<std::uint32_t>(label));
    for (const auto& img : images) h.update_f32(img.data());
    return h.finish_hex();
}

DatasetPair generate_procshapes(const ProcShapesConfig& config) {
    if (config.classes < 2 || config.classes > kProcShapeCount)
        throw ValidationError("procshapes: classes must be in [2, " + std::to_string(kProcShapeCount) + "], got " +
                              std::to_string(config.classes));
    if (config.per_class < 2) throw ValidationError("procshapes: per_class must be >= 2");
    if (config.side < 24) throw ValidationError("procshapes: side must be >= 24");

    const int n_train = config.per_class * 4 / 5;
    const std::string provenance = "procshapes(classes=" + std::to_string(config.classes) +
                                   ",per_class=" + std::to_string(config.per_class) +
                                   ",side=" + std::to_string(config.side) + ",seed=" + std::to_string(config.seed) + ")";
    DatasetPair out;
    out.train = Dataset{{}, {}, config.classes, Split::train, provenance + ":train"};
    out.test = Dataset{{}, {}, config.classes, Split::test, provenance + ":test"};
    const SeededRng root = SeededRng(config.seed).derive("procshapes");
    // Classes interleaved: contiguous slices are balanced.
    for (int i = 0; i < config.per_class; ++i) {
        for (int cls = 0; cls < config.classes; ++cls) {
            Image img = render_shape(cls, config.side, root.derive(static_cast<std::uint64_t>(cls)).derive(
                                                           static_cast<std::uint64_t>(i)));
            Dataset& target = i < n_train ? out.train : out.test;
            target.images.push_back(std::move(img));
            target.labels.push_back(cls);
        }
    }
    return out;
}

Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
    const std::uint32_t magic = read_be32(image_bytes, 0, "image magic");
    if (magic != 0x00000803 && magic != 0x00000804)
        throw ParseError("idx: image magic mismatch (expected 0x00000803 or 0x00000804)", 0);
    const std::uint32_t count = read_be32(image_bytes, 4, "image count");
    const std::uint32_t rows = read_be32(image_bytes, 8, "rows");
    const std::uint32_t cols = read_be32(image_bytes, 12, "cols");
    std::uint32_t channels = 1;
    std::size_t offset = 16;
    if (magic == 0x00000804) {
        channels = read_be32(image_bytes, 16, "channels");
        offset = 20;
    }
    if (rows == 0 || cols == 0 || rows > 65536 || cols > 65536) throw ParseError("idx: bad image dimensions", 8);
    if (channels != 1 && channels != 3) throw ParseError("idx: channel count must be 1 or 3", 16);

    const std::uint32_t label_magic = read_be32(label_bytes, 0, "label magic");
    if (label_magic != 0x00000801) throw ParseError("idx: label magic mismatch (expected 0x00000801)", 0);
    const std::uint32_t label_count = read_be32(label_bytes, 4, "label count");
    if (label_count != count)
        throw ParseError("idx: " + std::to_string(count) + " images but " + std::to_string(label_count) + " labels",
                         4);

    const std::size_t per_image = static_cast<std::size_t>(rows) * cols * channels;
    const std::size_t needed = offset + per_image * count;
    if (image_bytes.size() < needed)
        throw ParseError("idx: truncated image payload, need " + std::to_string(needed) + " bytes", image_bytes.size());
    if (label_bytes.size() < 8 + static_cast<std::size_t>(count))
        throw ParseError("idx: truncated label payload", label_bytes.size());

    Dataset ds;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    int max_label = -1;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<float> data(per_image);
        for (std::size_t k = 0; k < per_image; ++k)
            data[k] = static_cast<float>(image_bytes[offset + i * per_image + k]) / 255.0f;
        ds.images.emplace_back(static_cast<int>(rows), static_cast<int>(cols), static_cast<int>(channels),
                               std::move(data));
        const int label = label_bytes[8 + i];
        max_label = std::max(max_label, label);
        ds.labels.push_back(label);
    }
    ds.num_classes = std::max(1, max_label + 1);
    ds.provenance = "idx(images=" + sha256_hex(std::string_view(reinterpret_cast<const char*>(image_bytes.data()),
                                                                image_bytes.size())) +
                    ",labels=" +
                    sha256_hex(std::string_view(reinterpret_cast<const char*>(label_bytes.data()), label_bytes.size())) +
                    ")";
    return ds;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    return parse_idx(read_file_bytes(images_path), read_file_bytes(labels_path));
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    dataset.validate();
    if (dataset.empty()) throw ValidationError("idx: cannot write an empty dataset");
    const Image& first = dataset.images.front();
    std::vector<std::uint8_t> img;
    put_be32(img, first.channels() == 1 ? 0x00000803 : 0x00000804);
    put_be32(img, static_cast<std::uint32_t>(dataset.size()));
    put_be32(img, static_cast<std::uint32_t>(first.height()));
    put_be32(img, static_cast<std::uint32_t>(first.width()));
    if (first.channels() != 1) put_be32(img, static_cast<std::uint32_t>(first.channels()));
    for (const auto& image : dataset.images)
        for (float v : image.data()) img.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    std::vector<std::uint8_t> lab;
    put_be32(lab, 0x00000801);
    put_be32(lab, static_cast<std::uint32_t>(dataset.size()));
    for (int label : dataset.labels) {
        if (label > 255) throw ValidationError("idx: labels above 255 cannot be stored");
        lab.push_back(static_cast<std::uint8_t>(label));
    }
    write_file_atomic(images_path, img);
    write_file_atomic(labels_path, lab);
}

Dataset corrupt_dataset(const Dataset& dataset, const CorruptionSpec& spec, std::uint64_t seed,
                        const SeverityPolicy& policy, const SeverityTable& table) {
    dataset.validate();
    Dataset out;
    out.labels = dataset.labels;
    out.num_classes = dataset.num_classes;
    out.split = dataset.split;
    out.provenance = dataset.provenance + "|corrupt(" + spec.describe() + ",policy=" +
                     std::string(to_string(policy.mode)) + ",seed=" + std::to_string(seed) + ")";
    out.images.reserve(dataset.size());
    const SeededRng root(seed);
    for (std::size_t i = 0; i < dataset.size(); ++i)
        out.images.push_back(apply_with_policy(spec, policy, dataset.images[i], root.derive(i), table));
    return out;
}

} // namespace cobench
