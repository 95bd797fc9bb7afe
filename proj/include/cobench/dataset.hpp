#pragma once

#include "cobench/corruptions.hpp"
#include "cobench/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cobench {

enum class Split { train, test };

struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;
    int num_classes = 0;
    Split split = Split::train;
    std::string provenance;

    std::size_t size() const noexcept { return images.size(); }
    bool empty() const noexcept { return images.empty(); }

    // Throws ValidationError unless labels are in range and shapes are uniform.
    void validate() const;

    // SHA-256 over the canonical serialisation: "cobench-dataset-v1", then
    // u64 count, u32 height, width, channels, classes, each label as u32,
    // then every pixel as little-endian f32. Provenance is not hashed.
    std::string digest() const;
};

inline constexpr int kProcShapeCount = 10;
// disk, square, triangle, cross, ring, bar, L, T, X, diamond
std::string_view procshape_name(int cls);

struct ProcShapesConfig {
    int classes = 10;
    int per_class = 200;
    int side = 32;
    std::uint64_t seed = 1;

    friend bool operator==(const ProcShapesConfig&, const ProcShapesConfig&) = default;
};

struct DatasetPair {
    Dataset train;
    Dataset test;
};

// Renders `per_class` images for each of the first `classes` shapes: random
// position, radius (28-40% of the side), rotation (+-15 deg) and colours on a
// noisy background, 2x2 supersampled. The first 80% of each class (rounded
// down) go to train, the rest to test; every image has its own RNG stream
// derived from (seed, class, index), so the two splits never share draws.
DatasetPair generate_procshapes(const ProcShapesConfig& config);

// Big-endian IDX. Images: magic 0x00000803 (count, rows, cols) yielding
// 1-channel images, or 0x00000804 (count, rows, cols, channels) with
// channels 1 or 3. Labels: magic 0x00000801. Bytes scale as b / 255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes);
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Each image i becomes apply_with_policy(spec, policy, image, rng(seed).derive(i)).
// Labels and shapes are untouched; the result is independent of processing order.
Dataset corrupt_dataset(const Dataset& dataset, const CorruptionSpec& spec, std::uint64_t seed,
                        const SeverityPolicy& policy = {}, const SeverityTable& table = SeverityTable::builtin());

} // namespace cobench
