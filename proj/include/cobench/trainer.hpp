#pragma once

#include "cobench/corruptions.hpp"
#include "cobench/dataset.hpp"
#include "cobench/network.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cobench {

// Which share of every training batch the augmentation corruption touches.
enum class AugmentMode {
    half, // the first ceil(B/2) images of each (shuffled) batch
    full, // every image
};

std::string_view to_string(AugmentMode mode);
AugmentMode parse_augment_mode(std::string_view name);

struct TrainConfig {
    int epochs = 15;
    int batch_size = 128;
    double lr0 = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<int> lr_drop_epochs{8, 12};
    std::optional<CorruptionSpec> augment;
    AugmentMode augment_mode = AugmentMode::half;
    SeverityPolicy severity_policy;
    bool hflip = false;
    double convergence_threshold = 0.9;
    std::uint64_t seed = 1;         // initialisation, shuffling, flips
    std::uint64_t augment_seed = 1; // corruption draws during augmentation

    void validate() const;
    // Learning rate used throughout (0-based) epoch `epoch`:
    // lr0 / 10^(number of drop epochs <= epoch).
    double learning_rate(int epoch) const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainedModel {
    ModelArch arch;
    std::vector<float> params;
    TrainConfig config;
    std::string dataset_digest;
    std::vector<double> epoch_losses; // mean training loss per epoch
    double final_train_accuracy = 0.0; // on the clean training set
    bool converged = false;

    // SHA-256 of the checkpoint serialisation; identifies the model.
    std::string digest() const;
};

struct EpochReport {
    int epoch = 0;
    double learning_rate = 0.0;
    double mean_loss = 0.0;
    double running_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Kaiming-uniform (fan-in, ReLU gain) weights, zero biases, drawn from
// SeededRng(seed).derive("init").
std::vector<float> initialize_parameters(const ModelArch& arch, std::uint64_t seed);

// SGD with momentum (v <- mu v + g; p <- p - lr v) on mean cross-entropy plus
// weight decay. Throws TrainingDiverged on a non-finite loss.
TrainedModel train(const ModelArch& arch, const Dataset& train_set, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

// Top-1 accuracy; argmax ties go to the lowest class index.
double evaluate(const TrainedModel& model, const Dataset& test_set);
std::vector<int> predict(const TrainedModel& model, const Dataset& dataset);

// Versioned binary checkpoint:
//   "CBMODEL\0" magic, u32 version (1),
//   u32 kind, height, width, channels, classes, hidden, conv1, conv2,
//   u64 parameter count, parameters as little-endian f32,
//   u32 provenance length, provenance JSON (config, dataset digest, metrics),
//   32-byte SHA-256 of all preceding bytes.
std::vector<std::uint8_t> encode_checkpoint(const TrainedModel& model);
TrainedModel decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

} // namespace cobench
