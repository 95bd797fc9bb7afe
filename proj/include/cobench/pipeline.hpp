#pragma once

#include "cobench/json_io.hpp"
#include "cobench/scores.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cobench {

struct DatasetSpec {
    enum class Kind { procshapes, idx };
    Kind kind = Kind::procshapes;
    ProcShapesConfig procshapes;
    std::filesystem::path train_images, train_labels, test_images, test_labels;

    DatasetPair load() const;
};

// A corruption taking part in a run. `name` identifies its model, its test
// condition and its seeds; it defaults to the corruption id, so the same id
// may appear twice under different names.
struct PlanCorruption {
    std::string name;
    CorruptionSpec spec;
};

struct RunPlan {
    DatasetSpec dataset;
    ModelArch arch;     // height/width/channels/classes are taken from the dataset
    TrainConfig train;  // template; augment, seeds and severity policy are set per model
    std::vector<PlanCorruption> corruptions;
    SeverityPolicy severity_policy; // augmentation and evaluation
    std::uint64_t master_seed = 1;
    std::filesystem::path cache_dir = "cobench-cache";
    int workers = 0; // 0 = hardware concurrency

    // Names unique and not "standard"/"clean"; every spec resolvable.
    void validate() const;
    const PlanCorruption& corruption(std::string_view name) const;
    // Copy of the plan keeping only the named corruptions, in the given order.
    RunPlan restricted(const std::vector<std::string>& names) const;

    // cache_dir and workers are not part of the serialisation's identity and
    // are omitted from identity().
    Json to_json() const;
    static RunPlan from_json(const Json& j);
    static RunPlan load(const std::filesystem::path& path);
    Json identity() const;
};

// Seed scheme, all derived from the master seed with SeededRng::derive:
//   initialisation/shuffle/flip seed  shared by every model  derive("train")
//   augmentation seed of corruption n                        derive("augment").derive(n)
//   test-set seed of condition n                             derive("test").derive(n)
std::uint64_t training_seed(std::uint64_t master_seed);
std::uint64_t augmentation_seed(std::uint64_t master_seed, std::string_view name);
std::uint64_t test_condition_seed(std::uint64_t master_seed, std::string_view name);

struct ModelRecord {
    std::string name; // "standard" or a corruption name
    std::string cache_key;
    std::string digest; // empty when training diverged
    bool converged = false;
    std::string failure; // divergence message, if any
};

struct MatrixResult {
    AccuracyTable table;
    OverlapMatrix matrix;
    std::vector<ModelRecord> models;
    int trainings_run = 0;
    int trainings_cached = 0;
    int evaluations_run = 0;
    int evaluations_cached = 0;
};

using ProgressCallback = std::function<void(const std::string&)>;

// Content-addressed artifact store:
//   <dir>/models/<key>.ckpt          checkpoint (SHA-256 trailer)
//   <dir>/models/<key>.diverged.json divergence record
//   <dir>/evals/<key>.json           evaluation record
// Keys are SHA-256 over a canonical JSON of the inputs. Files are written by
// atomic rename; an unreadable or inconsistent entry raises CacheCorruption.
class ArtifactCache {
public:
    explicit ArtifactCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }

    static std::string model_key(const ModelArch& arch, const TrainConfig& config, std::string_view dataset_digest,
                                 std::string_view severity_table_digest);
    static std::string eval_key(std::string_view model_digest, std::string_view test_digest, const Json& condition);

    std::optional<TrainedModel> load_model(const std::string& key) const;
    void store_model(const std::string& key, const TrainedModel& model) const;
    std::optional<std::string> load_divergence(const std::string& key) const;
    void store_divergence(const std::string& key, const std::string& message) const;
    std::optional<double> load_eval(const std::string& key) const;
    void store_eval(const std::string& key, double accuracy, const Json& description) const;

private:
    std::filesystem::path dir_;
};

// Steps 1-6: trains the standard model and one augmented model per corruption,
// evaluates each on the clean and every corrupted test set, and derives the
// overlap matrix from the resulting accuracy table.
MatrixResult run_matrix(const RunPlan& plan, const ProgressCallback& progress = {});

struct PairResult {
    OverlapResult score;
    MatrixResult run;
};

// run_matrix restricted to {c1, c2}; returns the (c1, c2) cell.
PairResult run_pair(const RunPlan& plan, std::string_view c1, std::string_view c2,
                    const ProgressCallback& progress = {});

struct ExternalRow {
    std::vector<std::string> conditions; // "clean" then the corruption names
    std::vector<double> accuracies;
    std::string dataset_digest;          // of the clean test set
    std::string model_digest;
};

// Accuracy of an existing model on the clean and corrupted test sets, using
// the same per-condition seeds as run_matrix so the row can join its table.
ExternalRow evaluate_external(const TrainedModel& model, const std::vector<PlanCorruption>& corruptions,
                              const Dataset& test_set, std::uint64_t master_seed,
                              const SeverityPolicy& policy = {});

// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after every started job has finished.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

int effective_workers(int requested);

} // namespace cobench
