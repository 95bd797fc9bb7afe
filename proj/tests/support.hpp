#pragma once

#include "cobench/pipeline.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cobench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Seconds-scale plan: 4 classes of 24x24 images, 3 epochs of a small mlp.
inline cobench::RunPlan tiny_plan(const std::filesystem::path& cache, std::vector<std::string> ids) {
    cobench::RunPlan plan;
    plan.dataset.procshapes.classes = 4;
    plan.dataset.procshapes.per_class = 30;
    plan.dataset.procshapes.side = 24;
    plan.dataset.procshapes.seed = 3;
    plan.arch.kind = cobench::ArchKind::mlp;
    plan.arch.hidden = 32;
    plan.train.epochs = 3;
    plan.train.batch_size = 16;
    plan.train.lr_drop_epochs = {2};
    plan.train.convergence_threshold = 0.0;
    for (const auto& id : ids)
        plan.corruptions.push_back({id, cobench::CorruptionSpec{cobench::corruption_id_or_throw(id), 3, {}}});
    plan.master_seed = 5;
    plan.cache_dir = cache;
    plan.workers = 1;
    return plan;
}

} // namespace testing
