#include "cobench/pipeline.hpp"

#include "cobench/digest.hpp"
#include "cobench/error.hpp"
#include "cobench/ppm.hpp"
#include "cobench/rng.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace cobench {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

Json condition_json(const PlanCorruption* c, std::uint64_t seed, const SeverityPolicy& policy,
                    std::string_view table_digest) {
    if (c == nullptr) return Json{{"condition", "clean"}};
    return Json{{"condition", c->name},
                {"spec", to_json(c->spec)},
                {"seed", seed},
                {"severity_policy", to_json(policy)},
                {"severity_table", std::string(table_digest)}};
}

Json dataset_spec_json(const DatasetSpec& d) {
    if (d.kind == DatasetSpec::Kind::procshapes) {
        Json j = to_json(d.procshapes);
        j["kind"] = "procshapes";
        return j;
    }
    return Json{{"kind", "idx"},
                {"train_images", d.train_images.string()},
                {"train_labels", d.train_labels.string()},
                {"test_images", d.test_images.string()},
                {"test_labels", d.test_labels.string()}};
}

DatasetSpec dataset_spec_from_json(const Json& j, const fs::path& base) {
    DatasetSpec d;
    const auto kind = j.value("kind", std::string("procshapes"));
    if (kind == "procshapes") {
        d.kind = DatasetSpec::Kind::procshapes;
        d.procshapes = procshapes_config_from_json(j);
    } else if (kind == "idx") {
        reject_unknown_keys(j, {"kind", "train_images", "train_labels", "test_images", "test_labels"}, "dataset");
        d.kind = DatasetSpec::Kind::idx;
        const auto path = [&](const char* key) {
            if (!j.contains(key)) throw ValidationError(std::string("dataset: missing '") + key + "'");
            fs::path p = j.at(key).get<std::string>();
            return p.is_relative() && !base.empty() ? base / p : p;
        };
        d.train_images = path("train_images");
        d.train_labels = path("train_labels");
        d.test_images = path("test_images");
        d.test_labels = path("test_labels");
    } else {
        throw ValidationError("dataset: kind must be 'procshapes' or 'idx'");
    }
    return d;
}

std::string severity_table_digest() {
    static const std::string digest = sha256_hex(SeverityTable::builtin().canonical());
    return digest;
}

} // namespace

DatasetPair DatasetSpec::load() const {
    if (kind == Kind::procshapes) return generate_procshapes(procshapes);
    DatasetPair pair{load_idx(train_images, train_labels), load_idx(test_images, test_labels)};
    pair.train.split = Split::train;
    pair.test.split = Split::test;
    pair.test.num_classes = pair.train.num_classes = std::max(pair.train.num_classes, pair.test.num_classes);
    return pair;
}

// ---------------------------------------------------------------- RunPlan

void RunPlan::validate() const {
    std::set<std::string> names;
    for (const auto& c : corruptions) {
        if (c.name.empty()) throw ValidationError("plan: corruption names must be non-empty");
        if (c.name == kStandardModel || c.name == kCleanCondition)
            throw ValidationError("plan: '" + c.name + "' is reserved and cannot name a corruption");
        if (c.name.find(',') != std::string::npos || c.name.find('/') != std::string::npos)
            throw ValidationError("plan: corruption name '" + c.name + "' may not contain ',' or '/'");
        if (!names.insert(c.name).second) throw ValidationError("plan: duplicate corruption '" + c.name + "'");
        SeverityTable::builtin().resolve(c.spec, 32);
    }
    if (severity_policy.severity < 1 || severity_policy.severity > 5)
        throw ValidationError("plan: severity must be in 1..5");
    if (workers < 0) throw ValidationError("plan: workers must be >= 0");
    arch.validate();
    train.validate();
}

const PlanCorruption& RunPlan::corruption(std::string_view name) const {
    for (const auto& c : corruptions)
        if (c.name == name) return c;
    throw ValidationError("plan has no corruption named '" + std::string(name) + "'");
}

RunPlan RunPlan::restricted(const std::vector<std::string>& names) const {
    RunPlan out = *this;
    out.corruptions.clear();
    for (const auto& n : names) out.corruptions.push_back(corruption(n));
    return out;
}

Json RunPlan::identity() const {
    Json cs = Json::array();
    for (const auto& c : corruptions) {
        Json cj = cobench::to_json(c.spec);
        cj["name"] = c.name;
        cs.push_back(std::move(cj));
    }
    return Json{{"dataset", dataset_spec_json(dataset)},
                {"arch", cobench::to_json(arch)},
                {"train", cobench::to_json(train)},
                {"corruptions", std::move(cs)},
                {"severity_policy", cobench::to_json(severity_policy)},
                {"master_seed", master_seed}};
}

Json RunPlan::to_json() const {
    Json j = identity();
    j["cache_dir"] = cache_dir.string();
    j["workers"] = workers;
    return j;
}

RunPlan RunPlan::from_json(const Json& j) {
    try {
        reject_unknown_keys(j,
                            {"dataset", "arch", "train", "corruptions", "severity_policy", "master_seed",
                             "cache_dir", "workers", "base_dir"},
                            "plan");
        RunPlan p;
        const fs::path base = j.contains("base_dir") ? fs::path(j.at("base_dir").get<std::string>()) : fs::path();
        if (j.contains("dataset")) p.dataset = dataset_spec_from_json(j.at("dataset"), base);
        if (j.contains("arch")) p.arch = model_arch_from_json(j.at("arch"));
        if (j.contains("train")) p.train = train_config_from_json(j.at("train"));
        if (j.contains("severity_policy")) p.severity_policy = severity_policy_from_json(j.at("severity_policy"));
        if (j.contains("corruptions")) {
            for (const auto& cj : j.at("corruptions")) {
                PlanCorruption c;
                c.spec = corruption_spec_from_json(cj);
                // Entries without their own severity follow the plan's policy.
                if (!(cj.is_object() && cj.contains("severity"))) c.spec.severity = p.severity_policy.severity;
                c.name = cj.is_object() && cj.contains("name") ? cj.at("name").get<std::string>()
                                                              : std::string(to_string(c.spec.id));
                p.corruptions.push_back(std::move(c));
            }
        }
        p.master_seed = j.value("master_seed", p.master_seed);
        if (j.contains("cache_dir")) {
            fs::path cd = j.at("cache_dir").get<std::string>();
            p.cache_dir = cd.is_relative() && !base.empty() ? base / cd : cd;
        }
        p.workers = j.value("workers", p.workers);
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("plan: ") + e.what());
    }
}

RunPlan RunPlan::load(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    Json j;
    try {
        j = Json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("plan ") + path.string() + ": " + e.what(), e.byte);
    }
    if (j.is_object() && !j.contains("base_dir")) j["base_dir"] = path.parent_path().string();
    return from_json(j);
}

std::uint64_t training_seed(std::uint64_t master_seed) { return SeededRng(master_seed).derive("train").seed(); }

std::uint64_t augmentation_seed(std::uint64_t master_seed, std::string_view name) {
    return SeededRng(master_seed).derive("augment").derive(name).seed();
}

std::uint64_t test_condition_seed(std::uint64_t master_seed, std::string_view name) {
    return SeededRng(master_seed).derive("test").derive(name).seed();
}

// ---------------------------------------------------------------- cache

ArtifactCache::ArtifactCache(fs::path dir) : dir_(std::move(dir)) {}

std::string ArtifactCache::model_key(const ModelArch& arch, const TrainConfig& config, std::string_view dataset_digest,
                                     std::string_view table_digest) {
    const Json j{{"kind", "model"},
                 {"version", 1},
                 {"arch", to_json(arch)},
                 {"train", to_json(config)},
                 {"dataset", std::string(dataset_digest)},
                 {"severity_table", std::string(table_digest)}};
    return sha256_hex(j.dump());
}

std::string ArtifactCache::eval_key(std::string_view model_digest, std::string_view test_digest,
                                    const Json& condition) {
    const Json j{{"kind", "eval"},
                 {"version", 1},
                 {"model", std::string(model_digest)},
                 {"test_set", std::string(test_digest)},
                 {"condition", condition}};
    return sha256_hex(j.dump());
}

std::optional<TrainedModel> ArtifactCache::load_model(const std::string& key) const {
    const auto path = dir_ / "models" / (key + ".ckpt");
    if (!fs::exists(path)) return std::nullopt;
    try {
        return load_checkpoint(path);
    } catch (const std::exception& e) {
        throw CacheCorruption(key, e.what());
    }
}

void ArtifactCache::store_model(const std::string& key, const TrainedModel& model) const {
    save_checkpoint(model, dir_ / "models" / (key + ".ckpt"));
}

namespace {

Json read_record(const fs::path& path, const std::string& key) {
    Json j;
    try {
        const auto bytes = read_file_bytes(path);
        j = Json::parse(bytes.begin(), bytes.end());
        const auto check = j.at("check").get<std::string>();
        Json body = j;
        body.erase("check");
        if (sha256_hex(body.dump()) != check) throw std::runtime_error("checksum mismatch");
        if (j.at("key").get<std::string>() != key) throw std::runtime_error("record belongs to another key");
    } catch (const CacheCorruption&) {
        throw;
    } catch (const std::exception& e) {
        throw CacheCorruption(key, e.what());
    }
    return j;
}

void write_record(const fs::path& path, Json body) {
    body["check"] = sha256_hex(body.dump());
    write_file_atomic(path, to_bytes(body.dump(2) + "\n"));
}

} // namespace

std::optional<std::string> ArtifactCache::load_divergence(const std::string& key) const {
    const auto path = dir_ / "models" / (key + ".diverged.json");
    if (!fs::exists(path)) return std::nullopt;
    return read_record(path, key).at("message").get<std::string>();
}

void ArtifactCache::store_divergence(const std::string& key, const std::string& message) const {
    write_record(dir_ / "models" / (key + ".diverged.json"), Json{{"key", key}, {"message", message}});
}

std::optional<double> ArtifactCache::load_eval(const std::string& key) const {
    const auto path = dir_ / "evals" / (key + ".json");
    if (!fs::exists(path)) return std::nullopt;
    const auto j = read_record(path, key);
    const double acc = j.at("accuracy").get<double>();
    if (!(acc >= 0.0 && acc <= 1.0)) throw CacheCorruption(key, "accuracy out of range");
    return acc;
}

void ArtifactCache::store_eval(const std::string& key, double accuracy, const Json& description) const {
    write_record(dir_ / "evals" / (key + ".json"),
                 Json{{"key", key}, {"accuracy", accuracy}, {"description", description}});
}

// ---------------------------------------------------------------- execution

int effective_workers(int requested) {
    if (requested > 0) return requested;
    const auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const auto threads = std::min<std::size_t>(n, static_cast<std::size_t>(effective_workers(workers)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (first_error || next >= n) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

MatrixResult run_matrix(const RunPlan& plan_in, const ProgressCallback& progress) {
    plan_in.validate();
    const auto data = plan_in.dataset.load();
    data.train.validate();
    data.test.validate();
    if (data.train.empty() || data.test.empty()) throw ValidationError("plan: dataset splits must be non-empty");

    RunPlan plan = plan_in;
    const auto& probe = data.train.images.front();
    plan.arch.height = probe.height();
    plan.arch.width = probe.width();
    plan.arch.channels = probe.channels();
    plan.arch.classes = data.train.num_classes;
    plan.arch.validate();
    // Every spec must apply at the dataset's resolution before any training.
    for (const auto& c : plan.corruptions) apply(c.spec, Image(probe.height(), probe.width(), probe.channels()),
                                                 SeededRng(0));

    const ArtifactCache cache(plan.cache_dir);
    const auto table_digest = severity_table_digest();
    const auto train_digest = data.train.digest();
    const auto test_digest = data.test.digest();
    const auto n_models = plan.corruptions.size() + 1;

    std::mutex log_mu;
    auto log = [&](const std::string& msg) {
        if (!progress) return;
        std::lock_guard lock(log_mu);
        progress(msg);
    };

    // Step 2: standard + augmented models.
    std::vector<ModelRecord> records(n_models);
    std::vector<std::optional<TrainedModel>> models(n_models);
    std::vector<int> trained(n_models, 0);
    parallel_for(n_models, plan.workers, [&](std::size_t m) {
        TrainConfig cfg = plan.train;
        cfg.seed = training_seed(plan.master_seed);
        cfg.severity_policy = plan.severity_policy;
        auto& rec = records[m];
        if (m == 0) {
            rec.name = std::string(kStandardModel);
            cfg.augment.reset();
            cfg.augment_seed = 0;
        } else {
            const auto& c = plan.corruptions[m - 1];
            rec.name = c.name;
            cfg.augment = c.spec;
            cfg.augment_seed = augmentation_seed(plan.master_seed, c.name);
        }
        rec.cache_key = ArtifactCache::model_key(plan.arch, cfg, train_digest, table_digest);
        if (auto cached = cache.load_model(rec.cache_key)) {
            if (cached->dataset_digest != train_digest || !(cached->config == cfg))
                throw CacheCorruption(rec.cache_key, "checkpoint does not match its key's inputs");
            models[m] = std::move(cached);
            log("model " + rec.name + ": cached");
        } else if (auto failure = cache.load_divergence(rec.cache_key)) {
            rec.failure = *failure;
            log("model " + rec.name + ": diverged (cached)");
        } else {
            log("model " + rec.name + ": training");
            trained[m] = 1;
            try {
                models[m] = train(plan.arch, data.train, cfg);
                cache.store_model(rec.cache_key, *models[m]);
            } catch (const TrainingDiverged& e) {
                rec.failure = e.what();
                cache.store_divergence(rec.cache_key, rec.failure);
                log("model " + rec.name + ": " + rec.failure);
            }
        }
        if (models[m]) {
            rec.digest = models[m]->digest();
            rec.converged = models[m]->converged;
        }
    });

    // Steps 1 and 3: test conditions, built lazily on first uncached use.
    const auto n_cond = plan.corruptions.size() + 1;
    std::vector<Json> cond_desc(n_cond);
    std::vector<std::uint64_t> cond_seed(n_cond, 0);
    for (std::size_t k = 0; k < n_cond; ++k) {
        const PlanCorruption* c = k == 0 ? nullptr : &plan.corruptions[k - 1];
        if (c) cond_seed[k] = test_condition_seed(plan.master_seed, c->name);
        cond_desc[k] = condition_json(c, cond_seed[k], plan.severity_policy, table_digest);
    }
    std::vector<std::once_flag> cond_once(n_cond);
    std::vector<Dataset> cond_sets(n_cond);
    auto condition_set = [&](std::size_t k) -> const Dataset& {
        if (k == 0) return data.test;
        std::call_once(cond_once[k], [&] {
            cond_sets[k] = corrupt_dataset(data.test, plan.corruptions[k - 1].spec, cond_seed[k], plan.severity_policy);
        });
        return cond_sets[k];
    };

    // Step 4: every model on every condition.
    AccuracyTable table = [&] {
        std::vector<std::string> model_ids, cond_ids{std::string(kCleanCondition)};
        for (const auto& r : records) model_ids.push_back(r.name);
        for (const auto& c : plan.corruptions) cond_ids.push_back(c.name);
        return AccuracyTable(model_ids, cond_ids);
    }();
    std::vector<int> evaluated(n_models * n_cond, 0);
    parallel_for(n_models * n_cond, plan.workers, [&](std::size_t job) {
        const auto m = job / n_cond, k = job % n_cond;
        if (!models[m]) return;
        const auto key = ArtifactCache::eval_key(records[m].digest, test_digest, cond_desc[k]);
        if (auto acc = cache.load_eval(key)) {
            table.at(m, k) = *acc;
            return;
        }
        const double acc = evaluate(*models[m], condition_set(k));
        cache.store_eval(key, acc, Json{{"model", records[m].name}, {"condition", cond_desc[k]}});
        table.at(m, k) = acc;
        evaluated[job] = 1;
    });

    for (std::size_t m = 0; m < n_models; ++m) table.set_converged(records[m].name, records[m].converged);
    table.provenance() = Json{{"dataset_digest", test_digest},
                              {"train_dataset_digest", train_digest},
                              {"master_seed", plan.master_seed},
                              {"training_seed", training_seed(plan.master_seed)},
                              {"severity_table", table_digest},
                              {"ce_reference", std::string(kStandardModel)},
                              {"plan", plan.identity()}};

    // Steps 5 and 6.
    MatrixResult result;
    result.matrix = overlap_matrix_from_table(table);
    result.table = std::move(table);
    result.models = std::move(records);
    for (std::size_t m = 0; m < n_models; ++m) {
        if (trained[m])
            ++result.trainings_run;
        else
            ++result.trainings_cached;
    }
    for (std::size_t job = 0; job < evaluated.size(); ++job) {
        if (!models[job / n_cond]) continue;
        if (evaluated[job])
            ++result.evaluations_run;
        else
            ++result.evaluations_cached;
    }
    return result;
}

PairResult run_pair(const RunPlan& plan, std::string_view c1, std::string_view c2, const ProgressCallback& progress) {
    if (c1 == c2) throw ValidationError("run_pair needs two distinct corruption names");
    PairResult out;
    out.run = run_matrix(plan.restricted({std::string(c1), std::string(c2)}), progress);
    out.score = out.run.matrix.cell(c1, c2);
    return out;
}

ExternalRow evaluate_external(const TrainedModel& model, const std::vector<PlanCorruption>& corruptions,
                              const Dataset& test_set, std::uint64_t master_seed, const SeverityPolicy& policy) {
    test_set.validate();
    if (test_set.empty()) throw ValidationError("evaluate_external: empty test set");
    const auto& probe = test_set.images.front();
    if (probe.height() != model.arch.height || probe.width() != model.arch.width ||
        probe.channels() != model.arch.channels)
        throw ValidationError("evaluate_external: model expects " + model.arch.describe() + " but images are " +
                              std::to_string(probe.height()) + "x" + std::to_string(probe.width()) + "x" +
                              std::to_string(probe.channels()));
    if (test_set.num_classes > model.arch.classes)
        throw ValidationError("evaluate_external: dataset has more classes than the model");
    ExternalRow row;
    row.dataset_digest = test_set.digest();
    row.model_digest = model.digest();
    row.conditions.push_back(std::string(kCleanCondition));
    row.accuracies.push_back(evaluate(model, test_set));
    for (const auto& c : corruptions) {
        row.conditions.push_back(c.name);
        row.accuracies.push_back(
            evaluate(model, corrupt_dataset(test_set, c.spec, test_condition_seed(master_seed, c.name), policy)));
    }
    return row;
}

} // namespace cobench
