// cobench command-line driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
// Option precedence: command-line flag > COBENCH_CACHE_DIR (cache only) >
// config file value > built-in default.

#include "cobench/analysis.hpp"
#include "cobench/digest.hpp"
#include "cobench/error.hpp"
#include "cobench/pipeline.hpp"
#include "cobench/ppm.hpp"
#include "cobench/rng.hpp"
#include "cobench/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace cobench;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

// Collects output files and writes manifest.json last.
class Manifest {
public:
    Manifest(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)), started_(utc_now()) {}

    void config(const fs::path& path) { config_digest_ = sha256_file_hex(path); }
    void config_text(const std::string& text) { config_digest_ = sha256_hex(text); }

    fs::path write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        write_file_atomic(path, bytes_of(content));
        add(path);
        return path;
    }
    void add(const fs::path& path) { outputs_.push_back(path); }

    void finish() const {
        Json outs = Json::array();
        for (const auto& p : outputs_)
            outs.push_back(Json{{"path", fs::relative(p, dir_).generic_string()},
                                {"sha256", sha256_file_hex(p)},
                                {"bytes", fs::file_size(p)}});
        const Json j{{"tool", "cobench"},
                     {"version", kVersion},
                     {"command", command_},
                     {"config_digest", config_digest_},
                     {"started", started_},
                     {"finished", utc_now()},
                     {"outputs", std::move(outs)}};
        write_file_atomic(dir_ / "manifest.json", bytes_of(j.dump(2) + "\n"));
    }

private:
    std::string command_;
    fs::path dir_;
    std::string started_;
    std::string config_digest_;
    std::vector<fs::path> outputs_;
};

Json read_json(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return Json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

CorruptionId id_or_usage(const std::string& name) {
    if (auto id = parse_corruption_id(name)) return *id;
    std::string list;
    for (auto id : all_corruption_ids()) list += (list.empty() ? "" : ", ") + std::string(to_string(id));
    throw UsageError("unknown corruption id '" + name + "'; valid ids: " + list);
}

CorruptionSpec make_spec(const std::string& id, int severity, const std::vector<std::string>& params) {
    CorruptionSpec spec{id_or_usage(id), severity, {}};
    for (const auto& kv : params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + kv + "'");
        char* end = nullptr;
        const auto value = kv.substr(eq + 1);
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0') throw UsageError("--param " + kv + ": value is not a number");
        spec.params[kv.substr(0, eq)] = v;
    }
    SeverityTable::builtin().resolve(spec, 32);
    return spec;
}

SeverityPolicy make_policy(const std::string& mode, int severity) {
    return severity_policy_from_json(Json{{"mode", mode}, {"severity", severity}});
}

// generate-data file names inside a dataset directory.
struct DataFiles {
    fs::path train_images, train_labels, test_images, test_labels;
    explicit DataFiles(const fs::path& dir)
        : train_images(dir / "train-images.idx"), train_labels(dir / "train-labels.idx"),
          test_images(dir / "test-images.idx"), test_labels(dir / "test-labels.idx") {}
};

DatasetPair load_data_dir(const fs::path& dir) {
    const DataFiles f(dir);
    DatasetSpec spec;
    spec.kind = DatasetSpec::Kind::idx;
    spec.train_images = f.train_images;
    spec.train_labels = f.train_labels;
    spec.test_images = f.test_images;
    spec.test_labels = f.test_labels;
    return spec.load();
}

fs::path cache_override(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("COBENCH_CACHE_DIR"); env && *env) return env;
    return {};
}

RunPlan load_plan(const fs::path& path, const std::string& cache_flag, int workers) {
    RunPlan plan = RunPlan::load(path);
    if (auto c = cache_override(cache_flag); !c.empty()) plan.cache_dir = c;
    if (workers >= 0) plan.workers = workers;
    return plan;
}

void progress_to_stderr(const std::string& msg) { std::cerr << "[cobench] " << msg << "\n"; }

PlanCorruption candidate_from(const RunPlan& plan, const std::string& name, int severity) {
    for (const auto& c : plan.corruptions)
        if (c.name == name) return c;
    return PlanCorruption{name, make_spec(name, severity, {})};
}

std::vector<std::string> benchmark_from(const RunPlan& plan, const std::string& list, const std::string& candidate) {
    if (!list.empty()) {
        auto names = split_list(list);
        for (const auto& n : names) plan.corruption(n);
        return names;
    }
    std::vector<std::string> names;
    for (const auto& c : plan.corruptions)
        if (c.name != candidate) names.push_back(c.name);
    return names;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corruption overlap benchmark auditing"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::function<void()> action;

    // ---------------------------------------------------------------- generate-data
    auto* gen = app.add_subcommand("generate-data", "Render the ProcShapes dataset to IDX files");
    ProcShapesConfig gen_cfg;
    std::string gen_out;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--classes", gen_cfg.classes, "Number of shape classes (1-10)")->capture_default_str();
    gen->add_option("--per-class", gen_cfg.per_class, "Images per class")->capture_default_str();
    gen->add_option("--side", gen_cfg.side, "Image side in pixels")->capture_default_str();
    gen->add_option("--seed", gen_cfg.seed, "Generator seed")->capture_default_str();
    gen->callback([&] {
        action = [&] {
            const auto data = generate_procshapes(gen_cfg);
            Manifest man("generate-data", gen_out);
            man.config_text(to_json(gen_cfg).dump());
            const DataFiles f(gen_out);
            write_idx(data.train, f.train_images, f.train_labels);
            write_idx(data.test, f.test_images, f.test_labels);
            for (const auto& p : {f.train_images, f.train_labels, f.test_images, f.test_labels}) man.add(p);
            man.write("dataset.json", Json{{"procshapes", to_json(gen_cfg)},
                                           {"train_digest", data.train.digest()},
                                           {"test_digest", data.test.digest()},
                                           {"train_size", data.train.size()},
                                           {"test_size", data.test.size()}}
                                              .dump(2) + "\n");
            man.finish();
            std::cout << "wrote " << data.train.size() << " train and " << data.test.size() << " test images to "
                      << gen_out << "\n";
        };
    });

    // ---------------------------------------------------------------- corrupt
    auto* cor = app.add_subcommand("corrupt", "Apply one corruption to a PPM image or an IDX dataset");
    std::string cor_id, cor_input, cor_labels, cor_out, cor_mode = "fixed";
    int cor_sev = 3;
    std::uint64_t cor_seed = 0;
    std::vector<std::string> cor_params;
    cor->add_option("input", cor_input, "Input .ppm image or IDX image file")->required()->check(CLI::ExistingFile);
    cor->add_option("--id", cor_id, "Corruption id")->required();
    cor->add_option("--severity", cor_sev, "Severity 1-5")->capture_default_str();
    cor->add_option("--seed", cor_seed, "Seed")->capture_default_str();
    cor->add_option("--param", cor_params, "Parameter override key=value (repeatable)")->allow_extra_args(false);
    cor->add_option("--policy", cor_mode, "Severity policy for datasets: fixed or resample")->capture_default_str();
    cor->add_option("--labels", cor_labels, "IDX label file (dataset input)")->check(CLI::ExistingFile);
    cor->add_option("--out", cor_out, "Output file (default: next to the input)");
    cor->callback([&] {
        action = [&] {
            const auto spec = make_spec(cor_id, cor_sev, cor_params);
            const fs::path in = cor_input;
            const bool dataset = !cor_labels.empty();
            fs::path out = cor_out;
            if (out.empty())
                out = in.parent_path() / (in.stem().string() + "-" + cor_id + "-s" + std::to_string(cor_sev) +
                                          (dataset ? ".idx" : ".ppm"));
            Manifest man("corrupt", out.parent_path().empty() ? fs::path(".") : out.parent_path());
            man.config_text(to_json(spec).dump() + "|" + std::to_string(cor_seed) + "|" + cor_mode);
            if (dataset) {
                const auto ds = load_idx(in, cor_labels);
                const auto result = corrupt_dataset(ds, spec, cor_seed, make_policy(cor_mode, cor_sev));
                fs::path labels_out = out;
                labels_out.replace_extension(".labels.idx");
                write_idx(result, out, labels_out);
                man.add(out);
                man.add(labels_out);
            } else {
                const auto image = read_ppm(in);
                write_ppm(apply(spec, image, SeededRng(cor_seed)), out);
                man.add(out);
            }
            man.finish();
            std::cout << out.string() << "\n";
        };
    });

    // ---------------------------------------------------------------- train
    auto* trn = app.add_subcommand("train", "Train one model on a dataset directory");
    std::string trn_data, trn_out, trn_config, trn_arch = "cnn", trn_augment, trn_mode;
    int trn_epochs = -1, trn_sev = 3;
    std::uint64_t trn_seed = 1, trn_aug_seed = 1;
    trn->add_option("--data", trn_data, "Dataset directory from generate-data")->required()->check(CLI::ExistingDirectory);
    trn->add_option("--out", trn_out, "Checkpoint path")->required();
    trn->add_option("--config", trn_config, "Training config JSON")->check(CLI::ExistingFile);
    trn->add_option("--arch", trn_arch, "mlp or cnn")->capture_default_str();
    trn->add_option("--epochs", trn_epochs, "Override the number of epochs");
    std::vector<int> trn_drops;
    trn->add_option("--lr-drops", trn_drops, "Epochs at which the learning rate drops tenfold")->delimiter(',');
    trn->add_option("--augment", trn_augment, "Corruption id used for augmentation");
    trn->add_option("--severity", trn_sev, "Augmentation severity")->capture_default_str();
    trn->add_option("--augment-mode", trn_mode, "half or full");
    trn->add_option("--seed", trn_seed, "Initialisation/shuffle seed")->capture_default_str();
    trn->add_option("--augment-seed", trn_aug_seed, "Augmentation seed")->capture_default_str();
    trn->callback([&] {
        action = [&] {
            TrainConfig cfg = trn_config.empty() ? TrainConfig{} : train_config_from_json(read_json(trn_config));
            if (trn->count("--epochs")) {
                cfg.epochs = trn_epochs;
                std::erase_if(cfg.lr_drop_epochs, [&](int d) { return d >= cfg.epochs; });
            }
            if (trn->count("--lr-drops")) cfg.lr_drop_epochs = trn_drops;
            if (!trn_augment.empty()) cfg.augment = make_spec(trn_augment, trn_sev, {});
            if (!trn_mode.empty()) cfg.augment_mode = parse_augment_mode(trn_mode);
            if (trn->count("--seed") || trn_config.empty()) cfg.seed = trn_seed;
            if (trn->count("--augment-seed") || trn_config.empty()) cfg.augment_seed = trn_aug_seed;
            cfg.validate();
            const auto data = load_data_dir(trn_data);
            ModelArch arch;
            arch.kind = parse_arch_kind(trn_arch);
            const auto& probe = data.train.images.front();
            arch.height = probe.height();
            arch.width = probe.width();
            arch.channels = probe.channels();
            arch.classes = data.train.num_classes;
            const auto model = train(arch, data.train, cfg, [](const EpochReport& r) {
                std::cerr << "epoch " << r.epoch + 1 << " lr " << r.learning_rate << " loss " << r.mean_loss
                          << " acc " << r.running_accuracy << "\n";
            });
            const fs::path out = trn_out;
            Manifest man("train", out.parent_path().empty() ? fs::path(".") : out.parent_path());
            man.config_text(to_json(cfg).dump() + to_json(arch).dump());
            save_checkpoint(model, out);
            man.add(out);
            const double test_acc = evaluate(model, data.test);
            fs::path metrics = out;
            metrics.replace_extension(".metrics.json");
            man.write(metrics.filename().string(), Json{{"model_digest", model.digest()},
                                                        {"train_accuracy", model.final_train_accuracy},
                                                        {"test_accuracy", test_acc},
                                                        {"converged", model.converged},
                                                        {"epoch_losses", model.epoch_losses}}
                                                       .dump(2) + "\n");
            man.finish();
            std::cout << "test accuracy " << test_acc << " (train " << model.final_train_accuracy << ")\n";
        };
    });

    // ---------------------------------------------------------------- eval
    auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on clean and corrupted test sets");
    std::string evl_model, evl_data, evl_out, evl_corr, evl_join, evl_name;
    std::uint64_t evl_seed = 1;
    int evl_sev = 3;
    evl->add_option("--model", evl_model, "Checkpoint")->required()->check(CLI::ExistingFile);
    evl->add_option("--data", evl_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    evl->add_option("--corruptions", evl_corr, "Comma-separated corruption ids");
    evl->add_option("--severity", evl_sev, "Severity of the corrupted sets")->capture_default_str();
    evl->add_option("--master-seed", evl_seed, "Master seed fixing the corrupted test sets")->capture_default_str();
    evl->add_option("--join", evl_join, "Accuracy table JSON to append the row to")->check(CLI::ExistingFile);
    evl->add_option("--name", evl_name, "Row name when joining");
    evl->add_option("--out", evl_out, "Output directory")->required();
    evl->callback([&] {
        action = [&] {
            const auto model = load_checkpoint(evl_model);
            const auto data = load_data_dir(evl_data);
            std::vector<PlanCorruption> cs;
            for (const auto& id : split_list(evl_corr)) cs.push_back({id, make_spec(id, evl_sev, {})});
            const auto row = evaluate_external(model, cs, data.test, evl_seed, SeverityPolicy{SeverityPolicy::Mode::fixed, evl_sev});
            Manifest man("eval", evl_out);
            man.config_text(evl_corr + "|" + std::to_string(evl_seed) + "|" + row.model_digest);
            Json rj{{"model_digest", row.model_digest}, {"dataset_digest", row.dataset_digest}, {"accuracy", Json::object()}};
            for (std::size_t i = 0; i < row.conditions.size(); ++i) {
                rj["accuracy"][row.conditions[i]] = row.accuracies[i];
                std::cout << row.conditions[i] << " " << row.accuracies[i] << "\n";
            }
            man.write("row.json", rj.dump(2) + "\n");
            if (!evl_join.empty()) {
                auto table = AccuracyTable::from_json(read_json(evl_join));
                std::vector<double> values;
                for (const auto& c : table.conditions()) {
                    const auto it = std::find(row.conditions.begin(), row.conditions.end(), c);
                    if (it == row.conditions.end()) throw ValidationError("row has no condition '" + c + "'");
                    values.push_back(row.accuracies[static_cast<std::size_t>(it - row.conditions.begin())]);
                }
                table.add_row(evl_name.empty() ? fs::path(evl_model).stem().string() : evl_name, values,
                              model.converged, row.dataset_digest);
                man.write("accuracy.json", table.to_json().dump(2) + "\n");
                man.write("accuracy.csv", table.to_csv());
            }
            man.finish();
        };
    });

    // ---------------------------------------------------------------- matrix
    auto* mat = app.add_subcommand("matrix", "Train, evaluate and compute the full overlap matrix");
    std::string mat_plan, mat_out, mat_cache;
    int mat_workers = -1, mat_cell = 16;
    bool mat_resume = false;
    mat->add_option("--plan", mat_plan, "Run plan JSON")->required()->check(CLI::ExistingFile);
    mat->add_option("--out", mat_out, "Output directory")->required();
    mat->add_option("--cache-dir", mat_cache, "Artifact cache (overrides COBENCH_CACHE_DIR and the plan)");
    mat->add_option("--workers", mat_workers, "Worker threads (default: plan value, else logical cores)");
    mat->add_option("--cell-px", mat_cell, "Heatmap cell size")->capture_default_str();
    mat->add_flag("--resume", mat_resume, "Reuse cached artifacts (always on; accepted for clarity)");
    mat->callback([&] {
        action = [&] {
            const auto plan = load_plan(mat_plan, mat_cache, mat_workers);
            const auto r = run_matrix(plan, progress_to_stderr);
            Manifest man("matrix", mat_out);
            man.config(mat_plan);
            man.write("accuracy.csv", r.table.to_csv());
            man.write("accuracy.json", r.table.to_json().dump(2) + "\n");
            man.write("overlap.csv", r.matrix.to_csv());
            man.write("overlap.json", r.matrix.to_json().dump(2) + "\n");
            const auto heat = fs::path(mat_out) / "heatmap.ppm";
            write_ppm(render_heatmap(r.matrix, mat_cell), heat);
            man.add(heat);
            Json models = Json::array();
            int failed = 0;
            for (const auto& m : r.models) {
                models.push_back(Json{{"name", m.name}, {"cache_key", m.cache_key}, {"digest", m.digest},
                                      {"converged", m.converged}, {"failure", m.failure}});
                if (!m.failure.empty()) {
                    ++failed;
                    std::cerr << "warning: model " << m.name << " failed: " << m.failure << "\n";
                } else if (!m.converged) {
                    std::cerr << "warning: model " << m.name << " did not converge\n";
                }
            }
            man.write("run.json", Json{{"models", std::move(models)},
                                       {"trainings_run", r.trainings_run},
                                       {"trainings_cached", r.trainings_cached},
                                       {"evaluations_run", r.evaluations_run},
                                       {"evaluations_cached", r.evaluations_cached},
                                       {"accuracy_digest", r.table.digest()},
                                       {"overlap_digest", r.matrix.digest()}}
                                      .dump(2) + "\n");
            man.finish();
            std::cout << r.matrix.to_csv();
            std::cerr << "trainings run " << r.trainings_run << ", cached " << r.trainings_cached
                      << "; evaluations run " << r.evaluations_run << ", cached " << r.evaluations_cached << "\n";
            if (failed == static_cast<int>(r.models.size())) throw std::runtime_error("every model failed to train");
        };
    });

    // ---------------------------------------------------------------- pair
    auto* par = app.add_subcommand("pair", "Overlap score of two corruptions of a plan");
    std::string par_plan, par_out, par_cache, par_c1, par_c2;
    int par_workers = -1;
    par->add_option("--plan", par_plan, "Run plan JSON")->required()->check(CLI::ExistingFile);
    par->add_option("c1", par_c1, "First corruption name")->required();
    par->add_option("c2", par_c2, "Second corruption name")->required();
    par->add_option("--out", par_out, "Output directory")->required();
    par->add_option("--cache-dir", par_cache, "Artifact cache");
    par->add_option("--workers", par_workers, "Worker threads");
    par->callback([&] {
        action = [&] {
            auto plan = load_plan(par_plan, par_cache, par_workers);
            for (const auto* n : {&par_c1, &par_c2}) {
                bool found = false;
                for (const auto& c : plan.corruptions) found = found || c.name == *n;
                if (!found) plan.corruptions.push_back({*n, make_spec(*n, plan.severity_policy.severity, {})});
            }
            const auto r = run_pair(plan, par_c1, par_c2, progress_to_stderr);
            Manifest man("pair", par_out);
            man.config(par_plan);
            Json j{{"c1", par_c1}, {"c2", par_c2}, {"validity", std::string(to_string(r.score.validity))}};
            j["score"] = r.score.valid() ? Json(r.score.score) : Json(nullptr);
            j["pre_clamp"] = r.score.pre_clamp;
            man.write("pair.json", j.dump(2) + "\n");
            man.write("accuracy.csv", r.run.table.to_csv());
            man.finish();
            std::cout << par_c1 << " " << par_c2 << " "
                      << (r.score.valid() ? std::to_string(r.score.score) : std::string(to_string(r.score.validity)))
                      << "\n";
        };
    });

    // ---------------------------------------------------------------- balance
    auto* bal = app.add_subcommand("balance", "Mean overlap per corruption and unbalance verdict");
    std::string bal_matrix, bal_out;
    double bal_threshold = kBalanceThreshold;
    bal->add_option("--matrix", bal_matrix, "overlap.json")->required()->check(CLI::ExistingFile);
    bal->add_option("--threshold", bal_threshold, "Dispersion threshold")->capture_default_str();
    bal->add_option("--out", bal_out, "Output directory")->required();
    bal->callback([&] {
        action = [&] {
            const auto report = balance_report(OverlapMatrix::from_json(read_json(bal_matrix)), bal_threshold);
            Manifest man("balance", bal_out);
            man.config(bal_matrix);
            man.write("balance.json", report.to_json().dump(2) + "\n");
            man.write("balance.txt", report.to_text());
            man.finish();
            std::cout << report.to_text();
        };
    });

    // ---------------------------------------------------------------- coverage / admit
    struct AuditOptions {
        std::string plan, out, cache, candidate, benchmark;
        int workers = -1, seeds = kCoverageSeeds, severity = 3;
        double tau = kCoverageTau;
    };
    AuditOptions cov_opt, adm_opt;
    auto add_audit = [&](CLI::App* cmd, AuditOptions& o) {
        cmd->add_option("--plan", o.plan, "Run plan JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--candidate", o.candidate, "Candidate corruption (plan name or id)")->required();
        cmd->add_option("--benchmark", o.benchmark, "Comma-separated benchmark names (default: the plan's others)");
        cmd->add_option("--tau", o.tau, "Coverage threshold")->capture_default_str();
        cmd->add_option("--seeds", o.seeds, "Independent repetitions")->capture_default_str();
        cmd->add_option("--severity", o.severity, "Candidate severity when given as an id")->capture_default_str();
        cmd->add_option("--out", o.out, "Output directory")->required();
        cmd->add_option("--cache-dir", o.cache, "Artifact cache");
        cmd->add_option("--workers", o.workers, "Worker threads");
    };
    auto* cov = app.add_subcommand("coverage", "Is a candidate corruption covered by a benchmark?");
    add_audit(cov, cov_opt);
    cov->callback([&] {
        action = [&] {
            const auto plan = load_plan(cov_opt.plan, cov_opt.cache, cov_opt.workers);
            const auto cand = candidate_from(plan, cov_opt.candidate, cov_opt.severity);
            const auto bench = benchmark_from(plan, cov_opt.benchmark, cand.name);
            const auto report = coverage_check(cand, bench, plan, cov_opt.tau, cov_opt.seeds, progress_to_stderr);
            Manifest man("coverage", cov_opt.out);
            man.config(cov_opt.plan);
            man.write("coverage.json", report.to_json().dump(2) + "\n");
            man.write("coverage.txt", report.to_text());
            man.finish();
            std::cout << report.to_text();
        };
    });
    auto* adm = app.add_subcommand("admit", "Admission rule: add a corruption only if it overlaps nothing");
    add_audit(adm, adm_opt);
    adm->callback([&] {
        action = [&] {
            const auto plan = load_plan(adm_opt.plan, adm_opt.cache, adm_opt.workers);
            const auto cand = candidate_from(plan, adm_opt.candidate, adm_opt.severity);
            const auto bench = benchmark_from(plan, adm_opt.benchmark, cand.name);
            const auto d = admission_check(cand, bench, plan, adm_opt.tau, adm_opt.seeds, progress_to_stderr);
            Manifest man("admit", adm_opt.out);
            man.config(adm_opt.plan);
            man.write("admission.json", d.to_json().dump(2) + "\n");
            man.write("admission.txt", d.to_text());
            man.finish();
            std::cout << d.to_text();
        };
    });

    // ---------------------------------------------------------------- report
    auto* rep = app.add_subcommand("report", "Mean CE over two corruption sets with gains vs a baseline");
    std::string rep_table, rep_out, rep_set1, rep_set2, rep_extra, rep_models, rep_ref = "standard",
                                                                                rep_base = "standard";
    bool rep_errors = false;
    int rep_decimals = 0;
    rep->add_option("--table", rep_table, "Accuracy table (.csv or .json)")->required()->check(CLI::ExistingFile);
    rep->add_flag("--errors", rep_errors, "Table entries are error rates rather than accuracies");
    rep->add_option("--set1", rep_set1, "Comma-separated conditions")->required();
    rep->add_option("--set2", rep_set2, "Comma-separated conditions")->required();
    rep->add_option("--extra", rep_extra, "Extra single-condition CE columns");
    rep->add_option("--models", rep_models, "Rows to report (default: all)");
    rep->add_option("--reference", rep_ref, "CE reference row")->capture_default_str();
    rep->add_option("--baseline", rep_base, "Row the gains are measured against")->capture_default_str();
    rep->add_option("--decimals", rep_decimals, "Decimal places")->capture_default_str();
    rep->add_option("--out", rep_out, "Output directory")->required();
    rep->callback([&] {
        action = [&] {
            const fs::path path = rep_table;
            AccuracyTable table = path.extension() == ".json"
                                      ? AccuracyTable::from_json(read_json(path))
                                      : AccuracyTable::from_csv([&] {
                                            const auto b = read_file_bytes(path);
                                            return std::string(b.begin(), b.end());
                                        }());
            const auto errors = rep_errors ? table : to_error_table(table);
            const auto report = partition_compare(errors, split_list(rep_set1), split_list(rep_set2), rep_ref,
                                                  rep_base, split_list(rep_extra), split_list(rep_models));
            Manifest man("report", rep_out);
            man.config(path);
            man.write("report.json", report.to_json().dump(2) + "\n");
            man.write("report.txt", report.to_text(rep_decimals));
            man.finish();
            std::cout << report.to_text(rep_decimals);
        };
    });

    // ---------------------------------------------------------------- render-heatmap
    auto* hm = app.add_subcommand("render-heatmap", "Render overlap.json as a PPM heatmap");
    std::string hm_matrix, hm_out;
    int hm_cell = 16;
    hm->add_option("--matrix", hm_matrix, "overlap.json")->required()->check(CLI::ExistingFile);
    hm->add_option("--out", hm_out, "Output .ppm")->required();
    hm->add_option("--cell-px", hm_cell, "Cell size in pixels")->capture_default_str();
    hm->callback([&] {
        action = [&] {
            const fs::path out = hm_out;
            Manifest man("render-heatmap", out.parent_path().empty() ? fs::path(".") : out.parent_path());
            man.config(hm_matrix);
            write_ppm(render_heatmap(OverlapMatrix::from_json(read_json(hm_matrix)), hm_cell), out);
            man.add(out);
            man.finish();
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (action) action();
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
