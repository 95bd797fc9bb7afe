#include "cobench/trainer.hpp"

#include "cobench/digest.hpp"
#include "cobench/error.hpp"
#include "cobench/json_io.hpp"
#include "cobench/ppm.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

namespace cobench {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'B', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

Image hflipped(const Image& src) {
    Image out(src.height(), src.width(), src.channels());
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x)
            for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = src.at(y, src.width() - 1 - x, c);
    return out;
}

void check_compatible(const ModelArch& arch, const Dataset& ds, const char* what) {
    if (ds.empty()) throw ValidationError(std::string(what) + ": dataset is empty");
    const Image& img = ds.images.front();
    if (img.height() != arch.height || img.width() != arch.width || img.channels() != arch.channels)
        throw ValidationError(std::string(what) + ": dataset images " + std::to_string(img.height()) + "x" +
                              std::to_string(img.width()) + "x" + std::to_string(img.channels()) +
                              " do not match " + arch.describe());
    if (ds.num_classes > arch.classes)
        throw ValidationError(std::string(what) + ": dataset has " + std::to_string(ds.num_classes) +
                              " classes, model only " + std::to_string(arch.classes));
}

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    std::vector<std::uint8_t> out;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

    std::size_t pos() const { return pos_; }
    void need(std::size_t n, const char* what) const {
        if (pos_ + n > b_.size()) throw ParseError(std::string("checkpoint: truncated ") + what, pos_);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_body(const TrainedModel& m) {
    ByteWriter w;
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(m.arch.kind == ArchKind::mlp ? 0 : 1);
    for (int v : {m.arch.height, m.arch.width, m.arch.channels, m.arch.classes, m.arch.hidden, m.arch.conv1,
                  m.arch.conv2})
        w.u32(static_cast<std::uint32_t>(v));
    w.u64(m.params.size());
    for (float p : m.params) w.f32(p);
    const Json prov{{"config", to_json(m.config)},
                    {"dataset_digest", m.dataset_digest},
                    {"epoch_losses", m.epoch_losses},
                    {"final_train_accuracy", m.final_train_accuracy},
                    {"converged", m.converged}};
    const std::string text = prov.dump();
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text.data(), text.size());
    return std::move(w.out);
}

} // namespace

std::string_view to_string(AugmentMode mode) { return mode == AugmentMode::half ? "half" : "full"; }

AugmentMode parse_augment_mode(std::string_view name) {
    if (name == "half") return AugmentMode::half;
    if (name == "full") return AugmentMode::full;
    throw ValidationError("augment mode must be 'half' or 'full', got '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ValidationError("train config: epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ValidationError("train config: lr0 must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train config: momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ValidationError("train config: weight_decay must be >= 0");
    if (!(convergence_threshold >= 0.0 && convergence_threshold <= 1.0))
        throw ValidationError("train config: convergence_threshold must be in [0, 1]");
    for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
        if (lr_drop_epochs[i] < 0 || lr_drop_epochs[i] >= epochs)
            throw ValidationError("train config: drop epoch " + std::to_string(lr_drop_epochs[i]) +
                                  " must be in [0, epochs)");
        if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
            throw ValidationError("train config: lr_drop_epochs must be strictly increasing");
    }
    if (severity_policy.severity < 1 || severity_policy.severity > 5)
        throw ValidationError("train config: severity must be in 1..5");
}

double TrainConfig::learning_rate(int epoch) const {
    int drops = 0;
    for (int d : lr_drop_epochs)
        if (d <= epoch) ++drops;
    return lr0 / std::pow(10.0, drops);
}

std::vector<float> initialize_parameters(const ModelArch& arch, std::uint64_t seed) {
    std::vector<float> params(parameter_count(arch), 0.0f);
    SeededRng rng = SeededRng(seed).derive("init");
    for (const auto& block : parameter_layout(arch)) {
        if (!block.is_weight) continue;
        const double bound = std::sqrt(6.0 / static_cast<double>(block.fan_in));
        for (std::size_t i = block.offset; i < block.offset + block.size; ++i)
            params[i] = static_cast<float>(rng.uniform(-bound, bound));
    }
    return params;
}

TrainedModel train(const ModelArch& arch, const Dataset& train_set, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
    arch.validate();
    config.validate();
    train_set.validate();
    check_compatible(arch, train_set, "train");
    if (config.augment) SeverityTable::builtin().resolve(*config.augment, arch.height < arch.width ? arch.height : arch.width);

    TrainedModel model;
    model.arch = arch;
    model.config = config;
    model.dataset_digest = train_set.digest();
    model.params = initialize_parameters(arch, config.seed);

    const std::size_t n = train_set.size();
    const std::size_t P = model.params.size();
    std::vector<float> grads(P), velocity(P, 0.0f);
    std::vector<std::size_t> order(n);
    Workspace<float> ws;
    prepare_workspace(arch, ws);
    const std::span<const float> params_view(model.params);
    const auto layout = parameter_layout(arch);
    const float wd = static_cast<float>(config.weight_decay);
    const SeededRng shuffle_root = SeededRng(config.seed).derive("shuffle");
    const SeededRng flip_root = SeededRng(config.seed).derive("flip");
    const SeededRng augment_root(config.augment_seed);

    std::vector<Image> scratch;
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const float lr = static_cast<float>(config.learning_rate(epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        SeededRng shuffle = shuffle_root.derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<long long>(i - 1)))]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        const SeededRng flip_epoch = flip_root.derive(static_cast<std::uint64_t>(epoch));
        const SeededRng augment_epoch = augment_root.derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t b = std::min(n - start, static_cast<std::size_t>(config.batch_size));
            const std::size_t corrupted =
                !config.augment ? 0 : (config.augment_mode == AugmentMode::full ? b : (b + 1) / 2);
            std::fill(grads.begin(), grads.end(), 0.0f);
            const float inv_b = 1.0f / static_cast<float>(b);
            double batch_ce = 0.0;
            for (std::size_t p = 0; p < b; ++p) {
                const std::size_t idx = order[start + p];
                const Image* img = &train_set.images[idx];
                Image local;
                if (config.hflip && flip_epoch.derive(idx).next_double() < 0.5) {
                    local = hflipped(*img);
                    img = &local;
                }
                if (p < corrupted) {
                    local = apply_with_policy(*config.augment, config.severity_policy, *img,
                                              augment_epoch.derive(idx));
                    img = &local;
                }
                const auto logits = forward_sample<float>(arch, params_view, *img, ws);
                const int label = train_set.labels[idx];
                if (argmax<float>(logits) == label) ++correct;
                batch_ce += cross_entropy<float>(logits, label, ws.d_logits, inv_b);
                backward_sample<float>(arch, params_view, ws, grads);
            }
            const double loss =
                batch_ce / static_cast<double>(b) + weight_decay_term<float>(arch, params_view, config.weight_decay);
            if (!std::isfinite(loss)) throw TrainingDiverged(epoch, step);
            for (const auto& block : layout)
                if (block.is_weight && wd != 0.0f)
                    for (std::size_t i = block.offset; i < block.offset + block.size; ++i)
                        grads[i] += wd * model.params[i];
            for (std::size_t i = 0; i < P; ++i) {
                velocity[i] = static_cast<float>(config.momentum) * velocity[i] + grads[i];
                model.params[i] -= lr * velocity[i];
            }
            loss_sum += loss * static_cast<double>(b);
            ++step;
        }
        EpochReport report{epoch, lr, loss_sum / static_cast<double>(n),
                           static_cast<double>(correct) / static_cast<double>(n)};
        model.epoch_losses.push_back(report.mean_loss);
        if (on_epoch) on_epoch(report);
    }
    model.final_train_accuracy = evaluate(model, train_set);
    model.converged = config.epochs > 0 && model.final_train_accuracy >= config.convergence_threshold;
    return model;
}

std::vector<int> predict(const TrainedModel& model, const Dataset& dataset) {
    check_compatible(model.arch, dataset, "predict");
    Workspace<float> ws;
    prepare_workspace(model.arch, ws);
    std::vector<int> out;
    out.reserve(dataset.size());
    for (const auto& img : dataset.images)
        out.push_back(argmax<float>(forward_sample<float>(model.arch, model.params, img, ws)));
    return out;
}

double evaluate(const TrainedModel& model, const Dataset& test_set) {
    if (test_set.empty()) throw ValidationError("evaluate: test set is empty");
    if (test_set.labels.size() != test_set.images.size())
        throw ValidationError("evaluate: image and label counts differ");
    const auto predictions = predict(model, test_set);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == test_set.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

std::string TrainedModel::digest() const {
    const auto body = encode_body(*this);
    return Sha256().update(body).finish_hex();
}

std::vector<std::uint8_t> encode_checkpoint(const TrainedModel& model) {
    auto body = encode_body(model);
    const auto sum = Sha256().update(body).finish();
    body.insert(body.end(), sum.begin(), sum.end());
    return body;
}

TrainedModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(sizeof kCheckpointMagic, "magic");
    if (std::memcmp(magic.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw ParseError("checkpoint: bad magic", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), r.pos() - 4);
    TrainedModel m;
    const std::uint32_t kind = r.u32("arch kind");
    if (kind > 1) throw ParseError("checkpoint: unknown architecture kind", r.pos() - 4);
    m.arch.kind = kind == 0 ? ArchKind::mlp : ArchKind::cnn;
    for (int* field : {&m.arch.height, &m.arch.width, &m.arch.channels, &m.arch.classes, &m.arch.hidden,
                       &m.arch.conv1, &m.arch.conv2})
        *field = static_cast<int>(r.u32("arch descriptor"));
    const std::size_t arch_end = r.pos();
    std::size_t expected = 0;
    try {
        expected = parameter_count(m.arch);
    } catch (const ValidationError& e) {
        throw ParseError(std::string("checkpoint: invalid architecture: ") + e.what(), arch_end);
    }
    const std::uint64_t count = r.u64("parameter count");
    if (count != expected)
        throw ParseError("checkpoint: parameter count " + std::to_string(count) + " does not match architecture (" +
                             std::to_string(expected) + ")",
                         r.pos() - 8);
    r.need(count * 4, "parameters");
    m.params.resize(count);
    for (auto& p : m.params) p = r.f32("parameters");
    const std::uint32_t prov_len = r.u32("provenance length");
    const auto prov_bytes = r.take(prov_len, "provenance");
    const std::size_t body_end = r.pos();
    const auto stored = r.take(32, "digest");
    const auto actual = Sha256().update(bytes.subspan(0, body_end)).finish();
    if (!std::equal(stored.begin(), stored.end(), actual.begin()))
        throw ParseError("checkpoint: digest mismatch", body_end);
    if (r.pos() != bytes.size()) throw ParseError("checkpoint: trailing bytes", r.pos());
    try {
        const Json prov = Json::parse(prov_bytes.begin(), prov_bytes.end());
        m.config = train_config_from_json(prov.at("config"));
        m.dataset_digest = prov.at("dataset_digest").get<std::string>();
        m.epoch_losses = prov.at("epoch_losses").get<std::vector<double>>();
        m.final_train_accuracy = prov.at("final_train_accuracy").get<double>();
        m.converged = prov.at("converged").get<bool>();
    } catch (const std::exception& e) {
        throw ParseError(std::string("checkpoint: bad provenance block: ") + e.what(), body_end - prov_len);
    }
    return m;
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(model));
}

TrainedModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

} // namespace cobench
