#include "cobench/json_io.hpp"

#include "cobench/error.hpp"

#include <algorithm>

namespace cobench {

namespace {

template <typename V>
V get_or(const Json& j, const char* key, V fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("field '") + key + "': " + e.what());
    }
}

} // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError(std::string(where) + ": unknown key '" + key + "'");
}

Json to_json(const CorruptionSpec& spec) {
    Json j{{"id", std::string(to_string(spec.id))}, {"severity", spec.severity}};
    if (!spec.params.empty()) j["params"] = spec.params;
    return j;
}

CorruptionSpec corruption_spec_from_json(const Json& j) {
    if (j.is_string()) return CorruptionSpec{corruption_id_or_throw(j.get<std::string>()), 3, {}};
    reject_unknown_keys(j, {"id", "severity", "params", "name"}, "corruption spec");
    if (!j.contains("id")) throw ValidationError("corruption spec: missing 'id'");
    CorruptionSpec spec;
    spec.id = corruption_id_or_throw(j.at("id").get<std::string>());
    spec.severity = get_or(j, "severity", 3);
    if (j.contains("params")) {
        for (const auto& [k, v] : j.at("params").items()) {
            if (!v.is_number()) throw ValidationError("corruption spec: parameter '" + k + "' must be numeric");
            spec.params[k] = v.get<double>();
        }
    }
    return spec;
}

Json to_json(const SeverityPolicy& policy) {
    return Json{{"mode", std::string(to_string(policy.mode))}, {"severity", policy.severity}};
}

SeverityPolicy severity_policy_from_json(const Json& j) {
    reject_unknown_keys(j, {"mode", "severity"}, "severity policy");
    SeverityPolicy p;
    const auto mode = get_or<std::string>(j, "mode", "fixed");
    if (mode == "fixed")
        p.mode = SeverityPolicy::Mode::fixed;
    else if (mode == "resample")
        p.mode = SeverityPolicy::Mode::resample;
    else
        throw ValidationError("severity policy: mode must be 'fixed' or 'resample'");
    p.severity = get_or(j, "severity", 3);
    if (p.severity < 1 || p.severity > 5) throw ValidationError("severity policy: severity must be in 1..5");
    return p;
}

Json to_json(const ModelArch& arch) {
    return Json{{"kind", std::string(to_string(arch.kind))},
                {"height", arch.height},
                {"width", arch.width},
                {"channels", arch.channels},
                {"classes", arch.classes},
                {"hidden", arch.hidden},
                {"conv1", arch.conv1},
                {"conv2", arch.conv2}};
}

ModelArch model_arch_from_json(const Json& j) {
    reject_unknown_keys(j, {"kind", "height", "width", "channels", "classes", "hidden", "conv1", "conv2"}, "arch");
    ModelArch a;
    a.kind = parse_arch_kind(get_or<std::string>(j, "kind", "cnn"));
    a.height = get_or(j, "height", a.height);
    a.width = get_or(j, "width", a.width);
    a.channels = get_or(j, "channels", a.channels);
    a.classes = get_or(j, "classes", a.classes);
    a.hidden = get_or(j, "hidden", a.hidden);
    a.conv1 = get_or(j, "conv1", a.conv1);
    a.conv2 = get_or(j, "conv2", a.conv2);
    return a;
}

Json to_json(const TrainConfig& c) {
    Json j{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr0", c.lr0},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"lr_drop_epochs", c.lr_drop_epochs},
           {"augment", c.augment ? to_json(*c.augment) : Json(nullptr)},
           {"augment_mode", std::string(to_string(c.augment_mode))},
           {"severity_policy", to_json(c.severity_policy)},
           {"hflip", c.hflip},
           {"convergence_threshold", c.convergence_threshold},
           {"seed", c.seed},
           {"augment_seed", c.augment_seed}};
    return j;
}

TrainConfig train_config_from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"epochs", "batch_size", "lr0", "momentum", "weight_decay", "lr_drop_epochs", "augment",
                         "augment_mode", "severity_policy", "hflip", "convergence_threshold", "seed", "augment_seed"},
                        "train config");
    TrainConfig c;
    c.epochs = get_or(j, "epochs", c.epochs);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.lr0 = get_or(j, "lr0", c.lr0);
    c.momentum = get_or(j, "momentum", c.momentum);
    c.weight_decay = get_or(j, "weight_decay", c.weight_decay);
    c.lr_drop_epochs = get_or(j, "lr_drop_epochs", c.lr_drop_epochs);
    if (j.contains("augment") && !j.at("augment").is_null()) c.augment = corruption_spec_from_json(j.at("augment"));
    c.augment_mode = parse_augment_mode(get_or<std::string>(j, "augment_mode", "half"));
    if (j.contains("severity_policy")) c.severity_policy = severity_policy_from_json(j.at("severity_policy"));
    c.hflip = get_or(j, "hflip", c.hflip);
    c.convergence_threshold = get_or(j, "convergence_threshold", c.convergence_threshold);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.augment_seed = get_or<std::uint64_t>(j, "augment_seed", c.augment_seed);
    c.validate();
    return c;
}

Json to_json(const ProcShapesConfig& c) {
    return Json{{"classes", c.classes}, {"per_class", c.per_class}, {"side", c.side}, {"seed", c.seed}};
}

ProcShapesConfig procshapes_config_from_json(const Json& j) {
    reject_unknown_keys(j, {"kind", "classes", "per_class", "side", "seed"}, "procshapes config");
    ProcShapesConfig c;
    c.classes = get_or(j, "classes", c.classes);
    c.per_class = get_or(j, "per_class", c.per_class);
    c.side = get_or(j, "side", c.side);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    return c;
}

} // namespace cobench
