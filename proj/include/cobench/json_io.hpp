#pragma once

#include "cobench/corruptions.hpp"
#include "cobench/dataset.hpp"
#include "cobench/network.hpp"
#include "cobench/trainer.hpp"

#include <json.hpp>

namespace cobench {

using Json = nlohmann::json;

// Field-by-field conversions. Readers accept missing optional fields and fill
// defaults; unknown keys raise ValidationError so typos in configs surface.
Json to_json(const CorruptionSpec& spec);
CorruptionSpec corruption_spec_from_json(const Json& j);

Json to_json(const SeverityPolicy& policy);
SeverityPolicy severity_policy_from_json(const Json& j);

Json to_json(const ModelArch& arch);
ModelArch model_arch_from_json(const Json& j);

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const ProcShapesConfig& config);
ProcShapesConfig procshapes_config_from_json(const Json& j);

// Throws ValidationError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where);

} // namespace cobench
