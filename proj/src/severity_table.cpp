#include "cobench/corruptions.hpp"

#include "severity_table_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cobench {

namespace {

constexpr std::array kAllIds = {
    CorruptionId::gaussian_noise, CorruptionId::shot_noise, CorruptionId::impulse_noise, CorruptionId::defocus_blur,
    CorruptionId::motion_blur,    CorruptionId::zoom_blur,  CorruptionId::glass_blur,    CorruptionId::brightness,
    CorruptionId::contrast,       CorruptionId::fog,        CorruptionId::pixelate,      CorruptionId::jpeg_proxy,
    CorruptionId::elastic,        CorruptionId::border,     CorruptionId::obstruction,
};

constexpr std::array<std::string_view, kAllIds.size()> kNames = {
    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur", "motion_blur",
    "zoom_blur",      "glass_blur", "brightness",    "contrast",     "fog",
    "pixelate",       "jpeg_proxy", "elastic",       "border",       "obstruction",
};

std::string format_value(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::span<const CorruptionId> all_corruption_ids() { return kAllIds; }

std::string_view to_string(CorruptionId id) { return kNames[static_cast<std::size_t>(id)]; }

std::optional<CorruptionId> parse_corruption_id(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name) return kAllIds[i];
    return std::nullopt;
}

std::string valid_corruption_ids() {
    std::string s;
    for (auto name : kNames) {
        if (!s.empty()) s += ", ";
        s += name;
    }
    return s;
}

CorruptionId corruption_id_or_throw(std::string_view name) {
    if (auto id = parse_corruption_id(name)) return *id;
    throw ConfigError("unknown corruption id '" + std::string(name) + "'; valid ids: " + valid_corruption_ids());
}

std::string_view to_string(SeverityPolicy::Mode mode) {
    return mode == SeverityPolicy::Mode::fixed ? "fixed" : "resample";
}

std::string CorruptionSpec::describe() const {
    std::string s(to_string(id));
    s += "@" + std::to_string(severity);
    for (const auto& [k, v] : params) s += "," + k + "=" + format_value(v);
    return s;
}

const SeverityTable& SeverityTable::builtin() {
    static const SeverityTable table = parse(detail::kBuiltinSeverityTable);
    return table;
}

SeverityTable SeverityTable::parse(std::string_view text) {
    SeverityTable table;
    std::size_t offset = 0;
    while (offset < text.size()) {
        std::size_t end = text.find('\n', offset);
        if (end == std::string_view::npos) end = text.size();
        const std::string line(text.substr(offset, end - offset));
        const std::size_t line_start = offset;
        offset = end + 1;

        std::istringstream is(line);
        std::string id_name;
        if (!(is >> id_name) || id_name.starts_with('#')) continue;

        const auto id = parse_corruption_id(id_name);
        if (!id) throw ParseError("severity table: unknown corruption '" + id_name + "'", line_start);
        Row row;
        std::string unit;
        if (!(is >> row.param >> unit)) throw ParseError("severity table: missing parameter or unit", line_start);
        if (unit == "px224")
            row.spatial = true;
        else if (unit != "abs")
            throw ParseError("severity table: unknown unit '" + unit + "'", line_start);
        for (double& v : row.values)
            if (!(is >> v) || !std::isfinite(v))
                throw ParseError("severity table: expected 5 numeric values for " + id_name + "." + row.param,
                                 line_start);
        std::string extra;
        if (is >> extra && !extra.starts_with('#'))
            throw ParseError("severity table: trailing token '" + extra + "'", line_start);
        auto& rows = table.rows_[*id];
        for (const auto& existing : rows)
            if (existing.param == row.param)
                throw ParseError("severity table: duplicate row " + id_name + "." + row.param, line_start);
        rows.push_back(std::move(row));
    }
    for (auto id : kAllIds)
        if (!table.rows_.contains(id))
            throw ParseError("severity table: no rows for '" + std::string(to_string(id)) + "'", text.size());
    return table;
}

SeverityTable SeverityTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open severity table " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const std::vector<SeverityTable::Row>& SeverityTable::rows(CorruptionId id) const { return rows_.at(id); }

std::map<std::string, double> SeverityTable::resolve(const CorruptionSpec& spec, int min_side) const {
    if (spec.severity < 1 || spec.severity > 5)
        throw ValidationError("severity must be in 1..5, got " + std::to_string(spec.severity));
    const auto& rows = this->rows(spec.id);
    for (const auto& [name, value] : spec.params) {
        const bool known = std::any_of(rows.begin(), rows.end(), [&](const Row& r) { return r.param == name; });
        if (!known) {
            std::string names;
            for (const auto& r : rows) names += (names.empty() ? "" : ", ") + r.param;
            throw ValidationError("unknown parameter '" + name + "' for " + std::string(to_string(spec.id)) +
                                  " (expected one of: " + names + ")");
        }
        if (!std::isfinite(value)) throw ValidationError("parameter '" + name + "' must be finite");
    }
    std::map<std::string, double> out;
    for (const auto& row : rows) {
        auto it = spec.params.find(row.param);
        double v = it != spec.params.end() ? it->second : row.values[static_cast<std::size_t>(spec.severity - 1)];
        if (row.spatial) v = v * static_cast<double>(min_side) / 224.0;
        out[row.param] = v;
    }
    return out;
}

std::string SeverityTable::canonical() const {
    std::string s;
    for (const auto& [id, rows] : rows_) {
        for (const auto& row : rows) {
            s += std::string(to_string(id)) + " " + row.param + (row.spatial ? " px224" : " abs");
            for (double v : row.values) s += " " + format_value(v);
            s += "\n";
        }
    }
    return s;
}

} // namespace cobench
