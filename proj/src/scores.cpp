#include "cobench/scores.hpp"

#include "cobench/digest.hpp"
#include "cobench/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace cobench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fixed6(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& s : out) {
        while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
        s.erase(0, s.find_first_not_of(' '));
    }
    return out;
}

void check_unique(const std::vector<std::string>& ids, const char* what) {
    std::set<std::string> seen;
    for (const auto& id : ids) {
        if (id.empty()) throw ValidationError(std::string(what) + " ids must be non-empty");
        if (id.find(',') != std::string::npos)
            throw ValidationError(std::string(what) + " id '" + id + "' contains a comma");
        if (!seen.insert(id).second) throw ValidationError(std::string("duplicate ") + what + " id '" + id + "'");
    }
}

Json number_or_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
double number_or_nan(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

} // namespace

double robustness_score(double a_c, double a_clean) {
    if (a_clean == 0.0) throw UndefinedScore("robustness score undefined: clean accuracy is zero");
    return a_c / a_clean;
}

double raw_overlap(double r_m2_c1, double r_std_c1, double r_m1_c2, double r_std_c2) {
    return (r_m2_c1 - r_std_c1) + (r_m1_c2 - r_std_c2);
}

std::string_view to_string(CellValidity v) {
    switch (v) {
    case CellValidity::ok: return "ok";
    case CellValidity::undefined_denominator: return "undefined_denominator";
    case CellValidity::nonconverged_model: return "nonconverged_model";
    }
    return "?";
}

CellValidity parse_cell_validity(std::string_view name) {
    if (name == "ok") return CellValidity::ok;
    if (name == "undefined_denominator") return CellValidity::undefined_denominator;
    if (name == "nonconverged_model") return CellValidity::nonconverged_model;
    throw ValidationError("unknown cell validity '" + std::string(name) + "'");
}

OverlapResult overlap_score(const OverlapInputs& in, double epsilon) {
    OverlapResult r;
    const double den_c2 = in.r_m2_c2 - in.r_std_c2;
    const double den_c1 = in.r_m1_c1 - in.r_std_c1;
    if (!(std::fabs(den_c2) >= epsilon) || !(std::fabs(den_c1) >= epsilon)) {
        r.validity = CellValidity::undefined_denominator;
        return r;
    }
    r.ratio_c2 = (in.r_m1_c2 - in.r_std_c2) / den_c2;
    r.ratio_c1 = (in.r_m2_c1 - in.r_std_c1) / den_c1;
    r.pre_clamp = 0.5 * (r.ratio_c2 + r.ratio_c1);
    r.score = std::max(0.0, r.pre_clamp);
    return r;
}

double ce_score(double err_model, double err_ref) {
    if (err_ref == 0.0) throw UndefinedScore("CE score undefined: reference error is zero");
    return 100.0 * err_model / err_ref;
}

double ce_score(std::span<const double> err_model, std::span<const double> err_ref) {
    if (err_model.size() != err_ref.size() || err_model.empty())
        throw ValidationError("CE score: model and reference need the same non-zero number of severities");
    const double num = std::accumulate(err_model.begin(), err_model.end(), 0.0);
    const double den = std::accumulate(err_ref.begin(), err_ref.end(), 0.0);
    return ce_score(num, den);
}

// ---------------------------------------------------------------- AccuracyTable

AccuracyTable::AccuracyTable(std::vector<std::string> models, std::vector<std::string> conditions)
    : models_(std::move(models)), conditions_(std::move(conditions)),
      values_(models_.size() * conditions_.size(), kNaN), converged_(models_.size(), true) {
    check_unique(models_, "model");
    check_unique(conditions_, "condition");
}

std::size_t AccuracyTable::model_index(std::string_view model) const {
    const auto it = std::find(models_.begin(), models_.end(), model);
    if (it == models_.end()) throw ValidationError("accuracy table has no model '" + std::string(model) + "'");
    return static_cast<std::size_t>(it - models_.begin());
}

std::size_t AccuracyTable::condition_index(std::string_view condition) const {
    const auto it = std::find(conditions_.begin(), conditions_.end(), condition);
    if (it == conditions_.end())
        throw ValidationError("accuracy table has no condition '" + std::string(condition) + "'");
    return static_cast<std::size_t>(it - conditions_.begin());
}

bool AccuracyTable::has_model(std::string_view model) const {
    return std::find(models_.begin(), models_.end(), model) != models_.end();
}

bool AccuracyTable::has_condition(std::string_view condition) const {
    return std::find(conditions_.begin(), conditions_.end(), condition) != conditions_.end();
}

void AccuracyTable::set(std::string_view model, std::string_view condition, double accuracy) {
    at(model_index(model), condition_index(condition)) = accuracy;
}

void AccuracyTable::set_converged(std::string_view model, bool converged) {
    converged_[model_index(model)] = converged;
}

std::vector<std::string> AccuracyTable::corruptions() const {
    std::vector<std::string> out;
    for (const auto& c : conditions_)
        if (c != kCleanCondition && c != kStandardModel && has_model(c)) out.push_back(c);
    return out;
}

void AccuracyTable::validate() const {
    if (!has_model(kStandardModel)) throw ValidationError("accuracy table needs a 'standard' row");
    if (!has_condition(kCleanCondition)) throw ValidationError("accuracy table needs a 'clean' column");
    for (std::size_t m = 0; m < models_.size(); ++m)
        for (std::size_t c = 0; c < conditions_.size(); ++c) {
            const double v = at(m, c);
            if (std::isnan(v)) continue;
            if (!(v >= 0.0 && v <= 1.0))
                throw ValidationError("accuracy " + models_[m] + "/" + conditions_[c] + " = " + std::to_string(v) +
                                      " is outside [0, 1]");
        }
}

std::string AccuracyTable::to_csv() const {
    std::string out = "model";
    for (const auto& c : conditions_) out += "," + c;
    out += "\n";
    for (std::size_t m = 0; m < models_.size(); ++m) {
        out += models_[m];
        for (std::size_t c = 0; c < conditions_.size(); ++c) out += "," + fixed6(at(m, c));
        out += "\n";
    }
    return out;
}

AccuracyTable AccuracyTable::from_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line != "\r" && line.front() != '#') rows.push_back(split_csv_line(line));
        pos = nl + 1;
    }
    if (rows.empty()) throw ValidationError("accuracy CSV is empty");
    const auto& header = rows.front();
    if (header.size() < 2) throw ValidationError("accuracy CSV header needs at least one condition column");
    std::vector<std::string> conditions(header.begin() + 1, header.end());
    std::vector<std::string> models;
    for (std::size_t r = 1; r < rows.size(); ++r) models.push_back(rows[r].front());
    AccuracyTable t(models, conditions);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw ValidationError("accuracy CSV row " + std::to_string(r + 1) + " has " +
                                  std::to_string(rows[r].size()) + " fields, expected " +
                                  std::to_string(header.size()));
        for (std::size_t c = 1; c < header.size(); ++c) {
            const auto& field = rows[r][c];
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (field.empty() || end != field.c_str() + field.size())
                throw ValidationError("accuracy CSV row " + std::to_string(r + 1) + ": '" + field +
                                      "' is not a number");
            t.at(r - 1, c - 1) = v;
        }
    }
    return t;
}

Json AccuracyTable::to_json() const {
    Json rows = Json::array();
    for (std::size_t m = 0; m < models_.size(); ++m) {
        Json row = Json::array();
        for (std::size_t c = 0; c < conditions_.size(); ++c) row.push_back(number_or_null(at(m, c)));
        rows.push_back(std::move(row));
    }
    Json converged = Json::array();
    for (bool b : converged_) converged.push_back(b);
    return Json{{"format", "cobench-accuracy-table-v1"},
                {"models", models_},
                {"conditions", conditions_},
                {"accuracy", std::move(rows)},
                {"converged", std::move(converged)},
                {"provenance", provenance_}};
}

AccuracyTable AccuracyTable::from_json(const Json& j) {
    try {
        AccuracyTable t(j.at("models").get<std::vector<std::string>>(),
                        j.at("conditions").get<std::vector<std::string>>());
        const auto& rows = j.at("accuracy");
        if (rows.size() != t.models_.size()) throw ValidationError("accuracy table JSON: row count mismatch");
        for (std::size_t m = 0; m < rows.size(); ++m) {
            if (rows[m].size() != t.conditions_.size())
                throw ValidationError("accuracy table JSON: column count mismatch in row " + std::to_string(m));
            for (std::size_t c = 0; c < rows[m].size(); ++c) t.at(m, c) = number_or_nan(rows[m][c]);
        }
        if (j.contains("converged")) {
            const auto flags = j.at("converged").get<std::vector<bool>>();
            if (flags.size() != t.models_.size())
                throw ValidationError("accuracy table JSON: converged flag count mismatch");
            t.converged_ = flags;
        }
        if (j.contains("provenance")) t.provenance_ = j.at("provenance");
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("accuracy table JSON: ") + e.what());
    }
}

std::string AccuracyTable::digest() const { return sha256_hex(to_json().dump()); }

void AccuracyTable::add_row(std::string model, const std::vector<double>& accuracies, bool converged,
                            std::string_view dataset_digest) {
    if (has_model(model)) throw ValidationError("accuracy table already has a model '" + model + "'");
    if (accuracies.size() != conditions_.size())
        throw ValidationError("row for '" + model + "' has " + std::to_string(accuracies.size()) +
                              " accuracies, table has " + std::to_string(conditions_.size()) + " conditions");
    if (provenance_.contains("dataset_digest") && provenance_.at("dataset_digest").get<std::string>() != dataset_digest)
        throw ValidationError("row for '" + model + "' was evaluated on a different dataset (digest mismatch)");
    models_.push_back(std::move(model));
    check_unique(models_, "model");
    values_.insert(values_.end(), accuracies.begin(), accuracies.end());
    converged_.push_back(converged);
}

// ---------------------------------------------------------------- OverlapMatrix

OverlapMatrix::OverlapMatrix(std::vector<std::string> corruptions, double epsilon)
    : corruptions_(std::move(corruptions)), cells_(corruptions_.size() * corruptions_.size()), epsilon_(epsilon) {
    check_unique(corruptions_, "corruption");
}

std::size_t OverlapMatrix::index(std::string_view corruption) const {
    const auto it = std::find(corruptions_.begin(), corruptions_.end(), corruption);
    if (it == corruptions_.end()) throw ValidationError("overlap matrix has no corruption '" + std::string(corruption) + "'");
    return static_cast<std::size_t>(it - corruptions_.begin());
}

std::string OverlapMatrix::to_csv() const {
    std::string out = "corruption";
    for (const auto& c : corruptions_) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < size(); ++i) {
        out += corruptions_[i];
        for (std::size_t j = 0; j < size(); ++j) {
            const auto& cl = cell(i, j);
            out += ",";
            out += cl.valid() ? fixed6(cl.score) : std::string(to_string(cl.validity));
        }
        out += "\n";
    }
    return out;
}

Json OverlapMatrix::to_json() const {
    Json rows = Json::array();
    for (std::size_t i = 0; i < size(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < size(); ++j) {
            const auto& c = cell(i, j);
            Json cj{{"validity", std::string(to_string(c.validity))}};
            if (c.valid()) {
                cj["score"] = c.score;
                cj["pre_clamp"] = c.pre_clamp;
                cj["ratio_c2"] = c.ratio_c2;
                cj["ratio_c1"] = c.ratio_c1;
            } else {
                cj["score"] = nullptr;
            }
            row.push_back(std::move(cj));
        }
        rows.push_back(std::move(row));
    }
    return Json{{"format", "cobench-overlap-matrix-v1"},
                {"corruptions", corruptions_},
                {"epsilon", epsilon_},
                {"cells", std::move(rows)},
                {"provenance", provenance_}};
}

OverlapMatrix OverlapMatrix::from_json(const Json& j) {
    try {
        OverlapMatrix m(j.at("corruptions").get<std::vector<std::string>>(),
                        j.value("epsilon", kDenominatorEpsilon));
        const auto& rows = j.at("cells");
        if (rows.size() != m.size()) throw ValidationError("overlap matrix JSON: row count mismatch");
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (rows[i].size() != m.size()) throw ValidationError("overlap matrix JSON: column count mismatch");
            for (std::size_t k = 0; k < m.size(); ++k) {
                const auto& cj = rows[i][k];
                auto& c = m.cell(i, k);
                c.validity = parse_cell_validity(cj.at("validity").get<std::string>());
                if (c.valid()) {
                    c.score = cj.at("score").get<double>();
                    c.pre_clamp = cj.value("pre_clamp", c.score);
                    c.ratio_c2 = cj.value("ratio_c2", 0.0);
                    c.ratio_c1 = cj.value("ratio_c1", 0.0);
                    if (!(c.score >= 0.0)) throw ValidationError("overlap matrix JSON: negative or NaN score");
                }
            }
        }
        if (j.contains("provenance")) m.provenance_ = j.at("provenance");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("overlap matrix JSON: ") + e.what());
    }
}

std::string OverlapMatrix::digest() const { return sha256_hex(to_json().dump()); }

// ---------------------------------------------------------------- derivation

OverlapInputs overlap_inputs(const AccuracyTable& t, std::string_view c1, std::string_view c2) {
    const auto std_row = t.model_index(kStandardModel);
    const auto m1 = t.model_index(c1);
    const auto m2 = t.model_index(c2);
    const auto clean = t.condition_index(kCleanCondition);
    const auto k1 = t.condition_index(c1);
    const auto k2 = t.condition_index(c2);
    const auto R = [&](std::size_t m, std::size_t k) { return robustness_score(t.at(m, k), t.at(m, clean)); };
    OverlapInputs in;
    in.r_m1_c2 = R(m1, k2);
    in.r_std_c2 = R(std_row, k2);
    in.r_m2_c2 = R(m2, k2);
    in.r_m2_c1 = R(m2, k1);
    in.r_std_c1 = R(std_row, k1);
    in.r_m1_c1 = R(m1, k1);
    return in;
}

OverlapMatrix overlap_matrix_from_table(const AccuracyTable& table, double epsilon) {
    table.validate();
    OverlapMatrix out(table.corruptions(), epsilon);
    out.provenance() = table.provenance();
    const auto std_row = table.model_index(kStandardModel);
    const auto clean = table.condition_index(kCleanCondition);
    const auto usable = [&](std::size_t m) {
        if (!table.converged(m)) return CellValidity::nonconverged_model;
        for (std::size_t k = 0; k < table.conditions().size(); ++k)
            if (std::isnan(table.at(m, k))) return CellValidity::nonconverged_model;
        if (table.at(m, clean) == 0.0) return CellValidity::undefined_denominator;
        return CellValidity::ok;
    };
    const auto std_state = usable(std_row);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = 0; j < out.size(); ++j) {
            auto& cell = out.cell(i, j);
            const auto m1 = table.model_index(out.corruptions()[i]);
            const auto m2 = table.model_index(out.corruptions()[j]);
            const CellValidity states[] = {std_state, usable(m1), usable(m2)};
            if (std::find(std::begin(states), std::end(states), CellValidity::nonconverged_model) != std::end(states)) {
                cell.validity = CellValidity::nonconverged_model;
            } else if (std::find(std::begin(states), std::end(states), CellValidity::undefined_denominator) !=
                       std::end(states)) {
                cell.validity = CellValidity::undefined_denominator;
            } else {
                cell = overlap_score(overlap_inputs(table, out.corruptions()[i], out.corruptions()[j]), epsilon);
            }
        }
    }
    return out;
}

std::vector<CorruptionMean> mean_overlap_per_corruption(const OverlapMatrix& matrix) {
    if (matrix.size() < 2) throw ValidationError("mean overlap needs at least 2 corruptions");
    std::vector<CorruptionMean> out;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        CorruptionMean m;
        m.corruption = matrix.corruptions()[i];
        std::vector<double> scores;
        for (std::size_t j = 0; j < matrix.size(); ++j) {
            if (j == i) continue;
            const auto& c = matrix.cell(i, j);
            if (c.valid())
                scores.push_back(c.score);
            else
                ++m.excluded_cells;
        }
        // Summing in sorted order keeps the mean bit-identical under reordering.
        std::sort(scores.begin(), scores.end());
        m.valid_cells = static_cast<int>(scores.size());
        if (!scores.empty()) m.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / m.valid_cells;
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace cobench
