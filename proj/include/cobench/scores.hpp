#pragma once

#include "cobench/json_io.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cobench {

// A score whose normalising quantity is zero (robustness with zero clean
// accuracy, CE with zero reference error).
class UndefinedScore : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline constexpr double kDenominatorEpsilon = 1e-3;
inline constexpr std::string_view kStandardModel = "standard";
inline constexpr std::string_view kCleanCondition = "clean";

// R = a_c / a_clean.
double robustness_score(double a_c, double a_clean);

// Sum of the two robustness gains over the standard model, unnormalised:
// (R_m2_c1 - R_std_c1) + (R_m1_c2 - R_std_c2).
double raw_overlap(double r_m2_c1, double r_std_c1, double r_m1_c2, double r_std_c2);

enum class CellValidity { ok, undefined_denominator, nonconverged_model };

std::string_view to_string(CellValidity v);
CellValidity parse_cell_validity(std::string_view name);

// The six robustness scores entering one overlap score. m1 is the model
// augmented with c1, m2 the one augmented with c2.
struct OverlapInputs {
    double r_m1_c2 = 0.0;
    double r_std_c2 = 0.0;
    double r_m2_c2 = 0.0;
    double r_m2_c1 = 0.0;
    double r_std_c1 = 0.0;
    double r_m1_c1 = 0.0;
};

struct OverlapResult {
    CellValidity validity = CellValidity::ok;
    double score = 0.0;     // max(0, pre_clamp) when ok, else 0
    double pre_clamp = 0.0; // (ratio_c2 + ratio_c1) / 2
    double ratio_c2 = 0.0;  // (R_m1_c2 - R_std_c2) / (R_m2_c2 - R_std_c2)
    double ratio_c1 = 0.0;  // (R_m2_c1 - R_std_c1) / (R_m1_c1 - R_std_c1)

    bool valid() const noexcept { return validity == CellValidity::ok; }
    bool clamped() const noexcept { return valid() && pre_clamp < 0.0; }
};

// Normalised overlap. Either self-gain denominator below `epsilon` in
// magnitude yields undefined_denominator; no division happens in that case.
OverlapResult overlap_score(const OverlapInputs& in, double epsilon = kDenominatorEpsilon);

// Corruption error in percent: 100 * err_model / err_ref.
double ce_score(double err_model, double err_ref);
// Multi-severity form: 100 * sum(err_model) / sum(err_ref).
double ce_score(std::span<const double> err_model, std::span<const double> err_ref);

// Accuracies of models (rows) under evaluation conditions (columns). Rows hold
// "standard" plus one model per corruption, columns "clean" plus one per
// corruption; an augmented model shares its corruption's name. Entries of a
// model whose training diverged are NaN.
class AccuracyTable {
public:
    AccuracyTable() = default;
    AccuracyTable(std::vector<std::string> models, std::vector<std::string> conditions);

    const std::vector<std::string>& models() const noexcept { return models_; }
    const std::vector<std::string>& conditions() const noexcept { return conditions_; }

    std::size_t model_index(std::string_view model) const;
    std::size_t condition_index(std::string_view condition) const;
    bool has_model(std::string_view model) const;
    bool has_condition(std::string_view condition) const;

    double& at(std::size_t model, std::size_t condition) { return values_[model * conditions_.size() + condition]; }
    double at(std::size_t model, std::size_t condition) const {
        return values_[model * conditions_.size() + condition];
    }
    double at(std::string_view model, std::string_view condition) const {
        return at(model_index(model), condition_index(condition));
    }
    void set(std::string_view model, std::string_view condition, double accuracy);

    bool converged(std::size_t model) const { return converged_[model]; }
    void set_converged(std::string_view model, bool converged);

    Json& provenance() noexcept { return provenance_; }
    const Json& provenance() const noexcept { return provenance_; }

    // Corruptions with both a model row and a condition column, in column order.
    std::vector<std::string> corruptions() const;

    // Requires a "standard" row and a "clean" column; entries in [0, 1] or NaN.
    void validate() const;

    // Header "model,<conditions...>", one row per model, 6 decimal places,
    // "nan" for missing entries.
    std::string to_csv() const;
    static AccuracyTable from_csv(std::string_view text);
    Json to_json() const;
    static AccuracyTable from_json(const Json& j);
    std::string digest() const;

    // Appends a model row (e.g. an externally evaluated model). The row must
    // cover every condition and its dataset digest must match this table's.
    void add_row(std::string model, const std::vector<double>& accuracies, bool converged,
                 std::string_view dataset_digest);

private:
    std::vector<std::string> models_;
    std::vector<std::string> conditions_;
    std::vector<double> values_;
    std::vector<bool> converged_;
    Json provenance_ = Json::object();
};

// Symmetric matrix of overlap scores indexed by corruption name.
class OverlapMatrix {
public:
    OverlapMatrix() = default;
    explicit OverlapMatrix(std::vector<std::string> corruptions, double epsilon = kDenominatorEpsilon);

    const std::vector<std::string>& corruptions() const noexcept { return corruptions_; }
    std::size_t size() const noexcept { return corruptions_.size(); }
    std::size_t index(std::string_view corruption) const;
    double epsilon() const noexcept { return epsilon_; }

    OverlapResult& cell(std::size_t i, std::size_t j) { return cells_[i * size() + j]; }
    const OverlapResult& cell(std::size_t i, std::size_t j) const { return cells_[i * size() + j]; }
    const OverlapResult& cell(std::string_view c1, std::string_view c2) const { return cell(index(c1), index(c2)); }

    Json& provenance() noexcept { return provenance_; }
    const Json& provenance() const noexcept { return provenance_; }

    // Scores to 6 decimal places; invalid cells print their validity name.
    std::string to_csv() const;
    Json to_json() const;
    static OverlapMatrix from_json(const Json& j);
    std::string digest() const;

private:
    std::vector<std::string> corruptions_;
    std::vector<OverlapResult> cells_;
    double epsilon_ = kDenominatorEpsilon;
    Json provenance_ = Json::object();
};

// Robustness-score inputs for the pair (c1, c2) read from the table.
OverlapInputs overlap_inputs(const AccuracyTable& table, std::string_view c1, std::string_view c2);

// Every cell from the table. Cells touching a non-converged model (or the
// standard model) are nonconverged_model; a zero clean accuracy counts as an
// undefined denominator.
OverlapMatrix overlap_matrix_from_table(const AccuracyTable& table, double epsilon = kDenominatorEpsilon);

struct CorruptionMean {
    std::string corruption;
    std::optional<double> mean; // empty when no valid off-diagonal cell exists
    int valid_cells = 0;
    int excluded_cells = 0;
};

// Mean of each corruption's valid off-diagonal scores, in matrix order.
std::vector<CorruptionMean> mean_overlap_per_corruption(const OverlapMatrix& matrix);

} // namespace cobench
