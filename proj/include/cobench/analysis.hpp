#pragma once

#include "cobench/image.hpp"
#include "cobench/pipeline.hpp"
#include "cobench/scores.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cobench {

inline constexpr double kBalanceThreshold = 0.2;
inline constexpr double kCoverageTau = 0.1;
inline constexpr int kCoverageSeeds = 3;

// ---------------------------------------------------------------- balance

enum class BalanceVerdict { balanced, unbalanced, inconclusive };
std::string_view to_string(BalanceVerdict v);

struct BalanceReport {
    std::vector<CorruptionMean> ranking; // by mean, descending; ties by name
    double dispersion = 0.0;             // max - min of the means
    double threshold = kBalanceThreshold;
    BalanceVerdict verdict = BalanceVerdict::inconclusive;
    std::vector<std::string> without_valid_cells;

    Json to_json() const;
    std::string to_text() const;
};

// Unbalanced when the spread of per-corruption mean overlaps exceeds the
// threshold. Needs at least 3 corruptions; a corruption without any valid
// off-diagonal cell makes the report inconclusive.
BalanceReport balance_report(const OverlapMatrix& matrix, double threshold = kBalanceThreshold);

// ---------------------------------------------------------------- coverage

enum class CoverageVerdict { covered, not_covered, inconclusive };
std::string_view to_string(CoverageVerdict v);

struct PairScores {
    std::string partner;
    std::vector<std::optional<double>> seed_scores; // empty optional = invalid cell
    std::optional<double> score;                    // median of the valid seed scores
};

struct CoverageReport {
    std::string candidate;
    std::vector<PairScores> pairs;
    double tau = kCoverageTau;
    CoverageVerdict verdict = CoverageVerdict::inconclusive;
    std::vector<std::string> undefined_pairs;
    std::vector<std::string> overlapping; // partners with score > tau

    Json to_json() const;
    std::string to_text() const;
};

// Median of the valid values (mean of the two middle ones for an even count).
std::optional<double> median_of_valid(const std::vector<std::optional<double>>& values);

// Fills in each pair's median and the verdict: inconclusive if any pair has
// no valid score, otherwise covered iff some score exceeds tau.
CoverageReport coverage_from_scores(std::string candidate, std::vector<PairScores> pairs, double tau = kCoverageTau);

// Candidate row of one matrix per seed.
CoverageReport coverage_from_matrices(const std::vector<OverlapMatrix>& matrices, const std::string& candidate,
                                      const std::vector<std::string>& benchmark, double tau = kCoverageTau);

// Master seed of coverage repetition k: the plan's own seed for k = 0, so
// the benchmark models of an earlier matrix run are reused.
std::uint64_t coverage_seed(std::uint64_t master_seed, int k);

// Trains and evaluates (candidate, benchmark) pairs over `seeds` repetitions
// through the pipeline cache. A candidate whose name is a benchmark member
// is covered by its own diagonal cell (score 1) without any training.
CoverageReport coverage_check(const PlanCorruption& candidate, const std::vector<std::string>& benchmark,
                              const RunPlan& plan, double tau = kCoverageTau, int seeds = kCoverageSeeds,
                              const ProgressCallback& progress = {});

// ---------------------------------------------------------------- admission

enum class Admission { admit, reject, inconclusive };
std::string_view to_string(Admission a);

struct AdmissionDecision {
    Admission decision = Admission::inconclusive;
    std::vector<std::string> partners; // overlapping (reject) or undefined (inconclusive) pairs
    CoverageReport coverage;

    Json to_json() const;
    std::string to_text() const;
};

AdmissionDecision admission_from_coverage(const CoverageReport& coverage);
AdmissionDecision admission_check(const PlanCorruption& candidate, const std::vector<std::string>& benchmark,
                                  const RunPlan& plan, double tau = kCoverageTau, int seeds = kCoverageSeeds,
                                  const ProgressCallback& progress = {});

// ---------------------------------------------------------------- CE partitions

struct PartitionRow {
    std::string model;
    double set1_ce = 0.0;
    double set2_ce = 0.0;
    double set1_delta = 0.0; // vs the baseline row
    double set2_delta = 0.0;
    std::vector<double> extra_ce;
};

struct PartitionReport {
    std::string reference; // CE normaliser
    std::string baseline;  // deltas are relative to this row
    std::vector<std::string> set1, set2, extra;
    std::vector<PartitionRow> rows;

    Json to_json() const;
    // "score (delta)" cells, e.g. "59 (-22)", rounded to `decimals` places.
    std::string to_text(int decimals = 0) const;
};

// Entries become error rates: 1 - accuracy (NaN stays NaN).
AccuracyTable to_error_table(const AccuracyTable& accuracies);

// Mean CE per model over each set, CE_c = 100 * err_model_c / err_reference_c.
// `errors` holds error rates. Rows listed in `models` (all rows except a
// separate reference row when empty).
PartitionReport partition_compare(const AccuracyTable& errors, const std::vector<std::string>& set1,
                                  const std::vector<std::string>& set2, const std::string& reference,
                                  const std::string& baseline = std::string(kStandardModel),
                                  const std::vector<std::string>& extra = {},
                                  const std::vector<std::string>& models = {});

// ---------------------------------------------------------------- heatmap

// 256-step ramp from blue (0, 0, 255) at index 0 to yellow (255, 255, 0) at
// 255: ramp(i) = (i, i, 255 - i). A valid score s maps to index
// round(clamp(s, 0, 1) * 255); invalid cells are magenta (255, 0, 255), which
// the ramp never produces.
std::array<std::uint8_t, 3> heatmap_color(const OverlapResult& cell);

// One `cell_px` square per matrix cell, row i = c1, column j = c2.
Image render_heatmap(const OverlapMatrix& matrix, int cell_px = 16);

} // namespace cobench
