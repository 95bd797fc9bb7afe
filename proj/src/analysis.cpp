#include "cobench/analysis.hpp"

#include "cobench/error.hpp"
#include "cobench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace cobench {

namespace {

std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    // "-0" and "-0.00" read as zero.
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string fmt_delta(double v, int decimals) {
    auto s = fmt(v, decimals);
    if (s.front() != '-' && s.find_first_not_of("0.") != std::string::npos) s = "+" + s;
    return s;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (width.size() <= c) width.push_back(0);
            width[c] = std::max(width[c], r[c].size());
        }
    std::string out;
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) line += c + 1 == r.size() ? r[c] : pad(r[c], width[c] + 2);
        out += line + "\n";
    }
    return out;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

} // namespace

// ---------------------------------------------------------------- balance

std::string_view to_string(BalanceVerdict v) {
    switch (v) {
    case BalanceVerdict::balanced: return "balanced";
    case BalanceVerdict::unbalanced: return "unbalanced";
    case BalanceVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

BalanceReport balance_report(const OverlapMatrix& matrix, double threshold) {
    if (matrix.size() < 3) throw ValidationError("balance report needs at least 3 corruptions");
    if (!(threshold >= 0.0)) throw ValidationError("balance threshold must be >= 0");
    BalanceReport r;
    r.threshold = threshold;
    r.ranking = mean_overlap_per_corruption(matrix);
    std::sort(r.ranking.begin(), r.ranking.end(), [](const CorruptionMean& a, const CorruptionMean& b) {
        if (a.mean.has_value() != b.mean.has_value()) return a.mean.has_value();
        if (a.mean && b.mean && *a.mean != *b.mean) return *a.mean > *b.mean;
        return a.corruption < b.corruption;
    });
    std::vector<double> means;
    for (const auto& m : r.ranking) {
        if (m.mean)
            means.push_back(*m.mean);
        else
            r.without_valid_cells.push_back(m.corruption);
    }
    if (!r.without_valid_cells.empty() || means.size() < 2) {
        r.verdict = BalanceVerdict::inconclusive;
        if (!means.empty()) r.dispersion = *std::max_element(means.begin(), means.end()) -
                                           *std::min_element(means.begin(), means.end());
        return r;
    }
    r.dispersion = *std::max_element(means.begin(), means.end()) - *std::min_element(means.begin(), means.end());
    r.verdict = r.dispersion > threshold ? BalanceVerdict::unbalanced : BalanceVerdict::balanced;
    return r;
}

Json BalanceReport::to_json() const {
    Json ranks = Json::array();
    for (const auto& m : ranking)
        ranks.push_back(Json{{"corruption", m.corruption},
                             {"mean_overlap", optional_json(m.mean)},
                             {"valid_cells", m.valid_cells},
                             {"excluded_cells", m.excluded_cells}});
    return Json{{"ranking", std::move(ranks)},
                {"dispersion", dispersion},
                {"threshold", threshold},
                {"verdict", std::string(to_string(verdict))},
                {"without_valid_cells", without_valid_cells}};
}

std::string BalanceReport::to_text() const {
    std::vector<std::vector<std::string>> rows{{"rank", "corruption", "mean_overlap", "valid", "excluded"}};
    int rank = 1;
    for (const auto& m : ranking)
        rows.push_back({std::to_string(rank++), m.corruption, m.mean ? fmt(*m.mean, 3) : "n/a",
                        std::to_string(m.valid_cells), std::to_string(m.excluded_cells)});
    std::string out = render_table(rows);
    out += "dispersion " + fmt(dispersion, 3) + " (threshold " + fmt(threshold, 3) + "): " +
           std::string(to_string(verdict)) + "\n";
    if (!without_valid_cells.empty()) {
        out += "no valid cells:";
        for (const auto& c : without_valid_cells) out += " " + c;
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------- coverage

std::string_view to_string(CoverageVerdict v) {
    switch (v) {
    case CoverageVerdict::covered: return "covered";
    case CoverageVerdict::not_covered: return "not_covered";
    case CoverageVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

std::optional<double> median_of_valid(const std::vector<std::optional<double>>& values) {
    std::vector<double> v;
    for (const auto& x : values)
        if (x) v.push_back(*x);
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CoverageReport coverage_from_scores(std::string candidate, std::vector<PairScores> pairs, double tau) {
    if (!(tau >= 0.0)) throw ValidationError("coverage threshold must be >= 0");
    if (pairs.empty()) throw ValidationError("coverage needs at least one benchmark corruption");
    CoverageReport r;
    r.candidate = std::move(candidate);
    r.tau = tau;
    r.pairs = std::move(pairs);
    for (auto& p : r.pairs) {
        p.score = median_of_valid(p.seed_scores);
        if (!p.score)
            r.undefined_pairs.push_back(p.partner);
        else if (*p.score > tau)
            r.overlapping.push_back(p.partner);
    }
    if (!r.undefined_pairs.empty())
        r.verdict = CoverageVerdict::inconclusive;
    else
        r.verdict = r.overlapping.empty() ? CoverageVerdict::not_covered : CoverageVerdict::covered;
    return r;
}

CoverageReport coverage_from_matrices(const std::vector<OverlapMatrix>& matrices, const std::string& candidate,
                                      const std::vector<std::string>& benchmark, double tau) {
    if (matrices.empty()) throw ValidationError("coverage needs at least one matrix");
    std::vector<PairScores> pairs;
    for (const auto& b : benchmark) {
        PairScores p;
        p.partner = b;
        for (const auto& m : matrices) {
            const auto& cell = m.cell(candidate, b);
            p.seed_scores.push_back(cell.valid() ? std::optional<double>(cell.score) : std::nullopt);
        }
        pairs.push_back(std::move(p));
    }
    return coverage_from_scores(candidate, std::move(pairs), tau);
}

std::uint64_t coverage_seed(std::uint64_t master_seed, int k) {
    if (k == 0) return master_seed;
    return SeededRng(master_seed).derive("coverage").derive(static_cast<std::uint64_t>(k)).seed();
}

CoverageReport coverage_check(const PlanCorruption& candidate, const std::vector<std::string>& benchmark,
                              const RunPlan& plan, double tau, int seeds, const ProgressCallback& progress) {
    if (benchmark.empty()) throw ValidationError("coverage: benchmark is empty");
    if (seeds < 1) throw ValidationError("coverage: need at least one seed");
    if (std::find(benchmark.begin(), benchmark.end(), candidate.name) != benchmark.end()) {
        PairScores self{candidate.name, {1.0}, std::nullopt};
        return coverage_from_scores(candidate.name, {self}, tau);
    }
    RunPlan run = plan.restricted(benchmark);
    run.corruptions.push_back(candidate);
    run.validate();
    std::vector<OverlapMatrix> matrices;
    for (int k = 0; k < seeds; ++k) {
        run.master_seed = coverage_seed(plan.master_seed, k);
        if (progress) progress("coverage seed " + std::to_string(k + 1) + "/" + std::to_string(seeds));
        matrices.push_back(run_matrix(run, progress).matrix);
    }
    return coverage_from_matrices(matrices, candidate.name, benchmark, tau);
}

Json CoverageReport::to_json() const {
    Json ps = Json::array();
    for (const auto& p : pairs) {
        Json seeds = Json::array();
        for (const auto& s : p.seed_scores) seeds.push_back(optional_json(s));
        ps.push_back(Json{{"partner", p.partner}, {"seed_scores", std::move(seeds)}, {"score", optional_json(p.score)}});
    }
    return Json{{"candidate", candidate},
                {"tau", tau},
                {"pairs", std::move(ps)},
                {"verdict", std::string(to_string(verdict))},
                {"undefined_pairs", undefined_pairs},
                {"overlapping", overlapping}};
}

std::string CoverageReport::to_text() const {
    std::vector<std::vector<std::string>> rows{{"partner", "score", "seeds"}};
    for (const auto& p : pairs) {
        std::string seeds;
        for (const auto& s : p.seed_scores) seeds += (seeds.empty() ? "" : " ") + (s ? fmt(*s, 3) : "undef");
        rows.push_back({p.partner, p.score ? fmt(*p.score, 3) : "undefined", seeds});
    }
    std::string out = "candidate " + candidate + " (tau " + fmt(tau, 3) + ")\n" + render_table(rows);
    out += "verdict: " + std::string(to_string(verdict)) + "\n";
    return out;
}

// ---------------------------------------------------------------- admission

std::string_view to_string(Admission a) {
    switch (a) {
    case Admission::admit: return "admit";
    case Admission::reject: return "reject";
    case Admission::inconclusive: return "inconclusive";
    }
    return "?";
}

AdmissionDecision admission_from_coverage(const CoverageReport& coverage) {
    AdmissionDecision d;
    d.coverage = coverage;
    switch (coverage.verdict) {
    case CoverageVerdict::not_covered: d.decision = Admission::admit; break;
    case CoverageVerdict::covered:
        d.decision = Admission::reject;
        d.partners = coverage.overlapping;
        break;
    case CoverageVerdict::inconclusive:
        d.decision = Admission::inconclusive;
        d.partners = coverage.undefined_pairs;
        break;
    }
    return d;
}

AdmissionDecision admission_check(const PlanCorruption& candidate, const std::vector<std::string>& benchmark,
                                  const RunPlan& plan, double tau, int seeds, const ProgressCallback& progress) {
    return admission_from_coverage(coverage_check(candidate, benchmark, plan, tau, seeds, progress));
}

Json AdmissionDecision::to_json() const {
    return Json{{"decision", std::string(to_string(decision))}, {"partners", partners}, {"coverage", coverage.to_json()}};
}

std::string AdmissionDecision::to_text() const {
    std::string out = coverage.to_text() + "admission: " + std::string(to_string(decision));
    if (!partners.empty()) {
        out += decision == Admission::reject ? " (overlaps" : " (undefined";
        for (const auto& p : partners) out += " " + p;
        out += ")";
    }
    return out + "\n";
}

// ---------------------------------------------------------------- CE partitions

AccuracyTable to_error_table(const AccuracyTable& accuracies) {
    AccuracyTable e = accuracies;
    for (std::size_t m = 0; m < e.models().size(); ++m)
        for (std::size_t c = 0; c < e.conditions().size(); ++c) e.at(m, c) = 1.0 - e.at(m, c);
    return e;
}

PartitionReport partition_compare(const AccuracyTable& errors, const std::vector<std::string>& set1,
                                  const std::vector<std::string>& set2, const std::string& reference,
                                  const std::string& baseline, const std::vector<std::string>& extra,
                                  const std::vector<std::string>& models) {
    if (set1.empty() || set2.empty()) throw ValidationError("partition_compare: both sets must be non-empty");
    {
        std::set<std::string> s1(set1.begin(), set1.end());
        for (const auto& c : set2)
            if (s1.count(c)) throw ValidationError("partition_compare: '" + c + "' is in both sets");
    }
    for (const auto* list : {&set1, &set2, &extra})
        for (const auto& c : *list) errors.condition_index(c);
    const auto ref = errors.model_index(reference);
    errors.model_index(baseline);

    auto ce_of = [&](std::size_t m, const std::string& c) {
        const auto k = errors.condition_index(c);
        const double ref_err = errors.at(ref, k);
        if (!(ref_err > 0.0))
            throw ValidationError("partition_compare: reference '" + reference + "' has zero error on '" + c + "'");
        return ce_score(errors.at(m, k), ref_err);
    };
    auto mean_ce = [&](std::size_t m, const std::vector<std::string>& set) {
        double sum = 0.0;
        for (const auto& c : set) sum += ce_of(m, c);
        return sum / static_cast<double>(set.size());
    };

    PartitionReport r;
    r.reference = reference;
    r.baseline = baseline;
    r.set1 = set1;
    r.set2 = set2;
    r.extra = extra;
    std::vector<std::string> shown = models;
    if (shown.empty())
        for (const auto& m : errors.models())
            if (m != reference || m == baseline) shown.push_back(m);
    const auto base = errors.model_index(baseline);
    const double base1 = mean_ce(base, set1), base2 = mean_ce(base, set2);
    for (const auto& name : shown) {
        const auto m = errors.model_index(name);
        PartitionRow row;
        row.model = name;
        row.set1_ce = mean_ce(m, set1);
        row.set2_ce = mean_ce(m, set2);
        row.set1_delta = row.set1_ce - base1;
        row.set2_delta = row.set2_ce - base2;
        for (const auto& c : extra) row.extra_ce.push_back(ce_of(m, c));
        r.rows.push_back(std::move(row));
    }
    return r;
}

Json PartitionReport::to_json() const {
    Json rs = Json::array();
    for (const auto& row : rows) {
        Json extra_j = Json::object();
        for (std::size_t i = 0; i < extra.size(); ++i) extra_j[extra[i]] = row.extra_ce[i];
        rs.push_back(Json{{"model", row.model},
                          {"mean_ce_set1", row.set1_ce},
                          {"mean_ce_set2", row.set2_ce},
                          {"delta_set1", row.set1_delta},
                          {"delta_set2", row.set2_delta},
                          {"extra_ce", std::move(extra_j)}});
    }
    return Json{{"ce_reference", reference},
                {"baseline", baseline},
                {"set1", set1},
                {"set2", set2},
                {"extra", extra},
                {"rows", std::move(rs)}};
}

std::string PartitionReport::to_text(int decimals) const {
    std::vector<std::vector<std::string>> table;
    std::vector<std::string> header{"model", "mean_CE_set1", "mean_CE_set2"};
    header.insert(header.end(), extra.begin(), extra.end());
    table.push_back(header);
    for (const auto& row : rows) {
        std::vector<std::string> cells{row.model,
                                       fmt(row.set1_ce, decimals) + " (" + fmt_delta(row.set1_delta, decimals) + ")",
                                       fmt(row.set2_ce, decimals) + " (" + fmt_delta(row.set2_delta, decimals) + ")"};
        for (double v : row.extra_ce) cells.push_back(fmt(v, decimals));
        table.push_back(std::move(cells));
    }
    std::string out = "CE reference: " + reference + "; brackets: CE gain vs " + baseline + "\n";
    out += "set1:";
    for (const auto& c : set1) out += " " + c;
    out += "\nset2:";
    for (const auto& c : set2) out += " " + c;
    out += "\n" + render_table(table);
    return out;
}

// ---------------------------------------------------------------- heatmap

std::array<std::uint8_t, 3> heatmap_color(const OverlapResult& cell) {
    if (!cell.valid()) return {255, 0, 255};
    const double s = std::clamp(cell.score, 0.0, 1.0);
    const auto i = static_cast<std::uint8_t>(std::lround(s * 255.0));
    return {i, i, static_cast<std::uint8_t>(255 - i)};
}

Image render_heatmap(const OverlapMatrix& matrix, int cell_px) {
    if (cell_px < 1) throw ValidationError("heatmap cell size must be >= 1");
    if (matrix.size() == 0) throw ValidationError("heatmap of an empty matrix");
    const int n = static_cast<int>(matrix.size());
    Image img(n * cell_px, n * cell_px, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto rgb = heatmap_color(matrix.cell(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
            for (int y = i * cell_px; y < (i + 1) * cell_px; ++y)
                for (int x = j * cell_px; x < (j + 1) * cell_px; ++x)
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(rgb[c]) / 255.0f;
        }
    return img;
}

} // namespace cobench
