#include "cobench/error.hpp"
#include "cobench/rng.hpp"
#include "cobench/scores.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace cobench;
using Catch::Approx;

namespace {

AccuracyTable three_way_table() {
    AccuracyTable t({"standard", "a", "b"}, {"clean", "a", "b"});
    const double v[3][3] = {{0.9, 0.45, 0.6}, {0.88, 0.8, 0.7}, {0.92, 0.6, 0.85}};
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t c = 0; c < 3; ++c) t.at(m, c) = v[m][c];
    return t;
}

} // namespace

TEST_CASE("robustness score", "[scores]") {
    CHECK(robustness_score(0.6, 0.8) == Approx(0.75).margin(1e-15));
    CHECK(robustness_score(0.7, 0.7) == 1.0);
    CHECK(robustness_score(0.0, 0.7) == 0.0);
    CHECK_THROWS_AS(robustness_score(0.5, 0.0), UndefinedScore);
    // doubling numerator and denominator is exact in binary floating point
    CHECK(robustness_score(2 * 0.37, 2 * 0.91) == robustness_score(0.37, 0.91));
}

TEST_CASE("raw overlap", "[scores]") {
    CHECK(raw_overlap(0.5, 0.5, 0.4, 0.4) == 0.0);
    CHECK(raw_overlap(0.7, 0.5, 0.6, 0.5) == Approx(0.3).margin(1e-15));
    // swapping (c1, m1) <-> (c2, m2)
    CHECK(raw_overlap(0.7, 0.5, 0.6, 0.5) == raw_overlap(0.6, 0.5, 0.7, 0.5));
}

TEST_CASE("overlap score examples", "[scores]") {
    SECTION("direct substitution") {
        const auto r = overlap_score({0.6, 0.4, 0.8, 0.7, 0.5, 0.9});
        REQUIRE(r.valid());
        CHECK(r.ratio_c2 == Approx(0.5).margin(1e-12));
        CHECK(r.ratio_c1 == Approx(0.5).margin(1e-12));
        CHECK(r.score == Approx(0.5).margin(1e-12));
    }
    SECTION("same model in both roles gives exactly 1") {
        const double r_c = 0.83, r_std = 0.41;
        const auto r = overlap_score({r_c, r_std, r_c, r_c, r_std, r_c});
        CHECK(r.score == 1.0);
    }
    SECTION("cross terms at the standard level give exactly 0") {
        const auto r = overlap_score({0.4, 0.4, 0.8, 0.5, 0.5, 0.9});
        CHECK(r.score == 0.0);
        CHECK(r.pre_clamp == 0.0);
        CHECK_FALSE(r.clamped());
    }
    SECTION("negative cross gains clamp to 0 and keep the pre-clamp value") {
        const auto r = overlap_score({0.3, 0.4, 0.8, 0.45, 0.5, 0.9});
        CHECK(r.score == 0.0);
        CHECK(r.pre_clamp < 0.0);
        CHECK(r.clamped());
    }
    SECTION("scores above 1 are reported") {
        const auto r = overlap_score({0.9, 0.4, 0.6, 0.9, 0.5, 0.7});
        CHECK(r.score > 1.0);
    }
    SECTION("near-zero denominators are undefined") {
        CHECK(overlap_score({0.6, 0.4, 0.4005, 0.7, 0.5, 0.9}).validity == CellValidity::undefined_denominator);
        CHECK(overlap_score({0.6, 0.4, 0.8, 0.7, 0.5, 0.4995}).validity == CellValidity::undefined_denominator);
        CHECK(overlap_score({0.6, 0.4, 0.402, 0.7, 0.5, 0.502}).valid());
        const auto r = overlap_score({0.6, 0.4, 0.4, 0.7, 0.5, 0.9});
        CHECK(r.score == 0.0);
        CHECK_FALSE(r.valid());
    }
}

TEST_CASE("overlap score is exactly symmetric under role swap", "[scores][property]") {
    SeededRng rng(11);
    for (int i = 0; i < 2000; ++i) {
        OverlapInputs in{rng.uniform(0, 1.2), rng.uniform(0, 1.2), rng.uniform(0, 1.2),
                         rng.uniform(0, 1.2), rng.uniform(0, 1.2), rng.uniform(0, 1.2)};
        // (c1, m1) <-> (c2, m2)
        OverlapInputs sw{in.r_m2_c1, in.r_std_c1, in.r_m1_c1, in.r_m1_c2, in.r_std_c2, in.r_m2_c2};
        const auto a = overlap_score(in), b = overlap_score(sw);
        REQUIRE(a.validity == b.validity);
        REQUIRE(a.score == b.score);
        REQUIRE(a.score >= 0.0);
        REQUIRE(a.clamped() == (a.valid() && a.pre_clamp < 0.0));
    }
}

TEST_CASE("CE score", "[scores]") {
    CHECK(ce_score(0.5, 0.5) == 100.0);
    CHECK(ce_score(0.40, 0.50) == Approx(80.0).margin(1e-12));
    CHECK(ce_score(0.0, 0.3) == 0.0);
    CHECK_THROWS_AS(ce_score(0.3, 0.0), UndefinedScore);
    CHECK(ce_score(2 * 0.21, 2 * 0.77) == ce_score(0.21, 0.77));
    const std::vector<double> m{0.1, 0.2, 0.3}, r{0.2, 0.4, 0.6};
    CHECK(ce_score(m, r) == Approx(50.0).margin(1e-12));
    const std::vector<double> short_r{0.2};
    CHECK_THROWS_AS(ce_score(m, short_r), ValidationError);
}

TEST_CASE("accuracy table structure and validation", "[scores]") {
    auto t = three_way_table();
    CHECK(t.corruptions() == std::vector<std::string>{"a", "b"});
    CHECK(t.at("b", "a") == 0.6);
    t.validate();
    t.set("a", "b", 1.2);
    CHECK_THROWS_AS(t.validate(), ValidationError);
    CHECK_THROWS_AS(AccuracyTable({"standard", "standard"}, {"clean"}), ValidationError);
    AccuracyTable no_std({"a"}, {"clean", "a"});
    CHECK_THROWS_AS(no_std.validate(), ValidationError);
    CHECK_THROWS_AS(t.model_index("zzz"), ValidationError);
}

TEST_CASE("accuracy table serialisation", "[scores]") {
    auto t = three_way_table();
    t.set_converged("b", false);
    t.provenance() = Json{{"dataset_digest", "abc"}, {"seed", 3}};
    t.at(1, 2) = 1.0 / 3.0;

    SECTION("CSV uses 6 decimals") {
        const auto csv = t.to_csv();
        CHECK(csv.rfind("model,clean,a,b\nstandard,0.900000,0.450000,0.600000\n", 0) == 0);
        CHECK(csv.find("0.333333") != std::string::npos);
        const auto back = AccuracyTable::from_csv(csv);
        CHECK(back.models() == t.models());
        CHECK(back.at(1, 2) == Approx(1.0 / 3.0).margin(5e-7));
    }
    SECTION("JSON round-trips exactly, NaN included") {
        t.at(0, 1) = std::nan("");
        const auto back = AccuracyTable::from_json(Json::parse(t.to_json().dump()));
        CHECK(std::isnan(back.at(0, 1)));
        CHECK(back.at(1, 2) == t.at(1, 2));
        CHECK_FALSE(back.converged(2));
        CHECK(back.digest() == t.digest());
    }
    SECTION("digest reacts to any value") {
        auto u = t;
        u.at(2, 2) = std::nextafter(u.at(2, 2), 1.0);
        CHECK(u.digest() != t.digest());
    }
    SECTION("malformed CSV") {
        CHECK_THROWS_AS(AccuracyTable::from_csv(""), ValidationError);
        CHECK_THROWS_AS(AccuracyTable::from_csv("model,clean\nstandard,0.5,0.3\n"), ValidationError);
        CHECK_THROWS_AS(AccuracyTable::from_csv("model,clean\nstandard,abc\n"), ValidationError);
    }
}

TEST_CASE("joining an external row requires the same dataset", "[scores]") {
    auto t = three_way_table();
    t.provenance() = Json{{"dataset_digest", "d1"}};
    CHECK_THROWS_AS(t.add_row("ext", {0.5, 0.4, 0.3}, true, "d2"), ValidationError);
    CHECK_THROWS_AS(t.add_row("ext", {0.5, 0.4}, true, "d1"), ValidationError);
    t.add_row("ext", {0.5, 0.4, 0.3}, true, "d1");
    CHECK(t.at("ext", "b") == 0.3);
    CHECK_THROWS_AS(t.add_row("ext", {0.5, 0.4, 0.3}, true, "d1"), ValidationError);
}

TEST_CASE("overlap matrix from a table", "[scores]") {
    const auto t = three_way_table();
    const auto m = overlap_matrix_from_table(t);
    REQUIRE(m.size() == 2);
    CHECK(m.cell(0, 0).score == 1.0);
    CHECK(m.cell(1, 1).score == 1.0);
    CHECK(m.cell(0, 1).score == m.cell(1, 0).score);

    // independent substitution
    const auto R = [&](const char* model, const char* cond) { return t.at(model, cond) / t.at(model, "clean"); };
    const double expect = 0.5 * ((R("a", "b") - R("standard", "b")) / (R("b", "b") - R("standard", "b")) +
                                 (R("b", "a") - R("standard", "a")) / (R("a", "a") - R("standard", "a")));
    CHECK(m.cell("a", "b").score == Approx(std::max(0.0, expect)).margin(1e-12));

    SECTION("non-converged model flags its row and column") {
        auto u = t;
        u.set_converged("b", false);
        const auto mu = overlap_matrix_from_table(u);
        CHECK(mu.cell(0, 0).valid());
        CHECK(mu.cell(0, 1).validity == CellValidity::nonconverged_model);
        CHECK(mu.cell(1, 1).validity == CellValidity::nonconverged_model);
    }
    SECTION("non-converged standard model flags everything") {
        auto u = t;
        u.set_converged("standard", false);
        const auto mu = overlap_matrix_from_table(u);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) CHECK(mu.cell(i, j).validity == CellValidity::nonconverged_model);
    }
    SECTION("zero clean accuracy is an undefined denominator") {
        auto u = t;
        u.set("a", "clean", 0.0);
        u.set("a", "a", 0.0);
        u.set("a", "b", 0.0);
        const auto mu = overlap_matrix_from_table(u);
        CHECK(mu.cell(0, 1).validity == CellValidity::undefined_denominator);
        CHECK(mu.cell(1, 1).valid());
    }
    SECTION("serialisation") {
        const auto back = OverlapMatrix::from_json(Json::parse(m.to_json().dump()));
        CHECK(back.digest() == m.digest());
        CHECK(m.to_csv().rfind("corruption,a,b\na,1.000000,", 0) == 0);
        auto u = t;
        u.set_converged("b", false);
        CHECK(overlap_matrix_from_table(u).to_csv().find("nonconverged_model") != std::string::npos);
    }
}

TEST_CASE("mean overlap per corruption", "[scores]") {
    OverlapMatrix m({"x", "y", "z"});
    auto set = [&](std::size_t i, std::size_t j, double s) {
        m.cell(i, j).score = s;
        m.cell(j, i).score = s;
    };
    for (std::size_t i = 0; i < 3; ++i) set(i, i, 1.0);
    set(0, 1, 0.4);
    set(0, 2, 0.8);
    set(1, 2, 0.0);
    const auto means = mean_overlap_per_corruption(m);
    CHECK(*means[0].mean == Approx(0.6).margin(1e-15));
    CHECK(*means[1].mean == Approx(0.2).margin(1e-15));
    CHECK(means[0].valid_cells == 2);

    SECTION("all zeros") {
        set(0, 1, 0.0);
        set(0, 2, 0.0);
        for (const auto& c : mean_overlap_per_corruption(m)) CHECK(*c.mean == 0.0);
    }
    SECTION("invalid cells are excluded and counted") {
        m.cell(0, 1).validity = m.cell(1, 0).validity = CellValidity::undefined_denominator;
        const auto r = mean_overlap_per_corruption(m);
        CHECK(*r[0].mean == Approx(0.8).margin(1e-15));
        CHECK(r[0].excluded_cells == 1);
        m.cell(1, 2).validity = m.cell(2, 1).validity = CellValidity::nonconverged_model;
        const auto r2 = mean_overlap_per_corruption(m);
        CHECK_FALSE(r2[1].mean.has_value());
        CHECK(r2[1].excluded_cells == 2);
    }
    SECTION("too small") { CHECK_THROWS_AS(mean_overlap_per_corruption(OverlapMatrix({"x"})), ValidationError); }
}

TEST_CASE("mean overlap is invariant to corruption ordering", "[scores][property]") {
    SeededRng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform_int(0, 5));
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back("c" + std::to_string(i));
        OverlapMatrix m(names);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double s = i == j ? 1.0 : rng.uniform(0, 1.5);
                m.cell(i, j).score = m.cell(j, i).score = s;
            }
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(i)))]);
        std::vector<std::string> pnames;
        for (auto p : perm) pnames.push_back(names[p]);
        OverlapMatrix pm(pnames);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) pm.cell(i, j) = m.cell(perm[i], perm[j]);
        const auto a = mean_overlap_per_corruption(m);
        const auto b = mean_overlap_per_corruption(pm);
        for (std::size_t i = 0; i < n; ++i) REQUIRE(*b[i].mean == *a[perm[i]].mean);
    }
}
