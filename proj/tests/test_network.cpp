#include "cobench/network.hpp"
#include "cobench/rng.hpp"
#include "cobench/trainer.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace cobench;
using Catch::Approx;

namespace {

Image random_image(const ModelArch& a, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(a.height) * a.width * a.channels);
    for (auto& x : v) x = static_cast<float>(rng.uniform(0, 1));
    return Image(a.height, a.width, a.channels, std::move(v));
}

std::vector<double> random_params(const ModelArch& a, std::uint64_t seed) {
    const auto init = initialize_parameters(a, seed);
    std::vector<double> p(init.begin(), init.end());
    SeededRng rng = SeededRng(seed).derive("bias");
    for (const auto& block : parameter_layout(a))
        if (!block.is_weight)
            for (std::size_t i = block.offset; i < block.offset + block.size; ++i) p[i] = rng.uniform(-0.1, 0.1);
    return p;
}

ModelArch small_mlp() {
    ModelArch a;
    a.kind = ArchKind::mlp;
    a.height = a.width = 4;
    a.channels = 1;
    a.classes = 3;
    a.hidden = 5;
    return a;
}

ModelArch small_cnn() {
    ModelArch a;
    a.kind = ArchKind::cnn;
    a.height = 6;
    a.width = 7;
    a.channels = 3;
    a.classes = 3;
    a.conv1 = 2;
    a.conv2 = 3;
    return a;
}

// Central differences against the analytic gradient of batch_loss<double>.
void check_gradient(const ModelArch& arch, double weight_decay) {
    std::vector<Image> images;
    for (std::uint64_t s = 0; s < 3; ++s) images.push_back(random_image(arch, 100 + s));
    std::vector<const Image*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    const std::vector<int> labels{0, 2, 1};
    auto params = random_params(arch, 8);
    std::vector<double> grads(params.size());
    batch_loss<double>(arch, params, ptrs, labels, weight_decay, grads);

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = batch_loss<double>(arch, params, ptrs, labels, weight_decay);
        params[i] = keep - h;
        const double down = batch_loss<double>(arch, params, ptrs, labels, weight_decay);
        params[i] = keep;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::fabs(numeric - grads[i]) / std::max(1e-3, std::fabs(numeric) + std::fabs(grads[i])));
    }
    CHECK(worst < 1e-5);

    // single precision agrees with the double-precision gradient
    std::vector<float> pf(params.begin(), params.end()), gf(params.size());
    const float lf = batch_loss<float>(arch, pf, ptrs, labels, weight_decay, gf);
    CHECK(lf == Approx(batch_loss<double>(arch, params, ptrs, labels, weight_decay)).epsilon(1e-4));
    for (std::size_t i = 0; i < params.size(); ++i) REQUIRE(gf[i] == Approx(grads[i]).margin(1e-4).epsilon(1e-3));
}

} // namespace

TEST_CASE("architecture layout", "[network]") {
    const auto m = small_mlp();
    CHECK(parameter_count(m) == 16 * 5 + 5 + 5 * 3 + 3);
    const auto c = small_cnn();
    // conv1 3->2, conv2 2->3, dense 3*(6/2/2)*(7/2/2) -> 3
    CHECK(parameter_count(c) == (2 * 3 * 9 + 2) + (3 * 2 * 9 + 3) + (3 * 1 * 1 * 3 + 3));
    std::size_t total = 0;
    for (const auto& b : parameter_layout(c)) {
        CHECK(b.offset == total);
        total += b.size;
    }
    CHECK(total == parameter_count(c));
    CHECK(parse_arch_kind(to_string(ArchKind::cnn)) == ArchKind::cnn);
    CHECK_THROWS_AS(parse_arch_kind("resnet"), ValidationError);
    ModelArch bad = c;
    bad.classes = 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("cross entropy", "[network]") {
    for (int k : {2, 3, 10}) {
        std::vector<double> logits(static_cast<std::size_t>(k), 0.0), d(static_cast<std::size_t>(k));
        CHECK(cross_entropy<double>(logits, 1, d) == Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
        CHECK(d[1] == Approx(1.0 / k - 1.0));
        CHECK(d[0] == Approx(1.0 / k));
    }
    // stable for large logits
    const std::vector<double> big{1000.0, 0.0};
    CHECK(cross_entropy<double>(big, 0) == Approx(0.0).margin(1e-12));
    CHECK(cross_entropy<double>(big, 1) == Approx(1000.0));
    CHECK(std::isfinite(cross_entropy<float>(std::vector<float>{1e30f, -1e30f}, 1)));
}

TEST_CASE("argmax breaks ties low", "[network]") {
    CHECK(argmax<double>(std::vector<double>{0.5, 0.5, 0.1}) == 0);
    CHECK(argmax<double>(std::vector<double>{0.1, 0.7, 0.7}) == 1);
    CHECK(argmax<float>(std::vector<float>{0, 0, 0}) == 0);
}

TEST_CASE("mlp gradient matches finite differences", "[gradient]") { check_gradient(small_mlp(), 0.0); }
TEST_CASE("cnn gradient matches finite differences", "[gradient]") { check_gradient(small_cnn(), 0.0); }
TEST_CASE("gradient with weight decay", "[gradient]") {
    check_gradient(small_mlp(), 0.01);
    check_gradient(small_cnn(), 0.01);
}

TEST_CASE("a duplicated sample leaves the mean loss unchanged", "[network]") {
    const auto arch = small_cnn();
    const auto img = random_image(arch, 3);
    const auto params = random_params(arch, 4);
    const Image* one[] = {&img};
    const Image* two[] = {&img, &img};
    const int l1[] = {2};
    const int l2[] = {2, 2};
    std::vector<double> g1(params.size()), g2(params.size());
    const double a = batch_loss<double>(arch, params, one, l1, 0.0, g1);
    const double b = batch_loss<double>(arch, params, two, l2, 0.0, g2);
    CHECK(a == Approx(b).epsilon(1e-14));
    for (std::size_t i = 0; i < g1.size(); ++i) REQUIRE(g1[i] == Approx(g2[i]).margin(1e-14));
}

TEST_CASE("weight decay touches weights only", "[network]") {
    const auto arch = small_mlp();
    const auto img = random_image(arch, 5);
    const auto params = random_params(arch, 6);
    const Image* batch[] = {&img};
    const int labels[] = {1};
    std::vector<double> g0(params.size()), g1(params.size());
    const double l0 = batch_loss<double>(arch, params, batch, labels, 0.0, g0);
    const double l1 = batch_loss<double>(arch, params, batch, labels, 0.1, g1);
    double sq = 0.0;
    for (const auto& block : parameter_layout(arch))
        for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
            if (block.is_weight) sq += params[i] * params[i];
            REQUIRE(g1[i] - g0[i] == Approx(block.is_weight ? 0.1 * params[i] : 0.0).margin(1e-12));
        }
    CHECK(l1 - l0 == Approx(0.05 * sq).epsilon(1e-10));
    CHECK(weight_decay_term<double>(arch, params, 0.1) == Approx(0.05 * sq).epsilon(1e-12));
}

TEST_CASE("initialisation", "[network]") {
    const auto arch = small_cnn();
    const auto a = initialize_parameters(arch, 3);
    CHECK(a == initialize_parameters(arch, 3));
    CHECK(a != initialize_parameters(arch, 4));
    for (const auto& block : parameter_layout(arch)) {
        const double bound = std::sqrt(6.0 / static_cast<double>(block.fan_in));
        for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
            if (block.is_weight)
                REQUIRE(std::fabs(a[i]) <= bound);
            else
                REQUIRE(a[i] == 0.0f);
        }
    }
}
