#include "cobench/dataset.hpp"
#include "cobench/ppm.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>

using namespace cobench;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     std::vector<std::uint8_t> payload, std::uint32_t channels = 0) {
    std::vector<std::uint8_t> b;
    put_be32(b, magic);
    put_be32(b, count);
    put_be32(b, rows);
    put_be32(b, cols);
    if (channels) put_be32(b, channels);
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

std::vector<std::uint8_t> idx_labels(std::vector<std::uint8_t> labels) {
    std::vector<std::uint8_t> b;
    put_be32(b, 0x801);
    put_be32(b, static_cast<std::uint32_t>(labels.size()));
    b.insert(b.end(), labels.begin(), labels.end());
    return b;
}

} // namespace

TEST_CASE("procshapes split sizes and balance", "[procshapes]") {
    const auto pair = generate_procshapes({2, 10, 24, 7});
    CHECK(pair.train.size() == 16);
    CHECK(pair.test.size() == 4);
    CHECK(std::count(pair.train.labels.begin(), pair.train.labels.end(), 0) == 8);
    CHECK(std::count(pair.test.labels.begin(), pair.test.labels.end(), 1) == 2);
    CHECK(pair.train.num_classes == 2);
    CHECK(pair.train.split == Split::train);
    CHECK(pair.test.split == Split::test);
    for (const auto& img : pair.train.images) {
        REQUIRE(img.height() == 24);
        REQUIRE(img.channels() == 3);
        REQUIRE(in_unit_range(img));
    }
    const auto odd = generate_procshapes({3, 7, 24, 1});
    CHECK(odd.train.size() == 15);
    CHECK(odd.test.size() == 6);
}

TEST_CASE("procshapes is deterministic in its seed", "[procshapes]") {
    const ProcShapesConfig cfg{4, 12, 32, 21};
    const auto a = generate_procshapes(cfg);
    const auto b = generate_procshapes(cfg);
    CHECK(a.train.digest() == b.train.digest());
    CHECK(a.test.digest() == b.test.digest());
    CHECK(a.train.digest() != a.test.digest());
    auto other = cfg;
    other.seed = 22;
    CHECK(generate_procshapes(other).train.digest() != a.train.digest());

    // images of one class are distinct draws
    CHECK_FALSE(a.train.images[0] == a.train.images[1]);

    CHECK_THROWS_AS(generate_procshapes({1, 10, 32, 1}), ValidationError);
    CHECK_THROWS_AS(generate_procshapes({11, 10, 32, 1}), ValidationError);
    CHECK_THROWS_AS(generate_procshapes({2, 10, 16, 1}), ValidationError);
    for (int k = 0; k < kProcShapeCount; ++k) CHECK_FALSE(procshape_name(k).empty());
}

TEST_CASE("dataset digest ignores provenance and tracks content", "[dataset]") {
    auto ds = generate_procshapes({2, 5, 24, 3}).train;
    const auto d = ds.digest();
    ds.provenance = "elsewhere";
    CHECK(ds.digest() == d);
    ds.labels[0] = 1 - ds.labels[0];
    CHECK(ds.digest() != d);
    ds.labels[0] = 1 - ds.labels[0];
    ds.images[2].at(0, 0, 0) += 0.001f;
    CHECK(ds.digest() != d);

    ds.labels[0] = 5;
    CHECK_THROWS_AS(ds.validate(), ValidationError);
}

TEST_CASE("idx round trip", "[idx]") {
    testing::TempDir dir("idx");
    const auto ds = generate_procshapes({3, 6, 24, 9}).train;
    write_idx(ds, dir / "i.idx", dir / "l.idx");
    const auto back = load_idx(dir / "i.idx", dir / "l.idx");
    REQUIRE(back.size() == ds.size());
    CHECK(back.labels == ds.labels);
    CHECK(back.num_classes == 3);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t k = 0; k < ds.images[i].size(); ++k)
            REQUIRE(std::fabs(back.images[i].data()[k] - ds.images[i].data()[k]) <= 1.0f / 510.0f + 1e-7f);
    // quantised data survives exactly
    write_idx(back, dir / "i2.idx", dir / "l2.idx");
    CHECK(load_idx(dir / "i2.idx", dir / "l2.idx").digest() == back.digest());
    CHECK(read_file_bytes(dir / "i2.idx") == read_file_bytes(dir / "i.idx"));
}

TEST_CASE("idx parsing", "[idx]") {
    const auto gray = parse_idx(idx_images(0x803, 1, 1, 2, {255, 0}), idx_labels({4}));
    REQUIRE(gray.size() == 1);
    CHECK(gray.images[0].channels() == 1);
    CHECK(gray.images[0].at(0, 0, 0) == 1.0f);
    CHECK(gray.images[0].at(0, 1, 0) == 0.0f);
    CHECK(gray.labels[0] == 4);
    CHECK(gray.num_classes == 5);

    const auto rgb = parse_idx(idx_images(0x804, 1, 1, 1, {0, 51, 255}, 3), idx_labels({0}));
    CHECK(rgb.images[0].channels() == 3);
    CHECK(rgb.images[0].at(0, 0, 1) == 0.2f);

    CHECK_THROWS_AS(parse_idx(idx_images(0x802, 1, 1, 2, {1, 2}), idx_labels({0})), ParseError);
    CHECK_THROWS_AS(parse_idx(idx_images(0x803, 2, 1, 2, {1, 2, 3, 4}), idx_labels({0})), ParseError);
    CHECK_THROWS_AS(parse_idx(idx_images(0x804, 1, 1, 1, {1, 2}, 2), idx_labels({0})), ParseError);
    try {
        parse_idx(idx_images(0x803, 1, 2, 2, {1, 2, 3}), idx_labels({0}));
        FAIL("truncated payload accepted");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 16 + 3);
    }
    try {
        parse_idx(std::vector<std::uint8_t>{0, 0, 8}, idx_labels({0}));
        FAIL("truncated header accepted");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 3);
    }
}

TEST_CASE("corrupt_dataset applies per-image streams", "[corrupt]") {
    const auto ds = generate_procshapes({2, 5, 32, 4}).test;
    const CorruptionSpec spec{CorruptionId::gaussian_noise, 4, {}};
    const auto c = corrupt_dataset(ds, spec, 77);
    REQUIRE(c.size() == ds.size());
    CHECK(c.labels == ds.labels);
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE(c.images[i] == apply(spec, ds.images[i], SeededRng(77).derive(i)));
    CHECK(corrupt_dataset(ds, spec, 77).digest() == c.digest());
    CHECK(corrupt_dataset(ds, spec, 78).digest() != c.digest());

    // a subset in another order sees the same per-index streams
    Dataset rev = ds;
    std::reverse(rev.images.begin(), rev.images.end());
    std::reverse(rev.labels.begin(), rev.labels.end());
    const auto cr = corrupt_dataset(rev, spec, 77);
    const std::size_t last = ds.size() - 1;
    CHECK(cr.images[last] == apply(spec, ds.images[0], SeededRng(77).derive(last)));

    const CorruptionSpec identity{CorruptionId::contrast, 1, {{"alpha", 1.0}}};
    CHECK(corrupt_dataset(ds, identity, 5).digest() == ds.digest());
}
