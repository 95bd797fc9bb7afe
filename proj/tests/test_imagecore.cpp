#include "cobench/digest.hpp"
#include "cobench/error.hpp"
#include "cobench/image.hpp"
#include "cobench/ppm.hpp"
#include "cobench/rng.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <string>

using namespace cobench;
using Catch::Approx;

TEST_CASE("image layout", "[image]") {
    Image img(2, 3, 3, 0.25f);
    CHECK(img.size() == 18);
    CHECK(img.min_side() == 2);
    img.at(1, 2, 1) = 0.5f;
    CHECK(img.data()[(1 * 3 + 2) * 3 + 1] == 0.5f);
    CHECK_THROWS_AS(Image(2, 2, 2), ValidationError);
    CHECK_THROWS_AS(Image(2, 2, 1, std::vector<float>(3)), ValidationError);
}

TEST_CASE("clamp01", "[image]") {
    Image img(1, 3, 1, std::vector<float>{1.7f, -0.2f, 0.5f});
    const auto c = clamp01(img);
    CHECK(c.at(0, 0, 0) == 1.0f);
    CHECK(c.at(0, 1, 0) == 0.0f);
    CHECK(c.at(0, 2, 0) == 0.5f);
    CHECK(clamp01(c) == c);
    CHECK(in_unit_range(c));
    CHECK_FALSE(in_unit_range(img));

    SeededRng rng(3);
    for (int t = 0; t < 20; ++t) {
        std::vector<float> v(48);
        for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 2));
        const auto once = clamp01(Image(4, 4, 3, v));
        REQUIRE(clamp01(once) == once);
        REQUIRE(in_unit_range(once));
    }
}

TEST_CASE("rng matches the reference xoshiro256** stream", "[rng]") {
    // independent re-implementation (splitmix64 seeding, xoshiro256**)
    SeededRng a(0);
    CHECK(a.next_u64() == 0x99ec5f36cb75f2b4ULL);
    CHECK(a.next_u64() == 0xbf6e1f784956452aULL);
    CHECK(a.next_u64() == 0x1a5f849d4933e6e0ULL);
    SeededRng b(42);
    CHECK(b.next_u64() == 0x15780b2e0c2ec716ULL);
    CHECK(SeededRng(42).derive("augment").seed() == 0xc663b2a37ffd3de4ULL);
    CHECK(SeededRng(42).derive("augment").next_u64() == 0xadc8e4229eef8022ULL);
    CHECK(SeededRng(42).derive(7).seed() == 0xd56fd4491d82a4ddULL);
    CHECK(SeededRng(1).next_double() == 0.7029218331588505);
}

TEST_CASE("derived streams ignore parent consumption", "[rng]") {
    SeededRng parent(9);
    const auto before = parent.derive("x").next_u64();
    for (int i = 0; i < 10; ++i) parent.next_u64();
    CHECK(parent.derive("x").next_u64() == before);
    CHECK(parent.derive("x").seed() != parent.derive("y").seed());
    CHECK(parent.derive(1).seed() != parent.derive(2).seed());
}

TEST_CASE("rng distributions", "[rng]") {
    SeededRng rng(123);
    CHECK(rng.uniform(0, 0) == 0.0);
    CHECK(rng.normal(2.5, 0.0) == 2.5);

    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform(0, 1);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 100000 >= 0.495);
    CHECK(sum / 100000 <= 0.505);

    double m = 0.0, m2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(1.0, 2.0);
        m += x;
        m2 += x * x;
    }
    m /= n;
    CHECK(m == Approx(1.0).margin(0.03));
    CHECK(m2 / n - m * m == Approx(4.0).margin(0.08));

    for (double mean : {0.5, 7.0, 80.0, 900.0}) {
        double s = 0.0;
        for (int i = 0; i < 20000; ++i) {
            const auto k = rng.poisson(mean);
            REQUIRE(k >= 0);
            s += static_cast<double>(k);
        }
        CHECK(s / 20000 == Approx(mean).margin(4 * std::sqrt(mean / 20000) + 1e-9));
    }

    int counts[6] = {};
    for (int i = 0; i < 60000; ++i) {
        const auto k = rng.uniform_int(0, 5);
        REQUIRE(k >= 0);
        REQUIRE(k <= 5);
        ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
    CHECK(rng.uniform_int(4, 4) == 4);
}

TEST_CASE("sha256 test vectors", "[digest]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Sha256 inc;
    inc.update("a").update("bc");
    CHECK(inc.finish_hex() == sha256_hex("abc"));
    // little-endian integer encoding
    Sha256 le;
    le.update_u32(0x64636261u);
    CHECK(le.finish_hex() == sha256_hex("abcd"));
}

TEST_CASE("ppm encoding", "[ppm]") {
    const auto bytes = encode_ppm(Image(2, 2, 3));
    const std::string header = "P6\n2 2\n255\n";
    REQUIRE(bytes.size() == header.size() + 12);
    CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
    for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0);

    Image gray(1, 1, 1, 0.5f);
    const auto g = encode_ppm(gray);
    CHECK(g[g.size() - 1] == 128);
    CHECK(g[g.size() - 3] == 128);
}

TEST_CASE("ppm round trip stays within quantisation", "[ppm]") {
    testing::TempDir dir("ppm");
    SeededRng rng(77);
    std::vector<float> v(5 * 7 * 3);
    for (auto& x : v) x = static_cast<float>(rng.uniform(0, 1));
    const Image img(5, 7, 3, v);
    write_ppm(img, dir / "a.ppm");
    const auto back = read_ppm(dir / "a.ppm");
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < v.size(); ++i) REQUIRE(std::fabs(back.data()[i] - v[i]) <= 1.0f / 510.0f + 1e-7f);
}

TEST_CASE("ppm parse errors carry offsets", "[ppm]") {
    auto bytes_of = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
    const auto good = encode_ppm(Image(2, 2, 3, 0.3f));

    auto truncated = good;
    truncated.pop_back();
    try {
        decode_ppm(truncated);
        FAIL("truncated payload accepted");
    } catch (const ParseError& e) {
        CHECK(e.offset() == truncated.size());
    }
    CHECK_THROWS_AS(decode_ppm(bytes_of("P5\n2 2\n255\n")), ParseError);
    CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n")), ParseError);
    CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n65535\n")), ParseError);

    auto commented = bytes_of("P6\n# note\n1 1\n# more\n255\n");
    commented.insert(commented.end(), {255, 0, 51});
    const auto img = decode_ppm(commented);
    CHECK(img.at(0, 0, 0) == 1.0f);
    CHECK(img.at(0, 0, 2) == Approx(0.2f));
}

TEST_CASE("atomic write replaces files whole", "[ppm]") {
    testing::TempDir dir("atomic");
    const std::vector<std::uint8_t> a{1, 2, 3}, b{9};
    write_file_atomic(dir / "sub" / "f.bin", a);
    write_file_atomic(dir / "sub" / "f.bin", b);
    CHECK(read_file_bytes(dir / "sub" / "f.bin") == b);
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "sub")) files += e.is_regular_file();
    CHECK(files == 1);
}
