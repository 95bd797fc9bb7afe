#include "cobench/digest.hpp"
#include "cobench/json_io.hpp"
#include "cobench/ppm.hpp"
#include "cobench/scores.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

using namespace cobench;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    if (!fs::exists(p)) return {};
    const auto b = read_file_bytes(p);
    return std::string(b.begin(), b.end());
}

Run cli(const testing::TempDir& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd =
        std::string("'") + COBENCH_CLI_PATH + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

Json tiny_plan_json(const std::vector<std::string>& ids) {
    // cache_dir "cache" resolves next to the plan file
    return testing::tiny_plan("cache", ids).to_json();
}

} // namespace

TEST_CASE("usage errors exit with status 2", "[cli]") {
    testing::TempDir dir("cli-usage");
    CHECK(cli(dir, "--help").code == 0);
    CHECK(cli(dir, "").code == 2);
    CHECK(cli(dir, "frobnicate").code == 2);
    CHECK(cli(dir, "generate-data").code == 2);
    CHECK(cli(dir, "generate-data --out " + (dir / "d").string() + " --classes 1").code == 2);

    write_ppm(Image(8, 8, 3, 0.5f), dir / "in.ppm");
    const auto bad = cli(dir, "corrupt " + (dir / "in.ppm").string() + " --id snow");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("gaussian_noise") != std::string::npos);
    CHECK(cli(dir, "corrupt " + (dir / "in.ppm").string() + " --id fog --severity 9").code == 2);
    CHECK(cli(dir, "corrupt " + (dir / "in.ppm").string() + " --id fog --param t").code == 2);

    write_text(dir / "plan.json", "{\"corruptions\": [\"fog\", \"fog\"]}");
    CHECK(cli(dir, "matrix --plan " + (dir / "plan.json").string() + " --out " + (dir / "m").string()).code == 2);
    write_text(dir / "plan.json", "{\"corruptions\": [");
    CHECK(cli(dir, "matrix --plan " + (dir / "plan.json").string() + " --out " + (dir / "m").string()).code == 2);
}

TEST_CASE("corrupt is deterministic and honours identities", "[cli]") {
    testing::TempDir dir("cli-corrupt");
    SeededRng rng(5);
    Image img(32, 32, 3);
    for (float& v : img.data()) v = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
    write_ppm(img, dir / "in.ppm");
    const std::string in = (dir / "in.ppm").string();

    REQUIRE(cli(dir, "corrupt " + in + " --id shot_noise --seed 3 --out " + (dir / "a.ppm").string()).code == 0);
    REQUIRE(cli(dir, "corrupt " + in + " --id shot_noise --seed 3 --out " + (dir / "b.ppm").string()).code == 0);
    CHECK(read_file_bytes(dir / "a.ppm") == read_file_bytes(dir / "b.ppm"));
    REQUIRE(cli(dir, "corrupt " + in + " --id shot_noise --seed 4 --out " + (dir / "c.ppm").string()).code == 0);
    CHECK(read_file_bytes(dir / "a.ppm") != read_file_bytes(dir / "c.ppm"));
    const auto direct = apply({CorruptionId::shot_noise, 3, {}}, read_ppm(dir / "in.ppm"), SeededRng(3));
    CHECK(read_file_bytes(dir / "a.ppm") == encode_ppm(direct));

    REQUIRE(cli(dir, "corrupt " + in + " --id contrast --param alpha=1 --out " + (dir / "id.ppm").string()).code == 0);
    CHECK(read_file_bytes(dir / "id.ppm") == read_file_bytes(dir / "in.ppm"));

    const auto def = cli(dir, "corrupt " + in + " --id border --severity 2");
    REQUIRE(def.code == 0);
    CHECK(fs::exists(dir / "in-border-s2.ppm"));
}

TEST_CASE("matrix, balance, heatmap and report commands", "[cli]") {
    testing::TempDir dir("cli-matrix");
    write_text(dir / "plan.json", tiny_plan_json({"gaussian_noise", "contrast", "border"}).dump(2));
    const std::string plan = (dir / "plan.json").string();

    const auto first = cli(dir, "matrix --plan " + plan + " --out " + (dir / "m1").string());
    REQUIRE(first.code == 0);
    for (const char* f : {"accuracy.csv", "accuracy.json", "overlap.csv", "overlap.json", "heatmap.ppm", "run.json",
                          "manifest.json"})
        CHECK(fs::exists(dir / "m1" / f));
    CHECK(fs::exists(dir / "cache" / "models"));
    const auto run1 = read_json(dir / "m1" / "run.json");
    CHECK(run1.at("trainings_run") == 4);

    // manifest digests match the files
    const auto man = read_json(dir / "m1" / "manifest.json");
    CHECK(man.at("command") == "matrix");
    for (const auto& o : man.at("outputs"))
        CHECK(o.at("sha256") == sha256_file_hex(dir / "m1" / o.at("path").get<std::string>()));

    const auto second =
        cli(dir, "matrix --plan " + plan + " --out " + (dir / "m2").string() + " --workers 2 --resume");
    REQUIRE(second.code == 0);
    const auto run2 = read_json(dir / "m2" / "run.json");
    CHECK(run2.at("trainings_run") == 0);
    CHECK(run2.at("overlap_digest") == run1.at("overlap_digest"));
    CHECK(slurp(dir / "m2" / "overlap.json") == slurp(dir / "m1" / "overlap.json"));
    CHECK(slurp(dir / "m2" / "accuracy.csv") == slurp(dir / "m1" / "accuracy.csv"));

    const auto bal = cli(dir, "balance --matrix " + (dir / "m1" / "overlap.json").string() + " --out " +
                                  (dir / "bal").string());
    CHECK((bal.code == 0));
    CHECK(fs::exists(dir / "bal" / "manifest.json"));

    REQUIRE(cli(dir, "render-heatmap --matrix " + (dir / "m1" / "overlap.json").string() + " --cell-px 3 --out " +
                         (dir / "h.ppm").string())
                .code == 0);
    CHECK(read_ppm(dir / "h.ppm").height() == 9);

    const auto pair = cli(dir, "pair --plan " + plan + " gaussian_noise border --out " + (dir / "p").string());
    CHECK(pair.code == 0);
    CHECK(pair.out.find("gaussian_noise border") != std::string::npos);

    const auto rep = cli(dir, "report --table " + (dir / "m1" / "accuracy.csv").string() +
                                  " --set1 gaussian_noise,contrast --set2 border --out " + (dir / "r").string());
    CHECK(rep.code == 0);
    CHECK(rep.out.find("100 (0)") != std::string::npos);
}

TEST_CASE("published CE table report", "[cli]") {
    testing::TempDir dir("cli-table1");
    write_text(dir / "errors.csv", "model,clean,set1,set2,border,obstruction\n"
                                   "Reference,0.5,1,1,1,1\n"
                                   "Standard,0.2,0.81,0.73,0.53,0.63\n"
                                   "DeepAug,0.2,0.59,0.63,0.60,0.72\n");
    const auto r = cli(dir, "report --table " + (dir / "errors.csv").string() +
                                " --errors --set1 set1 --set2 set2 --extra border,obstruction"
                                " --reference Reference --baseline Standard --out " +
                                (dir / "r").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("DeepAug   59 (-22)") != std::string::npos);
    CHECK(r.out.find("63 (-10)") != std::string::npos);
    CHECK(r.out.find("Standard  81 (0)") != std::string::npos);
    CHECK(slurp(dir / "r" / "report.txt") == r.out);
}

TEST_CASE("data, train and eval commands", "[cli]") {
    testing::TempDir dir("cli-train");
    const std::string data = (dir / "data").string();
    REQUIRE(cli(dir, "generate-data --out " + data + " --classes 3 --per-class 20 --side 24 --seed 2").code == 0);
    for (const char* f : {"train-images.idx", "train-labels.idx", "test-images.idx", "test-labels.idx"})
        CHECK(fs::exists(dir / "data" / f));
    REQUIRE(cli(dir, "generate-data --out " + (dir / "data2").string() +
                         " --classes 3 --per-class 20 --side 24 --seed 2")
                .code == 0);
    CHECK(read_file_bytes(dir / "data" / "train-images.idx") == read_file_bytes(dir / "data2" / "train-images.idx"));

    const std::string ckpt = (dir / "m.ckpt").string();
    REQUIRE(cli(dir, "train --data " + data + " --out " + ckpt + " --arch mlp --epochs 2 --augment fog").code == 0);
    CHECK(fs::exists(dir / "m.metrics.json"));
    const auto digest = load_checkpoint(ckpt).digest();
    REQUIRE(cli(dir, "train --data " + data + " --out " + (dir / "n.ckpt").string() +
                         " --arch mlp --epochs 2 --augment fog")
                .code == 0);
    CHECK(load_checkpoint(dir / "n.ckpt").digest() == digest);

    const auto ev = cli(dir, "eval --model " + ckpt + " --data " + data + " --corruptions fog,border --out " +
                                 (dir / "e").string());
    REQUIRE(ev.code == 0);
    const auto row = read_json(dir / "e" / "row.json");
    CHECK(row.at("accuracy").contains("clean"));
    CHECK(row.at("accuracy").contains("border"));

    // joining a matrix computed on the same data
    Json plan = tiny_plan_json({"fog", "border"});
    plan["dataset"] = Json{{"kind", "idx"},
                           {"train_images", "data/train-images.idx"},
                           {"train_labels", "data/train-labels.idx"},
                           {"test_images", "data/test-images.idx"},
                           {"test_labels", "data/test-labels.idx"}};
    plan["master_seed"] = 1;
    write_text(dir / "plan.json", plan.dump(2));
    REQUIRE(cli(dir, "matrix --plan " + (dir / "plan.json").string() + " --out " + (dir / "m").string()).code == 0);
    const auto joined = cli(dir, "eval --model " + ckpt + " --data " + data + " --corruptions fog,border --join " +
                                     (dir / "m" / "accuracy.json").string() + " --name extra --out " +
                                     (dir / "j").string());
    REQUIRE(joined.code == 0);
    const auto table = AccuracyTable::from_json(read_json(dir / "j" / "accuracy.json"));
    CHECK(table.has_model("extra"));
    CHECK(table.at("extra", "border") == row.at("accuracy").at("border").get<double>());

    // a table over other data refuses the row
    REQUIRE(cli(dir, "generate-data --out " + (dir / "other").string() + " --classes 3 --per-class 20 --side 24 --seed 9")
                .code == 0);
    CHECK(cli(dir, "eval --model " + ckpt + " --data " + (dir / "other").string() + " --corruptions fog,border --join " +
                       (dir / "m" / "accuracy.json").string() + " --out " + (dir / "j2").string())
              .code == 2);
}
