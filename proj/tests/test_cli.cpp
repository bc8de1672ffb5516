#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clv/data/video_io.hpp"
#include "test_utils.hpp"

namespace clv {
namespace {

namespace fs = std::filesystem;
using test::TempDir;

struct Result {
    int code = -1;
    std::string out;
};

/// Runs the clv binary with CLV_OUTPUT_ROOT pointing at `root`; stderr is merged into the output.
Result clv(const fs::path& root, const std::string& args, const std::string& env = "") {
    const std::string cmd =
        "CLV_OUTPUT_ROOT='" + root.string() + "' " + env + " '" CLV_BINARY "' " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    Result r;
    if (p == nullptr) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<nlohmann::json> records(const fs::path& file) {
    std::vector<nlohmann::json> out;
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

const std::string kQuick = " --epochs 1 --probe-steps 20 ";

void prepare_pair(const fs::path& root) {
    ASSERT_EQ(clv(root, "prepare --synthetic --name hgd --subjects 8 --clips-per-subject 2 --seed 1").code, 0);
    ASSERT_EQ(clv(root, "prepare --synthetic --name adcd --subjects 8 --clips-per-subject 2 --seed 2 "
                        "--control-background-shift 0.1").code,
              0);
}

TEST(Cli, PrepareSyntheticIsDeterministic) {
    TempDir a, b;
    const std::string args = "prepare --synthetic --subjects 10 --separation 0.3 --seed 7 --clips-per-subject 2";
    const auto ra = clv(a.path(), args);
    ASSERT_EQ(ra.code, 0) << ra.out;
    ASSERT_EQ(clv(b.path(), args).code, 0);
    EXPECT_NE(ra.out.find("10 subjects, 20 clips"), std::string::npos) << ra.out;

    std::map<std::string, std::string> files_a, files_b;
    for (auto [dir, files] : {std::pair{&a, &files_a}, std::pair{&b, &files_b}}) {
        for (const auto& e : fs::recursive_directory_iterator(dir->path() / "data")) {
            if (e.is_regular_file()) (*files)[fs::relative(e.path(), dir->path()).string()] = slurp(e.path());
        }
    }
    EXPECT_EQ(files_a.size(), 20u * 16u);
    EXPECT_TRUE(files_a == files_b);
}

TEST(Cli, PrepareMissingRootExitsTwoWithoutManifest) {
    TempDir dir;
    const auto r = clv(dir.path(), "prepare --dataset hgd --root '" + (dir.path() / "nope").string() + "'");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("nope"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir.path() / "manifests" / "hgd.jsonl"));
}

TEST(Cli, PrepareHgdReportsCountsAndSkippedClips) {
    TempDir dir;
    const fs::path data = dir.path() / "raw";
    Frames8 f;
    f.t = 4;
    f.h = f.w = 8;
    f.rgb.assign(4 * 8 * 8 * 3, 100);
    write_frame_folder(f, data / "hgd" / "ASD" / "Placing" / "p01" / "c1");
    write_frame_folder(f, data / "hgd" / "Control" / "Pouring" / "p02" / "c1");
    fs::create_directories(data / "hgd" / "Control" / "Pouring" / "p02" / "broken");
    std::ofstream(data / "hgd" / "Control" / "Pouring" / "p02" / "broken" / "frame_00000.png") << "garbage";

    const auto r = clv(dir.path(), "prepare --dataset hgd --root '" + data.string() + "'");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("2 clips, 1 ASD subjects, 1 Control subjects"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("expected 19 ASD and 20 Control"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("broken"), std::string::npos) << r.out;

    const fs::path strict_manifest = dir.path() / "strict.jsonl";
    const auto s = clv(dir.path(), "prepare --strict --dataset hgd --root '" + data.string() + "' --manifest '" +
                                       strict_manifest.string() + "'");
    EXPECT_EQ(s.code, 2) << s.out;
    EXPECT_NE(s.out.find("broken"), std::string::npos) << s.out;
    EXPECT_FALSE(fs::exists(strict_manifest));
}

TEST(Cli, RunAppendsOneRecordAndRepeatsIdentically) {
    TempDir dir;
    ASSERT_EQ(clv(dir.path(), "prepare --synthetic --subjects 8 --clips-per-subject 2").code, 0);
    const std::string args = "run --method simclr --protocol baseline --dataset synth --seed 3" + kQuick;
    const auto first = clv(dir.path(), args, "CLV_DETERMINISTIC=1");
    ASSERT_EQ(first.code, 0) << first.out;
    ASSERT_EQ(records(dir.path() / "results.jsonl").size(), 1u);
    ASSERT_EQ(clv(dir.path(), args + " --deterministic").code, 0);

    const auto recs = records(dir.path() / "results.jsonl");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0], recs[1]);
    EXPECT_EQ(recs[0]["method"], "simclr");
    EXPECT_EQ(recs[0]["protocol"]["key"], "baseline/hgd");

    const auto runs = records(dir.path() / "runs.jsonl");
    ASSERT_EQ(runs.size(), 2u);
    EXPECT_EQ(runs[0]["deterministic"], true);
    EXPECT_EQ(runs[0]["config"]["regime"]["seed"], 3);
}

TEST(Cli, CrossRunProducesCrossRecord) {
    TempDir dir;
    prepare_pair(dir.path());
    const auto r = clv(dir.path(), "run --method supcon --protocol cross --train-dataset hgd --test-dataset adcd" + kQuick);
    ASSERT_EQ(r.code, 0) << r.out;
    const auto recs = records(dir.path() / "results.jsonl");
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0]["protocol"]["key"], "cross/hgd->adcd");
    EXPECT_EQ(recs[0]["method"], "supcon");
}

TEST(Cli, ExitCodesFollowTheContract) {
    TempDir dir;
    ASSERT_EQ(clv(dir.path(), "prepare --synthetic --subjects 8 --clips-per-subject 2").code, 0);
    EXPECT_EQ(clv(dir.path(), "report").code, 5);
    EXPECT_EQ(clv(dir.path(), "run --protocol setup2 --test test3").code, 4);
    EXPECT_EQ(clv(dir.path(), "run --method resnet --dataset synth").code, 4);
    EXPECT_EQ(clv(dir.path(), "run --protocol cross --train-dataset hgd --test-dataset hgd").code, 4);
    EXPECT_EQ(clv(dir.path(), "run --no-such-flag").code, 4);
    EXPECT_EQ(clv(dir.path(), "run --method simclr --dataset synth --lr 1e30 --epochs 3").code, 3);
    EXPECT_EQ(clv(dir.path(), "run --protocol baseline --dataset adcd").code, 2);
    EXPECT_EQ(clv(dir.path(), "--help").code, 0);
}

TEST(Cli, RunManifestIsWrittenBeforeHeavyWork) {
    TempDir dir;
    // The manifest does not exist, so the run fails while loading data; the run record is already there.
    const auto r = clv(dir.path(), "run --protocol baseline --dataset adcd --seed 12");
    EXPECT_EQ(r.code, 2);
    const auto runs = records(dir.path() / "runs.jsonl");
    ASSERT_EQ(runs.size(), 1u);
    EXPECT_EQ(runs[0]["seed"], 12);
    EXPECT_TRUE(fs::exists(runs[0]["config_file"].get<std::string>()));
}

TEST(Cli, ConfigFileSitsBetweenDefaultsAndFlags) {
    TempDir dir;
    ASSERT_EQ(clv(dir.path(), "prepare --synthetic --subjects 8 --clips-per-subject 2").code, 0);
    const fs::path ini = dir.path() / "exp.ini";
    std::ofstream(ini) << "[run]\nmethod=\"binclassifier\"\ndataset=\"synth\"\nepochs=1\nseed=9\nbatch-size=4\n";
    const auto r = clv(dir.path(), "--config '" + ini.string() + "' run --seed 5");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rec = records(dir.path() / "results.jsonl").at(0);
    const auto& regime = rec["metadata"]["config"]["regime"];
    EXPECT_EQ(regime["method"], "binclassifier");  // from the file
    EXPECT_EQ(regime["epochs"], 1);                 // from the file
    EXPECT_EQ(regime["batch_size"], 4);             // from the file
    EXPECT_EQ(regime["seed"], 5);                   // flag wins
    EXPECT_EQ(regime["learning_rate"], 1e-3);       // default
}

TEST(Cli, SavedRunConfigReproducesTheRecord) {
    TempDir dir;
    ASSERT_EQ(clv(dir.path(), "prepare --synthetic --subjects 8 --clips-per-subject 2").code, 0);
    ASSERT_EQ(clv(dir.path(), "run --method supcon --dataset synth --temperature 0.2 --seed 4" + kQuick).code, 0);
    const auto ini = records(dir.path() / "runs.jsonl").at(0)["config_file"].get<std::string>();
    const auto r = clv(dir.path(), "--config '" + ini + "' run");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto recs = records(dir.path() / "results.jsonl");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0], recs[1]);
}

TEST(Cli, ReportTablesCsvFiltersAndFigures) {
    TempDir dir;
    prepare_pair(dir.path());
    for (const char* m : {"binclassifier", "simclr", "supcon"}) {
        ASSERT_EQ(clv(dir.path(), std::string("run --protocol baseline --dataset hgd --method ") + m + kQuick).code, 0);
    }
    ASSERT_EQ(clv(dir.path(), "run --protocol setup3 --test test1 --method simclr" + kQuick).code, 0);

    const auto text = clv(dir.path(), "report");
    ASSERT_EQ(text.code, 0) << text.out;
    EXPECT_NE(text.out.find("BinClassifier"), std::string::npos);
    EXPECT_NE(text.out.find("SupCLR"), std::string::npos);
    EXPECT_NE(text.out.find("Average accuracy by protocol"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir.path() / "figures" / "baseline_hgd.png"));
    EXPECT_TRUE(fs::exists(dir.path() / "figures" / "summary.png"));

    const auto csv = clv(dir.path(), "report --format csv --no-figures");
    ASSERT_EQ(csv.code, 0);
    std::istringstream in(csv.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "protocol,row,BinClassifier,SimCLR,SupCLR,best");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
    }
    EXPECT_EQ(rows, 3 + 3);  // (2 classes + Average) per protocol; two clips per subject cover Reach and Lift

    const auto filtered = clv(dir.path(), "report --format csv --no-figures --filter protocol=setup3");
    ASSERT_EQ(filtered.code, 0);
    EXPECT_EQ(filtered.out.find("baseline/"), std::string::npos) << filtered.out;
    EXPECT_NE(filtered.out.find("setup3/test1,Average"), std::string::npos) << filtered.out;
}

}  // namespace
}  // namespace clv
